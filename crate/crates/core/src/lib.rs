//! Realizing directed distance tables by weighted planar nests with all
//! terminals on the outer boundary.
//!
//! * [`metric`] quasi-metrics, circular orderings and the Monge test
//! * [`search`] finding an ordering, or proving none exists
//! * [`nest`] planar nests, faces and trajectories
//! * [`lp`] and [`weights`] exact feasibility of edge weights
//! * [`realize`] path-by-path construction and verification
//! * [`simplify`] rewrites that shrink a realizing nest
//! * [`certify`] restricting pairs and routings
//! * [`gen`] and [`io`] generators and file formats

pub mod certify;
pub mod gen;
pub mod io;
pub mod lp;
pub mod metric;
pub mod nest;
pub mod rational;
pub mod realize;
pub mod search;
pub mod simplify;
pub mod weights;

pub use metric::{monge_check, validate, CircularOrdering, MongeResult, PartialQuasiMetric, QuasiMetric};
pub use nest::PlanarNest;
pub use rational::{ExtendedRational, Rational};
pub use realize::{realize, realize_auto, verify, WeightedInstance};
pub use search::{find_ordering, SearchOutcome};
pub use weights::{check_weights, WeightCheck};
