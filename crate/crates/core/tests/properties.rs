use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use osreal_core::certify::{chain_inequality, sample_good_sequence};
use osreal_core::gen::{gen_random_nest, gen_random_quasimetric, gen_shortest_nest, NestConfig};
use osreal_core::io;
use osreal_core::lp::{self, Constraint, LpOutcome, Relation};
use osreal_core::metric::{monge_check, validate, CircularOrdering, QuasiMetric};
use osreal_core::rational::{rat, ExtendedRational};
use osreal_core::search::{brute_force_ordering, find_ordering, SearchOutcome};
use osreal_core::simplify::{shared_vertex_bound, shared_vertices, simplify, vertex_bound, SimplifyOptions};
use osreal_core::{realize, verify};

/// Diagonal zero, other entries small integers or `inf`.
fn table() -> impl Strategy<Value = (QuasiMetric, Vec<usize>)> {
    (4usize..=7).prop_flat_map(|k| {
        (
            Just(k),
            proptest::collection::vec(prop_oneof![9 => (1i64..12).prop_map(Some), 1 => Just(None)], k * k),
            Just((0..k).collect::<Vec<_>>()).prop_shuffle(),
        )
            .prop_map(|(k, raw, order)| {
                let names: Vec<String> = (0..k).map(|i| format!("v{i}")).collect();
                let d = QuasiMetric::from_fn(names, |i, j| match (i == j, raw[i * k + j]) {
                    (true, _) => ExtendedRational::zero(),
                    (false, Some(x)) => ExtendedRational::from_int(x),
                    (false, None) => ExtendedRational::Infinite,
                })
                .unwrap();
                (d, order)
            })
    })
}

/// Every quadruple of positions `i < j < l < m`, at all four rotations.
fn naive_monge(d: &QuasiMetric, ord: &[usize]) -> bool {
    let k = ord.len();
    let mut ok = true;
    for i in 0..k {
        for j in 0..k {
            for l in 0..k {
                for m in 0..k {
                    let pos = [i, j, l, m];
                    let distinct = (0..4).all(|x| (x + 1..4).all(|y| pos[x] != pos[y]));
                    // cyclically increasing: exactly one descent around the cycle
                    let descents = (0..4).filter(|&x| pos[x] > pos[(x + 1) % 4]).count();
                    if !distinct || descents != 1 {
                        continue;
                    }
                    let [a, b, c, e] = pos.map(|p| ord[p]);
                    if d.d(a, c).clone() + d.d(b, e).clone() < d.d(a, e).clone() + d.d(b, c).clone() {
                        ok = false;
                    }
                }
            }
        }
    }
    ok
}

fn sigma(d: &QuasiMetric, ord: &[usize]) -> CircularOrdering {
    CircularOrdering::from_indices(d, ord)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn monge_is_rotation_and_mirror_invariant((d, ord) in table(), s in 0usize..8) {
        let sg = sigma(&d, &ord);
        let base = monge_check(&d, &sg).unwrap().is_pass();
        prop_assert_eq!(monge_check(&d, &sg.rotate(s)).unwrap().is_pass(), base);
        prop_assert_eq!(monge_check(&d, &sg.mirror()).unwrap().is_pass(), base);
        prop_assert_eq!(monge_check(&d, &sg.mirror().rotate(s)).unwrap().is_pass(), base);
    }

    #[test]
    fn monge_matches_naive_enumeration((d, ord) in table()) {
        prop_assert_eq!(monge_check(&d, &sigma(&d, &ord)).unwrap().is_pass(), naive_monge(&d, &ord));
    }

    #[test]
    fn reported_violation_is_real((d, ord) in table()) {
        if let osreal_core::MongeResult::Violation(v) = monge_check(&d, &sigma(&d, &ord)).unwrap() {
            let t: Vec<usize> = v.quadruple.iter().map(|n| d.index_of(n).unwrap()).collect();
            let lhs = d.d(t[0], t[2]).clone() + d.d(t[1], t[3]).clone();
            let rhs = d.d(t[0], t[3]).clone() + d.d(t[1], t[2]).clone();
            prop_assert!(lhs < rhs);
            let p: Vec<usize> = t.iter().map(|x| ord.iter().position(|y| y == x).unwrap()).collect();
            prop_assert_eq!((0..4).filter(|&x| p[x] > p[(x + 1) % 4]).count(), 1);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn search_agrees_with_brute_force(k in 3usize..=6, seed in any::<u64>()) {
        let d = gen_random_quasimetric(k, seed);
        let brute = brute_force_ordering(&d).unwrap();
        match find_ordering(&d) {
            SearchOutcome::Found(s) => {
                prop_assert!(monge_check(&d, &s).unwrap().is_pass());
                prop_assert!(brute.is_some());
            }
            SearchOutcome::NotRealizable(_) => prop_assert!(brute.is_none()),
        }
    }

    #[test]
    fn generated_tables_are_monge_on_the_boundary(k in 2usize..=6, paths in 1usize..8, ring in any::<bool>(), seed in any::<u64>()) {
        let g = gen_random_nest(&NestConfig { ring, ..NestConfig::new(k, paths, seed) });
        prop_assert!(validate(&g.metric).is_empty());
        let names = g.instance.nest.terminals();
        let s = CircularOrdering::new(g.instance.nest.sigma().iter().map(|&t| names[t].clone()).collect()).unwrap();
        prop_assert!(monge_check(&g.metric, &s).unwrap().is_pass());
        prop_assert!(verify(&g.instance, &g.metric).is_empty());
        prop_assert!(matches!(find_ordering(&g.metric), SearchOutcome::Found(_)));
    }

    #[test]
    fn files_round_trip(k in 2usize..=6, paths in 0usize..8, seed in any::<u64>()) {
        let g = gen_random_nest(&NestConfig::new(k, paths, seed));
        let m = io::parse_metric(&io::metric_to_json(&g.metric)).unwrap();
        prop_assert_eq!(&m, &g.metric);
        let i = io::parse_instance(&io::instance_to_json(&g.instance)).unwrap();
        prop_assert_eq!(&i, &g.instance);
        let d = gen_random_quasimetric(k, seed);
        prop_assert_eq!(io::parse_metric(&io::metric_to_json(&d)).unwrap(), d);
    }

    #[test]
    fn random_lps_certify_themselves(n in 1usize..5, rows in proptest::collection::vec((proptest::collection::vec(-3i64..4, 4), any::<bool>(), -6i64..7), 1..8)) {
        let cs: Vec<Constraint> = rows
            .iter()
            .map(|(a, le, b)| Constraint {
                coeffs: a.iter().take(n).enumerate().filter(|(_, &x)| x != 0).map(|(j, &x)| (j, rat(x))).collect(),
                relation: if *le { Relation::Le } else { Relation::Ge },
                rhs: rat(*b),
            })
            .collect();
        match lp::solve(n, &cs) {
            LpOutcome::Feasible(x) => {
                prop_assert!(x.iter().all(|v| *v >= rat(0)));
                prop_assert!(lp::satisfies(&x, &cs));
            }
            LpOutcome::Infeasible(f) => prop_assert!(f.verify(n, &cs)),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn realized_tables_verify(k in 3usize..=5, paths in 1usize..6, seed in any::<u64>()) {
        let g = gen_random_nest(&NestConfig::new(k, paths, seed));
        let names = g.instance.nest.terminals();
        let s = CircularOrdering::new(g.instance.nest.sigma().iter().map(|&t| names[t].clone()).collect()).unwrap();
        let inst = realize(&g.metric, &s).unwrap();
        prop_assert!(verify(&inst, &g.metric).is_empty());
    }

    #[test]
    fn simplify_keeps_distances_and_bounds(k in 3usize..=5, ring in any::<bool>(), seed in any::<u64>()) {
        let Some(g) = gen_shortest_nest(&NestConfig { ring, ..NestConfig::new(k, k * k, seed) }) else { return Ok(()) };
        let s = simplify(&g.instance, SimplifyOptions::default()).unwrap();
        prop_assert!(verify(&s.instance, &g.metric).is_empty());
        let n = &s.instance.nest;
        for p in 0..n.paths().len() {
            for q in p + 1..n.paths().len() {
                prop_assert!(shared_vertices(n, p, q) <= shared_vertex_bound(k));
            }
        }
        prop_assert!(n.vertex_count() as u128 <= vertex_bound(k));
        prop_assert!(n.vertex_count() <= g.instance.nest.vertex_count());
    }

    #[test]
    fn chains_hold_on_monge_tables(k in 4usize..=7, seed in any::<u64>()) {
        let g = gen_random_nest(&NestConfig { ring: true, ..NestConfig::new(k, k, seed) });
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let names = g.instance.nest.terminals();
        let s = CircularOrdering::new(g.instance.nest.sigma().iter().map(|&t| names[t].clone()).collect()).unwrap();
        let mut ts: Vec<usize> = (0..k).collect();
        ts.shuffle(&mut rng);
        let (a, b) = (ts[0], ts[1]);
        let seq = sample_good_sequence(&g.metric, &s, a, b, 4, &mut rng).unwrap();
        prop_assert!(chain_inequality(&g.metric, &s, a, b, &seq).unwrap());
    }
}
