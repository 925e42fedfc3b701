//! Exact dual simplex over rationals for feasibility of
//! `{x >= 0 : a.x <= b for some rows, a.x >= b for the others}`.
//!
//! Each row gets a slack so the all-slack basis is dual feasible for any
//! nonnegative cost. Pivoting follows Bland's least-index rule. The slack
//! columns of the tableau carry the inverse basis, so a row proving
//! infeasibility yields Farkas multipliers directly.
//!
//! The tableau first runs on `i128` fractions with checked arithmetic and
//! is rebuilt over big rationals on the first overflow.

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    /// Sparse `(variable, coefficient)` pairs.
    pub coeffs: Vec<(usize, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

/// Nonnegative multipliers, one per constraint, such that
/// `sum_le y a - sum_ge y a >= 0` and `sum_le y b - sum_ge y b < 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Farkas {
    pub multipliers: Vec<Rational>,
}

impl Farkas {
    /// Independent replay of the certificate.
    pub fn verify(&self, n: usize, constraints: &[Constraint]) -> bool {
        if self.multipliers.len() != constraints.len() || self.multipliers.iter().any(|y| y.is_negative()) {
            return false;
        }
        let mut comb = vec![Rational::zero(); n];
        let mut rhs = Rational::zero();
        for (c, y) in constraints.iter().zip(&self.multipliers) {
            if y.is_zero() {
                continue;
            }
            let w = match c.relation {
                Relation::Le => y.clone(),
                Relation::Ge => -y.clone(),
            };
            for (j, a) in &c.coeffs {
                if *j >= n {
                    return false;
                }
                comb[*j] += &w * a;
            }
            rhs += &w * &c.rhs;
        }
        comb.iter().all(|v| !v.is_negative()) && rhs.is_negative()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Feasible(Vec<Rational>),
    Infeasible(Farkas),
}

// ---------------------------------------------------------------------------
// numbers

pub(crate) trait Num: Clone + Ord + std::fmt::Debug {
    fn nil() -> Self;
    fn unit() -> Self;
    fn is_nil(&self) -> bool;
    fn is_neg(&self) -> bool;
    fn add(&self, o: &Self) -> Option<Self>;
    fn sub(&self, o: &Self) -> Option<Self>;
    fn mul(&self, o: &Self) -> Option<Self>;
    fn div(&self, o: &Self) -> Option<Self>;
    fn from_big(r: &Rational) -> Option<Self>;
    fn to_big(&self) -> Rational;
}

type Small = Ratio<i128>;

impl Num for Small {
    fn nil() -> Self {
        Ratio::from_integer(0)
    }
    fn unit() -> Self {
        Ratio::from_integer(1)
    }
    fn is_nil(&self) -> bool {
        *self.numer() == 0
    }
    fn is_neg(&self) -> bool {
        *self.numer() < 0
    }
    fn add(&self, o: &Self) -> Option<Self> {
        self.checked_add(o)
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        self.checked_sub(o)
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        self.checked_mul(o)
    }
    fn div(&self, o: &Self) -> Option<Self> {
        self.checked_div(o)
    }
    fn from_big(r: &Rational) -> Option<Self> {
        // leave headroom so that products of two entries stay exact
        let lim = BigInt::one() << 60;
        if r.numer().abs() > lim || r.denom().abs() > lim {
            return None;
        }
        Some(Ratio::new(r.numer().to_i128()?, r.denom().to_i128()?))
    }
    fn to_big(&self) -> Rational {
        Rational::new(BigInt::from(*self.numer()), BigInt::from(*self.denom()))
    }
}

impl Num for Rational {
    fn nil() -> Self {
        Zero::zero()
    }
    fn unit() -> Self {
        One::one()
    }
    fn is_nil(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_neg(&self) -> bool {
        self.is_negative()
    }
    fn add(&self, o: &Self) -> Option<Self> {
        Some(self + o)
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        Some(self - o)
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        Some(self * o)
    }
    fn div(&self, o: &Self) -> Option<Self> {
        Some(self / o)
    }
    fn from_big(r: &Rational) -> Option<Self> {
        Some(r.clone())
    }
    fn to_big(&self) -> Rational {
        self.clone()
    }
}

#[derive(Debug)]
struct Overflow;

enum Solved<T> {
    Feasible(Vec<T>),
    Infeasible(Vec<T>),
}

#[derive(Debug, Clone)]
struct Tableau<T> {
    n: usize,
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    reduced: Vec<T>,
    pivots: usize,
}

impl<T: Num> Tableau<T> {
    fn new(n: usize, cost: &[Rational]) -> Option<Self> {
        let reduced = cost.iter().map(T::from_big).collect::<Option<Vec<T>>>()?;
        Some(Tableau { n, rows: Vec::new(), rhs: Vec::new(), basis: Vec::new(), reduced, pivots: 0 })
    }

    fn width(&self) -> usize {
        self.n + self.rows.len()
    }

    fn add(&mut self, c: &Constraint) -> Result<(), Overflow> {
        let m = self.rows.len();
        for r in &mut self.rows {
            r.push(T::nil());
        }
        self.reduced.push(T::nil());
        let w = self.n + m + 1;
        let mut row = vec![T::nil(); w];
        let neg = c.relation == Relation::Ge;
        for (j, a) in &c.coeffs {
            let a = T::from_big(a).ok_or(Overflow)?;
            row[*j] = if neg { row[*j].sub(&a) } else { row[*j].add(&a) }.ok_or(Overflow)?;
        }
        row[self.n + m] = T::unit();
        let b = T::from_big(&c.rhs).ok_or(Overflow)?;
        let mut b = if neg { T::nil().sub(&b).ok_or(Overflow)? } else { b };
        for i in 0..m {
            let col = self.basis[i];
            if row[col].is_nil() {
                continue;
            }
            let f = row[col].clone();
            for (x, y) in row.iter_mut().zip(&self.rows[i]) {
                if !y.is_nil() {
                    *x = x.sub(&f.mul(y).ok_or(Overflow)?).ok_or(Overflow)?;
                }
            }
            b = b.sub(&f.mul(&self.rhs[i]).ok_or(Overflow)?).ok_or(Overflow)?;
        }
        self.rows.push(row);
        self.rhs.push(b);
        self.basis.push(self.n + m);
        Ok(())
    }

    fn pivot(&mut self, r: usize, j: usize) -> Result<(), Overflow> {
        self.pivots += 1;
        let p = self.rows[r][j].clone();
        let nz: Vec<usize> = (0..self.width()).filter(|&c| !self.rows[r][c].is_nil()).collect();
        for &c in &nz {
            self.rows[r][c] = self.rows[r][c].div(&p).ok_or(Overflow)?;
        }
        self.rhs[r] = self.rhs[r].div(&p).ok_or(Overflow)?;
        let prow: Vec<(usize, T)> = nz.iter().map(|&c| (c, self.rows[r][c].clone())).collect();
        let prhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][j].is_nil() {
                continue;
            }
            let f = self.rows[i][j].clone();
            let row = &mut self.rows[i];
            for (c, v) in &prow {
                row[*c] = row[*c].sub(&f.mul(v).ok_or(Overflow)?).ok_or(Overflow)?;
            }
            self.rhs[i] = self.rhs[i].sub(&f.mul(&prhs).ok_or(Overflow)?).ok_or(Overflow)?;
        }
        if !self.reduced[j].is_nil() {
            let f = self.reduced[j].clone();
            for (c, v) in &prow {
                self.reduced[*c] = self.reduced[*c].sub(&f.mul(v).ok_or(Overflow)?).ok_or(Overflow)?;
            }
        }
        self.basis[r] = j;
        Ok(())
    }

    fn solve(&mut self) -> Result<Solved<T>, Overflow> {
        loop {
            let leave = (0..self.rows.len()).filter(|&i| self.rhs[i].is_neg()).min_by_key(|&i| self.basis[i]);
            let Some(r) = leave else {
                let mut x = vec![T::nil(); self.n];
                for (i, &b) in self.basis.iter().enumerate() {
                    if b < self.n {
                        x[b] = self.rhs[i].clone();
                    }
                }
                return Ok(Solved::Feasible(x));
            };
            let mut best: Option<(usize, T)> = None;
            for j in 0..self.width() {
                let a = &self.rows[r][j];
                if !a.is_neg() {
                    continue;
                }
                let ratio = self.reduced[j].div(&T::nil().sub(a).ok_or(Overflow)?).ok_or(Overflow)?;
                match &best {
                    Some((_, b)) if *b <= ratio => {}
                    _ => best = Some((j, ratio)),
                }
            }
            match best {
                Some((j, _)) => self.pivot(r, j)?,
                None => {
                    let y = (0..self.rows.len()).map(|i| self.rows[r][self.n + i].clone()).collect();
                    return Ok(Solved::Infeasible(y));
                }
            }
        }
    }
}

/// Incremental solver; rows may be appended between solves.
#[derive(Debug, Clone)]
pub struct DualSimplex {
    n: usize,
    cost: Vec<Rational>,
    constraints: Vec<Constraint>,
    small: Option<Tableau<Small>>,
    big: Option<Tableau<Rational>>,
    pivots_before: usize,
}

impl DualSimplex {
    /// `cost` must be nonnegative; `None` means plain feasibility.
    pub fn new(n: usize, cost: Option<Vec<Rational>>) -> Self {
        let cost = cost.unwrap_or_else(|| vec![Rational::zero(); n]);
        assert_eq!(cost.len(), n);
        assert!(cost.iter().all(|c| !c.is_negative()), "cost must be nonnegative");
        let small = Tableau::new(n, &cost);
        let big = if small.is_none() { Tableau::new(n, &cost) } else { None };
        DualSimplex { n, cost, constraints: Vec::new(), small, big, pivots_before: 0 }
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn pivots(&self) -> usize {
        self.pivots_before + self.small.as_ref().map_or(0, |t| t.pivots) + self.big.as_ref().map_or(0, |t| t.pivots)
    }

    /// Whether the solver has fallen back to big rationals.
    pub fn is_big(&self) -> bool {
        self.big.is_some()
    }

    fn go_big(&mut self) {
        if let Some(t) = self.small.take() {
            self.pivots_before += t.pivots;
        }
        let mut t = Tableau::<Rational>::new(self.n, &self.cost).expect("big rationals never overflow");
        for c in &self.constraints {
            t.add(c).expect("big rationals never overflow");
        }
        self.big = Some(t);
    }

    pub fn add(&mut self, c: Constraint) {
        self.constraints.push(c);
        let c = self.constraints.last().expect("just pushed");
        if let Some(t) = &mut self.small {
            if t.add(c).is_ok() {
                return;
            }
            self.go_big();
            return;
        }
        self.big.as_mut().expect("one tableau is live").add(c).expect("big rationals never overflow");
    }

    pub fn solve(&mut self) -> LpOutcome {
        if let Some(t) = &mut self.small {
            match t.solve() {
                Ok(s) => return convert(s),
                Err(Overflow) => self.go_big(),
            }
        }
        convert(self.big.as_mut().expect("one tableau is live").solve().expect("big rationals never overflow"))
    }
}

fn convert<T: Num>(s: Solved<T>) -> LpOutcome {
    match s {
        Solved::Feasible(x) => LpOutcome::Feasible(x.iter().map(T::to_big).collect()),
        Solved::Infeasible(y) => LpOutcome::Infeasible(Farkas { multipliers: y.iter().map(T::to_big).collect() }),
    }
}

/// Checks a point against constraints exactly.
pub fn satisfies(x: &[Rational], constraints: &[Constraint]) -> bool {
    if x.iter().any(|v| v.is_negative()) {
        return false;
    }
    constraints.iter().all(|c| {
        let mut s = Rational::zero();
        for (j, a) in &c.coeffs {
            s += a * &x[*j];
        }
        match c.relation {
            Relation::Le => s <= c.rhs,
            Relation::Ge => s >= c.rhs,
        }
    })
}

pub fn solve(n: usize, constraints: &[Constraint]) -> LpOutcome {
    let mut lp = DualSimplex::new(n, None);
    for c in constraints {
        lp.add(c.clone());
    }
    lp.solve()
}
