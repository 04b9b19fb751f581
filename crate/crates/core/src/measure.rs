//! Finite atomic measures.
//!
//! Every integral in this crate is a weighted sum over the atoms of a
//! [`DiscreteMeasure`]. Continuous measures enter only through quadrature
//! discretizations (composite midpoint rule on an interval); measures on the
//! naturals are given atom-wise.

use crate::error::{Error, Result};

/// A point of the underlying domain.
///
/// Interval kernels evaluate on `Real` points, sequence-space kernels on
/// `Nat` indices (1-based). `Tuple` points arise only from [`tensor_power`].
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Real(f64),
    Nat(u64),
    Tuple(Vec<Point>),
}

impl Point {
    pub fn as_real(&self) -> Option<f64> {
        match self {
            Point::Real(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_nat(&self) -> Option<u64> {
        match self {
            Point::Nat(i) => Some(*i),
            _ => None,
        }
    }
}

impl From<f64> for Point {
    fn from(x: f64) -> Self {
        Point::Real(x)
    }
}

impl From<u64> for Point {
    fn from(i: u64) -> Self {
        Point::Nat(i)
    }
}

/// Domain descriptor attached to measures and kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainTag {
    Interval(f64, f64),
    Naturals,
    /// d-fold product of a base domain, produced by [`tensor_power`].
    Power(Box<DomainTag>, usize),
}

impl DomainTag {
    pub fn contains(&self, p: &Point) -> bool {
        match (self, p) {
            (DomainTag::Interval(a, b), Point::Real(x)) => *a <= *x && *x <= *b,
            (DomainTag::Naturals, Point::Nat(i)) => *i >= 1,
            (DomainTag::Power(base, d), Point::Tuple(xs)) => {
                xs.len() == *d && xs.iter().all(|x| base.contains(x))
            }
            _ => false,
        }
    }
}

/// Tolerance for the `is_probability` flag. Fixed, not configurable, so that
/// verdicts are reproducible.
pub const PROBABILITY_TOL: f64 = 1e-12;

/// Default cap on the atom count produced by [`tensor_power`].
pub const TENSOR_CAP: usize = 1_000_000;

/// A finite measure given by atoms and nonnegative weights.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    atoms: Vec<Point>,
    weights: Vec<f64>,
    domain: DomainTag,
}

impl DiscreteMeasure {
    fn validate(atoms: &[Point], weights: &[f64], domain: &DomainTag) -> Result<()> {
        if atoms.len() != weights.len() {
            return Err(Error::invalid(format!(
                "atom/weight length mismatch: {} vs {}",
                atoms.len(),
                weights.len()
            )));
        }
        for (i, w) in weights.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::invalid(format!("weight {i} is negative or non-finite: {w}")));
            }
        }
        for (i, a) in atoms.iter().enumerate() {
            if !domain.contains(a) {
                return Err(Error::invalid(format!("atom {i} outside domain {domain:?}")));
            }
            for b in &atoms[..i] {
                if a == b {
                    return Err(Error::invalid(format!("duplicate atom at position {i}")));
                }
            }
        }
        Ok(())
    }

    pub fn new(atoms: Vec<Point>, weights: Vec<f64>, domain: DomainTag) -> Result<Self> {
        Self::validate(&atoms, &weights, &domain)?;
        Ok(DiscreteMeasure { atoms, weights, domain })
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn domain(&self) -> &DomainTag {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass() - 1.0).abs() <= PROBABILITY_TOL
    }
}

/// Composite-midpoint discretization of Lebesgue measure on `[a, b]`.
///
/// Atoms `t_i = a + (i - 1/2)(b - a)/m`, equal weights `(b - a)/m`. All atoms
/// are interior, which keeps kernels with endpoint singularities evaluable.
pub fn uniform_grid_measure(a: f64, b: f64, m: usize) -> Result<DiscreteMeasure> {
    if m == 0 {
        return Err(Error::invalid("grid measure needs m >= 1"));
    }
    if !(a < b) {
        return Err(Error::invalid(format!("grid measure needs a < b, got a={a}, b={b}")));
    }
    let h = (b - a) / m as f64;
    let atoms = (0..m)
        .map(|i| Point::Real(a + (i as f64 + 0.5) * h))
        .collect();
    let weights = vec![h; m];
    DiscreteMeasure::new(atoms, weights, DomainTag::Interval(a, b))
}

/// Atom-wise measure. The domain tag is inferred from the point kind; mixed
/// real/natural atoms are rejected.
pub fn atomic_measure(atoms: Vec<Point>, weights: Vec<f64>) -> Result<DiscreteMeasure> {
    let domain = match atoms.first() {
        None => return Err(Error::invalid("atomic measure needs at least one atom")),
        Some(Point::Nat(_)) => DomainTag::Naturals,
        Some(Point::Real(_)) => {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for a in &atoms {
                match a {
                    Point::Real(x) => {
                        lo = lo.min(*x);
                        hi = hi.max(*x);
                    }
                    _ => return Err(Error::invalid("mixed real/natural atoms")),
                }
            }
            DomainTag::Interval(lo, hi)
        }
        Some(Point::Tuple(_)) => {
            return Err(Error::invalid("tuple atoms are only produced by tensor_power"))
        }
    };
    if matches!(domain, DomainTag::Naturals) && atoms.iter().any(|a| !matches!(a, Point::Nat(_))) {
        return Err(Error::invalid("mixed real/natural atoms"));
    }
    DiscreteMeasure::new(atoms, weights, domain)
}

/// Atom-wise measure on the naturals `1..=n` from a weight generator.
pub fn natural_measure(n: usize, weight: impl Fn(u64) -> f64) -> Result<DiscreteMeasure> {
    let atoms: Vec<Point> = (1..=n as u64).map(Point::Nat).collect();
    let weights: Vec<f64> = (1..=n as u64).map(weight).collect();
    DiscreteMeasure::new(atoms, weights, DomainTag::Naturals)
}

/// d-fold product measure: atoms are d-tuples, weights multiply.
pub fn tensor_power(m: &DiscreteMeasure, d: usize) -> Result<DiscreteMeasure> {
    tensor_power_capped(m, d, TENSOR_CAP)
}

pub fn tensor_power_capped(m: &DiscreteMeasure, d: usize, cap: usize) -> Result<DiscreteMeasure> {
    if d == 0 {
        return Err(Error::invalid("tensor power needs d >= 1"));
    }
    let n = m.len();
    let mut total: usize = 1;
    for _ in 0..d {
        total = total
            .checked_mul(n)
            .filter(|t| *t <= cap)
            .ok_or_else(|| {
                Error::ResourceLimit(format!("tensor power {n}^{d} exceeds cap {cap}"))
            })?;
    }
    let mut atoms = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    loop {
        let tuple: Vec<Point> = idx.iter().map(|&i| m.atoms[i].clone()).collect();
        let w: f64 = idx.iter().map(|&i| m.weights[i]).product();
        atoms.push(Point::Tuple(tuple));
        weights.push(w);
        // odometer increment
        let mut k = d;
        loop {
            if k == 0 {
                return DiscreteMeasure::new(
                    atoms,
                    weights,
                    DomainTag::Power(Box::new(m.domain.clone()), d),
                );
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
        }
    }
}
