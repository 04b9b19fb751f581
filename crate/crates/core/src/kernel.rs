//! Reproducing kernel catalog.
//!
//! Built-ins: the Brownian `min` kernel on `[0, 1]` (its RKHS contains no
//! nonzero constant function, which makes it the default univariate exemplar
//! for the infinite-variate construction), the Gaussian kernel on the line,
//! the diagonal sequence kernel `k(i, j) = delta_ij / nu_i` on the naturals,
//! and `constant_plus` wrapping another kernel as `1 + k`.

use crate::error::{Error, Result};
use crate::expr::SeqExpr;
use crate::measure::{DomainTag, Point};
use nalgebra::DMatrix;
use std::sync::Arc;

pub type NatSeq = Arc<dyn Fn(u64) -> f64 + Send + Sync>;

/// Symmetric positive-semidefinite bivariate function with a domain tag.
#[derive(Clone)]
pub enum Kernel {
    /// `k(s, t) = min(s, t)` on `[0, 1]`.
    Min,
    /// `k(s, t) = exp(-(s - t)^2 / (2 sigma^2))` on the line.
    Gaussian { sigma: f64 },
    /// `k(i, j) = delta_ij / nu_i` on the naturals.
    DiagonalSequence { nu: NatSeq, label: String },
    /// `1 + k`.
    ConstantPlus(Box<Kernel>),
    /// Identically zero; not in the catalog, used as a degenerate reference.
    Zero { domain: DomainTag },
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kernel::Min => write!(f, "min"),
            Kernel::Gaussian { sigma } => write!(f, "gaussian(sigma={sigma})"),
            Kernel::DiagonalSequence { label, .. } => write!(f, "diagonal_sequence({label})"),
            Kernel::ConstantPlus(inner) => write!(f, "constant_plus({inner:?})"),
            Kernel::Zero { .. } => write!(f, "zero"),
        }
    }
}

impl Kernel {
    pub fn gaussian(sigma: f64) -> Result<Kernel> {
        if !(sigma > 0.0) {
            return Err(Error::invalid(format!("gaussian kernel needs sigma > 0, got {sigma}")));
        }
        Ok(Kernel::Gaussian { sigma })
    }

    pub fn diagonal_sequence(nu: NatSeq, label: impl Into<String>) -> Kernel {
        Kernel::DiagonalSequence { nu, label: label.into() }
    }

    pub fn diagonal_from_expr(src: &str) -> Result<Kernel> {
        let e = SeqExpr::parse(src)?;
        let label = src.to_string();
        Ok(Kernel::DiagonalSequence { nu: e.into_seq_fn(), label })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Min => "min",
            Kernel::Gaussian { .. } => "gaussian",
            Kernel::DiagonalSequence { .. } => "diagonal_sequence",
            Kernel::ConstantPlus(_) => "constant_plus",
            Kernel::Zero { .. } => "zero",
        }
    }

    pub fn domain(&self) -> DomainTag {
        match self {
            Kernel::Min => DomainTag::Interval(0.0, 1.0),
            Kernel::Gaussian { .. } => DomainTag::Interval(f64::NEG_INFINITY, f64::INFINITY),
            Kernel::DiagonalSequence { .. } => DomainTag::Naturals,
            Kernel::ConstantPlus(inner) => inner.domain(),
            Kernel::Zero { domain } => domain.clone(),
        }
    }

    pub fn is_constant_plus(&self) -> bool {
        matches!(self, Kernel::ConstantPlus(_))
    }

    /// Pointwise evaluation. Points must match the kernel's domain kind.
    pub fn eval(&self, s: &Point, t: &Point) -> Result<f64> {
        match self {
            Kernel::Min => {
                let (a, b) = both_real(s, t)?;
                Ok(a.min(b))
            }
            Kernel::Gaussian { sigma } => {
                let (a, b) = both_real(s, t)?;
                let d = a - b;
                Ok((-d * d / (2.0 * sigma * sigma)).exp())
            }
            Kernel::DiagonalSequence { nu, .. } => {
                let (i, j) = both_nat(s, t)?;
                if i == j {
                    let v = nu(i);
                    if !(v > 0.0) {
                        return Err(Error::invalid(format!("nu({i}) = {v} is not positive")));
                    }
                    Ok(1.0 / v)
                } else {
                    Ok(0.0)
                }
            }
            Kernel::ConstantPlus(inner) => Ok(1.0 + inner.eval(s, t)?),
            Kernel::Zero { .. } => Ok(0.0),
        }
    }
}

fn both_real(s: &Point, t: &Point) -> Result<(f64, f64)> {
    match (s, t) {
        (Point::Real(a), Point::Real(b)) => Ok((*a, *b)),
        _ => Err(Error::invalid("interval kernel evaluated at non-real points")),
    }
}

fn both_nat(s: &Point, t: &Point) -> Result<(u64, u64)> {
    match (s, t) {
        (Point::Nat(a), Point::Nat(b)) => Ok((*a, *b)),
        _ => Err(Error::invalid("sequence kernel evaluated at non-natural points")),
    }
}

/// Catalog constructor driven by the config schema `{name, params}`.
///
/// Recognized names: `min`, `gaussian` (param `sigma`), `diagonal_sequence`
/// (param `nu`: expression in `i`), `constant_plus` (param `inner`: nested
/// kernel object).
pub fn make_kernel(name: &str, params: &serde_json::Value) -> Result<Kernel> {
    match name {
        "min" => Ok(Kernel::Min),
        "gaussian" => {
            let sigma = params
                .get("sigma")
                .and_then(|v| v.as_f64())
                .ok_or_else(|| Error::invalid("gaussian kernel needs numeric param `sigma`"))?;
            Kernel::gaussian(sigma)
        }
        "diagonal_sequence" => {
            let nu = params
                .get("nu")
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::invalid("diagonal_sequence needs string param `nu`"))?;
            Kernel::diagonal_from_expr(nu)
        }
        "constant_plus" => {
            let inner = params
                .get("inner")
                .ok_or_else(|| Error::invalid("constant_plus needs param `inner`"))?;
            let inner_name = inner
                .get("name")
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::invalid("inner kernel needs a `name`"))?;
            let empty = serde_json::json!({});
            let inner_params = inner.get("params").unwrap_or(&empty);
            Ok(Kernel::ConstantPlus(Box::new(make_kernel(inner_name, inner_params)?)))
        }
        other => Err(Error::invalid(format!("unknown kernel name `{other}`"))),
    }
}

/// A finite subset of the naturals, kept strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsetU(Vec<u32>);

impl SubsetU {
    pub fn new(elements: Vec<u32>) -> Result<SubsetU> {
        for (i, &e) in elements.iter().enumerate() {
            if e < 1 {
                return Err(Error::invalid("subset elements must be >= 1"));
            }
            if i > 0 && elements[i - 1] >= e {
                return Err(Error::invalid(format!(
                    "subset elements must be strictly increasing, got {:?}",
                    elements
                )));
            }
        }
        Ok(SubsetU(elements))
    }

    pub fn empty() -> SubsetU {
        SubsetU(Vec::new())
    }

    pub fn elements(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_element(&self) -> Option<u32> {
        self.0.last().copied()
    }
}

impl std::fmt::Display for SubsetU {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}")
    }
}

/// Gram matrix `G_ij = k(p_i, p_j)`, exactly symmetric by construction.
pub fn gram(k: &Kernel, points: &[Point]) -> Result<DMatrix<f64>> {
    let dom = k.domain();
    for (i, p) in points.iter().enumerate() {
        if !dom.contains(p) {
            return Err(Error::invalid(format!("point {i} outside kernel domain")));
        }
        for q in &points[..i] {
            if p == q {
                return Err(Error::invalid(format!("duplicate point at position {i}")));
            }
        }
    }
    let n = points.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = k.eval(&points[i], &points[j])?;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Asymmetry above this (relative to the matrix scale) rejects the input.
const SYMMETRY_TOL: f64 = 1e-12;

/// Smallest eigenvalue of a symmetric matrix. Callers treat values above
/// `-1e-8 * ||G||` as a PSD pass; exact zero fails in floating point for
/// rank-deficient Gram matrices.
pub fn psd_min_eig(g: &DMatrix<f64>) -> Result<f64> {
    if g.nrows() != g.ncols() {
        return Err(Error::invalid("psd_min_eig needs a square matrix"));
    }
    let scale = g.amax().max(1.0);
    for i in 0..g.nrows() {
        for j in 0..i {
            if (g[(i, j)] - g[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::invalid(format!(
                    "matrix not symmetric at ({i},{j}): {} vs {}",
                    g[(i, j)],
                    g[(j, i)]
                )));
            }
        }
    }
    let eig = g.clone().symmetric_eigen();
    Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Finite tensor-subset kernel `k_u(x, y) = prod_{j in u} k(x_j, y_j)`.
///
/// Sequences are 1-indexed: element `j` of `u` reads `x[j-1]`. The empty
/// subset returns 1 (empty product).
pub fn ku_eval(k: &Kernel, u: &SubsetU, x: &[Point], y: &[Point]) -> Result<f64> {
    let mut prod = 1.0;
    for &j in u.elements() {
        let idx = (j - 1) as usize;
        let (xj, yj) = match (x.get(idx), y.get(idx)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::invalid(format!(
                    "subset index {j} beyond provided sequence length"
                )))
            }
        };
        prod *= k.eval(xj, yj)?;
    }
    Ok(prod)
}
