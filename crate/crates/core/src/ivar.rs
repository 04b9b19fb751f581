//! Infinite-variate machinery: weight schemas over finite subsets of the
//! naturals, the compactness criterion sequence `gamma_u * C^(2|u|)` with
//! certified verdicts, evaluation of the summed tensor-product kernel, domain
//! membership, norms of component decompositions, and best-first enumeration
//! of the tensorized spectrum.
//!
//! Certified verdicts here are conditional on `0 < C < infinity`, where `C`
//! is the discretized univariate operator norm; the compact/non-compact
//! dichotomy for product weights depends on `c_j = gamma_j C^2` only through
//! its limit, which vanishes exactly when `gamma_j` does.

use crate::error::{Error, Result};
use crate::kernel::{ku_eval, SubsetU};
use crate::measure::Point;
use crate::operator::{spectrum, EmbeddingModel};
use crate::seqspace::{SeriesAnnotation, Verdict};
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

pub type GammaSeq = Arc<dyn Fn(u32) -> f64 + Send + Sync>;

/// Declared asymptotics for a product weight generator.
#[derive(Clone, Default)]
pub struct GammaAnnotations {
    /// Declared limit of `gamma_j`.
    pub gamma_limit: Option<f64>,
    /// Declared behavior of `sum_j gamma_j`.
    pub gamma_sum: Option<SeriesAnnotation>,
    /// `gamma_j` is nonincreasing for `j >=` this index; enables rigorous
    /// tail bounds in the enumerators.
    pub nonincreasing_from: Option<u32>,
    /// Declared finite set of indices where `gamma_j C^2 >= 1` may hold.
    pub supercritical: Option<Vec<u32>>,
    /// Upper bound on `sum_{j > J} gamma_j` as a function of `J`.
    pub tail_sum_bound: Option<Arc<dyn Fn(u32) -> f64 + Send + Sync>>,
}

impl std::fmt::Debug for GammaAnnotations {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GammaAnnotations")
            .field("gamma_limit", &self.gamma_limit)
            .field("gamma_sum", &self.gamma_sum)
            .field("nonincreasing_from", &self.nonincreasing_from)
            .field("supercritical", &self.supercritical)
            .field("tail_sum_bound", &self.tail_sum_bound.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

/// Weights `gamma_u` over finite subsets: an explicit finite list, or a
/// product rule `gamma_u = prod_{j in u} gamma_j` with `gamma_empty = 1`.
#[derive(Clone)]
pub enum WeightSchema {
    Explicit(Vec<(SubsetU, f64)>),
    Product {
        gamma: GammaSeq,
        label: String,
        annotations: GammaAnnotations,
    },
}

impl std::fmt::Debug for WeightSchema {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WeightSchema::Explicit(list) => f.debug_tuple("Explicit").field(&list.len()).finish(),
            WeightSchema::Product { label, .. } => write!(f, "Product({label})"),
        }
    }
}

impl WeightSchema {
    pub fn explicit(list: Vec<(SubsetU, f64)>) -> Result<WeightSchema> {
        for (i, (u, g)) in list.iter().enumerate() {
            if !(*g > 0.0) {
                return Err(Error::invalid(format!(
                    "explicit weight for {u} must be strictly positive, got {g}"
                )));
            }
            for (v, _) in &list[..i] {
                if v == u {
                    return Err(Error::invalid(format!("duplicate subset {u} in explicit schema")));
                }
            }
        }
        Ok(WeightSchema::Explicit(list))
    }

    pub fn product(gamma: GammaSeq, label: impl Into<String>, annotations: GammaAnnotations) -> WeightSchema {
        WeightSchema::Product { gamma, label: label.into(), annotations }
    }

    /// `gamma_j = 2^-j`.
    pub fn product_pow2() -> WeightSchema {
        WeightSchema::Product {
            gamma: Arc::new(|j| 0.5f64.powi(j as i32)),
            label: "2^-j".into(),
            annotations: GammaAnnotations {
                gamma_limit: Some(0.0),
                gamma_sum: Some(SeriesAnnotation::Summable {
                    justification: "geometric series with ratio 1/2".into(),
                }),
                nonincreasing_from: Some(1),
                supercritical: Some(vec![]),
                tail_sum_bound: Some(Arc::new(|j| 0.5f64.powi(j as i32))),
            },
        }
    }

    /// `gamma_j = 1/j^2`.
    pub fn product_inverse_square() -> WeightSchema {
        WeightSchema::Product {
            gamma: Arc::new(|j| 1.0 / (j as f64 * j as f64)),
            label: "1/j^2".into(),
            annotations: GammaAnnotations {
                gamma_limit: Some(0.0),
                gamma_sum: Some(SeriesAnnotation::Summable {
                    justification: "p-series with p = 2".into(),
                }),
                nonincreasing_from: Some(1),
                supercritical: None,
                tail_sum_bound: Some(Arc::new(|j| 1.0 / j as f64)),
            },
        }
    }

    /// `gamma_j = q^j` for `0 < q < 1`.
    pub fn product_geometric(q: f64) -> Result<WeightSchema> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::invalid(format!("geometric rule needs 0 < q < 1, got {q}")));
        }
        Ok(WeightSchema::Product {
            gamma: Arc::new(move |j| q.powi(j as i32)),
            label: format!("geometric({q})"),
            annotations: GammaAnnotations {
                gamma_limit: Some(0.0),
                gamma_sum: Some(SeriesAnnotation::Summable {
                    justification: format!("geometric series with ratio {q}"),
                }),
                nonincreasing_from: Some(1),
                supercritical: Some(vec![]),
                tail_sum_bound: Some(Arc::new(move |j| q.powi(j as i32 + 1) / (1.0 - q))),
            },
        })
    }

    /// `gamma_j identically 1` (the classical unweighted case).
    pub fn product_constant_one() -> WeightSchema {
        WeightSchema::Product {
            gamma: Arc::new(|_| 1.0),
            label: "1".into(),
            annotations: GammaAnnotations {
                gamma_limit: Some(1.0),
                gamma_sum: Some(SeriesAnnotation::Divergent {
                    justification: "constant terms do not vanish".into(),
                }),
                nonincreasing_from: Some(1),
                supercritical: None,
                tail_sum_bound: None,
            },
        }
    }
}

/// `gamma_u` for a subset.
pub fn weight_of(schema: &WeightSchema, u: &SubsetU) -> f64 {
    match schema {
        WeightSchema::Explicit(list) => list
            .iter()
            .find(|(v, _)| v == u)
            .map(|(_, g)| *g)
            .unwrap_or(0.0),
        WeightSchema::Product { gamma, .. } => {
            u.elements().iter().map(|&j| gamma(j)).product()
        }
    }
}

/// The univariate model, weight schema, and cached embedding norm.
#[derive(Debug, Clone)]
pub struct IvarModel {
    univariate: EmbeddingModel,
    schema: WeightSchema,
    /// Discretized `||S||` of the univariate embedding.
    c: f64,
    /// Atom count at which `c` was computed.
    c_level: usize,
}

impl IvarModel {
    pub fn new(univariate: EmbeddingModel, schema: WeightSchema) -> Result<IvarModel> {
        if !univariate.measure().is_probability() {
            return Err(Error::invalid(
                "infinite-variate construction requires a probability measure",
            ));
        }
        if univariate.kernel().is_constant_plus() {
            return Err(Error::invalid(
                "constant_plus kernels are rejected: the RKHS must contain no nonzero \
                 constants; constants enter through the empty-set component instead",
            ));
        }
        let c_level = univariate.len();
        let c = spectrum(&univariate, 1.min(c_level))?.operator_norm;
        Ok(IvarModel { univariate, schema, c, c_level })
    }

    pub fn univariate(&self) -> &EmbeddingModel {
        &self.univariate
    }

    pub fn schema(&self) -> &WeightSchema {
        &self.schema
    }

    pub fn embedding_norm(&self) -> f64 {
        self.c
    }

    pub fn embedding_norm_level(&self) -> usize {
        self.c_level
    }

    /// Override the cached norm (used when `C` is known in closed form).
    pub fn with_embedding_norm(mut self, c: f64, level: usize) -> Self {
        self.c = c;
        self.c_level = level;
        self
    }
}

/// Theorem-2 criterion value `gamma_u * C^(2|u|)`.
pub fn criterion_value(m: &IvarModel, u: &SubsetU) -> f64 {
    weight_of(&m.schema, u) * m.c.powi(2 * u.len() as i32)
}

/// Norm of the component embedding `H_u -> L2`: `sqrt(gamma_u) * C^|u|`.
pub fn component_embedding_norm(m: &IvarModel, u: &SubsetU) -> f64 {
    weight_of(&m.schema, u).sqrt() * m.c.powi(u.len() as i32)
}

const PROBE_HORIZON: u32 = 1024;
const UNIVERSE_START: u32 = 16;
const UNIVERSE_CAP: u32 = 4096;
const POP_CAP: usize = 500_000;

/// Canonical result ordering: value descending, then smaller subset, then
/// lexicographically smaller elements.
fn canonical_order(a: &(SubsetU, f64), b: &(SubsetU, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then(a.0.len().cmp(&b.0.len()))
        .then(a.0.elements().cmp(b.0.elements()))
}

/// Top-`n` subsets by criterion value in the canonical order.
///
/// Product schemas run a best-first frontier search. The heap is keyed on the
/// node value times the remaining supercritical mass, which restores the
/// monotone-descendant property when some `gamma_j C^2 >= 1`; with all values
/// subcritical the key degenerates to the plain criterion value.
pub fn enumerate_by_criterion(m: &IvarModel, n: usize) -> Result<Vec<(SubsetU, f64)>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    match &m.schema {
        WeightSchema::Explicit(list) => {
            let mut out: Vec<(SubsetU, f64)> = list
                .iter()
                .map(|(u, _)| (u.clone(), criterion_value(m, u)))
                .collect();
            out.sort_by(canonical_order);
            out.truncate(n);
            Ok(out)
        }
        WeightSchema::Product { gamma, annotations, .. } => {
            let c2 = m.c * m.c;
            let gamma = gamma.clone();
            let cfn = move |j: u32| gamma(j) * c2;
            best_first_products(&cfn, n, annotations)
        }
    }
}

/// Top-`n` of the multiset `{ prod_{j in u} c_j : u in U_gamma }` (empty
/// product = 1) for a per-index factor sequence `c_j >= 0`.
fn best_first_products(
    c: &dyn Fn(u32) -> f64,
    n: usize,
    ann: &GammaAnnotations,
) -> Result<Vec<(SubsetU, f64)>> {
    // supercritical handling: any index with c_j >= 1 must belong to a
    // declared finite set, otherwise the frontier is unbounded
    let probed_super: Vec<u32> = (1..=PROBE_HORIZON).filter(|&j| c(j) >= 1.0).collect();
    let declared = ann.supercritical.as_deref();
    if !probed_super.is_empty() {
        match declared {
            None => {
                return Err(Error::NotEnumerable(format!(
                    "indices with gamma_j C^2 >= 1 found (first: {}) but no finite \
                     supercritical annotation declared",
                    probed_super[0]
                )))
            }
            Some(set) => {
                for j in &probed_super {
                    if !set.contains(j) {
                        return Err(Error::AnnotationConflict(format!(
                            "probed gamma_{j} C^2 = {} >= 1 outside the declared \
                             supercritical set {set:?}",
                            c(*j)
                        )));
                    }
                }
            }
        }
    }
    let super_max = declared.and_then(|s| s.iter().max().copied()).unwrap_or(0);

    let mut universe = UNIVERSE_START.max(super_max).max(ann.nonincreasing_from.unwrap_or(0));
    loop {
        let (mut results, exhausted) = search_universe(c, n, universe)?;
        if results.len() < n && !exhausted {
            return Err(Error::NotEnumerable(format!(
                "frontier search exceeded the pop budget at universe {universe}"
            )));
        }
        results.sort_by(canonical_order);
        results.truncate(n);
        // certify that nothing outside the universe can enter the top n
        let v_n = results.last().map(|(_, v)| *v).unwrap_or(0.0);
        let tail = tail_sup(c, ann, universe);
        let v_max: f64 = (1..=universe).map(|j| c(j).max(1.0)).product();
        if tail == 0.0 || v_max * tail < v_n {
            return Ok(results);
        }
        if universe >= UNIVERSE_CAP {
            return Err(Error::NotEnumerable(format!(
                "cannot certify the top-{n} list: criterion tail beyond index {universe} \
                 (bound {}) still reaches the cutoff {v_n}",
                v_max * tail
            )));
        }
        universe = (universe * 2).min(UNIVERSE_CAP);
    }
}

/// Upper bound on `sup_{j > universe} c_j`: rigorous from the nonincreasing
/// annotation when available, otherwise a probe over a finite lookahead.
fn tail_sup(c: &dyn Fn(u32) -> f64, ann: &GammaAnnotations, universe: u32) -> f64 {
    if let Some(j0) = ann.nonincreasing_from {
        if universe >= j0 {
            return c(universe + 1);
        }
    }
    let lookahead = (universe + 1)..=(universe + 2048);
    lookahead.map(c).fold(0.0, f64::max)
}

#[derive(Debug)]
struct ProdNode {
    key: f64,
    value: f64,
    /// positions into the value-sorted index permutation, ascending
    positions: Vec<u32>,
}

impl PartialEq for ProdNode {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key && self.positions == other.positions
    }
}
impl Eq for ProdNode {}
impl Ord for ProdNode {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .partial_cmp(&other.key)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.positions.cmp(&self.positions))
    }
}
impl PartialOrd for ProdNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Best-first search over subsets of `{1..=universe}`. Returns collected
/// candidates and whether the search certified completeness of the top-`n`
/// within the universe (false means the pop budget ran out).
fn search_universe(
    c: &dyn Fn(u32) -> f64,
    n: usize,
    universe: u32,
) -> Result<(Vec<(SubsetU, f64)>, bool)> {
    // drop zero-weight indices (their subsets are outside U_gamma) and sort
    // the rest by factor descending so that frontier moves never increase
    // the subcritical part of the key
    let mut order: Vec<u32> = (1..=universe).filter(|&j| c(j) > 0.0).collect();
    order.sort_by(|&a, &b| {
        c(b).partial_cmp(&c(a)).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    let factors: Vec<f64> = order.iter().map(|&j| c(j)).collect();
    let p = factors.len();
    // remaining supercritical mass beyond each position
    let mut remaining = vec![1.0; p + 1];
    for i in (0..p).rev() {
        remaining[i] = remaining[i + 1] * factors[i].max(1.0);
    }

    let mut heap = BinaryHeap::new();
    heap.push(ProdNode { key: remaining[0], value: 1.0, positions: vec![] });
    let mut results: Vec<(SubsetU, f64)> = Vec::new();
    let mut top_values: BinaryHeap<std::cmp::Reverse<ordered>> = BinaryHeap::new();
    let mut pops = 0usize;

    while let Some(node) = heap.pop() {
        let v_n = top_values
            .peek()
            .map(|std::cmp::Reverse(ordered(v))| *v)
            .unwrap_or(f64::NEG_INFINITY);
        if top_values.len() >= n && node.key < v_n {
            return Ok((results, true));
        }
        pops += 1;
        if pops > POP_CAP {
            return Ok((results, false));
        }
        let mut elements: Vec<u32> =
            node.positions.iter().map(|&pos| order[pos as usize]).collect();
        elements.sort_unstable();
        results.push((SubsetU::new(elements)?, node.value));
        if top_values.len() < n {
            top_values.push(std::cmp::Reverse(ordered(node.value)));
        } else if node.value > v_n {
            top_values.pop();
            top_values.push(std::cmp::Reverse(ordered(node.value)));
        }

        let last = node.positions.last().copied();
        let next = last.map(|l| l + 1).unwrap_or(0);
        if (next as usize) < p {
            // values are recomputed from scratch rather than updated
            // incrementally so that equal subsets always carry bitwise equal
            // values, keeping tie ordering exact against brute-force oracles
            let mut positions = node.positions.clone();
            positions.push(next);
            let value = product_value(&positions, &factors);
            heap.push(ProdNode { key: value * remaining[next as usize + 1], value, positions });
            // swap the last position upward
            if last.is_some() {
                let mut positions = node.positions.clone();
                *positions.last_mut().unwrap() = next;
                let value = product_value(&positions, &factors);
                heap.push(ProdNode {
                    key: value * remaining[next as usize + 1],
                    value,
                    positions,
                });
            }
        }
    }
    Ok((results, true))
}

/// Product of per-position factors in ascending position order; the single
/// canonical fp evaluation order for a subset's value.
fn product_value(positions: &[u32], factors: &[f64]) -> f64 {
    positions.iter().map(|&p| factors[p as usize]).product()
}

// f64 wrapper with total order for use inside heaps; inputs are finite
#[derive(Debug, Clone, Copy, PartialEq)]
#[allow(non_camel_case_types)]
struct ordered(f64);
impl Eq for ordered {}
impl Ord for ordered {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.partial_cmp(&other.0).unwrap_or(Ordering::Equal)
    }
}
impl PartialOrd for ordered {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CriterionVerdictKind {
    CompactCertified,
    NonCompactCertified,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionVerdict {
    pub kind: CriterionVerdictKind,
    /// For non-compact verdicts: the witness index family.
    pub witness: Option<String>,
    pub justification: String,
    /// Probed criterion values along singletons, attached to inconclusive
    /// verdicts.
    pub probed_singletons: Option<Vec<f64>>,
}

/// Theorem-2 compactness verdict for the infinite-variate embedding.
pub fn thm2_verdict(m: &IvarModel) -> Result<CriterionVerdict> {
    let c = m.c;
    let conditional = format!(
        "conditional on 0 < C < infinity; C = {c} estimated at level {}",
        m.c_level
    );
    match &m.schema {
        WeightSchema::Explicit(_) => Ok(CriterionVerdict {
            kind: CriterionVerdictKind::CompactCertified,
            witness: None,
            justification: format!(
                "finite supported family: the criterion sequence is eventually zero; {conditional}"
            ),
            probed_singletons: None,
        }),
        WeightSchema::Product { gamma, annotations, .. } => {
            if c == 0.0 {
                return Ok(CriterionVerdict {
                    kind: CriterionVerdictKind::CompactCertified,
                    witness: None,
                    justification: "embedding norm is zero; every nonempty criterion vanishes"
                        .into(),
                    probed_singletons: None,
                });
            }
            check_gamma_limit(gamma, annotations)?;
            let limit_zero = annotations.gamma_limit == Some(0.0)
                || matches!(annotations.gamma_sum, Some(SeriesAnnotation::Summable { .. }));
            if limit_zero {
                return Ok(CriterionVerdict {
                    kind: CriterionVerdictKind::CompactCertified,
                    witness: None,
                    justification: format!(
                        "c_j = gamma_j C^2 -> 0 (declared); singleton criteria vanish, and for \
                         any delta > 0 only finitely many indices have c_j >= delta, so subsets \
                         reaching criterion >= delta draw from a fixed finite index pool and \
                         bounded cardinality, leaving finitely many of them; hence the criterion \
                         sequence has limsup 0; {conditional}"
                    ),
                    probed_singletons: None,
                });
            }
            if let Some(l) = annotations.gamma_limit {
                if l > 0.0 {
                    return Ok(CriterionVerdict {
                        kind: CriterionVerdictKind::NonCompactCertified,
                        witness: Some("singletons {j}, j -> infinity".into()),
                        justification: format!(
                            "gamma_j -> {l} > 0 (declared): singleton criteria c_j stay near \
                             {} > 0, so the criterion sequence cannot vanish; {conditional}",
                            l * c * c
                        ),
                        probed_singletons: None,
                    });
                }
            }
            let probed: Vec<f64> = (1..=64).map(|j| gamma(j) * c * c).collect();
            Ok(CriterionVerdict {
                kind: CriterionVerdictKind::Inconclusive,
                witness: None,
                justification: format!(
                    "no limit annotation on gamma; probed singleton criteria attached; {conditional}"
                ),
                probed_singletons: Some(probed),
            })
        }
    }
}

/// Same sanity gate as for sequence pairs: a declared gamma limit must be
/// approached over the probe horizon.
fn check_gamma_limit(gamma: &GammaSeq, ann: &GammaAnnotations) -> Result<()> {
    let Some(l) = ann.gamma_limit else { return Ok(()) };
    if !l.is_finite() {
        return Ok(());
    }
    let dev1 = (gamma(1) - l).abs();
    let dev_h = (gamma(PROBE_HORIZON) - l).abs();
    let ok = if dev1 <= 1e-12 { dev_h <= 1e-9 } else { dev_h <= 0.5 * dev1 };
    if !ok {
        return Err(Error::AnnotationConflict(format!(
            "declared gamma_limit {l} inconsistent with probed weights: |gamma(1) - L| = {dev1}, \
             |gamma({PROBE_HORIZON}) - L| = {dev_h}"
        )));
    }
    Ok(())
}

/// Result of evaluating the summed tensor-product kernel at a truncation.
#[derive(Debug, Clone, Serialize)]
pub struct KernelValue {
    pub value: f64,
    /// Upper bound on the truncation error, when a gamma tail bound and a
    /// diagonal majorant are available.
    pub tail_bound: Option<f64>,
}

/// Evaluate the infinite-variate kernel at sequences given on indices
/// `1..=j_trunc`. Product schemas use the algebraic resummation
/// `prod_{j<=J} (1 + gamma_j k(x_j, y_j))`; explicit schemas sum their
/// listed subsets exactly.
///
/// `diag_tail_bound` is the caller-declared bound on
/// `sqrt(k(x_j,x_j) k(y_j,y_j))` for `j > J`.
pub fn kgamma_eval(
    m: &IvarModel,
    x: &[Point],
    y: &[Point],
    j_trunc: usize,
    diag_tail_bound: Option<f64>,
) -> Result<KernelValue> {
    let k = m.univariate.kernel();
    match &m.schema {
        WeightSchema::Explicit(list) => {
            let mut value = 0.0;
            for (u, g) in list {
                value += g * ku_eval(k, u, x, y)?;
            }
            Ok(KernelValue { value, tail_bound: Some(0.0) })
        }
        WeightSchema::Product { gamma, annotations, .. } => {
            if x.len() < j_trunc || y.len() < j_trunc {
                return Err(Error::invalid(format!(
                    "sequences must be defined on indices 1..={j_trunc}"
                )));
            }
            let mut value = 1.0;
            for j in 1..=j_trunc {
                value *= 1.0 + gamma(j as u32) * k.eval(&x[j - 1], &y[j - 1])?;
            }
            let tail_bound = match (&annotations.tail_sum_bound, diag_tail_bound) {
                (Some(tail_sum), Some(b)) => {
                    Some(value.abs() * (b * tail_sum(j_trunc as u32)).exp_m1())
                }
                _ => None,
            };
            Ok(KernelValue { value, tail_bound })
        }
    }
}

/// A point of the sequence domain: a finite prefix plus declared bounds on
/// the diagonal values `k(x_j, x_j)` over all coordinates.
#[derive(Debug, Clone)]
pub struct SeqPoint {
    pub prefix: Vec<Point>,
    /// Declared `sup_j k(x_j, x_j)`.
    pub diag_sup: Option<f64>,
    /// Declared `inf_j k(x_j, x_j)`.
    pub diag_inf: Option<f64>,
}

/// Membership of `x` in the sequence domain: `sum_u gamma_u k_u(x, x) <
/// infinity`, which for product weights is equivalent to
/// `sum_j gamma_j k(x_j, x_j) < infinity`.
pub fn x_membership(m: &IvarModel, x: &SeqPoint) -> Verdict {
    match &m.schema {
        WeightSchema::Explicit(_) => {
            Verdict::YesCertified("finite weight list: the defining sum is finite".into())
        }
        WeightSchema::Product { annotations, .. } => {
            if x.diag_sup == Some(0.0) {
                return Verdict::YesCertified(
                    "all diagonal kernel values vanish along x".into(),
                );
            }
            match (&annotations.gamma_sum, x.diag_sup, x.diag_inf) {
                (Some(SeriesAnnotation::Summable { justification }), Some(b), _)
                    if b.is_finite() =>
                {
                    Verdict::YesCertified(format!(
                        "sum gamma_j k(x_j,x_j) <= {b} * sum gamma_j < infinity ({justification})"
                    ))
                }
                (Some(SeriesAnnotation::Divergent { justification }), _, Some(lo)) if lo > 0.0 => {
                    Verdict::NoCertified(format!(
                        "sum gamma_j k(x_j,x_j) >= {lo} * sum gamma_j = infinity ({justification})"
                    ))
                }
                _ => Verdict::Inconclusive(
                    "need a gamma summability annotation and a diagonal majorant".into(),
                ),
            }
        }
    }
}

/// `||f||^2_{H_gamma} = sum_u ||f_u||^2 / gamma_u` for a finite component
/// decomposition.
pub fn hgamma_norm_sq(m: &IvarModel, components: &[(SubsetU, f64)]) -> Result<f64> {
    let mut acc = 0.0;
    for (i, (u, norm)) in components.iter().enumerate() {
        for (v, _) in &components[..i] {
            if v == u {
                return Err(Error::invalid(format!("duplicate component subset {u}")));
            }
        }
        let g = weight_of(&m.schema, u);
        if !(g > 0.0) {
            return Err(Error::invalid(format!(
                "component {u} has gamma_u = 0 and lies outside the space"
            )));
        }
        acc += norm * norm / g;
    }
    Ok(acc)
}

#[derive(Debug)]
struct TensorNode {
    key: f64,
    value: f64,
    /// positions into the gamma-sorted permutation, ascending
    positions: Vec<u32>,
    /// 1-based eigenvalue index per position
    eig: Vec<u32>,
}

impl PartialEq for TensorNode {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key && self.positions == other.positions && self.eig == other.eig
    }
}
impl Eq for TensorNode {}
impl Ord for TensorNode {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .partial_cmp(&other.key)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.positions.cmp(&self.positions))
            .then_with(|| other.eig.cmp(&self.eig))
    }
}
impl PartialOrd for TensorNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Top-`n` of the multiset `{ gamma_u * prod_{j in u} lambda_{a_j} }` over
/// supported subsets and eigenvalue assignments, descending.
///
/// Valid only under L2-orthogonality of the component images, which the
/// construction does not guarantee in general; the caller must assert it
/// explicitly via `assume_l2_orthogonal`.
pub fn tensor_spectrum_topn(
    m: &IvarModel,
    univariate_eigs: &[f64],
    n: usize,
    assume_l2_orthogonal: bool,
) -> Result<Vec<f64>> {
    if !assume_l2_orthogonal {
        return Err(Error::invalid(
            "refused: tensor spectrum enumeration requires the explicit \
             assume_l2_orthogonal assertion",
        ));
    }
    for w in univariate_eigs.windows(2) {
        if w[1] > w[0] {
            return Err(Error::invalid("eigenvalues must be in descending order"));
        }
    }
    if univariate_eigs.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::invalid("eigenvalues must be strictly positive"));
    }
    if n == 0 || univariate_eigs.is_empty() {
        return Ok(Vec::new());
    }
    match &m.schema {
        WeightSchema::Explicit(list) => {
            let mut heap = BinaryHeap::new();
            let r = univariate_eigs.len();
            let l1 = univariate_eigs[0];
            for (idx, (u, g)) in list.iter().enumerate() {
                heap.push(TensorNode {
                    key: g * l1.powi(u.len() as i32),
                    value: g * l1.powi(u.len() as i32),
                    positions: vec![idx as u32],
                    eig: vec![1; u.len()],
                });
            }
            let mut out = Vec::new();
            while let Some(node) = heap.pop() {
                if out.len() >= n {
                    break;
                }
                out.push(node.value);
                let subset_idx = node.positions[0] as usize;
                let size = list[subset_idx].0.len();
                // increment slot p when all later slots sit at index 1
                for p in (0..size).rev() {
                    if node.eig[p] < r as u32 {
                        let mut eig = node.eig.clone();
                        eig[p] += 1;
                        let value = node.value / univariate_eigs[node.eig[p] as usize - 1]
                            * univariate_eigs[eig[p] as usize - 1];
                        heap.push(TensorNode {
                            key: value,
                            value,
                            positions: node.positions.clone(),
                            eig,
                        });
                    }
                    if node.eig[p] != 1 {
                        break;
                    }
                }
            }
            Ok(out)
        }
        WeightSchema::Product { gamma, annotations, .. } => {
            let gamma = gamma.clone();
            let eigs = univariate_eigs.to_vec();
            tensor_product_search(&*gamma, &eigs, n, annotations)
        }
    }
}

fn tensor_product_search(
    gamma: &(dyn Fn(u32) -> f64 + Sync),
    eigs: &[f64],
    n: usize,
    ann: &GammaAnnotations,
) -> Result<Vec<f64>> {
    let l1 = eigs[0];
    let c = |j: u32| gamma(j) * l1;
    let probed_super: Vec<u32> = (1..=PROBE_HORIZON).filter(|&j| c(j) >= 1.0).collect();
    if !probed_super.is_empty() && ann.supercritical.is_none() {
        return Err(Error::NotEnumerable(format!(
            "indices with gamma_j lambda_1 >= 1 found (first: {}) but no finite \
             supercritical annotation declared",
            probed_super[0]
        )));
    }
    let super_max = ann
        .supercritical
        .as_deref()
        .and_then(|s| s.iter().max().copied())
        .unwrap_or(0);

    let mut universe = UNIVERSE_START.max(super_max).max(ann.nonincreasing_from.unwrap_or(0));
    loop {
        let (mut values, exhausted) = tensor_search_universe(gamma, eigs, n, universe)?;
        if values.len() < n && !exhausted {
            return Err(Error::NotEnumerable(format!(
                "tensor frontier search exceeded the pop budget at universe {universe}"
            )));
        }
        values.truncate(n);
        let v_n = values.last().copied().unwrap_or(0.0);
        let tail = tail_sup(&c, ann, universe);
        let v_max: f64 = (1..=universe).map(|j| c(j).max(1.0)).product();
        if v_max * tail < v_n || tail == 0.0 {
            return Ok(values);
        }
        if universe >= UNIVERSE_CAP {
            return Err(Error::NotEnumerable(format!(
                "cannot certify the top-{n} tensor spectrum: tail beyond index {universe} \
                 still reaches the cutoff {v_n}"
            )));
        }
        universe = (universe * 2).min(UNIVERSE_CAP);
    }
}

/// Frontier moves: append the next position at eigen-index 1, swap the last
/// position upward (only from eigen-index 1), increment the last eigen-index.
/// Each (subset, assignment) pair is generated exactly once.
fn tensor_search_universe(
    gamma: &(dyn Fn(u32) -> f64 + Sync),
    eigs: &[f64],
    n: usize,
    universe: u32,
) -> Result<(Vec<f64>, bool)> {
    let mut order: Vec<u32> = (1..=universe).filter(|&j| gamma(j) > 0.0).collect();
    order.sort_by(|&a, &b| {
        gamma(b)
            .partial_cmp(&gamma(a))
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let g: Vec<f64> = order.iter().map(|&j| gamma(j)).collect();
    let p = g.len();
    let r = eigs.len() as u32;
    let l1 = eigs[0];
    let mut remaining = vec![1.0; p + 1];
    for i in (0..p).rev() {
        remaining[i] = remaining[i + 1] * (g[i] * l1).max(1.0);
    }

    let mut heap = BinaryHeap::new();
    heap.push(TensorNode { key: remaining[0], value: 1.0, positions: vec![], eig: vec![] });
    let mut collected: Vec<f64> = Vec::new();
    let mut pops = 0usize;

    while let Some(node) = heap.pop() {
        let v_n = if collected.len() >= n {
            collected[n - 1]
        } else {
            f64::NEG_INFINITY
        };
        if collected.len() >= n && node.key < v_n {
            return Ok((collected, true));
        }
        pops += 1;
        if pops > POP_CAP {
            collected.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
            return Ok((collected, false));
        }
        collected.push(node.value);
        collected.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));

        let last = node.positions.last().copied();
        let next = last.map(|l| l + 1).unwrap_or(0);
        if (next as usize) < p {
            // values are recomputed from scratch (weight product times
            // eigenvalue product, each in slot order) so equal nodes carry
            // bitwise equal values; see `tensor_node_value`
            let mut positions = node.positions.clone();
            positions.push(next);
            let mut eig = node.eig.clone();
            eig.push(1);
            let value = tensor_node_value(&positions, &eig, &g, eigs);
            heap.push(TensorNode {
                key: value * remaining[next as usize + 1],
                value,
                positions,
                eig,
            });
            // swap the last position upward, only from eigen-index 1
            if last.is_some() && *node.eig.last().unwrap() == 1 {
                let mut positions = node.positions.clone();
                *positions.last_mut().unwrap() = next;
                let value = tensor_node_value(&positions, &node.eig, &g, eigs);
                heap.push(TensorNode {
                    key: value * remaining[next as usize + 1],
                    value,
                    positions,
                    eig: node.eig.clone(),
                });
            }
        }
        // increment the last eigen-index
        if let Some(&e) = node.eig.last() {
            if e < r {
                let mut eig = node.eig.clone();
                *eig.last_mut().unwrap() = e + 1;
                let value = tensor_node_value(&node.positions, &eig, &g, eigs);
                let m = *node.positions.last().unwrap() as usize;
                heap.push(TensorNode {
                    key: value * remaining[m + 1],
                    value,
                    positions: node.positions.clone(),
                    eig,
                });
            }
        }
    }
    Ok((collected, true))
}

/// Canonical fp evaluation of a tensor node: the weight product over
/// positions in ascending order times the eigenvalue product in slot order.
fn tensor_node_value(positions: &[u32], eig: &[u32], g: &[f64], eigs: &[f64]) -> f64 {
    let wg: f64 = positions.iter().map(|&p| g[p as usize]).product();
    let we: f64 = eig.iter().map(|&e| eigs[e as usize - 1]).product();
    wg * we
}
