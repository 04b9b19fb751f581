//! The sequence-space example in closed form: `S: l2(nu) -> l2(mu)` with the
//! diagonal reproducing kernel `k(i, j) = delta_ij / nu_i`, and its four
//! criteria (bounded, compact, Hilbert-Schmidt, kernel in L2) driven by the
//! ratio sequence `mu_i / nu_i`.
//!
//! Certification is annotation-driven: limits and divergences of user-supplied
//! sequences are not decidable numerically, so certified verdicts require
//! declared asymptotics with a justification tag. Numeric scans alone yield
//! `Inconclusive` carrying evidence. Declared limits are sanity-probed against
//! the scanned ratios (a cheap, non-rigorous gate) and conflicts are errors,
//! never silently trusted.

use crate::error::{Error, Result};
use crate::kernel::NatSeq;
use serde::Serialize;
use std::sync::Arc;

/// Declared convergence or divergence of a series, with its justification.
#[derive(Debug, Clone, Serialize)]
pub enum SeriesAnnotation {
    Divergent { justification: String },
    Summable { justification: String },
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Annotations {
    /// Declared limit of `mu_i / nu_i`.
    pub ratio_limit: Option<f64>,
    /// Declared finiteness of `sup_i mu_i / nu_i`.
    pub ratio_sup_finite: Option<bool>,
    /// Declared behavior of `sum mu_i / nu_i`.
    pub ratio_sum: Option<SeriesAnnotation>,
    /// Declared behavior of `sum (mu_i / nu_i)^2`.
    pub ratio_sq_sum: Option<SeriesAnnotation>,
}

/// Generators for the two measures plus asymptotic annotations.
#[derive(Clone)]
pub struct SequencePair {
    pub mu: NatSeq,
    pub nu: NatSeq,
    pub mu_label: String,
    pub nu_label: String,
    pub annotations: Annotations,
}

impl std::fmt::Debug for SequencePair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SequencePair")
            .field("mu", &self.mu_label)
            .field("nu", &self.nu_label)
            .field("annotations", &self.annotations)
            .finish()
    }
}

impl SequencePair {
    pub fn ratio(&self, i: u64) -> f64 {
        (self.mu)(i) / (self.nu)(i)
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", content = "detail")]
pub enum Verdict {
    YesCertified(String),
    NoCertified(String),
    Inconclusive(String),
}

impl Verdict {
    pub fn is_yes(&self) -> bool {
        matches!(self, Verdict::YesCertified(_))
    }

    pub fn is_no(&self) -> bool {
        matches!(self, Verdict::NoCertified(_))
    }

    pub fn is_certified(&self) -> bool {
        !matches!(self, Verdict::Inconclusive(_))
    }
}

/// The four verdicts with the implication chain enforced at construction:
/// HS => compact, kernel-in-L2 => compact, compact => bounded.
#[derive(Debug, Clone, Serialize)]
pub struct ExampleVerdicts {
    pub bounded: Verdict,
    pub compact: Verdict,
    pub hilbert_schmidt: Verdict,
    pub kernel_in_l2: Verdict,
}

impl ExampleVerdicts {
    /// Close the raw verdicts under the implication chain; contradictory
    /// combinations are rejected rather than repaired silently.
    pub fn assemble(
        bounded: Verdict,
        compact: Verdict,
        hilbert_schmidt: Verdict,
        kernel_in_l2: Verdict,
    ) -> Result<ExampleVerdicts> {
        let mut bounded = bounded;
        let mut compact = compact;
        let mut hilbert_schmidt = hilbert_schmidt;
        let mut kernel_in_l2 = kernel_in_l2;

        // propagate Yes upward
        if hilbert_schmidt.is_yes() && !compact.is_yes() {
            if compact.is_no() {
                return Err(Error::AnnotationConflict(
                    "Hilbert-Schmidt certified yes but compactness certified no".into(),
                ));
            }
            compact = Verdict::YesCertified("implied by Hilbert-Schmidt".into());
        }
        if kernel_in_l2.is_yes() && !compact.is_yes() {
            if compact.is_no() {
                return Err(Error::AnnotationConflict(
                    "kernel in L2 certified yes but compactness certified no".into(),
                ));
            }
            compact = Verdict::YesCertified("implied by kernel in L2(mu x mu)".into());
        }
        if compact.is_yes() && !bounded.is_yes() {
            if bounded.is_no() {
                return Err(Error::AnnotationConflict(
                    "compactness certified yes but boundedness certified no".into(),
                ));
            }
            bounded = Verdict::YesCertified("implied by compactness".into());
        }

        // propagate No downward
        if bounded.is_no() && !compact.is_no() {
            compact = Verdict::NoCertified("implied by unboundedness".into());
        }
        if compact.is_no() {
            if hilbert_schmidt.is_yes() || kernel_in_l2.is_yes() {
                return Err(Error::AnnotationConflict(
                    "non-compactness contradicts a certified summability".into(),
                ));
            }
            if !hilbert_schmidt.is_no() {
                hilbert_schmidt = Verdict::NoCertified("implied by non-compactness".into());
            }
            if !kernel_in_l2.is_no() {
                kernel_in_l2 = Verdict::NoCertified("implied by non-compactness".into());
            }
        }

        Ok(ExampleVerdicts { bounded, compact, hilbert_schmidt, kernel_in_l2 })
    }
}

pub const DEFAULT_HORIZON: usize = 10_000;

/// Compute the four verdicts for a pair over a scan horizon.
pub fn verdicts(p: &SequencePair, horizon: usize) -> Result<ExampleVerdicts> {
    if horizon < 10 {
        return Err(Error::invalid("horizon must be at least 10"));
    }
    let h = horizon as u64;
    let mut sup = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut sq_sum = 0.0;
    for i in 1..=h {
        let mu = (p.mu)(i);
        let nu = (p.nu)(i);
        if !(mu > 0.0) || !(nu > 0.0) {
            return Err(Error::invalid(format!(
                "sequence generator not strictly positive at i = {i}: mu = {mu}, nu = {nu}"
            )));
        }
        let r = mu / nu;
        sup = sup.max(r);
        sum += r;
        sq_sum += r * r;
    }

    check_limit_annotation(p, h)?;
    let ann = &p.annotations;
    if let (Some(l), Some(false)) = (ann.ratio_limit, ann.ratio_sup_finite) {
        if l.is_finite() {
            return Err(Error::AnnotationConflict(format!(
                "finite ratio_limit {l} contradicts ratio_sup_finite = false"
            )));
        }
    }

    let bounded = match (ann.ratio_sup_finite, ann.ratio_limit) {
        (Some(true), _) => Verdict::YesCertified("declared: sup mu_i/nu_i finite".into()),
        (Some(false), _) => Verdict::NoCertified("declared: sup mu_i/nu_i infinite".into()),
        (None, Some(l)) if l.is_finite() => Verdict::YesCertified(format!(
            "declared ratio limit {l} is finite, so the sup is finite"
        )),
        _ => Verdict::Inconclusive(format!("probed sup over {horizon} indices: {sup}")),
    };

    let compact = match (ann.ratio_limit, ann.ratio_sup_finite) {
        (Some(0.0), _) => Verdict::YesCertified("declared: lim mu_i/nu_i = 0".into()),
        (Some(l), _) if l > 0.0 => Verdict::NoCertified(format!(
            "declared: lim mu_i/nu_i = {l} > 0"
        )),
        (_, Some(false)) => Verdict::NoCertified("declared: ratios unbounded".into()),
        _ => Verdict::Inconclusive(format!(
            "no limit annotation; ratio at horizon {horizon}: {}",
            p.ratio(h)
        )),
    };

    let hilbert_schmidt = series_verdict(&ann.ratio_sum, sum, horizon, "sum mu_i/nu_i");
    let kernel_in_l2 = series_verdict(&ann.ratio_sq_sum, sq_sum, horizon, "sum (mu_i/nu_i)^2");

    ExampleVerdicts::assemble(bounded, compact, hilbert_schmidt, kernel_in_l2)
}

fn series_verdict(
    ann: &Option<SeriesAnnotation>,
    partial: f64,
    horizon: usize,
    name: &str,
) -> Verdict {
    match ann {
        Some(SeriesAnnotation::Divergent { justification }) => {
            Verdict::NoCertified(format!("{name} diverges: {justification}"))
        }
        Some(SeriesAnnotation::Summable { justification }) => {
            Verdict::YesCertified(format!("{name} summable: {justification}"))
        }
        None => Verdict::Inconclusive(format!(
            "{name} partial sum over {horizon} indices: {partial}"
        )),
    }
}

/// Sanity gate for a declared ratio limit: the deviation |ratio(i) - L| must
/// fall below half its initial value by the horizon. Documented as
/// non-rigorous; it only catches blatant contradictions.
fn check_limit_annotation(p: &SequencePair, horizon: u64) -> Result<()> {
    let Some(l) = p.annotations.ratio_limit else {
        return Ok(());
    };
    if !l.is_finite() {
        return Ok(());
    }
    let dev1 = (p.ratio(1) - l).abs();
    let dev_h = (p.ratio(horizon) - l).abs();
    let ok = if dev1 <= 1e-12 { dev_h <= 1e-9 } else { dev_h <= 0.5 * dev1 };
    if !ok {
        return Err(Error::AnnotationConflict(format!(
            "declared ratio_limit {l} inconsistent with probed ratios: |r(1) - L| = {dev1}, \
             |r({horizon}) - L| = {dev_h}"
        )));
    }
    Ok(())
}

/// The worked pair `mu_i = 1/i^2`, `nu_i = log(i+1)/i^2`, with all four
/// annotations pre-filled.
pub fn paper_example() -> SequencePair {
    SequencePair {
        mu: Arc::new(|i| 1.0 / (i * i) as f64),
        nu: Arc::new(|i| ((i + 1) as f64).ln() / (i * i) as f64),
        mu_label: "1/i^2".into(),
        nu_label: "log(i+1)/i^2".into(),
        annotations: Annotations {
            ratio_limit: Some(0.0),
            ratio_sup_finite: Some(true),
            ratio_sum: Some(SeriesAnnotation::Divergent {
                justification: "1/log(i+1) >= 1/i for i >= 1 since log(i+1) <= i; \
                                the harmonic minorant diverges"
                    .into(),
            }),
            ratio_sq_sum: Some(SeriesAnnotation::Divergent {
                justification: "1/log(i+1)^2 >= 1/i for i >= 1 since log(i+1)^2 <= i; \
                                the harmonic minorant diverges"
                    .into(),
            }),
        },
    }
}

/// `nu = mu`: the embedding is the identity on a weighted little-l2, bounded
/// but not compact.
pub fn equal_pair(base: NatSeq, label: impl Into<String>) -> SequencePair {
    let label = label.into();
    SequencePair {
        mu: base.clone(),
        nu: base,
        mu_label: label.clone(),
        nu_label: label,
        annotations: Annotations {
            ratio_limit: Some(1.0),
            ratio_sup_finite: Some(true),
            ratio_sum: Some(SeriesAnnotation::Divergent {
                justification: "ratio identically 1; terms do not vanish".into(),
            }),
            ratio_sq_sum: Some(SeriesAnnotation::Divergent {
                justification: "ratio identically 1; terms do not vanish".into(),
            }),
        },
    }
}
