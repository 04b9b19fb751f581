//! Refinement-ladder diagnostics: compactness evidence from stabilizing
//! finite-section spectra, and executable checks of the spectral equivalences.
//!
//! Verdicts issued here are labeled "Evidence", never "Certified": a finite
//! model is always compact, so only the refinement trend carries information.
//! Certified verdicts live in the closed-form modules.

use crate::error::{Error, Result};
use crate::kernel::{gram, Kernel};
use crate::measure::DiscreteMeasure;
use crate::operator::{l2_matrix, spectrum, t3_functional, EmbeddingModel};
use nalgebra::DMatrix;
use serde::Serialize;

/// Eigenvalues below this fraction of the largest are treated as zero when
/// pairing the two operator sections; tiny eigenvalues of the nonsymmetric
/// section carry no relative accuracy.
const NONZERO_EIG_FRACTION: f64 = 1e-6;

/// Maximum atom count accepted by [`spectral_equivalence_check`].
const EQUIVALENCE_MAX_ATOMS: usize = 200;

/// Compare the nonzero spectra of the `T_{H,H}` section (`G W`, nonsymmetric)
/// and the `T_{L2,L2}` section (`W^{1/2} G W^{1/2}`); returns the maximum
/// relative gap between the paired sorted eigenvalues.
pub fn spectral_equivalence_check(k: &Kernel, m: &DiscreteMeasure) -> Result<f64> {
    if m.len() > EQUIVALENCE_MAX_ATOMS {
        return Err(Error::invalid(format!(
            "spectral_equivalence_check capped at {EQUIVALENCE_MAX_ATOMS} atoms, got {}",
            m.len()
        )));
    }
    let model = EmbeddingModel::new(k.clone(), m.clone())?;
    let a = l2_matrix(&model)?;
    let mut sym: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().cloned().collect();
    sym.sort_by(|x, y| y.partial_cmp(x).unwrap());

    let g = gram(k, m.atoms())?;
    let n = m.len();
    let mut gw = g;
    for j in 0..n {
        let wj = m.weights()[j];
        for i in 0..n {
            gw[(i, j)] *= wj;
        }
    }
    let complex = gw.complex_eigenvalues();
    let scale = sym.first().cloned().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
    let mut nonsym: Vec<f64> = Vec::with_capacity(n);
    for c in complex.iter() {
        if c.im.abs() > 1e-7 * scale {
            return Err(Error::NumericFailure(format!(
                "T_HH section produced a complex eigenvalue {c}"
            )));
        }
        nonsym.push(c.re);
    }
    nonsym.sort_by(|x, y| y.partial_cmp(x).unwrap());

    let cutoff = NONZERO_EIG_FRACTION * scale;
    let kept = sym.iter().take_while(|&&l| l > cutoff).count();
    let mut max_gap = 0.0f64;
    for i in 0..kept {
        let a = sym[i];
        let b = nonsym[i];
        let gap = (a - b).abs() / a.abs().max(f64::MIN_POSITIVE);
        max_gap = max_gap.max(gap);
    }
    Ok(max_gap)
}

/// A family of finite models of the same embedding at increasing resolution.
pub struct RefinementLadder {
    factory: Box<dyn Fn(usize) -> Result<EmbeddingModel>>,
    levels: Vec<usize>,
}

impl RefinementLadder {
    pub fn new(
        levels: Vec<usize>,
        factory: impl Fn(usize) -> Result<EmbeddingModel> + 'static,
    ) -> Result<RefinementLadder> {
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("ladder levels must be strictly increasing"));
        }
        Ok(RefinementLadder { factory: Box::new(factory), levels })
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn model_at(&self, level: usize) -> Result<EmbeddingModel> {
        (self.factory)(level)
    }
}

/// Tunables for evidence aggregation. Defaults match desk-scale midpoint-rule
/// convergence.
#[derive(Debug, Clone)]
pub struct EvidenceConfig {
    /// sigma_n counts as stable when the last two levels differ by less than
    /// this, relatively.
    pub stabilization_threshold: f64,
    /// Minimum run of consecutive sigma_n within `plateau_spread` for a
    /// non-compactness plateau.
    pub plateau_run: usize,
    pub plateau_spread: f64,
    /// Compact evidence requires the last reported sigma to fall below this
    /// fraction of sigma_1.
    pub decay_fraction: f64,
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        EvidenceConfig {
            stabilization_threshold: 1e-3,
            plateau_run: 5,
            plateau_spread: 1e-3,
            decay_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EvidenceVerdict {
    EvidenceCompact,
    EvidenceNonCompact,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompactnessEvidence {
    /// `sigma_table[level_index][n]`, one row per ladder level.
    pub sigma_table: Vec<Vec<f64>>,
    pub levels: Vec<usize>,
    /// Per-n stabilization flags across the last two levels.
    pub stabilized: Vec<bool>,
    pub verdict: EvidenceVerdict,
    pub notes: String,
}

/// Tolerated total-mass drift across ladder levels.
const MASS_DRIFT_TOL: f64 = 1e-9;

pub fn compactness_evidence(
    ladder: &RefinementLadder,
    n: usize,
    cfg: &EvidenceConfig,
) -> Result<CompactnessEvidence> {
    if ladder.levels().len() < 3 {
        return Err(Error::invalid("compactness evidence needs at least 3 levels"));
    }
    let smallest = ladder.levels()[0];
    if n > smallest {
        return Err(Error::invalid(format!(
            "n = {n} exceeds the smallest level {smallest}"
        )));
    }
    let mut sigma_table = Vec::new();
    let mut hs_values = Vec::new();
    let mut mass0 = None;
    for &level in ladder.levels() {
        let model = ladder.model_at(level)?;
        let mass = model.measure().total_mass();
        match mass0 {
            None => mass0 = Some(mass),
            Some(m0) => {
                if (mass - m0).abs() > MASS_DRIFT_TOL * m0.abs().max(1.0) {
                    return Err(Error::invalid(format!(
                        "total mass drifts across levels: {m0} vs {mass} at level {level}"
                    )));
                }
            }
        }
        let rep = spectrum(&model, n)?;
        hs_values.push(rep.hs_trace);
        sigma_table.push(rep.singular_values);
    }

    let finest = &sigma_table[sigma_table.len() - 1];
    let prev = &sigma_table[sigma_table.len() - 2];
    let stabilized: Vec<bool> = (0..n)
        .map(|j| {
            let a = prev[j];
            let b = finest[j];
            (a - b).abs() <= cfg.stabilization_threshold * b.abs().max(f64::MIN_POSITIVE)
        })
        .collect();

    // plateau: a run of plateau_run consecutive sigma_n at the finest level
    // with relative spread below plateau_spread
    let mut plateau = false;
    if n >= cfg.plateau_run {
        for start in 0..=(n - cfg.plateau_run) {
            let window = &finest[start..start + cfg.plateau_run];
            let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
            if hi > 0.0 && (hi - lo) / hi < cfg.plateau_spread {
                plateau = true;
                break;
            }
        }
    }

    let sigma1 = finest[0];
    let all_stable = stabilized.iter().all(|&s| s);
    let decayed = finest[n - 1] < cfg.decay_fraction * sigma1;

    let verdict = if plateau {
        EvidenceVerdict::EvidenceNonCompact
    } else if all_stable && decayed {
        EvidenceVerdict::EvidenceCompact
    } else {
        EvidenceVerdict::Inconclusive
    };

    let hs_first = hs_values[0];
    let hs_last = hs_values[hs_values.len() - 1];
    let hs_growing = hs_values.windows(2).all(|w| w[1] > w[0])
        && hs_last > hs_first * (1.0 + 1e-3);
    let notes = format!(
        "hs_trace per level: {hs_values:?}; trend: {}",
        if hs_growing { "partial sums growing" } else { "bounded" }
    );

    Ok(CompactnessEvidence {
        sigma_table,
        levels: ladder.levels().to_vec(),
        stabilized,
        verdict,
        notes,
    })
}

/// Decay of the condition-(3) functional along a caller-declared weakly null
/// family. H-norm bounds and pointwise convergence of the family are declared
/// by the caller, not verified; no computable surrogate exists.
#[derive(Debug, Clone, Serialize)]
pub struct DecayTable {
    /// `t3[level_index][n]`.
    pub t3: Vec<Vec<f64>>,
    pub levels: Vec<usize>,
    /// Whether the t3 values decrease monotonically in n at the finest level.
    pub monotone_decreasing_at_finest: bool,
}

pub fn weak_null_decay_check(
    ladder: &RefinementLadder,
    family: &dyn Fn(usize, &EmbeddingModel) -> Vec<f64>,
    family_size: usize,
) -> Result<DecayTable> {
    let mut t3 = Vec::new();
    for &level in ladder.levels() {
        let model = ladder.model_at(level)?;
        let mut row = Vec::with_capacity(family_size);
        for fi in 1..=family_size {
            let f = family(fi, &model);
            if f.len() != model.len() {
                return Err(Error::invalid(format!(
                    "family member {fi} has {} samples for a {}-atom model",
                    f.len(),
                    model.len()
                )));
            }
            row.push(t3_functional(&model, &f)?);
        }
        t3.push(row);
    }
    let finest = &t3[t3.len() - 1];
    let monotone = finest.windows(2).all(|w| w[1] <= w[0]);
    Ok(DecayTable {
        t3,
        levels: ladder.levels().to_vec(),
        monotone_decreasing_at_finest: monotone,
    })
}

/// Helper used by tests and the CLI: a grid-refinement ladder for an interval
/// kernel over Lebesgue measure on `[a, b]`.
pub fn grid_ladder(k: Kernel, a: f64, b: f64, levels: Vec<usize>) -> Result<RefinementLadder> {
    RefinementLadder::new(levels, move |m| {
        EmbeddingModel::new(k.clone(), crate::measure::uniform_grid_measure(a, b, m)?)
    })
}

/// Truncation ladder for a diagonal sequence model with weights `mu`.
pub fn truncation_ladder(
    k: Kernel,
    mu: crate::kernel::NatSeq,
    levels: Vec<usize>,
) -> Result<RefinementLadder> {
    RefinementLadder::new(levels, move |n| {
        let mu = mu.clone();
        EmbeddingModel::new(k.clone(), crate::measure::natural_measure(n, |i| mu(i))?)
    })
}

#[allow(unused)]
fn normalized_mass(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Kernel;
    use crate::measure::{natural_measure, uniform_grid_measure};
    use std::sync::Arc;

    #[test]
    fn equivalence_single_atom_exact() {
        let m = crate::measure::atomic_measure(vec![crate::measure::Point::Real(0.4)], vec![0.8])
            .unwrap();
        // the symmetric and Schur paths may differ by a rounding ulp even on
        // a 1x1 section
        assert!(spectral_equivalence_check(&Kernel::Min, &m).unwrap() <= 1e-12);
    }

    #[test]
    fn equivalence_diagonal_nu_eq_mu() {
        let k = Kernel::diagonal_from_expr("1/i^2").unwrap();
        let m = natural_measure(10, |i| 1.0 / (i * i) as f64).unwrap();
        let gap = spectral_equivalence_check(&k, &m).unwrap();
        assert!(gap <= 1e-10, "gap = {gap}");
    }

    #[test]
    fn equivalence_min_grid() {
        let m = uniform_grid_measure(0.0, 1.0, 40).unwrap();
        let gap = spectral_equivalence_check(&Kernel::Min, &m).unwrap();
        assert!(gap <= 1e-8, "gap = {gap}");
    }

    #[test]
    fn equivalence_rejects_oversized() {
        let m = uniform_grid_measure(0.0, 1.0, 201).unwrap();
        assert!(spectral_equivalence_check(&Kernel::Min, &m).is_err());
    }

    #[test]
    fn min_kernel_grid_evidence_compact() {
        let ladder = grid_ladder(Kernel::Min, 0.0, 1.0, vec![64, 128, 256]).unwrap();
        // n = 6: midpoint-rule eigenvalue error grows like (n h)^2, so higher
        // indices need finer grids than this desk-scale ladder to stabilize;
        // sigma_6 / sigma_1 = 1/11 already clears the decay line
        let ev = compactness_evidence(&ladder, 6, &EvidenceConfig::default()).unwrap();
        assert_eq!(
            ev.verdict,
            EvidenceVerdict::EvidenceCompact,
            "stabilized = {:?}, table = {:?}",
            ev.stabilized,
            ev.sigma_table
        );
        // sigma_1^2 should approach (2/pi)^2 = 0.405...
        let s1 = ev.sigma_table.last().unwrap()[0];
        assert!((s1 * s1 - 0.4053).abs() < 5e-3, "sigma1^2 = {}", s1 * s1);
        assert!(ev.notes.contains("bounded"));
    }

    #[test]
    fn nu_eq_mu_plateau_noncompact() {
        // renormalize the truncated mu at each level so the ladder holds
        // total mass fixed; the sigma plateau at 1/sqrt(S_n) persists
        let ladder = RefinementLadder::new(vec![16, 32, 64], move |n| {
            let total: f64 = (1..=n as u64).map(|i| 1.0 / (i * i) as f64).sum();
            let model = crate::measure::natural_measure(n, |i| 1.0 / (i * i) as f64 / total)?;
            EmbeddingModel::new(Kernel::diagonal_from_expr("1/i^2").unwrap(), model)
        })
        .unwrap();
        let ev = compactness_evidence(&ladder, 10, &EvidenceConfig::default()).unwrap();
        assert_eq!(ev.verdict, EvidenceVerdict::EvidenceNonCompact);
    }

    #[test]
    fn paper_pair_truncations_growing_trace() {
        let k = Kernel::diagonal_from_expr("log(i+1)/i^2").unwrap();
        let mu: crate::kernel::NatSeq = Arc::new(|i| 1.0 / (i * i) as f64);
        let ladder = truncation_ladder(k, mu, vec![200, 400, 800]).unwrap();
        // mass drifts for truncations of an infinite measure; build equal-mass
        // variants by padding is out of scope, so normalize: use the criterion
        // directly on sigma behavior via a custom ladder with renormalized mu.
        let ev = compactness_evidence(&ladder, 10, &EvidenceConfig::default());
        // truncation mass drift of sum 1/i^2 beyond 200 terms is ~5e-3 > tol,
        // so this must be rejected, and the renormalized ladder accepted below.
        assert!(ev.is_err());

        let k = Kernel::diagonal_from_expr("log(i+1)/i^2").unwrap();
        let ladder = RefinementLadder::new(vec![200, 400, 800], move |n| {
            let total: f64 = (1..=n as u64).map(|i| 1.0 / (i * i) as f64).sum();
            EmbeddingModel::new(
                k.clone(),
                natural_measure(n, |i| 1.0 / (i * i) as f64 / total)?,
            )
        })
        .unwrap();
        let ev = compactness_evidence(&ladder, 10, &EvidenceConfig::default()).unwrap();
        // sigma_n decays like 1/sqrt(log(n+1)): real but far too slow to cross
        // the 0.1 * sigma_1 line at desk scale, so the evidence verdict stays
        // Inconclusive; the certified Yes for this pair comes from seqspace.
        assert_eq!(ev.verdict, EvidenceVerdict::Inconclusive);
        assert!(ev.stabilized.iter().all(|&s| s));
        assert!(ev.notes.contains("growing"));
    }

    #[test]
    fn weak_null_zero_family() {
        let ladder = grid_ladder(Kernel::Min, 0.0, 1.0, vec![8, 16, 32]).unwrap();
        let table =
            weak_null_decay_check(&ladder, &|_, model| vec![0.0; model.len()], 4).unwrap();
        assert!(table.t3.iter().flatten().all(|&v| v == 0.0));
        assert!(table.monotone_decreasing_at_finest);
    }

    #[test]
    fn weak_null_kernel_sections_drift_to_boundary() {
        // f_n = k(., 1/n) / sqrt(1/n): unit H-norm sections of the min kernel
        let ladder = grid_ladder(Kernel::Min, 0.0, 1.0, vec![128, 256, 512]).unwrap();
        let family = |n: usize, model: &EmbeddingModel| {
            let s = 1.0 / n as f64;
            model
                .measure()
                .atoms()
                .iter()
                .map(|p| p.as_real().unwrap().min(s) / s.sqrt())
                .collect::<Vec<f64>>()
        };
        let table = weak_null_decay_check(&ladder, &family, 6).unwrap();
        let finest = table.t3.last().unwrap();
        for w in finest.windows(2) {
            assert!(w[1] < w[0], "t3 not strictly decreasing: {finest:?}");
        }
    }

    #[test]
    fn weak_null_diagonal_closed_form() {
        // compact paper pair: f_n = unit H-norm vector at atom n gives
        // t3 = (mu_n / nu_n)^3
        let k = Kernel::diagonal_from_expr("log(i+1)/i^2").unwrap();
        let ladder = RefinementLadder::new(vec![12, 16, 20], move |n| {
            let total: f64 = (1..=n as u64).map(|i| 1.0 / (i * i) as f64).sum();
            EmbeddingModel::new(
                k.clone(),
                natural_measure(n, |i| 1.0 / (i * i) as f64 / total)?,
            )
        })
        .unwrap();
        let family = |n: usize, model: &EmbeddingModel| {
            let mut f = vec![0.0; model.len()];
            // unit H-norm indicator: f(n) = 1/sqrt(nu_n)
            let i = n as u64;
            let nu = (i + 1) as f64;
            let nu = nu.ln() / (i * i) as f64;
            f[n - 1] = 1.0 / nu.sqrt();
            f
        };
        let table = weak_null_decay_check(&ladder, &family, 8).unwrap();
        let model = ladder.model_at(20).unwrap();
        let finest = table.t3.last().unwrap();
        for (idx, &got) in finest.iter().enumerate() {
            let i = (idx + 1) as u64;
            let mu = model.measure().weights()[idx];
            let nu = ((i + 1) as f64).ln() / (i * i) as f64;
            let expected = (mu / nu).powi(3);
            assert!((got - expected).abs() <= 1e-12 * expected, "n={i}");
        }
    }

    #[test]
    fn verdict_is_deterministic() {
        let run = || {
            let ladder = grid_ladder(Kernel::Min, 0.0, 1.0, vec![64, 128, 256]).unwrap();
            compactness_evidence(&ladder, 8, &EvidenceConfig::default()).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.verdict, b.verdict);
        assert_eq!(a.sigma_table, b.sigma_table);
        assert_eq!(a.notes, b.notes);
    }
}
