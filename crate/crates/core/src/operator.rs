//! Exact finite-matrix realizations of the three integral operators sharing
//! the formula `f -> integral k(., t) f(t) dmu(t)` on a discrete measure.
//!
//! In the weighted coordinates `g_i = sqrt(w_i) g(t_i)` the L2-to-L2 section
//! is the symmetric matrix `A_ij = sqrt(w_i) k(t_i, t_j) sqrt(w_j)`; its
//! eigenvalues carry the singular values of the embedding. Eigendecomposition
//! always runs on this symmetric form, never on the similar nonsymmetric
//! `G W`; agreement of the two spectra is a test, not an implementation path.

use crate::error::{Error, Result};
use crate::kernel::{gram, Kernel};
use crate::measure::{DiscreteMeasure, DomainTag};
use nalgebra::DMatrix;
use serde::Serialize;

/// The data of the embedding `S`: a kernel and a compatible discrete measure.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    kernel: Kernel,
    measure: DiscreteMeasure,
}

impl EmbeddingModel {
    pub fn new(kernel: Kernel, measure: DiscreteMeasure) -> Result<EmbeddingModel> {
        let dom = kernel.domain();
        for (i, a) in measure.atoms().iter().enumerate() {
            if !dom.contains(a) {
                return Err(Error::invalid(format!(
                    "measure atom {i} outside the kernel domain {dom:?}"
                )));
            }
        }
        Ok(EmbeddingModel { kernel, measure })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn measure(&self) -> &DiscreteMeasure {
        &self.measure
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }
}

/// Spectrum and trace data of a finite model.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    /// Top singular values of `S`, descending.
    pub singular_values: Vec<f64>,
    /// `sigma_1`.
    pub operator_norm: f64,
    /// `sum_i w_i k(t_i, t_i)`.
    pub hs_trace: f64,
    /// `sum_ij w_i w_j k(t_i, t_j)^2`.
    pub kernel_l2_sq: f64,
    /// All eigenvalues of the symmetric section, descending, unclamped.
    pub raw_eigenvalues: Vec<f64>,
    pub atoms_count: usize,
    /// Set for sequence-space models: traces are partial sums truncated at
    /// this many atoms; divergence certification lives elsewhere.
    pub truncated_at: Option<usize>,
}

/// Matrix of `S S*` in weighted coordinates.
pub fn l2_matrix(m: &EmbeddingModel) -> Result<DMatrix<f64>> {
    let g = gram(m.kernel(), m.measure().atoms())?;
    let w = m.measure().weights();
    let n = w.len();
    let sqrt_w: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let mut a = g;
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] *= sqrt_w[i] * sqrt_w[j];
        }
    }
    Ok(a)
}

/// Negative eigenvalues within this times the matrix scale are clamped to 0
/// for sigma reporting; anything more negative is a numeric failure (it means
/// a non-PSD kernel slipped through).
const NEG_EIG_TOL: f64 = 1e-8;

/// Eigendecompose the symmetric section; report top-`n` singular values,
/// HS trace, and the kernel's L2(mu x mu) norm.
pub fn spectrum(m: &EmbeddingModel, n: usize) -> Result<SpectralReport> {
    if n > m.len() {
        return Err(Error::invalid(format!(
            "requested {n} singular values from a {}-atom model",
            m.len()
        )));
    }
    let a = l2_matrix(m)?;
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let eig = a.symmetric_eigen();
    let mut raw: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    if raw.iter().any(|l| !l.is_finite()) {
        return Err(Error::NumericFailure("eigensolver produced non-finite values".into()));
    }
    raw.sort_by(|x, y| y.partial_cmp(x).unwrap());
    if let Some(&min) = raw.last() {
        if min < -NEG_EIG_TOL * scale {
            return Err(Error::NumericFailure(format!(
                "eigenvalue {min} below the PSD tolerance; kernel section not PSD"
            )));
        }
    }
    let singular_values: Vec<f64> = raw.iter().take(n).map(|&l| l.max(0.0).sqrt()).collect();
    let operator_norm = raw.first().map(|&l| l.max(0.0).sqrt()).unwrap_or(0.0);
    Ok(SpectralReport {
        singular_values,
        operator_norm,
        hs_trace: hs_trace(m)?,
        kernel_l2_sq: kernel_l2_norm_sq(m)?,
        raw_eigenvalues: raw,
        atoms_count: m.len(),
        truncated_at: match m.measure().domain() {
            DomainTag::Naturals => Some(m.len()),
            _ => None,
        },
    })
}

/// `integral k(t, t) dmu(t)` as a weighted sum; equals the trace of
/// [`l2_matrix`].
pub fn hs_trace(m: &EmbeddingModel) -> Result<f64> {
    let mut acc = 0.0;
    for (a, w) in m.measure().atoms().iter().zip(m.measure().weights()) {
        acc += w * m.kernel().eval(a, a)?;
    }
    Ok(acc)
}

/// `||k||^2_{L2(mu x mu)} = sum_ij w_i w_j k(t_i, t_j)^2`.
pub fn kernel_l2_norm_sq(m: &EmbeddingModel) -> Result<f64> {
    let g = gram(m.kernel(), m.measure().atoms())?;
    let w = m.measure().weights();
    let n = w.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = g[(i, j)];
            acc += w[i] * w[j] * v * v;
        }
    }
    Ok(acc)
}

/// `(T f)(s) = sum_t w_t k(s, t) f(t)` sampled at the atoms. The same formula
/// serves all three operator variants; only the norm bookkeeping differs.
pub fn apply_t(m: &EmbeddingModel, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != m.len() {
        return Err(Error::invalid(format!(
            "sample length {} does not match atom count {}",
            f.len(),
            m.len()
        )));
    }
    let g = gram(m.kernel(), m.measure().atoms())?;
    let w = m.measure().weights();
    let n = w.len();
    let mut out = vec![0.0; n];
    for (s, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for t in 0..n {
            acc += w[t] * g[(s, t)] * f[t];
        }
        *o = acc;
    }
    Ok(out)
}

/// The Theorem-1 condition-(3) functional:
/// `double-integral ( integral k(s,t) f(t) dmu(t) )^2 dmu(s)`.
pub fn t3_functional(m: &EmbeddingModel, f: &[f64]) -> Result<f64> {
    let tf = apply_t(m, f)?;
    let w = m.measure().weights();
    Ok(tf.iter().zip(w).map(|(v, wi)| wi * v * v).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{atomic_measure, natural_measure, uniform_grid_measure, Point};

    fn two_atom_min_model() -> EmbeddingModel {
        let mu =
            atomic_measure(vec![Point::Real(0.25), Point::Real(0.75)], vec![0.5, 0.5]).unwrap();
        EmbeddingModel::new(Kernel::Min, mu).unwrap()
    }

    #[test]
    fn l2_matrix_min_two_atoms() {
        let a = l2_matrix(&two_atom_min_model()).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.125, 0.125, 0.125, 0.375]);
        assert!((a - expected).amax() < 1e-15);
    }

    #[test]
    fn l2_matrix_diagonal_is_mu_over_nu() {
        let k = Kernel::diagonal_from_expr("i").unwrap(); // nu_i = i
        let mu = natural_measure(4, |i| 1.0 / (i * i) as f64).unwrap();
        let m = EmbeddingModel::new(k, mu).unwrap();
        let a = l2_matrix(&m).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j {
                    // w_i k(i,i) = mu_i / nu_i = (1/i^2) / i
                    let idx = (i + 1) as f64;
                    1.0 / (idx * idx * idx)
                } else {
                    0.0
                };
                assert!((a[(i, j)] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn l2_matrix_single_atom() {
        let mu = atomic_measure(vec![Point::Real(0.3)], vec![0.7]).unwrap();
        let m = EmbeddingModel::new(Kernel::Min, mu).unwrap();
        let a = l2_matrix(&m).unwrap();
        assert!((a[(0, 0)] - 0.7 * 0.3).abs() < 1e-15);
    }

    #[test]
    fn spectrum_two_atom_characteristic_roots() {
        let rep = spectrum(&two_atom_min_model(), 2).unwrap();
        // roots of lambda^2 - 0.5 lambda + 0.03125
        let disc = (0.25f64 - 4.0 * 0.03125).sqrt();
        let l1 = (0.5 + disc) / 2.0;
        let l2 = (0.5 - disc) / 2.0;
        assert!((rep.singular_values[0] - l1.sqrt()).abs() < 1e-12);
        assert!((rep.singular_values[1] - l2.sqrt()).abs() < 1e-12);
        assert!((rep.operator_norm - l1.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn spectrum_nu_equals_mu_all_ones() {
        let k = Kernel::diagonal_from_expr("1/i^2").unwrap();
        let mu = natural_measure(8, |i| 1.0 / (i * i) as f64).unwrap();
        let m = EmbeddingModel::new(k, mu).unwrap();
        let rep = spectrum(&m, 8).unwrap();
        for s in &rep.singular_values {
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_eq!(rep.truncated_at, Some(8));
    }

    #[test]
    fn spectrum_identity_gram_gives_sqrt_weights() {
        let k = Kernel::diagonal_from_expr("1").unwrap();
        let weights = [0.9, 0.2, 0.5];
        let mu = natural_measure(3, |i| weights[(i - 1) as usize]).unwrap();
        let m = EmbeddingModel::new(k, mu).unwrap();
        let rep = spectrum(&m, 3).unwrap();
        let mut expected: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        expected.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (s, e) in rep.singular_values.iter().zip(&expected) {
            assert!((s - e).abs() < 1e-14);
        }
    }

    #[test]
    fn spectrum_rejects_oversized_request() {
        assert!(spectrum(&two_atom_min_model(), 3).is_err());
    }

    #[test]
    fn hs_trace_examples() {
        assert!((hs_trace(&two_atom_min_model()).unwrap() - 0.5).abs() < 1e-15);

        let k = Kernel::diagonal_from_expr("i").unwrap();
        let mu = natural_measure(3, |i| i as f64).unwrap(); // mu_i = i, nu_i = i
        let m = EmbeddingModel::new(k, mu).unwrap();
        assert!((hs_trace(&m).unwrap() - 3.0).abs() < 1e-14);

        let zero = Kernel::Zero { domain: DomainTag::Interval(0.0, 1.0) };
        let m = EmbeddingModel::new(zero, uniform_grid_measure(0.0, 1.0, 16).unwrap()).unwrap();
        assert_eq!(hs_trace(&m).unwrap(), 0.0);
    }

    #[test]
    fn hs_trace_matches_matrix_trace() {
        let m = EmbeddingModel::new(Kernel::Min, uniform_grid_measure(0.0, 1.0, 37).unwrap())
            .unwrap();
        let a = l2_matrix(&m).unwrap();
        let tr: f64 = (0..37).map(|i| a[(i, i)]).sum();
        let hs = hs_trace(&m).unwrap();
        assert!((tr - hs).abs() <= 1e-12 * hs.abs());
    }

    #[test]
    fn kernel_l2_examples() {
        // four-term hand sum for the two-atom min model
        assert!((kernel_l2_norm_sq(&two_atom_min_model()).unwrap() - 0.1875).abs() < 1e-15);

        let zero = Kernel::Zero { domain: DomainTag::Naturals };
        let m = EmbeddingModel::new(zero, natural_measure(5, |_| 0.2).unwrap()).unwrap();
        assert_eq!(kernel_l2_norm_sq(&m).unwrap(), 0.0);

        // diagonal: sum (mu_i / nu_i)^2
        let k = Kernel::diagonal_from_expr("1/i").unwrap(); // nu_i = 1/i
        let mu = natural_measure(4, |i| 1.0 / (i * i * i) as f64).unwrap(); // mu_i = i^-3
        let m = EmbeddingModel::new(k, mu).unwrap();
        let expected: f64 = (1u64..=4)
            .map(|i| {
                let r = (1.0 / (i * i * i) as f64) * i as f64;
                r * r
            })
            .sum();
        assert!((kernel_l2_norm_sq(&m).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn apply_t_basics() {
        let m = two_atom_min_model();
        assert_eq!(apply_t(&m, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        // e-vector of atom j -> column j of k(., t_j) scaled by w_j
        let col = apply_t(&m, &[0.0, 1.0]).unwrap();
        assert!((col[0] - 0.5 * 0.25).abs() < 1e-15);
        assert!((col[1] - 0.5 * 0.75).abs() < 1e-15);
        assert!(apply_t(&m, &[1.0]).is_err());
    }

    #[test]
    fn apply_t_diagonal_indicator() {
        let k = Kernel::diagonal_from_expr("i^2").unwrap(); // nu_i = i^2
        let mu = natural_measure(3, |i| i as f64).unwrap(); // mu_i = i
        let m = EmbeddingModel::new(k, mu).unwrap();
        let out = apply_t(&m, &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(out[0], 0.0);
        assert!((out[1] - 2.0 / 4.0).abs() < 1e-15); // mu_2 / nu_2
        assert_eq!(out[2], 0.0);
    }

    #[test]
    fn t3_zero_and_unit_section() {
        let m = two_atom_min_model();
        assert_eq!(t3_functional(&m, &[0.0, 0.0]).unwrap(), 0.0);

        // diagonal: unit mass at atom i with f(i) = 1/sqrt(nu_i) gives mu_i^3/nu_i^3
        let k = Kernel::diagonal_from_expr("2").unwrap(); // nu = 2
        let mu = natural_measure(3, |_| 0.5).unwrap(); // mu = 0.5
        let model = EmbeddingModel::new(k, mu).unwrap();
        let f = [0.0, 1.0 / 2f64.sqrt(), 0.0];
        let got = t3_functional(&model, &f).unwrap();
        // direct double sum: w_2 * (w_2 * (1/nu_2) * f_2)^2 = 0.5*(0.5*0.5*0.7071)^2
        let direct = 0.5 * (0.5 * 0.5 * f[1]) * (0.5 * 0.5 * f[1]);
        assert!((got - direct).abs() < 1e-15);
        // closed form for the unit H-norm section f = 1/sqrt(nu) at atom i:
        // t3 = mu_i^3 / nu_i^3
        let expected = (0.5f64 / 2.0).powi(3);
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn t3_matches_weighted_matrix_norm() {
        let m = EmbeddingModel::new(Kernel::Min, uniform_grid_measure(0.0, 1.0, 25).unwrap())
            .unwrap();
        let a = l2_matrix(&m).unwrap();
        let w = m.measure().weights().to_vec();
        // deterministic pseudo-random samples
        let f: Vec<f64> = (0..25).map(|i| ((i * 2654435761u64 as usize) % 97) as f64 / 48.5 - 1.0).collect();
        let fhat = nalgebra::DVector::from_iterator(
            25,
            f.iter().zip(&w).map(|(fi, wi)| wi.sqrt() * fi),
        );
        let expected = (&a * fhat).norm_squared();
        let got = t3_functional(&m, &f).unwrap();
        assert!((got - expected).abs() <= 1e-10 * expected.max(1e-300));
    }

    #[test]
    fn model_rejects_atoms_outside_kernel_domain() {
        let mu = atomic_measure(vec![Point::Real(0.5), Point::Real(1.5)], vec![0.5, 0.5]).unwrap();
        assert!(EmbeddingModel::new(Kernel::Min, mu).is_err());
        let nat = natural_measure(3, |_| 0.1).unwrap();
        assert!(EmbeddingModel::new(Kernel::Min, nat).is_err());
    }
}
