//! Property-based invariants over randomized inputs.

use kernel_embed::diagnostics::spectral_equivalence_check;
use kernel_embed::ivar::{enumerate_by_criterion, weight_of, IvarModel, WeightSchema};
use kernel_embed::kernel::{gram, ku_eval, psd_min_eig, SubsetU};
use kernel_embed::measure::{atomic_measure, natural_measure, uniform_grid_measure};
use kernel_embed::operator::spectrum;
use kernel_embed::seqspace::{ExampleVerdicts, Verdict};
use kernel_embed::{EmbeddingModel, Kernel, Point};
use proptest::prelude::*;
use std::collections::BTreeSet;
use std::sync::Arc;

fn distinct_sorted(xs: Vec<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = xs;
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Finite sections of catalog kernels are positive semidefinite.
    #[test]
    fn gram_sections_are_psd(
        xs in proptest::collection::vec(0.0f64..1.0, 1..40),
        sigma in 0.2f64..2.0,
        which in 0usize..3,
    ) {
        let xs = distinct_sorted(xs);
        prop_assume!(!xs.is_empty());
        let points: Vec<Point> = xs.iter().map(|&x| Point::Real(x)).collect();
        let kernel = match which {
            0 => Kernel::Min,
            1 => Kernel::gaussian(sigma).unwrap(),
            _ => Kernel::ConstantPlus(Box::new(Kernel::Min)),
        };
        let g = gram(&kernel, &points).unwrap();
        let min_eig = psd_min_eig(&g).unwrap();
        let scale = g.amax().max(1.0);
        prop_assert!(min_eig >= -1e-10 * scale, "min eig = {min_eig}");
    }

    /// k_{u union v} = k_u * k_v for disjoint subsets.
    #[test]
    fn ku_is_multiplicative_over_disjoint_unions(
        elems in proptest::collection::btree_set(1u32..10, 0..8),
        mask in proptest::collection::vec(any::<bool>(), 10),
        coords in proptest::collection::vec(0.0f64..1.0, 20),
    ) {
        let all: Vec<u32> = elems.iter().copied().collect();
        let (left, right): (Vec<u32>, Vec<u32>) =
            all.iter().partition(|&&j| mask[(j - 1) as usize]);
        let u = SubsetU::new(left).unwrap();
        let v = SubsetU::new(right).unwrap();
        let w = SubsetU::new(all).unwrap();
        let x: Vec<Point> = coords[..10].iter().map(|&c| Point::Real(c)).collect();
        let y: Vec<Point> = coords[10..].iter().map(|&c| Point::Real(c)).collect();
        let k = Kernel::Min;
        let lhs = ku_eval(&k, &w, &x, &y).unwrap();
        let rhs = ku_eval(&k, &u, &x, &y).unwrap() * ku_eval(&k, &v, &x, &y).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
    }

    /// Product weights multiply over disjoint subsets.
    #[test]
    fn product_weights_multiply(
        elems in proptest::collection::btree_set(1u32..20, 0..10),
        mask in proptest::collection::vec(any::<bool>(), 20),
        q in 0.1f64..0.9,
    ) {
        let all: Vec<u32> = elems.iter().copied().collect();
        let (left, right): (Vec<u32>, Vec<u32>) =
            all.iter().partition(|&&j| mask[(j - 1) as usize]);
        let schema = WeightSchema::product_geometric(q).unwrap();
        let u = SubsetU::new(left).unwrap();
        let v = SubsetU::new(right).unwrap();
        let w = SubsetU::new(all).unwrap();
        let lhs = weight_of(&schema, &w);
        let rhs = weight_of(&schema, &u) * weight_of(&schema, &v);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
    }

    /// The operator norm of a model restricted to a subset of atoms never
    /// exceeds the full model's norm (principal submatrices of a PSD matrix).
    #[test]
    fn submodel_operator_norm_monotone(
        n in 3usize..20,
        keep in proptest::collection::btree_set(0usize..20, 2..10),
        seed in any::<u64>(),
    ) {
        let keep: BTreeSet<usize> = keep.into_iter().filter(|&i| i < n).collect();
        prop_assume!(keep.len() >= 2);
        let weights: Vec<f64> = (0..n)
            .map(|i| {
                let h = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).rotate_left(i as u32);
                0.05 + (h % 1000) as f64 / 1100.0
            })
            .collect();
        let atoms: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let full = EmbeddingModel::new(
            Kernel::Min,
            atomic_measure(atoms.iter().map(|&a| Point::Real(a)).collect(), weights.clone())
                .unwrap(),
        )
        .unwrap();
        let sub = EmbeddingModel::new(
            Kernel::Min,
            atomic_measure(
                keep.iter().map(|&i| Point::Real(atoms[i])).collect(),
                keep.iter().map(|&i| weights[i]).collect(),
            )
            .unwrap(),
        )
        .unwrap();
        let full_norm = spectrum(&full, 1).unwrap().operator_norm;
        let sub_norm = spectrum(&sub, 1).unwrap().operator_norm;
        prop_assert!(sub_norm <= full_norm * (1.0 + 1e-10));
    }

    /// Symmetric and nonsymmetric formulations of the finite section agree.
    #[test]
    fn spectral_equivalence_random_small(
        xs in proptest::collection::vec(0.0f64..1.0, 2..20),
        ws in proptest::collection::vec(0.01f64..1.0, 20),
    ) {
        let xs = distinct_sorted(xs);
        prop_assume!(xs.len() >= 2);
        let m = atomic_measure(
            xs.iter().map(|&x| Point::Real(x)).collect(),
            ws[..xs.len()].to_vec(),
        )
        .unwrap();
        let gap = spectral_equivalence_check(&Kernel::Min, &m).unwrap();
        prop_assert!(gap <= 1e-8, "gap = {gap}");
    }

    /// Best-first enumeration agrees with brute force on a small universe.
    #[test]
    fn enumeration_matches_brute_force(q in 0.25f64..0.8) {
        let k = Kernel::diagonal_sequence(Arc::new(|_| 1.0), "1");
        let model = EmbeddingModel::new(k, natural_measure(1, |_| 1.0).unwrap()).unwrap();
        let m = IvarModel::new(model, WeightSchema::product_geometric(q).unwrap()).unwrap();
        let got = enumerate_by_criterion(&m, 20).unwrap();
        let mut all: Vec<(SubsetU, f64)> = (0u64..(1 << 10))
            .map(|mask| {
                let elems: Vec<u32> =
                    (0..10).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect();
                let v: f64 = elems.iter().map(|&j| q.powi(j as i32) * 1.0).product();
                (SubsetU::new(elems).unwrap(), v)
            })
            .collect();
        all.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap()
                .then(a.0.len().cmp(&b.0.len()))
                .then(a.0.elements().cmp(b.0.elements()))
        });
        all.truncate(20);
        prop_assert_eq!(got.len(), 20);
        for ((gu, gv), (eu, ev)) in got.iter().zip(all.iter()) {
            prop_assert_eq!(gu, eu);
            prop_assert_eq!(gv, ev);
        }
    }

    /// Assembled example verdicts always respect the implication chain.
    #[test]
    fn verdict_assembly_respects_chain(raw in proptest::collection::vec(0usize..3, 4)) {
        let mk = |c: usize| match c {
            0 => Verdict::YesCertified("raw".into()),
            1 => Verdict::NoCertified("raw".into()),
            _ => Verdict::Inconclusive("raw".into()),
        };
        let assembled = ExampleVerdicts::assemble(mk(raw[0]), mk(raw[1]), mk(raw[2]), mk(raw[3]));
        if let Ok(v) = assembled {
            // Yes flows upward
            prop_assert!(!v.hilbert_schmidt.is_yes() || v.compact.is_yes());
            prop_assert!(!v.kernel_in_l2.is_yes() || v.compact.is_yes());
            prop_assert!(!v.compact.is_yes() || v.bounded.is_yes());
            // No flows downward
            prop_assert!(!v.bounded.is_no() || v.compact.is_no());
            prop_assert!(!v.compact.is_no() || v.hilbert_schmidt.is_no());
            prop_assert!(!v.compact.is_no() || v.kernel_in_l2.is_no());
        }
    }
}

#[test]
fn grid_mass_is_exact() {
    for m in [3usize, 7, 64, 1000] {
        let mu = uniform_grid_measure(0.0, 1.0, m).unwrap();
        assert!((mu.total_mass() - 1.0).abs() < 1e-12);
    }
}
