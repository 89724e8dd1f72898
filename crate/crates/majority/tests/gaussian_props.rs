use std::f64::consts::PI;

use majority::gaussian::{
    conditional_reduce, normal_cdf, normal_pdf, slice_prob, GaussianSpec, Mode, Side, SliceOptions, SlicePartition,
};
use proptest::prelude::*;

fn opts(seed: u64) -> SliceOptions {
    SliceOptions::with_accuracy(1e-5, seed)
}

fn all_signs(d: usize) -> impl Iterator<Item = Vec<i8>> {
    (0..1u32 << d).map(move |b| (0..d).map(|i| if (b >> i) & 1 == 1 { 1 } else { -1 }).collect())
}

/// Covariance `A Aᵀ + δ I` from arbitrary entries, so it is positive definite.
fn spd(entries: &[f64], d: usize) -> Vec<Vec<f64>> {
    let a = |i: usize, j: usize| entries[i * d + j];
    (0..d)
        .map(|i| {
            (0..d).map(|j| (0..d).map(|l| a(i, l) * a(j, l)).sum::<f64>() + if i == j { 0.2 } else { 0.0 }).collect()
        })
        .collect()
}

#[test]
fn trivariate_orthant_closed_form() {
    let rho = [0.3, -0.2, 0.5];
    let cov = vec![vec![1.0, rho[0], rho[1]], vec![rho[0], 1.0, rho[2]], vec![rho[1], rho[2], 1.0]];
    let spec = GaussianSpec::new(vec![0.0; 3], cov).unwrap();
    let got = slice_prob(&spec, &SlicePartition::orthant(&[1, 1, 1]), &opts(1)).unwrap();
    let expected = 0.125 + rho.iter().map(|r: &f64| r.asin()).sum::<f64>() / (4.0 * PI);
    assert!((got.value - expected).abs() < 5.0 * got.std_error.max(1e-9), "{} vs {expected}", got.value);
}

#[test]
fn pinned_coordinate_closed_form() {
    // z ~ N(m, Σ) in 2-d; density of z0 at 0 times P(z1 ≥ 0 | z0 = 0)
    let (m0, m1, s00, s01, s11) = (0.4, -0.3, 1.5, 0.6, 0.8);
    let spec = GaussianSpec::new(vec![m0, m1], vec![vec![s00, s01], vec![s01, s11]]).unwrap();
    let part = SlicePartition::new(vec![Side::Pinned, Side::Plus]);
    let got = slice_prob(&spec, &part, &opts(2)).unwrap();
    let density = normal_pdf(m0 / s00.sqrt()) / s00.sqrt();
    let cm = m1 - s01 / s00 * m0;
    let cv = s11 - s01 * s01 / s00;
    let expected = density * normal_cdf(cm / cv.sqrt());
    assert!((got.value - expected).abs() < 1e-9, "{} vs {expected}", got.value);
}

#[test]
fn lattice_rule_agrees_with_plain_sampling() {
    let cov = spd(&[0.9, 0.1, -0.4, 0.3, 0.7, 0.2, -0.1, 0.5, 0.8], 3);
    let spec = GaussianSpec::new(vec![0.2, -0.1, 0.3], cov).unwrap();
    let part = SlicePartition::orthant(&[1, -1, 1]);
    let q = slice_prob(&spec, &part, &opts(3)).unwrap();
    let mc =
        slice_prob(&spec, &part, &SliceOptions { mode: Mode::MonteCarlo { samples: 400_000 }, ..opts(4) }).unwrap();
    let combined = (q.std_error.powi(2) + mc.std_error.powi(2)).sqrt();
    assert!((q.value - mc.value).abs() < 3.0 * combined, "{} vs {} ± {combined}", q.value, mc.value);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn orthants_sum_to_one(
        d in 1usize..4,
        entries in prop::collection::vec(-1.0f64..1.0, 9),
        mean in prop::collection::vec(-1.0f64..1.0, 3),
        seed in any::<u64>(),
    ) {
        let spec = GaussianSpec::new(mean[..d].to_vec(), spd(&entries, d)).unwrap();
        let mut total = 0.0;
        let mut var = 0.0;
        for signs in all_signs(d) {
            let r = slice_prob(&spec, &SlicePartition::orthant(&signs), &opts(seed)).unwrap();
            prop_assert!(r.value >= 0.0 && r.value <= 1.0);
            total += r.value;
            var += r.std_error.powi(2);
        }
        prop_assert!((total - 1.0).abs() <= 3.0 * var.sqrt() + 1e-12, "total {total}");
    }

    #[test]
    fn mirror_symmetry(
        d in 1usize..4,
        entries in prop::collection::vec(-1.0f64..1.0, 9),
        mean in prop::collection::vec(-1.0f64..1.0, 3),
        signs in prop::collection::vec(prop::bool::ANY, 3),
        pin in any::<bool>(),
    ) {
        let spec = GaussianSpec::new(mean[..d].to_vec(), spd(&entries, d)).unwrap();
        let mut sides: Vec<Side> = signs[..d].iter().map(|&s| if s { Side::Plus } else { Side::Minus }).collect();
        if pin {
            sides[0] = Side::Pinned;
        }
        let part = SlicePartition::new(sides);
        let neg = GaussianSpec::new(spec.mean.iter().map(|m| -m).collect(), spec.cov.clone()).unwrap();
        let a = slice_prob(&spec, &part, &opts(5)).unwrap();
        let b = slice_prob(&neg, &part.mirrored(), &opts(6)).unwrap();
        let tol = 3.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt() + 1e-12;
        prop_assert!((a.value - b.value).abs() <= tol);
    }

    #[test]
    fn conditioning_preserves_positive_definiteness(
        d in 2usize..4,
        entries in prop::collection::vec(-1.0f64..1.0, 9),
        pinned in 0usize..2,
    ) {
        let spec = GaussianSpec::new(vec![0.5; d], spd(&entries, d)).unwrap();
        let red = conditional_reduce(&spec, pinned).unwrap();
        prop_assert_eq!(red.dim(), d - 1);
        for i in 0..d - 1 {
            prop_assert!(red.cov[i][i] > 0.0);
        }
    }
}

#[test]
fn degenerate_pinned_coordinate_is_rejected() {
    let spec = GaussianSpec::new(vec![0.0, 0.3], vec![vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let part = SlicePartition::new(vec![Side::Pinned, Side::Plus]);
    let r = slice_prob(&spec, &part, &SliceOptions::with_accuracy(1e-6, 1));
    assert!(matches!(r, Err(majority::Error::ZeroPinnedVariance(0))), "{r:?}");
}
