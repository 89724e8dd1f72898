//! Gaussian slice probabilities `Φ_{m,Σ}(A)`: orthant probabilities of a normal
//! vector, optionally with one coordinate pinned at zero (where the density of
//! that coordinate replaces a probability).
//!
//! Orthants are integrated by Cholesky-based sequential conditioning (the
//! separation-of-variables transform) on a randomly shifted Kronecker lattice,
//! which gives a quasi-Monte Carlo estimate together with an honest error bar.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{invalid, Error, Result};
use crate::seed::RandomSeed;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Eigenvalue floor below which the covariance is regularized.
pub const JITTER: f64 = 1e-10;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Inverse of [`normal_cdf`] on `(0, 1)`.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        -SQRT_2 * erfc_inv(2.0 * p)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    /// Row-major covariance.
    pub cov: Vec<Vec<f64>>,
}

impl GaussianSpec {
    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d || cov.iter().any(|r| r.len() != d) {
            return Err(invalid("covariance shape does not match mean"));
        }
        for i in 0..d {
            for j in 0..i {
                let (a, b) = (cov[i][j], cov[j][i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(invalid(format!("covariance not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(GaussianSpec { mean, cov })
    }

    pub fn standard(d: usize) -> Self {
        let cov = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        GaussianSpec { mean: vec![0.0; d], cov }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.cov[i][j])
    }

    /// Restriction to a subset of coordinates, in the given order.
    pub fn select(&self, idx: &[usize]) -> GaussianSpec {
        GaussianSpec {
            mean: idx.iter().map(|&i| self.mean[i]).collect(),
            cov: idx.iter().map(|&i| idx.iter().map(|&j| self.cov[i][j]).collect()).collect(),
        }
    }
}

/// Constraint on one coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Pinned at 0: contributes its density.
    Pinned,
    /// `z ≥ 0`.
    Plus,
    /// `z ≤ 0`.
    Minus,
}

impl Side {
    pub fn from_sign(s: i8) -> Side {
        if s > 0 {
            Side::Plus
        } else {
            Side::Minus
        }
    }

    fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
            Side::Pinned => 0.0,
        }
    }
}

/// The partition `(I0, I+, I−)`, stored as one [`Side`] per coordinate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlicePartition {
    pub sides: Vec<Side>,
}

impl SlicePartition {
    pub fn new(sides: Vec<Side>) -> Self {
        SlicePartition { sides }
    }

    /// Builds the partition from index sets, which must be disjoint and cover `0..d`.
    pub fn from_sets(d: usize, pinned: &[usize], plus: &[usize], minus: &[usize]) -> Result<Self> {
        let mut sides = vec![None; d];
        for (set, side) in [(pinned, Side::Pinned), (plus, Side::Plus), (minus, Side::Minus)] {
            for &i in set {
                match sides.get_mut(i) {
                    Some(slot @ None) => *slot = Some(side),
                    Some(Some(_)) => return Err(invalid(format!("index {i} in two sets"))),
                    None => return Err(invalid(format!("index {i} out of range"))),
                }
            }
        }
        let sides = sides
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| invalid(format!("index {i} not covered"))))
            .collect::<Result<_>>()?;
        Ok(SlicePartition { sides })
    }

    pub fn orthant(signs: &[i8]) -> Self {
        SlicePartition { sides: signs.iter().map(|&s| Side::from_sign(s)).collect() }
    }

    pub fn pinned(&self) -> Vec<usize> {
        (0..self.sides.len()).filter(|&i| self.sides[i] == Side::Pinned).collect()
    }

    /// Swaps `I+` and `I−`.
    pub fn mirrored(&self) -> Self {
        SlicePartition {
            sides: self
                .sides
                .iter()
                .map(|s| match s {
                    Side::Plus => Side::Minus,
                    Side::Minus => Side::Plus,
                    Side::Pinned => Side::Pinned,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    /// Closed form, no integration error.
    Exact,
    /// Randomized lattice rule.
    Qmc,
    /// Plain sampling.
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Method {
    pub kind: MethodKind,
    /// Integrand evaluations (0 for closed forms).
    pub points: usize,
    /// Whether the covariance was regularized.
    pub jitter: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceResult {
    pub value: f64,
    pub std_error: f64,
    pub method: Method,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Qmc,
    /// Oracle mode with a fixed sample count.
    MonteCarlo {
        samples: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceOptions {
    /// Target standard error.
    pub accuracy: f64,
    pub seed: u64,
    pub mode: Mode,
    /// Independent random shifts used for the error estimate.
    pub shifts: usize,
    pub min_points: usize,
    pub max_points: usize,
}

impl Default for SliceOptions {
    fn default() -> Self {
        SliceOptions { accuracy: 1e-5, seed: 0, mode: Mode::Qmc, shifts: 16, min_points: 128, max_points: 1 << 22 }
    }
}

impl SliceOptions {
    pub fn with_accuracy(accuracy: f64, seed: u64) -> Self {
        SliceOptions { accuracy, seed, ..Default::default() }
    }
}

/// Conditional law of the other coordinates given `z_pinned = 0` (Schur complement).
pub fn conditional_reduce(spec: &GaussianSpec, pinned: usize) -> Result<GaussianSpec> {
    let d = spec.dim();
    if pinned >= d {
        return Err(invalid(format!("pinned index {pinned} out of range")));
    }
    let v = spec.cov[pinned][pinned];
    if v <= 0.0 {
        return Err(Error::ZeroPinnedVariance(pinned));
    }
    let rest: Vec<usize> = (0..d).filter(|&i| i != pinned).collect();
    let m0 = spec.mean[pinned];
    let mean = rest.iter().map(|&i| spec.mean[i] - spec.cov[i][pinned] / v * m0).collect();
    let cov = rest
        .iter()
        .map(|&i| rest.iter().map(|&j| spec.cov[i][j] - spec.cov[i][pinned] * spec.cov[pinned][j] / v).collect())
        .collect();
    Ok(GaussianSpec { mean, cov })
}

/// Slice probability with `|I0| ≤ 1`.
pub fn slice_prob(spec: &GaussianSpec, part: &SlicePartition, opts: &SliceOptions) -> Result<SliceResult> {
    let d = spec.dim();
    if part.sides.len() != d {
        return Err(invalid("partition dimension does not match"));
    }
    if !(opts.accuracy > 0.0) {
        return Err(invalid("accuracy must be positive"));
    }
    let pinned = part.pinned();
    // jitter would turn a degenerate pinned coordinate into a huge spurious density
    if let Some(&s) = pinned.iter().find(|&&s| spec.cov[s][s] <= JITTER) {
        return Err(Error::ZeroPinnedVariance(s));
    }
    let (spec, jitter) = regularize(spec)?;
    match pinned.as_slice() {
        [] => {
            let mut r = orthant(&spec, &part.sides, opts)?;
            r.method.jitter |= jitter;
            Ok(r)
        }
        &[s] => {
            let sd = spec.cov[s][s].sqrt();
            let density = normal_pdf(spec.mean[s] / sd) / sd;
            let reduced = conditional_reduce(&spec, s)?;
            let sides: Vec<Side> = (0..d).filter(|&i| i != s).map(|i| part.sides[i]).collect();
            let inner_opts = SliceOptions { accuracy: opts.accuracy / density.max(1e-300), ..*opts };
            let mut r = orthant(&reduced, &sides, &inner_opts)?;
            r.value *= density;
            r.std_error *= density;
            r.method.jitter |= jitter;
            Ok(r)
        }
        _ => Err(invalid("at most one pinned coordinate is supported")),
    }
}

fn regularize(spec: &GaussianSpec) -> Result<(GaussianSpec, bool)> {
    if spec.dim() == 0 {
        return Ok((spec.clone(), false));
    }
    let min_eig = SymmetricEigen::new(spec.matrix()).eigenvalues.min();
    if min_eig >= JITTER {
        return Ok((spec.clone(), false));
    }
    if min_eig + JITTER <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min_eig, context: String::new() });
    }
    let mut out = spec.clone();
    for i in 0..out.dim() {
        out.cov[i][i] += JITTER;
    }
    Ok((out, true))
}

fn cholesky(spec: &GaussianSpec) -> Result<DMatrix<f64>> {
    spec.matrix()
        .cholesky()
        .map(|c| c.l())
        .ok_or(Error::NotPositiveDefinite { min_eigenvalue: f64::NAN, context: String::new() })
}

/// `P(sign_i z_i ≥ 0 ∀ i)` for `z ~ N(mean, cov)`.
fn orthant(spec: &GaussianSpec, sides: &[Side], opts: &SliceOptions) -> Result<SliceResult> {
    let d = spec.dim();
    let exact = |value: f64| SliceResult {
        value,
        std_error: 0.0,
        method: Method { kind: MethodKind::Exact, points: 0, jitter: false },
    };
    if d == 0 {
        return Ok(exact(1.0));
    }
    // Work with y = S z, which has mean S m and covariance S Σ S, and ask for y ≥ 0.
    let sign: Vec<f64> = sides.iter().map(|s| s.sign()).collect();
    let mean: Vec<f64> = (0..d).map(|i| sign[i] * spec.mean[i]).collect();
    let cov: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| sign[i] * sign[j] * spec.cov[i][j]).collect()).collect();
    let y = GaussianSpec { mean, cov };
    if d == 1 {
        return Ok(exact(normal_cdf(y.mean[0] / y.cov[0][0].sqrt())));
    }
    let l = cholesky(&y)?;
    match opts.mode {
        Mode::Qmc => qmc_orthant(&y.mean, &l, opts),
        Mode::MonteCarlo { samples } => Ok(mc_orthant(&y.mean, &l, samples, opts.seed)),
    }
}

/// Separation-of-variables integrand on `[0,1]^{d-1}`.
fn sov_integrand(mean: &[f64], l: &DMatrix<f64>, x: &[f64], w: &mut [f64]) -> f64 {
    let d = mean.len();
    let mut f = 1.0;
    for i in 0..d {
        let mut acc = mean[i];
        for j in 0..i {
            acc += l[(i, j)] * w[j];
        }
        // need l_ii w_i ≥ -acc
        let upper_tail = normal_cdf(acc / l[(i, i)]);
        f *= upper_tail;
        if f == 0.0 {
            return 0.0;
        }
        if i + 1 < d {
            w[i] = -normal_quantile(upper_tail * (1.0 - x[i]));
        }
    }
    f
}

const PRIMES: [u32; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

fn qmc_orthant(mean: &[f64], l: &DMatrix<f64>, opts: &SliceOptions) -> Result<SliceResult> {
    let dim = mean.len() - 1;
    if dim > PRIMES.len() {
        return Err(invalid("dimension too large for the lattice rule"));
    }
    let alpha: Vec<f64> = PRIMES[..dim].iter().map(|&p| (p as f64).sqrt().fract()).collect();
    let mut rng = RandomSeed::new(opts.seed).rng();
    let shifts: Vec<Vec<f64>> =
        (0..opts.shifts.max(2)).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    let mut sums = vec![0.0; shifts.len()];
    let mut x = vec![0.0; dim];
    let mut w = vec![0.0; mean.len()];
    let mut done = 0usize;
    let mut n = opts.min_points.max(16);
    loop {
        // Extend each shifted sequence from `done` to `n` points.
        for (shift, sum) in shifts.iter().zip(sums.iter_mut()) {
            for j in done..n {
                for k in 0..dim {
                    let u = (j as f64 * alpha[k] + shift[k]).fract();
                    // baker's transform periodizes the integrand
                    x[k] = 1.0 - (2.0 * u - 1.0).abs();
                }
                *sum += sov_integrand(mean, l, &x, &mut w);
            }
        }
        done = n;
        let m = shifts.len() as f64;
        let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
        let value = means.iter().sum::<f64>() / m;
        let var = means.iter().map(|v| (v - value).powi(2)).sum::<f64>() / (m - 1.0);
        let std_error = (var / m).sqrt();
        let points = n * shifts.len();
        if std_error <= opts.accuracy {
            return Ok(SliceResult {
                value: value.max(0.0),
                std_error,
                method: Method { kind: MethodKind::Qmc, points, jitter: false },
            });
        }
        if n * 2 > opts.max_points {
            return Err(Error::AccuracyNotReached { target: opts.accuracy, achieved: std_error, points });
        }
        n *= 2;
    }
}

fn mc_orthant(mean: &[f64], l: &DMatrix<f64>, samples: usize, seed: u64) -> SliceResult {
    let d = mean.len();
    let mut rng = RandomSeed::new(seed).rng();
    let mut hits = 0usize;
    let mut z = DVector::zeros(d);
    for _ in 0..samples {
        for i in 0..d {
            z[i] = rng.sample(StandardNormal);
        }
        let y = l * &z;
        if (0..d).all(|i| y[i] + mean[i] >= 0.0) {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    SliceResult {
        value: p,
        std_error: (p * (1.0 - p) / samples as f64).sqrt(),
        method: Method { kind: MethodKind::MonteCarlo, points: samples, jitter: false },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> SliceOptions {
        SliceOptions::with_accuracy(1e-6, 3)
    }

    #[test]
    fn univariate() {
        let spec = GaussianSpec::standard(1);
        let plus = slice_prob(&spec, &SlicePartition::orthant(&[1]), &opts()).unwrap();
        assert!((plus.value - 0.5).abs() < 1e-15);
        let pin = slice_prob(&spec, &SlicePartition::new(vec![Side::Pinned]), &opts()).unwrap();
        assert!((pin.value - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-12, 1e-5, 0.1, 0.5, 0.77, 0.999_999] {
            let err = (normal_cdf(normal_quantile(p)) - p).abs() / p;
            assert!(err < 1e-9, "p {p}: relative error {err:e}");
        }
    }

    #[test]
    fn bivariate_orthant_formula() {
        for &rho in &[-0.9, -0.3, 0.0, 0.5, 0.95] {
            let spec = GaussianSpec::new(vec![0.0, 0.0], vec![vec![1.0, rho], vec![rho, 1.0]]).unwrap();
            let r = slice_prob(&spec, &SlicePartition::orthant(&[1, 1]), &opts()).unwrap();
            let exact = 0.25 + rho.asin() / (2.0 * std::f64::consts::PI);
            assert!((r.value - exact).abs() < 5.0 * r.std_error.max(1e-9), "rho {rho}: {r:?} vs {exact}");
        }
    }

    #[test]
    fn schur_complement_by_hand() {
        let rho = 0.6;
        let spec = GaussianSpec::new(vec![0.7, -0.2], vec![vec![1.0, rho], vec![rho, 1.0]]).unwrap();
        let red = conditional_reduce(&spec, 0).unwrap();
        assert!((red.cov[0][0] - (1.0 - rho * rho)).abs() < 1e-15);
        assert!((red.mean[0] - (-0.2 - rho * 0.7)).abs() < 1e-15);
    }

    #[test]
    fn identity_conditioning_is_inert() {
        let spec = GaussianSpec::new(vec![0.1, 0.2, 0.3], GaussianSpec::standard(3).cov).unwrap();
        let red = conditional_reduce(&spec, 1).unwrap();
        assert_eq!(red.mean, vec![0.1, 0.3]);
        assert_eq!(red.cov, GaussianSpec::standard(2).cov);
    }

    #[test]
    fn zero_variance_pin_rejected() {
        let spec = GaussianSpec::new(vec![0.0, 0.0], vec![vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(conditional_reduce(&spec, 0), Err(Error::ZeroPinnedVariance(0))));
    }

    #[test]
    fn non_pd_is_distinct_error() {
        let spec = GaussianSpec::new(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let err = slice_prob(&spec, &SlicePartition::orthant(&[1, 1]), &opts()).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn singular_cov_gets_jitter() {
        let spec = GaussianSpec::new(vec![0.0, 0.0], vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let r = slice_prob(&spec, &SlicePartition::orthant(&[1, 1]), &SliceOptions::with_accuracy(1e-4, 1)).unwrap();
        assert!(r.method.jitter);
        assert!((r.value - 0.5).abs() < 1e-3);
    }

    #[test]
    fn unreachable_accuracy_is_reported() {
        let spec = GaussianSpec::new(vec![0.0; 3], vec![vec![1.0, 0.5, 0.2], vec![0.5, 1.0, 0.3], vec![0.2, 0.3, 1.0]])
            .unwrap();
        let o = SliceOptions { accuracy: 1e-15, max_points: 1 << 10, ..Default::default() };
        assert!(matches!(
            slice_prob(&spec, &SlicePartition::orthant(&[1, -1, 1]), &o),
            Err(Error::AccuracyNotReached { .. })
        ));
    }

    #[test]
    fn partition_validation() {
        assert!(SlicePartition::from_sets(3, &[0], &[1], &[2]).is_ok());
        assert!(SlicePartition::from_sets(3, &[0], &[1], &[]).is_err());
        assert!(SlicePartition::from_sets(2, &[0], &[0, 1], &[]).is_err());
    }
}
