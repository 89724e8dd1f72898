//! Exact lattice sums versus their local-CLT Gaussian approximation.
//!
//! `X_1, .., X_N` are i.i.d. in `{0,1}^d` and `S_N = Σ X_i`. For a target
//! point `a` and a partition `(I0, I+, I-)`,
//!
//! `F(a, I) = P(S_i = a_i on I0, S_i ≥ a_i on I+, S_i ≤ a_i on I-)`
//!
//! is approximated by `N^{-K/2} Φ_{√N·E X, Cov X}(A_∞(a/√N))` with `K = |I0|`,
//! and the relative error should decay at least like `N^{-1/(2K+2)}`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::{slice_prob, GaussianSpec, Side, SliceOptions, SlicePartition};
use crate::Scalar;

/// Largest number of multiply-adds the dynamic program may perform.
pub const DEFAULT_OPS_CAP: f64 = 1e10;

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeSumSpec<S = f64> {
    pub d: usize,
    pub n: usize,
    /// `P(X = x)` indexed by the bit pattern of `x` (bit `i` is `x_i`).
    pub cells: Vec<S>,
    pub a: Vec<i64>,
    pub partition: SlicePartition,
}

impl<S: Scalar> LatticeSumSpec<S> {
    pub fn new(n: usize, cells: Vec<S>, a: Vec<i64>, partition: SlicePartition) -> Result<Self> {
        let d = a.len();
        let spec = LatticeSumSpec { d, n, cells, a, partition };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds the problem from the `{±1}` formulation: `S = 2·S' - N`, so the
    /// target must have the parity of `N`. Cell bit `i` set means `X_i = +1`.
    pub fn from_pm_one(n: usize, cells: Vec<S>, a_pm: Vec<i64>, partition: SlicePartition) -> Result<Self> {
        let a = a_pm
            .iter()
            .map(|&x| {
                if (x + n as i64).rem_euclid(2) != 0 {
                    Err(invalid(format!("target {x} does not have the parity of N = {n}")))
                } else {
                    Ok((x + n as i64) / 2)
                }
            })
            .collect::<Result<_>>()?;
        Self::new(n, cells, a, partition)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > 3 {
            return Err(invalid(format!("dimension must lie in 1..=3, got {}", self.d)));
        }
        if self.n == 0 || self.n > 2000 {
            return Err(invalid(format!("N must lie in 1..=2000, got {}", self.n)));
        }
        if self.cells.len() != 1 << self.d {
            return Err(invalid(format!("need {} cell probabilities, got {}", 1 << self.d, self.cells.len())));
        }
        if self.partition.sides.len() != self.d {
            return Err(invalid("partition dimension does not match"));
        }
        if self.cells.iter().any(|c| *c < S::zero()) {
            return Err(invalid("negative cell probability"));
        }
        let total: f64 = self.cells.iter().map(Scalar::to_f64).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("cell probabilities sum to {total}")));
        }
        Ok(())
    }

    /// Checks the regularity conditions for a declared constant `B`: every
    /// cell at least `1/B`, and every target within `B√N` of `N/2`.
    pub fn check_regularity(&self, b: f64) -> Result<()> {
        if let Some(c) = self.cells.iter().find(|c| c.to_f64() < 1.0 / b) {
            return Err(invalid(format!("cell probability {} below 1/B = {}", c.to_f64(), 1.0 / b)));
        }
        let window = b * (self.n as f64).sqrt();
        if let Some(a) = self.a.iter().find(|&&a| (a as f64 - self.n as f64 / 2.0).abs() > window) {
            return Err(invalid(format!("target {a} outside the window of half-width {window}")));
        }
        Ok(())
    }

    pub fn pinned_count(&self) -> usize {
        self.partition.pinned().len()
    }

    fn to_f64(&self) -> LatticeSumSpec<f64> {
        LatticeSumSpec {
            d: self.d,
            n: self.n,
            cells: self.cells.iter().map(Scalar::to_f64).collect(),
            a: self.a.clone(),
            partition: self.partition.clone(),
        }
    }
}

/// Estimated multiply-adds of the dynamic program.
pub fn dp_cost(d: usize, n: usize) -> f64 {
    let cells = (1usize << d) as f64;
    (1..=n).map(|j| (j as f64).powi(d as i32) * cells).sum()
}

/// The law of `S_N` on the box `[0, N]^d`, flattened with coordinate 0 fastest.
pub fn lattice_distribution<S: Scalar>(spec: &LatticeSumSpec<S>, ops_cap: f64) -> Result<Vec<S>> {
    spec.validate()?;
    let (d, n) = (spec.d, spec.n);
    let cost = dp_cost(d, n);
    if cost > ops_cap {
        return Err(Error::SizeCap(format!("dynamic program needs about {cost:.2e} operations (cap {ops_cap:.2e})")));
    }
    let side = n + 1;
    let strides: Vec<usize> = (0..d).map(|i| side.pow(i as u32)).collect();
    let offsets: Vec<usize> =
        (0..1usize << d).map(|x| (0..d).filter(|&i| (x >> i) & 1 == 1).map(|i| strides[i]).sum()).collect();
    let mut cur = vec![S::zero(); side.pow(d as u32)];
    cur[0] = S::one();
    let mut next = cur.clone();
    for j in 0..n {
        // support of S_j is the box [0, j]^d
        for_box(d, j, &strides, |idx| next[idx] = S::zero());
        for_box(d, j + 1, &strides, |idx| next[idx] = S::zero());
        for_box(d, j, &strides, |idx| {
            let m = &cur[idx];
            if m.is_zero() {
                return;
            }
            for (x, off) in offsets.iter().enumerate() {
                let t = idx + off;
                next[t] = next[t].clone() + m.clone() * spec.cells[x].clone();
            }
        });
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// Visits flat indices of the box `[0, hi]^d`.
fn for_box(d: usize, hi: usize, strides: &[usize], mut f: impl FnMut(usize)) {
    let mut z = vec![0usize; d];
    loop {
        f(z.iter().zip(strides).map(|(a, b)| a * b).sum());
        let mut i = 0;
        loop {
            if i == d {
                return;
            }
            if z[i] < hi {
                z[i] += 1;
                break;
            }
            z[i] = 0;
            i += 1;
        }
    }
}

fn in_region(z: &[usize], a: &[i64], sides: &[Side]) -> bool {
    z.iter().zip(a).zip(sides).all(|((&z, &a), s)| match s {
        Side::Pinned => z as i64 == a,
        Side::Plus => z as i64 >= a,
        Side::Minus => z as i64 <= a,
    })
}

/// `F(a, I)` exactly, by an `N`-fold convolution over the lattice.
pub fn exact_lattice_prob<S: Scalar>(spec: &LatticeSumSpec<S>) -> Result<S> {
    exact_lattice_prob_capped(spec, DEFAULT_OPS_CAP)
}

pub fn exact_lattice_prob_capped<S: Scalar>(spec: &LatticeSumSpec<S>, ops_cap: f64) -> Result<S> {
    let dist = lattice_distribution(spec, ops_cap)?;
    let side = spec.n + 1;
    let mut total = S::zero();
    let mut z = vec![0usize; spec.d];
    for m in &dist {
        if in_region(&z, &spec.a, &spec.partition.sides) {
            total = total + m.clone();
        }
        for c in z.iter_mut() {
            *c += 1;
            if *c < side {
                break;
            }
            *c = 0;
        }
    }
    Ok(total)
}

/// Mean and covariance of one summand.
pub fn cell_moments(cells: &[f64], d: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let bit = |x: usize, i: usize| ((x >> i) & 1) as f64;
    let mean: Vec<f64> = (0..d).map(|i| cells.iter().enumerate().map(|(x, p)| p * bit(x, i)).sum()).collect();
    let cov = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    cells.iter().enumerate().map(|(x, p)| p * bit(x, i) * bit(x, j)).sum::<f64>() - mean[i] * mean[j]
                })
                .collect()
        })
        .collect();
    (mean, cov)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltComparison {
    pub d: usize,
    pub n: usize,
    /// Number of pinned coordinates.
    pub k: usize,
    pub exact: f64,
    pub approx: f64,
    pub approx_std_error: f64,
    /// `exact/approx - 1`.
    pub err: f64,
    /// `|err|·N^{1/(2K+2)}`, bounded if the error rate holds.
    pub bound_ratio: f64,
}

/// Gaussian approximation `N^{-K/2} Φ_{√N·E X, Cov X}(A_∞(a/√N))`.
pub fn gaussian_approx(spec: &LatticeSumSpec<f64>, opts: &SliceOptions) -> Result<(f64, f64)> {
    let (mean, cov) = cell_moments(&spec.cells, spec.d);
    let rn = (spec.n as f64).sqrt();
    let shifted = mean.iter().zip(&spec.a).map(|(m, &a)| rn * m - a as f64 / rn).collect();
    let g = GaussianSpec::new(shifted, cov)?;
    let r = slice_prob(&g, &spec.partition, opts)?;
    let scale = (spec.n as f64).powf(-(spec.pinned_count() as f64) / 2.0);
    Ok((scale * r.value, scale * r.std_error))
}

pub fn clt_compare<S: Scalar>(spec: &LatticeSumSpec<S>, opts: &SliceOptions) -> Result<CltComparison> {
    let exact = exact_lattice_prob(spec)?.to_f64();
    let spec = spec.to_f64();
    let (approx, approx_std_error) = gaussian_approx(&spec, opts)?;
    let k = spec.pinned_count();
    let err = exact / approx - 1.0;
    Ok(CltComparison {
        d: spec.d,
        n: spec.n,
        k,
        exact,
        approx,
        approx_std_error,
        err,
        bound_ratio: err.abs() * (spec.n as f64).powf(1.0 / (2 * k + 2) as f64),
    })
}

/// [`clt_compare`] over several sample counts, in parallel.
pub fn clt_scan(
    make: impl Fn(usize) -> Result<LatticeSumSpec<f64>> + Sync,
    ns: &[usize],
    opts: &SliceOptions,
) -> Result<Vec<CltComparison>> {
    ns.par_iter().map(|&n| clt_compare(&make(n)?, opts)).collect()
}

/// CSV `d,N,K,exact,approx,err,bound_ratio`.
pub fn write_csv<W: Write>(mut w: W, rows: &[CltComparison]) -> std::io::Result<()> {
    writeln!(w, "d,N,K,exact,approx,err,bound_ratio")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{},{}", r.d, r.n, r.k, r.exact, r.approx, r.err, r.bound_ratio)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_point() {
        let spec = LatticeSumSpec::new(4, vec![0.5, 0.5], vec![2], SlicePartition::new(vec![Side::Pinned])).unwrap();
        assert!((exact_lattice_prob(&spec).unwrap() - 6.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn parity_is_enforced() {
        let part = SlicePartition::new(vec![Side::Pinned]);
        assert!(LatticeSumSpec::from_pm_one(4, vec![0.5, 0.5], vec![1], part.clone()).is_err());
        let s = LatticeSumSpec::from_pm_one(4, vec![0.5, 0.5], vec![2], part).unwrap();
        assert_eq!(s.a, vec![3]);
    }

    #[test]
    fn cost_cap() {
        let spec = LatticeSumSpec::new(
            2000,
            vec![0.125; 8],
            vec![1000; 3],
            SlicePartition::new(vec![Side::Pinned, Side::Plus, Side::Plus]),
        )
        .unwrap();
        assert!(matches!(exact_lattice_prob(&spec), Err(Error::SizeCap(_))));
    }
}
