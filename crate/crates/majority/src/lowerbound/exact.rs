//! Exact law of the root trajectory of the rooted tree under an external field.

use serde::{Deserialize, Serialize};

use super::lattice::{ChildMeasure, LatticeDistribution, DEFAULT_LATTICE_CAP};
use crate::error::{invalid, Result};
use crate::trajectory::{mask, spin};
use crate::Scalar;

/// `P((σ_o)_0^T || u_0^T)`: one trajectory distribution per field trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalFamily<S> {
    /// Horizon: trajectories have `T+1` spins.
    pub t: usize,
    pub k: usize,
    pub theta: f64,
    /// Row-major `[u][σ]`, each row of length `2^{T+1}`.
    pub table: Vec<S>,
}

impl<S: Scalar> ConditionalFamily<S> {
    pub fn len(&self) -> usize {
        self.t + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn width(&self) -> usize {
        1 << (self.t + 1)
    }

    #[inline]
    pub fn get(&self, sigma: u32, u: u32) -> &S {
        &self.table[u as usize * self.width() + sigma as usize]
    }

    /// Distribution of the root trajectory for one field trajectory.
    pub fn column(&self, u: u32) -> &[S] {
        let w = self.width();
        &self.table[u as usize * w..(u as usize + 1) * w]
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> ConditionalFamily<T> {
        ConditionalFamily { t: self.t, k: self.k, theta: self.theta, table: self.table.iter().map(f).collect() }
    }

    /// Largest deviation of a column sum from one.
    pub fn normalization_error(&self) -> f64 {
        (0..self.width() as u32)
            .map(|u| (self.column(u).iter().map(Scalar::to_f64).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Initial law `P_0(σ(0))` with bias `θ`.
pub fn initial<S: Scalar>(theta: f64, s: i8) -> S {
    let p = S::from_f64(theta);
    let two = S::from_u64(2);
    if s > 0 {
        (S::one() + p) / two
    } else {
        (S::one() - p) / two
    }
}

pub(crate) fn check(k: usize, theta: f64) -> Result<()> {
    if k < 3 {
        return Err(invalid(format!("k must be at least 3, got {k}")));
    }
    if !(-1.0..=1.0).contains(&theta) {
        return Err(invalid(format!("theta must lie in [-1, 1], got {theta}")));
    }
    Ok(())
}

/// Builds the family horizon by horizon: the root's `k-1` children are
/// i.i.d. given the root's own trajectory, which acts as their field.
pub fn exact_root_distribution<S: Scalar>(k: usize, t: usize, theta: f64) -> Result<ConditionalFamily<S>> {
    exact_root_distribution_capped(k, t, theta, DEFAULT_LATTICE_CAP)
}

pub fn exact_root_distribution_capped<S: Scalar>(
    k: usize,
    t: usize,
    theta: f64,
    cap: usize,
) -> Result<ConditionalFamily<S>> {
    check(k, theta)?;
    if t >= 15 {
        return Err(invalid("horizon too large"));
    }
    let mut fam = ConditionalFamily {
        t: 0,
        k,
        theta,
        table: vec![initial(theta, -1), initial(theta, 1), initial(theta, -1), initial(theta, 1)],
    };
    for _ in 0..t {
        fam = extend(&fam, cap)?;
    }
    Ok(fam)
}

/// One more step of horizon: from `P_h` to `P_{h+1}`.
fn extend<S: Scalar>(prev: &ConditionalFamily<S>, cap: usize) -> Result<ConditionalFamily<S>> {
    let k = prev.k;
    let len = prev.t + 1; // children trajectory length, and lattice length
    let new_width = 1usize << (len + 1);
    let mut table = vec![S::zero(); new_width * new_width];
    let p0 = [initial::<S>(prev.theta, -1), initial::<S>(prev.theta, 1)];
    for f in 0..(1u32 << len) {
        let child = ChildMeasure::plain(len, prev.column(f).to_vec());
        let mut dist = LatticeDistribution::empty(len, k - 1, 0, cap)?;
        for _ in 0..k - 1 {
            dist.convolve(&child);
        }
        let w = dist.root_weights(true, 0);
        // Root trajectory σ = f with one more spin; root spins σ(1..=len) form the code s.
        for last in 0..2u32 {
            let sigma = f | (last << len);
            let s = (sigma >> 1) as usize;
            let head = p0[(sigma & 1) as usize].clone();
            for u in 0..new_width as u32 {
                let ul = (u & mask(len)) as usize;
                table[u as usize * new_width + sigma as usize] = head.clone() * w[ul][s].clone();
            }
        }
    }
    Ok(ConditionalFamily { t: prev.t + 1, k, theta: prev.theta, table })
}

/// Law of the root trajectory `σ_0^T` on the full tree, where the root has
/// `k` children and no field.
pub fn full_tree_root_distribution<S: Scalar>(k: usize, t: usize, theta: f64) -> Result<Vec<S>> {
    check(k, theta)?;
    if t == 0 {
        return Ok(vec![initial(theta, -1), initial(theta, 1)]);
    }
    let children = exact_root_distribution::<S>(k, t - 1, theta)?;
    let len = t;
    let width = 1usize << (t + 1);
    let mut out = vec![S::zero(); width];
    for f in 0..(1u32 << len) {
        let child = ChildMeasure::plain(len, children.column(f).to_vec());
        let mut dist = LatticeDistribution::empty(len, k, 0, DEFAULT_LATTICE_CAP)?;
        for _ in 0..k {
            dist.convolve(&child);
        }
        let w = dist.root_weights(false, 0);
        for last in 0..2u32 {
            let sigma = f | (last << len);
            out[sigma as usize] = initial::<S>(theta, spin(sigma, 0)) * w[0][(sigma >> 1) as usize].clone();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k3_t1_examples() {
        let fam = exact_root_distribution::<f64>(3, 1, 0.0).unwrap();
        // u(0) = +1 has code bit 0 set
        for sigma in [0b10u32, 0b11] {
            assert!((fam.get(sigma, 0b01) - 0.375).abs() < 1e-15);
            assert!((fam.get(sigma, 0b00) - 0.125).abs() < 1e-15);
        }
        assert!(fam.normalization_error() < 1e-14);
    }

    #[test]
    fn full_tree_normalized() {
        let d = full_tree_root_distribution::<f64>(4, 3, 0.2).unwrap();
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(exact_root_distribution::<f64>(2, 1, 0.0).is_err());
        assert!(exact_root_distribution::<f64>(3, 1, 1.5).is_err());
    }
}
