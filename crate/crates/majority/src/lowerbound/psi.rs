//! Alternating-core iteration.
//!
//! `Ψ_odd(σ||u)` is the mass of root trajectory `σ` jointly with the root
//! belonging to a depth-`d` partial rooted alternating core as an odd vertex;
//! `Ψ_even` likewise as an even vertex, which forces `σ(T) = -1`.

use serde::{Deserialize, Serialize};

use super::exact::{initial, ConditionalFamily};
use super::lattice::{ChildMeasure, LatticeDistribution, DEFAULT_LATTICE_CAP};
use crate::error::{Error, Result};
use crate::trajectory::{mask, spin};
use crate::Scalar;

/// Relative slack tolerated on `0 ≤ Ψ ≤ P` and on monotonicity in `d`.
pub const SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiTables<S> {
    pub t: usize,
    pub k: usize,
    pub theta: f64,
    /// Iterations performed.
    pub d: usize,
    /// Row-major `[u][σ]` like [`ConditionalFamily::table`].
    pub psi_odd: Vec<S>,
    pub psi_even: Vec<S>,
    /// Largest relative change `(Ψ^{d-1} - Ψ^d)/Ψ^{d-1}` in the last iteration.
    /// Measured against Ψ itself, so slow geometric decay towards zero never
    /// looks converged.
    pub sup_change: f64,
    pub converged: bool,
    /// Smallest `Ψ_odd/P` over entries with `P > 0`.
    pub min_ratio: f64,
    /// Largest relative violation of `0 ≤ Ψ ≤ P` seen before clamping.
    pub max_bound_violation: f64,
    /// Largest relative increase `Ψ^{d+1} - Ψ^d` seen in any iteration.
    pub max_monotone_violation: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiOptions {
    pub d_max: usize,
    /// Stop once the largest relative change falls below this.
    pub eps_converge: f64,
    /// Stop early once some `Ψ_odd/P` falls below this (positivity is lost for good).
    pub eps_positive: Option<f64>,
    pub lattice_cap: usize,
}

impl Default for PsiOptions {
    fn default() -> Self {
        PsiOptions { d_max: 1_000_000, eps_converge: 1e-12, eps_positive: None, lattice_cap: DEFAULT_LATTICE_CAP }
    }
}

/// Core threshold among the `k-1` children of a rooted vertex.
pub fn rooted_threshold(k: usize) -> usize {
    (k - 1).div_ceil(2)
}

/// Core threshold among the `k` children of the root of the full tree.
pub fn full_threshold(k: usize) -> usize {
    (k + 1).div_ceil(2)
}

impl<S: Scalar> PsiTables<S> {
    /// The `d = 0` tables.
    pub fn initial(p: &ConditionalFamily<S>) -> Self {
        let w = p.width();
        let even = p
            .table
            .iter()
            .enumerate()
            .map(|(i, v)| if spin((i % w) as u32, p.t) < 0 { v.clone() } else { S::zero() })
            .collect();
        PsiTables {
            t: p.t,
            k: p.k,
            theta: p.theta,
            d: 0,
            psi_odd: p.table.clone(),
            psi_even: even,
            sup_change: f64::INFINITY,
            converged: false,
            min_ratio: 1.0,
            max_bound_violation: 0.0,
            max_monotone_violation: 0.0,
        }
    }
}

/// Children measure for one field prefix: per child prefix code `σ_0^{T-1}`,
/// the core and non-core masses summed over the child's last spin.
fn child_measure<S: Scalar>(p: &ConditionalFamily<S>, psi: &[S], field: u32) -> ChildMeasure<S> {
    let t = p.t;
    let mut out = vec![S::zero(); 1 << t];
    let mut core = vec![S::zero(); 1 << t];
    let w = p.width();
    for sigma in 0..w as u32 {
        let i = field as usize * w + sigma as usize;
        let c = (sigma & mask(t)) as usize;
        core[c] = core[c].clone() + psi[i].clone();
        out[c] = out[c].clone() + (p.table[i].clone() - psi[i].clone());
    }
    ChildMeasure { len: t, out, core }
}

/// One application of the recursion to `children`: returns the new table
/// indexed `[u][σ]`, without the even-side indicator.
fn combine<S: Scalar>(
    p: &ConditionalFamily<S>,
    children: &[S],
    n_children: usize,
    threshold: usize,
    field: bool,
    cap: usize,
) -> Result<Vec<S>> {
    let t = p.t;
    let w = p.width();
    let n_fields = if field { w } else { 1 };
    let mut out = vec![S::zero(); n_fields * w];
    let p0 = [initial::<S>(p.theta, -1), initial::<S>(p.theta, 1)];
    for f in 0..(1u32 << t) {
        // Children see the root trajectory; their laws depend on it only through σ_0^{T-1}.
        let measure = child_measure(p, children, f);
        let mut dist = LatticeDistribution::empty(t, n_children, threshold, cap)?;
        for _ in 0..n_children {
            dist.convolve(&measure);
        }
        let rw = dist.root_weights(field, threshold);
        for last in 0..2u32 {
            let sigma = f | (last << t);
            let s = (sigma >> 1) as usize;
            let head = p0[(sigma & 1) as usize].clone();
            for u in 0..n_fields as u32 {
                let ul = if field { (u & mask(t)) as usize } else { 0 };
                out[u as usize * w + sigma as usize] = head.clone() * rw[ul][s].clone();
            }
        }
    }
    Ok(out)
}

/// One iteration `Ψ^d → Ψ^{d+1}` in raw form (no clamping or bookkeeping).
pub fn psi_step_raw<S: Scalar>(p: &ConditionalFamily<S>, psi: &PsiTables<S>, cap: usize) -> Result<(Vec<S>, Vec<S>)> {
    let th = rooted_threshold(p.k);
    let odd = combine(p, &psi.psi_even, p.k - 1, th, true, cap)?;
    let mut even = combine(p, &psi.psi_odd, p.k - 1, th, true, cap)?;
    let w = p.width();
    for (i, v) in even.iter_mut().enumerate() {
        if spin((i % w) as u32, p.t) > 0 {
            *v = S::zero();
        }
    }
    Ok((odd, even))
}

/// Clamps `next` into `[0, P]` and `[0, prev]`, recording the relative size
/// of any violation. Returns `(bound violation, monotone violation, sup change)`.
fn settle<S: Scalar>(next: &mut [S], prev: &[S], p: &[S]) -> (f64, f64, f64) {
    let mut bound = 0.0f64;
    let mut mono = 0.0f64;
    let mut change = 0.0f64;
    for ((x, old), pv) in next.iter_mut().zip(prev).zip(p) {
        let scale = pv.to_f64();
        if scale <= 0.0 {
            let v = x.to_f64().abs();
            bound = bound.max(v);
            *x = S::zero();
            continue;
        }
        let xv = x.to_f64();
        if xv < 0.0 {
            bound = bound.max(-xv / scale);
            *x = S::zero();
        } else if *x > *pv {
            bound = bound.max((xv - scale) / scale);
            *x = pv.clone();
        }
        if *x > *old {
            mono = mono.max((x.to_f64() - old.to_f64()) / scale);
            *x = old.clone();
        }
        let o = old.to_f64();
        if o > 0.0 {
            change = change.max((o - x.to_f64()) / o);
        }
    }
    (bound, mono, change)
}

fn min_ratio<S: Scalar>(psi: &[S], p: &[S]) -> f64 {
    psi.iter().zip(p).filter(|(_, pv)| pv.to_f64() > 0.0).map(|(x, pv)| x.to_f64() / pv.to_f64()).fold(1.0, f64::min)
}

/// Iterates the alternating-core recursion from the `d = 0` tables.
///
/// Ψ is non-increasing in `d`, so once a ratio `Ψ_odd/P` drops below
/// `eps_positive` the limit cannot be positive and iteration stops.
/// Violations of the bounds larger than [`SLACK`] are errors.
pub fn psi_iterate<S: Scalar>(p: &ConditionalFamily<S>, opts: &PsiOptions) -> Result<PsiTables<S>> {
    psi_iterate_observed(p, opts, |_| {})
}

/// [`psi_iterate`] with a callback after every iteration.
pub fn psi_iterate_observed<S: Scalar>(
    p: &ConditionalFamily<S>,
    opts: &PsiOptions,
    mut observe: impl FnMut(&PsiTables<S>),
) -> Result<PsiTables<S>> {
    let mut psi = PsiTables::initial(p);
    psi.min_ratio = min_ratio(&psi.psi_odd, &p.table);
    while psi.d < opts.d_max {
        let (mut odd, mut even) = psi_step_raw(p, &psi, opts.lattice_cap)?;
        let (b1, m1, c1) = settle(&mut odd, &psi.psi_odd, &p.table);
        let (b2, m2, c2) = settle(&mut even, &psi.psi_even, &p.table);
        psi.max_bound_violation = psi.max_bound_violation.max(b1).max(b2);
        psi.max_monotone_violation = psi.max_monotone_violation.max(m1).max(m2);
        if psi.max_bound_violation > SLACK || psi.max_monotone_violation > SLACK {
            return Err(Error::Bisection(format!(
                "alternating-core iteration left its bounds at d = {}: bound {:e}, monotone {:e}",
                psi.d + 1,
                psi.max_bound_violation,
                psi.max_monotone_violation
            )));
        }
        psi.psi_odd = odd;
        psi.psi_even = even;
        psi.d += 1;
        psi.sup_change = c1.max(c2);
        psi.min_ratio = min_ratio(&psi.psi_odd, &p.table);
        observe(&psi);
        if psi.sup_change < opts.eps_converge {
            psi.converged = true;
            break;
        }
        if opts.eps_positive.is_some_and(|e| psi.min_ratio < e) {
            break;
        }
    }
    Ok(psi)
}

/// Full-tree tables `(Ψ̂_odd, Ψ̂_even)` over root trajectories, from converged rooted tables.
pub fn full_tree_psi<S: Scalar>(p: &ConditionalFamily<S>, psi: &PsiTables<S>) -> Result<(Vec<S>, Vec<S>)> {
    let th = full_threshold(p.k);
    let odd = combine(p, &psi.psi_even, p.k, th, false, DEFAULT_LATTICE_CAP)?;
    let mut even = combine(p, &psi.psi_odd, p.k, th, false, DEFAULT_LATTICE_CAP)?;
    for (sigma, v) in even.iter_mut().enumerate() {
        if spin(sigma as u32, p.t) > 0 {
            *v = S::zero();
        }
    }
    Ok((odd, even))
}
