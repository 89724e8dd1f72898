//! Bootstrap-percolation upper bound `θ_u(k) = 1 - 2ρ_c(k)`.
//!
//! Every vertex has `k` children and a vacant vertex joins once at least
//! `m = ⌊(k+1)/2⌋` of its neighbors are occupied. On a tree the root ends
//! occupied iff it is occupied from below, so the probability `X_D` that the
//! root of a depth-`D` subtree ends occupied obeys
//!
//! `X_0 = ρ`, `X_{j+1} = ρ + (1-ρ)·τ(X_j)`, `τ(x) = P(Bin(k, x) ≥ m)`,
//!
//! and `X_D → 1` iff `ρ + (1-ρ)τ(x) > x` on `[ρ, 1)`, that is iff
//! `ρ > sup_x (x - τ(x)) / (1 - τ(x))`.

use std::collections::VecDeque;
use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graphs::{tree_size, RegularGraph};
use crate::seed::RandomSeed;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BootstrapMethod {
    #[default]
    FixedPoint,
    Simulation,
}

impl std::fmt::Display for BootstrapMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BootstrapMethod::FixedPoint => "fixed-point",
            BootstrapMethod::Simulation => "simulation",
        })
    }
}

/// Simulated crossing at one depth next to the fixed-point value at that depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthPoint {
    pub depth: usize,
    pub trials: usize,
    /// Density at which the root ends occupied with probability one half.
    pub rho_sim: f64,
    pub ci: (f64, f64),
    pub rho_fixed_point: f64,
    pub agrees: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub k: usize,
    pub m: usize,
    pub rho_c: f64,
    pub theta_u: f64,
    pub method: BootstrapMethod,
    pub ci: (f64, f64),
    pub depth_curve: Vec<DepthPoint>,
}

impl BootstrapResult {
    /// CSV `k,m,rho_c,theta_u,method,ci_lo,ci_hi`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,m,rho_c,theta_u,method,ci_lo,ci_hi")?;
        writeln!(w, "{},{},{},{},{},{},{}", self.k, self.m, self.rho_c, self.theta_u, self.method, self.ci.0, self.ci.1)
    }

    /// CSV `depth,trials,rho_sim,ci_lo,ci_hi,rho_fixed_point,agrees`.
    pub fn write_depth_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "depth,trials,rho_sim,ci_lo,ci_hi,rho_fixed_point,agrees")?;
        for p in &self.depth_curve {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                p.depth, p.trials, p.rho_sim, p.ci.0, p.ci.1, p.rho_fixed_point, p.agrees
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub method: BootstrapMethod,
    /// Target accuracy on `ρ_c` for the fixed-point method.
    pub precision: f64,
    pub seed: u64,
    /// Trials per depth for the simulation method.
    pub trials: usize,
    /// Depths to simulate; empty selects the deepest feasible ones.
    pub depths: Vec<usize>,
    /// Largest tree simulated, in vertices.
    pub vertex_budget: usize,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            method: BootstrapMethod::FixedPoint,
            precision: 1e-9,
            seed: 0,
            trials: 400,
            depths: Vec::new(),
            vertex_budget: 4_000_000,
        }
    }
}

pub fn threshold_m(k: usize) -> usize {
    k.div_ceil(2)
}

/// `(P(Bin(k,x) < m), P(Bin(k,x) ≥ m))`, the first summed directly so it stays
/// accurate as `x → 1`.
fn binomial_split(k: usize, m: usize, x: f64) -> (f64, f64) {
    let mut below = 0.0;
    let mut above = 0.0;
    let mut c = 1.0f64;
    for j in 0..=k {
        let p = c * x.powi(j as i32) * (1.0 - x).powi((k - j) as i32);
        if j < m {
            below += p;
        } else {
            above += p;
        }
        c = c * (k - j) as f64 / (j + 1) as f64;
    }
    (below, above)
}

/// `τ(x) = P(Bin(k, x) ≥ m)`.
pub fn tau(k: usize, x: f64) -> f64 {
    binomial_split(k, threshold_m(k), x).1
}

/// `(x - τ(x)) / (1 - τ(x))`: the density at which `x` is a fixed point.
pub fn fixed_point_density(k: usize, x: f64) -> f64 {
    let (below, above) = binomial_split(k, threshold_m(k), x);
    (x - above) / below
}

/// Critical density `sup_x (x - τ(x)) / (1 - τ(x))` by a grid scan refined with
/// golden-section search. Returns `(ρ_c, argmax)`.
pub fn critical_density(k: usize, precision: f64) -> Result<(f64, f64)> {
    if k < 3 {
        return Err(invalid(format!("k must be at least 3, got {k}")));
    }
    let f = |x: f64| fixed_point_density(k, x);
    let grid = 4096;
    let (mut best, mut arg) = (f64::NEG_INFINITY, 0usize);
    for i in 1..grid {
        let v = f(i as f64 / grid as f64);
        if v > best {
            best = v;
            arg = i;
        }
    }
    let (mut a, mut b) = ((arg - 1) as f64 / grid as f64, ((arg + 1) as f64 / grid as f64).min(1.0 - 1e-12));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let tol = precision.max(1e-12);
    while b - a > tol {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let x = 0.5 * (a + b);
    Ok((f(x).max(best), x))
}

/// `X_D(ρ)`: probability that the root of a depth-`D` tree ends occupied.
pub fn occupied_probability(k: usize, rho: f64, depth: usize) -> f64 {
    let mut x = rho;
    for _ in 0..depth {
        x = rho + (1.0 - rho) * tau(k, x);
    }
    x
}

/// Density at which `X_D(ρ) = 1/2`, by bisection.
pub fn finite_depth_crossing(k: usize, depth: usize) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if occupied_probability(k, mid, depth) >= 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bootstrap closure on an arbitrary graph: vacant vertices with at least `m`
/// occupied neighbors become occupied until nothing changes. Returns the number
/// of vertices added.
pub fn bootstrap_closure(graph: &RegularGraph, occupied: &mut [bool], m: usize) -> usize {
    assert_eq!(occupied.len(), graph.n());
    let mut count: Vec<usize> =
        (0..graph.n()).map(|v| graph.neighbors(v).iter().filter(|&&w| occupied[w as usize]).count()).collect();
    let mut queue: VecDeque<usize> = (0..graph.n()).filter(|&v| !occupied[v] && count[v] >= m).collect();
    let mut added = 0;
    while let Some(v) = queue.pop_front() {
        if occupied[v] {
            continue;
        }
        occupied[v] = true;
        added += 1;
        for &w in graph.neighbors(v) {
            let w = w as usize;
            count[w] += 1;
            if !occupied[w] && count[w] == m {
                queue.push_back(w);
            }
        }
    }
    added
}

/// Smallest density at which the root of a random depth-`levels` tree ends
/// occupied. Uniforms are drawn in depth-first order: the root's first, then
/// each child subtree in turn.
pub fn root_threshold(k: usize, levels: usize, rng: &mut ChaCha8Rng) -> f64 {
    let m = threshold_m(k);
    fn go(k: usize, m: usize, left: usize, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        if left == 0 {
            return u;
        }
        let mut child = [0f64; 64];
        for c in child.iter_mut().take(k) {
            *c = go(k, m, left - 1, rng);
        }
        let (_, mth, _) = child[..k].select_nth_unstable_by(m - 1, f64::total_cmp);
        u.min(*mth)
    }
    go(k, m, levels, rng)
}

fn simulate_depth(k: usize, depth: usize, trials: usize, seed: RandomSeed) -> DepthPoint {
    let mut thr: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|j| root_threshold(k, depth, &mut seed.derive(depth as u64, j as u64).rng()))
        .collect();
    thr.sort_by(f64::total_cmp);
    let n = thr.len();
    let rho_sim = if n % 2 == 1 { thr[n / 2] } else { 0.5 * (thr[n / 2 - 1] + thr[n / 2]) };
    // 99% order-statistic interval for the median
    let half = 2.576 * (n as f64).sqrt() / 2.0;
    let lo = ((n as f64 / 2.0 - half).floor() as isize - 1).max(0) as usize;
    let hi = ((n as f64 / 2.0 + half).ceil() as usize).min(n) - 1;
    let ci = (thr[lo], thr[hi]);
    let rho_fixed_point = finite_depth_crossing(k, depth);
    DepthPoint {
        depth,
        trials: n,
        rho_sim,
        ci,
        rho_fixed_point,
        agrees: ci.0 <= rho_fixed_point && rho_fixed_point <= ci.1,
    }
}

/// Deepest simulated depths within the vertex budget: up to three, two apart,
/// never beyond 12.
pub fn default_depths(k: usize, budget: usize) -> Vec<usize> {
    let feasible = |d: usize| tree_size(k + 1, d, true).is_some_and(|n| n <= budget);
    let mut top = 2;
    while top < 12 && feasible(top + 1) {
        top += 1;
    }
    [top.saturating_sub(4), top.saturating_sub(2), top]
        .into_iter()
        .filter(|&d| d >= 2)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Critical density of bootstrap percolation with threshold `⌊(k+1)/2⌋` on the
/// tree where every vertex has `k` children.
pub fn bootstrap_rho_c(k: usize, opts: &BootstrapOptions) -> Result<BootstrapResult> {
    if !(3..=64).contains(&k) {
        return Err(invalid(format!("k must lie in 3..=64, got {k}")));
    }
    let m = threshold_m(k);
    match opts.method {
        BootstrapMethod::FixedPoint => {
            let (rho_c, _) = critical_density(k, opts.precision)?;
            Ok(BootstrapResult {
                k,
                m,
                rho_c,
                theta_u: 1.0 - 2.0 * rho_c,
                method: opts.method,
                ci: (rho_c - opts.precision, rho_c + opts.precision),
                depth_curve: Vec::new(),
            })
        }
        BootstrapMethod::Simulation => {
            if opts.trials == 0 {
                return Err(invalid("need at least one trial"));
            }
            let depths =
                if opts.depths.is_empty() { default_depths(k, opts.vertex_budget) } else { opts.depths.clone() };
            for &d in &depths {
                if tree_size(k + 1, d, true).is_none_or(|n| n > opts.vertex_budget) {
                    return Err(crate::Error::SizeCap(format!(
                        "depth {d} tree exceeds {} vertices",
                        opts.vertex_budget
                    )));
                }
            }
            let seed = RandomSeed::new(opts.seed);
            let curve: Vec<DepthPoint> = depths.iter().map(|&d| simulate_depth(k, d, opts.trials, seed)).collect();
            let last = *curve.last().ok_or_else(|| invalid("no depths to simulate"))?;
            Ok(BootstrapResult {
                k,
                m,
                rho_c: last.rho_sim,
                theta_u: 1.0 - 2.0 * last.rho_sim,
                method: opts.method,
                ci: last.ci,
                depth_curve: curve,
            })
        }
    }
}
