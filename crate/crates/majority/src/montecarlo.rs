//! Simulation estimates: consensus thresholds on random regular graphs and
//! bias curves `E σ_root(t)` on regular trees.
//!
//! Thresholds use common random numbers. Every trial fixes a graph, a tie tape
//! and an ordering of the vertices; the initial configuration at bias `θ` sets
//! the first `N(θ)` vertices of the ordering to `+1`. With the order-preserving
//! tie rule, success is monotone in `N`, so each trial has an exact threshold
//! found by binary search, and the fraction of successful trials at `θ` is the
//! fraction of trial thresholds `≤ θ`.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{run_with, Classification, Majority, Spin, SpinConfiguration, TieBreakTape, TieRule};
use crate::error::{invalid, Result};
use crate::graphs::{build_tree, sample_random_regular, RegularGraph};
use crate::seed::RandomSeed;
use crate::trajectory::spin;

const TAG_GRAPH: u64 = 1;
const TAG_ORDER: u64 = 2;
const TAG_TAPE: u64 = 3;
const TAG_TREE: u64 = 4;

/// How the initial configuration at bias `θ` is drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Exactly `round(n(1+θ)/2)` spins are `+1`, placed uniformly.
    #[default]
    Count,
    /// Spins are i.i.d. with `P(+1) = (1+θ)/2`.
    Iid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptions {
    pub trials: usize,
    pub init_mode: InitMode,
    /// Steps before a run counts as undecided. `None` means `4·log2(n) + 50`.
    pub horizon_cap: Option<usize>,
    pub tie_rule: TieRule,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions { trials: 40, init_mode: InitMode::Count, horizon_cap: None, tie_rule: TieRule::Direct }
    }
}

pub fn default_horizon_cap(n: usize) -> usize {
    (4.0 * (n as f64).log2()).ceil() as usize + 50
}

/// Per-trial outcome of the threshold search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialThreshold {
    pub trial: usize,
    /// Smallest number of initial `+1` spins reaching consensus `+1`.
    pub n_plus: usize,
    /// Smallest bias at which that count is drawn.
    pub theta: f64,
    /// Runs performed by the search.
    pub runs: usize,
    /// Runs that hit the horizon cap.
    pub undecided: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub k: usize,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub init_mode: InitMode,
    pub tie_rule: TieRule,
    pub horizon_cap: usize,
    /// Success level defining the threshold.
    pub gamma: f64,
    pub theta_hat: f64,
    /// Half-width of the order-statistic 95% interval for the median.
    pub ci_halfwidth: f64,
    /// `(θ, fraction reaching consensus +1)` at every distinct trial threshold.
    pub success_curve: Vec<(f64, f64)>,
    pub per_trial: Vec<TrialThreshold>,
    pub undecided_runs: usize,
    pub warnings: Vec<String>,
}

impl ThresholdEstimate {
    /// Fraction of trials reaching consensus `+1` at bias `theta`.
    pub fn fraction_at(&self, theta: f64) -> f64 {
        let hits = self.per_trial.iter().filter(|t| t.theta <= theta).count();
        hits as f64 / self.trials as f64
    }

    /// CSV `theta,fraction,trials`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "theta,fraction,trials")?;
        for (theta, f) in &self.success_curve {
            writeln!(w, "{theta},{f},{}", self.trials)?;
        }
        Ok(())
    }
}

/// Number of `+1` spins drawn in count mode.
pub fn count_for_theta(n: usize, theta: f64) -> usize {
    ((n as f64) * (1.0 + theta) / 2.0).round().clamp(0.0, n as f64) as usize
}

/// Configuration with the first `n_plus` vertices of `order` at `+1`.
pub fn config_from_order(order: &[u32], n_plus: usize) -> SpinConfiguration {
    let mut spins: Vec<Spin> = vec![-1; order.len()];
    for &v in &order[..n_plus] {
        spins[v as usize] = 1;
    }
    SpinConfiguration::new(spins)
}

/// Initial configuration at bias `theta`, drawn the same way as in a threshold trial.
pub fn initial_configuration(n: usize, theta: f64, mode: InitMode, seed: RandomSeed) -> Result<SpinConfiguration> {
    if !(-1.0..=1.0).contains(&theta) {
        return Err(invalid(format!("theta must lie in [-1, 1], got {theta}")));
    }
    let draw = TrialDraw::new(n, mode, &mut seed.rng());
    let n_plus = match &draw.uniforms {
        None => count_for_theta(n, theta),
        Some(u) => u.partition_point(|&x| x < (1.0 + theta) / 2.0),
    };
    Ok(config_from_order(&draw.order, n_plus))
}

/// Vertex order and the map from `+1` counts to the bias at which they appear.
struct TrialDraw {
    order: Vec<u32>,
    /// For iid mode, the sorted uniforms: vertex `order[i]` is `+1` iff `(1+θ)/2 > u[i]`.
    uniforms: Option<Vec<f64>>,
}

impl TrialDraw {
    fn new(n: usize, mode: InitMode, rng: &mut ChaCha8Rng) -> Self {
        match mode {
            InitMode::Count => {
                let mut order: Vec<u32> = (0..n as u32).collect();
                order.shuffle(rng);
                TrialDraw { order, uniforms: None }
            }
            InitMode::Iid => {
                let u: Vec<f64> = (0..n).map(|_| rng.random()).collect();
                let mut order: Vec<u32> = (0..n as u32).collect();
                order.sort_by(|&a, &b| u[a as usize].total_cmp(&u[b as usize]));
                let sorted = order.iter().map(|&v| u[v as usize]).collect();
                TrialDraw { order, uniforms: Some(sorted) }
            }
        }
    }

    /// Bias at which the configuration has `n_plus` spins up: the exact bias
    /// in count mode, the infimum over biases in iid mode.
    fn theta_of(&self, n_plus: usize) -> f64 {
        let n = self.order.len() as f64;
        match &self.uniforms {
            None => (2 * n_plus) as f64 / n - 1.0,
            Some(u) => 2.0 * u[n_plus - 1] - 1.0,
        }
    }
}

fn trial_threshold(
    k: usize,
    n: usize,
    seed: RandomSeed,
    trial: usize,
    opts: &ThresholdOptions,
    cap: usize,
) -> Result<TrialThreshold> {
    let graph = sample_random_regular(n, k, seed.derive(TAG_GRAPH, trial as u64))?;
    let mut rng = seed.derive(TAG_ORDER, trial as u64).rng();
    let draw = TrialDraw::new(n, opts.init_mode, &mut rng);
    let tape = TieBreakTape::new(seed.derive(TAG_TAPE, trial as u64).rng().random());
    let rule = Majority::new(opts.tie_rule);
    let mut runs = 0;
    let mut undecided = 0;
    let mut success = |n_plus: usize| -> Result<bool> {
        let init = config_from_order(&draw.order, n_plus);
        let (_, out) = run_with(&graph, &init, cap, &tape, None, &rule, false)?;
        runs += 1;
        if out.classification == Classification::Undecided {
            undecided += 1;
        }
        Ok(out.classification == Classification::ConsensusPlus)
    };
    // All -1 fails and all +1 succeeds; keep that invariant on (lo, hi].
    let (mut lo, mut hi) = (0usize, n);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if success(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(TrialThreshold { trial, n_plus: hi, theta: draw.theta_of(hi), runs, undecided })
}

/// Order-statistic ranks (0-based) of a 95% interval for the median.
fn median_ci_ranks(m: usize) -> (usize, usize) {
    let half = 1.96 * (m as f64).sqrt() / 2.0;
    let lo = ((m as f64 / 2.0 - half).floor() as isize - 1).max(0) as usize;
    let hi = ((m as f64 / 2.0 + half).ceil() as usize).min(m) - 1;
    (lo, hi)
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

/// Empirical consensus threshold on random `k`-regular graphs with `n` vertices.
pub fn estimate_threshold(k: usize, n: usize, seed: u64, opts: &ThresholdOptions) -> Result<ThresholdEstimate> {
    if k < 2 {
        return Err(invalid(format!("k must be at least 2, got {k}")));
    }
    if !(n * k).is_multiple_of(2) {
        return Err(invalid(format!("n·k = {} is odd", n * k)));
    }
    if opts.trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let cap = opts.horizon_cap.unwrap_or_else(|| default_horizon_cap(n));
    let base = RandomSeed::new(seed);
    let per_trial: Vec<TrialThreshold> =
        (0..opts.trials).into_par_iter().map(|j| trial_threshold(k, n, base, j, opts, cap)).collect::<Result<_>>()?;

    let mut thetas: Vec<f64> = per_trial.iter().map(|t| t.theta).collect();
    thetas.sort_by(f64::total_cmp);
    let m = thetas.len();
    let theta_hat = median(&thetas);
    let (lo, hi) = median_ci_ranks(m);
    let ci_halfwidth = (thetas[hi] - thetas[lo]) / 2.0;
    // one point per distinct threshold; ties share the higher fraction
    let mut success_curve: Vec<(f64, f64)> = Vec::with_capacity(m);
    for (i, &t) in thetas.iter().enumerate() {
        let f = (i + 1) as f64 / m as f64;
        match success_curve.last_mut() {
            Some(last) if last.0 == t => last.1 = f,
            _ => success_curve.push((t, f)),
        }
    }

    let undecided_runs = per_trial.iter().map(|t| t.undecided).sum();
    let mut warnings = Vec::new();
    if undecided_runs > 0 {
        warnings.push(format!("{undecided_runs} runs reached the horizon cap of {cap} steps"));
    }
    if opts.tie_rule != TieRule::Direct {
        warnings.push("tie rule does not preserve the partial order; per-trial thresholds may be inexact".into());
    }
    Ok(ThresholdEstimate {
        k,
        n,
        trials: m,
        seed,
        init_mode: opts.init_mode,
        tie_rule: opts.tie_rule,
        horizon_cap: cap,
        gamma: 0.5,
        theta_hat,
        ci_halfwidth,
        success_curve,
        per_trial,
        undecided_runs,
        warnings,
    })
}

/// Root-trajectory sampler on the full `k`-regular tree of a given depth.
///
/// Only the ball of radius `depth - 1` is stored. Each vertex on its outer
/// layer has `k - 1` leaf children whose spins matter only through their sum at
/// time 0, so that sum is drawn directly from a binomial table. At step `t`
/// only vertices within the valid window (depth `≤ depth - 1 - t`) are updated.
#[derive(Clone, Debug)]
pub struct TreeWindowSampler {
    k: usize,
    depth: usize,
    p_plus: f64,
    graph: Option<RegularGraph>,
    /// Start of the outer explicit layer.
    outer: usize,
    /// Ball sizes by radius.
    balls: Vec<usize>,
    /// Cumulative distribution of the number of `+1` leaf children.
    leaf_cdf: Vec<f64>,
    leaf_count: usize,
}

impl TreeWindowSampler {
    pub fn new(k: usize, depth: usize, theta: f64) -> Result<Self> {
        if k < 2 {
            return Err(invalid(format!("k must be at least 2, got {k}")));
        }
        if !(-1.0..=1.0).contains(&theta) {
            return Err(invalid(format!("theta must lie in [-1, 1], got {theta}")));
        }
        let p_plus = (1.0 + theta) / 2.0;
        if depth == 0 {
            return Ok(TreeWindowSampler {
                k,
                depth,
                p_plus,
                graph: None,
                outer: 0,
                balls: vec![1],
                leaf_cdf: vec![],
                leaf_count: 0,
            });
        }
        let graph = build_tree(k, depth - 1, false)?;
        let balls: Vec<usize> = (0..depth).map(|r| graph.ball_size(r)).collect();
        let outer = if depth >= 2 { balls[depth - 2] } else { 0 };
        let leaf_count = if depth == 1 { k } else { k - 1 };
        let leaf_cdf = binomial_cdf(leaf_count, p_plus);
        Ok(TreeWindowSampler { k, depth, p_plus, graph: Some(graph), outer, balls, leaf_cdf, leaf_count })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of explicitly stored vertices.
    pub fn stored_vertices(&self) -> usize {
        self.graph.as_ref().map_or(1, RegularGraph::n)
    }

    fn spin(&self, rng: &mut ChaCha8Rng) -> Spin {
        if rng.random_bool(self.p_plus) {
            1
        } else {
            -1
        }
    }

    /// Draws one root trajectory `σ_0^{t_max}` as a code (bit `t` set iff `+1`).
    pub fn sample(&self, rng: &mut ChaCha8Rng, t_max: usize, cur: &mut Vec<Spin>, next: &mut Vec<Spin>) -> u32 {
        assert!(t_max <= self.depth, "horizon beyond the valid window");
        let Some(g) = &self.graph else {
            return (self.spin(rng) > 0) as u32;
        };
        let n = g.n();
        cur.clear();
        next.clear();
        next.resize(n, 0);
        let leaf_sums: Vec<i32> = if self.p_plus == 0.5 && self.leaf_count <= 64 {
            // fair spins: one random bit per spin, leaf sums by popcount
            let mut word = 0u64;
            for i in 0..n {
                if i % 64 == 0 {
                    word = rng.random();
                }
                cur.push(if (word >> (i % 64)) & 1 == 1 { 1 } else { -1 });
            }
            let mask = if self.leaf_count == 64 { u64::MAX } else { (1u64 << self.leaf_count) - 1 };
            (self.outer..n)
                .map(|_| 2 * (rng.random::<u64>() & mask).count_ones() as i32 - self.leaf_count as i32)
                .collect()
        } else {
            cur.extend((0..n).map(|_| self.spin(rng)));
            (self.outer..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    let plus = self.leaf_cdf.partition_point(|&c| c <= u).min(self.leaf_count);
                    2 * plus as i32 - self.leaf_count as i32
                })
                .collect()
        };
        let rule = Majority::new(TieRule::KeepFlip);
        let mut code = (cur[0] > 0) as u32;
        for t in 0..t_max {
            let upto = self.balls[self.depth - 1 - t];
            for v in 0..upto {
                let mut sum: i32 = g.neighbors(v).iter().map(|&w| cur[w as usize] as i32).sum();
                if t == 0 && v >= self.outer {
                    sum += leaf_sums[v - self.outer];
                }
                next[v] = rule.resolve(cur[v], sum, || if rng.random::<bool>() { 1 } else { -1 }).0;
            }
            cur[..upto].copy_from_slice(&next[..upto]);
            if cur[0] > 0 {
                code |= 1 << (t + 1);
            }
        }
        code
    }
}

fn binomial_cdf(m: usize, p: f64) -> Vec<f64> {
    // pmf by the multiplicative recurrence, in log space for stability
    let mut cdf = Vec::with_capacity(m + 1);
    let mut acc = 0.0;
    for j in 0..=m {
        let log_c = ln_choose(m, j);
        let pmf = if p <= 0.0 {
            (j == 0) as u8 as f64
        } else if p >= 1.0 {
            (j == m) as u8 as f64
        } else {
            (log_c + j as f64 * p.ln() + (m - j) as f64 * (1.0 - p).ln()).exp()
        };
        acc += pmf;
        cdf.push(acc);
    }
    let total = acc;
    for c in &mut cdf {
        *c /= total;
    }
    cdf
}

fn ln_choose(m: usize, j: usize) -> f64 {
    (1..=j).map(|i| ((m - j + i) as f64 / i as f64).ln()).sum()
}

const CHUNK: usize = 1024;

/// Counts of root trajectories `σ_0^{t_max}` over `trials` independent draws
/// on the depth-`depth` full tree. Indexed by trajectory code.
pub fn root_trajectory_counts(
    k: usize,
    depth: usize,
    t_max: usize,
    theta: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    if t_max > depth {
        return Err(invalid(format!("horizon {t_max} exceeds the exactness window {depth}")));
    }
    if t_max >= 31 {
        return Err(invalid("horizon too large"));
    }
    let sampler = TreeWindowSampler::new(k, depth, theta)?;
    let base = RandomSeed::new(seed);
    let chunks = trials.div_ceil(CHUNK);
    let width = 1usize << (t_max + 1);
    let partial: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = base.derive(TAG_TREE, c as u64).rng();
            let mut counts = vec![0u64; width];
            let (mut a, mut b) = (Vec::new(), Vec::new());
            let m = CHUNK.min(trials - c * CHUNK);
            for _ in 0..m {
                counts[sampler.sample(&mut rng, t_max, &mut a, &mut b) as usize] += 1;
            }
            counts
        })
        .collect();
    let mut total = vec![0u64; width];
    for p in partial {
        for (t, c) in total.iter_mut().zip(p) {
            *t += c;
        }
    }
    Ok(total)
}

/// Total-variation distance between empirical counts and a probability vector.
pub fn total_variation(counts: &[u64], probs: &[f64]) -> f64 {
    assert_eq!(counts.len(), probs.len());
    let n: u64 = counts.iter().sum();
    0.5 * counts.iter().zip(probs).map(|(&c, &p)| (c as f64 / n as f64 - p).abs()).sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub t: usize,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasCurve {
    pub k: usize,
    pub theta0: f64,
    pub depth: usize,
    pub trials: usize,
    pub seed: u64,
    pub points: Vec<BiasPoint>,
}

impl BiasCurve {
    /// CSV `t,mean,stderr`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,mean,stderr")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.t, p.mean, p.std_error)?;
        }
        Ok(())
    }
}

/// Summarizes trajectory counts into per-time means and standard errors.
pub fn bias_from_counts(counts: &[u64], t_max: usize) -> Vec<BiasPoint> {
    let n: u64 = counts.iter().sum();
    (0..=t_max)
        .map(|t| {
            let plus: u64 = counts.iter().enumerate().filter(|(c, _)| spin(*c as u32, t) > 0).map(|(_, &v)| v).sum();
            let mean = (2.0 * plus as f64 - n as f64) / n as f64;
            let var = if n > 1 { (1.0 - mean * mean).max(0.0) * n as f64 / (n - 1) as f64 } else { 0.0 };
            BiasPoint { t, mean, std_error: (var / n as f64).sqrt() }
        })
        .collect()
}

/// Root bias `E σ(t)` for `t ≤ t_max` on the depth-`depth` full tree with
/// i.i.d. initial spins of bias `theta0`.
pub fn bias_curve(k: usize, theta0: f64, depth: usize, t_max: usize, trials: usize, seed: u64) -> Result<BiasCurve> {
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let counts = root_trajectory_counts(k, depth, t_max, theta0, trials, seed)?;
    Ok(BiasCurve { k, theta0, depth, trials, seed, points: bias_from_counts(&counts, t_max) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_cap_formula() {
        assert_eq!(default_horizon_cap(10_000), 104);
        assert_eq!(default_horizon_cap(1024), 90);
    }

    #[test]
    fn count_mode_theta_map() {
        assert_eq!(count_for_theta(100, 0.0), 50);
        assert_eq!(count_for_theta(100, 1.0), 100);
        assert_eq!(count_for_theta(100, -1.0), 0);
        let mut rng = RandomSeed::new(1).rng();
        let d = TrialDraw::new(100, InitMode::Count, &mut rng);
        for n_plus in 1..=100 {
            let th = d.theta_of(n_plus);
            assert_eq!(count_for_theta(100, th), n_plus);
        }
    }

    #[test]
    fn median_interval_is_ordered() {
        for m in [1, 2, 5, 40, 101] {
            let (lo, hi) = median_ci_ranks(m);
            assert!(lo <= hi && hi < m);
        }
    }

    #[test]
    fn binomial_table() {
        let c = binomial_cdf(2, 0.5);
        assert!((c[0] - 0.25).abs() < 1e-15 && (c[1] - 0.75).abs() < 1e-15 && (c[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn all_plus_bias_curve() {
        let b = bias_curve(4, 1.0, 3, 3, 100, 5).unwrap();
        for p in b.points {
            assert_eq!(p.mean, 1.0);
            assert_eq!(p.std_error, 0.0);
        }
    }
}
