//! The cavity process: correlation/response kernels, the effective-process
//! sampler, trajectory probabilities and the biased-regime predictor.
//!
//! Conventions: the noise coordinate `η(r)` together with the memory term
//! `μ_r = Σ_{s<r} R(r,s) σ(s) + h(r)` decides `σ(r+1) = sign(η(r) + μ_r)`.
//! Because `C(t,s)` vanishes for odd `t+s` and `R(t,s)` for even `t+s`, the
//! process splits into two independent chains: times of one parity are driven
//! by noise coordinates of the other parity only. Kernel integrals are done
//! per chain, which halves their dimension.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::{slice_prob, GaussianSpec, Side, SliceOptions, SlicePartition};
use crate::seed::{mix64, RandomSeed};
use crate::trajectory::{spin, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityKernels {
    /// Largest time index of `C` and largest row of `R`.
    pub t_max: usize,
    /// `(t_max+1)²`, symmetric, unit diagonal.
    pub c: Vec<Vec<f64>>,
    /// `R[t][s]` for `s < t`; zero elsewhere.
    pub r: Vec<Vec<f64>>,
    /// Standard errors of the integrated entries (zero for exact ones).
    pub c_err: Vec<Vec<f64>>,
    pub r_err: Vec<Vec<f64>>,
    pub accuracy: f64,
    pub seed: u64,
}

impl CavityKernels {
    pub fn c(&self, t: usize, s: usize) -> f64 {
        self.c[t][s]
    }

    pub fn r(&self, t: usize, s: usize) -> f64 {
        self.r[t][s]
    }

    /// Effective-process parameters for the first `horizon` steps with field `h`.
    pub fn params(&self, h: Vec<f64>) -> EffectiveProcessParams {
        EffectiveProcessParams { c: self.c.clone(), r: self.r.clone(), h }
    }

    /// Rows `t,s,C,R,stderr` for `s ≤ t`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,s,C,R,stderr")?;
        for t in 0..=self.t_max {
            for s in 0..=t {
                let err = self.c_err[t][s].max(self.r_err[t][s]);
                writeln!(w, "{t},{s},{},{},{}", fmt(self.c[t][s]), fmt(self.r[t][s]), fmt(err))?;
            }
        }
        Ok(())
    }

    pub fn cache_path(dir: &Path, t_max: usize, accuracy: f64, seed: u64) -> PathBuf {
        dir.join(format!("kernels_T{t_max}_acc{accuracy:e}_seed{seed}.json"))
    }

    /// Loads kernels cached under `dir`, computing and storing them on a miss.
    pub fn load_or_compute(dir: &Path, t_max: usize, accuracy: f64, seed: u64) -> Result<CavityKernels> {
        let path = Self::cache_path(dir, t_max, accuracy, seed);
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(k) = serde_json::from_str::<CavityKernels>(&text) {
                if k.t_max == t_max && k.accuracy == accuracy && k.seed == seed {
                    return Ok(k);
                }
            }
        }
        let k = compute_kernels(t_max, accuracy, seed)?;
        std::fs::create_dir_all(dir)?;
        std::fs::write(&path, serde_json::to_string_pretty(&k)?)?;
        Ok(k)
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.10}")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelOptions {
    pub accuracy: f64,
    pub seed: u64,
    /// Integrate each parity chain separately. Turning this off integrates
    /// over all noise coordinates at once (slower, used as a cross-check).
    pub reduce_parity: bool,
}

pub fn compute_kernels(t_max: usize, accuracy: f64, seed: u64) -> Result<CavityKernels> {
    compute_kernels_with(t_max, &KernelOptions { accuracy, seed, reduce_parity: true })
}

pub fn compute_kernels_with(t_max: usize, opts: &KernelOptions) -> Result<CavityKernels> {
    if !(opts.accuracy > 0.0) {
        return Err(invalid("accuracy must be positive"));
    }
    let n = t_max + 1;
    let mut k = CavityKernels {
        t_max,
        c: vec![vec![0.0; n]; n],
        r: vec![vec![0.0; n]; n],
        c_err: vec![vec![0.0; n]; n],
        r_err: vec![vec![0.0; n]; n],
        accuracy: opts.accuracy,
        seed: opts.seed,
    };
    k.c[0][0] = 1.0;
    for t in 0..t_max {
        let last = t + 1;
        k.c[last][last] = 1.0;
        let ctx = |s: usize| format!("while computing row {last}, column {s}");
        let chain = Chain::new(last, opts.reduce_parity);

        // Correlations share one orthant integral per trajectory.
        let c_cols: Vec<usize> = (0..last).filter(|s| (last + s) % 2 == 0).collect();
        let terms = chain.terms(&k, &vec![0.0; last], None, opts, 0).map_err(|e| e.with_context(ctx(0)))?;
        for &s in &c_cols {
            let (v, e) = combine(&terms, |w| (w[last] * w[s]) as f64);
            k.c[last][s] = v;
            k.c[s][last] = v;
            k.c_err[last][s] = e;
            k.c_err[s][last] = e;
        }

        for s in (0..last).filter(|s| (last + s) % 2 == 1) {
            let terms =
                chain.terms(&k, &vec![0.0; last], Some(s), opts, 1 + s as u64).map_err(|e| e.with_context(ctx(s)))?;
            let (v, e) = combine(&terms, |w| (w[last] * w[s + 1]) as f64);
            k.r[last][s] = v;
            k.r_err[last][s] = e;
        }
        if k.r[last][t] <= 0.0 {
            return Err(Error::Bisection(format!("R({last},{t}) = {} is not positive", k.r[last][t])));
        }
    }
    Ok(k)
}

/// One summand: spins by time (0 where irrelevant), prefactor, integral.
struct Term {
    spins: Vec<i8>,
    factor: f64,
    value: f64,
    std_error: f64,
}

fn combine(terms: &[Term], weight: impl Fn(&[i8]) -> f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut var = 0.0;
    for t in terms {
        let w = weight(&t.spins) * t.factor;
        v += w * t.value;
        var += (w * t.std_error).powi(2);
    }
    (v, var.sqrt())
}

/// The noise coordinates and spin times entering the law of `σ(0..=last)`,
/// restricted to the chain of `last` when reducing by parity.
struct Chain {
    last: usize,
    /// Noise coordinates `r`, each deciding `σ(r+1)`.
    coords: Vec<usize>,
    /// Spin times enumerated, ascending.
    times: Vec<usize>,
    /// Whether `σ(0)` is a free fair spin in this chain.
    free_zero: bool,
}

impl Chain {
    fn new(last: usize, reduce: bool) -> Chain {
        if reduce {
            let p = last % 2;
            let coords: Vec<usize> = (0..last).filter(|r| (r + 1) % 2 == p).collect();
            let times: Vec<usize> = (0..=last).filter(|t| t % 2 == p).collect();
            Chain { last, coords, times, free_zero: p == 0 }
        } else {
            Chain { last, coords: (0..last).collect(), times: (0..=last).collect(), free_zero: true }
        }
    }

    /// Evaluates the slice integral for every spin assignment on the chain's
    /// times, with field `h` and optionally one pinned noise coordinate.
    fn terms(
        &self,
        k: &CavityKernels,
        h: &[f64],
        pin: Option<usize>,
        opts: &KernelOptions,
        salt: u64,
    ) -> Result<Vec<Term>> {
        let n_terms = 1usize << self.times.len();
        let cov: Vec<Vec<f64>> =
            self.coords.iter().map(|&a| self.coords.iter().map(|&b| k.c[a][b]).collect()).collect();
        let per = SliceOptions::with_accuracy(opts.accuracy / (n_terms as f64).sqrt(), 0);
        let mut out = Vec::with_capacity(n_terms);
        for code in 0..n_terms as u32 {
            let mut spins = vec![0i8; self.last + 1];
            for (i, &t) in self.times.iter().enumerate() {
                spins[t] = spin(code, i);
            }
            let mean: Vec<f64> = self
                .coords
                .iter()
                .map(|&r| (0..r).map(|s| k.r[r][s] * spins[s] as f64).sum::<f64>() + h.get(r).copied().unwrap_or(0.0))
                .collect();
            let sides: Vec<Side> = self
                .coords
                .iter()
                .map(|&r| if Some(r) == pin { Side::Pinned } else { Side::from_sign(spins[r + 1]) })
                .collect();
            let spec = GaussianSpec { mean, cov: cov.clone() };
            let seed = mix64(opts.seed ^ mix64((self.last as u64) << 40 ^ salt << 20 ^ code as u64));
            let res = slice_prob(&spec, &SlicePartition::new(sides), &SliceOptions { seed, ..per })?;
            let factor = if self.free_zero { 0.5 } else { 1.0 };
            out.push(Term { spins, factor, value: res.value, std_error: res.std_error });
        }
        Ok(out)
    }
}

/// Parameters of the effective process. `c` and `r` may be larger than needed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveProcessParams {
    pub c: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    /// Field `h(t)`; its length is the number of steps simulated.
    pub h: Vec<f64>,
}

/// Reusable sampler: Cholesky factor computed once.
pub struct EffectiveSampler {
    l: DMatrix<f64>,
    r: Vec<Vec<f64>>,
    h: Vec<f64>,
}

impl EffectiveSampler {
    pub fn new(params: &EffectiveProcessParams) -> Result<Self> {
        let steps = params.h.len();
        if params.c.len() < steps || params.r.len() < steps {
            return Err(invalid(format!("kernels too short for {steps} steps")));
        }
        let cov = DMatrix::from_fn(steps, steps, |i, j| params.c[i][j]);
        let l = if steps == 0 {
            DMatrix::zeros(0, 0)
        } else {
            cov.cholesky()
                .ok_or(Error::NotPositiveDefinite { min_eigenvalue: f64::NAN, context: " in the sampler".into() })?
                .l()
        };
        Ok(EffectiveSampler { l, r: params.r.clone(), h: params.h.clone() })
    }

    /// Trajectory length: steps + 1.
    pub fn len(&self) -> usize {
        self.h.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Trajectory {
        let steps = self.h.len();
        let mut z = [0.0f64; 32];
        for zi in z.iter_mut().take(steps) {
            *zi = rng.sample(StandardNormal);
        }
        let mut code = 0u32;
        if rng.random::<bool>() {
            code |= 1;
        }
        for t in 0..steps {
            let mut eta = 0.0;
            for j in 0..=t {
                eta += self.l[(t, j)] * z[j];
            }
            let mut drift = self.h[t];
            for s in 0..t {
                drift += self.r[t][s] * spin(code, s) as f64;
            }
            if eta + drift >= 0.0 {
                code |= 1 << (t + 1);
            }
        }
        Trajectory::new(code, steps + 1).expect("fits")
    }
}

/// One path of the effective process.
pub fn sample_effective(params: &EffectiveProcessParams, seed: RandomSeed) -> Result<Trajectory> {
    let sampler = EffectiveSampler::new(params)?;
    Ok(sampler.sample(&mut seed.rng()))
}

/// Probability of a cavity trajectory `ω` of length `T+2`.
pub fn trajectory_prob(kernels: &CavityKernels, omega: Trajectory) -> Result<f64> {
    trajectory_prob_with(kernels, omega, &SliceOptions::with_accuracy(kernels.accuracy, kernels.seed)).map(|r| r.0)
}

/// [`trajectory_prob`] with explicit integration options; returns `(value, std_error)`.
pub fn trajectory_prob_with(kernels: &CavityKernels, omega: Trajectory, opts: &SliceOptions) -> Result<(f64, f64)> {
    let len = omega.len();
    if len == 0 {
        return Err(invalid("empty trajectory"));
    }
    if len > kernels.t_max + 2 {
        return Err(invalid(format!("trajectory of length {len} needs kernels with horizon ≥ {}", len - 2)));
    }
    let steps = len - 1;
    // The two chains are independent: the probability factorizes.
    let mut value = 0.5;
    let mut rel_var = 0.0;
    for p in 0..2 {
        let coords: Vec<usize> = (0..steps).filter(|r| r % 2 == p).collect();
        if coords.is_empty() {
            continue;
        }
        let cov: Vec<Vec<f64>> = coords.iter().map(|&a| coords.iter().map(|&b| kernels.c[a][b]).collect()).collect();
        let mean = coords.iter().map(|&r| (0..r).map(|s| kernels.r[r][s] * omega.spin(s) as f64).sum()).collect();
        let signs: Vec<i8> = coords.iter().map(|&r| omega.spin(r + 1)).collect();
        let res = slice_prob(
            &GaussianSpec { mean, cov },
            &SlicePartition::orthant(&signs),
            &SliceOptions { seed: mix64(opts.seed ^ (omega.code() as u64) << 1 ^ p as u64), ..*opts },
        )?;
        if res.value <= 0.0 {
            return Ok((0.0, res.std_error * value));
        }
        value *= res.value;
        rel_var += (res.std_error / res.value).powi(2);
    }
    Ok((value, value * rel_var.sqrt()))
}

/// `E σ(t)` of the effective process with kernels `k` and field `h`.
pub fn mean_spin(k: &CavityKernels, h: &[f64], t: usize, accuracy: f64, seed: u64) -> Result<(f64, f64)> {
    if t == 0 {
        return Ok((0.0, 0.0));
    }
    if t > k.t_max + 1 {
        return Err(invalid(format!("time {t} beyond kernel horizon")));
    }
    let chain = Chain::new(t, true);
    let opts = KernelOptions { accuracy, seed, reduce_parity: true };
    let terms = chain.terms(k, h, None, &opts, 0x5eed)?;
    Ok(combine(&terms, |w| w[t] as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasPrediction {
    pub k: usize,
    pub t_star: usize,
    /// `ω_0..=ω_{T*}`.
    pub omega: Vec<f64>,
    /// Predicted `E σ(t)` for `t = 0..=T*+2`.
    pub predicted_mean: Vec<f64>,
    /// Integration error of each prediction (zero where closed form).
    pub std_error: Vec<f64>,
    /// Set when `ω_0 = 0`: the last entry is the unbiased cavity mean, not 1.
    pub unbiased: bool,
}

/// Mean trajectory in the biased regime with initial bias `θ = ω_0 k^{-(T*+1)/2}`.
///
/// For `1 ≤ t ≤ T*` the prediction is `ω_t k^{-(T*-t+1)/2}` with
/// `ω_{t+1} = R(t+1,t) ω_t`; at `T*+1` the last step of the effective process
/// receives the extra drift `ω_{T*}`; from `T*+2` on the root is at consensus.
pub fn predict_bias(
    k: usize,
    t_star: usize,
    omega0: f64,
    kernels: &CavityKernels,
    accuracy: f64,
    seed: u64,
) -> Result<BiasPrediction> {
    if !(omega0 >= 0.0) {
        return Err(invalid(format!("omega0 must be non-negative, got {omega0}")));
    }
    if kernels.t_max < t_star {
        return Err(invalid(format!("kernels of horizon {} cannot predict T* = {t_star}", kernels.t_max)));
    }
    let kf = k as f64;
    let mut omega = vec![omega0];
    for t in 0..t_star {
        omega.push(kernels.r[t + 1][t] * omega[t]);
    }
    let mut mean = Vec::with_capacity(t_star + 3);
    let mut err = Vec::with_capacity(t_star + 3);
    for (t, w) in omega.iter().enumerate() {
        mean.push(w * kf.powf(-((t_star - t + 1) as f64) / 2.0));
        err.push(0.0);
    }
    let mut h = vec![0.0; t_star + 1];
    h[t_star] = omega[t_star];
    let (m, e) = mean_spin(kernels, &h, t_star + 1, accuracy, seed)?;
    mean.push(m.clamp(-1.0, 1.0));
    err.push(e);
    let unbiased = omega0 == 0.0;
    mean.push(if unbiased { 0.0 } else { 1.0 });
    err.push(0.0);
    Ok(BiasPrediction { k, t_star, omega, predicted_mean: mean, std_error: err, unbiased })
}
