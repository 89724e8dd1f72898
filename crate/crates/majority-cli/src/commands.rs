use std::io::Write;

use majority::cavity::{compute_kernels, predict_bias, CavityKernels};
use majority::cltcheck::{self, cell_moments, clt_scan, LatticeSumSpec};
use majority::dynamics::{run_with, write_trajectory_csv, Majority, TieBreakTape};
use majority::gaussian::{SliceOptions, SlicePartition};
use majority::graphs::{build_tree, sample_random_regular};
use majority::lowerbound::{theta_lb, ThetaLbOptions};
use majority::montecarlo::{
    bias_curve, default_horizon_cap, estimate_threshold, initial_configuration, ThresholdOptions,
};
use majority::upperbound::{bootstrap_rho_c, BootstrapMethod, BootstrapOptions};
use majority::RandomSeed;
use serde_json::json;

use crate::manifest::Run;
use crate::params::*;
use crate::{CliError, Common};

type Out = Result<(), CliError>;

fn csv(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn load_kernels(
    t_max: usize,
    accuracy: f64,
    seed: u64,
    cache: Option<&std::path::Path>,
) -> Result<CavityKernels, CliError> {
    Ok(match cache {
        Some(dir) => CavityKernels::load_or_compute(dir, t_max, accuracy, seed)?,
        None => compute_kernels(t_max, accuracy, seed)?,
    })
}

pub fn kernels(common: &Common, p: KernelsParams) -> Out {
    let mut run = Run::start("kernels", common, &p, Some(p.seed));
    let k = load_kernels(p.tmax, p.accuracy, p.seed, p.cache_dir.as_deref())?;
    run.write_main(&csv(|w| k.write_csv(w))?)?;
    let max_err = k.c_err.iter().chain(&k.r_err).flatten().cloned().fold(0.0, f64::max);
    run.finish(json!({ "t_max": k.t_max, "C": k.c, "R": k.r, "max_std_error": max_err }))
}

pub fn simulate(common: &Common, p: SimulateParams) -> Out {
    let mut run = Run::start("simulate", common, &p, Some(p.seed));
    let seed = RandomSeed::new(p.seed);
    let graph = match p.graph {
        GraphChoice::Regular => sample_random_regular(p.n, p.k, seed.derive(1, 0))?,
        GraphChoice::Tree => build_tree(p.k, p.depth, false)?,
    };
    let init = initial_configuration(graph.n(), p.theta, p.init, seed.derive(2, 0))?;
    let tape = TieBreakTape::new(seed.derive(3, 0).seed);
    let horizon = p.horizon.unwrap_or_else(|| default_horizon_cap(graph.n()));
    let (history, outcome) = run_with(&graph, &init, horizon, &tape, None, &Majority::new(p.tie_rule), true)?;
    let mags: Vec<f64> =
        history.iter().map(|c| c.spins.iter().map(|&s| f64::from(s)).sum::<f64>() / c.len() as f64).collect();
    run.write_main(&csv(|w| {
        writeln!(w, "t,magnetization")?;
        for (t, m) in mags.iter().enumerate() {
            writeln!(w, "{t},{m}")?;
        }
        Ok(())
    })?)?;
    if p.history {
        let path = run.sibling("history");
        run.write(&path, &csv(|w| write_trajectory_csv(w, &history))?)?;
    }
    run.finish(json!({
        "vertices": graph.n(),
        "initial_magnetization": mags[0],
        "final_magnetization": mags[mags.len() - 1],
        "classification": outcome.classification,
        "time": outcome.time,
    }))
}

pub fn threshold(common: &Common, p: ThresholdParams) -> Out {
    let mut run = Run::start("threshold", common, &p, Some(p.seed));
    let opts =
        ThresholdOptions { trials: p.trials, init_mode: p.init, horizon_cap: p.horizon_cap, tie_rule: p.tie_rule };
    let est = estimate_threshold(p.k, p.n, p.seed, &opts)?;
    for w in &est.warnings {
        eprintln!("warning: {w}");
    }
    run.write_main(&csv(|w| est.write_csv(w))?)?;
    let path = run.sibling("trials");
    run.write(
        &path,
        &csv(|w| {
            writeln!(w, "trial,n_plus,theta,runs,undecided")?;
            for t in &est.per_trial {
                writeln!(w, "{},{},{},{},{}", t.trial, t.n_plus, t.theta, t.runs, t.undecided)?;
            }
            Ok(())
        })?,
    )?;
    run.finish(json!({
        "theta_hat": est.theta_hat,
        "ci_halfwidth": est.ci_halfwidth,
        "gamma": est.gamma,
        "horizon_cap": est.horizon_cap,
        "undecided_runs": est.undecided_runs,
        "warnings": est.warnings,
    }))
}

pub fn predict(common: &Common, p: PredictParams) -> Out {
    let mut run = Run::start("predict", common, &p, Some(p.seed));
    let kernels = load_kernels(p.t_star + 1, p.accuracy, p.seed, p.cache_dir.as_deref())?;
    let pred = predict_bias(p.k, p.t_star, p.omega0, &kernels, p.accuracy, p.seed)?;
    let theta = p.omega0 * (p.k as f64).powf(-((p.t_star + 1) as f64) / 2.0);
    let depth = p.depth.unwrap_or(p.t_star + 2);
    let sim = bias_curve(p.k, theta, depth, depth, p.trials, p.seed)?;
    run.write_main(&csv(|w| {
        writeln!(w, "t,simulated_mean,simulated_stderr,predicted_mean")?;
        for s in &sim.points {
            let predicted = pred.predicted_mean.get(s.t).map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{predicted}", s.t, s.mean, s.std_error)?;
        }
        Ok(())
    })?)?;
    run.finish(json!({
        "theta": theta,
        "omega": pred.omega,
        "predicted_mean": pred.predicted_mean,
        "prediction_std_error": pred.std_error,
        "simulated_mean": sim.points.iter().map(|s| s.mean).collect::<Vec<_>>(),
    }))
}

pub fn lower_bound(common: &Common, p: LowerBoundParams) -> Out {
    let mut run = Run::start("lower-bound", common, &p, None);
    let opts = ThetaLbOptions {
        bisect_tol: p.bisect_tol,
        d_max: p.d_max,
        eps_converge: p.eps_converge,
        eps_positive: p.eps_positive.unwrap_or(10.0 * p.eps_converge),
        ..Default::default()
    };
    let r = theta_lb(p.k, p.t, &opts)?;
    if !r.all_converged {
        eprintln!("warning: some probes hit d-max before converging; the bound may be optimistic");
    }
    run.write_main(&csv(|w| {
        writeln!(w, "k,T,theta_lb,bracket_lo,bracket_hi,margin,d_used,sup_change,all_converged")?;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.k, r.t, r.theta_lb, r.bracket.0, r.bracket.1, r.margin, r.d_used, r.sup_change, r.all_converged
        )
    })?)?;
    let path = run.sibling("probes");
    run.write(
        &path,
        &csv(|w| {
            writeln!(w, "theta,positive,d,min_ratio,sup_change,converged")?;
            for q in &r.probes {
                writeln!(w, "{},{},{},{},{},{}", q.theta, q.positive, q.d, q.min_ratio, q.sup_change, q.converged)?;
            }
            Ok(())
        })?,
    )?;
    run.finish(json!({
        "theta_lb": r.theta_lb,
        "bracket": [r.bracket.0, r.bracket.1],
        "d_used": r.d_used,
        "all_converged": r.all_converged,
        "max_bound_violation": r.max_bound_violation,
        "max_monotone_violation": r.max_monotone_violation,
    }))
}

pub fn upper_bound(common: &Common, p: UpperBoundParams) -> Out {
    let mut run = Run::start("upper-bound", common, &p, Some(p.seed));
    let opts = BootstrapOptions {
        method: p.method,
        precision: p.precision,
        seed: p.seed,
        trials: p.trials,
        depths: p.depths.clone(),
        vertex_budget: p.vertex_budget,
    };
    let results = p.k.iter().map(|&k| bootstrap_rho_c(k, &opts)).collect::<majority::Result<Vec<_>>>()?;
    run.write_main(&csv(|w| {
        writeln!(w, "k,m,rho_c,theta_u,method,ci_lo,ci_hi")?;
        for r in &results {
            writeln!(w, "{},{},{},{},{},{},{}", r.k, r.m, r.rho_c, r.theta_u, r.method, r.ci.0, r.ci.1)?;
        }
        Ok(())
    })?)?;
    if p.method == BootstrapMethod::Simulation {
        let path = run.sibling("depths");
        run.write(
            &path,
            &csv(|w| {
                writeln!(w, "k,depth,trials,rho_sim,ci_lo,ci_hi,rho_fixed_point,agrees")?;
                for r in &results {
                    for d in &r.depth_curve {
                        writeln!(
                            w,
                            "{},{},{},{},{},{},{},{}",
                            r.k, d.depth, d.trials, d.rho_sim, d.ci.0, d.ci.1, d.rho_fixed_point, d.agrees
                        )?;
                    }
                }
                Ok(())
            })?,
        )?;
    }
    let summary: Vec<_> = results.iter().map(|r| json!({ "k": r.k, "rho_c": r.rho_c, "theta_u": r.theta_u })).collect();
    run.finish(json!(summary))
}

pub fn clt_check(common: &Common, p: CltCheckParams) -> Out {
    let mut run = Run::start("clt-check", common, &p, Some(p.seed));
    let m = p.cells.len();
    if m < 2 || !m.is_power_of_two() {
        return Err(CliError::Usage(format!("need 2^d cell probabilities, got {m}")));
    }
    let d = m.trailing_zeros() as usize;
    if p.sides.len() != d {
        return Err(CliError::Usage(format!("{d} coordinates need {d} sides, got {}", p.sides.len())));
    }
    let offsets = if p.offsets.is_empty() { vec![0; d] } else { p.offsets.clone() };
    if offsets.len() != d {
        return Err(CliError::Usage(format!("{d} coordinates need {d} offsets, got {}", offsets.len())));
    }
    let (means, _) = cell_moments(&p.cells, d);
    let partition = SlicePartition::new(p.sides.iter().map(|&s| s.into()).collect());
    let make = |n: usize| {
        let a = means.iter().zip(&offsets).map(|(mu, off)| (n as f64 * mu).round() as i64 + off).collect();
        LatticeSumSpec::new(n, p.cells.clone(), a, partition.clone())
    };
    let rows = clt_scan(make, &p.n, &SliceOptions::with_accuracy(p.accuracy, p.seed))?;
    run.write_main(&csv(|w| cltcheck::write_csv(w, &rows))?)?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.bound_ratio).collect();
    run.finish(json!({
        "n": p.n,
        "err": rows.iter().map(|r| r.err).collect::<Vec<_>>(),
        "bound_ratio": ratios,
    }))
}
