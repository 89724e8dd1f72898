//! Bisection for the lower bound `θ_lb(k, T)`.

use serde::{Deserialize, Serialize};

use super::exact::exact_root_distribution_capped;
use super::psi::{psi_iterate, PsiOptions, PsiTables};
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaLbOptions {
    pub bisect_tol: f64,
    pub d_max: usize,
    pub eps_converge: f64,
    pub eps_positive: f64,
    pub lattice_cap: usize,
}

impl Default for ThetaLbOptions {
    fn default() -> Self {
        let eps_converge = 1e-12;
        ThetaLbOptions {
            bisect_tol: 5e-4,
            d_max: 1_000_000,
            eps_converge,
            eps_positive: 10.0 * eps_converge,
            lattice_cap: super::lattice::DEFAULT_LATTICE_CAP,
        }
    }
}

impl ThetaLbOptions {
    fn psi(&self) -> PsiOptions {
        PsiOptions {
            d_max: self.d_max,
            eps_converge: self.eps_converge,
            eps_positive: Some(self.eps_positive),
            lattice_cap: self.lattice_cap,
        }
    }
}

/// Outcome of the positivity test at one bias.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub theta: f64,
    pub positive: bool,
    pub d: usize,
    pub min_ratio: f64,
    pub sup_change: f64,
    pub converged: bool,
    pub max_bound_violation: f64,
    pub max_monotone_violation: f64,
}

impl Probe {
    fn from_tables(theta: f64, psi: &PsiTables<f64>, eps_positive: f64) -> Self {
        Probe {
            theta,
            positive: psi.min_ratio >= eps_positive,
            d: psi.d,
            min_ratio: psi.min_ratio,
            sup_change: psi.sup_change,
            converged: psi.converged,
            max_bound_violation: psi.max_bound_violation,
            max_monotone_violation: psi.max_monotone_violation,
        }
    }
}

/// Whether every `Ψ_odd/P` stays above `eps_positive` in the limit `d → ∞`.
pub fn probe(k: usize, t: usize, theta: f64, opts: &ThetaLbOptions) -> Result<Probe> {
    let p = exact_root_distribution_capped::<f64>(k, t, theta, opts.lattice_cap)?;
    let psi = psi_iterate(&p, &opts.psi())?;
    Ok(Probe::from_tables(theta, &psi, opts.eps_positive))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaLb {
    pub k: usize,
    pub t: usize,
    /// Midpoint of the final bracket.
    pub theta_lb: f64,
    /// Largest bias found positive and smallest found not positive.
    pub bracket: (f64, f64),
    /// Smallest `Ψ_odd/P` at the lower end of the bracket.
    pub margin: f64,
    /// Iterations used at the lower end of the bracket.
    pub d_used: usize,
    pub sup_change: f64,
    /// False if some positive probe stopped at `d_max` without converging.
    pub all_converged: bool,
    pub max_bound_violation: f64,
    pub max_monotone_violation: f64,
    pub probes: Vec<Probe>,
}

/// Bisection over `θ ∈ [-1, 1]` for the largest bias at which the
/// alternating-core tables stay positive.
pub fn theta_lb(k: usize, t: usize, opts: &ThetaLbOptions) -> Result<ThetaLb> {
    if !(opts.bisect_tol > 0.0) {
        return Err(invalid("bisection tolerance must be positive"));
    }
    let mut probes = Vec::new();
    let run = |theta: f64, probes: &mut Vec<Probe>| -> Result<Probe> {
        let pr = probe(k, t, theta, opts)?;
        probes.push(pr);
        Ok(pr)
    };
    let mut lo = run(-1.0, &mut probes)?;
    let mut hi = run(1.0, &mut probes)?;
    if !lo.positive || hi.positive {
        let edge = if lo.positive { hi } else { lo };
        return Ok(finish(k, t, (edge.theta, edge.theta), edge, probes));
    }
    while hi.theta - lo.theta > opts.bisect_tol {
        let mid = run(0.5 * (lo.theta + hi.theta), &mut probes)?;
        if mid.positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(finish(k, t, (lo.theta, hi.theta), lo, probes))
}

fn finish(k: usize, t: usize, bracket: (f64, f64), lo: Probe, probes: Vec<Probe>) -> ThetaLb {
    ThetaLb {
        k,
        t,
        theta_lb: 0.5 * (bracket.0 + bracket.1),
        bracket,
        margin: lo.min_ratio,
        d_used: lo.d,
        sup_change: lo.sup_change,
        all_converged: probes.iter().filter(|p| p.positive).all(|p| p.converged),
        max_bound_violation: probes.iter().map(|p| p.max_bound_violation).fold(0.0, f64::max),
        max_monotone_violation: probes.iter().map(|p| p.max_monotone_violation).fold(0.0, f64::max),
        probes,
    }
}
