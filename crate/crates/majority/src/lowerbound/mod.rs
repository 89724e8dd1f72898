//! Exact root-trajectory recursion and the alternating-core lower bound.

mod bipartite;
mod exact;
mod lattice;
mod psi;
mod theta;

pub use bipartite::{bipartite_root_distribution, chain_families, chain_times, field_times, ChainFamily};
pub use exact::{
    exact_root_distribution, exact_root_distribution_capped, full_tree_root_distribution, initial, ConditionalFamily,
};
pub use lattice::{ChildMeasure, LatticeDistribution, DEFAULT_LATTICE_CAP};
pub use psi::{
    full_threshold, full_tree_psi, psi_iterate, psi_iterate_observed, psi_step_raw, rooted_threshold, PsiOptions,
    PsiTables, SLACK,
};
pub use theta::{probe, theta_lb, Probe, ThetaLb, ThetaLbOptions};

use std::io::Write;

/// Writes `sigma-code,u-code,psi-odd,psi-even` rows.
pub fn write_psi_csv<W: Write>(mut w: W, psi: &PsiTables<f64>) -> std::io::Result<()> {
    writeln!(w, "sigma_code,u_code,psi_odd,psi_even")?;
    let width = 1usize << (psi.t + 1);
    for u in 0..width {
        for s in 0..width {
            let i = u * width + s;
            writeln!(w, "{s},{u},{:e},{:e}", psi.psi_odd[i], psi.psi_even[i])?;
        }
    }
    Ok(())
}
