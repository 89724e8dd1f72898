//! Parity decomposition of the exact recursion.
//!
//! On a tree, spins at even times of the root interact only with spins at odd
//! times of its children and vice versa. The root law therefore factorizes
//! into two chain laws: chain `p` holds the root spins at times `≡ p (mod 2)`
//! and is driven by the field at times of the other parity.

use super::exact::{check, initial, ConditionalFamily};
use super::lattice::{ChildMeasure, LatticeDistribution, DEFAULT_LATTICE_CAP};
use crate::error::Result;
use crate::trajectory::{mask, spin};
use crate::Scalar;

/// Law of one chain: `[v][x]` where `x` packs the root spins at the chain's
/// times and `v` the field at the other parity's times below the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainFamily<S> {
    pub parity: usize,
    pub horizon: usize,
    pub table: Vec<S>,
}

/// Times `≡ p` in `0..=h`.
pub fn chain_times(p: usize, h: usize) -> Vec<usize> {
    (0..=h).filter(|t| t % 2 == p).collect()
}

/// Times `≡ 1-p` in `0..h`.
pub fn field_times(p: usize, h: i64) -> Vec<usize> {
    (0..h.max(0) as usize).filter(|t| t % 2 != p).collect()
}

impl<S: Scalar> ChainFamily<S> {
    pub fn x_len(&self) -> usize {
        chain_times(self.parity, self.horizon).len()
    }

    pub fn v_len(&self) -> usize {
        field_times(self.parity, self.horizon as i64).len()
    }

    pub fn get(&self, x: u32, v: u32) -> &S {
        &self.table[((v as usize) << self.x_len()) + x as usize]
    }
}

/// Both chain laws at horizon `t`.
pub fn chain_families<S: Scalar>(k: usize, t: usize, theta: f64) -> Result<[ChainFamily<S>; 2]> {
    check(k, theta)?;
    let mut fams = [
        ChainFamily { parity: 0, horizon: 0, table: vec![initial(theta, -1), initial(theta, 1)] },
        ChainFamily { parity: 1, horizon: 0, table: vec![S::one()] },
    ];
    for h in 1..=t {
        let next0 = step(k, theta, 0, h, &fams[1])?;
        let next1 = step(k, theta, 1, h, &fams[0])?;
        fams = [next0, next1];
    }
    Ok(fams)
}

fn step<S: Scalar>(k: usize, theta: f64, p: usize, h: usize, children: &ChainFamily<S>) -> Result<ChainFamily<S>> {
    debug_assert_eq!(children.parity, 1 - p);
    debug_assert_eq!(children.horizon + 1, h);
    let x_len = chain_times(p, h).len();
    let v_len = field_times(p, h as i64).len();
    let lat = children.x_len();
    debug_assert_eq!(lat, v_len);
    let f_len = children.v_len();
    let mut table = vec![S::zero(); 1usize << (x_len + v_len)];
    for f in 0..(1u32 << f_len) {
        let weights: Vec<S> = (0..1u32 << lat).map(|c| children.get(c, f).clone()).collect();
        let mut dist = LatticeDistribution::empty(lat, k - 1, 0, DEFAULT_LATTICE_CAP)?;
        for _ in 0..k - 1 {
            dist.convolve(&ChildMeasure::plain(lat, weights.clone()));
        }
        let rw = dist.root_weights(true, 0);
        for rest in 0..(1u32 << (x_len - f_len)) {
            let x = f | (rest << f_len);
            let s = if p == 0 { x >> 1 } else { x } & mask(v_len);
            let head = if p == 0 { initial::<S>(theta, spin(x, 0)) } else { S::one() };
            for v in 0..(1u32 << v_len) {
                table[((v as usize) << x_len) + x as usize] = head.clone() * rw[v as usize][s as usize].clone();
            }
        }
    }
    Ok(ChainFamily { parity: p, horizon: h, table })
}

/// Reassembles `P(σ||u)` from the two chains.
pub fn family_from_chains<S: Scalar>(k: usize, theta: f64, chains: &[ChainFamily<S>; 2]) -> ConditionalFamily<S> {
    let t = chains[0].horizon;
    let w = 1usize << (t + 1);
    let pick = |code: u32, times: &[usize]| -> u32 {
        times.iter().enumerate().fold(0, |acc, (i, &tm)| acc | (((code >> tm) & 1) << i))
    };
    let x_times = [chain_times(0, t), chain_times(1, t)];
    let v_times = [field_times(0, t as i64), field_times(1, t as i64)];
    let mut table = vec![S::zero(); w * w];
    for u in 0..w as u32 {
        for sigma in 0..w as u32 {
            let a = chains[0].get(pick(sigma, &x_times[0]), pick(u, &v_times[0]));
            let b = chains[1].get(pick(sigma, &x_times[1]), pick(u, &v_times[1]));
            table[u as usize * w + sigma as usize] = a.clone() * b.clone();
        }
    }
    ConditionalFamily { t, k, theta, table }
}

/// Exact root family computed through the parity decomposition.
pub fn bipartite_root_distribution<S: Scalar>(k: usize, t: usize, theta: f64) -> Result<ConditionalFamily<S>> {
    let chains = chain_families(k, t, theta)?;
    Ok(family_from_chains(k, theta, &chains))
}
