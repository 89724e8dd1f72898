//! Generating-count convolution over children.
//!
//! Children are exchangeable, so the root only sees, for every time `t`, how
//! many children are `+1` (equivalently the sum `y(t)`), plus how many of them
//! belong to the core being tracked. The state is therefore a count vector
//! `(n_0, .., n_{L-1})` and a core count saturating at `core_cap`.

use crate::error::{Error, Result};
use crate::trajectory::spin;
use crate::Scalar;

/// Default cap on the number of lattice states.
pub const DEFAULT_LATTICE_CAP: usize = 1 << 26;

/// Weights one child contributes: for each `L`-bit prefix code, the mass
/// outside the tracked core and the mass inside it.
#[derive(Clone, Debug)]
pub struct ChildMeasure<S> {
    pub len: usize,
    pub out: Vec<S>,
    pub core: Vec<S>,
}

impl<S: Scalar> ChildMeasure<S> {
    /// A measure with no core dimension.
    pub fn plain(len: usize, weights: Vec<S>) -> Self {
        assert_eq!(weights.len(), 1 << len);
        let zeros = vec![S::zero(); weights.len()];
        ChildMeasure { len, out: weights, core: zeros }
    }
}

/// Mass over children-count vectors and saturating core counts.
#[derive(Clone, Debug)]
pub struct LatticeDistribution<S> {
    len: usize,
    radix: usize,
    core_cap: usize,
    stride: usize,
    children: usize,
    mass: Vec<S>,
}

impl<S: Scalar> LatticeDistribution<S> {
    /// Point mass at zero children, for up to `max_children` children.
    pub fn empty(len: usize, max_children: usize, core_cap: usize, cap: usize) -> Result<Self> {
        let radix = max_children + 1;
        let stride = radix
            .checked_pow(len as u32)
            .filter(|s| s.checked_mul(core_cap + 1).is_some_and(|n| n <= cap))
            .ok_or_else(|| {
                Error::SizeCap(format!(
                    "lattice with {radix}^{len} x {} states exceeds the cap of {cap}; reduce T or k",
                    core_cap + 1
                ))
            })?;
        let mut mass = vec![S::zero(); stride * (core_cap + 1)];
        mass[0] = S::one();
        Ok(LatticeDistribution { len, radix, core_cap, stride, children: 0, mass })
    }

    pub fn children(&self) -> usize {
        self.children
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Adds one child.
    pub fn convolve(&mut self, child: &ChildMeasure<S>) {
        assert_eq!(child.len, self.len);
        assert!(self.children + 1 < self.radix, "too many children for this lattice");
        let offsets: Vec<usize> = (0..1usize << self.len)
            .map(|c| (0..self.len).filter(|&t| (c >> t) & 1 == 1).map(|t| self.radix.pow(t as u32)).sum())
            .collect();
        let has_core = child.core.iter().any(|w| !w.is_zero());
        let mut next = vec![S::zero(); self.mass.len()];
        for (idx, m) in self.mass.iter().enumerate() {
            if m.is_zero() {
                continue;
            }
            let c = idx / self.stride;
            let base = idx % self.stride;
            let up = (c + 1).min(self.core_cap);
            for (code, off) in offsets.iter().enumerate() {
                let w = &child.out[code];
                if !w.is_zero() {
                    let j = base + off + c * self.stride;
                    next[j] = next[j].clone() + m.clone() * w.clone();
                }
                if has_core {
                    let w = &child.core[code];
                    if !w.is_zero() {
                        let j = base + off + up * self.stride;
                        next[j] = next[j].clone() + m.clone() * w.clone();
                    }
                }
            }
        }
        self.mass = next;
        self.children += 1;
    }

    /// Total mass.
    pub fn total(&self) -> S {
        self.mass.iter().fold(S::zero(), |a, b| a + b.clone())
    }

    /// Visits `(plus-counts per time, core count, mass)` for every state with nonzero mass.
    pub fn for_each(&self, mut f: impl FnMut(&[usize], usize, &S)) {
        let mut counts = vec![0usize; self.len];
        for (idx, m) in self.mass.iter().enumerate() {
            if m.is_zero() {
                continue;
            }
            let mut rest = idx % self.stride;
            for c in counts.iter_mut() {
                *c = rest % self.radix;
                rest /= self.radix;
            }
            f(&counts, idx / self.stride, m);
        }
    }

    /// Root update weights. For each field code `u` (or just `u = 0` when
    /// `field` is false) and each `L`-bit code `s` of root spins `σ(1..=L)`,
    /// returns `Σ_state mass · Π_t K_{u(t)}(s_t | y(t))` over states whose core
    /// count is at least `min_core`. Indexed `[u][s]`.
    pub fn root_weights(&self, field: bool, min_core: usize) -> Vec<Vec<S>> {
        let n_fields = if field { 1usize << self.len } else { 1 };
        let n_codes = 1usize << self.len;
        let mut out = vec![vec![S::zero(); n_codes]; n_fields];
        let half = S::half();
        let children = self.children as i64;
        // Per time: weight of root spin +1 and -1 given y(t)+u(t).
        let mut kt: Vec<[u8; 2]> = vec![[0, 0]; self.len];
        let mut prod: Vec<u8> = vec![0; n_codes];
        self.for_each(|counts, core, m| {
            if core < min_core {
                return;
            }
            for (u, row) in out.iter_mut().enumerate() {
                for (t, k) in kt.iter_mut().enumerate() {
                    let y = 2 * counts[t] as i64 - children;
                    let h = if field { spin(u as u32, t) as i64 } else { 0 };
                    // encoded as multiples of one half: 2 = 1, 1 = 1/2, 0 = 0
                    *k = match (y + h).signum() {
                        1 => [2, 0],
                        -1 => [0, 2],
                        _ => [1, 1],
                    };
                }
                // product over times, tracking the power of 1/2
                for (s, p) in prod.iter_mut().enumerate() {
                    let mut halves = 0u8;
                    let mut zero = false;
                    for (t, k) in kt.iter().enumerate() {
                        let w = if (s >> t) & 1 == 1 { k[0] } else { k[1] };
                        match w {
                            0 => {
                                zero = true;
                                break;
                            }
                            1 => halves += 1,
                            _ => {}
                        }
                    }
                    *p = if zero { u8::MAX } else { halves };
                }
                for (s, &p) in prod.iter().enumerate() {
                    if p == u8::MAX {
                        continue;
                    }
                    let mut w = m.clone();
                    for _ in 0..p {
                        w = w * half.clone();
                    }
                    row[s] = row[s].clone() + w;
                }
            }
        });
        out
    }
}
