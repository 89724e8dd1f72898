//! Spin trajectories packed into integer codes: bit `t` is set iff `σ(t) = +1`.

use std::fmt;

use crate::error::{invalid, Result};

/// Longest supported trajectory.
pub const MAX_LEN: usize = 31;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trajectory {
    code: u32,
    len: u8,
}

impl Trajectory {
    pub fn new(code: u32, len: usize) -> Result<Self> {
        if len > MAX_LEN {
            return Err(invalid(format!("trajectory length {len} exceeds {MAX_LEN}")));
        }
        if (code as u64) >> len != 0 {
            return Err(invalid(format!("code {code} does not fit in {len} bits")));
        }
        Ok(Trajectory { code, len: len as u8 })
    }

    pub fn from_spins(spins: &[i8]) -> Result<Self> {
        let mut code = 0u32;
        for (t, &s) in spins.iter().enumerate() {
            match s {
                1 => code |= 1 << t,
                -1 => {}
                _ => return Err(invalid(format!("spin {s} is not ±1"))),
            }
        }
        Trajectory::new(code, spins.len())
    }

    pub fn code(&self) -> u32 {
        self.code
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn spin(&self, t: usize) -> i8 {
        assert!(t < self.len(), "time {t} outside trajectory");
        spin(self.code, t)
    }

    pub fn spins(&self) -> Vec<i8> {
        (0..self.len()).map(|t| spin(self.code, t)).collect()
    }

    /// The first `n` spins.
    pub fn prefix(&self, n: usize) -> Trajectory {
        assert!(n <= self.len());
        Trajectory { code: self.code & mask(n), len: n as u8 }
    }

    /// All `2^len` trajectories in ascending code order.
    pub fn all(len: usize) -> impl Iterator<Item = Trajectory> {
        assert!(len <= MAX_LEN);
        (0..(1u32 << len)).map(move |code| Trajectory { code, len: len as u8 })
    }
}

impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in 0..self.len() {
            f.write_str(if spin(self.code, t) > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

/// Spin at time `t` of a raw code.
#[inline]
pub fn spin(code: u32, t: usize) -> i8 {
    if (code >> t) & 1 == 1 {
        1
    } else {
        -1
    }
}

#[inline]
pub fn mask(len: usize) -> u32 {
    if len >= 32 {
        u32::MAX
    } else {
        (1u32 << len) - 1
    }
}
