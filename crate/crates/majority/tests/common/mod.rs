//! Brute-force enumeration shared by the oracle tests and the acceptance run.

use majority::Scalar;

pub fn spin(code: u32, t: usize) -> i64 {
    if (code >> t) & 1 == 1 {
        1
    } else {
        -1
    }
}

/// Rooted tree of the given depth where every non-leaf vertex has `k-1`
/// children, as parent/children lists.
fn rooted_tree(k: usize, depth: usize) -> (Vec<Option<usize>>, Vec<Vec<usize>>) {
    let mut parent = vec![None];
    let mut children = vec![Vec::new()];
    let mut layer = vec![0usize];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &v in &layer {
            for _ in 0..k - 1 {
                let c = parent.len();
                parent.push(Some(v));
                children.push(Vec::new());
                children[v].push(c);
                next.push(c);
            }
        }
        layer = next;
    }
    (parent, children)
}

struct Brute<'a, S> {
    parent: &'a [Option<usize>],
    children: &'a [Vec<usize>],
    horizon: usize,
    u: u32,
    out: Vec<S>,
}

impl<S: Scalar> Brute<'_, S> {
    /// Runs the synchronous dynamics from `spins`, branching on every tie with
    /// weight one half, and adds `weight` to the root trajectory reached.
    fn walk(&mut self, spins: Vec<i64>, t: usize, code: u32, weight: S) {
        if t == self.horizon {
            self.out[code as usize] = self.out[code as usize].clone() + weight;
            return;
        }
        let n = spins.len();
        let mut next = vec![0i64; n];
        let mut ties = Vec::new();
        #[allow(clippy::needless_range_loop)]
        for v in 0..n {
            let mut sum: i64 = self.children[v].iter().map(|&c| spins[c]).sum();
            sum += match self.parent[v] {
                Some(p) => spins[p],
                None => spin(self.u, t),
            };
            next[v] = sum.signum();
            if sum == 0 {
                ties.push(v);
            }
        }
        let branches = 1u32 << ties.len();
        let mut w = weight;
        for _ in 0..ties.len() {
            w = w * S::half();
        }
        for b in 0..branches {
            let mut cfg = next.clone();
            for (i, &v) in ties.iter().enumerate() {
                cfg[v] = if (b >> i) & 1 == 1 { 1 } else { -1 };
            }
            let bit = if cfg[0] > 0 { 1u32 << (t + 1) } else { 0 };
            self.walk(cfg, t + 1, code | bit, w.clone());
        }
    }
}

/// `P(σ_root(0..=T) | u)` by enumerating every initial configuration of the
/// depth-`T` rooted tree and every tie outcome.
pub fn brute_force<S: Scalar>(k: usize, horizon: usize, theta: f64) -> Vec<Vec<S>> {
    let (parent, children) = rooted_tree(k, horizon);
    let n = parent.len();
    let plus = (S::one() + S::from_f64(theta)) * S::half();
    let minus = (S::one() - S::from_f64(theta)) * S::half();
    let width = 1u32 << (horizon + 1);
    (0..width)
        .map(|u| {
            let mut b =
                Brute { parent: &parent, children: &children, horizon, u, out: vec![S::zero(); width as usize] };
            for cfg in 0u64..(1u64 << n) {
                let spins: Vec<i64> = (0..n).map(|v| if (cfg >> v) & 1 == 1 { 1 } else { -1 }).collect();
                let mut w = S::one();
                for &s in &spins {
                    w = w * if s > 0 { plus.clone() } else { minus.clone() };
                }
                let code = if spins[0] > 0 { 1 } else { 0 };
                b.walk(spins, 0, code, w);
            }
            b.out
        })
        .collect()
}
