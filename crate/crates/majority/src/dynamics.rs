//! Synchronous majority dynamics with randomized tie-breaking.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graphs::{GraphKind, RegularGraph};
use crate::seed::mix64;

pub type Spin = i8;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfiguration {
    pub spins: Vec<Spin>,
}

impl SpinConfiguration {
    pub fn new(spins: Vec<Spin>) -> Self {
        debug_assert!(spins.iter().all(|&s| s == 1 || s == -1));
        SpinConfiguration { spins }
    }

    pub fn constant(n: usize, s: Spin) -> Self {
        SpinConfiguration { spins: vec![s; n] }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn consensus(&self) -> Option<Spin> {
        let first = *self.spins.first()?;
        self.spins.iter().all(|&s| s == first).then_some(first)
    }

    /// Entrywise order `self ⪰ other`.
    pub fn dominates(&self, other: &SpinConfiguration) -> bool {
        self.spins.iter().zip(&other.spins).all(|(a, b)| a >= b)
    }

    pub fn flipped(&self) -> SpinConfiguration {
        SpinConfiguration { spins: self.spins.iter().map(|s| -s).collect() }
    }
}

/// Fair ±1 bits addressed by `(vertex, time)`, derived by hashing so that
/// rereading a bit is free and reproducible.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TieBreakTape {
    pub seed: u64,
}

impl TieBreakTape {
    pub fn new(seed: u64) -> Self {
        TieBreakTape { seed }
    }

    #[inline]
    pub fn bit(&self, vertex: usize, t: usize) -> Spin {
        let h = mix64(self.seed ^ mix64((vertex as u64) ^ mix64(t as u64).rotate_left(17)));
        if h >> 63 == 1 {
            1
        } else {
            -1
        }
    }
}

/// External field `u(t)` applied to the root of a rooted tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSequence {
    pub u: Vec<i32>,
}

impl FieldSequence {
    pub fn new(u: Vec<i32>) -> Self {
        FieldSequence { u }
    }

    /// Field of `len` values taken from the spins of a trajectory code.
    pub fn from_code(code: u32, len: usize) -> Self {
        FieldSequence { u: (0..len).map(|t| crate::trajectory::spin(code, t) as i32).collect() }
    }

    pub fn get(&self, t: usize) -> i32 {
        self.u[t]
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Neighbor spins of one vertex, borrowed from the current configuration.
#[derive(Clone, Copy)]
pub struct NeighborSpins<'a> {
    ids: &'a [u32],
    spins: &'a [Spin],
}

impl<'a> NeighborSpins<'a> {
    pub fn iter(&self) -> impl Iterator<Item = Spin> + 'a {
        let spins = self.spins;
        self.ids.iter().map(move |&j| spins[j as usize])
    }

    pub fn sum(&self) -> i32 {
        self.ids.iter().map(|&j| self.spins[j as usize] as i32).sum()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Lazily read tie bit of one vertex at one time.
#[derive(Clone, Copy)]
pub struct TapeBit<'a> {
    tape: &'a TieBreakTape,
    vertex: usize,
    t: usize,
}

impl TapeBit<'_> {
    pub fn get(&self) -> Spin {
        self.tape.bit(self.vertex, self.t)
    }
}

/// A local update `f(σ_i, σ_∂i, u, A)`. Returns the new spin and whether the
/// update consulted the tie bit (so classification can wait for determinism).
pub trait LocalRule: Sync {
    fn update(&self, own: Spin, neighbors: NeighborSpins<'_>, field: i32, tape: TapeBit<'_>) -> (Spin, bool);
}

/// How a zero local field is resolved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    /// Keep the current spin when the tape bit is +1, flip otherwise.
    /// Commutes with the global spin flip.
    #[default]
    KeepFlip,
    /// Take the tape bit as the new spin. Preserves the partial order.
    Direct,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Majority {
    pub tie: TieRule,
}

impl Majority {
    pub fn new(tie: TieRule) -> Self {
        Majority { tie }
    }

    #[inline]
    pub fn resolve(&self, own: Spin, sum: i32, tape: impl FnOnce() -> Spin) -> (Spin, bool) {
        match sum.signum() {
            1 => (1, false),
            -1 => (-1, false),
            _ => match self.tie {
                TieRule::KeepFlip => (own * tape(), true),
                TieRule::Direct => (tape(), true),
            },
        }
    }
}

impl LocalRule for Majority {
    #[inline]
    fn update(&self, own: Spin, neighbors: NeighborSpins<'_>, field: i32, tape: TapeBit<'_>) -> (Spin, bool) {
        self.resolve(own, neighbors.sum() + field, || tape.get())
    }
}

fn check_len(graph: &RegularGraph, config: &SpinConfiguration) -> Result<()> {
    if config.len() != graph.n() {
        return Err(invalid(format!("configuration has {} spins, graph has {} vertices", config.len(), graph.n())));
    }
    Ok(())
}

/// One synchronous step of an arbitrary local rule. The field, when present,
/// acts on the root only. Returns the new configuration and whether any vertex
/// consulted its tie bit.
pub fn step_with<R: LocalRule + ?Sized>(
    graph: &RegularGraph,
    config: &SpinConfiguration,
    t: usize,
    tape: &TieBreakTape,
    field: Option<&FieldSequence>,
    rule: &R,
) -> Result<(SpinConfiguration, bool)> {
    check_len(graph, config)?;
    let mut out = vec![0; graph.n()];
    let mut tied = false;
    for (v, slot) in out.iter_mut().enumerate() {
        let nb = NeighborSpins { ids: graph.neighbors(v), spins: &config.spins };
        let h = match field {
            Some(u) if v == 0 => u.get(t),
            _ => 0,
        };
        let (s, tie) = rule.update(config.spins[v], nb, h, TapeBit { tape, vertex: v, t });
        *slot = s;
        tied |= tie;
    }
    Ok((SpinConfiguration { spins: out }, tied))
}

/// One step of the majority rule with the default tie rule.
pub fn majority_step(
    graph: &RegularGraph,
    config: &SpinConfiguration,
    t: usize,
    tape: &TieBreakTape,
) -> Result<SpinConfiguration> {
    step_with(graph, config, t, tape, None, &Majority::default()).map(|(c, _)| c)
}

/// One step of the rooted process: the root sees `u(t)` in place of its missing neighbor.
pub fn rooted_step(
    graph: &RegularGraph,
    config: &SpinConfiguration,
    t: usize,
    tape: &TieBreakTape,
    u: &FieldSequence,
) -> Result<SpinConfiguration> {
    if graph.kind() != GraphKind::RootedTree {
        return Err(invalid("rooted_step needs a rooted tree"));
    }
    if t >= u.len() {
        return Err(invalid(format!("field undefined at time {t}")));
    }
    step_with(graph, config, t, tape, Some(u), &Majority::default()).map(|(c, _)| c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    #[serde(rename = "consensus(+1)")]
    ConsensusPlus,
    #[serde(rename = "consensus(-1)")]
    ConsensusMinus,
    #[serde(rename = "fixed-point")]
    FixedPoint,
    #[serde(rename = "two-cycle")]
    TwoCycle,
    #[serde(rename = "undecided")]
    Undecided,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub classification: Classification,
    pub time: usize,
}

impl RunOutcome {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain record")
    }
}

/// Tracks the last configurations to classify a run as it proceeds.
struct Classifier {
    prev: Option<(SpinConfiguration, bool)>,
    prev2: Option<(SpinConfiguration, bool)>,
}

impl Classifier {
    /// `tied` says whether the step producing `cur` used a tie bit.
    fn check(&mut self, cur: &SpinConfiguration, tied: bool, t: usize) -> Option<RunOutcome> {
        let done = |classification| Some(RunOutcome { classification, time: t });
        match cur.consensus() {
            Some(1) => return done(Classification::ConsensusPlus),
            Some(_) => return done(Classification::ConsensusMinus),
            None => {}
        }
        if let Some((p, _)) = &self.prev {
            if !tied && p == cur {
                return done(Classification::FixedPoint);
            }
        }
        if let (Some((p2, _)), Some((_, tied_prev))) = (&self.prev2, &self.prev) {
            if !tied && !tied_prev && p2 == cur {
                return done(Classification::TwoCycle);
            }
        }
        None
    }

    fn push(&mut self, cur: SpinConfiguration, tied: bool) {
        self.prev2 = self.prev.take();
        self.prev = Some((cur, tied));
    }
}

/// Runs up to `horizon` steps, returning every configuration visited and the
/// classification. The run stops early once classified.
pub fn run(
    graph: &RegularGraph,
    init: &SpinConfiguration,
    horizon: usize,
    tape: &TieBreakTape,
    u: Option<&FieldSequence>,
) -> Result<(Vec<SpinConfiguration>, RunOutcome)> {
    run_with(graph, init, horizon, tape, u, &Majority::default(), true)
}

/// General form of [`run`]. With `keep_history = false` only the final
/// configuration is returned.
pub fn run_with<R: LocalRule + ?Sized>(
    graph: &RegularGraph,
    init: &SpinConfiguration,
    horizon: usize,
    tape: &TieBreakTape,
    u: Option<&FieldSequence>,
    rule: &R,
    keep_history: bool,
) -> Result<(Vec<SpinConfiguration>, RunOutcome)> {
    check_len(graph, init)?;
    if u.is_some() && graph.kind() != GraphKind::RootedTree {
        return Err(invalid("an external field needs a rooted tree"));
    }
    if let Some(u) = u {
        if u.len() < horizon {
            return Err(invalid(format!("field has {} values, horizon is {horizon}", u.len())));
        }
    }
    let mut history = vec![init.clone()];
    let mut cls = Classifier { prev: None, prev2: None };
    if let Some(out) = cls.check(init, false, 0) {
        return Ok((history, out));
    }
    let mut cur = init.clone();
    cls.push(cur.clone(), false);
    for t in 0..horizon {
        let (next, tied) = step_with(graph, &cur, t, tape, u, rule)?;
        let outcome = cls.check(&next, tied, t + 1);
        if keep_history {
            history.push(next.clone());
        }
        cur = next;
        if let Some(out) = outcome {
            if !keep_history {
                history = vec![cur];
            }
            return Ok((history, out));
        }
        cls.push(cur.clone(), tied);
    }
    if !keep_history {
        history = vec![cur];
    }
    Ok((history, RunOutcome { classification: Classification::Undecided, time: horizon }))
}

/// Largest time at which `vertex` of a truncated tree still agrees with the
/// infinite-tree process: information travels one layer per step.
pub fn valid_window(graph: &RegularGraph, vertex: usize) -> Result<usize> {
    match (graph.tree_depth(), graph.depth_of(vertex)) {
        (Some(d), Some(dv)) => Ok(d - dv),
        _ => Err(invalid("valid_window needs a tree")),
    }
}

/// Writes `t,vertex,spin` rows for a run history.
pub fn write_trajectory_csv<W: Write>(mut w: W, history: &[SpinConfiguration]) -> std::io::Result<()> {
    writeln!(w, "t,vertex,spin")?;
    for (t, c) in history.iter().enumerate() {
        for (v, s) in c.spins.iter().enumerate() {
            writeln!(w, "{t},{v},{s}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::build_tree;

    #[test]
    fn depth_one_example() {
        let g = build_tree(3, 1, false).unwrap();
        let c = SpinConfiguration::new(vec![-1, 1, 1, -1]);
        let next = majority_step(&g, &c, 0, &TieBreakTape::new(0)).unwrap();
        assert_eq!(next.spins, vec![1, -1, -1, -1]);
    }

    #[test]
    fn rooted_field_decides() {
        let g = build_tree(3, 1, true).unwrap();
        let c = SpinConfiguration::new(vec![-1, 1, -1]);
        let tape = TieBreakTape::new(5);
        let up = rooted_step(&g, &c, 0, &tape, &FieldSequence::new(vec![1])).unwrap();
        let down = rooted_step(&g, &c, 0, &tape, &FieldSequence::new(vec![-1])).unwrap();
        assert_eq!(up.spins[0], 1);
        assert_eq!(down.spins[0], -1);
    }

    #[test]
    fn rooted_tie_follows_tape() {
        let g = build_tree(4, 1, true).unwrap();
        // children sum to -1, field +1: tie at the root
        let c = SpinConfiguration::new(vec![1, 1, -1, -1]);
        for seed in 0..16 {
            let tape = TieBreakTape::new(seed);
            let next = rooted_step(&g, &c, 0, &tape, &FieldSequence::new(vec![1])).unwrap();
            assert_eq!(next.spins[0], c.spins[0] * tape.bit(0, 0));
        }
    }

    #[test]
    fn rooted_step_rejects_full_tree() {
        let g = build_tree(3, 1, false).unwrap();
        let c = SpinConfiguration::constant(4, 1);
        assert!(rooted_step(&g, &c, 0, &TieBreakTape::new(0), &FieldSequence::new(vec![1])).is_err());
    }

    #[test]
    fn all_minus_is_immediate_consensus() {
        let g = build_tree(3, 2, false).unwrap();
        let (_, out) = run(&g, &SpinConfiguration::constant(g.n(), -1), 5, &TieBreakTape::new(0), None).unwrap();
        assert_eq!(out, RunOutcome { classification: Classification::ConsensusMinus, time: 0 });
        assert_eq!(out.to_json(), r#"{"classification":"consensus(-1)","time":0}"#);
    }

    #[test]
    fn layered_configuration_cycles() {
        let g = build_tree(3, 2, false).unwrap();
        let spins = (0..g.n()).map(|v| if g.depth_of(v).unwrap().is_multiple_of(2) { 1 } else { -1 }).collect();
        let (hist, out) = run(&g, &SpinConfiguration::new(spins), 10, &TieBreakTape::new(0), None).unwrap();
        assert_eq!(out.classification, Classification::TwoCycle);
        assert_eq!(hist[1], hist[0].flipped());
    }

    #[test]
    fn windows() {
        let g = build_tree(3, 5, false).unwrap();
        assert_eq!(valid_window(&g, 0).unwrap(), 5);
        assert_eq!(valid_window(&g, g.n() - 1).unwrap(), 0);
        let v = g.ball_size(1);
        assert_eq!(g.depth_of(v), Some(2));
        assert_eq!(valid_window(&g, v).unwrap(), 3);
    }

    #[test]
    fn tape_is_roughly_fair() {
        let tape = TieBreakTape::new(11);
        let s: i64 = (0..20_000).map(|v| tape.bit(v, 3) as i64).sum();
        assert!(s.abs() < 600, "{s}");
    }
}
