//! Graph substrates: truncated regular trees, rooted trees and random regular graphs.
//!
//! Adjacency is stored in compressed rows. Trees are numbered breadth-first from
//! the root, so every ball around the root is a contiguous prefix of vertex ids,
//! and within a vertex's list the parent (if any) comes first, then its children.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed::RandomSeed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphKind {
    FullTree,
    RootedTree,
    RandomRegular,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegularGraph {
    k: usize,
    kind: GraphKind,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    /// Distance from the root, trees only.
    depth: Vec<u32>,
    tree_depth: usize,
}

impl RegularGraph {
    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn is_tree(&self) -> bool {
        self.kind != GraphKind::RandomRegular
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Depth assigned at construction (trees only).
    pub fn depth_of(&self, v: usize) -> Option<usize> {
        self.is_tree().then(|| self.depth[v] as usize)
    }

    /// Depth of the truncated tree (trees only).
    pub fn tree_depth(&self) -> Option<usize> {
        self.is_tree().then_some(self.tree_depth)
    }

    /// Number of vertices within distance `d` of the root (trees only).
    pub fn ball_size(&self, d: usize) -> usize {
        assert!(self.is_tree());
        self.depth.partition_point(|&x| (x as usize) <= d)
    }

    /// Children of `v` in a tree: the neighbors other than its parent.
    pub fn children(&self, v: usize) -> &[u32] {
        let nb = self.neighbors(v);
        if v == 0 || nb.is_empty() {
            nb
        } else {
            &nb[1..]
        }
    }

    /// Breadth-first distances from `src`; unreachable vertices get `usize::MAX`.
    pub fn bfs_distances(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n()];
        let mut queue = std::collections::VecDeque::new();
        dist[src] = 0;
        queue.push_back(src);
        while let Some(v) = queue.pop_front() {
            for &w in self.neighbors(v) {
                let w = w as usize;
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_simple(&self) -> bool {
        (0..self.n()).all(|v| {
            let nb = self.neighbors(v);
            let mut sorted = nb.to_vec();
            sorted.sort_unstable();
            sorted.windows(2).all(|w| w[0] != w[1]) && !nb.contains(&(v as u32))
        })
    }

    /// Plain-text edge list: a header `n k`, then one `u v` line per edge with `u < v`.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.n(), self.k);
        for v in 0..self.n() {
            for &w in self.neighbors(v) {
                if (v as u32) < w {
                    let _ = writeln!(out, "{v} {w}");
                }
            }
        }
        out
    }

    /// Parses [`to_edge_list`](Self::to_edge_list) output as a general (non-tree) graph.
    pub fn from_edge_list(text: &str) -> Result<RegularGraph> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| invalid("empty edge list"))?;
        let mut it = header.split_whitespace().map(str::parse::<usize>);
        let (n, k) = match (it.next(), it.next()) {
            (Some(Ok(n)), Some(Ok(k))) => (n, k),
            _ => return Err(invalid("edge list header must be `n k`")),
        };
        let mut edges = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace().map(str::parse::<u32>);
            match (it.next(), it.next()) {
                (Some(Ok(u)), Some(Ok(v))) if (u as usize) < n && (v as usize) < n => edges.push((u, v)),
                _ => return Err(invalid(format!("bad edge line `{line}`"))),
            }
        }
        Ok(from_edges(n, k, &edges, GraphKind::RandomRegular))
    }
}

fn from_edges(n: usize, k: usize, edges: &[(u32, u32)], kind: GraphKind) -> RegularGraph {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u as usize].push(v);
        adj[v as usize].push(u);
    }
    let mut offsets = Vec::with_capacity(n + 1);
    let mut neighbors = Vec::with_capacity(2 * edges.len());
    offsets.push(0);
    for mut list in adj {
        list.sort_unstable();
        neighbors.extend(list);
        offsets.push(neighbors.len());
    }
    RegularGraph { k, kind, offsets, neighbors, depth: Vec::new(), tree_depth: 0 }
}

/// Truncated tree of the given depth. Every non-root internal vertex has `k - 1`
/// children; the root has `k` children, or `k - 1` when `rooted`.
pub fn build_tree(k: usize, depth: usize, rooted: bool) -> Result<RegularGraph> {
    if k < 2 {
        return Err(invalid(format!("tree degree must be at least 2, got {k}")));
    }
    let root_children = if rooted { k - 1 } else { k };
    let mut layer = 1usize;
    let mut n = 1usize;
    for d in 0..depth {
        layer = layer
            .checked_mul(if d == 0 { root_children } else { k - 1 })
            .ok_or_else(|| Error::SizeCap("tree too large".into()))?;
        n = n.checked_add(layer).ok_or_else(|| Error::SizeCap("tree too large".into()))?;
    }
    if n > u32::MAX as usize {
        return Err(Error::SizeCap(format!("tree with {n} vertices")));
    }

    let mut offsets = Vec::with_capacity(n + 1);
    let mut neighbors = Vec::with_capacity(2 * (n - 1));
    let mut depths = Vec::with_capacity(n);
    let mut parent = vec![0u32; n];
    // Children of vertex v occupy a contiguous block starting at `next`.
    let mut next = 1usize;
    offsets.push(0);
    for v in 0..n {
        let d = if v == 0 { 0 } else { depths[parent[v] as usize] + 1 };
        depths.push(d);
        if v != 0 {
            neighbors.push(parent[v]);
        }
        if (d as usize) < depth {
            let c = if v == 0 { root_children } else { k - 1 };
            for w in next..next + c {
                parent[w] = v as u32;
                neighbors.push(w as u32);
            }
            next += c;
        }
        offsets.push(neighbors.len());
    }
    debug_assert_eq!(next, n);
    Ok(RegularGraph {
        k,
        kind: if rooted { GraphKind::RootedTree } else { GraphKind::FullTree },
        offsets,
        neighbors,
        depth: depths,
        tree_depth: depth,
    })
}

/// Number of vertices of a truncated tree, without building it.
pub fn tree_size(k: usize, depth: usize, rooted: bool) -> Option<usize> {
    let root_children = if rooted { k - 1 } else { k };
    let mut layer = 1usize;
    let mut n = 1usize;
    for d in 0..depth {
        layer = layer.checked_mul(if d == 0 { root_children } else { k - 1 })?;
        n = n.checked_add(layer)?;
    }
    Some(n)
}

/// Random simple `k`-regular graph: a uniform pairing of half-edges followed by
/// degree-preserving double swaps until no self-loop or parallel edge remains.
pub fn sample_random_regular(n: usize, k: usize, seed: RandomSeed) -> Result<RegularGraph> {
    if !(n * k).is_multiple_of(2) {
        return Err(invalid(format!("n·k = {} is odd", n * k)));
    }
    if n <= k {
        return Err(invalid(format!("need n > k, got n={n}, k={k}")));
    }
    if n > u32::MAX as usize {
        return Err(Error::SizeCap(format!("{n} vertices")));
    }
    let mut rng = seed.rng();
    let mut stubs: Vec<u32> = (0..n as u32).flat_map(|v| std::iter::repeat_n(v, k)).collect();
    stubs.shuffle(&mut rng);
    let mut edges: Vec<(u32, u32)> = stubs.chunks_exact(2).map(|c| (c[0], c[1])).collect();

    let key = |(u, v): (u32, u32)| if u < v { (u, v) } else { (v, u) };
    let mut mult: HashMap<(u32, u32), u32> = HashMap::with_capacity(edges.len());
    for &e in &edges {
        *mult.entry(key(e)).or_insert(0) += 1;
    }
    let bad = |e: (u32, u32), mult: &HashMap<(u32, u32), u32>| e.0 == e.1 || mult[&key(e)] > 1;

    let cap = 100u64 * n as u64 * k as u64;
    let mut attempts = 0u64;
    loop {
        let offenders: Vec<usize> = (0..edges.len()).filter(|&i| bad(edges[i], &mult)).collect();
        if offenders.is_empty() {
            break;
        }
        for &i in &offenders {
            if !bad(edges[i], &mult) {
                continue;
            }
            attempts += 1;
            if attempts > cap {
                return Err(Error::RewireFailed(cap));
            }
            let j = loop {
                let j = rng.random_range(0..edges.len());
                if j != i {
                    break j;
                }
            };
            let (a, b) = edges[i];
            let (c, d) = edges[j];
            for e in [edges[i], edges[j]] {
                let m = mult.get_mut(&key(e)).expect("edge present");
                *m -= 1;
            }
            let (e1, e2) = if rng.random_bool(0.5) { ((a, c), (b, d)) } else { ((a, d), (b, c)) };
            edges[i] = e1;
            edges[j] = e2;
            *mult.entry(key(e1)).or_insert(0) += 1;
            *mult.entry(key(e2)).or_insert(0) += 1;
        }
    }
    Ok(from_edges(n, k, &edges, GraphKind::RandomRegular))
}
