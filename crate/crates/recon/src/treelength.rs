//! Randomized reconstruction of bounded-treelength graphs by recursive ball separators.
//!
//! A frame is a connected active set `A` together with its distance rings
//! `R^1..R^D`. The frame samples vertex pairs of `A` to find a vertex `z` lying
//! on many shortest paths, cuts `A` with the ball around `z`, recovers the
//! components of what is left, and recurses on them. Small frames are queried
//! exhaustively.

use crate::decomposition::Dsu;
use crate::generators::rng_for;
use crate::graph::{Graph, Vertex};
use crate::oracle::{DistanceQuery, MemoQuery};
use crate::result::{ceil_log2, PhaseTally, ReconError, ReconstructionResult};
use rand::Rng;
use std::collections::HashMap;

/// Separator radius `⌈3k/2⌉`.
pub fn half_radius(k: usize) -> usize {
    (3 * k).div_ceil(2)
}

/// Number of rings kept per frame, `2⌈3k/2⌉`; separator balls around ring vertices stay inside.
pub fn ring_depth(k: usize) -> usize {
    2 * half_radius(k)
}

/// `Δ^k + 1`, saturating.
pub fn bag_size_bound(delta: usize, k: usize) -> u64 {
    (delta as u64).saturating_pow(k as u32).saturating_add(1)
}

/// Lower bound `1 / (2(Δ^k + 1))` on the best betweenness in a frame.
pub fn betweenness_lower_bound(delta: usize, k: usize) -> f64 {
    1.0 / (2.0 * bag_size_bound(delta, k) as f64)
}

/// Estimator constant `C = ⌈1 / (2 p_lb)⌉ = Δ^k + 1`.
pub fn estimator_constant(delta: usize, k: usize) -> u64 {
    bag_size_bound(delta, k)
}

/// Balance factor for which the separator argument goes through: `√(1 − 1/(4(Δ^k+1)))`.
pub fn alpha_proof(delta: usize, k: usize) -> f64 {
    (1.0 - 1.0 / (4.0 * bag_size_bound(delta, k) as f64)).sqrt()
}

/// The closed form `√(1/(4(Δ^k+1)))`; equals 1/4 at `Δ = 3, k = 1`.
pub fn alpha_stated(delta: usize, k: usize) -> f64 {
    (1.0 / (4.0 * bag_size_bound(delta, k) as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaRule {
    Proof,
    Stated,
    Fixed(f64),
}

impl AlphaRule {
    pub fn value(self, delta: usize, k: usize) -> f64 {
        match self {
            AlphaRule::Proof => alpha_proof(delta, k),
            AlphaRule::Stated => alpha_stated(delta, k),
            AlphaRule::Fixed(a) => a,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreelengthOptions {
    pub seed: u64,
    pub alpha: AlphaRule,
    /// Attempts per frame before giving up.
    pub max_attempts: u32,
}

impl TreelengthOptions {
    pub fn new(seed: u64) -> Self {
        TreelengthOptions { seed, alpha: AlphaRule::Proof, max_attempts: 64 }
    }
}

/// Active set with its rings; `rings[i - 1]` holds the vertices at distance exactly `i` from `a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub a: Vec<Vertex>,
    pub rings: Vec<Vec<Vertex>>,
}

impl Frame {
    pub fn root(n: usize, k: usize) -> Frame {
        Frame { a: (0..n).collect(), rings: vec![Vec::new(); ring_depth(k)] }
    }

    /// Ground-truth frame, computed by multi-source BFS.
    pub fn from_graph(g: &Graph, a: &[Vertex], k: usize) -> Frame {
        let depth = ring_depth(k);
        let mut dist = vec![u32::MAX; g.n()];
        let mut queue = std::collections::VecDeque::new();
        for &v in a {
            dist[v] = 0;
            queue.push_back(v);
        }
        let mut rings = vec![Vec::new(); depth];
        while let Some(x) = queue.pop_front() {
            if dist[x] as usize >= depth {
                continue;
            }
            for &w in g.neighbors(x) {
                if dist[w] == u32::MAX {
                    dist[w] = dist[x] + 1;
                    rings[dist[w] as usize - 1].push(w);
                    queue.push_back(w);
                }
            }
        }
        let mut a = a.to_vec();
        a.sort_unstable();
        for r in &mut rings {
            r.sort_unstable();
        }
        Frame { a, rings }
    }

    /// `r = |R^{≤D}|`.
    pub fn ring_size(&self) -> usize {
        self.rings.iter().map(Vec::len).sum()
    }

    /// `A ∪ R^{≤radius}`.
    pub fn near(&self, radius: usize) -> Vec<Vertex> {
        let mut out = self.a.clone();
        for r in self.rings.iter().take(radius) {
            out.extend_from_slice(r);
        }
        out
    }

    fn ring_vertices(&self, upto: usize) -> Vec<Vertex> {
        self.rings.iter().take(upto).flatten().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetweennessEstimate {
    pub z: Vertex,
    pub estimate: f64,
    pub samples: usize,
}

/// Picks the vertex of `A ∪ R^{≤⌈3k/2⌉}` lying on the most sampled shortest paths.
pub fn estimate_high_betweenness<R: Rng>(
    o: &mut dyn DistanceQuery,
    frame: &Frame,
    delta: usize,
    k: usize,
    rng: &mut R,
) -> Result<BetweennessEstimate, ReconError> {
    let na = frame.a.len();
    if na < 2 {
        return Err(ReconError::Params("betweenness needs at least two active vertices".into()));
    }
    let near = frame.near(half_radius(k));
    let samples = (estimator_constant(delta, k) as usize).saturating_mul(ceil_log2(na + frame.ring_size()).max(1) as usize);
    let mut hits = vec![0u32; near.len()];
    let mut du = vec![0u32; near.len()];
    for _ in 0..samples {
        let i = rng.gen_range(0..na);
        let mut j = rng.gen_range(0..na - 1);
        if j >= i {
            j += 1;
        }
        let (u, v) = (frame.a[i], frame.a[j]);
        let duv = o.query(u, v)?;
        for (slot, &x) in near.iter().enumerate() {
            du[slot] = o.query(u, x)?;
        }
        for (slot, &x) in near.iter().enumerate() {
            if du[slot] + o.query(x, v)? == duv {
                hits[slot] += 1;
            }
        }
    }
    let best = (0..near.len()).max_by(|&s, &t| hits[s].cmp(&hits[t]).then(near[t].cmp(&near[s]))).expect("frame is nonempty");
    Ok(BetweennessEstimate { z: near[best], estimate: hits[best] as f64 / samples as f64, samples })
}

/// `N^{≤⌈3k/2⌉}[z]`, found by querying `z` against `A ∪ R^{≤D}`; sorted.
pub fn ball_separator(o: &mut dyn DistanceQuery, frame: &Frame, z: Vertex, k: usize) -> Result<Vec<Vertex>, ReconError> {
    let radius = half_radius(k) as u32;
    let mut s = Vec::new();
    for x in frame.near(frame.rings.len()) {
        if o.query(z, x)? <= radius {
            s.push(x);
        }
    }
    s.sort_unstable();
    Ok(s)
}

/// Components of `G[A \ S]` from distances to `T = (S ∩ A) ∪ R^1` and to its neighbours `B` in `A`.
///
/// Components come back sorted by decreasing size, then smallest member.
pub fn partition_components(o: &mut dyn DistanceQuery, frame: &Frame, s: &[Vertex]) -> Result<Vec<Vec<Vertex>>, ReconError> {
    let rest: Vec<Vertex> = frame.a.iter().copied().filter(|v| s.binary_search(v).is_err()).collect();
    if rest.is_empty() {
        return Ok(Vec::new());
    }
    let mut t: Vec<Vertex> = frame.a.iter().copied().filter(|v| s.binary_search(v).is_ok()).collect();
    if let Some(r1) = frame.rings.first() {
        t.extend_from_slice(r1);
    }
    if t.is_empty() {
        return Ok(vec![rest]);
    }
    let mut dt = Vec::with_capacity(rest.len());
    for &v in &rest {
        let mut best = u32::MAX;
        for &x in &t {
            best = best.min(o.query(v, x)?);
        }
        dt.push(best);
    }
    let b: Vec<usize> = (0..rest.len()).filter(|&i| dt[i] == 1).collect();
    let mut dsu = Dsu::new(rest.len());
    for &bi in &b {
        for vi in 0..rest.len() {
            if o.query(rest[vi], rest[bi])? <= dt[vi] {
                dsu.union(vi, bi);
            }
        }
    }
    let mut groups: HashMap<usize, Vec<Vertex>> = HashMap::new();
    for (i, &v) in rest.iter().enumerate() {
        groups.entry(dsu.find(i)).or_default().push(v);
    }
    let mut comps: Vec<Vec<Vertex>> = groups.into_values().collect();
    comps.sort_by(|x, y| y.len().cmp(&x.len()).then(x[0].cmp(&y[0])));
    Ok(comps)
}

/// Queries `S ∪ R^{≤D}` against `A` and derives each component's rings from those answers.
pub fn spawn_subframes(o: &mut dyn DistanceQuery, frame: &Frame, s: &[Vertex], parts: &[Vec<Vertex>]) -> Result<Vec<Frame>, ReconError> {
    let depth = frame.rings.len();
    let mut outer: Vec<Vertex> = s.to_vec();
    outer.extend(frame.ring_vertices(depth));
    outer.sort_unstable();
    outer.dedup();
    for &x in &outer {
        for &a in &frame.a {
            o.query(x, a)?;
        }
    }
    let mut t: Vec<Vertex> = s.to_vec();
    if let Some(r1) = frame.rings.first() {
        t.extend_from_slice(r1);
    }
    t.sort_unstable();
    t.dedup();
    let universe = frame.near(depth);
    let mut children = Vec::with_capacity(parts.len());
    for part in parts {
        let mut to_t = Vec::with_capacity(t.len());
        for &x in &t {
            let mut best = u32::MAX;
            for &a in part {
                best = best.min(o.query(a, x)?);
            }
            to_t.push(best);
        }
        let mut rings = vec![Vec::new(); depth];
        for &v in &universe {
            if part.binary_search(&v).is_ok() {
                continue;
            }
            let d = if outer.binary_search(&v).is_ok() {
                let mut best = u32::MAX;
                for &a in part {
                    best = best.min(o.query(a, v)?);
                }
                best
            } else {
                let mut best = u32::MAX;
                for (ti, &x) in t.iter().enumerate() {
                    best = best.min(to_t[ti].saturating_add(o.query(x, v)?));
                }
                best
            };
            if d >= 1 && (d as usize) <= depth {
                rings[d as usize - 1].push(v);
            }
        }
        for r in &mut rings {
            r.sort_unstable();
        }
        children.push(Frame { a: part.clone(), rings });
    }
    Ok(children)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TreelengthStats {
    pub internal_frames: u64,
    pub leaves: u64,
    /// Internal frames whose first sampled separator was balanced.
    pub first_try: u64,
    pub retries: u64,
    /// Partition steps charged more than `n_A·Δ(r + |S|)` queries.
    pub partition_over_budget: u64,
    pub ring_growth_violations: u64,
    pub max_ring: usize,
    pub max_depth: usize,
    pub max_separator: usize,
    pub estimator_queries: u64,
    pub partition_queries: u64,
    pub brute_queries: u64,
}

impl TreelengthStats {
    pub fn first_try_rate(&self) -> f64 {
        if self.internal_frames == 0 {
            1.0
        } else {
            self.first_try as f64 / self.internal_frames as f64
        }
    }

    pub fn mean_retries(&self) -> f64 {
        if self.internal_frames == 0 {
            0.0
        } else {
            self.retries as f64 / self.internal_frames as f64
        }
    }
}

/// Frames of at most this many vertices are queried exhaustively: `max(⌊log2 n⌋, 5)`.
pub fn brute_limit(n: usize) -> usize {
    ((n.max(1) as f64).log2().floor() as usize).max(5)
}

/// Reconstructs a hidden graph of treelength at most `k` and maximum degree at most `delta`.
pub fn reconstruct_treelength(
    o: &mut dyn DistanceQuery,
    delta: usize,
    k: usize,
    opts: &TreelengthOptions,
) -> Result<(ReconstructionResult, TreelengthStats), ReconError> {
    if k == 0 {
        return Err(ReconError::Params("treelength parameter must be at least 1".into()));
    }
    let n = o.n();
    let mut tally = PhaseTally::start(o);
    let mut stats = TreelengthStats::default();
    let mut rng = rng_for(opts.seed);
    let alpha = opts.alpha.value(delta, k);
    let growth = ((delta + 1) as u64).saturating_pow((9 * k).div_ceil(2) as u32);
    let limit = brute_limit(n);
    let mut memo = MemoQuery::new(o);
    let mut edges = Vec::new();
    let mut stack = vec![(Frame::root(n, k), 0usize)];
    while let Some((frame, depth)) = stack.pop() {
        stats.max_depth = stats.max_depth.max(depth);
        stats.max_ring = stats.max_ring.max(frame.ring_size());
        let na = frame.a.len();
        if na <= limit {
            stats.leaves += 1;
            let before = memo.queries();
            for (i, &u) in frame.a.iter().enumerate() {
                for &v in &frame.a[i + 1..] {
                    if memo.query(u, v)? == 1 {
                        edges.push((u, v));
                    }
                }
            }
            stats.brute_queries += memo.queries() - before;
            tally.mark("brute", &memo);
            continue;
        }
        stats.internal_frames += 1;
        let mut attempt = 0;
        let (s, parts) = loop {
            attempt += 1;
            if attempt > opts.max_attempts {
                return Err(ReconError::Invariant(format!(
                    "no balanced separator for a frame of {na} vertices after {} attempts",
                    opts.max_attempts
                )));
            }
            let before = memo.queries();
            let est = estimate_high_betweenness(&mut memo, &frame, delta, k, &mut rng)?;
            let s = ball_separator(&mut memo, &frame, est.z, k)?;
            stats.estimator_queries += memo.queries() - before;
            tally.mark("separator", &memo);
            let before = memo.queries();
            let parts = partition_components(&mut memo, &frame, &s)?;
            let spent = memo.queries() - before;
            stats.partition_queries += spent;
            let r = frame.ring_size() as u64;
            if spent > na as u64 * delta as u64 * (r + s.len() as u64) {
                stats.partition_over_budget += 1;
            }
            tally.mark("partition", &memo);
            let largest = parts.first().map_or(0, Vec::len);
            if largest < na && largest as f64 <= alpha * na as f64 {
                break (s, parts);
            }
        };
        if attempt == 1 {
            stats.first_try += 1;
        }
        stats.retries += u64::from(attempt - 1);
        stats.max_separator = stats.max_separator.max(s.len());
        let children = spawn_subframes(&mut memo, &frame, &s, &parts)?;
        for sv in s.iter().copied().filter(|v| frame.a.binary_search(v).is_ok()) {
            for &a in &frame.a {
                if a != sv && memo.query(sv, a)? == 1 && (s.binary_search(&a).is_err() || sv < a) {
                    edges.push((sv, a));
                }
            }
        }
        tally.mark("spawn", &memo);
        for child in children.into_iter().rev() {
            if child.ring_size() as u64 > frame.ring_size() as u64 + growth {
                stats.ring_growth_violations += 1;
            }
            stack.push((child, depth + 1));
        }
    }
    drop(memo);
    let mut res = ReconstructionResult::new("treelength", edges, tally, Some(opts.seed));
    res.retries = stats.retries;
    Ok((res, stats))
}
