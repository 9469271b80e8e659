//! Chordal reconstruction by clique-separator descent, one BFS layer at a time.

use crate::decomposition::{clique_tree_from, find_balanced_bag_indexed, BagIndex, TreeDecomposition};
use crate::graph::{Graph, Vertex};
use crate::oracle::{DistanceQuery, MemoQuery};
use crate::result::{ceil_log2, PhaseTally, ReconError, ReconstructionResult};

/// `⌈4Δ log2 n⌉`: components at most this large are queried directly.
pub fn chordal_threshold(n: usize, delta: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    (4.0 * delta as f64 * (n as f64).log2()).ceil() as usize
}

/// Per-vertex query allowance `2Δ⌈log n⌉ + max(⌈4Δ log n⌉, Δ(Δ+1))`.
pub fn chordal_vertex_budget(n: usize, delta: usize) -> u64 {
    (2 * delta * ceil_log2(n) as usize + chordal_threshold(n, delta).max(delta * (delta + 1))) as u64
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChordalStats {
    pub case_a: u64,
    pub case_b: u64,
    pub case_c_steps: u64,
    /// Case-(c) steps where no vertex one closer than the separator was found next to `w`.
    pub fallbacks: u64,
    /// Case-(c) separator vertices that turned out to have a neighbour in the current layer.
    pub claim10_violations: u64,
    pub budget_violations: u64,
    /// Descent steps that failed to halve the active set.
    pub halving_violations: u64,
    pub max_steps: usize,
    pub max_vertex_queries: u64,
    pub within_layer_pairs: u64,
}

struct SepNode {
    a: Vec<usize>,
    bag: Vec<usize>,
    comps: Vec<Vec<usize>>,
    children: Vec<Option<usize>>,
}

/// Clique tree of one `G[L_{<=i-1}]` with its lazily grown separator hierarchy; local ids.
struct LayerView {
    g1: Graph,
    td: TreeDecomposition,
    index: BagIndex,
    nodes: Vec<SepNode>,
    threshold: usize,
}

impl LayerView {
    fn node(&mut self, a: Vec<usize>) -> usize {
        let (bag, comps) = if a.len() <= self.threshold {
            (Vec::new(), Vec::new())
        } else {
            let bb = find_balanced_bag_indexed(&self.td, &self.index, &self.g1, &a);
            (self.td.bag(bb.bag).to_vec(), bb.components)
        };
        let children = vec![None; comps.len()];
        self.nodes.push(SepNode { a, bag, comps, children });
        self.nodes.len() - 1
    }

    fn child(&mut self, node: usize, c: usize) -> usize {
        if let Some(x) = self.nodes[node].children[c] {
            return x;
        }
        let a = self.nodes[node].comps[c].clone();
        let x = self.node(a);
        self.nodes[node].children[c] = Some(x);
        x
    }
}

/// Reconstructs a hidden chordal graph rooted at vertex 0.
pub fn reconstruct_chordal(o: &mut dyn DistanceQuery, delta: usize) -> Result<(ReconstructionResult, ChordalStats), ReconError> {
    let n = o.n();
    let mut tally = PhaseTally::start(o);
    let mut stats = ChordalStats::default();
    let threshold = chordal_threshold(n, delta);
    let budget = chordal_vertex_budget(n, delta);
    let mut memo = MemoQuery::new(o);
    let v0 = 0;
    let mut dist = Vec::with_capacity(n);
    for v in 0..n {
        dist.push(memo.query(v0, v)?);
    }
    tally.mark("layering", &memo);
    let depth = dist.iter().copied().max().unwrap_or(0) as usize;
    let mut layers: Vec<Vec<Vertex>> = vec![Vec::new(); depth + 1];
    for v in 0..n {
        layers[dist[v] as usize].push(v);
    }
    if layers.iter().any(Vec::is_empty) {
        return Err(ReconError::Inconsistent("a BFS layer is empty".into()));
    }
    let mut adj: Vec<Vec<Vertex>> = vec![Vec::new(); n];
    let mut edges = Vec::new();
    let mut known: Vec<Vertex> = vec![v0];
    let mut pos = vec![usize::MAX; n];
    for i in 1..=depth {
        // local copy of G[L_{<=i-1}]
        for (li, &v) in known.iter().enumerate() {
            pos[v] = li;
        }
        let local_edges: Vec<(usize, usize)> =
            known.iter().flat_map(|&v| adj[v].iter().filter(move |&&w| v < w).map(move |&w| (v, w))).map(|(v, w)| (pos[v], pos[w])).collect();
        let g1 = Graph::from_edges(known.len(), &local_edges).map_err(|e| ReconError::Invariant(e.to_string()))?;
        let td = clique_tree_from(&g1, pos[v0]).map_err(|e| ReconError::Inconsistent(format!("layer {i}: {e}")))?;
        let index = BagIndex::new(&td, g1.n());
        let mut view = LayerView { g1, td, index, nodes: Vec::new(), threshold };
        let root = view.node((0..known.len()).collect());
        let mut used_sep: Vec<bool> = vec![false; known.len()];
        let mut lower: Vec<Vec<Vertex>> = Vec::with_capacity(layers[i].len());
        for &u in &layers[i] {
            let before = memo.queries();
            let mut found = Vec::new();
            let mut node = root;
            let mut steps = 0;
            loop {
                if view.nodes[node].bag.is_empty() {
                    stats.case_a += 1;
                    for &x in &view.nodes[node].a {
                        let xv = known[x];
                        if dist[xv] as usize == i - 1 && memo.query(u, xv)? == 1 {
                            found.push(xv);
                        }
                    }
                    break;
                }
                let bag = view.nodes[node].bag.clone();
                let mut best: Option<(u32, Vertex, usize)> = None;
                for &k in &bag {
                    let d = memo.query(u, known[k])?;
                    if best.map_or(true, |(bd, bv, _)| (d, known[k]) < (bd, bv)) {
                        best = Some((d, known[k], k));
                    }
                }
                let (m, _, w) = best.expect("bags are nonempty");
                if m == 1 {
                    stats.case_b += 1;
                    let mut cand: Vec<usize> = bag.iter().flat_map(|&k| std::iter::once(k).chain(view.g1.neighbors(k).iter().copied())).collect();
                    cand.sort_unstable();
                    cand.dedup();
                    for x in cand {
                        let xv = known[x];
                        if dist[xv] as usize == i - 1 && memo.query(u, xv)? == 1 {
                            found.push(xv);
                        }
                    }
                    break;
                }
                stats.case_c_steps += 1;
                steps += 1;
                for &k in &bag {
                    used_sep[k] = true;
                }
                let in_a = |x: usize, a: &[usize]| a.binary_search(&x).is_ok();
                let mut x_next: Option<(Vertex, usize)> = None;
                let nw: Vec<usize> = view.g1.neighbors(w).iter().copied().filter(|y| !bag.contains(y)).collect();
                for &y in &nw {
                    let d = memo.query(u, known[y])?;
                    if d + 1 == m && in_a(y, &view.nodes[node].a) && x_next.map_or(true, |(bv, _)| known[y] < bv) {
                        x_next = Some((known[y], y));
                    }
                }
                if x_next.is_none() {
                    stats.fallbacks += 1;
                    let mut best: Option<(u32, Vertex, usize)> = None;
                    for &k in &bag {
                        for &y in view.g1.neighbors(k) {
                            if bag.contains(&y) || !in_a(y, &view.nodes[node].a) {
                                continue;
                            }
                            let d = memo.query(u, known[y])?;
                            if best.map_or(true, |(bd, bv, _)| (d, known[y]) < (bd, bv)) {
                                best = Some((d, known[y], y));
                            }
                        }
                    }
                    x_next = best.map(|(_, v, y)| (v, y));
                }
                let Some((_, x)) = x_next else {
                    return Err(ReconError::Inconsistent(format!("separator of vertex {u} has no neighbour outside it")));
                };
                let c = view.nodes[node]
                    .comps
                    .iter()
                    .position(|comp| comp.binary_search(&x).is_ok())
                    .ok_or_else(|| ReconError::Invariant("descent target outside every component".into()))?;
                let size = view.nodes[node].a.len();
                node = view.child(node, c);
                if 2 * view.nodes[node].a.len() > size {
                    stats.halving_violations += 1;
                }
            }
            if found.is_empty() {
                return Err(ReconError::Inconsistent(format!("vertex {u} has no neighbour one layer up")));
            }
            let spent = memo.queries() - before;
            stats.max_vertex_queries = stats.max_vertex_queries.max(spent);
            stats.max_steps = stats.max_steps.max(steps);
            if spent > budget {
                stats.budget_violations += 1;
            }
            lower.push(found);
        }
        for (&u, low) in layers[i].iter().zip(&lower) {
            for &x in low {
                adj[u].push(x);
                adj[x].push(u);
                edges.push((x, u));
            }
        }
        for (li, &used) in used_sep.iter().enumerate() {
            if used && adj[known[li]].iter().any(|&y| dist[y] as usize == i) {
                stats.claim10_violations += 1;
            }
        }
        tally.mark("parent_search", &memo);
        let inner = within_layer(&mut memo, &layers[i], &lower, &adj, &dist, i, &mut stats)?;
        for (u, v) in inner {
            adj[u].push(v);
            adj[v].push(u);
            edges.push((u, v));
        }
        tally.mark("within_layer", &memo);
        known.extend_from_slice(&layers[i]);
        known.sort_unstable();
    }
    drop(memo);
    Ok((ReconstructionResult::new("chordal", edges, tally, None), stats))
}

/// Queries pairs of the layer whose lower neighbourhoods are nested.
fn within_layer(
    o: &mut dyn DistanceQuery,
    layer: &[Vertex],
    lower: &[Vec<Vertex>],
    adj: &[Vec<Vertex>],
    dist: &[u32],
    i: usize,
    stats: &mut ChordalStats,
) -> Result<Vec<(Vertex, Vertex)>, ReconError> {
    let mut slot = std::collections::HashMap::with_capacity(layer.len());
    for (s, &u) in layer.iter().enumerate() {
        slot.insert(u, s);
    }
    let mut sorted: Vec<Vec<Vertex>> = lower.to_vec();
    for l in &mut sorted {
        l.sort_unstable();
    }
    let subset = |a: &[Vertex], b: &[Vertex]| a.iter().all(|x| b.binary_search(x).is_ok());
    let mut out = Vec::new();
    for (s, &u) in layer.iter().enumerate() {
        let mut cand: Vec<Vertex> =
            sorted[s].iter().flat_map(|&w| adj[w].iter().copied()).filter(|&v| dist[v] as usize == i && v > u).collect();
        cand.sort_unstable();
        cand.dedup();
        for v in cand {
            let t = slot[&v];
            if subset(&sorted[s], &sorted[t]) || subset(&sorted[t], &sorted[s]) {
                stats.within_layer_pairs += 1;
                if o.query(u, v)? == 1 {
                    out.push((u, v));
                }
            }
        }
    }
    Ok(out)
}
