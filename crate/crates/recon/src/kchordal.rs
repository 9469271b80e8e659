//! k-chordal reconstruction: layered separator descent with separators kept far above the frontier.

use crate::decomposition::{find_balanced_bag_indexed, layering_tree, set_diameter, BagIndex, TreeDecomposition, DEFAULT_LAYERING_BUDGET};
use crate::graph::{Graph, Vertex};
use crate::oracle::{DistanceQuery, MemoQuery};
use crate::result::{ceil_log2, PhaseTally, ReconError, ReconstructionResult};
use std::collections::VecDeque;

/// Number of leading layers reconstructed by brute force: `2Δk`.
pub fn bootstrap_depth(delta: usize, k: usize) -> usize {
    2 * delta * k
}

/// Required gap between a separator and the frontier layer for a separator of diameter `d`.
pub fn separator_margin(delta: usize, k: usize, d: usize) -> usize {
    delta.max(4) * k.max(d)
}

/// Radius of the within-layer candidate ball: `2Δk + 2`.
pub fn within_layer_radius(delta: usize, k: usize) -> usize {
    2 * delta * k + 2
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KChordalStats {
    pub bootstrap_layers: usize,
    /// Active sets small enough to query directly.
    pub small_sets: u64,
    /// Descents abandoned because the balanced bag sat too close to the frontier.
    pub margin_fallbacks: u64,
    pub descent_steps: u64,
    pub max_steps: usize,
    pub halving_violations: u64,
    pub max_separator_diameter: u32,
    pub within_layer_queries: u64,
}

enum NodeKind {
    Brute,
    Split { bag: Vec<usize>, comps: Vec<Vec<usize>>, children: Vec<Option<usize>> },
}

struct Node {
    a: Vec<usize>,
    kind: NodeKind,
    margin_fallback: bool,
}

struct LayerView<'a> {
    g1: Graph,
    td: TreeDecomposition,
    index: BagIndex,
    nodes: Vec<Node>,
    layer_of: &'a [u32],
    known: &'a [Vertex],
    frontier: usize,
    delta: usize,
    k: usize,
    small: usize,
    max_diam: u32,
}

impl LayerView<'_> {
    fn node(&mut self, a: Vec<usize>) -> usize {
        let mut margin_fallback = false;
        let kind = if a.len() <= self.small {
            NodeKind::Brute
        } else {
            let bb = find_balanced_bag_indexed(&self.td, &self.index, &self.g1, &a);
            let bag = self.td.bag(bb.bag).to_vec();
            let diam = set_diameter(&self.g1, &bag);
            let top = bag.iter().map(|&x| self.layer_of[self.known[x]] as usize).max().unwrap_or(0);
            if top + separator_margin(self.delta, self.k, diam as usize) < self.frontier {
                self.max_diam = self.max_diam.max(diam);
                let children = vec![None; bb.components.len()];
                NodeKind::Split { bag, comps: bb.components, children }
            } else {
                margin_fallback = true;
                NodeKind::Brute
            }
        };
        self.nodes.push(Node { a, kind, margin_fallback });
        self.nodes.len() - 1
    }

    fn child(&mut self, node: usize, c: usize) -> usize {
        let a = match &self.nodes[node].kind {
            NodeKind::Split { comps, children, .. } => {
                if let Some(x) = children[c] {
                    return x;
                }
                comps[c].clone()
            }
            NodeKind::Brute => unreachable!("brute nodes have no children"),
        };
        let x = self.node(a);
        if let NodeKind::Split { children, .. } = &mut self.nodes[node].kind {
            children[c] = Some(x);
        }
        x
    }
}

/// Reconstructs a hidden k-chordal graph of maximum degree at most `delta`.
pub fn reconstruct_kchordal(o: &mut dyn DistanceQuery, delta: usize, k: usize) -> Result<(ReconstructionResult, KChordalStats), ReconError> {
    if k < 3 {
        return Err(ReconError::Params(format!("k-chordal reconstruction needs k >= 3, got {k}")));
    }
    let n = o.n();
    let mut tally = PhaseTally::start(o);
    let mut stats = KChordalStats::default();
    let small = ceil_log2(n) as usize;
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
    let radius = within_layer_radius(delta, k);
    for i in 1..=depth {
        let mut lower: Vec<Vec<Vertex>> = Vec::with_capacity(layers[i].len());
        if i <= bootstrap_depth(delta, k) {
            stats.bootstrap_layers += 1;
            for &u in &layers[i] {
                let mut found = Vec::new();
                for &x in &layers[i - 1] {
                    if memo.query(u, x)? == 1 {
                        found.push(x);
                    }
                }
                lower.push(found);
            }
            tally.mark("bootstrap", &memo);
        } else {
            for (li, &v) in known.iter().enumerate() {
                pos[v] = li;
            }
            let local_edges: Vec<(usize, usize)> = known
                .iter()
                .flat_map(|&v| adj[v].iter().filter(move |&&w| v < w).map(move |&w| (v, w)))
                .map(|(v, w)| (pos[v], pos[w]))
                .collect();
            let g1 = Graph::from_edges(known.len(), &local_edges).map_err(|e| ReconError::Invariant(e.to_string()))?;
            let td = layering_tree(&g1, pos[v0], DEFAULT_LAYERING_BUDGET).map_err(|e| ReconError::Invariant(e.to_string()))?;
            let index = BagIndex::new(&td, g1.n());
            let mut view = LayerView {
                g1,
                td,
                index,
                nodes: Vec::new(),
                layer_of: &dist,
                known: &known,
                frontier: i,
                delta,
                k,
                small,
                max_diam: 0,
            };
            let root = view.node((0..known.len()).collect());
            for &u in &layers[i] {
                lower.push(descend(&mut memo, &mut view, root, u, i, &mut stats)?);
            }
            stats.max_separator_diameter = stats.max_separator_diameter.max(view.max_diam);
            tally.mark("parent_search", &memo);
        }
        for (&u, low) in layers[i].iter().zip(&lower) {
            if low.is_empty() {
                return Err(ReconError::Inconsistent(format!("vertex {u} has no neighbour one layer up")));
            }
            for &x in low {
                adj[u].push(x);
                adj[x].push(u);
                edges.push((x, u));
            }
        }
        let before = memo.queries();
        let inner = within_layer(&mut memo, &layers[i], &adj, &dist, i, radius)?;
        stats.within_layer_queries += memo.queries() - before;
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
    Ok((ReconstructionResult::new("kchordal", edges, tally, None), stats))
}

fn descend(
    memo: &mut MemoQuery<'_>,
    view: &mut LayerView<'_>,
    root: usize,
    u: Vertex,
    i: usize,
    stats: &mut KChordalStats,
) -> Result<Vec<Vertex>, ReconError> {
    let mut node = root;
    let mut steps = 0;
    let found = loop {
        let nd = &view.nodes[node];
        let (bag, comps) = match &nd.kind {
            NodeKind::Brute => {
                if nd.margin_fallback {
                    stats.margin_fallbacks += 1;
                } else {
                    stats.small_sets += 1;
                }
                let mut found = Vec::new();
                for &x in &nd.a {
                    let xv = view.known[x];
                    if view.layer_of[xv] as usize == i - 1 && memo.query(u, xv)? == 1 {
                        found.push(xv);
                    }
                }
                break found;
            }
            NodeKind::Split { bag, comps, .. } => (bag, comps),
        };
        let mut cand: Vec<usize> = bag.iter().flat_map(|&s| view.g1.neighbors(s).iter().copied()).collect();
        cand.sort_unstable();
        cand.dedup();
        let mut best: Option<(u32, Vertex, usize)> = None;
        for y in cand {
            if bag.binary_search(&y).is_ok() || nd.a.binary_search(&y).is_err() {
                continue;
            }
            let d = memo.query(u, view.known[y])?;
            if best.map_or(true, |(bd, bv, _)| (d, view.known[y]) < (bd, bv)) {
                best = Some((d, view.known[y], y));
            }
        }
        let Some((_, _, x)) = best else {
            return Err(ReconError::Invariant("separator has no neighbour in the active set".into()));
        };
        let c = comps
            .iter()
            .position(|comp| comp.binary_search(&x).is_ok())
            .ok_or_else(|| ReconError::Invariant("descent target outside every component".into()))?;
        let size = nd.a.len();
        steps += 1;
        stats.descent_steps += 1;
        node = view.child(node, c);
        if 2 * view.nodes[node].a.len() > size {
            stats.halving_violations += 1;
        }
    };
    stats.max_steps = stats.max_steps.max(steps);
    Ok(found)
}

/// Queries `u` against the layer-`i` vertices within `radius` of it in the graph known so far.
fn within_layer(
    o: &mut dyn DistanceQuery,
    layer: &[Vertex],
    adj: &[Vec<Vertex>],
    dist: &[u32],
    i: usize,
    radius: usize,
) -> Result<Vec<(Vertex, Vertex)>, ReconError> {
    let n = adj.len();
    let mut seen = vec![u32::MAX; n];
    let mut out = Vec::new();
    for &u in layer {
        // layer-i vertices only connect through lower layers until E_{i,i} is known
        let mut touched = vec![u];
        seen[u] = 0;
        let mut queue = VecDeque::from([u]);
        let mut cand = Vec::new();
        while let Some(x) = queue.pop_front() {
            if seen[x] as usize == radius {
                continue;
            }
            for &w in &adj[x] {
                if seen[w] == u32::MAX {
                    seen[w] = seen[x] + 1;
                    touched.push(w);
                    if dist[w] as usize == i {
                        if w > u {
                            cand.push(w);
                        }
                    } else {
                        queue.push_back(w);
                    }
                }
            }
        }
        for &t in &touched {
            seen[t] = u32::MAX;
        }
        cand.sort_unstable();
        for v in cand {
            if o.query(u, v)? == 1 {
                out.push((u, v));
            }
        }
    }
    Ok(out)
}
