//! Tree reconstruction by layered centroid descent, deterministic or with the
//! randomized size-weighted query order.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::generators::rng_for;
use crate::graph::{Graph, Vertex};
use crate::oracle::DistanceQuery;
use crate::result::{PhaseTally, ReconError, ReconstructionResult};

/// `Δ n log_Δ n + (Δ+2) n`; for `Δ < 2` the logarithmic term is dropped.
pub fn tree_bound(n: usize, delta: usize) -> f64 {
    let (n, d) = (n as f64, delta as f64);
    if delta < 2 || n <= 1.0 {
        return (d + 2.0) * n;
    }
    d * n * n.ln() / d.ln() + (d + 2.0) * n
}

/// Per-vertex budget `Δ log_Δ s + Δ + 1`.
pub fn parent_search_bound(s: usize, delta: usize) -> f64 {
    let d = delta.max(2) as f64;
    d * (s.max(1) as f64).ln() / d.ln() + d + 1.0
}

#[derive(Debug, Clone, Default)]
pub struct TreeOptions {
    /// Seed for the randomized neighbour order; `None` orders by decreasing size.
    pub randomized: Option<u64>,
    /// Keep a descent trace for every vertex.
    pub trace: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DescentStep {
    pub size: usize,
    pub queries: u32,
    /// Size of the component descended into; 0 when the step ended the search.
    pub next_size: usize,
    /// Component sizes around the centroid in the order they were queried; empty for brute-force steps.
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexTrace {
    pub vertex: Vertex,
    pub tree_size: usize,
    pub queries: u32,
    pub steps: Vec<DescentStep>,
}

#[derive(Debug, Clone, Default)]
pub struct TreeStats {
    pub traces: Vec<VertexTrace>,
    /// Vertices whose parent search exceeded `Δ log_Δ s + Δ + 1`.
    pub over_budget: usize,
}

/// Component-size order: `X_i ~ U[0, a_i]`, sorted descending; re-drawn on exact ties.
pub fn random_component_order<R: Rng>(sizes: &[usize], rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..sizes.len()).collect();
    if sizes.len() <= 1 {
        return perm;
    }
    loop {
        let x: Vec<f64> = sizes.iter().map(|&a| rng.gen::<f64>() * a as f64).collect();
        perm.sort_by(|&i, &j| x[j].total_cmp(&x[i]));
        if perm.windows(2).all(|w| x[w[0]] != x[w[1]]) {
            return perm;
        }
    }
}

struct Node {
    size: usize,
    centroid: Vertex,
    /// Present for components small enough to brute-force.
    members: Option<Vec<Vertex>>,
    /// Neighbours of the centroid with their component sizes, largest first.
    nbrs: Vec<(Vertex, usize)>,
    children: Vec<Option<usize>>,
}

/// Lazily built centroid hierarchy over a fixed tree.
struct Hierarchy<'a> {
    adj: &'a [Vec<Vertex>],
    brute_limit: usize,
    marked: Vec<bool>,
    stamp: Vec<u32>,
    epoch: u32,
    par: Vec<Vertex>,
    sub: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> Hierarchy<'a> {
    fn new(adj: &'a [Vec<Vertex>], brute_limit: usize) -> Self {
        let n = adj.len();
        Hierarchy {
            adj,
            brute_limit,
            marked: vec![false; n],
            stamp: vec![0; n],
            epoch: 0,
            par: vec![usize::MAX; n],
            sub: vec![0; n],
            nodes: Vec::new(),
        }
    }

    /// Builds the node for the component containing `start` once marked centroids are removed.
    fn build(&mut self, start: Vertex) -> usize {
        self.epoch += 1;
        let ep = self.epoch;
        let mut comp = vec![start];
        self.stamp[start] = ep;
        self.par[start] = usize::MAX;
        let mut i = 0;
        while i < comp.len() {
            let u = comp[i];
            i += 1;
            for &w in &self.adj[u] {
                if self.stamp[w] != ep && !self.marked[w] {
                    self.stamp[w] = ep;
                    self.par[w] = u;
                    comp.push(w);
                }
            }
        }
        let size = comp.len();
        if size <= self.brute_limit {
            comp.sort_unstable();
            self.nodes.push(Node { size, centroid: comp[0], members: Some(comp), nbrs: Vec::new(), children: Vec::new() });
            return self.nodes.len() - 1;
        }
        for &u in &comp {
            self.sub[u] = 1;
        }
        for &u in comp.iter().rev() {
            if self.par[u] != usize::MAX {
                self.sub[self.par[u]] += self.sub[u];
            }
        }
        let half = size / 2;
        let centroid = comp
            .iter()
            .copied()
            .filter(|&c| {
                let up = size - self.sub[c];
                up <= half && self.adj[c].iter().all(|&w| self.stamp[w] != ep || self.marked[w] || self.par[w] != c || self.sub[w] <= half)
            })
            .min()
            .expect("every tree has a centroid");
        let mut nbrs: Vec<(Vertex, usize)> = self.adj[centroid]
            .iter()
            .copied()
            .filter(|&w| self.stamp[w] == ep && !self.marked[w])
            .map(|w| (w, if self.par[w] == centroid { self.sub[w] } else { size - self.sub[centroid] }))
            .collect();
        nbrs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        self.marked[centroid] = true;
        let children = vec![None; nbrs.len()];
        self.nodes.push(Node { size, centroid, members: None, nbrs, children });
        self.nodes.len() - 1
    }

    fn child(&mut self, node: usize, j: usize) -> usize {
        if let Some(c) = self.nodes[node].children[j] {
            return c;
        }
        let w = self.nodes[node].nbrs[j].0;
        let c = self.build(w);
        self.nodes[node].children[j] = Some(c);
        c
    }
}

/// Vertex whose removal leaves components of size at most `⌊s/2⌋`; smallest id on ties.
pub fn centroid(tree: &Graph, members: &[Vertex]) -> Vertex {
    assert!(!members.is_empty(), "centroid of an empty set");
    let mut inside = vec![false; tree.n()];
    for &v in members {
        inside[v] = true;
    }
    let adj: Vec<Vec<Vertex>> =
        (0..tree.n()).map(|v| if inside[v] { tree.neighbors(v).iter().copied().filter(|&w| inside[w]).collect() } else { Vec::new() }).collect();
    let mut h = Hierarchy::new(&adj, 0);
    let node = h.build(members[0]);
    assert_eq!(h.nodes[node].size, members.len(), "centroid needs a connected vertex set");
    h.nodes[node].centroid
}

struct Searcher<'a, 'q> {
    h: Hierarchy<'a>,
    root: usize,
    o: &'q mut dyn DistanceQuery,
    order_rng: Option<ChaCha8Rng>,
}

impl Searcher<'_, '_> {
    fn parent(&mut self, v: Vertex, trace: Option<&mut Vec<DescentStep>>) -> Result<(Vertex, u32), ReconError> {
        let mut node = self.root;
        let mut total = 0u32;
        let mut steps = Vec::new();
        let keep = trace.is_some();
        let found = loop {
            let size = self.h.nodes[node].size;
            if let Some(members) = &self.h.nodes[node].members {
                let mut spent = 0;
                let mut hit = *members.last().expect("nonempty component");
                for &m in &members[..members.len() - 1] {
                    spent += 1;
                    if self.o.query(v, m)? == 1 {
                        hit = m;
                        break;
                    }
                }
                total += spent;
                if keep {
                    steps.push(DescentStep { size, queries: spent, next_size: 0, sizes: Vec::new() });
                }
                break hit;
            }
            let sizes: Vec<usize> = self.h.nodes[node].nbrs.iter().map(|x| x.1).collect();
            let order: Vec<usize> = match &mut self.order_rng {
                Some(rng) => random_component_order(&sizes, rng),
                None => (0..sizes.len()).collect(),
            };
            let mut spent = 0;
            let mut first: Option<(usize, u32)> = None;
            let mut equal = 0;
            let mut chosen = None;
            for &j in &order {
                let w = self.h.nodes[node].nbrs[j].0;
                let d = self.o.query(v, w)?;
                spent += 1;
                if d == 0 {
                    return Err(ReconError::Inconsistent(format!("vertex {v} at distance 0 from {w}")));
                }
                match first {
                    None => {
                        first = Some((j, d));
                        equal = 1;
                    }
                    Some((_, d0)) if d0 == d => equal += 1,
                    Some((j0, d0)) => {
                        if d < d0 {
                            chosen = Some(j);
                        } else if equal == 1 {
                            chosen = Some(j0);
                        } else {
                            return Err(ReconError::Inconsistent(format!("several centroid neighbours closest to {v}")));
                        }
                        break;
                    }
                }
            }
            total += spent;
            let queried: Vec<usize> = if keep { order.iter().map(|&j| sizes[j]).collect() } else { Vec::new() };
            match chosen {
                None => {
                    if keep {
                        steps.push(DescentStep { size, queries: spent, next_size: 0, sizes: queried });
                    }
                    break self.h.nodes[node].centroid;
                }
                Some(j) => {
                    if keep {
                        steps.push(DescentStep { size, queries: spent, next_size: sizes[j], sizes: queried });
                    }
                    node = self.h.child(node, j);
                }
            }
        };
        if let Some(t) = trace {
            *t = steps;
        }
        Ok((found, total))
    }
}

/// Parent of `v` inside an already reconstructed tree, one layer up. The
/// oracle's distances from `v` must equal one plus tree distances from the parent.
pub fn parent_search(o: &mut dyn DistanceQuery, v: Vertex, tree: &Graph, delta: usize) -> Result<(Vertex, VertexTrace), ReconError> {
    let adj: Vec<Vec<Vertex>> = (0..tree.n()).map(|u| tree.neighbors(u).to_vec()).collect();
    let mut h = Hierarchy::new(&adj, delta + 1);
    let root = h.build(0);
    let mut s = Searcher { h, root, o, order_rng: None };
    let mut steps = Vec::new();
    let (p, queries) = s.parent(v, Some(&mut steps))?;
    Ok((p, VertexTrace { vertex: v, tree_size: tree.n(), queries, steps }))
}

/// Reconstructs a hidden tree rooted at vertex 0, one BFS layer at a time.
pub fn reconstruct_tree(o: &mut dyn DistanceQuery, delta: usize, opts: &TreeOptions) -> Result<(ReconstructionResult, TreeStats), ReconError> {
    let n = o.n();
    let mut tally = PhaseTally::start(o);
    let v0 = 0;
    let mut dist = Vec::with_capacity(n);
    for v in 0..n {
        dist.push(o.query(v0, v)?);
    }
    tally.mark("layering", o);
    let mut order: Vec<Vertex> = (0..n).collect();
    order.sort_by_key(|&v| (dist[v], v));
    if n > 1 && dist[order[1]] != 1 {
        return Err(ReconError::Inconsistent("no vertex at distance 1 from the root".into()));
    }
    let mut adj: Vec<Vec<Vertex>> = vec![Vec::new(); n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut stats = TreeStats::default();
    let mut rng = opts.randomized.map(rng_for);
    let mut start = 1;
    let mut known = 1;
    while start < n {
        let layer = dist[order[start]];
        let end = start + order[start..].iter().take_while(|&&v| dist[v] == layer).count();
        if dist[order[start - 1]] + 1 != layer {
            return Err(ReconError::Inconsistent(format!("layer {} is empty", layer - 1)));
        }
        let found = {
            let h = Hierarchy::new(&adj, delta + 1);
            let mut s = Searcher { h, root: 0, o: &mut *o, order_rng: rng.take() };
            s.root = s.h.build(v0);
            let mut found = Vec::with_capacity(end - start);
            for &v in &order[start..end] {
                let mut steps = Vec::new();
                let (p, q) = s.parent(v, opts.trace.then_some(&mut steps))?;
                if q as f64 > parent_search_bound(known, delta) {
                    stats.over_budget += 1;
                }
                if opts.trace {
                    stats.traces.push(VertexTrace { vertex: v, tree_size: known, queries: q, steps });
                }
                found.push((v, p));
            }
            rng = s.order_rng.take();
            found
        };
        for (v, p) in found {
            if dist[p] + 1 != layer {
                return Err(ReconError::Inconsistent(format!("parent {p} of {v} is not one layer up")));
            }
            adj[v].push(p);
            adj[p].push(v);
            edges.push((p, v));
        }
        known = end;
        start = end;
    }
    tally.mark("parent_search", o);
    let result = ReconstructionResult::new(if opts.randomized.is_some() { "tree-random" } else { "tree" }, edges, tally, opts.randomized);
    Ok((result, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::gen_tree;
    use crate::oracle::DistanceOracle;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn path(n: usize) -> Graph {
        let e: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::from_edges(n, &e).unwrap()
    }

    fn star(leaves: usize) -> Graph {
        let e: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
        Graph::from_edges(leaves + 1, &e).unwrap()
    }

    /// Independent centroid check: all components of T - c have size <= s/2.
    fn is_centroid(t: &Graph, c: Vertex) -> bool {
        let n = t.n();
        let mut seen = vec![false; n];
        seen[c] = true;
        for &w in t.neighbors(c) {
            let mut stack = vec![w];
            seen[w] = true;
            let mut size = 0;
            while let Some(u) = stack.pop() {
                size += 1;
                for &x in t.neighbors(u) {
                    if !seen[x] {
                        seen[x] = true;
                        stack.push(x);
                    }
                }
            }
            if size > n / 2 {
                return false;
            }
        }
        true
    }

    fn prufer_tree(seq: &[usize], n: usize) -> Graph {
        let mut degree = vec![1usize; n];
        for &x in seq {
            degree[x] += 1;
        }
        let mut edges = Vec::new();
        for &x in seq {
            let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
            edges.push((leaf, x));
            degree[leaf] -= 1;
            degree[x] -= 1;
        }
        let rest: Vec<_> = (0..n).filter(|&v| degree[v] == 1).collect();
        edges.push((rest[0], rest[1]));
        Graph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(centroid(&path(3), &[0, 1, 2]), 1);
        assert_eq!(centroid(&star(5), &[0, 1, 2, 3, 4, 5]), 0);
        // P4 has two centroids; the smaller id wins
        assert_eq!(centroid(&path(4), &[0, 1, 2, 3]), 1);
    }

    #[test]
    fn centroid_exhaustive_small_trees() {
        for n in 3..=7usize {
            let total = n.pow(n as u32 - 2);
            for code in 0..total {
                let mut seq = Vec::new();
                let mut c = code;
                for _ in 0..n - 2 {
                    seq.push(c % n);
                    c /= n;
                }
                let t = prufer_tree(&seq, n);
                let all: Vec<_> = (0..n).collect();
                let c = centroid(&t, &all);
                assert!(is_centroid(&t, c));
                let smallest = (0..n).find(|&v| is_centroid(&t, v)).unwrap();
                assert_eq!(c, smallest);
            }
        }
        for seed in 0..300 {
            let t = gen_tree(8 + seed as usize % 3, 4, seed).unwrap();
            let all: Vec<_> = (0..t.n()).collect();
            assert!(is_centroid(&t, centroid(&t, &all)));
        }
    }

    #[test]
    fn star_from_center() {
        let g = star(4);
        let mut o = DistanceOracle::new(&g);
        let (r, _) = reconstruct_tree(&mut o, 4, &TreeOptions::default()).unwrap();
        assert!(r.matches(&g));
        assert_eq!(r.queries, 5);
        assert!((r.queries as f64) <= tree_bound(5, 4));
    }

    #[test]
    fn path_from_endpoint_meets_bound() {
        let g = path(8);
        let mut o = DistanceOracle::new(&g);
        let (r, _) = reconstruct_tree(&mut o, 2, &TreeOptions::default()).unwrap();
        assert!(r.matches(&g));
        assert!((r.queries as f64) <= 80.0, "{}", r.queries);
        assert_eq!(tree_bound(8, 2), 80.0);
        assert_eq!(r.phase("layering"), Some(8));
    }

    #[test]
    fn parent_budget_values() {
        assert_eq!(parent_search_bound(8, 2), 9.0);
        assert_eq!(parent_search_bound(3, 2), 2.0 * 3f64.log2() + 3.0);
    }

    #[test]
    fn small_tree_is_brute_forced() {
        // reconstructed tree on three vertices, Δ = 2: brute force over members
        let tree = path(3);
        let hidden = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let mut o = DistanceOracle::new(&hidden);
        let (p, trace) = parent_search(&mut o, 3, &tree, 2).unwrap();
        assert_eq!(p, 2);
        assert!(trace.queries <= 3);
        assert!(trace.steps[0].sizes.is_empty());
    }

    #[test]
    fn centroid_is_parent_without_querying_it() {
        // star with 5 leaves; new vertex 6 hangs off the centre 0
        let tree = star(5);
        let mut e: Vec<_> = (1..=5).map(|i| (0, i)).collect();
        e.push((0, 6));
        let hidden = Graph::from_edges(7, &e).unwrap();
        let mut o = DistanceOracle::new(&hidden).with_transcript(100);
        let (p, trace) = parent_search(&mut o, 6, &tree, 3).unwrap();
        assert_eq!(p, 0);
        assert_eq!(trace.queries, 5);
        assert!(o.transcript().unwrap().entries().all(|t| t.args[1] != 0));
    }

    #[test]
    fn random_order_singleton_and_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(random_component_order(&[7], &mut rng), vec![0]);
        let mut first = 0;
        for _ in 0..20_000 {
            if random_component_order(&[1, 1], &mut rng)[0] == 0 {
                first += 1;
            }
        }
        let frac = first as f64 / 20_000.0;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn descent_contracts() {
        for seed in 0..40 {
            let g = gen_tree(300, 2 + seed as usize % 6, seed).unwrap();
            let mut o = DistanceOracle::new(&g);
            let delta = 2 + seed as usize % 6;
            let (r, stats) = reconstruct_tree(&mut o, delta, &TreeOptions { randomized: None, trace: true }).unwrap();
            assert!(r.matches(&g));
            for t in &stats.traces {
                for s in &t.steps {
                    if s.next_size > 0 {
                        assert!(s.next_size * (s.queries as usize) <= s.size, "{s:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn non_tree_fails_verification() {
        let c4 = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let mut o = DistanceOracle::new(&c4);
        match reconstruct_tree(&mut o, 2, &TreeOptions::default()) {
            Ok((r, _)) => assert!(!r.matches(&c4)),
            Err(e) => assert!(matches!(e, ReconError::Inconsistent(_))),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn exact_and_within_bound(seed in any::<u64>(), n in 1usize..400, delta in 2usize..9, randomized in any::<bool>()) {
            let g = gen_tree(n, delta, seed).unwrap();
            let mut o = DistanceOracle::new(&g);
            let opts = TreeOptions { randomized: randomized.then_some(seed), trace: false };
            let (r, _) = reconstruct_tree(&mut o, delta, &opts).unwrap();
            prop_assert!(r.matches(&g));
            prop_assert_eq!(r.queries, o.queries());
            if !randomized {
                prop_assert!(r.queries as f64 <= tree_bound(n, delta));
            }
        }
    }
}
