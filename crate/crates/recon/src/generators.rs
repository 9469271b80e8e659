//! Seeded instance generators with certificates.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decomposition::{clique_tree, layering_decomposition, DecompositionError, TreeDecomposition, DEFAULT_LAYERING_BUDGET};
use crate::graph::{Graph, GraphError, Vertex};
use crate::lower_bound::{build_lb_tree, LabError};

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error("certificate line {line}: {msg}")]
    Certificate { line: usize, msg: String },
}

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn relabel<R: Rng>(n: usize, rng: &mut R) -> Vec<Vertex> {
    let mut perm: Vec<Vertex> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// Random tree: each new vertex attaches to a uniformly chosen earlier vertex
/// that still has spare degree; labels are shuffled at the end.
pub fn gen_tree(n: usize, delta: usize, seed: u64) -> Result<Graph, GenError> {
    if n == 0 {
        return Err(GenError::Infeasible("n must be at least 1".into()));
    }
    if (delta == 0 && n > 1) || (delta == 1 && n > 2) {
        return Err(GenError::Infeasible(format!("no tree on {n} vertices has max degree {delta}")));
    }
    let mut rng = rng_for(seed);
    let mut degree = vec![0usize; n];
    let mut open: Vec<Vertex> = vec![0];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for v in 1..n {
        let i = rng.gen_range(0..open.len());
        let p = open[i];
        edges.push((p, v));
        degree[p] += 1;
        degree[v] = 1;
        if degree[p] == delta {
            open.swap_remove(i);
        }
        if delta > 1 {
            open.push(v);
        }
    }
    let perm = relabel(n, &mut rng);
    let edges: Vec<_> = edges.into_iter().map(|(a, b)| (perm[a], perm[b])).collect();
    Ok(Graph::from_edges(n, &edges)?)
}

/// Shape knobs for the chordal generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChordalShape {
    /// Largest clique created, at most `Δ + 1`.
    pub max_clique: usize,
    /// Attach only to the most recent vertices with spare degree; yields deep graphs.
    pub window: Option<usize>,
    /// Probability (per mille) that a new clique hangs off a single cut vertex.
    pub cut_permille: u32,
}

impl ChordalShape {
    pub fn for_delta(delta: usize) -> Self {
        ChordalShape { max_clique: delta.clamp(2, 5), window: None, cut_permille: 300 }
    }
}

/// Random chordal graph with its clique-bag decomposition (bags need not be maximal).
pub fn gen_chordal(n: usize, delta: usize, seed: u64) -> Result<(Graph, TreeDecomposition), GenError> {
    gen_chordal_shaped(n, delta, &ChordalShape::for_delta(delta), seed)
}

pub fn gen_chordal_shaped(n: usize, delta: usize, shape: &ChordalShape, seed: u64) -> Result<(Graph, TreeDecomposition), GenError> {
    if n == 0 {
        return Err(GenError::Infeasible("n must be at least 1".into()));
    }
    if delta < 2 {
        return Err(GenError::Infeasible("chordal generator needs Δ >= 2".into()));
    }
    let cap = shape.max_clique;
    if cap < 2 || cap > delta + 1 {
        return Err(GenError::Infeasible(format!("clique size cap {cap} outside [2, Δ+1]")));
    }
    let mut rng = rng_for(seed);
    let first = n.min(cap);
    let mut bags: Vec<Vec<Vertex>> = vec![(0..first).collect()];
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut bags_of: Vec<Vec<usize>> = vec![vec![0]; first];
    let mut degree = vec![first - 1; first];
    let mut edges = Vec::new();
    for u in 0..first {
        for v in u + 1..first {
            edges.push((u, v));
        }
    }
    let mut count = first;
    while count < n {
        let spare: Vec<Vertex> = (0..count).filter(|&v| degree[v] < delta).collect();
        let pool: &[Vertex] = match shape.window {
            Some(w) if spare.len() > w => &spare[spare.len() - w..],
            _ => &spare,
        };
        let &y = pool.choose(&mut rng).ok_or_else(|| {
            GenError::Infeasible(format!("every vertex saturated at {count} of {n} vertices; lower max_clique"))
        })?;
        let home = *bags_of[y].choose(&mut rng).expect("vertex lies in a bag");
        let mut x = vec![y];
        if rng.gen_range(0..1000) >= shape.cut_permille {
            let mut others: Vec<Vertex> = bags[home].iter().copied().filter(|&v| v != y && degree[v] < delta).collect();
            others.shuffle(&mut rng);
            let want = rng.gen_range(0..=others.len().min(cap - 2));
            x.extend(others.into_iter().take(want));
        }
        let min_spare = x.iter().map(|&v| delta - degree[v]).min().unwrap_or(0);
        let t_max = (cap - x.len()).min(min_spare).min(n - count);
        let t = rng.gen_range(1..=t_max);
        let new: Vec<Vertex> = (count..count + t).collect();
        count += t;
        let id = bags.len();
        for &v in &x {
            degree[v] += t;
            bags_of[v].push(id);
            for &w in &new {
                edges.push((v, w));
            }
        }
        for (i, &v) in new.iter().enumerate() {
            degree.push(x.len() + t - 1);
            bags_of.push(vec![id]);
            for &w in &new[i + 1..] {
                edges.push((v, w));
            }
        }
        bags.push(x.into_iter().chain(new).collect());
        parent.push(Some(home));
    }
    let perm = relabel(n, &mut rng);
    let edges: Vec<_> = edges.into_iter().map(|(a, b)| (perm[a], perm[b])).collect();
    let bags = bags.into_iter().map(|b| b.into_iter().map(|v| perm[v]).collect()).collect();
    Ok((Graph::from_edges(n, &edges)?, TreeDecomposition::new(bags, parent)?))
}

/// Replaces edge `{u, v}` by a path with `times` inner vertices numbered from `g.n()`.
pub fn subdivide(g: &Graph, u: Vertex, v: Vertex, times: usize) -> Result<Graph, GenError> {
    if !g.has_edge(u, v) {
        return Err(GenError::Infeasible(format!("{u}-{v} is not an edge")));
    }
    let n = g.n();
    let mut edges: Vec<_> = g.edges().into_iter().filter(|&e| e != (u.min(v), u.max(v))).collect();
    let chain: Vec<Vertex> = std::iter::once(u).chain(n..n + times).chain(std::iter::once(v)).collect();
    edges.extend(chain.windows(2).map(|w| (w[0], w[1])));
    Ok(Graph::from_edges(n + times, &edges)?)
}

/// Blocks (biconnected components) as edge lists, by an iterative Tarjan pass.
pub fn blocks(g: &Graph) -> Vec<Vec<(Vertex, Vertex)>> {
    let n = g.n();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut time = 0;
    let mut out = Vec::new();
    let mut estack: Vec<(Vertex, Vertex)> = Vec::new();
    // (vertex, parent, next neighbour index)
    let mut stack: Vec<(Vertex, usize, usize)> = vec![(0, usize::MAX, 0)];
    disc[0] = 0;
    low[0] = 0;
    time += 1;
    while let Some(&mut (v, p, ref mut i)) = stack.last_mut() {
        if *i < g.degree(v) {
            let w = g.neighbors(v)[*i];
            *i += 1;
            if disc[w] == usize::MAX {
                disc[w] = time;
                low[w] = time;
                time += 1;
                estack.push((v, w));
                stack.push((w, v, 0));
            } else if w != p && disc[w] < disc[v] {
                low[v] = low[v].min(disc[w]);
                estack.push((v, w));
            }
        } else {
            stack.pop();
            if let Some(&(pv, _, _)) = stack.last() {
                low[pv] = low[pv].min(low[v]);
                if low[v] >= disc[pv] {
                    let mut block = Vec::new();
                    while let Some(e) = estack.pop() {
                        block.push((e.0.min(e.1), e.0.max(e.1)));
                        if e == (pv, v) {
                            break;
                        }
                    }
                    out.push(block);
                }
            }
        }
    }
    out
}

/// k-chordal graph: a chordal base whose bridges and triangle blocks are
/// subdivided. Induced cycles live inside blocks, and a subdivided triangle
/// block becomes a single cycle of length at most `k`. Pendant paths top the
/// vertex count up to exactly `n`.
pub fn gen_kchordal(n: usize, delta: usize, k: usize, seed: u64) -> Result<Graph, GenError> {
    let shape = ChordalShape { max_clique: delta.clamp(2, 4), window: Some(6), cut_permille: 550 };
    gen_kchordal_shaped(n, delta, k, &shape, seed)
}

pub fn gen_kchordal_shaped(n: usize, delta: usize, k: usize, shape: &ChordalShape, seed: u64) -> Result<Graph, GenError> {
    if k < 3 {
        return Err(GenError::Infeasible("k must be at least 3".into()));
    }
    if n == 0 {
        return Err(GenError::Infeasible("n must be at least 1".into()));
    }
    let base_n = ((n * 3) / 5).max(1);
    let (base, _) = gen_chordal_shaped(base_n, delta, shape, seed)?;
    let mut rng = rng_for(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut budget = n - base_n;
    let mut blocks = blocks(&base);
    blocks.shuffle(&mut rng);
    // (edge, inner vertices)
    let mut plan: Vec<((Vertex, Vertex), usize)> = Vec::new();
    for block in blocks {
        if budget == 0 {
            break;
        }
        if block.len() == 1 && rng.gen_bool(0.6) {
            let s = rng.gen_range(1..=budget.min(2 * k));
            plan.push((block[0], s));
            budget -= s;
        } else if block.len() == 3 && k > 3 && rng.gen_bool(0.8) {
            let mut total = rng.gen_range(1..=(k - 3).min(budget));
            budget -= total;
            let mut per = [0usize; 3];
            while total > 0 {
                per[rng.gen_range(0..3)] += 1;
                total -= 1;
            }
            for (e, s) in block.into_iter().zip(per) {
                if s > 0 {
                    plan.push((e, s));
                }
            }
        }
    }
    let mut edges: Vec<(Vertex, Vertex)> = base.edges();
    let mut total = base.n();
    for &(e, s) in &plan {
        edges.retain(|&f| f != e);
        let chain: Vec<Vertex> = std::iter::once(e.0).chain(total..total + s).chain(std::iter::once(e.1)).collect();
        edges.extend(chain.windows(2).map(|w| (w[0], w[1])));
        total += s;
    }
    let mut degree = vec![0usize; n];
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    while total < n {
        let open: Vec<Vertex> = (0..total).filter(|&v| degree[v] < delta).collect();
        let &y = open.choose(&mut rng).ok_or_else(|| GenError::Infeasible("no vertex with spare degree for padding".into()))?;
        edges.push((y, total));
        degree[y] += 1;
        degree[total] = 1;
        total += 1;
    }
    let perm = relabel(n, &mut rng);
    let edges: Vec<_> = edges.into_iter().map(|(a, b)| (perm[a], perm[b])).collect();
    Ok(Graph::from_edges(n, &edges)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Tree,
    Chordal,
    KChordal,
    Treelength,
    LbTree,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Tree, Family::Chordal, Family::KChordal, Family::Treelength, Family::LbTree];

    pub fn name(self) -> &'static str {
        match self {
            Family::Tree => "tree",
            Family::Chordal => "chordal",
            Family::KChordal => "kchordal",
            Family::Treelength => "treelength",
            Family::LbTree => "lbtree",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| GenError::Infeasible(format!("unknown family {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenSpec {
    pub family: Family,
    pub n: usize,
    pub delta: usize,
    pub k: usize,
    pub c: usize,
    pub seed: u64,
}

/// What the generator knows about an instance: its family, a tree
/// decomposition and that decomposition's certified bag diameter.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub family: Family,
    pub delta: usize,
    pub k: usize,
    pub diameter: u32,
    pub td: TreeDecomposition,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: Graph,
    pub certificate: Certificate,
}

pub fn generate(spec: &GenSpec) -> Result<Instance, GenError> {
    let (graph, td) = match spec.family {
        Family::Tree => {
            let g = gen_tree(spec.n, spec.delta, spec.seed)?;
            let td = clique_tree(&g)?;
            (g, td)
        }
        Family::Chordal => gen_chordal(spec.n, spec.delta, spec.seed)?,
        Family::KChordal | Family::Treelength => {
            let g = gen_kchordal(spec.n, spec.delta, spec.k, spec.seed)?;
            let td = layering_decomposition(&g, 0, DEFAULT_LAYERING_BUDGET)?.td;
            (g, td)
        }
        Family::LbTree => {
            let t = build_lb_tree(spec.c, spec.delta, spec.k, spec.seed)?;
            let g = t.graph().clone();
            let td = clique_tree(&g)?;
            (g, td)
        }
    };
    let diameter = td.max_bag_diameter(&graph);
    let certificate = Certificate { family: spec.family, delta: graph.max_degree(), k: spec.k, diameter, td };
    Ok(Instance { graph, certificate })
}

impl Certificate {
    pub fn to_text(&self) -> String {
        format!(
            "family {}\ndelta {}\nk {}\ndiameter {}\nbags\n{}",
            self.family,
            self.delta,
            self.k,
            self.diameter,
            self.td.dump()
        )
    }

    pub fn parse(text: &str) -> Result<Certificate, GenError> {
        let mut lines = text.lines().enumerate();
        let mut field = |name: &str| -> Result<String, GenError> {
            let (i, line) = lines.next().ok_or(GenError::Certificate { line: 0, msg: format!("missing {name}") })?;
            let rest = line.strip_prefix(name).map(str::trim).filter(|r| !r.is_empty());
            rest.map(str::to_string).ok_or(GenError::Certificate { line: i + 1, msg: format!("expected `{name} <value>`") })
        };
        let family: Family = field("family")?.parse()?;
        let num = |s: String, line: usize| s.parse::<usize>().map_err(|_| GenError::Certificate { line, msg: format!("bad number {s:?}") });
        let delta = num(field("delta")?, 2)?;
        let k = num(field("k")?, 3)?;
        let diameter = num(field("diameter")?, 4)? as u32;
        match lines.next() {
            Some((_, "bags")) => {}
            _ => return Err(GenError::Certificate { line: 5, msg: "expected `bags`".into() }),
        }
        let rest: Vec<&str> = lines.map(|(_, l)| l).collect();
        let td = TreeDecomposition::parse_dump(&rest.join("\n"))?;
        Ok(Certificate { family, delta, k, diameter, td })
    }

    /// Re-checks the certificate against a graph.
    pub fn check(&self, g: &Graph) -> Result<bool, DecompositionError> {
        if !crate::graph::verify_treelength(g, &self.td, self.diameter)? {
            return Ok(false);
        }
        Ok(match self.family {
            Family::Tree | Family::LbTree => g.m() + 1 == g.n(),
            Family::Chordal => self.diameter <= 1,
            Family::KChordal | Family::Treelength => g.max_degree() <= self.delta,
        })
    }
}
