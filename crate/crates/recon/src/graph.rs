//! Ground-truth graphs, hop distances and structural validators.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use crate::decomposition::{DecompositionError, TreeDecomposition};

pub type Vertex = usize;

/// Sentinel for "not reached" in distance vectors.
pub const UNREACHED: u32 = u32::MAX;

/// Default step budget for induced-cycle enumeration.
pub const DEFAULT_CYCLE_BUDGET: u64 = 100_000_000;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("graph must have at least one vertex")]
    Empty,
    #[error("vertex {v} out of range (n = {n})")]
    OutOfRange { v: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(usize, usize),
    #[error("graph is disconnected: only {reached} of {n} vertices reachable from 0")]
    Disconnected { reached: usize, n: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Simple, undirected, connected graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<Vertex>>,
    m: usize,
}

impl Graph {
    /// Builds a graph and checks simplicity and connectivity.
    pub fn from_edges(n: usize, edges: &[(Vertex, Vertex)]) -> Result<Graph, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            for w in [u, v] {
                if w >= n {
                    return Err(GraphError::OutOfRange { v: w, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for (u, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(GraphError::DuplicateEdge(u.min(w[0]), u.max(w[0])));
            }
        }
        let g = Graph { adj, m: edges.len() };
        let reached = g.bfs_distances(0).iter().filter(|&&d| d != UNREACHED).count();
        if reached != n {
            return Err(GraphError::Disconnected { reached, n });
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn neighbors(&self, v: Vertex) -> &[Vertex] {
        &self.adj[v]
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(Vertex, Vertex)> {
        let mut out = Vec::with_capacity(self.m);
        for (u, list) in self.adj.iter().enumerate() {
            out.extend(list.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn bfs_distances(&self, source: Vertex) -> Vec<u32> {
        let mut dist = vec![UNREACHED; self.n()];
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for &w in &self.adj[u] {
                if dist[w] == UNREACHED {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn distance_matrix(&self) -> DistanceMatrix {
        let n = self.n();
        let mut data = Vec::with_capacity(n * n);
        for s in 0..n {
            data.extend(self.bfs_distances(s));
        }
        DistanceMatrix { n, data }
    }

    pub fn layered(&self, root: Vertex) -> LayeredView {
        LayeredView::from_distances(root, &self.bfs_distances(root))
    }

    /// Induced subgraph on `verts`, relabelled to `0..verts.len()` in the given order.
    pub fn induced(&self, verts: &[Vertex]) -> Result<Graph, GraphError> {
        let mut local = vec![usize::MAX; self.n()];
        for (i, &v) in verts.iter().enumerate() {
            local[v] = i;
        }
        let mut edges = Vec::new();
        for (i, &v) in verts.iter().enumerate() {
            for &w in &self.adj[v] {
                if local[w] != usize::MAX && local[w] > i {
                    edges.push((i, local[w]));
                }
            }
        }
        Graph::from_edges(verts.len(), &edges)
    }

    /// Parses the `n m` header followed by `m` lines `u v`.
    pub fn parse(text: &str) -> Result<Graph, GraphError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(GraphError::Parse { line: 1, msg: "missing header".into() })?;
        let (n, m) = parse_pair(hline, header)?;
        let mut edges = Vec::with_capacity(m);
        for (line, l) in lines {
            if edges.len() == m {
                return Err(GraphError::Parse { line, msg: "more edges than declared".into() });
            }
            edges.push(parse_pair(line, l)?);
        }
        if edges.len() != m {
            return Err(GraphError::Parse {
                line: hline,
                msg: format!("declared {m} edges, found {}", edges.len()),
            });
        }
        Graph::from_edges(n, &edges)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.n(), self.m);
        for (u, v) in self.edges() {
            let _ = writeln!(s, "{u} {v}");
        }
        s
    }

    pub fn read_file(path: &Path) -> Result<Graph, GraphError> {
        Graph::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write_file(&self, path: &Path) -> Result<(), GraphError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn parse_pair(line: usize, l: &str) -> Result<(usize, usize), GraphError> {
    let err = |msg: &str| GraphError::Parse { line, msg: msg.to_string() };
    let mut it = l.split_whitespace();
    let a = it.next().ok_or_else(|| err("expected two integers"))?;
    let b = it.next().ok_or_else(|| err("expected two integers"))?;
    if it.next().is_some() {
        return Err(err("trailing tokens"));
    }
    let a = a.parse().map_err(|_| err("not a non-negative integer"))?;
    let b = b.parse().map_err(|_| err("not a non-negative integer"))?;
    Ok((a, b))
}

/// Dense all-pairs hop distances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<u32>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, u: Vertex, v: Vertex) -> u32 {
        self.data[u * self.n + v]
    }

    pub fn row(&self, u: Vertex) -> &[u32] {
        &self.data[u * self.n..(u + 1) * self.n]
    }
}

/// BFS layers `L_0..L_D` around a root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayeredView {
    pub root: Vertex,
    pub layers: Vec<Vec<Vertex>>,
    pub layer_of: Vec<u32>,
}

impl LayeredView {
    /// Groups vertices by distance; each layer is sorted by vertex id.
    pub fn from_distances(root: Vertex, dist: &[u32]) -> LayeredView {
        let depth = dist.iter().copied().filter(|&d| d != UNREACHED).max().unwrap_or(0) as usize;
        let mut layers = vec![Vec::new(); depth + 1];
        for (v, &d) in dist.iter().enumerate() {
            if d != UNREACHED {
                layers[d as usize].push(v);
            }
        }
        LayeredView { root, layers, layer_of: dist.to_vec() }
    }

    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }
}

pub fn bfs_distances(g: &Graph, source: Vertex) -> Vec<u32> {
    g.bfs_distances(source)
}

pub fn max_degree(g: &Graph) -> usize {
    g.max_degree()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CycleCheckError {
    #[error("k must be at least 3, got {0}")]
    BadK(usize),
    #[error("induced-cycle search exceeded its budget of {0} steps")]
    TooLarge(u64),
}

/// True iff `g` has no induced cycle of length at least `k + 1`.
pub fn is_k_chordal(g: &Graph, k: usize) -> Result<bool, CycleCheckError> {
    is_k_chordal_with_budget(g, k, DEFAULT_CYCLE_BUDGET)
}

/// Enumerates chordless paths `s = p0, p1, ..` over vertices larger than `s`;
/// a long induced cycle shows up as such a path whose last vertex closes back to `s`.
pub fn is_k_chordal_with_budget(g: &Graph, k: usize, budget: u64) -> Result<bool, CycleCheckError> {
    if k < 3 {
        return Err(CycleCheckError::BadK(k));
    }
    let n = g.n();
    // hits[v] = number of path vertices p1.. adjacent to v
    let mut hits = vec![0u32; n];
    let mut on_path = vec![false; n];
    let mut steps = 0u64;
    for s in 0..n {
        let s_adj: Vec<bool> = {
            let mut a = vec![false; n];
            for &w in g.neighbors(s) {
                a[w] = true;
            }
            a
        };
        for &p1 in g.neighbors(s).iter().filter(|&&w| w > s) {
            // stack of (vertex, next neighbour index)
            let mut stack: Vec<(Vertex, usize)> = vec![(p1, 0)];
            on_path[p1] = true;
            for &w in g.neighbors(p1) {
                hits[w] += 1;
            }
            while let Some(&mut (top, ref mut idx)) = stack.last_mut() {
                steps += 1;
                if steps > budget {
                    return Err(CycleCheckError::TooLarge(budget));
                }
                let nb = g.neighbors(top);
                if *idx >= nb.len() {
                    stack.pop();
                    on_path[top] = false;
                    for &w in nb {
                        hits[w] -= 1;
                    }
                    continue;
                }
                let x = nb[*idx];
                *idx += 1;
                if x <= s || on_path[x] || hits[x] != 1 {
                    continue;
                }
                if s_adj[x] {
                    // closes s, p1..top, x; x != p1 because p1 is on the path
                    if stack.len() + 2 > k {
                        return Ok(false);
                    }
                    continue;
                }
                on_path[x] = true;
                for &w in g.neighbors(x) {
                    hits[w] += 1;
                }
                stack.push((x, 0));
            }
        }
    }
    Ok(true)
}

/// True iff every bag of `td` has diameter at most `k` in `g`.
pub fn verify_treelength(g: &Graph, td: &TreeDecomposition, k: u32) -> Result<bool, DecompositionError> {
    td.validate(g)?;
    Ok(td.max_bag_diameter(g) <= k)
}
