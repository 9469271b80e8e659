//! The labelled lower-bound tree, the distance → word → coordinate reduction
//! chain, reference reconstructors and the partition learner.

use rand::seq::SliceRandom;

use crate::generators::rng_for;
use crate::graph::{Graph, Vertex};
use crate::oracle::{word_via_coordinates, CoordinateOracle, DistanceQuery, MembershipOracle, OracleError, WordOracle, WordQuery};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LabError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("both endpoints are internal nodes; the answer carries no information")]
    NoInformation,
    #[error("malformed leaf distance matrix: {0}")]
    Matrix(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Tree of depth `k+1`: nodes at depth `< k` have `Δ` children, nodes at depth
/// `k` have `c` leaf children. Internal labels are fixed; which leaf hangs
/// under which depth-`k` node is a seeded permutation.
#[derive(Debug, Clone)]
pub struct LabeledLowerBoundTree {
    pub c: usize,
    pub delta: usize,
    pub k: usize,
    graph: Graph,
    /// Label of each internal node, indexed by node id `0..internal`.
    labels: Vec<Vec<u32>>,
    internal: usize,
    /// Hidden: label of the parent of leaf `a`, for `a` in `0..N`.
    f: Vec<Vec<u32>>,
}

impl LabeledLowerBoundTree {
    pub fn leaves(&self) -> usize {
        self.f.len()
    }

    pub fn internal(&self) -> usize {
        self.internal
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Node id of leaf element `a`.
    pub fn leaf_node(&self, a: usize) -> Vertex {
        self.internal + a
    }

    pub fn is_leaf(&self, x: Vertex) -> bool {
        x >= self.internal
    }

    pub fn label(&self, x: Vertex) -> &[u32] {
        if self.is_leaf(x) {
            &self.f[x - self.internal]
        } else {
            &self.labels[x]
        }
    }

    pub fn depth(&self, x: Vertex) -> usize {
        if self.is_leaf(x) {
            self.k + 1
        } else {
            self.labels[x].len()
        }
    }

    /// Internal node carrying `label`.
    pub fn node_of(&self, label: &[u32]) -> Vertex {
        // nodes are numbered level by level, children in symbol order
        let d = self.delta;
        let mut first = 0usize;
        let mut width = 1usize;
        for _ in 0..label.len() {
            first += width;
            width *= d;
        }
        let offset = label.iter().fold(0usize, |acc, &s| acc * d + (s as usize - 1));
        first + offset
    }

    /// Hidden leaf function; for verification only.
    pub fn hidden_function(&self) -> &[Vec<u32>] {
        &self.f
    }

    pub fn children(&self, x: Vertex) -> Vec<Vertex> {
        self.graph.neighbors(x).iter().copied().filter(|&y| self.depth(y) == self.depth(x) + 1).collect()
    }
}

pub fn build_lb_tree(c: usize, delta: usize, k: usize, seed: u64) -> Result<LabeledLowerBoundTree, LabError> {
    if c == 0 || c > delta {
        return Err(LabError::Params(format!("need 1 <= c <= Δ, got c = {c}, Δ = {delta}")));
    }
    if delta < 2 && k > 0 {
        return Err(LabError::Params("Δ >= 2 needed once k >= 1".into()));
    }
    let mut labels: Vec<Vec<u32>> = vec![Vec::new()];
    let mut edges = Vec::new();
    let mut level: Vec<usize> = vec![0];
    for _ in 0..k {
        let mut next = Vec::with_capacity(level.len() * delta);
        for &p in &level {
            for s in 1..=delta as u32 {
                let mut l = labels[p].clone();
                l.push(s);
                labels.push(l);
                let id = labels.len() - 1;
                edges.push((p, id));
                next.push(id);
            }
        }
        level = next;
    }
    let internal = labels.len();
    let big_n = c * level.len();
    let mut slots: Vec<usize> = (0..big_n).collect();
    slots.shuffle(&mut rng_for(seed));
    let mut f = Vec::with_capacity(big_n);
    for (a, &slot) in slots.iter().enumerate() {
        let parent = level[slot / c];
        edges.push((parent, internal + a));
        f.push(labels[parent].clone());
    }
    let graph = Graph::from_edges(internal + big_n, &edges).map_err(|e| LabError::Params(e.to_string()))?;
    Ok(LabeledLowerBoundTree { c, delta, k, graph, labels, internal, f })
}

fn common_prefix(x: &[u32], y: &[u32]) -> usize {
    x.iter().zip(y).take_while(|(p, q)| p == q).count()
}

/// Distance from the closed-form expressions in terms of ancestor depths.
pub fn distance_on_lb_tree(t: &LabeledLowerBoundTree, x: Vertex, y: Vertex) -> u32 {
    if x == y {
        return 0;
    }
    let k = t.k as u32;
    let i = common_prefix(t.label(x), t.label(y)) as u32;
    match (t.is_leaf(x), t.is_leaf(y)) {
        (true, true) => 2 * (1 + k - i),
        (true, false) => 1 + (k - i) + (t.depth(y) as u32 - i),
        (false, true) => 1 + (k - i) + (t.depth(x) as u32 - i),
        (false, false) => t.depth(x) as u32 + t.depth(y) as u32 - 2 * i,
    }
}

/// The word query equivalent to a distance query with at least one leaf endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordReduction {
    pub query: WordQuery,
    /// Depth of the internal endpoint; `None` for leaf-leaf pairs.
    internal_depth: Option<usize>,
    same_leaf: bool,
}

impl WordReduction {
    /// Distance implied by the word answer `i`.
    pub fn distance(&self, k: usize, i: usize) -> u32 {
        let (k, i) = (k as u32, i as u32);
        match (self.same_leaf, self.internal_depth) {
            (true, _) => 0,
            (false, None) => 2 * (1 + k - i),
            (false, Some(j)) => 1 + (k - i) + (j as u32 - i),
        }
    }
}

pub fn distance_query_as_word_query(t: &LabeledLowerBoundTree, x: Vertex, y: Vertex) -> Result<WordReduction, LabError> {
    let (leaf, other) = match (t.is_leaf(x), t.is_leaf(y)) {
        (false, false) => return Err(LabError::NoInformation),
        (true, _) => (x, y),
        (false, true) => (y, x),
    };
    let a = leaf - t.internal;
    if t.is_leaf(other) {
        let a2 = other - t.internal;
        return Ok(WordReduction { query: WordQuery::Element(a, a2), internal_depth: None, same_leaf: a == a2 });
    }
    let mut b = t.label(other).to_vec();
    b.resize(t.k, 0);
    Ok(WordReduction { query: WordQuery::Word(a, b), internal_depth: Some(t.depth(other)), same_leaf: false })
}

/// Source of word-query answers: the word oracle itself or a coordinate simulation.
pub trait WordSource {
    fn n(&self) -> usize;
    fn k(&self) -> usize;
    fn delta(&self) -> u32;
    fn ask(&mut self, q: &WordQuery) -> Result<usize, OracleError>;
}

impl WordSource for WordOracle {
    fn n(&self) -> usize {
        WordOracle::n(self)
    }
    fn k(&self) -> usize {
        WordOracle::k(self)
    }
    fn delta(&self) -> u32 {
        WordOracle::delta(self)
    }
    fn ask(&mut self, q: &WordQuery) -> Result<usize, OracleError> {
        self.query(q)
    }
}

/// Word queries answered by coordinate queries, with the per-query NO rule checked.
pub struct SimulatedWords<'a> {
    pub co: &'a mut CoordinateOracle,
    pub asked: u64,
    pub full_matches: u64,
    /// Simulated queries whose NO increment differed from `answer < k`.
    pub rule_violations: u64,
}

impl<'a> SimulatedWords<'a> {
    pub fn new(co: &'a mut CoordinateOracle) -> Self {
        SimulatedWords { co, asked: 0, full_matches: 0, rule_violations: 0 }
    }
}

impl WordSource for SimulatedWords<'_> {
    fn n(&self) -> usize {
        self.co.n()
    }
    fn k(&self) -> usize {
        self.co.k()
    }
    fn delta(&self) -> u32 {
        self.co.delta()
    }
    fn ask(&mut self, q: &WordQuery) -> Result<usize, OracleError> {
        let before = self.co.no_answers();
        let ans = word_via_coordinates(self.co, q)?;
        self.asked += 1;
        let k = self.co.k();
        if ans == k {
            self.full_matches += 1;
        }
        if self.co.no_answers() - before != (ans < k) as u64 {
            self.rule_violations += 1;
        }
        Ok(ans)
    }
}

/// Seeded balanced function `[n] -> [Δ]^k` with `n = c·Δ^k`.
pub fn random_balanced_function(c: usize, delta: usize, k: usize, seed: u64) -> Vec<Vec<u32>> {
    let words = delta.pow(k as u32);
    let mut f: Vec<Vec<u32>> = (0..c * words)
        .map(|i| {
            let mut x = i / c;
            let mut w = vec![0u32; k];
            for slot in w.iter_mut().rev() {
                *slot = (x % delta) as u32 + 1;
                x /= delta;
            }
            w
        })
        .collect();
    f.shuffle(&mut rng_for(seed));
    f
}

pub fn is_balanced(f: &[Vec<u32>], delta: usize, k: usize, c: usize) -> bool {
    let words = delta.pow(k as u32);
    let mut count = vec![0usize; words];
    for w in f {
        if w.len() != k {
            return false;
        }
        let idx = w.iter().fold(0usize, |acc, &s| acc * delta + (s as usize).wrapping_sub(1));
        if idx >= words {
            return false;
        }
        count[idx] += 1;
    }
    count.iter().all(|&x| x == c)
}

/// Prefix descent: for each element, guess the next coordinate and fill the
/// rest with symbol 1; an answer past the guessed position reveals a run of 1s.
pub fn reconstruct_balanced_function_words(src: &mut dyn WordSource) -> Result<(Vec<Vec<u32>>, u64), LabError> {
    let (n, k, delta) = (src.n(), src.k(), src.delta());
    let mut asked = 0u64;
    let mut f = Vec::with_capacity(n);
    for a in 0..n {
        let mut word = vec![1u32; k];
        let mut i = 0;
        // symbols at position i already excluded
        let mut low = 1u32;
        while i < k {
            if low == delta {
                word[i] = delta;
                i += 1;
                low = 1;
                continue;
            }
            word[i] = low;
            for slot in &mut word[i + 1..] {
                *slot = 1;
            }
            let ans = src.ask(&WordQuery::Word(a, word.clone()))?;
            asked += 1;
            if ans > i {
                // positions i..ans agree with the guess; position ans (if any) is not 1
                i = ans;
                low = 2;
            } else {
                low += 1;
            }
        }
        f.push(word);
    }
    Ok((f, asked))
}

/// Tries symbols `1..Δ-1` per coordinate with type-1 coordinate queries; the last by elimination.
pub fn reconstruct_balanced_function_coords(co: &mut CoordinateOracle) -> Result<Vec<Vec<u32>>, LabError> {
    let (n, k, delta) = (co.n(), co.k(), co.delta());
    let mut f = Vec::with_capacity(n);
    for a in 0..n {
        let mut word = Vec::with_capacity(k);
        for i in 1..=k {
            let mut sym = delta;
            for b in 1..delta {
                if co.type1(a, b, i)? {
                    sym = b;
                    break;
                }
            }
            word.push(sym);
        }
        f.push(word);
    }
    Ok(f)
}

/// Recovers every leaf's parent label from the leaf distance matrix plus
/// queries from class representatives to the children of each subtree root.
/// Returns the labels and the number of internal queries charged.
pub fn recover_leaf_labels_phylo(
    t: &LabeledLowerBoundTree,
    leaf_dist: &[Vec<u32>],
    o: &mut dyn DistanceQuery,
) -> Result<(Vec<Vec<u32>>, u64), LabError> {
    let big_n = t.leaves();
    if leaf_dist.len() != big_n || leaf_dist.iter().any(|r| r.len() != big_n) {
        return Err(LabError::Matrix(format!("expected {big_n}x{big_n}")));
    }
    for a in 0..big_n {
        if leaf_dist[a][a] != 0 || (0..a).any(|b| leaf_dist[a][b] != leaf_dist[b][a]) {
            return Err(LabError::Matrix(format!("row {a} is not symmetric with zero diagonal")));
        }
    }
    let start = o.queries();
    let mut out: Vec<Option<Vec<u32>>> = vec![None; big_n];
    let mut stack: Vec<(Vertex, Vec<usize>)> = vec![(0, (0..big_n).collect())];
    while let Some((root, set)) = stack.pop() {
        let j = t.depth(root);
        if j == t.k {
            for a in set {
                out[a] = Some(t.label(root).to_vec());
            }
            continue;
        }
        // same child of `root` iff the nearest common ancestor is strictly below it
        let limit = 2 * (t.k - j) as u32;
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for a in set {
            match classes.iter_mut().find(|cl| leaf_dist[cl[0]][a] <= limit) {
                Some(cl) => cl.push(a),
                None => classes.push(vec![a]),
            }
        }
        let children = t.children(root);
        if classes.len() > children.len() {
            return Err(LabError::Matrix(format!("{} classes under a node with {} children", classes.len(), children.len())));
        }
        for cl in classes {
            let rep = t.leaf_node(cl[0]);
            let mut best: Option<(u32, Vertex)> = None;
            for &ch in &children {
                let d = o.query(rep, ch)?;
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, ch));
                }
            }
            let (_, child) = best.expect("internal node has children");
            stack.push((child, cl));
        }
    }
    let labels = out.into_iter().map(|l| l.expect("every leaf is assigned")).collect();
    Ok((labels, o.queries() - start))
}

/// Deterministic learner: one representative per discovered class, compared in
/// discovery order; with all `k` classes known, `k-1` NOs settle the last one,
/// so a hidden partition with more than `k` classes cannot be detected.
pub fn learn_partition(mo: &mut MembershipOracle, k: usize) -> Result<Vec<usize>, LabError> {
    let n = mo.n();
    if k == 0 && n > 0 {
        return Err(LabError::Params("k = 0 classes for a nonempty ground set".into()));
    }
    let mut reps: Vec<usize> = Vec::new();
    let mut class = vec![0usize; n];
    for a in 0..n {
        let mut found = None;
        for (ci, &r) in reps.iter().enumerate() {
            if reps.len() == k && ci == k - 1 {
                found = Some(ci);
                break;
            }
            if mo.same(a, r)? {
                found = Some(ci);
                break;
            }
        }
        match found {
            Some(ci) => class[a] = ci,
            None => {
                reps.push(a);
                class[a] = reps.len() - 1;
            }
        }
    }
    Ok(class)
}

/// Random partition of `[n]` into `k` classes of near-equal size, all nonempty.
pub fn random_partition(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut class: Vec<usize> = (0..n).map(|i| i % k).collect();
    class.shuffle(&mut rng_for(seed));
    class
}

/// Same-partition check up to renaming of class ids.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut map = std::collections::HashMap::new();
    let mut back = std::collections::HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| *map.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
}

/// One CSV row of a lab experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabRow {
    pub experiment: &'static str,
    pub params: String,
    pub seed: u64,
    pub queries: u64,
    pub no_answers: u64,
    pub success: bool,
}

impl LabRow {
    pub const HEADER: [&'static str; 6] = ["experiment", "params", "seed", "queries", "no_answers", "success"];

    pub fn record(&self) -> [String; 6] {
        [
            self.experiment.to_string(),
            self.params.clone(),
            self.seed.to_string(),
            self.queries.to_string(),
            self.no_answers.to_string(),
            self.success.to_string(),
        ]
    }
}

/// Every lab experiment on the lower-bound tree with parameters `(c, Δ, k)`:
/// closed-form distances, the word reduction, the coordinate replay, the
/// balanced-function reconstructors and phylogenetic recovery.
pub fn lab_lbtree(c: usize, delta: usize, k: usize, seed: u64) -> Result<Vec<LabRow>, LabError> {
    let t = build_lb_tree(c, delta, k, seed)?;
    let params = format!("c={c};delta={delta};k={k}");
    let g = t.graph();
    let nodes = g.n();
    let mut rows = Vec::new();

    let mut mismatches = 0u64;
    let mut checked = 0u64;
    let mut word_bad = 0u64;
    let mut wo = WordOracle::new(t.hidden_function().to_vec(), delta as u32)?;
    let mut co = CoordinateOracle::new(t.hidden_function().to_vec(), delta as u32)?;
    let mut sim = SimulatedWords::new(&mut co);
    for x in 0..nodes {
        let dist = g.bfs_distances(x);
        for y in 0..nodes {
            checked += 1;
            if distance_on_lb_tree(&t, x, y) != dist[y] {
                mismatches += 1;
            }
            if let Ok(red) = distance_query_as_word_query(&t, x, y) {
                let ans = wo.query(&red.query)?;
                if red.distance(k, ans) != dist[y] || sim.ask(&red.query)? != ans {
                    word_bad += 1;
                }
            }
        }
    }
    rows.push(LabRow { experiment: "lbtree_formula", params: params.clone(), seed, queries: checked, no_answers: 0, success: mismatches == 0 });
    rows.push(LabRow {
        experiment: "distance_as_word",
        params: params.clone(),
        seed,
        queries: wo.queries(),
        no_answers: 0,
        success: word_bad == 0,
    });
    let identity = sim.rule_violations == 0 && sim.co.no_answers() + sim.full_matches == sim.asked;
    rows.push(LabRow {
        experiment: "word_via_coordinates",
        params: params.clone(),
        seed,
        queries: sim.asked,
        no_answers: sim.co.no_answers(),
        success: identity && sim.co.no_answers() <= sim.asked,
    });

    let f = t.hidden_function().to_vec();
    let mut wo = WordOracle::new(f.clone(), delta as u32)?;
    let (got, asked) = reconstruct_balanced_function_words(&mut wo)?;
    rows.push(LabRow {
        experiment: "balanced_words",
        params: params.clone(),
        seed,
        queries: asked,
        no_answers: 0,
        success: got == f && is_balanced(&got, delta, k, c),
    });
    let mut co = CoordinateOracle::new(f.clone(), delta as u32)?;
    let got = reconstruct_balanced_function_coords(&mut co)?;
    rows.push(LabRow {
        experiment: "balanced_coords",
        params: params.clone(),
        seed,
        queries: co.queries(),
        no_answers: co.no_answers(),
        success: got == f,
    });

    let leaf_dist: Vec<Vec<u32>> = (0..t.leaves())
        .map(|a| {
            let row = g.bfs_distances(t.leaf_node(a));
            (0..t.leaves()).map(|b| row[t.leaf_node(b)]).collect()
        })
        .collect();
    let mut o = crate::oracle::DistanceOracle::new(g);
    let (labels, internal_queries) = recover_leaf_labels_phylo(&t, &leaf_dist, &mut o)?;
    let budget = (delta * delta * t.leaves()) as u64;
    rows.push(LabRow {
        experiment: "phylo",
        params,
        seed,
        queries: internal_queries,
        no_answers: budget,
        success: labels == f && internal_queries <= budget,
    });
    Ok(rows)
}

/// NO-count distribution of the coordinate reconstructor on random balanced functions.
pub fn lab_balanced_no_counts(c: usize, delta: usize, k: usize, seeds: std::ops::Range<u64>) -> Result<Vec<LabRow>, LabError> {
    let params = format!("c={c};delta={delta};k={k}");
    seeds
        .map(|seed| {
            let f = random_balanced_function(c, delta, k, seed);
            let mut co = CoordinateOracle::new(f.clone(), delta as u32)?;
            let got = reconstruct_balanced_function_coords(&mut co)?;
            Ok(LabRow {
                experiment: "balanced_no_count",
                params: params.clone(),
                seed,
                queries: co.queries(),
                no_answers: co.no_answers(),
                success: got == f,
            })
        })
        .collect()
}

/// Query counts of the partition learner on random balanced partitions.
pub fn lab_partition(n: usize, k: usize, seeds: std::ops::Range<u64>) -> Result<Vec<LabRow>, LabError> {
    let params = format!("n={n};k={k}");
    seeds
        .map(|seed| {
            let truth = random_partition(n, k, seed);
            let mut mo = MembershipOracle::new(truth.clone());
            let got = learn_partition(&mut mo, k)?;
            Ok(LabRow {
                experiment: "partition",
                params: params.clone(),
                seed,
                queries: mo.queries(),
                no_answers: mo.no_answers(),
                success: same_partition(&got, &truth) && mo.queries() <= ((k - 1) * n) as u64,
            })
        })
        .collect()
}
