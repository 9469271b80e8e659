//! Tree decompositions: validation, clique trees, layering decompositions and
//! balanced-bag search.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::graph::{Graph, Vertex, UNREACHED};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecompositionError {
    #[error("malformed decomposition: {0}")]
    Malformed(String),
    #[error("graph is not chordal (vertex {0} breaks the elimination ordering)")]
    NotChordal(Vertex),
    #[error("decomposition work budget of {0} exceeded")]
    WorkBudget(u64),
}

/// Rooted tree of bags. Bag contents are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeDecomposition {
    bags: Vec<Vec<Vertex>>,
    parent: Vec<Option<usize>>,
    root: usize,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    diameters: Option<Vec<u32>>,
}

impl TreeDecomposition {
    /// Checks that `parent` describes a single rooted tree over the bags.
    pub fn new(mut bags: Vec<Vec<Vertex>>, parent: Vec<Option<usize>>) -> Result<Self, DecompositionError> {
        let malformed = |m: String| Err(DecompositionError::Malformed(m));
        if bags.is_empty() || bags.len() != parent.len() {
            return malformed(format!("{} bags but {} parent links", bags.len(), parent.len()));
        }
        for b in &mut bags {
            b.sort_unstable();
            b.dedup();
        }
        let roots: Vec<usize> = (0..bags.len()).filter(|&t| parent[t].is_none()).collect();
        if roots.len() != 1 {
            return malformed(format!("expected one root, found {}", roots.len()));
        }
        let root = roots[0];
        let mut children = vec![Vec::new(); bags.len()];
        for (t, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= bags.len() || p == t {
                    return malformed(format!("bag {t} has invalid parent {p}"));
                }
                children[p].push(t);
            }
        }
        let mut depth = vec![usize::MAX; bags.len()];
        depth[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(t) = queue.pop_front() {
            for &c in &children[t] {
                depth[c] = depth[t] + 1;
                queue.push_back(c);
            }
        }
        if depth.contains(&usize::MAX) {
            return malformed("parent links contain a cycle".into());
        }
        Ok(TreeDecomposition { bags, parent, root, children, depth, diameters: None })
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn bag(&self, t: usize) -> &[Vertex] {
        &self.bags[t]
    }

    pub fn bags(&self) -> &[Vec<Vertex>] {
        &self.bags
    }

    pub fn parent(&self, t: usize) -> Option<usize> {
        self.parent[t]
    }

    pub fn children(&self, t: usize) -> &[usize] {
        &self.children[t]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn depth(&self, t: usize) -> usize {
        self.depth[t]
    }

    pub fn max_bag_size(&self) -> usize {
        self.bags.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Edge coverage plus the connected-subtree property for every vertex.
    pub fn validate(&self, g: &Graph) -> Result<(), DecompositionError> {
        let n = g.n();
        let mut count = vec![0usize; n];
        let mut linked = vec![0usize; n];
        for (t, bag) in self.bags.iter().enumerate() {
            for &v in bag {
                if v >= n {
                    return Err(DecompositionError::Malformed(format!("bag {t} holds vertex {v} >= n")));
                }
                count[v] += 1;
                if let Some(p) = self.parent[t] {
                    if self.bags[p].binary_search(&v).is_ok() {
                        linked[v] += 1;
                    }
                }
            }
        }
        for v in 0..n {
            if count[v] == 0 {
                return Err(DecompositionError::Malformed(format!("vertex {v} is in no bag")));
            }
            // a forest on count[v] nodes is a tree iff it has count[v]-1 edges
            if linked[v] + 1 != count[v] {
                return Err(DecompositionError::Malformed(format!("bags of vertex {v} are not connected")));
            }
        }
        let index = self.vertex_bags(n);
        for (u, v) in g.edges() {
            let covered = index[u].iter().any(|&t| self.bags[t].binary_search(&v).is_ok());
            if !covered {
                return Err(DecompositionError::Malformed(format!("edge {u}-{v} is not covered")));
            }
        }
        Ok(())
    }

    /// For every vertex, the ids of bags containing it.
    pub fn vertex_bags(&self, n: usize) -> Vec<Vec<usize>> {
        let mut index = vec![Vec::new(); n];
        for (t, bag) in self.bags.iter().enumerate() {
            for &v in bag {
                if v < n {
                    index[v].push(t);
                }
            }
        }
        index
    }

    /// Diameter of each bag measured in `g`.
    pub fn bag_diameters(&self, g: &Graph) -> Vec<u32> {
        self.bags.iter().map(|b| set_diameter(g, b)).collect()
    }

    /// Caches per-bag diameters.
    pub fn with_diameters(mut self, g: &Graph) -> Self {
        self.diameters = Some(self.bag_diameters(g));
        self
    }

    pub fn cached_diameters(&self) -> Option<&[u32]> {
        self.diameters.as_deref()
    }

    pub fn max_bag_diameter(&self, g: &Graph) -> u32 {
        match &self.diameters {
            Some(d) => d.iter().copied().max().unwrap_or(0),
            None => self.bag_diameters(g).into_iter().max().unwrap_or(0),
        }
    }

    /// `bag_id parent_id v1 v2 ...` per line; the root's parent is `-1`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (t, bag) in self.bags.iter().enumerate() {
            match self.parent[t] {
                Some(p) => {
                    let _ = write!(s, "{t} {p}");
                }
                None => {
                    let _ = write!(s, "{t} -1");
                }
            }
            for v in bag {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse_dump(text: &str) -> Result<TreeDecomposition, DecompositionError> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || DecompositionError::Malformed(format!("line {}: expected integers", i + 1));
            let nums: Vec<i64> = line
                .split_whitespace()
                .map(|x| x.parse::<i64>().map_err(|_| bad()))
                .collect::<Result<_, _>>()?;
            if nums.len() < 2 || nums[0] < 0 || nums[1] < -1 || nums[2..].iter().any(|&v| v < 0) {
                return Err(bad());
            }
            rows.push(nums);
        }
        let len = rows.len();
        let mut bags = vec![Vec::new(); len];
        let mut parent = vec![None; len];
        let mut seen = vec![false; len];
        for r in rows {
            let t = r[0] as usize;
            if t >= len || seen[t] {
                return Err(DecompositionError::Malformed(format!("bag id {t} repeated or out of range")));
            }
            seen[t] = true;
            parent[t] = (r[1] >= 0).then(|| r[1] as usize);
            bags[t] = r[2..].iter().map(|&v| v as usize).collect();
        }
        TreeDecomposition::new(bags, parent)
    }
}

/// Max pairwise distance in `g` among `set`; BFS stops once every member is reached.
pub fn set_diameter(g: &Graph, set: &[Vertex]) -> u32 {
    if set.len() <= 1 {
        return 0;
    }
    let mut member = vec![false; g.n()];
    for &v in set {
        member[v] = true;
    }
    let mut dist = vec![UNREACHED; g.n()];
    let mut touched = Vec::new();
    let mut best = 0;
    for &s in set {
        for &v in &touched {
            dist[v] = UNREACHED;
        }
        touched.clear();
        dist[s] = 0;
        touched.push(s);
        let mut queue = VecDeque::from([s]);
        let mut remaining = set.len() - 1;
        while let Some(u) = queue.pop_front() {
            if remaining == 0 {
                break;
            }
            for &w in g.neighbors(u) {
                if dist[w] == UNREACHED {
                    dist[w] = dist[u] + 1;
                    touched.push(w);
                    if member[w] {
                        remaining -= 1;
                        best = best.max(dist[w]);
                    }
                    queue.push_back(w);
                }
            }
        }
    }
    best
}

/// Maximum-cardinality search from `start`; ties go to the smallest vertex id.
pub fn mcs_order(g: &Graph, start: Vertex) -> Vec<Vertex> {
    let n = g.n();
    let mut label = vec![0usize; n];
    let mut done = vec![false; n];
    let mut buckets: Vec<BTreeSet<Vertex>> = vec![BTreeSet::new(); n + 1];
    buckets[0].extend((0..n).filter(|&v| v != start));
    let mut order = Vec::with_capacity(n);
    let mut top = 0usize;
    let mut next = Some(start);
    while let Some(v) = next {
        done[v] = true;
        order.push(v);
        for &w in g.neighbors(v) {
            if !done[w] {
                buckets[label[w]].remove(&w);
                label[w] += 1;
                buckets[label[w]].insert(w);
                top = top.max(label[w]);
            }
        }
        while top > 0 && buckets[top].is_empty() {
            top -= 1;
        }
        next = buckets[top].pop_first();
    }
    order
}

/// Clique tree rooted at a bag containing vertex 0.
pub fn clique_tree(g: &Graph) -> Result<TreeDecomposition, DecompositionError> {
    clique_tree_from(g, 0)
}

/// Clique tree whose bags are the maximal cliques, rooted at a bag holding `start`.
pub fn clique_tree_from(g: &Graph, start: Vertex) -> Result<TreeDecomposition, DecompositionError> {
    let n = g.n();
    let order = mcs_order(g, start);
    let mut pos = vec![0usize; n];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let mut mark = vec![usize::MAX; n];
    let mut bags: Vec<Vec<Vertex>> = Vec::new();
    let mut parent: Vec<Option<usize>> = Vec::new();
    let mut clique_of = vec![0usize; n];
    let mut prev_card = 0usize;
    for (i, &v) in order.iter().enumerate() {
        let earlier: Vec<Vertex> = g.neighbors(v).iter().copied().filter(|&w| pos[w] < i).collect();
        // PEO check: earlier neighbours minus the latest one must all be adjacent to it
        if let Some(&last) = earlier.iter().max_by_key(|&&w| pos[w]) {
            for &w in g.neighbors(last) {
                mark[w] = i;
            }
            if earlier.iter().any(|&w| w != last && mark[w] != i) {
                return Err(DecompositionError::NotChordal(v));
            }
            if earlier.len() <= prev_card {
                bags.push(earlier.iter().copied().chain([v]).collect());
                parent.push(Some(clique_of[last]));
            } else {
                bags.last_mut().expect("current clique").push(v);
            }
        } else {
            bags.push(vec![v]);
            parent.push(None);
        }
        clique_of[v] = bags.len() - 1;
        prev_card = earlier.len();
    }
    TreeDecomposition::new(bags, parent)
}

/// A decomposition together with its certified maximum bag diameter.
#[derive(Debug, Clone)]
pub struct BoundedDecomposition {
    pub td: TreeDecomposition,
    pub diameter: u32,
}

/// Step budget for the layering construction.
pub const DEFAULT_LAYERING_BUDGET: u64 = 100_000_000;

/// Layering decomposition rooted at vertex 0.
pub fn bounded_diameter_decomposition(g: &Graph) -> Result<BoundedDecomposition, DecompositionError> {
    layering_decomposition(g, 0, DEFAULT_LAYERING_BUDGET)
}

/// Clusters are the components of `L_j` inside `G[L_{>=j}]`; the bag of a
/// cluster is the cluster plus its neighbours one layer up.
pub fn layering_decomposition(g: &Graph, root: Vertex, budget: u64) -> Result<BoundedDecomposition, DecompositionError> {
    let td = layering_tree(g, root, budget)?.with_diameters(g);
    let diameter = td.max_bag_diameter(g);
    Ok(BoundedDecomposition { td, diameter })
}

/// The layering decomposition without diameter certification.
pub fn layering_tree(g: &Graph, root: Vertex, budget: u64) -> Result<TreeDecomposition, DecompositionError> {
    let n = g.n();
    let layer = g.bfs_distances(root);
    let depth = layer.iter().copied().max().unwrap_or(0) as usize;
    let mut by_layer = vec![Vec::new(); depth + 1];
    for v in 0..n {
        by_layer[layer[v] as usize].push(v);
    }
    let mut cluster_of = vec![usize::MAX; n];
    let mut clusters: Vec<Vec<Vertex>> = Vec::new();
    let mut work = 0u64;
    // Process layers deepest first with a union-find over G[L_{>=j}].
    let mut dsu = Dsu::new(n);
    let mut active = vec![false; n];
    let mut cluster_layer = Vec::new();
    for j in (0..=depth).rev() {
        for &v in &by_layer[j] {
            active[v] = true;
        }
        for &v in &by_layer[j] {
            for &w in g.neighbors(v) {
                work += 1;
                if active[w] {
                    dsu.union(v, w);
                }
            }
        }
        if work > budget {
            return Err(DecompositionError::WorkBudget(budget));
        }
        let mut slot: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
        for &v in &by_layer[j] {
            let r = dsu.find(v);
            let id = *slot.entry(r).or_insert_with(|| {
                clusters.push(Vec::new());
                cluster_layer.push(j);
                clusters.len() - 1
            });
            clusters[id].push(v);
            cluster_of[v] = id;
        }
    }
    let mut bags = Vec::with_capacity(clusters.len());
    let mut parent = Vec::with_capacity(clusters.len());
    for (id, cluster) in clusters.iter().enumerate() {
        let mut bag = cluster.clone();
        let mut par = None;
        for &v in cluster {
            for &w in g.neighbors(v) {
                if layer[w] + 1 == layer[v] {
                    bag.push(w);
                    par = Some(cluster_of[w]);
                }
            }
        }
        debug_assert!(par.is_some() || cluster_layer[id] == 0);
        bags.push(bag);
        parent.push(par);
    }
    TreeDecomposition::new(bags, parent)
}

/// Disjoint-set forest with union by size.
#[derive(Debug, Clone)]
pub(crate) struct Dsu {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl Dsu {
    pub(crate) fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> usize {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return a;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        a
    }

    pub(crate) fn size_of(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }
}

/// A bag separating `A` together with the components of `G[A \ bag]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalancedBag {
    pub bag: usize,
    /// Components sorted by decreasing size, then smallest member.
    pub components: Vec<Vec<Vertex>>,
}

impl BalancedBag {
    pub fn sizes(&self) -> Vec<usize> {
        self.components.iter().map(Vec::len).collect()
    }
}

/// Connected components of `G[set]` (members flagged in `inside`).
pub fn components_within(g: &Graph, set: &[Vertex], inside: &[bool]) -> Vec<Vec<Vertex>> {
    let mut seen = vec![false; g.n()];
    let mut comps = Vec::new();
    for &s in set {
        if seen[s] || !inside[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut i = 0;
        while i < comp.len() {
            let u = comp[i];
            i += 1;
            for &w in g.neighbors(u) {
                if inside[w] && !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    comps
}

/// Precomputed tree structure reused across many balanced-bag searches.
#[derive(Debug, Clone)]
pub struct BagIndex {
    vertex_bags: Vec<Vec<usize>>,
    top: Vec<usize>,
    postorder: Vec<usize>,
}

impl BagIndex {
    pub fn new(td: &TreeDecomposition, n: usize) -> Self {
        let vertex_bags = td.vertex_bags(n);
        let top = vertex_bags
            .iter()
            .map(|bs| bs.iter().copied().min_by_key(|&t| (td.depth(t), t)).unwrap_or(usize::MAX))
            .collect();
        let mut postorder = Vec::with_capacity(td.len());
        let mut stack = vec![(td.root(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                postorder.push(t);
            } else {
                stack.push((t, true));
                for &c in td.children(t).iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        BagIndex { vertex_bags, top, postorder }
    }
}

/// First bag in (depth, id) order whose removal leaves components of `G[A \ bag]`
/// of size at most `|A| / 2`. Panics if none exists.
pub fn find_balanced_bag(td: &TreeDecomposition, g: &Graph, a: &[Vertex]) -> BalancedBag {
    let index = BagIndex::new(td, g.n());
    find_balanced_bag_indexed(td, &index, g, a)
}

/// Same as [`find_balanced_bag`] with a reusable index.
///
/// Vertices of `A` outside a bag `t` fall into exactly one branch of the tree
/// around `t`. Child branches are scored bottom-up with a union-find; the
/// branch through the parent is bounded from both sides and only searched
/// explicitly when the bounds cannot decide.
pub fn find_balanced_bag_indexed(td: &TreeDecomposition, index: &BagIndex, g: &Graph, a: &[Vertex]) -> BalancedBag {
    assert!(!a.is_empty(), "balanced bag requested for an empty set");
    let n = g.n();
    let half = a.len() / 2;
    let mut in_a = vec![false; n];
    for &v in a {
        in_a[v] = true;
    }
    let bags = td.len();
    let mut tops_at: Vec<Vec<Vertex>> = vec![Vec::new(); bags];
    for &v in a {
        tops_at[index.top[v]].push(v);
    }
    // bottom-up: cnt = |A ∩ V_sub(t)|, best = largest component of G[A ∩ V_sub(t)]
    let mut cnt = vec![0usize; bags];
    let mut best = vec![0usize; bags];
    let mut added = vec![false; n];
    let mut dsu = Dsu::new(n);
    for &t in &index.postorder {
        let mut c = tops_at[t].len();
        let mut b = 0;
        for &ch in td.children(t) {
            c += cnt[ch];
            b = b.max(best[ch]);
        }
        for &v in &tops_at[t] {
            added[v] = true;
        }
        for &v in &tops_at[t] {
            for &w in g.neighbors(v) {
                if added[w] {
                    dsu.union(v, w);
                }
            }
        }
        for &v in &tops_at[t] {
            b = b.max(dsu.size_of(v));
        }
        cnt[t] = c;
        best[t] = b;
    }
    // top-down lower bound on the largest component in the parent-side branch
    let mut up_lb = vec![0usize; bags];
    let mut order: Vec<usize> = index.postorder.iter().rev().copied().collect();
    for &t in &order {
        let ch = td.children(t);
        if ch.is_empty() {
            continue;
        }
        let (mut m1, mut m2) = (0usize, 0usize);
        for &c in ch {
            if best[c] >= m1 {
                m2 = m1;
                m1 = best[c];
            } else if best[c] > m2 {
                m2 = best[c];
            }
        }
        for &c in ch {
            let sib = if best[c] == m1 { m2 } else { m1 };
            up_lb[c] = up_lb[t].max(sib);
        }
    }
    let mut candidates: Vec<usize> = a.iter().flat_map(|&v| index.vertex_bags[v].iter().copied()).collect();
    candidates.sort_unstable_by_key(|&t| (td.depth(t), t));
    candidates.dedup();
    order.clear();
    let mut inside = vec![false; n];
    for t in candidates {
        if td.children(t).iter().any(|&c| best[c] > half) || up_lb[t] > half {
            continue;
        }
        let in_bag = td.bag(t).iter().filter(|&&v| in_a[v]).count();
        let up_size = a.len() - in_bag - td.children(t).iter().map(|&c| cnt[c]).sum::<usize>();
        if up_size > half {
            // explicit search of the parent-side branch
            let bag = td.bag(t);
            for &v in a {
                inside[v] = bag.binary_search(&v).is_err();
            }
            let ok = components_within(g, a, &inside).first().map_or(0, Vec::len) <= half;
            for &v in a {
                inside[v] = false;
            }
            if !ok {
                continue;
            }
        }
        let bag = td.bag(t);
        for &v in a {
            inside[v] = bag.binary_search(&v).is_err();
        }
        let components = components_within(g, a, &inside);
        debug_assert!(components.iter().all(|c| c.len() <= half));
        return BalancedBag { bag: t, components };
    }
    panic!("no 1/2-balanced bag exists for a set of size {}; the decomposition is invalid", a.len());
}
