//! Name → reconstructor lookup.

use crate::chordal::{chordal_vertex_budget, reconstruct_chordal};
use crate::kchordal::reconstruct_kchordal;
use crate::oracle::DistanceQuery;
use crate::result::{ReconError, ReconParams, ReconstructionResult};
use crate::tree::{reconstruct_tree, tree_bound, TreeOptions};
use crate::treelength::{reconstruct_treelength, TreelengthOptions};
use std::collections::BTreeMap;

pub trait Reconstructor: Send + Sync {
    fn name(&self) -> &'static str;

    fn reconstruct(&self, o: &mut dyn DistanceQuery, params: &ReconParams) -> Result<ReconstructionResult, ReconError>;

    /// Proven query bound for an `n`-vertex input, if the algorithm has an explicit one.
    fn bound(&self, _n: usize, _params: &ReconParams) -> Option<f64> {
        None
    }
}

struct Tree;
struct TreeRandom;
struct Chordal;
struct KChordal;
struct Treelength;

impl Reconstructor for Tree {
    fn name(&self) -> &'static str {
        "tree"
    }

    fn reconstruct(&self, o: &mut dyn DistanceQuery, p: &ReconParams) -> Result<ReconstructionResult, ReconError> {
        Ok(reconstruct_tree(o, p.delta, &TreeOptions::default())?.0)
    }

    fn bound(&self, n: usize, p: &ReconParams) -> Option<f64> {
        Some(tree_bound(n, p.delta))
    }
}

impl Reconstructor for TreeRandom {
    fn name(&self) -> &'static str {
        "tree-random"
    }

    fn reconstruct(&self, o: &mut dyn DistanceQuery, p: &ReconParams) -> Result<ReconstructionResult, ReconError> {
        Ok(reconstruct_tree(o, p.delta, &TreeOptions { randomized: Some(p.seed), trace: false })?.0)
    }
}

impl Reconstructor for Chordal {
    fn name(&self) -> &'static str {
        "chordal"
    }

    fn reconstruct(&self, o: &mut dyn DistanceQuery, p: &ReconParams) -> Result<ReconstructionResult, ReconError> {
        Ok(reconstruct_chordal(o, p.delta)?.0)
    }

    /// Layering plus the per-vertex allowance plus `Δ²` within-layer pairs per vertex.
    fn bound(&self, n: usize, p: &ReconParams) -> Option<f64> {
        let per = chordal_vertex_budget(n, p.delta) as f64 + (p.delta * p.delta) as f64;
        Some(n as f64 * (1.0 + per))
    }
}

impl Reconstructor for KChordal {
    fn name(&self) -> &'static str {
        "kchordal"
    }

    fn reconstruct(&self, o: &mut dyn DistanceQuery, p: &ReconParams) -> Result<ReconstructionResult, ReconError> {
        Ok(reconstruct_kchordal(o, p.delta, p.k)?.0)
    }
}

impl Reconstructor for Treelength {
    fn name(&self) -> &'static str {
        "treelength"
    }

    fn reconstruct(&self, o: &mut dyn DistanceQuery, p: &ReconParams) -> Result<ReconstructionResult, ReconError> {
        Ok(reconstruct_treelength(o, p.delta, p.k, &TreelengthOptions::new(p.seed))?.0)
    }
}

/// Reconstructors selectable by name.
pub struct Registry {
    entries: BTreeMap<&'static str, Box<dyn Reconstructor>>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry { entries: BTreeMap::new() }
    }

    /// Registry with every algorithm in this crate.
    pub fn with_builtin() -> Self {
        let mut r = Registry::empty();
        r.register(Box::new(Tree));
        r.register(Box::new(TreeRandom));
        r.register(Box::new(Chordal));
        r.register(Box::new(KChordal));
        r.register(Box::new(Treelength));
        r
    }

    /// Adds or replaces the entry under `alg.name()`.
    pub fn register(&mut self, alg: Box<dyn Reconstructor>) {
        self.entries.insert(alg.name(), alg);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Reconstructor> {
        self.entries.get(name).map(|b| b.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}
