//! Reconstruction outputs, run parameters and errors shared by every algorithm.

use crate::graph::{Graph, Vertex};
use crate::oracle::{DistanceQuery, OracleError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReconError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("oracle answers are inconsistent with the assumed graph class: {0}")]
    Inconsistent(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("invalid parameters: {0}")]
    Params(String),
}

/// Class parameters known to the algorithm in advance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReconParams {
    /// Maximum degree of the hidden graph's class.
    pub delta: usize,
    /// Chordality or treelength parameter; ignored by tree and chordal.
    pub k: usize,
    /// Seed for randomized algorithms.
    pub seed: u64,
}

impl ReconParams {
    pub fn new(delta: usize, k: usize, seed: u64) -> Self {
        ReconParams { delta, k, seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub algo: String,
    /// Sorted, each edge as `(u, v)` with `u < v`.
    pub edges: Vec<(Vertex, Vertex)>,
    pub queries: u64,
    pub phases: Vec<(String, u64)>,
    pub seed: Option<u64>,
    pub retries: u64,
}

impl ReconstructionResult {
    pub fn new(algo: &str, mut edges: Vec<(Vertex, Vertex)>, tally: PhaseTally, seed: Option<u64>) -> Self {
        for e in &mut edges {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.sort_unstable();
        edges.dedup();
        ReconstructionResult {
            algo: algo.to_string(),
            edges,
            queries: tally.total(),
            phases: tally.phases.into_iter().map(|(p, q)| (p.to_string(), q)).collect(),
            seed,
            retries: 0,
        }
    }

    pub fn phase(&self, name: &str) -> Option<u64> {
        self.phases.iter().find(|(p, _)| p == name).map(|&(_, q)| q)
    }

    /// Exact edge-set equality with the ground truth.
    pub fn matches(&self, g: &Graph) -> bool {
        verify_edges(&self.edges, g)
    }
}

pub fn verify_edges(edges: &[(Vertex, Vertex)], g: &Graph) -> bool {
    let mut ours: Vec<_> = edges.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
    ours.sort_unstable();
    ours == g.edges()
}

/// Splits the oracle counter delta into named phases.
#[derive(Debug, Clone)]
pub struct PhaseTally {
    start: u64,
    last: u64,
    phases: Vec<(&'static str, u64)>,
}

impl PhaseTally {
    pub fn start(o: &dyn DistanceQuery) -> Self {
        PhaseTally { start: o.queries(), last: o.queries(), phases: Vec::new() }
    }

    /// Charges everything since the previous mark to `phase`.
    pub fn mark(&mut self, phase: &'static str, o: &dyn DistanceQuery) {
        let now = o.queries();
        let spent = now - self.last;
        self.last = now;
        match self.phases.iter_mut().find(|(p, _)| *p == phase) {
            Some(slot) => slot.1 += spent,
            None => self.phases.push((phase, spent)),
        }
    }

    pub fn total(&self) -> u64 {
        self.last - self.start
    }
}

/// `⌈log2 x⌉` for `x >= 1`.
pub fn ceil_log2(x: usize) -> u32 {
    if x <= 1 {
        0
    } else {
        usize::BITS - (x - 1).leading_zeros()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_log2_values() {
        let got: Vec<u32> = [1, 2, 3, 4, 5, 8, 9, 1024, 1025].iter().map(|&x| ceil_log2(x)).collect();
        assert_eq!(got, vec![0, 1, 2, 2, 3, 3, 4, 10, 11]);
    }

    #[test]
    fn edges_are_normalised() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let o = crate::oracle::DistanceOracle::new(&g);
        let r = ReconstructionResult::new("x", vec![(2, 1), (1, 0), (0, 1)], PhaseTally::start(&o), None);
        assert_eq!(r.edges, vec![(0, 1), (1, 2)]);
        assert!(r.matches(&g));
    }
}
