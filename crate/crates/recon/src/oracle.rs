//! Counting oracles over hidden ground truth, and the adapters between query models.

use std::collections::{HashMap, VecDeque};
use std::io::Write;

use crate::graph::{Graph, Vertex, UNREACHED};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("element {v} out of range (n = {n})")]
    OutOfRange { v: usize, n: usize },
    #[error("invalid argument: {0}")]
    BadArgument(String),
}

/// Default ring-buffer capacity for transcripts.
pub const DEFAULT_TRANSCRIPT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub kind: &'static str,
    pub args: [i64; 3],
    pub answer: i64,
}

/// Bounded log of answered queries; the oldest entries are dropped first.
#[derive(Debug, Clone)]
pub struct Transcript {
    cap: usize,
    entries: VecDeque<TranscriptEntry>,
    dropped: u64,
}

impl Transcript {
    pub fn new(cap: usize) -> Self {
        Transcript { cap: cap.max(1), entries: VecDeque::new(), dropped: 0 }
    }

    pub fn push(&mut self, kind: &'static str, args: [i64; 3], answer: i64) {
        if self.entries.len() == self.cap {
            self.entries.pop_front();
            self.dropped += 1;
        }
        self.entries.push_back(TranscriptEntry { kind, args, answer });
    }

    pub fn entries(&self) -> impl Iterator<Item = &TranscriptEntry> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// CSV with header `query_type,arg1,arg2,arg3,answer`; unused arguments are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["query_type", "arg1", "arg2", "arg3", "answer"])?;
        for e in &self.entries {
            let arg = |x: i64| if x < 0 { String::new() } else { x.to_string() };
            w.write_record([e.kind.to_string(), arg(e.args[0]), arg(e.args[1]), arg(e.args[2]), e.answer.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Anything that answers hop-distance queries and counts them.
pub trait DistanceQuery {
    fn n(&self) -> usize;

    fn query(&mut self, u: Vertex, v: Vertex) -> Result<u32, OracleError>;

    /// Number of single-pair queries charged so far.
    fn queries(&self) -> u64;

    /// `Query(A, B)`: all `|A|·|B|` pairs, answers row-major.
    fn query_batch(&mut self, a: &[Vertex], b: &[Vertex]) -> Result<Vec<u32>, OracleError> {
        let mut out = Vec::with_capacity(a.len() * b.len());
        for &u in a {
            for &v in b {
                out.push(self.query(u, v)?);
            }
        }
        Ok(out)
    }
}

/// Distance oracle over a hidden graph. BFS rows are computed lazily.
pub struct DistanceOracle<'g> {
    graph: &'g Graph,
    rows: Vec<Option<Box<[u32]>>>,
    count: u64,
    transcript: Option<Transcript>,
}

impl<'g> DistanceOracle<'g> {
    pub fn new(graph: &'g Graph) -> Self {
        DistanceOracle { graph, rows: vec![None; graph.n()], count: 0, transcript: None }
    }

    pub fn with_transcript(mut self, cap: usize) -> Self {
        self.transcript = Some(Transcript::new(cap));
        self
    }

    pub fn transcript(&self) -> Option<&Transcript> {
        self.transcript.as_ref()
    }

    fn lookup(&mut self, u: Vertex, v: Vertex) -> u32 {
        if let Some(row) = &self.rows[v] {
            return row[u];
        }
        let row = self.rows[u].get_or_insert_with(|| self.graph.bfs_distances(u).into_boxed_slice());
        row[v]
    }
}

impl DistanceQuery for DistanceOracle<'_> {
    fn n(&self) -> usize {
        self.graph.n()
    }

    fn query(&mut self, u: Vertex, v: Vertex) -> Result<u32, OracleError> {
        let n = self.graph.n();
        for w in [u, v] {
            if w >= n {
                return Err(OracleError::OutOfRange { v: w, n });
            }
        }
        self.count += 1;
        let d = self.lookup(u, v);
        if let Some(t) = &mut self.transcript {
            t.push("distance", [u as i64, v as i64, -1], d as i64);
        }
        Ok(d)
    }

    fn queries(&self) -> u64 {
        self.count
    }
}

/// Per-run answer cache: a pair is charged to the inner oracle at most once.
pub struct MemoQuery<'a> {
    inner: &'a mut dyn DistanceQuery,
    cache: Vec<u32>,
    n: usize,
    hits: u64,
}

impl<'a> MemoQuery<'a> {
    pub fn new(inner: &'a mut dyn DistanceQuery) -> Self {
        let n = inner.n();
        MemoQuery { inner, cache: vec![UNREACHED; n * n], n, hits: 0 }
    }

    /// Answer if the pair was already asked; never charges.
    pub fn known(&self, u: Vertex, v: Vertex) -> Option<u32> {
        let d = self.cache[u * self.n + v];
        (d != UNREACHED).then_some(d)
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }
}

impl DistanceQuery for MemoQuery<'_> {
    fn n(&self) -> usize {
        self.n
    }

    fn query(&mut self, u: Vertex, v: Vertex) -> Result<u32, OracleError> {
        if u >= self.n || v >= self.n {
            return Err(OracleError::OutOfRange { v: u.max(v), n: self.n });
        }
        if let Some(d) = self.known(u, v) {
            self.hits += 1;
            return Ok(d);
        }
        let d = self.inner.query(u, v)?;
        self.cache[u * self.n + v] = d;
        self.cache[v * self.n + u] = d;
        Ok(d)
    }

    fn queries(&self) -> u64 {
        self.inner.queries()
    }
}

/// `v` lies on a shortest `u`–`w` path, decided with three distance queries.
pub struct BetweennessAdapter<'a> {
    inner: &'a mut dyn DistanceQuery,
    memo: Option<HashMap<(Vertex, Vertex), u32>>,
}

impl<'a> BetweennessAdapter<'a> {
    pub fn new(inner: &'a mut dyn DistanceQuery) -> Self {
        BetweennessAdapter { inner, memo: None }
    }

    /// Reuses answers for repeated pairs.
    pub fn memoizing(inner: &'a mut dyn DistanceQuery) -> Self {
        BetweennessAdapter { inner, memo: Some(HashMap::new()) }
    }

    pub fn is_memoizing(&self) -> bool {
        self.memo.is_some()
    }

    fn dist(&mut self, a: Vertex, b: Vertex) -> Result<u32, OracleError> {
        let key = (a.min(b), a.max(b));
        if let Some(m) = &self.memo {
            if let Some(&d) = m.get(&key) {
                return Ok(d);
            }
        }
        let d = self.inner.query(a, b)?;
        if let Some(m) = &mut self.memo {
            m.insert(key, d);
        }
        Ok(d)
    }

    pub fn between(&mut self, u: Vertex, v: Vertex, w: Vertex) -> Result<bool, OracleError> {
        let uv = self.dist(u, v)?;
        let vw = self.dist(v, w)?;
        let uw = self.dist(u, w)?;
        Ok(uv + vw == uw)
    }

    pub fn queries(&self) -> u64 {
        self.inner.queries()
    }
}

fn check_function(f: &[Vec<u32>], delta: u32) -> Result<usize, OracleError> {
    let k = f.first().map_or(0, Vec::len);
    for (a, word) in f.iter().enumerate() {
        if word.len() != k {
            return Err(OracleError::BadArgument(format!("word of element {a} has length {} != {k}", word.len())));
        }
        if let Some(&s) = word.iter().find(|&&s| s == 0 || s > delta) {
            return Err(OracleError::BadArgument(format!("symbol {s} of element {a} outside [1, {delta}]")));
        }
    }
    Ok(k)
}

/// Coordinate oracle over hidden `f: [n] -> [Δ]^k`. Coordinates are 1-based.
#[derive(Debug, Clone)]
pub struct CoordinateOracle {
    f: Vec<Vec<u32>>,
    delta: u32,
    k: usize,
    count: u64,
    no: u64,
    transcript: Option<Transcript>,
}

impl CoordinateOracle {
    pub fn new(f: Vec<Vec<u32>>, delta: u32) -> Result<Self, OracleError> {
        let k = check_function(&f, delta)?;
        Ok(CoordinateOracle { f, delta, k, count: 0, no: 0, transcript: None })
    }

    pub fn with_transcript(mut self, cap: usize) -> Self {
        self.transcript = Some(Transcript::new(cap));
        self
    }

    pub fn transcript(&self) -> Option<&Transcript> {
        self.transcript.as_ref()
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn delta(&self) -> u32 {
        self.delta
    }

    pub fn queries(&self) -> u64 {
        self.count
    }

    pub fn no_answers(&self) -> u64 {
        self.no
    }

    fn check(&self, a: usize, i: usize) -> Result<(), OracleError> {
        if a >= self.f.len() {
            return Err(OracleError::OutOfRange { v: a, n: self.f.len() });
        }
        if i == 0 || i > self.k {
            return Err(OracleError::BadArgument(format!("coordinate {i} outside [1, {}]", self.k)));
        }
        Ok(())
    }

    fn record(&mut self, kind: &'static str, args: [i64; 3], yes: bool) -> bool {
        self.count += 1;
        if !yes {
            self.no += 1;
        }
        if let Some(t) = &mut self.transcript {
            t.push(kind, args, yes as i64);
        }
        yes
    }

    /// Is `f(a)_i = b`?
    pub fn type1(&mut self, a: usize, b: u32, i: usize) -> Result<bool, OracleError> {
        self.check(a, i)?;
        if b == 0 || b > self.delta {
            return Err(OracleError::BadArgument(format!("symbol {b} outside [1, {}]", self.delta)));
        }
        let yes = self.f[a][i - 1] == b;
        Ok(self.record("coord1", [a as i64, b as i64, i as i64], yes))
    }

    /// Is `f(a)_i = f(a2)_i`?
    pub fn type2(&mut self, a: usize, a2: usize, i: usize) -> Result<bool, OracleError> {
        self.check(a, i)?;
        self.check(a2, i)?;
        let yes = self.f[a][i - 1] == self.f[a2][i - 1];
        Ok(self.record("coord2", [a as i64, a2 as i64, i as i64], yes))
    }
}

/// Argument of a word query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WordQuery {
    /// Element against an explicit word of length `k`; `0` is a padding symbol.
    Word(usize, Vec<u32>),
    /// Element against element.
    Element(usize, usize),
}

/// Longest-common-prefix oracle over hidden `f: [n] -> [Δ]^k`.
#[derive(Debug, Clone)]
pub struct WordOracle {
    f: Vec<Vec<u32>>,
    delta: u32,
    k: usize,
    count: u64,
    transcript: Option<Transcript>,
}

impl WordOracle {
    pub fn new(f: Vec<Vec<u32>>, delta: u32) -> Result<Self, OracleError> {
        let k = check_function(&f, delta)?;
        Ok(WordOracle { f, delta, k, count: 0, transcript: None })
    }

    pub fn with_transcript(mut self, cap: usize) -> Self {
        self.transcript = Some(Transcript::new(cap));
        self
    }

    pub fn transcript(&self) -> Option<&Transcript> {
        self.transcript.as_ref()
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn delta(&self) -> u32 {
        self.delta
    }

    pub fn queries(&self) -> u64 {
        self.count
    }

    pub fn query(&mut self, q: &WordQuery) -> Result<usize, OracleError> {
        let n = self.f.len();
        let (a, other, kind, arg2) = match q {
            WordQuery::Word(a, b) => {
                if b.len() != self.k {
                    return Err(OracleError::BadArgument(format!("word of length {} != {}", b.len(), self.k)));
                }
                if let Some(&s) = b.iter().find(|&&s| s > self.delta) {
                    return Err(OracleError::BadArgument(format!("symbol {s} outside [0, {}]", self.delta)));
                }
                (*a, b.as_slice(), "word1", -1)
            }
            WordQuery::Element(a, a2) => {
                if *a2 >= n {
                    return Err(OracleError::OutOfRange { v: *a2, n });
                }
                (*a, self.f[*a2].as_slice(), "word2", *a2 as i64)
            }
        };
        if a >= n {
            return Err(OracleError::OutOfRange { v: a, n });
        }
        let ans = common_prefix(&self.f[a], other);
        self.count += 1;
        if let Some(t) = &mut self.transcript {
            t.push(kind, [a as i64, arg2, -1], ans as i64);
        }
        Ok(ans)
    }
}

fn common_prefix(x: &[u32], y: &[u32]) -> usize {
    x.iter().zip(y).take_while(|(p, q)| p == q).count()
}

/// Answers a word query with coordinate queries, checking prefixes in order.
/// Stops at the first NO, so at most one NO is incurred.
pub fn word_via_coordinates(co: &mut CoordinateOracle, q: &WordQuery) -> Result<usize, OracleError> {
    let k = co.k();
    for i in 1..=k {
        let yes = match q {
            WordQuery::Word(a, b) => {
                if b.len() != k {
                    return Err(OracleError::BadArgument(format!("word of length {} != {k}", b.len())));
                }
                // the padding symbol never matches
                if b[i - 1] == 0 {
                    co.check(*a, i)?;
                    co.record("coord1", [*a as i64, 0, i as i64], false)
                } else {
                    co.type1(*a, b[i - 1], i)?
                }
            }
            WordQuery::Element(a, a2) => co.type2(*a, *a2, i)?,
        };
        if !yes {
            return Ok(i - 1);
        }
    }
    Ok(k)
}

/// Membership oracle over a hidden partition given as class ids.
#[derive(Debug, Clone)]
pub struct MembershipOracle {
    class: Vec<usize>,
    count: u64,
    no: u64,
    transcript: Option<Transcript>,
}

impl MembershipOracle {
    pub fn new(class: Vec<usize>) -> Self {
        MembershipOracle { class, count: 0, no: 0, transcript: None }
    }

    pub fn with_transcript(mut self, cap: usize) -> Self {
        self.transcript = Some(Transcript::new(cap));
        self
    }

    pub fn transcript(&self) -> Option<&Transcript> {
        self.transcript.as_ref()
    }

    pub fn n(&self) -> usize {
        self.class.len()
    }

    pub fn queries(&self) -> u64 {
        self.count
    }

    pub fn no_answers(&self) -> u64 {
        self.no
    }

    pub fn same(&mut self, a: usize, b: usize) -> Result<bool, OracleError> {
        let n = self.class.len();
        for x in [a, b] {
            if x >= n {
                return Err(OracleError::OutOfRange { v: x, n });
            }
        }
        self.count += 1;
        let yes = self.class[a] == self.class[b];
        if !yes {
            self.no += 1;
        }
        if let Some(t) = &mut self.transcript {
            t.push("membership", [a as i64, b as i64, -1], yes as i64);
        }
        Ok(yes)
    }
}
