//! `recon`: generate instances, run reconstructions, benchmark, and run the lower-bound lab.
//!
//! Exit codes: 0 success, 1 I/O or parse error, 2 verification failure, 3 bound violation.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use recon::decomposition::clique_tree;
use recon::generators::{generate, Certificate, Family, GenSpec};
use recon::graph::is_k_chordal_with_budget;
use recon::lower_bound::{lab_balanced_no_counts, lab_lbtree, lab_partition, LabRow};
use recon::oracle::DEFAULT_TRANSCRIPT_CAP;
use recon::result::verify_edges;
use recon::{DistanceOracle, Graph, ReconParams, ReconstructionResult, Registry};
use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const BENCH_HEADER: [&str; 11] = ["algo", "family", "n", "delta", "k", "seed", "queries", "bound", "ok", "retries", "wall_ms"];

/// Step budget for the chordless-cycle search used by `auto`.
const AUTO_CYCLE_BUDGET: u64 = 20_000_000;

#[derive(Parser, Debug)]
#[command(name = "recon", version, about = "Graph reconstruction from distance queries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance and its certificate sidecar (`<out>.cert`).
    Gen(Common),
    /// Reconstruct the graph in `--in` through a counting oracle and verify the result.
    Reconstruct(Common),
    /// Run seeded trials on generated instances and append CSV rows.
    Bench(Common),
    /// Lower-bound experiments: lbtree, balanced, partition or all.
    Lab {
        experiment: String,
        #[command(flatten)]
        common: Common,
    },
    /// Check a graph's certificate sidecar and optionally a reconstructed edge list.
    Verify(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// tree, tree-random, chordal, kchordal, treelength or auto.
    #[arg(long)]
    algo: Option<String>,
    /// Instance family; defaults to the family matching `--algo`.
    #[arg(long)]
    family: Option<String>,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long)]
    delta: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 2)]
    c: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reconstructed edge list to compare against `--in` (verify only).
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    assert_bounds: bool,
    /// Write the oracle transcript CSV here (reconstruct only).
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[arg(long, env = "RECON_WORKERS", hide = true)]
    workers: Option<usize>,
}

/// Outcome that maps onto a nonzero exit code without being an error.
#[derive(Debug, PartialEq, Eq)]
enum Status {
    Ok,
    VerifyFailed,
    BoundFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::VerifyFailed) => ExitCode::from(2),
        Ok(Status::BoundFailed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Result<Status> {
    match cmd {
        Command::Gen(c) => cmd_gen(&c),
        Command::Reconstruct(c) => cmd_reconstruct(&c),
        Command::Bench(c) => cmd_bench(&c),
        Command::Lab { experiment, common } => cmd_lab(&experiment, &common),
        Command::Verify(c) => cmd_verify(&c),
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".cert");
    PathBuf::from(s)
}

fn family_for(c: &Common) -> Result<Family> {
    let name = match (&c.family, c.algo.as_deref()) {
        (Some(f), _) => f.as_str(),
        (None, Some("tree" | "tree-random")) => "tree",
        (None, Some(a)) if a != "auto" => a,
        _ => bail!("--family is required here"),
    };
    name.parse().map_err(|e| anyhow::anyhow!("{e}"))
}

fn default_k(family: Family) -> usize {
    match family {
        Family::KChordal | Family::Treelength => 4,
        _ => 1,
    }
}

fn spec_for(c: &Common, family: Family, seed: u64) -> GenSpec {
    GenSpec { family, n: c.n, delta: c.delta.unwrap_or(4), k: c.k.unwrap_or(default_k(family)), c: c.c, seed }
}

fn cmd_gen(c: &Common) -> Result<Status> {
    let family = family_for(c)?;
    let out = c.out.as_ref().context("gen needs --out")?;
    let inst = generate(&spec_for(c, family, c.seed)).map_err(|e| anyhow::anyhow!("{e}"))?;
    inst.graph.write_file(out).with_context(|| format!("writing {}", out.display()))?;
    std::fs::write(sidecar(out), inst.certificate.to_text()).context("writing certificate")?;
    println!("{} n={} m={} max_degree={}", family, inst.graph.n(), inst.graph.m(), inst.graph.max_degree());
    Ok(Status::Ok)
}

/// Cheapest algorithm whose class membership the certificate and graph confirm.
fn auto_choice(g: &Graph, cert: &Certificate) -> Result<(&'static str, usize)> {
    if !cert.check(g).map_err(|e| anyhow::anyhow!("{e}"))? {
        bail!("certificate does not validate against the graph");
    }
    if g.m() + 1 == g.n() {
        return Ok(("tree", 1));
    }
    if cert.diameter <= 1 || clique_tree(g).is_ok() {
        return Ok(("chordal", 1));
    }
    if cert.family == Family::KChordal && cert.k >= 3 && matches!(is_k_chordal_with_budget(g, cert.k, AUTO_CYCLE_BUDGET), Ok(true)) {
        return Ok(("kchordal", cert.k));
    }
    Ok(("treelength", cert.diameter.max(1) as usize))
}

fn read_cert(path: &Path) -> Result<Option<Certificate>> {
    let p = sidecar(path);
    if !p.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
    Ok(Some(Certificate::parse(&text).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?))
}

/// Resolves `(algorithm, params)` for a graph, consulting the sidecar for `auto`.
fn resolve(c: &Common, g: &Graph, cert: Option<&Certificate>, seed: u64) -> Result<(String, ReconParams)> {
    let delta = c.delta.or(cert.map(|x| x.delta)).unwrap_or_else(|| g.max_degree()).max(2);
    let algo = c.algo.as_deref().context("--algo is required")?;
    if algo == "auto" {
        let cert = cert.context("auto needs a certificate sidecar next to the input")?;
        let (name, k) = auto_choice(g, cert)?;
        return Ok((name.to_string(), ReconParams::new(delta, c.k.unwrap_or(k), seed)));
    }
    let k = c.k.or(cert.map(|x| x.k)).unwrap_or(match algo {
        "kchordal" => 3,
        _ => 1,
    });
    Ok((algo.to_string(), ReconParams::new(delta, k, seed)))
}

fn write_edges(path: &Path, n: usize, edges: &[(usize, usize)]) -> Result<()> {
    let mut s = format!("{} {}\n", n, edges.len());
    for (u, v) in edges {
        let _ = writeln!(s, "{u} {v}");
    }
    std::fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn cmd_reconstruct(c: &Common) -> Result<Status> {
    let input = c.input.as_ref().context("reconstruct needs --in")?;
    let g = Graph::read_file(input).with_context(|| format!("reading {}", input.display()))?;
    let cert = read_cert(input)?;
    let (name, params) = resolve(c, &g, cert.as_ref(), c.seed)?;
    let reg = Registry::with_builtin();
    let alg = reg.get(&name).with_context(|| format!("unknown algorithm {name:?}; known: {}", reg.names().join(", ")))?;
    let mut o = DistanceOracle::new(&g);
    if c.transcript.is_some() {
        o = o.with_transcript(DEFAULT_TRANSCRIPT_CAP);
    }
    let outcome = alg.reconstruct(&mut o, &params);
    if let (Some(path), Some(t)) = (&c.transcript, o.transcript()) {
        let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        t.write_csv(f).context("writing transcript")?;
    }
    let r = match outcome {
        Ok(r) => r,
        Err(e) => {
            eprintln!("reconstruction failed: {e}");
            return Ok(Status::VerifyFailed);
        }
    };
    if let Some(out) = &c.out {
        write_edges(out, g.n(), &r.edges)?;
    }
    let bound = alg.bound(g.n(), &params);
    let phases: Vec<String> = r.phases.iter().map(|(p, q)| format!("{p}={q}")).collect();
    println!(
        "algo={} n={} queries={} bound={} phases={}",
        r.algo,
        g.n(),
        r.queries,
        bound.map_or(String::new(), |b| format!("{b:.0}")),
        phases.join(";")
    );
    if !r.matches(&g) {
        eprintln!("reconstructed edge set differs from the input graph");
        return Ok(Status::VerifyFailed);
    }
    if c.assert_bounds && bound.is_some_and(|b| r.queries as f64 > b) {
        eprintln!("query count {} exceeds bound {:.0}", r.queries, bound.unwrap_or_default());
        return Ok(Status::BoundFailed);
    }
    Ok(Status::Ok)
}

struct BenchRow {
    algo: String,
    family: Family,
    n: usize,
    delta: usize,
    k: usize,
    seed: u64,
    result: std::result::Result<ReconstructionResult, String>,
    ok: bool,
    bound: Option<f64>,
    wall_ms: u128,
}

impl BenchRow {
    fn record(&self) -> [String; 11] {
        let (queries, retries) = match &self.result {
            Ok(r) => (r.queries.to_string(), r.retries.to_string()),
            Err(_) => (String::new(), String::new()),
        };
        [
            self.algo.clone(),
            self.family.to_string(),
            self.n.to_string(),
            self.delta.to_string(),
            self.k.to_string(),
            self.seed.to_string(),
            queries,
            self.bound.map_or(String::new(), |b| format!("{b:.0}")),
            self.ok.to_string(),
            retries,
            self.wall_ms.to_string(),
        ]
    }

    fn over_bound(&self) -> bool {
        matches!((&self.result, self.bound), (Ok(r), Some(b)) if r.queries as f64 > b)
    }
}

fn bench_trial(c: &Common, family: Family, reg: &Registry, seed: u64) -> Result<BenchRow> {
    let spec = spec_for(c, family, seed);
    let inst = generate(&spec).map_err(|e| anyhow::anyhow!("generating seed {seed}: {e}"))?;
    let (name, params) = resolve(c, &inst.graph, Some(&inst.certificate), seed)?;
    let alg = reg.get(&name).with_context(|| format!("unknown algorithm {name:?}"))?;
    let start = Instant::now();
    let mut o = DistanceOracle::new(&inst.graph);
    let result = alg.reconstruct(&mut o, &params).map_err(|e| e.to_string());
    let wall_ms = start.elapsed().as_millis();
    let ok = result.as_ref().is_ok_and(|r| verify_edges(&r.edges, &inst.graph));
    Ok(BenchRow {
        algo: name,
        family,
        n: inst.graph.n(),
        delta: params.delta,
        k: params.k,
        seed,
        bound: alg.bound(inst.graph.n(), &params),
        result,
        ok,
        wall_ms,
    })
}

/// Appends rows in one write, adding the header when the file is new or empty.
fn append_csv<const N: usize>(path: Option<&Path>, header: [&str; N], rows: &[[String; N]]) -> Result<()> {
    let fresh = path.map_or(true, |p| std::fs::metadata(p).map_or(true, |m| m.len() == 0));
    let mut w = csv::Writer::from_writer(Vec::new());
    if fresh {
        w.write_record(header)?;
    }
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().context("buffering CSV")?;
    match path {
        Some(p) => {
            let mut f = OpenOptions::new().create(true).append(true).open(p).with_context(|| format!("opening {}", p.display()))?;
            f.write_all(&bytes)?;
        }
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

fn pool(c: &Common) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = c.workers {
        b = b.num_threads(w.max(1));
    }
    b.build().context("starting worker pool")
}

fn cmd_bench(c: &Common) -> Result<Status> {
    let family = family_for(c)?;
    let reg = Registry::with_builtin();
    let seeds: Vec<u64> = (0..c.trials).map(|t| c.seed.wrapping_add(t)).collect();
    let rows: Vec<BenchRow> = pool(c)?.install(|| seeds.par_iter().map(|&s| bench_trial(c, family, &reg, s)).collect::<Result<_>>())?;
    let records: Vec<_> = rows.iter().map(BenchRow::record).collect();
    append_csv(c.out.as_deref(), BENCH_HEADER, &records)?;
    for r in &rows {
        if let Err(e) = &r.result {
            eprintln!("seed {}: {e}", r.seed);
        }
    }
    if rows.iter().any(|r| !r.ok) {
        return Ok(Status::VerifyFailed);
    }
    if c.assert_bounds && rows.iter().any(BenchRow::over_bound) {
        return Ok(Status::BoundFailed);
    }
    Ok(Status::Ok)
}

fn cmd_lab(experiment: &str, c: &Common) -> Result<Status> {
    let delta = c.delta.unwrap_or(4);
    let k = c.k.unwrap_or(1);
    let seeds = c.seed..c.seed.wrapping_add(c.trials.max(1));
    let lab = |e: recon::lower_bound::LabError| anyhow::anyhow!("{e}");
    let mut rows: Vec<LabRow> = Vec::new();
    let all = experiment == "all";
    if all || experiment == "lbtree" {
        for s in seeds.clone() {
            rows.extend(lab_lbtree(c.c, delta, k, s).map_err(lab)?);
        }
    }
    if all || experiment == "balanced" {
        rows.extend(lab_balanced_no_counts(c.c, delta, k, seeds.clone()).map_err(lab)?);
    }
    if all || experiment == "partition" {
        rows.extend(lab_partition(c.n, k.max(1), seeds.clone()).map_err(lab)?);
    }
    if rows.is_empty() {
        bail!("unknown experiment {experiment:?}; expected lbtree, balanced, partition or all");
    }
    let records: Vec<_> = rows.iter().map(LabRow::record).collect();
    append_csv(c.out.as_deref(), LabRow::HEADER, &records)?;
    Ok(if rows.iter().all(|r| r.success) { Status::Ok } else { Status::VerifyFailed })
}

fn read_edge_list(path: &Path) -> Result<(usize, Vec<(usize, usize)>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut nums = text.lines().filter(|l| !l.trim().is_empty()).enumerate().map(|(i, l)| {
        let mut it = l.split_whitespace().map(str::parse::<usize>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
            _ => bail!("{}:{}: expected two integers", path.display(), i + 1),
        }
    });
    let (n, m) = nums.next().context("empty edge list")??;
    let edges: Vec<_> = nums.collect::<Result<_>>()?;
    if edges.len() != m {
        bail!("{}: header declares {m} edges, found {}", path.display(), edges.len());
    }
    Ok((n, edges))
}

fn cmd_verify(c: &Common) -> Result<Status> {
    let input = c.input.as_ref().context("verify needs --in")?;
    let g = Graph::read_file(input).with_context(|| format!("reading {}", input.display()))?;
    let mut ok = true;
    if let Some(cert) = read_cert(input)? {
        let valid = cert.check(&g).map_err(|e| anyhow::anyhow!("{e}"))?;
        println!("certificate family={} diameter={} valid={valid}", cert.family, cert.diameter);
        ok &= valid;
    }
    if let Some(path) = &c.edges {
        let (n, edges) = read_edge_list(path)?;
        let same = n == g.n() && verify_edges(&edges, &g);
        println!("edges match={same}");
        ok &= same;
    }
    Ok(if ok { Status::Ok } else { Status::VerifyFailed })
}
