//! Command-line front end: sampling, adversaries, checks, cycle search, oracles and scans.

pub mod scan;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use trl_core::expand::rooted_census;
use trl_core::hypercore::{is_tight_cycle, verify_reservoir, ReservoirMode, TightCycle};
use trl_core::matchlp::{fractional_matching, guarantee_check, WeightedComplex};
use trl_core::pipeline::{build_reservoir_path, exact_cap, exact_tight_ham, find_tight_hamilton, AbsorberTemplate, PipelineConfig};
use trl_core::randmodel::{apply_adversary, count_nongood, sample_gnp, upper_reg_sample, AdversarySpec, GnpParams, GoodnessParams, Parity};
use trl_core::{Hypergraph, TrlError};

use scan::{AdversaryToken, ScanSpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("budget exhausted: {0}")]
    Budget(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Parse { .. } | CliError::Io(_) | CliError::Json(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

impl From<TrlError> for CliError {
    fn from(e: TrlError) -> Self {
        match e {
            TrlError::Parse { line, msg } => CliError::Parse { line, msg },
            TrlError::Cap(m) => CliError::Budget(m),
            other => CliError::Validation(other.to_string()),
        }
    }
}

type Res<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "trl", version, about = "Tight Hamilton cycles in random hypergraphs: search, oracles and scans")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Sample G^(k)(n, p) and write it in the text format.
    Sample {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply an edge-deleting adversary to a hypergraph file.
    Adversary(AdversaryArgs),
    /// Report a structural statistic of a hypergraph file.
    Check {
        #[arg(value_enum)]
        what: CheckKind,
        #[arg(long)]
        input: PathBuf,
        /// Fail (exit 2) when the minimum codegree is below this.
        #[arg(long)]
        min: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 1)]
        ell: usize,
        /// Goodness is measured toward the first `s-size` vertices.
        #[arg(long)]
        s_size: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 200)]
        witnesses: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Search for a tight Hamilton cycle; the result is always verified.
    Find {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        pipe: PipeArgs,
        /// Witness cycle, one vertex per line.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stage trace as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Check that a cycle file is a tight Hamilton cycle of a hypergraph.
    Verify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        cycle: PathBuf,
    },
    /// Exact Hamiltonicity by subset dynamic programming.
    Oracle {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a reservoir path and verify every skip set.
    ReservoirDemo {
        #[arg(long, default_value_t = 6)]
        r: usize,
        /// Hypergraph file; sampled from --n/--p/--seed when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 60)]
        n: usize,
        #[arg(long, default_value_t = 0.3)]
        p: f64,
        #[command(flatten)]
        pipe: PipeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded scan over (n, p, gamma, adversary) writing CSV and an SVG heat map.
    Scan(ScanArgs),
    /// Rooted tight-path census from an ordered (k-1)-tuple.
    Census {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated root tuple.
        #[arg(long)]
        root: String,
        #[arg(long, default_value_t = 2)]
        ell: usize,
        #[arg(long)]
        cap: Option<u64>,
    },
    /// Maximum fractional matching of a weighted complex given as JSON.
    Lp {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum CheckKind {
    Codegree,
    Goodness,
    UpperReg,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum AdvKind {
    Thin,
    Parity,
    Repair,
}

#[derive(Args, Debug)]
pub struct AdversaryArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    kind: AdvKind,
    /// Deletion probability for thin/repair.
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    /// Parity set is {0, ..., a-size - 1}.
    #[arg(long, default_value_t = 0)]
    a_size: usize,
    #[arg(long, default_value = "odd")]
    keep: String,
    /// Codegree floor for repair.
    #[arg(long, default_value_t = 0)]
    target: usize,
    #[arg(long)]
    host_capped: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct PipeArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    #[arg(long, default_value_t = 12)]
    attempts: usize,
    #[arg(long, default_value_t = 200_000)]
    node_budget: u64,
    #[arg(long, default_value_t = 0.15)]
    nu_res: f64,
    #[arg(long, default_value_t = 4)]
    conn_len: usize,
    /// Use the spiked absorber with this many spikes per side instead of the direct one.
    #[arg(long)]
    spikes: Option<usize>,
}

impl PipeArgs {
    pub fn config(&self) -> PipelineConfig {
        PipelineConfig {
            seed: self.seed,
            gamma: self.gamma,
            attempts: self.attempts,
            node_budget: self.node_budget,
            nu_res: self.nu_res,
            conn_max_len: self.conn_len,
            template: match self.spikes {
                Some(t) => AbsorberTemplate::Spiked { t },
                None => AbsorberTemplate::Direct,
            },
            ..PipelineConfig::default()
        }
    }
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Comma-separated vertex counts.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    p: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    gamma: Vec<f64>,
    /// Comma-separated adversaries: none, thin:Q, repair:Q, parity:A:odd|even.
    #[arg(long, value_delimiter = ',', default_value = "repair:0.3")]
    adversary: Vec<String>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 60_000)]
    time_cap_ms: u64,
    /// Largest n that also gets an exact verdict.
    #[arg(long, default_value_t = 13)]
    dp_cap: usize,
    /// Fill the ms column (makes the CSV run-dependent).
    #[arg(long)]
    record_time: bool,
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    attempts: usize,
    #[arg(long, default_value_t = 200_000)]
    node_budget: u64,
}

fn read_graph(path: &Path) -> Res<Hypergraph> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Hypergraph::from_text(&text).map_err(|e| match e {
        TrlError::Parse { line, msg } => CliError::Parse { line, msg: format!("{}: {msg}", path.display()) },
        other => CliError::Input(format!("{}: {other}", path.display())),
    })
}

fn emit(out: Option<&Path>, text: &str) -> Res<()> {
    match out {
        Some(p) => scan::write_atomic(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn json<T: Serialize>(v: &T) -> Res<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn cycle_text(c: &TightCycle) -> String {
    c.cyc.iter().map(|v| format!("{v}\n")).collect()
}

fn read_cycle(path: &Path) -> Res<Vec<u32>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| l.trim().parse::<u32>().map_err(|_| CliError::Parse { line: i + 1, msg: format!("'{l}' is not a vertex") }))
        .collect()
}

pub fn run(cli: Cli) -> Res<()> {
    match cli.cmd {
        Cmd::Sample { n, k, p, seed, out } => {
            if k < 2 || !(0.0..=1.0).contains(&p) {
                return Err(CliError::Validation("need k >= 2 and p in [0,1]".into()));
            }
            let g = sample_gnp(&GnpParams { n, k, p, seed });
            emit(out.as_deref(), &g.to_text())
        }
        Cmd::Adversary(a) => {
            let g = read_graph(&a.input)?;
            let keep = match a.keep.as_str() {
                "odd" => Parity::Odd,
                "even" => Parity::Even,
                x => return Err(CliError::Validation(format!("keep must be odd or even, got '{x}'"))),
            };
            let spec = match a.kind {
                AdvKind::Thin => AdversarySpec::RandomThinning { q: a.q },
                AdvKind::Parity => AdversarySpec::Parity { a: (0..a.a_size as u32).collect(), keep },
                AdvKind::Repair => AdversarySpec::CodegreeFloorRepair { q: a.q, target: a.target, host_capped: a.host_capped },
            };
            spec.validate(g.n())?;
            let h = apply_adversary(&g, &spec, a.seed)?;
            emit(a.out.as_deref(), &h.to_text())
        }
        Cmd::Check { what, input, min, eps, p, ell, s_size, eta, witnesses, seed } => {
            let g = read_graph(&input)?;
            let density = p.unwrap_or_else(|| g.edge_count() as f64 / trl_core::comb::binom(g.n() as u64, g.k() as u64).max(1) as f64);
            match what {
                CheckKind::Codegree => {
                    let d = g.min_codegree();
                    println!("{d}");
                    if let Some(m) = min.filter(|&m| d < m) {
                        return Err(CliError::Validation(format!("minimum codegree {d} below {m}")));
                    }
                }
                CheckKind::Goodness => {
                    let s: BTreeSet<u32> = (0..s_size.unwrap_or(g.n()).min(g.n()) as u32).collect();
                    let bad = count_nongood(&g, &s, GoodnessParams { eps, p: density, ell }, true);
                    println!("{bad}");
                    if bad > 0 && min.is_some() {
                        return Err(CliError::Validation(format!("{bad} (k-1)-sets are not good")));
                    }
                }
                CheckKind::UpperReg => {
                    let r = upper_reg_sample(&g, density, eta, witnesses, seed);
                    print!("{}", json(&r)?);
                    if r.violated {
                        return Err(CliError::Validation("upper regularity violated".into()));
                    }
                }
            }
            Ok(())
        }
        Cmd::Find { input, pipe, out, trace } => {
            let g = read_graph(&input)?;
            let res = find_tight_hamilton(&g, &pipe.config());
            if let Some(t) = &trace {
                scan::write_atomic(t, json(&res)?.as_bytes())?;
            }
            match (&res.cycle, &res.failure) {
                (Some(c), _) => {
                    if !is_tight_cycle(&g, &c.cyc)? {
                        return Err(CliError::Validation("internal error: cycle failed verification".into()));
                    }
                    emit(out.as_deref(), &cycle_text(c))?;
                    eprintln!("verified tight Hamilton cycle on {} vertices", g.n());
                    Ok(())
                }
                (None, f) => {
                    let msg = f.as_ref().map(|f| format!("stage {}: {}", f.stage.name(), f.cause)).unwrap_or_default();
                    Err(CliError::Budget(msg))
                }
            }
        }
        Cmd::Verify { input, cycle } => {
            let g = read_graph(&input)?;
            let c = read_cycle(&cycle)?;
            if is_tight_cycle(&g, &c)? {
                println!("valid");
                Ok(())
            } else {
                Err(CliError::Validation("not a tight Hamilton cycle".into()))
            }
        }
        Cmd::Oracle { input, cap, out } => {
            let g = read_graph(&input)?;
            let cap = cap.unwrap_or_else(|| exact_cap(g.k()));
            let res = exact_tight_ham(&g, Some(cap))?;
            println!("{}", res.is_some());
            if let (Some(c), Some(o)) = (&res, &out) {
                scan::write_atomic(o, cycle_text(c).as_bytes())?;
            }
            Ok(())
        }
        Cmd::ReservoirDemo { r, input, n, p, pipe, out } => {
            let g = match &input {
                Some(path) => read_graph(path)?,
                None => sample_gnp(&GnpParams { n, k: 3, p, seed: pipe.seed }),
            };
            if r > 16 || r > g.n() {
                return Err(CliError::Validation(format!("reservoir size {r} too large for exhaustive verification")));
            }
            let cfg = pipe.config();
            let rv: Vec<u32> = (0..r as u32).map(|i| (i * 7 + 1) % g.n() as u32).collect::<BTreeSet<_>>().into_iter().collect();
            let (path, stats) = build_reservoir_path(&g, &rv, &BTreeSet::new(), &cfg)
                .map_err(|f| CliError::Budget(format!("stage {}: {}", f.stage.name(), f.cause)))?;
            let report = verify_reservoir(&g, &path, ReservoirMode::Exhaustive, 16)?;
            #[derive(Serialize)]
            struct Demo<'a> {
                reservoir: &'a [u32],
                path: &'a [u32],
                gadgets: usize,
                c: f64,
                ok: bool,
                subsets_checked: usize,
                failures: usize,
            }
            let demo = Demo {
                reservoir: &path.reservoir,
                path: &path.base.seq,
                gadgets: stats.gadgets,
                c: stats.c,
                ok: report.ok,
                subsets_checked: report.subsets_checked,
                failures: report.failures.len(),
            };
            emit(out.as_deref(), &json(&demo)?)?;
            eprintln!("checked {} skip sets: {}", report.subsets_checked, if report.ok { "all pass" } else { "FAILURES" });
            if report.ok {
                Ok(())
            } else {
                Err(CliError::Validation("reservoir verification failed".into()))
            }
        }
        Cmd::Scan(a) => {
            let adversaries = a.adversary.iter().map(|s| AdversaryToken::parse(s)).collect::<Res<Vec<_>>>()?;
            let spec = ScanSpec {
                k: a.k,
                n: a.n,
                p: a.p,
                gamma: a.gamma,
                adversaries,
                trials: a.trials,
                seed: a.seed,
                time_cap_ms: a.time_cap_ms,
                dp_cap: a.dp_cap,
                record_time: a.record_time,
                pipeline: PipelineConfig { attempts: a.attempts, node_budget: a.node_budget, ..PipelineConfig::default() },
            };
            let records = scan::run_scan(&spec, a.checkpoint.as_deref())?;
            scan::write_atomic(&a.csv, scan::to_csv(&records).as_bytes())?;
            if let Some(svg) = &a.svg {
                scan::write_atomic(svg, scan::heatmap_svg(&spec, &records).as_bytes())?;
            }
            print!("{}", scan::trend_report(&spec, &records));
            Ok(())
        }
        Cmd::Census { input, root, ell, cap } => {
            let g = read_graph(&input)?;
            let root: Vec<u32> = root
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| CliError::Validation(format!("bad root vertex '{s}'"))))
                .collect::<Res<_>>()?;
            let c = rooted_census(&g, &root, ell, &BTreeSet::new(), cap)?;
            print!("{}", json(&c.summary())?);
            if c.truncated {
                return Err(CliError::Budget("census hit its path cap".into()));
            }
            Ok(())
        }
        Cmd::Lp { input, eps, gamma } => {
            let text = std::fs::read_to_string(&input).map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
            let h: WeightedComplex = serde_json::from_str(&text).map_err(|e| CliError::Parse { line: e.line(), msg: e.to_string() })?;
            let m = fractional_matching(&h)?;
            let g = guarantee_check(&h, &m, eps, gamma);
            #[derive(Serialize)]
            struct Out<T: Serialize> {
                matching: T,
                hypotheses_hold: bool,
                guarantee_holds: bool,
            }
            print!("{}", json(&Out { matching: m.to_json(), hypotheses_hold: g.hypotheses_hold, guarantee_holds: g.holds })?);
            Ok(())
        }
    }
}

/// Thread pool size from TRL_THREADS, if set.
pub fn configure_threads() {
    if let Some(n) = std::env::var("TRL_THREADS").ok().and_then(|s| s.parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
