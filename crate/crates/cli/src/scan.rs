//! Seeded parameter scans: one pipeline run per (cell, trial), merged in order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use trl_core::hypercore::is_tight_cycle;
use trl_core::pipeline::{exact_tight_ham, find_tight_hamilton, PipelineConfig};
use trl_core::randmodel::{apply_adversary, sample_gnp, AdversarySpec, GnpParams, Parity};
use trl_core::Hypergraph;

use crate::CliError;

pub const CSV_HEADER: &str = "k,n,p,gamma,adversary,trial,seed,min_codegree,outcome,stage,dp_verdict,ms";

/// Adversary named on the command line; the floor target depends on the cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AdversaryToken {
    None,
    Thin(f64),
    Repair(f64),
    Parity(usize, Parity),
}

impl AdversaryToken {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Validation(format!("bad adversary '{s}' (none | thin:Q | repair:Q | parity:A:odd|even)"));
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| x.parse::<f64>().map_err(|_| bad());
        match parts.as_slice() {
            ["none"] => Ok(AdversaryToken::None),
            ["thin", q] => Ok(AdversaryToken::Thin(num(q)?)),
            ["repair", q] => Ok(AdversaryToken::Repair(num(q)?)),
            ["parity", a, keep] => {
                let a = a.parse().map_err(|_| bad())?;
                let keep = match *keep {
                    "odd" => Parity::Odd,
                    "even" => Parity::Even,
                    _ => return Err(bad()),
                };
                Ok(AdversaryToken::Parity(a, keep))
            }
            _ => Err(bad()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            AdversaryToken::None => "none".into(),
            AdversaryToken::Thin(q) => format!("thin:{q}"),
            AdversaryToken::Repair(q) => format!("repair:{q}"),
            AdversaryToken::Parity(a, keep) => format!("parity:{a}:{}", if *keep == Parity::Odd { "odd" } else { "even" }),
        }
    }

    /// Edge deletion strength used as the heat-map row order.
    pub fn strength(&self) -> f64 {
        match self {
            AdversaryToken::None => 0.0,
            AdversaryToken::Thin(q) | AdversaryToken::Repair(q) => *q,
            AdversaryToken::Parity(..) => 1.0,
        }
    }

    pub fn spec(&self, n: usize, p: f64, gamma: f64) -> Option<AdversarySpec> {
        match self {
            AdversaryToken::None => None,
            AdversaryToken::Thin(q) => Some(AdversarySpec::RandomThinning { q: *q }),
            AdversaryToken::Repair(q) => {
                let target = ((0.5 + gamma) * p * n as f64).ceil() as usize;
                Some(AdversarySpec::CodegreeFloorRepair { q: *q, target, host_capped: true })
            }
            AdversaryToken::Parity(a, keep) => Some(AdversarySpec::Parity { a: (0..*a as u32).collect(), keep: *keep }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub k: usize,
    pub n: Vec<usize>,
    pub p: Vec<f64>,
    pub gamma: Vec<f64>,
    pub adversaries: Vec<AdversaryToken>,
    pub trials: usize,
    pub seed: u64,
    /// Reported when exceeded; never cuts a run short.
    pub time_cap_ms: u64,
    pub dp_cap: usize,
    pub record_time: bool,
    pub pipeline: PipelineConfig,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.n.is_empty() || self.p.is_empty() || self.gamma.is_empty() || self.adversaries.is_empty() {
            return Err(CliError::Validation("every grid must be non-empty".into()));
        }
        if self.trials == 0 {
            return Err(CliError::Validation("trials must be at least 1".into()));
        }
        if self.k < 3 {
            return Err(CliError::Validation("k must be at least 3".into()));
        }
        if self.p.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(CliError::Validation("p outside [0,1]".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &p in &self.p {
                for &gamma in &self.gamma {
                    for adv in &self.adversaries {
                        out.push(Cell { n, p, gamma, adversary: adv.clone() });
                    }
                }
            }
        }
        out
    }

    pub fn trial_seed(&self, cell: usize, trial: usize) -> u64 {
        let mut z = self.seed ^ ((cell as u64) << 32 | trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub p: f64,
    pub gamma: f64,
    pub adversary: AdversaryToken,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub k: usize,
    pub n: usize,
    pub p: f64,
    pub gamma: f64,
    pub adversary: String,
    pub trial: usize,
    pub seed: u64,
    pub min_codegree: usize,
    /// "cycle" or "fail".
    pub outcome: String,
    pub stage: String,
    pub dp_verdict: Option<bool>,
    pub ms: Option<u64>,
}

impl ScanRecord {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.k,
            self.n,
            self.p,
            self.gamma,
            self.adversary,
            self.trial,
            self.seed,
            self.min_codegree,
            self.outcome,
            self.stage,
            self.dp_verdict.map(|b| b.to_string()).unwrap_or_default(),
            self.ms.map(|m| m.to_string()).unwrap_or_default()
        )
    }

    pub fn from_csv(line: &str) -> Result<Self, String> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(format!("expected 12 fields, found {}", f.len()));
        }
        let num = |i: usize| f[i].parse::<u64>().map_err(|_| format!("field {} is not an integer: '{}'", i + 1, f[i]));
        let flt = |i: usize| f[i].parse::<f64>().map_err(|_| format!("field {} is not a number: '{}'", i + 1, f[i]));
        let dp_verdict = match f[10] {
            "" => None,
            "true" => Some(true),
            "false" => Some(false),
            x => return Err(format!("bad dp_verdict '{x}'")),
        };
        if f[8] != "cycle" && f[8] != "fail" {
            return Err(format!("bad outcome '{}'", f[8]));
        }
        Ok(ScanRecord {
            k: num(0)? as usize,
            n: num(1)? as usize,
            p: flt(2)?,
            gamma: flt(3)?,
            adversary: f[4].to_string(),
            trial: num(5)? as usize,
            seed: num(6)?,
            min_codegree: num(7)? as usize,
            outcome: f[8].to_string(),
            stage: f[9].to_string(),
            dp_verdict,
            ms: if f[11].is_empty() { None } else { Some(num(11)?) },
        })
    }
}

pub fn instance(k: usize, cell: &Cell, seed: u64) -> Result<Hypergraph, CliError> {
    let g = sample_gnp(&GnpParams { n: cell.n, k, p: cell.p, seed });
    match cell.adversary.spec(cell.n, cell.p, cell.gamma) {
        None => Ok(g),
        Some(spec) => apply_adversary(&g, &spec, seed.wrapping_add(1)).map_err(|e| CliError::Validation(e.to_string())),
    }
}

fn run_trial(spec: &ScanSpec, ci: usize, cell: &Cell, trial: usize) -> Result<ScanRecord, CliError> {
    let seed = spec.trial_seed(ci, trial);
    let start = Instant::now();
    let g = instance(spec.k, cell, seed)?;
    let cfg = PipelineConfig { seed, gamma: cell.gamma, ..spec.pipeline };
    let res = find_tight_hamilton(&g, &cfg);
    let (outcome, stage) = match (&res.cycle, &res.failure) {
        (Some(c), _) => {
            if !is_tight_cycle(&g, &c.cyc).unwrap_or(false) {
                return Err(CliError::Validation(format!("unverified cycle in cell {ci} trial {trial}")));
            }
            ("cycle".to_string(), String::new())
        }
        (None, Some(f)) => ("fail".to_string(), f.stage.name().to_string()),
        (None, None) => ("fail".to_string(), "unknown".to_string()),
    };
    let dp_verdict = if g.n() <= spec.dp_cap && g.n() > g.k() {
        exact_tight_ham(&g, Some(spec.dp_cap)).ok().map(|c| c.is_some())
    } else {
        None
    };
    let ms = start.elapsed().as_millis() as u64;
    if spec.time_cap_ms > 0 && ms > spec.time_cap_ms {
        eprintln!("warning: cell {ci} trial {trial} took {ms} ms (cap {} ms)", spec.time_cap_ms);
    }
    Ok(ScanRecord {
        k: spec.k,
        n: cell.n,
        p: cell.p,
        gamma: cell.gamma,
        adversary: cell.adversary.label(),
        trial,
        seed,
        min_codegree: g.min_codegree(),
        outcome,
        stage,
        dp_verdict,
        ms: spec.record_time.then_some(ms),
    })
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    spec: ScanSpec,
    /// Finished cells, in order.
    records: Vec<Vec<ScanRecord>>,
}

/// Write-then-rename so a killed scan never leaves a torn checkpoint.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = PathBuf::from(path);
    let name = format!(".{}.tmp", path.file_name().and_then(|s| s.to_str()).unwrap_or("out"));
    tmp.set_file_name(name);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

pub fn run_scan(spec: &ScanSpec, checkpoint: Option<&Path>) -> Result<Vec<ScanRecord>, CliError> {
    spec.validate()?;
    let cells = spec.cells();
    let mut done: Vec<Vec<ScanRecord>> = Vec::new();
    if let Some(cp) = checkpoint.filter(|p| p.exists()) {
        let text = std::fs::read_to_string(cp)?;
        let c: Checkpoint = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", cp.display())))?;
        if c.spec == *spec {
            done = c.records;
        } else {
            eprintln!("checkpoint {} belongs to a different spec; starting over", cp.display());
        }
    }
    for ci in done.len()..cells.len() {
        let cell = &cells[ci];
        let recs: Vec<ScanRecord> = (0..spec.trials)
            .into_par_iter()
            .map(|t| run_trial(spec, ci, cell, t))
            .collect::<Result<_, _>>()?;
        done.push(recs);
        if let Some(cp) = checkpoint {
            let c = Checkpoint { spec: spec.clone(), records: done.clone() };
            write_atomic(cp, serde_json::to_string(&c)?.as_bytes())?;
        }
    }
    Ok(done.into_iter().flatten().collect())
}

pub fn to_csv(records: &[ScanRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

pub fn parse_csv(text: &str) -> Result<Vec<ScanRecord>, CliError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        _ => return Err(CliError::Parse { line: 1, msg: format!("header must be '{CSV_HEADER}'") }),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| ScanRecord::from_csv(l).map_err(|msg| CliError::Parse { line: i + 2, msg }))
        .collect()
}

/// Rebuilds each "cycle" record's instance from its seed, reruns the pipeline and checks the cycle.
pub fn reverify(records: &[ScanRecord], spec: &ScanSpec) -> Result<usize, CliError> {
    let mut checked = 0;
    for r in records.iter().filter(|r| r.outcome == "cycle") {
        let adversary = AdversaryToken::parse(&r.adversary)?;
        let cell = Cell { n: r.n, p: r.p, gamma: r.gamma, adversary };
        let g = instance(r.k, &cell, r.seed)?;
        let cfg = PipelineConfig { seed: r.seed, gamma: r.gamma, ..spec.pipeline };
        match find_tight_hamilton(&g, &cfg).cycle {
            Some(c) if is_tight_cycle(&g, &c.cyc).unwrap_or(false) => checked += 1,
            _ => return Err(CliError::Validation(format!("record trial {} seed {} does not re-verify", r.trial, r.seed))),
        }
    }
    Ok(checked)
}

/// Success rate per (adversary, p), pooled over n and gamma.
pub fn success_table(records: &[ScanRecord]) -> BTreeMap<(String, String), (usize, usize)> {
    let mut t: BTreeMap<(String, String), (usize, usize)> = BTreeMap::new();
    for r in records {
        let e = t.entry((r.adversary.clone(), r.p.to_string())).or_default();
        e.1 += 1;
        if r.outcome == "cycle" {
            e.0 += 1;
        }
    }
    t
}

/// For each p: is the success rate non-increasing as adversary strength grows?
pub fn trend_report(spec: &ScanSpec, records: &[ScanRecord]) -> String {
    let table = success_table(records);
    let mut advs = spec.adversaries.clone();
    advs.sort_by(|a, b| a.strength().total_cmp(&b.strength()));
    let mut out = String::new();
    for p in &spec.p {
        let rates: Vec<f64> = advs
            .iter()
            .map(|a| table.get(&(a.label(), p.to_string())).map(|&(s, t)| s as f64 / t as f64).unwrap_or(0.0))
            .collect();
        let monotone = rates.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let cells: Vec<String> = advs.iter().zip(&rates).map(|(a, r)| format!("{}={:.2}", a.label(), r)).collect();
        let _ = writeln!(out, "p={p}: {} monotone={monotone}", cells.join(" "));
    }
    out
}

pub fn heatmap_svg(spec: &ScanSpec, records: &[ScanRecord]) -> String {
    let table = success_table(records);
    let mut advs = spec.adversaries.clone();
    advs.sort_by(|a, b| a.strength().total_cmp(&b.strength()));
    let (cw, ch, left, top) = (80, 40, 140, 40);
    let width = left + cw * spec.p.len() + 20;
    let height = top + ch * advs.len() + 60;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="monospace" font-size="12">"#);
    let _ = writeln!(s, r#"<text x="{}" y="20">success rate (k={}, trials={})</text>"#, left, spec.k, spec.trials);
    for (row, a) in advs.iter().enumerate() {
        let y = top + row * ch;
        let _ = writeln!(s, r#"<text x="4" y="{}">{}</text>"#, y + ch / 2 + 4, a.label());
        for (col, p) in spec.p.iter().enumerate() {
            let x = left + col * cw;
            let (ok, tot) = table.get(&(a.label(), p.to_string())).copied().unwrap_or((0, 0));
            let rate = if tot == 0 { 0.0 } else { ok as f64 / tot as f64 };
            let shade = (255.0 * (1.0 - rate)).round() as u8;
            let _ = writeln!(s, r#"<rect x="{x}" y="{y}" width="{cw}" height="{ch}" fill="rgb({shade},{},{shade})" stroke="black"/>"#, 128 + (127.0 * rate) as u8);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{:.2}</text>"#, x + 20, y + ch / 2 + 4, rate);
        }
    }
    let ylab = top + ch * advs.len() + 20;
    for (col, p) in spec.p.iter().enumerate() {
        let _ = writeln!(s, r#"<text x="{}" y="{ylab}">p={p}</text>"#, left + col * cw + 20);
    }
    let _ = writeln!(s, r#"<text x="{left}" y="{}">x: edge probability p, y: adversary (increasing strength)</text>"#, ylab + 25);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ScanSpec {
        ScanSpec {
            k: 3,
            n: vec![12],
            p: vec![0.6],
            gamma: vec![0.1],
            adversaries: vec![AdversaryToken::Thin(0.1)],
            trials: 2,
            seed: 4,
            time_cap_ms: 0,
            dp_cap: 12,
            record_time: false,
            pipeline: PipelineConfig::default(),
        }
    }

    #[test]
    fn adversary_tokens_round_trip() {
        for s in ["none", "thin:0.3", "repair:0.25", "parity:5:odd"] {
            assert_eq!(AdversaryToken::parse(s).unwrap().label(), s);
        }
        assert!(AdversaryToken::parse("thin").is_err());
        assert!(AdversaryToken::parse("parity:5:maybe").is_err());
    }

    #[test]
    fn csv_round_trip_and_order() {
        let spec = tiny();
        let recs = run_scan(&spec, None).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs.iter().map(|r| r.trial).collect::<Vec<_>>(), vec![0, 1]);
        let text = to_csv(&recs);
        assert_eq!(parse_csv(&text).unwrap(), recs);
        assert_eq!(to_csv(&run_scan(&spec, None).unwrap()), text);
        assert_eq!(reverify(&recs, &spec).unwrap(), recs.iter().filter(|r| r.outcome == "cycle").count());
    }

    #[test]
    fn malformed_csv_reports_line() {
        let text = format!("{CSV_HEADER}\n3,12,0.6,0.1,thin:0.1,0,1,2,cycle,,,\n3,x\n");
        match parse_csv(&text) {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_grid_rejected() {
        let mut spec = tiny();
        spec.p.clear();
        assert!(matches!(run_scan(&spec, None), Err(CliError::Validation(_))));
    }
}
