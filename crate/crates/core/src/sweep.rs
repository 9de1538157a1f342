//! Parameter sweeps over models, methods and precisions.
//!
//! A sweep is described by a TOML file:
//!
//! ```toml
//! out_dir = "out"
//! root_seed = 7
//! reps = 10
//! delta = 0.1
//! eps = [0.2, 0.1]
//! methods = ["super", "parallel", "baseline"]
//! workers = 4
//!
//! [[models]]
//! file = "ising3.toml"
//! beta_max = 0.01
//! ```
//!
//! Cells run in the order model × method × ε × replicate. Each cell's seed is
//! derived from the root seed, the model name, the method, `ε` and the
//! replicate, so results do not depend on scheduling. Rows are appended to
//! `results.csv` as soon as a batch finishes; rerunning the same sweep skips
//! the rows already present. Wall-clock times go to `timings.csv` so that the
//! results file is reproducible byte for byte.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Hamiltonian, Model};
use crate::oracle::Enumeration;
use crate::pipelines::{estimate_with, BoundsProvider, BoundsSource, Method, PipelineConfig};
use crate::rng::{derive_seed, hash_str};

/// Largest state space for which sweeps compute the exact `Z`.
pub const SWEEP_ORACLE_CAP: u64 = 1 << 20;

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TIMINGS_FILE: &str = "timings.csv";

pub const RESULTS_HEADER: [&str; 17] = [
    "model",
    "method",
    "beta_max",
    "eps",
    "delta",
    "rep",
    "seed",
    "status",
    "Z_hat",
    "Q_hat",
    "Z_exact",
    "rel_error",
    "steps",
    "tpa_steps",
    "schedule_len",
    "cap_hit",
    "certified_eps",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub file: PathBuf,
    /// Label used in the output; the file stem when absent.
    #[serde(default)]
    pub name: Option<String>,
    pub beta_max: f64,
    /// `oracle` (default) or `manual:Λ,T,π_min`.
    #[serde(default)]
    pub bounds: Option<String>,
}

impl ModelEntry {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| self.file.display().to_string())
        })
    }
}

fn default_reps() -> usize {
    1
}

fn default_workers() -> usize {
    1
}

fn default_d() -> usize {
    crate::tpa::DEFAULT_D
}

fn default_ratio() -> f64 {
    1.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub models: Vec<ModelEntry>,
    pub methods: Vec<Method>,
    pub eps: Vec<f64>,
    pub delta: f64,
    #[serde(default)]
    pub root_seed: u64,
    /// Replicate identifiers; `0..reps` when absent.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    pub out_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::param(format!("experiment file: {e}")))
    }

    /// Loads a spec and resolves relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut spec: ExperimentSpec = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if let Some(base) = path.parent() {
            spec.resolve_paths(base);
        }
        Ok(spec)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if self.out_dir.is_relative() {
            self.out_dir = base.join(&self.out_dir);
        }
        for m in &mut self.models {
            if m.file.is_relative() {
                m.file = base.join(&m.file);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.methods.is_empty() || self.eps.is_empty() {
            return Err(Error::param("a sweep needs at least one model, method and ε"));
        }
        if self.replicates().is_empty() {
            return Err(Error::param("a sweep needs at least one replicate"));
        }
        if self.workers == 0 {
            return Err(Error::param("worker count must be positive"));
        }
        for &eps in &self.eps {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::param(format!("ε = {eps} outside (0, 1)")));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param(format!("δ = {} outside (0, 1)", self.delta)));
        }
        for m in &self.models {
            if let Some(b) = &m.bounds {
                b.parse::<BoundsSource>()?;
            }
        }
        Ok(())
    }

    pub fn replicates(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.reps as u64).collect(),
        }
    }

    /// Cells in output order.
    pub fn cells(&self) -> Vec<Cell> {
        let reps = self.replicates();
        let mut out = Vec::new();
        for (model, entry) in self.models.iter().enumerate() {
            let label = entry.label();
            for &method in &self.methods {
                for &eps in &self.eps {
                    for &rep in &reps {
                        out.push(Cell {
                            model,
                            label: label.clone(),
                            method,
                            eps,
                            rep,
                            seed: cell_seed(self.root_seed, &label, method, eps, rep),
                        });
                    }
                }
            }
        }
        out
    }
}

pub fn cell_seed(root: u64, model: &str, method: Method, eps: f64, rep: u64) -> u64 {
    derive_seed(root, &[hash_str(model), hash_str(method.as_str()), eps.to_bits(), rep])
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    /// Index into [`ExperimentSpec::models`].
    pub model: usize,
    pub label: String,
    pub method: Method,
    pub eps: f64,
    pub rep: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: String,
    pub method: Method,
    pub beta_max: f64,
    pub eps: f64,
    pub delta: f64,
    pub rep: u64,
    pub seed: u64,
    /// `ok`, or the error message.
    pub status: String,
    #[serde(rename = "Z_hat")]
    pub z_hat: Option<f64>,
    #[serde(rename = "Q_hat")]
    pub q_hat: Option<f64>,
    #[serde(rename = "Z_exact")]
    pub z_exact: Option<f64>,
    pub rel_error: Option<f64>,
    pub steps: Option<u64>,
    pub tpa_steps: Option<u64>,
    pub schedule_len: Option<usize>,
    pub cap_hit: Option<bool>,
    pub certified_eps: Option<f64>,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn failed(cell: &Cell, spec: &ExperimentSpec, message: String) -> Self {
        SweepRow {
            model: cell.label.clone(),
            method: cell.method,
            beta_max: spec.models[cell.model].beta_max,
            eps: cell.eps,
            delta: spec.delta,
            rep: cell.rep,
            seed: cell.seed,
            status: message,
            z_hat: None,
            q_hat: None,
            z_exact: None,
            rel_error: None,
            steps: None,
            tpa_steps: None,
            schedule_len: None,
            cap_hit: None,
            certified_eps: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub method: Method,
    pub eps: f64,
    pub runs: usize,
    pub failures: usize,
    pub median_steps: Option<f64>,
    pub err_q50: Option<f64>,
    pub err_q90: Option<f64>,
    pub err_max: Option<f64>,
    /// Fraction of runs with `|Ẑ/Z − 1| ≤ ε`, when the exact `Z` is known.
    pub coverage: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
    /// Rows found in an existing results file and not recomputed.
    pub resumed: usize,
    pub results_path: PathBuf,
    pub summary_path: PathBuf,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }
}

struct Prepared {
    model: Model,
    bounds: BoundsProvider,
    z_exact: Option<f64>,
}

fn prepare(entry: &ModelEntry) -> Result<Prepared> {
    let model = Model::load(&entry.file)?;
    let source = match &entry.bounds {
        Some(b) => b.parse()?,
        None => BoundsSource::Oracle,
    };
    let bounds = BoundsProvider::new(&model, source)?;
    let z_exact = if model.space().state_count() <= SWEEP_ORACLE_CAP as u128 {
        Some(Enumeration::new(&model, SWEEP_ORACLE_CAP)?.partition(entry.beta_max))
    } else {
        None
    };
    Ok(Prepared { model, bounds, z_exact })
}

fn run_cell(spec: &ExperimentSpec, prepared: &std::result::Result<Prepared, String>, cell: &Cell) -> (SweepRow, f64) {
    let started = Instant::now();
    let prep = match prepared {
        Ok(p) => p,
        Err(msg) => return (SweepRow::failed(cell, spec, format!("error: {msg}")), 0.0),
    };
    let entry = &spec.models[cell.model];
    let mut cfg = PipelineConfig::new(cell.method, entry.beta_max, cell.eps, spec.delta, cell.seed);
    cfg.k = spec.k;
    cfg.d = spec.d;
    cfg.ratio = spec.ratio;
    let row = match estimate_with(&prep.model, &cfg, &prep.bounds) {
        Ok(r) => SweepRow {
            model: cell.label.clone(),
            method: cell.method,
            beta_max: entry.beta_max,
            eps: cell.eps,
            delta: spec.delta,
            rep: cell.rep,
            seed: cell.seed,
            status: "ok".into(),
            z_hat: Some(r.z_hat),
            q_hat: Some(r.q_hat),
            z_exact: prep.z_exact,
            rel_error: prep.z_exact.map(|z| r.z_hat / z - 1.0),
            steps: Some(r.steps),
            tpa_steps: Some(r.tpa_steps),
            schedule_len: Some(r.schedule.len()),
            cap_hit: Some(r.cap_hit),
            certified_eps: Some(r.certified_eps),
        },
        Err(e) => SweepRow::failed(cell, spec, format!("error: {e}")),
    };
    (row, started.elapsed().as_secs_f64() * 1e3)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Complete rows already in `path`, after truncating any partial last line.
fn existing_rows(path: &Path, cells: &[Cell]) -> Result<Vec<SweepRow>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let complete = match text.rfind('\n') {
        Some(end) => &text[..=end],
        None => "",
    };
    if complete.is_empty() {
        fs::write(path, "").map_err(io_err(path))?;
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_reader(complete.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().ne(RESULTS_HEADER.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "existing results file has a different header".into(),
        });
    }
    let rows = reader.deserialize().collect::<std::result::Result<Vec<SweepRow>, _>>()?;
    if rows.len() > cells.len() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("{} rows but the sweep has only {} cells", rows.len(), cells.len()),
        });
    }
    for (row, cell) in rows.iter().zip(cells) {
        if row.model != cell.label || row.method != cell.method || row.eps != cell.eps || row.rep != cell.rep || row.seed != cell.seed {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: format!(
                    "row ({}, {}, {}, {}) does not match the sweep; use a fresh output directory",
                    row.model, row.method, row.eps, row.rep
                ),
            });
        }
    }
    if complete.len() != text.len() {
        fs::write(path, complete).map_err(io_err(path))?;
    }
    Ok(rows)
}

/// Runs every cell not already present in the output directory.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    spec.validate()?;
    fs::create_dir_all(&spec.out_dir).map_err(io_err(&spec.out_dir))?;
    let cells = spec.cells();
    let results_path = spec.out_dir.join(RESULTS_FILE);
    let timings_path = spec.out_dir.join(TIMINGS_FILE);
    let mut rows = existing_rows(&results_path, &cells)?;
    let resumed = rows.len();

    let mut results = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&results_path)
        .map_err(io_err(&results_path))?;
    if resumed == 0 {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(RESULTS_HEADER)?;
        let bytes = w.into_inner().map_err(|e| Error::Stdio(e.into_error()))?;
        results.write_all(&bytes).map_err(io_err(&results_path))?;
    }
    let timings_new = !timings_path.exists();
    let mut timings = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&timings_path)
        .map_err(io_err(&timings_path))?;
    if timings_new {
        writeln!(timings, "model,method,eps,rep,wall_ms").map_err(io_err(&timings_path))?;
    }

    let pending = &cells[resumed..];
    if !pending.is_empty() {
        let prepared: Vec<std::result::Result<Prepared, String>> =
            spec.models.iter().map(|m| prepare(m).map_err(|e| e.to_string())).collect();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| Error::param(format!("thread pool: {e}")))?;
        for batch in pending.chunks(spec.workers) {
            let done: Vec<(SweepRow, f64)> = pool.install(|| {
                use rayon::prelude::*;
                batch.par_iter().map(|cell| run_cell(spec, &prepared[cell.model], cell)).collect()
            });
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            for (row, _) in &done {
                w.serialize(row)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Stdio(e.into_error()))?;
            results.write_all(&bytes).map_err(io_err(&results_path))?;
            results.flush().map_err(io_err(&results_path))?;
            for (row, ms) in &done {
                writeln!(timings, "{},{},{},{},{:.3}", row.model, row.method, row.eps, row.rep, ms)
                    .map_err(io_err(&timings_path))?;
            }
            rows.extend(done.into_iter().map(|(r, _)| r));
        }
    }

    let summary = summarize(&rows);
    let summary_path = spec.out_dir.join(SUMMARY_FILE);
    write_summary(File::create(&summary_path).map_err(io_err(&summary_path))?, &summary)?;
    Ok(SweepResult {
        rows,
        summary,
        resumed,
        results_path,
        summary_path,
    })
}

fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

/// Groups rows by (model, method, ε) in order of first appearance.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, Method, f64)> = Vec::new();
    for r in rows {
        let key = (r.model.clone(), r.method, r.eps);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(model, method, eps)| {
            let group: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.model == model && r.method == method && r.eps == eps)
                .collect();
            let ok: Vec<&&SweepRow> = group.iter().filter(|r| r.is_ok()).collect();
            let mut steps: Vec<f64> = ok.iter().filter_map(|r| r.steps).map(|s| s as f64).collect();
            steps.sort_by(f64::total_cmp);
            let mut errs: Vec<f64> = ok.iter().filter_map(|r| r.rel_error).map(f64::abs).collect();
            errs.sort_by(f64::total_cmp);
            let coverage = if errs.is_empty() {
                None
            } else {
                Some(errs.iter().filter(|&&e| e <= eps).count() as f64 / errs.len() as f64)
            };
            SummaryRow {
                model,
                method,
                eps,
                runs: group.len(),
                failures: group.len() - ok.len(),
                median_steps: quantile(&steps, 0.5),
                err_q50: quantile(&errs, 0.5),
                err_q90: quantile(&errs, 0.9),
                err_max: errs.last().copied(),
                coverage,
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(out: W, summary: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if summary.is_empty() {
        w.write_record([
            "model",
            "method",
            "eps",
            "runs",
            "failures",
            "median_steps",
            "err_q50",
            "err_q90",
            "err_max",
            "coverage",
        ])?;
    }
    for s in summary {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a results file written by [`run_sweep`].
pub fn read_results(path: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.deserialize().collect::<std::result::Result<Vec<SweepRow>, _>>()?)
}

const PLOT_PRELUDE: &str = r#"import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

matplotlib.rcParams["svg.hashsalt"] = "gibbs-partition"
matplotlib.rcParams["path.simplify"] = False

HERE = os.path.dirname(os.path.abspath(__file__))
RESULTS = sys.argv[1] if len(sys.argv) > 1 else os.path.join(HERE, "results.csv")


def load():
    with open(RESULTS, newline="", encoding="utf-8") as fh:
        return [r for r in csv.DictReader(fh) if r["status"] == "ok"]


def median(xs):
    xs = sorted(xs)
    n = len(xs)
    if n == 0:
        return float("nan")
    return xs[n // 2] if n % 2 else 0.5 * (xs[n // 2 - 1] + xs[n // 2])


def save(fig, name):
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, name), metadata={"Date": None, "Creator": None})
"#;

const STEPS_BODY: &str = r#"
rows = load()
models = sorted({r["model"] for r in rows}) or [""]
fig, axes = plt.subplots(1, len(models), figsize=(5 * len(models), 4), squeeze=False)
for ax, model in zip(axes[0], models):
    for method in METHODS:
        sel = [r for r in rows if r["model"] == model and r["method"] == method]
        eps = sorted({float(r["eps"]) for r in sel}, reverse=True)
        xs = [1.0 / e for e in eps]
        ys = [median([float(r["steps"]) for r in sel if float(r["eps"]) == e]) for e in eps]
        ax.plot(xs, ys, marker="o", label=method)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("1/eps")
    ax.set_ylabel("median Markov-chain steps")
    ax.set_title(model)
    ax.legend()
save(fig, "steps_vs_precision.svg")
"#;

const ERROR_BODY: &str = r#"
rows = [r for r in load() if r["rel_error"] != ""]
fig, ax = plt.subplots(figsize=(5, 4))
for method in METHODS:
    sel = [r for r in rows if r["method"] == method]
    ax.scatter([float(r["eps"]) for r in sel], [abs(float(r["rel_error"])) for r in sel], s=10, label=method)
grid = sorted({float(r["eps"]) for r in rows})
ax.plot(grid, grid, color="black", linestyle="--", label="requested eps")
ax.set_xlabel("eps")
ax.set_ylabel("|Z_hat / Z - 1|")
ax.legend()
save(fig, "error_vs_precision.svg")
"#;

const SCATTER_BODY: &str = r#"
rows = load()
fig, ax = plt.subplots(figsize=(5, 4))
for method in METHODS:
    sel = [r for r in rows if r["method"] == method]
    zs = [float(r["Z_exact"] or r["Z_hat"]) for r in sel]
    ax.scatter(zs, [float(r["steps"]) for r in sel], s=10, label=method)
ax.set_xscale("log")
ax.set_yscale("log")
ax.set_xlabel("Z")
ax.set_ylabel("Markov-chain steps")
ax.legend()
save(fig, "steps_vs_partition.svg")
"#;

/// Writes three matplotlib scripts next to the results and returns their paths.
///
/// Each script reads `results.csv` from its own directory (or the path given
/// as its first argument) and writes an SVG with one series per method.
pub fn emit_plots(methods: &[Method], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let list = methods.iter().map(|m| format!("{:?}", m.as_str())).collect::<Vec<_>>().join(", ");
    let header = format!("{PLOT_PRELUDE}\nMETHODS = [{list}]\n");
    let mut paths = Vec::new();
    for (name, body) in [
        ("plot_steps.py", STEPS_BODY),
        ("plot_error.py", ERROR_BODY),
        ("plot_scatter.py", SCATTER_BODY),
    ] {
        let path = out_dir.join(name);
        fs::write(&path, format!("{header}{body}")).map_err(io_err(&path))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Methods in order of first appearance in `rows`.
pub fn methods_in(rows: &[SweepRow]) -> Vec<Method> {
    let mut out = Vec::new();
    for r in rows {
        if !out.contains(&r.method) {
            out.push(r.method);
        }
    }
    out
}
