use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use softout::bp::{Hierarchical, JointDistribution, PriorMode};
use softout::codes::{llr_weight, qclp_code, repetition_code, surface_code, to_alist, CodeGraph, QclpSpec, SpacetimeSpec};
use softout::noise::{trial_rng, MemoryExperiment, TrialOutcome};
use softout::soft::PhiHistogram;
use softout::stats::{
    cutoff_analysis_hist, hoeffding_joint, postselect_bounds, postselect_design, rep_exact_joint, unselected_length,
    PostselectBounds, PostselectDesign, PostselectParams,
};
use softout::Error;

use crate::config::{ConfigError, ExperimentConfig, Family, Kind};

/// Trials are generated in chunks of this size so memory stays bounded.
const CHUNK: u64 = 100_000;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Runtime(String),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Runtime(e.to_string())
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Runtime(e) => write!(f, "runtime error: {e}"),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub git_hash: String,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| RunError::Config(ConfigError(vec![format!("bad manifest: {e}")])))
    }
}

fn git_hash() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

struct Sink<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Sink<'_> {
    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), RunError> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        self.written.push(name.into());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| RunError::Runtime(e.to_string()))?;
        fs::write(self.dir.join(name), text + "\n")?;
        self.written.push(name.into());
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), RunError> {
        fs::write(self.dir.join(name), body)?;
        self.written.push(name.into());
        Ok(())
    }
}

/// Runs the experiment, writes its data files and `manifest.json` into the
/// output directory, and returns the manifest.
pub fn run(config: &ExperimentConfig) -> Result<Manifest, RunError> {
    config.validate()?;
    let start = Instant::now();
    fs::create_dir_all(&config.output)?;
    let mut sink = Sink {
        dir: &config.output,
        written: Vec::new(),
    };
    match config.kind {
        Kind::PhiSweep => phi_sweep(config, &mut sink)?,
        Kind::Memory => memory(config, &mut sink)?,
        Kind::Postselect => postselect(config, &mut sink)?,
        Kind::RepExact => rep_exact(config, &mut sink)?,
        Kind::Hierarchical => hierarchical(config, &mut sink)?,
        Kind::Bounds => bounds(config, &mut sink)?,
        Kind::QclpInfo => qclp_info(config, &mut sink)?,
    }
    sink.text("config.toml", &config.to_toml())?;
    let manifest = Manifest {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        git_hash: git_hash(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        outputs: sink.written,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Runtime(e.to_string()))?;
    fs::write(config.output.join("manifest.json"), text + "\n")?;
    Ok(manifest)
}

fn base_code(config: &ExperimentConfig) -> Result<CodeGraph, RunError> {
    Ok(match config.family {
        Family::Surface => surface_code(config.distance, config.variant)?,
        Family::Repetition => repetition_code(config.length)?,
    })
}

fn code_size(config: &ExperimentConfig) -> usize {
    match config.family {
        Family::Surface => config.distance,
        Family::Repetition => config.length,
    }
}

fn experiment(config: &ExperimentConfig, base: &CodeGraph, p: f64) -> Result<MemoryExperiment, RunError> {
    let spec = SpacetimeSpec::new(config.inner_rounds(), p, config.measurement_rate(p))?;
    Ok(MemoryExperiment::new(base, spec)?)
}

/// Runs trials `first..first + count` chunk by chunk, handing each chunk to `visit`.
fn run_chunked(
    exp: &MemoryExperiment,
    config: &ExperimentConfig,
    first: u64,
    count: u64,
    mut visit: impl FnMut(u64, &[TrialOutcome]),
) -> Result<(), RunError> {
    let mut done = 0;
    while done < count {
        let n = CHUNK.min(count - done);
        let out = exp.run(config.decoder, config.seed, first + done, n)?;
        visit(first + done, &out);
        done += n;
    }
    Ok(())
}

fn histogram(exp: &MemoryExperiment, config: &ExperimentConfig, p: f64, count: u64) -> Result<PhiHistogram, RunError> {
    let mut hist = PhiHistogram::new(llr_weight(p) / 2.0)?;
    let started = Instant::now();
    run_chunked(exp, config, 0, count, |_, out| {
        for o in out {
            hist.add(o.phi, o.failure);
        }
    })?;
    eprintln!(
        "p = {p}: {count} trials, {} failures ({:.1}s)",
        hist.total_failures(),
        started.elapsed().as_secs_f64()
    );
    Ok(hist)
}

#[derive(Serialize)]
struct BinRow {
    p: f64,
    bin_low: f64,
    bin_high: f64,
    successes: u64,
    failures: u64,
}

#[derive(Serialize)]
struct SweepSummary {
    p: f64,
    q: f64,
    rounds: usize,
    trials: u64,
    failures: u64,
    failure_rate: f64,
    bin_width: f64,
}

fn phi_sweep(config: &ExperimentConfig, sink: &mut Sink) -> Result<(), RunError> {
    let base = base_code(config)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &p in &config.p {
        let exp = experiment(config, &base, p)?;
        let hist = histogram(&exp, config, p, config.trials)?;
        for (b, (&count, &fail)) in hist.counts.iter().zip(&hist.failures).enumerate() {
            if count > 0 {
                rows.push(BinRow {
                    p,
                    bin_low: b as f64 * hist.bin_width,
                    bin_high: (b + 1) as f64 * hist.bin_width,
                    successes: count - fail,
                    failures: fail,
                });
            }
        }
        summary.push(SweepSummary {
            p,
            q: config.measurement_rate(p),
            rounds: config.inner_rounds(),
            trials: hist.total(),
            failures: hist.total_failures(),
            failure_rate: hist.marginal_failure_rate(),
            bin_width: hist.bin_width,
        });
    }
    sink.csv("phi_histogram.csv", &rows)?;
    sink.json("summary.json", &summary)
}

#[derive(Serialize)]
struct TrialRow {
    seed: u64,
    trial: u64,
    phi: f64,
    failure: bool,
    decoder: &'static str,
    d: usize,
    p: f64,
    q: f64,
    rounds: usize,
}

fn memory(config: &ExperimentConfig, sink: &mut Sink) -> Result<(), RunError> {
    let base = base_code(config)?;
    let mut w = csv::Writer::from_path(sink.dir.join("trials.csv"))?;
    for &p in &config.p {
        let exp = experiment(config, &base, p)?;
        let started = Instant::now();
        let mut failures = 0u64;
        let mut result = Ok(());
        run_chunked(&exp, config, 0, config.trials, |first, out| {
            for (i, o) in out.iter().enumerate() {
                failures += o.failure as u64;
                let row = TrialRow {
                    seed: config.seed,
                    trial: first + i as u64,
                    phi: o.phi,
                    failure: o.failure,
                    decoder: config.decoder.name(),
                    d: code_size(config),
                    p,
                    q: config.measurement_rate(p),
                    rounds: config.inner_rounds(),
                };
                if result.is_ok() {
                    result = w.serialize(row);
                }
            }
        })?;
        result?;
        eprintln!(
            "p = {p}: {} trials, {failures} failures ({:.1}s)",
            config.trials,
            started.elapsed().as_secs_f64()
        );
    }
    w.flush()?;
    sink.written.push("trials.csv".into());
    Ok(())
}

#[derive(Serialize)]
struct CutoffRow {
    p: f64,
    cutoff: f64,
    discard_fraction: f64,
    accepted: u64,
    accepted_failures: u64,
    failure_rate: f64,
    ci_low: f64,
    ci_high: f64,
}

fn postselect(config: &ExperimentConfig, sink: &mut Sink) -> Result<(), RunError> {
    let base = base_code(config)?;
    let mut rows = Vec::new();
    for &p in &config.p {
        let exp = experiment(config, &base, p)?;
        let hist = histogram(&exp, config, p, config.trials)?;
        let cutoffs: Vec<f64> = if config.cutoffs.is_empty() {
            // one cutoff per occupied bin, in the gap above it
            (0..hist.counts.len())
                .filter(|&b| hist.counts[b] > 0)
                .map(|b| (b as f64 + 0.5) * hist.bin_width)
                .collect()
        } else {
            config.cutoffs.clone()
        };
        for cutoff in cutoffs {
            match cutoff_analysis_hist(&hist, cutoff) {
                Ok(r) => rows.push(CutoffRow {
                    p,
                    cutoff,
                    discard_fraction: r.discard_fraction,
                    accepted: r.accepted,
                    accepted_failures: r.accepted_failures,
                    failure_rate: r.failure_rate,
                    ci_low: r.failure_ci.0,
                    ci_high: r.failure_ci.1,
                }),
                Err(Error::NoSurvivors) => eprintln!("p = {p}: cutoff {cutoff} discards every trial"),
                Err(e) => return Err(e.into()),
            }
        }
    }
    sink.csv("cutoffs.csv", &rows)
}

#[derive(Serialize)]
struct RepRow {
    p: f64,
    flips: usize,
    phi: f64,
    probability: f64,
    failure: bool,
}

#[derive(Serialize)]
struct RepCutoffRow {
    p: f64,
    cutoff: f64,
    discard: f64,
    failure: f64,
    accepted_failure: f64,
}

fn rep_exact(config: &ExperimentConfig, sink: &mut Sink) -> Result<(), RunError> {
    let mut rows = Vec::new();
    let mut cut_rows = Vec::new();
    for &p in &config.p {
        let table = rep_exact_joint(config.length, p)?;
        for o in &table.outcomes {
            rows.push(RepRow {
                p,
                flips: o.flips,
                phi: o.units as f64 * table.weight,
                probability: o.prob,
                failure: o.failure,
            });
        }
        for &cutoff in &config.cutoffs {
            let c = table.cutoff(cutoff / table.weight);
            cut_rows.push(RepCutoffRow {
                p,
                cutoff,
                discard: c.discard,
                failure: c.failure,
                accepted_failure: c.accepted_failure,
            });
        }
    }
    sink.csv("rep_exact.csv", &rows)?;
    if !cut_rows.is_empty() {
        sink.csv("rep_cutoffs.csv", &cut_rows)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct HierarchicalRow {
    inner_p: f64,
    inner_rate: f64,
    mode: &'static str,
    trials: u64,
    failures: u64,
    failure_rate: f64,
    unconverged: u64,
}

fn qclp_spec(config: &ExperimentConfig) -> QclpSpec {
    QclpSpec {
        lift: config.lift,
        ..QclpSpec::reference()
    }
}

fn hierarchical(config: &ExperimentConfig, sink: &mut Sink) -> Result<(), RunError> {
    let base = base_code(config)?;
    let outer_code = qclp_code(&qclp_spec(config))?;
    let mut outer = Hierarchical::new(&outer_code.hz, outer_code.lz.clone(), config.outer_rounds)?;
    outer.max_iter = config.max_iter;
    let mut rows = Vec::new();
    for (index, &p) in config.p.iter().enumerate() {
        let exp = experiment(config, &base, p)?;
        let hist = histogram(&exp, config, p, config.inner_samples)?;
        sink.json(&format!("joint_{index}.json"), &hist)?;
        let joint = JointDistribution::new(hist)?;
        for &mode in &config.modes {
            let started = Instant::now();
            // outer streams follow the inner ones, and are shared across modes
            let first = config.inner_samples;
            let outcomes = (0..config.trials)
                .into_par_iter()
                .map(|t| outer.trial(&joint, mode, &mut trial_rng(config.seed, first + t)))
                .collect::<Result<Vec<_>, _>>()?;
            let failures = outcomes.iter().filter(|o| o.failure).count() as u64;
            let unconverged = outcomes.iter().filter(|o| !o.converged).count() as u64;
            eprintln!(
                "p = {p} {} priors: {failures}/{} outer failures ({:.1}s)",
                mode.name(),
                config.trials,
                started.elapsed().as_secs_f64()
            );
            rows.push(HierarchicalRow {
                inner_p: p,
                inner_rate: joint.hist.marginal_failure_rate(),
                mode: mode.name(),
                trials: config.trials,
                failures,
                failure_rate: failures as f64 / config.trials as f64,
                unconverged,
            });
        }
    }
    sink.csv("hierarchical.csv", &rows)
}

#[derive(Serialize)]
struct BoundsReport {
    gates: f64,
    p: f64,
    epsilon: f64,
    design: PostselectDesign,
    bounds: PostselectBounds,
    unselected_length: f64,
    length_ratio: f64,
    hoeffding_accept_and_fail: f64,
    hoeffding_discard: f64,
}

fn bounds(config: &ExperimentConfig, sink: &mut Sink) -> Result<(), RunError> {
    let mut reports = Vec::new();
    for &p in &config.p {
        let design = postselect_design(config.gates, p, config.epsilon)?;
        let bounds = postselect_bounds(&PostselectParams {
            gates: config.gates,
            length: design.length as f64,
            p,
            delta: design.delta,
        })?;
        let unselected = unselected_length(config.gates, p, config.epsilon)?;
        let (bad, discard) = hoeffding_joint(design.length, p, design.delta)?;
        reports.push(BoundsReport {
            gates: config.gates,
            p,
            epsilon: config.epsilon,
            design,
            bounds,
            unselected_length: unselected,
            length_ratio: design.length_exact / unselected,
            hoeffding_accept_and_fail: bad,
            hoeffding_discard: discard,
        });
    }
    sink.json("bounds.json", &reports)
}

#[derive(Serialize)]
struct QclpReport {
    lift: u32,
    n: usize,
    k: usize,
    x_checks: usize,
    z_checks: usize,
    x_row_weights: (usize, usize),
    z_row_weights: (usize, usize),
    column_weights: (usize, usize),
}

fn weight_range(sizes: impl Iterator<Item = usize>) -> (usize, usize) {
    sizes.fold((usize::MAX, 0), |(lo, hi), w| (lo.min(w), hi.max(w)))
}

fn qclp_info(config: &ExperimentConfig, sink: &mut Sink) -> Result<(), RunError> {
    let code = qclp_code(&qclp_spec(config))?;
    let report = QclpReport {
        lift: config.lift,
        n: code.n,
        k: code.k,
        x_checks: code.hx.num_rows(),
        z_checks: code.hz.num_rows(),
        x_row_weights: weight_range(code.hx.row_supports().iter().map(Vec::len)),
        z_row_weights: weight_range(code.hz.row_supports().iter().map(Vec::len)),
        column_weights: weight_range(code.hx.vstack(&code.hz).col_supports().iter().map(Vec::len)),
    };
    eprintln!("lifted product code: n = {}, k = {}", code.n, code.k);
    sink.json("qclp.json", &report)?;
    sink.text("hx.alist", &to_alist(&code.hx))?;
    sink.text("hz.alist", &to_alist(&code.hz))
}

/// Prior modes in the order given, for the CLI.
pub fn parse_mode(s: &str) -> Result<PriorMode, String> {
    match s {
        "soft" => Ok(PriorMode::Soft),
        "hard" => Ok(PriorMode::Hard),
        other => Err(format!("unknown prior mode '{other}' (expected soft or hard)")),
    }
}
