use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use softout::bp::PriorMode;
use softout::codes::SurfaceVariant;
use softout::soft::DecoderKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    PhiSweep,
    RepExact,
    Hierarchical,
    Postselect,
    Bounds,
    Memory,
    QclpInfo,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::PhiSweep => "phi-sweep",
            Kind::RepExact => "rep-exact",
            Kind::Hierarchical => "hierarchical",
            Kind::Postselect => "postselect",
            Kind::Bounds => "bounds",
            Kind::Memory => "memory",
            Kind::QclpInfo => "qclp-info",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    Surface,
    Repetition,
}

/// Everything needed to rerun an experiment. Fields a kind does not use are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    #[serde(default)]
    pub family: Family,
    /// Surface-code distance.
    #[serde(default = "defaults::distance")]
    pub distance: usize,
    #[serde(default = "defaults::variant")]
    pub variant: SurfaceVariant,
    /// Repetition-code length.
    #[serde(default = "defaults::length")]
    pub length: usize,
    /// Physical flip rates; sweeps visit each in turn.
    #[serde(default = "defaults::p")]
    pub p: Vec<f64>,
    /// Measurement flip rate; defaults to the data rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Inverse ratio of SWAP/idle error rate to other gates; sets the round rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swap_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    /// Outer code length in the round rule.
    #[serde(default = "defaults::outer_length")]
    pub outer_length: usize,
    #[serde(default = "defaults::decoder")]
    pub decoder: DecoderKind,
    #[serde(default = "defaults::trials")]
    pub trials: u64,
    #[serde(default = "defaults::outer_rounds")]
    pub outer_rounds: usize,
    #[serde(default = "defaults::inner_samples")]
    pub inner_samples: u64,
    #[serde(default = "defaults::modes")]
    pub modes: Vec<PriorMode>,
    #[serde(default = "defaults::max_iter")]
    pub max_iter: usize,
    #[serde(default = "defaults::lift")]
    pub lift: u32,
    #[serde(default = "defaults::gates")]
    pub gates: f64,
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    /// Soft-output cutoffs; empty means every bin edge.
    #[serde(default)]
    pub cutoffs: Vec<f64>,
    #[serde(default = "defaults::output")]
    pub output: PathBuf,
}

mod defaults {
    use super::*;
    pub fn distance() -> usize {
        5
    }
    pub fn variant() -> SurfaceVariant {
        SurfaceVariant::Rotated
    }
    pub fn length() -> usize {
        12
    }
    pub fn p() -> Vec<f64> {
        vec![0.05]
    }
    pub fn outer_length() -> usize {
        1054
    }
    pub fn decoder() -> DecoderKind {
        DecoderKind::Ufd
    }
    pub fn trials() -> u64 {
        10_000
    }
    pub fn outer_rounds() -> usize {
        20
    }
    pub fn inner_samples() -> u64 {
        100_000
    }
    pub fn modes() -> Vec<PriorMode> {
        vec![PriorMode::Soft, PriorMode::Hard]
    }
    pub fn max_iter() -> usize {
        softout::bp::DEFAULT_MAX_ITER
    }
    pub fn lift() -> u32 {
        31
    }
    pub fn gates() -> f64 {
        4.0
    }
    pub fn epsilon() -> f64 {
        1e-9
    }
    pub fn output() -> PathBuf {
        PathBuf::from("out")
    }
}

#[derive(Debug)]
pub struct ConfigError(pub Vec<String>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for problem in &self.0 {
            write!(f, "\n  - {problem}")?;
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn new(kind: Kind, seed: u64) -> Self {
        ExperimentConfig {
            kind,
            seed,
            family: Family::Surface,
            distance: defaults::distance(),
            variant: defaults::variant(),
            length: defaults::length(),
            p: defaults::p(),
            q: None,
            swap_ratio: None,
            rounds: None,
            outer_length: defaults::outer_length(),
            decoder: defaults::decoder(),
            trials: defaults::trials(),
            outer_rounds: defaults::outer_rounds(),
            inner_samples: defaults::inner_samples(),
            modes: defaults::modes(),
            max_iter: defaults::max_iter(),
            lift: defaults::lift(),
            gates: defaults::gates(),
            epsilon: defaults::epsilon(),
            cutoffs: Vec::new(),
            output: defaults::output(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(vec![e.message().to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Syndrome-extraction rounds: explicit, else the SWAP-ratio rule, else `distance`.
    pub fn inner_rounds(&self) -> usize {
        match (self.rounds, self.swap_ratio) {
            (Some(t), _) => t,
            (None, Some(r)) => round_rule(self.outer_length, self.distance, r),
            (None, None) => self.distance,
        }
    }

    pub fn measurement_rate(&self, p: f64) -> f64 {
        self.q.unwrap_or(p)
    }

    /// Collects every problem rather than stopping at the first.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        let uses_code = matches!(self.kind, Kind::PhiSweep | Kind::Memory | Kind::Postselect | Kind::Hierarchical);
        if uses_code {
            match self.family {
                Family::Surface if self.distance < 2 => problems.push(format!("distance {} must be at least 2", self.distance)),
                Family::Repetition if self.length < 2 => problems.push(format!("length {} must be at least 2", self.length)),
                _ => {}
            }
            if self.trials == 0 {
                problems.push("trials must be positive".into());
            }
        }
        if self.kind == Kind::RepExact && !(1..=softout::stats::REP_EXACT_MAX).contains(&self.length) {
            problems.push(format!("length {} outside 1..={}", self.length, softout::stats::REP_EXACT_MAX));
        }
        if self.kind != Kind::QclpInfo {
            if self.p.is_empty() {
                problems.push("p must list at least one rate".into());
            }
            for &p in &self.p {
                if !(p > 0.0 && p < 0.5) && !(self.kind == Kind::RepExact && p == 0.0) {
                    problems.push(format!("p = {p} not in (0, 1/2)"));
                }
            }
        }
        if let Some(q) = self.q {
            if !(q > 0.0 && q < 0.5) {
                problems.push(format!("q = {q} not in (0, 1/2)"));
            }
        }
        if let Some(r) = self.swap_ratio {
            if !(r > 0.0) {
                problems.push(format!("swap_ratio = {r} must be positive"));
            }
        }
        if self.rounds == Some(0) {
            problems.push("rounds must be positive".into());
        }
        if self.kind == Kind::Hierarchical {
            if self.outer_rounds == 0 {
                problems.push("outer_rounds must be positive".into());
            }
            if self.inner_samples == 0 {
                problems.push("inner_samples must be positive".into());
            }
            if self.modes.is_empty() {
                problems.push("modes must list soft and/or hard".into());
            }
            if self.family != Family::Surface {
                problems.push("hierarchical runs need a surface inner code".into());
            }
        }
        if self.kind == Kind::Bounds {
            if self.gates < 1.0 {
                problems.push(format!("gates = {} must be at least 1", self.gates));
            }
            if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
                problems.push(format!("epsilon = {} not in (0, 1)", self.epsilon));
            }
        }
        if self.lift == 0 {
            problems.push("lift must be positive".into());
        }
        if self.cutoffs.iter().any(|&c| c < 0.0 || c.is_nan()) {
            problems.push("cutoffs must be non-negative".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(problems))
        }
    }
}

/// `ceil(3 sqrt(n) d / r)` rounds.
pub fn round_rule(outer_length: usize, distance: usize, swap_ratio: f64) -> usize {
    (3.0 * (outer_length as f64).sqrt() * distance as f64 / swap_ratio).ceil() as usize
}
