//! Post-selection statistics: concentration bounds, exact repetition-code
//! joint distributions, cutoff analysis and extrapolation helpers.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::codes::llr_weight;
use crate::error::{Error, Result};
use crate::soft::PhiHistogram;

/// Binary relative entropy `D(a || b)` in nats.
pub fn kl_bernoulli(a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) || !(b > 0.0 && b < 1.0) {
        return Err(Error::InvalidInput(format!("relative entropy D({a} || {b}) undefined")));
    }
    let term = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    Ok(term(a, b) + term(1.0 - a, 1.0 - b))
}

/// A postselected computation: `gates` logical gates, each protected by a
/// repetition code of length `length` under flip rate `p`, with runs
/// discarded when any gate's soft output is at most `length * w * delta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostselectParams {
    pub gates: f64,
    pub length: f64,
    pub p: f64,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostselectBounds {
    /// Upper bound on the chance a single run is discarded.
    pub discard: f64,
    /// Upper bound on expected runs per accepted sample.
    pub runs_per_sample: f64,
    /// Upper bound on the logical error rate of accepted runs.
    pub error: f64,
}

fn check_regime(p: f64, delta: f64) -> Result<()> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::OutOfRegime(format!("flip rate {p} not in (0, 1/2)")));
    }
    if !(0.0..1.0 - 2.0 * p).contains(&delta) {
        return Err(Error::OutOfRegime(format!("delta {delta} not in [0, 1 - 2p)")));
    }
    Ok(())
}

pub fn postselect_bounds(params: &PostselectParams) -> Result<PostselectBounds> {
    let PostselectParams { gates, length, p, delta } = *params;
    check_regime(p, delta)?;
    if gates < 1.0 || length <= 0.0 {
        return Err(Error::InvalidInput("need at least one gate and positive length".into()));
    }
    let low = length * kl_bernoulli((1.0 - delta) / 2.0, p)?;
    let high = length * kl_bernoulli((1.0 + delta) / 2.0, p)?;
    let discard = (gates.ln() - low).exp();
    if discard >= 1.0 {
        return Err(Error::OutOfRegime(format!(
            "discard bound {discard} is not below one"
        )));
    }
    let single = (-low).exp();
    Ok(PostselectBounds {
        discard,
        runs_per_sample: 1.0 / (1.0 - discard),
        error: (gates.ln() - high).exp() / (1.0 - single),
    })
}

/// Code length and threshold that reach target error `epsilon` over `gates`
/// gates with discard probability at most one half.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostselectDesign {
    /// Unrounded length from the closed form.
    pub length_exact: f64,
    pub length: usize,
    /// Threshold evaluated at the rounded length.
    pub delta: f64,
}

pub fn postselect_design(gates: f64, p: f64, epsilon: f64) -> Result<PostselectDesign> {
    if !(p > 0.0 && p < 0.5) || !(epsilon > 0.0 && epsilon < 1.0) || gates < 1.0 {
        return Err(Error::OutOfRegime(format!(
            "design needs p in (0, 1/2), epsilon in (0, 1), gates >= 1; got {p}, {epsilon}, {gates}"
        )));
    }
    let gap = 1.0 - 2.0 * p;
    let ln2v = (2.0 * gates).ln();
    let first = 2.0 * ln2v / (gap * gap);
    let second = ((2.0 * gates / epsilon).ln().sqrt() + ln2v.sqrt()).powi(2) / (2.0 * gap * gap);
    let length_exact = first.max(second);
    let length = length_exact.ceil() as usize;
    Ok(PostselectDesign {
        length_exact,
        length,
        delta: delta_for_length(gates, p, length as f64),
    })
}

pub fn delta_for_length(gates: f64, p: f64, length: f64) -> f64 {
    1.0 - 2.0 * p - (2.0 * (2.0 * gates).ln() / length).sqrt()
}

/// Repetition length needed for error `epsilon` over `gates` gates with no
/// postselection, from the Hoeffding tail.
pub fn unselected_length(gates: f64, p: f64, epsilon: f64) -> Result<f64> {
    if !(p > 0.0 && p < 0.5) || !(epsilon > 0.0 && epsilon < 1.0) || gates < 1.0 {
        return Err(Error::OutOfRegime("need p in (0, 1/2) and epsilon in (0, 1)".into()));
    }
    let gap = 1.0 - 2.0 * p;
    Ok(2.0 * (gates / epsilon).ln() / (gap * gap))
}

/// Outcome class of a cycle repetition code with `flips` flipped bits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub flips: usize,
    /// Soft output in units of the edge weight.
    pub units: usize,
    pub failure: bool,
    pub prob: f64,
}

/// Exact joint law of soft output and failure for the length-`n` cycle
/// repetition code under i.i.d. flips. Ties fail with zero soft output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepExact {
    pub n: usize,
    pub p: f64,
    /// Edge weight; infinite at `p = 0`.
    pub weight: f64,
    pub outcomes: Vec<RepOutcome>,
}

pub const REP_EXACT_MAX: usize = 64;

pub fn rep_exact_joint(n: usize, p: f64) -> Result<RepExact> {
    if n == 0 || n > REP_EXACT_MAX {
        return Err(Error::TooLarge(format!("length {n} outside 1..={REP_EXACT_MAX}")));
    }
    if !(0.0..0.5).contains(&p) {
        return Err(Error::InvalidInput(format!("flip rate {p} not in [0, 1/2)")));
    }
    // Pascal's triangle keeps every coefficient to within an ulp
    let mut binom = vec![1.0f64];
    for _ in 0..n {
        let mut next = vec![1.0; binom.len() + 1];
        for k in 1..binom.len() {
            next[k] = binom[k - 1] + binom[k];
        }
        binom = next;
    }
    let outcomes = (0..=n)
        .map(|k| {
            let prob = if p == 0.0 {
                if k == 0 { 1.0 } else { 0.0 }
            } else {
                binom[k] * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
            };
            RepOutcome {
                flips: k,
                units: n - 2 * k.min(n - k),
                failure: 2 * k >= n,
                prob,
            }
        })
        .collect();
    Ok(RepExact {
        n,
        p,
        weight: if p == 0.0 { f64::INFINITY } else { llr_weight(p) },
        outcomes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactCutoff {
    pub discard: f64,
    pub failure: f64,
    /// Failure rate among accepted outcomes.
    pub accepted_failure: f64,
}

impl RepExact {
    pub fn failure_probability(&self) -> f64 {
        self.outcomes.iter().filter(|o| o.failure).map(|o| o.prob).sum()
    }

    /// Discards outcomes whose soft output is at most `cutoff_units` weights.
    pub fn cutoff(&self, cutoff_units: f64) -> ExactCutoff {
        let discarded = |o: &&RepOutcome| o.units as f64 <= cutoff_units + 1e-9;
        let discard: f64 = self.outcomes.iter().filter(discarded).map(|o| o.prob).sum();
        let bad: f64 = self
            .outcomes
            .iter()
            .filter(|o| o.failure && !discarded(o))
            .map(|o| o.prob)
            .sum();
        ExactCutoff {
            discard,
            failure: self.failure_probability(),
            accepted_failure: if discard < 1.0 { bad / (1.0 - discard) } else { f64::NAN },
        }
    }

    /// Accepted-and-failed and discarded probabilities at threshold `delta`.
    pub fn joint_at(&self, delta: f64) -> (f64, f64) {
        let c = self.cutoff(self.n as f64 * delta);
        ((1.0 - c.discard) * c.accepted_failure, c.discard)
    }
}

/// Hoeffding bounds on (accepted and failed, discarded) at threshold `delta`.
pub fn hoeffding_joint(n: usize, p: f64, delta: f64) -> Result<(f64, f64)> {
    check_regime(p, delta)?;
    let n = n as f64;
    let margin = (1.0 - delta) / 2.0 - p;
    Ok((
        (-(n / 2.0) * (1.0 + delta - 2.0 * p).powi(2)).exp(),
        (-2.0 * n * margin * margin).exp(),
    ))
}

/// Two-sided Clopper-Pearson interval for `k` successes in `n` trials.
pub fn clopper_pearson(k: u64, n: u64, confidence: f64) -> Result<(f64, f64)> {
    if n == 0 || k > n || !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidInput(format!("interval for {k}/{n} at {confidence}")));
    }
    let alpha = 1.0 - confidence;
    let (kf, nf) = (k as f64, n as f64);
    // inverse of the regularised incomplete beta by bisection
    let invert = |a: f64, b: f64, target: f64| {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if beta_reg(a, b, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let lower = if k == 0 { 0.0 } else { invert(kf, nf - kf + 1.0, alpha / 2.0) };
    let upper = if k == n { 1.0 } else { invert(kf + 1.0, nf - kf, 1.0 - alpha / 2.0) };
    Ok((lower, upper))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffReport {
    pub cutoff: f64,
    pub total: u64,
    pub accepted: u64,
    pub accepted_failures: u64,
    pub discard_fraction: f64,
    pub failure_rate: f64,
    pub failure_ci: (f64, f64),
}

impl CutoffReport {
    pub fn from_counts(cutoff: f64, total: u64, accepted: u64, accepted_failures: u64) -> Result<Self> {
        if total == 0 {
            return Err(Error::Empty);
        }
        if accepted == 0 {
            return Err(Error::NoSurvivors);
        }
        Ok(CutoffReport {
            cutoff,
            total,
            accepted,
            accepted_failures,
            discard_fraction: 1.0 - accepted as f64 / total as f64,
            failure_rate: accepted_failures as f64 / accepted as f64,
            failure_ci: clopper_pearson(accepted_failures, accepted, 0.95)?,
        })
    }
}

/// Discards samples with soft output at most `cutoff`.
pub fn cutoff_analysis(samples: &[(f64, bool)], cutoff: f64) -> Result<CutoffReport> {
    let kept = samples.iter().filter(|(phi, _)| *phi > cutoff);
    let (accepted, failures) = kept.fold((0u64, 0u64), |(a, f), &(_, fail)| (a + 1, f + fail as u64));
    CutoffReport::from_counts(cutoff, samples.len() as u64, accepted, failures)
}

/// Histogram version: bins at or below the bin containing `cutoff` are discarded.
pub fn cutoff_analysis_hist(hist: &PhiHistogram, cutoff: f64) -> Result<CutoffReport> {
    let last_discarded = hist.bin_of(cutoff);
    let (mut accepted, mut failures) = (0, 0);
    for (b, (&count, &fail)) in hist.counts.iter().zip(&hist.failures).enumerate() {
        if b > last_discarded {
            accepted += count;
            failures += fail;
        }
    }
    CutoffReport::from_counts(cutoff, hist.total(), accepted, failures)
}

/// Failure rate after `t_memory` rounds given rate `logical_rate` after
/// `rounds` rounds, treating blocks of `rounds` as independent flips, then
/// combined over `blocks` independent logical qubits.
pub fn extrapolate(logical_rate: f64, rounds: f64, t_memory: f64, blocks: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&logical_rate) {
        return Err(Error::InvalidInput(format!("logical rate {logical_rate} not in [0, 1/2]")));
    }
    if rounds < 1.0 || t_memory < rounds || blocks < 1.0 {
        return Err(Error::InvalidInput(format!(
            "need 1 <= rounds <= memory rounds and blocks >= 1, got {rounds}, {t_memory}, {blocks}"
        )));
    }
    let memory = (1.0 - (1.0 - 2.0 * logical_rate).powf(t_memory / rounds)) / 2.0;
    Ok(-(blocks * (-memory).ln_1p()).exp_m1())
}

/// `y = coefficient * x^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub coefficient: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficient * x.powf(self.exponent)
    }

    /// Least squares in log-log space over positive points.
    pub fn fit(points: &[(f64, f64)]) -> Result<Self> {
        let logs: Vec<(f64, f64)> = points
            .iter()
            .filter(|(x, y)| *x > 0.0 && *y > 0.0)
            .map(|(x, y)| (x.ln(), y.ln()))
            .collect();
        if logs.len() < 2 {
            return Err(Error::InvalidInput("power-law fit needs two positive points".into()));
        }
        let m = logs.len() as f64;
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
        if sxx == 0.0 {
            return Err(Error::InvalidInput("power-law fit needs distinct abscissae".into()));
        }
        let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let exponent = sxy / sxx;
        Ok(PowerLaw {
            coefficient: (my - exponent * mx).exp(),
            exponent,
        })
    }
}

/// Weighted non-decreasing least-squares fit (pool adjacent violators).
pub fn isotonic_increasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // blocks of (mean, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() >= 2 && blocks[blocks.len() - 2].0 > blocks[blocks.len() - 1].0 {
            let (m2, w2, l2) = blocks.pop().unwrap();
            let (m1, w1, l1) = blocks.pop().unwrap();
            let w = w1 + w2;
            let mean = if w > 0.0 { (m1 * w1 + m2 * w2) / w } else { (m1 + m2) / 2.0 };
            blocks.push((mean, w, l1 + l2));
        }
    }
    blocks.iter().flat_map(|&(m, _, l)| std::iter::repeat_n(m, l)).collect()
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}
