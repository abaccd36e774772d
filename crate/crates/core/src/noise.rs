//! Bit-flip and phenomenological noise, and the memory experiment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codes::{CodeGraph, SpacetimeGraph, SpacetimeSpec};
use crate::error::{Error, Result};
use crate::gf2::BitVec;
use crate::graph::EdgeLabel;
use crate::soft::{decode_soft, DecoderKind};

/// Independent stream for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// i.i.d. Bernoulli(`p`) bits. `p = 1` is accepted for testing.
pub fn sample_error<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> BitVec {
    assert!((0.0..=1.0).contains(&p), "probability {p} out of range");
    let mut e = BitVec::zeros(n);
    if p == 0.0 {
        return e;
    }
    for i in 0..n {
        if rng.gen::<f64>() < p {
            e.set(i, true);
        }
    }
    e
}

/// One bit per entry of `probs`, each set independently with its own probability.
pub fn sample_independent<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> BitVec {
    let mut e = BitVec::zeros(probs.len());
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 && rng.gen::<f64>() < p {
            e.set(i, true);
        }
    }
    e
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub failure: bool,
    pub phi: f64,
}

/// Repeated syndrome extraction followed by a perfect final round.
///
/// Each edge of the space-time graph is an independent fault: data edges
/// fire with the data rate, vertical edges with the measurement rate. The
/// difference syndrome is the endpoint parity of the fired edges.
#[derive(Clone, Debug)]
pub struct MemoryExperiment {
    pub spacetime: SpacetimeGraph,
    edge_probs: Vec<f64>,
}

impl MemoryExperiment {
    pub fn new(base: &CodeGraph, spec: SpacetimeSpec) -> Result<Self> {
        let spacetime = SpacetimeGraph::new(base, spec)?;
        let mut exp = MemoryExperiment {
            spacetime,
            edge_probs: Vec::new(),
        };
        exp.set_sampling_rates(spec.p, spec.q)?;
        Ok(exp)
    }

    /// Samples faults at rates other than those the edge weights assume.
    pub fn set_sampling_rates(&mut self, p: f64, q: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidInput(format!("sampling rates ({p}, {q}) out of range")));
        }
        self.edge_probs = self
            .spacetime
            .graph
            .edges()
            .iter()
            .map(|e| if e.label == Some(EdgeLabel::Time) { q } else { p })
            .collect();
        Ok(())
    }

    pub fn sample_faults<R: Rng + ?Sized>(&self, rng: &mut R) -> BitVec {
        sample_independent(&self.edge_probs, rng)
    }

    /// Decodes a given fault configuration; failure means the residual flips `L_Z`.
    pub fn evaluate(&self, faults: &BitVec, decoder: DecoderKind) -> Result<TrialOutcome> {
        let g = &self.spacetime.graph;
        let syndrome = g.syndrome_of(faults);
        let out = decode_soft(g, &syndrome, decoder)?;
        let mut residual = out.correction;
        residual.xor_assign(faults);
        Ok(TrialOutcome {
            failure: self.spacetime.flips_logical(&residual),
            phi: out.phi,
        })
    }

    pub fn run_trial<R: Rng + ?Sized>(&self, decoder: DecoderKind, rng: &mut R) -> Result<TrialOutcome> {
        let faults = self.sample_faults(rng);
        self.evaluate(&faults, decoder)
    }

    /// Trials `first..first + count` on per-trial streams, in trial order.
    pub fn run(&self, decoder: DecoderKind, seed: u64, first: u64, count: u64) -> Result<Vec<TrialOutcome>> {
        (first..first + count)
            .into_par_iter()
            .map(|t| self.run_trial(decoder, &mut trial_rng(seed, t)))
            .collect()
    }
}
