//! Soft output from decoder radii, plus exact likelihood oracles.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::BitVec;
use crate::graph::{quotient_logical_length, ClusterSet, DecodingGraph, Radii};
use crate::mwpm::mwpm_decode;
use crate::ufd::ufd_decode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Ufd,
    Mwpm,
}

impl DecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Ufd => "ufd",
            DecoderKind::Mwpm => "mwpm",
        }
    }
}

impl FromStr for DecoderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ufd" => Ok(DecoderKind::Ufd),
            "mwpm" => Ok(DecoderKind::Mwpm),
            _ => Err(Error::InvalidInput(format!("unknown decoder `{s}`"))),
        }
    }
}

/// Length of the logical operator outside the clusters grown to `radii`.
pub fn soft_output(graph: &DecodingGraph, radii: &Radii) -> Result<f64> {
    let clusters = ClusterSet::new(graph, radii, None);
    quotient_logical_length(graph, &clusters)
}

#[derive(Clone, Debug)]
pub struct SoftDecode {
    pub correction: BitVec,
    pub radii: Radii,
    pub phi: f64,
}

pub fn decode_soft(graph: &DecodingGraph, syndrome: &BitVec, decoder: DecoderKind) -> Result<SoftDecode> {
    let (correction, radii) = match decoder {
        DecoderKind::Ufd => {
            let r = ufd_decode(graph, syndrome)?;
            (r.correction, r.radii)
        }
        DecoderKind::Mwpm => {
            let r = mwpm_decode(graph, syndrome)?;
            (r.correction, r.radii)
        }
    };
    let phi = soft_output(graph, &radii)?;
    Ok(SoftDecode {
        correction,
        radii,
        phi,
    })
}

/// `(n - 2|F|) w` for a length-`n` repetition code.
pub fn rep_phi_closed_form(n: usize, correction_weight: usize, w: f64) -> Result<f64> {
    if 2 * correction_weight > n {
        return Err(Error::InvalidInput(format!(
            "correction weight {correction_weight} exceeds half the block length {n}"
        )));
    }
    Ok((n - 2 * correction_weight) as f64 * w)
}

/// All `2^m` edge subsets of a small graph, grouped by syndrome.
pub struct ErrorEnumeration {
    num_edges: usize,
    p: f64,
    by_syndrome: HashMap<BitVec, Vec<u32>>,
}

impl ErrorEnumeration {
    pub const MAX_EDGES: usize = 24;

    pub fn new(graph: &DecodingGraph, p: f64) -> Result<Self> {
        let m = graph.num_edges();
        if m > Self::MAX_EDGES {
            return Err(Error::TooLarge(format!("{m} fault locations")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidInput(format!("p = {p} outside (0, 1)")));
        }
        let mut by_syndrome: HashMap<BitVec, Vec<u32>> = HashMap::new();
        // syndrome of a subset = xor of per-edge syndromes, built incrementally in Gray order
        let single: Vec<BitVec> = (0..m)
            .map(|e| graph.syndrome_of(&BitVec::from_support(m, [e])))
            .collect();
        let mut s = BitVec::zeros(graph.num_syndrome_vertices());
        let mut mask: u32 = 0;
        by_syndrome.entry(s.clone()).or_default().push(0);
        for step in 1u32..(1u32 << m) {
            let bit = step.trailing_zeros() as usize;
            mask ^= 1 << bit;
            s.xor_assign(&single[bit]);
            by_syndrome.entry(s.clone()).or_default().push(mask);
        }
        Ok(ErrorEnumeration {
            num_edges: m,
            p,
            by_syndrome,
        })
    }

    pub fn syndromes(&self) -> impl Iterator<Item = &BitVec> {
        self.by_syndrome.keys()
    }

    pub fn errors_with(&self, syndrome: &BitVec) -> &[u32] {
        self.by_syndrome.get(syndrome).map_or(&[], Vec::as_slice)
    }

    pub fn to_edge_set(&self, mask: u32) -> BitVec {
        BitVec::from_support(self.num_edges, (0..self.num_edges).filter(|i| mask >> i & 1 == 1))
    }

    fn log_prob(&self, mask: u32) -> f64 {
        let k = mask.count_ones() as f64;
        k * self.p.ln() + (self.num_edges as f64 - k) * (-self.p).ln_1p()
    }

    /// `ln(Pr(E = F | σ) / Pr(E ≠ F | σ))`.
    pub fn llr(&self, syndrome: &BitVec, correction: &BitVec) -> Result<f64> {
        let errors = self.errors_with(syndrome);
        let target = correction
            .support()
            .try_fold(0u32, |acc, i| (i < 32).then_some(acc | 1 << i))
            .ok_or_else(|| Error::InvalidInput("correction outside the enumerated edges".into()))?;
        if !errors.contains(&target) {
            return Err(Error::InvalidInput("correction does not match the syndrome".into()));
        }
        let others: Vec<f64> = errors
            .iter()
            .filter(|&&e| e != target)
            .map(|&e| self.log_prob(e))
            .collect();
        Ok(self.log_prob(target) - log_sum_exp(&others))
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Exact conditional log-likelihood that `decoder`'s correction equals the error.
pub fn exhaustive_llr(graph: &DecodingGraph, syndrome: &BitVec, decoder: DecoderKind, p: f64) -> Result<f64> {
    let en = ErrorEnumeration::new(graph, p)?;
    let out = decode_soft(graph, syndrome, decoder)?;
    en.llr(syndrome, &out.correction)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CombinedSoftOutput {
    pub value: f64,
    pub saturated: bool,
}

/// Union-bound combination of per-window soft outputs.
pub fn combine_windows(phis: &[f64]) -> Result<CombinedSoftOutput> {
    if phis.is_empty() {
        return Err(Error::Empty);
    }
    if let Some(x) = phis.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::InvalidInput(format!("soft output {x} is negative")));
    }
    let q: f64 = phis.iter().map(|&f| 1.0 / (1.0 + f.exp())).sum();
    if q >= 1.0 {
        return Ok(CombinedSoftOutput {
            value: 0.0,
            saturated: true,
        });
    }
    let q = q.max(f64::MIN_POSITIVE);
    Ok(CombinedSoftOutput {
        value: ((1.0 - q) / q).ln(),
        saturated: false,
    })
}

/// Histogram of soft outputs with per-bin failure counts. Bin `i` covers
/// `[i * width, (i + 1) * width)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiHistogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub failures: Vec<u64>,
}

impl PhiHistogram {
    pub fn new(bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(Error::InvalidInput(format!("bin width {bin_width} must be positive")));
        }
        Ok(PhiHistogram {
            bin_width,
            counts: Vec::new(),
            failures: Vec::new(),
        })
    }

    /// Bin of `phi`. Values sitting a rounding error below a bin edge go up.
    pub fn bin_of(&self, phi: f64) -> usize {
        let x = phi / self.bin_width;
        (x + 1e-9).floor().max(0.0) as usize
    }

    pub fn add(&mut self, phi: f64, failure: bool) {
        let b = self.bin_of(phi);
        if b >= self.counts.len() {
            self.counts.resize(b + 1, 0);
            self.failures.resize(b + 1, 0);
        }
        self.counts[b] += 1;
        self.failures[b] += u64::from(failure);
    }

    pub fn from_samples(bin_width: f64, samples: impl IntoIterator<Item = (f64, bool)>) -> Result<Self> {
        let mut h = Self::new(bin_width)?;
        for (phi, fail) in samples {
            h.add(phi, fail);
        }
        if h.total() == 0 {
            return Err(Error::Empty);
        }
        Ok(h)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total_failures(&self) -> u64 {
        self.failures.iter().sum()
    }

    pub fn marginal_failure_rate(&self) -> f64 {
        self.total_failures() as f64 / self.total() as f64
    }

    /// `(failures + 1/2) / (count + 1)`.
    pub fn smoothed_failure(&self, bin: usize) -> f64 {
        (self.failures[bin] as f64 + 0.5) / (self.counts[bin] as f64 + 1.0)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_low,bin_high,successes,failures\n");
        for (i, (&c, &f)) in self.counts.iter().zip(&self.failures).enumerate() {
            if c == 0 {
                continue;
            }
            let lo = i as f64 * self.bin_width;
            writeln!(s, "{lo},{},{},{f}", lo + self.bin_width, c - f).unwrap();
        }
        s
    }
}
