//! Sum-product belief propagation and the two-level hierarchical simulation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVec};
use crate::soft::PhiHistogram;

pub const LLR_CLAMP: f64 = 30.0;
pub const DEFAULT_MAX_ITER: usize = 64;

/// Bipartite graph of a parity-check matrix, stored edge-major.
#[derive(Clone, Debug)]
pub struct TannerGraph {
    num_vars: usize,
    /// Edge `e` joins `edge_var[e]` to the check owning it; checks own contiguous ranges.
    edge_var: Vec<usize>,
    check_start: Vec<usize>,
}

impl TannerGraph {
    pub fn from_checks(num_vars: usize, checks: &[Vec<usize>]) -> Result<Self> {
        let mut edge_var = Vec::new();
        let mut check_start = vec![0];
        for (c, vars) in checks.iter().enumerate() {
            for &v in vars {
                if v >= num_vars {
                    return Err(Error::InvalidInput(format!("check {c} touches variable {v}")));
                }
                edge_var.push(v);
            }
            check_start.push(edge_var.len());
        }
        Ok(TannerGraph {
            num_vars,
            edge_var,
            check_start,
        })
    }

    pub fn from_matrix(h: &BitMatrix) -> Self {
        Self::from_checks(h.num_cols(), &h.row_supports()).expect("matrix supports are in range")
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_checks(&self) -> usize {
        self.check_start.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.edge_var.len()
    }

    pub fn check_vars(&self, c: usize) -> &[usize] {
        &self.edge_var[self.check_start[c]..self.check_start[c + 1]]
    }

    pub fn syndrome(&self, e: &BitVec) -> BitVec {
        let mut s = BitVec::zeros(self.num_checks());
        for c in 0..self.num_checks() {
            if self.check_vars(c).iter().filter(|&&v| e.get(v)).count() % 2 == 1 {
                s.set(c, true);
            }
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct BpResult {
    pub estimate: BitVec,
    pub converged: bool,
    pub iterations: usize,
}

fn clamp(x: f64) -> f64 {
    x.clamp(-LLR_CLAMP, LLR_CLAMP)
}

/// Flooding sum-product decoding. `priors[v] = ln(Pr(v = 0) / Pr(v = 1))`.
pub fn bp_decode(tanner: &TannerGraph, syndrome: &BitVec, priors: &[f64], max_iter: usize) -> Result<BpResult> {
    if syndrome.len() != tanner.num_checks() || priors.len() != tanner.num_vars {
        return Err(Error::InvalidInput("syndrome or prior length mismatch".into()));
    }
    let priors: Vec<f64> = priors.iter().map(|&p| clamp(p)).collect();
    let hard = |llr: &[f64]| BitVec::from_bools(&llr.iter().map(|&x| x < 0.0).collect::<Vec<_>>());
    let mut estimate = hard(&priors);
    if tanner.syndrome(&estimate) == *syndrome {
        return Ok(BpResult {
            estimate,
            converged: true,
            iterations: 0,
        });
    }
    let m = tanner.num_edges();
    let mut v2c: Vec<f64> = tanner.edge_var.iter().map(|&v| priors[v]).collect();
    let mut c2v = vec![0.0; m];
    let mut tanhs = vec![0.0; m];
    let mut total = priors.clone();
    for iter in 1..=max_iter {
        for (t, &x) in tanhs.iter_mut().zip(&v2c) {
            *t = (x / 2.0).tanh();
        }
        for c in 0..tanner.num_checks() {
            let (lo, hi) = (tanner.check_start[c], tanner.check_start[c + 1]);
            let sign = if syndrome.get(c) { -1.0 } else { 1.0 };
            // leave-one-out products via a forward pass then a backward pass
            let mut acc = 1.0;
            for e in lo..hi {
                c2v[e] = acc;
                acc *= tanhs[e];
            }
            acc = 1.0;
            for e in (lo..hi).rev() {
                let prod = (c2v[e] * acc).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
                c2v[e] = clamp(sign * 2.0 * prod.atanh());
                acc *= tanhs[e];
            }
        }
        total.copy_from_slice(&priors);
        for (e, &v) in tanner.edge_var.iter().enumerate() {
            total[v] += c2v[e];
        }
        for (e, &v) in tanner.edge_var.iter().enumerate() {
            v2c[e] = clamp(total[v] - c2v[e]);
        }
        estimate = hard(&total);
        if tanner.syndrome(&estimate) == *syndrome {
            return Ok(BpResult {
                estimate,
                converged: true,
                iterations: iter,
            });
        }
    }
    Ok(BpResult {
        estimate,
        converged: false,
        iterations: max_iter,
    })
}

/// Tanner graph of repeated measurement of `H` over `rounds` rounds, the
/// last of which is perfect. Variables: data `(t, q)` at `t*n + q`, then
/// measurement `(t, c)` at `rounds*n + t*r + c` for `t < rounds - 1`.
/// Check `(t, c)` is `t*r + c`.
#[derive(Clone, Debug)]
pub struct SpacetimeTanner {
    pub tanner: TannerGraph,
    pub rounds: usize,
    pub num_qubits: usize,
    pub num_checks: usize,
}

impl SpacetimeTanner {
    pub fn num_data_vars(&self) -> usize {
        self.rounds * self.num_qubits
    }

    /// Data flips folded over rounds.
    pub fn net_data_error(&self, vars: &BitVec) -> BitVec {
        let n = self.num_qubits;
        let mut out = BitVec::zeros(n);
        for v in vars.support().take_while(|&v| v < self.num_data_vars()) {
            out.flip(v % n);
        }
        out
    }
}

pub fn spacetime_tanner(h: &BitMatrix, rounds: usize) -> Result<SpacetimeTanner> {
    if rounds == 0 {
        return Err(Error::InvalidInput("need at least one round".into()));
    }
    let (n, r) = (h.num_cols(), h.num_rows());
    let rows = h.row_supports();
    let meas = |t: usize, c: usize| rounds * n + t * r + c;
    let mut checks = Vec::with_capacity(rounds * r);
    for t in 0..rounds {
        for (c, row) in rows.iter().enumerate() {
            let mut vars: Vec<usize> = row.iter().map(|&q| t * n + q).collect();
            if t >= 1 {
                vars.push(meas(t - 1, c));
            }
            if t + 1 < rounds {
                vars.push(meas(t, c));
            }
            checks.push(vars);
        }
    }
    let num_vars = rounds * n + (rounds - 1) * r;
    Ok(SpacetimeTanner {
        tanner: TannerGraph::from_checks(num_vars, &checks)?,
        rounds,
        num_qubits: n,
        num_checks: r,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorMode {
    /// Per-variable prior from the failure rate conditioned on the drawn soft output.
    Soft,
    /// Every variable gets the marginal failure rate.
    Hard,
}

impl PriorMode {
    pub fn name(self) -> &'static str {
        match self {
            PriorMode::Soft => "soft",
            PriorMode::Hard => "hard",
        }
    }
}

/// Empirical joint distribution of inner soft output and inner failure, with
/// a sampler over its bins.
#[derive(Clone, Debug)]
pub struct JointDistribution {
    pub hist: PhiHistogram,
    cumulative: Vec<u64>,
    bins: Vec<usize>,
}

impl JointDistribution {
    pub fn new(hist: PhiHistogram) -> Result<Self> {
        if hist.total() == 0 {
            return Err(Error::Empty);
        }
        let mut cumulative = Vec::new();
        let mut bins = Vec::new();
        let mut acc = 0;
        for (b, &c) in hist.counts.iter().enumerate() {
            if c > 0 {
                acc += c;
                cumulative.push(acc);
                bins.push(b);
            }
        }
        Ok(JointDistribution {
            hist,
            cumulative,
            bins,
        })
    }

    pub fn from_samples(bin_width: f64, samples: impl IntoIterator<Item = (f64, bool)>) -> Result<Self> {
        Self::new(PhiHistogram::from_samples(bin_width, samples)?)
    }

    /// Draws a bin with probability proportional to its count, then a failure flag.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, bool) {
        let total = *self.cumulative.last().unwrap();
        let u = rng.gen_range(0..total);
        let i = self.cumulative.partition_point(|&c| c <= u);
        let b = self.bins[i];
        let rate = self.hist.failures[b] as f64 / self.hist.counts[b] as f64;
        (b, rng.gen::<f64>() < rate)
    }

    /// Nearest non-empty bin to soft output `phi`.
    pub fn bin_for(&self, phi: f64) -> usize {
        let b = self.hist.bin_of(phi);
        let i = self.bins.partition_point(|&x| x < b);
        match (i.checked_sub(1).map(|j| self.bins[j]), self.bins.get(i).copied()) {
            (_, Some(hi)) if hi == b => hi,
            (Some(lo), Some(hi)) => {
                if b - lo <= hi - b {
                    lo
                } else {
                    hi
                }
            }
            (Some(lo), None) => lo,
            (None, Some(hi)) => hi,
            (None, None) => unreachable!("distribution is non-empty"),
        }
    }

    pub fn prior_for_bin(&self, bin: usize, mode: PriorMode) -> f64 {
        let q = match mode {
            PriorMode::Soft => self.hist.smoothed_failure(bin),
            PriorMode::Hard => self.marginal_rate(),
        };
        ((1.0 - q) / q).ln()
    }

    /// Marginal failure rate, floored so the hard prior stays finite.
    pub fn marginal_rate(&self) -> f64 {
        let t = self.hist.total() as f64;
        (self.hist.total_failures() as f64).max(0.5) / t
    }
}

/// Outer code simulation with inner failures drawn from a joint distribution.
#[derive(Clone, Debug)]
pub struct Hierarchical {
    pub spacetime: SpacetimeTanner,
    pub logical_z: BitMatrix,
    pub max_iter: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalOutcome {
    pub failure: bool,
    pub converged: bool,
    pub flips: usize,
}

impl Hierarchical {
    pub fn new(hz: &BitMatrix, logical_z: BitMatrix, rounds: usize) -> Result<Self> {
        if logical_z.num_cols() != hz.num_cols() {
            return Err(Error::InvalidInput("logical basis width mismatch".into()));
        }
        Ok(Hierarchical {
            spacetime: spacetime_tanner(hz, rounds)?,
            logical_z,
            max_iter: DEFAULT_MAX_ITER,
        })
    }

    pub fn trial<R: Rng + ?Sized>(&self, joint: &JointDistribution, mode: PriorMode, rng: &mut R) -> Result<HierarchicalOutcome> {
        let nv = self.spacetime.tanner.num_vars();
        let mut error = BitVec::zeros(nv);
        let mut priors = Vec::with_capacity(nv);
        for v in 0..nv {
            let (bin, flip) = joint.sample(rng);
            if flip {
                error.set(v, true);
            }
            priors.push(joint.prior_for_bin(bin, mode));
        }
        let syndrome = self.spacetime.tanner.syndrome(&error);
        let bp = bp_decode(&self.spacetime.tanner, &syndrome, &priors, self.max_iter)?;
        let mut residual = bp.estimate;
        residual.xor_assign(&error);
        let net = self.spacetime.net_data_error(&residual);
        Ok(HierarchicalOutcome {
            failure: self.logical_z.rows().iter().any(|l| l.dot(&net)),
            converged: bp.converged,
            flips: error.weight(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{qclp_code, QclpSpec};
    use crate::noise::trial_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn rep3() -> BitMatrix {
        BitMatrix::from_row_supports(2, 3, &[vec![0, 1], vec![1, 2]])
    }

    #[test]
    fn zero_syndrome_converges_immediately() {
        let t = TannerGraph::from_matrix(&rep3());
        let r = bp_decode(&t, &BitVec::zeros(2), &[2.0; 3], 10).unwrap();
        assert!(r.converged && r.estimate.is_zero());
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn repetition_single_flip() {
        let t = TannerGraph::from_matrix(&rep3());
        for q in 0..3 {
            let e = BitVec::from_support(3, [q]);
            let r = bp_decode(&t, &t.syndrome(&e), &[9f64.ln(); 3], 10).unwrap();
            assert!(r.converged);
            assert_eq!(r.estimate, e);
        }
    }

    #[test]
    fn strong_priors_recover_truth_in_one_iteration() {
        let code = qclp_code(&QclpSpec::reference()).unwrap();
        let t = TannerGraph::from_matrix(&code.hz);
        let e = BitVec::from_support(code.n, [17]);
        let priors: Vec<f64> = (0..code.n).map(|v| if e.get(v) { -30.0 } else { 30.0 }).collect();
        let r = bp_decode(&t, &t.syndrome(&e), &priors, 64).unwrap();
        assert!(r.converged && r.iterations <= 1);
        assert_eq!(r.estimate, e);
        let weak = vec![3.0; code.n];
        let r = bp_decode(&t, &t.syndrome(&e), &weak, 64).unwrap();
        assert!(r.converged);
        assert_eq!(r.estimate, e);
    }

    #[test]
    fn spacetime_tanner_shapes() {
        let h = rep3();
        let one = spacetime_tanner(&h, 1).unwrap();
        assert_eq!(one.tanner.num_vars(), 3);
        assert_eq!(one.tanner.check_vars(1), &[1, 2]);
        let single = BitMatrix::from_row_supports(1, 1, &[vec![0]]);
        let two = spacetime_tanner(&single, 2).unwrap();
        // data (0), data (1), meas round 0 at index 2
        assert_eq!(two.tanner.check_vars(0), &[0, 2]);
        assert_eq!(two.tanner.check_vars(1), &[1, 2]);
        assert_eq!(two.tanner.num_vars(), 3);
    }

    #[test]
    fn joint_sampling_and_priors() {
        let j = JointDistribution::from_samples(1.0, [(0.2, true), (0.4, false), (5.5, false)]).unwrap();
        assert_eq!(j.bin_for(2.0), 0);
        assert_eq!(j.bin_for(4.0), 5);
        assert_eq!(j.bin_for(100.0), 5);
        let soft0 = j.prior_for_bin(0, PriorMode::Soft);
        assert!((soft0 - ((1.0 - 0.5) / 0.5f64).ln()).abs() < 1e-12);
        let hard = j.prior_for_bin(5, PriorMode::Hard);
        assert!((hard - 2f64.ln()).abs() < 1e-12);
        let mut rng = trial_rng(0, 0);
        let draws: Vec<(usize, bool)> = (0..3000).map(|_| j.sample(&mut rng)).collect();
        let in0 = draws.iter().filter(|d| d.0 == 0).count();
        assert!((1800..2200).contains(&in0));
        assert!(draws.iter().all(|&(b, f)| b == 0 || !f));
    }

    #[test]
    fn clean_distribution_never_fails() {
        let code = qclp_code(&QclpSpec {
            base: vec![vec![vec![1]]],
            lift: 3,
        })
        .unwrap();
        let j = JointDistribution::from_samples(1.0, (0..100).map(|_| (20.0, false))).unwrap();
        let h = Hierarchical::new(&code.hz, code.lz.clone(), 3).unwrap();
        for t in 0..20 {
            let out = h.trial(&j, PriorMode::Soft, &mut trial_rng(1, t)).unwrap();
            assert!(!out.failure && out.flips == 0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        /// Relabelling variables relabels the output and nothing else.
        #[test]
        fn permutation_equivariance(seed in any::<u64>()) {
            let code = qclp_code(&QclpSpec { base: vec![vec![vec![0, 1], vec![2]]], lift: 5 }).unwrap();
            let h = &code.hz;
            let n = h.num_cols();
            let mut rng = trial_rng(seed, 0);
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let e = crate::noise::sample_error(n, 0.15, &mut rng);
            let priors: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..4.0)).collect();
            let t = TannerGraph::from_matrix(h);
            let permuted_rows: Vec<Vec<usize>> = h.row_supports().iter().map(|r| r.iter().map(|&v| perm[v]).collect()).collect();
            let tp = TannerGraph::from_checks(n, &permuted_rows).unwrap();
            let mut pp = vec![0.0; n];
            let mut ep = BitVec::zeros(n);
            for v in 0..n {
                pp[perm[v]] = priors[v];
                ep.set(perm[v], e.get(v));
            }
            let a = bp_decode(&t, &t.syndrome(&e), &priors, 20).unwrap();
            let b = bp_decode(&tp, &tp.syndrome(&ep), &pp, 20).unwrap();
            prop_assert_eq!(a.converged, b.converged);
            for v in 0..n {
                prop_assert_eq!(a.estimate.get(v), b.estimate.get(perm[v]));
            }
        }
    }
}
