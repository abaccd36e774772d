//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL`
//! line to stderr. The extended check is ignored by default:
//!
//!     cargo test --release -p softout --test acceptance -- --include-ignored

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use softout::bp::{Hierarchical, JointDistribution, PriorMode};
use softout::codes::{llr_weight, qclp_code, repetition_code, surface_code, QclpSpec, SpacetimeSpec, SurfaceVariant};
use softout::gf2::{BitMatrix, BitVec};
use softout::graph::{ClusterSet, DecodingGraph};
use softout::mwpm::{certificate, min_weight_opposite_class, mwpm_decode};
use softout::noise::{sample_error, trial_rng, MemoryExperiment};
use softout::soft::{decode_soft, DecoderKind, ErrorEnumeration, PhiHistogram};
use softout::stats::{
    cutoff_analysis_hist, delta_for_length, hoeffding_joint, isotonic_increasing, kl_bernoulli, pearson,
    postselect_bounds, postselect_design, rep_exact_joint, unselected_length, PostselectParams,
};
use statrs::distribution::{Binomial, DiscreteCDF};
use statrs::function::factorial::ln_binomial;

fn report(id: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {id}: {verdict} {detail}");
    assert!(pass, "criterion {id} failed: {detail}");
}

fn mask_to_bits(m: usize, mask: u64) -> BitVec {
    BitVec::from_support(m, (0..m).filter(|i| mask >> i & 1 == 1))
}

fn log_prob(weight: usize, m: usize, p: f64) -> f64 {
    weight as f64 * p.ln() + (m - weight) as f64 * (1.0 - p).ln()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let top = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + xs.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

#[test]
fn criterion_01_repetition_soft_output_is_exact_llr() {
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for n in [3usize, 5, 7, 9, 11, 13] {
        for p in [0.05, 0.1, 0.2] {
            let g = repetition_code(n).unwrap().graph.with_uniform_weight(llr_weight(p)).unwrap();
            let enumeration = ErrorEnumeration::new(&g, p).unwrap();
            let mut by_syndrome: HashMap<BitVec, Vec<u64>> = HashMap::new();
            for mask in 0..1u64 << n {
                by_syndrome.entry(g.syndrome_of(&mask_to_bits(n, mask))).or_default().push(mask);
            }
            for (s, errors) in &by_syndrome {
                let out = decode_soft(&g, s, DecoderKind::Ufd).unwrap();
                let library = enumeration.llr(s, &out.correction).unwrap();
                // log Pr(E = F) - log Pr(E != F) over errors with this syndrome
                let f = out.correction.weight();
                let others: Vec<f64> = errors
                    .iter()
                    .map(|&e| mask_to_bits(n, e))
                    .filter(|e| *e != out.correction)
                    .map(|e| log_prob(e.weight(), n, p))
                    .collect();
                let oracle = log_prob(f, n, p) - log_sum_exp(&others);
                for exact in [library, oracle] {
                    worst = worst.max((out.phi - exact).abs() / exact.abs().max(1e-300));
                }
                checked += 1;
            }
        }
    }
    report("1", worst <= 1e-9, format!("{checked} syndromes, max relative error {worst:.2e}"));
}

#[test]
fn criterion_02_exact_cutoff_on_length_twelve() {
    let (n, p) = (12, 0.05);
    let table = rep_exact_joint(n, p).unwrap();
    // independent binomial masses
    for o in &table.outcomes {
        let direct = (ln_binomial(n as u64, o.flips as u64) + log_prob(o.flips, n, p)).exp();
        assert!((o.prob - direct).abs() <= 1e-12 * direct.max(1e-300) + 1e-300, "mass at {}", o.flips);
    }
    let target_discard = 0.002;
    let chosen = (0..=n)
        .map(|units| (units, table.cutoff(units as f64)))
        .filter(|(_, c)| c.discard > 0.0 && c.discard < 1.0)
        .min_by(|a, b| {
            let score = |d: f64| (d / target_discard).ln().abs();
            score(a.1.discard).total_cmp(&score(b.1.discard))
        })
        .unwrap();
    let (units, cut) = chosen;
    let within = |x: f64, quoted: f64| x >= quoted / 2.0 && x <= quoted * 2.0;
    let pass = within(cut.failure, 1e-5) && within(cut.accepted_failure, 4e-10) && within(cut.discard, target_discard);
    report(
        "2",
        pass,
        format!(
            "cutoff {units}w discards {:.3e}, failure {:.3e} -> {:.3e}",
            cut.discard, cut.failure, cut.accepted_failure
        ),
    );
}

struct Case {
    graph: DecodingGraph,
    syndrome: BitVec,
}

/// All errors up to weight 4 and 10^4 random errors on d=3, 10^3 random on d=5.
fn gap_cases() -> (Vec<Case>, Vec<Case>) {
    let p = 0.08;
    let small = surface_code(3, SurfaceVariant::Rotated).unwrap();
    let g3 = small.graph.with_uniform_weight(llr_weight(p)).unwrap();
    let m = g3.num_edges();
    let mut d3 = Vec::new();
    for mask in 0..1u64 << m {
        if mask.count_ones() <= 4 {
            d3.push(Case {
                graph: g3.clone(),
                syndrome: g3.syndrome_of(&mask_to_bits(m, mask)),
            });
        }
    }
    for t in 0..10_000 {
        let e = sample_error(m, p, &mut trial_rng(301, t));
        d3.push(Case { graph: g3.clone(), syndrome: g3.syndrome_of(&e) });
    }
    let g5 = surface_code(5, SurfaceVariant::Rotated).unwrap().graph.with_uniform_weight(llr_weight(p)).unwrap();
    let d5 = (0..1_000)
        .map(|t| {
            let e = sample_error(g5.num_edges(), p, &mut trial_rng(305, t));
            Case { graph: g5.clone(), syndrome: g5.syndrome_of(&e) }
        })
        .collect();
    (d3, d5)
}

#[test]
fn criterion_03_opposite_class_gap_bounds_soft_output() {
    let d3_code = surface_code(3, SurfaceVariant::Rotated).unwrap();
    let (d3, d5) = gap_cases();
    let m3 = d3_code.graph.num_edges();
    let all3: Vec<BitVec> = (0..1u64 << m3).map(|mask| mask_to_bits(m3, mask)).collect();
    let qubits = |g: &DecodingGraph, edges: &BitVec| {
        BitVec::from_support(d3_code.code.n, edges.support().map(|e| g.edges()[e].fault_id))
    };
    let mut violations = 0;
    // the inequality is stated for matching; union-find is tallied for reference
    let mut ufd_violations = 0;
    let mut oracle_mismatches = 0;
    let mut decodes = 0;
    for (i, case) in d3.iter().chain(&d5).enumerate() {
        let g = &case.graph;
        for dec in [DecoderKind::Mwpm, DecoderKind::Ufd] {
            let out = decode_soft(g, &case.syndrome, dec).unwrap();
            let fw = g.weight_of(&out.correction);
            let (_, mw) = min_weight_opposite_class(g, &case.syndrome, &out.correction).unwrap();
            if mw - fw < out.phi - 1e-9 * mw.max(1.0) {
                match dec {
                    DecoderKind::Mwpm => violations += 1,
                    DecoderKind::Ufd => ufd_violations += 1,
                }
            }
            if i < d3.len() {
                // brute force over every edge subset, class read from the code's logicals
                let fq = qubits(g, &out.correction);
                let brute = all3
                    .iter()
                    .filter(|e| g.syndrome_of(e) == case.syndrome)
                    .filter(|e| {
                        let mut diff = qubits(g, e);
                        diff.xor_assign(&fq);
                        d3_code.code.flips_logical(&diff)
                    })
                    .map(|e| g.weight_of(e))
                    .fold(f64::INFINITY, f64::min);
                if (brute - mw).abs() > 1e-9 * brute.max(1.0) {
                    oracle_mismatches += 1;
                }
            }
        }
        decodes += 1;
    }
    report(
        "3",
        violations == 0 && oracle_mismatches == 0,
        format!(
            "{decodes} matching decodes, {violations} violations, {oracle_mismatches} opposite-class oracle mismatches (union-find: {ufd_violations} violations)"
        ),
    );
}

#[test]
fn criterion_04_matching_dual_certificate() {
    let (d3, d5) = gap_cases();
    let mut failures = Vec::new();
    let mut worst_slack = f64::INFINITY;
    for case in d3.iter().chain(&d5) {
        let g = &case.graph;
        let res = mwpm_decode(g, &case.syndrome).unwrap();
        let cert = certificate(g, &case.syndrome, &res).unwrap();
        let fw = g.weight_of(&res.correction);
        let tol = 1e-9 * fw.max(1.0);
        worst_slack = worst_slack.min(cert.min_slack);
        let clusters = ClusterSet::new(g, &res.radii, Some(&case.syndrome));
        let inside = res
            .correction
            .support()
            .all(|e| (clusters.covered(e) - g.edges()[e].weight).abs() <= tol);
        if cert.min_slack < -tol || (cert.dual_sum - fw).abs() > tol || !inside {
            failures.push(format!("{:?}", case.syndrome.support().collect::<Vec<_>>()));
        }
    }
    report(
        "4",
        failures.is_empty(),
        format!(
            "{} decodes, min slack {worst_slack:.3e}, failing syndromes {:?}",
            d3.len() + d5.len(),
            &failures[..failures.len().min(5)]
        ),
    );
}

#[test]
fn criterion_05_log_odds_track_soft_output() {
    let p = 0.08;
    let base = surface_code(5, SurfaceVariant::Rotated).unwrap();
    let exp = MemoryExperiment::new(&base, SpacetimeSpec::new(1, p, p).unwrap()).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for dec in [DecoderKind::Ufd, DecoderKind::Mwpm] {
        let out = exp.run(dec, 5, 0, 1_000_000).unwrap();
        let hist = PhiHistogram::from_samples(llr_weight(p) / 2.0, out.iter().map(|o| (o.phi, o.failure))).unwrap();
        let (mut xs, mut ys, mut vars) = (Vec::new(), Vec::new(), Vec::new());
        for (b, (&count, &fail)) in hist.counts.iter().zip(&hist.failures).enumerate() {
            let success = count - fail;
            if fail >= 100 && success > 0 {
                xs.push(b as f64 * hist.bin_width);
                ys.push((success as f64 / fail as f64).ln());
                vars.push(1.0 / success as f64 + 1.0 / fail as f64);
            }
        }
        let r = pearson(&xs, &ys).unwrap_or(f64::NAN);
        let weights: Vec<f64> = vars.iter().map(|v| 1.0 / v).collect();
        let smooth = isotonic_increasing(&ys, &weights);
        let monotone = smooth.windows(2).all(|w| w[0] <= w[1]);
        // the smoothed curve must stay within sampling noise of the raw one
        let worst_z = ys
            .iter()
            .zip(&smooth)
            .zip(&vars)
            .map(|((y, s), v)| (y - s).abs() / v.sqrt())
            .fold(0.0, f64::max);
        let ok = xs.len() >= 2 && r >= 0.98 && monotone && worst_z <= 3.0;
        pass &= ok;
        lines.push(format!("{}: {} bins, r = {r:.4}, max isotonic deviation {worst_z:.2} sd", dec.name(), xs.len()));
    }
    report("5", pass, lines.join("; "));
}

#[test]
fn criterion_06_unionfind_corrects_low_weight_errors() {
    let mut failures = 0;
    let mut total = 0;
    for d in [3usize, 5] {
        let cg = surface_code(d, SurfaceVariant::Rotated).unwrap();
        let n = cg.code.n;
        let max_weight = (d - 1) / 2;
        let mut stack: Vec<Vec<usize>> = vec![vec![]];
        while let Some(support) = stack.pop() {
            let e = BitVec::from_support(n, support.iter().copied());
            let s = cg.code.z_syndrome(&e).unwrap();
            let out = decode_soft(&cg.graph, &s, DecoderKind::Ufd).unwrap();
            let mut residual = BitVec::from_support(n, out.correction.support().map(|i| cg.graph.edges()[i].fault_id));
            residual.xor_assign(&e);
            if !cg.code.z_syndrome(&residual).unwrap().is_zero() || cg.code.flips_logical(&residual) {
                failures += 1;
            }
            total += 1;
            if support.len() < max_weight {
                let start = support.last().map_or(0, |&q| q + 1);
                for q in start..n {
                    let mut next = support.clone();
                    next.push(q);
                    stack.push(next);
                }
            }
        }
    }
    report("6", failures == 0, format!("{total} errors, {failures} logical failures"));
}

#[test]
fn criterion_07_lifted_product_code() {
    let code = qclp_code(&QclpSpec::reference()).unwrap();
    let commute = code.hx.mul_transpose(&code.hz).is_zero();
    let k_direct = code.n - code.hx.rank() - code.hz.rank();
    let pairing = code.lx.mul_transpose(&code.lz) == BitMatrix::identity(code.k);
    let logical_commute = code.hz.mul_transpose(&code.lx).is_zero() && code.hx.mul_transpose(&code.lz).is_zero();
    let independent = code.hz.vstack(&code.lz).rank() == code.hz.rank() + code.k
        && code.hx.vstack(&code.lx).rank() == code.hx.rank() + code.k;
    let pass = code.n == 1054
        && code.k == 140
        && k_direct == 140
        && code.lx.num_rows() == 140
        && commute
        && pairing
        && logical_commute
        && independent;
    report(
        "7",
        pass,
        format!(
            "n = {}, k = {} (rank count {k_direct}), checks commute {commute}, pairing {pairing}, logicals commute {logical_commute}, independent {independent}",
            code.n, code.k
        ),
    );
}

fn inner_distribution(p: f64, rounds: usize, seed: u64, samples: u64) -> (Vec<(f64, bool)>, f64) {
    let base = surface_code(5, SurfaceVariant::Rotated).unwrap();
    let exp = MemoryExperiment::new(&base, SpacetimeSpec::new(rounds, p, p).unwrap()).unwrap();
    let out: Vec<(f64, bool)> = exp
        .run(DecoderKind::Ufd, seed, 0, samples)
        .unwrap()
        .into_iter()
        .map(|o| (o.phi, o.failure))
        .collect();
    (out, llr_weight(p) / 2.0)
}

#[test]
fn criterion_08_soft_priors_beat_hard_priors() {
    let (samples, width) = inner_distribution(0.014, 10, 8, 1_000_000);
    let joint = JointDistribution::from_samples(width, samples.iter().copied()).unwrap();
    let inner_rate = joint.hist.marginal_failure_rate();
    let code = qclp_code(&QclpSpec::reference()).unwrap();
    let outer = Hierarchical::new(&code.hz, code.lz.clone(), 20).unwrap();
    let trials = 2_000u64;
    let pairs: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let soft = outer.trial(&joint, PriorMode::Soft, &mut trial_rng(88, t)).unwrap();
            let hard = outer.trial(&joint, PriorMode::Hard, &mut trial_rng(88, t)).unwrap();
            (soft.failure, hard.failure)
        })
        .collect();
    let soft_fail = pairs.iter().filter(|p| p.0).count();
    let hard_fail = pairs.iter().filter(|p| p.1).count();
    let only_soft = pairs.iter().filter(|p| p.0 && !p.1).count() as u64;
    let only_hard = pairs.iter().filter(|p| !p.0 && p.1).count() as u64;
    // one-sided exact sign test on discordant pairs
    let discordant = only_soft + only_hard;
    let p_value = if discordant == 0 {
        1.0
    } else if only_hard == 0 {
        1.0
    } else {
        Binomial::new(0.5, discordant).unwrap().sf(only_hard - 1)
    };
    let pass = (0.03..=0.05).contains(&inner_rate) && soft_fail < hard_fail && p_value < 0.05;
    report(
        "8",
        pass,
        format!(
            "inner failure {inner_rate:.4}, outer failures soft {soft_fail}/{trials} vs hard {hard_fail}/{trials}, sign-test p = {p_value:.2e}"
        ),
    );
}

#[test]
fn criterion_09_postselection_bounds_hold() {
    let (gates, n, p, epsilon) = (4usize, 21usize, 0.05, 1e-3);
    let delta = delta_for_length(gates as f64, p, n as f64);
    let params = PostselectParams { gates: gates as f64, length: n as f64, p, delta };
    let bounds = postselect_bounds(&params).unwrap();
    // independent evaluation of the discard bound
    let entropy = |a: f64| a * (a / p).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - p)).ln();
    let discard_direct = gates as f64 * (-(n as f64) * entropy((1.0 - delta) / 2.0)).exp();
    assert!((discard_direct - bounds.discard).abs() <= 1e-12 * discard_direct);
    assert!((kl_bernoulli(0.3, p).unwrap() - entropy(0.3)).abs() < 1e-14);

    let cg = repetition_code(n).unwrap();
    let w = llr_weight(p);
    let g = cg.graph.with_uniform_weight(w).unwrap();
    let threshold = n as f64 * w * delta;
    let executions = 1_000_000u64;
    let (discarded, accepted_fail) = (0..executions)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(909, t);
            let mut discard = false;
            let mut fail = false;
            for _ in 0..gates {
                let e = sample_error(n, p, &mut rng);
                let out = decode_soft(&g, &g.syndrome_of(&e), DecoderKind::Ufd).unwrap();
                let mut residual = out.correction;
                residual.xor_assign(&e);
                fail |= cg.code.flips_logical(&residual);
                discard |= out.phi <= threshold;
            }
            (discard as u64, (!discard && fail) as u64)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let discard_rate = discarded as f64 / executions as f64;
    let accepted = executions - discarded;
    let error_rate = accepted_fail as f64 / accepted as f64;
    let design = postselect_design(gates as f64, p, epsilon).unwrap();
    let pass = discard_rate <= bounds.discard && error_rate <= bounds.error;
    report(
        "9",
        pass,
        format!(
            "delta {delta:.4}: discard {discard_rate:.4e} <= {:.4e}, accepted error {error_rate:.3e} <= {:.3e} (design length at this epsilon: {})",
            bounds.discard, bounds.error, design.length
        ),
    );
}

#[test]
fn criterion_09_length_saving_near_four() {
    let (gates, p) = (4.0, 0.01);
    let ratio = |eps: f64| postselect_design(gates, p, eps).unwrap().length_exact / unselected_length(gates, p, eps).unwrap();
    let trend: Vec<String> = [1e-5, 1e-10, 1e-20, 1e-30, 1e-100, 1e-300]
        .iter()
        .map(|&e| format!("{e:.0e}: {:.3}", ratio(e)))
        .collect();
    let at_target = ratio(1e-30);
    report(
        "9 (length ratio)",
        (0.24..=0.30).contains(&at_target),
        format!("ratio at 1e-30 is {at_target:.4}; trend {}", trend.join(", ")),
    );
}

#[test]
fn criterion_10_hoeffding_dominates_exact() {
    let mut violations = 0;
    let mut checked = 0;
    for n in 1..=30usize {
        for p in [0.02, 0.05] {
            let table = rep_exact_joint(n, p).unwrap();
            for i in 0..20 {
                let delta = i as f64 / 20.0 * (1.0 - 2.0 * p);
                let (bad_bound, discard_bound) = hoeffding_joint(n, p, delta).unwrap();
                // direct sums over flip counts
                let (mut bad, mut discard) = (0.0, 0.0);
                for k in 0..=n {
                    let mass = (ln_binomial(n as u64, k as u64) + log_prob(k, n, p)).exp();
                    let units = n - 2 * k.min(n - k);
                    if units as f64 <= n as f64 * delta + 1e-9 {
                        discard += mass;
                    } else if 2 * k > n {
                        bad += mass;
                    }
                }
                let (lib_bad, lib_discard) = table.joint_at(delta);
                assert!((lib_bad - bad).abs() <= 1e-12 && (lib_discard - discard).abs() <= 1e-12);
                if bad > bad_bound || discard > discard_bound {
                    violations += 1;
                }
                checked += 1;
            }
        }
    }
    report("10", violations == 0, format!("{checked} points, {violations} violations"));
}

#[test]
#[ignore = "extended run: 10^7 trials on a d=9 space-time graph"]
fn criterion_11_discarding_low_soft_output_on_distance_nine() {
    let p = 0.005;
    let base = surface_code(9, SurfaceVariant::Rotated).unwrap();
    let exp = MemoryExperiment::new(&base, SpacetimeSpec::new(9, p, p).unwrap()).unwrap();
    let mut hist = PhiHistogram::new(llr_weight(p) / 2.0).unwrap();
    let chunk = 100_000u64;
    for start in (0..10_000_000u64).step_by(chunk as usize) {
        for o in exp.run(DecoderKind::Ufd, 11, start, chunk).unwrap() {
            hist.add(o.phi, o.failure);
        }
    }
    let baseline = hist.marginal_failure_rate();
    let target = 5e-4;
    let report_at = |bin: usize| cutoff_analysis_hist(&hist, (bin as f64 + 0.5) * hist.bin_width).ok();
    let best = (0..hist.counts.len())
        .filter_map(report_at)
        .filter(|r| r.discard_fraction > 0.0)
        .min_by(|a, b| {
            let score = |d: f64| (d / target).ln().abs();
            score(a.discard_fraction).total_cmp(&score(b.discard_fraction))
        })
        .unwrap();
    let pass = (1.5e-5..=6e-5).contains(&baseline) && best.failure_ci.1 <= 2e-6;
    report(
        "11",
        pass,
        format!(
            "failure {baseline:.3e}; discarding {:.3e} at cutoff {:.2} leaves {:.3e} (95% upper {:.3e})",
            best.discard_fraction, best.cutoff, best.failure_rate, best.failure_ci.1
        ),
    );
}

#[test]
fn criterion_12_soft_output_distribution_converges() {
    let (samples, width) = inner_distribution(0.018, 10, 12, 1_000_000);
    let large = JointDistribution::from_samples(width, samples.iter().copied()).unwrap();
    let small = JointDistribution::from_samples(width, samples[..100_000].iter().copied()).unwrap();
    let code = qclp_code(&QclpSpec::reference()).unwrap();
    let outer = Hierarchical::new(&code.hz, code.lz.clone(), 5).unwrap();
    let trials = 1_000u64;
    let rate = |joint: &JointDistribution| {
        let fails: u64 = (0..trials)
            .into_par_iter()
            .map(|t| outer.trial(joint, PriorMode::Soft, &mut trial_rng(121, t)).unwrap().failure as u64)
            .sum();
        fails as f64 / trials as f64
    };
    let (rate_small, rate_large) = (rate(&small), rate(&large));
    let ratio = rate_small / rate_large;
    let pass = rate_large > 0.0 && (0.5..=2.0).contains(&ratio);
    report(
        "12",
        pass,
        format!("outer failure with 10^5 samples {rate_small:.4}, with 10^6 samples {rate_large:.4}, ratio {ratio:.3}"),
    );
}
