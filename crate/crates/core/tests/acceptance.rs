//! Acceptance suite: twelve end-to-end criteria covering single-letter
//! statistics, renewal asymptotics, likelihood-ratio identities, decoder
//! correctness, full-system simulation targets, wrapper arithmetic,
//! coupled stopping times, bound values, region nesting, and bit-exact
//! reproducibility across thread counts.
//!
//! Each test prints exactly one `PASS criterion N: ...` or
//! `FAIL criterion N: ...` line (visible with `--nocapture`).

use std::sync::OnceLock;
use std::time::Instant;

use vlfmac::bounds::{
    constants_from_estimates, eps_capacity_region, region_contains, sf_converse, Scheme,
    SecondOrderConstants,
};
use vlfmac::channel::{ChannelParams, SingleLetterStats, WalkId};
use vlfmac::coding::{
    brute_force_decode, max_stop_experiment, message_sizes, power_audit, run_decoder_trial,
    run_stop_feedback_sim, summarize_errors, summarize_lengths, thresholds_from_target,
    vlft_wrapper_sim, CodebookPair, SimConfig, ThresholdTriple, TrialOutcome, TrialTrace,
    WrapperConfig,
};
use vlfmac::rng::{domain, Stream};
use vlfmac::stats::{binomial_se, mean_var};
use vlfmac::walk::{
    crossing_moments, estimate_all_ladders, estimate_ladder_full, false_crossing_prob,
    mass_identity_check, mean_crossing_fit, variance_crossing_fit, wald_check, CrossingMoments,
    FalseWalkConfig, LadderEstimates,
};

const SEED: u64 = 20260816;

fn unit_stats() -> SingleLetterStats {
    SingleLetterStats::new(ChannelParams::new(1.0, 1.0).unwrap())
}

fn report(num: u32, ok: bool, detail: &str) {
    println!("{} criterion {num}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {num} failed: {detail}");
}

/// Crossing-time moments of walk 1 on a threshold grid, plus its ladder
/// estimates, shared by the mean- and variance-asymptotic criteria.
fn crossings() -> &'static (Vec<CrossingMoments>, LadderEstimates) {
    static DATA: OnceLock<(Vec<CrossingMoments>, LadderEstimates)> = OnceLock::new();
    DATA.get_or_init(|| {
        let st = unit_stats();
        let pts = [20.0, 40.0, 80.0, 160.0]
            .iter()
            .map(|&b| crossing_moments(&st, WalkId::User1, b, 100_000, SEED))
            .collect();
        let ladder = estimate_ladder_full(&st, WalkId::User1, 100_000, SEED);
        (pts, ladder)
    })
}

/// One full-system run at target length 200 with calibrated constants,
/// shared by the error-rate and power criteria and reused for the
/// coupled-stopping criterion's constants.
struct SharedSim {
    stats: SingleLetterStats,
    consts: SecondOrderConstants,
    th: ThresholdTriple,
    m: u64,
    outcomes: Vec<TrialOutcome>,
}

fn shared_sim() -> &'static SharedSim {
    static SIM: OnceLock<SharedSim> = OnceLock::new();
    SIM.get_or_init(|| {
        let stats = unit_stats();
        let ladders = estimate_all_ladders(&stats, 50_000, SEED);
        let consts = constants_from_estimates(&stats, &ladders).expect("calibrated constants");
        let th = thresholds_from_target(&stats, 200.0, consts.a_const, consts.g_const)
            .expect("length 200 must be feasible");
        let sizes = message_sizes(&th);
        let m = sizes.m1.min(sizes.m2).min(64);
        let cfg = SimConfig {
            m1: m,
            m2: m,
            horizon: 10_000,
            wrapper: None,
            trials: 10_000,
            seed: SEED,
        };
        let outcomes = run_stop_feedback_sim(&stats, &th, &cfg);
        SharedSim { stats, consts, th, m, outcomes }
    })
}

#[test]
fn criterion_01_single_letter_moments() {
    let start = Instant::now();
    let st = unit_stats();
    let n = 1_000_000usize;
    let mut d: [Vec<f64>; 3] = std::array::from_fn(|_| Vec::with_capacity(n));
    let mut stream = Stream::for_trial(SEED, domain::MOMENTS, 0);
    for _ in 0..n {
        let x1 = stream.normal() * st.sqrt_power(0);
        let x2 = stream.normal() * st.sqrt_power(1);
        let (_, trip) = st.sample_channel(x1, x2, &mut stream);
        d[0].push(trip.d1);
        d[1].push(trip.d2);
        d[2].push(trip.d3);
    }
    let mut ok = true;
    let mut worst_t: f64 = 0.0;
    for (j, col) in d.iter().enumerate() {
        let mv = mean_var(col);
        let t_mean = (mv.mean - st.mu[j]).abs() / mv.mean_se;
        let t_var = (mv.var - st.sigma2[j]).abs() / mv.var_se;
        ok &= t_mean <= 4.0 && t_var <= 4.0;
        worst_t = worst_t.max(t_mean).max(t_var);
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 10.0;
    report(
        1,
        ok,
        &format!(
            "single-letter means/variances match analytic values over 1e6 samples \
             (worst |t| = {worst_t:.2}, {secs:.1}s)"
        ),
    );
}

#[test]
fn criterion_02_mean_crossing_asymptotics() {
    let start = Instant::now();
    let (pts, ladder) = crossings();
    let st = unit_stats();
    let mu = st.mu[0];
    let fit = mean_crossing_fit(pts);
    let slope_rel = (fit.slope - 1.0 / mu).abs() * mu;
    let intercept = fit.intercept * mu;
    let se = ((fit.intercept_se * mu).powi(2) + ladder.xi_se.powi(2)).sqrt();
    let t_int = (intercept - ladder.xi).abs() / se;
    let secs = start.elapsed().as_secs_f64();
    let ok = slope_rel <= 0.01 && t_int <= 3.0 && secs < 120.0;
    report(
        2,
        ok,
        &format!(
            "mean crossing time is linear in the threshold: slope off 1/drift by \
             {:.3}%, intercept*drift vs ladder bias |t| = {:.2} ({:.1}s)",
            slope_rel * 100.0,
            t_int,
            secs
        ),
    );
}

#[test]
fn criterion_03_variance_crossing_asymptotics() {
    let (pts, ladder) = crossings();
    let st = unit_stats();
    let mu = st.mu[0];
    let s2 = st.sigma2[0];
    let fit = variance_crossing_fit(pts);
    let slope_target = s2 / (mu * mu * mu);
    let slope_rel = (fit.slope - slope_target).abs() / slope_target;
    let k = ladder.k_const.expect("K estimate");
    let k_se = ladder.k_se.expect("K estimate error");
    let target = k / (mu * mu);
    let se = (fit.intercept_se.powi(2) + (k_se / (mu * mu)).powi(2)).sqrt();
    let t_int = (fit.intercept - target).abs() / se;
    let ok = slope_rel <= 0.05 && t_int <= 4.0;
    report(
        3,
        ok,
        &format!(
            "crossing-time variance grows at rate var/drift^3 (off by {:.2}%), \
             residual constant vs renewal prediction |t| = {:.2}",
            slope_rel * 100.0,
            t_int
        ),
    );
}

#[test]
fn criterion_04_stopped_mean_identity() {
    let st = unit_stats();
    let mut ok = true;
    let mut worst_t: f64 = 0.0;
    for which in WalkId::ALL {
        for gamma in [0.0, 10.0, 50.0] {
            let rep = wald_check(&st, which, gamma, 100_000, SEED);
            ok &= rep.pass;
            worst_t = worst_t.max(rep.t_stat.abs());
        }
    }
    report(
        4,
        ok,
        &format!(
            "stopped sum equals drift times stopped time on all walks and \
             thresholds 0/10/50 (worst |t| = {worst_t:.2})"
        ),
    );
}

#[test]
fn criterion_05_measure_change_identities() {
    let st = unit_stats();
    let mut ok = true;
    let mut worst_t: f64 = 0.0;
    for which in WalkId::ALL {
        for n in 1..=10u32 {
            let chk = mass_identity_check(&st, which, n, 100_000, SEED);
            ok &= chk.pass;
            worst_t = worst_t.max(chk.t_stat.abs());
        }
    }
    let mut worst_excess: f64 = f64::NEG_INFINITY;
    for which in WalkId::ALL {
        for gamma in [2.0, 5.0, 10.0] {
            let cfg = FalseWalkConfig { which, gamma, horizon: 128 };
            let rep = false_crossing_prob(&st, &cfg, 100_000, SEED);
            ok &= rep.pass;
            worst_excess = worst_excess.max(rep.p_hat - rep.bound);
        }
    }
    report(
        5,
        ok,
        &format!(
            "mismatched-density mass is one for up to 10 steps (worst |t| = \
             {worst_t:.2}) and false-crossing rates stay under exp(-threshold) \
             (worst excess = {worst_excess:.2e})"
        ),
    );
}

#[test]
fn criterion_06_decoder_matches_exhaustive_oracle() {
    let st = unit_stats();
    let th = thresholds_from_target(&st, 20.0, 0.0, 0.0).unwrap();
    let horizon = 64u64;
    let mut mismatches = 0u32;
    let mut checked = 0u32;
    for (m, seed) in [(2u64, SEED), (4, SEED + 1)] {
        for trial in 0..500u64 {
            let cb = CodebookPair::for_trial(seed, trial, m, m, &st);
            let mut msg = Stream::for_trial(seed, domain::INNER_COIN, trial);
            let w1 = msg.uniform_below(m) as u32 + 1;
            let w2 = msg.uniform_below(m) as u32 + 1;
            let mut noise = Stream::for_trial(seed, domain::CHANNEL_NOISE, trial);
            let mut trace = TrialTrace::new(m as usize, m as usize);
            let o = run_decoder_trial(&cb, &th, (w1, w2), &st, &mut noise, horizon, Some(&mut trace));
            let agree = match brute_force_decode(&trace, &th) {
                None => o.erased && o.decoded.is_none(),
                Some((t, pair)) => !o.erased && o.tau_star == t && o.decoded == Some(pair),
            };
            if !agree {
                mismatches += 1;
            }
            checked += 1;
        }
    }
    report(
        6,
        mismatches == 0 && checked == 1000,
        &format!(
            "streaming decoder agrees with the exhaustive oracle on all {checked} \
             trials ({mismatches} mismatches)"
        ),
    );
}

#[test]
fn criterion_07_error_rate_meets_target() {
    let sim = shared_sim();
    let errors = summarize_errors(&sim.outcomes, sim.m, sim.m, &sim.th.gamma);
    let lengths = summarize_lengths(&sim.outcomes);
    let target = 1.0 / sim.th.n_prime;
    let allowance = 4.0 * binomial_se(target, errors.inner_trials);
    let ok = sim.m == 64 && errors.inner_rate <= target + allowance && errors.union_pass;
    report(
        7,
        ok,
        &format!(
            "decode error rate {:.2e} meets the 1/length target {:.2e} (+{:.1e}) at \
             length 200 with 64x64 messages; mean decision time {:.1}",
            errors.inner_rate, target, allowance, lengths.mean_tau_star
        ),
    );
}

#[test]
fn criterion_08_power_accounting() {
    let sim = shared_sim();
    let rep = power_audit(&sim.outcomes, &sim.stats);
    let mut ok = true;
    let mut worst_t: f64 = 0.0;
    for u in &rep.users {
        ok &= u.inequality_pass && u.equality_pass && u.full_equality_pass;
        worst_t = worst_t.max((u.diff_mean / u.diff_se).abs());
        worst_t = worst_t.max((u.full_diff_mean / u.full_diff_se).abs());
    }
    report(
        8,
        ok,
        &format!(
            "per-user energy stays within budget and matches power times stopping \
             time under zero-padding accounting (worst |t| = {worst_t:.2})"
        ),
    );
}

#[test]
fn criterion_09_termination_wrapper() {
    let cfg = WrapperConfig::new(10.0, 0.5).unwrap();
    let p_exact = cfg.p == 4.0 / 9.0;
    let budget = 0.5 * 100.0 / 9.0; // outer budget whose optimal inner length is 10
    let round_trip = (WrapperConfig::from_target(budget, 0.5).unwrap().n_prime - 10.0).abs() < 1e-9;
    let rep = vlft_wrapper_sim(&cfg, 200_000, SEED).unwrap();
    let error_target_ok = rep.combined_rate <= 0.5 + 4.0 * rep.combined_se;
    let length_ok = rep.mean_length <= budget + 4.0 * rep.length_se;
    let ok = p_exact && round_trip && rep.abort_pass && rep.error_pass && error_target_ok && length_ok;
    report(
        9,
        ok,
        &format!(
            "termination wrapper: coin probability 4/9 exact = {p_exact}, combined \
             error {:.4} <= 0.5, mean length {:.4} <= budget {:.4}",
            rep.combined_rate, rep.mean_length, budget
        ),
    );
}

#[test]
fn criterion_10_max_stopping_time_slack() {
    let sim = shared_sim();
    let mut slacks = Vec::new();
    let mut pairs_ok = true;
    let mut final_se = 0.0;
    for n_prime in [100.0, 200.0, 400.0] {
        let rep = max_stop_experiment(&sim.stats, &sim.consts, n_prime, 100_000, SEED).unwrap();
        for p in &rep.pairs {
            pairs_ok &= p.pass;
        }
        final_se = rep.max_se;
        slacks.push(rep.slack);
    }
    let decreasing = slacks[0] > slacks[1] && slacks[1] > slacks[2];
    let nonpositive = slacks[2] <= 4.0 * final_se;
    let ok = decreasing && nonpositive && pairs_ok;
    report(
        10,
        ok,
        &format!(
            "mean max stopping time stays under target with growing slack \
             ({:.1}, {:.1}, {:.1} at lengths 100/200/400) and pairwise gaps \
             respect their bounds",
            slacks[0], slacks[1], slacks[2]
        ),
    );
}

#[test]
fn criterion_11_bounds_and_region_nesting() {
    let frozen = {
        let st = unit_stats();
        let con = sf_converse(100.0, 0.5, &st).unwrap();
        (con.r1 - 70.70101241711442).abs() <= 1e-3
    };

    let mut corners_ok = true;
    let mut nesting_ok = true;
    for (p1, p2, eps) in [(1.0, 1.0, 0.1), (1.0, 4.0, 0.3), (10.0, 10.0, 0.5)] {
        let st = SingleLetterStats::new(ChannelParams::new(p1, p2).unwrap());
        let scale = 1.0 / (1.0 - eps);
        let pent = eps_capacity_region(&st, eps, Scheme::StopFeedback, 0).unwrap();
        let expected = [
            (0.0, st.mu[1] * scale),
            ((st.mu[2] - st.mu[1]) * scale, st.mu[1] * scale),
            (st.mu[0] * scale, (st.mu[2] - st.mu[0]) * scale),
            (st.mu[0] * scale, 0.0),
        ];
        corners_ok &= pent.points.len() == expected.len();
        for (got, want) in pent.points.iter().zip(expected.iter()) {
            corners_ok &= (got.0 - want.0).abs() <= 1e-9 && (got.1 - want.1).abs() <= 1e-9;
        }

        let swept = eps_capacity_region(&st, eps, Scheme::Vlft, 100).unwrap();
        let c2s = st.mu[1] * scale;
        for i in 0..=100u32 {
            // Matches the swept region's own column abscissae bit for bit.
            let x = st.mu[0] * i as f64 / 100.0 * scale;
            for j in 0..=100u32 {
                let y = c2s * j as f64 / 100.0;
                if region_contains(&pent, x, y, 1e-9) && !region_contains(&swept, x, y, 1e-9) {
                    nesting_ok = false;
                }
            }
        }
    }
    let ok = frozen && corners_ok && nesting_ok;
    report(
        11,
        ok,
        &format!(
            "frozen converse value matches = {frozen}, rectangle-region corners \
             exact = {corners_ok}, swept region contains the corner-point region \
             on all three power/error combos = {nesting_ok}"
        ),
    );
}

#[test]
fn criterion_12_thread_count_invariance() {
    let exe = env!("CARGO_BIN_EXE_vlfmac");
    let args = [
        "simulate",
        "--n-prime",
        "100",
        "--trials",
        "500",
        "--m-cap",
        "16",
        "--g-mode",
        "estimated",
        "--calib-trials",
        "3000",
        "--seed",
        "7",
    ];
    let run = |threads: &str| {
        std::process::Command::new(exe)
            .args(args)
            .args(["--threads", threads])
            .output()
            .expect("spawn simulator")
    };
    let one = run("1");
    let eight = run("8");
    let ok = one.status.success()
        && eight.status.success()
        && !one.stdout.is_empty()
        && one.stdout == eight.stdout;
    report(
        12,
        ok,
        &format!(
            "simulator output is byte-identical on 1 and 8 threads \
             ({} bytes)",
            one.stdout.len()
        ),
    );
}
