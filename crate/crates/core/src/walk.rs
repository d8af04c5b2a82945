//! First-passage simulation and renewal-theoretic estimation for the three
//! information-density random walks.
//!
//! Each walk `S_n` is a cumulative sum of i.i.d. per-letter information
//! densities with positive mean `mu` and variance `sigma2`
//! (see [`crate::channel::SingleLetterStats`]). This module estimates the
//! quantities that drive the second-order behaviour of threshold-crossing
//! times:
//!
//! - ladder-height moments `xi = E[H^2] / (2 E[H])` and `nu = E[H^3] / E[H]`
//!   where `H` is the first strictly positive walk value,
//! - the mean of the all-time walk minimum,
//! - the constant `K` in the variance expansion
//!   `Var(tau(b)) = sigma2/mu^3 * b + K/mu^2 + o(1)`,
//! - Wald-identity and change-of-measure diagnostics, and
//! - crossing behaviour of "false-codeword" walks, whose increments are
//!   evaluated at candidate letters independent of the channel output.
//!
//! All Monte Carlo loops run trials in parallel with per-trial counter-based
//! random streams and reduce results in trial order, so output is identical
//! for any thread count.

use crate::channel::{InfoDensityTriple, SingleLetterStats, WalkId};
use crate::rng::{domain, stream_key, Stream};
use crate::stats::{binomial_se, mean_var, LineFit, Moments, PowerSums};
use rayon::prelude::*;

/// Hard safety cap on the number of steps in any single walk simulation.
/// Positive drift makes this unreachable for sane parameters; hitting it is
/// reported as a truncated trial, never silently ignored.
pub const DEFAULT_MAX_STEPS: u64 = 1_000_000_000;

/// Stopping margin for all-time-minimum estimation: once the walk exceeds its
/// running minimum by this many nats, the probability that the minimum is
/// ever updated again is at most `exp(-MIN_MARGIN)` (the matched walks have
/// unit adjustment coefficient: `E[exp(-increment)] = 1`), i.e. below 1e-6.
pub const MIN_MARGIN: f64 = 14.0;

/// Threshold (in nats) separating the bounded part of importance-weighted
/// expectations from the deep-left tail, which is evaluated under the
/// switched law instead. `exp(-S)` restricted to `S > -MASS_SPLIT` is bounded
/// by `exp(MASS_SPLIT)`, so both halves have finite variance.
pub const MASS_SPLIT: f64 = 5.0;

/// One first-passage observation: `tau` is the first step at which the walk
/// strictly exceeds the threshold, `s_tau` the walk value there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingSample {
    pub tau: u64,
    pub s_tau: f64,
    pub overshoot: f64,
}

/// One matched step: draws fresh input letters at full power and a noise
/// sample, and returns the requested walk's increment.
#[inline]
fn matched_increment(stats: &SingleLetterStats, which: WalkId, stream: &mut Stream) -> f64 {
    let x1 = stream.normal() * stats.sqrt_power(0);
    let x2 = stream.normal() * stats.sqrt_power(1);
    let (_, d) = stats.sample_channel(x1, x2, stream);
    d.get(which)
}

/// One matched step returning all three increments (for coupled walks).
#[inline]
fn matched_triple(stats: &SingleLetterStats, stream: &mut Stream) -> InfoDensityTriple {
    let x1 = stream.normal() * stats.sqrt_power(0);
    let x2 = stream.normal() * stats.sqrt_power(1);
    let (_, d) = stats.sample_channel(x1, x2, stream);
    d
}

/// Per-step data needed by change-of-measure test functions: the candidate
/// letters the density is evaluated at, the channel output, and the increment.
#[derive(Debug, Clone, Copy)]
struct StepData {
    x1c: f64,
    x2c: f64,
    y: f64,
    inc: f64,
}

/// Matched step with candidate letters equal to the transmitted letters.
#[inline]
fn true_step(stats: &SingleLetterStats, which: WalkId, stream: &mut Stream) -> StepData {
    let x1 = stream.normal() * stats.sqrt_power(0);
    let x2 = stream.normal() * stats.sqrt_power(1);
    let (y, d) = stats.sample_channel(x1, x2, stream);
    StepData { x1c: x1, x2c: x2, y, inc: d.get(which) }
}

/// Switched-law step: the walk's own user letters are drawn independently of
/// the letters that actually generate the channel output, so the evaluated
/// codeword is "false". Letters of the other user stay shared, matching the
/// situation a decoder faces when scoring a wrong message.
///
/// Exactly five normals are consumed per step regardless of the walk.
#[inline]
fn switched_step(stats: &SingleLetterStats, which: WalkId, stream: &mut Stream) -> StepData {
    let x1c = stream.normal() * stats.sqrt_power(0);
    let x2c = stream.normal() * stats.sqrt_power(1);
    let x1g = stream.normal() * stats.sqrt_power(0);
    let x2g = stream.normal() * stats.sqrt_power(1);
    let z = stream.normal();
    let (y, inc) = match which {
        WalkId::User1 => {
            let y = x1g + x2c + z;
            (y, stats.info_density(x1c, x2c, y).d1)
        }
        WalkId::User2 => {
            let y = x1c + x2g + z;
            (y, stats.info_density(x1c, x2c, y).d2)
        }
        WalkId::Pair => {
            let y = x1g + x2g + z;
            (y, stats.info_density(x1c, x2c, y).d3)
        }
    };
    StepData { x1c, x2c, y, inc }
}

/// Runs one walk until it strictly exceeds `gamma`; `None` if `max_steps`
/// elapse first (a diagnostic event — positive drift makes it vanishingly
/// unlikely for reasonable parameters).
pub fn simulate_walk_until(
    stats: &SingleLetterStats,
    which: WalkId,
    gamma: f64,
    stream: &mut Stream,
    max_steps: u64,
) -> Option<StoppingSample> {
    let mut s = 0.0;
    for n in 1..=max_steps {
        s += matched_increment(stats, which, stream);
        if s > gamma {
            return Some(StoppingSample { tau: n, s_tau: s, overshoot: s - gamma });
        }
    }
    None
}

/// All-time minimum of one walk, truncated when the walk has risen
/// `MIN_MARGIN` above its running minimum.
fn walk_min_sample(
    stats: &SingleLetterStats,
    which: WalkId,
    stream: &mut Stream,
    max_steps: u64,
) -> Option<f64> {
    let mut s = 0.0;
    let mut min_s = 0.0;
    for _ in 0..max_steps {
        s += matched_increment(stats, which, stream);
        if s < min_s {
            min_s = s;
        } else if s > min_s + MIN_MARGIN {
            return Some(min_s);
        }
    }
    None
}

/// Monte Carlo estimates of the renewal quantities of one walk.
#[derive(Debug, Clone)]
pub struct LadderEstimates {
    pub which: WalkId,
    /// `xi = E[H^2] / (2 E[H])`, the stationary mean overshoot.
    pub xi: f64,
    pub xi_se: f64,
    /// `nu = E[H^3] / E[H]`.
    pub nu: f64,
    pub nu_se: f64,
    /// Mean of the all-time walk minimum (nonpositive).
    pub min_mean: f64,
    pub min_se: f64,
    /// Mean first strictly-ascending epoch.
    pub mean_tau_plus: f64,
    /// Mean first strictly-positive walk value `E[H]`.
    pub mean_height: f64,
    /// Variance-expansion constant, filled by [`estimate_k`].
    pub k_const: Option<f64>,
    pub k_se: Option<f64>,
    pub trials: u64,
    /// Trials abandoned at the safety cap (excluded from the estimates).
    pub truncated: u64,
}

/// Estimates ladder-height moments and the walk-minimum mean.
///
/// The ladder pass samples the first strictly positive walk value `H`
/// (threshold 0); `xi` and `nu` are ratio estimators with delta-method
/// standard errors. The minimum pass uses the `MIN_MARGIN` truncation rule.
pub fn estimate_ladder_moments(
    stats: &SingleLetterStats,
    which: WalkId,
    trials: u64,
    seed: u64,
) -> LadderEstimates {
    let w = which.index();

    let ladder: Vec<Option<StoppingSample>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut stream = Stream::for_walk_trial(seed, domain::LADDER, w, t);
            simulate_walk_until(stats, which, 0.0, &mut stream, DEFAULT_MAX_STEPS)
        })
        .collect();

    let mins: Vec<Option<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut stream = Stream::for_walk_trial(seed, domain::WALK_MIN, w, t);
            walk_min_sample(stats, which, &mut stream, DEFAULT_MAX_STEPS)
        })
        .collect();

    let mut truncated = 0u64;
    let mut heights = PowerSums::new();
    let mut tau_acc = Moments::new();
    let mut height_acc = Moments::new();
    for s in &ladder {
        match s {
            Some(s) => {
                heights.push(s.s_tau);
                tau_acc.push(s.tau as f64);
                height_acc.push(s.s_tau);
            }
            None => truncated += 1,
        }
    }
    let mut min_acc = Moments::new();
    for m in &mins {
        match m {
            Some(v) => min_acc.push(*v),
            None => truncated += 1,
        }
    }

    let (xi, xi_se) = heights.half_second_over_first();
    let (nu, nu_se) = heights.third_over_first();
    LadderEstimates {
        which,
        xi,
        xi_se,
        nu,
        nu_se,
        min_mean: min_acc.mean(),
        min_se: min_acc.se(),
        mean_tau_plus: tau_acc.mean(),
        mean_height: height_acc.mean(),
        k_const: None,
        k_se: None,
        trials,
        truncated,
    }
}

/// Result of the variance-expansion constant estimation.
#[derive(Debug, Clone, Copy)]
pub struct KEstimate {
    pub k: f64,
    pub se: f64,
    /// The quadrature value of `I = ∫_0^∞ E[S_{tau(x)} - x] P(min <= -x) dx`.
    pub integral: f64,
    pub integral_se: f64,
    /// Number of quadrature levels used (including level 0).
    pub levels: usize,
    pub trials: u64,
    pub truncated: u64,
}

/// Estimates the constant `K` of the crossing-time variance expansion:
///
/// `K = sigma2*xi/mu + 3*xi^2 - (2/3)*nu - 2*xi*E[min] - 2*I`
///
/// with `I` as in [`KEstimate::integral`]. The integrand is sampled on a
/// geometric level grid (`x_0 = 0`, then `0.05 * 1.35^i`) cut off where the
/// empirical `P(min <= -x)` drops below 1e-3, integrated by the trapezoid
/// rule, and closed with the exponential-tail approximation
/// `∫_tail ≈ xi * P(min <= -x_last)` (the overshoot mean tends to `xi` and
/// the minimum tail decays at unit exponential rate).
///
/// At level 0 the minimum probability uses the strict event `min < 0`: the
/// integrand's right limit at 0 excludes the atom `P(min = 0) > 0`.
///
/// The reported standard error treats quadrature levels as independent and
/// ignores the tail's dependence on `xi`; it is a same-order approximation,
/// adequate because downstream comparisons allow several combined errors.
pub fn estimate_k(
    stats: &SingleLetterStats,
    which: WalkId,
    ladder: &LadderEstimates,
    trials: u64,
    seed: u64,
) -> KEstimate {
    let w = which.index();
    let mu = stats.mu[w];
    let sigma2 = stats.sigma2[w];

    // Pass 1: walk minima (same substream family as the ladder pass, so the
    // empirical minimum distribution is consistent with `ladder.min_mean`).
    let mins_raw: Vec<Option<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut stream = Stream::for_walk_trial(seed, domain::WALK_MIN, w, t);
            walk_min_sample(stats, which, &mut stream, DEFAULT_MAX_STEPS)
        })
        .collect();
    let mut truncated = 0u64;
    let mut mins: Vec<f64> = Vec::with_capacity(mins_raw.len());
    for m in mins_raw {
        match m {
            Some(v) => mins.push(v),
            None => truncated += 1,
        }
    }
    mins.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n_min = mins.len() as f64;
    // P(min <= -x) from the sorted sample (strict for x = 0).
    let tail_prob = |x: f64, strict: bool| -> f64 {
        let cnt = if strict {
            mins.partition_point(|&m| m < -x)
        } else {
            mins.partition_point(|&m| m <= -x)
        };
        cnt as f64 / n_min
    };

    // Geometric level grid.
    let mut levels = vec![0.0f64];
    let mut x = 0.05;
    while tail_prob(x, false) >= 1e-3 && levels.len() < 80 {
        levels.push(x);
        x *= 1.35;
    }
    let n_levels = levels.len();
    let probs: Vec<f64> = levels
        .iter()
        .enumerate()
        .map(|(i, &x)| tail_prob(x, i == 0))
        .collect();

    // Pass 2: overshoots at every level from a single ascending sweep.
    let over: Vec<Option<Vec<f64>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut stream = Stream::for_walk_trial(seed, domain::OVERSHOOT, w, t);
            let mut s = 0.0;
            let mut idx = 0usize;
            let mut ov = vec![0.0f64; n_levels];
            let mut steps = 0u64;
            while idx < n_levels {
                if steps >= DEFAULT_MAX_STEPS {
                    return None;
                }
                steps += 1;
                s += matched_increment(stats, which, &mut stream);
                while idx < n_levels && s > levels[idx] {
                    ov[idx] = s - levels[idx];
                    idx += 1;
                }
            }
            Some(ov)
        })
        .collect();

    let mut ov_acc: Vec<Moments> = (0..n_levels).map(|_| Moments::new()).collect();
    for o in &over {
        match o {
            Some(ov) => {
                for (acc, &v) in ov_acc.iter_mut().zip(ov.iter()) {
                    acc.push(v);
                }
            }
            None => truncated += 1,
        }
    }

    // Trapezoid quadrature of g(x) = E[overshoot at x] * P(min <= -x).
    let g: Vec<f64> = (0..n_levels).map(|i| ov_acc[i].mean() * probs[i]).collect();
    let g_var: Vec<f64> = (0..n_levels)
        .map(|i| {
            let p_se = binomial_se(probs[i], mins.len() as u64);
            let ov = ov_acc[i].mean();
            let ov_se = ov_acc[i].se();
            (probs[i] * ov_se).powi(2) + (ov * p_se).powi(2)
        })
        .collect();
    let mut weights = vec![0.0f64; n_levels];
    for i in 0..n_levels.saturating_sub(1) {
        let h = levels[i + 1] - levels[i];
        weights[i] += 0.5 * h;
        weights[i + 1] += 0.5 * h;
    }
    let integral_grid: f64 = (0..n_levels).map(|i| weights[i] * g[i]).sum();
    let var_grid: f64 = (0..n_levels).map(|i| weights[i] * weights[i] * g_var[i]).sum();

    let p_last = *probs.last().unwrap();
    let p_last_se = binomial_se(p_last, mins.len() as u64);
    let tail = ladder.xi * p_last;
    let tail_var = (p_last * ladder.xi_se).powi(2) + (ladder.xi * p_last_se).powi(2);

    let integral = integral_grid + tail;
    let integral_se = (var_grid + tail_var).sqrt();

    let k = sigma2 * ladder.xi / mu + 3.0 * ladder.xi * ladder.xi
        - (2.0 / 3.0) * ladder.nu
        - 2.0 * ladder.xi * ladder.min_mean
        - 2.0 * integral;
    let dk_dxi = sigma2 / mu + 6.0 * ladder.xi - 2.0 * ladder.min_mean;
    let se = ((dk_dxi * ladder.xi_se).powi(2)
        + ((2.0 / 3.0) * ladder.nu_se).powi(2)
        + (2.0 * ladder.xi * ladder.min_se).powi(2)
        + (2.0 * integral_se).powi(2))
    .sqrt();

    KEstimate { k, se, integral, integral_se, levels: n_levels, trials, truncated }
}

/// Ladder moments and the variance constant in one call.
pub fn estimate_ladder_full(
    stats: &SingleLetterStats,
    which: WalkId,
    trials: u64,
    seed: u64,
) -> LadderEstimates {
    let mut ladder = estimate_ladder_moments(stats, which, trials, seed);
    let k = estimate_k(stats, which, &ladder, trials, seed);
    ladder.k_const = Some(k.k);
    ladder.k_se = Some(k.se);
    ladder.truncated += k.truncated;
    ladder
}

/// All three walks, full estimates.
pub fn estimate_all_ladders(
    stats: &SingleLetterStats,
    trials: u64,
    seed: u64,
) -> [LadderEstimates; 3] {
    WalkId::ALL.map(|wh| estimate_ladder_full(stats, wh, trials, seed))
}

/// Monte Carlo mean and variance of the crossing time at one threshold.
#[derive(Debug, Clone, Copy)]
pub struct CrossingMoments {
    pub b: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub var: f64,
    pub var_se: f64,
    pub trials: u64,
    pub truncated: u64,
}

/// Samples `tau(b)` over independent trials and summarizes its moments.
pub fn crossing_moments(
    stats: &SingleLetterStats,
    which: WalkId,
    b: f64,
    trials: u64,
    seed: u64,
) -> CrossingMoments {
    let w = which.index() as u64;
    let taus_raw: Vec<Option<u64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let key = stream_key(seed, &[domain::CROSSING, w, b.to_bits(), t]);
            let mut stream = Stream::new(key);
            simulate_walk_until(stats, which, b, &mut stream, DEFAULT_MAX_STEPS).map(|s| s.tau)
        })
        .collect();
    let mut truncated = 0u64;
    let mut taus: Vec<f64> = Vec::with_capacity(taus_raw.len());
    for t in taus_raw {
        match t {
            Some(v) => taus.push(v as f64),
            None => truncated += 1,
        }
    }
    let mv = mean_var(&taus);
    CrossingMoments {
        b,
        mean: mv.mean,
        mean_se: mv.mean_se,
        var: mv.var,
        var_se: mv.var_se,
        trials,
        truncated,
    }
}

/// Weighted least-squares line through the crossing-time means vs `b`.
/// Slope estimates `1/mu`; intercept estimates `xi/mu`.
pub fn mean_crossing_fit(points: &[CrossingMoments]) -> LineFit {
    let xs: Vec<f64> = points.iter().map(|p| p.b).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean).collect();
    let sds: Vec<f64> = points.iter().map(|p| p.mean_se).collect();
    weighted_line(&xs, &ys, &sds)
}

/// Weighted least-squares line through the crossing-time variances vs `b`.
/// Slope estimates `sigma2/mu^3`; intercept estimates `K/mu^2`.
pub fn variance_crossing_fit(points: &[CrossingMoments]) -> LineFit {
    let xs: Vec<f64> = points.iter().map(|p| p.b).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.var).collect();
    let sds: Vec<f64> = points.iter().map(|p| p.var_se).collect();
    weighted_line(&xs, &ys, &sds)
}

fn weighted_line(xs: &[f64], ys: &[f64], sds: &[f64]) -> LineFit {
    crate::stats::weighted_line_fit(xs, ys, sds)
}

/// Verifies `E[S_tau] - mu * E[tau] = 0` within Monte Carlo error using the
/// paired per-trial differences `S_tau - mu * tau` (exactly mean-zero for any
/// almost-surely finite stopping time of an i.i.d. walk with mean `mu`).
pub fn wald_check(
    stats: &SingleLetterStats,
    which: WalkId,
    gamma: f64,
    trials: u64,
    seed: u64,
) -> WaldReport {
    let w = which.index() as u64;
    let mu = stats.mu[which.index()];
    let samples: Vec<Option<StoppingSample>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let key = stream_key(seed, &[domain::WALD, w, gamma.to_bits(), t]);
            let mut stream = Stream::new(key);
            simulate_walk_until(stats, which, gamma, &mut stream, DEFAULT_MAX_STEPS)
        })
        .collect();
    let mut diff = Moments::new();
    let mut tau_acc = Moments::new();
    let mut s_acc = Moments::new();
    let mut truncated = 0u64;
    for s in &samples {
        match s {
            Some(s) => {
                diff.push(s.s_tau - mu * s.tau as f64);
                tau_acc.push(s.tau as f64);
                s_acc.push(s.s_tau);
            }
            None => truncated += 1,
        }
    }
    let diff_mean = diff.mean();
    let diff_se = diff.se();
    WaldReport {
        which,
        gamma,
        mean_tau: tau_acc.mean(),
        mean_s_tau: s_acc.mean(),
        mu,
        diff_mean,
        diff_se,
        t_stat: if diff_se > 0.0 { diff_mean / diff_se } else { 0.0 },
        pass: diff_mean.abs() <= 4.0 * diff_se,
        trials,
        truncated,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WaldReport {
    pub which: WalkId,
    pub gamma: f64,
    pub mean_tau: f64,
    pub mean_s_tau: f64,
    pub mu: f64,
    pub diff_mean: f64,
    pub diff_se: f64,
    pub t_stat: f64,
    pub pass: bool,
    pub trials: u64,
    pub truncated: u64,
}

/// Bounded test functions for the change-of-measure diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    /// `f = 1`: verifies the total-mass identity `E[exp(-S_n)] = 1`.
    One,
    /// `f = 1{first channel output > 0}`.
    FirstOutputPositive,
    /// `f = 1{sum of candidate-letter x output correlations > 0}`.
    AlignedScore,
    /// `f = clamp(first-step candidate x output product, -1, 1)`.
    ClippedProduct,
}

impl TestFunction {
    pub fn name(self) -> &'static str {
        match self {
            TestFunction::One => "one",
            TestFunction::FirstOutputPositive => "first_output_positive",
            TestFunction::AlignedScore => "aligned_score",
            TestFunction::ClippedProduct => "clipped_product",
        }
    }
}

/// Result of one change-of-measure comparison.
///
/// The identity tested is `E_switched[f] = E_true[f * exp(-S_n)]`. A naive
/// Monte Carlo of the right side diverges — `exp(-S_n)` has infinite variance
/// under the true law for these walks — so both sides are split at
/// `S_n = -MASS_SPLIT`:
///
/// - bounded part, true law: `E_true[f * exp(-S_n) * 1{S_n > -T}]`,
/// - tail part, switched law: `E_switched[f * 1{S_n <= -T}]`,
///
/// which are equal in distribution to the corresponding halves of the left
/// side. The reported `t_stat` compares the two independently estimated
/// bounded halves; `lhs`/`rhs` report the full assembled sides.
#[derive(Debug, Clone, Copy)]
pub struct MeasureCheck {
    pub which: WalkId,
    pub n_steps: u32,
    pub f_name: &'static str,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub diff: f64,
    pub diff_se: f64,
    pub t_stat: f64,
    pub pass: bool,
    pub trials: u64,
}

fn eval_test_function(f: TestFunction, which: WalkId, steps: &[StepData]) -> f64 {
    match f {
        TestFunction::One => 1.0,
        TestFunction::FirstOutputPositive => {
            if steps[0].y > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        TestFunction::AlignedScore => {
            let score: f64 = steps.iter().map(|s| candidate_letter(which, s) * s.y).sum();
            if score > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        TestFunction::ClippedProduct => {
            (candidate_letter(which, &steps[0]) * steps[0].y).clamp(-1.0, 1.0)
        }
    }
}

#[inline]
fn candidate_letter(which: WalkId, s: &StepData) -> f64 {
    match which {
        WalkId::User1 => s.x1c,
        WalkId::User2 => s.x2c,
        WalkId::Pair => s.x1c + s.x2c,
    }
}

/// Change-of-measure diagnostic for one walk, one horizon, one test function.
pub fn change_of_measure_check(
    stats: &SingleLetterStats,
    which: WalkId,
    n_steps: u32,
    f: TestFunction,
    trials: u64,
    seed: u64,
) -> MeasureCheck {
    let w = which.index() as u64;
    let t_split = MASS_SPLIT;

    // True law: f * exp(-S_n) restricted to the bounded event.
    let true_vals: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let key = stream_key(seed, &[domain::MASS_TRUE, w, n_steps as u64, t]);
            let mut stream = Stream::new(key);
            let mut steps = Vec::with_capacity(n_steps as usize);
            let mut s = 0.0;
            for _ in 0..n_steps {
                let d = true_step(stats, which, &mut stream);
                s += d.inc;
                steps.push(d);
            }
            if s > -t_split {
                eval_test_function(f, which, &steps) * (-s).exp()
            } else {
                0.0
            }
        })
        .collect();

    // Switched law: f itself, plus its split into tail and bounded parts.
    let switched_vals: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let key = stream_key(seed, &[domain::MASS_SWITCHED, w, n_steps as u64, t]);
            let mut stream = Stream::new(key);
            let mut steps = Vec::with_capacity(n_steps as usize);
            let mut s = 0.0;
            for _ in 0..n_steps {
                let d = switched_step(stats, which, &mut stream);
                s += d.inc;
                steps.push(d);
            }
            let fv = eval_test_function(f, which, &steps);
            (fv, s)
        })
        .collect();

    let g_acc = Moments::from_slice(&true_vals);
    let mut f_all = Moments::new();
    let mut f_tail = Moments::new();
    let mut f_high = Moments::new();
    for &(fv, s) in &switched_vals {
        f_all.push(fv);
        if s <= -t_split {
            f_tail.push(fv);
            f_high.push(0.0);
        } else {
            f_tail.push(0.0);
            f_high.push(fv);
        }
    }

    let lhs = f_all.mean();
    let lhs_se = f_all.se();
    let rhs = g_acc.mean() + f_tail.mean();
    let rhs_se = (g_acc.se().powi(2) + f_tail.se().powi(2)).sqrt();
    // Statistically independent comparison: bounded halves only.
    let diff = f_high.mean() - g_acc.mean();
    let diff_se = (f_high.se().powi(2) + g_acc.se().powi(2)).sqrt();
    let t_stat = if diff_se > 0.0 { diff / diff_se } else { 0.0 };
    MeasureCheck {
        which,
        n_steps,
        f_name: f.name(),
        lhs,
        lhs_se,
        rhs,
        rhs_se,
        diff,
        diff_se,
        t_stat,
        pass: diff.abs() <= 4.0 * diff_se,
        trials,
    }
}

/// Total-mass identity `E[exp(-S_n)] = 1` via the split estimator.
pub fn mass_identity_check(
    stats: &SingleLetterStats,
    which: WalkId,
    n_steps: u32,
    trials: u64,
    seed: u64,
) -> MeasureCheck {
    change_of_measure_check(stats, which, n_steps, TestFunction::One, trials, seed)
}

/// Configuration of a false-codeword walk experiment.
#[derive(Debug, Clone, Copy)]
pub struct FalseWalkConfig {
    pub which: WalkId,
    pub gamma: f64,
    pub horizon: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct FalseWalkReport {
    pub which: WalkId,
    pub gamma: f64,
    pub horizon: u64,
    /// Empirical probability that the false walk exceeds `gamma` within the
    /// horizon.
    pub p_hat: f64,
    pub se: f64,
    /// The change-of-measure bound `exp(-gamma)` on the infinite-horizon
    /// crossing probability.
    pub bound: f64,
    pub pass: bool,
    pub trials: u64,
}

/// Estimates `P(false walk exceeds gamma within horizon)` and compares it to
/// the `exp(-gamma)` bound.
pub fn false_crossing_prob(
    stats: &SingleLetterStats,
    cfg: &FalseWalkConfig,
    trials: u64,
    seed: u64,
) -> FalseWalkReport {
    let w = cfg.which.index() as u64;
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let key = stream_key(seed, &[domain::FALSE_WALK, w, cfg.gamma.to_bits(), t]);
            let mut stream = Stream::new(key);
            let mut s = 0.0;
            for _ in 0..cfg.horizon {
                s += switched_step(stats, cfg.which, &mut stream).inc;
                if s > cfg.gamma {
                    return 1u64;
                }
            }
            0u64
        })
        .collect::<Vec<u64>>()
        .iter()
        .sum();
    let p_hat = hits as f64 / trials as f64;
    let se = binomial_se(p_hat, trials);
    let bound = (-cfg.gamma).exp();
    FalseWalkReport {
        which: cfg.which,
        gamma: cfg.gamma,
        horizon: cfg.horizon,
        p_hat,
        se,
        bound,
        pass: p_hat <= bound + 4.0 * se,
        trials,
    }
}

/// First-passage times of the three walks driven by shared letters and noise.
/// Each step consumes exactly three normals regardless of crossing state.
pub fn coupled_crossing_times(
    stats: &SingleLetterStats,
    gammas: &[f64; 3],
    stream: &mut Stream,
    max_steps: u64,
) -> Option<[u64; 3]> {
    let mut s = [0.0f64; 3];
    let mut tau = [0u64; 3];
    let mut remaining = 3u32;
    for n in 1..=max_steps {
        let d = matched_triple(stats, stream);
        let inc = [d.d1, d.d2, d.d3];
        for j in 0..3 {
            if tau[j] == 0 {
                s[j] += inc[j];
                if s[j] > gammas[j] {
                    tau[j] = n;
                    remaining -= 1;
                }
            }
        }
        if remaining == 0 {
            return Some(tau);
        }
    }
    None
}
