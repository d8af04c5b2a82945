//! End-to-end Monte Carlo of the stop-feedback code: threshold and message
//! size selection, lazy Gaussian codebooks, the streaming decoder over all
//! message pairs, the Bernoulli termination wrapper, an idealized
//! fixed-length wrapper variant, and the coupled max-of-stopping-times
//! experiment.
//!
//! Everything is deterministic given (seed, configuration): trials use
//! per-trial counter-based substreams, codebook letters are pure functions of
//! (codebook key, message, time), and aggregation runs in trial order.

use crate::bounds::SecondOrderConstants;
use crate::channel::SingleLetterStats;
use crate::error::Error;
use crate::rng::{domain, indexed_normal, stream_key, Stream};
use crate::stats::{binomial_se, Moments};
use crate::walk::{coupled_crossing_times, DEFAULT_MAX_STEPS};
use crate::Result;
use rayon::prelude::*;

/// Decoding thresholds for the three walks, derived from a target length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdTriple {
    pub gamma: [f64; 3],
    pub n_prime: f64,
    /// `n_prime - a*sqrt(n_prime) - g`, the common factor of the thresholds.
    pub effective_length: f64,
}

/// `gamma_j = mu_j * (n' - a*sqrt(n') - g)` for the three walks.
///
/// Rejects configurations whose effective length is nonpositive, naming the
/// minimal feasible target length in the error.
pub fn thresholds_from_target(
    stats: &SingleLetterStats,
    n_prime: f64,
    a_const: f64,
    g_const: f64,
) -> Result<ThresholdTriple> {
    if !n_prime.is_finite() || n_prime <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "n_prime",
            value: n_prime,
            reason: "target length must be finite and positive",
        });
    }
    if !a_const.is_finite() || a_const < 0.0 {
        return Err(Error::InvalidParameter {
            name: "a_const",
            value: a_const,
            reason: "second-order constant must be finite and nonnegative",
        });
    }
    if !g_const.is_finite() {
        return Err(Error::InvalidParameter {
            name: "g_const",
            value: g_const,
            reason: "constant offset must be finite",
        });
    }
    let eff = n_prime - a_const * n_prime.sqrt() - g_const;
    if eff <= 0.0 {
        let root = 0.5 * (a_const + (a_const * a_const + 4.0 * g_const.max(0.0)).sqrt());
        let minimal = (root * root).max(1.0);
        return Err(Error::Infeasible(format!(
            "effective length {eff:.6} <= 0 at target length {n_prime}; \
             smallest feasible target length is about {minimal:.3}"
        )));
    }
    Ok(ThresholdTriple {
        gamma: [stats.mu[0] * eff, stats.mu[1] * eff, stats.mu[2] * eff],
        n_prime,
        effective_length: eff,
    })
}

/// Message counts chosen from the thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageSizes {
    pub m1: u64,
    pub m2: u64,
    /// True when some cap fell below 1 and the count was clamped up to 1.
    pub clamped: bool,
}

fn cap_from_log(log_cap: f64) -> u64 {
    // Largest integer m with ln(m) <= log_cap; the 1e-9 slack absorbs float
    // dust when the cap is an exact integer.
    let c = log_cap.exp() + 1e-9;
    if !c.is_finite() || c >= u64::MAX as f64 {
        u64::MAX
    } else if c < 1.0 {
        0
    } else {
        c as u64
    }
}

/// Largest integer pair with `ln m1 <= gamma1 - ln(3n')`,
/// `ln m2 <= gamma2 - ln(3n')`, and `ln(m1 m2) <= gamma3 - ln(3n')`,
/// maximizing the product `m1*m2` and breaking ties toward larger `m1`.
/// Caps below 1 clamp to 1 and set the `clamped` flag.
pub fn message_sizes(th: &ThresholdTriple) -> MessageSizes {
    let log3n = (3.0 * th.n_prime).ln();
    let raw1 = cap_from_log(th.gamma[0] - log3n);
    let raw2 = cap_from_log(th.gamma[1] - log3n);
    let raw12 = cap_from_log(th.gamma[2] - log3n);
    let clamped = raw1 == 0 || raw2 == 0 || raw12 == 0;
    let c1 = raw1.max(1);
    let c2 = raw2.max(1);
    let c12 = raw12.max(1);

    if (c1 as u128) * (c2 as u128) <= c12 as u128 {
        return MessageSizes { m1: c1, m2: c2, clamped };
    }

    if c12 <= 1_000_000_000_000 {
        // Exact maximization: sweep m1 in blocks of constant floor(c12/m1).
        let m_max = c1.min(c12);
        let mut best = (1u64, c2.min(c12));
        let mut best_p = best.0 as u128 * best.1 as u128;
        let mut m1 = 1u64;
        while m1 <= m_max {
            let q = c12 / m1;
            let r = (c12 / q).min(m_max);
            let cand = (r, q.min(c2));
            let p = cand.0 as u128 * cand.1 as u128;
            if p > best_p || (p == best_p && cand.0 > best.0) {
                best_p = p;
                best = cand;
            }
            m1 = r + 1;
        }
        MessageSizes { m1: best.0, m2: best.1, clamped }
    } else {
        // Caps this large are far beyond anything simulated; take the
        // near-optimal corner (exact when c12/c1 divides evenly).
        let m2 = (c12 / c1).clamp(1, c2);
        let m1 = (c12 / m2).clamp(1, c1);
        MessageSizes { m1, m2, clamped }
    }
}

/// Lazily generated pair of Gaussian codebooks. Letters are pure functions
/// of (message key, time index): regeneration from the same seed is
/// bit-identical, and codewords are unbounded in length.
#[derive(Debug, Clone)]
pub struct CodebookPair {
    pub m1: u64,
    pub m2: u64,
    key1: Vec<u64>,
    key2: Vec<u64>,
    sqrt_p: [f64; 2],
}

impl CodebookPair {
    pub fn new(master_key: u64, m1: u64, m2: u64, stats: &SingleLetterStats) -> CodebookPair {
        CodebookPair {
            m1,
            m2,
            key1: (0..m1).map(|j| stream_key(master_key, &[domain::CODEBOOK_USER1, j])).collect(),
            key2: (0..m2).map(|k| stream_key(master_key, &[domain::CODEBOOK_USER2, k])).collect(),
            sqrt_p: [stats.sqrt_power(0), stats.sqrt_power(1)],
        }
    }

    /// Fresh codebook for one simulation trial (random-coding ensemble).
    pub fn for_trial(seed: u64, trial: u64, m1: u64, m2: u64, stats: &SingleLetterStats) -> CodebookPair {
        CodebookPair::new(stream_key(seed, &[domain::CODEBOOK, trial]), m1, m2, stats)
    }

    /// Letter of `msg` (0-based) of `user` (0 or 1) at time index `n`.
    #[inline]
    pub fn letter(&self, user: usize, msg: usize, n: u64) -> f64 {
        let key = if user == 0 { self.key1[msg] } else { self.key2[msg] };
        indexed_normal(key, n) * self.sqrt_p[user]
    }
}

/// One simulated transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    /// Decision time: first step at which some message pair has all three
    /// walks over threshold (the horizon on erasure, 0 on abort).
    pub tau_star: u64,
    /// Completion time of the transmitted pair's own three walks.
    pub tau_max_true: u64,
    pub decoded: Option<(u32, u32)>,
    pub correct: bool,
    pub aborted: bool,
    pub erased: bool,
    /// Transmitted-letter energies accumulated through `tau_star`.
    pub energy1: f64,
    pub energy2: f64,
    /// Transmitted-letter energies accumulated through `tau_max_true`.
    pub energy1_full: f64,
    pub energy2_full: f64,
}

/// The wrapper's immediate-abort outcome: zero length, zero energy, counted
/// as an error.
pub fn abort_outcome() -> TrialOutcome {
    TrialOutcome {
        tau_star: 0,
        tau_max_true: 0,
        decoded: None,
        correct: false,
        aborted: true,
        erased: false,
        energy1: 0.0,
        energy2: 0.0,
        energy1_full: 0.0,
        energy2_full: 0.0,
    }
}

/// Recorded per-step, per-pair walk increments for oracle re-decoding.
#[derive(Debug, Clone)]
pub struct TrialTrace {
    pub m1: usize,
    pub m2: usize,
    /// `steps[n][pair] = [d1, d2, d3]` at step `n+1`.
    pub steps: Vec<Vec<[f64; 3]>>,
}

impl TrialTrace {
    pub fn new(m1: usize, m2: usize) -> TrialTrace {
        TrialTrace { m1, m2, steps: Vec::new() }
    }
}

/// Streams channel outputs from the transmitted codewords and maintains all
/// `m1*m2` triples of cumulative information densities.
///
/// Each pair completes at the last of its three strict threshold crossings;
/// the decision time is the first step at which any pair has completed, and
/// among pairs completing at that step the decoder picks the largest in
/// lexicographic `(j, k)` order with `j` dominant. Horizon exhaustion is an
/// erasure (an error).
///
/// With `trace` supplied, every pair's increments are recorded for the whole
/// horizon so an oracle can re-derive the decision independently.
pub fn run_decoder_trial(
    cb: &CodebookPair,
    th: &ThresholdTriple,
    true_pair: (u32, u32),
    stats: &SingleLetterStats,
    noise: &mut Stream,
    horizon: u64,
    mut trace: Option<&mut TrialTrace>,
) -> TrialOutcome {
    let m1 = cb.m1 as usize;
    let m2 = cb.m2 as usize;
    let n_pairs = m1 * m2;
    let (w1, w2) = true_pair;
    debug_assert!(w1 >= 1 && (w1 as u64) <= cb.m1 && w2 >= 1 && (w2 as u64) <= cb.m2);
    let true_idx = (w1 as usize - 1) * m2 + (w2 as usize - 1);
    let g = th.gamma;
    let mu = stats.mu;
    let hi = stats.half_inv();
    let trace_on = trace.is_some();

    let mut sums = vec![[0.0f64; 3]; n_pairs];
    let mut crossed = vec![0u8; n_pairs];
    let mut c1 = vec![0.0f64; m1];
    let mut a2 = vec![0.0f64; m1];
    let mut u1 = vec![0.0f64; m2];
    let mut q1 = vec![0.0f64; m2];

    let mut e1 = 0.0f64;
    let mut e2 = 0.0f64;
    let mut tau_star = 0u64;
    let mut tau_prime = 0u64;
    let mut decoded_idx: Option<usize> = None;
    let mut energy = [0.0f64; 2];
    let mut energy_full = [0.0f64; 2];

    for n in 1..=horizon {
        let t = n - 1;
        let z = noise.normal();
        let x1t = cb.letter(0, w1 as usize - 1, t);
        let x2t = cb.letter(1, w2 as usize - 1, t);
        let y = x1t + x2t + z;
        e1 += x1t * x1t;
        e2 += x2t * x2t;

        if trace_on || tau_star == 0 {
            for (j, (cj, aj)) in c1.iter_mut().zip(a2.iter_mut()).enumerate() {
                let c = cb.letter(0, j, t);
                *cj = c;
                let u = y - c;
                *aj = mu[1] + u * u * hi[1];
            }
            for (k, (uk, qk)) in u1.iter_mut().zip(q1.iter_mut()).enumerate() {
                let c = cb.letter(1, k, t);
                let u = y - c;
                *uk = u;
                *qk = mu[0] + u * u * hi[0];
            }
            let base3 = mu[2] + y * y * hi[2];

            let mut best_new: Option<usize> = None;
            let mut trace_step = if trace_on { Some(vec![[0.0f64; 3]; n_pairs]) } else { None };
            for j in 0..m1 {
                let c1j = c1[j];
                let a2j = a2[j];
                let row = j * m2;
                for k in 0..m2 {
                    let p = row + k;
                    let r = u1[k] - c1j;
                    let h = 0.5 * r * r;
                    let d = [q1[k] - h, a2j - h, base3 - h];
                    if let Some(ts) = trace_step.as_mut() {
                        ts[p] = d;
                    }
                    let cr = crossed[p];
                    if cr == 7 {
                        continue;
                    }
                    let s = &mut sums[p];
                    s[0] += d[0];
                    s[1] += d[1];
                    s[2] += d[2];
                    let mut c = cr;
                    if c & 1 == 0 && s[0] > g[0] {
                        c |= 1;
                    }
                    if c & 2 == 0 && s[1] > g[1] {
                        c |= 2;
                    }
                    if c & 4 == 0 && s[2] > g[2] {
                        c |= 4;
                    }
                    if c != cr {
                        crossed[p] = c;
                        if c == 7 {
                            if tau_star == 0 {
                                best_new = Some(p);
                            }
                            if p == true_idx && tau_prime == 0 {
                                tau_prime = n;
                                energy_full = [e1, e2];
                            }
                        }
                    }
                }
            }
            if let (Some(tr), Some(ts)) = (trace.as_deref_mut(), trace_step) {
                tr.steps.push(ts);
            }
            if tau_star == 0 {
                if let Some(p) = best_new {
                    tau_star = n;
                    decoded_idx = Some(p);
                    energy = [e1, e2];
                }
            }
        } else {
            // Decision made; only the transmitted pair's completion time is
            // still pending. Its candidate letters are the transmitted ones.
            let d = stats.info_density(x1t, x2t, y);
            let inc = [d.d1, d.d2, d.d3];
            let s = &mut sums[true_idx];
            let mut c = crossed[true_idx];
            for w in 0..3 {
                if c & (1 << w) == 0 {
                    s[w] += inc[w];
                    if s[w] > g[w] {
                        c |= 1 << w;
                    }
                }
            }
            crossed[true_idx] = c;
            if c == 7 {
                tau_prime = n;
                energy_full = [e1, e2];
            }
        }

        if !trace_on && tau_star != 0 && tau_prime != 0 {
            break;
        }
    }

    let erased = decoded_idx.is_none();
    if tau_star == 0 {
        tau_star = horizon;
        energy = [e1, e2];
    }
    if tau_prime == 0 {
        tau_prime = horizon;
        energy_full = [e1, e2];
    }
    debug_assert!(tau_star <= tau_prime);

    let decoded = decoded_idx.map(|p| ((p / m2) as u32 + 1, (p % m2) as u32 + 1));
    TrialOutcome {
        tau_star,
        tau_max_true: tau_prime,
        decoded,
        correct: decoded == Some(true_pair),
        aborted: false,
        erased,
        energy1: energy[0],
        energy2: energy[1],
        energy1_full: energy_full[0],
        energy2_full: energy_full[1],
    }
}

/// Independent re-evaluation of the decision rule from recorded increments:
/// per-pair prefix sums, per-walk first strict crossings, completion at the
/// max, decision at the min over pairs with the lexicographic-max tie-break.
/// `None` means no pair completed within the recorded steps (erasure).
pub fn brute_force_decode(trace: &TrialTrace, th: &ThresholdTriple) -> Option<(u64, (u32, u32))> {
    let n_pairs = trace.m1 * trace.m2;
    let mut best: Option<(u64, usize)> = None;
    for p in 0..n_pairs {
        let mut s = [0.0f64; 3];
        let mut cross = [0u64; 3];
        for (step, row) in trace.steps.iter().enumerate() {
            for w in 0..3 {
                s[w] += row[p][w];
                if cross[w] == 0 && s[w] > th.gamma[w] {
                    cross[w] = step as u64 + 1;
                }
            }
        }
        if cross.iter().all(|&c| c > 0) {
            let completion = *cross.iter().max().unwrap();
            let better = match best {
                None => true,
                Some((t, q)) => completion < t || (completion == t && p > q),
            };
            if better {
                best = Some((completion, p));
            }
        }
    }
    best.map(|(t, p)| (t, ((p / trace.m2) as u32 + 1, (p % trace.m2) as u32 + 1)))
}

/// Bernoulli termination wrapper configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrapperConfig {
    pub n_prime: f64,
    pub eps: f64,
    /// Abort probability `max(0, (n'*eps - 1) / (n' - 1))`.
    pub p: f64,
}

impl WrapperConfig {
    pub fn new(n_prime: f64, eps: f64) -> Result<WrapperConfig> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter {
                name: "eps",
                value: eps,
                reason: "error budget must lie strictly inside (0, 1)",
            });
        }
        if !n_prime.is_finite() || n_prime <= 1.0 {
            return Err(Error::InvalidParameter {
                name: "n_prime",
                value: n_prime,
                reason: "inner length must exceed 1",
            });
        }
        let p = ((n_prime * eps - 1.0) / (n_prime - 1.0)).max(0.0);
        Ok(WrapperConfig { n_prime, eps, p })
    }

    /// Chooses the inner length from the expected-length budget, then builds
    /// the wrapper.
    pub fn from_target(n: f64, eps: f64) -> Result<WrapperConfig> {
        WrapperConfig::new(choose_inner_length(n, eps)?, eps)
    }
}

/// Largest real inner length `n'` with `(n')^2 (1-eps) / (n'-1) <= n`,
/// i.e. the upper root of `(1-eps) x^2 - n x + n = 0`. Rejected when no
/// feasible length exceeds `1/eps`.
pub fn choose_inner_length(n: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            value: eps,
            reason: "error budget must lie strictly inside (0, 1)",
        });
    }
    if !n.is_finite() || n <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n,
            reason: "length budget must be finite and positive",
        });
    }
    let disc = n * n - 4.0 * n * (1.0 - eps);
    if disc < 0.0 {
        return Err(Error::Infeasible(format!(
            "no inner length satisfies the budget: need n >= {}, got {n}",
            4.0 * (1.0 - eps)
        )));
    }
    let root = (n + disc.sqrt()) / (2.0 * (1.0 - eps));
    if root <= 1.0 / eps {
        return Err(Error::Infeasible(format!(
            "largest feasible inner length {root:.6} does not exceed 1/eps = {}",
            1.0 / eps
        )));
    }
    Ok(root)
}

/// Largest integer inner length satisfying the budget (at least 2); the
/// returned value satisfies the inequality and its successor violates it.
pub fn choose_inner_length_int(n: f64, eps: f64) -> Result<u64> {
    let feasible = |m: u64| -> bool {
        let x = m as f64;
        x > 1.0 && x * x * (1.0 - eps) / (x - 1.0) <= n * (1.0 + 1e-12)
    };
    let real = choose_inner_length(n, eps)?;
    let mut m = real.floor() as u64;
    while m >= 2 && !feasible(m) {
        m -= 1;
    }
    while feasible(m + 1) {
        m += 1;
    }
    if m < 2 {
        return Err(Error::Infeasible(format!(
            "no integer inner length >= 2 satisfies the budget at n = {n}, eps = {eps}"
        )));
    }
    Ok(m)
}

/// Runs the wrapper around one inner trial: immediate abort with probability
/// `p`, otherwise the inner outcome passes through.
pub fn apply_bernoulli_wrapper<F: FnOnce() -> TrialOutcome>(
    cfg: &WrapperConfig,
    coin: &mut Stream,
    inner: F,
) -> TrialOutcome {
    if cfg.p > 0.0 && coin.bernoulli(cfg.p) {
        abort_outcome()
    } else {
        inner()
    }
}

/// Configuration of a full stop-feedback simulation run.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub m1: u64,
    pub m2: u64,
    pub horizon: u64,
    pub wrapper: Option<WrapperConfig>,
    pub trials: u64,
    pub seed: u64,
}

/// Simulates independent transmissions: per trial a fresh codebook pair,
/// uniform message pair, channel noise, and (optionally) the termination
/// wrapper. Returns outcomes in trial order.
pub fn run_stop_feedback_sim(
    stats: &SingleLetterStats,
    th: &ThresholdTriple,
    cfg: &SimConfig,
) -> Vec<TrialOutcome> {
    let seed = cfg.seed;
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let run_inner = || {
                let mut msg = Stream::for_trial(seed, domain::INNER_COIN, t);
                let w1 = msg.uniform_below(cfg.m1) as u32 + 1;
                let w2 = msg.uniform_below(cfg.m2) as u32 + 1;
                let cb = CodebookPair::for_trial(seed, t, cfg.m1, cfg.m2, stats);
                let mut noise = Stream::for_trial(seed, domain::CHANNEL_NOISE, t);
                run_decoder_trial(&cb, th, (w1, w2), stats, &mut noise, cfg.horizon, None)
            };
            match &cfg.wrapper {
                Some(w) => {
                    let mut coin = Stream::for_trial(seed, domain::WRAPPER_COIN, t);
                    apply_bernoulli_wrapper(w, &mut coin, run_inner)
                }
                None => run_inner(),
            }
        })
        .collect()
}

/// Error-rate aggregates of a batch of outcomes.
#[derive(Debug, Clone, Copy)]
pub struct ErrorSummary {
    pub trials: u64,
    pub aborts: u64,
    pub erasures: u64,
    pub wrong: u64,
    /// Errors of any kind: aborts, erasures, and wrong decisions.
    pub combined_errors: u64,
    pub combined_rate: f64,
    pub combined_se: f64,
    /// Among non-aborted trials only.
    pub inner_trials: u64,
    pub inner_errors: u64,
    pub inner_rate: f64,
    pub inner_se: f64,
    /// `(m1-1)e^{-g1} + (m2-1)e^{-g2} + (m1-1)(m2-1)e^{-g3}`.
    pub union_bound: f64,
    pub union_pass: bool,
}

pub fn summarize_errors(
    outcomes: &[TrialOutcome],
    m1: u64,
    m2: u64,
    gamma: &[f64; 3],
) -> ErrorSummary {
    let trials = outcomes.len() as u64;
    let aborts = outcomes.iter().filter(|o| o.aborted).count() as u64;
    let erasures = outcomes.iter().filter(|o| o.erased && !o.aborted).count() as u64;
    let wrong = outcomes
        .iter()
        .filter(|o| !o.aborted && !o.erased && !o.correct)
        .count() as u64;
    let combined_errors = outcomes.iter().filter(|o| !o.correct).count() as u64;
    let inner_trials = trials - aborts;
    let inner_errors = combined_errors - aborts;
    let combined_rate = combined_errors as f64 / trials.max(1) as f64;
    let inner_rate = inner_errors as f64 / inner_trials.max(1) as f64;
    let inner_se = binomial_se(inner_rate, inner_trials.max(1));
    let union_bound = (m1 as f64 - 1.0) * (-gamma[0]).exp()
        + (m2 as f64 - 1.0) * (-gamma[1]).exp()
        + (m1 as f64 - 1.0) * (m2 as f64 - 1.0) * (-gamma[2]).exp();
    ErrorSummary {
        trials,
        aborts,
        erasures,
        wrong,
        combined_errors,
        combined_rate,
        combined_se: binomial_se(combined_rate, trials.max(1)),
        inner_trials,
        inner_errors,
        inner_rate,
        inner_se,
        union_bound,
        union_pass: inner_rate <= union_bound + 4.0 * inner_se,
    }
}

/// Length aggregates of a batch of outcomes.
#[derive(Debug, Clone, Copy)]
pub struct LengthSummary {
    /// Over all trials, aborts counting as length 0 (the wrapped length).
    pub mean_length: f64,
    pub length_se: f64,
    /// Over non-aborted trials.
    pub mean_tau_star: f64,
    pub tau_star_se: f64,
    pub var_tau_star: f64,
    pub mean_tau_prime: f64,
    pub tau_prime_se: f64,
    pub trials: u64,
}

pub fn summarize_lengths(outcomes: &[TrialOutcome]) -> LengthSummary {
    let mut all = Moments::new();
    let mut star = Moments::new();
    let mut prime = Moments::new();
    for o in outcomes {
        all.push(o.tau_star as f64);
        if !o.aborted {
            star.push(o.tau_star as f64);
            prime.push(o.tau_max_true as f64);
        }
    }
    LengthSummary {
        mean_length: all.mean(),
        length_se: all.se(),
        mean_tau_star: star.mean(),
        tau_star_se: star.se(),
        var_tau_star: star.var(),
        mean_tau_prime: prime.mean(),
        tau_prime_se: prime.se(),
        trials: outcomes.len() as u64,
    }
}

/// Energy audit of one user.
#[derive(Debug, Clone, Copy)]
pub struct PowerUser {
    pub mean_energy: f64,
    pub energy_se: f64,
    /// `mean(tau_star) * power`.
    pub budget: f64,
    /// Paired mean/se of `energy - tau_star * power` (zero-padding account).
    pub diff_mean: f64,
    pub diff_se: f64,
    pub equality_pass: bool,
    /// Paired mean/se of `energy_full - tau_max_true * power`.
    pub full_diff_mean: f64,
    pub full_diff_se: f64,
    pub full_equality_pass: bool,
    /// `mean_energy <= budget + 4 * combined se`.
    pub inequality_pass: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct PowerReport {
    pub users: [PowerUser; 2],
    pub trials: u64,
}

/// Checks the expected-power identity `E[sum of squared letters] =
/// E[stopping time] * power` for both users and both accounting variants
/// (decision-time truncation and the transmitted pair's own completion).
pub fn power_audit(outcomes: &[TrialOutcome], stats: &SingleLetterStats) -> PowerReport {
    let powers = [stats.params.p1, stats.params.p2];
    let users = [0usize, 1usize].map(|u| {
        let p = powers[u];
        let mut energy = Moments::new();
        let mut tau = Moments::new();
        let mut diff = Moments::new();
        let mut full_diff = Moments::new();
        for o in outcomes {
            let (e, ef) = if u == 0 { (o.energy1, o.energy1_full) } else { (o.energy2, o.energy2_full) };
            energy.push(e);
            tau.push(o.tau_star as f64);
            diff.push(e - o.tau_star as f64 * p);
            full_diff.push(ef - o.tau_max_true as f64 * p);
        }
        let budget = tau.mean() * p;
        let comb_se = (energy.se().powi(2) + (p * tau.se()).powi(2)).sqrt();
        PowerUser {
            mean_energy: energy.mean(),
            energy_se: energy.se(),
            budget,
            diff_mean: diff.mean(),
            diff_se: diff.se(),
            equality_pass: diff.mean().abs() <= 4.0 * diff.se(),
            full_diff_mean: full_diff.mean(),
            full_diff_se: full_diff.se(),
            full_equality_pass: full_diff.mean().abs() <= 4.0 * full_diff.se(),
            inequality_pass: energy.mean() <= budget + 4.0 * comb_se,
        }
    });
    PowerReport { users, trials: outcomes.len() as u64 }
}

/// Mean absolute gap between two of the coupled stopping times, with its
/// analytic bound.
#[derive(Debug, Clone, Copy)]
pub struct PairGap {
    /// 1-based walk ids.
    pub i: u32,
    pub j: u32,
    pub mean_gap: f64,
    pub se: f64,
    /// `sqrt(2(L_i+L_j) n') + sqrt(2|F_i+F_j| + (B_i-B_j)^2)`.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct MaxStopReport {
    pub n_prime: f64,
    pub gamma: [f64; 3],
    /// Mean of `max(tau1, tau2, tau3)` on shared channel randomness.
    pub mean_max: f64,
    pub max_se: f64,
    /// `mean_max - n_prime`.
    pub slack: f64,
    pub pairs: [PairGap; 3],
    pub trials: u64,
    pub truncated: u64,
}

/// Simulates the three transmitted-pair stopping times on shared randomness
/// at the thresholds for `n_prime` and summarizes the max and the pairwise
/// absolute gaps against their analytic bounds.
pub fn max_stop_experiment(
    stats: &SingleLetterStats,
    consts: &SecondOrderConstants,
    n_prime: f64,
    trials: u64,
    seed: u64,
) -> Result<MaxStopReport> {
    let th = thresholds_from_target(stats, n_prime, consts.a_const, consts.g_const)?;
    let results: Vec<Option<[u64; 3]>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let key = stream_key(seed, &[domain::COUPLED, n_prime.to_bits(), t]);
            let mut stream = Stream::new(key);
            coupled_crossing_times(stats, &th.gamma, &mut stream, DEFAULT_MAX_STEPS)
        })
        .collect();

    let mut max_acc = Moments::new();
    let mut gap_acc = [Moments::new(), Moments::new(), Moments::new()];
    let idx_pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    let mut truncated = 0u64;
    for r in &results {
        match r {
            Some(t) => {
                let tf = [t[0] as f64, t[1] as f64, t[2] as f64];
                max_acc.push(tf[0].max(tf[1]).max(tf[2]));
                for (g, &(i, j)) in gap_acc.iter_mut().zip(idx_pairs.iter()) {
                    g.push((tf[i] - tf[j]).abs());
                }
            }
            None => truncated += 1,
        }
    }

    let pairs = [0usize, 1, 2].map(|q| {
        let (i, j) = idx_pairs[q];
        let bound = (2.0 * (consts.l[i] + consts.l[j]) * n_prime).sqrt()
            + (2.0 * (consts.f[i] + consts.f[j]).abs() + (consts.b[i] - consts.b[j]).powi(2)).sqrt();
        let mean_gap = gap_acc[q].mean();
        let se = gap_acc[q].se();
        PairGap {
            i: i as u32 + 1,
            j: j as u32 + 1,
            mean_gap,
            se,
            bound,
            pass: mean_gap <= bound + 4.0 * se,
        }
    });

    Ok(MaxStopReport {
        n_prime,
        gamma: th.gamma,
        mean_max: max_acc.mean(),
        max_se: max_acc.se(),
        slack: max_acc.mean() - n_prime,
        pairs,
        trials,
        truncated,
    })
}

/// Wrapper simulation summary with an idealized inner code: deterministic
/// length and a Bernoulli error source.
#[derive(Debug, Clone, Copy)]
pub struct WrapperReport {
    pub n_prime: f64,
    pub eps: f64,
    pub p: f64,
    pub inner_error: f64,
    pub aborts: u64,
    pub abort_frac: f64,
    pub abort_se: f64,
    pub combined_errors: u64,
    pub combined_rate: f64,
    pub combined_se: f64,
    /// `p + (1-p) * inner_error`.
    pub predicted_rate: f64,
    pub mean_length: f64,
    pub length_se: f64,
    /// `(1-p) * n_prime`.
    pub predicted_length: f64,
    pub trials: u64,
    pub abort_pass: bool,
    pub error_pass: bool,
}

/// Simulates the Bernoulli termination wrapper around an idealized inner
/// code of deterministic length `cfg.n_prime` and error rate `inner_error`.
pub fn bernoulli_wrapper_sim(
    cfg: &WrapperConfig,
    inner_error: f64,
    trials: u64,
    seed: u64,
) -> WrapperReport {
    let results: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut coin = Stream::for_trial(seed, domain::WRAPPER_COIN, t);
            if cfg.p > 0.0 && coin.bernoulli(cfg.p) {
                (true, true)
            } else {
                let mut inner = Stream::for_trial(seed, domain::INNER_COIN, t);
                (false, inner.bernoulli(inner_error))
            }
        })
        .collect();

    let aborts = results.iter().filter(|r| r.0).count() as u64;
    let combined_errors = results.iter().filter(|r| r.1).count() as u64;
    let mut len = Moments::new();
    for r in &results {
        len.push(if r.0 { 0.0 } else { cfg.n_prime });
    }
    let abort_frac = aborts as f64 / trials as f64;
    let abort_se = binomial_se(abort_frac, trials);
    let combined_rate = combined_errors as f64 / trials as f64;
    let combined_se = binomial_se(combined_rate, trials);
    let predicted_rate = cfg.p + (1.0 - cfg.p) * inner_error;
    WrapperReport {
        n_prime: cfg.n_prime,
        eps: cfg.eps,
        p: cfg.p,
        inner_error,
        aborts,
        abort_frac,
        abort_se,
        combined_errors,
        combined_rate,
        combined_se,
        predicted_rate,
        mean_length: len.mean(),
        length_se: len.se(),
        predicted_length: (1.0 - cfg.p) * cfg.n_prime,
        trials,
        abort_pass: (abort_frac - cfg.p).abs() <= 4.0 * abort_se.max(1e-12),
        error_pass: (combined_rate - predicted_rate).abs() <= 4.0 * combined_se.max(1e-12),
    }
}

/// Wrapper simulation with the idealized fixed-length inner code whose error
/// rate is `2 / n'^2` (requires an inner length of at least 2 so that the
/// inner error does not exceed `1/n'`).
pub fn vlft_wrapper_sim(cfg: &WrapperConfig, trials: u64, seed: u64) -> Result<WrapperReport> {
    if cfg.n_prime < 2.0 {
        return Err(Error::InvalidParameter {
            name: "n_prime",
            value: cfg.n_prime,
            reason: "idealized inner code needs length >= 2",
        });
    }
    let inner_error = 2.0 / (cfg.n_prime * cfg.n_prime);
    Ok(bernoulli_wrapper_sim(cfg, inner_error, trials, seed))
}
