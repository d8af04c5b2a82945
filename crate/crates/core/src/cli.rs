//! Command-line interface: argument parsing, deterministic number
//! formatting, CSV/JSON emission, and the subcommand implementations.
//!
//! Exit codes: 0 success (including `--help`/`--version`), 1 usage or
//! parameter errors, 2 infeasible configurations, 3 self-test failure.

use crate::bounds::{
    constants_from_estimates, eps_capacity_region, rho_capacities, scheme_bounds, RegionBoundary,
    Scheme, SecondOrderConstants,
};
use crate::channel::{binary_entropy, gaussian_capacity, ChannelParams, SingleLetterStats, WalkId};
use crate::coding::{
    choose_inner_length, choose_inner_length_int, max_stop_experiment, message_sizes, power_audit,
    run_stop_feedback_sim, summarize_errors, summarize_lengths, thresholds_from_target,
    ErrorSummary, LengthSummary, MaxStopReport, PowerReport, SimConfig, ThresholdTriple,
    WrapperConfig,
};
use crate::error::Error;
use crate::stats::LineFit;
use crate::walk::{
    crossing_moments, estimate_ladder_full, mean_crossing_fit, variance_crossing_fit,
    CrossingMoments, LadderEstimates,
};
use crate::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};
use std::fs::File;
use std::io::{self, Write};

/// Formats with 12 significant digits, shortest form: positional notation
/// for decimal exponents in `[-4, 12)`, scientific otherwise, trailing
/// zeros stripped.
pub fn fmt_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let sci = format!("{x:.11e}");
    let (_, exp) = sci.split_once('e').expect("exponential format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..12).contains(&exp) {
        let prec = (11 - exp).max(0) as usize;
        strip_zeros(format!("{x:.prec$}"))
    } else {
        let (mant, _) = sci.split_once('e').unwrap();
        let mant = strip_zeros(mant.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    }
}

fn strip_zeros(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// Parses an inclusive `start:stop:step` grid of floats.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Usage(format!("grid '{s}' must have the form START:STOP:STEP")));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Usage(format!("grid '{s}': {e}")))?;
    let (a, b, step) = (nums[0], nums[1], nums[2]);
    if !a.is_finite() || !b.is_finite() || !step.is_finite() || step <= 0.0 || b < a {
        return Err(Error::Usage(format!(
            "grid '{s}': need finite bounds, STOP >= START, and STEP > 0"
        )));
    }
    if (b - a) / step > 1e6 {
        return Err(Error::Usage(format!("grid '{s}' has more than a million points")));
    }
    let mut v = Vec::new();
    let mut i = 0u64;
    loop {
        let x = a + i as f64 * step;
        if x > b + step * 1e-9 {
            break;
        }
        v.push(x.min(b));
        i += 1;
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    /// Per-user stop-feedback thresholds.
    Sf,
    /// Full noiseless feedback with a common termination instant.
    Vlft,
}

impl SchemeArg {
    fn to_scheme(self) -> Scheme {
        match self {
            SchemeArg::Sf => Scheme::StopFeedback,
            SchemeArg::Vlft => Scheme::Vlft,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GMode {
    /// Estimate the constant threshold offset from renewal simulations.
    Estimated,
    /// Use a zero offset (dispersion term only).
    Zero,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Transmit power of user 1.
    #[arg(long, default_value_t = 1.0)]
    pub p1: f64,
    /// Transmit power of user 2.
    #[arg(long, default_value_t = 1.0)]
    pub p2: f64,
    /// Error budget in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Random seed; equal seeds give bit-identical results at any thread
    /// count.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Output path, "-" for stdout.
    #[arg(long, default_value = "-")]
    pub out: String,
    /// Table format for `bounds` and `region`; other commands always emit
    /// JSON.
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Single expected-length budget.
    #[arg(long)]
    pub n: Option<f64>,
    /// Length grid START:STOP:STEP (inclusive).
    #[arg(long = "n-grid", value_name = "A:B:STEP")]
    pub n_grid: Option<String>,
    #[arg(long, value_enum, default_value_t = SchemeArg::Sf)]
    pub scheme: SchemeArg,
    /// Input correlation in [0, 1] (vlft scheme only).
    #[arg(long)]
    pub rho: Option<f64>,
    /// Correlation grid START:STOP:STEP (vlft scheme only).
    #[arg(long = "rho-grid", value_name = "A:B:STEP")]
    pub rho_grid: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct RegionArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value_t = SchemeArg::Sf)]
    pub scheme: SchemeArg,
    /// Columns of the rate grid (the swept region gets GRID+2 points, plus
    /// one where its flat segment ends).
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Target expected decision time.
    #[arg(long = "n-prime")]
    pub n_prime: f64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Cap on each user's simulated message count.
    #[arg(long = "m-cap", default_value_t = 64)]
    pub m_cap: u64,
    /// Decoding horizon as a multiple of the target length.
    #[arg(long = "horizon-mult", default_value_t = 50)]
    pub horizon_mult: u64,
    #[arg(long = "g-mode", value_enum, default_value_t = GMode::Estimated)]
    pub g_mode: GMode,
    /// Trials per walk for the threshold-offset calibration.
    #[arg(long = "calib-trials", default_value_t = 20_000)]
    pub calib_trials: u64,
}

#[derive(Debug, Clone, Args)]
pub struct RenewalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    /// Walk to analyze: 1, 2, or 3 (default: all three).
    #[arg(long)]
    pub walk: Option<u32>,
    /// Optional threshold grid START:STOP:STEP for linear crossing-time
    /// fits.
    #[arg(long = "b-grid", value_name = "A:B:STEP")]
    pub b_grid: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct MaxstopArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Target expected decision time.
    #[arg(long = "n-prime")]
    pub n_prime: f64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long = "g-mode", value_enum, default_value_t = GMode::Estimated)]
    pub g_mode: GMode,
    #[arg(long = "calib-trials", default_value_t = 20_000)]
    pub calib_trials: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SelftestArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Achievable and converse log message sizes at given lengths.
    Bounds(BoundsArgs),
    /// Rate-region boundary at a given error budget.
    Region(RegionArgs),
    /// Monte Carlo of the stop-feedback code at a target length.
    Simulate(SimulateArgs),
    /// Renewal estimates of the per-walk overshoot and variance constants.
    Renewal(RenewalArgs),
    /// Coupled stopping-time maximum versus the target length.
    Maxstop(MaxstopArgs),
    /// Closed-form self checks; exits 3 on any failure.
    Selftest(SelftestArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Bounds(a) => &a.common,
            Command::Region(a) => &a.common,
            Command::Simulate(a) => &a.common,
            Command::Renewal(a) => &a.common,
            Command::Maxstop(a) => &a.common,
            Command::Selftest(a) => &a.common,
        }
    }
}

/// Simulator and bound calculator for variable-length coding over the
/// two-user Gaussian multiple-access channel with feedback.
#[derive(Debug, Parser)]
#[command(name = "vlfmac", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Full CLI entry point: parses `std::env::args`, runs, returns the exit
/// code.
pub fn run() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => match execute(&cli.command) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            code
        }
    }
}

/// Runs one parsed command inside its thread pool, writing to `--out`.
pub fn execute(cmd: &Command) -> Result<i32> {
    let common = cmd.common();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build()
        .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
    let mut out: Box<dyn Write + Send> = if common.out == "-" {
        Box::new(io::BufWriter::new(io::stdout()))
    } else {
        Box::new(io::BufWriter::new(File::create(&common.out)?))
    };
    let code = pool.install(|| dispatch(cmd, &mut *out))?;
    out.flush()?;
    Ok(code)
}

/// Runs one command against an arbitrary writer (no thread-pool setup).
pub fn dispatch(cmd: &Command, w: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Bounds(a) => cmd_bounds(a, w).map(|()| 0),
        Command::Region(a) => cmd_region(a, w).map(|()| 0),
        Command::Simulate(a) => cmd_simulate(a, w).map(|()| 0),
        Command::Renewal(a) => cmd_renewal(a, w).map(|()| 0),
        Command::Maxstop(a) => cmd_maxstop(a, w).map(|()| 0),
        Command::Selftest(a) => cmd_selftest(a, w),
    }
}

fn make_stats(common: &CommonArgs) -> Result<SingleLetterStats> {
    Ok(SingleLetterStats::new(ChannelParams::new(common.p1, common.p2)?))
}

// ---- JSON helpers (floats as 12-significant-digit strings) ----

fn jf(x: f64) -> Value {
    Value::String(fmt_sig12(x))
}

fn obj(entries: Vec<(&str, Value)>) -> Value {
    let mut m = Map::new();
    for (k, v) in entries {
        m.insert(k.to_string(), v);
    }
    Value::Object(m)
}

fn write_json(w: &mut dyn Write, v: &Value) -> Result<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| Error::Usage(format!("json: {e}")))?;
    writeln!(w, "{s}")?;
    Ok(())
}

fn ladder_json(l: &LadderEstimates) -> Value {
    obj(vec![
        ("walk", Value::from(l.which.number())),
        ("xi", jf(l.xi)),
        ("xi_se", jf(l.xi_se)),
        ("nu", jf(l.nu)),
        ("nu_se", jf(l.nu_se)),
        ("min_mean", jf(l.min_mean)),
        ("min_se", jf(l.min_se)),
        ("mean_tau_plus", jf(l.mean_tau_plus)),
        ("mean_height", jf(l.mean_height)),
        ("k_const", l.k_const.map(jf).unwrap_or(Value::Null)),
        ("k_se", l.k_se.map(jf).unwrap_or(Value::Null)),
        ("trials", Value::from(l.trials)),
        ("truncated", Value::from(l.truncated)),
    ])
}

fn fit_json(f: &LineFit) -> Value {
    obj(vec![
        ("slope", jf(f.slope)),
        ("slope_se", jf(f.slope_se)),
        ("intercept", jf(f.intercept)),
        ("intercept_se", jf(f.intercept_se)),
    ])
}

fn crossing_json(c: &CrossingMoments) -> Value {
    obj(vec![
        ("b", jf(c.b)),
        ("mean", jf(c.mean)),
        ("mean_se", jf(c.mean_se)),
        ("var", jf(c.var)),
        ("var_se", jf(c.var_se)),
        ("trials", Value::from(c.trials)),
        ("truncated", Value::from(c.truncated)),
    ])
}

fn constants_json(c: &SecondOrderConstants) -> Value {
    let perm = |p: [usize; 3]| Value::from(p.map(|i| i as u64 + 1).to_vec());
    obj(vec![
        ("a_const", jf(c.a_const)),
        ("a_perm", perm(c.a_perm)),
        ("g_const", jf(c.g_const)),
        ("g_perm", perm(c.g_perm)),
        ("l", Value::from(c.l.map(fmt_sig12).to_vec())),
        ("b", Value::from(c.b.map(fmt_sig12).to_vec())),
        ("f", Value::from(c.f.map(fmt_sig12).to_vec())),
        ("xi", Value::from(c.xi.map(fmt_sig12).to_vec())),
    ])
}

fn errors_json(e: &ErrorSummary) -> Value {
    obj(vec![
        ("trials", Value::from(e.trials)),
        ("aborts", Value::from(e.aborts)),
        ("erasures", Value::from(e.erasures)),
        ("wrong", Value::from(e.wrong)),
        ("combined_errors", Value::from(e.combined_errors)),
        ("combined_rate", jf(e.combined_rate)),
        ("combined_se", jf(e.combined_se)),
        ("inner_trials", Value::from(e.inner_trials)),
        ("inner_errors", Value::from(e.inner_errors)),
        ("inner_rate", jf(e.inner_rate)),
        ("inner_se", jf(e.inner_se)),
        ("union_bound", jf(e.union_bound)),
        ("union_pass", Value::from(e.union_pass)),
    ])
}

fn lengths_json(l: &LengthSummary) -> Value {
    obj(vec![
        ("mean_length", jf(l.mean_length)),
        ("length_se", jf(l.length_se)),
        ("mean_tau_star", jf(l.mean_tau_star)),
        ("tau_star_se", jf(l.tau_star_se)),
        ("var_tau_star", jf(l.var_tau_star)),
        ("mean_tau_prime", jf(l.mean_tau_prime)),
        ("tau_prime_se", jf(l.tau_prime_se)),
        ("trials", Value::from(l.trials)),
    ])
}

fn power_json(p: &PowerReport) -> Value {
    let user = |u: &crate::coding::PowerUser| {
        obj(vec![
            ("mean_energy", jf(u.mean_energy)),
            ("energy_se", jf(u.energy_se)),
            ("budget", jf(u.budget)),
            ("diff_mean", jf(u.diff_mean)),
            ("diff_se", jf(u.diff_se)),
            ("equality_pass", Value::from(u.equality_pass)),
            ("full_diff_mean", jf(u.full_diff_mean)),
            ("full_diff_se", jf(u.full_diff_se)),
            ("full_equality_pass", Value::from(u.full_equality_pass)),
            ("inequality_pass", Value::from(u.inequality_pass)),
        ])
    };
    obj(vec![
        ("user1", user(&p.users[0])),
        ("user2", user(&p.users[1])),
        ("trials", Value::from(p.trials)),
    ])
}

fn maxstop_json(r: &MaxStopReport) -> Value {
    let pairs: Vec<Value> = r
        .pairs
        .iter()
        .map(|p| {
            obj(vec![
                ("i", Value::from(p.i)),
                ("j", Value::from(p.j)),
                ("mean_gap", jf(p.mean_gap)),
                ("se", jf(p.se)),
                ("bound", jf(p.bound)),
                ("pass", Value::from(p.pass)),
            ])
        })
        .collect();
    obj(vec![
        ("n_prime", jf(r.n_prime)),
        ("gamma", Value::from(r.gamma.map(fmt_sig12).to_vec())),
        ("mean_max", jf(r.mean_max)),
        ("max_se", jf(r.max_se)),
        ("slack", jf(r.slack)),
        ("pairs", Value::Array(pairs)),
        ("trials", Value::from(r.trials)),
        ("truncated", Value::from(r.truncated)),
    ])
}

// ---- Subcommands ----

pub fn cmd_bounds(args: &BoundsArgs, w: &mut dyn Write) -> Result<()> {
    let stats = make_stats(&args.common)?;
    let ns: Vec<f64> = match (&args.n, &args.n_grid) {
        (Some(n), None) => vec![*n],
        (None, Some(g)) => parse_grid(g)?,
        _ => {
            return Err(Error::Usage(
                "provide exactly one of --n or --n-grid".to_string(),
            ))
        }
    };
    let scheme = args.scheme.to_scheme();
    if scheme == Scheme::StopFeedback && (args.rho.is_some() || args.rho_grid.is_some()) {
        return Err(Error::Usage(
            "--rho/--rho-grid apply to the vlft scheme only".to_string(),
        ));
    }
    let rhos: Vec<f64> = match (&args.rho, &args.rho_grid) {
        (_, Some(g)) => parse_grid(g)?,
        (Some(r), None) => vec![*r],
        (None, None) => vec![0.0],
    };
    let a_const = SecondOrderConstants::analytic(&stats).a_const;

    let mut rows = Vec::new();
    for &n in &ns {
        for &rho in &rhos {
            rows.push(scheme_bounds(scheme, n, args.common.eps, &stats, a_const, rho)?);
        }
    }

    match args.common.format {
        OutputFormat::Csv => {
            writeln!(w, "n,scheme,rho,ach_r1,ach_r2,ach_sum,con_r1,con_r2,con_sum")?;
            for r in &rows {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{}",
                    fmt_sig12(r.n),
                    r.scheme.name(),
                    fmt_sig12(r.rho),
                    fmt_sig12(r.ach.r1),
                    fmt_sig12(r.ach.r2),
                    fmt_sig12(r.ach.rsum),
                    fmt_sig12(r.con.r1),
                    fmt_sig12(r.con.r2),
                    fmt_sig12(r.con.rsum),
                )?;
            }
        }
        OutputFormat::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|r| {
                    obj(vec![
                        ("n", jf(r.n)),
                        ("scheme", Value::String(r.scheme.name().to_string())),
                        ("rho", jf(r.rho)),
                        ("eps", jf(r.eps)),
                        ("ach_r1", jf(r.ach.r1)),
                        ("ach_r2", jf(r.ach.r2)),
                        ("ach_sum", jf(r.ach.rsum)),
                        ("con_r1", jf(r.con.r1)),
                        ("con_r2", jf(r.con.r2)),
                        ("con_sum", jf(r.con.rsum)),
                    ])
                })
                .collect();
            write_json(w, &obj(vec![("rows", Value::Array(rows))]))?;
        }
    }
    Ok(())
}

pub fn cmd_region(args: &RegionArgs, w: &mut dyn Write) -> Result<()> {
    let stats = make_stats(&args.common)?;
    let region: RegionBoundary =
        eps_capacity_region(&stats, args.common.eps, args.scheme.to_scheme(), args.grid)?;
    match args.common.format {
        OutputFormat::Csv => {
            writeln!(w, "r1,r2")?;
            for &(x, y) in &region.points {
                writeln!(w, "{},{}", fmt_sig12(x), fmt_sig12(y))?;
            }
        }
        OutputFormat::Json => {
            let pts: Vec<Value> = region
                .points
                .iter()
                .map(|&(x, y)| obj(vec![("r1", jf(x)), ("r2", jf(y))]))
                .collect();
            write_json(
                w,
                &obj(vec![
                    ("scheme", Value::String(region.scheme.name().to_string())),
                    ("eps", jf(region.eps)),
                    ("points", Value::Array(pts)),
                ]),
            )?;
        }
    }
    Ok(())
}

/// Second-order constants per `--g-mode`: always the analytic dispersion
/// constant, plus the renewal-estimated offset when requested.
fn resolve_constants(
    stats: &SingleLetterStats,
    g_mode: GMode,
    calib_trials: u64,
    seed: u64,
) -> Result<SecondOrderConstants> {
    match g_mode {
        GMode::Zero => Ok(SecondOrderConstants::analytic(stats)),
        GMode::Estimated => {
            let ladders =
                WalkId::ALL.map(|wh| estimate_ladder_full(stats, wh, calib_trials, seed));
            constants_from_estimates(stats, &ladders)
        }
    }
}

pub fn cmd_simulate(args: &SimulateArgs, w: &mut dyn Write) -> Result<()> {
    let stats = make_stats(&args.common)?;
    if args.m_cap == 0 {
        return Err(Error::Usage("--m-cap must be at least 1".to_string()));
    }
    let consts = resolve_constants(&stats, args.g_mode, args.calib_trials, args.common.seed)?;
    let th: ThresholdTriple =
        thresholds_from_target(&stats, args.n_prime, consts.a_const, consts.g_const)?;
    let sizes = message_sizes(&th);
    let m1 = sizes.m1.min(args.m_cap);
    let m2 = sizes.m2.min(args.m_cap);
    let wrapper = if args.common.eps > 0.0 {
        Some(WrapperConfig::new(args.n_prime, args.common.eps)?)
    } else {
        None
    };
    let horizon = (args.n_prime.ceil() as u64).max(1) * args.horizon_mult.max(1);
    let cfg = SimConfig {
        m1,
        m2,
        horizon,
        wrapper,
        trials: args.trials,
        seed: args.common.seed,
    };
    let outcomes = run_stop_feedback_sim(&stats, &th, &cfg);
    let errors = summarize_errors(&outcomes, m1, m2, &th.gamma);
    let lengths = summarize_lengths(&outcomes);
    let power = power_audit(&outcomes, &stats);

    write_json(
        w,
        &obj(vec![
            ("p1", jf(stats.params.p1)),
            ("p2", jf(stats.params.p2)),
            ("eps", jf(args.common.eps)),
            ("n_prime", jf(args.n_prime)),
            ("constants", constants_json(&consts)),
            ("gamma", Value::from(th.gamma.map(fmt_sig12).to_vec())),
            ("m1", Value::from(m1)),
            ("m2", Value::from(m2)),
            ("m1_uncapped", Value::from(sizes.m1)),
            ("m2_uncapped", Value::from(sizes.m2)),
            ("size_clamped", Value::from(sizes.clamped)),
            ("wrapper_p", jf(cfg.wrapper.map(|c| c.p).unwrap_or(0.0))),
            ("horizon", Value::from(horizon)),
            ("target_error", jf(1.0 / args.n_prime)),
            ("errors", errors_json(&errors)),
            ("lengths", lengths_json(&lengths)),
            ("power", power_json(&power)),
        ]),
    )
}

pub fn cmd_renewal(args: &RenewalArgs, w: &mut dyn Write) -> Result<()> {
    let stats = make_stats(&args.common)?;
    let walks: Vec<WalkId> = match args.walk {
        Some(n) => vec![WalkId::from_number(n)?],
        None => WalkId::ALL.to_vec(),
    };
    let bs: Option<Vec<f64>> = args.b_grid.as_deref().map(parse_grid).transpose()?;

    let mut walk_objs = Vec::new();
    for &wh in &walks {
        let ladder = estimate_ladder_full(&stats, wh, args.trials, args.common.seed);
        let mut entries = vec![
            ("estimates", ladder_json(&ladder)),
            ("mu", jf(stats.mu[wh.index()])),
            ("sigma2", jf(stats.sigma2[wh.index()])),
        ];
        if let Some(bs) = &bs {
            let points: Vec<CrossingMoments> = bs
                .iter()
                .map(|&b| crossing_moments(&stats, wh, b, args.trials, args.common.seed))
                .collect();
            let mean_fit = mean_crossing_fit(&points);
            let var_fit = variance_crossing_fit(&points);
            let mu = stats.mu[wh.index()];
            let s2 = stats.sigma2[wh.index()];
            entries.push(("crossings", Value::Array(points.iter().map(crossing_json).collect())));
            entries.push(("mean_fit", fit_json(&mean_fit)));
            entries.push(("mean_slope_predicted", jf(1.0 / mu)));
            entries.push(("mean_intercept_predicted", jf(ladder.xi / mu)));
            entries.push(("var_fit", fit_json(&var_fit)));
            entries.push(("var_slope_predicted", jf(s2 / (mu * mu * mu))));
            if let Some(k) = ladder.k_const {
                entries.push(("var_intercept_predicted", jf(k / (mu * mu))));
            }
        }
        walk_objs.push(obj(entries));
    }

    write_json(
        w,
        &obj(vec![
            ("p1", jf(stats.params.p1)),
            ("p2", jf(stats.params.p2)),
            ("walks", Value::Array(walk_objs)),
        ]),
    )
}

pub fn cmd_maxstop(args: &MaxstopArgs, w: &mut dyn Write) -> Result<()> {
    let stats = make_stats(&args.common)?;
    let consts = resolve_constants(&stats, args.g_mode, args.calib_trials, args.common.seed)?;
    let report =
        max_stop_experiment(&stats, &consts, args.n_prime, args.trials, args.common.seed)?;
    write_json(
        w,
        &obj(vec![
            ("p1", jf(stats.params.p1)),
            ("p2", jf(stats.params.p2)),
            ("constants", constants_json(&consts)),
            ("report", maxstop_json(&report)),
        ]),
    )
}

struct SelfTest<'a> {
    w: &'a mut dyn Write,
    checks: u32,
    failures: u32,
}

impl<'a> SelfTest<'a> {
    fn check(&mut self, name: &str, ok: bool, detail: String) -> io::Result<()> {
        self.checks += 1;
        if ok {
            writeln!(self.w, "ok {name}")
        } else {
            self.failures += 1;
            writeln!(self.w, "FAIL {name}: {detail}")
        }
    }

    fn close(&mut self, name: &str, got: f64, want: f64, tol: f64) -> io::Result<()> {
        self.check(name, (got - want).abs() <= tol, format!("got {got}, want {want}"))
    }
}

/// Asserts every closed-form identity the library is built on; exits 3 if
/// any fails.
pub fn cmd_selftest(_args: &SelftestArgs, w: &mut dyn Write) -> Result<i32> {
    let mut t = SelfTest { w, checks: 0, failures: 0 };
    let ln2 = std::f64::consts::LN_2;
    let st = SingleLetterStats::new(ChannelParams::new(1.0, 1.0).unwrap());

    // Capacity closed forms.
    t.close("capacity_zero", gaussian_capacity(0.0)?, 0.0, 0.0)?;
    t.close("capacity_unit", gaussian_capacity(1.0)?, 0.5 * ln2, 1e-15)?;
    t.close("capacity_three", gaussian_capacity(3.0)?, ln2, 1e-15)?;
    t.check(
        "capacity_monotone",
        (0..100).all(|i| {
            let x = 0.1 * i as f64;
            gaussian_capacity(x + 0.1).unwrap() > gaussian_capacity(x).unwrap()
        }),
        "capacity must increase with signal power".to_string(),
    )?;

    // Binary entropy closed forms.
    t.close("entropy_zero", binary_entropy(0.0)?, 0.0, 0.0)?;
    t.close("entropy_one", binary_entropy(1.0)?, 0.0, 0.0)?;
    t.close("entropy_half", binary_entropy(0.5)?, ln2, 1e-15)?;
    t.close("entropy_symmetry", binary_entropy(0.3)?, binary_entropy(0.7)?, 1e-15)?;

    // Information-density plug-ins at unit powers.
    let d = st.info_density(0.0, -1.0, 0.0);
    t.close("density_user1", d.d1, 0.5 * ln2 + 0.25 - 0.5, 1e-12)?;
    let d = st.info_density(-1.0, 0.0, 0.0);
    t.close("density_user2", d.d2, 0.5 * ln2 + 0.25 - 0.5, 1e-12)?;
    let d = st.info_density(0.0, 0.0, 1.0);
    t.close("density_sum", d.d3, 0.5 * 3.0f64.ln() + 1.0 / 6.0 - 0.5, 1e-12)?;

    // The sum-walk increment decomposes against the single-user increments
    // by a closed-form residual.
    let mut max_err = 0.0f64;
    for &(x1, x2, y) in
        &[(0.3, -0.7, 1.1), (0.0, 0.0, 0.0), (2.0, 1.0, -0.5), (-1.5, 0.4, 0.9)]
    {
        let d = st.info_density(x1, x2, y);
        let residual = 0.5 * 3.0f64.ln() - ln2 + y * y / 6.0 - (y - x2) * (y - x2) / 4.0
            - (y - x1) * (y - x1) / 4.0
            + (y - x1 - x2) * (y - x1 - x2) / 2.0;
        max_err = max_err.max((d.d3 - d.d1 - d.d2 - residual).abs());
    }
    t.check(
        "density_decomposition",
        max_err < 1e-12,
        format!("max residual error {max_err}"),
    )?;

    // Threshold selection.
    let th = thresholds_from_target(&st, 100.0, 0.0, 0.0)?;
    t.close("threshold_user", th.gamma[0], 34.65735902799726, 1e-9)?;
    t.close("threshold_sum", th.gamma[2], 54.93061443340549, 1e-9)?;
    t.check(
        "threshold_infeasible",
        matches!(thresholds_from_target(&st, 16.0, 4.0, 0.0), Err(Error::Infeasible(_))),
        "target length equal to the squared dispersion constant must be rejected".to_string(),
    )?;

    // Message sizes.
    let sz = message_sizes(&ThresholdTriple {
        gamma: [5.0, 5.0, 12.0],
        n_prime: 10.0,
        effective_length: 0.0,
    });
    t.check(
        "sizes_per_user_caps",
        (sz.m1, sz.m2, sz.clamped) == (4, 4, false),
        format!("got ({}, {}, clamped={})", sz.m1, sz.m2, sz.clamped),
    )?;
    let b = 30.0f64.ln();
    let sz = message_sizes(&ThresholdTriple {
        gamma: [b, b, 2.0 * b],
        n_prime: 10.0,
        effective_length: 0.0,
    });
    t.check(
        "sizes_boundary",
        (sz.m1, sz.m2, sz.clamped) == (1, 1, false),
        format!("got ({}, {}, clamped={})", sz.m1, sz.m2, sz.clamped),
    )?;

    // Termination wrapper arithmetic.
    let cfg = WrapperConfig::new(10.0, 0.5)?;
    t.check("wrapper_probability", cfg.p == 4.0 / 9.0, format!("got {}", cfg.p))?;
    let cfg = WrapperConfig::new(10.0, 0.05)?;
    t.check("wrapper_probability_clamped", cfg.p == 0.0, format!("got {}", cfg.p))?;
    t.close(
        "inner_length_real",
        choose_inner_length(100.0, 0.5)?,
        100.0 + 9800.0f64.sqrt(),
        1e-9,
    )?;
    t.check(
        "inner_length_int",
        choose_inner_length_int(100.0, 0.5)? == 198,
        format!("got {}", choose_inner_length_int(100.0, 0.5)?),
    )?;

    // Second-order dispersion constant at unit powers.
    let consts = SecondOrderConstants::analytic(&st);
    t.close("dispersion_constant", consts.a_const, 5.311653525463325, 1e-12)?;

    // Frozen rate-bound values.
    let con = crate::bounds::sf_converse(100.0, 0.5, &st)?;
    t.close("converse_frozen", con.r1, 102.0 * ln2, 1e-12)?;
    let ach = crate::bounds::sf_achievable(2.0, 0.0, &st, 5.0)?;
    t.check(
        "achievable_clamped",
        ach.r1 == 0.0 && ach.rsum == 0.0,
        format!("got ({}, {})", ach.r1, ach.rsum),
    )?;

    // Pentagon corners at unit powers.
    let region = eps_capacity_region(&st, 0.0, Scheme::StopFeedback, 10)?;
    let gap = 0.5 * 1.5f64.ln();
    let want = [(0.0, 0.5 * ln2), (gap, 0.5 * ln2), (0.5 * ln2, gap), (0.5 * ln2, 0.0)];
    let ok = region.points.len() == 4
        && region
            .points
            .iter()
            .zip(want.iter())
            .all(|(g, w)| (g.0 - w.0).abs() < 1e-12 && (g.1 - w.1).abs() < 1e-12);
    t.check("pentagon_corners", ok, format!("got {:?}", region.points))?;

    // Fully aligned inputs: single-user capacities collapse, the sum
    // capacity peaks.
    let caps = rho_capacities(&st, 1.0);
    t.check(
        "aligned_capacities",
        caps[0] == 0.0 && caps[1] == 0.0 && (caps[2] - 0.5 * 5.0f64.ln()).abs() < 1e-15,
        format!("got {caps:?}"),
    )?;

    // Max of three as sums of pairwise minima.
    let ok = [(3.0f64, 7.0f64, 5.0f64), (2.0, 2.0, 9.0), (4.0, 4.0, 4.0), (1.0, 6.0, 6.0)]
        .iter()
        .all(|&(a, b, c)| {
            let max = a.max(b).max(c);
            let recomposed =
                a + b + c - a.min(b) - a.min(c) - b.min(c) + a.min(b).min(c);
            max == recomposed
        });
    t.check(
        "max_decomposition",
        ok,
        "max(a,b,c) must equal a+b+c - pairwise mins + overall min".to_string(),
    )?;

    // Number formatting spot checks.
    let cases = [
        (0.0, "0"),
        (1234.5, "1234.5"),
        (0.0001, "0.0001"),
        (1e-5, "1e-05"),
        (1e12, "1e+12"),
        (-2.5, "-2.5"),
    ];
    let ok = cases.iter().all(|&(x, s)| fmt_sig12(x) == s);
    t.check(
        "number_format",
        ok,
        format!("{:?}", cases.iter().map(|&(x, _)| fmt_sig12(x)).collect::<Vec<_>>()),
    )?;

    let (checks, failures) = (t.checks, t.failures);
    writeln!(w, "self-test: {checks} checks, {failures} failures")?;
    Ok(if failures == 0 { 0 } else { 3 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_twelve_significant_digits() {
        assert_eq!(fmt_sig12(0.0), "0");
        assert_eq!(fmt_sig12(-0.0), "0");
        assert_eq!(fmt_sig12(1.0), "1");
        assert_eq!(fmt_sig12(-1.5), "-1.5");
        assert_eq!(fmt_sig12(70.70101241711442), "70.7010124171");
        assert_eq!(fmt_sig12(3456.525562427997), "3456.52556243");
        assert_eq!(fmt_sig12(0.34657359027997264), "0.34657359028");
        assert_eq!(fmt_sig12(1e-5), "1e-05");
        assert_eq!(fmt_sig12(1.23456789e-7), "1.23456789e-07");
        assert_eq!(fmt_sig12(1e12), "1e+12");
        assert_eq!(fmt_sig12(123456789012.0), "123456789012");
        assert_eq!(fmt_sig12(f64::INFINITY), "inf");
        assert_eq!(fmt_sig12(f64::NAN), "nan");
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("1:3:1").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_grid("2:2:5").unwrap(), vec![2.0]);
        let g = parse_grid("0:1:0.25").unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[4] - 1.0).abs() < 1e-12);
        assert!(parse_grid("1:0:1").is_err());
        assert!(parse_grid("1:2:0").is_err());
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("a:2:1").is_err());
    }

    #[test]
    fn bounds_csv_shape() {
        let cli =
            Cli::try_parse_from(["vlfmac", "bounds", "--n-grid", "100:300:100"]).unwrap();
        let Command::Bounds(args) = &cli.command else { panic!("wrong subcommand") };
        let mut buf = Vec::new();
        cmd_bounds(args, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "n,scheme,rho,ach_r1,ach_r2,ach_sum,con_r1,con_r2,con_sum");
        assert!(lines[1].starts_with("100,sf,0,"));
        assert_eq!(lines[1].split(',').count(), 9);
    }

    #[test]
    fn bounds_flag_validation() {
        let cli = Cli::try_parse_from(["vlfmac", "bounds"]).unwrap();
        let Command::Bounds(args) = &cli.command else { panic!() };
        let mut buf = Vec::new();
        assert!(matches!(cmd_bounds(args, &mut buf), Err(Error::Usage(_))));

        let cli =
            Cli::try_parse_from(["vlfmac", "bounds", "--n", "100", "--rho", "0.5"]).unwrap();
        let Command::Bounds(args) = &cli.command else { panic!() };
        assert!(matches!(cmd_bounds(args, &mut buf), Err(Error::Usage(_))));
    }

    #[test]
    fn region_json_parses_back() {
        let cli = Cli::try_parse_from([
            "vlfmac", "region", "--scheme", "vlft", "--grid", "10", "--format", "json",
        ])
        .unwrap();
        let Command::Region(args) = &cli.command else { panic!() };
        let mut buf = Vec::new();
        cmd_region(args, &mut buf).unwrap();
        let v: Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["scheme"], "vlft");
        let pts = v["points"].as_array().unwrap();
        assert_eq!(pts.len(), 13);
        let y0: f64 = pts[0]["r2"].as_str().unwrap().parse().unwrap();
        assert!((y0 - 0.5 * std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn selftest_passes_and_reports() {
        let cli = Cli::try_parse_from(["vlfmac", "selftest"]).unwrap();
        let Command::Selftest(args) = &cli.command else { panic!() };
        let mut buf = Vec::new();
        let code = cmd_selftest(args, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(code, 0, "self-test output:\n{text}");
        assert!(text.contains("0 failures"));
        assert!(!text.contains("FAIL"));
    }

    #[test]
    fn renewal_single_walk_json() {
        let cli = Cli::try_parse_from([
            "vlfmac", "renewal", "--walk", "1", "--trials", "4000", "--seed", "3",
        ])
        .unwrap();
        let Command::Renewal(args) = &cli.command else { panic!() };
        let mut buf = Vec::new();
        cmd_renewal(args, &mut buf).unwrap();
        let v: Value = serde_json::from_slice(&buf).unwrap();
        let walks = v["walks"].as_array().unwrap();
        assert_eq!(walks.len(), 1);
        let xi: f64 = walks[0]["estimates"]["xi"].as_str().unwrap().parse().unwrap();
        assert!((xi - 0.527).abs() < 0.05, "xi = {xi}");
    }
}
