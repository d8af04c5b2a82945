//! Nonasymptotic rate bounds and epsilon-capacity regions for the two-user
//! Gaussian channel with feedback-driven variable-length codes, plus the
//! second-order constants that feed both the bounds and the threshold
//! selection.
//!
//! Rates throughout are log message sizes in nats; the `rsum` member of a
//! triple bounds the log of the *product* of the two message counts.

use crate::channel::{binary_entropy, SingleLetterStats};
use crate::error::Error;
use crate::walk::LadderEstimates;
use crate::Result;

/// Which coding scheme a bound or region refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Per-user stop-feedback thresholds (decisions fed back, data not).
    StopFeedback,
    /// Full noiseless feedback with a common termination instant.
    Vlft,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::StopFeedback => "sf",
            Scheme::Vlft => "vlft",
        }
    }
}

/// Log message-size triple (user 1, user 2, product).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTriple {
    pub r1: f64,
    pub r2: f64,
    pub rsum: f64,
}

/// Achievable and converse triples at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBounds {
    pub scheme: Scheme,
    pub n: f64,
    pub eps: f64,
    /// Input-correlation parameter; fixed at 0 for the stop-feedback scheme.
    pub rho: f64,
    pub ach: RateTriple,
    pub con: RateTriple,
}

fn check_eps(eps: f64) -> Result<()> {
    if !eps.is_finite() || !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidParameter {
            name: "eps",
            value: eps,
            reason: "error budget must lie in [0, 1)",
        });
    }
    Ok(())
}

fn check_rho(rho: f64) -> Result<()> {
    if !rho.is_finite() || !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: rho,
            reason: "input correlation must lie in [0, 1]",
        });
    }
    Ok(())
}

#[inline]
fn cap(x: f64) -> f64 {
    0.5 * x.ln_1p()
}

/// Per-user and sum capacities under input correlation `rho`:
/// `C(P1(1-rho^2))`, `C(P2(1-rho^2))`, `C(P1+P2+2 rho sqrt(P1 P2))`.
pub fn rho_capacities(stats: &SingleLetterStats, rho: f64) -> [f64; 3] {
    let p1 = stats.params.p1;
    let p2 = stats.params.p2;
    let shrink = 1.0 - rho * rho;
    [
        cap(p1 * shrink),
        cap(p2 * shrink),
        cap(p1 + p2 + 2.0 * rho * (p1 * p2).sqrt()),
    ]
}

const PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Dispersion-mixing constant: the minimum over orderings `(i, j, k)` of
/// `(sqrt(2(L_i+L_j)) + sqrt(4 L_k))/2 + (sqrt(2(L_i+L_k)) + sqrt(2(L_j+L_k)))/4`,
/// together with the first minimizing ordering in lexicographic order.
pub fn a_constant(l: &[f64; 3]) -> (f64, [usize; 3]) {
    let mut best = f64::INFINITY;
    let mut arg = [0usize, 1, 2];
    for perm in PERMS {
        let [i, j, k] = perm;
        let v = 0.5 * ((2.0 * (l[i] + l[j])).sqrt() + (4.0 * l[k]).sqrt())
            + 0.25 * ((2.0 * (l[i] + l[k])).sqrt() + (2.0 * (l[j] + l[k])).sqrt());
        if v < best {
            best = v;
            arg = perm;
        }
    }
    (best, arg)
}

/// Ordering used by the constant-offset term: minimizes the same expression
/// as [`a_constant`] but without the `sqrt(4 L_k)` summand (that term has no
/// constant-order companion). First minimizer in lexicographic order.
pub fn g_argmin(l: &[f64; 3]) -> [usize; 3] {
    let mut best = f64::INFINITY;
    let mut arg = [0usize, 1, 2];
    for perm in PERMS {
        let [i, j, k] = perm;
        let v = 0.5 * (2.0 * (l[i] + l[j])).sqrt()
            + 0.25 * ((2.0 * (l[i] + l[k])).sqrt() + (2.0 * (l[j] + l[k])).sqrt());
        if v < best {
            best = v;
            arg = perm;
        }
    }
    arg
}

/// Constant-order offset built from the per-walk overshoot constants
/// `b_j = -xi_j / mu_j` and variance constants `f_j = k_j / mu_j^2`,
/// evaluated at the ordering chosen by [`g_argmin`].
pub fn g_constant(b: &[f64; 3], f: &[f64; 3], perm: [usize; 3]) -> f64 {
    let [i, j, k] = perm;
    let pair = |x: usize, y: usize| (2.0 * (f[x] + f[y]).abs() + (b[x] - b[y]).powi(2)).sqrt();
    -0.25 * (b[i] + b[j] + 2.0 * b[k]) + 0.5 * pair(i, j) + 0.25 * (pair(i, k) + pair(j, k))
}

/// Second-order constants of one channel: the analytic dispersion part and
/// (optionally) the renewal-estimated constant offset.
#[derive(Debug, Clone)]
pub struct SecondOrderConstants {
    pub a_const: f64,
    pub a_perm: [usize; 3],
    pub g_const: f64,
    pub g_perm: [usize; 3],
    pub l: [f64; 3],
    pub b: [f64; 3],
    pub f: [f64; 3],
    pub xi: [f64; 3],
}

impl SecondOrderConstants {
    /// Closed-form part only: the dispersion constant from the single-letter
    /// statistics, with the constant offset set to zero.
    pub fn analytic(stats: &SingleLetterStats) -> SecondOrderConstants {
        let l = stats.l;
        let (a_const, a_perm) = a_constant(&l);
        let g_perm = g_argmin(&l);
        SecondOrderConstants {
            a_const,
            a_perm,
            g_const: 0.0,
            g_perm,
            l,
            b: [0.0; 3],
            f: [0.0; 3],
            xi: [0.0; 3],
        }
    }
}

/// Fills in the constant offset from per-walk ladder-variable estimates.
/// Requires every estimate to carry its variance constant.
pub fn constants_from_estimates(
    stats: &SingleLetterStats,
    ladders: &[LadderEstimates; 3],
) -> Result<SecondOrderConstants> {
    let mut c = SecondOrderConstants::analytic(stats);
    for (idx, est) in ladders.iter().enumerate() {
        let k = est.k_const.ok_or_else(|| {
            Error::Infeasible(
                "ladder estimates are missing the variance constant; rerun with more trials"
                    .into(),
            )
        })?;
        c.xi[idx] = est.xi;
        c.b[idx] = -est.xi / stats.mu[idx];
        c.f[idx] = k / (stats.mu[idx] * stats.mu[idx]);
    }
    c.g_const = g_constant(&c.b, &c.f, c.g_perm);
    Ok(c)
}

/// Achievable log message sizes of the stop-feedback scheme at expected
/// length `n` and error budget `eps`:
/// `[(n' - a sqrt(n')) mu_j - ln n]+` with `n' = n/(1-eps)`.
pub fn sf_achievable(
    n: f64,
    eps: f64,
    stats: &SingleLetterStats,
    a_const: f64,
) -> Result<RateTriple> {
    check_eps(eps)?;
    if !n.is_finite() || n <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n,
            reason: "length budget must be finite and positive",
        });
    }
    if !a_const.is_finite() || a_const < 0.0 {
        return Err(Error::InvalidParameter {
            name: "a_const",
            value: a_const,
            reason: "second-order constant must be finite and nonnegative",
        });
    }
    let np = n / (1.0 - eps);
    let base = np - a_const * np.sqrt();
    let lg = n.ln();
    let r = |mu: f64| (base * mu - lg).max(0.0);
    Ok(RateTriple { r1: r(stats.mu[0]), r2: r(stats.mu[1]), rsum: r(stats.mu[2]) })
}

/// Converse for the stop-feedback scheme: `(n mu_j + h_b(eps)) / (1-eps)`.
pub fn sf_converse(n: f64, eps: f64, stats: &SingleLetterStats) -> Result<RateTriple> {
    check_eps(eps)?;
    if !n.is_finite() || n < 0.0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n,
            reason: "length budget must be finite and nonnegative",
        });
    }
    let extra = binary_entropy(eps)?;
    let r = |mu: f64| (n * mu + extra) / (1.0 - eps);
    Ok(RateTriple { r1: r(stats.mu[0]), r2: r(stats.mu[1]), rsum: r(stats.mu[2]) })
}

/// Achievable log message sizes under full feedback with input correlation
/// `rho`: `[n c_j(rho)/(1-eps) - ln ln n]+`. Needs `n > e` so the double
/// logarithm is positive.
pub fn vlft_achievable(
    n: f64,
    eps: f64,
    stats: &SingleLetterStats,
    rho: f64,
) -> Result<RateTriple> {
    check_eps(eps)?;
    check_rho(rho)?;
    if !n.is_finite() || n <= std::f64::consts::E {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n,
            reason: "length budget must exceed e for this bound",
        });
    }
    let caps = rho_capacities(stats, rho);
    let ll = n.ln().ln();
    let r = |c: f64| (n * c / (1.0 - eps) - ll).max(0.0);
    Ok(RateTriple { r1: r(caps[0]), r2: r(caps[1]), rsum: r(caps[2]) })
}

/// Converse under full feedback with input correlation `rho`:
/// `(n c_j(rho) + (n+1) h_b(1/(n+1)) + h_b(eps)) / (1-eps)`.
pub fn vlft_converse(n: f64, eps: f64, stats: &SingleLetterStats, rho: f64) -> Result<RateTriple> {
    check_eps(eps)?;
    check_rho(rho)?;
    if !n.is_finite() || n < 0.0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n,
            reason: "length budget must be finite and nonnegative",
        });
    }
    let caps = rho_capacities(stats, rho);
    let extra = (n + 1.0) * binary_entropy(1.0 / (n + 1.0))? + binary_entropy(eps)?;
    let r = |c: f64| (n * c + extra) / (1.0 - eps);
    Ok(RateTriple { r1: r(caps[0]), r2: r(caps[1]), rsum: r(caps[2]) })
}

/// Achievable and converse triples of one scheme at one operating point.
/// `rho` only affects the full-feedback scheme.
pub fn scheme_bounds(
    scheme: Scheme,
    n: f64,
    eps: f64,
    stats: &SingleLetterStats,
    a_const: f64,
    rho: f64,
) -> Result<RateBounds> {
    let (rho, ach, con) = match scheme {
        Scheme::StopFeedback => (
            0.0,
            sf_achievable(n, eps, stats, a_const)?,
            sf_converse(n, eps, stats)?,
        ),
        Scheme::Vlft => (
            rho,
            vlft_achievable(n, eps, stats, rho)?,
            vlft_converse(n, eps, stats, rho)?,
        ),
    };
    Ok(RateBounds { scheme, n, eps, rho, ach, con })
}

/// Upper boundary of an epsilon-capacity region as a polyline in the
/// `(R1, R2)` rate plane (nats per channel use), x-ascending.
#[derive(Debug, Clone)]
pub struct RegionBoundary {
    pub scheme: Scheme,
    pub eps: f64,
    pub points: Vec<(f64, f64)>,
}

fn column_objective(stats: &SingleLetterStats, r1u: f64, rho: f64) -> f64 {
    let c = rho_capacities(stats, rho);
    c[1].min(c[2] - r1u)
}

/// Best unscaled second-user rate at unscaled first-user rate `r1u`,
/// maximizing over the input correlation subject to `c1(rho) >= r1u`.
/// `rho = 0` is always evaluated exactly and only beaten strictly, so the
/// zero-correlation pentagon is contained in the swept region exactly.
fn best_column_height(stats: &SingleLetterStats, r1u: f64) -> f64 {
    let p1 = stats.params.p1;
    // c1(rho) >= r1u  <=>  rho^2 <= 1 - (e^{2 r1u} - 1)/p1.
    let lim = 1.0 - (2.0 * r1u).exp_m1() / p1;
    let rho_max = if lim <= 0.0 { 0.0 } else { lim.sqrt().min(1.0) };
    let f = |rho: f64| column_objective(stats, r1u, rho);
    let mut best = f(0.0);
    let mut best_rho = 0.0;
    let grid = 1000usize;
    if rho_max > 0.0 {
        for k in 1..=grid {
            let rho = rho_max * k as f64 / grid as f64;
            let v = f(rho);
            if v > best {
                best = v;
                best_rho = rho;
            }
        }
        // Golden-section refinement around the best grid point; the column
        // objective is the min of a decreasing and an increasing function of
        // rho, hence unimodal.
        let step = rho_max / grid as f64;
        let mut lo = (best_rho - step).max(0.0);
        let mut hi = (best_rho + step).min(rho_max);
        const INV_PHI: f64 = 0.618_033_988_749_895;
        let mut x1 = hi - (hi - lo) * INV_PHI;
        let mut x2 = lo + (hi - lo) * INV_PHI;
        let mut f1 = f(x1);
        let mut f2 = f(x2);
        while hi - lo > 1e-8 {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + (hi - lo) * INV_PHI;
                f2 = f(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - (hi - lo) * INV_PHI;
                f1 = f(x1);
            }
        }
        let xm = 0.5 * (lo + hi);
        let fm = f(xm);
        if fm > best {
            best = fm;
        }
    }
    best
}

/// Epsilon-capacity region boundary. The stop-feedback region is the
/// zero-correlation pentagon (four corners); the full-feedback region sweeps
/// the input correlation per column of a `grid_size + 1`-column grid and
/// closes with the bottom-right corner.
pub fn eps_capacity_region(
    stats: &SingleLetterStats,
    eps: f64,
    scheme: Scheme,
    grid_size: usize,
) -> Result<RegionBoundary> {
    check_eps(eps)?;
    let scale = 1.0 / (1.0 - eps);
    let points = match scheme {
        Scheme::StopFeedback => {
            let c1 = stats.mu[0] * scale;
            let c2 = stats.mu[1] * scale;
            let c3 = stats.mu[2] * scale;
            vec![(0.0, c2), (c3 - c2, c2), (c1, c3 - c1), (c1, 0.0)]
        }
        Scheme::Vlft => {
            let g = grid_size.max(1);
            let mut cols: Vec<f64> = (0..=g).map(|i| stats.mu[0] * i as f64 / g as f64).collect();
            // The boundary is flat (at the zero-correlation height of user 2)
            // exactly up to this column; without it as an exact grid point,
            // interpolation would cut the corner where the flat part ends.
            let kink = stats.mu[2] - stats.mu[1];
            if kink > 0.0 && kink < stats.mu[0] && !cols.contains(&kink) {
                cols.push(kink);
                cols.sort_by(|a, b| a.partial_cmp(b).unwrap());
            }
            let mut pts = Vec::with_capacity(cols.len() + 1);
            for &r1u in &cols {
                let h = best_column_height(stats, r1u).max(0.0);
                pts.push((r1u * scale, h * scale));
            }
            pts.push((stats.mu[0] * scale, 0.0));
            pts
        }
    };
    Ok(RegionBoundary { scheme, eps, points })
}

/// Whether `(r1, r2)` lies under the boundary polyline, within `tol`.
/// Vertical segments contribute their higher endpoint.
pub fn region_contains(region: &RegionBoundary, r1: f64, r2: f64, tol: f64) -> bool {
    if r1 < -tol || r2 < -tol {
        return false;
    }
    let pts = &region.points;
    if pts.is_empty() {
        return false;
    }
    let xmax = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if r1 > xmax + tol {
        return false;
    }
    let mut height = f64::NEG_INFINITY;
    for w in pts.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        let (lo, hi) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
        if r1 >= lo - tol && r1 <= hi + tol {
            let y = if hi - lo < 1e-300 {
                y0.max(y1)
            } else {
                let t = ((r1 - x0) / (x1 - x0)).clamp(0.0, 1.0);
                y0 + (y1 - y0) * t
            };
            height = height.max(y);
        }
    }
    for &(x, y) in pts {
        if (x - r1).abs() <= tol {
            height = height.max(y);
        }
    }
    r2 <= height + tol
}
