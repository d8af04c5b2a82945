//! C ABI for the two-user Gaussian multiple-access channel library.
//!
//! Conventions: every function returns a [`VlfStatus`]; results come back
//! through out-pointers. Handles (`VlfStats`, `VlfRegion`) are opaque,
//! created by `*_new` functions and released by the matching `*_free`.
//! Passing a null required pointer yields `NullPointer`; out-of-domain
//! parameters yield `InvalidArgument`; valid parameters with no solution
//! yield `Infeasible`.

use vlfmac::bounds::{
    constants_from_estimates, eps_capacity_region, region_contains, sf_achievable, sf_converse,
    vlft_achievable, vlft_converse, RateTriple, RegionBoundary, Scheme, SecondOrderConstants,
};
use vlfmac::channel::{
    binary_entropy, gaussian_capacity, ChannelParams, SingleLetterStats, WalkId,
};
use vlfmac::coding::{message_sizes, thresholds_from_target, ThresholdTriple};
use vlfmac::walk::estimate_ladder_full;
use vlfmac::Error;

/// Result code of every ABI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VlfStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A parameter lies outside its documented domain.
    InvalidArgument = 2,
    /// Parameters are valid but the configuration has no solution.
    Infeasible = 3,
}

fn status_of(e: &Error) -> VlfStatus {
    match e {
        Error::Infeasible(_) => VlfStatus::Infeasible,
        _ => VlfStatus::InvalidArgument,
    }
}

/// Opaque handle to the single-letter channel statistics.
pub struct VlfStats {
    inner: SingleLetterStats,
}

/// Opaque handle to a rate-region boundary.
pub struct VlfRegion {
    inner: RegionBoundary,
}

/// Log message-size triple (user 1, user 2, product), in nats.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VlfRateTriple {
    pub r1: f64,
    pub r2: f64,
    pub rsum: f64,
}

impl From<RateTriple> for VlfRateTriple {
    fn from(t: RateTriple) -> VlfRateTriple {
        VlfRateTriple { r1: t.r1, r2: t.r2, rsum: t.rsum }
    }
}

/// Gaussian channel capacity `ln(1 + x) / 2` in nats; `x` is the
/// signal-to-noise ratio.
///
/// # Safety
/// `out` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn vlf_capacity(x: f64, out: *mut f64) -> VlfStatus {
    if out.is_null() {
        return VlfStatus::NullPointer;
    }
    match gaussian_capacity(x) {
        Ok(v) => {
            *out = v;
            VlfStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Binary entropy in nats of a probability in `[0, 1]`.
///
/// # Safety
/// `out` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn vlf_binary_entropy(p: f64, out: *mut f64) -> VlfStatus {
    if out.is_null() {
        return VlfStatus::NullPointer;
    }
    match binary_entropy(p) {
        Ok(v) => {
            *out = v;
            VlfStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Creates the statistics handle for transmit powers `p1`, `p2` (both
/// positive and finite). The handle must be released with
/// `vlf_stats_free`.
///
/// # Safety
/// `out` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn vlf_stats_new(p1: f64, p2: f64, out: *mut *mut VlfStats) -> VlfStatus {
    if out.is_null() {
        return VlfStatus::NullPointer;
    }
    match ChannelParams::new(p1, p2) {
        Ok(params) => {
            let boxed = Box::new(VlfStats { inner: SingleLetterStats::new(params) });
            *out = Box::into_raw(boxed);
            VlfStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Releases a statistics handle; a null pointer is ignored.
///
/// # Safety
/// `stats` must be null or a pointer from `vlf_stats_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vlf_stats_free(stats: *mut VlfStats) {
    if !stats.is_null() {
        drop(Box::from_raw(stats));
    }
}

/// Reads the drift, variance, and dispersion ratio of one walk
/// (`walk` is 1, 2, or 3). Each out-pointer may be null to skip that
/// value.
///
/// # Safety
/// `stats` must be a live handle; non-null out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn vlf_stats_get(
    stats: *const VlfStats,
    walk: u32,
    mu: *mut f64,
    sigma2: *mut f64,
    l: *mut f64,
) -> VlfStatus {
    let Some(s) = stats.as_ref() else {
        return VlfStatus::NullPointer;
    };
    let Ok(id) = WalkId::from_number(walk) else {
        return VlfStatus::InvalidArgument;
    };
    let idx = id.index();
    if !mu.is_null() {
        *mu = s.inner.mu[idx];
    }
    if !sigma2.is_null() {
        *sigma2 = s.inner.sigma2[idx];
    }
    if !l.is_null() {
        *l = s.inner.l[idx];
    }
    VlfStatus::Ok
}

/// Closed-form dispersion-mixing constant of the channel.
///
/// # Safety
/// `stats` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vlf_a_constant(stats: *const VlfStats, out: *mut f64) -> VlfStatus {
    let Some(s) = stats.as_ref() else {
        return VlfStatus::NullPointer;
    };
    if out.is_null() {
        return VlfStatus::NullPointer;
    }
    *out = SecondOrderConstants::analytic(&s.inner).a_const;
    VlfStatus::Ok
}

/// Estimates the constant threshold offset (and returns the analytic
/// dispersion constant) from `trials` renewal simulations per walk.
/// Deterministic in (`trials`, `seed`).
///
/// # Safety
/// `stats` must be a live handle; `a_out` and `g_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vlf_estimate_constants(
    stats: *const VlfStats,
    trials: u64,
    seed: u64,
    a_out: *mut f64,
    g_out: *mut f64,
) -> VlfStatus {
    let Some(s) = stats.as_ref() else {
        return VlfStatus::NullPointer;
    };
    if a_out.is_null() || g_out.is_null() {
        return VlfStatus::NullPointer;
    }
    if trials == 0 {
        return VlfStatus::InvalidArgument;
    }
    let ladders = WalkId::ALL.map(|wh| estimate_ladder_full(&s.inner, wh, trials, seed));
    match constants_from_estimates(&s.inner, &ladders) {
        Ok(c) => {
            *a_out = c.a_const;
            *g_out = c.g_const;
            VlfStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Decoding thresholds for a target expected decision time: writes three
/// values to `gamma_out`.
///
/// # Safety
/// `stats` must be a live handle; `gamma_out` must point to writable space
/// for three doubles.
#[no_mangle]
pub unsafe extern "C" fn vlf_thresholds_from_target(
    stats: *const VlfStats,
    n_prime: f64,
    a_const: f64,
    g_const: f64,
    gamma_out: *mut f64,
) -> VlfStatus {
    let Some(s) = stats.as_ref() else {
        return VlfStatus::NullPointer;
    };
    if gamma_out.is_null() {
        return VlfStatus::NullPointer;
    }
    match thresholds_from_target(&s.inner, n_prime, a_const, g_const) {
        Ok(th) => {
            for (i, g) in th.gamma.iter().enumerate() {
                *gamma_out.add(i) = *g;
            }
            VlfStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Largest message counts satisfying the three threshold caps, maximizing
/// the product (ties favor `m1`). `clamped_out` is set to 1 when a cap fell
/// below one message and was clamped up.
///
/// # Safety
/// All out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn vlf_message_sizes(
    gamma1: f64,
    gamma2: f64,
    gamma3: f64,
    n_prime: f64,
    m1_out: *mut u64,
    m2_out: *mut u64,
    clamped_out: *mut i32,
) -> VlfStatus {
    if m1_out.is_null() || m2_out.is_null() {
        return VlfStatus::NullPointer;
    }
    if !(n_prime.is_finite() && n_prime > 0.0)
        || !gamma1.is_finite()
        || !gamma2.is_finite()
        || !gamma3.is_finite()
    {
        return VlfStatus::InvalidArgument;
    }
    let sizes = message_sizes(&ThresholdTriple {
        gamma: [gamma1, gamma2, gamma3],
        n_prime,
        effective_length: 0.0,
    });
    *m1_out = sizes.m1;
    *m2_out = sizes.m2;
    if !clamped_out.is_null() {
        *clamped_out = i32::from(sizes.clamped);
    }
    VlfStatus::Ok
}

/// Achievable log message sizes of the stop-feedback scheme.
///
/// # Safety
/// `stats` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vlf_sf_achievable(
    stats: *const VlfStats,
    n: f64,
    eps: f64,
    a_const: f64,
    out: *mut VlfRateTriple,
) -> VlfStatus {
    let Some(s) = stats.as_ref() else {
        return VlfStatus::NullPointer;
    };
    if out.is_null() {
        return VlfStatus::NullPointer;
    }
    match sf_achievable(n, eps, &s.inner, a_const) {
        Ok(t) => {
            *out = t.into();
            VlfStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Converse log message sizes of the stop-feedback scheme.
///
/// # Safety
/// `stats` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vlf_sf_converse(
    stats: *const VlfStats,
    n: f64,
    eps: f64,
    out: *mut VlfRateTriple,
) -> VlfStatus {
    let Some(s) = stats.as_ref() else {
        return VlfStatus::NullPointer;
    };
    if out.is_null() {
        return VlfStatus::NullPointer;
    }
    match sf_converse(n, eps, &s.inner) {
        Ok(t) => {
            *out = t.into();
            VlfStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Achievable log message sizes under full feedback with input correlation
/// `rho` in `[0, 1]`; needs `n > e`.
///
/// # Safety
/// `stats` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vlf_vlft_achievable(
    stats: *const VlfStats,
    n: f64,
    eps: f64,
    rho: f64,
    out: *mut VlfRateTriple,
) -> VlfStatus {
    let Some(s) = stats.as_ref() else {
        return VlfStatus::NullPointer;
    };
    if out.is_null() {
        return VlfStatus::NullPointer;
    }
    match vlft_achievable(n, eps, &s.inner, rho) {
        Ok(t) => {
            *out = t.into();
            VlfStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Converse log message sizes under full feedback with input correlation
/// `rho` in `[0, 1]`.
///
/// # Safety
/// `stats` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vlf_vlft_converse(
    stats: *const VlfStats,
    n: f64,
    eps: f64,
    rho: f64,
    out: *mut VlfRateTriple,
) -> VlfStatus {
    let Some(s) = stats.as_ref() else {
        return VlfStatus::NullPointer;
    };
    if out.is_null() {
        return VlfStatus::NullPointer;
    }
    match vlft_converse(n, eps, &s.inner, rho) {
        Ok(t) => {
            *out = t.into();
            VlfStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Builds a rate-region boundary. `scheme` is 0 for the stop-feedback
/// pentagon, 1 for the correlation-swept full-feedback region; `grid` is
/// the number of rate columns for the swept region. The handle must be
/// released with `vlf_region_free`.
///
/// # Safety
/// `stats` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vlf_region_new(
    stats: *const VlfStats,
    eps: f64,
    scheme: u32,
    grid: usize,
    out: *mut *mut VlfRegion,
) -> VlfStatus {
    let Some(s) = stats.as_ref() else {
        return VlfStatus::NullPointer;
    };
    if out.is_null() {
        return VlfStatus::NullPointer;
    }
    let scheme = match scheme {
        0 => Scheme::StopFeedback,
        1 => Scheme::Vlft,
        _ => return VlfStatus::InvalidArgument,
    };
    match eps_capacity_region(&s.inner, eps, scheme, grid) {
        Ok(region) => {
            *out = Box::into_raw(Box::new(VlfRegion { inner: region }));
            VlfStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Number of boundary points.
///
/// # Safety
/// `region` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vlf_region_num_points(
    region: *const VlfRegion,
    out: *mut usize,
) -> VlfStatus {
    let Some(r) = region.as_ref() else {
        return VlfStatus::NullPointer;
    };
    if out.is_null() {
        return VlfStatus::NullPointer;
    }
    *out = r.inner.points.len();
    VlfStatus::Ok
}

/// Reads boundary point `index` (x-ascending order).
///
/// # Safety
/// `region` must be a live handle; `r1` and `r2` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vlf_region_point(
    region: *const VlfRegion,
    index: usize,
    r1: *mut f64,
    r2: *mut f64,
) -> VlfStatus {
    let Some(r) = region.as_ref() else {
        return VlfStatus::NullPointer;
    };
    if r1.is_null() || r2.is_null() {
        return VlfStatus::NullPointer;
    }
    match r.inner.points.get(index) {
        Some(&(x, y)) => {
            *r1 = x;
            *r2 = y;
            VlfStatus::Ok
        }
        None => VlfStatus::InvalidArgument,
    }
}

/// Writes 1 to `out` when the rate pair lies in the region (within `tol`),
/// else 0.
///
/// # Safety
/// `region` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vlf_region_contains(
    region: *const VlfRegion,
    r1: f64,
    r2: f64,
    tol: f64,
    out: *mut i32,
) -> VlfStatus {
    let Some(r) = region.as_ref() else {
        return VlfStatus::NullPointer;
    };
    if out.is_null() {
        return VlfStatus::NullPointer;
    }
    *out = i32::from(region_contains(&r.inner, r1, r2, tol));
    VlfStatus::Ok
}

/// Releases a region handle; a null pointer is ignored.
///
/// # Safety
/// `region` must be null or a pointer from `vlf_region_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vlf_region_free(region: *mut VlfRegion) {
    if !region.is_null() {
        drop(Box::from_raw(region));
    }
}
