//! Channel model for the two-user additive Gaussian multiple-access channel
//! `Y = X1 + X2 + Z`, `Z ~ N(0, 1)`, with per-user power limits `P1`, `P2`.
//!
//! A stop-feedback decoder tracks three information-density random walks,
//! one per decoding constraint:
//!
//! 1. user 1 against the channel output with user 2's codeword known,
//! 2. user 2 against the channel output with user 1's codeword known,
//! 3. the user pair jointly against the channel output.
//!
//! For Gaussian inputs `X_u ~ N(0, P_u)` each per-letter density has a
//! closed form in terms of squared residuals; [`SingleLetterStats`] collects
//! the resulting means, variances, and dispersion ratios that every other
//! module consumes.

use crate::error::Error;
use crate::rng::Stream;
use crate::Result;

/// Identifies one of the three decoding walks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WalkId {
    /// User 1's codeword against Y with user 2's codeword given.
    User1,
    /// User 2's codeword against Y with user 1's codeword given.
    User2,
    /// Both codewords jointly against Y.
    Pair,
}

impl WalkId {
    pub const ALL: [WalkId; 3] = [WalkId::User1, WalkId::User2, WalkId::Pair];

    /// Zero-based array index.
    #[inline]
    pub fn index(self) -> usize {
        match self {
            WalkId::User1 => 0,
            WalkId::User2 => 1,
            WalkId::Pair => 2,
        }
    }

    /// One-based identifier, accepting 1, 2, or 3.
    pub fn from_number(n: u32) -> Result<WalkId> {
        match n {
            1 => Ok(WalkId::User1),
            2 => Ok(WalkId::User2),
            3 => Ok(WalkId::Pair),
            _ => Err(Error::InvalidParameter {
                name: "walk",
                value: n as f64,
                reason: "walk id must be 1, 2, or 3",
            }),
        }
    }

    pub fn number(self) -> u32 {
        self.index() as u32 + 1
    }
}

/// Gaussian point-to-point capacity `0.5 * ln(1 + x)` in nats.
pub fn gaussian_capacity(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidParameter {
            name: "snr",
            value: x,
            reason: "capacity argument must be finite and nonnegative",
        });
    }
    Ok(0.5 * x.ln_1p())
}

/// Binary entropy in nats; `h(0) = h(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter {
            name: "p",
            value: p,
            reason: "entropy argument must lie in [0, 1]",
        });
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.ln() - (1.0 - p) * (1.0 - p).ln())
}

/// Power limits of the two users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub p1: f64,
    pub p2: f64,
}

impl ChannelParams {
    /// Both powers must be finite and strictly positive.
    pub fn new(p1: f64, p2: f64) -> Result<ChannelParams> {
        for (name, v) in [("p1", p1), ("p2", p2)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "power must be finite and strictly positive",
                });
            }
        }
        Ok(ChannelParams { p1, p2 })
    }
}

/// The three per-letter information densities evaluated at one channel use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoDensityTriple {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl InfoDensityTriple {
    #[inline]
    pub fn get(&self, which: WalkId) -> f64 {
        match which {
            WalkId::User1 => self.d1,
            WalkId::User2 => self.d2,
            WalkId::Pair => self.d3,
        }
    }
}

/// Single-letter statistics of the three walks under independent Gaussian
/// inputs at full power.
///
/// For each walk `j` with effective signal-to-noise ratio `s_j` (namely
/// `P1`, `P2`, and `P1 + P2`):
///
/// - `mu[j]`    — mean increment, `0.5 ln(1 + s_j)` (the Gaussian capacity),
/// - `sigma2[j]`— increment variance, `s_j / (1 + s_j)`,
/// - `l[j]`     — dispersion ratio `sigma2 / mu^2 = 4 s_j / ((1+s_j) ln^2(1+s_j))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleLetterStats {
    pub params: ChannelParams,
    pub mu: [f64; 3],
    pub sigma2: [f64; 3],
    pub l: [f64; 3],
    sqrt_p: [f64; 2],
    // Cached quadratic coefficients 1 / (2 (1 + s_j)) of the closed forms.
    half_inv: [f64; 3],
}

impl SingleLetterStats {
    pub fn new(params: ChannelParams) -> SingleLetterStats {
        let snr = [params.p1, params.p2, params.p1 + params.p2];
        let mut mu = [0.0; 3];
        let mut sigma2 = [0.0; 3];
        let mut l = [0.0; 3];
        let mut half_inv = [0.0; 3];
        for j in 0..3 {
            let s = snr[j];
            mu[j] = 0.5 * s.ln_1p();
            sigma2[j] = s / (1.0 + s);
            l[j] = 4.0 * s / ((1.0 + s) * s.ln_1p() * s.ln_1p());
            half_inv[j] = 0.5 / (1.0 + s);
        }
        SingleLetterStats {
            params,
            mu,
            sigma2,
            l,
            sqrt_p: [params.p1.sqrt(), params.p2.sqrt()],
            half_inv,
        }
    }

    /// Capacity of walk `which`'s effective single-user channel.
    #[inline]
    pub fn capacity(&self, which: WalkId) -> f64 {
        self.mu[which.index()]
    }

    /// Square root of a user's power (0-based user index).
    #[inline]
    pub fn sqrt_power(&self, user: usize) -> f64 {
        self.sqrt_p[user]
    }

    /// Quadratic coefficients `1 / (2 (1 + s_j))` of the density closed
    /// forms, exposed so bulk evaluators can share per-step partial terms
    /// across many candidate letters.
    #[inline]
    pub fn half_inv(&self) -> [f64; 3] {
        self.half_inv
    }

    /// All three information densities at `(x1, x2, y)`.
    ///
    /// Writing `r = y - x1 - x2` for the joint residual:
    ///
    /// - `d1 = C(P1)      + (y - x2)^2 / (2 (1 + P1))      - r^2 / 2`
    /// - `d2 = C(P2)      + (y - x1)^2 / (2 (1 + P2))      - r^2 / 2`
    /// - `d3 = C(P1 + P2) + y^2        / (2 (1 + P1 + P2)) - r^2 / 2`
    #[inline]
    pub fn info_density(&self, x1: f64, x2: f64, y: f64) -> InfoDensityTriple {
        let r = y - x1 - x2;
        let half_r2 = 0.5 * r * r;
        let u1 = y - x2;
        let u2 = y - x1;
        InfoDensityTriple {
            d1: self.mu[0] + u1 * u1 * self.half_inv[0] - half_r2,
            d2: self.mu[1] + u2 * u2 * self.half_inv[1] - half_r2,
            d3: self.mu[2] + y * y * self.half_inv[2] - half_r2,
        }
    }

    /// One information density, evaluated at whatever letters the caller
    /// supplies — pass a candidate (possibly wrong) codeword letter to score
    /// it against the received `y`.
    #[inline]
    pub fn info_density_one(&self, x1: f64, x2: f64, y: f64, which: WalkId) -> f64 {
        self.info_density(x1, x2, y).get(which)
    }

    /// Draws channel noise, forms `y = x1 + x2 + z`, and returns the output
    /// with the matched information densities.
    #[inline]
    pub fn sample_channel(&self, x1: f64, x2: f64, stream: &mut Stream) -> (f64, InfoDensityTriple) {
        let y = x1 + x2 + stream.normal();
        (y, self.info_density(x1, x2, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn capacity_closed_forms() {
        assert_eq!(gaussian_capacity(0.0).unwrap(), 0.0);
        assert!((gaussian_capacity(1.0).unwrap() - 0.5 * LN2).abs() < 1e-15);
        assert!((gaussian_capacity(3.0).unwrap() - LN2).abs() < 1e-15);
        assert!(gaussian_capacity(-0.5).is_err());
        assert!(gaussian_capacity(f64::NAN).is_err());
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - LN2).abs() < 1e-15);
        assert!(binary_entropy(1.5).is_err());
    }

    #[test]
    fn params_reject_bad_powers() {
        assert!(ChannelParams::new(0.0, 1.0).is_err());
        assert!(ChannelParams::new(1.0, -2.0).is_err());
        assert!(ChannelParams::new(f64::INFINITY, 1.0).is_err());
        assert!(ChannelParams::new(1e-9, 1e-9).is_ok());
    }

    #[test]
    fn stats_at_unit_powers() {
        let st = SingleLetterStats::new(ChannelParams::new(1.0, 1.0).unwrap());
        assert!((st.mu[0] - 0.5 * LN2).abs() < 1e-15);
        assert!((st.mu[1] - 0.5 * LN2).abs() < 1e-15);
        assert!((st.mu[2] - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!((st.sigma2[0] - 0.5).abs() < 1e-15);
        assert!((st.sigma2[1] - 0.5).abs() < 1e-15);
        assert!((st.sigma2[2] - 2.0 / 3.0).abs() < 1e-15);
        // The dispersion ratio is sigma^2 / mu^2.
        for j in 0..3 {
            assert!((st.l[j] - st.sigma2[j] / (st.mu[j] * st.mu[j])).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_power_is_supported() {
        // The dispersion ratio blows up as power vanishes but stays finite
        // for any positive power.
        let st = SingleLetterStats::new(ChannelParams::new(1e-6, 1.0).unwrap());
        assert!(st.l[0].is_finite());
        assert!(st.l[0] > 1e5);
    }

    #[test]
    fn density_plug_in_values() {
        let st = SingleLetterStats::new(ChannelParams::new(1.0, 1.0).unwrap());
        // x1 = x2 = 0, y = 0: d1 = C(1) + 0 - 0.
        let d = st.info_density(0.0, 0.0, 0.0);
        assert!((d.d1 - 0.346573590279973).abs() < 1e-12);
        // x1 = 1, x2 = 0, y = 1: d1 = C(1) + 1/4 - 0.
        let d = st.info_density(1.0, 0.0, 1.0);
        assert!((d.d1 - (0.346573590279973 + 0.25)).abs() < 1e-12);
        // Candidate letter 0 against y = 1 (true letters were different):
        // d1 = C(1) + 1/4 - 1/2.
        let v = st.info_density_one(0.0, 0.0, 1.0, WalkId::User1);
        assert!((v - (0.346573590279973 + 0.25 - 0.5)).abs() < 1e-12);
    }

    /// Reference implementation straight from the defining log-density
    /// ratios, using Gaussian pdfs with no algebraic simplification.
    fn density_oracle(p: &ChannelParams, x1: f64, x2: f64, y: f64) -> [f64; 3] {
        fn ln_normal_pdf(x: f64, var: f64) -> f64 {
            -0.5 * (x * x / var) - 0.5 * (std::f64::consts::TAU * var).ln()
        }
        let num = ln_normal_pdf(y - x1 - x2, 1.0);
        [
            num - ln_normal_pdf(y - x2, 1.0 + p.p1),
            num - ln_normal_pdf(y - x1, 1.0 + p.p2),
            num - ln_normal_pdf(y, 1.0 + p.p1 + p.p2),
        ]
    }

    #[test]
    fn closed_forms_match_log_density_oracle() {
        let p = ChannelParams::new(1.7, 0.4).unwrap();
        let st = SingleLetterStats::new(p);
        for (x1, x2, y) in [
            (0.0, 0.0, 0.0),
            (1.0, -2.0, 0.5),
            (-0.3, 0.9, 2.2),
            (3.0, 3.0, -1.0),
        ] {
            let d = st.info_density(x1, x2, y);
            let o = density_oracle(&p, x1, x2, y);
            assert!((d.d1 - o[0]).abs() < 1e-12, "d1 {} vs {}", d.d1, o[0]);
            assert!((d.d2 - o[1]).abs() < 1e-12);
            assert!((d.d3 - o[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_moments_match_single_letter_stats() {
        let st = SingleLetterStats::new(ChannelParams::new(1.0, 1.0).unwrap());
        let mut stream = Stream::for_trial(11, crate::rng::domain::MOMENTS, 0);
        let n = 200_000;
        let mut acc = [crate::stats::Moments::new(), crate::stats::Moments::new(), crate::stats::Moments::new()];
        for _ in 0..n {
            let x1 = stream.normal() * st.sqrt_power(0);
            let x2 = stream.normal() * st.sqrt_power(1);
            let (_, d) = st.sample_channel(x1, x2, &mut stream);
            acc[0].push(d.d1);
            acc[1].push(d.d2);
            acc[2].push(d.d3);
        }
        for (j, col) in acc.iter().enumerate() {
            let tol = 4.0 * col.se();
            assert!(
                (col.mean() - st.mu[j]).abs() < tol,
                "walk {} mean {} vs {}",
                j + 1,
                col.mean(),
                st.mu[j]
            );
            assert!(
                (col.var() - st.sigma2[j]).abs() < 0.02,
                "walk {} var {} vs {}",
                j + 1,
                col.var(),
                st.sigma2[j]
            );
        }
    }

    proptest! {
        #[test]
        fn prop_closed_form_matches_oracle(
            p1 in 0.05f64..20.0,
            p2 in 0.05f64..20.0,
            x1 in -10.0f64..10.0,
            x2 in -10.0f64..10.0,
            y in -20.0f64..20.0,
        ) {
            let p = ChannelParams::new(p1, p2).unwrap();
            let st = SingleLetterStats::new(p);
            let d = st.info_density(x1, x2, y);
            let o = density_oracle(&p, x1, x2, y);
            prop_assert!((d.d1 - o[0]).abs() < 1e-9_f64.max(o[0].abs() * 1e-12));
            prop_assert!((d.d2 - o[1]).abs() < 1e-9_f64.max(o[1].abs() * 1e-12));
            prop_assert!((d.d3 - o[2]).abs() < 1e-9_f64.max(o[2].abs() * 1e-12));
        }

        #[test]
        fn prop_capacity_monotone(a in 0.0f64..50.0, b in 0.0f64..50.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(gaussian_capacity(lo).unwrap() <= gaussian_capacity(hi).unwrap());
        }
    }
}
