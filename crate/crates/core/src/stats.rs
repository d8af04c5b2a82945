//! Small statistical helpers: moment accumulators, delta-method standard
//! errors for ratio estimators, and weighted least squares for the
//! first-passage regressions.

/// Online mean/variance accumulator (Welford).
#[derive(Debug, Clone, Default)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Moments::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Moments::new();
        for &x in xs {
            m.push(x);
        }
        m
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn var(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn sd(&self) -> f64 {
        self.var().sqrt()
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        if self.n == 0 {
            f64::INFINITY
        } else {
            self.sd() / (self.n as f64).sqrt()
        }
    }
}

/// Raw power sums sum(x^k) for k = 1..=6, for ratio estimators whose
/// delta-method errors need raw moments up to order six.
#[derive(Debug, Clone, Default)]
pub struct PowerSums {
    n: u64,
    s: [f64; 6],
}

impl PowerSums {
    pub fn new() -> Self {
        PowerSums::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let mut p = 1.0;
        for k in 0..6 {
            p *= x;
            self.s[k] += p;
        }
    }

    pub fn merge(&mut self, other: &PowerSums) {
        self.n += other.n;
        for k in 0..6 {
            self.s[k] += other.s[k];
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    /// Raw moment E[x^k] estimate, 1 <= k <= 6.
    pub fn moment(&self, k: usize) -> f64 {
        assert!((1..=6).contains(&k));
        self.s[k - 1] / self.n as f64
    }

    /// Estimate and standard error of `m2 / (2 m1)` (delta method).
    pub fn half_second_over_first(&self) -> (f64, f64) {
        let n = self.n as f64;
        let (m1, m2, m3, m4) = (self.moment(1), self.moment(2), self.moment(3), self.moment(4));
        let est = m2 / (2.0 * m1);
        // Gradient of g(m1, m2) = m2 / (2 m1).
        let g1 = -m2 / (2.0 * m1 * m1);
        let g2 = 1.0 / (2.0 * m1);
        let v11 = m2 - m1 * m1;
        let v22 = m4 - m2 * m2;
        let v12 = m3 - m1 * m2;
        let var = (g1 * g1 * v11 + 2.0 * g1 * g2 * v12 + g2 * g2 * v22) / n;
        (est, var.max(0.0).sqrt())
    }

    /// Estimate and standard error of `m3 / m1` (delta method).
    pub fn third_over_first(&self) -> (f64, f64) {
        let n = self.n as f64;
        let (m1, m2, m3, m4, m6) = (
            self.moment(1),
            self.moment(2),
            self.moment(3),
            self.moment(4),
            self.moment(6),
        );
        let est = m3 / m1;
        let g1 = -m3 / (m1 * m1);
        let g3 = 1.0 / m1;
        let v11 = m2 - m1 * m1;
        let v33 = m6 - m3 * m3;
        let v13 = m4 - m1 * m3;
        let var = (g1 * g1 * v11 + 2.0 * g1 * g3 * v13 + g3 * g3 * v33) / n;
        (est, var.max(0.0).sqrt())
    }
}

/// Sample mean, unbiased variance, and their standard errors in one pass
/// (the variance error uses the fourth central moment).
pub struct MeanVar {
    pub mean: f64,
    pub mean_se: f64,
    pub var: f64,
    pub var_se: f64,
    pub n: u64,
}

pub fn mean_var(xs: &[f64]) -> MeanVar {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let mut c2 = 0.0;
    let mut c4 = 0.0;
    for &x in xs {
        let d = x - mean;
        c2 += d * d;
        c4 += d * d * d * d;
    }
    let var = c2 / (n - 1.0);
    let m4 = c4 / n;
    // Var(sample variance) ~ (m4 - var^2) / n for large n.
    let var_se = ((m4 - var * var).max(0.0) / n).sqrt();
    MeanVar {
        mean,
        mean_se: (var / n).sqrt(),
        var,
        var_se,
        n: xs.len() as u64,
    }
}

/// Standard error of an empirical proportion.
pub fn binomial_se(p_hat: f64, n: u64) -> f64 {
    if n == 0 {
        f64::INFINITY
    } else {
        (p_hat * (1.0 - p_hat) / n as f64).sqrt()
    }
}

/// Straight-line fit `y = slope * x + intercept`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
}

/// Weighted least squares with known per-point standard deviations.
///
/// Weights are `1 / sd^2`; the parameter errors are the exact linear
/// propagation of the stated point errors.
pub fn weighted_line_fit(xs: &[f64], ys: &[f64], sds: &[f64]) -> LineFit {
    assert!(xs.len() == ys.len() && xs.len() == sds.len() && xs.len() >= 2);
    let w: Vec<f64> = sds.iter().map(|s| 1.0 / (s * s)).collect();
    let sw: f64 = w.iter().sum();
    let xbar = xs.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let ybar = ys.iter().zip(&w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(&w).map(|(x, w)| w * (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .zip(&w)
        .map(|((x, y), w)| w * (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    LineFit {
        slope,
        intercept,
        slope_se: (1.0 / sxx).sqrt(),
        intercept_se: (1.0 / sw + xbar * xbar / sxx).sqrt(),
    }
}
