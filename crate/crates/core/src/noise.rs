//! Noise distributions whose log-survival function is 1-Lipschitz, sampled by
//! inverse transform.
//!
//! Every quantile is evaluated from `log p` (and `log(-log p)`) rather than
//! from `p` itself. A group of `n` i.i.d. noise terms has its maximum at
//! `Q(U^(1/n))`, and `log(U^(1/n)) = log U / n` stays representable even when
//! `n` is a binomial coefficient with thousands of digits.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Exponential,
    Gumbel,
    Laplace,
    Logistic,
    HalfLogistic,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 5] = [
        NoiseKind::Exponential,
        NoiseKind::Gumbel,
        NoiseKind::Laplace,
        NoiseKind::Logistic,
        NoiseKind::HalfLogistic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Exponential => "exponential",
            NoiseKind::Gumbel => "gumbel",
            NoiseKind::Laplace => "laplace",
            NoiseKind::Logistic => "logistic",
            NoiseKind::HalfLogistic => "half-logistic",
        }
    }

    /// Strictly increasing quantile function of the standard distribution.
    pub fn inv_cdf(self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return domain(format!("quantile argument {p} outside (0, 1)"));
        }
        let log_p = p.ln();
        Ok(self.quantile_parts(log_p, (-log_p).ln(), (-p).ln_1p()))
    }

    /// `log(1 - F(x))`, evaluated without forming `1 - F(x)`.
    pub fn log_survival(self, x: f64) -> f64 {
        match self {
            NoiseKind::Exponential => {
                if x < 0.0 {
                    0.0
                } else {
                    -x
                }
            }
            NoiseKind::Gumbel => (-(-(-x).exp()).exp_m1()).ln(),
            NoiseKind::Laplace => {
                if x < 0.0 {
                    (-0.5 * x.exp()).ln_1p()
                } else {
                    -LN_2 - x
                }
            }
            NoiseKind::Logistic => -softplus(x),
            NoiseKind::HalfLogistic => {
                if x < 0.0 {
                    0.0
                } else {
                    LN_2 - softplus(x)
                }
            }
        }
    }

    /// Cumulative distribution function.
    pub fn cdf(self, x: f64) -> f64 {
        -self.log_survival(x).exp_m1()
    }

    /// One draw `Q(U)` with `U ~ Unif(0, 1)` (open interval).
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        group_max_noise(self, LogUniform::draw(rng, 0.0))
    }

    /// Quantile given `log p`, `log(-log p)` and `log(1 - p)`.
    ///
    /// `log_neg_log_p` is passed separately so it stays finite after `log p`
    /// has underflowed to zero.
    #[inline]
    fn quantile_parts(self, log_p: f64, log_neg_log_p: f64, log_q: f64) -> f64 {
        match self {
            NoiseKind::Exponential => -log_q,
            NoiseKind::Gumbel => -log_neg_log_p,
            NoiseKind::Laplace => {
                if log_p < -LN_2 {
                    LN_2 + log_p
                } else {
                    -LN_2 - log_q
                }
            }
            NoiseKind::Logistic => log_p - log_q,
            NoiseKind::HalfLogistic => log_p.exp().ln_1p() - log_q,
        }
    }

    #[inline]
    fn quantile_from_logs(self, log_p: f64, log_neg_log_p: f64) -> f64 {
        let log_q = if log_p < -LN_2 {
            (-log_p.exp()).ln_1p()
        } else if log_p == 0.0 {
            log_neg_log_p
        } else {
            // 1 - p = (-log p) * (expm1(log p) / log p)
            log_neg_log_p + (log_p.exp_m1() / log_p).ln()
        };
        self.quantile_parts(log_p, log_neg_log_p, log_q)
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "exponential" | "exp" => Ok(NoiseKind::Exponential),
            "gumbel" => Ok(NoiseKind::Gumbel),
            "laplace" => Ok(NoiseKind::Laplace),
            "logistic" => Ok(NoiseKind::Logistic),
            "half-logistic" | "halflogistic" => Ok(NoiseKind::HalfLogistic),
            other => domain(format!("unknown noise kind {other:?}")),
        }
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// A uniform draw raised to the power `exp(-m)`, kept in log space.
///
/// Represents `p = exp(log_u * exp(-m))`, the maximum of `exp(m)` i.i.d.
/// uniforms when `log_u` is the log of a single uniform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogUniform {
    log_u: f64,
    log_group_size: f64,
}

impl LogUniform {
    pub fn new(log_u: f64, log_group_size: f64) -> Result<Self> {
        if !(log_u < 0.0) || log_u.is_infinite() {
            return domain(format!("log_u = {log_u} must be finite and negative"));
        }
        if !(log_group_size >= 0.0) || log_group_size.is_infinite() {
            return domain(format!("log group size {log_group_size} must be finite and >= 0"));
        }
        Ok(Self { log_u, log_group_size })
    }

    /// Fresh uniform for a group of size `exp(log_group_size)`.
    #[inline]
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, log_group_size: f64) -> Self {
        let u: f64 = rng.sample(Open01);
        Self { log_u: u.ln(), log_group_size }
    }

    pub fn log_u(&self) -> f64 {
        self.log_u
    }

    pub fn log_group_size(&self) -> f64 {
        self.log_group_size
    }
}

/// Free-function form of [`NoiseKind::inv_cdf`].
pub fn inv_cdf(kind: NoiseKind, p: f64) -> Result<f64> {
    kind.inv_cdf(p)
}

/// Largest of `exp(m)` i.i.d. noise terms, generated from one uniform.
///
/// For Gumbel noise this is exactly `m + Q(u)`.
#[inline]
pub fn group_max_noise(kind: NoiseKind, lu: LogUniform) -> f64 {
    let m = lu.log_group_size;
    if kind == NoiseKind::Gumbel {
        return m - (-lu.log_u).ln();
    }
    let log_p = lu.log_u * (-m).exp();
    let log_neg_log_p = (-lu.log_u).ln() - m;
    kind.quantile_from_logs(log_p, log_neg_log_p)
}

/// The `kappa` largest of `group_size` i.i.d. noise terms, in decreasing order.
///
/// Uniform order statistics are produced top-down: `U(n) = V1^(1/n)`,
/// `U(n-1) = U(n) * V2^(1/(n-1))`, and so on, all in log space.
pub fn top_order_noise<R: Rng + ?Sized>(
    kind: NoiseKind,
    group_size: u64,
    kappa: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if kappa == 0 || group_size == 0 {
        return domain("group size and kappa must be positive");
    }
    if kappa as u64 > group_size {
        return domain(format!("kappa = {kappa} exceeds group size {group_size}"));
    }
    let mut log_p = 0.0;
    let mut out = Vec::with_capacity(kappa);
    for i in 0..kappa as u64 {
        let v: f64 = rng.sample(Open01);
        log_p += v.ln() / (group_size - i) as f64;
        out.push(kind.quantile_from_logs(log_p, (-log_p).ln()));
    }
    Ok(out)
}

/// Largest excess of `|log S(x) - log S(x + c)|` over `|c|` on a grid,
/// clipped below at zero. Points where the log-survival is not finite are
/// skipped.
pub fn verify_lipschitz(kind: NoiseKind, x_grid: &[f64], c_grid: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for &x in x_grid {
        let a = kind.log_survival(x);
        if !a.is_finite() {
            continue;
        }
        for &c in c_grid {
            let b = kind.log_survival(x + c);
            if !b.is_finite() {
                continue;
            }
            worst = worst.max((a - b).abs() - c.abs());
        }
    }
    worst
}
