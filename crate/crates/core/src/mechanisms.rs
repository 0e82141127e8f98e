//! Noise mechanisms and their group-size-k Rényi divergence bounds.
//!
//! Each `*_group_tau` returns τ*_k(α): the order-α Rényi divergence bound of
//! the non-subsampled mechanism between datasets differing in `k` records.
//! The sensitivity cancels for Gaussian and Laplace noise, so only the
//! Skellam variant carries it.

use std::fmt;

use crate::numerics::log_add_exp;
use crate::{Error, Real, Result};

/// Rényi order, strictly greater than one.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RenyiOrder<T>(T);

impl<T: Real> RenyiOrder<T> {
    pub fn new(alpha: T) -> Result<Self> {
        if alpha.is_finite() && alpha > T::one() {
            Ok(RenyiOrder(alpha))
        } else {
            Err(Error::usage(format!("Rényi order must be finite and > 1 (got {alpha})")))
        }
    }

    #[inline]
    pub fn get(self) -> T {
        self.0
    }

    /// The order as an integer, if it is one.
    pub fn as_integer(self) -> Option<u64> {
        let a = self.0;
        if a.fract() == T::zero() {
            a.to_u64()
        } else {
            None
        }
    }

    /// Integer orders `lo..=hi`.
    pub fn integer_grid(lo: u64, hi: u64) -> Result<Vec<Self>> {
        (lo..=hi).map(|a| RenyiOrder::new(T::from_count(a))).collect()
    }
}

impl<T: Real> fmt::Display for RenyiOrder<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The four supported mechanism families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MechanismKind {
    Gaussian,
    Laplace,
    Skellam,
    RandomizedResponse,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 4] = [
        MechanismKind::Gaussian,
        MechanismKind::Laplace,
        MechanismKind::Skellam,
        MechanismKind::RandomizedResponse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::Gaussian => "gaussian",
            MechanismKind::Laplace => "laplace",
            MechanismKind::Skellam => "skellam",
            MechanismKind::RandomizedResponse => "rr",
        }
    }

    /// Name of the noise parameter as used on the command line.
    pub fn noise_name(self) -> &'static str {
        match self {
            MechanismKind::Gaussian => "sigma",
            MechanismKind::Laplace => "b",
            MechanismKind::Skellam => "mu",
            MechanismKind::RandomizedResponse => "p",
        }
    }
}

impl std::str::FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(MechanismKind::Gaussian),
            "laplace" => Ok(MechanismKind::Laplace),
            "skellam" => Ok(MechanismKind::Skellam),
            "rr" | "randomized_response" | "randomized-response" => {
                Ok(MechanismKind::RandomizedResponse)
            }
            other => Err(Error::usage(format!("unknown mechanism {other:?}"))),
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A mechanism together with its noise parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MechanismSpec<T> {
    /// Noise multiplier: the noise std is `C·sigma`.
    Gaussian { sigma: T },
    /// Scale multiplier: the noise scale is `C·b`.
    Laplace { b: T },
    /// Per-coordinate noise `Sk(0, C²·mu)`.
    Skellam { mu: T, sensitivity_c: u32 },
    /// Reports the true bit with probability `p`.
    RandomizedResponse { p: T },
}

impl<T: Real> MechanismSpec<T> {
    pub fn gaussian(sigma: T) -> Result<Self> {
        Self::Gaussian { sigma }.validated()
    }

    pub fn laplace(b: T) -> Result<Self> {
        Self::Laplace { b }.validated()
    }

    pub fn skellam(mu: T, sensitivity_c: u32) -> Result<Self> {
        Self::Skellam { mu, sensitivity_c }.validated()
    }

    pub fn randomized_response(p: T) -> Result<Self> {
        Self::RandomizedResponse { p }.validated()
    }

    /// Builds a mechanism of `kind` with noise parameter `noise`.
    pub fn from_kind(kind: MechanismKind, noise: T, sensitivity_c: u32) -> Result<Self> {
        match kind {
            MechanismKind::Gaussian => Self::gaussian(noise),
            MechanismKind::Laplace => Self::laplace(noise),
            MechanismKind::Skellam => Self::skellam(noise, sensitivity_c),
            MechanismKind::RandomizedResponse => Self::randomized_response(noise),
        }
    }

    pub fn validated(self) -> Result<Self> {
        let positive = |name: &str, v: T| {
            if v.is_finite() && v > T::zero() {
                Ok(())
            } else {
                Err(Error::usage(format!("{name} must be finite and > 0 (got {v})")))
            }
        };
        match self {
            Self::Gaussian { sigma } => positive("sigma", sigma)?,
            Self::Laplace { b } => positive("b", b)?,
            Self::Skellam { mu, sensitivity_c } => {
                positive("mu", mu)?;
                if sensitivity_c == 0 {
                    return Err(Error::usage("Skellam sensitivity C must be >= 1"));
                }
            }
            Self::RandomizedResponse { p } => check_truth_probability(p)?,
        }
        Ok(self)
    }

    pub fn kind(&self) -> MechanismKind {
        match self {
            Self::Gaussian { .. } => MechanismKind::Gaussian,
            Self::Laplace { .. } => MechanismKind::Laplace,
            Self::Skellam { .. } => MechanismKind::Skellam,
            Self::RandomizedResponse { .. } => MechanismKind::RandomizedResponse,
        }
    }

    pub fn noise(&self) -> T {
        match *self {
            Self::Gaussian { sigma } => sigma,
            Self::Laplace { b } => b,
            Self::Skellam { mu, .. } => mu,
            Self::RandomizedResponse { p } => p,
        }
    }

    pub fn sensitivity_c(&self) -> u32 {
        match *self {
            Self::Skellam { sensitivity_c, .. } => sensitivity_c,
            _ => 1,
        }
    }

    /// Same mechanism with a different noise parameter.
    pub fn with_noise(&self, noise: T) -> Result<Self> {
        Self::from_kind(self.kind(), noise, self.sensitivity_c())
    }

    /// τ*_k(α) of the non-subsampled mechanism.
    pub fn group_tau(&self, k: u64, alpha: RenyiOrder<T>) -> T {
        match *self {
            Self::Gaussian { sigma } => gaussian_group_tau(k, alpha, sigma),
            Self::Laplace { b } => laplace_group_tau(k, alpha, b),
            Self::Skellam { mu, sensitivity_c } => skellam_group_tau(k, alpha, mu, sensitivity_c),
            Self::RandomizedResponse { p } => {
                if k == 0 {
                    T::zero()
                } else {
                    // Validated on construction.
                    rr_group_tau(alpha, p).unwrap_or(T::nan())
                }
            }
        }
    }
}

fn check_truth_probability<T: Real>(p: T) -> Result<()> {
    if p > T::lit(0.5) && p < T::one() {
        Ok(())
    } else {
        Err(Error::usage(format!(
            "randomized-response truth probability must lie strictly inside (0.5, 1) (got {p})"
        )))
    }
}

/// `α k² / (2σ²)`.
pub fn gaussian_group_tau<T: Real>(k: u64, alpha: RenyiOrder<T>, sigma: T) -> T {
    let k = T::from_count(k);
    alpha.get() * k * k / (T::lit(2.0) * sigma * sigma)
}

/// `(1/(α-1)) log Φ_k`, with
/// `Φ_k = α/(2α-1)·exp((α-1)k/b) + (α-1)/(2α-1)·exp(-αk/b)`.
///
/// The worst case over the L1 ball sits on a vertex (the objective is convex),
/// so the one-dimensional divergence at shift `k` is the d-dimensional bound.
pub fn laplace_group_tau<T: Real>(k: u64, alpha: RenyiOrder<T>, b: T) -> T {
    if k == 0 {
        return T::zero();
    }
    let a = alpha.get();
    let k = T::from_count(k);
    let denom = T::lit(2.0) * a - T::one();
    let log_phi = log_add_exp(
        (a / denom).ln() + (a - T::one()) * k / b,
        ((a - T::one()) / denom).ln() - a * k / b,
    );
    (log_phi / (a - T::one())).max(T::zero())
}

/// `α k²/(2μ) + min{((2α-1)k²C + 6k)/(4C³μ²), 3k/(2Cμ)}`.
pub fn skellam_group_tau<T: Real>(k: u64, alpha: RenyiOrder<T>, mu: T, sensitivity_c: u32) -> T {
    let a = alpha.get();
    let k = T::from_count(k);
    let c = T::lit(sensitivity_c as f64);
    let two = T::lit(2.0);
    let quadratic = a * k * k / (two * mu);
    let first = ((two * a - T::one()) * k * k * c + T::lit(6.0) * k) / (T::lit(4.0) * c * c * c * mu * mu);
    let second = T::lit(3.0) * k / (two * c * mu);
    quadratic + first.min(second)
}

/// `log Φ^RR(α)` where `Φ^RR(α) = p^α/(1-p)^(α-1) + (1-p)^α/p^(α-1)`.
pub fn rr_log_kernel<T: Real>(alpha: RenyiOrder<T>, p: T) -> Result<T> {
    check_truth_probability(p)?;
    let a = alpha.get();
    let ln_p = p.ln();
    let ln_1mp = (-p).ln_1p();
    Ok(log_add_exp(
        a * ln_p - (a - T::one()) * ln_1mp,
        a * ln_1mp - (a - T::one()) * ln_p,
    ))
}

/// τ*_1(α) of randomized response. The same value bounds every group size
/// k ≥ 1; τ*_0 is zero.
pub fn rr_group_tau<T: Real>(alpha: RenyiOrder<T>, p: T) -> Result<T> {
    let log_phi = rr_log_kernel(alpha, p)?;
    Ok((log_phi / (alpha.get() - T::one())).max(T::zero()))
}
