//! Subsampled Rényi group privacy accounting.
//!
//! With Poisson subsampling at rate `q`, the number of the `m` differing
//! records that land in the sample is `Binomial(m, q)`. The subsampled
//! mechanism's divergence is then bounded by the binomial mixture of the
//! base mechanism's per-group bounds:
//!
//! ```text
//! τ_m(α) = 1/(α-1) · log Σ_k C(m,k) (1-q)^(m-k) q^k exp((α-1) τ*_k(α))
//! ```
//!
//! The same closed forms hold for bounded and unbounded neighbouring, so
//! [`Neighboring`] is carried as a label only.

use std::fmt;

use crate::mechanisms::{rr_log_kernel, MechanismSpec, RenyiOrder};
use crate::numerics::{log1m_exp, log_add_exp, log_binomial_weights, LogSumExp};
use crate::{Error, Real, Result};

/// `(m, α, τ)`: order-α Rényi divergence at most τ between the outputs on
/// any two datasets differing in `m` records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RgpGuarantee<T> {
    pub m: u64,
    pub alpha: RenyiOrder<T>,
    pub tau: T,
}

impl<T: Real> RgpGuarantee<T> {
    pub fn new(m: u64, alpha: RenyiOrder<T>, tau: T) -> Result<Self> {
        if m == 0 {
            return Err(Error::usage("group size must be >= 1"));
        }
        if !(tau >= T::zero()) {
            return Err(Error::usage(format!("tau must be >= 0 (got {tau})")));
        }
        Ok(RgpGuarantee { m, alpha, tau })
    }
}

/// Classical `(m, ε, δ)` group privacy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpGuarantee<T> {
    pub m: u64,
    pub epsilon: T,
    pub delta: T,
}

impl<T: Real> GpGuarantee<T> {
    pub fn new(m: u64, epsilon: T, delta: T) -> Result<Self> {
        if m == 0 {
            return Err(Error::usage("group size must be >= 1"));
        }
        if !epsilon.is_finite() {
            return Err(Error::usage(format!("epsilon must be finite (got {epsilon})")));
        }
        check_delta(delta)?;
        Ok(GpGuarantee { m, epsilon, delta })
    }
}

pub(crate) fn check_delta<T: Real>(delta: T) -> Result<()> {
    if delta > T::zero() && delta < T::one() {
        Ok(())
    } else {
        Err(Error::usage(format!("delta must lie strictly inside (0, 1) (got {delta})")))
    }
}

/// Which neighbouring relation a guarantee refers to. Has no effect on the
/// numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Neighboring {
    #[default]
    Unbounded,
    Bounded,
}

impl fmt::Display for Neighboring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Neighboring::Unbounded => "unbounded",
            Neighboring::Bounded => "bounded",
        })
    }
}

pub const DEFAULT_DELTA: f64 = 1e-5;

/// Everything needed to account one subsampled, iterated mechanism.
#[derive(Debug, Clone, PartialEq)]
pub struct AccountingQuery<T> {
    pub mechanism: MechanismSpec<T>,
    /// Poisson sampling rate, strictly inside (0, 1).
    pub q: T,
    pub iterations: u64,
    /// Target group size.
    pub m: u64,
    /// Ascending, deduplicated Rényi orders searched by [`best_gp`].
    pub alpha_grid: Vec<RenyiOrder<T>>,
    pub delta: T,
    pub neighboring: Neighboring,
}

impl<T: Real> AccountingQuery<T> {
    /// Query with the integer grid `α ∈ {2, …, 100}` and `δ = 1e-5`.
    pub fn new(mechanism: MechanismSpec<T>, q: T, iterations: u64, m: u64) -> Result<Self> {
        let query = AccountingQuery {
            mechanism,
            q,
            iterations,
            m,
            alpha_grid: RenyiOrder::integer_grid(2, 100)?,
            delta: T::lit(DEFAULT_DELTA),
            neighboring: Neighboring::default(),
        };
        query.validate()?;
        Ok(query)
    }

    pub fn with_alpha_grid(mut self, mut grid: Vec<RenyiOrder<T>>) -> Result<Self> {
        grid.sort_by(|a, b| a.partial_cmp(b).expect("orders are finite"));
        grid.dedup();
        self.alpha_grid = grid;
        self.validate()?;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: T) -> Result<Self> {
        self.delta = delta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_mechanism(mut self, mechanism: MechanismSpec<T>) -> Result<Self> {
        self.mechanism = mechanism.validated()?;
        Ok(self)
    }

    pub fn with_neighboring(mut self, neighboring: Neighboring) -> Self {
        self.neighboring = neighboring;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.mechanism.validated()?;
        if !(self.q > T::zero() && self.q < T::one()) {
            return Err(Error::usage(format!(
                "sampling rate q must lie strictly inside (0, 1) (got {})",
                self.q
            )));
        }
        if self.iterations == 0 {
            return Err(Error::usage("iteration count T must be >= 1"));
        }
        if self.m == 0 {
            return Err(Error::usage("group size m must be >= 1"));
        }
        if self.alpha_grid.is_empty() {
            return Err(Error::usage("alpha grid must not be empty"));
        }
        check_delta(self.delta)
    }
}

/// Binomial-mixture bound on the subsampled divergence from per-group bounds
/// `tau_star(k)`, `k = 0..=m`, evaluated in log space.
pub fn subsampled_rgp_bound<T, F>(m: u64, alpha: RenyiOrder<T>, q: T, tau_star: F) -> Result<T>
where
    T: Real,
    F: Fn(u64) -> T,
{
    if !(q > T::zero() && q < T::one()) {
        return Err(Error::usage(format!("sampling rate must lie strictly inside (0, 1) (got {q})")));
    }
    let a1 = alpha.get() - T::one();
    let weights = log_binomial_weights(m, q)?;
    let mut acc = LogSumExp::new();
    let mut max_tau = T::zero();
    for (k, w) in weights.into_iter().enumerate() {
        let tau = tau_star(k as u64);
        if !tau.is_finite() {
            return Err(Error::usage(format!("tau*_{k} is not finite ({tau})")));
        }
        if k == 0 && tau != T::zero() {
            log::warn!("tau*_0 = {tau} is nonzero; the bound is still valid but loose");
        }
        max_tau = max_tau.max(tau);
        acc.add(w + a1 * tau);
    }
    Ok((acc.value() / a1).max(T::zero()).min(max_tau))
}

/// Single-iteration `(m, α, τ)` guarantee of the query's subsampled mechanism.
pub fn account_mechanism<T: Real>(
    query: &AccountingQuery<T>,
    alpha: RenyiOrder<T>,
) -> Result<RgpGuarantee<T>> {
    query.validate()?;
    let tau = match query.mechanism {
        MechanismSpec::RandomizedResponse { p } => {
            // τ*_k is flat in k >= 1, so the mixture collapses to two terms:
            // (1-q)^m · 1 + (1 - (1-q)^m) · Φ.
            let log_none = T::from_count(query.m) * (-query.q).ln_1p();
            let log_some = log1m_exp(log_none);
            let log_phi = rr_log_kernel(alpha, p)?;
            let tau = log_add_exp(log_none, log_some + log_phi) / (alpha.get() - T::one());
            tau.max(T::zero())
        }
        mech => subsampled_rgp_bound(query.m, alpha, query.q, |k| mech.group_tau(k, alpha))?,
    };
    RgpGuarantee::new(query.m, alpha, tau)
}

/// Sequential composition of `iterations` identical steps.
pub fn compose<T: Real>(tau_single: T, iterations: u64) -> T {
    tau_single * T::from_count(iterations)
}

/// `ε = τ + (log(1/δ) + (α-1) log(1 - 1/α) - log α) / (α-1)`.
pub fn rgp_to_gp<T: Real>(guarantee: &RgpGuarantee<T>, delta: T) -> Result<GpGuarantee<T>> {
    check_delta(delta)?;
    let a = guarantee.alpha.get();
    let a1 = a - T::one();
    let slack = (-delta.ln() + a1 * (-a.recip()).ln_1p() - a.ln()) / a1;
    Ok(GpGuarantee {
        m: guarantee.m,
        epsilon: guarantee.tau + slack,
        delta,
    })
}

/// Minimises the converted ε over `grid`. `curve` returns the (already
/// composed) guarantee at each order; ties go to the smaller order.
pub fn minimize_epsilon<T, F>(
    grid: &[RenyiOrder<T>],
    delta: T,
    mut curve: F,
) -> Result<(GpGuarantee<T>, RenyiOrder<T>)>
where
    T: Real,
    F: FnMut(RenyiOrder<T>) -> Result<RgpGuarantee<T>>,
{
    let mut best: Option<(GpGuarantee<T>, RenyiOrder<T>)> = None;
    for &alpha in grid {
        let gp = rgp_to_gp(&curve(alpha)?, delta)?;
        let better = match &best {
            None => true,
            Some((cur, cur_alpha)) => {
                gp.epsilon < cur.epsilon || (gp.epsilon == cur.epsilon && alpha < *cur_alpha)
            }
        };
        if better {
            best = Some((gp, alpha));
        }
    }
    best.ok_or_else(|| Error::usage("alpha grid must not be empty"))
}

/// T-fold composed guarantee of the query at one order.
pub fn composed_rgp<T: Real>(query: &AccountingQuery<T>, alpha: RenyiOrder<T>) -> Result<RgpGuarantee<T>> {
    let single = account_mechanism(query, alpha)?;
    RgpGuarantee::new(single.m, alpha, compose(single.tau, query.iterations))
}

/// Smallest ε over the query's α grid, with the order that achieves it.
pub fn best_gp<T: Real>(query: &AccountingQuery<T>) -> Result<(GpGuarantee<T>, RenyiOrder<T>)> {
    query.validate()?;
    minimize_epsilon(&query.alpha_grid, query.delta, |alpha| composed_rgp(query, alpha))
}
