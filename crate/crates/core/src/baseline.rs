//! Comparison accountant: subsampled RDP pushed through the black-box
//! RDP-to-group conversion, plus the basic DP-to-GP conversion.
//!
//! Groups of size `m` are handled by rounding up to `2^c`, `c = ⌈log₂ m⌉`,
//! and evaluating the RDP curve at order `α·2^c` with a `3^c` penalty.

use crate::mechanisms::{MechanismKind, MechanismSpec, RenyiOrder};
use crate::numerics::{log_binomial_weights, log_expm1, LogSumExp};
use crate::rgp::{account_mechanism, check_delta, AccountingQuery, GpGuarantee, RgpGuarantee};
use crate::{Error, Real, Result};

/// Tight RDP of the Poisson-subsampled Gaussian at integer order `α ≥ 2`:
/// `1/(α-1) · log Σ_i C(α,i) (1-q)^(α-i) q^i exp((i²-i)/(2σ²))`.
pub fn subsampled_gaussian_rdp<T: Real>(alpha: RenyiOrder<T>, q: T, sigma: T) -> Result<T> {
    let a = alpha
        .as_integer()
        .filter(|&a| a >= 2)
        .ok_or_else(|| Error::usage(format!("subsampled Gaussian RDP needs an integer order >= 2 (got {alpha})")))?;
    if !(sigma > T::zero() && sigma.is_finite()) {
        return Err(Error::usage(format!("sigma must be positive and finite (got {sigma})")));
    }
    let inv = (T::lit(2.0) * sigma * sigma).recip();
    let mut acc = LogSumExp::new();
    for (i, w) in log_binomial_weights(a, q)?.into_iter().enumerate() {
        let i = T::from_count(i as u64);
        acc.add(w + (i * i - i) * inv);
    }
    Ok((acc.value() / T::from_count(a - 1)).max(T::zero()))
}

/// `⌈log₂ m⌉` for `m ≥ 1`.
pub fn doubling_steps(m: u64) -> u32 {
    debug_assert!(m >= 1);
    u64::BITS - (m - 1).leading_zeros()
}

/// Converts an RDP curve into a group guarantee for `m_target` records.
///
/// The returned guarantee is stated for `2^c ≥ m_target` records.
pub fn rdp_to_rgp<T, F>(m_target: u64, alpha_target: RenyiOrder<T>, rdp_curve: F) -> Result<RgpGuarantee<T>>
where
    T: Real,
    F: FnOnce(RenyiOrder<T>) -> Result<T>,
{
    if m_target == 0 {
        return Err(Error::usage("group size must be >= 1"));
    }
    if alpha_target.get() < T::lit(2.0) {
        return Err(Error::ConversionInapplicable(format!(
            "group conversion needs alpha >= 2 (got {alpha_target})"
        )));
    }
    let c = doubling_steps(m_target);
    if c >= 64 {
        return Err(Error::usage(format!("group size {m_target} is too large to round to a power of two")));
    }
    let scale = T::lit(2f64.powi(c as i32));
    let inner = RenyiOrder::new(alpha_target.get() * scale)?;
    let tau = rdp_curve(inner)?;
    if !(tau >= T::zero() && tau.is_finite()) {
        return Err(Error::usage(format!("RDP curve returned {tau} at order {inner}")));
    }
    RgpGuarantee::new(1u64 << c, alpha_target, T::lit(3f64.powi(c as i32)) * tau)
}

/// `ε = m·ε'`, `δ = δ' (e^(mε') - 1)/(e^ε' - 1)`.
///
/// δ is returned as computed, even when it exceeds one.
pub fn basic_dp_to_gp<T: Real>(epsilon_prime: T, delta_prime: T, m: u64) -> Result<GpGuarantee<T>> {
    if !(epsilon_prime > T::zero() && epsilon_prime.is_finite()) {
        return Err(Error::usage(format!("epsilon' must be positive and finite (got {epsilon_prime})")));
    }
    check_delta(delta_prime)?;
    if m == 0 {
        return Err(Error::usage("group size must be >= 1"));
    }
    let epsilon = T::from_count(m) * epsilon_prime;
    let delta = if m == 1 {
        delta_prime
    } else {
        (log_expm1(epsilon) - log_expm1(epsilon_prime) + delta_prime.ln()).exp()
    };
    Ok(GpGuarantee { m, epsilon, delta })
}

/// Single-record RDP of the query's subsampled mechanism at `order`.
pub fn baseline_rdp<T: Real>(query: &AccountingQuery<T>, order: RenyiOrder<T>) -> Result<T> {
    match query.mechanism {
        MechanismSpec::Gaussian { sigma } => subsampled_gaussian_rdp(order, query.q, sigma),
        _ => {
            let single = AccountingQuery { m: 1, ..query.clone() };
            Ok(account_mechanism(&single, order)?.tau)
        }
    }
}

/// Baseline T-fold guarantee: compose the RDP curve, then convert to groups.
pub fn baseline_rgp<T: Real>(query: &AccountingQuery<T>, alpha: RenyiOrder<T>) -> Result<RgpGuarantee<T>> {
    query.validate()?;
    let iterations = T::from_count(query.iterations);
    rdp_to_rgp(query.m, alpha, |order| Ok(iterations * baseline_rdp(query, order)?))
}

/// Which RDP curve the baseline feeds into the group conversion.
pub fn baseline_curve_name(kind: MechanismKind) -> &'static str {
    match kind {
        MechanismKind::Gaussian => "tight subsampled-gaussian rdp",
        _ => "this crate's m=1 subsampled bound",
    }
}
