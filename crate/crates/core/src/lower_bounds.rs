//! Lower bounds on the subsampled group divergence.
//!
//! Take `D` to be all zeros and `D'` to be `D` plus `m` ones, and release the
//! sum. The number of added records that survive sampling is
//! `Binomial(m, q)`, so `M(D) ~ μ_0` and `M(D') ~ Σ_k p_k μ_k`, where `μ_k`
//! is the noise law shifted by `k`. Any valid upper bound must dominate
//!
//! ```text
//! D_α(M(D') ‖ M(D)) = 1/(α-1) · log ∫ μ_0^(1-α) (Σ_k p_k μ_k)^α
//! ```
//!
//! which is evaluated here by quadrature (continuous noise) or by direct
//! summation (integer and binary outputs).

use crate::mechanisms::{MechanismSpec, RenyiOrder};
use crate::numerics::{
    integrate_log_pieces, log_add_exp, log_binomial_weights, skellam_log_pmf_table, LogSumExp,
    QUADRATURE_WINDOW,
};
use crate::rgp::{compose, AccountingQuery, RgpGuarantee};
use crate::{Error, Real, Result};

/// A finite mixture of shifted copies of one noise law.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec<T> {
    /// `log p_k`; must sum (in linear space) to one.
    pub log_weights: Vec<T>,
    /// Location of component `k`.
    pub shifts: Vec<T>,
    pub base: MechanismSpec<T>,
}

// Peaks of μ_0^(1-α) μ_s^α sit one noise scale wide; breakpoints this many
// scales either side keep the adaptive integrator from stepping over them.
const PEAK_HALF_WIDTH: f64 = 8.0;

// A Skellam sum is accepted once both end terms are this far (in nats)
// below the largest one.
const SUM_EDGE_GAP: f64 = 40.0;
const SUM_MAX_HALF_WIDTH: i64 = 1 << 26;

impl<T: Real> MixtureSpec<T> {
    pub fn new(log_weights: Vec<T>, shifts: Vec<T>, base: MechanismSpec<T>) -> Result<Self> {
        if log_weights.is_empty() || log_weights.len() != shifts.len() {
            return Err(Error::usage("mixture needs as many shifts as weights, and at least one"));
        }
        if shifts.iter().any(|s| !s.is_finite()) || log_weights.iter().any(|w| w.is_nan()) {
            return Err(Error::usage("mixture shifts must be finite and weights must not be NaN"));
        }
        let total = log_weights.iter().copied().collect::<LogSumExp<T>>().value();
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
        if !(total.abs() <= tol) {
            return Err(Error::usage(format!("mixture weights sum to exp({total}), not one")));
        }
        Ok(MixtureSpec { log_weights, shifts, base: base.validated()? })
    }

    /// The `Binomial(m, q)` mixture of the sum query over zero/one records.
    /// Skellam components are spaced by the sensitivity `C`.
    pub fn worst_case(m: u64, q: T, base: MechanismSpec<T>) -> Result<Self> {
        if m == 0 {
            return Err(Error::usage("group size must be >= 1"));
        }
        let step = T::lit(base.sensitivity_c().max(1) as f64);
        let shifts = (0..=m).map(|k| T::from_count(k) * step).collect();
        MixtureSpec::new(log_binomial_weights(m, q)?, shifts, base)
    }

    /// `D_α(Σ_k p_k μ_k ‖ μ_0)`, clamped at zero.
    pub fn divergence(&self, alpha: RenyiOrder<T>) -> Result<T> {
        let log_integral = match self.base {
            MechanismSpec::Gaussian { sigma } => self.gaussian_log_integral(alpha, sigma)?,
            MechanismSpec::Laplace { b } => self.laplace_log_integral(alpha, b)?,
            MechanismSpec::Skellam { mu, sensitivity_c } => {
                let c = T::lit(sensitivity_c as f64);
                self.skellam_log_sum(alpha, c * c * mu)?
            }
            MechanismSpec::RandomizedResponse { p } => self.rr_log_sum(alpha, p),
        };
        if !log_integral.is_finite() {
            return Err(Error::numerical("lower-bound integral is not finite", log_integral.as_f64()));
        }
        Ok((log_integral / (alpha.get() - T::one())).max(T::zero()))
    }

    fn components(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.log_weights.iter().copied().zip(self.shifts.iter().copied())
    }

    // Mixes `(1-α) f(z) + α log Σ_k p_k exp(f(z - s_k))` for a log density f.
    fn log_integrand<'a>(&'a self, alpha: T, log_density: impl Fn(T) -> T + 'a) -> impl Fn(T) -> T + 'a {
        move |z| {
            let mix: LogSumExp<T> = self.components().map(|(w, s)| w + log_density(z - s)).collect();
            (T::one() - alpha) * log_density(z) + alpha * mix.value()
        }
    }

    fn shift_range(&self, alpha: T) -> (T, T) {
        self.shifts.iter().fold((T::zero(), T::zero()), |(lo, hi), &s| {
            (lo.min(s).min(alpha * s), hi.max(s).max(alpha * s))
        })
    }

    fn gaussian_log_integral(&self, alpha: RenyiOrder<T>, sigma: T) -> Result<T> {
        let a = alpha.get();
        let norm = -(sigma * (T::lit(2.0) * T::PI()).sqrt()).ln();
        let inv = (T::lit(2.0) * sigma * sigma).recip();
        let integrand = self.log_integrand(a, move |x| norm - x * x * inv);

        let (lo, hi) = self.shift_range(a);
        let pad = T::lit(QUADRATURE_WINDOW) * sigma;
        let half = T::lit(PEAK_HALF_WIDTH) * sigma;
        let (lo, hi) = (lo - pad, hi + pad);
        let mut points = vec![lo, hi];
        for &s in &self.shifts {
            let peak = a * s;
            points.extend([s, peak, peak - half, peak + half]);
        }
        points.retain(|p| *p >= lo && *p <= hi);
        Ok(integrate_log_pieces(integrand, &points)?.ln())
    }

    fn laplace_log_integral(&self, alpha: RenyiOrder<T>, b: T) -> Result<T> {
        let norm = -(T::lit(2.0) * b).ln();
        let integrand = self.log_integrand(alpha.get(), move |x| norm - x.abs() / b);

        // The integrand peaks at the shifts and decays on scale b beyond them.
        let (lo, hi) = self
            .shifts
            .iter()
            .fold((T::zero(), T::zero()), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        let pad = T::lit(QUADRATURE_WINDOW) * b;
        let mut points = vec![lo - pad, hi + pad, T::zero()];
        points.extend(self.shifts.iter().copied());
        Ok(integrate_log_pieces(integrand, &points)?.ln())
    }

    fn skellam_log_sum(&self, alpha: RenyiOrder<T>, variance: T) -> Result<T> {
        let a = alpha.get();
        let shifts: Vec<i64> = self
            .shifts
            .iter()
            .map(|&s| {
                s.to_i64()
                    .filter(|i| T::lit(*i as f64) == s)
                    .ok_or_else(|| Error::usage(format!("Skellam mixture shifts must be integers (got {s})")))
            })
            .collect::<Result<_>>()?;
        let lo_shift = shifts.iter().copied().min().unwrap_or(0).min(0);
        let hi_shift = shifts.iter().copied().max().unwrap_or(0).max(0);
        let span = (hi_shift - lo_shift) as f64;

        let mut half = (a.as_f64() * span + 15.0 * variance.as_f64().sqrt()).ceil() as i64 + 30;
        loop {
            let (z_lo, z_hi) = (lo_shift - half, hi_shift + half);
            let max_abs = (z_lo.unsigned_abs().max(z_hi.unsigned_abs()) + (hi_shift - lo_shift) as u64) as usize;
            let table = skellam_log_pmf_table(variance, max_abs)?;
            let lp = |x: i64| table[x.unsigned_abs() as usize];

            let mut acc = LogSumExp::new();
            let mut peak = T::neg_infinity();
            let mut edges = (T::zero(), T::zero());
            for z in z_lo..=z_hi {
                let mix: LogSumExp<T> = self.log_weights.iter().zip(&shifts).map(|(&w, &s)| w + lp(z - s)).collect();
                let term = (T::one() - a) * lp(z) + a * mix.value();
                acc.add(term);
                peak = peak.max(term);
                if z == z_lo {
                    edges.0 = term;
                }
                if z == z_hi {
                    edges.1 = term;
                }
            }
            let gap = T::lit(SUM_EDGE_GAP);
            if edges.0 < peak - gap && edges.1 < peak - gap {
                return Ok(acc.value());
            }
            if half >= SUM_MAX_HALF_WIDTH {
                return Err(Error::numerical(
                    "Skellam lower-bound sum did not decay within the truncation limit",
                    acc.value().as_f64(),
                ));
            }
            half *= 2;
        }
    }

    // Binary output: component 0 reports truthfully with probability p,
    // every other component reports the flipped bit with probability p.
    fn rr_log_sum(&self, alpha: RenyiOrder<T>, p: T) -> T {
        let a = alpha.get();
        let mut stay = LogSumExp::new();
        let mut moved = LogSumExp::new();
        for (w, s) in self.components() {
            if s == T::zero() {
                stay.add(w);
            } else {
                moved.add(w);
            }
        }
        let (ls, lm) = (stay.value(), moved.value());
        let (lp, lq) = (p.ln(), (-p).ln_1p());
        let term = |own: T, other: T| (T::one() - a) * own + a * log_add_exp(ls + own, lm + other);
        log_add_exp(term(lp, lq), term(lq, lp))
    }
}

pub fn gaussian_lower_bound<T: Real>(m: u64, alpha: RenyiOrder<T>, q: T, sigma: T) -> Result<T> {
    lower_bound(MechanismSpec::gaussian(sigma)?, m, alpha, q)
}

pub fn laplace_lower_bound<T: Real>(m: u64, alpha: RenyiOrder<T>, q: T, b: T) -> Result<T> {
    lower_bound(MechanismSpec::laplace(b)?, m, alpha, q)
}

/// Components are shifted by `kC` and have variance `C²μ` (each Poisson part
/// with mean `C²μ/2`), the same scale `μ` as in the upper bound. Reading `μ`
/// as half the variance instead would make the noise look larger here than
/// in the upper bound.
pub fn skellam_lower_bound<T: Real>(m: u64, alpha: RenyiOrder<T>, q: T, mu: T, sensitivity_c: u32) -> Result<T> {
    lower_bound(MechanismSpec::skellam(mu, sensitivity_c)?, m, alpha, q)
}

pub fn rr_lower_bound<T: Real>(m: u64, alpha: RenyiOrder<T>, q: T, p: T) -> Result<T> {
    lower_bound(MechanismSpec::randomized_response(p)?, m, alpha, q)
}

/// Single-iteration lower bound for any supported mechanism.
pub fn lower_bound<T: Real>(mechanism: MechanismSpec<T>, m: u64, alpha: RenyiOrder<T>, q: T) -> Result<T> {
    MixtureSpec::worst_case(m, q, mechanism)?.divergence(alpha)
}

/// T-fold lower bound: the construction is a product of identical steps, so
/// the divergence adds up.
pub fn lower_bound_rgp<T: Real>(query: &AccountingQuery<T>, alpha: RenyiOrder<T>) -> Result<RgpGuarantee<T>> {
    query.validate()?;
    let single = lower_bound(query.mechanism, query.m, alpha, query.q)?;
    RgpGuarantee::new(query.m, alpha, compose(single, query.iterations))
}
