//! Inverse accounting: find the least noise that meets a privacy target.
//!
//! Every accountant here is monotone in the noise parameter, so a bisection
//! over a fixed bracket suffices. Scale parameters (σ, b, μ) are searched in
//! log space; the randomized-response keep probability `p` linearly, with
//! "more noise" meaning smaller `p`.

use std::fmt;
use std::str::FromStr;

use crate::baseline::baseline_rgp;
use crate::lower_bounds::lower_bound_rgp;
use crate::mechanisms::{MechanismKind, RenyiOrder};
use crate::rgp::{composed_rgp, minimize_epsilon, rgp_to_gp, AccountingQuery, GpGuarantee, RgpGuarantee};
use crate::{Error, Real, Result};

/// Which bound to account with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Accountant {
    /// The subsampled group bound.
    Ours,
    /// Subsampled RDP followed by the black-box group conversion.
    Baseline,
    /// The worst-case-pair divergence; not a privacy guarantee.
    LowerBound,
}

impl Accountant {
    pub const ALL: [Accountant; 3] = [Accountant::Ours, Accountant::Baseline, Accountant::LowerBound];

    pub fn name(self) -> &'static str {
        match self {
            Accountant::Ours => "ours",
            Accountant::Baseline => "baseline",
            Accountant::LowerBound => "lower_bound",
        }
    }

    /// T-fold guarantee at one order. The baseline reports its rounded-up
    /// group size in `m`.
    pub fn rgp<T: Real>(self, query: &AccountingQuery<T>, alpha: RenyiOrder<T>) -> Result<RgpGuarantee<T>> {
        match self {
            Accountant::Ours => composed_rgp(query, alpha),
            Accountant::Baseline => baseline_rgp(query, alpha),
            Accountant::LowerBound => lower_bound_rgp(query, alpha),
        }
    }
}

impl fmt::Display for Accountant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Accountant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ours" => Ok(Accountant::Ours),
            "baseline" => Ok(Accountant::Baseline),
            "lower" | "lower_bound" | "lower-bound" => Ok(Accountant::LowerBound),
            other => Err(Error::usage(format!(
                "unknown accountant '{other}' (expected ours, baseline or lower)"
            ))),
        }
    }
}

/// Fixed Rényi order, or the best order of the query's grid for its δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderChoice<T> {
    Fixed(RenyiOrder<T>),
    Best,
}

/// A guarantee in both forms, at the same order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assessment<T> {
    pub rgp: RgpGuarantee<T>,
    pub gp: GpGuarantee<T>,
}

pub fn assess<T: Real>(
    accountant: Accountant,
    query: &AccountingQuery<T>,
    choice: OrderChoice<T>,
) -> Result<Assessment<T>> {
    query.validate()?;
    let alpha = match choice {
        OrderChoice::Fixed(alpha) => alpha,
        OrderChoice::Best => minimize_epsilon(&query.alpha_grid, query.delta, |a| accountant.rgp(query, a))?.1,
    };
    let rgp = accountant.rgp(query, alpha)?;
    let gp = rgp_to_gp(&rgp, query.delta)?;
    Ok(Assessment { rgp, gp })
}

/// What the calibrated mechanism has to satisfy. The target's group size
/// replaces the query's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target<T> {
    /// `τ` at the given order must not exceed the target's.
    Rgp(RgpGuarantee<T>),
    /// The best ε over the query's grid at the target's δ must not exceed
    /// the target's.
    Gp(GpGuarantee<T>),
}

impl<T: Real> Target<T> {
    pub fn m(&self) -> u64 {
        match self {
            Target::Rgp(g) => g.m,
            Target::Gp(g) => g.m,
        }
    }

    fn bound(&self) -> T {
        match self {
            Target::Rgp(g) => g.tau,
            Target::Gp(g) => g.epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration<T> {
    /// σ, b, μ or p.
    pub noise: T,
    /// τ or ε reached at `noise`.
    pub achieved: T,
    pub alpha_used: RenyiOrder<T>,
    /// Group size the accountant actually certified.
    pub effective_m: u64,
}

const SCALE_BRACKET: (f64, f64) = (1e-3, 1e9);
const SCALE_REL_WIDTH: f64 = 1e-6;
const RR_MARGIN: f64 = 1e-9;
const MAX_BISECTIONS: usize = 200;

/// Smallest noise (largest `p` for randomized response) whose guarantee under
/// `accountant` meets `target`. The template's noise value is ignored.
pub fn calibrate<T: Real>(
    template: &AccountingQuery<T>,
    target: Target<T>,
    accountant: Accountant,
) -> Result<Calibration<T>> {
    let mut base = template.clone();
    base.m = target.m();
    let choice = match target {
        Target::Rgp(g) => OrderChoice::Fixed(g.alpha),
        Target::Gp(g) => {
            base.delta = g.delta;
            OrderChoice::Best
        }
    };
    base.validate()?;
    let goal = target.bound();
    if !goal.is_finite() {
        return Err(Error::usage(format!("calibration target must be finite (got {goal})")));
    }

    let eval = |noise: T| -> Result<(T, Calibration<T>)> {
        let query = AccountingQuery { mechanism: base.mechanism.with_noise(noise)?, ..base.clone() };
        let a = assess(accountant, &query, choice)?;
        let value = match target {
            Target::Rgp(_) => a.rgp.tau,
            Target::Gp(_) => a.gp.epsilon,
        };
        Ok((value, Calibration { noise, achieved: value, alpha_used: a.rgp.alpha, effective_m: a.rgp.m }))
    };

    let rr = base.mechanism.kind() == MechanismKind::RandomizedResponse;
    // (most noise, least noise)
    let (noisy, quiet) = if rr {
        let margin = T::lit(RR_MARGIN).max(T::epsilon());
        (T::lit(0.5) + margin, T::one() - margin)
    } else {
        (T::lit(SCALE_BRACKET.1), T::lit(SCALE_BRACKET.0))
    };
    let (noisy_value, noisy_cal) = eval(noisy)?;
    let (quiet_value, quiet_cal) = eval(quiet)?;
    if quiet_value < noisy_value {
        return Err(Error::numerical(
            format!("{accountant} accountant is not monotone in the noise parameter over the search bracket"),
            quiet_value.as_f64(),
        ));
    }
    if noisy_value > goal {
        return Err(Error::Infeasible {
            message: format!("{accountant} cannot reach {goal} with any {} in the search bracket", base.mechanism.kind().noise_name()),
            best: noisy_value.as_f64(),
            worst: quiet_value.as_f64(),
        });
    }
    if quiet_value <= goal {
        return Ok(quiet_cal);
    }

    // Invariant: `good` meets the goal, `bad` does not.
    let (mut good, mut bad) = ((noisy, noisy_cal), quiet);
    for _ in 0..MAX_BISECTIONS {
        let done = if rr {
            (bad - good.0).abs() < T::lit(RR_MARGIN).max(T::epsilon() * T::lit(2.0))
        } else {
            good.0 / bad - T::one() < T::lit(SCALE_REL_WIDTH).max(T::epsilon() * T::lit(4.0))
        };
        if done {
            return Ok(good.1);
        }
        let mid = if rr {
            (good.0 + bad) / T::lit(2.0)
        } else {
            ((good.0.ln() + bad.ln()) / T::lit(2.0)).exp()
        };
        if mid == good.0 || mid == bad {
            return Ok(good.1);
        }
        let (value, cal) = eval(mid)?;
        if value <= goal {
            good = (mid, cal);
        } else {
            bad = mid;
        }
    }
    Err(Error::numerical("calibration bisection did not converge", good.0.as_f64()))
}
