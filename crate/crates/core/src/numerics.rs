//! Log-domain scalar kernels shared by every accountant.
//!
//! All probability-weighted sums in this crate are carried in log space: the
//! binomial mixtures behind the subsampled bounds reach orders in the tens of
//! thousands, where the linear-space terms overflow long before the final
//! divergence does.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::Mul;
use std::sync::{Arc, RwLock};

use crate::{Error, Real, Result};

/// Natural logarithm of a nonnegative quantity.
///
/// `LogWeight::zero()` (negative infinity) represents an exact zero and is
/// absorbed by [`log_sum_exp`].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[repr(transparent)]
pub struct LogWeight<T>(pub T);

impl<T: Real> LogWeight<T> {
    pub fn zero() -> Self {
        LogWeight(T::neg_infinity())
    }

    pub fn one() -> Self {
        LogWeight(T::zero())
    }

    pub fn from_linear(x: T) -> Self {
        LogWeight(x.ln())
    }

    #[inline]
    pub fn ln(self) -> T {
        self.0
    }

    pub fn to_linear(self) -> T {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == T::neg_infinity()
    }
}

impl<T: Real> Mul for LogWeight<T> {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        LogWeight(self.0 + rhs.0)
    }
}

/// Streaming log-sum-exp accumulator.
///
/// Keeps the running maximum and a sum scaled by it, so a single pass over
/// the terms suffices.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp<T> {
    max: T,
    scaled: T,
}

impl<T: Real> Default for LogSumExp<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> LogSumExp<T> {
    pub fn new() -> Self {
        LogSumExp {
            max: T::neg_infinity(),
            scaled: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        if x.is_nan() {
            self.max = x;
            return;
        }
        if x == T::neg_infinity() || self.max.is_nan() || self.max == T::infinity() {
            return;
        }
        if x > self.max {
            self.scaled = self.scaled * (self.max - x).exp() + T::one();
            self.max = x;
        } else {
            self.scaled = self.scaled + (x - self.max).exp();
        }
    }

    pub fn value(&self) -> T {
        if self.max == T::neg_infinity() || !self.max.is_finite() {
            self.max
        } else {
            self.max + self.scaled.ln()
        }
    }
}

impl<T: Real> FromIterator<T> for LogSumExp<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = LogSumExp::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// `log(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp<T: Real>(a: T, b: T) -> T {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == T::neg_infinity() {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `log(1 - exp(x))` for `x <= 0`.
#[inline]
pub fn log1m_exp<T: Real>(x: T) -> T {
    if x > -T::LN_2() {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `log(exp(x) - 1)` for `x > 0`, stable for large `x`.
#[inline]
pub fn log_expm1<T: Real>(x: T) -> T {
    if x > T::lit(30.0) {
        x + log1m_exp(-x)
    } else {
        x.exp_m1().ln()
    }
}

/// `log(Σ exp(term_i))` via the max-subtraction trick.
pub fn log_sum_exp<T, I>(terms: I) -> Result<LogWeight<T>>
where
    T: Real,
    I: IntoIterator<Item = LogWeight<T>>,
{
    let mut acc = LogSumExp::new();
    let mut seen = false;
    for t in terms {
        seen = true;
        acc.add(t.ln());
    }
    if !seen {
        return Err(Error::usage("log_sum_exp of an empty sequence"));
    }
    Ok(LogWeight(acc.value()))
}

// ln(n!) table shared across threads; grown on demand.
static LN_FACTORIALS: RwLock<Option<Arc<Vec<f64>>>> = RwLock::new(None);
const LN_FACTORIAL_CACHE_LIMIT: usize = 1 << 24;

fn build_ln_factorials(len: usize) -> Vec<f64> {
    // ln_gamma(1) and ln_gamma(2) come back a few ulps off zero.
    (0..len)
        .map(|n| match n {
            0 | 1 => 0.0,
            _ => statrs::function::gamma::ln_gamma(n as f64 + 1.0),
        })
        .collect()
}

/// Table of `ln(j!)` for `j = 0..=n`.
pub(crate) fn ln_factorials(n: usize) -> Arc<Vec<f64>> {
    if let Some(table) = LN_FACTORIALS.read().unwrap().as_ref() {
        if table.len() > n {
            return Arc::clone(table);
        }
    }
    if n >= LN_FACTORIAL_CACHE_LIMIT {
        return Arc::new(build_ln_factorials(n + 1));
    }
    let mut guard = LN_FACTORIALS.write().unwrap();
    if let Some(table) = guard.as_ref() {
        if table.len() > n {
            return Arc::clone(table);
        }
    }
    let len = (n + 1).next_power_of_two().clamp(1024, LN_FACTORIAL_CACHE_LIMIT);
    let table = Arc::new(build_ln_factorials(len));
    *guard = Some(Arc::clone(&table));
    table
}

/// `log C(m, k)`.
pub fn log_binomial<T: Real>(m: u64, k: u64) -> Result<LogWeight<T>> {
    if k > m {
        return Err(Error::usage(format!(
            "log_binomial requires k <= m (got m={m}, k={k})"
        )));
    }
    let table = ln_factorials(m as usize);
    let (m, k) = (m as usize, k as usize);
    Ok(LogWeight(T::lit(table[m] - table[k] - table[m - k])))
}

/// Log-probabilities of `Binomial(n, q)` at `k = 0..=n`.
///
/// Interior terms use the saddle-point form (Stirling-series remainders plus
/// deviance terms) rather than differences of `ln(n!)`, whose absolute
/// rounding error reaches 1e-9 once `n` is near a million.
pub fn log_binomial_weights<T: Real>(n: u64, q: T) -> Result<Vec<T>> {
    if !(q >= T::zero() && q <= T::one()) {
        return Err(Error::usage(format!(
            "binomial success probability must lie in [0, 1] (got {q})"
        )));
    }
    let ln_q = q.ln();
    let ln_1mq = (-q).ln_1p();
    let nn = n as usize;
    if q == T::zero() || q == T::one() {
        return Ok((0..=nn)
            .map(|k| weighted(k, ln_q) + weighted(nn - k, ln_1mq))
            .collect());
    }
    let (p, nf) = (q.as_f64(), n as f64);
    let (mean, mean_c) = (nf * p, nf * (1.0 - p));
    let head = stirling_error(nf);
    Ok((0..=nn)
        .map(|k| {
            if k == 0 || k == nn {
                return weighted(k, ln_q) + weighted(nn - k, ln_1mq);
            }
            let (x, y) = (k as f64, (nn - k) as f64);
            let lc = head - stirling_error(x) - stirling_error(y) - deviance(x, mean) - deviance(y, mean_c);
            let lf = (2.0 * std::f64::consts::PI).ln() + x.ln() + (-x / nf).ln_1p();
            T::lit(lc - 0.5 * lf)
        })
        .collect())
}

// ln(n!) - [(n + 1/2) ln n - n + ln sqrt(2 pi)] at integer n.
fn stirling_error(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        let table = ln_factorials(15);
        let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        return table[n as usize] - (n + 0.5) * n.ln() + n - half_ln_2pi;
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

// x ln(x / mean) + mean - x, summed as a series when x is close to mean.
fn deviance(x: f64, mean: f64) -> f64 {
    if (x - mean).abs() < 0.1 * (x + mean) {
        let v = (x - mean) / (x + mean);
        let v2 = v * v;
        let mut s = (x - mean) * v;
        let mut ej = 2.0 * x * v;
        for j in 1..1000 {
            ej *= v2;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                return next;
            }
            s = next;
        }
        s
    } else {
        x * (x / mean).ln() + mean - x
    }
}

// count * ln_p with the 0 * (-inf) = 0 convention.
#[inline]
fn weighted<T: Real>(count: usize, ln_p: T) -> T {
    if count == 0 {
        T::zero()
    } else {
        T::lit(count as f64) * ln_p
    }
}

// ln(1e-16): series terms below this fraction of the running sum are dropped.
const SERIES_CUTOFF: f64 = -36.841_361_487_904_734;
const SERIES_MAX_TERMS: usize = 100_000_000;

/// `log I_order(x)` for the modified Bessel function of the first kind,
/// summed from the ascending series in log space.
pub fn log_bessel_i<T: Real>(order: u32, x: T) -> Result<LogWeight<T>> {
    if !x.is_finite() || x < T::zero() {
        return Err(Error::usage(format!(
            "log_bessel_i needs a finite nonnegative argument (got {x})"
        )));
    }
    if x == T::zero() {
        return Ok(if order == 0 {
            LogWeight::one()
        } else {
            LogWeight::zero()
        });
    }
    let ln_half_x = (x / T::lit(2.0)).ln();
    let nu = T::lit(order as f64);
    let table = ln_factorials(order as usize);
    // j = 0 term: (x/2)^order / order!
    let mut term = nu * ln_half_x - T::lit(table[order as usize]);
    let mut acc = LogSumExp::new();
    let cutoff = T::lit(SERIES_CUTOFF);
    for j in 0..SERIES_MAX_TERMS {
        acc.add(term);
        let jj = T::lit(j as f64);
        let step = T::lit(2.0) * ln_half_x - (jj + T::one()).ln() - (jj + nu + T::one()).ln();
        // Terms grow until j ~ x/2; only stop once they are shrinking.
        if step < T::zero() && term - acc.value() < cutoff {
            return Ok(LogWeight(acc.value()));
        }
        term = term + step;
    }
    Err(Error::numerical(
        "Bessel series did not converge",
        acc.value().as_f64(),
    ))
}

// Above this argument the ascending series is replaced by the large-x
// expansion when tabulating Skellam probabilities.
const BESSEL_SERIES_LIMIT: f64 = 700.0;

// log I_0(x) from the asymptotic expansion
// I_0(x) ~ e^x / sqrt(2 pi x) * Σ_k ((2k-1)!!)^2 / (k! (8x)^k).
fn log_bessel_i0_large<T: Real>(x: T) -> T {
    let mut term = T::one();
    let mut sum = T::one();
    let eight_x = T::lit(8.0) * x;
    for k in 1..64 {
        let kk = T::lit(k as f64);
        let odd = T::lit(2.0) * kk - T::one();
        let next = term * odd * odd / (kk * eight_x);
        if next >= term {
            break;
        }
        term = next;
        sum = sum + term;
        if term < T::epsilon() * sum {
            break;
        }
    }
    x - T::lit(0.5) * (T::lit(2.0) * T::PI() * x).ln() + sum.ln()
}

/// Log-pmf of the symmetric Skellam law with the given variance, tabulated at
/// `|z| = 0..=max_abs`.
///
/// The pmf is `exp(-v) I_|z|(v)`: the difference of two independent Poisson
/// variables each with mean `v / 2`. `I_0` comes from the series (or the
/// large-argument expansion), the remaining orders from the ratios
/// `I_{n+1}/I_n`, which are obtained by backward recurrence.
pub fn skellam_log_pmf_table<T: Real>(variance: T, max_abs: usize) -> Result<Vec<T>> {
    if !variance.is_finite() || variance < T::zero() {
        return Err(Error::usage(format!(
            "Skellam variance must be finite and nonnegative (got {variance})"
        )));
    }
    if variance == T::zero() {
        let mut out = vec![T::neg_infinity(); max_abs + 1];
        out[0] = T::zero();
        return Ok(out);
    }
    let x = variance;
    let log_i0 = if x.as_f64() <= BESSEL_SERIES_LIMIT {
        log_bessel_i(0, x)?.ln()
    } else {
        log_bessel_i0_large(x)
    };

    // Errors in the starting ratio contract by r_n^2 per step; starting this
    // far out leaves them below e^-50 by the time n reaches max_abs.
    let xf = x.as_f64();
    let start = ((max_abs as f64).powi(2) + 50.0 * xf).sqrt().ceil() as usize + 32;
    let two = T::lit(2.0);
    let n1 = T::lit(start as f64 + 1.0);
    let mut ratio = x / (n1 + (n1 * n1 + x * x).sqrt());
    let mut log_ratios = vec![T::zero(); max_abs];
    for n in (0..start).rev() {
        ratio = x / (two * T::lit(n as f64 + 1.0) + x * ratio);
        if n < max_abs {
            log_ratios[n] = ratio.ln();
        }
    }

    let mut out = Vec::with_capacity(max_abs + 1);
    let mut current = log_i0 - x;
    out.push(current);
    for lr in log_ratios {
        current = current + lr;
        out.push(current);
    }
    Ok(out)
}

/// Half-width of the integration window, in units of the integrand's spread.
pub const QUADRATURE_WINDOW: f64 = 40.0;

const QUADRATURE_REL_TOL: f64 = 1e-11;
const QUADRATURE_MAX_SEGMENTS: usize = 200_000;

/// `log ∫ exp(log_integrand(z)) dz` over `center ± 40·spread`.
pub fn integrate_real_line<T, F>(log_integrand: F, center: T, spread: T) -> Result<LogWeight<T>>
where
    T: Real,
    F: Fn(T) -> T,
{
    if !(spread > T::zero()) || !spread.is_finite() || !center.is_finite() {
        return Err(Error::usage(format!(
            "integration needs a finite center and positive spread (got {center}, {spread})"
        )));
    }
    let half = T::lit(QUADRATURE_WINDOW) * spread;
    integrate_log_pieces(log_integrand, &[center - half, center + half])
}

// Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment<T> {
    a: T,
    b: T,
    log_value: T,
    log_error: T,
}

impl<T: Real> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Real> Eq for Segment<T> {}
impl<T: Real> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.log_error
            .partial_cmp(&other.log_error)
            .unwrap_or(Ordering::Equal)
    }
}

fn kronrod_segment<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Result<Segment<T>> {
    let center = (a + b) / T::lit(2.0);
    let half = (b - a) / T::lit(2.0);
    let mut values = [T::zero(); 15];
    for (i, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * T::lit(x);
        values[2 * i] = f(center - dx);
        values[2 * i + 1] = f(center + dx);
    }
    values[14] = f(center);
    if values.iter().any(|v| v.is_nan() || *v == T::infinity()) {
        return Err(Error::numerical(
            format!("integrand not finite on [{a}, {b}]"),
            f64::NAN,
        ));
    }
    let shift = values.iter().copied().fold(T::neg_infinity(), T::max);
    if shift == T::neg_infinity() {
        return Ok(Segment {
            a,
            b,
            log_value: T::neg_infinity(),
            log_error: T::neg_infinity(),
        });
    }
    let lin = |v: T| (v - shift).exp();
    let mut kronrod = T::lit(WGK[7]) * lin(values[14]);
    let mut gauss = T::lit(WG[3]) * lin(values[14]);
    for i in 0..7 {
        let pair = lin(values[2 * i]) + lin(values[2 * i + 1]);
        kronrod = kronrod + T::lit(WGK[i]) * pair;
        if i % 2 == 1 {
            gauss = gauss + T::lit(WG[i / 2]) * pair;
        }
    }
    let ln_half = half.ln();
    Ok(Segment {
        a,
        b,
        log_value: shift + ln_half + kronrod.ln(),
        log_error: shift + ln_half + (kronrod - gauss).abs().ln(),
    })
}

/// Adaptive Gauss-Kronrod integration of `exp(log_integrand)` over the union
/// of the intervals delimited by `breakpoints`; returns the log of the
/// integral.
///
/// Breakpoints let callers pin kinks and narrow peaks of the integrand to
/// segment boundaries. They are sorted and deduplicated here.
pub fn integrate_log_pieces<T, F>(log_integrand: F, breakpoints: &[T]) -> Result<LogWeight<T>>
where
    T: Real,
    F: Fn(T) -> T,
{
    let mut points: Vec<T> = breakpoints.to_vec();
    if points.iter().any(|p| !p.is_finite()) || points.len() < 2 {
        return Err(Error::usage(
            "integration needs at least two finite breakpoints",
        ));
    }
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup();

    let mut heap = BinaryHeap::new();
    for w in points.windows(2) {
        heap.push(kronrod_segment(&log_integrand, w[0], w[1])?);
    }

    // The integrand's log values carry absolute rounding of about
    // |log value|·eps, and f32 cannot resolve 1e-11 at all; the target
    // relative error is never set below what the evaluations can deliver.
    let eps = T::epsilon();
    let tol = |value: T| {
        T::lit(QUADRATURE_REL_TOL)
            .max(eps * T::lit(256.0))
            .max(eps * T::lit(1024.0) * value.abs())
            .ln()
    };
    let totals = |heap: &BinaryHeap<Segment<T>>| {
        let value: LogSumExp<T> = heap.iter().map(|s| s.log_value).collect();
        let error: LogSumExp<T> = heap.iter().map(|s| s.log_error).collect();
        (value.value(), error.value())
    };
    let (mut value, mut error) = totals(&heap);

    // Running totals are kept relative to `reference` and resynchronised
    // periodically to shed cancellation error from the subtractions.
    let mut reference = value;
    let mut lin_value = (value - reference).exp();
    let mut lin_error = (error - reference).exp();
    let mut iterations = 0usize;
    loop {
        if value == T::neg_infinity() || error <= value + tol(value) {
            return Ok(LogWeight(value));
        }
        if heap.len() >= QUADRATURE_MAX_SEGMENTS {
            return Err(Error::numerical(
                "adaptive quadrature did not reach its tolerance",
                value.as_f64(),
            ));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = (worst.a + worst.b) / T::lit(2.0);
        if !(mid > worst.a && mid < worst.b) {
            // Segment can no longer be split in this precision.
            return Err(Error::numerical(
                "quadrature segment collapsed below machine resolution",
                value.as_f64(),
            ));
        }
        let left = kronrod_segment(&log_integrand, worst.a, mid)?;
        let right = kronrod_segment(&log_integrand, mid, worst.b)?;
        let rel = |v: T| (v - reference).exp();
        lin_value = lin_value - rel(worst.log_value) + rel(left.log_value) + rel(right.log_value);
        lin_error = lin_error - rel(worst.log_error) + rel(left.log_error) + rel(right.log_error);
        heap.push(left);
        heap.push(right);
        iterations += 1;

        if iterations % 64 == 0 || !(lin_value > T::zero()) || !(lin_error >= T::zero()) {
            (value, error) = totals(&heap);
            reference = value;
            lin_value = T::one();
            lin_error = (error - reference).exp();
        } else {
            value = reference + lin_value.ln();
            error = reference + lin_error.ln();
            if (value - reference).abs() > T::lit(300.0) {
                (value, error) = totals(&heap);
                reference = value;
                lin_value = T::one();
                lin_error = (error - reference).exp();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn lw(x: f64) -> LogWeight<f64> {
        LogWeight(x)
    }

    #[test]
    fn lse_small_cases() {
        let two = log_sum_exp([lw(0.0), lw(0.0)]).unwrap();
        assert_relative_eq!(two.ln(), 2f64.ln(), max_relative = 1e-15);

        let absorbed = log_sum_exp([LogWeight::zero(), lw(3f64.ln())]).unwrap();
        assert_relative_eq!(absorbed.ln(), 3f64.ln(), max_relative = 1e-15);

        let big = log_sum_exp([lw(1000.0), lw(1000.0)]).unwrap();
        assert_relative_eq!(big.ln(), 1000.0 + 2f64.ln(), max_relative = 1e-15);

        assert!(log_sum_exp(Vec::<LogWeight<f64>>::new()).is_err());
        let all_zero = log_sum_exp([LogWeight::<f64>::zero(), LogWeight::zero()]).unwrap();
        assert!(all_zero.is_zero());
    }

    #[test]
    fn log_add_and_sub_helpers() {
        assert_relative_eq!(log_add_exp(1.0f64.ln(), 2.0f64.ln()), 3f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(log1m_exp(-1e-20f64), (1e-20f64).ln(), max_relative = 1e-12);
        assert_relative_eq!(log1m_exp(-5.0f64), (1.0 - (-5.0f64).exp()).ln(), max_relative = 1e-14);
        assert_relative_eq!(log_expm1(200.0f64), 200.0, max_relative = 1e-15);
        assert_relative_eq!(log_expm1(0.1f64), (0.1f64.exp() - 1.0).ln(), max_relative = 1e-14);
    }

    #[test]
    fn log_binomial_small_and_errors() {
        assert_eq!(log_binomial::<f64>(5, 0).unwrap().ln(), 0.0);
        assert_relative_eq!(log_binomial::<f64>(5, 2).unwrap().ln(), 10f64.ln(), max_relative = 1e-13);
        assert!(log_binomial::<f64>(3, 4).is_err());
    }

    #[test]
    fn log_binomial_matches_big_integer() {
        use num_bigint::BigUint;
        // C(256, 128) exactly, then its natural log from the decimal digits.
        let mut c = BigUint::from(1u32);
        for i in 0..128u32 {
            c = c * BigUint::from(256 - i) / BigUint::from(i + 1);
        }
        let digits = c.to_string();
        let lead: f64 = format!("0.{}", &digits[..17]).parse().unwrap();
        let exact = lead.ln() + digits.len() as f64 * 10f64.ln();
        let got = log_binomial::<f64>(256, 128).unwrap().ln();
        assert_relative_eq!(got, exact, max_relative = 1e-10);
        assert_relative_eq!(got, 174.446_321_588_444_97, max_relative = 1e-12);
    }

    #[test]
    fn binomial_weights_normalise() {
        for &(m, q) in &[(1u64, 0.3f64), (16, 0.05), (256, 0.01), (5000, 0.2), (25_600, 0.05)] {
            let w = log_binomial_weights(m, q).unwrap();
            let total = w.iter().copied().collect::<LogSumExp<f64>>().value();
            assert!(total.abs() < 1e-10, "m={m} q={q} total={total}");
        }
        let degenerate = log_binomial_weights(4, 0.0f64).unwrap();
        assert_eq!(degenerate[0], 0.0);
        assert!(degenerate[1..].iter().all(|w| *w == f64::NEG_INFINITY));
        assert!(log_binomial_weights(4, 1.5f64).is_err());
    }

    #[test]
    fn bessel_reference_values() {
        assert_eq!(log_bessel_i(0, 0.0f64).unwrap().ln(), 0.0);
        assert!(log_bessel_i(0, 1e-300f64).unwrap().ln().abs() < 1e-15);
        assert!(log_bessel_i(3, 0.0f64).unwrap().is_zero());
        assert_relative_eq!(
            log_bessel_i(1, 2.0f64).unwrap().ln(),
            1.590_636_854_637_329_063_4f64.ln(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            log_bessel_i(10, 1.0f64).unwrap().ln(),
            -22.013_178_577_973_041_787_9,
            max_relative = 1e-10
        );
        assert!(log_bessel_i(0, f64::NAN).is_err());
        assert!(log_bessel_i(0, -1.0f64).is_err());
    }

    #[test]
    fn bessel_monotone_on_grid() {
        let xs = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 40.0, 150.0];
        for order in 0..8u32 {
            for w in xs.windows(2) {
                let a = log_bessel_i(order, w[0]).unwrap().ln();
                let b = log_bessel_i(order, w[1]).unwrap().ln();
                assert!(b > a, "I_{order} not increasing between {} and {}", w[0], w[1]);
            }
        }
        for &x in &xs {
            for order in 0..8u32 {
                let a = log_bessel_i(order, x).unwrap().ln();
                let b = log_bessel_i(order + 1, x).unwrap().ln();
                assert!(b < a, "I_n({x}) not decreasing in order at n={order}");
            }
        }
    }

    #[test]
    fn large_argument_expansion_agrees_with_series() {
        for &x in &[120.0f64, 400.0, 700.0] {
            let series = log_bessel_i(0, x).unwrap().ln();
            assert_relative_eq!(log_bessel_i0_large(x), series, max_relative = 1e-13);
        }
    }

    #[test]
    fn skellam_table_normalises_and_matches_series() {
        for &mu in &[1.0f64, 4.0, 16.0] {
            let table = skellam_log_pmf_table(mu, 200).unwrap();
            let total: f64 = table[0].exp() + 2.0 * table[1..].iter().map(|v| v.exp()).sum::<f64>();
            assert!((total - 1.0).abs() < 1e-10, "mu={mu} total={total}");
            for n in [0usize, 1, 3, 10, 25] {
                let direct = log_bessel_i(n as u32, mu).unwrap().ln() - mu;
                assert_relative_eq!(table[n], direct, max_relative = 1e-11, epsilon = 1e-12);
            }
        }
        let wide = skellam_log_pmf_table(2.5e5f64, 20_000).unwrap();
        let total: f64 = wide[0].exp() + 2.0 * wide[1..].iter().map(|v| v.exp()).sum::<f64>();
        assert!((total - 1.0).abs() < 1e-10, "total={total}");
    }

    #[test]
    fn quadrature_normalisation_and_moments() {
        let ln_sqrt_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        let gauss = integrate_real_line(|z: f64| -0.5 * z * z - ln_sqrt_2pi, 0.0, 1.0).unwrap();
        assert!(gauss.ln().abs() < 1e-8);

        let laplace = integrate_log_pieces(|z: f64| -z.abs() - 2f64.ln(), &[-40.0, 0.0, 40.0]).unwrap();
        assert!(laplace.ln().abs() < 1e-8);
        // Laplace kink left in the middle of a segment still converges.
        let laplace_mid = integrate_real_line(|z: f64| -z.abs() - 2f64.ln(), 0.3, 1.0).unwrap();
        assert!(laplace_mid.ln().abs() < 1e-8);

        let second_moment =
            integrate_real_line(|z: f64| -0.5 * z * z - ln_sqrt_2pi + 2.0 * z.abs().ln(), 0.0, 1.0).unwrap();
        assert!(second_moment.ln().abs() < 1e-8);
    }

    #[test]
    fn quadrature_handles_huge_log_scales() {
        // exp(5000 - z^2/2) integrates to 5000 + ln sqrt(2 pi).
        let got = integrate_real_line(|z: f64| 5000.0 - 0.5 * z * z, 0.0, 1.0).unwrap();
        assert_relative_eq!(got.ln(), 5000.0 + 0.5 * (2.0 * std::f64::consts::PI).ln(), max_relative = 1e-13);
        assert!(integrate_real_line(|z: f64| z, 0.0, -1.0).is_err());
        assert!(integrate_real_line(|_z: f64| f64::NAN, 0.0, 1.0).is_err());
    }

    #[test]
    fn f32_kernels() {
        let v = log_sum_exp([LogWeight(0.0f32), LogWeight(0.0f32)]).unwrap();
        assert!((v.ln() - 2f32.ln()).abs() < 1e-6);
        assert!((log_binomial::<f32>(5, 2).unwrap().ln() - 10f32.ln()).abs() < 1e-5);
        let norm = integrate_real_line(|z: f32| -0.5 * z * z - (2.0 * std::f32::consts::PI).sqrt().ln(), 0.0, 1.0).unwrap();
        assert!(norm.ln().abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn lse_translation_and_permutation(
            xs in proptest::collection::vec(-50.0f64..50.0, 1..20),
            shift in -500.0f64..500.0,
        ) {
            let base = log_sum_exp(xs.iter().map(|&x| LogWeight(x))).unwrap().ln();
            let shifted = log_sum_exp(xs.iter().map(|&x| LogWeight(x + shift))).unwrap().ln();
            prop_assert!((shifted - (base + shift)).abs() <= 1e-12 * (1.0 + base.abs() + shift.abs()));
            let mut rev = xs.clone();
            rev.reverse();
            let permuted = log_sum_exp(rev.iter().map(|&x| LogWeight(x))).unwrap().ln();
            prop_assert!((permuted - base).abs() <= 1e-12 * (1.0 + base.abs()));
        }

        #[test]
        fn pascal_identity(m in 2u64..3000, frac in 0.0f64..1.0) {
            let k = 1 + ((m - 1) as f64 * frac) as u64;
            let k = k.min(m - 1);
            let lhs = log_add_exp(
                log_binomial::<f64>(m - 1, k - 1).unwrap().ln(),
                log_binomial::<f64>(m - 1, k).unwrap().ln(),
            );
            let rhs = log_binomial::<f64>(m, k).unwrap().ln();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }

        #[test]
        fn binomial_normalisation(m in 1u64..2000, q in 1e-6f64..0.999_999) {
            let w = log_binomial_weights(m, q).unwrap();
            let total: f64 = w.iter().map(|x| x.exp()).sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
        }
    }
}
