//! Brute-force reference computations, deliberately naive: linear-space
//! sums, fixed-step trapezoids and explicit convolutions.

#![allow(dead_code)]

pub fn binomial_pmf(m: u64, q: f64) -> Vec<f64> {
    let mut c = 1.0f64;
    (0..=m)
        .map(|k| {
            if k > 0 {
                c = c * (m - k + 1) as f64 / k as f64;
            }
            c * q.powi(k as i32) * (1.0 - q).powi((m - k) as i32)
        })
        .collect()
}

fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> f64 {
    let n = ((hi - lo) / step).ceil() as usize;
    let h = (hi - lo) / n as f64;
    let mut total = 0.5 * (f(lo) + f(hi));
    for i in 1..n {
        total += f(lo + i as f64 * h);
    }
    total * h
}

fn mixture_divergence(density: impl Fn(f64) -> f64, m: u64, q: f64, alpha: f64, lo: f64, hi: f64) -> f64 {
    let p = binomial_pmf(m, q);
    let integrand = |z: f64| {
        let base = density(z);
        let mix: f64 = p.iter().enumerate().map(|(k, pk)| pk * density(z - k as f64)).sum();
        if base == 0.0 || mix == 0.0 {
            // Far tail; both factors have underflowed.
            return 0.0;
        }
        ((1.0 - alpha) * base.ln() + alpha * mix.ln()).exp()
    };
    trapezoid(integrand, lo, hi, 1e-4).ln() / (alpha - 1.0)
}

pub fn gaussian_mixture_divergence(m: u64, q: f64, alpha: f64, sigma: f64) -> f64 {
    let density = |x: f64| (-x * x / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    mixture_divergence(density, m, q, alpha, -40.0 * sigma, alpha * m as f64 + 40.0 * sigma)
}

pub fn laplace_mixture_divergence(m: u64, q: f64, alpha: f64, b: f64) -> f64 {
    let density = |x: f64| (-x.abs() / b).exp() / (2.0 * b);
    mixture_divergence(density, m, q, alpha, -40.0 * b, m as f64 + 40.0 * b)
}

/// Difference of two independent Poisson(mean) variables, by explicit
/// convolution of truncated pmf arrays. Index `i` holds `z = i - len + 1`.
pub fn poisson_difference_pmf(mean: f64, len: usize) -> Vec<f64> {
    let mut pois = vec![0.0; len];
    pois[0] = (-mean).exp();
    for j in 1..len {
        pois[j] = pois[j - 1] * mean / j as f64;
    }
    let mut out = vec![0.0; 2 * len - 1];
    for (a, pa) in pois.iter().enumerate() {
        for (b, pb) in pois.iter().enumerate() {
            out[a + len - 1 - b] += pa * pb;
        }
    }
    out
}

/// Mixture divergence with Skellam noise of variance `mu` (unit shifts).
pub fn skellam_mixture_divergence(m: u64, q: f64, alpha: f64, mu: f64) -> f64 {
    let len = 120;
    let pmf = poisson_difference_pmf(mu / 2.0, len);
    let center = (len - 1) as i64;
    let at = |z: i64| {
        let i = z + center;
        if i < 0 || i as usize >= pmf.len() {
            0.0
        } else {
            pmf[i as usize]
        }
    };
    let p = binomial_pmf(m, q);
    let mut total = 0.0;
    for z in -center..=center + m as i64 {
        let base = at(z);
        if base == 0.0 {
            continue;
        }
        let mix: f64 = p.iter().enumerate().map(|(k, pk)| pk * at(z - k as i64)).sum();
        total += base.powf(1.0 - alpha) * mix.powf(alpha);
    }
    total.ln() / (alpha - 1.0)
}

/// `D_α(Lap(k, b) ‖ Lap(0, b))` by quadrature.
pub fn laplace_shift_divergence(k: f64, alpha: f64, b: f64) -> f64 {
    let f = |z: f64| {
        let p = (-(z - k).abs() / b).exp() / (2.0 * b);
        let q = (-z.abs() / b).exp() / (2.0 * b);
        p.powf(alpha) * q.powf(1.0 - alpha)
    };
    trapezoid(f, -60.0 * b, k + 60.0 * b, 1e-4).ln() / (alpha - 1.0)
}

/// Subsampled bound as a plain linear-space sum; small `m` only.
pub fn subsampled_bound_direct(m: u64, q: f64, alpha: f64, tau_star: impl Fn(u64) -> f64) -> f64 {
    let p = binomial_pmf(m, q);
    let total: f64 = p.iter().enumerate().map(|(k, pk)| pk * ((alpha - 1.0) * tau_star(k as u64)).exp()).sum();
    total.ln() / (alpha - 1.0)
}

/// Tight subsampled-Gaussian RDP at integer order, linear space.
pub fn gaussian_rdp_direct(alpha: u64, q: f64, sigma: f64) -> f64 {
    let p = binomial_pmf(alpha, q);
    let total: f64 = p
        .iter()
        .enumerate()
        .map(|(i, pi)| pi * (((i * i - i) as f64) / (2.0 * sigma * sigma)).exp())
        .sum();
    total.ln() / (alpha as f64 - 1.0)
}
