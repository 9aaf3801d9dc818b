//! Samplers and log-densities used by the Gibbs sweeps.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Open01, Poisson};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

/// Largest count for which [`crt_exact_pmf`] builds the Stirling table.
pub const CRT_PMF_CAP: u64 = 10_000;

/// Bernoulli terms of the table-count sum drawn one by one; beyond this the
/// remaining terms (each with success probability below `shape / 2^17`) are
/// drawn as a single Poisson with the same total mean.
pub const CRT_EXACT_TERMS: u64 = 1 << 17;

fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Open01.sample(rng)
}

/// Draws from Ga(shape, rate) (rate parameterisation).
///
/// Shapes below one go through `Ga(shape + 1) * U^(1/shape)` on the log scale
/// so that tiny shapes return the smallest positive float instead of zero.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    if !(shape > 0.0 && rate > 0.0) || shape.is_infinite() {
        // Lets a corrupted chain state surface as a non-finite error.
        return f64::NAN;
    }
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("valid gamma shape");
        let x = g.sample(rng) / rate;
        return x.max(f64::MIN_POSITIVE);
    }
    sample_log_gamma(shape, rate, rng).exp().clamp(f64::MIN_POSITIVE, f64::MAX)
}

/// Draws log X for X ~ Ga(shape, rate), staying finite where X itself would
/// underflow.
pub fn sample_log_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("valid gamma shape");
        return g.sample(rng).ln() - rate.ln();
    }
    let g = Gamma::new(shape + 1.0, 1.0).expect("valid gamma shape");
    g.sample(rng).ln() + open01(rng).ln() / shape - rate.ln()
}

/// Draws from the inverse-gamma law with density ∝ x^{-shape-1} e^{-scale/x}.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    (1.0 / sample_gamma(shape, scale, rng)).min(f64::MAX)
}

pub fn ln_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

pub fn ln_poisson_pmf(y: u64, mean: f64) -> f64 {
    let y = y as f64;
    if mean == 0.0 {
        return if y == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    y * mean.ln() - mean - ln_gamma(y + 1.0)
}

/// Draws a Poisson count; means beyond the `u64` range are clamped.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let mean = mean.min(1e18);
    let d = Poisson::new(mean).expect("positive finite Poisson mean");
    d.sample(rng) as u64
}

/// Parameters of the generalized inverse Gaussian law with density
/// ∝ x^{order-1} exp(-(linear_rate * x + inverse_rate / x) / 2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigParams {
    order: f64,
    linear_rate: f64,
    inverse_rate: f64,
}

impl GigParams {
    pub fn new(order: f64, linear_rate: f64, inverse_rate: f64) -> Result<Self> {
        if !order.is_finite() {
            return Err(Error::domain("order", order, "must be finite"));
        }
        if !(linear_rate > 0.0 && linear_rate.is_finite()) {
            return Err(Error::domain("linear_rate", linear_rate, "must be positive and finite"));
        }
        if !(inverse_rate >= 0.0 && inverse_rate.is_finite()) {
            return Err(Error::domain("inverse_rate", inverse_rate, "must be non-negative and finite"));
        }
        if inverse_rate == 0.0 && order <= 0.0 {
            return Err(Error::domain(
                "order",
                order,
                "must be positive when inverse_rate = 0 (density not normalizable)",
            ));
        }
        Ok(GigParams {
            order,
            linear_rate,
            inverse_rate,
        })
    }

    pub fn order(&self) -> f64 {
        self.order
    }
    pub fn linear_rate(&self) -> f64 {
        self.linear_rate
    }
    pub fn inverse_rate(&self) -> f64 {
        self.inverse_rate
    }

    /// Unnormalized log density.
    pub fn ln_kernel(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        (self.order - 1.0) * x.ln() - 0.5 * (self.linear_rate * x + self.inverse_rate / x)
    }
}

impl Distribution<f64> for GigParams {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_gig(self, rng)
    }
}

/// Draws one GIG variate.
///
/// Uses the standardized two-parameter form `Y = X / sqrt(b/a)` with
/// `omega = sqrt(a b)` and the reflection `GIG(-p) = 1 / GIG(p)`, then picks
/// one of three rejection schemes by region: ratio-of-uniforms with mode
/// shift, ratio-of-uniforms without shift, and a piecewise constant /
/// power / exponential hat for the non-log-concave corner (small order and
/// small omega). All three are exact.
pub fn sample_gig<R: Rng + ?Sized>(params: &GigParams, rng: &mut R) -> f64 {
    let p = params.order;
    let a = params.linear_rate;
    let b = params.inverse_rate;
    if b == 0.0 {
        return sample_gamma(p, 0.5 * a, rng);
    }
    let omega = a.sqrt() * b.sqrt();
    let scale = b.sqrt() / a.sqrt();
    let lambda = p.abs();

    // Far in the gamma / inverse-gamma corner the b/x (resp. a x) term only
    // moves O(omega^2) of probability mass.
    if omega < 1e-9 && lambda > 2.0 {
        let x = if p > 0.0 {
            sample_gamma(p, 0.5 * a, rng)
        } else {
            sample_inverse_gamma(-p, 0.5 * b, rng)
        };
        return x.clamp(f64::MIN_POSITIVE, f64::MAX);
    }

    let y = if lambda > 2.0 || omega > 3.0 {
        gig_rou_shift(lambda, omega, rng)
    } else if lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2 {
        gig_rou_noshift(lambda, omega, rng)
    } else {
        gig_piecewise_hat(lambda, omega, rng)
    };
    let x = if p < 0.0 { scale / y } else { scale * y };
    x.clamp(f64::MIN_POSITIVE, f64::MAX)
}

/// Mode of y^{lambda-1} exp(-omega/2 (y + 1/y)).
fn gig_mode(lambda: f64, omega: f64) -> f64 {
    if lambda >= 1.0 {
        (((lambda - 1.0) * (lambda - 1.0) + omega * omega).sqrt() + (lambda - 1.0)) / omega
    } else {
        omega / (((1.0 - lambda) * (1.0 - lambda) + omega * omega).sqrt() + (1.0 - lambda))
    }
}

fn gig_rou_shift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);

    // Extremes of (x - xm) sqrt(f(x)) solve x^3 + c2 x^2 + c1 x + c0 = 0.
    let c2 = -(2.0 * (lambda + 1.0) / omega + xm);
    let c1 = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
    let c0 = xm;
    let p = c1 - c2 * c2 / 3.0;
    let q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
    let phi = (-q / (2.0 * (-(p * p * p) / 27.0).sqrt())).clamp(-1.0, 1.0).acos();
    let fak = 2.0 * (-p / 3.0).sqrt();
    let y1 = fak * (phi / 3.0).cos() - c2 / 3.0;
    let y2 = fak * (phi / 3.0 + 4.0 / 3.0 * std::f64::consts::PI).cos() - c2 / 3.0;
    let u_plus = (y1 - xm) * (t * y1.ln() - s * (y1 + 1.0 / y1) - nc).exp();
    let u_minus = (y2 - xm) * (t * y2.ln() - s * (y2 + 1.0 / y2) - nc).exp();

    loop {
        let u = u_minus + open01(rng) * (u_plus - u_minus);
        let v = open01(rng);
        let x = u / v + xm;
        if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

fn gig_rou_noshift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    let ym = ((lambda + 1.0) + ((lambda + 1.0) * (lambda + 1.0) + omega * omega).sqrt()) / omega;
    let um = (0.5 * (lambda + 1.0) * ym.ln() - s * (ym + 1.0 / ym) - nc).exp();
    loop {
        let u = um * open01(rng);
        let v = open01(rng);
        let x = u / v;
        if v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

fn gig_piecewise_hat<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let xm = gig_mode(lambda, omega);
    let x0 = omega / (1.0 - lambda);
    let two_over_omega = 2.0 / omega;
    let k0 = ((lambda - 1.0) * xm.ln() - 0.5 * omega * (xm + 1.0 / xm)).exp();
    let area0 = k0 * x0;
    let (k1, area1, k2, area2);
    if x0 >= two_over_omega {
        k1 = 0.0;
        area1 = 0.0;
        k2 = x0.powf(lambda - 1.0);
        area2 = k2 * 2.0 * (-omega * x0 / 2.0).exp() / omega;
    } else {
        k1 = (-omega).exp();
        area1 = if lambda == 0.0 {
            k1 * (std::f64::consts::LN_2 - 2.0 * omega.ln())
        } else {
            k1 / lambda * (two_over_omega.powf(lambda) - x0.powf(lambda))
        };
        k2 = two_over_omega.powf(lambda - 1.0);
        area2 = k2 * 2.0 * (-1.0f64).exp() / omega;
    }
    let total = area0 + area1 + area2;
    let tail_start = x0.max(two_over_omega);

    loop {
        let mut v = total * open01(rng);
        let (x, hx);
        if v <= area0 {
            x = x0 * v / area0;
            hx = k0;
        } else {
            v -= area0;
            if v <= area1 {
                if lambda == 0.0 {
                    x = omega * (omega.exp() * v).exp();
                    hx = k1 / x;
                } else {
                    x = (x0.powf(lambda) + lambda / k1 * v).powf(1.0 / lambda);
                    hx = k1 * x.powf(lambda - 1.0);
                }
            } else {
                v -= area1;
                x = -two_over_omega
                    * ((-omega / 2.0 * tail_start).exp() - omega / (2.0 * k2) * v).ln();
                hx = k2 * (-omega / 2.0 * x).exp();
            }
        }
        let u = open01(rng) * hx;
        if x > 0.0 && u.ln() <= (lambda - 1.0) * x.ln() - omega / 2.0 * (x + 1.0 / x) {
            return x;
        }
    }
}

/// Latent table count of the Chinese restaurant process representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrtDraw {
    pub count: u64,
    pub shape: f64,
    pub tables: u64,
}

/// Draws the table count `sum_{j=1}^{count} Ber(shape / (j - 1 + shape))`.
pub fn sample_crt<R: Rng + ?Sized>(count: u64, shape: f64, rng: &mut R) -> Result<CrtDraw> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(Error::domain("shape", shape, "must be positive and finite"));
    }
    Ok(CrtDraw {
        count,
        shape,
        tables: crt_tables(count, shape, rng),
    })
}

pub(crate) fn crt_tables<R: Rng + ?Sized>(count: u64, shape: f64, rng: &mut R) -> u64 {
    let exact = count.min(CRT_EXACT_TERMS);
    let mut tables = 0;
    for j in 0..exact {
        let prob = shape / (j as f64 + shape);
        if rng.random::<f64>() < prob {
            tables += 1;
        }
    }
    if count > exact {
        let rest = shape * (digamma(count as f64 + shape) - digamma(exact as f64 + shape));
        tables += sample_poisson(rest, rng).min(count - exact);
    }
    tables
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Row `n` of log |s(n, k)|, k = 0..=n, unsigned Stirling numbers of the first kind.
pub fn log_stirling_first_row(n: u64) -> Vec<f64> {
    let n = n as usize;
    let mut row = vec![f64::NEG_INFINITY; n + 1];
    row[0] = 0.0;
    // |s(j+1, k)| = j |s(j, k)| + |s(j, k-1)|
    for j in 0..n {
        let log_j = (j as f64).ln();
        for k in (1..=j + 1).rev() {
            let stay = if k <= j { log_j + row[k] } else { f64::NEG_INFINITY };
            row[k] = log_add_exp(stay, row[k - 1]);
        }
        row[0] = f64::NEG_INFINITY;
    }
    row
}

/// Exact table-count pmf ∝ |s(count, ν)| shape^ν, indexed by ν = 0..=count.
pub fn crt_exact_pmf(count: u64, shape: f64) -> Result<Vec<f64>> {
    crt_exact_pmf_capped(count, shape, CRT_PMF_CAP)
}

pub fn crt_exact_pmf_capped(count: u64, shape: f64, cap: u64) -> Result<Vec<f64>> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(Error::domain("shape", shape, "must be positive and finite"));
    }
    if count > cap {
        return Err(Error::Resource {
            what: "count",
            requested: count,
            cap,
        });
    }
    let (weights, log_norm) = crt_log_weights(count, shape);
    Ok(weights.iter().map(|w| (w - log_norm).exp()).collect())
}

/// Log weights log|s(count, ν)| + ν log(shape) and their log-sum.
pub fn crt_log_weights(count: u64, shape: f64) -> (Vec<f64>, f64) {
    let row = log_stirling_first_row(count);
    let ln_shape = shape.ln();
    let weights: Vec<f64> = row
        .iter()
        .enumerate()
        .map(|(k, l)| l + k as f64 * ln_shape)
        .collect();
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = weights.iter().map(|w| (w - max).exp()).sum();
    (weights, max + sum.ln())
}

/// Normal random-walk proposal clamped to `[lower, upper]`.
///
/// The clamp puts point masses on the bounds.
pub fn sample_truncated_rw_proposal<R: Rng + ?Sized>(
    current: f64,
    step_sd: f64,
    lower: f64,
    upper: f64,
    rng: &mut R,
) -> f64 {
    let z = if step_sd > 0.0 {
        Normal::new(current, step_sd).expect("finite step").sample(rng)
    } else {
        current
    };
    z.max(lower).min(upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use statrs::function::gamma::ln_gamma;

    fn mean_of(n: usize, mut f: impl FnMut() -> f64) -> f64 {
        (0..n).map(|_| f()).sum::<f64>() / n as f64
    }

    #[test]
    fn gig_rejects_bad_parameters() {
        let e = GigParams::new(1.0, 0.0, 1.0).unwrap_err();
        assert!(e.to_string().contains("linear_rate"), "{e}");
        let e = GigParams::new(1.0, 1.0, -1.0).unwrap_err();
        assert!(e.to_string().contains("inverse_rate"));
        let e = GigParams::new(-0.5, 1.0, 0.0).unwrap_err();
        assert!(e.to_string().contains("order"));
        assert!(GigParams::new(0.5, 1.0, 0.0).is_ok());
    }

    #[test]
    fn gig_gamma_limit() {
        // order 2, linear 2a, inverse 0 is Ga(2, a).
        let a = 1.5;
        let params = GigParams::new(2.0, 2.0 * a, 0.0).unwrap();
        let mut r = rng::stream(11);
        let m = mean_of(100_000, || sample_gig(&params, &mut r));
        assert!((m / (2.0 / a) - 1.0).abs() < 0.02, "{m}");
    }

    #[test]
    fn gig_inverse_gaussian_mean() {
        // order -1/2 is the inverse Gaussian with mean sqrt(b / a).
        let (a, b) = (2.0, 3.0);
        let params = GigParams::new(-0.5, a, b).unwrap();
        let mut r = rng::stream(12);
        let m = mean_of(100_000, || sample_gig(&params, &mut r));
        let expected = (b / a as f64).sqrt();
        assert!((m / expected - 1.0).abs() < 0.02, "{m} vs {expected}");
    }

    #[test]
    fn gig_moments_against_quadrature() {
        use crate::oracle::gig_moment_quadrature;
        let g = GigParams::new(0.0, 2.0, 4.0).unwrap();
        let mut rng = rng::stream(21);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_gig(&g, &mut rng)).collect();
        let n = xs.len() as f64;
        let m1 = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n;
        assert!((m1 / gig_moment_quadrature(&g, 1.0).unwrap() - 1.0).abs() < 0.01);
        assert!((m2 / gig_moment_quadrature(&g, 2.0).unwrap() - 1.0).abs() < 0.01);
    }

    #[test]
    fn gig_positive_in_extreme_corners() {
        let mut r = rng::stream(13);
        for &(p, a, b) in &[
            (0.0, 2.0, 1e-300),
            (-4.0, 1e-10, 1e-10),
            (5.0, 1e-12, 1e-12),
            (0.3, 1e-8, 1e-8),
            (-0.7, 1e6, 1e6),
            (1.5, 1e-20, 1e3),
        ] {
            let params = GigParams::new(p, a, b).unwrap();
            for _ in 0..200 {
                let x = sample_gig(&params, &mut r);
                assert!(x > 0.0 && x.is_finite(), "{p} {a} {b} -> {x}");
            }
        }
    }

    #[test]
    fn gig_reproducible() {
        let params = GigParams::new(-0.3, 0.7, 2.5).unwrap();
        let a: Vec<f64> = {
            let mut r = rng::stream(5);
            (0..20).map(|_| sample_gig(&params, &mut r)).collect()
        };
        let b: Vec<f64> = {
            let mut r = rng::stream(5);
            (0..20).map(|_| sample_gig(&params, &mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn crt_small_cases() {
        let mut r = rng::stream(3);
        for _ in 0..100 {
            assert_eq!(sample_crt(0, 0.7, &mut r).unwrap().tables, 0);
            assert_eq!(sample_crt(1, 0.7, &mut r).unwrap().tables, 1);
            let d = sample_crt(5, 2.0, &mut r).unwrap();
            assert!((1..=5).contains(&d.tables));
        }
        assert!(sample_crt(3, 0.0, &mut r).is_err());
    }

    #[test]
    fn crt_count_two_shape_one_is_fair() {
        let mut r = rng::stream(4);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| sample_crt(2, 1.0, &mut r).unwrap().tables == 1)
            .count();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn crt_large_count_has_right_mean() {
        // E[tables] = shape * (digamma(count + shape) - digamma(shape)).
        let mut r = rng::stream(8);
        let (count, shape) = (400_000u64, 1.3);
        let expected = shape * (digamma(count as f64 + shape) - digamma(shape));
        let m = mean_of(400, || crt_tables(count, shape, &mut r) as f64);
        let sd = expected.sqrt();
        assert!((m - expected).abs() < 4.0 * sd / 20.0, "{m} vs {expected}");
    }

    #[test]
    fn stirling_rows_by_hand() {
        let row = log_stirling_first_row(3);
        let vals: Vec<f64> = row.iter().map(|l| l.exp()).collect();
        assert_eq!(vals[0], 0.0);
        assert!((vals[1] - 2.0).abs() < 1e-12);
        assert!((vals[2] - 3.0).abs() < 1e-12);
        assert!((vals[3] - 1.0).abs() < 1e-12);
        let row4: Vec<f64> = log_stirling_first_row(4).iter().map(|l| l.exp()).collect();
        for (got, want) in row4.iter().zip([0.0, 6.0, 11.0, 6.0, 1.0]) {
            assert!((got - want).abs() < 1e-10);
        }
        assert_eq!(log_stirling_first_row(0), vec![0.0]);
    }

    #[test]
    fn crt_pmf_examples() {
        let p = crt_exact_pmf(1, 3.0).unwrap();
        assert!((p[1] - 1.0).abs() < 1e-15);
        let p = crt_exact_pmf(2, 1.0).unwrap();
        assert!((p[1] - 0.5).abs() < 1e-15 && (p[2] - 0.5).abs() < 1e-15);
        let p = crt_exact_pmf(3, 2.0).unwrap();
        for (got, want) in p[1..].iter().zip([1.0 / 6.0, 0.5, 1.0 / 3.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        let total: f64 = crt_exact_pmf(500, 0.8).unwrap().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crt_pmf_cap() {
        let e = crt_exact_pmf_capped(11, 1.0, 10).unwrap_err();
        assert!(matches!(e, Error::Resource { requested: 11, cap: 10, .. }));
        assert!(crt_exact_pmf(CRT_PMF_CAP + 1, 1.0).is_err());
    }

    #[test]
    fn stirling_normalization_identity() {
        // sum_ν |s(y, ν)| α^ν = Γ(y + α) / Γ(α)
        for &alpha in &[0.3, 1.0, 2.5, 17.0] {
            for y in [1u64, 2, 7, 20, 50] {
                let (_, log_norm) = crt_log_weights(y, alpha);
                let want = ln_gamma(y as f64 + alpha) - ln_gamma(alpha);
                assert!(((log_norm - want) / want.abs().max(1.0)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn proposal_clamps() {
        let mut r = rng::stream(1);
        assert_eq!(sample_truncated_rw_proposal(1.0, 0.0, 0.001, 150.0, &mut r), 1.0);
        assert_eq!(sample_truncated_rw_proposal(-3.0, 0.0, 0.001, 150.0, &mut r), 0.001);
        assert_eq!(sample_truncated_rw_proposal(1e3, 1e-12, 0.001, 150.0, &mut r), 150.0);
        let m = mean_of(100_000, || sample_truncated_rw_proposal(5.0, 1.0, 0.001, 150.0, &mut r));
        assert!((m / 5.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn gamma_small_shape_stays_positive() {
        let mut r = rng::stream(9);
        for _ in 0..1000 {
            let x = sample_gamma(1e-3, 1.0, &mut r);
            assert!(x > 0.0);
        }
        let m = mean_of(200_000, || sample_gamma(0.4, 2.0, &mut r));
        assert!((m / 0.2 - 1.0).abs() < 0.02);
    }
}
