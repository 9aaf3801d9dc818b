//! Adaptive Gauss–Kronrod quadrature.
//!
//! [`integrate`] is a globally adaptive 21-point Gauss–Kronrod integrator on a
//! finite interval. [`LogSupport`] handles the integrals this crate actually
//! needs: positive integrands over the real line given in log space, which
//! may be sharply peaked far from the origin and whose magnitude can overflow
//! `f64` (posterior weights at counts of 10^4).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_452_818,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_subdivisions: 2000,
        }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        QuadOptions {
            rel_tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut samples = [(0.0, 0.0); 10];
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut abs_sum = WGK[10] * fc.abs();
    for j in 0..10 {
        let dx = half * XGK[j];
        let (lo, hi) = (f(center - dx), f(center + dx));
        samples[j] = (lo, hi);
        kronrod += WGK[j] * (lo + hi);
        abs_sum += WGK[j] * (lo.abs() + hi.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    // Error scaling as in QUADPACK's qk21.
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((samples[j].0 - mean).abs() + (samples[j].1 - mean).abs());
    }
    let asc = asc * half.abs();
    let abs_int = abs_sum * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    if abs_int > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs_int);
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error,
    }
}

/// Integrates `f` over `[a, b]`, splitting first at the interior `breaks`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::Validation(format!(
            "integration bounds must be finite with a < b, got [{a}, {b}]"
        )));
    }
    let mut points: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|x| *x > a && *x < b))
        .chain(std::iter::once(b))
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    for w in points.windows(2) {
        let seg = kronrod21(&f, w[0], w[1]);
        value += seg.value;
        error += seg.error;
        heap.push(seg);
    }
    // Segments too narrow to split further are parked here.
    let mut frozen: Vec<Segment> = Vec::new();
    let mut intervals = heap.len();

    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * value.abs());
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Numerical {
                context: "gauss-kronrod integrand returned a non-finite value".into(),
                achieved: error,
            });
        }
        if error <= tol {
            break;
        }
        if intervals >= opts.max_subdivisions {
            return Err(Error::Numerical {
                context: format!(
                    "quadrature did not reach rel_tol {:e} within {} subdivisions",
                    opts.rel_tol, opts.max_subdivisions
                ),
                achieved: error / value.abs().max(f64::MIN_POSITIVE),
            });
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a
            || mid >= worst.b
            || (worst.b - worst.a) <= 8.0 * f64::EPSILON * worst.a.abs().max(worst.b.abs())
        {
            frozen.push(worst);
            continue;
        }
        let left = kronrod21(&f, worst.a, mid);
        let right = kronrod21(&f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        intervals += 1;
    }
    // Recompute from the leaves to shed accumulated cancellation.
    let (value, abs_error) = heap
        .iter()
        .chain(frozen.iter())
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(QuadResult {
        value,
        abs_error,
        intervals,
    })
}

/// Integral of `exp(logf)` reported on the log scale.
#[derive(Debug, Clone, Copy)]
pub struct LogIntegral {
    pub log_value: f64,
    pub rel_error: f64,
}

/// Located support of a positive integrand `exp(logf(s))` on the real line.
///
/// The scan finds every local mode on a coarse grid, refines it, and extends
/// outwards until the log-integrand has fallen `drop` units below the peak.
/// Integrals are then computed relative to the peak height, so
/// `exp(logf - peak)` never overflows.
#[derive(Debug, Clone)]
pub struct LogSupport {
    pub lower: f64,
    pub upper: f64,
    pub peak: f64,
    pub modes: Vec<f64>,
    breaks: Vec<f64>,
}

const SCAN_HALF_WIDTH: f64 = 120.0;
const SCAN_STEP: f64 = 0.5;
const SUPPORT_DROP: f64 = 75.0;
const EDGE_LIMIT: f64 = 700.0;

impl LogSupport {
    pub fn locate<F: Fn(f64) -> f64>(logf: &F) -> Result<Self> {
        Self::locate_around(logf, 0.0)
    }

    /// Like [`LogSupport::locate`] with the scan window centred at `center`.
    pub fn locate_around<F: Fn(f64) -> f64>(logf: &F, center: f64) -> Result<Self> {
        let n = (2.0 * SCAN_HALF_WIDTH / SCAN_STEP) as usize + 1;
        let grid: Vec<f64> = (0..n)
            .map(|k| center - SCAN_HALF_WIDTH + k as f64 * SCAN_STEP)
            .collect();
        let vals: Vec<f64> = grid
            .iter()
            .map(|&s| {
                let v = logf(s);
                if v.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    v
                }
            })
            .collect();
        let grid_max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !grid_max.is_finite() {
            return Err(Error::Numerical {
                context: "log-integrand is not finite anywhere on the scan grid".into(),
                achieved: f64::INFINITY,
            });
        }

        let mut modes = Vec::new();
        for k in 0..n {
            let left = if k == 0 { f64::NEG_INFINITY } else { vals[k - 1] };
            let right = if k + 1 == n { f64::NEG_INFINITY } else { vals[k + 1] };
            if vals[k] >= left && vals[k] > right && vals[k] > grid_max - SUPPORT_DROP {
                let lo = grid[k] - SCAN_STEP;
                let hi = grid[k] + SCAN_STEP;
                modes.push(golden_max(logf, lo, hi));
            }
        }
        let peak = modes
            .iter()
            .map(|&m| logf(m))
            .fold(grid_max, f64::max);

        let threshold = peak - SUPPORT_DROP;
        let first = vals.iter().position(|&v| v > threshold).unwrap_or(0);
        let last = vals.iter().rposition(|&v| v > threshold).unwrap_or(n - 1);
        let lower = walk_to_threshold(logf, grid[first], -1.0, threshold)?;
        let upper = walk_to_threshold(logf, grid[last], 1.0, threshold)?;

        let mut breaks: Vec<f64> = grid
            .iter()
            .zip(&vals)
            .filter(|(s, v)| **s > lower && **s < upper && **v > threshold)
            .map(|(s, _)| *s)
            .collect();
        let stride = (breaks.len() / 48).max(1);
        breaks = breaks.into_iter().step_by(stride).collect();
        breaks.extend(modes.iter().copied());
        for &m in &modes {
            breaks.push(m - 2.0);
            breaks.push(m + 2.0);
        }
        breaks.retain(|s| *s > lower && *s < upper);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();

        Ok(LogSupport {
            lower,
            upper,
            peak,
            modes,
            breaks,
        })
    }

    /// Integrates `g(s)`, which the caller computes already scaled by
    /// `exp(-peak)`, over the located support.
    pub fn integrate_scaled<G: Fn(f64) -> f64>(&self, g: G, opts: QuadOptions) -> Result<QuadResult> {
        integrate(g, self.lower, self.upper, &self.breaks, opts)
    }

    /// Integrates `exp(logf)` over the located support.
    pub fn integrate_exp<F: Fn(f64) -> f64>(&self, logf: F, opts: QuadOptions) -> Result<LogIntegral> {
        let peak = self.peak;
        let r = self.integrate_scaled(|s| (logf(s) - peak).exp(), opts)?;
        if r.value <= 0.0 {
            return Err(Error::Numerical {
                context: "integral of a positive log-integrand underflowed".into(),
                achieved: r.abs_error,
            });
        }
        Ok(LogIntegral {
            log_value: peak + r.value.ln(),
            rel_error: r.abs_error / r.value,
        })
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
        if hi - lo < 1e-10 * (1.0 + lo.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn walk_to_threshold<F: Fn(f64) -> f64>(logf: &F, start: f64, dir: f64, threshold: f64) -> Result<f64> {
    let mut step = SCAN_STEP;
    let mut s = start;
    loop {
        s += dir * step;
        if s.abs() > EDGE_LIMIT {
            let edge = dir * EDGE_LIMIT;
            let v = logf(edge);
            if v > threshold + 45.0 {
                return Err(Error::Numerical {
                    context: format!("log-integrand has not decayed at s = {edge}"),
                    achieved: (v - threshold - SUPPORT_DROP).exp(),
                });
            }
            return Ok(edge);
        }
        let v = logf(s);
        if v.is_nan() || v < threshold {
            return Ok(s);
        }
        step *= 1.5;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_smooth_functions() {
        let opts = QuadOptions::default();
        let r = integrate(|x| x * x, 0.0, 1.0, &[], opts).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-15);
        let r = integrate(f64::sin, 0.0, std::f64::consts::PI, &[], opts).unwrap();
        assert!((r.value - 2.0).abs() < 1e-13);
        let r = integrate(|x: f64| x.sqrt(), 0.0, 1.0, &[], opts).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn endpoint_singularity_is_resolved() {
        let opts = QuadOptions::with_rel_tol(1e-9);
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &[], opts).unwrap();
        assert!((r.value - 2.0).abs() < 1e-7, "{}", r.value);
    }

    #[test]
    fn subdivision_cap_reports_achieved_tolerance() {
        let opts = QuadOptions {
            rel_tol: 1e-14,
            abs_tol: 0.0,
            max_subdivisions: 3,
        };
        let err = integrate(|x: f64| (1.0 / x).sin(), 1e-3, 1.0, &[], opts).unwrap_err();
        assert!(matches!(err, Error::Numerical { .. }));
    }

    #[test]
    fn log_support_gaussian_far_from_origin() {
        // exp(1000 - (s - 37)^2 / 2) integrates to exp(1000) * sqrt(2 pi).
        let logf = |s: f64| 1000.0 - 0.5 * (s - 37.0) * (s - 37.0);
        let support = LogSupport::locate(&logf).unwrap();
        assert!((support.modes[0] - 37.0).abs() < 1e-6);
        let li = support.integrate_exp(logf, QuadOptions::default()).unwrap();
        let expected = 1000.0 + (2.0 * std::f64::consts::PI).sqrt().ln();
        assert!((li.log_value - expected).abs() < 1e-10);
    }

    #[test]
    fn log_support_exponential_tail() {
        // s -> exp(-e^{-s} - s) integrates to 1 (Gumbel density).
        let logf = |s: f64| -(-s).exp() - s;
        let support = LogSupport::locate(&logf).unwrap();
        let li = support.integrate_exp(logf, QuadOptions::default()).unwrap();
        assert!(li.log_value.abs() < 1e-10, "{}", li.log_value);
    }
}
