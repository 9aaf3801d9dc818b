//! Posterior means by one-dimensional quadrature.
//!
//! Given y and fixed (α, β, γ), the Bayes estimator of λ is
//! λ̃ = (α + y) E[u / (η u + β) | y] with p(u | y) ∝ π(u) u^y (η u + β)^{−(y+α)}.
//! Integration runs over s = log u on the real line.

use serde::{Deserialize, Serialize};

use crate::diagnostics::summarize_param;
use crate::distributions::GigParams;
use crate::error::{Error, Result};
use crate::mcmc::run_chain;
use crate::model::{CountDataset, FixedParams, ModelSpec};
use crate::priors::{ln_posterior_log_u, GlobalParams, PriorFamily, PriorKind};
use crate::quadrature::{LogSupport, QuadOptions};

pub const ORACLE_REL_TOL: f64 = 1e-8;

/// Result of one posterior-mean integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorMean {
    pub mean: f64,
    /// λ̃ − y/η, integrated directly rather than by subtraction.
    pub bias: f64,
    pub abs_error: f64,
}

fn check_inputs(globals: &GlobalParams, eta: f64) -> Result<()> {
    GlobalParams::new(globals.alpha, globals.beta)?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::domain("eta", eta, "must be positive and finite"));
    }
    Ok(())
}

pub fn posterior_mean_detail(
    family: &PriorFamily,
    globals: &GlobalParams,
    y: u64,
    eta: f64,
    opts: QuadOptions,
) -> Result<PosteriorMean> {
    check_inputs(globals, eta)?;
    let GlobalParams { alpha, beta } = *globals;
    let yf = y as f64;
    if family.kind == PriorKind::PoissonGamma {
        let mean = (alpha + yf) / (eta + beta);
        let bias = (alpha * eta - yf * beta) / (eta * (eta + beta));
        return Ok(PosteriorMean {
            mean,
            bias,
            abs_error: 0.0,
        });
    }
    let weight = |s: f64| ln_posterior_log_u(family, globals, y, eta, s);
    let center = (yf.max(1.0) * beta / eta).ln();
    let support = LogSupport::locate_around(&weight, center)?;
    let peak = support.peak;
    let scaled = |s: f64| (weight(s) - peak).exp();
    let norm = support.integrate_scaled(scaled, opts)?;
    if !(norm.value > 0.0) {
        return Err(Error::Numerical {
            context: "posterior normalizing constant underflowed".into(),
            achieved: norm.abs_error,
        });
    }
    // λ̃ − y/η = E[(αη − yβe^{−s}) / (η(η + βe^{−s}))]
    let shift = |s: f64| {
        let b = beta * (-s).exp();
        (alpha * eta - yf * b) / (eta * (eta + b))
    };
    let opts_b = QuadOptions {
        abs_tol: opts.rel_tol * norm.value * (alpha + 1.0) / eta,
        ..opts
    };
    let num = support.integrate_scaled(|s| scaled(s) * shift(s), opts_b)?;
    let bias = num.value / norm.value;
    let mean = yf / eta + bias;
    let abs_error = num.abs_error / norm.value + bias.abs() * norm.abs_error / norm.value;
    Ok(PosteriorMean {
        mean,
        bias,
        abs_error,
    })
}

/// λ̃ = E[λ | y] at fixed hyperparameters (relative tolerance 1e−8).
pub fn posterior_mean_quadrature(
    family: &PriorFamily,
    globals: &GlobalParams,
    y: u64,
    eta: f64,
) -> Result<f64> {
    Ok(posterior_mean_detail(family, globals, y, eta, QuadOptions::with_rel_tol(ORACLE_REL_TOL))?.mean)
}

/// k-th raw moment of a GIG law by quadrature of its kernel over log x.
pub fn gig_moment_quadrature(params: &GigParams, k: f64) -> Result<f64> {
    let (p, a, b) = (params.order(), params.linear_rate(), params.inverse_rate());
    let kernel = |s: f64| p * s - 0.5 * (a * s.exp() + b * (-s).exp());
    let opts = QuadOptions::with_rel_tol(ORACLE_REL_TOL);
    let base = LogSupport::locate(&kernel)?.integrate_exp(kernel, opts)?;
    let shifted = |s: f64| kernel(s) + k * s;
    let raw = LogSupport::locate(&shifted)?.integrate_exp(shifted, opts)?;
    Ok((raw.log_value - base.log_value).exp())
}

/// The fixed-u estimator (α + y)/(1 + β/u) at η = 1.
pub fn fixed_u_estimator(globals: &GlobalParams, u: f64, y: u64) -> f64 {
    (globals.alpha + y as f64) / (1.0 + globals.beta / u)
}

/// Bias λ̃(y) − y and relative loss |λ̃ − y|/y over increasing counts (η = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasCurve {
    pub y_values: Vec<u64>,
    pub bias: Vec<f64>,
    /// NaN at y = 0.
    pub relative: Vec<f64>,
}

pub fn bias_curve(family: &PriorFamily, globals: &GlobalParams, y_values: &[u64]) -> Result<BiasCurve> {
    if y_values.is_empty() {
        return Err(Error::Validation("bias curve needs at least one y".into()));
    }
    if y_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("bias curve y values must be strictly increasing".into()));
    }
    let bias = y_values
        .iter()
        .map(|&y| {
            posterior_mean_detail(family, globals, y, 1.0, QuadOptions::with_rel_tol(ORACLE_REL_TOL))
                .map(|p| p.bias)
        })
        .collect::<Result<Vec<_>>>()?;
    let relative = y_values
        .iter()
        .zip(&bias)
        .map(|(&y, b)| if y == 0 { f64::NAN } else { b.abs() / y as f64 })
        .collect();
    Ok(BiasCurve {
        y_values: y_values.to_vec(),
        bias,
        relative,
    })
}

pub const STABILIZATION_TOL: f64 = 1e-3;

/// Outcome of the doubling search for the limiting bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stabilization {
    /// First y with |bias(y) − bias(y/2)| < tolerance, or the last y tried.
    pub y: u64,
    pub bias: f64,
    pub previous_bias: f64,
    pub stabilized: bool,
}

/// Doubles y from `start` until successive biases differ by less than
/// [`STABILIZATION_TOL`] or y would exceed `max_y`.
pub fn stabilized_bias(
    family: &PriorFamily,
    globals: &GlobalParams,
    start: u64,
    max_y: u64,
) -> Result<Stabilization> {
    if start == 0 || start > max_y {
        return Err(Error::Validation(format!(
            "need 0 < start <= max_y (got {start}, {max_y})"
        )));
    }
    let opts = QuadOptions::with_rel_tol(ORACLE_REL_TOL);
    let mut y = start;
    let mut prev = posterior_mean_detail(family, globals, y, 1.0, opts)?.bias;
    while y.saturating_mul(2) <= max_y {
        y *= 2;
        let b = posterior_mean_detail(family, globals, y, 1.0, opts)?.bias;
        if (b - prev).abs() < STABILIZATION_TOL {
            return Ok(Stabilization {
                y,
                bias: b,
                previous_bias: prev,
                stabilized: true,
            });
        }
        prev = b;
    }
    Ok(Stabilization {
        y,
        bias: prev,
        previous_bias: prev,
        stabilized: false,
    })
}

/// MCMC posterior mean of λ for one observation against the quadrature value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub quadrature: f64,
    pub mcmc_mean: f64,
    pub mc_se: f64,
    pub inefficiency_factor: f64,
}

impl OracleComparison {
    /// |MCMC − quadrature| in Monte Carlo standard errors.
    pub fn z(&self) -> f64 {
        (self.mcmc_mean - self.quadrature).abs() / self.mc_se
    }
}

/// Runs the sampler on a single count with α, β, γ held at the oracle's
/// values. `chain` supplies lengths and seed; its family and fixed values
/// are overridden.
pub fn mcmc_vs_oracle(
    family: &PriorFamily,
    globals: &GlobalParams,
    y: u64,
    eta: f64,
    chain: &ModelSpec,
) -> Result<OracleComparison> {
    let quadrature = posterior_mean_quadrature(family, globals, y, eta)?;
    let data = CountDataset::with_offsets(vec![y], vec![eta])?;
    let spec = ModelSpec {
        family: *family,
        regression: false,
        fixed: FixedParams {
            alpha: Some(globals.alpha),
            beta: Some(globals.beta),
            gamma: (family.kind != PriorKind::PoissonGamma).then_some(family.gamma),
        },
        ..chain.clone()
    };
    let draws = run_chain(&data, &spec)?;
    let s = summarize_param("lambda", draws.lambda(0))?;
    Ok(OracleComparison {
        quadrature,
        mcmc_mean: s.mean,
        mc_se: s.mc_se(),
        inefficiency_factor: s.inefficiency_factor.unwrap_or(1.0),
    })
}
