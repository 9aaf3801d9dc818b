//! Local-scale priors and the implied marginal densities of the Poisson rate.
//!
//! Marginals that have no closed form are computed by quadrature over
//! `s = log u`, which maps the local scale to the real line (equivalently, the
//! logit of `t = u / (1 + u)`).

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::distributions::ln_gamma_pdf;
use crate::error::{Error, Result};
use crate::quadrature::{LogSupport, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PriorKind {
    /// Inverse-gamma IG(γ, γ) local prior.
    #[serde(rename = "IG")]
    InverseGamma,
    /// Extremely heavy-tailed local prior.
    #[serde(rename = "EH")]
    ExtremelyHeavy,
    /// Plain Poisson-gamma model, u ≡ 1.
    #[serde(rename = "PG")]
    PoissonGamma,
}

impl PriorKind {
    pub fn label(self) -> &'static str {
        match self {
            PriorKind::InverseGamma => "IG",
            PriorKind::ExtremelyHeavy => "EH",
            PriorKind::PoissonGamma => "PG",
        }
    }
}

impl std::str::FromStr for PriorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "IG" => Ok(PriorKind::InverseGamma),
            "EH" => Ok(PriorKind::ExtremelyHeavy),
            "PG" => Ok(PriorKind::PoissonGamma),
            other => Err(Error::Validation(format!(
                "unknown prior family `{other}` (expected IG, EH or PG)"
            ))),
        }
    }
}

impl std::fmt::Display for PriorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// A local prior with its hyperparameter γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorFamily {
    pub kind: PriorKind,
    pub gamma: f64,
    /// Use IG(γ + 1, γ) instead of IG(γ, γ), which gives the rate a finite
    /// prior mean at the cost of one extra unit of asymptotic bias.
    #[serde(default)]
    pub ig_finite_mean: bool,
}

impl PriorFamily {
    pub fn new(kind: PriorKind, gamma: f64) -> Result<Self> {
        if kind != PriorKind::PoissonGamma && !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::domain("gamma", gamma, "must be positive and finite"));
        }
        Ok(PriorFamily {
            kind,
            gamma,
            ig_finite_mean: false,
        })
    }

    pub fn inverse_gamma(gamma: f64) -> Result<Self> {
        Self::new(PriorKind::InverseGamma, gamma)
    }

    pub fn extremely_heavy(gamma: f64) -> Result<Self> {
        Self::new(PriorKind::ExtremelyHeavy, gamma)
    }

    pub fn poisson_gamma() -> Self {
        PriorFamily {
            kind: PriorKind::PoissonGamma,
            gamma: 1.0,
            ig_finite_mean: false,
        }
    }

    pub fn with_finite_mean(mut self, on: bool) -> Self {
        self.ig_finite_mean = on;
        self
    }

    /// Shape of the inverse-gamma local prior (its scale is always γ).
    pub fn ig_shape(&self) -> f64 {
        ig_shape(self.gamma, self.ig_finite_mean)
    }

    /// Log density of u at `ln_u = log u`, without domain checks.
    pub(crate) fn ln_density_at_log_u(&self, ln_u: f64) -> f64 {
        let g = self.gamma;
        match self.kind {
            PriorKind::InverseGamma => {
                let shape = self.ig_shape();
                shape * g.ln() - ln_gamma(shape) - (shape + 1.0) * ln_u - g * (-ln_u).exp()
            }
            PriorKind::ExtremelyHeavy => {
                let log1p_u = log1p_exp(ln_u);
                g.ln() - log1p_u - (1.0 + g) * log1p_u.ln_1p()
            }
            PriorKind::PoissonGamma => {
                if ln_u == 0.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

pub(crate) fn ig_shape(gamma: f64, finite_mean: bool) -> f64 {
    if finite_mean {
        gamma + 1.0
    } else {
        gamma
    }
}

/// log(1 + e^x) without overflow.
pub(crate) fn log1p_exp(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Gamma shape α and global rate β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalParams {
    pub alpha: f64,
    pub beta: f64,
}

impl GlobalParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::domain("alpha", alpha, "must be positive and finite"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain("beta", beta, "must be positive and finite"));
        }
        Ok(GlobalParams { alpha, beta })
    }
}

fn unsupported(operation: &'static str, family: &PriorFamily) -> Error {
    Error::UnsupportedFamily {
        operation,
        family: family.kind.label(),
    }
}

/// Log density of the local prior at `u`.
///
/// The EH density extends continuously to `u = 0` (value γ); the IG density
/// vanishes there.
pub fn log_density_u(family: &PriorFamily, u: f64) -> Result<f64> {
    if family.kind == PriorKind::PoissonGamma {
        return Err(unsupported("log_density_u", family));
    }
    if !(u >= 0.0) || u.is_infinite() {
        return Err(Error::domain("u", u, "must be non-negative and finite"));
    }
    if u == 0.0 {
        return Ok(match family.kind {
            PriorKind::ExtremelyHeavy => family.gamma.ln(),
            _ => f64::NEG_INFINITY,
        });
    }
    Ok(family.ln_density_at_log_u(u.ln()))
}

/// CDF of the EH prior: 1 - {1 + log(1 + u)}^{-γ}.
pub fn cdf_u_eh(gamma: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    1.0 - (-gamma * u.ln_1p().ln_1p()).exp()
}

/// The same CDF as a function of log u, usable beyond the f64 range of u.
pub fn cdf_log_u_eh(gamma: f64, ln_u: f64) -> f64 {
    if ln_u == f64::INFINITY {
        return 1.0;
    }
    1.0 - (-gamma * log1p_exp(ln_u).ln_1p()).exp()
}

/// Tail index ξ = lim u π'(u) / π(u) of the local prior.
pub fn tail_index(family: &PriorFamily) -> Result<f64> {
    match family.kind {
        PriorKind::InverseGamma => Ok(-(1.0 + family.ig_shape())),
        PriorKind::ExtremelyHeavy => Ok(-1.0),
        PriorKind::PoissonGamma => Err(unsupported("tail_index", family)),
    }
}

/// Marginal prior density of λ after integrating out u.
pub fn marginal_prior_lambda(family: &PriorFamily, globals: &GlobalParams, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain("lambda", lambda, "must be positive and finite"));
    }
    let GlobalParams { alpha, beta } = *globals;
    match family.kind {
        PriorKind::PoissonGamma => Ok(ln_gamma_pdf(lambda, alpha, beta).exp()),
        PriorKind::InverseGamma => {
            // ∫ Ga(λ | α, β/u) IG(u | c, γ) du
            //   = β^α γ^c λ^{α-1} / (B(α, c) (βλ + γ)^{α+c})
            let c = family.ig_shape();
            let g = family.gamma;
            let ln = alpha * beta.ln() + c * g.ln() + (alpha - 1.0) * lambda.ln()
                - ln_beta(alpha, c)
                - (alpha + c) * (beta * lambda + g).ln();
            Ok(ln.exp())
        }
        PriorKind::ExtremelyHeavy => {
            let logf = |s: f64| {
                ln_gamma_pdf(lambda, alpha, beta * (-s).exp()) + family.ln_density_at_log_u(s) + s
            };
            let center = (lambda / alpha * beta).ln().clamp(-100.0, 100.0);
            let support = LogSupport::locate_around(&logf, center)?;
            let li = support.integrate_exp(logf, QuadOptions::with_rel_tol(1e-6))?;
            Ok(li.log_value.exp())
        }
    }
}

/// Unnormalized log posterior of s = log u given one count, with λ
/// integrated out: log π(u) + log u + y log u − (y + α) log(η u + β).
pub(crate) fn ln_posterior_log_u(
    family: &PriorFamily,
    globals: &GlobalParams,
    y: u64,
    eta: f64,
    s: f64,
) -> f64 {
    let GlobalParams { alpha, beta } = *globals;
    let y = y as f64;
    // log(η e^s + β) = log β + log1p_exp(s + log η − log β)
    let ln_denom = beta.ln() + log1p_exp(s + eta.ln() - beta.ln());
    family.ln_density_at_log_u(s) + s + y * s - (y + alpha) * ln_denom
}

/// Marginal posterior density of λ given one count, evaluated on `grid`.
///
/// IG and EH posteriors are gamma mixtures over the posterior of u, which is
/// integrated numerically; the PG posterior is Ga(y + α, η + β).
pub fn marginal_posterior_lambda(
    family: &PriorFamily,
    globals: &GlobalParams,
    y: u64,
    eta: f64,
    grid: &[f64],
) -> Result<Vec<f64>> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::domain("eta", eta, "must be positive and finite"));
    }
    let GlobalParams { alpha, beta } = *globals;
    let shape = y as f64 + alpha;
    if family.kind == PriorKind::PoissonGamma {
        return Ok(grid
            .iter()
            .map(|&l| ln_gamma_pdf(l, shape, eta + beta).exp())
            .collect());
    }
    let weight = |s: f64| ln_posterior_log_u(family, globals, y, eta, s);
    let support = LogSupport::locate(&weight)?;
    let opts = QuadOptions::with_rel_tol(1e-8);
    let norm = support.integrate_exp(weight, opts)?;
    grid.iter()
        .map(|&l| {
            if !(l > 0.0) {
                return Ok(0.0);
            }
            let mixed = support.integrate_exp(
                |s| ln_gamma_pdf(l, shape, eta + beta * (-s).exp()) + weight(s),
                opts,
            );
            match mixed {
                Ok(li) => Ok((li.log_value - norm.log_value).exp()),
                // The integrand can vanish to below f64 range far in the tails.
                Err(Error::Numerical { .. }) => Ok(0.0),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Grid spacing for density tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridScale {
    Linear,
    Log,
}

pub const DEFAULT_GRID_POINTS: usize = 512;

/// `n` points spanning `[lower, upper]`.
pub fn density_grid(lower: f64, upper: f64, n: usize, scale: GridScale) -> Result<Vec<f64>> {
    if n < 2 || !(upper > lower) {
        return Err(Error::Validation(format!(
            "grid needs n >= 2 and lower < upper (got n={n}, [{lower}, {upper}])"
        )));
    }
    if scale == GridScale::Log && lower <= 0.0 {
        return Err(Error::domain("lower", lower, "log-spaced grids need lower > 0"));
    }
    let step = |k: usize| k as f64 / (n - 1) as f64;
    Ok((0..n)
        .map(|k| match scale {
            GridScale::Linear => lower + (upper - lower) * step(k),
            GridScale::Log => (lower.ln() + (upper.ln() - lower.ln()) * step(k)).exp(),
        })
        .collect())
}

/// Trapezoid rule on a (possibly uneven) grid.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}
