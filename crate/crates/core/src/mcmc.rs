//! Gibbs / Metropolis-within-Gibbs samplers for the IG, EH and PG models.
//!
//! One sweep runs
//!
//! 1. (ν, α) with λ integrated out, then λ from its full conditional,
//! 2. β,
//! 3. the local block: IG draws u then the random-walk step for γ; EH draws
//!    u, then γ with (v, w) integrated out, then w with v integrated out,
//!    then v,
//! 4. δ when the regression model is on.
//!
//! The collapsed draws (α, EH γ) are each followed by a refresh of the
//! variables they integrate out, which keeps every step invariant for the
//! joint posterior.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::diagnostics::{summarize, ChainSummary};
use crate::distributions::{
    crt_tables, ln_poisson_pmf, sample_gamma, sample_gig, sample_inverse_gamma,
    sample_truncated_rw_proposal, GigParams,
};
use crate::error::{Error, Result};
use crate::model::{CountDataset, DeltaPrior, HyperPriors, ModelSpec};
use crate::priors::{PriorFamily, PriorKind};
use crate::rng;

/// All latent quantities of one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub lambda: Vec<f64>,
    /// Local scales; identically 1 under PG.
    pub u: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// Local-prior hyperparameter; unused under PG.
    pub gamma: f64,
    pub nu: Vec<u64>,
    /// EH latents.
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub delta: Vec<f64>,
    /// Current η_i = a_i exp(x_i'δ).
    pub eta: Vec<f64>,
}

impl ChainState {
    /// λ_i = (y_i + 1/2)/η_i, u_i = 1, α = β = γ = 1, ν_i = min(y_i, 1),
    /// v_i = w_i = 1, δ = 0; fixed parameters take their fixed values.
    pub fn initial(data: &CountDataset, spec: &ModelSpec) -> Self {
        let m = data.len();
        let p = data.n_covariates();
        let delta = vec![0.0; p];
        let eta = data.effective_offsets(&delta);
        let mut gamma = spec.fixed.gamma.unwrap_or(1.0);
        if spec.family.kind == PriorKind::InverseGamma && spec.fixed.gamma.is_none() {
            gamma = gamma.clamp(spec.hyper.eps1, spec.hyper.eps2);
        }
        ChainState {
            lambda: data
                .counts
                .iter()
                .zip(&eta)
                .map(|(&y, e)| (y as f64 + 0.5) / e)
                .collect(),
            u: vec![1.0; m],
            alpha: spec.fixed.alpha.unwrap_or(1.0),
            beta: spec.fixed.beta.unwrap_or(1.0),
            gamma,
            nu: data.counts.iter().map(|&y| y.min(1)).collect(),
            v: vec![1.0; m],
            w: vec![1.0; m],
            delta,
            eta,
        }
    }

    fn check_finite(&self, sweep: usize) -> Result<()> {
        let bad = |name: &str, xs: &[f64]| {
            xs.iter()
                .position(|x| !(x.is_finite() && *x > 0.0))
                .map(|i| format!("{name}[{}]", i + 1))
        };
        let offending = bad("lambda", &self.lambda)
            .or_else(|| bad("u", &self.u))
            .or_else(|| bad("v", &self.v))
            .or_else(|| bad("w", &self.w))
            .or_else(|| bad("eta", &self.eta))
            .or_else(|| {
                self.delta
                    .iter()
                    .position(|d| !d.is_finite())
                    .map(|i| format!("delta[{}]", i + 1))
            })
            .or_else(|| {
                [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)]
                    .into_iter()
                    .find(|(_, x)| !(x.is_finite() && *x > 0.0))
                    .map(|(n, _)| n.to_string())
            });
        match offending {
            Some(parameter) => Err(Error::NonFinite { sweep, parameter }),
            None => Ok(()),
        }
    }
}

/// λ_i ~ Ga(y_i + α, η_i + β/u_i).
pub fn update_lambda<R: Rng + ?Sized>(state: &mut ChainState, data: &CountDataset, rng: &mut R) {
    let ChainState {
        lambda,
        u,
        alpha,
        beta,
        eta,
        ..
    } = state;
    for i in 0..lambda.len() {
        let shape = data.counts[i] as f64 + *alpha;
        lambda[i] = sample_gamma(shape, eta[i] + *beta / u[i], rng);
    }
}

/// Shape and rate of the β full conditional, Ga(mα + a_β, Σ λ_i/u_i + b_β).
pub fn beta_conditional(state: &ChainState, hyper: &HyperPriors) -> (f64, f64) {
    let m = state.lambda.len() as f64;
    let s: f64 = state.lambda.iter().zip(&state.u).map(|(l, u)| l / u).sum();
    (m * state.alpha + hyper.a_beta, s + hyper.b_beta)
}

pub fn update_beta<R: Rng + ?Sized>(state: &mut ChainState, hyper: &HyperPriors, rng: &mut R) {
    let (shape, rate) = beta_conditional(state, hyper);
    state.beta = sample_gamma(shape, rate, rng);
}

/// Rate of the α conditional given ν: Σ log(1 + η_i u_i / β) + b_α.
pub fn alpha_rate(state: &ChainState, hyper: &HyperPriors) -> f64 {
    let s: f64 = state
        .eta
        .iter()
        .zip(&state.u)
        .map(|(e, u)| (e * u / state.beta).ln_1p())
        .sum();
    s + hyper.b_alpha
}

/// ν_i ~ CRT(y_i, α), then α ~ Ga(Σ ν_i + a_α, Σ log(1 + η_i u_i/β) + b_α).
///
/// This draw integrates λ out, so λ must be redrawn before anything that
/// conditions on it.
pub fn update_alpha<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &CountDataset,
    hyper: &HyperPriors,
    rng: &mut R,
) {
    for (nu, &y) in state.nu.iter_mut().zip(&data.counts) {
        *nu = crt_tables(y, state.alpha, rng);
    }
    let tables: u64 = state.nu.iter().sum();
    let rate = alpha_rate(state, hyper);
    state.alpha = sample_gamma(tables as f64 + hyper.a_alpha, rate, rng);
}

/// u_i ~ IG(c + α, γ + λ_i β), where c is the local prior's shape (γ, or
/// γ + 1 for the finite-mean variant).
pub fn update_local_ig<R: Rng + ?Sized>(state: &mut ChainState, family: &PriorFamily, rng: &mut R) {
    let shape = crate::priors::ig_shape(state.gamma, family.ig_finite_mean) + state.alpha;
    for (u, l) in state.u.iter_mut().zip(&state.lambda) {
        *u = sample_inverse_gamma(shape, state.gamma + l * state.beta, rng);
    }
}

/// log f_γ(γ) = m c log γ − m log Γ(c) − γ Σ log u_i − γ Σ 1/u_i with
/// c = γ (or γ + 1 for the finite-mean variant); terms free of γ dropped.
pub fn log_f_gamma_ig(gamma: f64, u: &[f64], finite_mean: bool) -> f64 {
    let m = u.len() as f64;
    let c = crate::priors::ig_shape(gamma, finite_mean);
    let sum_log: f64 = u.iter().map(|x| x.ln()).sum();
    let sum_inv: f64 = u.iter().map(|x| 1.0 / x).sum();
    m * c * gamma.ln() - m * ln_gamma(c) - gamma * sum_log - gamma * sum_inv
}

/// One clamped random-walk step for the IG γ. The acceptance ratio is
/// f_γ(γ*)/f_γ(γ) with no correction for the clamped proposal. Returns
/// whether the proposal was accepted.
pub fn update_gamma_ig<R: Rng + ?Sized>(
    state: &mut ChainState,
    family: &PriorFamily,
    hyper: &HyperPriors,
    rng: &mut R,
) -> bool {
    let current = state.gamma;
    let proposal = sample_truncated_rw_proposal(current, hyper.step_sd, hyper.eps1, hyper.eps2, rng);
    if proposal == current {
        return true;
    }
    let log_ratio = log_f_gamma_ig(proposal, &state.u, family.ig_finite_mean)
        - log_f_gamma_ig(current, &state.u, family.ig_finite_mean);
    let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
    if accept {
        state.gamma = proposal;
    }
    accept
}

/// u_i ~ GIG(1 − α, 2 v_i, 2 β λ_i).
pub fn update_u_eh<R: Rng + ?Sized>(state: &mut ChainState, rng: &mut R) -> Result<()> {
    for i in 0..state.u.len() {
        let params = GigParams::new(
            1.0 - state.alpha,
            2.0 * state.v[i],
            2.0 * state.beta * state.lambda[i],
        )?;
        state.u[i] = sample_gig(&params, rng);
    }
    Ok(())
}

/// w_i ~ Ga(1 + γ, 1 + log(1 + u_i)) with v_i integrated out, then
/// v_i ~ Ga(1 + w_i, 1 + u_i).
pub fn update_wv_eh<R: Rng + ?Sized>(state: &mut ChainState, rng: &mut R) {
    for i in 0..state.u.len() {
        let u = state.u[i];
        state.w[i] = sample_gamma(1.0 + state.gamma, 1.0 + u.ln_1p(), rng);
        state.v[i] = sample_gamma(1.0 + state.w[i], 1.0 + u, rng);
    }
}

/// The EH local block at fixed γ: u, then w (v integrated out), then v.
pub fn update_local_eh<R: Rng + ?Sized>(state: &mut ChainState, rng: &mut R) -> Result<()> {
    update_u_eh(state, rng)?;
    update_wv_eh(state, rng);
    Ok(())
}

/// Shape and rate of Ga(a_γ + m, b_γ + Σ log(1 + log(1 + u_i))).
pub fn gamma_eh_conditional(state: &ChainState, hyper: &HyperPriors) -> (f64, f64) {
    let m = state.u.len() as f64;
    let s: f64 = state.u.iter().map(|u| u.ln_1p().ln_1p()).sum();
    (hyper.a_gamma + m, hyper.b_gamma + s)
}

/// γ from its conditional with (v, w) integrated out. Must be followed by
/// [`update_wv_eh`] before v or w are used again.
pub fn update_gamma_eh<R: Rng + ?Sized>(state: &mut ChainState, hyper: &HyperPriors, rng: &mut R) {
    let (shape, rate) = gamma_eh_conditional(state, hyper);
    state.gamma = sample_gamma(shape, rate, rng);
}

/// Prior on δ in precision form, prepared once per chain.
#[derive(Debug, Clone)]
pub struct DeltaContext {
    pub prior_mean: DVector<f64>,
    pub prior_precision: DMatrix<f64>,
    prior_cov_chol: DMatrix<f64>,
}

impl DeltaContext {
    pub fn new(prior: &DeltaPrior) -> Result<Self> {
        prior.validate()?;
        let cov = prior.cov_matrix();
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Validation("delta prior covariance is not positive definite".into()))?;
        Ok(DeltaContext {
            prior_mean: DVector::from_column_slice(&prior.mean),
            prior_precision: chol.inverse(),
            prior_cov_chol: chol.l(),
        })
    }
}

/// Mode of the Poisson log-likelihood in δ with λ held fixed.
#[derive(Debug, Clone)]
pub struct DeltaMode {
    pub mode: DVector<f64>,
    /// Σ̂⁻¹ = Σ λ_i a_i exp(x_i'δ̂) x_i x_i'.
    pub precision: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
}

pub const NEWTON_GRADIENT_TOL: f64 = 1e-8;
pub const NEWTON_MAX_ITER: usize = 50;

/// Solves Σ y_i x_i = Σ λ_i a_i e^{x_i'δ} x_i by damped Newton iterations.
/// Returns `None` when the log-likelihood has no finite maximizer or its
/// Hessian is singular.
pub fn delta_mode(data: &CountDataset, lambda: &[f64], start: &[f64]) -> Option<DeltaMode> {
    let x = data.covariates.as_ref()?;
    let (m, p) = (x.nrows(), x.ncols());
    let y: Vec<f64> = data.counts.iter().map(|&c| c as f64).collect();
    let scale: Vec<f64> = lambda.iter().zip(&data.offsets).map(|(l, a)| l * a).collect();
    let objective = |d: &DVector<f64>| -> f64 {
        let lin = x * d;
        (0..m).map(|i| y[i] * lin[i] - scale[i] * lin[i].exp()).sum()
    };
    let grad_hess = |d: &DVector<f64>| {
        let lin = x * d;
        let mut g = DVector::zeros(p);
        let mut h = DMatrix::zeros(p, p);
        for i in 0..m {
            let mu = scale[i] * lin[i].exp();
            let row = x.row(i).transpose();
            g.axpy(y[i] - mu, &row, 1.0);
            h.ger(mu, &row, &row, 1.0);
        }
        (g, h)
    };

    if y.iter().all(|&c| c == 0.0) {
        // The likelihood increases without bound as the rates go to zero.
        return None;
    }
    let mut d = DVector::from_column_slice(start);
    if d.iter().any(|v| !v.is_finite()) {
        d.fill(0.0);
    }
    let mut f = objective(&d);
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..NEWTON_MAX_ITER {
        iterations = it + 1;
        let (g, h) = grad_hess(&d);
        if g.amax() < NEWTON_GRADIENT_TOL {
            converged = true;
            break;
        }
        let step = h.cholesky()?.solve(&g);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand = &d + &step * t;
            let fc = objective(&cand);
            // Allow rounding-level decreases so the last quadratic steps go through.
            if fc.is_finite() && fc >= f - 16.0 * f64::EPSILON * (1.0 + f.abs()) {
                d = cand;
                f = fc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let (g, precision) = grad_hess(&d);
    if g.amax() < NEWTON_GRADIENT_TOL {
        converged = true;
    }
    if d.iter().any(|v| !v.is_finite()) || precision.clone().cholesky().is_none() {
        return None;
    }
    Some(DeltaMode {
        mode: d,
        precision,
        converged,
        iterations,
    })
}

/// Outcome of one δ update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaStep {
    pub accepted: bool,
    /// The mode search failed and the prior was used as the proposal.
    pub prior_fallback: bool,
    pub log_acceptance: f64,
}

fn poisson_loglik(data: &CountDataset, lambda: &[f64], eta: &[f64]) -> f64 {
    data.counts
        .iter()
        .zip(lambda.iter().zip(eta))
        .map(|(&y, (l, e))| ln_poisson_pmf(y, l * e))
        .sum()
}

/// Log acceptance probability of the independence proposal
/// N(μ, (Σ̂⁻¹ + Σ₀⁻¹)⁻¹): log-likelihood ratio plus
/// log N(δ̂ | δ_old, Σ̂) − log N(δ̂ | δ_new, Σ̂).
pub fn delta_log_acceptance(
    data: &CountDataset,
    lambda: &[f64],
    mode: &DeltaMode,
    old: &[f64],
    new: &[f64],
) -> f64 {
    let eta_old = data.effective_offsets(old);
    let eta_new = data.effective_offsets(new);
    let quad = |d: &[f64]| {
        let r = DVector::from_column_slice(d) - &mode.mode;
        (r.transpose() * &mode.precision * &r)[(0, 0)]
    };
    poisson_loglik(data, lambda, &eta_new) - poisson_loglik(data, lambda, &eta_old)
        + 0.5 * (quad(new) - quad(old))
}

/// Independence Metropolis-Hastings step for δ given λ.
pub fn update_delta<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &CountDataset,
    ctx: &DeltaContext,
    rng: &mut R,
) -> DeltaStep {
    let p = state.delta.len();
    let z = DVector::from_iterator(p, (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let mode = delta_mode(data, &state.lambda, &state.delta);
    let proposal_from_mode = mode.as_ref().and_then(|mode| {
        let q = &mode.precision + &ctx.prior_precision;
        let chol = q.cholesky()?;
        let mu = chol.solve(&(&mode.precision * &mode.mode + &ctx.prior_precision * &ctx.prior_mean));
        // δ = μ + L^{-T} z has covariance Q^{-1}.
        let shift = chol.l().transpose().solve_upper_triangular(&z)?;
        Some(mu + shift)
    });
    let (new, log_acc, fallback) = match (mode, proposal_from_mode) {
        (Some(mode), Some(new)) => {
            let new: Vec<f64> = new.iter().copied().collect();
            let la = delta_log_acceptance(data, &state.lambda, &mode, &state.delta, &new);
            (new, la, false)
        }
        _ => {
            // Prior as proposal: the acceptance ratio is the likelihood ratio.
            let new = &ctx.prior_mean + &ctx.prior_cov_chol * z;
            let new: Vec<f64> = new.iter().copied().collect();
            let la = poisson_loglik(data, &state.lambda, &data.effective_offsets(&new))
                - poisson_loglik(data, &state.lambda, &state.eta);
            (new, la, true)
        }
    };
    let accepted = log_acc.is_finite() && (log_acc >= 0.0 || rng.random::<f64>().ln() < log_acc);
    if accepted {
        state.eta = data.effective_offsets(&new);
        state.delta = new;
    }
    DeltaStep {
        accepted,
        prior_fallback: fallback,
        log_acceptance: log_acc,
    }
}

/// Running counts of Metropolis outcomes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub sweeps: usize,
    pub gamma_proposals: usize,
    pub gamma_accepts: usize,
    pub delta_proposals: usize,
    pub delta_accepts: usize,
    pub delta_prior_fallbacks: usize,
}

impl ChainDiagnostics {
    pub fn gamma_acceptance_rate(&self) -> Option<f64> {
        (self.gamma_proposals > 0).then(|| self.gamma_accepts as f64 / self.gamma_proposals as f64)
    }

    pub fn delta_acceptance_rate(&self) -> Option<f64> {
        (self.delta_proposals > 0).then(|| self.delta_accepts as f64 / self.delta_proposals as f64)
    }
}

/// Model pieces a sweep needs besides the state.
pub struct Sampler<'a> {
    pub data: &'a CountDataset,
    pub spec: &'a ModelSpec,
    delta: Option<DeltaContext>,
}

impl<'a> Sampler<'a> {
    pub fn new(data: &'a CountDataset, spec: &'a ModelSpec) -> Result<Self> {
        spec.validate(data)?;
        let delta = if spec.regression {
            Some(DeltaContext::new(&spec.hyper.delta_prior_for(data.n_covariates())?)?)
        } else {
            None
        };
        Ok(Sampler { data, spec, delta })
    }

    /// One full sweep. `index` is only used in error reports.
    pub fn sweep<R: Rng + ?Sized>(
        &self,
        state: &mut ChainState,
        diag: &mut ChainDiagnostics,
        index: usize,
        rng: &mut R,
    ) -> Result<()> {
        let (data, spec) = (self.data, self.spec);
        let hyper = &spec.hyper;
        let check_scalar = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::NonFinite {
                    sweep: index,
                    parameter: name.to_string(),
                })
            }
        };

        if spec.fixed.alpha.is_none() {
            update_alpha(state, data, hyper, rng);
            check_scalar("alpha", state.alpha)?;
        }
        update_lambda(state, data, rng);
        if spec.fixed.beta.is_none() {
            update_beta(state, hyper, rng);
            check_scalar("beta", state.beta)?;
        }
        match spec.family.kind {
            PriorKind::PoissonGamma => {}
            PriorKind::InverseGamma => {
                update_local_ig(state, &spec.family, rng);
                if spec.fixed.gamma.is_none() {
                    diag.gamma_proposals += 1;
                    if update_gamma_ig(state, &spec.family, hyper, rng) {
                        diag.gamma_accepts += 1;
                    }
                }
            }
            PriorKind::ExtremelyHeavy => {
                update_u_eh(state, rng)?;
                if spec.fixed.gamma.is_none() {
                    update_gamma_eh(state, hyper, rng);
                    check_scalar("gamma", state.gamma)?;
                }
                update_wv_eh(state, rng);
            }
        }
        if let Some(ctx) = &self.delta {
            let step = update_delta(state, data, ctx, rng);
            diag.delta_proposals += 1;
            diag.delta_accepts += usize::from(step.accepted);
            diag.delta_prior_fallbacks += usize::from(step.prior_fallback);
        }
        diag.sweeps += 1;
        state.check_finite(index)
    }
}

/// Stored post-burn-in draws, one column per parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub family: PriorFamily,
    pub n_units: usize,
    pub seed: u64,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    pub diagnostics: ChainDiagnostics,
    pub final_state: ChainState,
}

pub fn lambda_name(i: usize) -> String {
    format!("lambda[{}]", i + 1)
}

impl PosteriorDraws {
    fn new(spec: &ModelSpec, data: &CountDataset, state: ChainState) -> Self {
        let m = data.len();
        let mut names: Vec<String> = (0..m).map(lambda_name).collect();
        names.push("alpha".into());
        names.push("beta".into());
        if spec.family.kind != PriorKind::PoissonGamma {
            names.push("gamma".into());
        }
        names.extend((0..data.n_covariates()).map(|j| format!("delta[{}]", j + 1)));
        if spec.store_latents {
            for prefix in ["u", "nu"] {
                names.extend((0..m).map(|i| format!("{prefix}[{}]", i + 1)));
            }
            if spec.family.kind == PriorKind::ExtremelyHeavy {
                for prefix in ["v", "w"] {
                    names.extend((0..m).map(|i| format!("{prefix}[{}]", i + 1)));
                }
            }
        }
        let columns = names.iter().map(|_| Vec::with_capacity(spec.draws)).collect();
        let mut d = PosteriorDraws {
            family: spec.family,
            n_units: m,
            seed: spec.seed,
            names,
            columns,
            index: HashMap::new(),
            diagnostics: ChainDiagnostics::default(),
            final_state: state,
        };
        d.rebuild_index();
        d
    }

    fn rebuild_index(&mut self) {
        self.index = self.names.iter().enumerate().map(|(k, n)| (n.clone(), k)).collect();
    }

    fn record(&mut self, state: &ChainState, with_gamma: bool, latents: bool) {
        let m = self.n_units;
        let mut k = 0;
        let mut push = |cols: &mut Vec<Vec<f64>>, x: f64| {
            cols[k].push(x);
            k += 1;
        };
        for &l in &state.lambda {
            push(&mut self.columns, l);
        }
        push(&mut self.columns, state.alpha);
        push(&mut self.columns, state.beta);
        if with_gamma {
            push(&mut self.columns, state.gamma);
        }
        for &d in &state.delta {
            push(&mut self.columns, d);
        }
        if latents {
            for &u in &state.u {
                push(&mut self.columns, u);
            }
            for &n in &state.nu {
                push(&mut self.columns, n as f64);
            }
            if self.family.kind == PriorKind::ExtremelyHeavy {
                for i in 0..m {
                    push(&mut self.columns, state.v[i]);
                }
                for i in 0..m {
                    push(&mut self.columns, state.w[i]);
                }
            }
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_draws(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let k = match self.index.get(name) {
            Some(&k) => k,
            None => self.names.iter().position(|n| n == name)?,
        };
        Some(&self.columns[k])
    }

    /// Draws of λ for unit `i` (0-based).
    pub fn lambda(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.names.iter().map(String::as_str).zip(self.columns.iter().map(Vec::as_slice))
    }

    pub fn summary(&self) -> Result<ChainSummary> {
        summarize(self.columns())
    }

    /// CSV with a header row and one row per draw, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "draw,{}", self.names.join(","))?;
        let mut line = String::new();
        for t in 0..self.n_draws() {
            line.clear();
            line.push_str(&(t + 1).to_string());
            for c in &self.columns {
                line.push(',');
                line.push_str(&format_f64(c[t]));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// JSON summary: means, 2.5% / 97.5% quantiles and inefficiency factors.
    pub fn write_summary_json<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Doc<'a> {
            family: &'a str,
            gamma_prior: f64,
            n_units: usize,
            n_draws: usize,
            seed: u64,
            diagnostics: &'a ChainDiagnostics,
            gamma_acceptance_rate: Option<f64>,
            delta_acceptance_rate: Option<f64>,
            summary: ChainSummary,
        }
        let doc = Doc {
            family: self.family.kind.label(),
            gamma_prior: self.family.gamma,
            n_units: self.n_units,
            n_draws: self.n_draws(),
            seed: self.seed,
            diagnostics: &self.diagnostics,
            gamma_acceptance_rate: self.diagnostics.gamma_acceptance_rate(),
            delta_acceptance_rate: self.diagnostics.delta_acceptance_rate(),
            summary: self.summary()?,
        };
        serde_json::to_writer_pretty(out, &doc)?;
        Ok(())
    }
}

/// Round-trip formatting with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.16e}")
}

/// Runs burn-in plus `spec.draws` sweeps from the default initial state.
pub fn run_chain(data: &CountDataset, spec: &ModelSpec) -> Result<PosteriorDraws> {
    let mut rng = rng::stream(spec.seed);
    run_chain_with_rng(data, spec, &mut rng)
}

pub fn run_chain_with_rng<R: Rng + ?Sized>(
    data: &CountDataset,
    spec: &ModelSpec,
    rng: &mut R,
) -> Result<PosteriorDraws> {
    let sampler = Sampler::new(data, spec)?;
    let mut state = ChainState::initial(data, spec);
    let mut diag = ChainDiagnostics::default();
    let mut out = PosteriorDraws::new(spec, data, state.clone());
    let with_gamma = spec.family.kind != PriorKind::PoissonGamma;
    for t in 0..spec.burn_in + spec.draws {
        sampler.sweep(&mut state, &mut diag, t + 1, rng)?;
        if t >= spec.burn_in {
            out.record(&state, with_gamma, spec.store_latents);
        }
    }
    out.diagnostics = diag;
    out.final_state = state;
    Ok(out)
}
