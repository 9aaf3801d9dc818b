//! Geweke (2004) joint-distribution tests for the samplers.
//!
//! The marginal-conditional simulator draws (θ, y) from the prior and the
//! likelihood; the successive-conditional simulator alternates a draw of y
//! given θ with one sampler sweep of θ given y. Both target the same joint
//! law, so moments of any test function must agree.

use rand::Rng;
use rand_distr::{Distribution, Exp, Uniform};
use serde::{Deserialize, Serialize};

use crate::diagnostics::inefficiency_factor;
use crate::distributions::{sample_gamma, sample_inverse_gamma, sample_poisson};
use crate::error::Result;
use crate::mcmc::{ChainDiagnostics, ChainState, Sampler};
use crate::model::{CountDataset, HyperPriors, ModelSpec};
use crate::priors::{PriorFamily, PriorKind};
use crate::rng::{substream, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeConfig {
    pub kind: PriorKind,
    pub hyper: HyperPriors,
    pub offsets: Vec<f64>,
    pub cycles: usize,
    pub seed: u64,
}

impl GewekeConfig {
    /// Hyperpriors under which every tested moment exists: Ga(3, 3) on α
    /// and β, Ga(20, 4) on the EH γ, and U(0.5, 5) on the IG γ.
    pub fn new(kind: PriorKind, m: usize, cycles: usize, seed: u64) -> Self {
        GewekeConfig {
            kind,
            hyper: HyperPriors {
                a_alpha: 3.0,
                b_alpha: 3.0,
                a_beta: 3.0,
                b_beta: 3.0,
                a_gamma: 20.0,
                b_gamma: 4.0,
                eps1: 0.5,
                eps2: 5.0,
                step_sd: 0.5,
                delta_prior: None,
            },
            offsets: (0..m).map(|i| 1.0 + i as f64 * 0.5).collect(),
            cycles,
            seed,
        }
    }

    fn spec(&self) -> ModelSpec {
        let family = match self.kind {
            PriorKind::PoissonGamma => PriorFamily::poisson_gamma(),
            kind => PriorFamily {
                kind,
                gamma: 1.0,
                ig_finite_mean: false,
            },
        };
        ModelSpec {
            hyper: self.hyper.clone(),
            ..ModelSpec::new(family)
        }
    }
}

/// One compared moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeComparison {
    pub name: String,
    pub marginal_mean: f64,
    pub marginal_se: f64,
    pub successive_mean: f64,
    pub successive_se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeReport {
    pub kind: PriorKind,
    pub cycles: usize,
    pub comparisons: Vec<GewekeComparison>,
    pub diagnostics: ChainDiagnostics,
}

impl GewekeReport {
    pub fn max_abs_z(&self) -> f64 {
        self.comparisons.iter().map(|c| c.z.abs()).fold(0.0, f64::max)
    }

    pub fn passes(&self, z_limit: f64) -> bool {
        self.comparisons.iter().all(|c| c.z.abs() < z_limit)
    }

    pub fn worst(&self) -> Option<&GewekeComparison> {
        self.comparisons
            .iter()
            .max_by(|a, b| a.z.abs().total_cmp(&b.z.abs()))
    }
}

/// A parameter draw from the prior, with latents consistent with it.
pub fn draw_from_prior<R: Rng + ?Sized>(
    kind: PriorKind,
    hyper: &HyperPriors,
    offsets: &[f64],
    rng: &mut R,
) -> ChainState {
    let m = offsets.len();
    let alpha = sample_gamma(hyper.a_alpha, hyper.b_alpha, rng);
    let beta = sample_gamma(hyper.a_beta, hyper.b_beta, rng);
    let mut gamma = 1.0;
    let (mut u, mut v, mut w) = (vec![1.0; m], vec![1.0; m], vec![1.0; m]);
    match kind {
        PriorKind::PoissonGamma => {}
        PriorKind::InverseGamma => {
            gamma = Uniform::new(hyper.eps1, hyper.eps2).expect("eps1 < eps2").sample(rng);
            for x in u.iter_mut() {
                *x = sample_inverse_gamma(gamma, gamma, rng);
            }
        }
        PriorKind::ExtremelyHeavy => {
            gamma = sample_gamma(hyper.a_gamma, hyper.b_gamma, rng);
            for i in 0..m {
                w[i] = sample_gamma(gamma, 1.0, rng);
                v[i] = sample_gamma(w[i], 1.0, rng);
                u[i] = (Exp::new(v[i]).expect("positive rate").sample(rng)).max(f64::MIN_POSITIVE);
            }
        }
    }
    let lambda = u.iter().map(|ui| sample_gamma(alpha, beta / ui, rng)).collect();
    ChainState {
        lambda,
        u,
        alpha,
        beta,
        gamma,
        nu: vec![0; m],
        v,
        w,
        delta: Vec::new(),
        eta: offsets.to_vec(),
    }
}

fn draw_counts<R: Rng + ?Sized>(state: &ChainState, rng: &mut R) -> Vec<u64> {
    state
        .lambda
        .iter()
        .zip(&state.eta)
        .map(|(l, e)| sample_poisson(l * e, rng))
        .collect()
}

fn h(x: f64) -> f64 {
    x.ln_1p().ln_1p()
}

/// Test functions: log α, log β, log γ and h(λ_i), h(u_i) with
/// h(x) = log(1 + log(1 + x)), each with its square. h keeps every moment
/// finite even under the EH tail.
fn test_functions(kind: PriorKind, s: &ChainState) -> Vec<f64> {
    let mut base = vec![s.alpha.ln(), s.beta.ln()];
    if kind != PriorKind::PoissonGamma {
        base.push(s.gamma.ln());
    }
    base.extend(s.lambda.iter().map(|&l| h(l)));
    if kind != PriorKind::PoissonGamma {
        base.extend(s.u.iter().map(|&u| h(u)));
    }
    let sq: Vec<f64> = base.iter().map(|x| x * x).collect();
    base.extend(sq);
    base
}

fn test_names(kind: PriorKind, m: usize) -> Vec<String> {
    let mut base = vec!["log alpha".to_string(), "log beta".to_string()];
    if kind != PriorKind::PoissonGamma {
        base.push("log gamma".into());
    }
    base.extend((1..=m).map(|i| format!("h(lambda[{i}])")));
    if kind != PriorKind::PoissonGamma {
        base.extend((1..=m).map(|i| format!("h(u[{i}])")));
    }
    let sq: Vec<String> = base.iter().map(|n| format!("{n}^2")).collect();
    base.extend(sq);
    base
}

/// Runs both simulators with the library's sweep.
pub fn geweke_test(config: &GewekeConfig) -> Result<GewekeReport> {
    let spec = config.spec();
    let probe = CountDataset::with_offsets(vec![0; config.offsets.len()], config.offsets.clone())?;
    Sampler::new(&probe, &spec)?;
    let mut diag = ChainDiagnostics::default();
    let report = geweke_test_with(config, |state, data, t, rng| {
        let sampler = Sampler::new(data, &spec)?;
        sampler.sweep(state, &mut diag, t, rng)
    })?;
    Ok(GewekeReport { diagnostics: diag, ..report })
}

/// Runs both simulators with a caller-supplied sweep `(state, data, index, rng)`.
pub fn geweke_test_with<F>(config: &GewekeConfig, mut sweep: F) -> Result<GewekeReport>
where
    F: FnMut(&mut ChainState, &CountDataset, usize, &mut StreamRng) -> Result<()>,
{
    let kind = config.kind;
    let names = test_names(kind, config.offsets.len());
    let k = names.len();
    let n = config.cycles;

    let mut marginal = vec![Vec::with_capacity(n); k];
    let mut rng = substream(config.seed, 0);
    for _ in 0..n {
        let s = draw_from_prior(kind, &config.hyper, &config.offsets, &mut rng);
        for (col, v) in marginal.iter_mut().zip(test_functions(kind, &s)) {
            col.push(v);
        }
    }

    let mut successive = vec![Vec::with_capacity(n); k];
    let mut rng = substream(config.seed, 1);
    let mut state = draw_from_prior(kind, &config.hyper, &config.offsets, &mut rng);
    for t in 0..n {
        let counts = draw_counts(&state, &mut rng);
        let data = CountDataset::with_offsets(counts, config.offsets.clone())?;
        sweep(&mut state, &data, t + 1, &mut rng)?;
        for (col, v) in successive.iter_mut().zip(test_functions(kind, &state)) {
            col.push(v);
        }
    }

    let moments = |xs: &[f64], chain: bool| -> Result<(f64, f64)> {
        let len = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / len;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (len - 1.0);
        let f = if chain { inefficiency_factor(xs)?.value } else { 1.0 };
        Ok((mean, (var * f / len).sqrt()))
    };
    let comparisons = names
        .into_iter()
        .zip(marginal.iter().zip(&successive))
        .map(|(name, (a, b))| {
            let (ma, sa) = moments(a, false)?;
            let (mb, sb) = moments(b, true)?;
            let se = (sa * sa + sb * sb).sqrt();
            Ok(GewekeComparison {
                name,
                marginal_mean: ma,
                marginal_se: sa,
                successive_mean: mb,
                successive_se: sb,
                z: if se > 0.0 { (mb - ma) / se } else { 0.0 },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GewekeReport {
        kind,
        cycles: n,
        comparisons,
        diagnostics: ChainDiagnostics::default(),
    })
}
