//! Data sets and model configuration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::{PriorFamily, PriorKind};

/// Observed counts with known offsets and optional covariates (one row per unit).
#[derive(Debug, Clone, PartialEq)]
pub struct CountDataset {
    pub ids: Vec<String>,
    pub counts: Vec<u64>,
    /// Known exposure a_i. Without covariates this is η_i itself.
    pub offsets: Vec<f64>,
    /// m × p design matrix, present only for the regression model.
    pub covariates: Option<DMatrix<f64>>,
}

impl CountDataset {
    pub fn new(
        ids: Vec<String>,
        counts: Vec<u64>,
        offsets: Vec<f64>,
        covariates: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let m = counts.len();
        if ids.len() != m || offsets.len() != m {
            return Err(Error::Validation(format!(
                "ids ({}), counts ({m}) and offsets ({}) must have equal length",
                ids.len(),
                offsets.len()
            )));
        }
        if let Some((i, &a)) = offsets.iter().enumerate().find(|(_, a)| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::Validation(format!(
                "offset of unit {} must be positive and finite, got {a}",
                ids[i]
            )));
        }
        if let Some(x) = &covariates {
            if x.nrows() != m {
                return Err(Error::Validation(format!(
                    "covariate matrix has {} rows for {m} units",
                    x.nrows()
                )));
            }
            if x.ncols() == 0 {
                return Err(Error::Validation("covariate matrix has no columns".into()));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation("covariates must be finite".into()));
            }
        }
        Ok(CountDataset {
            ids,
            counts,
            offsets,
            covariates,
        })
    }

    /// Counts with unit offsets and ids `1..=m`.
    pub fn from_counts(counts: Vec<u64>) -> Self {
        let m = counts.len();
        CountDataset {
            ids: (1..=m).map(|i| i.to_string()).collect(),
            counts,
            offsets: vec![1.0; m],
            covariates: None,
        }
    }

    pub fn with_offsets(counts: Vec<u64>, offsets: Vec<f64>) -> Result<Self> {
        let ids = (1..=counts.len()).map(|i| i.to_string()).collect();
        Self::new(ids, counts, offsets, None)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.as_ref().map_or(0, |x| x.ncols())
    }

    /// η_i = a_i exp(x_i'δ); equals the offsets when there are no covariates.
    pub fn effective_offsets(&self, delta: &[f64]) -> Vec<f64> {
        match &self.covariates {
            None => self.offsets.clone(),
            Some(x) => {
                let lin = x * DVector::from_column_slice(delta);
                self.offsets
                    .iter()
                    .zip(lin.iter())
                    .map(|(a, l)| a * l.exp())
                    .collect()
            }
        }
    }
}

/// Normal prior on the regression coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaPrior {
    pub mean: Vec<f64>,
    /// Row-major p × p covariance.
    pub cov: Vec<Vec<f64>>,
}

impl DeltaPrior {
    /// N(0, variance · I_p).
    pub fn isotropic(p: usize, variance: f64) -> Self {
        DeltaPrior {
            mean: vec![0.0; p],
            cov: (0..p)
                .map(|i| (0..p).map(|j| if i == j { variance } else { 0.0 }).collect())
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cov_matrix(&self) -> DMatrix<f64> {
        let p = self.dim();
        DMatrix::from_fn(p, p, |i, j| self.cov[i][j])
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.dim();
        if self.cov.len() != p || self.cov.iter().any(|r| r.len() != p) {
            return Err(Error::Validation(format!("delta prior covariance must be {p} x {p}")));
        }
        let c = self.cov_matrix();
        for i in 0..p {
            for j in 0..i {
                if (c[(i, j)] - c[(j, i)]).abs() > 1e-12 * (c[(i, j)].abs() + c[(j, i)].abs()).max(1.0) {
                    return Err(Error::Validation("delta prior covariance is not symmetric".into()));
                }
            }
        }
        if c.cholesky().is_none() {
            return Err(Error::Validation(
                "delta prior covariance is not positive definite".into(),
            ));
        }
        Ok(())
    }
}

pub const DEFAULT_DELTA_PRIOR_VARIANCE: f64 = 100.0;

/// Hyperprior constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPriors {
    pub a_alpha: f64,
    pub b_alpha: f64,
    pub a_beta: f64,
    pub b_beta: f64,
    pub a_gamma: f64,
    pub b_gamma: f64,
    /// Bounds of the uniform prior on the IG γ.
    pub eps1: f64,
    pub eps2: f64,
    /// Random-walk standard deviation of the IG γ proposal.
    pub step_sd: f64,
    /// Prior on δ; `None` means N(0, 100 I) of the data's dimension.
    pub delta_prior: Option<DeltaPrior>,
}

impl Default for HyperPriors {
    fn default() -> Self {
        HyperPriors {
            a_alpha: 1.0,
            b_alpha: 1.0,
            a_beta: 1.0,
            b_beta: 1.0,
            a_gamma: 1.0,
            b_gamma: 1.0,
            eps1: 0.001,
            eps2: 150.0,
            step_sd: 1.0,
            delta_prior: None,
        }
    }
}

impl HyperPriors {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("a_alpha", self.a_alpha),
            ("b_alpha", self.b_alpha),
            ("a_beta", self.a_beta),
            ("b_beta", self.b_beta),
            ("a_gamma", self.a_gamma),
            ("b_gamma", self.b_gamma),
            ("step_sd", self.step_sd),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(field, v, "must be positive and finite"));
            }
        }
        if !(self.eps1 > 0.0 && self.eps1 < self.eps2 && self.eps2.is_finite()) {
            return Err(Error::Validation(format!(
                "need 0 < eps1 < eps2 < inf, got [{}, {}]",
                self.eps1, self.eps2
            )));
        }
        if let Some(d) = &self.delta_prior {
            d.validate()?;
        }
        Ok(())
    }

    pub fn delta_prior_for(&self, p: usize) -> Result<DeltaPrior> {
        match &self.delta_prior {
            None => Ok(DeltaPrior::isotropic(p, DEFAULT_DELTA_PRIOR_VARIANCE)),
            Some(d) if d.dim() == p => Ok(d.clone()),
            Some(d) => Err(Error::Validation(format!(
                "delta prior has dimension {} but data has {p} covariates",
                d.dim()
            ))),
        }
    }
}

/// Global parameters held at fixed values instead of being sampled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FixedParams {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
}

/// Everything needed to run one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: PriorFamily,
    pub hyper: HyperPriors,
    /// Stored draws after burn-in.
    pub draws: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Fit the log-linear model η_i = a_i exp(x_i'δ).
    pub regression: bool,
    /// Also store u, v, w and ν draws.
    pub store_latents: bool,
    #[serde(default)]
    pub fixed: FixedParams,
}

pub const SIMULATION_DRAWS: usize = 3_000;
pub const SIMULATION_BURN_IN: usize = 500;
pub const REGRESSION_DRAWS: usize = 20_000;
pub const REGRESSION_BURN_IN: usize = 3_000;

impl ModelSpec {
    pub fn new(family: PriorFamily) -> Self {
        ModelSpec {
            family,
            hyper: HyperPriors::default(),
            draws: SIMULATION_DRAWS,
            burn_in: SIMULATION_BURN_IN,
            seed: 0,
            regression: false,
            store_latents: false,
            fixed: FixedParams::default(),
        }
    }

    /// Chain lengths for the regression model.
    pub fn regression(family: PriorFamily) -> Self {
        ModelSpec {
            draws: REGRESSION_DRAWS,
            burn_in: REGRESSION_BURN_IN,
            regression: true,
            ..Self::new(family)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_lengths(mut self, draws: usize, burn_in: usize) -> Self {
        self.draws = draws;
        self.burn_in = burn_in;
        self
    }

    pub fn validate(&self, data: &CountDataset) -> Result<()> {
        self.hyper.validate()?;
        if self.family.kind != PriorKind::PoissonGamma && !(self.family.gamma > 0.0) {
            return Err(Error::domain("gamma", self.family.gamma, "must be positive"));
        }
        if self.draws == 0 {
            return Err(Error::Validation("draws must be at least 1".into()));
        }
        if self.regression != data.covariates.is_some() {
            return Err(Error::Validation(if self.regression {
                "regression requested but the data has no covariates".into()
            } else {
                "data has covariates but regression is disabled".into()
            }));
        }
        if self.regression {
            self.hyper.delta_prior_for(data.n_covariates())?;
        }
        for (field, v) in [
            ("alpha", self.fixed.alpha),
            ("beta", self.fixed.beta),
            ("gamma", self.fixed.gamma),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::domain(field, v, "fixed value must be positive and finite"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_validation() {
        assert!(CountDataset::with_offsets(vec![1, 2], vec![1.0]).is_err());
        assert!(CountDataset::with_offsets(vec![1, 2], vec![1.0, 0.0]).is_err());
        let x = DMatrix::from_element(3, 1, 1.0);
        assert!(CountDataset::new(
            vec!["a".into(), "b".into()],
            vec![1, 2],
            vec![1.0, 1.0],
            Some(x)
        )
        .is_err());
    }

    #[test]
    fn effective_offsets() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let d = CountDataset::new(vec!["a".into(), "b".into()], vec![1, 2], vec![2.0, 3.0], Some(x)).unwrap();
        let eta = d.effective_offsets(&[0.0, 2f64.ln()]);
        assert!((eta[0] - 2.0).abs() < 1e-15 && (eta[1] - 6.0).abs() < 1e-14);
    }

    #[test]
    fn defaults_and_validation() {
        let h = HyperPriors::default();
        assert_eq!((h.eps1, h.eps2, h.step_sd), (0.001, 150.0, 1.0));
        let p = h.delta_prior_for(2).unwrap();
        assert_eq!(p.cov[1][1], 100.0);
        let bad = HyperPriors {
            eps1: 2.0,
            eps2: 1.0,
            ..HyperPriors::default()
        };
        assert!(bad.validate().is_err());
        let not_pd = DeltaPrior {
            mean: vec![0.0, 0.0],
            cov: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
        };
        assert!(not_pd.validate().is_err());
        let spec = ModelSpec::regression(PriorFamily::poisson_gamma());
        assert!(spec.validate(&CountDataset::from_counts(vec![1])).is_err());
    }
}
