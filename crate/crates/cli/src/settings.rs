//! Flat `key = value` configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use countshrink::model::{DeltaPrior, HyperPriors, ModelSpec, DEFAULT_DELTA_PRIOR_VARIANCE};
use countshrink::priors::{PriorFamily, PriorKind};

use crate::CliError;

#[derive(Debug, Default)]
pub struct Settings {
    given: BTreeMap<String, String>,
    used: BTreeMap<String, String>,
}

impl Settings {
    /// Reads the config file, if any. Blank lines and `#` comments are skipped.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut s = Settings::default();
        let Some(path) = path else { return Ok(s) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Validation(format!("{}:{}: expected `key = value`", path.display(), n + 1))
            })?;
            s.given.insert(normalize(k), v.trim().to_string());
        }
        Ok(s)
    }

    /// Applies `key=value` overrides from `--set`.
    pub fn apply_sets(&mut self, sets: &[String]) -> Result<(), CliError> {
        for kv in sets {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("--set expects key=value, got `{kv}`")))?;
            self.given.insert(normalize(k), v.trim().to_string());
        }
        Ok(())
    }

    /// A dedicated flag wins over both the file and `--set`.
    pub fn flag<T: Display>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.given.insert(key.to_string(), v.to_string());
        }
    }

    pub fn get<T>(&mut self, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match self.given.get(key) {
            Some(raw) => raw
                .parse::<T>()
                .map_err(|e| CliError::Validation(format!("bad value `{raw}` for `{key}`: {e}")))?,
            None => default,
        };
        self.used.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    pub fn get_opt<T>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let Some(raw) = self.given.get(key).cloned() else {
            return Ok(None);
        };
        let value = raw
            .parse::<T>()
            .map_err(|e| CliError::Validation(format!("bad value `{raw}` for `{key}`: {e}")))?;
        self.used.insert(key.to_string(), value.to_string());
        Ok(Some(value))
    }

    pub fn get_list<T>(&mut self, key: &str, default: &str) -> Result<Vec<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.given.get(key).cloned().unwrap_or_else(|| default.to_string());
        self.used.insert(key.to_string(), raw.clone());
        raw.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<T>()
                    .map_err(|e| CliError::Validation(format!("bad entry `{t}` in `{key}`: {e}")))
            })
            .collect()
    }

    /// Fails on keys that no part of the command read (typos in the file).
    pub fn finish(&self) -> Result<(), CliError> {
        let unknown: Vec<&str> = self
            .given
            .keys()
            .filter(|k| !self.used.contains_key(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(format!("unknown config keys: {}", unknown.join(", "))))
        }
    }

    /// Every value the run used, defaults included.
    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.used
    }

    /// Hyperprior constants; the δ prior is left to [`Settings::model_spec`].
    pub fn hyper_priors(&mut self) -> Result<HyperPriors, CliError> {
        let d = HyperPriors::default();
        Ok(HyperPriors {
            a_alpha: self.get("a_alpha", d.a_alpha)?,
            b_alpha: self.get("b_alpha", d.b_alpha)?,
            a_beta: self.get("a_beta", d.a_beta)?,
            b_beta: self.get("b_beta", d.b_beta)?,
            a_gamma: self.get("a_gamma", d.a_gamma)?,
            b_gamma: self.get("b_gamma", d.b_gamma)?,
            eps1: self.get("eps1", d.eps1)?,
            eps2: self.get("eps2", d.eps2)?,
            step_sd: self.get("step_sd", d.step_sd)?,
            delta_prior: None,
        })
    }

    /// `n_covariates` > 0 switches on the regression model.
    pub fn model_spec(&mut self, n_covariates: usize) -> Result<ModelSpec, CliError> {
        let kind: PriorKind = self.get("family", PriorKind::ExtremelyHeavy)?;
        let gamma: f64 = self.get("gamma", 1.0)?;
        let family = match kind {
            PriorKind::PoissonGamma => PriorFamily::poisson_gamma(),
            k => PriorFamily::new(k, gamma)?.with_finite_mean(self.get("finite_mean", false)?),
        };
        let hyper = self.hyper_priors()?;
        let regression = n_covariates > 0;
        let variance: f64 = self.get("delta_prior_variance", DEFAULT_DELTA_PRIOR_VARIANCE)?;
        let base = if regression {
            ModelSpec::regression(family)
        } else {
            ModelSpec::new(family)
        };
        Ok(ModelSpec {
            draws: self.get("draws", base.draws)?,
            burn_in: self.get("burn_in", base.burn_in)?,
            seed: self.get("seed", 1u64)?,
            store_latents: self.get("store_latents", false)?,
            hyper: HyperPriors {
                delta_prior: regression.then(|| DeltaPrior::isotropic(n_covariates, variance)),
                ..hyper
            },
            ..base
        })
    }
}

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}
