//! Posterior summaries and the inefficiency factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::format_f64;

/// Inefficiency factor of one chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InefficiencyFactor {
    pub value: f64,
    /// The chain was constant, so no autocorrelation could be estimated.
    pub degenerate: bool,
}

pub const MIN_IF_DRAWS: usize = 100;

/// 1 + 2 Σ ρ̂(k), summing sample autocorrelations up to (not including) the
/// first lag whose estimate is non-positive.
pub fn inefficiency_factor(draws: &[f64]) -> Result<InefficiencyFactor> {
    let n = draws.len();
    if n < MIN_IF_DRAWS {
        return Err(Error::Validation(format!(
            "inefficiency factor needs at least {MIN_IF_DRAWS} draws, got {n}"
        )));
    }
    let mean = draws.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = draws.iter().map(|x| x - mean).collect();
    let c0 = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if !(c0 > 0.0) || c0 <= f64::EPSILON * f64::EPSILON * mean * mean {
        return Ok(InefficiencyFactor {
            value: 1.0,
            degenerate: true,
        });
    }
    let mut sum = 0.0;
    for k in 1..n {
        let ck = centered[..n - k]
            .iter()
            .zip(&centered[k..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64;
        let rho = ck / c0;
        if rho <= 0.0 {
            break;
        }
        sum += rho;
    }
    Ok(InefficiencyFactor {
        value: 1.0 + 2.0 * sum,
        degenerate: false,
    })
}

/// Quantile by linear interpolation between order statistics, inclusive of
/// both ends: position (n − 1) q in the sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(draws: &[f64], q: f64) -> f64 {
    let mut s = draws.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, q)
}

/// Equal-tailed 95% interval.
pub fn central_interval(draws: &[f64]) -> (f64, f64) {
    let mut s = draws.to_vec();
    s.sort_by(f64::total_cmp);
    (quantile_sorted(&s, 0.025), quantile_sorted(&s, 0.975))
}

/// Kolmogorov-Smirnov distance between the empirical law of `xs` and `cdf`.
pub fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).abs().max((f - (k + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Summary of one parameter's draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    /// `None` when the chain is shorter than [`MIN_IF_DRAWS`].
    pub inefficiency_factor: Option<f64>,
    pub degenerate: bool,
    pub n_draws: usize,
}

impl ParamSummary {
    /// Monte Carlo standard error of the mean, sd · sqrt(IF / n).
    pub fn mc_se(&self) -> f64 {
        let f = self.inefficiency_factor.unwrap_or(1.0);
        self.sd * (f / self.n_draws as f64).sqrt()
    }
}

pub fn summarize_param(name: &str, draws: &[f64]) -> Result<ParamSummary> {
    let n = draws.len();
    if n == 0 {
        return Err(Error::Validation(format!("no draws for `{name}`")));
    }
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let (q025, q975) = central_interval(draws);
    let (inefficiency_factor, degenerate) = if n >= MIN_IF_DRAWS {
        let f = inefficiency_factor(draws)?;
        (Some(f.value), f.degenerate)
    } else {
        (None, var == 0.0)
    };
    Ok(ParamSummary {
        name: name.to_string(),
        mean,
        sd: var.sqrt(),
        q025,
        q975,
        inefficiency_factor,
        degenerate,
        n_draws: n,
    })
}

/// Per-parameter summaries in input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub params: Vec<ParamSummary>,
    pub n_draws: usize,
}

impl ChainSummary {
    pub fn get(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }

    /// One row per parameter; IF is empty for short chains.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "parameter,mean,sd,q025,q975,inefficiency_factor")?;
        for p in &self.params {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                p.name,
                format_f64(p.mean),
                format_f64(p.sd),
                format_f64(p.q025),
                format_f64(p.q975),
                p.inefficiency_factor.map(format_f64).unwrap_or_default()
            )?;
        }
        Ok(())
    }
}

pub fn summarize<'a, I>(columns: I) -> Result<ChainSummary>
where
    I: IntoIterator<Item = (&'a str, &'a [f64])>,
{
    let params = columns
        .into_iter()
        .map(|(name, draws)| summarize_param(name, draws))
        .collect::<Result<Vec<_>>>()?;
    let n_draws = params.first().map_or(0, |p| p.n_draws);
    Ok(ChainSummary { params, n_draws })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn ar1(rho: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::stream(seed);
        let mut x = 0.0;
        let s = (1.0 - rho * rho).sqrt();
        (0..n)
            .map(|_| {
                let e: f64 = rng.sample(StandardNormal);
                x = rho * x + s * e;
                x
            })
            .collect()
    }

    #[test]
    fn if_white_noise_and_ar1() {
        let f = inefficiency_factor(&ar1(0.0, 100_000, 1)).unwrap();
        assert!((f.value - 1.0).abs() < 0.1, "{}", f.value);
        let f = inefficiency_factor(&ar1(0.5, 100_000, 2)).unwrap();
        assert!((f.value / 3.0 - 1.0).abs() < 0.1, "{}", f.value);
    }

    #[test]
    fn if_degenerate_and_short() {
        let f = inefficiency_factor(&[2.5; 500]).unwrap();
        assert!(f.degenerate);
        assert!(inefficiency_factor(&[1.0; 10]).is_err());
    }

    #[test]
    fn quantile_rule() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert!((quantile(&xs, 0.025) - 25.975).abs() < 1e-12);
        assert!((quantile(&xs, 0.975) - 975.025).abs() < 1e-12);
        assert_eq!(quantile(&[3.0], 0.3), 3.0);
    }

    #[test]
    fn constant_chain_summary() {
        let s = summarize_param("c", &[4.0; 200]).unwrap();
        assert_eq!((s.mean, s.sd, s.q025, s.q975), (4.0, 0.0, 4.0, 4.0));
        assert!(s.degenerate);
    }

    #[test]
    fn conjugate_gamma_chain_mean() {
        let mut rng = crate::rng::stream(3);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| crate::distributions::sample_gamma(2.0, 2.0, &mut rng))
            .collect();
        let s = summarize_param("g", &xs).unwrap();
        assert!((s.mean - 1.0).abs() < 3.0 * s.mc_se());
    }

    proptest! {
        #[test]
        fn quantiles_shift_exactly(xs in prop::collection::vec(-1e3f64..1e3, 1..200), c in -100i32..100) {
            let c = f64::from(c);
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            for q in [0.025, 0.975] {
                let a = quantile(&xs, q) + c;
                let b = quantile(&shifted, q);
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn if_affine_invariant(seed in 0u64..1000, scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
            let xs = ar1(0.3, 500, seed);
            let ys: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
            let a = inefficiency_factor(&xs).unwrap().value;
            let b = inefficiency_factor(&ys).unwrap().value;
            prop_assert!((a - b).abs() < 1e-8);
        }
    }
}
