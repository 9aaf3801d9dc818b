use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::Serialize;

use countshrink::diagnostics;
use countshrink::mcmc::{format_f64, lambda_name, run_chain};
use countshrink::model::FixedParams;
use countshrink::oracle::bias_curve;
use countshrink::priors::{
    density_grid, marginal_posterior_lambda, marginal_prior_lambda, GlobalParams, GridScale, PriorFamily,
    PriorKind, DEFAULT_GRID_POINTS,
};
use countshrink::rng::stream;
use countshrink::simstudy::{
    generate_areal, run_study, ArealConfig, Method, ScenarioId, StudyConfig, DESK_REPLICATES, FULL_REPLICATES,
};

use crate::data::{create, read_dataset, read_draws, write_dataset};
use crate::settings::Settings;
use crate::{CliError, Common, ModelFlags};

#[derive(Serialize)]
struct Manifest<'a> {
    program: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    config: &'a BTreeMap<String, String>,
    inputs: BTreeMap<&'static str, String>,
    outputs: Vec<String>,
    timings: BTreeMap<&'static str, f64>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    details: serde_json::Value,
}

impl<'a> Manifest<'a> {
    fn new(command: &'static str, seed: u64, config: &'a BTreeMap<String, String>) -> Self {
        Manifest {
            program: "countshrink",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            details: serde_json::Value::Null,
        }
    }

    fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut out = create(&dir.join("manifest.json"))?;
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)?;
        out.flush()?;
        Ok(())
    }
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", dir.display())))
}

fn settings(common: &Common, model: Option<&ModelFlags>) -> Result<Settings, CliError> {
    let mut s = Settings::load(common.config.as_deref())?;
    s.apply_sets(&common.sets)?;
    s.flag("seed", common.seed);
    if let Some(m) = model {
        s.flag("family", m.family.clone());
        s.flag("gamma", m.gamma);
        s.flag("draws", m.draws);
        s.flag("burn_in", m.burn_in);
    }
    Ok(s)
}

#[derive(Args)]
pub struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output_dir: PathBuf,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelFlags,
    /// Also write every stored draw to draws.csv.
    #[arg(long)]
    write_draws: bool,
    /// Number of largest λ posterior means listed in hotspots.csv.
    #[arg(long)]
    top: Option<usize>,
    /// Hold α at this value.
    #[arg(long)]
    fix_alpha: Option<f64>,
    /// Hold β at this value.
    #[arg(long)]
    fix_beta: Option<f64>,
    /// Hold γ at its initial value.
    #[arg(long)]
    fix_gamma: bool,
}

pub fn fit(a: FitArgs) -> Result<(), CliError> {
    let mut s = settings(&a.common, Some(&a.model))?;
    s.flag("top", a.top);
    s.flag("fix_alpha", a.fix_alpha);
    s.flag("fix_beta", a.fix_beta);
    if a.fix_gamma {
        s.flag("fix_gamma", Some(true));
    }
    if a.write_draws {
        s.flag("write_draws", Some(true));
    }
    let data = read_dataset(&a.input)?;
    let mut spec = s.model_spec(data.n_covariates())?;
    let top: usize = s.get("top", 10)?;
    let write_draws: bool = s.get("write_draws", false)?;
    spec.fixed = FixedParams {
        alpha: s.get_opt("fix_alpha")?,
        beta: s.get_opt("fix_beta")?,
        gamma: (s.get("fix_gamma", false)? && spec.family.kind != PriorKind::PoissonGamma)
            .then_some(spec.family.gamma),
    };
    s.finish()?;
    prepare_dir(&a.output_dir)?;

    let start = Instant::now();
    let draws = run_chain(&data, &spec)?;
    let sampling = start.elapsed().as_secs_f64();
    let summary = draws.summary()?;

    let mut outputs = vec!["summary.csv".to_string(), "hotspots.csv".into(), "summary.json".into()];
    let mut out = create(&a.output_dir.join("summary.csv"))?;
    writeln!(out, "parameter,id,mean,sd,q025,q975,inefficiency_factor")?;
    for p in &summary.params {
        let id = p
            .name
            .strip_prefix("lambda[")
            .and_then(|r| r.strip_suffix(']'))
            .and_then(|k| k.parse::<usize>().ok())
            .map(|k| data.ids[k - 1].as_str())
            .unwrap_or("");
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.name,
            id,
            format_f64(p.mean),
            format_f64(p.sd),
            format_f64(p.q025),
            format_f64(p.q975),
            p.inefficiency_factor.map(format_f64).unwrap_or_default()
        )?;
    }
    out.flush()?;

    let mut ranked: Vec<(usize, f64)> = (0..data.len())
        .map(|i| (i, summary.get(&lambda_name(i)).map_or(f64::NAN, |p| p.mean)))
        .collect();
    ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    let mut out = create(&a.output_dir.join("hotspots.csv"))?;
    writeln!(out, "rank,id,y,mean,q025,q975")?;
    for (rank, &(i, mean)) in ranked.iter().take(top).enumerate() {
        let p = summary.get(&lambda_name(i)).expect("lambda summarized");
        writeln!(
            out,
            "{},{},{},{},{},{}",
            rank + 1,
            data.ids[i],
            data.counts[i],
            format_f64(mean),
            format_f64(p.q025),
            format_f64(p.q975)
        )?;
    }
    out.flush()?;

    let mut out = create(&a.output_dir.join("summary.json"))?;
    draws.write_summary_json(&mut out)?;
    writeln!(out)?;
    out.flush()?;

    if write_draws {
        let mut out = create(&a.output_dir.join("draws.csv"))?;
        draws.write_csv(&mut out)?;
        out.flush()?;
        outputs.push("draws.csv".into());
    }

    let mut m = Manifest::new("fit", spec.seed, s.resolved());
    m.inputs.insert("input", a.input.display().to_string());
    m.inputs.insert("units", data.len().to_string());
    m.inputs.insert("covariates", data.n_covariates().to_string());
    m.outputs = outputs;
    m.timings.insert("sampling_seconds", sampling);
    m.details = serde_json::json!({
        "gamma_acceptance_rate": draws.diagnostics.gamma_acceptance_rate(),
        "delta_acceptance_rate": draws.diagnostics.delta_acceptance_rate(),
        "delta_prior_fallbacks": draws.diagnostics.delta_prior_fallbacks,
    });
    m.write(&a.output_dir)?;
    Ok(())
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    output_dir: PathBuf,
    #[command(flatten)]
    common: Common,
    /// Comma-separated scenario ids (I, II, III, IV).
    #[arg(long)]
    scenarios: Option<String>,
    /// Comma-separated outlier proportions.
    #[arg(long)]
    omegas: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Use the full 1000-replicate design.
    #[arg(long)]
    full: bool,
    /// Comma-separated subset of IG, EH, PG, ML.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
}

pub fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let mut s = settings(&a.common, None)?;
    s.flag("scenarios", a.scenarios);
    s.flag("omegas", a.omegas);
    s.flag("m", a.m);
    s.flag("methods", a.methods);
    s.flag("threads", a.threads);
    s.flag("draws", a.draws);
    s.flag("burn_in", a.burn_in);
    s.flag("replicates", a.full.then_some(FULL_REPLICATES).or(a.replicates));
    let d = StudyConfig::default();
    let hyper = s.hyper_priors()?;
    let config = StudyConfig {
        scenarios: s.get_list::<ScenarioId>("scenarios", "I")?,
        omegas: s.get_list::<f64>("omegas", "0.1")?,
        m: s.get("m", d.m)?,
        methods: s.get_list::<Method>("methods", "IG,EH,PG,ML")?,
        replicates: s.get("replicates", DESK_REPLICATES)?,
        draws: s.get("draws", d.draws)?,
        burn_in: s.get("burn_in", d.burn_in)?,
        hyper,
        seed: s.get("seed", d.seed)?,
        threads: s.get("threads", 1)?,
    };
    s.finish()?;
    config.validate()?;
    prepare_dir(&a.output_dir)?;

    let result = run_study(&config)?;
    let mut out = create(&a.output_dir.join("metrics.csv"))?;
    result.table.write_csv(&mut out)?;
    out.flush()?;

    let mut out = create(&a.output_dir.join("runs.csv"))?;
    writeln!(out, "scenario,omega,method,replicates,failures,mse,mean_inefficiency_factor,mean_seconds")?;
    for r in &result.table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.scenario,
            r.omega,
            r.method,
            r.replicates,
            r.failures,
            format_f64(r.metrics.mse),
            r.mean_if.map(format_f64).unwrap_or_else(|| "NA".into()),
            format_f64(r.mean_seconds)
        )?;
    }
    out.flush()?;

    let mut m = Manifest::new("simulate", config.seed, s.resolved());
    m.outputs = vec!["metrics.csv".into(), "runs.csv".into()];
    m.timings.insert("wall_seconds", result.wall_seconds);
    m.details = serde_json::json!({
        "replicates_requested": config.replicates,
        "failures": result.table.rows.iter().map(|r| r.failures).sum::<usize>(),
    });
    m.write(&a.output_dir)?;
    Ok(())
}

#[derive(Args)]
pub struct CurveArgs {
    /// IG, EH or PG.
    #[arg(long)]
    family: String,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Output CSV.
    #[arg(long)]
    output: PathBuf,
}

impl CurveArgs {
    fn family(&self) -> Result<(PriorFamily, GlobalParams), CliError> {
        let kind: PriorKind = self.family.parse()?;
        let family = match kind {
            PriorKind::PoissonGamma => PriorFamily::poisson_gamma(),
            k => PriorFamily::new(k, self.gamma)?,
        };
        Ok((family, GlobalParams::new(self.alpha, self.beta)?))
    }
}

#[derive(Args)]
pub struct DensityArgs {
    #[command(flatten)]
    curve: CurveArgs,
    /// Observed count; gives the marginal posterior instead of the prior.
    #[arg(long)]
    y: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 0.01)]
    lower: f64,
    #[arg(long, default_value_t = 10.0)]
    upper: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    points: usize,
    /// Log-spaced grid.
    #[arg(long)]
    log_grid: bool,
}

pub fn density(a: DensityArgs) -> Result<(), CliError> {
    let (family, globals) = a.curve.family()?;
    let scale = if a.log_grid { GridScale::Log } else { GridScale::Linear };
    let grid = density_grid(a.lower, a.upper, a.points, scale)?;
    let values = match a.y {
        Some(y) => marginal_posterior_lambda(&family, &globals, y, a.eta, &grid)?,
        None => grid
            .iter()
            .map(|&l| marginal_prior_lambda(&family, &globals, l))
            .collect::<countshrink::Result<Vec<_>>>()?,
    };
    let mut out = create(&a.curve.output)?;
    writeln!(out, "lambda,density")?;
    for (l, v) in grid.iter().zip(&values) {
        writeln!(out, "{},{}", format_f64(*l), format_f64(*v))?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Args)]
pub struct BiasArgs {
    #[command(flatten)]
    curve: CurveArgs,
    /// Comma-separated increasing counts; overrides the log grid.
    #[arg(long, value_delimiter = ',')]
    y_values: Vec<u64>,
    /// Largest count of the default log grid 1..y_max.
    #[arg(long, default_value_t = 10_000)]
    y_max: u64,
    #[arg(long, default_value_t = 60)]
    points: usize,
}

pub fn bias(a: BiasArgs) -> Result<(), CliError> {
    let (family, globals) = a.curve.family()?;
    let ys = if a.y_values.is_empty() {
        let grid = density_grid(1.0, a.y_max.max(2) as f64, a.points.max(2), GridScale::Log)?;
        let mut ys: Vec<u64> = grid.iter().map(|y| y.round() as u64).collect();
        ys.dedup();
        ys
    } else {
        a.y_values
    };
    let curve = bias_curve(&family, &globals, &ys)?;
    let mut out = create(&a.curve.output)?;
    writeln!(out, "y,bias,relative")?;
    for k in 0..ys.len() {
        let rel = curve.relative[k];
        writeln!(
            out,
            "{},{},{}",
            ys[k],
            format_f64(curve.bias[k]),
            if rel.is_nan() { "NA".into() } else { format_f64(rel) }
        )?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Args)]
pub struct SummarizeArgs {
    /// Draws CSV written by `fit --write-draws`.
    #[arg(long)]
    input: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn summarize(a: SummarizeArgs) -> Result<(), CliError> {
    let (names, cols) = read_draws(&a.input)?;
    let summary = diagnostics::summarize(names.iter().map(String::as_str).zip(cols.iter().map(Vec::as_slice)))?;
    match a.output {
        Some(path) => {
            let mut out = create(&path)?;
            summary.write_csv(&mut out)?;
            out.flush()?;
        }
        None => summary.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}

#[derive(Args)]
pub struct ArealArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 500)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also write the true λ and hotspot flags here.
    #[arg(long)]
    truth: Option<PathBuf>,
}

pub fn areal(a: ArealArgs) -> Result<(), CliError> {
    let cfg = ArealConfig::default_areal(a.m);
    let draw = generate_areal(&cfg, &mut stream(a.seed))?;
    write_dataset(&a.output, &draw.data)?;
    if let Some(path) = a.truth {
        let mut out = create(&path)?;
        writeln!(out, "id,lambda,hotspot")?;
        for i in 0..draw.lambda.len() {
            writeln!(out, "{},{},{}", draw.data.ids[i], format_f64(draw.lambda[i]), u8::from(draw.hotspot[i]))?;
        }
        out.flush()?;
    }
    Ok(())
}
