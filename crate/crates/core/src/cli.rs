//! Command-line front end. Tables go to `--out` (or standard output when
//! absent), progress to standard error and a one-line JSON summary to
//! standard output.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::bounds::{elbo, lb_gamma, log_evidence, ConjugateGaussianModel};
use crate::calibration::{self, generate_replica, gamma_label, StudySpec};
use crate::error::Error;
use crate::estimators::{self, EstimatorReport, SamplerSpec, SemiImplicitToy};
use crate::fraction::Fraction;
use crate::gaussian::Gaussian1D;
use crate::gmm;
use crate::multinomial::{self, LogitModel, LogitPosteriorParams};
use crate::numeric::format_sig6;

pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Parser)]
#[command(name = "fracvi", version, about = "Fractional variational inference toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replica calibration study of the Gaussian mixture.
    Calibrate(StudyArgs),
    /// Fit one simulated replica at every γ of the grid.
    GmmFit(GmmFitArgs),
    /// Fit the multinomial-logit posterior for given class counts.
    MultinomialFit(MultinomialArgs),
    /// Exact bounds of a conjugate Gaussian model against its evidence.
    BoundsDemo(DemoArgs),
    /// Monte Carlo bound estimators on a conjugate Gaussian model.
    Estimate(EstimateArgs),
    /// Importance-sampling evidence for mixture replicas.
    IsEvidence(IsArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    #[serde(skip)]
    pub dump_config: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StudyArgs {
    #[arg(long, default_value = "table1")]
    pub preset: String,
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Comma-separated fractions in (0, 1]; γ = 1 is always added.
    #[arg(long, value_delimiter = ',')]
    pub gamma_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GmmFitArgs {
    #[command(flatten)]
    pub study: StudyArgs,
    /// Replica index to simulate.
    #[arg(long, default_value_t = 0)]
    pub replica: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MultinomialArgs {
    /// Comma-separated class counts.
    #[arg(long, value_delimiter = ',', required = true)]
    pub counts: Vec<u64>,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    #[arg(long, default_value_t = 50_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DemoArgs {
    /// Number of simulated observations.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Comma-separated fractions; any non-zero value is allowed.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true,
          default_value = "-0.5,0.1,0.3,0.5,0.7,0.9,1.0,2.0")]
    pub gamma_grid: Vec<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Lb,
    LbUnnormalized,
    Lbh,
    Lbbh,
    LbbhAlt,
    All,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long, value_enum, default_value_t = EstimatorKind::All)]
    pub estimator: EstimatorKind,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = 10_000)]
    pub ns: usize,
    #[arg(long, default_value_t = 100)]
    pub ns_prime: usize,
    #[arg(long, default_value_t = 1)]
    pub ui_size: usize,
    /// Number of simulated observations.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IsArgs {
    #[command(flatten)]
    pub study: StudyArgs,
    #[arg(long, default_value_t = 1000)]
    pub ns: usize,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }

    fn numerical(context: &str, err: Error) -> Self {
        match err {
            Error::InvalidArgument(m) => CliError::Validation(m),
            other => CliError::Numerical(format!("{context}: {other}")),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn validation(err: Error) -> CliError {
    CliError::Validation(err.to_string())
}

fn open_out(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn dump<T: Serialize>(cfg: &T) -> CliResult<serde_json::Value> {
    let v = serde_json::to_value(cfg).map_err(|e| CliError::Validation(e.to_string()))?;
    println!("{v}");
    Ok(json!({ "dumped_config": true }))
}

impl StudyArgs {
    pub fn resolve(&self) -> CliResult<StudySpec> {
        let mut spec = StudySpec::preset(&self.preset).ok_or_else(|| {
            CliError::Validation(format!(
                "preset: unknown preset '{}', expected one of {}",
                self.preset,
                StudySpec::PRESETS.join(", ")
            ))
        })?;
        if let Some(r) = self.replicas {
            spec.replicas = r;
        }
        if let Some(g) = &self.gamma_grid {
            spec.gamma_grid = g.clone();
        }
        if let Some(a) = self.alpha {
            spec.alpha = a;
        }
        spec.seed = self.common.seed;
        spec.validate().map_err(validation)?;
        Ok(spec)
    }
}

/// Runs a parsed command and returns the summary object.
pub fn run(cli: &Cli) -> CliResult<serde_json::Value> {
    let start = Instant::now();
    let mut summary = match &cli.command {
        Command::Calibrate(a) => calibrate(a)?,
        Command::GmmFit(a) => gmm_fit(a)?,
        Command::MultinomialFit(a) => multinomial_fit(a)?,
        Command::BoundsDemo(a) => bounds_demo(a)?,
        Command::Estimate(a) => estimate(a)?,
        Command::IsEvidence(a) => is_evidence(a)?,
    };
    if let Some(obj) = summary.as_object_mut() {
        obj.insert("elapsed_seconds".into(), json!(start.elapsed().as_secs_f64()));
    }
    Ok(summary)
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn calibrate(args: &StudyArgs) -> CliResult<serde_json::Value> {
    let spec = args.resolve()?;
    if args.common.dump_config {
        return dump(&spec);
    }
    eprintln!("calibrating {} replicas of preset {}", spec.replicas, args.preset);
    let report = calibration::run_study(&spec).map_err(|e| CliError::numerical("calibration study", e))?;
    let mut out = open_out(&args.common.out)?;
    let rows = calibration::write_csv(&mut out, &report.rows)?;
    out.flush()?;
    Ok(json!({
        "command": "calibrate",
        "rows": rows,
        "gamma_star_r_ell": report.gamma_star_r_ell,
        "gamma_star_r_kappa": report.gamma_star_r_kappa,
        "gamma_star_r_invsq": report.gamma_star_r_invsq,
    }))
}

fn gmm_fit(args: &GmmFitArgs) -> CliResult<serde_json::Value> {
    let spec = args.study.resolve()?;
    if args.study.common.dump_config {
        return dump(&json!({ "spec": spec, "replica": args.replica }));
    }
    let model = spec.model(generate_replica(&spec, args.replica)).map_err(validation)?;
    let mut out = open_out(&args.study.common.out)?;
    writeln!(out, "label,component,mean,variance,bound")?;
    let mut rows = 0;
    for g in spec.all_gammas() {
        eprintln!("fitting γ = {g}");
        let fit = gmm::fit_default(&model, g).map_err(|e| CliError::numerical(&format!("fit at γ = {g}"), e))?;
        let perm = calibration::match_components(&fit.state, &spec.true_means);
        for (k, &j) in perm.iter().enumerate() {
            let c = fit.state.components[j];
            writeln!(
                out,
                "LB_{},{},{},{},{}",
                gamma_label(g),
                k + 1,
                format_sig6(c.mean()),
                format_sig6(c.variance()),
                format_sig6(fit.bound)
            )?;
            rows += 1;
        }
    }
    out.flush()?;
    Ok(json!({ "command": "gmm-fit", "rows": rows }))
}

fn multinomial_fit(args: &MultinomialArgs) -> CliResult<serde_json::Value> {
    if args.common.dump_config {
        return dump(args);
    }
    let model = LogitModel::new(args.counts.clone()).map_err(validation)?;
    let init = LogitPosteriorParams::prior_matched(model.classes());
    let fit = multinomial::fit(&model, &init, args.step, args.max_iters, args.tol)
        .map_err(|e| CliError::numerical("multinomial fit", e))?;
    let bound = multinomial::lb_value(&fit.params, &model).map_err(|e| CliError::numerical("bound", e))?;
    let mut out = open_out(&args.common.out)?;
    writeln!(out, "label,component,mean,variance,bound")?;
    for (c, (m, v)) in fit.params.mu.iter().zip(&fit.params.sigma2).enumerate() {
        writeln!(out, "fit,{},{},{},{}", c + 1, format_sig6(*m), format_sig6(*v), format_sig6(bound))?;
    }
    out.flush()?;
    Ok(json!({
        "command": "multinomial-fit",
        "rows": model.classes(),
        "iterations": fit.iterations,
        "converged": fit.converged,
        "gradient_norm": fit.gradient_norm,
    }))
}

/// Conjugate model with prior `N(0, 1)`, unit noise and data simulated
/// around 1.
fn demo_model(n: usize, seed: u64) -> CliResult<ConjugateGaussianModel> {
    if n == 0 {
        return Err(CliError::Validation("n: must be at least 1".into()));
    }
    let spec = StudySpec { k: 1, n, true_means: vec![1.0], replicas: 1, seed, ..StudySpec::preset("table1").unwrap() };
    ConjugateGaussianModel::new(Gaussian1D::standard(), 1.0, generate_replica(&spec, 0)).map_err(validation)
}

fn write_estimate_header(out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "label,value,data_term,complexity_term,ns,seed")
}

fn write_estimate(out: &mut dyn Write, label: &str, r: &EstimatorReport) -> io::Result<()> {
    writeln!(
        out,
        "{label},{},{},{},{},{}",
        format_sig6(r.value),
        format_sig6(r.data_term),
        format_sig6(r.complexity_term),
        r.spec.ns,
        r.spec.seed
    )
}

fn bounds_demo(args: &DemoArgs) -> CliResult<serde_json::Value> {
    if args.common.dump_config {
        return dump(args);
    }
    let model = demo_model(args.n, args.common.seed)?;
    let q = model.bayes_posterior();
    let mut out = open_out(&args.common.out)?;
    write_estimate_header(&mut out)?;
    let exact = SamplerSpec { ns: 0, ns_prime: 0, ui_size: 0, seed: args.common.seed };
    let evidence = log_evidence(&model);
    write_estimate(&mut out, "log_evidence", &EstimatorReport { value: evidence, data_term: evidence, complexity_term: 0.0, kl_term: None, spec: exact })?;
    for &g in &args.gamma_grid {
        let gamma = Fraction::new(g).map_err(|e| CliError::Validation(format!("gamma_grid: {e}")))?;
        let bound = if gamma.is_elbo() { Ok(elbo(&model, &q)) } else { lb_gamma(&model, &q, gamma) };
        let r = match bound {
            Ok(b) => EstimatorReport { value: b.total, data_term: b.data_term, complexity_term: b.complexity_term, kl_term: None, spec: exact },
            // A divergent complexity integral makes the bound infinite on its trivial side.
            Err(Error::DivergenceInfinite(_)) => {
                let complexity = if g < 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
                EstimatorReport { value: -complexity, data_term: f64::NAN, complexity_term: complexity, kl_term: None, spec: exact }
            }
            Err(e) => return Err(CliError::numerical(&format!("bound at γ = {g}"), e)),
        };
        write_estimate(&mut out, &format!("LB_{}", gamma_label(g)), &r)?;
    }
    out.flush()?;
    Ok(json!({ "command": "bounds-demo", "rows": args.gamma_grid.len() + 1, "log_evidence": evidence }))
}

fn estimate(args: &EstimateArgs) -> CliResult<serde_json::Value> {
    if args.common.dump_config {
        return dump(args);
    }
    let g = args.gamma;
    if !(g > 0.0 && g < 1.0) {
        return Err(CliError::Validation(format!("gamma: must lie in (0, 1), got {g}")));
    }
    let model = demo_model(args.n, args.common.seed)?;
    let spec = SamplerSpec::hierarchical(args.ns, args.ns_prime, args.ui_size, args.common.seed);
    let frac = model.fractional_posterior(g).map_err(|e| CliError::numerical("fractional posterior", e))?;
    let bayes = model.bayes_posterior();
    // Semi-implicit halves whose marginals are the fractional and Bayes posteriors.
    let half = |p: Gaussian1D| -> SemiImplicitToy {
        let mix = Gaussian1D::new(p.mean(), 0.5 * p.variance()).expect("positive variance");
        SemiImplicitToy::new(mix, 1.0, 0.0, 0.5 * p.variance()).expect("positive variance")
    };
    let (toy_q, toy_r) = (half(frac), half(bayes));
    let toy_r = SemiImplicitToy { mixing: toy_q.mixing, intercept: bayes.mean() - frac.mean(), ..toy_r };
    let fail = |name: &'static str| move |e: Error| CliError::numerical(name, e);
    let kinds = match args.estimator {
        EstimatorKind::All => vec![
            EstimatorKind::Lb,
            EstimatorKind::LbUnnormalized,
            EstimatorKind::Lbh,
            EstimatorKind::Lbbh,
            EstimatorKind::LbbhAlt,
        ],
        k => vec![k],
    };
    let mut out = open_out(&args.common.out)?;
    write_estimate_header(&mut out)?;
    let exact = lb_gamma(&model, &frac, Fraction::new(g).map_err(validation)?).map_err(fail("exact bound"))?;
    let exact_spec = SamplerSpec { ns: 0, ..spec };
    write_estimate(&mut out, "exact", &EstimatorReport { value: exact.total, data_term: exact.data_term, complexity_term: exact.complexity_term, kl_term: None, spec: exact_spec })?;
    for kind in &kinds {
        let (label, r) = match kind {
            EstimatorKind::Lb => ("lb", estimators::estimate_lb(&model, &frac, g, &spec).map_err(fail("lb"))?),
            EstimatorKind::LbUnnormalized => {
                let ln_z = 2.5f64.ln();
                let r = estimators::estimate_lb_unnormalized(&model, |z| ln_z + frac.ln_pdf(z), ln_z, g, &spec, &frac)
                    .map_err(fail("lb-unnormalized"))?;
                ("lb-unnormalized", r)
            }
            EstimatorKind::Lbh => ("lbh", estimators::estimate_lbh(&toy_q, &model, g, &spec).map_err(fail("lbh"))?),
            EstimatorKind::Lbbh => ("lbbh", estimators::estimate_lbbh(&toy_q, &toy_r, &model, g, &spec).map_err(fail("lbbh"))?),
            EstimatorKind::LbbhAlt => (
                "lbbh-alt",
                estimators::estimate_lbbh_alt(&toy_q, &toy_r, &model, g, &spec).map_err(|e| match e {
                    Error::SubsetInvalid { .. } => CliError::Validation(format!("ui_size: {e}")),
                    other => CliError::numerical("lbbh-alt", other),
                })?,
            ),
            EstimatorKind::All => unreachable!(),
        };
        eprintln!("{label}: {}", r.value);
        write_estimate(&mut out, label, &r)?;
    }
    out.flush()?;
    Ok(json!({ "command": "estimate", "rows": kinds.len() + 1, "exact": exact.total }))
}

fn is_evidence(args: &IsArgs) -> CliResult<serde_json::Value> {
    let mut spec = args.study.resolve()?;
    if args.study.replicas.is_none() {
        spec.replicas = 1;
    }
    if args.ns < 2 {
        return Err(CliError::Validation(format!("ns: must be at least 2, got {}", args.ns)));
    }
    if args.study.common.dump_config {
        return dump(&json!({ "spec": spec, "ns": args.ns }));
    }
    let mut out = open_out(&args.study.common.out)?;
    writeln!(out, "label,replica,log_evidence,cv,std_error,bound,ns,seed")?;
    let gammas = spec.all_gammas();
    let mut rows = 0;
    let mut total = 0.0;
    for r in 0..spec.replicas {
        eprintln!("replica {r}");
        let model = spec.model(generate_replica(&spec, r)).map_err(validation)?;
        for (gi, &g) in gammas.iter().enumerate() {
            let fit = gmm::fit_default(&model, g).map_err(|e| CliError::numerical(&format!("fit at γ = {g}"), e))?;
            let seed = spec.seed.wrapping_add(((r as u64) << 32) | gi as u64);
            let est = estimators::gmm_is_log_evidence(&model, &fit.state, args.ns, seed)
                .map_err(|e| CliError::numerical("importance sampling", e))?;
            writeln!(
                out,
                "LB_{},{},{},{},{},{},{},{}",
                gamma_label(g),
                r,
                format_sig6(est.log_evidence),
                format_sig6(est.cv),
                format_sig6(est.std_error),
                format_sig6(fit.bound),
                args.ns,
                seed
            )?;
            total += est.log_evidence;
            rows += 1;
        }
    }
    out.flush()?;
    Ok(json!({ "command": "is-evidence", "rows": rows, "mean_log_evidence": total / rows as f64 }))
}
