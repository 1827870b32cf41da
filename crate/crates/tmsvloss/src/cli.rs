//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tmsvloss_core::fisher::{
    FimOptions, GridSpec, InformationSource, classical_fim, observed_fim, probe_energy,
    qfim_coherent, qfim_fock, total_variance,
};
use tmsvloss_core::gaussian::qfim_inverse_analytic;
use tmsvloss_core::mle::{self, Parametrization, default_init};
use tmsvloss_core::model::{self, DEFAULT_TAIL_BOUND};
use tmsvloss_core::sim::{self, BootstrapMode, TrialSet};
use tmsvloss_core::{Cutoff, FitOptions, Histogram, MleResult, Param, ParamSet};

use crate::batch::{self, FitReport};
use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Parser)]
#[command(name = "tmsvloss", version, about = "Loss estimation with two-mode squeezed vacuum and photon-number-resolving detectors")]
pub struct Cli {
    /// Worker threads for trials, replicas and rays; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate trials and write one histogram CSV per trial.
    Simulate(SimulateArgs),
    /// Maximum-likelihood fit of one histogram (JSON) or many (CSV table).
    Fit(FitArgs),
    /// Classical or observed Fisher information of photon counting.
    Fisher(FisherArgs),
    /// Three-parameter quantum Fisher information and benchmark variances.
    Qfim(QfimArgs),
    /// Crossover curve between TMSV and coherent-state sensitivity.
    Crossover(CrossoverArgs),
    /// Bootstrap resampling of a histogram.
    Bootstrap(BootstrapArgs),
    /// Per-bin relative error between data and model.
    Relerr(RelerrArgs),
}

/// Model parameters, from flags or a JSON file.
#[derive(Debug, Args)]
pub struct ThetaArgs {
    /// JSON file with eta1, eta2, r, nu1, nu2, phi; overrides the flags.
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub nu1: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub nu2: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phi: f64,
}

impl ThetaArgs {
    pub fn resolve(&self) -> Result<ParamSet> {
        if let Some(path) = &self.params {
            return io::read_params(path);
        }
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Validation(format!("missing --{name} (or --params FILE)")))
        };
        let theta = ParamSet::new(
            need(self.eta1, "eta1")?,
            need(self.eta2, "eta2")?,
            need(self.r, "r")?,
            self.nu1,
            self.nu2,
        )
        .with_phi(self.phi);
        theta.validate()?;
        Ok(theta)
    }
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// RNG seed.
    #[arg(long, env = "TMSVLOSS_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub theta: ThetaArgs,
    /// Shots per trial.
    #[arg(long)]
    pub shots: u64,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Largest photon number per mode on the grid; adaptive by default.
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// File name prefix; trial k goes to `<prefix>_<k>.csv`.
    #[arg(long, default_value = "trial")]
    pub prefix: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParamArg {
    Amplitude,
    Probability,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Histogram CSV files (or shot lists with --ingest).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Inputs are raw `m,n` shot lists.
    #[arg(long)]
    pub ingest: bool,
    /// Starting point as params JSON; moment estimate by default.
    #[arg(long, value_name = "FILE")]
    pub init: Option<PathBuf>,
    /// Sum consecutive groups of this many inputs before fitting.
    #[arg(long, default_value_t = 1)]
    pub group: usize,
    #[arg(long, default_value_t = 4)]
    pub starts: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long, value_enum, default_value_t = ParamArg::Amplitude)]
    pub parametrization: ParamArg,
    /// Skip the observed-information covariance.
    #[arg(long)]
    pub no_covariance: bool,
    /// Output file; stdout by default.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FisherArgs {
    #[command(flatten)]
    pub theta: ThetaArgs,
    /// Parameters to include, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = Param::ALL.map(|p| p.name().to_string()))]
    pub wrt: Vec<String>,
    /// Largest photon number per mode; adaptive by default.
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Relative finite-difference step.
    #[arg(long, default_value_t = FimOptions::default().step)]
    pub step: f64,
    /// Observed information of this histogram instead of the expected one.
    #[arg(long, value_name = "HIST")]
    pub observed: Option<PathBuf>,
    #[arg(long)]
    pub ingest: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QfimArgs {
    #[arg(long)]
    pub eta1: f64,
    #[arg(long)]
    pub eta2: f64,
    #[arg(long)]
    pub r: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    PnrdFim,
    LowlossQfim,
    ThreeParamQfim,
}

#[derive(Debug, Args)]
pub struct CrossoverArgs {
    #[arg(long)]
    pub r: f64,
    #[arg(long, value_enum, default_value_t = SourceArg::PnrdFim)]
    pub source: SourceArg,
    #[arg(long, default_value_t = GridSpec::default().rays)]
    pub rays: usize,
    /// Detector resolution for pnrd-fim.
    #[arg(long, default_value_t = 10)]
    pub pnrd_cutoff: usize,
    #[arg(long, default_value_t = GridSpec::default().tol)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    With,
    Without,
    Parametric,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub ingest: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::With)]
    pub mode: ModeArg,
    /// Model for parametric mode; the fit of the input by default.
    #[arg(long, value_name = "FILE")]
    pub theta: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub resamples: usize,
    /// Shots per replica; the input's shot count by default.
    #[arg(long)]
    pub size: Option<u64>,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Directory for replica CSVs.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fit every replica and write the batch table here ("-" for stdout).
    #[arg(long, value_name = "FILE")]
    pub fit: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RelerrArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub ingest: bool,
    #[command(flatten)]
    pub theta: ThetaArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) if p != Path::new("-") => io::write_atomic(p, text.as_bytes()),
        _ => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::parse_from(args);
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
    let jobs = cli.jobs;
    batch::with_jobs(jobs, move || match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Fisher(a) => fisher_cmd(a),
        Command::Qfim(a) => qfim(a),
        Command::Crossover(a) => crossover(a),
        Command::Bootstrap(a) => bootstrap(a),
        Command::Relerr(a) => relerr(a),
    })?
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let theta = a.theta.resolve()?;
    if a.shots == 0 {
        return Err(Error::Validation("--shots must be at least 1".into()));
    }
    let cutoff = match a.cutoff {
        Some(c) => Cutoff::square(c),
        None => model::adaptive_cutoff(&theta, DEFAULT_TAIL_BOUND)?,
    };
    let trials = batch::simulate(&theta, a.trials, a.shots, cutoff, a.seed.seed)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let width = a.trials.saturating_sub(1).to_string().len().max(4);
    let mut listing = String::new();
    for (k, h) in trials.histograms.iter().enumerate() {
        let path = a.out.join(format!("{}_{:0width$}.csv", a.prefix, k));
        io::write_histogram(&path, h)?;
        listing.push_str(&format!("{}\n", path.display()));
    }
    io::write_params(&a.out.join(format!("{}_truth.json", a.prefix)), &theta)?;
    emit(None, &listing)
}

fn fit_options(seed: u64, starts: usize, param: ParamArg, covariance: bool) -> FitOptions {
    FitOptions {
        starts,
        seed,
        parametrization: match param {
            ParamArg::Amplitude => Parametrization::Amplitude,
            ParamArg::Probability => Parametrization::Probability,
        },
        covariance,
        ..FitOptions::default()
    }
}

fn name_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Sums consecutive inputs in groups; the grid of each group is the union
/// of its members' grids.
fn grouped(hists: Vec<(String, Histogram)>, group: usize) -> Result<Vec<(String, Histogram)>> {
    if group == 0 {
        return Err(Error::Validation("--group must be at least 1".into()));
    }
    if group == 1 {
        return Ok(hists);
    }
    let remainder = hists.len() % group;
    if remainder != 0 {
        log::warn!("dropping {remainder} inputs that do not fill a group of {group}");
    }
    let mut out = Vec::new();
    for chunk in hists.chunks_exact(group) {
        let a = chunk.iter().map(|(_, h)| h.cutoff().a).max().unwrap_or(0);
        let b = chunk.iter().map(|(_, h)| h.cutoff().b).max().unwrap_or(0);
        let grid = Cutoff::new(a, b);
        let set = TrialSet {
            histograms: chunk.iter().map(|(_, h)| h.resized(grid)).collect(),
            shots_per_trial: 0,
            seed: 0,
            theta_true: None,
        };
        let sum = sim::group_trials(&set, group)?.histograms.remove(0);
        out.push((format!("{}+{}", chunk[0].0, group - 1), sum));
    }
    Ok(out)
}

fn fit(a: FitArgs) -> Result<()> {
    let mut hists = Vec::with_capacity(a.inputs.len());
    for path in &a.inputs {
        hists.push((name_of(path), io::load_histogram(path, a.ingest)?));
    }
    let hists = grouped(hists, a.group)?;
    let init = a.init.as_deref().map(io::read_params).transpose()?;
    let opts = fit_options(a.seed.seed, a.starts, a.parametrization, !a.no_covariance);
    let just_hists: Vec<Histogram> = hists.iter().map(|(_, h)| h.clone()).collect();
    let results = batch::fit_all(&just_hists, init.as_ref(), &opts);
    let mut rows: Vec<(String, MleResult)> = Vec::with_capacity(results.len());
    for ((name, _), r) in hists.into_iter().zip(results) {
        let r = r.map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("{name}: {m}")),
            Error::Numeric(m) => Error::Numeric(format!("{name}: {m}")),
            other => other,
        })?;
        if !r.converged {
            log::warn!("{name}: fit did not converge");
        }
        rows.push((name, r));
    }
    if let [(_, single)] = rows.as_slice() {
        emit(a.out.as_deref(), &io::to_json(&FitReport::from(single)))?;
        if !single.converged {
            return Err(Error::Numeric("fit did not converge; best point reported".into()));
        }
        Ok(())
    } else {
        emit(a.out.as_deref(), &batch::batch_csv(&rows))
    }
}

#[derive(Serialize)]
struct FisherReport {
    kind: &'static str,
    labels: Vec<String>,
    cutoff: [usize; 2],
    /// Row-major.
    matrix: Vec<f64>,
    inverse: Option<Vec<f64>>,
    condition: f64,
    min_eigenvalue: f64,
}

fn fisher_cmd(a: FisherArgs) -> Result<()> {
    let theta = a.theta.resolve()?;
    let params: Vec<Param> = a
        .wrt
        .iter()
        .map(|n| Param::from_name(n).ok_or_else(|| Error::Validation(format!("unknown parameter `{n}`"))))
        .collect::<Result<_>>()?;
    let opts = FimOptions::with_step(a.step);
    let (kind, f, cutoff) = match &a.observed {
        Some(path) => {
            let hist = io::load_histogram(path, a.ingest)?;
            let f = observed_fim(&hist, &theta, &params, &opts)?;
            ("observed", f, hist.cutoff())
        }
        None => {
            let cutoff = match a.cutoff {
                Some(c) => Cutoff::square(c),
                None => model::adaptive_cutoff(&theta, DEFAULT_TAIL_BOUND)?,
            };
            ("expected", classical_fim(&theta, &params, cutoff, &opts)?, cutoff)
        }
    };
    let inverse = match f.inverse() {
        Ok((inv, _)) => Some(inv.transpose().iter().copied().collect()),
        Err(e) => {
            log::warn!("information matrix not invertible: {e}");
            None
        }
    };
    let report = FisherReport {
        kind,
        labels: f.labels().to_vec(),
        cutoff: [cutoff.a, cutoff.b],
        matrix: f.entries().transpose().iter().copied().collect(),
        inverse,
        condition: f.condition_number(),
        min_eigenvalue: f.min_eigenvalue(),
    };
    emit(a.out.as_deref(), &io::to_json(&report))
}

#[derive(Serialize)]
struct Variances {
    eta1: f64,
    eta2: f64,
    r: f64,
}

#[derive(Serialize)]
struct QfimReport {
    eta1: f64,
    eta2: f64,
    r: f64,
    energy: f64,
    /// Per-shot bounds, the diagonal of the inverse QFIM.
    variances: Variances,
    total_variance: f64,
    /// Row-major 3×3 inverse in the order eta1, eta2, r.
    inverse: Vec<f64>,
    qfim: Option<Vec<f64>>,
    condition: Option<f64>,
    coherent_total_variance: f64,
    fock_total_variance: Option<f64>,
}

fn qfim(a: QfimArgs) -> Result<()> {
    let v = qfim_inverse_analytic(a.eta1, a.eta2, a.r)?;
    let [v1, v2, v3] = v.diagonal();
    let (q, cond) = match v.qfim() {
        Ok((q, c)) => (Some(q.entries().transpose().iter().copied().collect()), Some(c)),
        Err(e) => {
            log::warn!("{e}");
            (None, None)
        }
    };
    let e = probe_energy(a.r);
    let fock = qfim_fock(e / 2.0, e / 2.0, a.eta1, a.eta2)
        .ok()
        .and_then(|f| total_variance(&f).ok());
    let report = QfimReport {
        eta1: a.eta1,
        eta2: a.eta2,
        r: a.r,
        energy: e,
        variances: Variances { eta1: v1, eta2: v2, r: v3 },
        total_variance: v.total_variance(),
        inverse: v.entries().transpose().iter().copied().collect(),
        qfim: q,
        condition: cond,
        coherent_total_variance: total_variance(&qfim_coherent(e / 2.0, e / 2.0)?)?,
        fock_total_variance: fock,
    };
    emit(a.out.as_deref(), &io::to_json(&report))
}

fn crossover(a: CrossoverArgs) -> Result<()> {
    let source = match a.source {
        SourceArg::PnrdFim => InformationSource::PnrdFim { cutoff: a.pnrd_cutoff },
        SourceArg::LowlossQfim => InformationSource::LowlossQfim,
        SourceArg::ThreeParamQfim => InformationSource::ThreeParamQfim,
    };
    if a.rays == 0 {
        return Err(Error::Validation("--rays must be at least 1".into()));
    }
    let grid = GridSpec {
        rays: a.rays,
        tol: a.tol,
        ..GridSpec::default()
    };
    let curve = batch::crossover(a.r, source, &grid)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["r", "source", "eta1", "eta2"]).expect("in-memory write");
    for (x, y) in &curve.points {
        w.serialize((a.r, source.name(), x, y)).expect("in-memory write");
    }
    let text = String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8");
    emit(a.out.as_deref(), &text)
}

fn bootstrap(a: BootstrapArgs) -> Result<()> {
    let hist = io::load_histogram(&a.input, a.ingest)?;
    let mode = match a.mode {
        ModeArg::With => BootstrapMode::WithReplacement,
        ModeArg::Without => BootstrapMode::WithoutReplacement,
        ModeArg::Parametric => {
            let theta = match &a.theta {
                Some(p) => io::read_params(p)?,
                None => mle::fit(&hist, &default_init(&hist), &FitOptions { covariance: false, ..FitOptions::default() })?.theta_hat,
            };
            BootstrapMode::Parametric(theta)
        }
    };
    if a.out.is_none() && a.fit.is_none() {
        return Err(Error::Validation("nothing to do: give --out DIR and/or --fit FILE".into()));
    }
    let size = a.size.unwrap_or(hist.shots());
    let replicas = batch::bootstrap(&hist, mode, a.resamples, size, a.seed.seed)?;
    let width = a.resamples.saturating_sub(1).to_string().len().max(4);
    let names: Vec<String> = (0..replicas.len()).map(|k| format!("replica_{k:0width$}")).collect();
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, h) in names.iter().zip(&replicas) {
            io::write_histogram(&dir.join(format!("{name}.csv")), h)?;
        }
    }
    if let Some(table) = &a.fit {
        let opts = FitOptions { covariance: false, seed: a.seed.seed, ..FitOptions::default() };
        let results = batch::fit_all(&replicas, None, &opts);
        let rows = names
            .into_iter()
            .zip(results)
            .map(|(n, r)| r.map(|r| (n, r)))
            .collect::<Result<Vec<_>>>()?;
        emit(Some(table), &batch::batch_csv(&rows))?;
    }
    Ok(())
}

fn relerr(a: RelerrArgs) -> Result<()> {
    let hist = io::load_histogram(&a.input, a.ingest)?;
    let theta = a.theta.resolve()?;
    let map = sim::relative_error_map(&hist, &theta)?;
    let rms = sim::rms_error(&hist, &theta)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["m", "n", "epsilon"]).expect("in-memory write");
    for (m, n, _) in hist.iter() {
        let eps = map.get(m, n).map(|e| e.to_string()).unwrap_or_default();
        w.write_record([m.to_string(), n.to_string(), eps]).expect("in-memory write");
    }
    let text = String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8");
    emit(a.out.as_deref(), &text)?;
    eprintln!("mean epsilon {:.6e}, rms {:.6e}", map.mean(), rms);
    Ok(())
}
