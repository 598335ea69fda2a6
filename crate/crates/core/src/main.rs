use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use sflda::grid::{parse_m_grid, parse_real_grid, SmoothingGrid};
use sflda::harness::io::{
    align_labels, merge_labels, read_curves, read_labels, write_coefficients, write_curves, write_labels,
    write_predictions, write_text,
};
use sflda::harness::{fit_curves, run_experiment, ExperimentSpec, FitOptions, Method, ModelFile};
use sflda::logit::DEFAULT_MAX_EM;
use sflda::selection::CriterionKind;
use sflda::simgen::{generate, CaseKind, SimConfig};
use sflda::smoother::{functionalize_with_grid, RawCurve};
use sflda::{Error, Result};

/// Semi-supervised functional logistic discrimination of curves.
#[derive(Parser)]
#[command(name = "sflda", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated two-class dataset (curves.csv, labels.csv, truth.csv).
    Simulate(SimulateArgs),
    /// Smooth curves, fit the classifier and write a model file.
    Fit(FitArgs),
    /// Classify curves with a saved model.
    Predict(PredictArgs),
    /// Run the Monte Carlo experiment on a simulated design.
    Experiment(ExperimentArgs),
    /// Smooth curves onto a common basis and write their coefficients.
    Smooth(SmoothArgs),
}

#[derive(Clone)]
struct MGrid(Vec<usize>);

impl FromStr for MGrid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_m_grid(s).map(MGrid)
    }
}

#[derive(Clone)]
struct RealGrid(Vec<f64>);

impl FromStr for RealGrid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_real_grid(s).map(RealGrid)
    }
}

#[derive(Args, Clone)]
struct SmoothingFlags {
    /// Candidate numbers of basis functions: `lo-hi` or a comma list.
    #[arg(long, default_value = "5-15")]
    m_grid: MGrid,
    /// Candidate smoothing parameters: `lo:hi:count` (log-spaced) or a comma list.
    #[arg(long, default_value = "1e-8:1:20")]
    zeta_grid: RealGrid,
}

impl SmoothingFlags {
    fn grid(&self) -> SmoothingGrid {
        SmoothingGrid {
            m_grid: self.m_grid.0.clone(),
            zeta_grid: self.zeta_grid.0.clone(),
        }
    }
}

#[derive(Args, Clone)]
struct ModelFlags {
    #[command(flatten)]
    smoothing: SmoothingFlags,
    /// Candidate regularization parameters: `lo:hi:count` (log-spaced) or a comma list.
    #[arg(long, default_value = "1e-8:1:25")]
    lambda_grid: RealGrid,
    /// Maximum EM iterations per fit.
    #[arg(long, default_value_t = DEFAULT_MAX_EM)]
    max_em: usize,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation design: 1 (sines) or 2 (triangles).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
    case: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Number of curves (even).
    #[arg(long, default_value_t = 600)]
    n: usize,
    /// Training-set size; the remaining curves form the test set.
    #[arg(long, default_value_t = 300)]
    train_size: usize,
    /// Percentage of training curves whose labels are written to labels.csv.
    #[arg(long, default_value_t = 100.0)]
    label_percent: f64,
    /// Noise variance (defaults to 0.1 for case 1 and 1 for case 2).
    #[arg(long)]
    noise_variance: Option<f64>,
}

#[derive(Args)]
struct FitArgs {
    /// Curve file with header `curve_id,t,x`.
    #[arg(long)]
    curves: PathBuf,
    /// Label file(s) with header `curve_id,label`; empty labels mark unlabeled curves.
    #[arg(long, required = true)]
    labels: Vec<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "gic")]
    criterion: CriterionKind,
    /// `sflda` uses unlabeled curves too; `flda` uses labeled curves only.
    #[arg(long, default_value = "sflda")]
    method: Method,
    /// Skip curves with missing values instead of failing.
    #[arg(long)]
    drop_missing: bool,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Args)]
struct PredictArgs {
    /// Model file written by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// Curve file with header `curve_id,t,x`.
    #[arg(long)]
    curves: PathBuf,
    /// Predictions CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Skip curves with missing values instead of failing.
    #[arg(long)]
    drop_missing: bool,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Simulation design: 1 (sines) or 2 (triangles).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
    case: u32,
    /// Labeled percentages of the training set.
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,30,40,50,60")]
    fractions: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    reps: usize,
    /// Methods to run: sflda, flda.
    #[arg(long, value_delimiter = ',', default_value = "sflda,flda")]
    method: Vec<Method>,
    /// Criteria to select lambda with: gic, gbic.
    #[arg(long, value_delimiter = ',', default_value = "gic,gbic")]
    criterion: Vec<CriterionKind>,
    /// Base seed; repetition r uses a seed derived from it and r.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory for report.csv, records.csv and the plot series.
    #[arg(long)]
    out: PathBuf,
    /// Noise variance override.
    #[arg(long)]
    noise_variance: Option<f64>,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Args)]
struct SmoothArgs {
    /// Curve file with header `curve_id,t,x`.
    #[arg(long)]
    curves: PathBuf,
    /// Coefficient CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Skip curves with missing values instead of failing.
    #[arg(long)]
    drop_missing: bool,
    #[command(flatten)]
    smoothing: SmoothingFlags,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

fn set_workers(workers: usize) {
    // the global pool can only be configured once; later calls are no-ops
    let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
}

fn load_curves(path: &Path, drop_missing: bool) -> Result<Vec<RawCurve>> {
    let ingest = read_curves(path, drop_missing)?;
    if !ingest.dropped.is_empty() {
        eprintln!(
            "dropped {} curve(s) with missing values: {}",
            ingest.dropped.len(),
            ingest.dropped.join(", ")
        );
    }
    Ok(ingest.curves)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    if !(a.label_percent > 0.0 && a.label_percent <= 100.0) {
        return Err(Error::InvalidArgument(format!(
            "--label-percent must be in (0, 100], got {}",
            a.label_percent
        )));
    }
    let mut cfg = SimConfig::new(CaseKind::from_number(a.case)?, a.seed);
    cfg.n = a.n;
    cfg.train_size = a.train_size;
    cfg.label_fraction = a.label_percent / 100.0;
    if let Some(v) = a.noise_variance {
        cfg.noise_variance = v;
    }
    let data = generate(&cfg)?;
    let ids: Vec<String> = data.curves.iter().map(|c| c.id.clone()).collect();
    write_curves(&a.out.join("curves.csv"), &data.curves)?;
    write_labels(&a.out.join("labels.csv"), &ids, &data.visible_labels())?;
    let mut truth = String::from("curve_id,label,split\n");
    for (i, id) in ids.iter().enumerate() {
        let split = if data.partition.test.binary_search(&i).is_ok() { "test" } else { "train" };
        truth.push_str(&format!("{id},{},{split}\n", data.true_labels[i]));
    }
    write_text(&a.out.join("truth.csv"), &truth)?;
    println!(
        "wrote {} curves ({} labeled, {} unlabeled training, {} test) to {}",
        ids.len(),
        data.partition.train_labeled.len(),
        data.partition.train_unlabeled.len(),
        data.partition.test.len(),
        a.out.display()
    );
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    set_workers(a.model.workers);
    let curves = load_curves(&a.curves, a.drop_missing)?;
    let files = a.labels.iter().map(|p| read_labels(p)).collect::<Result<Vec<_>>>()?;
    let labels = align_labels(&curves, &merge_labels(&files)?)?;
    let opts = FitOptions {
        smoothing: a.model.smoothing.grid(),
        lambda_grid: a.model.lambda_grid.0.clone(),
        criterion: a.criterion,
        method: a.method,
        max_em: a.model.max_em,
    };
    let model = fit_curves(&curves, &labels, &opts)?;
    ModelFile::from_fitted(&model).save(&a.out)?;
    let n_labeled = labels.iter().filter(|l| l.is_some()).count();
    println!("method: {}", model.method);
    println!("curves: {} ({} labeled, {} used)", curves.len(), n_labeled, model.data.len());
    println!("basis functions: {}", model.data.m());
    println!("lambda: {:e}", model.fit.lambda);
    println!("{}: {}", model.report.kind, model.report.value);
    println!("em iterations: {}", model.fit.em_iterations);
    println!("training error: {}", model.training_error());
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    set_workers(a.workers);
    let model = ModelFile::load(&a.model)?;
    let predictor = model.predictor()?;
    let curves = load_curves(&a.curves, a.drop_missing)?;
    let pred = predictor.predict_curves(&curves)?;
    if !pred.out_of_range.is_empty() {
        eprintln!(
            "warning: {} curve(s) have observations outside the basis knot span",
            pred.out_of_range.len()
        );
    }
    write_predictions(&a.out, &pred.curve_ids, &pred.classes, &pred.posteriors, model.n_classes)?;
    println!("wrote {} predictions to {}", pred.curve_ids.len(), a.out.display());
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let mut spec = ExperimentSpec::new(CaseKind::from_number(a.case)?);
    if let Some(p) = a.fractions.iter().find(|p| !(**p > 0.0 && **p <= 100.0)) {
        return Err(Error::InvalidArgument(format!("--fractions are percentages in (0, 100], got {p}")));
    }
    spec.fractions = a.fractions.iter().map(|p| p / 100.0).collect();
    spec.reps = a.reps;
    spec.methods = a.method;
    spec.criteria = a.criterion;
    spec.smoothing = a.model.smoothing.grid();
    spec.lambda_grid = a.model.lambda_grid.0;
    spec.base_seed = a.seed;
    spec.max_em = a.model.max_em;
    spec.workers = a.model.workers;
    spec.noise_variance = a.noise_variance;
    let report = run_experiment(&spec)?;
    report.write(&a.out)?;
    print!("{}", report.table());
    for &m in &spec.methods {
        for &k in &spec.criteria {
            println!(
                "{m} {k}: mean lambda {:e}, geometric mean {:e}",
                report.pooled_mean_lambda(m, k),
                report.pooled_geomean_lambda(m, k)
            );
        }
    }
    println!("elapsed: {:.1}s; results in {}", report.elapsed_secs, a.out.display());
    Ok(())
}

fn smooth(a: SmoothArgs) -> Result<()> {
    set_workers(a.workers);
    let curves = load_curves(&a.curves, a.drop_missing)?;
    let data = functionalize_with_grid(&curves, &vec![None; curves.len()], &a.smoothing.grid())?;
    write_coefficients(&a.out, &data)?;
    println!("smoothed {} curves with {} basis functions", data.len(), data.m());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Experiment(a) => experiment(a),
        Command::Smooth(a) => smooth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
