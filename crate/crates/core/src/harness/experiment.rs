//! Monte Carlo experiments on the simulated designs.
//!
//! Each repetition draws a fresh dataset, splits it 300/300 into train and
//! test, smooths the training curves once, and then for every label
//! fraction, method and criterion fits the classifier and scores it on the
//! test curves. Test curves are smoothed on the basis chosen from training
//! curves, so they never influence a fit.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::cross_product_matrix;
use crate::error::{Error, Result};
use crate::grid::{default_lambda_grid, SmoothingGrid};
use crate::harness::io::write_text;
use crate::harness::pipeline::Method;
use crate::logit::{build_design_with_classes, design_rows, predict, BlockPenalty, DEFAULT_MAX_EM};
use crate::selection::{scan_lambda, CriterionKind};
use crate::simgen::{choose_labeled, generate, mix_seed, CaseKind, SimConfig, SimulatedDataset, N_CLASSES};
use crate::smoother::{smooth_with_basis, RawCurve, SmoothingTable};

pub const REPORT_HEADER: &str = "method,criterion,fraction,mean_error,std_error,mean_lambda,geomean_lambda,reps_ok,reps_failed";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub case: CaseKind,
    /// Label fractions in `(0, 1]`.
    pub fractions: Vec<f64>,
    pub reps: usize,
    pub methods: Vec<Method>,
    pub criteria: Vec<CriterionKind>,
    pub smoothing: SmoothingGrid,
    pub lambda_grid: Vec<f64>,
    pub base_seed: u64,
    pub max_em: usize,
    /// Worker threads; 0 uses one per available core.
    pub workers: usize,
    /// Overrides the case's noise variance.
    pub noise_variance: Option<f64>,
}

impl ExperimentSpec {
    pub fn new(case: CaseKind) -> Self {
        Self {
            case,
            fractions: vec![0.05, 0.10, 0.20, 0.30, 0.40, 0.50, 0.60],
            reps: 50,
            methods: vec![Method::Sflda, Method::Flda],
            criteria: vec![CriterionKind::Gic, CriterionKind::Gbic],
            smoothing: SmoothingGrid::default(),
            lambda_grid: default_lambda_grid(),
            base_seed: 1,
            max_em: DEFAULT_MAX_EM,
            workers: 0,
            noise_variance: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::invalid("reps must be at least 1"));
        }
        if self.fractions.is_empty() || self.methods.is_empty() || self.criteria.is_empty() {
            return Err(Error::invalid("fractions, methods and criteria must be non-empty"));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(Error::invalid(format!("label fraction {f} outside (0, 1]")));
        }
        Ok(())
    }

    /// Simulation settings for repetition `rep`.
    pub fn sim_config(&self, rep: usize) -> SimConfig {
        let mut cfg = SimConfig::new(self.case, mix_seed(self.base_seed, rep as u64));
        if let Some(v) = self.noise_variance {
            cfg.noise_variance = v;
        }
        cfg
    }
}

/// One (repetition, fraction, method, criterion) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    pub method: Method,
    pub criterion: CriterionKind,
    pub fraction: f64,
    pub n_labeled: usize,
    pub n_unlabeled: usize,
    pub n_test: usize,
    pub m: usize,
    pub lambda: f64,
    pub error: f64,
    pub em_iterations: usize,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub method: Method,
    pub criterion: CriterionKind,
    pub fraction: f64,
    pub mean_error: f64,
    pub std_error: f64,
    pub mean_lambda: f64,
    pub geomean_lambda: f64,
    pub reps_ok: usize,
    pub reps_failed: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub cells: Vec<Cell>,
    pub records: Vec<RepRecord>,
    pub elapsed_secs: f64,
}

fn percent_label(f: f64) -> String {
    let p = f * 100.0;
    if (p - p.round()).abs() < 1e-9 {
        format!("{}", p.round() as i64)
    } else {
        format!("{p}")
    }
}

impl ExperimentReport {
    pub fn cell(&self, method: Method, criterion: CriterionKind, fraction: f64) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.criterion == criterion && (c.fraction - fraction).abs() < 1e-12)
    }

    /// Successful records for a method and criterion across all fractions.
    pub fn successes(&self, method: Method, criterion: CriterionKind) -> impl Iterator<Item = &RepRecord> {
        self.records
            .iter()
            .filter(move |r| r.method == method && r.criterion == criterion && r.failure.is_none())
    }

    /// Geometric mean of the selected λ over every successful repetition
    /// and fraction.
    pub fn pooled_geomean_lambda(&self, method: Method, criterion: CriterionKind) -> f64 {
        let logs: Vec<f64> = self.successes(method, criterion).map(|r| r.lambda.ln()).collect();
        (logs.iter().sum::<f64>() / logs.len() as f64).exp()
    }

    pub fn pooled_mean_lambda(&self, method: Method, criterion: CriterionKind) -> f64 {
        let l: Vec<f64> = self.successes(method, criterion).map(|r| r.lambda).collect();
        l.iter().sum::<f64>() / l.len() as f64
    }

    pub fn report_csv(&self) -> String {
        let mut s = String::from(REPORT_HEADER);
        s.push('\n');
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                c.method,
                c.criterion,
                c.fraction,
                c.mean_error,
                c.std_error,
                c.mean_lambda,
                c.geomean_lambda,
                c.reps_ok,
                c.reps_failed
            );
        }
        s
    }

    /// Whitespace-separated `fraction mean_error std_error` series.
    pub fn plot_series(&self, method: Method, criterion: CriterionKind) -> String {
        let mut s = String::from("# fraction mean_error std_error\n");
        for c in self.cells.iter().filter(|c| c.method == method && c.criterion == criterion) {
            let _ = writeln!(s, "{} {} {}", c.fraction, c.mean_error, c.std_error);
        }
        s
    }

    pub fn records_csv(&self) -> String {
        let mut s = String::from(
            "rep,seed,method,criterion,fraction,n_labeled,n_unlabeled,n_test,m,lambda,error,em_iterations,failure\n",
        );
        for r in &self.records {
            let failure = r.failure.as_deref().unwrap_or("").replace(['"', '\n', ','], " ");
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.rep,
                r.seed,
                r.method,
                r.criterion,
                r.fraction,
                r.n_labeled,
                r.n_unlabeled,
                r.n_test,
                r.m,
                r.lambda,
                r.error,
                r.em_iterations,
                failure
            );
        }
        s
    }

    /// Human-readable table: one row per method and criterion, one column
    /// per label percentage.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let fr = &self.spec.fractions;
        let _ = write!(s, "{:<14}", "");
        for f in fr {
            let _ = write!(s, "{:>8}", format!("{}%", percent_label(*f)));
        }
        s.push('\n');
        for &m in &self.spec.methods {
            for &k in &self.spec.criteria {
                let _ = write!(s, "{:<14}", format!("{} ({})", m.name().to_uppercase(), k.name().to_uppercase()));
                for &f in fr {
                    match self.cell(m, k, f) {
                        Some(c) if c.reps_ok > 0 => {
                            let _ = write!(s, "{:>8.3}", c.mean_error);
                        }
                        _ => {
                            let _ = write!(s, "{:>8}", "-");
                        }
                    }
                }
                s.push('\n');
            }
        }
        s
    }

    /// Writes `report.csv`, `records.csv`, one `<method>_<criterion>.dat`
    /// series per combination and `runtime.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join("report.csv"), &self.report_csv())?;
        write_text(&dir.join("records.csv"), &self.records_csv())?;
        for &m in &self.spec.methods {
            for &k in &self.spec.criteria {
                write_text(&dir.join(format!("{m}_{k}.dat")), &self.plot_series(m, k))?;
            }
        }
        let meta = serde_json::json!({
            "elapsed_secs": self.elapsed_secs,
            "spec": self.spec,
        });
        write_text(
            &dir.join("runtime.json"),
            &(serde_json::to_string_pretty(&meta).expect("serializable") + "\n"),
        )
    }
}

fn error_rate(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(p, t)| p != t).count() as f64 / truth.len() as f64
}

/// Runs one repetition and returns its records in (fraction, method,
/// criterion) order.
pub fn run_repetition(spec: &ExperimentSpec, rep: usize) -> Vec<RepRecord> {
    let cfg = spec.sim_config(rep);
    let blank = |fraction: f64, method: Method, criterion: CriterionKind, failure: String| RepRecord {
        rep,
        seed: cfg.seed,
        method,
        criterion,
        fraction,
        n_labeled: 0,
        n_unlabeled: 0,
        n_test: 0,
        m: 0,
        lambda: f64::NAN,
        error: f64::NAN,
        em_iterations: 0,
        failure: Some(failure),
    };
    let all_failed = |msg: String| {
        let mut out = Vec::new();
        for &f in &spec.fractions {
            for &m in &spec.methods {
                for &k in &spec.criteria {
                    out.push(blank(f, m, k, msg.clone()));
                }
            }
        }
        out
    };

    let prepared = prepare(spec, &cfg);
    let (data, table, train) = match prepared {
        Ok(p) => p,
        Err(e) => return all_failed(e.to_string()),
    };
    let test = &data.partition.test;
    let test_curves: Vec<RawCurve> = test.iter().map(|&i| data.curves[i].clone()).collect();
    let truth: Vec<usize> = test.iter().map(|&i| data.true_labels[i]).collect();
    let test_ids: HashSet<&str> = test_curves.iter().map(|c| c.id.as_str()).collect();
    // test designs keyed by the common m of the training fit
    let mut test_designs: HashMap<usize, Result<DMatrix<f64>>> = HashMap::new();

    let mut out = Vec::new();
    for &fraction in &spec.fractions {
        let split = choose_labeled(&train, &data.true_labels, fraction, cfg.seed);
        let (labeled, unlabeled) = match split {
            Ok(s) => s,
            Err(e) => {
                for &m in &spec.methods {
                    for &k in &spec.criteria {
                        out.push(blank(fraction, m, k, e.to_string()));
                    }
                }
                continue;
            }
        };
        for &method in &spec.methods {
            // positions within `train`, which indexes the smoothing table
            let rows: Vec<usize> = train
                .iter()
                .enumerate()
                .filter(|(_, i)| method == Method::Sflda || labeled.binary_search(i).is_ok())
                .map(|(pos, _)| pos)
                .collect();
            let labels: Vec<Option<usize>> = rows
                .iter()
                .map(|&pos| {
                    let i = train[pos];
                    labeled.binary_search(&i).ok().map(|_| data.true_labels[i])
                })
                .collect();
            let n_unlabeled = labels.iter().filter(|l| l.is_none()).count();
            debug_assert_eq!(n_unlabeled, if method == Method::Sflda { unlabeled.len() } else { 0 });

            let fitted = (|| -> Result<_> {
                let fd = table.dataset(&rows, &labels)?;
                let j = cross_product_matrix(&fd.basis);
                let design = build_design_with_classes(&fd, &j, N_CLASSES)?;
                let penalty = BlockPenalty::identity(fd.m());
                let scan = scan_lambda(&design, &penalty, &spec.lambda_grid, &spec.criteria, spec.max_em)?;
                Ok((fd, j, scan))
            })();
            let (fd, j, scan) = match fitted {
                Ok(f) => f,
                Err(e) => {
                    for &k in &spec.criteria {
                        out.push(blank(fraction, method, k, e.to_string()));
                    }
                    continue;
                }
            };
            debug_assert!(fd.curve_ids.iter().all(|id| !test_ids.contains(id.as_str())));
            let zt = test_designs.entry(fd.m()).or_insert_with(|| {
                let td = smooth_with_basis(&test_curves, &fd.basis, &spec.smoothing.zeta_grid)?;
                design_rows(&td.coefficients, &j)
            });
            for &k in &spec.criteria {
                let rec = match (&zt, scan.best(k)) {
                    (Ok(zt), Ok((fit, report))) => {
                        let (pred, _) = predict(&fit.beta, zt).expect("test design matches the fit");
                        RepRecord {
                            rep,
                            seed: cfg.seed,
                            method,
                            criterion: k,
                            fraction,
                            n_labeled: labeled.len(),
                            n_unlabeled,
                            n_test: truth.len(),
                            m: fd.m(),
                            lambda: report.lambda,
                            error: error_rate(&pred, &truth),
                            em_iterations: fit.em_iterations,
                            failure: None,
                        }
                    }
                    (Err(e), _) => blank(fraction, method, k, format!("test smoothing: {e}")),
                    (_, Err(e)) => blank(fraction, method, k, e.to_string()),
                };
                out.push(rec);
            }
        }
    }
    out
}

/// Generates the dataset and smooths its training curves at every m.
fn prepare(spec: &ExperimentSpec, cfg: &SimConfig) -> Result<(SimulatedDataset, SmoothingTable, Vec<usize>)> {
    let data = generate(cfg)?;
    let train = data.partition.train();
    if train.iter().any(|i| data.partition.test.binary_search(i).is_ok()) {
        return Err(Error::invalid("train and test sets overlap"));
    }
    let curves: Vec<RawCurve> = train.iter().map(|&i| data.curves[i].clone()).collect();
    let table = SmoothingTable::build(&curves, &spec.smoothing.m_grid, &spec.smoothing.zeta_grid)?;
    Ok((data, table, train))
}

fn aggregate(spec: &ExperimentSpec, records: &[RepRecord]) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &method in &spec.methods {
        for &criterion in &spec.criteria {
            for &fraction in &spec.fractions {
                let ok: Vec<&RepRecord> = records
                    .iter()
                    .filter(|r| r.method == method && r.criterion == criterion && r.fraction == fraction)
                    .filter(|r| r.failure.is_none())
                    .collect();
                let n = ok.len();
                let mean = |f: &dyn Fn(&RepRecord) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / n as f64;
                let (mean_error, std_error, mean_lambda, geomean_lambda) = if n == 0 {
                    (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
                } else {
                    let me = mean(&|r| r.error);
                    let se = if n > 1 {
                        let var = ok.iter().map(|r| (r.error - me).powi(2)).sum::<f64>() / (n - 1) as f64;
                        (var / n as f64).sqrt()
                    } else {
                        0.0
                    };
                    (me, se, mean(&|r| r.lambda), mean(&|r| r.lambda.ln()).exp())
                };
                cells.push(Cell {
                    method,
                    criterion,
                    fraction,
                    mean_error,
                    std_error,
                    mean_lambda,
                    geomean_lambda,
                    reps_ok: n,
                    reps_failed: spec.reps - n,
                });
            }
        }
    }
    cells
}

/// Runs all repetitions, in parallel up to `spec.workers` threads, and
/// aggregates them. Results do not depend on scheduling.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let per_rep: Vec<Vec<RepRecord>> =
        pool.install(|| (0..spec.reps).into_par_iter().map(|rep| run_repetition(spec, rep)).collect());
    let records: Vec<RepRecord> = per_rep.into_iter().flatten().collect();
    let cells = aggregate(spec, &records);
    let empty: Vec<String> = cells
        .iter()
        .filter(|c| c.reps_ok == 0)
        .map(|c| {
            let why = records
                .iter()
                .find(|r| r.method == c.method && r.criterion == c.criterion && r.fraction == c.fraction)
                .and_then(|r| r.failure.clone())
                .unwrap_or_default();
            format!("{} {} {}: {why}", c.method, c.criterion, c.fraction)
        })
        .collect();
    if !empty.is_empty() {
        return Err(Error::AllFailed(empty));
    }
    Ok(ExperimentReport {
        spec: spec.clone(),
        cells,
        records,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::log_spaced;

    fn small_spec() -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(CaseKind::Case2);
        spec.fractions = vec![0.1, 0.5];
        spec.reps = 2;
        spec.smoothing = SmoothingGrid {
            m_grid: vec![6, 9],
            zeta_grid: log_spaced(1e-6, 1e-1, 4),
        };
        spec.lambda_grid = log_spaced(1e-6, 1e-1, 4);
        spec.workers = 1;
        spec
    }

    #[test]
    fn records_and_cells_are_consistent() {
        let spec = small_spec();
        let report = run_experiment(&spec).unwrap();
        assert_eq!(report.records.len(), 2 * 2 * 2 * 2);
        assert_eq!(report.cells.len(), 2 * 2 * 2);
        for r in &report.records {
            assert!(r.failure.is_none(), "{:?}", r.failure);
            assert_eq!(r.n_test, 300);
            assert_eq!(r.n_labeled, crate::simgen::labeled_count(r.fraction, 300));
            match r.method {
                Method::Flda => assert_eq!(r.n_unlabeled, 0),
                Method::Sflda => assert_eq!(r.n_labeled + r.n_unlabeled, 300),
            }
        }
        for c in &report.cells {
            assert!((0.0..=1.0).contains(&c.mean_error));
            assert_eq!(c.reps_ok + c.reps_failed, 2);
            let errs: Vec<f64> = report
                .successes(c.method, c.criterion)
                .filter(|r| r.fraction == c.fraction)
                .map(|r| r.error)
                .collect();
            let m = errs.iter().sum::<f64>() / 2.0;
            let sd = (errs.iter().map(|e| (e - m).powi(2)).sum::<f64>()).sqrt();
            assert!((c.std_error - sd / 2f64.sqrt()).abs() < 1e-12);
        }
        let csv = report.report_csv();
        assert!(csv.starts_with(REPORT_HEADER));
        assert_eq!(csv.lines().count(), 1 + report.cells.len());
    }

    #[test]
    fn same_seed_same_report() {
        let mut spec = small_spec();
        spec.reps = 1;
        spec.fractions = vec![0.2];
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a.report_csv(), b.report_csv());
        assert_eq!(a.records_csv(), b.records_csv());
    }

    #[test]
    fn validation() {
        let mut spec = small_spec();
        spec.fractions = vec![1.5];
        assert!(run_experiment(&spec).is_err());
        spec.fractions = vec![0.1];
        spec.reps = 0;
        assert!(run_experiment(&spec).is_err());
    }
}
