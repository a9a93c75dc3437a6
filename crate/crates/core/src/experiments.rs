//! Monte-Carlo drivers: Tracy–Widom fit of the rescaled largest eigenvalue,
//! size and power of the Onatski test, rigidity, the local law and
//! cross-law universality.
//!
//! Replicate `r` of a run with master seed `s` always draws from
//! `RngStream::new(s, r)`, so results do not depend on the worker count.
//! Replicates are collected in order before any reduction, and a failing
//! replicate aborts the run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{builtin_sigma, BuiltinSigma, ComplexPoint, ModelSpec, PhiBounds, PopulationSpectrum, RadiusLaw};
use crate::mp_law::{edge_params, solve_m, validate_conditions, EdgeParams};
use crate::parallel::map_replicates;
use crate::sampler::{sample_data_matrix, sample_signal_plus_noise, RngStream};
use crate::spectral::{empirical_stieltjes, gram_eigenvalues, matrix_gram_eigenvalues, onatski_statistic, rescale_largest};
use crate::stats::{binomial_se, ecdf, ks_distance, ols_slope, quantile, quantile_se, sorted};
use crate::tw_reference::{tw1_table, CalibrationResult};

/// Approximate standard deviation of the limiting Kolmogorov distribution.
const KOLMOGOROV_SD: f64 = 0.2603;

/// A model plus the Monte-Carlo settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    /// Value of the `setting` column.
    pub label: String,
    pub reps: usize,
    pub master_seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
}

impl ExperimentConfig {
    /// Checks `reps >= 1` and that the model satisfies the edge conditions.
    pub fn new(model: ModelSpec, reps: usize, master_seed: u64) -> Result<Self> {
        if reps == 0 {
            return Err(Error::InvalidArgument("reps must be >= 1".into()));
        }
        let report = validate_conditions(&model.spectrum, model.phi(), PhiBounds::default());
        if !report.sigma_bounds_ok || !report.phi_ok {
            return Err(Error::InvalidModel(format!("model fails the spectrum or phi bounds: {report:?}")));
        }
        if !report.margin_ok {
            return Err(Error::ConditionViolated(report.margin));
        }
        let label = format!("{}x{}/{}", model.m, model.n, model.radius);
        Ok(Self {
            model,
            label,
            reps,
            master_seed,
            workers: 1,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn edge(&self) -> Result<EdgeParams> {
        edge_params(&self.model.spectrum, self.model.phi())
    }

    fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("setting".into(), self.label.clone());
        m.insert("M".into(), self.model.m.to_string());
        m.insert("N".into(), self.model.n.to_string());
        m.insert("radius".into(), self.model.radius.to_string());
        let atoms: Vec<String> = self
            .model
            .spectrum
            .atoms()
            .iter()
            .map(|a| format!("{}:{}", a.value, a.weight))
            .collect();
        m.insert("spectrum".into(), atoms.join(","));
        m.insert("reps".into(), self.reps.to_string());
        m.insert("master_seed".into(), self.master_seed.to_string());
        m
    }

    fn stream(&self, r: u64) -> RngStream {
        RngStream::new(self.master_seed, r)
    }
}

/// Where a rigidity ladder takes its population spectrum from at each size.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumSource {
    /// Rebuilt for each `M`.
    Builtin(BuiltinSigma),
    Fixed(PopulationSpectrum),
}

impl SpectrumSource {
    pub fn resolve(&self, m: usize, phi: f64) -> Result<PopulationSpectrum> {
        match self {
            SpectrumSource::Builtin(b) => builtin_sigma(*b, m, phi),
            SpectrumSource::Fixed(s) => Ok(s.clone()),
        }
    }
}

/// Configurations for sizes `N` in `ns` at fixed `φ`, with `M = round(φN)`.
pub fn ladder(
    source: &SpectrumSource,
    phi: f64,
    radius: &RadiusLaw,
    ns: &[usize],
    reps: usize,
    master_seed: u64,
) -> Result<Vec<ExperimentConfig>> {
    ns.iter()
        .map(|&n| {
            let m = (phi * n as f64).round() as usize;
            let spectrum = source.resolve(m, m as f64 / n as f64)?;
            let model = ModelSpec::new(m, n, spectrum, radius.clone())?;
            Ok(ExperimentConfig::new(model, reps, master_seed)?.with_label(format!("N={n}")))
        })
        .collect()
}

/// One output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub setting: String,
    pub statistic: String,
    pub estimate: f64,
    /// Monte-Carlo standard error of `estimate`.
    pub se: f64,
    pub reps: usize,
    pub seed: u64,
}

/// Result of one experiment: the cells plus an echo of the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableResult {
    pub experiment: String,
    pub master_seed: u64,
    pub config: BTreeMap<String, String>,
    pub cells: Vec<Cell>,
}

impl TableResult {
    fn new(experiment: &str, master_seed: u64, config: BTreeMap<String, String>) -> Self {
        Self {
            experiment: experiment.into(),
            master_seed,
            config,
            cells: Vec::new(),
        }
    }

    fn push(&mut self, setting: &str, statistic: impl Into<String>, estimate: f64, se: f64, reps: usize, seed: u64) {
        self.cells.push(Cell {
            setting: setting.into(),
            statistic: statistic.into(),
            estimate,
            se,
            reps,
            seed,
        });
    }

    fn push_probability(&mut self, setting: &str, statistic: impl Into<String>, p: f64, reps: usize, seed: u64) {
        self.push(setting, statistic, p, binomial_se(p, reps), reps, seed);
    }

    pub fn cell(&self, setting: &str, statistic: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.setting == setting && c.statistic == statistic)
    }

    /// CSV with header `setting,statistic,estimate,se,reps,seed`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.cells {
            w.serialize(c).expect("cell serializes");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    /// `<experiment>_seed<seed>`.
    pub fn file_stem(&self) -> String {
        format!("{}_seed{}", self.experiment, self.master_seed)
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`, each via a
    /// temporary file renamed into place.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.file_stem()));
        let json_path = dir.join(format!("{}.json", self.file_stem()));
        write_atomic(&csv_path, &self.to_csv())?;
        write_atomic(&json_path, &self.to_json())?;
        Ok((csv_path, json_path))
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Largest eigenvalues of every replicate and their rescaled values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub edge: EdgeParams,
    pub lambda1: Vec<f64>,
    /// `γ N^{2/3} (λ₁ − λ₊)`.
    pub rescaled: Vec<f64>,
}

impl Simulation {
    /// CSV with header `replicate,lambda1,rescaled`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["replicate", "lambda1", "rescaled"]).expect("in-memory writer");
        for (r, (l, t)) in self.lambda1.iter().zip(&self.rescaled).enumerate() {
            w.write_record([r.to_string(), l.to_string(), t.to_string()]).expect("in-memory writer");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
    }
}

/// `λ₁` for each replicate, in replicate order.
pub fn largest_eigenvalues(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    map_replicates(cfg.reps, cfg.workers, |r| {
        let x = sample_data_matrix(&cfg.model, cfg.stream(r))?;
        Ok(gram_eigenvalues(&x, Some(1))?.largest())
    })
}

/// Samples `λ₁` and rescales with `edge`, or with the model's own edge
/// when `edge` is `None`.
pub fn simulate(cfg: &ExperimentConfig, edge: Option<EdgeParams>) -> Result<Simulation> {
    let edge = match edge {
        Some(e) => e,
        None => cfg.edge()?,
    };
    let lambda1 = largest_eigenvalues(cfg)?;
    let rescaled = lambda1.iter().map(|&l| rescale_largest(l, &edge, cfg.model.n)).collect();
    Ok(Simulation { edge, lambda1, rescaled })
}

/// Empirical CDF of the rescaled `λ₁` at the nine tabulated TW₁
/// percentiles.
pub fn run_table1(cfg: &ExperimentConfig) -> Result<TableResult> {
    let sim = simulate(cfg, None)?;
    let data = sorted(&sim.rescaled);
    let mut table = TableResult::new("table1", cfg.master_seed, cfg.echo());
    for (x, _) in tw1_table().points {
        table.push_probability(&cfg.label, format!("cdf({x:.2})"), ecdf(&data, x), cfg.reps, cfg.master_seed);
    }
    Ok(table)
}

/// Onatski statistic of the signal-plus-noise model at strength `nu`,
/// per replicate.
pub fn onatski_samples(cfg: &ExperimentConfig, nu: f64) -> Result<Vec<f64>> {
    map_replicates(cfg.reps, cfg.workers, |r| {
        let y = sample_signal_plus_noise(&cfg.model, nu, cfg.stream(r))?;
        onatski_statistic(&matrix_gram_eigenvalues(&y, Some(3))?)
    })
}

fn rejection_rate(samples: &[f64], critical: f64) -> f64 {
    samples.iter().filter(|&&t| t > critical).count() as f64 / samples.len() as f64
}

fn test_echo(cfg: &ExperimentConfig, calibration: &CalibrationResult, alpha: f64, critical: f64) -> BTreeMap<String, String> {
    let mut echo = cfg.echo();
    echo.insert("alpha".into(), alpha.to_string());
    echo.insert("critical_value".into(), critical.to_string());
    echo.insert("calibration_dim".into(), calibration.dim.to_string());
    echo.insert("calibration_reps".into(), calibration.reps.to_string());
    echo.insert("calibration_seed".into(), calibration.master_seed.to_string());
    echo
}

/// Null rejection frequency of `T > t_{1−α}`.
pub fn run_size(cfg: &ExperimentConfig, calibration: &CalibrationResult, alpha: f64) -> Result<TableResult> {
    let critical = calibration.critical_value(alpha)?;
    let samples = onatski_samples(cfg, 0.0)?;
    let mut table = TableResult::new("size", cfg.master_seed, test_echo(cfg, calibration, alpha, critical));
    table.push_probability(
        &cfg.label,
        format!("size(alpha={alpha})"),
        rejection_rate(&samples, critical),
        cfg.reps,
        cfg.master_seed,
    );
    Ok(table)
}

/// Rejection frequency under the alternative for each strength in `nus`.
/// Every strength reuses the same replicate streams.
pub fn run_power(cfg: &ExperimentConfig, calibration: &CalibrationResult, alpha: f64, nus: &[f64]) -> Result<TableResult> {
    let critical = calibration.critical_value(alpha)?;
    if let Some(&nu) = nus.iter().find(|nu| !(**nu >= 0.0)) {
        return Err(Error::NegativeStrength(nu));
    }
    let mut echo = test_echo(cfg, calibration, alpha, critical);
    echo.insert("nus".into(), nus.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
    let mut table = TableResult::new("power", cfg.master_seed, echo);
    for &nu in nus {
        let samples = onatski_samples(cfg, nu)?;
        table.push_probability(
            &cfg.label,
            format!("power(nu={nu})"),
            rejection_rate(&samples, critical),
            cfg.reps,
            cfg.master_seed,
        );
    }
    Ok(table)
}

/// Per rung: median of `|λ₁ − λ₊|`, median and 95th percentile of
/// `N^{2/3}|λ₁ − λ₊|`; then the least-squares slope of
/// `log median|λ₁ − λ₊|` against `log N` (setting `ladder`).
pub fn run_rigidity(rungs: &[ExperimentConfig]) -> Result<TableResult> {
    if rungs.len() < 3 {
        return Err(Error::InvalidArgument(format!("rigidity needs >= 3 sizes, got {}", rungs.len())));
    }
    let mut config = BTreeMap::new();
    for (i, cfg) in rungs.iter().enumerate() {
        for (k, v) in cfg.echo() {
            config.insert(format!("rung{i}.{k}"), v);
        }
    }
    let seed = rungs[0].master_seed;
    let mut table = TableResult::new("rigidity", seed, config);
    let (mut log_n, mut log_med) = (Vec::new(), Vec::new());
    for cfg in rungs {
        let edge = cfg.edge()?;
        let n = cfg.model.n as f64;
        let dev = sorted(&largest_eigenvalues(cfg)?.iter().map(|l| (l - edge.lambda_plus).abs()).collect::<Vec<_>>());
        let scale = n.powf(2.0 / 3.0);
        let scaled: Vec<f64> = dev.iter().map(|d| d * scale).collect();
        let median = quantile(&dev, 0.5);
        table.push(&cfg.label, "median_abs_dev", median, quantile_se(&dev, 0.5), cfg.reps, cfg.master_seed);
        table.push(&cfg.label, "median_scaled_dev", quantile(&scaled, 0.5), quantile_se(&scaled, 0.5), cfg.reps, cfg.master_seed);
        table.push(&cfg.label, "p95_scaled_dev", quantile(&scaled, 0.95), quantile_se(&scaled, 0.95), cfg.reps, cfg.master_seed);
        log_n.push(n.ln());
        log_med.push(median.ln());
    }
    let (slope, se) = ols_slope(&log_n, &log_med);
    table.push("ladder", "loglog_slope", slope, se, rungs[0].reps, seed);
    Ok(table)
}

/// Per grid point `z = E + iη`: medians over replicates of
/// `|m_N(z) − m(z)|` and `Nη|m_N(z) − m(z)|`, against the solved
/// limiting transform.
pub fn run_locallaw(cfg: &ExperimentConfig, grid: &[ComplexPoint]) -> Result<TableResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("local law needs at least one z".into()));
    }
    let limits = grid
        .iter()
        .map(|&z| Ok(solve_m(ComplexPoint::new(z.re, z.im)?, &cfg.model.spectrum, cfg.model.phi())?.m))
        .collect::<Result<Vec<_>>>()?;
    let errors: Vec<Vec<f64>> = map_replicates(cfg.reps, cfg.workers, |r| {
        let eigs = gram_eigenvalues(&sample_data_matrix(&cfg.model, cfg.stream(r))?, None)?;
        grid.iter()
            .zip(&limits)
            .map(|(&z, m)| Ok((empirical_stieltjes(&eigs, z)? - m).norm()))
            .collect()
    })?;
    let mut echo = cfg.echo();
    echo.insert(
        "grid".into(),
        grid.iter().map(|z| format!("{}+{}i", z.re, z.im)).collect::<Vec<_>>().join(","),
    );
    let mut table = TableResult::new("locallaw", cfg.master_seed, echo);
    let n = cfg.model.n as f64;
    for (j, z) in grid.iter().enumerate() {
        let abs = sorted(&errors.iter().map(|e| e[j]).collect::<Vec<_>>());
        let scaled: Vec<f64> = abs.iter().map(|e| n * z.im * e).collect();
        let tag = format!("z={}+{}i", z.re, z.im);
        table.push(&cfg.label, format!("median_abs_err({tag})"), quantile(&abs, 0.5), quantile_se(&abs, 0.5), cfg.reps, cfg.master_seed);
        table.push(
            &cfg.label,
            format!("median_scaled_err({tag})"),
            quantile(&scaled, 0.5),
            quantile_se(&scaled, 0.5),
            cfg.reps,
            cfg.master_seed,
        );
    }
    Ok(table)
}

/// Two-sample Kolmogorov–Smirnov distance between the rescaled `λ₁` of
/// two radius laws on the same `(M, N, Σ)`. Both samples are rescaled
/// with the common edge.
pub fn run_universality(a: &ExperimentConfig, b: &ExperimentConfig) -> Result<TableResult> {
    if a.model.m != b.model.m || a.model.n != b.model.n || a.model.spectrum != b.model.spectrum {
        return Err(Error::InvalidArgument("universality compares models with equal (M, N, spectrum)".into()));
    }
    let edge = a.edge()?;
    let sa = simulate(a, Some(edge))?;
    let sb = simulate(b, Some(edge))?;
    let d = ks_distance(&sa.rescaled, &sb.rescaled);
    let (na, nb) = (a.reps as f64, b.reps as f64);
    let se = KOLMOGOROV_SD * ((na + nb) / (na * nb)).sqrt();
    let mut config = BTreeMap::new();
    for (k, v) in a.echo() {
        config.insert(format!("a.{k}"), v);
    }
    for (k, v) in b.echo() {
        config.insert(format!("b.{k}"), v);
    }
    let setting = format!("{} vs {}", a.label, b.label);
    let mut table = TableResult::new("universality", a.master_seed, config);
    table.push(&setting, "ks_distance", d, se, a.reps.min(b.reps), a.master_seed);
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tw_reference::{onatski_critical, CalibrationSpec};

    fn small(name: BuiltinSigma, law: RadiusLaw, n: usize, reps: usize, seed: u64) -> ExperimentConfig {
        ExperimentConfig::new(ModelSpec::builtin(name, n, n, law).unwrap(), reps, seed).unwrap()
    }

    #[test]
    fn config_rejects_bad_input() {
        let model = ModelSpec::builtin(BuiltinSigma::Identity, 20, 20, RadiusLaw::ChiGaussian).unwrap();
        assert!(ExperimentConfig::new(model, 0, 1).is_err());
    }

    #[test]
    fn table1_single_replicate_is_degenerate() {
        let t = run_table1(&small(BuiltinSigma::Sigma1, RadiusLaw::ChiGaussian, 30, 1, 3)).unwrap();
        assert_eq!(t.cells.len(), 9);
        for c in &t.cells {
            assert!(c.estimate == 0.0 || c.estimate == 1.0);
            assert_eq!(c.se, 0.0);
            assert_eq!(c.reps, 1);
        }
        assert!(t.cells.windows(2).all(|w| w[0].estimate <= w[1].estimate));
    }

    #[test]
    fn workers_do_not_change_output() {
        let cfg = small(BuiltinSigma::Sigma2, RadiusLaw::DiscreteSumD2, 40, 30, 4);
        let a = run_table1(&cfg).unwrap();
        let b = run_table1(&cfg.clone().with_workers(3)).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn csv_layout() {
        let t = run_table1(&small(BuiltinSigma::Identity, RadiusLaw::ChiGaussian, 20, 5, 5)).unwrap();
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "setting,statistic,estimate,se,reps,seed");
        assert_eq!(lines.count(), 9);
        assert!(csv.contains("cdf(-1.27)"));
    }

    #[test]
    fn alpha_one_rejects_everything() {
        let cal = onatski_critical(&CalibrationSpec::new(60, 200, 6), 0.05).unwrap();
        let cfg = small(BuiltinSigma::Sigma1, RadiusLaw::PearsonII, 30, 20, 6);
        let t = run_size(&cfg, &cal, 1.0).unwrap();
        assert_eq!(t.cells[0].estimate, 1.0);
        assert!(matches!(run_size(&cfg, &cal, 0.2), Err(Error::MissingCalibration(_))));
        assert!(matches!(run_power(&cfg, &cal, 0.05, &[-1.0]), Err(Error::NegativeStrength(_))));
    }

    #[test]
    fn rigidity_needs_three_rungs() {
        let rungs = ladder(&SpectrumSource::Builtin(BuiltinSigma::Identity), 1.0, &RadiusLaw::ChiGaussian, &[20, 40], 5, 1).unwrap();
        assert!(run_rigidity(&rungs).is_err());
        let rungs = ladder(&SpectrumSource::Builtin(BuiltinSigma::Identity), 1.0, &RadiusLaw::ChiGaussian, &[20, 40, 80], 5, 1).unwrap();
        let t = run_rigidity(&rungs).unwrap();
        assert_eq!(t.cells.len(), 10);
        assert!(t.cell("ladder", "loglog_slope").unwrap().estimate.is_finite());
    }

    #[test]
    fn locallaw_far_from_support() {
        let cfg = small(BuiltinSigma::Identity, RadiusLaw::ChiGaussian, 100, 20, 7);
        let lp = cfg.edge().unwrap().lambda_plus;
        let z = ComplexPoint::new(lp + 1.0, 1.0).unwrap();
        let t = run_locallaw(&cfg, &[z]).unwrap();
        let med = t.cells.iter().find(|c| c.statistic.starts_with("median_abs_err")).unwrap().estimate;
        assert!(med <= 10.0 / 100.0, "median |m_N - m| = {med}");
    }

    #[test]
    fn universality_requires_common_model() {
        let a = small(BuiltinSigma::Sigma1, RadiusLaw::ChiGaussian, 30, 10, 8);
        let b = small(BuiltinSigma::Sigma1, RadiusLaw::ChiGaussian, 40, 10, 8);
        assert!(run_universality(&a, &b).is_err());
        let t = run_universality(&a, &a).unwrap();
        assert_eq!(t.cells[0].estimate, 0.0);
    }

    #[test]
    fn write_creates_named_files() {
        let dir = tempfile::tempdir().unwrap();
        let t = run_table1(&small(BuiltinSigma::Identity, RadiusLaw::ChiGaussian, 20, 3, 9)).unwrap();
        let (csv, json) = t.write(dir.path()).unwrap();
        assert!(csv.ends_with("table1_seed9.csv"));
        assert!(json.ends_with("table1_seed9.json"));
        let back: TableResult = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
        assert_eq!(back, t);
    }
}
