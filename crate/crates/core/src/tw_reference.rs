//! Type-1 Tracy–Widom reference values: the nine tabulated CDF points and
//! Monte-Carlo calibration of the edge and Onatski statistics on GOE
//! matrices.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::map_replicates;
use crate::sampler::{sample_goe, sample_goe_tridiagonal, RngStream};
use crate::spectral::{onatski_ratio, symmetric_top_eigenvalues, tridiagonal_top_eigenvalues};
use crate::stats::{quantile, sorted};

const TW1_POINTS: [(f64, f64); 9] = [
    (-3.90, 0.01),
    (-3.18, 0.05),
    (-2.78, 0.10),
    (-1.91, 0.30),
    (-1.27, 0.50),
    (-0.59, 0.70),
    (0.45, 0.90),
    (0.98, 0.95),
    (2.02, 0.99),
];

/// Value returned left of the first table node.
pub const TW1_LOWER_CLAMP: f64 = 0.005;
/// Value returned right of the last table node.
pub const TW1_UPPER_CLAMP: f64 = 0.995;

pub const MIN_CALIBRATION_DIM: usize = 50;
pub const MIN_CALIBRATION_REPS: usize = 100;
/// Largest tolerated fraction of replicates with a degenerate gap.
pub const MAX_DISCARD_FRACTION: f64 = 0.01;

/// Percentile/probability pairs of the TW₁ distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct Tw1Table {
    pub points: Vec<(f64, f64)>,
}

pub fn tw1_table() -> Tw1Table {
    Tw1Table {
        points: TW1_POINTS.to_vec(),
    }
}

/// An interpolated TW₁ probability; `clamped` is set when `x` lies outside
/// the tabulated range and the fixed tail value was used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tw1Lookup {
    pub p: f64,
    pub clamped: bool,
}

impl Tw1Table {
    /// Piecewise-linear interpolation between nodes.
    pub fn lookup(&self, x: f64) -> Tw1Lookup {
        let pts = &self.points;
        let (x0, p0) = pts[0];
        let (xn, pn) = pts[pts.len() - 1];
        if x < x0 {
            return Tw1Lookup {
                p: TW1_LOWER_CLAMP,
                clamped: true,
            };
        }
        if x > xn {
            return Tw1Lookup {
                p: TW1_UPPER_CLAMP,
                clamped: true,
            };
        }
        if x == x0 {
            return Tw1Lookup { p: p0, clamped: false };
        }
        if x == xn {
            return Tw1Lookup { p: pn, clamped: false };
        }
        let i = pts.partition_point(|&(xi, _)| xi <= x);
        let (xa, pa) = pts[i - 1];
        let (xb, pb) = pts[i];
        let p = if x == xa { pa } else { pa + (pb - pa) * (x - xa) / (xb - xa) };
        Tw1Lookup { p, clamped: false }
    }
}

/// TW₁ distribution function from the table. See [`Tw1Table::lookup`] for
/// the clamping flag.
pub fn tw1_cdf_interp(x: f64) -> f64 {
    tw1_table().lookup(x).p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StatisticKind {
    /// `d^{2/3}(λ₁ − 2)` of a GOE matrix of dimension `d`.
    TwEdge,
    /// `(λ₁ − λ₂)/(λ₂ − λ₃)`.
    OnatskiRatio,
}

impl StatisticKind {
    fn file_stem(self) -> &'static str {
        match self {
            StatisticKind::TwEdge => "tw_edge",
            StatisticKind::OnatskiRatio => "onatski_ratio",
        }
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StatisticKind::TwEdge => "TwEdge",
            StatisticKind::OnatskiRatio => "OnatskiRatio",
        })
    }
}

/// How GOE eigenvalues are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoeSampling {
    /// β = 1 Hermite tridiagonal model, `O(d)` per draw.
    #[default]
    Tridiagonal,
    /// Full symmetric Gaussian matrix, `O(d³)` per draw.
    Dense,
}

impl FromStr for GoeSampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tridiagonal" | "tri" => Ok(GoeSampling::Tridiagonal),
            "dense" => Ok(GoeSampling::Dense),
            other => Err(Error::InvalidArgument(format!("unknown GOE sampling `{other}`"))),
        }
    }
}

/// Size, seed and parallelism of a GOE calibration run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalibrationSpec {
    pub dim: usize,
    pub reps: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub sampling: GoeSampling,
}

impl CalibrationSpec {
    pub fn new(dim: usize, reps: usize, master_seed: u64) -> Self {
        Self {
            dim,
            reps,
            master_seed,
            workers: 1,
            sampling: GoeSampling::Tridiagonal,
        }
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn sampling(mut self, sampling: GoeSampling) -> Self {
        self.sampling = sampling;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.dim < MIN_CALIBRATION_DIM {
            return Err(Error::InvalidArgument(format!(
                "calibration dimension must be >= {MIN_CALIBRATION_DIM}, got {}",
                self.dim
            )));
        }
        if self.reps < MIN_CALIBRATION_REPS {
            return Err(Error::InvalidArgument(format!(
                "calibration needs >= {MIN_CALIBRATION_REPS} replicates, got {}",
                self.reps
            )));
        }
        Ok(())
    }
}

/// Largest `k` eigenvalues (descending) of one GOE draw on stream `r`.
pub fn goe_top_eigenvalues(dim: usize, k: usize, sampling: GoeSampling, stream: RngStream) -> Result<Vec<f64>> {
    let mut rng = stream.rng();
    match sampling {
        GoeSampling::Tridiagonal => {
            let (diag, off) = sample_goe_tridiagonal(dim, &mut rng)?;
            tridiagonal_top_eigenvalues(&diag, &off, k)
        }
        GoeSampling::Dense => symmetric_top_eigenvalues(sample_goe(dim, &mut rng)?, k),
    }
}

/// Draws of the edge statistic `d^{2/3}(λ₁ − 2)`, in replicate order.
pub fn goe_edge_samples(spec: &CalibrationSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let scale = (spec.dim as f64).powf(2.0 / 3.0);
    map_replicates(spec.reps, spec.workers, |r| {
        let top = goe_top_eigenvalues(spec.dim, 1, spec.sampling, RngStream::new(spec.master_seed, r))?;
        Ok(scale * (top[0] - 2.0))
    })
}

/// Draws of the Onatski ratio, in replicate order; `None` marks a
/// replicate whose gap `λ₂ − λ₃` was degenerate.
pub fn goe_onatski_samples(spec: &CalibrationSpec) -> Result<Vec<Option<f64>>> {
    spec.validate()?;
    map_replicates(spec.reps, spec.workers, |r| {
        let top = goe_top_eigenvalues(spec.dim, 3, spec.sampling, RngStream::new(spec.master_seed, r))?;
        match onatski_ratio(top[0], top[1], top[2]) {
            Ok(t) => Ok(Some(t)),
            Err(Error::DegenerateGap(_)) => Ok(None),
            Err(e) => Err(e),
        }
    })
}

/// Empirical percentiles of a Monte-Carlo reference statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub statistic_kind: StatisticKind,
    pub dim: usize,
    pub reps: usize,
    pub master_seed: u64,
    pub sampling: GoeSampling,
    /// `(probability, value)` pairs, increasing in both.
    pub percentile_estimates: Vec<(f64, f64)>,
    /// Replicates dropped for a degenerate eigenvalue gap.
    pub discarded: usize,
    /// Seconds since the Unix epoch.
    pub created_unix: u64,
}

const PROB_MATCH: f64 = 1e-9;

impl CalibrationResult {
    fn from_samples(kind: StatisticKind, spec: &CalibrationSpec, samples: &[f64], probs: &[f64], discarded: usize) -> Result<Self> {
        let mut probs: Vec<f64> = probs.to_vec();
        if let Some(&p) = probs.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::InvalidArgument(format!("percentile probability {p} not in (0, 1)")));
        }
        probs.sort_by(|a, b| a.total_cmp(b));
        probs.dedup_by(|a, b| (*a - *b).abs() < PROB_MATCH);
        let data = sorted(samples);
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(Self {
            statistic_kind: kind,
            dim: spec.dim,
            reps: spec.reps,
            master_seed: spec.master_seed,
            sampling: spec.sampling,
            percentile_estimates: probs.iter().map(|&p| (p, quantile(&data, p))).collect(),
            discarded,
            created_unix,
        })
    }

    /// Estimated `p`-percentile, if `p` was calibrated.
    pub fn percentile(&self, p: f64) -> Option<f64> {
        self.percentile_estimates
            .iter()
            .find(|(q, _)| (q - p).abs() < PROB_MATCH)
            .map(|(_, v)| *v)
    }

    /// Critical value of a level-`alpha` upper-tail test: the `(1 − α)`
    /// percentile. `alpha >= 1` rejects everything and returns `-∞`.
    pub fn critical_value(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
        }
        if alpha >= 1.0 {
            return Ok(f64::NEG_INFINITY);
        }
        self.percentile(1.0 - alpha).ok_or_else(|| {
            Error::MissingCalibration(format!(
                "{} calibration (dim {}, reps {}) has no {} percentile",
                self.statistic_kind,
                self.dim,
                self.reps,
                1.0 - alpha
            ))
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibration serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("calibration file: {e}")))
    }

    /// Writes atomically: a temporary sibling is renamed into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Default probabilities stored by [`goe_percentiles`] callers that do not
/// choose their own: the table nodes.
pub fn tw1_probabilities() -> Vec<f64> {
    TW1_POINTS.iter().map(|(_, p)| *p).collect()
}

/// Upper-tail probabilities always stored for the Onatski ratio.
pub const ONATSKI_PROBS: [f64; 4] = [0.90, 0.95, 0.975, 0.99];

/// Percentiles of `d^{2/3}(λ₁ − 2)` over GOE draws.
pub fn goe_percentiles(spec: &CalibrationSpec, probs: &[f64]) -> Result<CalibrationResult> {
    let samples = goe_edge_samples(spec)?;
    CalibrationResult::from_samples(StatisticKind::TwEdge, spec, &samples, probs, 0)
}

/// Percentiles of the Onatski ratio over GOE draws, including `1 − alpha`.
///
/// Replicates with a degenerate gap are dropped and counted; more than 1%
/// dropped is an error.
pub fn onatski_critical(spec: &CalibrationSpec, alpha: f64) -> Result<CalibrationResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let draws = goe_onatski_samples(spec)?;
    let samples: Vec<f64> = draws.iter().flatten().copied().collect();
    let discarded = draws.len() - samples.len();
    if discarded as f64 > MAX_DISCARD_FRACTION * draws.len() as f64 {
        return Err(Error::DegenerateGap(discarded as f64 / draws.len() as f64));
    }
    let mut probs = ONATSKI_PROBS.to_vec();
    probs.push(1.0 - alpha);
    CalibrationResult::from_samples(StatisticKind::OnatskiRatio, spec, &samples, &probs, discarded)
}

/// File name used for a calibration in a cache directory.
pub fn cache_file_name(kind: StatisticKind, spec: &CalibrationSpec) -> String {
    let sampling = match spec.sampling {
        GoeSampling::Tridiagonal => "",
        GoeSampling::Dense => "_dense",
    };
    format!(
        "{}_dim{}_reps{}_seed{}{}.json",
        kind.file_stem(),
        spec.dim,
        spec.reps,
        spec.master_seed,
        sampling
    )
}

/// A directory of persisted calibrations. Entries are written once and
/// never modified.
#[derive(Debug, Clone)]
pub struct CalibrationCache {
    pub dir: PathBuf,
}

impl CalibrationCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path(&self, kind: StatisticKind, spec: &CalibrationSpec) -> PathBuf {
        self.dir.join(cache_file_name(kind, spec))
    }

    pub fn get(&self, kind: StatisticKind, spec: &CalibrationSpec) -> Result<Option<CalibrationResult>> {
        let path = self.path(kind, spec);
        if path.exists() {
            CalibrationResult::load(&path).map(Some)
        } else {
            Ok(None)
        }
    }

    /// Cached Onatski calibration covering `alpha`, computing and storing
    /// it when absent.
    pub fn onatski(&self, spec: &CalibrationSpec, alpha: f64) -> Result<CalibrationResult> {
        if let Some(c) = self.get(StatisticKind::OnatskiRatio, spec)? {
            if alpha >= 1.0 || c.percentile(1.0 - alpha).is_some() {
                return Ok(c);
            }
        }
        let c = onatski_critical(spec, if alpha < 1.0 { alpha } else { 0.05 })?;
        c.save(&self.path(StatisticKind::OnatskiRatio, spec))?;
        Ok(c)
    }

    /// Cached edge calibration at the table probabilities, computing and
    /// storing it when absent.
    pub fn tw_edge(&self, spec: &CalibrationSpec) -> Result<CalibrationResult> {
        if let Some(c) = self.get(StatisticKind::TwEdge, spec)? {
            return Ok(c);
        }
        let c = goe_percentiles(spec, &tw1_probabilities())?;
        c.save(&self.path(StatisticKind::TwEdge, spec))?;
        Ok(c)
    }
}
