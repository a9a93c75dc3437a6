//! Reproducible random generation for the elliptical model, GOE matrices
//! and the signal-plus-noise alternative.
//!
//! All randomness is drawn from a [`RngStream`]: a ChaCha8 generator keyed
//! by `(master_seed, stream_index)`. Experiments assign one stream per
//! replicate, so results never depend on how replicates are scheduled.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, ChiSquared, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, RadiusLaw};

const SPHERE_MIN_NORM: f64 = 1e-300;
const SPHERE_MAX_ATTEMPTS: u32 = 8;

/// Identifies one independent random substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// A fresh generator positioned at the start of this substream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Fills `out` with a uniform draw from the unit sphere `S^{len-1}`.
pub fn fill_unit_sphere<R: Rng + ?Sized>(out: &mut [f64], rng: &mut R) -> Result<()> {
    if out.is_empty() {
        return Err(Error::InvalidArgument("sphere dimension must be >= 1".into()));
    }
    for _ in 0..SPHERE_MAX_ATTEMPTS {
        for v in out.iter_mut() {
            *v = standard_normal(rng);
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm >= SPHERE_MIN_NORM {
            for v in out.iter_mut() {
                *v /= norm;
            }
            return Ok(());
        }
    }
    Err(Error::DegenerateDraw(SPHERE_MAX_ATTEMPTS))
}

/// Uniform direction on `S^{m-1}`: a standard normal vector divided by its
/// norm.
pub fn sample_unit_sphere<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<Vec<f64>> {
    let mut u = vec![0.0; m];
    fill_unit_sphere(&mut u, rng)?;
    Ok(u)
}

enum RadiusKind {
    Chi(ChiSquared<f64>),
    Pearson(Beta<f64>),
    Gamma(Gamma<f64>),
    /// Cumulative weights and atoms of the summand law.
    Sum { cumulative: Vec<f64>, atoms: Vec<f64> },
}

/// Radius sampler prepared for fixed `(M, N)`.
pub struct RadiusSampler {
    kind: RadiusKind,
    m: usize,
    scale: f64,
}

impl RadiusSampler {
    pub fn new(law: &RadiusLaw, m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidLaw(format!("radius needs M, N >= 1, got M={m}, N={n}")));
        }
        let m_f = m as f64;
        let bad = |e: &dyn std::fmt::Display| Error::InvalidLaw(e.to_string());
        let kind = match law {
            RadiusLaw::ChiGaussian => RadiusKind::Chi(ChiSquared::new(m_f).map_err(|e| bad(&e))?),
            RadiusLaw::PearsonII => RadiusKind::Pearson(Beta::new(m_f / 2.0, 0.5).map_err(|e| bad(&e))?),
            RadiusLaw::GammaDoubleExp => {
                RadiusKind::Gamma(Gamma::new(m_f / 2.0, 0.5).map_err(|e| bad(&e))?)
            }
            _ => {
                let summands = law.summand_atoms().expect("discrete law");
                let mut acc = 0.0;
                let cumulative = summands
                    .iter()
                    .map(|(_, w)| {
                        acc += w;
                        acc
                    })
                    .collect();
                RadiusKind::Sum {
                    cumulative,
                    atoms: summands.iter().map(|(a, _)| *a).collect(),
                }
            }
        };
        Ok(Self {
            kind,
            m,
            scale: law.scale(m, n)?,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let raw = match &self.kind {
            RadiusKind::Chi(d) => d.sample(rng).sqrt(),
            RadiusKind::Pearson(d) => (d.sample(rng) * (self.m as f64 + 1.0)).sqrt(),
            RadiusKind::Gamma(d) => d.sample(rng),
            RadiusKind::Sum { cumulative, atoms } => {
                let mut total = 0.0;
                for _ in 0..self.m {
                    let u: f64 = rng.random();
                    let idx = cumulative.partition_point(|&c| c <= u).min(atoms.len() - 1);
                    total += atoms[idx];
                }
                total
            }
        };
        self.scale * raw
    }
}

/// One draw of the radius ξ, normalized to `E ξ² = M/N`.
pub fn sample_radius<R: Rng + ?Sized>(law: &RadiusLaw, m: usize, n: usize, rng: &mut R) -> Result<f64> {
    Ok(RadiusSampler::new(law, m, n)?.sample(rng))
}

/// Simulated `M × N` data matrix whose columns are `ξ_i Σ^{1/2} u_i`.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    pub entries: DMatrix<f64>,
    pub model: ModelSpec,
    pub stream: RngStream,
}

/// Writes `ξ_i Σ^{1/2} u_i` into every column of `out`, drawing `ξ_i` then
/// `u_i` column by column.
fn fill_elliptical_columns<R: Rng + ?Sized>(
    spec: &ModelSpec,
    out: &mut DMatrix<f64>,
    rng: &mut R,
) -> Result<()> {
    let sqrt_diag: Vec<f64> = spec.spectrum.diagonal(spec.m)?.iter().map(|v| v.sqrt()).collect();
    let radius = RadiusSampler::new(&spec.radius, spec.m, spec.n)?;
    for mut col in out.column_iter_mut() {
        let xi = radius.sample(rng);
        let slice = col.as_mut_slice();
        fill_unit_sphere(slice, rng)?;
        for (v, s) in slice.iter_mut().zip(&sqrt_diag) {
            *v *= xi * s;
        }
    }
    Ok(())
}

pub fn sample_data_matrix(spec: &ModelSpec, stream: RngStream) -> Result<DataMatrix> {
    let mut rng = stream.rng();
    let mut entries = DMatrix::zeros(spec.m, spec.n);
    fill_elliptical_columns(spec, &mut entries, &mut rng)?;
    Ok(DataMatrix {
        entries,
        model: spec.clone(),
        stream,
    })
}

/// Dense GOE matrix: off-diagonal variance `1/d`, diagonal variance `2/d`,
/// so the spectrum fills `[-2, 2]` and `d^{2/3}(λ₁ - 2)` tends to TW₁.
pub fn sample_goe<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("GOE dimension must be >= 2, got {d}")));
    }
    let off_sd = (1.0 / d as f64).sqrt();
    let diag_sd = (2.0 / d as f64).sqrt();
    let mut h = DMatrix::zeros(d, d);
    for i in 0..d {
        h[(i, i)] = diag_sd * standard_normal(rng);
        for j in i + 1..d {
            let v = off_sd * standard_normal(rng);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}

/// Symmetric tridiagonal matrix with the same eigenvalue law as
/// [`sample_goe`] (the β = 1 Hermite tridiagonal model): diagonal
/// `N(0, 2/d)`, off-diagonal `χ_{d-k}/√d` for `k = 1, …, d-1`.
///
/// Returns `(diagonal, off_diagonal)`. Costs `O(d)` draws instead of
/// `O(d²)`.
pub fn sample_goe_tridiagonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("GOE dimension must be >= 2, got {d}")));
    }
    let diag_sd = (2.0 / d as f64).sqrt();
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let diag = (0..d).map(|_| diag_sd * standard_normal(rng)).collect();
    let mut off = Vec::with_capacity(d - 1);
    for k in 1..d {
        let chi2 = ChiSquared::new((d - k) as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        off.push(chi2.sample(rng).sqrt() * inv_sqrt_d);
    }
    Ok((diag, off))
}

/// Signal-plus-noise data `y_i = e₁ s_i + Σ^{1/2} z_i` with
/// `s_i ~ N(0, ν√φ)` and `z_i = √N ξ_i u_i` (so `E z z* = I`).
///
/// The noise columns are drawn first, consuming the stream exactly as
/// [`sample_data_matrix`] does; the `N` signal draws follow. With `ν = 0`
/// the result is `√N` times the null data matrix.
pub fn sample_signal_plus_noise(spec: &ModelSpec, nu: f64, stream: RngStream) -> Result<DMatrix<f64>> {
    if nu < 0.0 || nu.is_nan() {
        return Err(Error::NegativeStrength(nu));
    }
    let mut rng = stream.rng();
    let mut y = DMatrix::zeros(spec.m, spec.n);
    fill_elliptical_columns(spec, &mut y, &mut rng)?;
    y *= (spec.n as f64).sqrt();
    let signal_sd = (nu * spec.phi().sqrt()).sqrt();
    let signal = DVector::from_fn(spec.n, |_, _| signal_sd * standard_normal(&mut rng));
    for (i, s) in signal.iter().enumerate() {
        y[(0, i)] += s;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BuiltinSigma;

    fn mean_sd(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    #[test]
    fn streams_are_pure_functions_of_seed_and_index() {
        let a: Vec<u64> = (0..4).map(|_| RngStream::new(7, 3).rng().random()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let x: u64 = RngStream::new(7, 3).rng().random();
        let y: u64 = RngStream::new(7, 4).rng().random();
        let z: u64 = RngStream::new(8, 3).rng().random();
        assert_ne!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn zero_sphere_is_a_sign() {
        let mut rng = RngStream::new(1, 0).rng();
        for _ in 0..20 {
            let u = sample_unit_sphere(1, &mut rng).unwrap();
            assert_eq!(u[0].abs(), 1.0);
        }
        assert!(sample_unit_sphere(0, &mut rng).is_err());
    }

    #[test]
    fn sphere_norm_is_one() {
        let mut rng = RngStream::new(2, 0).rng();
        for m in [2, 3, 10, 50, 500] {
            let u = sample_unit_sphere(m, &mut rng).unwrap();
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn sphere_coordinate_second_moment() {
        // E u₁² = 1/M; Var u₁² = 2(M-1)/(M²(M+2)).
        let m = 50;
        let draws = 100_000;
        let mut rng = RngStream::new(3, 0).rng();
        let sq: Vec<f64> = (0..draws)
            .map(|_| sample_unit_sphere(m, &mut rng).unwrap()[0].powi(2))
            .collect();
        let (mean, _) = mean_sd(&sq);
        let mf = m as f64;
        let se = (2.0 * (mf - 1.0) / (mf * mf * (mf + 2.0)) / draws as f64).sqrt();
        assert!((mean - 1.0 / mf).abs() <= 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn chi_radius_normalization() {
        let (m, n) = (100, 100);
        let sampler = RadiusSampler::new(&RadiusLaw::ChiGaussian, m, n).unwrap();
        let mut rng = RngStream::new(4, 0).rng();
        let vals: Vec<f64> = (0..100_000)
            .map(|_| sampler.sample(&mut rng).powi(2) * n as f64 / m as f64)
            .collect();
        let (mean, _) = mean_sd(&vals);
        assert!((mean - 1.0).abs() < 0.02);
    }

    #[test]
    fn every_law_hits_target_second_moment() {
        let laws = [
            RadiusLaw::ChiGaussian,
            RadiusLaw::PearsonII,
            RadiusLaw::GammaDoubleExp,
            RadiusLaw::DiscreteSumD1,
            RadiusLaw::DiscreteSumD2,
        ];
        for (k, law) in laws.iter().enumerate() {
            for &(m, n) in &[(100, 100), (100, 300), (300, 100)] {
                let sampler = RadiusSampler::new(law, m, n).unwrap();
                let mut rng = RngStream::new(5, k as u64).rng();
                let sq: Vec<f64> = (0..20_000).map(|_| sampler.sample(&mut rng).powi(2)).collect();
                let (mean, sd) = mean_sd(&sq);
                let se = sd / (sq.len() as f64).sqrt();
                let target = m as f64 / n as f64;
                assert!((mean - target).abs() <= 3.0 * se + 1e-12, "{law} {m}x{n}: {mean} vs {target} (se {se})");
            }
        }
    }

    #[test]
    fn radius_concentration() {
        let laws = [
            RadiusLaw::ChiGaussian,
            RadiusLaw::PearsonII,
            RadiusLaw::GammaDoubleExp,
            RadiusLaw::DiscreteSumD1,
            RadiusLaw::DiscreteSumD2,
        ];
        for (k, law) in laws.iter().enumerate() {
            let mut sds = Vec::new();
            for n in [100usize, 400] {
                let sampler = RadiusSampler::new(law, n, n).unwrap();
                let mut rng = RngStream::new(6, k as u64).rng();
                let sq: Vec<f64> = (0..10_000).map(|_| sampler.sample(&mut rng).powi(2)).collect();
                let (_, sd) = mean_sd(&sq);
                assert!(sd <= 10.0 / (n as f64).sqrt(), "{law} N={n}: sd {sd}");
                sds.push(sd);
            }
            let ratio = sds[1] / sds[0];
            // Pearson's ξ² fluctuates at O(1/N) so its ratio is nearer 1/4.
            assert!(ratio > 0.2 && ratio < 0.65, "{law}: ratio {ratio}");
        }
    }

    #[test]
    fn pearson_small_dimension_mean() {
        let sampler = RadiusSampler::new(&RadiusLaw::PearsonII, 2, 2).unwrap();
        let mut rng = RngStream::new(9, 0).rng();
        let sq: Vec<f64> = (0..200_000).map(|_| sampler.sample(&mut rng).powi(2)).collect();
        let (mean, sd) = mean_sd(&sq);
        assert!((mean - 1.0).abs() <= 4.0 * sd / (sq.len() as f64).sqrt());
    }

    #[test]
    fn identity_columns_have_radius_norm() {
        let spec = ModelSpec::builtin(BuiltinSigma::Identity, 30, 40, RadiusLaw::GammaDoubleExp).unwrap();
        let stream = RngStream::new(11, 2);
        let x = sample_data_matrix(&spec, stream).unwrap();
        let mut rng = stream.rng();
        let radius = RadiusSampler::new(&spec.radius, 30, 40).unwrap();
        for col in x.entries.column_iter() {
            let xi = radius.sample(&mut rng);
            let _ = sample_unit_sphere(30, &mut rng).unwrap();
            assert!((col.norm_squared() - xi * xi).abs() <= 1e-12 * (1.0 + xi * xi));
        }
    }

    #[test]
    fn sigma1_column_energy() {
        // E ‖col‖² = (M/N) tr Σ / M = 1.5.
        let spec = ModelSpec::builtin(BuiltinSigma::Sigma1, 200, 200, RadiusLaw::ChiGaussian).unwrap();
        let x = sample_data_matrix(&spec, RngStream::new(12, 0)).unwrap();
        let norms: Vec<f64> = x.entries.column_iter().map(|c| c.norm_squared()).collect();
        let (mean, sd) = mean_sd(&norms);
        let se = sd / (norms.len() as f64).sqrt();
        assert!((mean - 1.5).abs() <= 3.0 * se, "mean {mean}, se {se}");
        // ‖col‖² = ξ² uᵀΣu ≤ σ₁ ξ²: replay the radius draws.
        let mut rng = RngStream::new(12, 0).rng();
        let radius = RadiusSampler::new(&spec.radius, 200, 200).unwrap();
        for c in x.entries.column_iter() {
            let xi = radius.sample(&mut rng);
            let _ = sample_unit_sphere(200, &mut rng).unwrap();
            assert!(c.norm_squared() <= 2.0 * xi * xi * (1.0 + 1e-12));
        }
    }

    #[test]
    fn data_matrix_is_deterministic() {
        let spec = ModelSpec::builtin(BuiltinSigma::Sigma2, 20, 25, RadiusLaw::DiscreteSumD1).unwrap();
        let a = sample_data_matrix(&spec, RngStream::new(13, 5)).unwrap();
        let b = sample_data_matrix(&spec, RngStream::new(13, 5)).unwrap();
        assert_eq!(a.entries, b.entries);
        let c = sample_data_matrix(&spec, RngStream::new(13, 6)).unwrap();
        assert_ne!(a.entries, c.entries);
    }

    #[test]
    fn goe_is_symmetric_and_reproducible() {
        let h = sample_goe(40, &mut RngStream::new(14, 0).rng()).unwrap();
        assert_eq!(h, h.transpose());
        let h2 = sample_goe(40, &mut RngStream::new(14, 0).rng()).unwrap();
        assert_eq!(h, h2);
        assert!(sample_goe(1, &mut RngStream::new(14, 0).rng()).is_err());
    }

    #[test]
    fn goe_entry_variances() {
        let d = 60;
        let mut rng = RngStream::new(15, 0).rng();
        let (mut diag, mut off) = (Vec::new(), Vec::new());
        for _ in 0..50 {
            let h = sample_goe(d, &mut rng).unwrap();
            for i in 0..d {
                diag.push(h[(i, i)] * h[(i, i)]);
                for j in i + 1..d {
                    off.push(h[(i, j)] * h[(i, j)]);
                }
            }
        }
        let (dm, dsd) = mean_sd(&diag);
        let (om, osd) = mean_sd(&off);
        assert!((dm - 2.0 / d as f64).abs() < 4.0 * dsd / (diag.len() as f64).sqrt());
        assert!((om - 1.0 / d as f64).abs() < 4.0 * osd / (off.len() as f64).sqrt());
    }

    #[test]
    fn tridiagonal_goe_has_matching_second_moment() {
        // E tr H² / d = (d·2/d + 2 Σ_k (d-k)/d) / d = (2 + (d-1)) / d.
        let d = 100;
        let mut rng = RngStream::new(16, 0).rng();
        let vals: Vec<f64> = (0..2000)
            .map(|_| {
                let (a, b) = sample_goe_tridiagonal(d, &mut rng).unwrap();
                (a.iter().map(|v| v * v).sum::<f64>() + 2.0 * b.iter().map(|v| v * v).sum::<f64>()) / d as f64
            })
            .collect();
        let (mean, sd) = mean_sd(&vals);
        let expected = (2.0 + (d as f64 - 1.0)) / d as f64;
        assert!((mean - expected).abs() < 4.0 * sd / (vals.len() as f64).sqrt());
    }

    #[test]
    fn signal_plus_noise_null_reduction() {
        let spec = ModelSpec::builtin(BuiltinSigma::Sigma1, 30, 30, RadiusLaw::PearsonII).unwrap();
        let stream = RngStream::new(17, 1);
        let y = sample_signal_plus_noise(&spec, 0.0, stream).unwrap();
        let x = sample_data_matrix(&spec, stream).unwrap();
        let scaled = x.entries * (30f64).sqrt();
        for (a, b) in y.iter().zip(scaled.iter()) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        assert!(matches!(sample_signal_plus_noise(&spec, -1.0, stream), Err(Error::NegativeStrength(_))));
    }

    #[test]
    fn signal_only_touches_first_row() {
        let spec = ModelSpec::builtin(BuiltinSigma::Sigma1, 10, 20, RadiusLaw::ChiGaussian).unwrap();
        let stream = RngStream::new(18, 0);
        let y0 = sample_signal_plus_noise(&spec, 0.0, stream).unwrap();
        let y4 = sample_signal_plus_noise(&spec, 4.0, stream).unwrap();
        assert_eq!(y0.rows(1, 9), y4.rows(1, 9));
        assert_ne!(y0.row(0), y4.row(0));
    }
}
