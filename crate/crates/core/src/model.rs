//! Domain types for the elliptical data model `x = ξ Σ^{1/2} u`.
//!
//! The population covariance is carried only through its spectrum: the
//! direction `u` is orthogonally invariant, so `Σ` may be taken diagonal.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// One point mass of the population spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub weight: f64,
}

/// Weighted atoms of the population eigenvalue distribution, in canonical
/// form: merged duplicates, weights summing to one, values descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpectrum {
    atoms: Vec<Atom>,
}

impl PopulationSpectrum {
    /// Builds the canonical spectrum from arbitrary `(value, weight)` pairs.
    pub fn new(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptySpectrum);
        }
        for &(value, weight) in atoms {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveValue(value));
            }
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::NonPositiveWeight(weight));
            }
        }
        // Sorting on (value desc, weight asc) before merging fixes the
        // summation order, so any permutation of the input is bit-identical.
        let mut sorted = atoms.to_vec();
        sorted.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));

        let mut merged: Vec<Atom> = Vec::with_capacity(sorted.len());
        for (value, weight) in sorted {
            match merged.last_mut() {
                Some(last) if last.value == value => last.weight += weight,
                _ => merged.push(Atom { value, weight }),
            }
        }
        let total: f64 = merged.iter().map(|a| a.weight).sum();
        for atom in &mut merged {
            atom.weight /= total;
        }
        Ok(Self { atoms: merged })
    }

    /// The finite-sample spectrum of an explicit diagonal `Σ`: weight `1/M`
    /// on each diagonal entry.
    pub fn from_diagonal(diagonal: &[f64]) -> Result<Self> {
        let m = diagonal.len() as f64;
        let atoms: Vec<(f64, f64)> = diagonal.iter().map(|&v| (v, 1.0 / m)).collect();
        Self::new(&atoms)
    }

    /// Atoms with integer multiplicities out of `total`; weights are the
    /// exact ratios `count / total`.
    fn from_counts(counts: &[(f64, usize)], total: usize) -> Self {
        let mut atoms: Vec<Atom> = counts
            .iter()
            .filter(|(_, c)| *c > 0)
            .map(|&(value, c)| Atom {
                value,
                weight: c as f64 / total as f64,
            })
            .collect();
        atoms.sort_by(|a, b| b.value.total_cmp(&a.value));
        Self { atoms }
    }

    /// Parses the plain-text spectrum format: one `value weight` pair per
    /// line, `#` starts a comment, blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut atoms = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Parse(format!(
                    "spectrum line {}: expected `value weight`, got `{}`",
                    lineno + 1,
                    raw.trim()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("spectrum line {}: `{}` is not a number", lineno + 1, s))
                })
            };
            atoms.push((parse(fields[0])?, parse(fields[1])?));
        }
        Self::new(&atoms)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {}", path.display(), e)))?;
        Self::parse(&text)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Largest population eigenvalue σ₁.
    pub fn sigma_max(&self) -> f64 {
        self.atoms[0].value
    }

    /// Smallest population eigenvalue σ_M.
    pub fn sigma_min(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].value
    }

    /// `∫ x π(dx)`, i.e. `tr Σ / M`.
    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.value * a.weight).sum()
    }

    /// The spectrum with every atom multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::InvalidArgument(format!("scale factor {factor} must be positive")));
        }
        Ok(Self {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    value: a.value * factor,
                    weight: a.weight,
                })
                .collect(),
        })
    }

    /// Descending diagonal of `Σ` with `m` entries. Multiplicities are the
    /// largest-remainder apportionment of `weight · m`.
    pub fn diagonal(&self, m: usize) -> Result<Vec<f64>> {
        if m == 0 {
            return Err(Error::WeightRoundingMismatch(m));
        }
        let quotas: Vec<f64> = self.atoms.iter().map(|a| a.weight * m as f64).collect();
        let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let mut remaining = m.saturating_sub(assigned);
        let mut order: Vec<usize> = (0..quotas.len()).collect();
        // Stable sort keeps the descending-value order among equal remainders.
        order.sort_by(|&i, &j| {
            let ri = quotas[i] - quotas[i].floor();
            let rj = quotas[j] - quotas[j].floor();
            rj.total_cmp(&ri)
        });
        for &i in order.iter().cycle() {
            if remaining == 0 {
                break;
            }
            counts[i] += 1;
            remaining -= 1;
        }
        let diag: Vec<f64> = self
            .atoms
            .iter()
            .zip(&counts)
            .flat_map(|(a, &c)| std::iter::repeat_n(a.value, c))
            .take(m)
            .collect();
        if diag.len() != m {
            return Err(Error::WeightRoundingMismatch(m));
        }
        Ok(diag)
    }

    fn check_weights(&self) -> bool {
        let total: f64 = self.atoms.iter().map(|a| a.weight).sum();
        (total - 1.0).abs() <= WEIGHT_SUM_TOL
    }
}

/// Population covariances used throughout the simulation studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinSigma {
    Identity,
    /// `diag(2,…,2, 1,…,1)` with `⌊M/2⌋` twos.
    Sigma1,
    /// `diag(1 + √φ/2, 1, …, 1)`: one subcritical spike.
    Sigma2,
}

impl FromStr for BuiltinSigma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "id" => Ok(Self::Identity),
            "sigma1" => Ok(Self::Sigma1),
            "sigma2" => Ok(Self::Sigma2),
            _ => Err(Error::UnknownName(s.to_string())),
        }
    }
}

impl fmt::Display for BuiltinSigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::Identity => "identity",
            Self::Sigma1 => "sigma1",
            Self::Sigma2 => "sigma2",
        };
        f.write_str(name)
    }
}

pub fn builtin_sigma(name: BuiltinSigma, m: usize, phi: f64) -> Result<PopulationSpectrum> {
    if m < 2 {
        return Err(Error::InvalidModel(format!("builtin spectra need M >= 2, got {m}")));
    }
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(Error::InvalidModel(format!("phi must be positive, got {phi}")));
    }
    let spectrum = match name {
        BuiltinSigma::Identity => PopulationSpectrum::from_counts(&[(1.0, 1)], 1),
        BuiltinSigma::Sigma1 => {
            let twos = m / 2;
            PopulationSpectrum::from_counts(&[(2.0, twos), (1.0, m - twos)], m)
        }
        BuiltinSigma::Sigma2 => {
            PopulationSpectrum::from_counts(&[(1.0 + phi.sqrt() / 2.0, 1), (1.0, m - 1)], m)
        }
    };
    debug_assert!(spectrum.check_weights());
    Ok(spectrum)
}

/// Summand distribution `d₁` of the moment-matched discrete radius.
pub const D1_ATOMS: [(f64, f64); 5] = [
    (0.0, 0.2870),
    (1.0, 0.5971),
    (1.5, 0.1000),
    (2.0, 0.0063),
    (4.0, 0.0095),
];

/// Summand distribution `d₂` of the moment-matched discrete radius.
pub const D2_ATOMS: [(f64, f64); 5] = [
    (0.0, 0.1409),
    (1.0, 0.2906),
    (0.5, 0.4217),
    (2.0, 0.1454),
    (4.0, 0.0014),
];

/// Law of the radius ξ. Every law is rescaled analytically so that
/// `E ξ² = M/N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RadiusLaw {
    /// `ξ² = χ²_M / N`: Gaussian data.
    ChiGaussian,
    /// `ξ² = B (M+1)/N` with `B ~ Beta(M/2, 1/2)`.
    PearsonII,
    /// `ξ = s g` with `g ~ Gamma(shape M/2, scale 1/2)`.
    GammaDoubleExp,
    /// Rescaled sum of `M` i.i.d. draws from `d₁`.
    DiscreteSumD1,
    /// Rescaled sum of `M` i.i.d. draws from `d₂`.
    DiscreteSumD2,
    /// Rescaled sum of `M` i.i.d. draws from user-supplied `(atom, weight)`.
    UserAtoms(Vec<(f64, f64)>),
}

impl RadiusLaw {
    /// Normalized summand atoms for the discrete-sum laws.
    pub fn summand_atoms(&self) -> Option<Vec<(f64, f64)>> {
        let raw: Vec<(f64, f64)> = match self {
            RadiusLaw::DiscreteSumD1 => D1_ATOMS.to_vec(),
            RadiusLaw::DiscreteSumD2 => D2_ATOMS.to_vec(),
            RadiusLaw::UserAtoms(atoms) => atoms.clone(),
            _ => return None,
        };
        // The printed d₁ weights sum to 0.9999, so normalize.
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        Some(raw.into_iter().map(|(a, w)| (a, w / total)).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if let RadiusLaw::UserAtoms(atoms) = self {
            if atoms.is_empty() {
                return Err(Error::InvalidLaw("user atom list is empty".into()));
            }
            for &(a, w) in atoms {
                if !(a >= 0.0) || !a.is_finite() {
                    return Err(Error::InvalidLaw(format!("atom {a} must be finite and >= 0")));
                }
                if !(w > 0.0) || !w.is_finite() {
                    return Err(Error::InvalidLaw(format!("weight {w} must be positive")));
                }
            }
            if atoms.iter().all(|&(a, _)| a == 0.0) {
                return Err(Error::InvalidLaw("all atoms are zero".into()));
            }
        }
        Ok(())
    }

    /// Deterministic multiplier applied to the raw draw so that
    /// `E ξ² = M/N`; computed from the raw law's first two moments.
    pub fn scale(&self, m: usize, n: usize) -> Result<f64> {
        self.validate()?;
        let (m_f, n_f) = (m as f64, n as f64);
        let target = m_f / n_f;
        let raw_second = self.raw_second_moment(m)?;
        Ok((target / raw_second).sqrt())
    }

    /// `E[raw²]` of the unscaled draw. For the χ and Pearson laws the raw
    /// draw is `ξ` itself (already at the right scale once divided by N),
    /// expressed here with `N = 1`.
    pub fn raw_second_moment(&self, m: usize) -> Result<f64> {
        let m_f = m as f64;
        Ok(match self {
            // raw = √(χ²_M): E raw² = M
            RadiusLaw::ChiGaussian => m_f,
            // raw = √(B (M+1)): E raw² = (M+1) · (M/2)/((M+1)/2) = M
            RadiusLaw::PearsonII => (m_f + 1.0) * (m_f / 2.0) / (m_f / 2.0 + 0.5),
            // raw = g ~ Gamma(k, θ): E g² = θ² k (k+1)
            RadiusLaw::GammaDoubleExp => {
                let (k, theta) = (m_f / 2.0, 0.5);
                theta * theta * k * (k + 1.0)
            }
            _ => {
                let atoms = self.summand_atoms().expect("discrete law");
                let m1: f64 = atoms.iter().map(|(a, w)| a * w).sum();
                let m2: f64 = atoms.iter().map(|(a, w)| a * a * w).sum();
                m_f * m2 + m_f * (m_f - 1.0) * m1 * m1
            }
        })
    }

    /// Analytic `E ξ²` after rescaling; equals `M/N` up to rounding.
    pub fn mean_square(&self, m: usize, n: usize) -> Result<f64> {
        let s = self.scale(m, n)?;
        Ok(s * s * self.raw_second_moment(m)?)
    }
}

impl FromStr for RadiusLaw {
    type Err = Error;

    /// Accepts `chi`, `pearson`, `gamma`, `d1`, `d2` (and long aliases) or
    /// `atoms:a1:w1,a2:w2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        if let Some(rest) = lower.strip_prefix("atoms:") {
            let mut atoms = Vec::new();
            for pair in rest.split(',') {
                let (a, w) = pair
                    .split_once(':')
                    .ok_or_else(|| Error::InvalidLaw(format!("bad atom `{pair}`, want a:w")))?;
                let a: f64 = a.trim().parse().map_err(|_| Error::InvalidLaw(format!("bad atom `{a}`")))?;
                let w: f64 = w.trim().parse().map_err(|_| Error::InvalidLaw(format!("bad weight `{w}`")))?;
                atoms.push((a, w));
            }
            let law = RadiusLaw::UserAtoms(atoms);
            law.validate()?;
            return Ok(law);
        }
        match lower.as_str() {
            "chi" | "chi-gaussian" | "chigaussian" | "gaussian" => Ok(RadiusLaw::ChiGaussian),
            "pearson" | "pearson2" | "pearsonii" | "pearson-ii" => Ok(RadiusLaw::PearsonII),
            "gamma" | "double-exp" | "gammadoubleexp" => Ok(RadiusLaw::GammaDoubleExp),
            "d1" | "discrete-d1" | "discretesumd1" => Ok(RadiusLaw::DiscreteSumD1),
            "d2" | "discrete-d2" | "discretesumd2" => Ok(RadiusLaw::DiscreteSumD2),
            _ => Err(Error::InvalidLaw(format!("unknown radius law `{s}`"))),
        }
    }
}

impl fmt::Display for RadiusLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadiusLaw::ChiGaussian => f.write_str("chi"),
            RadiusLaw::PearsonII => f.write_str("pearson"),
            RadiusLaw::GammaDoubleExp => f.write_str("gamma"),
            RadiusLaw::DiscreteSumD1 => f.write_str("d1"),
            RadiusLaw::DiscreteSumD2 => f.write_str("d2"),
            RadiusLaw::UserAtoms(atoms) => {
                f.write_str("atoms:")?;
                for (i, (a, w)) in atoms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}:{w}")?;
                }
                Ok(())
            }
        }
    }
}

/// Admissible range for the aspect ratio `φ = M/N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiBounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for PhiBounds {
    fn default() -> Self {
        Self {
            lower: 1.0 / 20.0,
            upper: 20.0,
        }
    }
}

impl PhiBounds {
    pub fn contains(&self, phi: f64) -> bool {
        phi >= self.lower && phi <= self.upper
    }
}

/// One complete elliptical data model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub m: usize,
    pub n: usize,
    pub spectrum: PopulationSpectrum,
    pub radius: RadiusLaw,
}

impl ModelSpec {
    pub fn new(m: usize, n: usize, spectrum: PopulationSpectrum, radius: RadiusLaw) -> Result<Self> {
        Self::with_bounds(m, n, spectrum, radius, PhiBounds::default())
    }

    pub fn with_bounds(
        m: usize,
        n: usize,
        spectrum: PopulationSpectrum,
        radius: RadiusLaw,
        bounds: PhiBounds,
    ) -> Result<Self> {
        if m < 2 || n < 2 {
            return Err(Error::InvalidModel(format!("need M >= 2 and N >= 2, got M={m}, N={n}")));
        }
        let phi = m as f64 / n as f64;
        if !bounds.contains(phi) {
            return Err(Error::InvalidModel(format!(
                "phi = {phi} outside [{}, {}]",
                bounds.lower, bounds.upper
            )));
        }
        radius.validate()?;
        Ok(Self { m, n, spectrum, radius })
    }

    /// Convenience constructor from a builtin spectrum.
    pub fn builtin(name: BuiltinSigma, m: usize, n: usize, radius: RadiusLaw) -> Result<Self> {
        let phi = m as f64 / n as f64;
        Self::new(m, n, builtin_sigma(name, m, phi)?, radius)
    }

    /// `φ = M/N`.
    pub fn phi(&self) -> f64 {
        self.m as f64 / self.n as f64
    }
}

/// A spectral parameter `z = E + iη` in the upper half plane (or, for
/// diagnostics, on the real axis below the support).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoint {
    pub re: f64,
    pub im: f64,
}

impl ComplexPoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !(im > 0.0) || !re.is_finite() || !im.is_finite() {
            return Err(Error::InvalidArgument(format!("z = {re} + {im}i is not in the upper half plane")));
        }
        Ok(Self { re, im })
    }

    /// Real point, only meaningful for `solve_m` below the support.
    pub fn real(re: f64) -> Self {
        Self { re, im: 0.0 }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// Membership in the edge domain `|E − λ₊| ≤ τ′`, `N^{-1+τ} ≤ η ≤ 1/τ`.
    pub fn in_edge_domain(&self, lambda_plus: f64, tau: f64, tau_prime: f64, n: usize) -> bool {
        let eta_min = (n as f64).powf(-1.0 + tau);
        (self.re - lambda_plus).abs() <= tau_prime && self.im >= eta_min && self.im <= 1.0 / tau
    }
}
