//! Eigenvalues of simulated sample covariance matrices and the statistics
//! built from them.
//!
//! The nonzero eigenvalues of `X Xᵀ` and `Xᵀ X` coincide, so only the
//! smaller Gram form is ever decomposed. Statistics that live on the
//! `N × N` form (the empirical Stieltjes transform and the counting
//! function) pad with `N − M` zeros when `M < N`.

use nalgebra::linalg::SymmetricTridiagonal;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::ComplexPoint;
use crate::mp_law::EdgeParams;
use crate::sampler::{DataMatrix, RngStream};

/// Relative size of negative eigenvalues attributed to round-off.
const NEGATIVE_CLAMP: f64 = 1e-10;

/// Descending eigenvalues of one Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSample {
    /// Sorted descending, all `>= 0`.
    pub eigenvalues: Vec<f64>,
    pub m: usize,
    pub n: usize,
    /// True when only the top eigenvalues were computed.
    pub truncated: bool,
    pub stream: Option<RngStream>,
}

impl SpectralSample {
    /// Wraps an explicit descending list, treated as the complete spectrum
    /// of the `min(M, N)` side.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, m: usize, n: usize) -> Self {
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Self {
            eigenvalues,
            m,
            n,
            truncated: false,
            stream: None,
        }
    }

    pub fn largest(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Number of zero eigenvalues the `N × N` form carries beyond the
    /// stored ones.
    fn padding(&self) -> usize {
        if self.truncated {
            0
        } else {
            self.n.saturating_sub(self.eigenvalues.len())
        }
    }
}

/// Eigenvalues of the smaller Gram form of `x`.
pub fn gram_eigenvalues(x: &DataMatrix, k: Option<usize>) -> Result<SpectralSample> {
    let mut sample = matrix_gram_eigenvalues(&x.entries, k)?;
    sample.stream = Some(x.stream);
    Ok(sample)
}

/// [`gram_eigenvalues`] on a bare `M × N` matrix.
pub fn matrix_gram_eigenvalues(x: &DMatrix<f64>, k: Option<usize>) -> Result<SpectralSample> {
    let (m, n) = x.shape();
    if m == 0 || n == 0 {
        return Err(Error::EigenFailure("empty matrix".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure("matrix has non-finite entries".into()));
    }
    let gram = gram_matrix(x);
    let eigenvalues = match k {
        Some(k) if k < gram.nrows() => symmetric_top_eigenvalues(gram, k)?,
        _ => symmetric_eigenvalues_desc(gram)?,
    };
    Ok(SpectralSample {
        truncated: eigenvalues.len() < m.min(n),
        eigenvalues: clamp_negative(eigenvalues)?,
        m,
        n,
        stream: None,
    })
}

/// `Xᵀ X` when `N ≤ M`, else `X Xᵀ`.
pub fn gram_matrix(x: &DMatrix<f64>) -> DMatrix<f64> {
    let xt = x.transpose();
    if x.ncols() <= x.nrows() {
        xt * x
    } else {
        x * xt
    }
}

fn clamp_negative(mut eigenvalues: Vec<f64>) -> Result<Vec<f64>> {
    let scale = eigenvalues.first().copied().unwrap_or(0.0).abs().max(1.0);
    for v in eigenvalues.iter_mut() {
        if *v < 0.0 {
            if *v < -NEGATIVE_CLAMP * scale {
                return Err(Error::EigenFailure(format!("eigenvalue {v} of a Gram matrix is negative")));
            }
            *v = 0.0;
        }
    }
    Ok(eigenvalues)
}

/// All eigenvalues of a symmetric matrix, descending (implicit QR).
pub fn symmetric_eigenvalues_desc(a: DMatrix<f64>) -> Result<Vec<f64>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure("matrix has non-finite entries".into()));
    }
    let mut vals: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure("eigenvalues did not converge".into()));
    }
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(vals)
}

/// The `k` largest eigenvalues of a symmetric matrix: Householder
/// tridiagonalization followed by Sturm-sequence bisection.
pub fn symmetric_top_eigenvalues(a: DMatrix<f64>, k: usize) -> Result<Vec<f64>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure("matrix has non-finite entries".into()));
    }
    if a.nrows() == 1 {
        return Ok(vec![a[(0, 0)]]);
    }
    let tri = SymmetricTridiagonal::new(a);
    let diag: Vec<f64> = tri.diagonal().iter().copied().collect();
    let off: Vec<f64> = tri.off_diagonal().iter().copied().collect();
    tridiagonal_top_eigenvalues(&diag, &off, k)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`.
fn sturm_count(diag: &[f64], off_sq: &[f64], x: f64, pivot_floor: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q.abs() < pivot_floor {
        q = -pivot_floor;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        q = diag[i] - x - off_sq[i - 1] / q;
        if q.abs() < pivot_floor {
            q = -pivot_floor;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k` largest eigenvalues (descending) of the symmetric tridiagonal
/// matrix with the given diagonal and off-diagonal.
pub fn tridiagonal_top_eigenvalues(diag: &[f64], off: &[f64], k: usize) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(Error::EigenFailure(format!(
            "tridiagonal shape mismatch: {} diagonal, {} off-diagonal",
            n,
            off.len()
        )));
    }
    if diag.iter().chain(off).any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure("tridiagonal matrix has non-finite entries".into()));
    }
    let k = k.min(n);
    let off_sq: Vec<f64> = off.iter().map(|b| b * b).collect();

    // Gershgorin interval.
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let norm = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let pivot_floor = f64::EPSILON * norm * 1e-3 + f64::MIN_POSITIVE;
    lo -= 2.0 * f64::EPSILON * norm;
    hi += 2.0 * f64::EPSILON * norm;

    let mut out = Vec::with_capacity(k);
    let mut upper = hi;
    for j in 0..k {
        // Eigenvalue with exactly n - 1 - j eigenvalues below it.
        let target = n - 1 - j;
        let (mut a, mut b) = (lo, upper);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b || b - a <= 2.0 * f64::EPSILON * norm * 1e-2 {
                break;
            }
            if sturm_count(diag, &off_sq, mid, pivot_floor) > target {
                b = mid;
            } else {
                a = mid;
            }
        }
        let value = 0.5 * (a + b);
        out.push(value);
        upper = b;
    }
    Ok(out)
}

/// `γ N^{2/3} (λ₁ − λ₊)`.
pub fn rescale_largest(lambda1: f64, edge: &EdgeParams, n: usize) -> f64 {
    edge.gamma * (n as f64).powf(2.0 / 3.0) * (lambda1 - edge.lambda_plus)
}

/// `(λ₁ − λ₂)/(λ₂ − λ₃)` on three descending values.
pub fn onatski_ratio(l1: f64, l2: f64, l3: f64) -> Result<f64> {
    let gap = l2 - l3;
    if !(gap > 1e-14 * l1.abs().max(1.0)) {
        return Err(Error::DegenerateGap(gap));
    }
    Ok((l1 - l2) / gap)
}

/// Onatski's statistic on the three largest sample eigenvalues.
pub fn onatski_statistic(eigs: &SpectralSample) -> Result<f64> {
    match eigs.eigenvalues.as_slice() {
        [l1, l2, l3, ..] => onatski_ratio(*l1, *l2, *l3),
        _ => Err(Error::InvalidArgument("Onatski statistic needs at least 3 eigenvalues".into())),
    }
}

/// `m_N(z) = N⁻¹ Σ_i 1/(λ_i − z)` over the `N × N` spectrum.
pub fn empirical_stieltjes(eigs: &SpectralSample, z: ComplexPoint) -> Result<Complex64> {
    if eigs.truncated {
        return Err(Error::InvalidArgument("empirical Stieltjes transform needs the full spectrum".into()));
    }
    if !(z.im > 0.0) {
        return Err(Error::InvalidArgument("empirical Stieltjes transform needs Im z > 0".into()));
    }
    let z = z.to_complex();
    let sum: Complex64 = eigs.eigenvalues.iter().map(|&l| (l - z).inv()).sum();
    let zeros = eigs.padding() as f64 * (-z).inv();
    let total = eigs.eigenvalues.len() + eigs.padding();
    Ok((sum + zeros) / total as f64)
}

/// `#{i : λ_i ∈ [a, b]}` over the `N × N` spectrum (zero padding included).
pub fn counting_function(eigs: &SpectralSample, a: f64, b: f64) -> usize {
    let stored = eigs.eigenvalues.iter().filter(|&&l| l >= a && l <= b).count();
    let zeros = if a <= 0.0 && b >= 0.0 { eigs.padding() } else { 0 };
    stored + zeros
}
