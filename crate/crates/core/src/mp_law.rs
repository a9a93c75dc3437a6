//! Deterministic Marčenko–Pastur machinery for a general population
//! spectrum π and aspect ratio φ.
//!
//! Everything is built on
//!
//! ```text
//! f(w) = -1/w + φ ∫ x π(dx) / (1 + w x)
//! ```
//!
//! The Stieltjes transform `m(z)` of the limiting spectral law of the
//! `N × N` Gram matrix is the root of `f(m) = z` in the upper half plane;
//! the right edge is `λ₊ = f(-c)` where `c ∈ (0, 1/σ₁)` solves `f′(-c) = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ComplexPoint, PhiBounds, PopulationSpectrum};

/// Deterministic edge quantities `(c, λ₊, γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeParams {
    pub c: f64,
    pub lambda_plus: f64,
    /// Tracy–Widom scale: `γ N^{2/3} (λ₁ − λ₊)` is asymptotically TW₁.
    pub gamma: f64,
    /// `1 − σ₁ c`, positive whenever the edge is regular.
    pub condition_margin: f64,
}

/// Root of the self-consistent equation at one spectral parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StieltjesSolution {
    pub z: ComplexPoint,
    pub m: Complex64,
    /// `|f(m) − z|`.
    pub residual: f64,
    pub iterations: usize,
}

/// Tolerances for [`solve_m_with`] and [`find_c`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Iterations spent in the plain damped fixed-point phase before
    /// switching to η-continuation with Newton steps.
    pub fixed_point_budget: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100_000,
            fixed_point_budget: 5_000,
        }
    }
}

fn check_poles(w: Complex64, spectrum: &PopulationSpectrum) -> Result<()> {
    if w == Complex64::new(0.0, 0.0) {
        return Err(Error::PoleAtZero);
    }
    for atom in spectrum.atoms() {
        if (Complex64::new(1.0, 0.0) + w * atom.value).norm() == 0.0 {
            return Err(Error::PoleAtAtom(atom.value));
        }
    }
    Ok(())
}

/// `φ ∫ x/(1+wx) π(dx)` without pole checks.
fn resolvent_sum(w: Complex64, spectrum: &PopulationSpectrum, phi: f64) -> Complex64 {
    let s: Complex64 = spectrum
        .atoms()
        .iter()
        .map(|a| a.weight * a.value / (1.0 + w * a.value))
        .sum();
    s * phi
}

fn f_unchecked(w: Complex64, spectrum: &PopulationSpectrum, phi: f64) -> Complex64 {
    -w.inv() + resolvent_sum(w, spectrum, phi)
}

fn f_prime_unchecked(w: Complex64, spectrum: &PopulationSpectrum, phi: f64) -> Complex64 {
    let s: Complex64 = spectrum
        .atoms()
        .iter()
        .map(|a| {
            let d = 1.0 + w * a.value;
            a.weight * a.value * a.value / (d * d)
        })
        .sum();
    (w * w).inv() - s * phi
}

pub fn f_eval(w: Complex64, spectrum: &PopulationSpectrum, phi: f64) -> Result<Complex64> {
    check_poles(w, spectrum)?;
    Ok(f_unchecked(w, spectrum, phi))
}

/// `f′(w) = 1/w² − φ ∫ x²/(1+wx)² π(dx)`.
pub fn f_prime(w: Complex64, spectrum: &PopulationSpectrum, phi: f64) -> Result<Complex64> {
    check_poles(w, spectrum)?;
    Ok(f_prime_unchecked(w, spectrum, phi))
}

/// Scale-free form of the critical-point equation in `t = c σ₁`:
/// `φ ∫ (t x/σ₁ / (1 − t x/σ₁))² π(dx) − 1`, strictly increasing on (0, 1).
/// Its root `t*` gives `c = t*/σ₁`.
fn critical_residual(t: f64, ratios: &[(f64, f64)], phi: f64) -> f64 {
    let s: f64 = ratios
        .iter()
        .map(|&(r, w)| {
            let q = t * r / (1.0 - t * r);
            w * q * q
        })
        .sum();
    phi * s - 1.0
}

const BRACKET_EPS_LOW: f64 = 1e-12;
const BRACKET_EPS_HIGH: f64 = 1e-12;
const BRACKET_WIDTH: f64 = 1e-13;

/// The critical point `c ∈ (0, 1/σ₁)` with `f′(−c) = 0`, by bisection.
pub fn find_c(spectrum: &PopulationSpectrum, phi: f64) -> Result<f64> {
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(Error::InvalidArgument(format!("phi must be positive, got {phi}")));
    }
    let sigma1 = spectrum.sigma_max();
    let ratios: Vec<(f64, f64)> = spectrum.atoms().iter().map(|a| (a.value / sigma1, a.weight)).collect();

    let (mut lo, mut hi) = (BRACKET_EPS_LOW, 1.0 - BRACKET_EPS_HIGH);
    if critical_residual(lo, &ratios, phi) >= 0.0 || critical_residual(hi, &ratios, phi) <= 0.0 {
        return Err(Error::BracketFailure);
    }
    while hi - lo > BRACKET_WIDTH {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if critical_residual(mid, &ratios, phi) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) / sigma1)
}

/// `(c, λ₊, γ)` together with the Condition-4 margin `1 − σ₁ c`.
pub fn edge_params(spectrum: &PopulationSpectrum, phi: f64) -> Result<EdgeParams> {
    let c = find_c(spectrum, phi)?;
    let margin = 1.0 - spectrum.sigma_max() * c;
    if !(margin > 0.0) {
        return Err(Error::ConditionViolated(margin));
    }
    let lambda_plus = f_eval(Complex64::new(-c, 0.0), spectrum, phi)?.re;
    let cubic: f64 = spectrum
        .atoms()
        .iter()
        .map(|a| {
            let q = a.value * c / (1.0 - a.value * c);
            a.weight * q * q * q
        })
        .sum();
    let inv_gamma_cubed = (1.0 + phi * cubic) / (c * c * c);
    Ok(EdgeParams {
        c,
        lambda_plus,
        gamma: inv_gamma_cubed.powf(-1.0 / 3.0),
        condition_margin: margin,
    })
}

/// Outcome of the model-condition checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `0 < σ_M ≤ σ₁ < ∞`.
    pub sigma_bounds_ok: bool,
    /// `1 − σ₁ c`; NaN when `c` could not be bracketed.
    pub margin: f64,
    /// Margin clears the warning band.
    pub margin_ok: bool,
    pub phi_ok: bool,
}

impl ConditionReport {
    pub fn all_ok(&self) -> bool {
        self.sigma_bounds_ok && self.margin_ok && self.phi_ok
    }
}

/// Margins at or below this value are flagged.
pub const MARGIN_WARNING: f64 = 0.01;

pub fn validate_conditions(spectrum: &PopulationSpectrum, phi: f64, bounds: PhiBounds) -> ConditionReport {
    let (lo, hi) = (spectrum.sigma_min(), spectrum.sigma_max());
    let sigma_bounds_ok = lo > 0.0 && lo <= hi && hi.is_finite();
    let margin = match find_c(spectrum, phi) {
        Ok(c) => 1.0 - hi * c,
        Err(_) => f64::NAN,
    };
    ConditionReport {
        sigma_bounds_ok,
        margin,
        margin_ok: margin > MARGIN_WARNING,
        phi_ok: bounds.contains(phi),
    }
}

struct Equation<'a> {
    spectrum: &'a PopulationSpectrum,
    phi: f64,
}

impl Equation<'_> {
    fn residual(&self, m: Complex64, z: Complex64) -> f64 {
        let r = (f_unchecked(m, self.spectrum, self.phi) - z).norm();
        if r.is_finite() {
            r
        } else {
            f64::INFINITY
        }
    }

    fn fixed_point_map(&self, m: Complex64, z: Complex64) -> Complex64 {
        (-z + resolvent_sum(m, self.spectrum, self.phi)).inv()
    }

    fn newton_step(&self, m: Complex64, z: Complex64) -> Complex64 {
        let fp = f_prime_unchecked(m, self.spectrum, self.phi);
        m - (f_unchecked(m, self.spectrum, self.phi) - z) / fp
    }

    /// Damped fixed-point iteration started from `m`. The step size halves
    /// whenever a full step would increase the residual.
    fn fixed_point(&self, mut m: Complex64, z: Complex64, tol: f64, budget: usize) -> (Complex64, f64, usize) {
        let mut res = self.residual(m, z);
        let mut beta = 1.0;
        let mut iters = 0;
        while iters < budget && res > tol {
            iters += 1;
            let candidate = (1.0 - beta) * m + beta * self.fixed_point_map(m, z);
            let cand_res = self.residual(candidate, z);
            if cand_res < res && (z.im == 0.0 || candidate.im >= 0.0) {
                m = candidate;
                res = cand_res;
            } else {
                beta *= 0.5;
                if beta < 1e-12 {
                    break;
                }
            }
        }
        (m, res, iters)
    }

    /// Safeguarded Newton: a step is accepted only if it lowers the
    /// residual and stays in the closed upper half plane.
    fn newton(&self, mut m: Complex64, z: Complex64, tol: f64, max_steps: usize) -> (Complex64, f64, usize) {
        let mut res = self.residual(m, z);
        let mut steps = 0;
        while steps < max_steps {
            let full = self.newton_step(m, z);
            let mut accepted = false;
            let mut t = 1.0;
            for _ in 0..30 {
                let candidate = m + (full - m) * t;
                let cand_res = self.residual(candidate, z);
                if cand_res < res && (z.im == 0.0 || candidate.im > 0.0) {
                    m = candidate;
                    res = cand_res;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            steps += 1;
            if !accepted || res <= tol * 1e-4 {
                break;
            }
        }
        (m, res, steps)
    }
}

/// Solves `f(m) = z` for the Stieltjes transform with default tolerances.
pub fn solve_m(z: ComplexPoint, spectrum: &PopulationSpectrum, phi: f64) -> Result<StieltjesSolution> {
    solve_m_with(z, spectrum, phi, SolverOptions::default())
}

/// Solves `f(m) = z` with `Im m > 0` for `Im z > 0`, or for real `z < 0`
/// (below the spectrum) the positive real root.
///
/// Damped fixed-point iteration from `m₀ = −1/z` runs first. If it stalls
/// (close to the real axis inside the bulk the map is barely contracting)
/// the root is tracked by continuation from `η = 1` down to the target
/// `η`, halving `η` and applying Newton at each level. Every result is
/// finished with a few Newton polishing steps.
pub fn solve_m_with(
    z: ComplexPoint,
    spectrum: &PopulationSpectrum,
    phi: f64,
    opts: SolverOptions,
) -> Result<StieltjesSolution> {
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(Error::InvalidArgument(format!("phi must be positive, got {phi}")));
    }
    if !z.re.is_finite() || !z.im.is_finite() || z.im < 0.0 {
        return Err(Error::InvalidArgument(format!("z = {} + {}i is not admissible", z.re, z.im)));
    }
    if z.im == 0.0 && z.re >= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "real z = {} is not below the spectrum; use Im z > 0",
            z.re
        )));
    }
    let eq = Equation { spectrum, phi };
    let zc = z.to_complex();
    let tol = opts.tolerance;

    let m0 = -zc.inv();
    let budget = opts.fixed_point_budget.min(opts.max_iterations);
    let (mut m, mut res, mut iterations) = eq.fixed_point(m0, zc, tol, budget);

    if res > tol && z.im > 0.0 {
        // Continuation in η from the well-conditioned region.
        let mut eta = 1.0_f64.max(z.im);
        let start = Complex64::new(z.re, eta);
        let (mut mc, _, it) = eq.fixed_point(-start.inv(), start, tol, budget);
        iterations += it;
        loop {
            let zk = Complex64::new(z.re, eta);
            let (next, _, it) = eq.newton(mc, zk, tol, 60);
            mc = next;
            iterations += it;
            if eta <= z.im || iterations >= opts.max_iterations {
                break;
            }
            eta = (0.5 * eta).max(z.im);
        }
        let cont_res = eq.residual(mc, zc);
        if cont_res < res {
            m = mc;
            res = cont_res;
        }
    }

    let (polished, polished_res, it) = eq.newton(m, zc, tol, 8);
    iterations += it;
    if polished_res <= res {
        m = polished;
        res = polished_res;
    }

    if z.im > 0.0 && m.im < -1e-12 {
        return Err(Error::WrongBranch(m.im));
    }
    if !(res <= tol) {
        return Err(Error::NoConvergence {
            residual: res,
            iterations,
        });
    }
    Ok(StieltjesSolution {
        z,
        m,
        residual: res,
        iterations,
    })
}

/// Smoothed limiting density `Im m(x + iη₀)/π`.
pub fn density(x: f64, spectrum: &PopulationSpectrum, phi: f64, eta0: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!("density needs x > 0, got {x}")));
    }
    if !(eta0 > 0.0 && eta0 <= 1e-3) {
        return Err(Error::InvalidArgument(format!("eta0 must lie in (0, 1e-3], got {eta0}")));
    }
    let sol = solve_m(ComplexPoint { re: x, im: eta0 }, spectrum, phi)?;
    Ok((sol.m.im / std::f64::consts::PI).max(0.0))
}

pub const DEFAULT_DENSITY_ETA: f64 = 1e-6;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_sigma, BuiltinSigma};
    use proptest::prelude::*;

    fn identity() -> PopulationSpectrum {
        PopulationSpectrum::new(&[(1.0, 1.0)]).unwrap()
    }

    fn sigma1() -> PopulationSpectrum {
        PopulationSpectrum::new(&[(2.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    /// Root of `z m² + (z + 1 − φ) m + 1 = 0` in the upper half plane, the
    /// identity-spectrum form of the self-consistent equation.
    fn identity_closed_form(z: Complex64, phi: f64) -> Complex64 {
        let b = z + 1.0 - phi;
        let disc = (b * b - 4.0 * z).sqrt();
        let r1 = (-b + disc) / (2.0 * z);
        let r2 = (-b - disc) / (2.0 * z);
        if r1.im > r2.im {
            r1
        } else {
            r2
        }
    }

    /// Derivative-free oracle: λ₊ = min over c ∈ (0, 1/σ₁) of f(−c),
    /// located by golden-section search.
    fn golden_edge(spectrum: &PopulationSpectrum, phi: f64) -> (f64, f64) {
        let g = |c: f64| f_unchecked(re(-c), spectrum, phi).re;
        let (mut a, mut b) = (1e-9, (1.0 - 1e-9) / spectrum.sigma_max());
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let x1 = b - r * (b - a);
            let x2 = a + r * (b - a);
            if g(x1) < g(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        let c = 0.5 * (a + b);
        (c, g(c))
    }

    #[test]
    fn f_direct_substitution() {
        assert!((f_eval(re(-0.5), &identity(), 1.0).unwrap() - re(4.0)).norm() < 1e-14);
        assert!((f_eval(re(-1.0 / 3.0), &identity(), 4.0).unwrap() - re(9.0)).norm() < 1e-13);
        let v = f_eval(re(-0.25), &sigma1(), 1.0).unwrap();
        assert!((v.re - (4.0 + 2.0 + 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn f_poles() {
        assert_eq!(f_eval(re(0.0), &identity(), 1.0), Err(Error::PoleAtZero));
        assert_eq!(f_eval(re(-0.5), &sigma1(), 1.0), Err(Error::PoleAtAtom(2.0)));
        assert_eq!(f_prime(re(-1.0), &identity(), 1.0), Err(Error::PoleAtAtom(1.0)));
    }

    #[test]
    fn f_prime_critical_points() {
        assert!(f_prime(re(-0.5), &identity(), 1.0).unwrap().norm() < 1e-13);
        assert!(f_prime(re(-1.0 / 3.0), &identity(), 4.0).unwrap().norm() < 1e-12);
    }

    #[test]
    fn f_prime_matches_central_difference() {
        let h = 1e-6;
        let spec = sigma1();
        for k in 1..20 {
            let w = re(-0.49 * k as f64 / 20.0);
            let fd = (f_unchecked(w + h, &spec, 1.0) - f_unchecked(w - h, &spec, 1.0)) / (2.0 * h);
            let exact = f_prime(w, &spec, 1.0).unwrap();
            assert!((exact - fd).norm() <= 1e-6 * (1.0 + exact.norm()), "w={w}: {exact} vs {fd}");
        }
        let w = Complex64::new(-0.2, 0.3);
        let fd = (f_unchecked(w + h, &spec, 2.0) - f_unchecked(w - h, &spec, 2.0)) / (2.0 * h);
        assert!((f_prime(w, &spec, 2.0).unwrap() - fd).norm() < 1e-6);
    }

    #[test]
    fn find_c_closed_forms() {
        assert!((find_c(&identity(), 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((find_c(&identity(), 4.0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn find_c_two_atom_against_oracles() {
        // High-precision Newton reference: 0.287712943868769753654...
        let c = find_c(&sigma1(), 1.0).unwrap();
        assert!((c - 0.287_712_943_868_769_75).abs() < 1e-12);
        let (c_golden, _) = golden_edge(&sigma1(), 1.0);
        assert!((c - c_golden).abs() < 1e-6);
        // |g(c)| with g(c) = φ∫x²/(1−cx)² − 1/c².
        let g: f64 = sigma1().atoms().iter().map(|a| a.weight * a.value.powi(2) / (1.0 - c * a.value).powi(2)).sum::<f64>()
            - 1.0 / (c * c);
        assert!(g.abs() <= 1e-10);
    }

    #[test]
    fn edge_closed_forms() {
        let e = edge_params(&identity(), 1.0).unwrap();
        assert!((e.c - 0.5).abs() < 1e-12);
        assert!((e.lambda_plus - 4.0).abs() < 1e-12);
        assert!((e.gamma - 2f64.powf(-4.0 / 3.0)).abs() < 1e-12);
        assert!((e.condition_margin - 0.5).abs() < 1e-12);
        let e = edge_params(&identity(), 4.0).unwrap();
        assert!((e.c - 1.0 / 3.0).abs() < 1e-12);
        assert!((e.lambda_plus - 9.0).abs() < 1e-11);
        assert!((e.gamma - 40.5f64.powf(-1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn edge_two_atom_against_oracles() {
        let e = edge_params(&sigma1(), 1.0).unwrap();
        assert!((e.lambda_plus - 6.532_952_096_412_18).abs() < 1e-10);
        assert!((e.gamma - 0.218_672_703_808_300_98).abs() < 1e-10);
        let (_, lp_golden) = golden_edge(&sigma1(), 1.0);
        assert!((e.lambda_plus - lp_golden).abs() < 1e-9);
    }

    #[test]
    fn sign_pattern_of_derivative_around_c() {
        for spec in [identity(), sigma1(), builtin_sigma(BuiltinSigma::Sigma2, 200, 1.0).unwrap()] {
            for phi in [0.1, 1.0, 3.0] {
                let c = find_c(&spec, phi).unwrap();
                let d = 1e-4 * c;
                assert!(f_prime(re(-c - d), &spec, phi).unwrap().re < 0.0);
                assert!(f_prime(re(-c + d), &spec, phi).unwrap().re > 0.0);
            }
        }
    }

    #[test]
    fn bracket_failure_and_bad_phi() {
        assert!(find_c(&identity(), 0.0).is_err());
        // A top atom with vanishing weight cannot dominate within the bracket.
        let tiny_top = PopulationSpectrum::new(&[(2.0, 1e-30), (1.0, 1.0)]).unwrap();
        assert_eq!(find_c(&tiny_top, 1e-3), Err(Error::BracketFailure));
    }

    #[test]
    fn solve_identity_closed_forms() {
        let sol = solve_m(ComplexPoint::new(0.0, 1.0).unwrap(), &identity(), 1.0).unwrap();
        assert!((sol.m - Complex64::new(0.300_242_59, 0.624_810_53)).norm() < 1e-8);
        assert!((sol.m - identity_closed_form(Complex64::new(0.0, 1.0), 1.0)).norm() < 1e-12);
        let sol = solve_m(ComplexPoint::real(-1.0), &identity(), 1.0).unwrap();
        assert!((sol.m.re - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
        assert!(sol.m.im.abs() < 1e-15);
    }

    #[test]
    fn solve_near_two_atom_edge() {
        let e = edge_params(&sigma1(), 1.0).unwrap();
        let sol = solve_m(ComplexPoint::new(e.lambda_plus, 0.1).unwrap(), &sigma1(), 1.0).unwrap();
        assert!(sol.residual <= 1e-10);
        assert!(sol.m.im > 0.0);
    }

    #[test]
    fn solve_rejects_bad_points() {
        assert!(solve_m(ComplexPoint::real(1.0), &identity(), 1.0).is_err());
        assert!(solve_m(ComplexPoint { re: 1.0, im: -1.0 }, &identity(), 1.0).is_err());
    }

    #[test]
    fn no_convergence_is_reported() {
        let opts = SolverOptions {
            tolerance: 1e-300,
            ..Default::default()
        };
        let r = solve_m_with(ComplexPoint::new(2.0, 1e-3).unwrap(), &identity(), 1.0, opts);
        assert!(matches!(r, Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn density_identity() {
        let d = density(2.0, &identity(), 1.0, 1e-6).unwrap();
        assert!((d - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-4);
        assert!(density(5.0, &identity(), 1.0, 1e-6).unwrap() <= 1e-3);
        let near = density(4.0 - 0.01, &identity(), 1.0, 1e-6).unwrap();
        let far = density(4.0 - 0.04, &identity(), 1.0, 1e-6).unwrap();
        let ratio = near / far;
        assert!((ratio - 0.5).abs() <= 0.1, "ratio {ratio}");
        assert!(density(2.0, &identity(), 1.0, 1e-2).is_err());
        assert!(density(-1.0, &identity(), 1.0, 1e-6).is_err());
    }

    #[test]
    fn density_matches_marchenko_pastur_formula() {
        // φ = 1/4: density of the N×N form at x is φ·√((λ₊−x)(x−λ₋))/(2π x).
        let phi: f64 = 0.25;
        let (lm, lp) = ((1.0 - phi.sqrt()).powi(2), (1.0 + phi.sqrt()).powi(2));
        for k in 1..10 {
            let x = lm + (lp - lm) * k as f64 / 10.0;
            let exact = ((lp - x) * (x - lm)).sqrt() / (2.0 * std::f64::consts::PI * x);
            let got = density(x, &identity(), phi, 1e-7).unwrap();
            assert!((got - exact).abs() < 1e-4, "x={x}: {got} vs {exact}");
        }
    }

    #[test]
    fn im_m_decays_with_eta_outside_support() {
        let e = edge_params(&sigma1(), 1.0).unwrap();
        let x = e.lambda_plus + 0.5;
        let a = solve_m(ComplexPoint::new(x, 1e-3).unwrap(), &sigma1(), 1.0).unwrap().m.im;
        let b = solve_m(ComplexPoint::new(x, 5e-4).unwrap(), &sigma1(), 1.0).unwrap().m.im;
        assert!((a / b - 2.0).abs() < 0.05, "ratio {}", a / b);
    }

    #[test]
    fn conditions_report() {
        let bounds = PhiBounds::default();
        let r = validate_conditions(&identity(), 1.0, bounds);
        assert!(r.all_ok());
        assert!((r.margin - 0.5).abs() < 1e-12);
        let s2 = builtin_sigma(BuiltinSigma::Sigma2, 200, 1.0).unwrap();
        let r = validate_conditions(&s2, 1.0, bounds);
        assert!(r.margin > 0.0 && r.all_ok());
        // Reference margin 1 − 1.5 c with c = 0.4952939275430013...
        assert!((r.margin - 0.257_059_108_685_497_98).abs() < 1e-10);
        let r = validate_conditions(&identity(), 1e-6, bounds);
        assert!(!r.phi_ok);
    }

    proptest! {
        #[test]
        fn identity_edge_closed_form(phi in 0.05f64..20.0) {
            let e = edge_params(&identity(), phi).unwrap();
            let s = phi.sqrt();
            prop_assert!((e.c - 1.0 / (1.0 + s)).abs() <= 1e-9);
            prop_assert!((e.lambda_plus - (1.0 + s).powi(2)).abs() <= 1e-9 * (1.0 + s).powi(2));
            let gamma = phi.powf(1.0 / 6.0) / (1.0 + s).powf(4.0 / 3.0);
            prop_assert!((e.gamma - gamma).abs() <= 1e-9);
        }

        #[test]
        fn solve_matches_identity_quadratic(x in -1.0f64..6.0, eta in 0.01f64..3.0, phi in 0.2f64..5.0) {
            let z = Complex64::new(x, eta);
            let sol = solve_m(ComplexPoint::new(x, eta).unwrap(), &identity(), phi).unwrap();
            prop_assert!(sol.residual <= 1e-10);
            prop_assert!((sol.m - identity_closed_form(z, phi)).norm() <= 1e-9);
        }

        #[test]
        fn edge_scaling_covariance(a in 0.1f64..10.0, phi in 0.1f64..5.0) {
            let base = edge_params(&sigma1(), phi).unwrap();
            let scaled = edge_params(&sigma1().scaled(a).unwrap(), phi).unwrap();
            prop_assert!((scaled.c * a / base.c - 1.0).abs() <= 1e-8);
            prop_assert!((scaled.lambda_plus / (a * base.lambda_plus) - 1.0).abs() <= 1e-8);
            prop_assert!((scaled.gamma * a / base.gamma - 1.0).abs() <= 1e-8);
        }
    }
}
