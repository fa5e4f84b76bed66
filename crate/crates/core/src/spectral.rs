//! Fokker-Planck layer: prepotentials, drift fields, eigenfunctions and the
//! truncated spectral series for the time-dependent density.
//!
//! With unit diffusion the density obeys
//! `∂_t P = −∂_x(D P) + ∂²_x P`, `D = 2w'`, and `P = e^{−E t} e^{w} φ`
//! turns it into `Hφ = Eφ` with `H = −∂² + w'² + w''`. Every quantity below is
//! built from the eigenpairs of `H`.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};
use crate::xpoly::{
    check_xi_nonzero, energy, ln_normalization_sq, log_ratio, x_polynomials, xi_derivs,
    ModelParams,
};

/// Plotting extent of the Laguerre half-line.
pub const DEFAULT_X_MAX: f64 = 5.0;
pub const DEFAULT_POINTS: usize = 2001;
pub const DEFAULT_TERMS_LAGUERRE: usize = 80;
pub const DEFAULT_TERMS_JACOBI: usize = 50;

/// Relative size of the last retained term that raises the truncation flag.
pub const TAIL_TOL: f64 = 1e-10;

/// Tolerance on `U'` below which a point counts as stationary.
pub const PEAK_TOL: f64 = 1e-10;

/// Below this log-prefactor a non-finite product is a flushed-to-zero tail.
const LN_UNDERFLOW: f64 = -700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainSpec {
    pub lower: f64,
    /// `f64::INFINITY` for the Laguerre half-line.
    pub upper: f64,
}

impl DomainSpec {
    pub fn of(params: &ModelParams) -> Self {
        if params.family.is_laguerre() {
            Self { lower: 0.0, upper: f64::INFINITY }
        } else {
            Self { lower: 0.0, upper: FRAC_PI_2 }
        }
    }

    /// Open-interval membership.
    pub fn contains(&self, x: f64) -> bool {
        x.is_finite() && x > self.lower && x < self.upper
    }

    /// Width used for grids and stencils; the half-line is cut at `x_max`.
    pub fn width(&self, x_max: f64) -> f64 {
        if self.upper.is_finite() {
            self.upper - self.lower
        } else {
            x_max - self.lower
        }
    }
}

fn check_domain(params: &ModelParams, x: f64) -> Result<()> {
    if DomainSpec::of(params).contains(x) {
        Ok(())
    } else {
        let d = DomainSpec::of(params);
        Err(Error::Domain(format!(
            "x = {x} outside the open domain ({}, {}) of {}",
            d.lower, d.upper, params.family
        )))
    }
}

/// Uniform grid of `points` over `[lower + ε, upper − ε]`, `ε = width·1e-4`.
pub fn default_grid(params: &ModelParams, points: usize, x_max: f64) -> Vec<f64> {
    let d = DomainSpec::of(params);
    let w = d.width(x_max);
    let eps = w * 1e-4;
    let (a, b) = (d.lower + eps, d.lower + w - eps);
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..points).map(|i| a + (b - a) * i as f64 / (points - 1) as f64).collect(),
    }
}

/// Default finite-difference step: `width·1e-4`.
pub fn stencil_step(params: &ModelParams) -> f64 {
    DomainSpec::of(params).width(DEFAULT_X_MAX) * 1e-4
}

/// Five-point central first derivative.
pub fn derivative5<F>(f: F, x: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    Ok((-f(x + 2.0 * h)? + 8.0 * f(x + h)? - 8.0 * f(x - h)? + f(x - 2.0 * h)?) / (12.0 * h))
}

/// Five-point central second derivative.
pub fn second_derivative5<F>(f: F, x: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    Ok((-f(x + 2.0 * h)? + 16.0 * f(x + h)? - 30.0 * f(x)? + 16.0 * f(x - h)? - f(x - 2.0 * h)?)
        / (12.0 * h * h))
}

/// `η = x²` (Laguerre) or `η = cos 2x` (Jacobi).
pub fn eta_map(params: &ModelParams, x: f64) -> Result<f64> {
    check_domain(params, x)?;
    Ok(eta_unchecked(params, x))
}

fn eta_unchecked(params: &ModelParams, x: f64) -> f64 {
    if params.family.is_laguerre() {
        x * x
    } else {
        (2.0 * x).cos()
    }
}

/// `(w, w', w'')` of the deformed prepotential at `x`.
pub fn prepotential_derivs(params: &ModelParams, x: f64) -> Result<[f64; 3]> {
    check_domain(params, x)?;
    let eta = eta_unchecked(params, x);
    let f = log_ratio(params, eta)?;
    let gl = params.g + params.ell as f64;
    Ok(if params.family.is_laguerre() {
        [
            -0.5 * x * x + gl * x.ln() + f.value,
            -x + gl / x + 2.0 * x * f.d1,
            -1.0 - gl / (x * x) + 2.0 * f.d1 + 4.0 * x * x * f.d2,
        ]
    } else {
        let hl = params.h + params.ell as f64;
        let (s, c) = x.sin_cos();
        let (s2, c2) = (2.0 * x).sin_cos();
        [
            gl * s.ln() + hl * c.ln() + f.value,
            gl * c / s - hl * s / c - 2.0 * s2 * f.d1,
            -gl / (s * s) - hl / (c * c) - 4.0 * c2 * f.d1 + 4.0 * s2 * s2 * f.d2,
        ]
    })
}

/// Prepotential `w_ℓ(x; λ)`.
pub fn prepotential(params: &ModelParams, x: f64) -> Result<f64> {
    Ok(prepotential_derivs(params, x)?[0])
}

/// Drift potential `U = −2w`.
pub fn drift_potential(params: &ModelParams, x: f64) -> Result<f64> {
    Ok(-2.0 * prepotential(params, x)?)
}

/// Drift coefficient `D^{(1)} = 2w' = −U'`.
///
/// For the Jacobi families the deforming term carries `−4 sin 2x`, which is
/// what the chain rule through `η = cos 2x` gives for `2w'`.
pub fn drift(params: &ModelParams, x: f64) -> Result<f64> {
    check_domain(params, x)?;
    let eta = eta_unchecked(params, x);
    let dlr = if params.ell == 0 { 0.0 } else { log_ratio(params, eta)?.d1 };
    let gl = params.g + params.ell as f64;
    Ok(if params.family.is_laguerre() {
        -2.0 * x + 2.0 * gl / x + 4.0 * x * dlr
    } else {
        let hl = params.h + params.ell as f64;
        2.0 * gl / x.tan() - 2.0 * hl * x.tan() - 4.0 * (2.0 * x).sin() * dlr
    })
}

/// Schrödinger potential `w'² + w''`.
pub fn schrodinger_potential(params: &ModelParams, x: f64) -> Result<f64> {
    let [_, w1, w2] = prepotential_derivs(params, x)?;
    Ok(w1 * w1 + w2)
}

pub fn eigenvalue(params: &ModelParams, n: u32) -> f64 {
    energy(params, n)
}

/// `ln|φ_ℓ(x)|` and the sign of `φ_ℓ(x)` (the sign of `ξ_ℓ`).
fn ln_asymptotic(params: &ModelParams, x: f64, eta: f64) -> Result<(f64, f64)> {
    let xi = xi_derivs(params, eta)?;
    if params.ell > 0 {
        check_xi_nonzero(eta, &xi)?;
    }
    let gl = params.g + params.ell as f64;
    let ln_gauss = if params.family.is_laguerre() {
        -0.5 * x * x + gl * x.ln()
    } else {
        let hl = params.h + params.ell as f64;
        gl * x.sin().ln() + hl * x.cos().ln()
    };
    Ok((ln_gauss - xi[0].abs().ln(), xi[0].signum()))
}

fn assemble(ln_prefactor: f64, rest: f64) -> Result<f64> {
    let v = ln_prefactor.exp() * rest;
    if v.is_finite() {
        Ok(v)
    } else if ln_prefactor < LN_UNDERFLOW {
        Ok(0.0)
    } else {
        Err(Error::NonFinite(format!(
            "product exp({ln_prefactor})·{rest} is not finite"
        )))
    }
}

/// Normalized eigenfunction `φ_{ℓ,n}(x) = N_{ℓ,n} φ_ℓ(x) P_{ℓ,n}(η(x))`.
pub fn eigenfunction(params: &ModelParams, n: u32, x: f64) -> Result<f64> {
    check_domain(params, x)?;
    let eta = eta_unchecked(params, x);
    let (lp, sign) = ln_asymptotic(params, x, eta)?;
    let p = *x_polynomials(params, n, eta)?.last().expect("non-empty");
    assemble(lp + 0.5 * ln_normalization_sq(params, n)?, sign * p)
}

/// `φ_{ℓ,0}, ..., φ_{ℓ,n_max}` at one point.
pub fn eigenfunctions(params: &ModelParams, n_max: u32, x: f64) -> Result<Vec<f64>> {
    check_domain(params, x)?;
    let eta = eta_unchecked(params, x);
    let (lp, sign) = ln_asymptotic(params, x, eta)?;
    let polys = x_polynomials(params, n_max, eta)?;
    polys
        .iter()
        .enumerate()
        .map(|(n, &p)| assemble(lp + 0.5 * ln_normalization_sq(params, n as u32)?, sign * p))
        .collect()
}

/// Stationary density `φ_{ℓ,0}²`.
pub fn stationary_pdf(params: &ModelParams, x: f64) -> Result<f64> {
    let phi = eigenfunction(params, 0, x)?;
    Ok(phi * phi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InitialCondition {
    /// `P(x, 0) = δ(x − x0)`.
    Delta { x0: f64 },
    /// Expansion coefficients `c_n` with `c_0 = 1`.
    Coefficients(Vec<f64>),
}

/// A density value together with the truncation-tail flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdfValue {
    pub value: f64,
    /// Set when the last retained term exceeds `TAIL_TOL` of the partial sum.
    pub tail_warning: bool,
}

/// Truncated spectral representation of `P(x, t)`.
///
/// Term `n` is `φ_ℓ(x)² · e^{ln_amp[n]} · e^{−E_n t} · mant[n] · P_{ℓ,n}(η) · P_{ℓ,0}(η)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdfSeries {
    params: ModelParams,
    initial: InitialCondition,
    ln_amp: Vec<f64>,
    mant: Vec<f64>,
    energies: Vec<f64>,
}

impl PdfSeries {
    pub fn delta(params: &ModelParams, x0: f64, n_terms: usize) -> Result<Self> {
        if n_terms == 0 {
            return Err(Error::Config("n_terms must be >= 1".into()));
        }
        check_domain(params, x0)?;
        let eta0 = eta_unchecked(params, x0);
        let polys = x_polynomials(params, n_terms as u32 - 1, eta0)?;
        let p0 = polys[0];
        let ln_amp = (0..n_terms as u32)
            .map(|n| ln_normalization_sq(params, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params: *params,
            initial: InitialCondition::Delta { x0 },
            ln_amp,
            mant: polys.iter().map(|p| p / p0).collect(),
            energies: (0..n_terms as u32).map(|n| energy(params, n)).collect(),
        })
    }

    pub fn from_coefficients(params: &ModelParams, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Config("at least one coefficient is required".into()));
        }
        if (coeffs[0] - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!("c_0 must equal 1, got {}", coeffs[0])));
        }
        if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("coefficient {c}")));
        }
        let ln_n0 = 0.5 * ln_normalization_sq(params, 0)?;
        let ln_amp = (0..coeffs.len() as u32)
            .map(|n| Ok(ln_n0 + 0.5 * ln_normalization_sq(params, n)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params: *params,
            energies: (0..coeffs.len() as u32).map(|n| energy(params, n)).collect(),
            mant: coeffs.clone(),
            ln_amp,
            initial: InitialCondition::Coefficients(coeffs),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn initial(&self) -> &InitialCondition {
        &self.initial
    }

    pub fn n_terms(&self) -> usize {
        self.mant.len()
    }

    /// Expansion coefficients `c_n`; for delta data `φ_n(x0)/φ_0(x0)`.
    pub fn coefficients(&self) -> Result<Vec<f64>> {
        match &self.initial {
            InitialCondition::Coefficients(c) => Ok(c.clone()),
            InitialCondition::Delta { .. } => {
                let ln_n0 = 0.5 * self.ln_amp[0];
                Ok(self
                    .ln_amp
                    .iter()
                    .zip(&self.mant)
                    .map(|(la, m)| (0.5 * la - ln_n0).exp() * m)
                    .collect())
            }
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        ensure_finite("t", t)?;
        match self.initial {
            InitialCondition::Delta { .. } if t <= 0.0 => {
                Err(Error::Domain(format!("delta initial data requires t > 0, got t = {t}")))
            }
            _ if t < 0.0 => Err(Error::Domain(format!("t must be >= 0, got {t}"))),
            _ => Ok(()),
        }
    }

    fn terms(&self, t: f64, x: f64) -> Result<Vec<f64>> {
        self.check_time(t)?;
        check_domain(&self.params, x)?;
        let eta = eta_unchecked(&self.params, x);
        let (lp, _) = ln_asymptotic(&self.params, x, eta)?;
        let polys = x_polynomials(&self.params, self.n_terms() as u32 - 1, eta)?;
        let p0 = polys[0];
        // Factoring the common prefactor out keeps per-term rounding small
        // where the series cancels heavily; the log-space form is the fallback
        // when a factor over- or underflows.
        let pre = (2.0 * lp).exp();
        if pre.is_normal() {
            let terms: Vec<f64> = (0..self.n_terms())
                .map(|n| {
                    pre * (self.ln_amp[n].exp() * (-self.energies[n] * t).exp())
                        * (self.mant[n] * polys[n] * p0)
                })
                .collect();
            if terms.iter().all(|v| v.is_finite()) {
                return Ok(terms);
            }
        }
        (0..self.n_terms())
            .map(|n| {
                assemble(
                    2.0 * lp + self.ln_amp[n] - self.energies[n] * t,
                    self.mant[n] * polys[n] * p0,
                )
            })
            .collect()
    }

    pub fn density(&self, t: f64, x: f64) -> Result<PdfValue> {
        let terms = self.terms(t, x)?;
        let value: f64 = terms.iter().sum();
        let last = *terms.last().expect("n_terms >= 1");
        let tail_warning = terms.len() > 1 && last.abs() > TAIL_TOL * value.abs();
        Ok(PdfValue { value, tail_warning })
    }

    /// `∂P/∂t`, differentiated term by term.
    pub fn time_derivative(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.terms(t, x)?.iter().zip(&self.energies).map(|(v, e)| -e * v).sum())
    }
}

/// `P(x, t)` for `P(x, 0) = δ(x − x0)` truncated to `n_terms` terms.
pub fn pdf_delta(params: &ModelParams, x0: f64, t: f64, x: f64, n_terms: usize) -> Result<PdfValue> {
    PdfSeries::delta(params, x0, n_terms)?.density(t, x)
}

/// `φ_0(x) Σ c_n φ_n(x) e^{−E_n t}`.
pub fn pdf_from_coeffs(params: &ModelParams, coeffs: &[f64], t: f64, x: f64) -> Result<PdfValue> {
    PdfSeries::from_coefficients(params, coeffs.to_vec())?.density(t, x)
}

/// Natural cubic spline through `(x_i, y_i)`, zero outside the data range.
struct CubicSpline<'a> {
    x: &'a [f64],
    y: &'a [f64],
    m: Vec<f64>,
}

impl<'a> CubicSpline<'a> {
    fn new(x: &'a [f64], y: &'a [f64]) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second-derivative system.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            let mut upper = vec![0.0; k];
            for i in 0..k {
                let (h0, h1) = (x[i + 1] - x[i], x[i + 2] - x[i + 1]);
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            for i in 1..k {
                let lower = x[i + 1] - x[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Self { x, y, m }
    }

    fn eval_on(&self, i: usize, x: f64) -> f64 {
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - x) / h;
        let b = (x - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// Expansion coefficients `c_n = ∫ φ_n(x) φ_0(x)^{-1} P(x, 0) dx` of a
/// density sampled on `grid`.
///
/// The samples are interpolated by a natural cubic spline (zero outside the
/// grid) and integrated with a 4-point Gauss rule per grid interval. Since
/// `φ_n/φ_0 = (N_n/N_0) P_{ℓ,n}/P_{ℓ,0}`, the asymptotic factor cancels.
pub fn expand_profile(
    params: &ModelParams,
    grid: &[f64],
    density: &[f64],
    n_terms: usize,
) -> Result<Vec<f64>> {
    if n_terms == 0 {
        return Err(Error::Config("n_terms must be >= 1".into()));
    }
    if grid.len() != density.len() || grid.len() < 2 {
        return Err(Error::Config(format!(
            "grid and density must have equal length >= 2 (got {} and {})",
            grid.len(),
            density.len()
        )));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Config("grid must be strictly increasing".into()));
    }
    for &x in grid {
        check_domain(params, x)?;
    }
    let peak = density.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if let Some(v) = density.iter().find(|v| !v.is_finite() || **v < -1e-12 * peak) {
        return Err(Error::NonNormalizedProfile(format!("profile has invalid sample {v}")));
    }

    let spline = CubicSpline::new(grid, density);
    let gauss = crate::quadrature::gauss_legendre_rule(4)?;
    let mut raw = vec![0.0; n_terms];
    for i in 0..grid.len() - 1 {
        let (a, b) = (grid[i], grid[i + 1]);
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        for (&s, &w) in gauss.nodes().iter().zip(gauss.weights()) {
            let x = c + r * s;
            let sx = spline.eval_on(i, x);
            let polys = x_polynomials(params, n_terms as u32 - 1, eta_unchecked(params, x))?;
            for (acc, p) in raw.iter_mut().zip(&polys) {
                *acc += r * w * sx * p / polys[0];
            }
        }
    }
    let mass = raw[0];
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::NonNormalizedProfile(format!("integral is {mass}, expected 1")));
    }
    let ln_n0 = 0.5 * ln_normalization_sq(params, 0)?;
    (0..n_terms)
        .map(|n| Ok((0.5 * ln_normalization_sq(params, n as u32)? - ln_n0).exp() * raw[n]))
        .collect()
}

/// Probability current `J = −U'(x) P − ∂P/∂x`, with `∂P/∂x` from a
/// five-point stencil.
pub fn current_density<F>(params: &ModelParams, pdf: F, x: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let h = stencil_step(params);
    let d = DomainSpec::of(params);
    if !(d.contains(x - 2.0 * h) && d.contains(x + 2.0 * h)) {
        return Err(Error::Domain(format!("stencil around x = {x} leaves the domain")));
    }
    Ok(drift(params, x)? * pdf(x)? - derivative5(&pdf, x, h)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PeakTendency {
    Left,
    Right,
    Stationary,
}

/// Direction a density peak at `x` drifts, from the sign of `U'(x)`.
pub fn peak_tendency(params: &ModelParams, x: f64) -> Result<PeakTendency> {
    let slope = -drift(params, x)?;
    Ok(if slope < -PEAK_TOL {
        PeakTendency::Right
    } else if slope > PEAK_TOL {
        PeakTendency::Left
    } else {
        PeakTendency::Stationary
    })
}
