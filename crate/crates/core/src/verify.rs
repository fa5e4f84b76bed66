//! Numerical self-checks: orthonormality, eigen-equation residuals,
//! Fokker-Planck residuals and drift consistency.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::gram_matrix;
use crate::spectral::{
    derivative5, drift, eigenfunction, eigenvalue, prepotential, schrodinger_potential,
    second_derivative5, stencil_step, DomainSpec, PdfSeries, DEFAULT_TERMS_JACOBI,
    DEFAULT_TERMS_LAGUERRE, DEFAULT_X_MAX,
};
use crate::xpoly::ModelParams;

pub const ORTHONORMALITY_TOL: f64 = 1e-8;
pub const SCHRODINGER_TOL: f64 = 1e-6;
/// Relative to `max_x P(x, t)`.
pub const FPE_TOL: f64 = 1e-4;
pub const DRIFT_TOL: f64 = 1e-6;

pub const MAX_N: u32 = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thresholds {
    pub orthonormality: f64,
    pub schrodinger: f64,
    pub fpe: f64,
    pub drift: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            orthonormality: ORTHONORMALITY_TOL,
            schrodinger: SCHRODINGER_TOL,
            fpe: FPE_TOL,
            drift: DRIFT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub n_max: u32,
    /// Multiplies every eigenfunction in the Gram matrix; `1.0` except in
    /// negative-control runs.
    pub norm_scale: f64,
    /// Interior grid size for the residual checks.
    pub points: usize,
    pub x0: Option<f64>,
    pub times: Vec<f64>,
    pub terms: Option<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { n_max: 10, norm_scale: 1.0, points: 101, x0: None, times: vec![0.2, 0.5], terms: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Orthonormality {
    pub max_off_diagonal: f64,
    pub max_diagonal_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub params: ModelParams,
    pub n_max: u32,
    pub orthonormality: Orthonormality,
    pub schrodinger_residual: f64,
    pub fpe_residual: f64,
    pub drift_deviation: f64,
    pub thresholds: Thresholds,
    /// Names of the metrics above their thresholds.
    pub failures: Vec<String>,
    pub passed: bool,
}

/// Interior grid `[lower + 0.05W, upper − 0.05W]`; the half-line uses `W = 5`.
pub fn interior_grid(params: &ModelParams, points: usize) -> Vec<f64> {
    let d = DomainSpec::of(params);
    let w = d.width(DEFAULT_X_MAX);
    let (a, b) = (d.lower + 0.05 * w, d.lower + 0.95 * w);
    let m = points.max(2);
    (0..m).map(|i| a + (b - a) * i as f64 / (m - 1) as f64).collect()
}

pub fn default_x0(params: &ModelParams) -> f64 {
    if params.family.is_laguerre() {
        1.2
    } else {
        0.3
    }
}

pub fn default_terms(params: &ModelParams) -> usize {
    if params.family.is_laguerre() {
        DEFAULT_TERMS_LAGUERRE
    } else {
        DEFAULT_TERMS_JACOBI
    }
}

pub fn orthonormality(params: &ModelParams, n_max: u32, norm_scale: f64) -> Result<Orthonormality> {
    let g = gram_matrix(params, n_max, norm_scale)?;
    let mut off = 0.0f64;
    let mut diag = 0.0f64;
    for (i, row) in g.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if i == j {
                diag = diag.max((v - 1.0).abs());
            } else {
                off = off.max(v.abs());
            }
        }
    }
    Ok(Orthonormality { max_off_diagonal: off, max_diagonal_deviation: diag })
}

/// Largest `|−φ'' + Vφ − Eφ|` over `n ≤ n_max` and `grid`, each state
/// scaled by its largest term magnitude on the grid.
pub fn schrodinger_residual(params: &ModelParams, n_max: u32, grid: &[f64]) -> Result<f64> {
    let h = stencil_step(params);
    let mut worst = 0.0f64;
    for n in 0..=n_max {
        let e = eigenvalue(params, n);
        let phi = |x: f64| eigenfunction(params, n, x);
        let mut scale = 0.0f64;
        let mut res = Vec::with_capacity(grid.len());
        for &x in grid {
            let f = phi(x)?;
            let d2 = second_derivative5(phi, x, h)?;
            let vf = schrodinger_potential(params, x)? * f;
            scale = scale.max(d2.abs()).max(vf.abs()).max((e * f).abs());
            res.push((-d2 + vf - e * f).abs());
        }
        if scale > 0.0 {
            worst = worst.max(res.iter().fold(0.0f64, |a, &r| a.max(r)) / scale);
        }
    }
    Ok(worst)
}

/// Largest `|∂_t P + ∂_x(D P) − ∂²_x P| / max P` over `times` and `grid`.
pub fn fpe_residual(series: &PdfSeries, times: &[f64], grid: &[f64]) -> Result<f64> {
    let params = *series.params();
    let h = stencil_step(&params);
    let mut worst = 0.0f64;
    for &t in times {
        let pdf = |x: f64| series.density(t, x).map(|v| v.value);
        let flux = |x: f64| Ok(drift(&params, x)? * pdf(x)?);
        let mut peak = 0.0f64;
        let mut res = 0.0f64;
        for &x in grid {
            peak = peak.max(pdf(x)?.abs());
            let r = series.time_derivative(t, x)? + derivative5(flux, x, h)?
                - second_derivative5(pdf, x, h)?;
            res = res.max(r.abs());
        }
        if peak > 0.0 {
            worst = worst.max(res / peak);
        }
    }
    Ok(worst)
}

/// Largest `|D − 2 dw/dx| / max(|D|, 1)` over `grid`, with `dw/dx` from a
/// five-point stencil.
pub fn drift_deviation(params: &ModelParams, grid: &[f64]) -> Result<f64> {
    let h = stencil_step(params);
    let mut worst = 0.0f64;
    for &x in grid {
        let d = drift(params, x)?;
        let fd = derivative5(|y| prepotential(params, y), x, h)?;
        worst = worst.max((d - 2.0 * fd).abs() / d.abs().max(1.0));
    }
    Ok(worst)
}

pub fn run(params: &ModelParams, opts: &VerifyOptions) -> Result<VerifyReport> {
    if opts.n_max > MAX_N {
        return Err(Error::Config(format!("n_max must be <= {MAX_N}, got {}", opts.n_max)));
    }
    let grid = interior_grid(params, opts.points);
    let orth = orthonormality(params, opts.n_max, opts.norm_scale)?;
    let schrodinger = schrodinger_residual(params, opts.n_max, &grid)?;
    let series = PdfSeries::delta(
        params,
        opts.x0.unwrap_or_else(|| default_x0(params)),
        opts.terms.unwrap_or_else(|| default_terms(params)),
    )?;
    let fpe = fpe_residual(&series, &opts.times, &grid)?;
    let dd = drift_deviation(params, &grid)?;

    let thresholds = Thresholds::default();
    let mut failures = Vec::new();
    if orth.max_off_diagonal.max(orth.max_diagonal_deviation) > thresholds.orthonormality {
        failures.push("orthonormality".to_string());
    }
    for (name, v, tol) in [
        ("schrodinger_residual", schrodinger, thresholds.schrodinger),
        ("fpe_residual", fpe, thresholds.fpe),
        ("drift_deviation", dd, thresholds.drift),
    ] {
        if !(v <= tol) {
            failures.push(name.to_string());
        }
    }
    Ok(VerifyReport {
        params: *params,
        n_max: opts.n_max,
        orthonormality: orth,
        schrodinger_residual: schrodinger,
        fpe_residual: fpe,
        drift_deviation: dd,
        thresholds,
        passed: failures.is_empty(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xpoly::Family;

    #[test]
    fn deformed_laguerre_passes() {
        let p = ModelParams::laguerre(Family::L1, 0.5, 5).unwrap();
        let r = run(&p, &VerifyOptions::default()).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn corrupted_normalization_fails() {
        let p = ModelParams::laguerre(Family::L1, 0.5, 5).unwrap();
        let opts = VerifyOptions { norm_scale: 1.01, ..Default::default() };
        let r = run(&p, &opts).unwrap();
        assert_eq!(r.failures, vec!["orthonormality".to_string()]);
    }

    #[test]
    fn n_max_limit() {
        let p = ModelParams::laguerre(Family::L2, 0.5, 1).unwrap();
        let opts = VerifyOptions { n_max: 21, ..Default::default() };
        assert!(run(&p, &opts).is_err());
    }

    #[test]
    fn interior_grid_bounds() {
        let p = ModelParams::jacobi(Family::J1, 20.0, 1.0, 10).unwrap();
        let g = interior_grid(&p, 11);
        let w = std::f64::consts::FRAC_PI_2;
        assert!((g[0] - 0.05 * w).abs() < 1e-15 && (g[10] - 0.95 * w).abs() < 1e-15);
    }
}
