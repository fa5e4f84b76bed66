use std::f64::consts::FRAC_PI_2;

use xfpe::quadrature::{identity_deviation, integrate_domain, orthonormality_matrix};
use xfpe::spectral::{
    default_grid, drift, eigenvalue, expand_profile, stationary_pdf, PdfSeries, DEFAULT_X_MAX,
};
use xfpe::verify::{drift_deviation, fpe_residual, interior_grid, schrodinger_residual};
use xfpe::{Family, ModelParams};

fn l(family: Family, g: f64, ell: u32) -> ModelParams {
    ModelParams::laguerre(family, g, ell).unwrap()
}

fn j(family: Family, g: f64, h: f64, ell: u32) -> ModelParams {
    ModelParams::jacobi(family, g, h, ell).unwrap()
}

fn suite() -> Vec<(ModelParams, f64)> {
    vec![
        (l(Family::L1, 0.5, 0), 1.2),
        (l(Family::L1, 0.5, 5), 1.2),
        (l(Family::L1, 2.0, 3), 0.8),
        (l(Family::L2, 0.5, 5), 1.2),
        (l(Family::L2, 3.0, 2), 1.5),
        (j(Family::J1, 20.0, 1.0, 10), 1.27),
        (j(Family::J1, 3.0, 0.5, 2), 0.9),
        (j(Family::J2, 1.0, 20.0, 10), 0.3),
        (j(Family::J2, 0.7, 1.5, 4), 0.6),
    ]
}

#[test]
fn orthonormal_in_every_family() {
    for (p, _) in suite() {
        let d = identity_deviation(&orthonormality_matrix(&p, 8).unwrap());
        assert!(d < 1e-10, "{p:?}: {d}");
    }
}

#[test]
fn residuals_and_drift_consistency() {
    for (p, x0) in suite() {
        let grid = interior_grid(&p, 41);
        assert!(schrodinger_residual(&p, 8, &grid).unwrap() < 1e-6, "{p:?}");
        assert!(drift_deviation(&p, &grid).unwrap() < 1e-6, "{p:?}");
        let s = PdfSeries::delta(&p, x0, 50).unwrap();
        assert!(fpe_residual(&s, &[0.2, 0.5], &grid).unwrap() < 1e-4, "{p:?}");
    }
}

#[test]
fn probability_is_conserved() {
    for (p, x0) in suite() {
        let s = PdfSeries::delta(&p, x0, 60).unwrap();
        for &t in &[0.05, 0.2, 1.0, 3.0] {
            let m = integrate_domain(&p, |x| s.density(t, x).map(|v| v.value)).unwrap().value;
            assert!((m - 1.0).abs() < 1e-8, "{p:?} t={t}: {m}");
        }
    }
}

#[test]
fn relaxation_towards_stationary_is_monotone() {
    for (p, x0) in suite() {
        let s = PdfSeries::delta(&p, x0, 60).unwrap();
        let grid = default_grid(&p, 201, DEFAULT_X_MAX);
        let mut prev = f64::INFINITY;
        for &t in &[0.1, 0.2, 0.4, 0.8, 1.6] {
            let d: f64 = grid
                .iter()
                .map(|&x| (s.density(t, x).unwrap().value - stationary_pdf(&p, x).unwrap()).abs())
                .sum();
            assert!(d <= prev, "{p:?} t={t}");
            prev = d;
        }
    }
}

#[test]
fn density_is_nonnegative() {
    for (p, x0) in suite() {
        // Enough terms that the series has converged even at t = 0.05.
        let s = PdfSeries::delta(&p, x0, 200).unwrap();
        for &t in &[0.05, 0.2, 0.5, 2.0] {
            let vals: Vec<_> = default_grid(&p, 401, DEFAULT_X_MAX)
                .iter()
                .map(|&x| s.density(t, x).unwrap())
                .collect();
            let peak = vals.iter().map(|v| v.value).fold(0.0, f64::max);
            for v in &vals {
                assert!(v.value >= -1e-12 * peak, "{p:?} t={t}: {v:?}");
            }
        }
    }
}

#[test]
fn laguerre_deformations_are_isospectral() {
    for ell in 0..6 {
        for n in 0..10 {
            assert_eq!(eigenvalue(&l(Family::L1, 0.5, ell), n), 4.0 * n as f64);
            assert_eq!(eigenvalue(&l(Family::L2, 1.5, ell), n), 4.0 * n as f64);
        }
    }
    // The Jacobi spectrum shifts with ℓ.
    let a = eigenvalue(&j(Family::J2, 1.0, 20.0, 0), 1);
    let b = eigenvalue(&j(Family::J2, 1.0, 20.0, 10), 1);
    assert!(b > a);
}

#[test]
fn classical_jacobi_drift() {
    let p = j(Family::J2, 1.0, 20.0, 0);
    for x in default_grid(&p, 50, DEFAULT_X_MAX) {
        let want = 2.0 / x.tan() - 40.0 * x.tan();
        assert!((drift(&p, x).unwrap() - want).abs() < 1e-12 * want.abs().max(1.0));
    }
}

#[test]
fn mirror_densities() {
    for ell in [0, 3, 10] {
        let a = PdfSeries::delta(&j(Family::J1, 20.0, 1.0, ell), FRAC_PI_2 - 0.3, 50).unwrap();
        let b = PdfSeries::delta(&j(Family::J2, 1.0, 20.0, ell), 0.3, 50).unwrap();
        for &x in &[0.1, 0.4, 0.9, 1.3] {
            let u = a.density(0.2, FRAC_PI_2 - x).unwrap().value;
            let v = b.density(0.2, x).unwrap().value;
            assert!((u - v).abs() <= 1e-9 * v.abs().max(1e-12), "ell={ell} x={x}");
        }
    }
}

#[test]
fn semigroup_through_profile_expansion() {
    let p = j(Family::J2, 1.0, 20.0, 10);
    let s = PdfSeries::delta(&p, 0.3, 50).unwrap();
    let grid: Vec<f64> = (0..3001).map(|i| 1e-6 + (FRAC_PI_2 - 2e-6) * i as f64 / 3000.0).collect();
    let dens: Vec<f64> = grid.iter().map(|&x| s.density(0.1, x).unwrap().value).collect();
    let c = expand_profile(&p, &grid, &dens, 30).unwrap();
    let restarted = PdfSeries::from_coefficients(&p, c).unwrap();
    for &x in &[0.15, 0.3, 0.6, 1.0] {
        let direct = s.density(0.3, x).unwrap().value;
        let chained = restarted.density(0.2, x).unwrap().value;
        assert!((direct - chained).abs() < 1e-6 * direct.abs().max(1.0), "x={x}");
    }
}

#[test]
fn truncation_flag_clears_with_time() {
    let p = l(Family::L1, 0.5, 5);
    let s = PdfSeries::delta(&p, 1.2, 80).unwrap();
    assert!(!s.density(2.0, 1.2).unwrap().tail_warning);
    let short = PdfSeries::delta(&p, 1.2, 5).unwrap();
    assert!(short.density(0.01, 1.2).unwrap().tail_warning);
}
