use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;
use xfpe::sde::{histogram, uniform_edges};
use xfpe::spectral::{derivative5, drift, drift_potential, prepotential, stationary_pdf};
use xfpe::xpoly::{x_polynomials, xi};
use xfpe::{Family, ModelParams};

fn laguerre_family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::L1), Just(Family::L2)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laguerre_drift_is_prepotential_gradient(
        family in laguerre_family(), g in 0.2f64..4.0, ell in 0u32..7, x in 0.1f64..4.0,
    ) {
        let p = ModelParams::laguerre(family, g, ell).unwrap();
        let fd = derivative5(|y| prepotential(&p, y), x, 1e-4).unwrap();
        let d = drift(&p, x).unwrap();
        prop_assert!((d - 2.0 * fd).abs() <= 1e-6 * d.abs().max(1.0));
    }

    #[test]
    fn deforming_function_stays_positive_on_laguerre_domain(
        family in laguerre_family(), g in 0.2f64..4.0, ell in 0u32..7, eta in 0.0f64..30.0,
    ) {
        let p = ModelParams::laguerre(family, g, ell).unwrap();
        prop_assert!(xi(&p, eta).unwrap().abs() > 0.0);
        prop_assert!(stationary_pdf(&p, eta.sqrt().max(1e-3)).unwrap() >= 0.0);
    }

    #[test]
    fn jacobi_mirror(g in 0.2f64..5.0, dh in 0.1f64..10.0, ell in 0u32..8, x in 0.05f64..1.5) {
        let a = ModelParams::jacobi(Family::J1, g + dh, g, ell).unwrap();
        let b = ModelParams::jacobi(Family::J2, g, g + dh, ell).unwrap();
        let ua = drift_potential(&a, x).unwrap();
        let ub = drift_potential(&b, FRAC_PI_2 - x).unwrap();
        prop_assert!((ua - ub).abs() <= 1e-9 * ua.abs().max(1.0));
    }

    #[test]
    fn x_polynomial_degrees_shift_by_ell(g in 0.6f64..3.0, ell in 1u32..5) {
        // P_{ℓ,n} has degree n + ℓ: the (n+ℓ+1)-th divided difference vanishes.
        let p = ModelParams::laguerre(Family::L1, g, ell).unwrap();
        let n = 2u32;
        let deg = (n + ell) as usize;
        let nodes: Vec<f64> = (0..deg + 2).map(|i| 0.3 + i as f64 * 0.4).collect();
        let mut dd: Vec<f64> = nodes.iter().map(|&e| x_polynomials(&p, n, e).unwrap()[n as usize]).collect();
        let scale = dd.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for k in 1..dd.len() {
            for i in (k..dd.len()).rev() {
                dd[i] = (dd[i] - dd[i - 1]) / (nodes[i] - nodes[i - k]);
            }
        }
        prop_assert!(dd[deg + 1].abs() <= 1e-8 * scale);
        prop_assert!(dd[deg].abs() > 1e-8 * scale);
    }

    #[test]
    fn histogram_mass_is_one(xs in prop::collection::vec(0.0f64..1.0, 1..500), bins in 1usize..40) {
        let edges = uniform_edges(0.0, 1.0, bins).unwrap();
        let h = histogram(&xs, &edges).unwrap();
        let mass: f64 = h.density.iter().zip(h.widths()).map(|(d, w)| d * w).sum();
        prop_assert!((mass - 1.0).abs() < 1e-12);
        prop_assert_eq!(h.density.len(), edges.len() - 1);
        prop_assert!(h.std_err.iter().all(|&e| e >= 0.0));
    }
}
