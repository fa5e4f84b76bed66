//! Deforming functions and exceptional X_ℓ polynomials for the four
//! single-indexed families (L1, L2, J1, J2), with their normalization
//! constants.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{ensure_finite, Error, Result};
use crate::specfun::{
    jacobi, jacobi_all, jacobi_deriv, jacobi_deriv2, laguerre, laguerre_all, laguerre_deriv,
    laguerre_deriv2, log_gamma,
};

/// Relative size below which a deforming-function value counts as a zero.
const XI_ZERO_TOL: f64 = 1e-13;

/// Largest log-magnitude accepted for a normalization constant.
const MAX_LN_NORM: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Family {
    L1,
    L2,
    J1,
    J2,
}

impl Family {
    pub fn is_laguerre(self) -> bool {
        matches!(self, Family::L1 | Family::L2)
    }

    pub fn is_jacobi(self) -> bool {
        !self.is_laguerre()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::L1 => "L1",
            Family::L2 => "L2",
            Family::J1 => "J1",
            Family::J2 => "J2",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "L1" => Ok(Family::L1),
            "L2" => Ok(Family::L2),
            "J1" => Ok(Family::J1),
            "J2" => Ok(Family::J2),
            other => Err(Error::InvalidParams(format!(
                "unknown family {other:?}; expected one of L1, L2, J1, J2"
            ))),
        }
    }
}

/// Family tag, couplings and deformation level of one system.
///
/// `h` is zero and unused for the Laguerre families. Construction validates
/// the coupling constraints once; evaluators assume a valid value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub family: Family,
    pub g: f64,
    pub h: f64,
    pub ell: u32,
}

impl ModelParams {
    /// Validating constructor. `h` is required for J1/J2 and ignored for L1/L2.
    pub fn new(family: Family, g: f64, h: Option<f64>, ell: u32) -> Result<Self> {
        if !g.is_finite() || g <= 0.0 {
            return Err(Error::InvalidParams(format!("{family} requires g > 0, got g = {g}")));
        }
        let h = if family.is_laguerre() {
            0.0
        } else {
            let h = h.ok_or_else(|| {
                Error::InvalidParams(format!("{family} requires the coupling h"))
            })?;
            if !h.is_finite() || h <= 0.0 {
                return Err(Error::InvalidParams(format!("{family} requires h > 0, got h = {h}")));
            }
            match family {
                Family::J1 if g <= h => {
                    return Err(Error::InvalidParams(format!(
                        "J1 requires g > h > 0, got g = {g}, h = {h}"
                    )))
                }
                Family::J2 if h <= g => {
                    return Err(Error::InvalidParams(format!(
                        "J2 requires h > g > 0, got g = {g}, h = {h}"
                    )))
                }
                _ => h,
            }
        };
        Ok(Self { family, g, h, ell })
    }

    pub fn laguerre(family: Family, g: f64, ell: u32) -> Result<Self> {
        if !family.is_laguerre() {
            return Err(Error::InvalidParams(format!("{family} is not a Laguerre family")));
        }
        Self::new(family, g, None, ell)
    }

    pub fn jacobi(family: Family, g: f64, h: f64, ell: u32) -> Result<Self> {
        if !family.is_jacobi() {
            return Err(Error::InvalidParams(format!("{family} is not a Jacobi family")));
        }
        Self::new(family, g, Some(h), ell)
    }

    /// Same family and level with g → g+1 (and h → h+1 for Jacobi).
    pub fn shifted(&self) -> Self {
        let dh = if self.family.is_jacobi() { 1.0 } else { 0.0 };
        Self { g: self.g + 1.0, h: self.h + dh, ..*self }
    }

    pub fn with_ell(&self, ell: u32) -> Self {
        Self { ell, ..*self }
    }
}

/// One eigenstate: excitation index with its energy and normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenState {
    pub params: ModelParams,
    pub n: u32,
    pub energy: f64,
    pub norm_const: f64,
}

impl EigenState {
    pub fn new(params: ModelParams, n: u32) -> Result<Self> {
        Ok(Self { params, n, energy: energy(&params, n), norm_const: normalization(&params, n)? })
    }
}

/// `E_{ℓ,n}`: `4n` for Laguerre families, `4n(n+g+h+2ℓ)` for Jacobi families.
pub fn energy(params: &ModelParams, n: u32) -> f64 {
    let nf = n as f64;
    if params.family.is_laguerre() {
        4.0 * nf
    } else {
        4.0 * nf * (nf + params.g + params.h + 2.0 * params.ell as f64)
    }
}

/// Deforming function `ξ_ℓ(η; λ)`, with `ξ_0 ≡ 1`.
pub fn xi(params: &ModelParams, eta: f64) -> Result<f64> {
    Ok(xi_derivs(params, eta)?[0])
}

/// `[ξ, ∂_η ξ, ∂²_η ξ]` at `eta`.
pub fn xi_derivs(params: &ModelParams, eta: f64) -> Result<[f64; 3]> {
    ensure_finite("eta", eta)?;
    let l = params.ell;
    if l == 0 {
        return Ok([1.0, 0.0, 0.0]);
    }
    let lf = l as f64;
    let (g, h) = (params.g, params.h);
    Ok(match params.family {
        Family::L1 => {
            let a = g + lf - 1.5;
            [
                laguerre(l, a, -eta)?,
                -laguerre_deriv(l, a, -eta)?,
                laguerre_deriv2(l, a, -eta)?,
            ]
        }
        Family::L2 => {
            let a = -g - lf - 0.5;
            [laguerre(l, a, eta)?, laguerre_deriv(l, a, eta)?, laguerre_deriv2(l, a, eta)?]
        }
        Family::J1 => {
            let (a, b) = (g + lf - 1.5, -h - lf - 0.5);
            [jacobi(l, a, b, eta)?, jacobi_deriv(l, a, b, eta)?, jacobi_deriv2(l, a, b, eta)?]
        }
        Family::J2 => {
            let (a, b) = (-g - lf - 0.5, h + lf - 1.5);
            [jacobi(l, a, b, eta)?, jacobi_deriv(l, a, b, eta)?, jacobi_deriv2(l, a, b, eta)?]
        }
    })
}

pub(crate) fn check_xi_nonzero(eta: f64, d: &[f64; 3]) -> Result<()> {
    if d[0].abs() < XI_ZERO_TOL * d[1].abs().max(1.0) {
        Err(Error::XiZero { eta, magnitude: d[0].abs() })
    } else {
        Ok(())
    }
}

/// Derivatives of `F(η) = ln|ξ_ℓ(η; shifted)| − ln|ξ_ℓ(η; λ)|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRatio {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

pub fn log_ratio(params: &ModelParams, eta: f64) -> Result<LogRatio> {
    if params.ell == 0 {
        ensure_finite("eta", eta)?;
        return Ok(LogRatio { value: 0.0, d1: 0.0, d2: 0.0 });
    }
    let up = xi_derivs(&params.shifted(), eta)?;
    let base = xi_derivs(params, eta)?;
    check_xi_nonzero(eta, &up)?;
    check_xi_nonzero(eta, &base)?;
    let (ru, rb) = (up[1] / up[0], base[1] / base[0]);
    Ok(LogRatio {
        value: (up[0] / base[0]).abs().ln(),
        d1: ru - rb,
        d2: (up[2] / up[0] - ru * ru) - (base[2] / base[0] - rb * rb),
    })
}

/// `∂_η ξ(η; shifted)/ξ(η; shifted) − ∂_η ξ(η; λ)/ξ(η; λ)`.
pub fn xi_log_deriv_diff(params: &ModelParams, eta: f64) -> Result<f64> {
    Ok(log_ratio(params, eta)?.d1)
}

/// Parameters `(α, β)` of the classical polynomial inside `P_{ℓ,n}`.
fn inner_params(params: &ModelParams) -> (f64, f64) {
    let lf = params.ell as f64;
    let (g, h) = (params.g, params.h);
    match params.family {
        Family::L1 => (g + lf - 1.5, 0.0),
        Family::L2 => (g + lf + 0.5, 0.0),
        Family::J1 => (g + lf - 1.5, h + lf + 0.5),
        Family::J2 => (g + lf + 0.5, h + lf - 1.5),
    }
}

/// Exceptional polynomial `P_{ℓ,n}(η; λ)` of degree `ℓ+n`.
pub fn x_polynomial(params: &ModelParams, n: u32, eta: f64) -> Result<f64> {
    let up = xi(&params.shifted(), eta)?;
    let base = xi(params, eta)?;
    let (a, b) = inner_params(params);
    let (p, dp) = match params.family {
        Family::L1 | Family::L2 => (laguerre(n, a, eta)?, laguerre_deriv(n, a, eta)?),
        Family::J1 | Family::J2 => (jacobi(n, a, b, eta)?, jacobi_deriv(n, a, b, eta)?),
    };
    Ok(combine(params, n, eta, up, base, p, dp))
}

/// `P_{ℓ,0}, ..., P_{ℓ,n_max}` at one `eta`, sharing the recurrence passes.
pub fn x_polynomials(params: &ModelParams, n_max: u32, eta: f64) -> Result<Vec<f64>> {
    let up = xi(&params.shifted(), eta)?;
    let base = xi(params, eta)?;
    let (a, b) = inner_params(params);
    let (p, dp): (Vec<f64>, Vec<f64>) = match params.family {
        Family::L1 | Family::L2 => {
            let p = laguerre_all(n_max, a, eta)?;
            let mut dp = vec![0.0];
            if n_max > 0 {
                dp.extend(laguerre_all(n_max - 1, a + 1.0, eta)?.into_iter().map(|v| -v));
            }
            (p, dp)
        }
        Family::J1 | Family::J2 => {
            let p = jacobi_all(n_max, a, b, eta)?;
            let mut dp = vec![0.0];
            if n_max > 0 {
                let shifted = jacobi_all(n_max - 1, a + 1.0, b + 1.0, eta)?;
                dp.extend(
                    shifted
                        .into_iter()
                        .enumerate()
                        .map(|(k, v)| 0.5 * ((k + 1) as f64 + a + b + 1.0) * v),
                );
            }
            (p, dp)
        }
    };
    Ok((0..=n_max)
        .map(|n| combine(params, n, eta, up, base, p[n as usize], dp[n as usize]))
        .collect())
}

fn combine(params: &ModelParams, n: u32, eta: f64, up: f64, base: f64, p: f64, dp: f64) -> f64 {
    let nf = n as f64;
    let (g, h) = (params.g, params.h);
    match params.family {
        Family::L1 => up * p - base * dp,
        Family::L2 => ((g + 0.5) * up * p + eta * base * dp) / (nf + g + 0.5),
        Family::J1 => ((h + 0.5) * up * p + (1.0 + eta) * base * dp) / (nf + h + 0.5),
        Family::J2 => ((g + 0.5) * up * p - (1.0 - eta) * base * dp) / (nf + g + 0.5),
    }
}

/// `ln N_{ℓ,n}²`, assembled from log-gamma terms.
pub fn ln_normalization_sq(params: &ModelParams, n: u32) -> Result<f64> {
    let nf = n as f64;
    let lf = params.ell as f64;
    let (g, h) = (params.g, params.h);
    let ln2 = std::f64::consts::LN_2;
    let ln_fact = log_gamma(nf + 1.0)?;
    let deformed = params.ell > 0;
    let v = match params.family {
        Family::L1 => {
            let mut v = ln2 + ln_fact - log_gamma(nf + g + lf + 0.5)?;
            if deformed {
                v += (nf + g + lf - 0.5).ln() - (nf + g + 2.0 * lf - 0.5).ln();
            }
            v
        }
        Family::L2 => {
            let mut v = ln2 + ln_fact - log_gamma(nf + g + lf + 0.5)?;
            if deformed {
                v += (nf + g + 0.5).ln() - (nf + g + lf + 0.5).ln();
            }
            v
        }
        Family::J1 | Family::J2 => {
            let (gg, hh) = (g + lf, h + lf);
            let mut v = ln2 + ln_fact + (2.0 * nf + gg + hh).ln() + log_gamma(nf + gg + hh)?
                - log_gamma(nf + gg + 0.5)?
                - log_gamma(nf + hh + 0.5)?;
            if deformed {
                v += if params.family == Family::J1 {
                    (nf + h + 0.5).ln() + (nf + g + lf - 0.5).ln()
                        - (nf + h + lf + 0.5).ln()
                        - (nf + g + 2.0 * lf - 0.5).ln()
                } else {
                    (nf + g + 0.5).ln() + (nf + h + lf - 0.5).ln()
                        - (nf + g + lf + 0.5).ln()
                        - (nf + h + 2.0 * lf - 0.5).ln()
                };
            }
            v
        }
    };
    if !v.is_finite() || v.abs() > 2.0 * MAX_LN_NORM {
        return Err(Error::Overflow(format!(
            "ln N^2 = {v} for {} g={} h={} ell={} n={n}",
            params.family, g, h, params.ell
        )));
    }
    Ok(v)
}

/// Normalization constant `N_{ℓ,n} > 0`.
pub fn normalization(params: &ModelParams, n: u32) -> Result<f64> {
    Ok((0.5 * ln_normalization_sq(params, n)?).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l1(g: f64, ell: u32) -> ModelParams {
        ModelParams::laguerre(Family::L1, g, ell).unwrap()
    }

    fn all_samples() -> Vec<ModelParams> {
        let mut v = Vec::new();
        for ell in 0..=3 {
            v.push(ModelParams::laguerre(Family::L1, 0.5, ell).unwrap());
            v.push(ModelParams::laguerre(Family::L2, 1.3, ell).unwrap());
            v.push(ModelParams::jacobi(Family::J1, 4.0, 1.5, ell).unwrap());
            v.push(ModelParams::jacobi(Family::J2, 1.0, 3.5, ell).unwrap());
        }
        v
    }

    fn eta_range(p: &ModelParams) -> (f64, f64) {
        if p.family.is_laguerre() {
            (0.0, 10.0)
        } else {
            (-1.0, 1.0)
        }
    }

    #[test]
    fn param_validation() {
        assert!(ModelParams::new(Family::L1, 0.0, None, 1).is_err());
        assert!(ModelParams::new(Family::L2, -1.0, None, 1).is_err());
        assert!(ModelParams::new(Family::J1, 1.0, None, 1).is_err());
        let e = ModelParams::new(Family::J1, 1.0, Some(20.0), 1).unwrap_err();
        assert!(e.to_string().contains("J1 requires g > h > 0"));
        let e = ModelParams::new(Family::J2, 20.0, Some(1.0), 1).unwrap_err();
        assert!(e.to_string().contains("J2 requires h > g > 0"));
        assert!(ModelParams::new(Family::J2, 1.0, Some(20.0), 10).is_ok());
        assert_eq!(ModelParams::new(Family::L1, 0.5, Some(3.0), 1).unwrap().h, 0.0);
        assert_eq!("j2".parse::<Family>().unwrap(), Family::J2);
        assert!("X3".parse::<Family>().is_err());
    }

    #[test]
    fn energies() {
        let p = l1(0.5, 5);
        assert_eq!(energy(&p, 0), 0.0);
        assert_eq!(energy(&p, 7), 28.0);
        let j = ModelParams::jacobi(Family::J2, 1.0, 20.0, 10).unwrap();
        assert_eq!(energy(&j, 1), 168.0);
        let st = EigenState::new(j, 1).unwrap();
        assert_eq!(st.energy, 168.0);
        assert!(st.norm_const > 0.0 && st.norm_const.is_finite());
    }

    #[test]
    fn xi_undeformed_is_one() {
        for p in all_samples().iter().filter(|p| p.ell == 0) {
            assert_eq!(xi(p, 0.37).unwrap(), 1.0);
        }
    }

    #[test]
    fn xi_l1_ell1_closed_form() {
        for &g in &[0.1, 0.5, 2.0] {
            for &eta in &[0.0, 0.7, 3.0] {
                let v = xi(&l1(g, 1), eta).unwrap();
                assert!((v - (g + 0.5 + eta)).abs() < 1e-14);
                let d = xi_log_deriv_diff(&l1(g, 1), eta).unwrap();
                let expect = 1.0 / (g + 1.5 + eta) - 1.0 / (g + 0.5 + eta);
                assert!((d - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn xi_l1_ell2_matches_explicit_sum() {
        // L_2^{(a)}(y) = (a+1)(a+2)/2 − (a+2)y + y²/2 with a = g+ℓ−3/2 = 1, y = −η = −1.
        let (a, y) = (1.0, -1.0);
        let expect = (a + 1.0) * (a + 2.0) / 2.0 - (a + 2.0) * y + y * y / 2.0;
        assert!((xi(&l1(0.5, 2), 1.0).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn log_deriv_diff_matches_finite_difference() {
        let p = l1(0.5, 5);
        let f = |e: f64| (xi(&p.shifted(), e).unwrap().abs() / xi(&p, e).unwrap().abs()).ln();
        let h = 1e-4;
        let eta = 1.44;
        let fd = (-f(eta + 2.0 * h) + 8.0 * f(eta + h) - 8.0 * f(eta - h) + f(eta - 2.0 * h))
            / (12.0 * h);
        let d = xi_log_deriv_diff(&p, eta).unwrap();
        assert!((d - fd).abs() <= 1e-7 * d.abs().max(1e-3), "{d} vs {fd}");
        assert_eq!(xi_log_deriv_diff(&l1(0.5, 0), 2.0).unwrap(), 0.0);
        for p in all_samples().into_iter().filter(|p| p.ell > 0) {
            let lr = log_ratio(&p, 0.3).unwrap();
            let fd2 = |e: f64| log_ratio(&p, e).unwrap().d1;
            let num = (fd2(0.3 + 1e-5) - fd2(0.3 - 1e-5)) / 2e-5;
            assert!((lr.d2 - num).abs() <= 1e-6 * lr.d2.abs().max(1.0), "{p:?}");
        }
    }

    #[test]
    fn xi_zero_is_detected() {
        // ξ_1 for L1 is g + 1/2 + η, which vanishes at η = −g − 1/2.
        let p = l1(0.5, 1);
        assert!(matches!(xi_log_deriv_diff(&p, -1.0), Err(Error::XiZero { .. })));
    }

    #[test]
    fn base_case_is_shifted_xi() {
        for p in all_samples() {
            let (lo, hi) = eta_range(&p);
            for i in 0..=20 {
                let eta = lo + (hi - lo) * i as f64 / 20.0;
                let a = x_polynomial(&p, 0, eta).unwrap();
                let b = xi(&p.shifted(), eta).unwrap();
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{p:?} eta={eta}");
            }
        }
    }

    #[test]
    fn classical_reduction() {
        assert!((x_polynomial(&l1(0.5, 0), 2, 1.0).unwrap() + 0.5).abs() < 1e-14);
        for p in all_samples().into_iter().filter(|p| p.ell == 0) {
            let (lo, hi) = eta_range(&p);
            for n in 0..=8 {
                for i in 0..=20 {
                    let eta = lo + (hi - lo) * i as f64 / 20.0;
                    let got = x_polynomial(&p, n, eta).unwrap();
                    let want = if p.family.is_laguerre() {
                        laguerre(n, p.g - 0.5, eta).unwrap()
                    } else {
                        jacobi(n, p.g - 0.5, p.h - 0.5, eta).unwrap()
                    };
                    let scale = want.abs().max(1.0);
                    assert!((got - want).abs() <= 1e-12 * scale, "{p:?} n={n} eta={eta}");
                }
            }
        }
    }

    /// Divided differences of f on nodes `s` (in place, Newton form).
    fn divided_differences(s: &[f64], f: &[f64]) -> Vec<f64> {
        let mut c = f.to_vec();
        for j in 1..s.len() {
            for i in (j..s.len()).rev() {
                c[i] = (c[i] - c[i - 1]) / (s[i] - s[i - j]);
            }
        }
        c
    }

    #[test]
    fn exact_degree_ell_plus_n() {
        for p in all_samples() {
            for n in 0..=5u32 {
                let d = (p.ell + n) as usize;
                let m = d + 2;
                let (lo, hi) = eta_range(&p);
                let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                let s: Vec<f64> = (0..m)
                    .map(|k| ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * m) as f64).cos())
                    .collect();
                let f: Vec<f64> = s.iter().map(|&si| x_polynomial(&p, n, c + r * si).unwrap()).collect();
                let fmax = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let dd = divided_differences(&s, &f);
                assert!(dd[d + 1].abs() <= 1e-9 * fmax, "{p:?} n={n}: residual {}", dd[d + 1]);
                assert!(dd[d].abs() > 1e-6 * fmax, "{p:?} n={n}: leading {}", dd[d]);
            }
        }
        // L1, ℓ=1, n=3 has degree exactly 4.
        let p = l1(0.5, 1);
        let s: Vec<f64> = (0..6).map(|k| 0.5 + k as f64).collect();
        let f: Vec<f64> = s.iter().map(|&e| x_polynomial(&p, 3, e).unwrap()).collect();
        let dd = divided_differences(&s, &f);
        assert!(dd[4].abs() > 1e-3 && dd[5].abs() < 1e-12);
    }

    #[test]
    fn batched_polynomials_match_single() {
        for p in all_samples() {
            let eta = if p.family.is_laguerre() { 2.7 } else { -0.35 };
            let all = x_polynomials(&p, 12, eta).unwrap();
            for (n, v) in all.iter().enumerate() {
                let single = x_polynomial(&p, n as u32, eta).unwrap();
                assert!((v - single).abs() <= 1e-13 * single.abs().max(1.0));
            }
        }
    }

    #[test]
    fn j1_j2_mirror() {
        for ell in 0..=6 {
            let j1 = ModelParams::jacobi(Family::J1, 7.0, 2.5, ell).unwrap();
            let j2 = ModelParams::jacobi(Family::J2, 2.5, 7.0, ell).unwrap();
            let sign = if ell % 2 == 0 { 1.0 } else { -1.0 };
            for i in 0..=20 {
                let eta = -1.0 + 0.1 * i as f64;
                let a = xi(&j1, -eta).unwrap();
                let b = sign * xi(&j2, eta).unwrap();
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn normalization_values() {
        // L1, ℓ=0, g=1/2, n=0: N² = 2·0!/Γ(1) = 2.
        assert!((normalization(&l1(0.5, 0), 0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        for p in all_samples() {
            for n in 0..=20 {
                let v = normalization(&p, n).unwrap();
                assert!(v > 0.0 && v.is_finite());
            }
        }
        let j = ModelParams::jacobi(Family::J2, 1.0, 20.0, 15).unwrap();
        assert!(normalization(&j, 49).unwrap().is_finite());
    }

    #[test]
    fn normalization_overflow_is_reported() {
        let p = ModelParams::jacobi(Family::J2, 2000.0, 2001.0, 0).unwrap();
        assert!(matches!(normalization(&p, 0), Err(Error::Overflow(_))));
    }
}
