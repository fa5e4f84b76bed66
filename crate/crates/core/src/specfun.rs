//! Classical Laguerre and Jacobi polynomials and the log-gamma function.
//!
//! Parameters are arbitrary finite reals. The deforming functions evaluate
//! these polynomials at negative, non-classical parameters, so nothing here
//! assumes `alpha, beta > -1`.

use crate::error::{ensure_finite, Error, Result};

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Degree and parameters of a classical polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyParams {
    pub alpha: f64,
    /// Ignored by the Laguerre evaluators.
    pub beta: f64,
    pub degree: u32,
}

impl PolyParams {
    pub fn laguerre(degree: u32, alpha: f64) -> Self {
        Self { alpha, beta: 0.0, degree }
    }

    pub fn jacobi(degree: u32, alpha: f64, beta: f64) -> Self {
        Self { alpha, beta, degree }
    }

    pub fn eval_laguerre(&self, x: f64) -> Result<f64> {
        laguerre(self.degree, self.alpha, x)
    }

    pub fn eval_jacobi(&self, x: f64) -> Result<f64> {
        jacobi(self.degree, self.alpha, self.beta, x)
    }
}

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn log_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("log_gamma requires finite x > 0, got {x}")));
    }
    if x < 0.5 {
        // Γ(x) = Γ(x+1)/x keeps the Lanczos sum in its accurate range.
        return Ok(lanczos_ln_gamma(x + 1.0) - x.ln());
    }
    Ok(lanczos_ln_gamma(x))
}

fn lanczos_ln_gamma(x: f64) -> f64 {
    let z = x - 1.0;
    let mut a = LANCZOS_COEFFS[0];
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        a += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + a.ln()
}

/// Generalized Laguerre polynomial `L_n^{(alpha)}(x)` by upward recurrence.
pub fn laguerre(n: u32, alpha: f64, x: f64) -> Result<f64> {
    ensure_finite("alpha", alpha)?;
    ensure_finite("x", x)?;
    Ok(laguerre_unchecked(n, alpha, x))
}

fn laguerre_unchecked(n: u32, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `L_0^{(alpha)}(x), ..., L_{n_max}^{(alpha)}(x)` from a single recurrence pass.
pub fn laguerre_all(n_max: u32, alpha: f64, x: f64) -> Result<Vec<f64>> {
    ensure_finite("alpha", alpha)?;
    ensure_finite("x", x)?;
    let mut out = Vec::with_capacity(n_max as usize + 1);
    out.push(1.0);
    if n_max == 0 {
        return Ok(out);
    }
    out.push(1.0 + alpha - x);
    for k in 1..n_max as usize {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * out[k] - (kf + alpha) * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    Ok(out)
}

/// `d/dx L_n^{(alpha)}(x) = -L_{n-1}^{(alpha+1)}(x)`.
pub fn laguerre_deriv(n: u32, alpha: f64, x: f64) -> Result<f64> {
    ensure_finite("alpha", alpha)?;
    ensure_finite("x", x)?;
    if n == 0 {
        return Ok(0.0);
    }
    Ok(-laguerre_unchecked(n - 1, alpha + 1.0, x))
}

/// `d²/dx² L_n^{(alpha)}(x) = L_{n-2}^{(alpha+2)}(x)`.
pub fn laguerre_deriv2(n: u32, alpha: f64, x: f64) -> Result<f64> {
    ensure_finite("alpha", alpha)?;
    ensure_finite("x", x)?;
    if n < 2 {
        return Ok(0.0);
    }
    Ok(laguerre_unchecked(n - 2, alpha + 2.0, x))
}

/// Jacobi polynomial `P_n^{(alpha,beta)}(x)` by the standard three-term recurrence.
///
/// Fails with [`Error::DegenerateRecurrence`] when the leading coefficient
/// `2k(k+α+β)(2k+α+β-2)` vanishes for some `2 <= k <= n`.
pub fn jacobi(n: u32, alpha: f64, beta: f64, x: f64) -> Result<f64> {
    Ok(*jacobi_all(n, alpha, beta, x)?.last().expect("non-empty"))
}

/// `P_0, ..., P_{n_max}` at fixed parameters from one recurrence pass.
pub fn jacobi_all(n_max: u32, alpha: f64, beta: f64, x: f64) -> Result<Vec<f64>> {
    ensure_finite("alpha", alpha)?;
    ensure_finite("beta", beta)?;
    ensure_finite("x", x)?;
    let mut out = Vec::with_capacity(n_max as usize + 1);
    out.push(1.0);
    if n_max == 0 {
        return Ok(out);
    }
    let ab = alpha + beta;
    out.push((alpha + 1.0) + (ab + 2.0) * (x - 1.0) / 2.0);
    for k in 2..=n_max {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        let lead = 2.0 * kf * (kf + ab) * (s - 2.0);
        let size = 2.0 * kf * (kf + alpha.abs() + beta.abs()) * (2.0 * kf + alpha.abs() + beta.abs());
        if lead.abs() <= 1e-13 * size {
            return Err(Error::DegenerateRecurrence { k, alpha, beta });
        }
        let a1 = (s - 1.0) * (s * (s - 2.0) * x + alpha * alpha - beta * beta);
        let a2 = 2.0 * (kf + alpha - 1.0) * (kf + beta - 1.0) * s;
        let k = k as usize;
        let next = (a1 * out[k - 1] - a2 * out[k - 2]) / lead;
        out.push(next);
    }
    Ok(out)
}

/// `d/dx P_n^{(alpha,beta)}(x) = (n+α+β+1)/2 · P_{n-1}^{(α+1,β+1)}(x)`.
pub fn jacobi_deriv(n: u32, alpha: f64, beta: f64, x: f64) -> Result<f64> {
    ensure_finite("alpha", alpha)?;
    ensure_finite("beta", beta)?;
    ensure_finite("x", x)?;
    if n == 0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    Ok(0.5 * (nf + alpha + beta + 1.0) * jacobi(n - 1, alpha + 1.0, beta + 1.0, x)?)
}

/// Second derivative of `P_n^{(alpha,beta)}`.
pub fn jacobi_deriv2(n: u32, alpha: f64, beta: f64, x: f64) -> Result<f64> {
    ensure_finite("alpha", alpha)?;
    ensure_finite("beta", beta)?;
    ensure_finite("x", x)?;
    if n < 2 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let c = 0.25 * (nf + alpha + beta + 1.0) * (nf + alpha + beta + 2.0);
    Ok(c * jacobi(n - 2, alpha + 2.0, beta + 2.0, x)?)
}
