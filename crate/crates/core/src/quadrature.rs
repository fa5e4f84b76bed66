//! Fixed-order Gauss-Legendre quadrature on finite and semi-infinite
//! intervals, with an a posteriori error estimate from a doubled rule.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::spectral::eigenfunctions;
use crate::xpoly::ModelParams;

pub const MAX_NODES: usize = 4096;

/// Node count used by the domain-level integrals.
pub const DEFAULT_NODES: usize = 512;

/// Endpoint clip for integrals over the Jacobi domain `(0, π/2)`.
pub const JACOBI_CLIP: f64 = 1e-12;

/// Relative error estimate above which a semi-infinite integrand is rejected.
const DECAY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mapping {
    /// Affine map of the reference interval onto `(a, b)`.
    Identity { a: f64, b: f64 },
    /// `x = a + scale·u/(1-u)` with `u ∈ (0, 1)`.
    SemiInfinite { a: f64, scale: f64 },
}

/// Nodes and positive weights, already mapped onto the target domain.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    mapping: Mapping,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
}

type Reference = Arc<(Vec<f64>, Vec<f64>)>;

fn reference(n: usize) -> Result<Reference> {
    if n == 0 || n > MAX_NODES {
        return Err(Error::Quadrature(format!(
            "node count must be in 1..={MAX_NODES}, got {n}"
        )));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, Reference>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().expect("quadrature cache poisoned").get(&n) {
        return Ok(r.clone());
    }
    let r = Arc::new(legendre_nodes(n));
    cache.lock().expect("quadrature cache poisoned").insert(n, r.clone());
    Ok(r)
}

/// Newton iteration on `P_n` from the Tricomi initial guesses.
fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_deriv(n, x);
        dp = if d.is_finite() { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x decreases with i; fill symmetric pairs in ascending order.
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// Standard Gauss-Legendre rule with `n` nodes on `(-1, 1)`.
pub fn gauss_legendre_rule(n: usize) -> Result<QuadratureRule> {
    let r = reference(n)?;
    Ok(QuadratureRule {
        nodes: r.0.clone(),
        weights: r.1.clone(),
        mapping: Mapping::Identity { a: -1.0, b: 1.0 },
    })
}

impl QuadratureRule {
    /// `n`-node rule mapped onto `mapping`'s domain.
    pub fn mapped(n: usize, mapping: Mapping) -> Result<Self> {
        let r = reference(n)?;
        let (t, w) = (&r.0, &r.1);
        let (nodes, weights) = match mapping {
            Mapping::Identity { a, b } => {
                if !(a < b) || !a.is_finite() || !b.is_finite() {
                    return Err(Error::Quadrature(format!("invalid interval ({a}, {b})")));
                }
                let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
                (t.iter().map(|&s| c + r * s).collect(), w.iter().map(|&wi| r * wi).collect())
            }
            Mapping::SemiInfinite { a, scale } => {
                if !a.is_finite() || !(scale > 0.0) {
                    return Err(Error::Quadrature(format!(
                        "invalid semi-infinite map (a = {a}, scale = {scale})"
                    )));
                }
                t.iter()
                    .zip(w)
                    .map(|(&s, &wi)| {
                        let u = 0.5 * (s + 1.0);
                        let v = 1.0 - u;
                        (a + scale * u / v, 0.5 * wi * scale / (v * v))
                    })
                    .unzip()
            }
        };
        Ok(Self { nodes, weights, mapping })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mapping(&self) -> Mapping {
        self.mapping
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Plain weighted sum `Σ w_i f(x_i)`.
    pub fn apply<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let mut sum = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(x)?;
            if !v.is_finite() {
                return Err(Error::Quadrature(format!("integrand is {v} at node x = {x}")));
            }
            sum += w * v;
        }
        Ok(sum)
    }
}

fn with_doubling<F>(n: usize, mapping: Mapping, mut f: F) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    let coarse = QuadratureRule::mapped(n, mapping)?.apply(&mut f)?;
    let fine_n = (2 * n).min(MAX_NODES);
    let fine = QuadratureRule::mapped(fine_n, mapping)?.apply(&mut f)?;
    Ok(Integral { value: coarse, error_estimate: (fine - coarse).abs() })
}

/// `∫_a^b f` with the node count of `rule`; the error estimate compares
/// against the rule with twice as many nodes.
pub fn integrate<F>(f: F, a: f64, b: f64, rule: &QuadratureRule) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    with_doubling(rule.len(), Mapping::Identity { a, b }, f)
}

/// `∫_a^∞ f` on the rational map with unit scale and the default node count.
pub fn integrate_semi_infinite<F>(f: F, a: f64) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    integrate_semi_infinite_with(f, a, 1.0, DEFAULT_NODES)
}

pub fn integrate_semi_infinite_with<F>(f: F, a: f64, scale: f64, n: usize) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    let r = with_doubling(n, Mapping::SemiInfinite { a, scale }, f)?;
    if r.error_estimate > DECAY_TOL * r.value.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Quadrature(format!(
            "semi-infinite integrand does not decay fast enough (value {}, error estimate {})",
            r.value, r.error_estimate
        )));
    }
    Ok(r)
}

/// Cut-off beyond which `e^{-x²}·x^{2(g+ℓ)}` drops below `1e-16` of its peak.
pub fn truncation_point(g: f64, ell: u32) -> f64 {
    let p = g + ell as f64;
    let log_peak = if p > 0.0 { p * (p.ln() - 1.0) } else { 0.0 };
    let mut x = p.sqrt().max(1.0);
    while -x * x + 2.0 * p * x.ln() - log_peak > 16.0 * -std::f64::consts::LN_10 {
        x += 0.05;
    }
    x
}

/// Rule covering the whole domain of `params`: the semi-infinite map for the
/// Laguerre families, the clipped interval `(ε, π/2 − ε)` for the Jacobi ones.
pub fn domain_rule(params: &ModelParams, n: usize) -> Result<QuadratureRule> {
    let mapping = if params.family.is_laguerre() {
        Mapping::SemiInfinite { a: 0.0, scale: 1.0 }
    } else {
        Mapping::Identity { a: JACOBI_CLIP, b: std::f64::consts::FRAC_PI_2 - JACOBI_CLIP }
    };
    QuadratureRule::mapped(n, mapping)
}

/// `∫ f` over the full domain of `params` with the default node count.
pub fn integrate_domain<F>(params: &ModelParams, f: F) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mapping = domain_rule(params, 1)?.mapping();
    with_doubling(DEFAULT_NODES, mapping, f)
}

/// Gram matrix `G_{mn} = ∫ φ_{ℓ,m} φ_{ℓ,n} dx` for `m, n ≤ n_max`.
pub fn orthonormality_matrix(params: &ModelParams, n_max: u32) -> Result<Vec<Vec<f64>>> {
    gram_matrix(params, n_max, 1.0)
}

/// Gram matrix with every eigenfunction scaled by `norm_scale`.
pub fn gram_matrix(params: &ModelParams, n_max: u32, norm_scale: f64) -> Result<Vec<Vec<f64>>> {
    if n_max > 20 {
        return Err(Error::Config(format!("n_max must be <= 20, got {n_max}")));
    }
    let rule = domain_rule(params, DEFAULT_NODES)?;
    let size = n_max as usize + 1;
    let mut values = vec![vec![0.0; rule.len()]; size];
    for (j, &x) in rule.nodes().iter().enumerate() {
        for (row, v) in values.iter_mut().zip(eigenfunctions(params, n_max, x)?) {
            row[j] = norm_scale * v;
        }
    }
    let mut gram = vec![vec![0.0; size]; size];
    for m in 0..size {
        for n in m..size {
            let s: f64 = rule
                .weights()
                .iter()
                .zip(values[m].iter().zip(&values[n]))
                .map(|(w, (a, b))| w * a * b)
                .sum();
            gram[m][n] = s;
            gram[n][m] = s;
        }
    }
    Ok(gram)
}

/// Largest entry of `|G − I|`.
pub fn identity_deviation(gram: &[Vec<f64>]) -> f64 {
    gram.iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &v)| (v - if i == j { 1.0 } else { 0.0 }).abs()))
        .fold(0.0, f64::max)
}
