//! Euler-Maruyama sampling of `dX = D(X) dt + √2 dW` and histogram
//! comparison against reference densities.
//!
//! Path `i` draws its normals from its own ChaCha8 stream keyed by
//! `(seed, i)`, so the result does not depend on how paths are scheduled.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{drift, DomainSpec};
use crate::xpoly::ModelParams;

pub const DEFAULT_DT: f64 = 1e-4;
pub const MAX_RESAMPLE: usize = 100;
/// Largest tolerated fraction of samples outside the histogram range.
pub const MAX_ESCAPE_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Fold a step that leaves the domain back across the boundary.
    Reflect,
    /// Redraw the normal increment, up to [`MAX_RESAMPLE`] times.
    #[default]
    RejectResample,
}

impl BoundaryPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Reflect => "reflect",
            Self::RejectResample => "reject_resample",
        }
    }
}

impl fmt::Display for BoundaryPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reflect" => Ok(Self::Reflect),
            "reject_resample" | "reject-resample" => Ok(Self::RejectResample),
            _ => Err(Error::Config(format!(
                "unknown boundary policy '{s}' (expected reflect or reject_resample)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdeConfig {
    pub dt: f64,
    pub n_paths: usize,
    /// Strictly increasing positive observation times.
    pub t_samples: Vec<f64>,
    pub seed: u64,
    pub boundary_policy: BoundaryPolicy,
}

impl SdeConfig {
    pub fn new(dt: f64, n_paths: usize, t_samples: Vec<f64>, seed: u64) -> Self {
        Self { dt, n_paths, t_samples, seed, boundary_policy: BoundaryPolicy::default() }
    }

    pub fn with_policy(mut self, policy: BoundaryPolicy) -> Self {
        self.boundary_policy = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be >= 1".into()));
        }
        let first = match self.t_samples.first() {
            Some(&t) => t,
            None => return Err(Error::Config("at least one observation time is required".into())),
        };
        if !(first.is_finite() && first > 0.0) {
            return Err(Error::Config(format!("observation times must be positive, got {first}")));
        }
        if !self.t_samples.windows(2).all(|w| w[0] < w[1] && w[1].is_finite()) {
            return Err(Error::Config("observation times must be strictly increasing".into()));
        }
        if self.dt > first / 10.0 {
            return Err(Error::Config(format!(
                "dt = {} exceeds min(t)/10 = {}",
                self.dt,
                first / 10.0
            )));
        }
        Ok(())
    }
}

/// Path positions at each observation time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdeSamples {
    pub t_samples: Vec<f64>,
    /// `positions[k][i]`: path `i` at `t_samples[k]`.
    pub positions: Vec<Vec<f64>>,
    /// Total number of redraws triggered by the boundary policy.
    pub resamples: u64,
}

/// Simulate the Langevin process of `params` from `x0`.
pub fn simulate(params: &ModelParams, x0: f64, config: &SdeConfig) -> Result<SdeSamples> {
    simulate_with_drift(DomainSpec::of(params), |x| drift(params, x), x0, config)
}

/// Same scheme with an arbitrary drift; used for surrogate processes.
pub fn simulate_with_drift<F>(
    domain: DomainSpec,
    drift: F,
    x0: f64,
    config: &SdeConfig,
) -> Result<SdeSamples>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    config.validate()?;
    if !domain.contains(x0) {
        return Err(Error::Domain(format!(
            "x0 = {x0} is not inside ({}, {})",
            domain.lower, domain.upper
        )));
    }
    // Each observation interval is split into equal steps no longer than dt.
    let mut schedule = Vec::with_capacity(config.t_samples.len());
    let mut prev = 0.0;
    for &t in &config.t_samples {
        let steps = ((t - prev) / config.dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        schedule.push((steps, (t - prev) / steps as f64));
        prev = t;
    }

    let paths = (0..config.n_paths)
        .into_par_iter()
        .map(|i| run_path(&domain, &drift, x0, config, &schedule, i))
        .collect::<Result<Vec<_>>>()?;

    let mut positions = vec![Vec::with_capacity(config.n_paths); schedule.len()];
    let mut resamples = 0;
    for (values, r) in paths {
        resamples += r;
        for (row, v) in positions.iter_mut().zip(values) {
            row.push(v);
        }
    }
    Ok(SdeSamples { t_samples: config.t_samples.clone(), positions, resamples })
}

fn run_path<F>(
    domain: &DomainSpec,
    drift: &F,
    x0: f64,
    config: &SdeConfig,
    schedule: &[(usize, f64)],
    path: usize,
) -> Result<(Vec<f64>, u64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(path as u64);
    let mut x = x0;
    let mut out = Vec::with_capacity(schedule.len());
    let mut redraws = 0u64;
    let mut step = 0usize;
    for &(steps, h) in schedule {
        let amp = (2.0 * h).sqrt();
        for _ in 0..steps {
            let mean = x + drift(x)? * h;
            if !mean.is_finite() {
                return Err(Error::NonFinite(format!(
                    "path {path} became non-finite at step {step}; dt is too large for this drift"
                )));
            }
            let z: f64 = rng.sample(StandardNormal);
            let mut next = mean + amp * z;
            if !domain.contains(next) {
                next = match config.boundary_policy {
                    BoundaryPolicy::Reflect => reflect(domain, next),
                    BoundaryPolicy::RejectResample => {
                        let mut accepted = None;
                        for _ in 0..MAX_RESAMPLE {
                            redraws += 1;
                            let z: f64 = rng.sample(StandardNormal);
                            let y = mean + amp * z;
                            if domain.contains(y) {
                                accepted = Some(y);
                                break;
                            }
                        }
                        accepted.ok_or(Error::ResampleExhausted { path, step })?
                    }
                };
            }
            x = next;
            step += 1;
        }
        out.push(x);
    }
    Ok((out, redraws))
}

/// Fold `x` back into the open domain by repeated mirror reflection.
fn reflect(domain: &DomainSpec, x: f64) -> f64 {
    let a = domain.lower;
    let y = if domain.upper.is_finite() {
        let w = domain.upper - a;
        let r = (x - a).rem_euclid(2.0 * w);
        a + if r > w { 2.0 * w - r } else { r }
    } else {
        a + (x - a).abs()
    };
    if domain.contains(y) {
        y
    } else {
        // Landed exactly on a wall: nudge inward.
        let tiny = f64::EPSILON * a.abs().max(1.0);
        if y <= a {
            a + tiny
        } else {
            domain.upper - tiny
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramEstimate {
    pub bin_edges: Vec<f64>,
    /// Probability mass per bin divided by the bin width.
    pub density: Vec<f64>,
    /// Binomial standard error `√(p(1−p)/n)/width`; an empty bin uses one
    /// count for `p` so that its error is never zero.
    pub std_err: Vec<f64>,
    pub counts: Vec<u64>,
    /// Samples outside `[first edge, last edge]`.
    pub escaped: usize,
    pub total: usize,
}

impl HistogramEstimate {
    pub fn widths(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// `bins` equal bins over `[a, b]`.
pub fn uniform_edges(a: f64, b: f64, bins: usize) -> Result<Vec<f64>> {
    if bins == 0 || !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Config(format!("cannot build {bins} bins over [{a}, {b}]")));
    }
    Ok((0..=bins).map(|i| a + (b - a) * i as f64 / bins as f64).collect())
}

/// Normalized histogram of `samples`.
///
/// Escaped samples are counted but dropped; more than 0.1 % escaping is an
/// error. The density is normalized over the samples that were kept.
pub fn histogram(samples: &[f64], bin_edges: &[f64]) -> Result<HistogramEstimate> {
    if samples.is_empty() {
        return Err(Error::Config("histogram needs at least one sample".into()));
    }
    if bin_edges.len() < 2 || !bin_edges.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Config("bin edges must be strictly increasing with >= 2 entries".into()));
    }
    let bins = bin_edges.len() - 1;
    let (lo, hi) = (bin_edges[0], bin_edges[bins]);
    let mut counts = vec![0u64; bins];
    let mut escaped = 0;
    for &s in samples {
        if !(s >= lo && s <= hi) {
            escaped += 1;
            continue;
        }
        let k = bin_edges.partition_point(|&e| e <= s).clamp(1, bins) - 1;
        counts[k] += 1;
    }
    if escaped as f64 > MAX_ESCAPE_FRACTION * samples.len() as f64 {
        return Err(Error::HistogramEscape { escaped, total: samples.len() });
    }
    let n = (samples.len() - escaped) as f64;
    if n == 0.0 {
        return Err(Error::HistogramEscape { escaped, total: samples.len() });
    }
    let mut density = Vec::with_capacity(bins);
    let mut std_err = Vec::with_capacity(bins);
    for (k, &c) in counts.iter().enumerate() {
        let w = bin_edges[k + 1] - bin_edges[k];
        let p = c as f64 / n;
        let pe = (c.max(1) as f64 / n).min(1.0);
        density.push(p / w);
        std_err.push((pe * (1.0 - pe) / n).sqrt() / w);
    }
    Ok(HistogramEstimate {
        bin_edges: bin_edges.to_vec(),
        density,
        std_err,
        counts,
        escaped,
        total: samples.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub l1_distance: f64,
    pub max_sigma_deviation: f64,
}

/// Bin averages of `pdf` by 8-point Gauss-Legendre per bin.
pub fn bin_averages<F>(bin_edges: &[f64], pdf: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    let rule = crate::quadrature::gauss_legendre_rule(8)?;
    bin_edges
        .windows(2)
        .map(|e| {
            let (c, r) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
            let mut s = 0.0;
            for (&u, &w) in rule.nodes().iter().zip(rule.weights()) {
                s += w * pdf(c + r * u)?;
            }
            Ok(0.5 * s)
        })
        .collect()
}

/// L1 distance and largest standardized deviation between a histogram and
/// the bin averages of `pdf`.
pub fn compare<F>(estimate: &HistogramEstimate, pdf: F) -> Result<Comparison>
where
    F: Fn(f64) -> Result<f64>,
{
    let reference = bin_averages(&estimate.bin_edges, pdf)?;
    let mut l1 = 0.0;
    let mut sigma = 0.0f64;
    for (k, w) in estimate.widths().into_iter().enumerate() {
        let d = (estimate.density[k] - reference[k]).abs();
        l1 += d * w;
        sigma = sigma.max(d / estimate.std_err[k]);
    }
    Ok(Comparison { l1_distance: l1, max_sigma_deviation: sigma })
}

/// `Σ |a_i − b_i|·width_i` between two histograms on the same edges.
pub fn histogram_distance(a: &HistogramEstimate, b: &HistogramEstimate) -> Result<f64> {
    if a.bin_edges != b.bin_edges {
        return Err(Error::Config("histograms have different bin edges".into()));
    }
    Ok(a.widths()
        .iter()
        .zip(a.density.iter().zip(&b.density))
        .map(|(w, (x, y))| (x - y).abs() * w)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xpoly::Family;

    #[test]
    fn config_validation() {
        assert!(SdeConfig::new(1e-3, 10, vec![0.1, 0.2], 1).validate().is_ok());
        assert!(SdeConfig::new(1e-2, 10, vec![0.05], 1).validate().is_err());
        assert!(SdeConfig::new(1e-3, 0, vec![0.1], 1).validate().is_err());
        assert!(SdeConfig::new(1e-3, 10, vec![0.2, 0.1], 1).validate().is_err());
        assert!(SdeConfig::new(1e-3, 10, vec![], 1).validate().is_err());
        assert!(SdeConfig::new(-1e-3, 10, vec![0.1], 1).validate().is_err());
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("reflect".parse::<BoundaryPolicy>().unwrap(), BoundaryPolicy::Reflect);
        assert_eq!(
            "reject_resample".parse::<BoundaryPolicy>().unwrap(),
            BoundaryPolicy::RejectResample
        );
        assert!("absorb".parse::<BoundaryPolicy>().is_err());
    }

    #[test]
    fn pure_diffusion_moments() {
        let domain = DomainSpec { lower: -1e9, upper: 1e9 };
        let cfg = SdeConfig::new(1e-2, 20_000, vec![0.5, 1.0], 7);
        let s = simulate_with_drift(domain, |_| Ok(0.0), 3.0, &cfg).unwrap();
        for (k, &t) in s.t_samples.iter().enumerate() {
            let xs = &s.positions[k];
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let var_se = 2.0 * t * (2.0 / (n - 1.0)).sqrt();
            assert!((mean - 3.0).abs() < 3.0 * (2.0 * t / n).sqrt());
            assert!((var - 2.0 * t).abs() < 3.0 * var_se, "t={t}: var={var}");
        }
    }

    #[test]
    fn reflection_folds_into_domain() {
        let d = DomainSpec { lower: 0.0, upper: 1.0 };
        assert!((reflect(&d, -0.25) - 0.25).abs() < 1e-15);
        assert!((reflect(&d, 1.25) - 0.75).abs() < 1e-15);
        assert!((reflect(&d, 2.25) - 0.25).abs() < 1e-15);
        let half = DomainSpec { lower: 0.0, upper: f64::INFINITY };
        assert_eq!(reflect(&half, -3.0), 3.0);
        assert!(half.contains(reflect(&half, 0.0)));
    }

    #[test]
    fn reflect_policy_keeps_paths_inside() {
        let p = ModelParams::laguerre(Family::L1, 0.5, 0).unwrap();
        let cfg = SdeConfig::new(1e-3, 500, vec![0.1], 3).with_policy(BoundaryPolicy::Reflect);
        let s = simulate(&p, 0.05, &cfg).unwrap();
        assert!(s.positions[0].iter().all(|&x| x > 0.0 && x.is_finite()));
    }

    #[test]
    fn resample_exhaustion_is_reported() {
        let domain = DomainSpec { lower: 0.0, upper: 1.0 };
        let cfg = SdeConfig::new(1e-3, 1, vec![0.1], 0);
        let r = simulate_with_drift(domain, |_| Ok(1e6), 0.5, &cfg);
        assert!(matches!(r, Err(Error::ResampleExhausted { .. })));
    }

    #[test]
    fn seed_determinism() {
        let p = ModelParams::laguerre(Family::L1, 0.5, 5).unwrap();
        let cfg = SdeConfig::new(1e-3, 64, vec![0.05, 0.1], 42);
        let a = simulate(&p, 1.2, &cfg).unwrap();
        let b = simulate(&p, 1.2, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate(&p, 1.2, &SdeConfig { seed: 43, ..cfg.clone() }).unwrap();
        assert_ne!(a.positions, c.positions);
        // A subset of paths reproduces the leading paths of the full run.
        let small = simulate(&p, 1.2, &SdeConfig { n_paths: 8, ..cfg }).unwrap();
        assert_eq!(small.positions[1][..], a.positions[1][..8]);
    }

    #[test]
    fn histogram_single_bin() {
        let edges = uniform_edges(0.0, 2.0, 4).unwrap();
        let h = histogram(&[0.6, 0.7, 0.9], &edges).unwrap();
        assert_eq!(h.density, vec![0.0, 2.0, 0.0, 0.0]);
        assert_eq!(h.counts, vec![0, 3, 0, 0]);
        assert_eq!(h.std_err[1], 0.0);
        assert!([0, 2, 3].iter().all(|&k| h.std_err[k] > 0.0));
    }

    #[test]
    fn histogram_normalization_and_escape() {
        let edges = uniform_edges(0.0, 1.0, 10).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|i| (i as f64 + 0.5) / 10_000.0).collect();
        let h = histogram(&xs, &edges).unwrap();
        let mass: f64 = h.density.iter().zip(h.widths()).map(|(d, w)| d * w).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        for (&d, &e) in h.density.iter().zip(&h.std_err) {
            assert!((d - 1.0).abs() <= 3.0 * e);
        }
        let mut bad = xs.clone();
        bad.extend(std::iter::repeat(5.0).take(20));
        assert!(matches!(histogram(&bad, &edges), Err(Error::HistogramEscape { escaped: 20, .. })));
        let mut ok = xs;
        ok.extend(std::iter::repeat(5.0).take(5));
        assert_eq!(histogram(&ok, &edges).unwrap().escaped, 5);
    }

    #[test]
    fn compare_against_own_bin_averages() {
        let edges = uniform_edges(0.0, 3.0, 30).unwrap();
        let f = |x: f64| Ok(2.0 * x * (-x * x).exp());
        let avg = bin_averages(&edges, f).unwrap();
        let counts = vec![1; 30];
        let h = HistogramEstimate {
            bin_edges: edges.clone(),
            density: avg,
            std_err: vec![1.0; 30],
            counts,
            escaped: 0,
            total: 30,
        };
        let c = compare(&h, f).unwrap();
        assert!(c.l1_distance < 1e-15 && c.max_sigma_deviation < 1e-15);
        assert_eq!(histogram_distance(&h, &h).unwrap(), 0.0);
    }
}
