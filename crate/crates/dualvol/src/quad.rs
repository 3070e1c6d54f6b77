//! Quadrature on 𝕊^{n−1}, Gaussian sampling, and Gaussian measure estimates.
//!
//! Every rule stores its nodes in adjacent antipodal pairs and sums each pair
//! first, which makes all rules exact (bitwise zero) on odd integrands.
//! Reductions use a fixed pairwise summation order, so results are identical
//! whether node evaluation ran serially or in parallel.

use crate::bodies::{ConvexBody, Direction, RadialEvaluator, Vector};
use crate::error::{Error, Result};
use crate::numeric::{pairwise_sum, sphere_surface};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Quadrature scheme tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Equispaced angles on the circle (n = 2 only); spectral accuracy for
    /// smooth integrands, O(m⁻²) across radial kinks.
    Trapezoid,
    /// Antipodally mirrored Fibonacci spiral (n = 3 only).
    Fibonacci,
    /// Uniform random directions plus antipodes (any n).
    McAntipodal,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trapezoid" => Ok(Scheme::Trapezoid),
            "fibonacci" => Ok(Scheme::Fibonacci),
            "mc-antipodal" => Ok(Scheme::McAntipodal),
            other => Err(Error::BadScheme(format!("unknown scheme {other:?}"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Scheme::Trapezoid => "trapezoid",
            Scheme::Fibonacci => "fibonacci",
            Scheme::McAntipodal => "mc-antipodal",
        };
        f.write_str(s)
    }
}

/// Nodes and weights on 𝕊^{n−1}. Weights carry surface measure: they sum to
/// n·ω_n. Nodes are stored as adjacent antipodal pairs.
#[derive(Clone, Debug)]
pub struct SphereRule {
    dim: usize,
    scheme: Scheme,
    nodes: Vec<Direction>,
    weights: Vec<f64>,
    seed: Option<u64>,
}

impl SphereRule {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn nodes(&self) -> &[Direction] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self.scheme, Scheme::McAntipodal)
    }

    /// Default scheme and size per dimension: trapezoid m = 4096 (n = 2),
    /// fibonacci m = 20000 (n = 3), mc-antipodal m = 100000 (n ≥ 4).
    pub fn default_for_dim(n: usize, seed: u64) -> Result<Self> {
        match n {
            2 => sphere_rule(2, Scheme::Trapezoid, 4096, seed),
            3 => sphere_rule(3, Scheme::Fibonacci, 20_000, seed),
            _ => sphere_rule(n, Scheme::McAntipodal, 100_000, seed),
        }
    }

    /// One-line metadata string for manifests and result records.
    pub fn meta(&self) -> String {
        match self.seed {
            Some(s) => format!("{}:n={},m={},seed={}", self.scheme, self.dim, self.len(), s),
            None => format!("{}:n={},m={}", self.scheme, self.dim, self.len()),
        }
    }

    /// CSV dump (node coordinates + weight) for audit.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.dim {
            out.push_str(&format!("u{i},"));
        }
        out.push_str("weight\n");
        for (node, w) in self.nodes.iter().zip(&self.weights) {
            for c in node.as_vector().iter() {
                out.push_str(&format!("{c:.17e},"));
            }
            out.push_str(&format!("{w:.17e}\n"));
        }
        out
    }
}

/// One uniformly distributed unit vector.
pub fn random_direction<R: Rng>(n: usize, rng: &mut R) -> Vector {
    loop {
        let v = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-6 {
            return v / norm;
        }
    }
}

/// Builds a quadrature rule. `m` counts equispaced half-circle angles for the
/// trapezoid scheme and total nodes (even) for the antipodal schemes.
pub fn sphere_rule(n: usize, scheme: Scheme, m: usize, seed: u64) -> Result<SphereRule> {
    if m == 0 {
        return Err(Error::BadScheme("rule size must be positive".into()));
    }
    match scheme {
        Scheme::Trapezoid => {
            if n != 2 {
                return Err(Error::BadScheme(format!(
                    "trapezoid rule is for n = 2, got n = {n}"
                )));
            }
            let mut nodes = Vec::with_capacity(2 * m);
            let pi = std::f64::consts::PI;
            for k in 0..m {
                let theta = pi * k as f64 / m as f64;
                let u = Vector::from_row_slice(&[theta.cos(), theta.sin()]);
                let v = -&u;
                nodes.push(Direction::new(u).expect("trig node is unit"));
                nodes.push(Direction::new(v).expect("trig node is unit"));
            }
            let w = pi / m as f64; // 2π split over 2m nodes
            Ok(SphereRule {
                dim: 2,
                scheme,
                weights: vec![w; nodes.len()],
                nodes,
                seed: None,
            })
        }
        Scheme::Fibonacci => {
            if n != 3 {
                return Err(Error::BadScheme(format!(
                    "fibonacci rule is for n = 3, got n = {n}"
                )));
            }
            if m % 2 != 0 {
                return Err(Error::BadScheme("antipodal rules need an even node count".into()));
            }
            let half = m / 2;
            let golden_angle = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
            let mut nodes = Vec::with_capacity(m);
            for i in 0..half {
                // spiral over the upper hemisphere, mirrored below
                let z = (i as f64 + 0.5) / half as f64;
                let rho = (1.0 - z * z).max(0.0).sqrt();
                let phi = golden_angle * i as f64;
                let u = Vector::from_row_slice(&[rho * phi.cos(), rho * phi.sin(), z]);
                let u = &u / u.norm();
                let v = -&u;
                nodes.push(Direction::new(u).expect("normalized"));
                nodes.push(Direction::new(v).expect("normalized"));
            }
            let w = sphere_surface(3) / m as f64;
            Ok(SphereRule {
                dim: 3,
                scheme,
                weights: vec![w; nodes.len()],
                nodes,
                seed: None,
            })
        }
        Scheme::McAntipodal => {
            if m % 2 != 0 {
                return Err(Error::BadScheme("antipodal rules need an even node count".into()));
            }
            let half = m / 2;
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut nodes = Vec::with_capacity(m);
            for _ in 0..half {
                let u = random_direction(n, &mut rng);
                let v = -&u;
                nodes.push(Direction::new(u).expect("normalized"));
                nodes.push(Direction::new(v).expect("normalized"));
            }
            let w = sphere_surface(n) / m as f64;
            Ok(SphereRule {
                dim: n,
                scheme,
                weights: vec![w; nodes.len()],
                nodes,
                seed: Some(seed),
            })
        }
    }
}

/// Integral estimate with a standard error (0 for deterministic rules).
#[derive(Clone, Copy, Debug)]
pub struct SphereIntegral {
    pub value: f64,
    pub stderr: f64,
}

const BATCHES: usize = 20;

/// Evaluates `f` at every node (in parallel, order-preserving).
pub fn evaluate_nodes<F>(rule: &SphereRule, f: F) -> Result<Vec<f64>>
where
    F: Fn(&Vector) -> Result<f64> + Sync,
{
    let values: Vec<Result<f64>> = rule
        .nodes
        .par_iter()
        .map(|u| f(u.as_vector()))
        .collect();
    let mut out = Vec::with_capacity(values.len());
    for (i, v) in values.into_iter().enumerate() {
        let v = v?;
        if !v.is_finite() {
            return Err(Error::NonFiniteIntegrand { index: i });
        }
        out.push(v);
    }
    Ok(out)
}

/// Per-batch integral estimates (20 contiguous pair blocks, each rescaled to
/// the full surface measure). `None` for deterministic rules or rules with
/// too few pairs. Batches of coupled quantities computed from shared nodes
/// stay aligned, which is what makes margin uncertainties meaningful.
pub fn batch_integrals(rule: &SphereRule, values: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(values.len(), rule.len(), "value count must match node count");
    let pairs = rule.len() / 2;
    if !rule.is_stochastic() || pairs < BATCHES {
        return None;
    }
    let pair_sums = pair_sums(rule, values);
    let total_w: f64 = pairwise_sum(&rule.weights);
    let mut estimates = Vec::with_capacity(BATCHES);
    let base = pairs / BATCHES;
    let extra = pairs % BATCHES;
    let mut start = 0;
    for b in 0..BATCHES {
        let len = base + usize::from(b < extra);
        let chunk = &pair_sums[start..start + len];
        let wsum: f64 = (start..start + len)
            .map(|i| rule.weights[2 * i] + rule.weights[2 * i + 1])
            .sum();
        estimates.push(pairwise_sum(chunk) * total_w / wsum);
        start += len;
    }
    Some(estimates)
}

fn pair_sums(rule: &SphereRule, values: &[f64]) -> Vec<f64> {
    (0..rule.len() / 2)
        .map(|i| {
            rule.weights[2 * i] * values[2 * i] + rule.weights[2 * i + 1] * values[2 * i + 1]
        })
        .collect()
}

/// Integral over every other antipodal pair, rescaled to full surface
/// measure. For the trapezoid rule this is exactly the half-size rule;
/// comparing it with the full integral gives a discretization-error estimate
/// for deterministic schemes.
pub fn half_rule_integral(rule: &SphereRule, values: &[f64]) -> f64 {
    assert_eq!(values.len(), rule.len(), "value count must match node count");
    let pairs = rule.len() / 2;
    let mut kept = Vec::with_capacity(pairs / 2 + 1);
    let mut kept_w = 0.0;
    for i in (0..pairs).step_by(2) {
        kept.push(
            rule.weights[2 * i] * values[2 * i] + rule.weights[2 * i + 1] * values[2 * i + 1],
        );
        kept_w += rule.weights[2 * i] + rule.weights[2 * i + 1];
    }
    let total_w: f64 = pairwise_sum(&rule.weights);
    pairwise_sum(&kept) * total_w / kept_w
}

/// Sample standard error of the mean of batch estimates.
pub fn batch_stderr(estimates: &[f64]) -> f64 {
    let b = estimates.len() as f64;
    let mean = pairwise_sum(estimates) / b;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (b - 1.0);
    (var / b).sqrt()
}

/// Weighted sum of precomputed node values, pair-first so odd integrands
/// cancel exactly; batch-means stderr for stochastic rules.
pub fn integral_from_values(rule: &SphereRule, values: &[f64]) -> SphereIntegral {
    assert_eq!(values.len(), rule.len(), "value count must match node count");
    let value = pairwise_sum(&pair_sums(rule, values));
    let stderr = match batch_integrals(rule, values) {
        Some(estimates) => batch_stderr(&estimates),
        None => 0.0,
    };
    SphereIntegral { value, stderr }
}

/// Σ w_i f(u_i) over the rule.
pub fn integrate_sphere<F>(rule: &SphereRule, f: F) -> Result<SphereIntegral>
where
    F: Fn(&Vector) -> Result<f64> + Sync,
{
    let values = evaluate_nodes(rule, f)?;
    Ok(integral_from_values(rule, &values))
}

/// Points drawn from the standard Gaussian γ_n, reproducible from
/// (dim, count, seed).
#[derive(Clone, Debug)]
pub struct GaussianSample {
    dim: usize,
    seed: u64,
    points: Vec<Vector>,
}

impl GaussianSample {
    pub fn new(dim: usize, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let points = (0..count)
            .map(|_| Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        Self { dim, seed, points }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn meta(&self) -> String {
        format!("gaussian:n={},N={},seed={}", self.dim, self.len(), self.seed)
    }
}

/// Monte Carlo estimate of γ_n(tK) as the fraction of sample points with
/// gauge ≤ t; stderr is the binomial √(p̂(1−p̂)/N).
pub fn gaussian_measure_mc(
    body: &ConvexBody,
    t: f64,
    sample: &GaussianSample,
) -> Result<(f64, f64)> {
    if body.dim() != sample.dim() {
        return Err(Error::DimensionMismatch("body vs sample dimension".into()));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidConfig(format!("threshold t must be positive, got {t}")));
    }
    let eval = RadialEvaluator::new(body)?;
    let hits: Vec<Result<u64>> = sample
        .points
        .par_iter()
        .map(|x| Ok(u64::from(eval.gauge(x)? <= t)))
        .collect();
    let mut count = 0u64;
    for h in hits {
        count += h?;
    }
    let n = sample.len() as f64;
    let p = count as f64 / n;
    Ok((p, (p * (1.0 - p) / n).sqrt()))
}
