//! Dual quermassintegrals and entropies in the three equivalent
//! formulations: sphere integral, Gaussian moment, and layer cake.
//!
//! Conventions. Ṽ_q(K) = (1/n)∫ ρ_K^q du and V̄_q(K) = (Ṽ_q/ω_n)^{1/q} with a
//! dedicated entropy branch at q = 0: V̄₀ = exp(E(K)/(n·ω_n)),
//! E(K) = ∫ log ρ_K du (an un-normalized surface integral). The Gaussian
//! moment ∫ ρ_K^q dγ_n equals c_{n,q}·Ṽ_q for q < n.

use crate::bodies::{ConvexBody, RadialEvaluator};
use crate::error::{Error, Result};
use crate::numeric::{adaptive_simpson, ln_gamma, pairwise_sum, sphere_surface, unit_ball_volume};
use crate::quad::{self, GaussianSample, SphereRule};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::OnceLock;

/// Volume of the n-dimensional unit ball.
pub fn omega(n: usize) -> f64 {
    unit_ball_volume(n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Sphere,
    Gaussian,
    LayerCake,
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Formulation::Sphere => f.write_str("sphere"),
            Formulation::Gaussian => f.write_str("gaussian"),
            Formulation::LayerCake => f.write_str("layercake"),
        }
    }
}

/// One dual-volume estimate. `stderr` is 0 for deterministic rules.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DualVolumeResult {
    pub q: f64,
    pub value: f64,
    pub stderr: f64,
    pub formulation: Formulation,
}

impl DualVolumeResult {
    /// JSON record with body and rule fingerprints attached.
    pub fn to_record(&self, body_hash: &str, rule_meta: &str) -> serde_json::Value {
        serde_json::json!({
            "body_hash": body_hash,
            "q": self.q,
            "formulation": self.formulation,
            "value": self.value,
            "stderr": self.stderr,
            "rule_meta": rule_meta,
        })
    }
}

/// Dual entropy estimate (surface integral of log ρ, or its Gaussian
/// counterpart).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EntropyResult {
    pub value: f64,
    pub stderr: f64,
}

/// Radial values of one body on one rule's nodes. Computing the profile once
/// lets many exponents share the expensive evaluations, and shared nodes make
/// differences of results meaningful beyond the raw quadrature error.
pub struct SphereProfile<'a> {
    rule: &'a SphereRule,
    rho: Vec<f64>,
}

impl<'a> SphereProfile<'a> {
    pub fn new(body: &ConvexBody, rule: &'a SphereRule) -> Result<Self> {
        if body.dim() != rule.dim() {
            return Err(Error::DimensionMismatch("body vs rule dimension".into()));
        }
        let eval = RadialEvaluator::new(body)?;
        let rho = quad::evaluate_nodes(rule, |u| eval.eval(u))?;
        Ok(Self { rule, rho })
    }

    pub fn rule(&self) -> &SphereRule {
        self.rule
    }

    pub fn radial_values(&self) -> &[f64] {
        &self.rho
    }

    /// Ṽ_q(K) = (1/n)∫ ρ^q du; at q = 0 this is ω_n exactly.
    pub fn dual_querm(&self, q: f64) -> DualVolumeResult {
        let n = self.rule.dim() as f64;
        if q == 0.0 {
            return DualVolumeResult {
                q,
                value: omega(self.rule.dim()),
                stderr: 0.0,
                formulation: Formulation::Sphere,
            };
        }
        let vals: Vec<f64> = self.rho.iter().map(|r| r.powf(q)).collect();
        let integral = quad::integral_from_values(self.rule, &vals);
        DualVolumeResult {
            q,
            value: integral.value / n,
            stderr: integral.stderr / n,
            formulation: Formulation::Sphere,
        }
    }

    /// Per-batch Ṽ_q estimates for stochastic rules (margin uncertainty).
    pub fn batch_querms(&self, q: f64) -> Option<Vec<f64>> {
        let n = self.rule.dim() as f64;
        let vals: Vec<f64> = self.rho.iter().map(|r| r.powf(q)).collect();
        quad::batch_integrals(self.rule, &vals)
            .map(|batches| batches.into_iter().map(|b| b / n).collect())
    }

    /// Per-batch E(K) estimates for stochastic rules.
    pub fn batch_entropies(&self) -> Option<Vec<f64>> {
        let vals: Vec<f64> = self.rho.iter().map(|r| r.ln()).collect();
        quad::batch_integrals(self.rule, &vals)
    }

    /// Ṽ_q from every other node pair; the gap to the full value estimates
    /// the discretization error of deterministic rules.
    pub fn dual_querm_half(&self, q: f64) -> f64 {
        let n = self.rule.dim() as f64;
        if q == 0.0 {
            return omega(self.rule.dim());
        }
        let vals: Vec<f64> = self.rho.iter().map(|r| r.powf(q)).collect();
        quad::half_rule_integral(self.rule, &vals) / n
    }

    /// V̄_q from the half rule.
    pub fn normalized_dual_querm_half(&self, q: f64) -> f64 {
        let n = self.rule.dim();
        if q == 0.0 {
            let vals: Vec<f64> = self.rho.iter().map(|r| r.ln()).collect();
            let e = quad::half_rule_integral(self.rule, &vals);
            return (e / sphere_surface(n)).exp();
        }
        (self.dual_querm_half(q) / omega(n)).powf(1.0 / q)
    }

    /// V̄_q(K) = (Ṽ_q/ω_n)^{1/q}, with the entropy branch at q = 0.
    pub fn normalized_dual_querm(&self, q: f64) -> DualVolumeResult {
        let n = self.rule.dim();
        if q == 0.0 {
            let e = self.entropy();
            let denom = sphere_surface(n);
            let value = (e.value / denom).exp();
            return DualVolumeResult {
                q,
                value,
                stderr: value * e.stderr / denom,
                formulation: Formulation::Sphere,
            };
        }
        let vq = self.dual_querm(q);
        let value = (vq.value / omega(n)).powf(1.0 / q);
        let stderr = if vq.value > 0.0 {
            value * vq.stderr / (q.abs() * vq.value)
        } else {
            f64::NAN
        };
        DualVolumeResult {
            q,
            value,
            stderr,
            formulation: Formulation::Sphere,
        }
    }

    /// E(K) = ∫ log ρ du.
    pub fn entropy(&self) -> EntropyResult {
        let vals: Vec<f64> = self.rho.iter().map(|r| r.ln()).collect();
        let integral = quad::integral_from_values(self.rule, &vals);
        EntropyResult {
            value: integral.value,
            stderr: integral.stderr,
        }
    }

    pub fn max_radial(&self) -> f64 {
        self.rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_radial(&self) -> f64 {
        self.rho.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Ṽ_q via the sphere formulation (one-shot wrapper over a profile).
pub fn dual_querm(body: &ConvexBody, q: f64, rule: &SphereRule) -> Result<DualVolumeResult> {
    Ok(SphereProfile::new(body, rule)?.dual_querm(q))
}

/// V̄_q via the sphere formulation.
pub fn normalized_dual_querm(
    body: &ConvexBody,
    q: f64,
    rule: &SphereRule,
) -> Result<DualVolumeResult> {
    Ok(SphereProfile::new(body, rule)?.normalized_dual_querm(q))
}

/// Dual entropy E(K).
pub fn dual_entropy(body: &ConvexBody, rule: &SphereRule) -> Result<EntropyResult> {
    Ok(SphereProfile::new(body, rule)?.entropy())
}

/// Quadrature oracle for the radial Gaussian moment ∫₀^∞ r^{n−q−1}e^{−r²/2}dr
/// (times n/(2π)^{n/2}). The substitution r = t^{1/(a+1)} with a = n−q−1
/// removes the origin singularity when a < 0.
pub fn c_constant_quadrature(n: usize, q: f64) -> Result<f64> {
    if q >= n as f64 {
        return Err(Error::ExponentOutOfRange { q, n });
    }
    let a = n as f64 - q - 1.0;
    let radial = if a >= 1.0 {
        // unit panels with a global tolerance scale: a single wide interval
        // would let the adaptive bisection converge before it sees the bump
        let f = |r: f64| r.powf(a) * (-0.5 * r * r).exp();
        let global = (0..=480)
            .map(|i| f(i as f64 / 40.0))
            .fold(1e-300_f64, f64::max);
        let mut total = 0.0;
        for k in 0..12 {
            let (lo, hi) = if k < 11 {
                (k as f64, k as f64 + 1.0)
            } else {
                (11.0, 42.0)
            };
            total += adaptive_simpson(&f, lo, hi, 1e-13 * global)?;
        }
        total
    } else {
        // for a < 1 the integrand has a singular derivative at 0; the
        // substitution r = t^β with β = 1/(a+1) makes it β·e^{−t^{2β}/2},
        // smooth all the way down
        let beta = 1.0 / (a + 1.0);
        let t_max = 42.0_f64.powf(1.0 / beta);
        adaptive_simpson(
            &|t: f64| beta * (-0.5 * t.powf(2.0 * beta)).exp(),
            0.0,
            t_max,
            1e-14 * beta,
        )?
    };
    let nf = n as f64;
    Ok(nf * radial / (2.0 * std::f64::consts::PI).powf(0.5 * nf))
}

fn c_constant_closed_form(n: usize, q: f64) -> f64 {
    let nf = n as f64;
    let s = 0.5 * (nf - q);
    // n · 2^{(n−q)/2 − 1} · Γ((n−q)/2) / (2π)^{n/2}
    (nf.ln() + (s - 1.0) * 2.0_f64.ln() + ln_gamma(s)
        - 0.5 * nf * (2.0 * std::f64::consts::PI).ln())
    .exp()
}

static C_CONSTANT_GUARD: OnceLock<std::result::Result<(), String>> = OnceLock::new();

fn ensure_c_constant_validated() {
    let res = C_CONSTANT_GUARD.get_or_init(|| {
        for n in 1..=6usize {
            for q in [-2.3, -1.0, 0.0, 0.5, n as f64 - 0.5] {
                let closed = c_constant_closed_form(n, q);
                let oracle = match c_constant_quadrature(n, q) {
                    Ok(v) => v,
                    Err(e) => return Err(format!("quadrature oracle failed: {e}")),
                };
                let rel = (closed - oracle).abs() / oracle.abs();
                if rel > 1e-10 {
                    return Err(format!(
                        "c_{{{n},{q}}} closed form {closed} disagrees with quadrature {oracle} \
                         (relative error {rel:.3e})"
                    ));
                }
            }
        }
        Ok(())
    });
    if let Err(msg) = res {
        panic!("c-constant self-test failed: {msg}");
    }
}

/// c_{n,q} with ∫ ρ_K^q dγ_n = c_{n,q}·Ṽ_q(K), valid for q < n. The closed
/// form is validated against the quadrature oracle on first use.
pub fn c_constant(n: usize, q: f64) -> Result<f64> {
    if q >= n as f64 {
        return Err(Error::ExponentOutOfRange { q, n });
    }
    ensure_c_constant_validated();
    Ok(c_constant_closed_form(n, q))
}

/// Constants (c₀, c₁) of the identity E_{γn}(K) = c₀·E(K) + c₁.
///
/// c₀ = (2π)^{−n/2}∫₀^∞ e^{−r²/2} r^{n−1} dr. The constant term carries the
/// full surface measure: c₁ = −n·ω_n·(2π)^{−n/2}∫₀^∞ (log r) e^{−r²/2} r^{n−1} dr,
/// because the angular integral of the log-radius term contributes ∫_{𝕊^{n−1}} du
/// = n·ω_n. Checked numerically in the test suite against a direct Monte
/// Carlo estimate of E_{γn}.
pub fn entropy_constants(n: usize) -> (f64, f64) {
    let nf = n as f64;
    let c0 = (0.5 * nf - 1.0) * 2.0_f64.ln() + ln_gamma(0.5 * nf)
        - 0.5 * nf * (2.0 * std::f64::consts::PI).ln();
    let c0 = c0.exp();
    // ∫ (log r) e^{−r²/2} r^{n−1} dr via r = e^t (smooth, doubly decaying)
    let log_moment = adaptive_simpson(
        &|t: f64| t * (-0.5 * (2.0 * t).exp().min(1e306)).exp() * (nf * t).exp(),
        -40.0,
        6.0,
        1e-13,
    )
    .expect("entropy constant quadrature converges");
    let c1 = -sphere_surface(n) * log_moment / (2.0 * std::f64::consts::PI).powf(0.5 * nf);
    (c0, c1)
}

/// Homogeneous radial values of one body over one Gaussian sample.
pub struct GaussianProfile<'a> {
    sample: &'a GaussianSample,
    /// ρ_K(x_i), homogeneous extension.
    rho: Vec<f64>,
    /// |x_i|, kept for circumradius/inradius estimates.
    radii: Vec<f64>,
    /// Rigorous radius bounds from the representation, when available.
    circumradius: Option<f64>,
    inradius: Option<f64>,
}

impl<'a> GaussianProfile<'a> {
    pub fn new(body: &ConvexBody, sample: &'a GaussianSample) -> Result<Self> {
        if body.dim() != sample.dim() {
            return Err(Error::DimensionMismatch("body vs sample dimension".into()));
        }
        let eval = RadialEvaluator::new(body)?;
        let rho_res: Vec<Result<f64>> = sample.points().par_iter().map(|x| eval.eval(x)).collect();
        let mut rho = Vec::with_capacity(rho_res.len());
        for (i, r) in rho_res.into_iter().enumerate() {
            let r = r?;
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::NonFiniteIntegrand { index: i });
            }
            rho.push(r);
        }
        let radii = sample.points().iter().map(|x| x.norm()).collect();
        Ok(Self {
            sample,
            rho,
            radii,
            circumradius: body.circumradius_bound(),
            inradius: body.inradius_bound(),
        })
    }

    pub fn sample(&self) -> &GaussianSample {
        self.sample
    }

    fn n(&self) -> usize {
        self.sample.dim()
    }

    /// Raw Gaussian moment (mean of ρ^q, stderr), requires q < n.
    pub fn moment(&self, q: f64) -> Result<(f64, f64)> {
        if q >= self.n() as f64 {
            return Err(Error::ExponentOutOfRange { q, n: self.n() });
        }
        let vals: Vec<f64> = self.rho.iter().map(|r| r.powf(q)).collect();
        let count = vals.len() as f64;
        let mean = pairwise_sum(&vals) / count;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
        Ok((mean, (var / count).sqrt()))
    }

    /// Ṽ_q implied by the Gaussian moment: moment / c_{n,q}.
    pub fn dual_querm(&self, q: f64) -> Result<DualVolumeResult> {
        let c = c_constant(self.n(), q)?;
        let (mean, se) = self.moment(q)?;
        Ok(DualVolumeResult {
            q,
            value: mean / c,
            stderr: se / c,
            formulation: Formulation::Gaussian,
        })
    }

    /// E_{γn}(K): mean of log ρ over the sample.
    pub fn entropy(&self) -> EntropyResult {
        let vals: Vec<f64> = self.rho.iter().map(|r| r.ln()).collect();
        let count = vals.len() as f64;
        let mean = pairwise_sum(&vals) / count;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
        EntropyResult {
            value: mean,
            stderr: (var / count).sqrt(),
        }
    }

    /// Largest/smallest unit-sphere radial value seen across the sample
    /// directions (probe estimates of circumradius and inradius).
    pub fn radial_range_estimate(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        for (r, x) in self.rho.iter().zip(&self.radii) {
            let unit = r * x;
            lo = lo.min(unit);
            hi = hi.max(unit);
        }
        (lo, hi)
    }

    /// Layer-cake route to the same Ṽ_q: 1D trapezoid over t of the Gaussian
    /// measure of the level sets {ρ^q ≥ t}, all sharing this profile's sample
    /// (monotone coupling). For q < 0 the level sets are gauge super-level
    /// sets, which is the complementary form of the decomposition.
    pub fn layer_cake(&self, q: f64, grid: &LayerCakeGrid) -> Result<DualVolumeResult> {
        Ok(self.layer_cake_detailed(q, grid)?.0)
    }

    /// Layer-cake estimate together with its discretization diagnostics.
    pub fn layer_cake_detailed(
        &self,
        q: f64,
        grid: &LayerCakeGrid,
    ) -> Result<(DualVolumeResult, LayerCakeDiagnostics)> {
        let n = self.n();
        if q == 0.0 {
            return Err(Error::InvalidConfig(
                "layer-cake moment needs q ≠ 0 (use the entropy for q = 0)".into(),
            ));
        }
        if q >= n as f64 {
            return Err(Error::ExponentOutOfRange { q, n });
        }
        if grid.cells < 8 {
            return Err(Error::InvalidConfig("layer-cake grid needs at least 8 cells".into()));
        }
        let mut sorted: Vec<f64> = self.rho.iter().map(|r| r.powf(q)).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        let count = sorted.len();

        // super-level fraction P(f ≥ t) on the sorted values
        let frac = |t: f64| -> f64 {
            let idx = sorted.partition_point(|v| *v < t);
            (count - idx) as f64 / count as f64
        };
        // geometric grid over the observed range: the level-set masses decay
        // like a power of t (ρ^q is unbounded near the origin for q > 0 and
        // far out for q < 0), and log-spaced cells keep the trapezoid honest
        // on power-law tails where uniform or quantile cells fail
        let t_lo = sorted[(count / 1000).max(1).min(count - 1)].max(1e-300);
        let t_hi = sorted[count - 1];
        let boundaries = |cells: usize| -> Vec<f64> {
            let mut ts = Vec::with_capacity(cells + 2);
            ts.push(0.0);
            if t_hi <= t_lo {
                ts.push(t_hi);
                return ts;
            }
            let ratio = (t_hi / t_lo).ln() / cells as f64;
            for j in 0..=cells {
                ts.push(t_lo * (ratio * j as f64).exp());
            }
            ts.dedup_by(|a, b| a == b);
            ts
        };
        let trapezoid = |ts: &[f64]| -> f64 {
            let mut cells = Vec::with_capacity(ts.len());
            for w in ts.windows(2) {
                cells.push((w[1] - w[0]) * 0.5 * (frac(w[0]) + frac(w[1])));
            }
            pairwise_sum(&cells)
        };
        let fine = trapezoid(&boundaries(grid.cells));
        let coarse = trapezoid(&boundaries(grid.cells / 2));
        let grid_err = (fine - coarse).abs();
        if grid_err > grid.tol * fine.abs().max(1e-300) {
            return Err(Error::GridTooCoarse {
                estimate: grid_err / fine.abs().max(1e-300),
                tol: grid.tol,
            });
        }

        // analytic bound on the true level-set mass beyond the largest
        // observed value; exact radius bounds where the representation has
        // them, deflated/inflated probe estimates otherwise. This quantifies
        // the t_max truncation against the true measure; the estimator itself
        // is the plain Monte Carlo mean in the exact-grid limit, so its
        // statistical error is the moment's.
        let (probe_min, probe_max) = self.radial_range_estimate();
        let rho_max = self.circumradius.unwrap_or(1.2 * probe_max);
        let rho_min = self.inradius.unwrap_or(0.8 * probe_min);
        let t_max = sorted[count - 1];
        let tail = if q > 0.0 {
            tail_bound_positive(n, q, rho_max, t_max)
        } else {
            tail_bound_negative(n, q, rho_min, t_max)
        };

        let c = c_constant(n, q)?;
        let value = fine / c;
        let (_, moment_se) = self.moment(q)?;
        let result = DualVolumeResult {
            q,
            value,
            stderr: (moment_se + grid_err) / c,
            formulation: Formulation::LayerCake,
        };
        let diagnostics = LayerCakeDiagnostics {
            grid_error: grid_err / c,
            tail_bound: tail / c,
            t_max,
            cells: grid.cells,
        };
        Ok((result, diagnostics))
    }
}

/// Discretization diagnostics of one layer-cake evaluation: the grid
/// refinement error, the analytic bound on true level-set mass beyond the
/// largest observed value, and the integration range (all in Ṽ_q units
/// except `t_max`).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LayerCakeDiagnostics {
    pub grid_error: f64,
    pub tail_bound: f64,
    pub t_max: f64,
    pub cells: usize,
}

/// ∫_T^∞ γ_n({ρ^q ≥ t}) dt ≤ ω_n (2π)^{−n/2} R^n T^{1−n/q} / (n/q − 1)
/// for q > 0, via γ_n(rK) ≤ γ_n(rR·B₂ⁿ) ≤ ω_n(rR)^n(2π)^{−n/2}.
fn tail_bound_positive(n: usize, q: f64, r_circ: f64, t_from: f64) -> f64 {
    let nf = n as f64;
    let dens = unit_ball_volume(n) / (2.0 * std::f64::consts::PI).powf(0.5 * nf);
    dens * r_circ.powf(nf) * t_from.powf(1.0 - nf / q) / (nf / q - 1.0)
}

/// For q < 0 the level sets live far from the origin:
/// γ_n({gauge ≥ s}) ≤ γ_n({|x| ≥ ρ_min s}) = Q(χ²_n ≥ ρ_min² s²).
fn tail_bound_negative(n: usize, q: f64, rho_min: f64, t_from: f64) -> f64 {
    let aq = -q;
    let integrand = |t: f64| {
        let x = (rho_min * t.powf(1.0 / aq)).powi(2);
        1.0 - crate::numeric::gamma_p(0.5 * n as f64, 0.5 * x)
    };
    // chi-square mass above x = 200 is below 1e-40 for n ≤ 8
    let t_end = (200.0_f64.sqrt() / rho_min).powf(aq).max(t_from * 2.0);
    adaptive_simpson(&integrand, t_from, t_end, 1e-12).unwrap_or(f64::INFINITY)
}

/// Layer-cake discretization: number of quantile cells and relative error
/// budget (grid refinement estimate plus analytic tail bound).
#[derive(Clone, Copy, Debug)]
pub struct LayerCakeGrid {
    pub cells: usize,
    pub tol: f64,
}

impl Default for LayerCakeGrid {
    fn default() -> Self {
        Self {
            cells: 4096,
            tol: 5e-3,
        }
    }
}

/// Raw Gaussian dual moment ∫ ρ_K^q dγ_n ≈ mean ρ(x_i)^q, with stderr.
pub fn gaussian_dual_moment(
    body: &ConvexBody,
    q: f64,
    sample: &GaussianSample,
) -> Result<(f64, f64)> {
    GaussianProfile::new(body, sample)?.moment(q)
}

/// Ṽ_q implied by the Gaussian moment.
pub fn gaussian_dual_querm(
    body: &ConvexBody,
    q: f64,
    sample: &GaussianSample,
) -> Result<DualVolumeResult> {
    GaussianProfile::new(body, sample)?.dual_querm(q)
}

/// E_{γn}(K) = ∫ log ρ_K dγ_n.
pub fn gaussian_dual_entropy(body: &ConvexBody, sample: &GaussianSample) -> Result<EntropyResult> {
    Ok(GaussianProfile::new(body, sample)?.entropy())
}

/// Layer-cake estimate of Ṽ_q (shared-sample coupling with the Gaussian
/// moment).
pub fn layer_cake_moment(
    body: &ConvexBody,
    q: f64,
    sample: &GaussianSample,
    grid: &LayerCakeGrid,
) -> Result<DualVolumeResult> {
    GaussianProfile::new(body, sample)?.layer_cake(q, grid)
}

/// Exact volumes for oracle bodies (boxes, cross-polytopes, ellipsoids).
pub fn exact_volume(body: &ConvexBody) -> Option<f64> {
    match body {
        ConvexBody::LpBall { dim, p, r } => {
            let n = *dim as f64;
            if *p == f64::INFINITY {
                Some((2.0 * r).powf(n))
            } else if *p == 1.0 {
                // 2ⁿ rⁿ / n!
                Some((n * (2.0 * r).ln() - ln_gamma(n + 1.0)).exp())
            } else if *p == 2.0 {
                Some(unit_ball_volume(*dim) * r.powf(n))
            } else {
                // 2ⁿ Γ(1+1/p)ⁿ / Γ(1+n/p) · rⁿ
                let g = ln_gamma(1.0 + 1.0 / p);
                Some((n * (2.0 * r).ln() + n * g - ln_gamma(1.0 + n / p)).exp())
            }
        }
        ConvexBody::Ellipsoid(e) => Some(e.volume()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::GeneratorSpec;
    use crate::quad::{sphere_rule, Scheme};
    use approx::assert_relative_eq;

    fn cube2() -> ConvexBody {
        ConvexBody::cube(2, 1.0).unwrap()
    }

    #[test]
    fn omega_values() {
        assert_relative_eq!(omega(2), std::f64::consts::PI, epsilon = 1e-13);
        assert_relative_eq!(omega(3), 4.0 * std::f64::consts::PI / 3.0, epsilon = 1e-13);
        assert_relative_eq!(omega(1), 2.0, epsilon = 1e-13);
    }

    #[test]
    fn ball_dual_querms_are_omega() {
        let rule = sphere_rule(3, Scheme::Fibonacci, 2000, 0).unwrap();
        let ball = ConvexBody::ball(3, 1.0).unwrap();
        let profile = SphereProfile::new(&ball, &rule).unwrap();
        for q in [-2.0, -0.5, 0.0, 1.0, 3.0] {
            let v = profile.dual_querm(q);
            assert_relative_eq!(v.value, omega(3), epsilon = 1e-10);
        }
    }

    #[test]
    fn cube_area_and_first_dual_volume() {
        let rule = sphere_rule(2, Scheme::Trapezoid, 4096, 0).unwrap();
        let profile = SphereProfile::new(&cube2(), &rule).unwrap();
        // Ṽ₂ = area = 4
        assert_relative_eq!(profile.dual_querm(2.0).value, 4.0, epsilon = 1e-5);
        // Ṽ₁ = 4 ln(1+√2) against the 1D quadrature oracle
        let oracle = 4.0
            * adaptive_simpson(&|t: f64| 1.0 / t.cos(), 0.0, std::f64::consts::FRAC_PI_4, 1e-12)
                .unwrap();
        assert!((profile.dual_querm(1.0).value - oracle).abs() < 1e-5);
        // V̄₂ = √(4/π)
        assert_relative_eq!(
            profile.normalized_dual_querm(2.0).value,
            (4.0 / std::f64::consts::PI).sqrt(),
            epsilon = 1e-6
        );
    }

    #[test]
    fn normalized_querm_homogeneous_degree_one() {
        let rule = sphere_rule(3, Scheme::Fibonacci, 2000, 0).unwrap();
        let ball2 = ConvexBody::ball(3, 2.0).unwrap();
        let profile = SphereProfile::new(&ball2, &rule).unwrap();
        for q in [-1.0, 0.0, 0.5, 2.0] {
            assert_relative_eq!(profile.normalized_dual_querm(q).value, 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn entropy_examples() {
        let rule = sphere_rule(2, Scheme::Trapezoid, 512, 0).unwrap();
        let ball = ConvexBody::ball(2, 1.0).unwrap();
        assert_relative_eq!(
            SphereProfile::new(&ball, &rule).unwrap().entropy().value,
            0.0,
            epsilon = 1e-12
        );
        let eball = ConvexBody::ball(2, std::f64::consts::E).unwrap();
        assert_relative_eq!(
            SphereProfile::new(&eball, &rule).unwrap().entropy().value,
            2.0 * std::f64::consts::PI,
            epsilon = 1e-10
        );
    }

    #[test]
    fn entropy_scaling_invariant() {
        // E(tK) − E(K) = n·ω_n·log t
        let rule = sphere_rule(3, Scheme::Fibonacci, 2000, 0).unwrap();
        let body =
            crate::bodies::random_body(&GeneratorSpec::symmetric_vpolytope(3, 8), 5).unwrap();
        let e1 = SphereProfile::new(&body, &rule).unwrap().entropy().value;
        let e3 = SphereProfile::new(&body.scale(3.0).unwrap(), &rule)
            .unwrap()
            .entropy()
            .value;
        assert_relative_eq!(
            e3 - e1,
            sphere_surface(3) * 3.0_f64.ln(),
            epsilon = 1e-8
        );
    }

    #[test]
    fn normalized_querm_continuous_at_zero() {
        let rule = sphere_rule(2, Scheme::Trapezoid, 4096, 0).unwrap();
        let profile = SphereProfile::new(&cube2(), &rule).unwrap();
        let v0 = profile.normalized_dual_querm(0.0).value;
        let vp = profile.normalized_dual_querm(1e-3).value;
        let vm = profile.normalized_dual_querm(-1e-3).value;
        assert!((vp - v0).abs() <= 1e-4 * v0, "vp = {vp}, v0 = {v0}");
        assert!((vm - v0).abs() <= 1e-4 * v0, "vm = {vm}, v0 = {v0}");
    }

    #[test]
    fn c_constants_match_known_values() {
        assert_relative_eq!(
            c_constant(2, 1.0).unwrap(),
            1.0 / (2.0 * std::f64::consts::PI).sqrt(),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            c_constant(2, 0.0).unwrap(),
            1.0 / std::f64::consts::PI,
            epsilon = 1e-12
        );
        assert!(matches!(
            c_constant(2, 2.0),
            Err(Error::ExponentOutOfRange { .. })
        ));
    }

    #[test]
    fn c_constant_closed_form_vs_quadrature_spot_checks() {
        for (n, q) in [(3usize, -1.7), (4, 1.3), (5, 2.2), (6, -0.4), (6, 5.5)] {
            let closed = c_constant(n, q).unwrap();
            let oracle = c_constant_quadrature(n, q).unwrap();
            assert_relative_eq!(closed, oracle, max_relative = 1e-10);
        }
    }

    #[test]
    fn gaussian_moment_of_ball_matches_identity() {
        // ρ(x) = 1/|x| ⇒ moment = c_{n,1}·ω_n
        let sample = GaussianSample::new(3, 100_000, 12);
        let ball = ConvexBody::ball(3, 1.0).unwrap();
        let (mean, se) = gaussian_dual_moment(&ball, 1.0, &sample).unwrap();
        let expected = c_constant(3, 1.0).unwrap() * omega(3);
        assert!(
            (mean - expected).abs() <= 3.0 * se,
            "mean {mean}, expected {expected}, stderr {se}"
        );
    }

    #[test]
    fn gaussian_moment_of_cube_matches_sphere_formulation() {
        let sample = GaussianSample::new(2, 200_000, 9);
        let cube = cube2();
        for q in [1.0, -1.0] {
            let (mean, se) = gaussian_dual_moment(&cube, q, &sample).unwrap();
            let rule = sphere_rule(2, Scheme::Trapezoid, 4096, 0).unwrap();
            let sphere_v = dual_querm(&cube, q, &rule).unwrap().value;
            let expected = c_constant(2, q).unwrap() * sphere_v;
            assert!(
                (mean - expected).abs() <= 3.0 * se,
                "q = {q}: mean {mean}, expected {expected}, stderr {se}"
            );
        }
    }

    #[test]
    fn gaussian_entropy_of_ball_matches_quadrature_oracle() {
        // E_γ(B₂²) = −∫ (log r) r e^{−r²/2} dr; do not trust a guessed sign
        let oracle = -adaptive_simpson(
            &|t: f64| t * (-0.5 * (2.0 * t).exp()).exp() * (2.0 * t).exp(),
            -40.0,
            6.0,
            1e-13,
        )
        .unwrap();
        let sample = GaussianSample::new(2, 200_000, 21);
        let ball = ConvexBody::ball(2, 1.0).unwrap();
        let e = gaussian_dual_entropy(&ball, &sample).unwrap();
        assert!(
            (e.value - oracle).abs() <= 3.0 * e.stderr,
            "value {}, oracle {oracle}, stderr {}",
            e.value,
            e.stderr
        );
        // closed form for the oracle: (γ/2 − log √2)
        let gamma_euler = 0.577_215_664_901_532_9_f64;
        assert_relative_eq!(
            oracle,
            0.5 * gamma_euler - 0.5 * 2.0_f64.ln(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn gaussian_entropy_dilation_additivity() {
        let sample = GaussianSample::new(3, 50_000, 30);
        let ball = ConvexBody::ball(3, 1.0).unwrap();
        let eball = ConvexBody::ball(3, std::f64::consts::E).unwrap();
        let a = gaussian_dual_entropy(&ball, &sample).unwrap();
        let b = gaussian_dual_entropy(&eball, &sample).unwrap();
        // same sample: the difference is exactly log e = 1 up to roundoff
        assert_relative_eq!(b.value - a.value, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn entropy_identity_constants_verified() {
        // E_{γn}(K) = c₀E(K) + c₁ with the n·ω_n factor resolved into c₁
        let (c0, c1) = entropy_constants(2);
        assert_relative_eq!(c0, 1.0 / (2.0 * std::f64::consts::PI), epsilon = 1e-12);
        let sample = GaussianSample::new(2, 200_000, 33);
        let rule = sphere_rule(2, Scheme::Trapezoid, 4096, 0).unwrap();
        let body = crate::bodies::random_body(&GeneratorSpec::symmetric_vpolytope(2, 6), 4)
            .unwrap();
        let e_sphere = dual_entropy(&body, &rule).unwrap().value;
        let e_gauss = gaussian_dual_entropy(&body, &sample).unwrap();
        let predicted = c0 * e_sphere + c1;
        assert!(
            (e_gauss.value - predicted).abs() <= 3.0 * e_gauss.stderr,
            "E_γ = {} vs c₀E + c₁ = {predicted} (stderr {})",
            e_gauss.value,
            e_gauss.stderr
        );
    }

    #[test]
    fn layer_cake_agrees_with_gaussian_moment() {
        let grid = LayerCakeGrid::default();
        // unit disk, q = 1
        let sample = GaussianSample::new(2, 100_000, 40);
        let ball = ConvexBody::ball(2, 1.0).unwrap();
        let lc = layer_cake_moment(&ball, 1.0, &sample, &grid).unwrap();
        let gm = gaussian_dual_querm(&ball, 1.0, &sample).unwrap();
        assert!(
            (lc.value - gm.value).abs() <= 3.0 * (lc.stderr + gm.stderr).max(1e-4),
            "lc {} vs gm {}",
            lc.value,
            gm.value
        );
        // cube in n = 3, q = 2 (q = n is invalid for n = 2)
        let sample3 = GaussianSample::new(3, 100_000, 41);
        let cube3 = ConvexBody::cube(3, 1.0).unwrap();
        let lc = layer_cake_moment(&cube3, 2.0, &sample3, &grid).unwrap();
        let gm = gaussian_dual_querm(&cube3, 2.0, &sample3).unwrap();
        assert!((lc.value - gm.value).abs() <= 3.0 * (lc.stderr + gm.stderr).max(1e-4));
        // negative exponent on the ball
        let lc = layer_cake_moment(&ConvexBody::ball(3, 1.0).unwrap(), -1.5, &sample3, &grid)
            .unwrap();
        let gm = gaussian_dual_querm(&ConvexBody::ball(3, 1.0).unwrap(), -1.5, &sample3).unwrap();
        assert!((lc.value - gm.value).abs() <= 3.0 * (lc.stderr + gm.stderr).max(1e-4));
    }

    #[test]
    fn layer_cake_rejects_bad_exponents() {
        let sample = GaussianSample::new(2, 1000, 1);
        let ball = ConvexBody::ball(2, 1.0).unwrap();
        let grid = LayerCakeGrid::default();
        assert!(layer_cake_moment(&ball, 0.0, &sample, &grid).is_err());
        assert!(matches!(
            layer_cake_moment(&ball, 2.5, &sample, &grid),
            Err(Error::ExponentOutOfRange { .. })
        ));
    }

    #[test]
    fn monotone_in_q_for_bodies_containing_the_ball() {
        // ρ ≥ 1 everywhere ⇒ Ṽ_q nondecreasing in q
        let rule = sphere_rule(3, Scheme::Fibonacci, 2000, 0).unwrap();
        let cube = ConvexBody::cube(3, 1.0).unwrap();
        let profile = SphereProfile::new(&cube, &rule).unwrap();
        let mut last = f64::NEG_INFINITY;
        for q in [-2.0, -1.0, 0.5, 1.0, 2.0, 3.0] {
            let v = profile.dual_querm(q).value;
            assert!(v >= last, "Ṽ_q must be nondecreasing, {v} < {last}");
            last = v;
        }
    }

    #[test]
    fn volume_case_oracles() {
        let rule3 = sphere_rule(3, Scheme::Fibonacci, 20_000, 0).unwrap();
        let cross = ConvexBody::cross_polytope(3, 1.0).unwrap();
        let v = dual_querm(&cross, 3.0, &rule3).unwrap().value;
        assert_relative_eq!(v, exact_volume(&cross).unwrap(), max_relative = 5e-3);
        let ell = ConvexBody::Ellipsoid(
            crate::bodies::EllipsoidMatrix::new(nalgebra::DMatrix::from_row_slice(
                3,
                3,
                &[1.5, 0.2, 0.0, 0.2, 0.8, 0.1, 0.0, 0.1, 1.1],
            ))
            .unwrap(),
        );
        let v = dual_querm(&ell, 3.0, &rule3).unwrap().value;
        assert_relative_eq!(v, exact_volume(&ell).unwrap(), max_relative = 5e-3);
    }

    #[test]
    fn rotation_invariance_of_dual_querm() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let body =
            crate::bodies::random_body(&GeneratorSpec::symmetric_vpolytope(3, 8), 10).unwrap();
        let rot = crate::numeric::random_rotation(3, &mut rng);
        let rotated = ConvexBody::linear_image(rot, body.clone()).unwrap();
        let rule = sphere_rule(3, Scheme::McAntipodal, 20_000, 77).unwrap();
        let a = dual_querm(&body, 2.0, &rule).unwrap();
        let b = dual_querm(&rotated, 2.0, &rule).unwrap();
        let tol = 3.0 * (a.stderr + b.stderr);
        assert!((a.value - b.value).abs() <= tol, "{} vs {}", a.value, b.value);
    }
}
