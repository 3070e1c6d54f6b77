//! Inequality checkers for the dual Brunn-Minkowski and reverse isoperimetric
//! statements, plus a randomized counterexample-search harness.
//!
//! Every checker evaluates both sides of its inequality on shared quadrature
//! nodes or a shared Gaussian sample, so discretization error is correlated
//! and small margins stay meaningful. Margins are oriented so that ≥ 0 means
//! "inequality holds". Uncertainties combine batch-means standard errors with
//! a floating-point noise floor, which keeps the 3σ verdict rule from firing
//! on pure roundoff when a rule is deterministic.

use crate::bodies::{random_body, BodyFamily, ConvexBody, GeneratorSpec, RadialEvaluator};
use crate::error::{Error, Result};
use crate::john::{assert_john_position, to_john_position};
use crate::numeric::{split_seed, sphere_surface, unit_ball_volume};
use crate::quad::{batch_stderr, sphere_rule, GaussianSample, Scheme, SphereRule};
use crate::functionals::SphereProfile;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Holds,
    HoldsWithinNoise,
    ViolationCandidate,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Holds => f.write_str("Holds"),
            Verdict::HoldsWithinNoise => f.write_str("HoldsWithinNoise"),
            Verdict::ViolationCandidate => f.write_str("ViolationCandidate"),
        }
    }
}

/// ViolationCandidate iff margin < −3·uncertainty; Holds iff margin clears
/// the same band on the positive side.
pub fn verdict_from(margin: f64, uncertainty: f64) -> Verdict {
    if margin < -3.0 * uncertainty {
        Verdict::ViolationCandidate
    } else if margin >= 3.0 * uncertainty {
        Verdict::Holds
    } else {
        Verdict::HoldsWithinNoise
    }
}

/// Roundoff contribution to a margin of quantities at the given scale.
fn noise_floor(scale: f64) -> f64 {
    64.0 * f64::EPSILON * scale.abs()
}

/// Result of one inequality check.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub q: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    /// Oriented so that margin ≥ 0 means the inequality holds.
    pub margin: f64,
    pub uncertainty: f64,
    pub verdict: Verdict,
    pub body_hashes: Vec<String>,
}

impl CheckReport {
    pub fn human_line(&self) -> String {
        let extra = match (self.lambda, self.t) {
            (Some(l), _) => format!(" lambda={l}"),
            (_, Some(t)) => format!(" t={t}"),
            _ => String::new(),
        };
        format!(
            "{} q={}{}: lhs={:.9e} rhs={:.9e} margin={:.3e} ± {:.3e} -> {}",
            self.name, self.q, extra, self.lhs, self.rhs, self.margin, self.uncertainty, self.verdict
        )
    }
}

fn report(
    name: &str,
    q: f64,
    lhs: f64,
    rhs: f64,
    margin: f64,
    stat_unc: f64,
    hashes: Vec<String>,
) -> CheckReport {
    let uncertainty = stat_unc + noise_floor(lhs.abs() + rhs.abs());
    CheckReport {
        name: name.into(),
        q,
        lambda: None,
        t: None,
        lhs,
        rhs,
        margin,
        uncertainty,
        verdict: verdict_from(margin, uncertainty),
        body_hashes: hashes,
    }
}

/// Shared profiles for Brunn-Minkowski checks of one pair across many q.
pub struct BmChecker<'a> {
    profile_k: SphereProfile<'a>,
    profile_l: SphereProfile<'a>,
    profile_sum: SphereProfile<'a>,
    hashes: Vec<String>,
}

impl<'a> BmChecker<'a> {
    pub fn new(k: &ConvexBody, l: &ConvexBody, rule: &'a SphereRule) -> Result<Self> {
        let sum = ConvexBody::minkowski_sum(k.clone(), l.clone())?;
        Ok(Self {
            profile_k: SphereProfile::new(k, rule)?,
            profile_l: SphereProfile::new(l, rule)?,
            profile_sum: SphereProfile::new(&sum, rule)?,
            hashes: vec![k.content_hash(), l.content_hash()],
        })
    }

    /// Margin of Ṽ_q(K+L)^{1/q} ≥ Ṽ_q(K)^{1/q} + Ṽ_q(L)^{1/q}.
    pub fn check(&self, q: f64) -> Result<CheckReport> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "Brunn-Minkowski margin needs q > 0, got {q}"
            )));
        }
        let root = |v: f64| v.powf(1.0 / q);
        let lhs = root(self.profile_sum.dual_querm(q).value);
        let rk = root(self.profile_k.dual_querm(q).value);
        let rl = root(self.profile_l.dual_querm(q).value);
        let rhs = rk + rl;
        let margin = lhs - rhs;
        let stat = match (
            self.profile_sum.batch_querms(q),
            self.profile_k.batch_querms(q),
            self.profile_l.batch_querms(q),
        ) {
            (Some(bs), Some(bk), Some(bl)) => {
                let margins: Vec<f64> = bs
                    .iter()
                    .zip(bk.iter().zip(&bl))
                    .map(|(s, (k, l))| root(*s) - root(*k) - root(*l))
                    .collect();
                batch_stderr(&margins)
            }
            _ => {
                // half-rule gap as the deterministic discretization estimate
                let half = root(self.profile_sum.dual_querm_half(q))
                    - root(self.profile_k.dual_querm_half(q))
                    - root(self.profile_l.dual_querm_half(q));
                (margin - half).abs()
            }
        };
        Ok(report("bm", q, lhs, rhs, margin, stat, self.hashes.clone()))
    }
}

/// One-shot Brunn-Minkowski check.
pub fn check_bm(
    k: &ConvexBody,
    l: &ConvexBody,
    q: f64,
    rule: &SphereRule,
) -> Result<CheckReport> {
    BmChecker::new(k, l, rule)?.check(q)
}

/// Shared profiles for the log-concavity route at one λ.
pub struct LogConcaveChecker<'a> {
    profile_k: SphereProfile<'a>,
    profile_l: SphereProfile<'a>,
    profile_mid: SphereProfile<'a>,
    lambda: f64,
    hashes: Vec<String>,
}

impl<'a> LogConcaveChecker<'a> {
    pub fn new(
        k: &ConvexBody,
        l: &ConvexBody,
        lambda: f64,
        rule: &'a SphereRule,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidConfig(format!(
                "lambda must lie in [0, 1], got {lambda}"
            )));
        }
        let mid = if lambda == 0.0 {
            k.clone()
        } else if lambda == 1.0 {
            l.clone()
        } else {
            ConvexBody::minkowski_sum(k.scale(1.0 - lambda)?, l.scale(lambda)?)?
        };
        Ok(Self {
            profile_k: SphereProfile::new(k, rule)?,
            profile_l: SphereProfile::new(l, rule)?,
            profile_mid: SphereProfile::new(&mid, rule)?,
            lambda,
            hashes: vec![k.content_hash(), l.content_hash()],
        })
    }

    /// Margin of log Ṽ_q((1−λ)K + λL) ≥ (1−λ)·log Ṽ_q(K) + λ·log Ṽ_q(L).
    pub fn check(&self, q: f64) -> Result<CheckReport> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "log-concavity margin needs q > 0, got {q}"
            )));
        }
        let lam = self.lambda;
        let lhs = self.profile_mid.dual_querm(q).value.ln();
        let rhs = (1.0 - lam) * self.profile_k.dual_querm(q).value.ln()
            + lam * self.profile_l.dual_querm(q).value.ln();
        let margin = lhs - rhs;
        let stat = match (
            self.profile_mid.batch_querms(q),
            self.profile_k.batch_querms(q),
            self.profile_l.batch_querms(q),
        ) {
            (Some(bm), Some(bk), Some(bl)) => {
                let margins: Vec<f64> = bm
                    .iter()
                    .zip(bk.iter().zip(&bl))
                    .map(|(m, (k, l))| m.ln() - (1.0 - lam) * k.ln() - lam * l.ln())
                    .collect();
                batch_stderr(&margins)
            }
            _ => {
                let half = self.profile_mid.dual_querm_half(q).ln()
                    - (1.0 - lam) * self.profile_k.dual_querm_half(q).ln()
                    - lam * self.profile_l.dual_querm_half(q).ln();
                (margin - half).abs()
            }
        };
        let mut rep = report("logconcave", q, lhs, rhs, margin, stat, self.hashes.clone());
        rep.lambda = Some(lam);
        Ok(rep)
    }
}

/// One-shot log-concavity check.
pub fn check_bm_logconcave(
    k: &ConvexBody,
    l: &ConvexBody,
    lambda: f64,
    q: f64,
    rule: &SphereRule,
) -> Result<CheckReport> {
    LogConcaveChecker::new(k, l, lambda, rule)?.check(q)
}

/// Homogeneity regression: Ṽ_q(tK) = t^q·Ṽ_q(K). The margin is the allowed
/// relative error (1e-9) minus the observed one.
pub fn check_homogeneity(
    body: &ConvexBody,
    q: f64,
    t: f64,
    rule: &SphereRule,
) -> Result<CheckReport> {
    const THRESHOLD: f64 = 1e-9;
    if !(0.1..=10.0).contains(&t) {
        return Err(Error::InvalidConfig(format!(
            "dilation factor must lie in [0.1, 10], got {t}"
        )));
    }
    let scaled = body.scale(t)?;
    let base = SphereProfile::new(body, rule)?.dual_querm(q).value;
    let lhs = SphereProfile::new(&scaled, rule)?.dual_querm(q).value;
    let rhs = t.powf(q) * base;
    let rel = (lhs - rhs).abs() / base.abs().max(1e-300);
    let mut rep = report(
        "homogeneity",
        q,
        lhs,
        rhs,
        THRESHOLD - rel,
        0.0,
        vec![body.content_hash()],
    );
    rep.t = Some(t);
    Ok(rep)
}

/// Reverse isoperimetric checker: profiles of the John-positioned body and
/// the reference cube on shared nodes, reusable across q.
pub struct RvipChecker<'a> {
    profile_body: SphereProfile<'a>,
    profile_cube: SphereProfile<'a>,
    dim: usize,
    hashes: Vec<String>,
}

impl<'a> RvipChecker<'a> {
    pub fn new(body: &ConvexBody, rule: &'a SphereRule, auto_john: bool) -> Result<Self> {
        let positioned = if auto_john {
            to_john_position(body)?.body
        } else {
            assert_john_position(body)?;
            body.clone()
        };
        let cube = ConvexBody::cube(body.dim(), 1.0)?;
        Ok(Self {
            profile_body: SphereProfile::new(&positioned, rule)?,
            profile_cube: SphereProfile::new(&cube, rule)?,
            dim: body.dim(),
            hashes: vec![body.content_hash()],
        })
    }

    /// Margin of V̄_q(B∞ⁿ) ≥ V̄_q(K) for K in John position; q = 0 uses the
    /// entropy branch.
    pub fn check(&self, q: f64) -> Result<CheckReport> {
        let lhs = self.profile_cube.normalized_dual_querm(q).value;
        let rhs = self.profile_body.normalized_dual_querm(q).value;
        let margin = lhs - rhs;
        let normalize = |vq: f64| (vq / unit_ball_volume(self.dim)).powf(1.0 / q);
        let stat = if q == 0.0 {
            match (
                self.profile_cube.batch_entropies(),
                self.profile_body.batch_entropies(),
            ) {
                (Some(bc), Some(bb)) => {
                    let denom = sphere_surface(self.dim);
                    let margins: Vec<f64> = bc
                        .iter()
                        .zip(&bb)
                        .map(|(c, b)| (c / denom).exp() - (b / denom).exp())
                        .collect();
                    batch_stderr(&margins)
                }
                _ => {
                    let half = self.profile_cube.normalized_dual_querm_half(0.0)
                        - self.profile_body.normalized_dual_querm_half(0.0);
                    (margin - half).abs()
                }
            }
        } else {
            match (
                self.profile_cube.batch_querms(q),
                self.profile_body.batch_querms(q),
            ) {
                (Some(bc), Some(bb)) => {
                    let margins: Vec<f64> = bc
                        .iter()
                        .zip(&bb)
                        .map(|(c, b)| normalize(*c) - normalize(*b))
                        .collect();
                    batch_stderr(&margins)
                }
                _ => {
                    let half = self.profile_cube.normalized_dual_querm_half(q)
                        - self.profile_body.normalized_dual_querm_half(q);
                    (margin - half).abs()
                }
            }
        };
        Ok(report("rvip", q, lhs, rhs, margin, stat, self.hashes.clone()))
    }
}

/// One-shot reverse isoperimetric check.
pub fn check_reverse_isop(
    body: &ConvexBody,
    q: f64,
    rule: &SphereRule,
    auto_john: bool,
) -> Result<CheckReport> {
    RvipChecker::new(body, rule, auto_john)?.check(q)
}

/// Schechtman-Schmuckenschläger tail checker with gauges cached over one
/// shared sample (coupled estimator).
pub struct SsTailChecker {
    gauges_body: Vec<f64>,
    gauges_cube: Vec<f64>,
    hashes: Vec<String>,
}

impl SsTailChecker {
    pub fn new(body: &ConvexBody, sample: &GaussianSample, auto_john: bool) -> Result<Self> {
        if body.dim() != sample.dim() {
            return Err(Error::DimensionMismatch("body vs sample dimension".into()));
        }
        let positioned = if auto_john {
            to_john_position(body)?.body
        } else {
            assert_john_position(body)?;
            body.clone()
        };
        let cube = ConvexBody::cube(body.dim(), 1.0)?;
        let eval_b = RadialEvaluator::new(&positioned)?;
        let eval_c = RadialEvaluator::new(&cube)?;
        let gb: Vec<Result<f64>> = sample.points().par_iter().map(|x| eval_b.gauge(x)).collect();
        let gc: Vec<Result<f64>> = sample.points().par_iter().map(|x| eval_c.gauge(x)).collect();
        Ok(Self {
            gauges_body: gb.into_iter().collect::<Result<_>>()?,
            gauges_cube: gc.into_iter().collect::<Result<_>>()?,
            hashes: vec![body.content_hash()],
        })
    }

    /// Margin of γ_n(gauge_K > t) ≥ γ_n(gauge_cube > t), same sample on both
    /// sides. For K = B∞ⁿ the indicators coincide pointwise and the margin is
    /// exactly zero.
    pub fn check(&self, t: f64) -> Result<CheckReport> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidConfig(format!("threshold t must be positive, got {t}")));
        }
        let n = self.gauges_body.len() as f64;
        let diffs: Vec<f64> = self
            .gauges_body
            .iter()
            .zip(&self.gauges_cube)
            .map(|(b, c)| f64::from(u8::from(*b > t)) - f64::from(u8::from(*c > t)))
            .collect();
        let margin = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - margin).powi(2)).sum::<f64>() / (n - 1.0);
        let stat = (var / n).sqrt();
        let lhs = self.gauges_body.iter().filter(|g| **g > t).count() as f64 / n;
        let rhs = self.gauges_cube.iter().filter(|g| **g > t).count() as f64 / n;
        let mut rep = report("ss-tail", f64::NAN, lhs, rhs, margin, stat, self.hashes.clone());
        rep.q = 0.0;
        rep.t = Some(t);
        Ok(rep)
    }
}

/// One-shot tail-inequality check.
pub fn check_ss_tail(
    body: &ConvexBody,
    t: f64,
    sample: &GaussianSample,
    auto_john: bool,
) -> Result<CheckReport> {
    SsTailChecker::new(body, sample, auto_john)?.check(t)
}

/// Which inequality the search drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchTarget {
    Bm,
    Logconcave,
    Rvip,
    SsTail,
}

/// Counterexample-search configuration; the whole run is a pure function of
/// this value.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchConfig {
    pub target: SearchTarget,
    pub dim: usize,
    #[serde(default)]
    pub q_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub family: BodyFamily,
    #[serde(default = "default_true")]
    pub symmetric: bool,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_escalation")]
    pub escalation: f64,
    #[serde(default = "default_rule_size")]
    pub rule_size: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_true() -> bool {
    true
}
fn default_lambda_grid() -> Vec<f64> {
    vec![0.5]
}
fn default_t_grid() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}
fn default_escalation() -> f64 {
    10.0
}
fn default_rule_size() -> usize {
    2048
}
fn default_samples() -> usize {
    200_000
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidConfig("search dimension must be ≥ 2".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("search needs at least one trial".into()));
        }
        if !(self.escalation > 1.0) {
            return Err(Error::InvalidConfig("escalation factor must exceed 1".into()));
        }
        match self.target {
            SearchTarget::Bm | SearchTarget::Logconcave => {
                if self.q_grid.is_empty() {
                    return Err(Error::InvalidConfig("q grid must not be empty".into()));
                }
                if self.q_grid.iter().any(|q| !(*q > 0.0) || !q.is_finite()) {
                    return Err(Error::InvalidConfig(
                        "Brunn-Minkowski targets need finite q > 0".into(),
                    ));
                }
            }
            SearchTarget::Rvip => {
                if self.q_grid.is_empty() {
                    return Err(Error::InvalidConfig("q grid must not be empty".into()));
                }
                if !self.symmetric {
                    return Err(Error::InvalidConfig(
                        "reverse isoperimetric search needs symmetric bodies".into(),
                    ));
                }
                if !matches!(self.family, BodyFamily::HPolytope { .. }) {
                    return Err(Error::InvalidConfig(
                        "reverse isoperimetric search needs the H-polytope family \
                         (John positioning requires an H-representation)"
                            .into(),
                    ));
                }
            }
            SearchTarget::SsTail => {
                if self.t_grid.is_empty() {
                    return Err(Error::InvalidConfig("t grid must not be empty".into()));
                }
                if !self.symmetric || !matches!(self.family, BodyFamily::HPolytope { .. }) {
                    return Err(Error::InvalidConfig(
                        "tail search needs symmetric H-polytopes".into(),
                    ));
                }
            }
        }
        if !self.symmetric && !matches!(self.family, BodyFamily::VPolytope { .. }) {
            return Err(Error::InvalidConfig(
                "non-symmetric probing needs the V-polytope family".into(),
            ));
        }
        Ok(())
    }

    fn generator(&self) -> GeneratorSpec {
        GeneratorSpec {
            dim: self.dim,
            family: self.family,
            r_min: 0.05,
            symmetric: self.symmetric,
        }
    }
}

/// Outcome of a re-test at escalated sample size.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RetestRecord {
    pub margin: f64,
    pub uncertainty: f64,
    pub verdict: Verdict,
    pub scale: f64,
}

/// One search trial record: margins only, never a mathematical conclusion.
#[derive(Clone, Debug, Serialize)]
pub struct Finding {
    pub trial: usize,
    pub target: SearchTarget,
    pub q: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub margin: f64,
    pub uncertainty: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retest: Option<RetestRecord>,
    pub hash_k: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hash_l: Option<String>,
    pub body_k: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub body_l: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Finding {
    /// Ranking score: most suspicious first (margin over uncertainty, after
    /// re-testing when a re-test ran).
    pub fn score(&self) -> f64 {
        let (m, u) = match &self.retest {
            Some(r) => (r.margin, r.uncertainty),
            None => (self.margin, self.uncertainty),
        };
        if self.error.is_some() {
            f64::INFINITY
        } else {
            m / u.max(1e-300)
        }
    }

    /// Final verdict after any re-test.
    pub fn final_verdict(&self) -> Verdict {
        self.retest.as_ref().map_or(self.verdict, |r| r.verdict)
    }
}

const SALT_BODY_K: u64 = 0x4b;
const SALT_BODY_L: u64 = 0x4c;
const SALT_RULE: u64 = 0x52;
const SALT_RETEST: u64 = 0x72;

fn rule_for(cfg: &SearchConfig, size: usize, seed: u64) -> Result<SphereRule> {
    let size = size.max(64) & !1; // even
    sphere_rule(cfg.dim, Scheme::McAntipodal, size, seed)
}

struct TrialSetting {
    q: f64,
    lambda: Option<f64>,
    t: Option<f64>,
}

fn trial_settings(cfg: &SearchConfig) -> Vec<TrialSetting> {
    match cfg.target {
        SearchTarget::Bm | SearchTarget::Rvip => cfg
            .q_grid
            .iter()
            .map(|&q| TrialSetting {
                q,
                lambda: None,
                t: None,
            })
            .collect(),
        SearchTarget::Logconcave => cfg
            .lambda_grid
            .iter()
            .flat_map(|&l| {
                cfg.q_grid.iter().map(move |&q| TrialSetting {
                    q,
                    lambda: Some(l),
                    t: None,
                })
            })
            .collect(),
        SearchTarget::SsTail => cfg
            .t_grid
            .iter()
            .map(|&t| TrialSetting {
                q: 0.0,
                lambda: None,
                t: Some(t),
            })
            .collect(),
    }
}

/// Runs one trial at the given rule/sample size; returns reports in setting
/// order.
fn run_trial(
    cfg: &SearchConfig,
    trial: usize,
    k: &ConvexBody,
    l: Option<&ConvexBody>,
    rule_size: usize,
    samples: usize,
    rule_seed: u64,
) -> Result<Vec<CheckReport>> {
    let settings = trial_settings(cfg);
    let mut out = Vec::with_capacity(settings.len());
    match cfg.target {
        SearchTarget::Bm => {
            let rule = rule_for(cfg, rule_size, rule_seed)?;
            let checker = BmChecker::new(k, l.expect("pair target"), &rule)?;
            for s in &settings {
                out.push(checker.check(s.q)?);
            }
        }
        SearchTarget::Logconcave => {
            let rule = rule_for(cfg, rule_size, rule_seed)?;
            for lambda in &cfg.lambda_grid {
                let checker = LogConcaveChecker::new(k, l.expect("pair target"), *lambda, &rule)?;
                for q in &cfg.q_grid {
                    out.push(checker.check(*q)?);
                }
            }
        }
        SearchTarget::Rvip => {
            let rule = rule_for(cfg, rule_size, rule_seed)?;
            let checker = RvipChecker::new(k, &rule, true)?;
            for s in &settings {
                out.push(checker.check(s.q)?);
            }
        }
        SearchTarget::SsTail => {
            let sample = GaussianSample::new(cfg.dim, samples, split_seed(rule_seed, trial as u64, 0x53));
            let checker = SsTailChecker::new(k, &sample, true)?;
            for s in &settings {
                out.push(checker.check(s.t.expect("t grid"))?);
            }
        }
    }
    Ok(out)
}

/// Runs the configured checker over seeded random bodies, re-testing every
/// violation candidate at escalated size. Output is a pure function of the
/// config; findings are ranked most-suspicious-first.
pub fn search_counterexamples(cfg: &SearchConfig) -> Result<Vec<Finding>> {
    cfg.validate()?;
    let pair_target = matches!(cfg.target, SearchTarget::Bm | SearchTarget::Logconcave);
    let spec = cfg.generator();

    let mut findings: Vec<Finding> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| -> Vec<Finding> {
            let seed_k = split_seed(cfg.seed, trial as u64, SALT_BODY_K);
            let k = match random_body(&spec, seed_k) {
                Ok(b) => b,
                Err(e) => {
                    return vec![error_finding(cfg, trial, e.to_string())];
                }
            };
            let l = if pair_target {
                match random_body(&spec, split_seed(cfg.seed, trial as u64, SALT_BODY_L)) {
                    Ok(b) => Some(b),
                    Err(e) => {
                        return vec![error_finding(cfg, trial, e.to_string())];
                    }
                }
            } else {
                None
            };
            let rule_seed = split_seed(cfg.seed, trial as u64, SALT_RULE);
            let reports = match run_trial(
                cfg,
                trial,
                &k,
                l.as_ref(),
                cfg.rule_size,
                cfg.samples,
                rule_seed,
            ) {
                Ok(r) => r,
                Err(e) => {
                    return vec![error_finding(cfg, trial, e.to_string())];
                }
            };
            let settings = trial_settings(cfg);
            let mut escalated: Option<Vec<CheckReport>> = None;
            let mut out = Vec::with_capacity(reports.len());
            for (idx, (rep, setting)) in reports.iter().zip(&settings).enumerate() {
                let retest = if rep.verdict == Verdict::ViolationCandidate {
                    if escalated.is_none() {
                        let size = (cfg.rule_size as f64 * cfg.escalation) as usize;
                        let samples = (cfg.samples as f64 * cfg.escalation) as usize;
                        escalated = run_trial(
                            cfg,
                            trial,
                            &k,
                            l.as_ref(),
                            size,
                            samples,
                            split_seed(cfg.seed, trial as u64, SALT_RETEST),
                        )
                        .ok();
                    }
                    escalated.as_ref().map(|reps| RetestRecord {
                        margin: reps[idx].margin,
                        uncertainty: reps[idx].uncertainty,
                        verdict: reps[idx].verdict,
                        scale: cfg.escalation,
                    })
                } else {
                    None
                };
                out.push(Finding {
                    trial,
                    target: cfg.target,
                    q: setting.q,
                    lambda: setting.lambda,
                    t: setting.t,
                    margin: rep.margin,
                    uncertainty: rep.uncertainty,
                    verdict: rep.verdict,
                    retest,
                    hash_k: k.content_hash(),
                    hash_l: l.as_ref().map(|b| b.content_hash()),
                    body_k: k.to_json(),
                    body_l: l.as_ref().map(|b| b.to_json()),
                    error: None,
                });
            }
            out
        })
        .flatten()
        .collect();

    findings.sort_by(|a, b| {
        a.score()
            .partial_cmp(&b.score())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.trial.cmp(&b.trial))
            .then(a.q.partial_cmp(&b.q).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(findings)
}

fn error_finding(cfg: &SearchConfig, trial: usize, message: String) -> Finding {
    Finding {
        trial,
        target: cfg.target,
        q: f64::NAN,
        lambda: None,
        t: None,
        margin: f64::NAN,
        uncertainty: f64::NAN,
        verdict: Verdict::HoldsWithinNoise,
        retest: None,
        hash_k: String::new(),
        hash_l: None,
        body_k: serde_json::Value::Null,
        body_l: None,
        error: Some(message),
    }
}

/// Writes findings as JSON-lines, a CSV summary, and a content-addressed body
/// archive under `dir`.
pub fn write_findings(dir: &Path, findings: &[Finding]) -> Result<()> {
    std::fs::create_dir_all(dir.join("bodies"))?;
    let mut jsonl = std::fs::File::create(dir.join("findings.jsonl"))?;
    for f in findings {
        writeln!(jsonl, "{}", serde_json::to_string(f)?)?;
    }
    let mut csv = String::from("trial,q,margin,uncertainty,verdict,body_hash_K,body_hash_L\n");
    for f in findings {
        csv.push_str(&format!(
            "{},{},{:.17e},{:.17e},{},{},{}\n",
            f.trial,
            f.q,
            f.margin,
            f.uncertainty,
            f.final_verdict(),
            f.hash_k,
            f.hash_l.clone().unwrap_or_default(),
        ));
    }
    std::fs::write(dir.join("summary.csv"), csv)?;
    for f in findings {
        if f.error.is_none() {
            std::fs::write(
                dir.join("bodies").join(format!("{}.json", f.hash_k)),
                serde_json::to_string_pretty(&f.body_k)?,
            )?;
            if let (Some(h), Some(b)) = (&f.hash_l, &f.body_l) {
                std::fs::write(
                    dir.join("bodies").join(format!("{h}.json")),
                    serde_json::to_string_pretty(b)?,
                )?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::sphere_rule;

    fn rule2() -> SphereRule {
        sphere_rule(2, Scheme::Trapezoid, 1024, 0).unwrap()
    }

    #[test]
    fn bm_equality_for_identical_cubes() {
        let k = ConvexBody::cube(2, 1.0).unwrap();
        let rep = check_bm(&k, &k, 1.0, &rule2()).unwrap();
        assert!(
            rep.margin.abs() <= 1e-9 * rep.lhs.abs(),
            "dilate equality: margin {}",
            rep.margin
        );
        assert_ne!(rep.verdict, Verdict::ViolationCandidate);
    }

    #[test]
    fn bm_classical_case_squares() {
        // axis-aligned square and the 45°-rotated square inscribed in B₂²;
        // at q = n = 2 the margin is the classical BM gap: √area(K+L) ≥
        // √area(K) + √area(L)
        let k = ConvexBody::cube(2, 1.0).unwrap();
        let rot = std::f64::consts::FRAC_1_SQRT_2;
        let l = ConvexBody::vpolytope(vec![
            crate::bodies::Vector::from_row_slice(&[2.0 * rot, 0.0]),
            crate::bodies::Vector::from_row_slice(&[0.0, 2.0 * rot]),
        ])
        .unwrap();
        let rep = check_bm(&k, &l, 2.0, &rule2()).unwrap();
        assert!(rep.margin > 0.0, "distinct squares are not dilates");
        assert_eq!(rep.verdict, Verdict::Holds);
    }

    #[test]
    fn bm_random_pairs_hold_statistically() {
        let spec = GeneratorSpec::symmetric_vpolytope(3, 8);
        let rule = sphere_rule(3, Scheme::McAntipodal, 1024, 3).unwrap();
        for seed in 0..5u64 {
            let k = random_body(&spec, seed).unwrap();
            let l = random_body(&spec, seed + 100).unwrap();
            let rep = check_bm(&k, &l, 1.0, &rule).unwrap();
            assert!(
                rep.margin >= -3.0 * rep.uncertainty,
                "seed {seed}: margin {} ± {}",
                rep.margin,
                rep.uncertainty
            );
        }
    }

    #[test]
    fn logconcave_endpoints_are_exact() {
        let spec = GeneratorSpec::symmetric_vpolytope(2, 6);
        let k = random_body(&spec, 1).unwrap();
        let l = random_body(&spec, 2).unwrap();
        let rule = rule2();
        let rep0 = check_bm_logconcave(&k, &l, 0.0, 1.5, &rule).unwrap();
        assert_eq!(rep0.margin, 0.0, "λ = 0 endpoint must be exact");
        let rep_same = check_bm_logconcave(&k, &k, 0.5, 1.5, &rule).unwrap();
        assert!(rep_same.margin.abs() <= 1e-9);
    }

    #[test]
    fn homogeneity_reports() {
        let rule = sphere_rule(3, Scheme::Fibonacci, 2000, 0).unwrap();
        let ball = ConvexBody::ball(3, 1.0).unwrap();
        let rep = check_homogeneity(&ball, 2.0, 2.0, &rule).unwrap();
        assert!(rep.margin > 0.0, "relative error should be ≤ 1e-10");
        let rep1 = check_homogeneity(&ball, 2.0, 1.0, &rule).unwrap();
        assert_eq!(rep1.lhs, rep1.rhs);
        let poly = random_body(&GeneratorSpec::symmetric_vpolytope(3, 8), 4).unwrap();
        let rep = check_homogeneity(&poly, -1.0, 0.5, &rule).unwrap();
        assert!(
            rep.margin > 0.0,
            "node-wise scaling should hold to 1e-9, got margin {}",
            rep.margin
        );
    }

    #[test]
    fn rvip_cube_equality_and_cross_polytope_gap() {
        let rule = sphere_rule(3, Scheme::Fibonacci, 4000, 0).unwrap();
        let cube = ConvexBody::cube(3, 1.0).unwrap();
        let rep = check_reverse_isop(&cube, 2.0, &rule, false).unwrap();
        assert_eq!(rep.margin, 0.0, "cube against itself is bitwise equal");
        // √3·B₁³ at q = 3: margin from exact volumes 8 vs 4√3
        let cross = ConvexBody::cross_polytope(3, 3.0_f64.sqrt()).unwrap();
        let rep = check_reverse_isop(&cross, 3.0, &rule, false).unwrap();
        let omega3 = unit_ball_volume(3);
        let expected = (8.0 / omega3).powf(1.0 / 3.0) - (4.0 * 3.0_f64.sqrt() / omega3).powf(1.0 / 3.0);
        assert!(
            (rep.margin - expected).abs() < 5e-3,
            "margin {} vs exact-volume oracle {expected}",
            rep.margin
        );
        assert_eq!(rep.verdict, Verdict::Holds);
    }

    #[test]
    fn rvip_rejects_out_of_position_bodies() {
        let rule = rule2();
        let big = ConvexBody::cube(2, 2.0).unwrap();
        assert!(matches!(
            check_reverse_isop(&big, 1.0, &rule, false),
            Err(Error::NotInJohnPosition(_))
        ));
        // auto-John fixes it
        let rep = check_reverse_isop(&big, 1.0, &rule, true).unwrap();
        assert!(rep.margin.abs() <= 1e-6);
    }

    #[test]
    fn ss_tail_cube_margin_exactly_zero() {
        let sample = GaussianSample::new(3, 20_000, 5);
        let cube = ConvexBody::cube(3, 1.0).unwrap();
        let checker = SsTailChecker::new(&cube, &sample, false).unwrap();
        for t in [0.5, 1.0, 2.0] {
            let rep = checker.check(t).unwrap();
            assert_eq!(rep.margin, 0.0);
            assert_eq!(rep.uncertainty - noise_floor(rep.lhs + rep.rhs), 0.0);
        }
    }

    #[test]
    fn ss_tail_cross_polytope_nonnegative() {
        let sample = GaussianSample::new(3, 100_000, 6);
        let cross = ConvexBody::cross_polytope(3, 3.0_f64.sqrt()).unwrap();
        let rep = check_ss_tail(&cross, 1.0, &sample, false).unwrap();
        assert!(
            rep.margin >= -3.0 * rep.uncertainty,
            "margin {} ± {}",
            rep.margin,
            rep.uncertainty
        );
        // t in the far tail: both indicators are almost surely zero
        let rep = check_ss_tail(&cross, 40.0, &sample, false).unwrap();
        assert_eq!(rep.margin, 0.0);
    }

    #[test]
    fn search_regression_run_has_no_candidates() {
        let cfg = SearchConfig {
            target: SearchTarget::Bm,
            dim: 3,
            q_grid: vec![1.0, 2.0],
            trials: 10,
            seed: 99,
            family: BodyFamily::VPolytope { points: 6 },
            symmetric: true,
            lambda_grid: default_lambda_grid(),
            t_grid: default_t_grid(),
            escalation: 10.0,
            rule_size: 512,
            samples: 10_000,
        };
        let findings = search_counterexamples(&cfg).unwrap();
        assert_eq!(findings.len(), 20);
        assert!(findings
            .iter()
            .all(|f| f.final_verdict() != Verdict::ViolationCandidate));
        // reproducibility: pure function of the config
        let again = search_counterexamples(&cfg).unwrap();
        for (a, b) in findings.iter().zip(&again) {
            assert_eq!(a.trial, b.trial);
            assert_eq!(a.margin.to_bits(), b.margin.to_bits());
        }
    }

    #[test]
    fn search_dilate_pairs_give_zero_margin_at_any_q() {
        // dilate equality survives q > n by homogeneity
        let spec = GeneratorSpec::symmetric_vpolytope(3, 6);
        let k = random_body(&spec, 11).unwrap();
        let l = k.scale(2.0).unwrap();
        let rule = sphere_rule(3, Scheme::McAntipodal, 512, 7).unwrap();
        for q in [0.5, 1.0, 2.0, 3.0, 4.0] {
            let rep = check_bm(&k, &l, q, &rule).unwrap();
            let scale = rep.lhs.abs();
            assert!(
                rep.margin.abs() <= 1e-9 * scale.max(1.0),
                "q = {q}: margin {}",
                rep.margin
            );
        }
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let mut cfg = SearchConfig {
            target: SearchTarget::Rvip,
            dim: 3,
            q_grid: vec![1.0],
            trials: 1,
            seed: 0,
            family: BodyFamily::VPolytope { points: 6 },
            symmetric: true,
            lambda_grid: default_lambda_grid(),
            t_grid: default_t_grid(),
            escalation: 10.0,
            rule_size: 128,
            samples: 1000,
        };
        assert!(cfg.validate().is_err(), "rvip needs H-polytopes");
        cfg.family = BodyFamily::HPolytope { facets: 8 };
        assert!(cfg.validate().is_ok());
        cfg.q_grid = vec![];
        assert!(cfg.validate().is_err());
    }
}
