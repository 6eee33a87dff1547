//! Model parameters, drift fields and the algebraic recurrence conditions.
//!
//! The process is `dX = b(X, Z) dt + dW` in `R^d` with `Z` a two-state
//! Markov chain. Regime `Minus` (z = 0) is the recurrent one, regime
//! `Plus` (z = 1) the transient one. Outside the ball of radius `M` the
//! drift satisfies
//!
//! ```text
//! -R_-  <=  x . b_-(x)  <=  -r_-
//!  R_+  <=  x . b_+(x)  <=   r_+
//! ```
//!
//! and the conditions `c1`, `c2`, `c2a` trade the inward pull of regime 0
//! against the outward push of regime 1, weighted by the mean holding times.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("condition (c1) fails (2r_- - d = {dimension_margin}, balance margin = {balance_margin}); the (epsilon, q) construction is undefined")]
    C1Fails {
        dimension_margin: f64,
        balance_margin: f64,
    },
}

fn invalid(name: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// State of the discrete component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Regime {
    /// z = 0, recurrent regime with drift `b_-`.
    Minus,
    /// z = 1, transient regime with drift `b_+`.
    Plus,
}

impl Regime {
    pub fn index(self) -> u8 {
        match self {
            Regime::Minus => 0,
            Regime::Plus => 1,
        }
    }

    pub fn other(self) -> Regime {
        match self {
            Regime::Minus => Regime::Plus,
            Regime::Plus => Regime::Minus,
        }
    }
}

impl From<Regime> for u8 {
    fn from(z: Regime) -> u8 {
        z.index()
    }
}

impl TryFrom<u8> for Regime {
    type Error = String;

    fn try_from(z: u8) -> Result<Self, Self::Error> {
        match z {
            0 => Ok(Regime::Minus),
            1 => Ok(Regime::Plus),
            other => Err(format!("regime must be 0 or 1, got {other}")),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Scalar constants of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    /// Rate of leaving regime 0.
    pub lambda_minus: f64,
    /// Rate of leaving regime 1.
    pub lambda_plus: f64,
    pub r_minus: f64,
    pub r_plus: f64,
    #[serde(rename = "R_minus")]
    pub big_r_minus: f64,
    #[serde(rename = "R_plus")]
    pub big_r_plus: f64,
    /// Inner radius outside of which the drift bounds hold.
    pub m: f64,
    /// Recurrence radius.
    pub m1: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.d == 0 {
            return Err(invalid("d", "dimension must be at least 1"));
        }
        for (name, v) in [
            ("lambda_minus", self.lambda_minus),
            ("lambda_plus", self.lambda_plus),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(
                    name,
                    format!("switching intensities must satisfy 0 < lambda_- ^ lambda_+ < inf (condition al), got {v}"),
                ));
            }
        }
        for (name, v) in [
            ("r_minus", self.r_minus),
            ("r_plus", self.r_plus),
            ("R_minus", self.big_r_minus),
            ("R_plus", self.big_r_plus),
            ("M", self.m),
            ("M1", self.m1),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be finite and positive, got {v}")));
            }
        }
        if self.big_r_plus > self.r_plus {
            return Err(invalid(
                "R_plus",
                format!("need R_+ <= r_+, got {} > {}", self.big_r_plus, self.r_plus),
            ));
        }
        if self.big_r_minus < self.r_minus {
            return Err(invalid(
                "R_minus",
                format!("need R_- >= r_-, got {} < {}", self.big_r_minus, self.r_minus),
            ));
        }
        if self.m1 <= self.m {
            return Err(invalid(
                "M1",
                format!("need M1 > M, got {} <= {}", self.m1, self.m),
            ));
        }
        Ok(())
    }

    pub fn rate(&self, z: Regime) -> f64 {
        match z {
            Regime::Minus => self.lambda_minus,
            Regime::Plus => self.lambda_plus,
        }
    }

    /// Largest epsilon for which (lle) has a solution with q < 1; positive iff (c1) holds.
    pub fn epsilon_max(&self) -> f64 {
        let d = self.d as f64;
        (self.lambda_plus * (2.0 * self.r_minus - d) - self.lambda_minus * (2.0 * self.r_plus + d))
            / (self.lambda_minus + self.lambda_plus)
    }
}

/// Signed slack (left side minus right side) of each condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionMargins {
    /// `2r_- - d`.
    pub c1_dimension: f64,
    /// `(2r_- - d)/lambda_- - (2r_+ + d)/lambda_+`.
    pub c1_balance: f64,
    /// `(4r_- - (2d+4))/lambda_- - (4r_+ + (2d+4))/lambda_+`.
    pub c2: f64,
    /// `(6r_- - (3d+12))/lambda_- - (6r_+ + (3d+12))/lambda_+`.
    pub c2a: f64,
}

impl fmt::Display for ConditionMargins {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "c1: 2r_- - d = {:.6}, balance = {:.6}; c2 = {:.6}; c2a = {:.6}",
            self.c1_dimension, self.c1_balance, self.c2, self.c2a
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonQ {
    pub epsilon: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub holds_c1: bool,
    pub holds_c2: bool,
    pub holds_c2a: bool,
    /// Filled in once a drift audit has been run against the parameters.
    pub holds_b_audit: Option<bool>,
    pub holds_b2_audit: Option<bool>,
    pub margins: ConditionMargins,
    pub epsilon_q: Option<EpsilonQ>,
}

impl ConditionReport {
    pub fn with_audit(mut self, audit: &DriftAudit) -> Self {
        self.holds_b_audit = Some(audit.holds_b());
        self.holds_b2_audit = Some(audit.holds_b2());
        self
    }
}

/// Hypothesis tier a claim depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConditionTier {
    None,
    C1,
    C2,
    C2a,
}

impl ConditionTier {
    pub fn label(self) -> &'static str {
        match self {
            ConditionTier::None => "none",
            ConditionTier::C1 => "c1",
            ConditionTier::C2 => "c2",
            ConditionTier::C2a => "c2a",
        }
    }

    pub fn holds(self, report: &ConditionReport) -> bool {
        match self {
            ConditionTier::None => true,
            ConditionTier::C1 => report.holds_c1,
            ConditionTier::C2 => report.holds_c2,
            ConditionTier::C2a => report.holds_c2a,
        }
    }
}

pub const DEFAULT_EPSILON_FRACTION: f64 = 0.5;

pub fn condition_margins(params: &ModelParams) -> ConditionMargins {
    let d = params.d as f64;
    let (lm, lp) = (params.lambda_minus, params.lambda_plus);
    let (rm, rp) = (params.r_minus, params.r_plus);
    ConditionMargins {
        c1_dimension: 2.0 * rm - d,
        c1_balance: (2.0 * rm - d) / lm - (2.0 * rp + d) / lp,
        c2: (4.0 * rm - (2.0 * d + 4.0)) / lm - (4.0 * rp + (2.0 * d + 4.0)) / lp,
        c2a: (6.0 * rm - (3.0 * d + 12.0)) / lm - (6.0 * rp + (3.0 * d + 12.0)) / lp,
    }
}

/// Evaluates (c1), (c2), (c2a) as written and attaches `(epsilon, q)` when (c1) holds.
pub fn check_conditions(params: &ModelParams) -> ConditionReport {
    let d = params.d as f64;
    let (lm, lp) = (params.lambda_minus, params.lambda_plus);
    let (rm, rp) = (params.r_minus, params.r_plus);
    let holds_c1 = 2.0 * rm > d && (2.0 * rm - d) / lm > (2.0 * rp + d) / lp;
    let holds_c2 = (4.0 * rm - (2.0 * d + 4.0)) / lm > (4.0 * rp + (2.0 * d + 4.0)) / lp;
    let holds_c2a = (6.0 * rm - (3.0 * d + 12.0)) / lm > (6.0 * rp + (3.0 * d + 12.0)) / lp;
    let epsilon_q = if holds_c1 {
        solve_epsilon_q(params, DEFAULT_EPSILON_FRACTION).ok()
    } else {
        None
    };
    ConditionReport {
        holds_c1,
        holds_c2,
        holds_c2a,
        holds_b_audit: None,
        holds_b2_audit: None,
        margins: condition_margins(params),
        epsilon_q,
    }
}

/// Picks `epsilon = fraction * epsilon_max` and solves
/// `lambda_- (2r_+ + d + eps) = q lambda_+ (2r_- - d - eps)` for `q`.
pub fn solve_epsilon_q(params: &ModelParams, epsilon_fraction: f64) -> Result<EpsilonQ, ModelError> {
    if !(epsilon_fraction > 0.0 && epsilon_fraction < 1.0) {
        return Err(invalid(
            "epsilon_fraction",
            format!("must lie in (0, 1), got {epsilon_fraction}"),
        ));
    }
    let margins = condition_margins(params);
    let eps_max = params.epsilon_max();
    if !(margins.c1_dimension > 0.0 && margins.c1_balance > 0.0 && eps_max > 0.0) {
        return Err(ModelError::C1Fails {
            dimension_margin: margins.c1_dimension,
            balance_margin: margins.c1_balance,
        });
    }
    q_for_epsilon(params, epsilon_fraction * eps_max)
}

/// Solves (lle) for `q` given an explicit `epsilon`.
pub fn q_for_epsilon(params: &ModelParams, epsilon: f64) -> Result<EpsilonQ, ModelError> {
    let d = params.d as f64;
    let margins = condition_margins(params);
    if !(margins.c1_dimension > 0.0 && margins.c1_balance > 0.0) {
        return Err(ModelError::C1Fails {
            dimension_margin: margins.c1_dimension,
            balance_margin: margins.c1_balance,
        });
    }
    if !(epsilon > 0.0 && epsilon < params.epsilon_max()) {
        return Err(invalid(
            "epsilon",
            format!(
                "must lie in (0, {}) for q < 1, got {epsilon}",
                params.epsilon_max()
            ),
        ));
    }
    let q = params.lambda_minus * (2.0 * params.r_plus + d + epsilon)
        / (params.lambda_plus * (2.0 * params.r_minus - d - epsilon));
    Ok(EpsilonQ { epsilon, q })
}

/// Absolute residual of (lle) and the scale `max(|lhs|, |rhs|)` it should be compared to.
pub fn lle_residual(params: &ModelParams, eq: EpsilonQ) -> (f64, f64) {
    let d = params.d as f64;
    let lhs = params.lambda_minus * (2.0 * params.r_plus + d + eq.epsilon);
    let rhs = eq.q * params.lambda_plus * (2.0 * params.r_minus - d - eq.epsilon);
    ((lhs - rhs).abs(), lhs.abs().max(rhs.abs()))
}

pub type DriftFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// One regime's drift field.
#[derive(Clone)]
pub enum DriftField {
    Zero,
    /// `x -> strength * x / max(|x|^2, inner_radius^2)`; `x . b(x) = strength` outside the ball.
    Radial { strength: f64, inner_radius: f64 },
    Custom(Arc<DriftFn>),
}

impl fmt::Debug for DriftField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftField::Zero => write!(f, "Zero"),
            DriftField::Radial {
                strength,
                inner_radius,
            } => f
                .debug_struct("Radial")
                .field("strength", strength)
                .field("inner_radius", inner_radius)
                .finish(),
            DriftField::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl DriftField {
    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            DriftField::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            DriftField::Radial {
                strength,
                inner_radius,
            } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let scale = strength / r2.max(inner_radius * inner_radius);
                for (o, v) in out.iter_mut().zip(x) {
                    *o = scale * v;
                }
            }
            DriftField::Custom(f) => f(x, out),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.eval_into(x, &mut out);
        out
    }
}

/// The pair `(b_-, b_+)` with its declared sup-norm.
#[derive(Debug, Clone)]
pub struct DriftSpec {
    pub minus: DriftField,
    pub plus: DriftField,
    pub norm_bound: f64,
}

impl DriftSpec {
    #[inline]
    pub fn field(&self, z: Regime) -> &DriftField {
        match z {
            Regime::Minus => &self.minus,
            Regime::Plus => &self.plus,
        }
    }

    pub fn zero() -> Self {
        DriftSpec {
            minus: DriftField::Zero,
            plus: DriftField::Zero,
            norm_bound: 0.0,
        }
    }
}

/// Radial reference family meeting (b) and (b2) with equality outside the ball:
/// `b_-(x) = -kappa_- x / max(|x|^2, M^2)`, `b_+(x) = kappa_+ x / max(|x|^2, M^2)`.
pub fn canonical_model(
    params: &ModelParams,
    kappa_minus: f64,
    kappa_plus: f64,
) -> Result<DriftSpec, ModelError> {
    for (name, k) in [("kappa_minus", kappa_minus), ("kappa_plus", kappa_plus)] {
        if !(k.is_finite() && k > 0.0) {
            return Err(invalid(name, format!("must be positive, got {k}")));
        }
    }
    if !(params.m.is_finite() && params.m > 0.0) {
        return Err(invalid("M", format!("must be positive, got {}", params.m)));
    }
    Ok(DriftSpec {
        minus: DriftField::Radial {
            strength: -kappa_minus,
            inner_radius: params.m,
        },
        plus: DriftField::Radial {
            strength: kappa_plus,
            inner_radius: params.m,
        },
        norm_bound: kappa_minus.max(kappa_plus) / params.m,
    })
}

/// Outcome of a sampled check of (b), (b2) and the declared norm bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftAudit {
    pub samples: usize,
    pub b_violations: usize,
    pub b2_violations: usize,
    pub norm_violations: usize,
    /// Largest amount by which any inequality was exceeded (0 when none).
    pub worst_violation: f64,
    /// Observed `sup |x . b(x, z)|` over all audited positions (inside and outside the ball).
    pub max_abs_inner: f64,
    pub max_norm: f64,
}

impl DriftAudit {
    pub fn holds_b(&self) -> bool {
        self.b_violations == 0
    }

    pub fn holds_b2(&self) -> bool {
        self.b2_violations == 0
    }

    pub fn holds_norm(&self) -> bool {
        self.norm_violations == 0
    }

    pub fn clean(&self) -> bool {
        self.holds_b() && self.holds_b2() && self.holds_norm()
    }
}

/// Relative tolerance on inner-product and norm comparisons in the audit.
pub const AUDIT_REL_TOL: f64 = 1e-12;

fn random_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|a| a / n).collect();
        }
    }
}

/// Samples `n_samples` positions with `|x|` log-uniform in `[M, max_ratio * M]` and
/// as many inside the ball, checking (b) and (b2) outside and the norm bound everywhere.
pub fn drift_bounds_audit<R: Rng + ?Sized>(
    spec: &DriftSpec,
    params: &ModelParams,
    n_samples: usize,
    max_ratio: f64,
    rng: &mut R,
) -> Result<DriftAudit, ModelError> {
    if n_samples == 0 {
        return Err(invalid("n_samples", "need at least one sample"));
    }
    if !(max_ratio >= 1.0) {
        return Err(invalid("max_ratio", format!("must be >= 1, got {max_ratio}")));
    }
    let d = params.d;
    let mut audit = DriftAudit {
        samples: n_samples,
        b_violations: 0,
        b2_violations: 0,
        norm_violations: 0,
        worst_violation: 0.0,
        max_abs_inner: 0.0,
        max_norm: 0.0,
    };
    let mut b = vec![0.0; d];
    let log_span = max_ratio.ln();
    let norm_tol = spec.norm_bound * AUDIT_REL_TOL + f64::MIN_POSITIVE;

    let check_norm = |audit: &mut DriftAudit, b: &[f64]| {
        let n = b.iter().map(|a| a * a).sum::<f64>().sqrt();
        audit.max_norm = audit.max_norm.max(n);
        if n > spec.norm_bound + norm_tol {
            audit.norm_violations += 1;
            audit.worst_violation = audit.worst_violation.max(n - spec.norm_bound);
        }
    };

    for _ in 0..n_samples {
        let dir = random_direction(d, rng);
        let u: f64 = rng.random();
        let radius = params.m * (u * log_span).exp();
        let x: Vec<f64> = dir.iter().map(|a| a * radius).collect();
        for z in [Regime::Minus, Regime::Plus] {
            spec.field(z).eval_into(&x, &mut b);
            let inner: f64 = x.iter().zip(&b).map(|(a, c)| a * c).sum();
            audit.max_abs_inner = audit.max_abs_inner.max(inner.abs());
            check_norm(&mut audit, &b);
            // upper bound is (b), lower bound is (b2)
            let (lo, hi) = match z {
                Regime::Minus => (-params.big_r_minus, -params.r_minus),
                Regime::Plus => (params.big_r_plus, params.r_plus),
            };
            let tol_hi = hi.abs() * AUDIT_REL_TOL;
            let tol_lo = lo.abs() * AUDIT_REL_TOL;
            if inner > hi + tol_hi {
                audit.b_violations += 1;
                audit.worst_violation = audit.worst_violation.max(inner - hi);
            }
            if inner < lo - tol_lo {
                audit.b2_violations += 1;
                audit.worst_violation = audit.worst_violation.max(lo - inner);
            }
        }

        let dir = random_direction(d, rng);
        let u: f64 = rng.random();
        let x: Vec<f64> = dir.iter().map(|a| a * params.m * u).collect();
        for z in [Regime::Minus, Regime::Plus] {
            spec.field(z).eval_into(&x, &mut b);
            let inner: f64 = x.iter().zip(&b).map(|(a, c)| a * c).sum();
            audit.max_abs_inner = audit.max_abs_inner.max(inner.abs());
            check_norm(&mut audit, &b);
        }
    }
    Ok(audit)
}
