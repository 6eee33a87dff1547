//! The embedded chain `Y_n = X_{T_2n}`, the cycle-count `N`, and the
//! martingale `S_n = sum_{i<n} (eta_i - c1)` built from cycle durations.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{norm_pow, Engine, EngineError, TauRun};
use crate::error::Result;
use crate::estimators::{hitting_moments, replicate, summarise, Ensemble, MIN_REPLICAS};
use crate::model::{EpsilonQ, ModelParams, Regime};
use crate::stats::{MomentEstimate, StatsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("run was censored at t = {tau}; the decomposition needs a completed run")]
    Censored { tau: f64 },
    #[error("tau = {tau} but T0 + c1 N + S_N = {rebuilt}")]
    Identity { tau: f64, rebuilt: f64 },
    #[error("moment index m must be 1, 2 or 3, got {0}")]
    MomentIndex(u32),
}

/// One state of the embedded chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedSample {
    pub y: Vec<f64>,
    pub n: u64,
    pub stopped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleConstants {
    /// Mean cycle duration.
    pub c1: f64,
    /// Slope of the compensator of `S_n`.
    pub c2: f64,
}

pub fn martingale_constants(params: &ModelParams) -> MartingaleConstants {
    let (a, b) = (1.0 / params.lambda_minus, 1.0 / params.lambda_plus);
    MartingaleConstants {
        c1: a + b,
        c2: 2.0 * (a * a + a * b + b * b),
    }
}

/// Variance of one cycle duration `eta = Exp(lambda_-) + Exp(lambda_+)`.
pub fn cycle_duration_variance(params: &ModelParams) -> f64 {
    params.lambda_minus.powi(-2) + params.lambda_plus.powi(-2)
}

/// `c = ((2r_- - d) - eps)/lambda_- - ((2r_+ + d) + eps)/lambda_+`, the
/// per-cycle decrease of `|Y|^2` outside the ball.
pub fn lemma11_constant(params: &ModelParams, eq: EpsilonQ) -> f64 {
    let d = params.d as f64;
    ((2.0 * params.r_minus - d) - eq.epsilon) / params.lambda_minus - ((2.0 * params.r_plus + d) + eq.epsilon) / params.lambda_plus
}

/// `delta = eps / (lambda_- (2 M |b| + 2 r_-))`, the occupation budget that
/// makes the one-interval second-moment bounds hold.
pub fn lemma2_delta(params: &ModelParams, eq: EpsilonQ, norm_bound: f64) -> f64 {
    eq.epsilon / (params.lambda_minus * (2.0 * params.m * norm_bound + 2.0 * params.r_minus))
}

/// Follows the embedded chain from `y0` until it stops or `max_cycles` cycles elapse.
pub fn trace_embedded_chain<R: Rng + ?Sized>(
    engine: &Engine,
    y0: &[f64],
    max_cycles: u64,
    rng: &mut R,
) -> std::result::Result<Vec<EmbeddedSample>, EngineError> {
    let m1_sq = engine.params.m1 * engine.params.m1;
    let mut out = Vec::new();
    let mut y = y0.to_vec();
    for n in 0..=max_cycles {
        let stopped = norm_pow(&y, 2) <= m1_sq;
        out.push(EmbeddedSample {
            y: y.clone(),
            n,
            stopped,
        });
        if stopped || n == max_cycles {
            break;
        }
        let rec = engine.simulate_cycle(&y, rng)?;
        y = rec.y_next().to_vec();
    }
    Ok(out)
}

/// `E[|Y_1|^{2m} | Y_0 = y] - |y|^{2m}` from a restart ensemble of single
/// cycles, with the martingale part of each path subtracted as a control.
pub fn conditional_moment_drift(engine: &Engine, y: &[f64], m: u32, ens: &Ensemble) -> Result<MomentEstimate> {
    if !(1..=3).contains(&m) {
        return Err(ChainError::MomentIndex(m).into());
    }
    if ens.replicas < MIN_REPLICAS {
        return Err(StatsError::TooFewSamples {
            needed: MIN_REPLICAS,
            got: ens.replicas,
        }
        .into());
    }
    let power = 2 * m;
    if norm_pow(y, 2) <= engine.params.m1 * engine.params.m1 {
        let mut e = MomentEstimate::exact(0.0);
        e.n = ens.replicas;
        return Ok(e);
    }
    let vals = replicate(ens.replicas, ens.seed, |rng| {
        let (raw, control) = engine.cycle_change_cv(y, power, rng)?;
        Ok(raw - control)
    })?;
    Ok(MomentEstimate::from_samples(&vals, ens.level)?)
}

/// `tau = T0 + c1 N + S_N` for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauDecomposition {
    pub t0: f64,
    pub n: u64,
    pub s_n: f64,
}

/// Relative tolerance of the per-sample identity.
pub const DECOMPOSITION_TOL: f64 = 1e-9;

pub fn decompose_tau(run: &TauRun, k: &MartingaleConstants) -> std::result::Result<TauDecomposition, ChainError> {
    if run.censored {
        return Err(ChainError::Censored { tau: run.tau });
    }
    let s_n: f64 = run.cycle_durations.iter().map(|eta| eta - k.c1).sum();
    let n = run.cycle_durations.len() as u64;
    let rebuilt = run.t0 + k.c1 * n as f64 + s_n;
    if (rebuilt - run.tau).abs() > DECOMPOSITION_TOL * run.tau.max(1.0) {
        return Err(ChainError::Identity { tau: run.tau, rebuilt });
    }
    Ok(TauDecomposition { t0: run.t0, n, s_n })
}

/// `E N` and `E N^2` from `(x, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleCount {
    pub en: MomentEstimate,
    pub en2: MomentEstimate,
    pub censored_fraction: f64,
}

pub fn estimate_en(engine: &Engine, x: &[f64], z: Regime, ens: &Ensemble) -> Result<CycleCount> {
    let h = hitting_moments(engine, x, z, ens, 0)?;
    Ok(CycleCount {
        en: h.n,
        en2: h.n_sq,
        censored_fraction: h.censored_fraction,
    })
}

/// Ensemble summary of the decomposition: mean of `S_N` and the number of
/// samples on which the identity failed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCheck {
    pub s_n: MomentEstimate,
    pub identity_failures: usize,
    /// Samples with `tau_M1 > tau`.
    pub dominance_violations: usize,
    pub censored: usize,
    pub samples: usize,
}

pub fn decomposition_check(engine: &Engine, x: &[f64], z: Regime, ens: &Ensemble) -> Result<DecompositionCheck> {
    let k = martingale_constants(engine.params);
    let rows = replicate(ens.replicas, ens.seed, |rng| {
        let run = engine.run_to_tau(x, z, rng)?;
        let dominated = !run.censored && run.tau_m1.is_some_and(|t| t > run.tau);
        Ok(match decompose_tau(&run, &k) {
            Ok(dec) => (Some(dec.s_n), false, false, dominated),
            Err(ChainError::Censored { .. }) => (None, false, true, dominated),
            Err(_) => (None, true, false, dominated),
        })
    })?;
    let s: Vec<f64> = rows.iter().filter_map(|r| r.0).collect();
    Ok(DecompositionCheck {
        s_n: summarise(&s, ens.level)?,
        identity_failures: rows.iter().filter(|r| r.1).count(),
        dominance_violations: rows.iter().filter(|r| r.3).count(),
        censored: rows.iter().filter(|r| r.2).count(),
        samples: rows.len(),
    })
}
