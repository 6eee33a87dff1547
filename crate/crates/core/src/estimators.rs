//! Monte Carlo estimators built on restart ensembles.
//!
//! Replica `i` of an ensemble always draws from `stream_rng(seed, i)` and the
//! per-replica outputs are collected in index order before any reduction, so
//! results do not depend on how rayon schedules the work.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::coupled::{CoupledEngine, COARSE, FINE};
use crate::engine::{norm_pow, Engine, EngineError, Upto};
use crate::error::Result;
use crate::model::Regime;
use crate::rng::{derive_seed, stream_rng, StreamRng};
use crate::stats::{bootstrap_mean, wls_line, wls_poly, z_value, MomentEstimate, PolyFit, StatsError};

/// Smallest ensemble for which a normal interval is reported.
pub const MIN_REPLICAS: usize = 100;

/// Ensemble size, confidence level and seed for one estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ensemble {
    pub replicas: usize,
    pub level: f64,
    pub seed: u64,
    /// Censoring above this fraction marks an estimate as aborted.
    pub max_censored: f64,
}

impl Ensemble {
    pub fn new(replicas: usize, level: f64, seed: u64) -> std::result::Result<Self, StatsError> {
        if replicas < MIN_REPLICAS {
            return Err(StatsError::TooFewSamples {
                needed: MIN_REPLICAS,
                got: replicas,
            });
        }
        z_value(level)?;
        Ok(Ensemble {
            replicas,
            level,
            seed,
            max_censored: 1e-3,
        })
    }

    /// Same settings with a seed derived from `label`.
    pub fn child(&self, label: &str) -> Self {
        Ensemble {
            seed: derive_seed(self.seed, label),
            ..*self
        }
    }

    pub fn with_replicas(&self, replicas: usize) -> std::result::Result<Self, StatsError> {
        let mut e = Ensemble::new(replicas, self.level, self.seed)?;
        e.max_censored = self.max_censored;
        Ok(e)
    }
}

/// Runs `f` once per replica on its own stream and returns outputs in replica order.
pub fn replicate<T, F>(n: usize, seed: u64, f: F) -> std::result::Result<Vec<T>, EngineError>
where
    T: Send,
    F: Fn(&mut StreamRng) -> std::result::Result<T, EngineError> + Sync,
{
    let out: Vec<std::result::Result<T, EngineError>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            f(&mut rng)
        })
        .collect();
    out.into_iter().collect()
}

fn check_power(power: u32) -> std::result::Result<(), EngineError> {
    if matches!(power, 2 | 4 | 6) {
        Ok(())
    } else {
        Err(EngineError::InvalidConfig(format!("power must be 2, 4 or 6, got {power}")))
    }
}

/// `E |X_t|^power` from `(x, z)`.
pub fn moment_at_time(engine: &Engine, x: &[f64], z: Regime, t: f64, power: u32, ens: &Ensemble) -> Result<MomentEstimate> {
    check_power(power)?;
    if t == 0.0 {
        return Ok(MomentEstimate::exact(norm_pow(x, power)));
    }
    if !(t > 0.0 && t <= engine.cfg.horizon) {
        return Err(EngineError::InvalidDuration(t).into());
    }
    let vals = replicate(ens.replicas, ens.seed, |rng| {
        let s = engine.states_at(x, z, &[t], rng)?;
        Ok(norm_pow(&s[0].0, power))
    })?;
    Ok(MomentEstimate::from_samples(&vals, ens.level)?)
}

/// `E[|X_T|^power - |x|^power]` over one holding interval in regime `z`,
/// with the martingale part of each path subtracted as a control.
pub fn interval_moment_change(engine: &Engine, x: &[f64], z: Regime, power: u32, ens: &Ensemble) -> Result<MomentEstimate> {
    check_power(power)?;
    let vals = replicate(ens.replicas, ens.seed, |rng| {
        let (raw, control) = engine.interval_change_cv(x, z, power, rng)?;
        Ok(raw - control)
    })?;
    Ok(MomentEstimate::from_samples(&vals, ens.level)?)
}

/// The four (start regime, end) pairs used by the occupation bound.
pub const OCCUPATION_CASES: [(Regime, Upto); 4] = [
    (Regime::Minus, Upto::T1),
    (Regime::Minus, Upto::T2),
    (Regime::Plus, Upto::T0),
    (Regime::Plus, Upto::T1),
];

/// `E int_0^T 1(inf_{s<=t} |X_s| <= M) dt` up to the jump time `upto`.
pub fn occupation_near_ball(engine: &Engine, x: &[f64], z: Regime, upto: Upto, ens: &Ensemble) -> Result<MomentEstimate> {
    let vals = replicate(ens.replicas, ens.seed, |rng| engine.occupation_near_ball(x, z, upto, rng))?;
    Ok(MomentEstimate::from_samples(&vals, ens.level)?)
}

/// Moments of the embedded and continuous return times from one start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingMoments {
    pub tau: MomentEstimate,
    pub tau_sq: MomentEstimate,
    pub tau_m1: MomentEstimate,
    pub tau_m1_sq: MomentEstimate,
    pub n: MomentEstimate,
    pub n_sq: MomentEstimate,
    pub censored_fraction: f64,
    /// Second moments are unreliable once censoring exceeds 0.1%.
    pub second_moments_reliable: bool,
    /// Samples with `tau_M1 > tau`; always zero for a correct engine.
    pub dominance_violations: usize,
}

/// Per-replica output of a run to `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TauSample {
    tau: f64,
    tau_m1: f64,
    n: f64,
    censored: bool,
}

/// Return-time moments. Censored samples enter at their censoring time, so
/// the means are lower bounds when `censored_fraction > 0`. Second moments
/// carry percentile-bootstrap intervals when `bootstrap_resamples > 0`.
pub fn hitting_moments(engine: &Engine, x: &[f64], z: Regime, ens: &Ensemble, bootstrap_resamples: usize) -> Result<HittingMoments> {
    let samples = replicate(ens.replicas, ens.seed, |rng| {
        let run = engine.run_to_tau(x, z, rng)?;
        Ok(TauSample {
            tau: run.tau,
            tau_m1: run.tau_m1.unwrap_or(run.tau),
            n: run.n_cycles as f64,
            censored: run.censored,
        })
    })?;
    let total = samples.len();
    let censored = samples.iter().filter(|s| s.censored).count();
    let dominance_violations = samples.iter().filter(|s| !s.censored && s.tau_m1 > s.tau).count();
    let col = |f: &dyn Fn(&TauSample) -> f64| samples.iter().map(f).collect::<Vec<f64>>();
    let first = |v: Vec<f64>| -> Result<MomentEstimate> {
        Ok(summarise(&v, ens.level)?.with_censoring(censored, total, ens.max_censored))
    };
    let second = |v: Vec<f64>, label: &str| -> Result<MomentEstimate> {
        let est = if bootstrap_resamples > 0 && !is_constant(&v) {
            bootstrap_mean(&v, ens.level, bootstrap_resamples, derive_seed(ens.seed, label))?
        } else {
            summarise(&v, ens.level)?
        };
        Ok(est.with_censoring(censored, total, ens.max_censored))
    };
    let censored_fraction = censored as f64 / total as f64;
    Ok(HittingMoments {
        tau: first(col(&|s| s.tau))?,
        tau_sq: second(col(&|s| s.tau * s.tau), "bootstrap/tau2")?,
        tau_m1: first(col(&|s| s.tau_m1))?,
        tau_m1_sq: second(col(&|s| s.tau_m1 * s.tau_m1), "bootstrap/tau_m1_2")?,
        n: first(col(&|s| s.n))?,
        n_sq: second(col(&|s| s.n * s.n), "bootstrap/n2")?,
        censored_fraction,
        second_moments_reliable: censored_fraction <= 1e-3,
        dominance_violations,
    })
}

fn is_constant(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

/// Mean with interval; a constant sample (e.g. every replica already inside
/// the ball) is reported as exact.
pub fn summarise(v: &[f64], level: f64) -> std::result::Result<MomentEstimate, StatsError> {
    if !v.is_empty() && is_constant(v) && v[0].is_finite() {
        let mut e = MomentEstimate::exact(v[0]);
        e.n = v.len();
        return Ok(e);
    }
    MomentEstimate::from_samples(v, level)
}

/// Log-log growth of a moment in the starting radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub exponent: f64,
    pub exponent_se: f64,
    /// Upper end of the one-sided interval at the fit's confidence level.
    pub exponent_ci_hi: f64,
    pub intercept: f64,
    pub r2: f64,
    pub radii: Vec<f64>,
}

/// Weighted fit of `log mean` on `log radius`, weights from the delta-method
/// standard error `se / mean`.
pub fn growth_exponent(values: &[MomentEstimate], radii: &[f64], level: f64) -> std::result::Result<GrowthFit, StatsError> {
    if radii.len() < 3 || values.len() != radii.len() {
        return Err(StatsError::TooFewSamples {
            needed: 3,
            got: radii.len().min(values.len()),
        });
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
        return Err(StatsError::DegenerateFit("radii must be positive and strictly increasing".into()));
    }
    if let Some(i) = values.iter().position(|v| !(v.mean > 0.0)) {
        return Err(StatsError::DegenerateFit(format!("non-positive mean at radius {}", radii[i])));
    }
    let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.mean.ln()).collect();
    let sigma: Vec<f64> = values.iter().map(|v| (v.se / v.mean).max(1e-9)).collect();
    let fit = wls_line(&lx, &ly, &sigma)?;
    let z = z_value(2.0 * level - 1.0)?;
    Ok(GrowthFit {
        exponent: fit.slope,
        exponent_se: fit.slope_se,
        exponent_ci_hi: fit.slope + z * fit.slope_se,
        intercept: fit.intercept,
        r2: fit.r2,
        radii: radii.to_vec(),
    })
}

/// Weighted polynomial fit of estimated changes against radius.
pub fn fit_moment_change(radii: &[f64], values: &[MomentEstimate], powers: &[u32]) -> std::result::Result<PolyFit, StatsError> {
    let y: Vec<f64> = values.iter().map(|v| v.mean).collect();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.se));
    let sigma: Vec<f64> = values.iter().map(|v| v.se.max(1e-9 * scale.max(1.0))).collect();
    wls_poly(radii, &y, &sigma, powers)
}

/// Coarse and fine estimates of the same expectation and their paired change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtHalving {
    pub coarse: MomentEstimate,
    pub fine: MomentEstimate,
    pub change: MomentEstimate,
}

impl DtHalving {
    /// `|fine - coarse|` measured in standard errors of the coarse estimate.
    pub fn change_in_se(&self) -> f64 {
        if self.coarse.se > 0.0 {
            (self.fine.mean - self.coarse.mean).abs() / self.coarse.se
        } else if self.fine.mean == self.coarse.mean {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Runs a coupled coarse/fine functional over the ensemble.
pub fn dt_halving<F>(engine: &Engine, ens: &Ensemble, f: F) -> Result<DtHalving>
where
    F: Fn(&CoupledEngine, &mut StreamRng) -> std::result::Result<[f64; 2], EngineError> + Sync,
{
    let coupled = CoupledEngine::new(*engine);
    let pairs = replicate(ens.replicas, ens.seed, |rng| f(&coupled, rng))?;
    let coarse: Vec<f64> = pairs.iter().map(|p| p[COARSE]).collect();
    let fine: Vec<f64> = pairs.iter().map(|p| p[FINE]).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p[FINE] - p[COARSE]).collect();
    Ok(DtHalving {
        coarse: summarise(&coarse, ens.level)?,
        fine: summarise(&fine, ens.level)?,
        change: summarise(&diff, ens.level)?,
    })
}

/// Total-variation distances of the radial marginal of `(X_t, Z_t)` to the
/// marginal at a late reference time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvDecay {
    pub times: Vec<f64>,
    pub tv: Vec<f64>,
    pub reference_time: f64,
    /// TV between the two halves of the reference ensemble.
    pub noise_floor: f64,
    /// Fraction of samples beyond the histogram range.
    pub overflow_fraction: f64,
    pub undercovered: bool,
    pub non_increasing: bool,
    /// Slope of `log TV` against `log(1 + t)` over points above the noise floor.
    pub slope: Option<f64>,
}

fn radial_histogram(samples: &[(f64, Regime)], bins: usize, r_max: f64) -> Vec<f64> {
    let mut h = vec![0.0; 2 * bins];
    let w = 1.0 / samples.len() as f64;
    for &(r, z) in samples {
        let k = ((r / r_max) * bins as f64).floor() as usize;
        h[z.index() as usize * bins + k.min(bins - 1)] += w;
    }
    h
}

fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Histograms `|X|` on `[0, r_max)` with `bins` cells per regime; mass beyond
/// `r_max` goes to the last cell and is flagged when above 0.1%.
pub fn tv_decay(
    engine: &Engine,
    x: &[f64],
    z: Regime,
    t_grid: &[f64],
    reference_time: f64,
    bins: usize,
    r_max: f64,
    ens: &Ensemble,
) -> Result<TvDecay> {
    if bins == 0 || !(r_max > 0.0) {
        return Err(EngineError::InvalidConfig("histogram needs bins > 0 and r_max > 0".into()).into());
    }
    if t_grid.iter().any(|&t| t > reference_time) {
        return Err(EngineError::InvalidConfig("reference time must exceed every grid time".into()).into());
    }
    let mut times = t_grid.to_vec();
    times.push(reference_time);
    let snaps = replicate(ens.replicas, ens.seed, |rng| {
        let states = engine.states_at(x, z, &times, rng)?;
        Ok(states.into_iter().map(|(s, r)| (norm_pow(&s, 2).sqrt(), r)).collect::<Vec<_>>())
    })?;
    let k_ref = t_grid.len();
    let column = |k: usize| snaps.iter().map(|row| row[k]).collect::<Vec<_>>();
    let reference = column(k_ref);
    let ref_hist = radial_histogram(&reference, bins, r_max);
    let half = reference.len() / 2;
    let noise_floor = tv_distance(
        &radial_histogram(&reference[..half], bins, r_max),
        &radial_histogram(&reference[half..], bins, r_max),
    );
    let mut overflow = 0usize;
    let mut tv = Vec::with_capacity(k_ref);
    for k in 0..k_ref {
        let col = column(k);
        overflow += col.iter().filter(|(r, _)| *r >= r_max).count();
        tv.push(tv_distance(&radial_histogram(&col, bins, r_max), &ref_hist));
    }
    overflow += reference.iter().filter(|(r, _)| *r >= r_max).count();
    let overflow_fraction = overflow as f64 / (snaps.len() * times.len()) as f64;
    let non_increasing = tv.windows(2).all(|w| w[1] <= w[0] + noise_floor);
    let (lx, ly): (Vec<f64>, Vec<f64>) = t_grid
        .iter()
        .zip(&tv)
        .filter(|(_, &v)| v > noise_floor && v > 0.0)
        .map(|(t, v)| ((1.0 + t).ln(), v.ln()))
        .unzip();
    let slope = if lx.len() >= 2 {
        wls_line(&lx, &ly, &vec![1.0; lx.len()]).ok().map(|f| f.slope)
    } else {
        None
    };
    Ok(TvDecay {
        times: t_grid.to_vec(),
        tv,
        reference_time,
        noise_floor,
        overflow_fraction,
        undercovered: overflow_fraction > 1e-3,
        non_increasing,
        slope,
    })
}

/// One radius visited by the doubling search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M1Step {
    pub radius: f64,
    /// Largest occupation estimate over the four start/stop cases.
    pub worst: MomentEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M1Search {
    pub m1: f64,
    pub delta: f64,
    pub found: bool,
    pub trail: Vec<M1Step>,
}

/// Doubles the radius from `2M` until the upper confidence limit of every
/// occupation estimate started at that radius falls below `delta`.
pub fn search_m1(engine: &Engine, delta: f64, max_doublings: u32, ens: &Ensemble) -> Result<M1Search> {
    let d = engine.params.d;
    let mut trail = Vec::new();
    let mut radius = 2.0 * engine.params.m;
    for k in 0..max_doublings.max(1) {
        let mut x = vec![0.0; d];
        x[0] = radius;
        let mut worst: Option<MomentEstimate> = None;
        for (i, (z, upto)) in OCCUPATION_CASES.iter().enumerate() {
            let est = occupation_near_ball(engine, &x, *z, *upto, &ens.child(&format!("m1-search/{k}/{i}")))?;
            if worst.is_none_or(|w| est.ci_hi > w.ci_hi) {
                worst = Some(est);
            }
        }
        let worst = worst.expect("four cases");
        let done = worst.ci_hi < delta;
        trail.push(M1Step { radius, worst });
        if done {
            return Ok(M1Search {
                m1: radius,
                delta,
                found: true,
                trail,
            });
        }
        radius *= 2.0;
    }
    Ok(M1Search {
        m1: radius / 2.0,
        delta,
        found: false,
        trail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(mean: f64, se: f64) -> MomentEstimate {
        MomentEstimate {
            se,
            ci_lo: mean - 2.0 * se,
            ci_hi: mean + 2.0 * se,
            ..MomentEstimate::exact(mean)
        }
    }

    #[test]
    fn growth_exponent_of_exact_quadratic() {
        let radii = [2.0, 4.0, 8.0, 16.0];
        let vals: Vec<_> = radii.iter().map(|r: &f64| est(3.0 * r * r, 0.01 * r * r)).collect();
        let fit = growth_exponent(&vals, &radii, 0.99).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-9);
        assert!(fit.exponent_ci_hi > fit.exponent);
    }

    #[test]
    fn growth_exponent_rejects_bad_input() {
        let radii = [1.0, 2.0, 3.0];
        assert!(growth_exponent(&[est(1.0, 0.1), est(0.0, 0.1), est(2.0, 0.1)], &radii, 0.99).is_err());
        assert!(growth_exponent(&[est(1.0, 0.1), est(2.0, 0.1)], &radii[..2], 0.99).is_err());
        assert!(growth_exponent(&[est(1.0, 0.1); 3], &[1.0, 1.0, 2.0], 0.99).is_err());
    }

    #[test]
    fn replicate_is_ordered_and_reproducible() {
        use rand::Rng;
        let a = replicate(64, 7, |rng| Ok(rng.random::<u64>())).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| replicate(64, 7, |rng| Ok(rng.random::<u64>())).unwrap());
        assert_eq!(a, b);
        assert_eq!(a[5], stream_rng(7, 5).random::<u64>());
    }

    #[test]
    fn ensemble_floor() {
        assert!(Ensemble::new(99, 0.95, 1).is_err());
        assert!(Ensemble::new(100, 0.95, 1).is_ok());
        assert_ne!(Ensemble::new(100, 0.95, 1).unwrap().child("a").seed, 1);
    }

    #[test]
    fn tv_of_identical_histograms_is_zero() {
        let s = vec![(0.5, Regime::Minus), (1.5, Regime::Plus)];
        let h = radial_histogram(&s, 4, 2.0);
        assert_eq!(tv_distance(&h, &h), 0.0);
        let g = radial_histogram(&[(0.5, Regime::Plus), (1.5, Regime::Plus)], 4, 2.0);
        assert!((tv_distance(&h, &g) - 0.5).abs() < 1e-15);
    }
}
