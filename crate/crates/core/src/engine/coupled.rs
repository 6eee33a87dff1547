//! Coarse (`dt`) and fine (`dt/2`) Euler paths driven by the same Brownian
//! increments and the same regime clocks.
//!
//! Each coarse increment is the sum of the two fine increments it spans, so
//! the difference between the two levels isolates the discretisation error.
//! This is the oracle behind the dt-halving checks.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{guard, norm_sq, sample_holding_time, step_count, Engine, EngineError};
use crate::model::{DriftField, Regime};

pub const COARSE: usize = 0;
pub const FINE: usize = 1;

/// Per-level result of a coupled run to `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelTau {
    pub tau: f64,
    pub tau_m1: Option<f64>,
    pub n_cycles: u64,
    pub censored: bool,
}

struct Scratch {
    drift: Vec<f64>,
    xi1: Vec<f64>,
    xi2: Vec<f64>,
}

impl Scratch {
    fn new(d: usize) -> Self {
        Scratch {
            drift: vec![0.0; d],
            xi1: vec![0.0; d],
            xi2: vec![0.0; d],
        }
    }
}

#[inline]
fn drift_step(x: &mut [f64], field: &DriftField, h: f64, noise: &[f64], scale: f64, drift: &mut [f64]) {
    field.eval_into(x, drift);
    for ((xk, bk), nk) in x.iter_mut().zip(drift.iter()).zip(noise) {
        *xk += bk * h + scale * nk;
    }
}

/// Advances both levels over `[0, duration]`. Inactive levels are frozen but the
/// shared noise is still drawn. `observe(level, t, x)` returning true deactivates
/// that level; its stop time is reported.
#[allow(clippy::too_many_arguments)]
fn advance_pair<R, F>(
    xs: &mut [Vec<f64>; 2],
    active: &mut [bool; 2],
    field: &DriftField,
    duration: f64,
    dt: f64,
    rng: &mut R,
    scratch: &mut Scratch,
    mut observe: F,
) -> Result<[Option<f64>; 2], EngineError>
where
    R: Rng + ?Sized,
    F: FnMut(usize, f64, &[f64]) -> bool,
{
    let mut stops = [None, None];
    let half = 0.5 * dt;
    let n = step_count(duration, dt);
    for k in 0..n {
        if !active[COARSE] && !active[FINE] {
            break;
        }
        let t_prev = k as f64 * dt;
        let t_next = if k + 1 == n { duration } else { (k + 1) as f64 * dt };
        let h = t_next - t_prev;
        let h1 = half.min(h);
        let h2 = h - h1;
        for v in scratch.xi1.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        if h2 > 0.0 {
            for v in scratch.xi2.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
        }
        let (s1, s2) = (h1.sqrt(), h2.sqrt());

        if active[FINE] {
            let x = &mut xs[FINE];
            drift_step(x, field, h1, &scratch.xi1, s1, &mut scratch.drift);
            guard(x, t_prev + h1)?;
            if observe(FINE, t_prev + h1, x) {
                active[FINE] = false;
                stops[FINE] = Some(t_prev + h1);
            } else if h2 > 0.0 {
                drift_step(x, field, h2, &scratch.xi2, s2, &mut scratch.drift);
                guard(x, t_next)?;
                if observe(FINE, t_next, x) {
                    active[FINE] = false;
                    stops[FINE] = Some(t_next);
                }
            }
        }
        if active[COARSE] {
            let x = &mut xs[COARSE];
            field.eval_into(x, &mut scratch.drift);
            for (((xk, bk), a), b) in x
                .iter_mut()
                .zip(scratch.drift.iter())
                .zip(&scratch.xi1)
                .zip(&scratch.xi2)
            {
                let dw = s1 * a + if h2 > 0.0 { s2 * b } else { 0.0 };
                *xk += bk * h + dw;
            }
            guard(x, t_next)?;
            if observe(COARSE, t_next, x) {
                active[COARSE] = false;
                stops[COARSE] = Some(t_next);
            }
        }
    }
    Ok(stops)
}

/// Coupled simulator whose coarse step is the engine's `dt`.
#[derive(Debug, Clone, Copy)]
pub struct CoupledEngine<'a> {
    pub engine: Engine<'a>,
}

impl<'a> CoupledEngine<'a> {
    pub fn new(engine: Engine<'a>) -> Self {
        CoupledEngine { engine }
    }

    fn dt(&self) -> f64 {
        self.engine.cfg.dt
    }

    /// `X_t` on both levels for the switching process started at `(x, z)`.
    pub fn state_at<R: Rng + ?Sized>(&self, x: &[f64], z: Regime, t: f64, rng: &mut R) -> Result<[Vec<f64>; 2], EngineError> {
        self.engine.check_dim(x)?;
        let params = self.engine.params;
        let mut xs = [x.to_vec(), x.to_vec()];
        let mut scratch = Scratch::new(x.len());
        let mut now = 0.0;
        let mut regime = z;
        while now < t {
            let dur = sample_holding_time(regime, params, rng);
            let len = dur.min(t - now);
            let mut active = [true, true];
            advance_pair(&mut xs, &mut active, self.engine.spec.field(regime), len, self.dt(), rng, &mut scratch, |_, _, _| false)?;
            now += len;
            regime = regime.other();
        }
        Ok(xs)
    }

    /// End of one holding interval in regime `z` on both levels.
    pub fn interval_end<R: Rng + ?Sized>(&self, x: &[f64], z: Regime, rng: &mut R) -> Result<[Vec<f64>; 2], EngineError> {
        self.engine.check_dim(x)?;
        let mut xs = [x.to_vec(), x.to_vec()];
        let mut scratch = Scratch::new(x.len());
        let dur = sample_holding_time(z, self.engine.params, rng);
        let mut active = [true, true];
        advance_pair(&mut xs, &mut active, self.engine.spec.field(z), dur, self.dt(), rng, &mut scratch, |_, _, _| false)?;
        Ok(xs)
    }

    /// Embedded state after one cycle on both levels (`y` itself when `|y| <= M1`).
    pub fn cycle_end<R: Rng + ?Sized>(&self, y: &[f64], rng: &mut R) -> Result<[Vec<f64>; 2], EngineError> {
        self.engine.check_dim(y)?;
        let mut xs = [y.to_vec(), y.to_vec()];
        if self.engine.inside_m1(y) {
            return Ok(xs);
        }
        let mut scratch = Scratch::new(y.len());
        for z in [Regime::Minus, Regime::Plus] {
            let dur = sample_holding_time(z, self.engine.params, rng);
            let mut active = [true, true];
            advance_pair(&mut xs, &mut active, self.engine.spec.field(z), dur, self.dt(), rng, &mut scratch, |_, _, _| false)?;
        }
        Ok(xs)
    }

    /// `tau` and `tau_M1` on both levels.
    pub fn run_to_tau<R: Rng + ?Sized>(&self, x: &[f64], z: Regime, rng: &mut R) -> Result<[LevelTau; 2], EngineError> {
        let engine = &self.engine;
        engine.check_dim(x)?;
        let m1_sq = engine.params.m1 * engine.params.m1;
        let horizon = engine.cfg.horizon;
        let mut xs = [x.to_vec(), x.to_vec()];
        let mut scratch = Scratch::new(x.len());
        let start_m1 = if norm_sq(x) <= m1_sq { Some(0.0) } else { None };
        let mut out = [
            LevelTau {
                tau: 0.0,
                tau_m1: start_m1,
                n_cycles: 0,
                censored: false,
            },
            LevelTau {
                tau: 0.0,
                tau_m1: start_m1,
                n_cycles: 0,
                censored: false,
            },
        ];
        let mut running = [true, true];
        let mut elapsed = 0.0;

        let mut leg = |xs: &mut [Vec<f64>; 2],
                       running: &mut [bool; 2],
                       out: &mut [LevelTau; 2],
                       z: Regime,
                       dur: f64,
                       elapsed: &mut f64,
                       rng: &mut R|
         -> Result<(), EngineError> {
            let room = horizon - *elapsed;
            let len = dur.min(room);
            let base = *elapsed;
            let mut active = *running;
            if len > 0.0 {
                advance_pair(xs, &mut active, engine.spec.field(z), len, engine.cfg.dt, rng, &mut scratch, |lvl, t, x| {
                    if out[lvl].tau_m1.is_none() && norm_sq(x) <= m1_sq {
                        out[lvl].tau_m1 = Some(base + t);
                    }
                    false
                })?;
            }
            if dur > room {
                for lvl in [COARSE, FINE] {
                    if running[lvl] {
                        running[lvl] = false;
                        out[lvl].censored = true;
                        out[lvl].tau = horizon;
                    }
                }
                *elapsed = horizon;
            } else {
                *elapsed = base + dur;
            }
            Ok(())
        };

        if z == Regime::Plus {
            let dur = sample_holding_time(Regime::Plus, engine.params, rng);
            leg(&mut xs, &mut running, &mut out, Regime::Plus, dur, &mut elapsed, rng)?;
        }
        loop {
            for lvl in [COARSE, FINE] {
                if running[lvl] && norm_sq(&xs[lvl]) <= m1_sq {
                    running[lvl] = false;
                    out[lvl].tau = elapsed;
                }
            }
            if !running[COARSE] && !running[FINE] {
                break;
            }
            let before = running;
            let d0 = sample_holding_time(Regime::Minus, engine.params, rng);
            leg(&mut xs, &mut running, &mut out, Regime::Minus, d0, &mut elapsed, rng)?;
            let d1 = sample_holding_time(Regime::Plus, engine.params, rng);
            leg(&mut xs, &mut running, &mut out, Regime::Plus, d1, &mut elapsed, rng)?;
            for lvl in [COARSE, FINE] {
                if before[lvl] && running[lvl] {
                    out[lvl].n_cycles += 1;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EngineConfig;
    use crate::model::{canonical_model, ModelParams};
    use crate::rng::stream_rng;

    fn params() -> ModelParams {
        ModelParams {
            d: 1,
            lambda_minus: 1.0,
            lambda_plus: 10.0,
            r_minus: 4.0,
            r_plus: 0.1,
            big_r_minus: 4.0,
            big_r_plus: 0.1,
            m: 1.0,
            m1: 4.0,
        }
    }

    #[test]
    fn zero_drift_levels_agree_exactly_at_grid_points() {
        // with b = 0 both levels sum the same increments, up to rounding
        let p = params();
        let spec = crate::model::DriftSpec::zero();
        let engine = Engine::new(&p, &spec, EngineConfig::new(0.01, 100.0, 1, 0).unwrap()).unwrap();
        let coupled = CoupledEngine::new(engine);
        let mut rng = stream_rng(5, 0);
        for _ in 0..20 {
            let [c, f] = coupled.state_at(&[3.0], Regime::Minus, 2.345, &mut rng).unwrap();
            assert!((c[0] - f[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn coupled_levels_stay_close_on_canonical_model() {
        let p = params();
        let spec = canonical_model(&p, 4.0, 0.1).unwrap();
        let engine = Engine::new(&p, &spec, EngineConfig::new(0.001, 100.0, 1, 0).unwrap()).unwrap();
        let coupled = CoupledEngine::new(engine);
        let mut rng = stream_rng(9, 0);
        for _ in 0..20 {
            let [c, f] = coupled.cycle_end(&[20.0], &mut rng).unwrap();
            assert!((c[0] - f[0]).abs() < 0.05, "{c:?} vs {f:?}");
        }
        let [c, f] = coupled.cycle_end(&[1.0], &mut rng).unwrap();
        assert_eq!(c, vec![1.0]);
        assert_eq!(f, vec![1.0]);
    }

    #[test]
    fn coupled_tau_dominates_tau_m1_on_both_levels() {
        let p = params();
        let spec = canonical_model(&p, 4.0, 0.1).unwrap();
        let engine = Engine::new(&p, &spec, EngineConfig::new(0.002, 1e4, 1, 0).unwrap()).unwrap();
        let coupled = CoupledEngine::new(engine);
        let mut rng = stream_rng(11, 0);
        for z in [Regime::Minus, Regime::Plus] {
            for _ in 0..10 {
                let runs = coupled.run_to_tau(&[10.0], z, &mut rng).unwrap();
                for r in &runs {
                    assert!(!r.censored);
                    assert!(r.tau_m1.unwrap() <= r.tau);
                }
            }
        }
    }
}
