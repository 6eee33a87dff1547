//! Path simulation for the switching diffusion.
//!
//! Regime holding times are drawn exactly from exponential clocks; between
//! jumps `X` follows Euler–Maruyama with step `dt`, the last step of every
//! holding interval shortened so the grid lands on the jump time. Hitting of
//! the ball is detected on grid times only.

pub mod coupled;

use std::io::Write;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DriftField, DriftSpec, ModelParams, Regime};
use crate::rng::{stream_rng, StreamRng};

/// Paths whose norm exceeds this are aborted.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

pub const DEFAULT_HORIZON: f64 = 1e5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("path diverged at local time {time}: |X| = {norm}")]
    Diverged { time: f64, norm: f64 },
    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),
    #[error("holding duration must be positive and finite, got {0}")]
    InvalidDuration(f64),
    #[error("position has dimension {got}, model has d = {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub dt: f64,
    pub horizon: f64,
    pub rng_seed: u64,
    pub stream_id: u64,
}

impl EngineConfig {
    pub fn new(dt: f64, horizon: f64, rng_seed: u64, stream_id: u64) -> Result<Self, EngineError> {
        let cfg = EngineConfig {
            dt,
            horizon,
            rng_seed,
            stream_id,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `dt = 1e-3 * min(1/lambda_-, 1/lambda_+)` and the default horizon.
    pub fn for_params(params: &ModelParams, rng_seed: u64) -> Self {
        EngineConfig {
            dt: default_dt(params),
            horizon: DEFAULT_HORIZON,
            rng_seed,
            stream_id: 0,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(EngineError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(EngineError::InvalidConfig(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.dt > self.horizon {
            return Err(EngineError::InvalidConfig(format!(
                "dt = {} exceeds horizon = {}",
                self.dt, self.horizon
            )));
        }
        Ok(())
    }

    pub fn rng(&self) -> StreamRng {
        stream_rng(self.rng_seed, self.stream_id)
    }

    pub fn with_stream(mut self, rng_seed: u64, stream_id: u64) -> Self {
        self.rng_seed = rng_seed;
        self.stream_id = stream_id;
        self
    }
}

pub fn default_dt(params: &ModelParams) -> f64 {
    1e-3 * (1.0 / params.lambda_minus).min(1.0 / params.lambda_plus)
}

/// Exponential holding time with rate `lambda_-` in regime 0 and `lambda_+` in regime 1.
#[inline]
pub fn sample_holding_time<R: Rng + ?Sized>(z: Regime, params: &ModelParams, rng: &mut R) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e / params.rate(z)
}

#[inline]
pub(crate) fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[inline(always)]
fn em_step<R: Rng + ?Sized>(x: &mut [f64], field: &DriftField, h: f64, rng: &mut R, drift: &mut [f64]) {
    field.eval_into(x, drift);
    let sh = h.sqrt();
    for (xk, bk) in x.iter_mut().zip(drift.iter()) {
        let xi: f64 = rng.sample(StandardNormal);
        *xk += bk * h + sh * xi;
    }
}

/// Euler step that also returns `grad |x|^power . dW` at the pre-step state,
/// the increment of the discrete martingale part of `|X|^power`.
#[inline]
fn em_step_cv<R: Rng + ?Sized>(x: &mut [f64], field: &DriftField, h: f64, power: u32, rng: &mut R, drift: &mut [f64]) -> f64 {
    field.eval_into(x, drift);
    let sh = h.sqrt();
    let scale = power as f64 * norm_pow(x, power - 2);
    let mut dm = 0.0;
    for (xk, bk) in x.iter_mut().zip(drift.iter()) {
        let xi: f64 = rng.sample(StandardNormal);
        dm += *xk * sh * xi;
        *xk += bk * h + sh * xi;
    }
    scale * dm
}

#[inline(always)]
fn guard(x: &[f64], t: f64) -> Result<(), EngineError> {
    let r2 = norm_sq(x);
    if r2.is_finite() && r2 <= DIVERGENCE_LIMIT * DIVERGENCE_LIMIT {
        Ok(())
    } else {
        Err(EngineError::Diverged {
            time: t,
            norm: r2.sqrt(),
        })
    }
}

/// Number of Euler steps covering `duration`; the last one is shortened when
/// `duration` is not a multiple of `dt`.
#[inline]
fn step_count(duration: f64, dt: f64) -> u64 {
    let full = (duration / dt).floor();
    let rem = duration - full * dt;
    if rem > dt * 1e-9 {
        full as u64 + 1
    } else {
        full as u64
    }
}

/// Advances `x` in place over `[0, duration]`. After each step `observe(t, x)`
/// is called with the local grid time; returning `true` stops the integration
/// and that time is returned.
#[inline]
pub(crate) fn advance<R, F>(
    x: &mut [f64],
    field: &DriftField,
    duration: f64,
    dt: f64,
    rng: &mut R,
    drift: &mut [f64],
    mut observe: F,
) -> Result<Option<f64>, EngineError>
where
    R: Rng + ?Sized,
    F: FnMut(f64, &[f64]) -> bool,
{
    let n = step_count(duration, dt);
    for k in 0..n {
        let t_prev = k as f64 * dt;
        let t_next = if k + 1 == n { duration } else { (k + 1) as f64 * dt };
        em_step(x, field, t_next - t_prev, rng, drift);
        guard(x, t_next)?;
        if observe(t_next, x) {
            return Ok(Some(t_next));
        }
    }
    Ok(None)
}

/// As [`advance`] without observation, returning the accumulated
/// `sum_k grad |X_k|^power . dW_k`. Each term has conditional mean zero, so
/// the sum is an exact control variate for `|X|^power`. The random draws are
/// the same as those of [`advance`].
pub(crate) fn advance_cv<R: Rng + ?Sized>(
    x: &mut [f64],
    field: &DriftField,
    duration: f64,
    dt: f64,
    power: u32,
    rng: &mut R,
    drift: &mut [f64],
) -> Result<f64, EngineError> {
    let n = step_count(duration, dt);
    let mut m = 0.0;
    for k in 0..n {
        let t_prev = k as f64 * dt;
        let t_next = if k + 1 == n { duration } else { (k + 1) as f64 * dt };
        m += em_step_cv(x, field, t_next - t_prev, power, rng, drift);
        guard(x, t_next)?;
    }
    Ok(m)
}

/// Grid trajectory over one holding interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSegment {
    pub regime: Regime,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl PathSegment {
    pub fn end(&self) -> &[f64] {
        self.states.last().expect("segment holds its start state")
    }
}

/// Positions `X` at the cycle boundaries `T_2k`, `T_2k+1`, `T_2k+2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleLegs {
    pub y_mid: Vec<f64>,
    pub y_end: Vec<f64>,
    pub dur_minus: f64,
    pub dur_plus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub y_start: Vec<f64>,
    /// The embedded chain stopped at the cycle start (`|y_start| <= M1`).
    pub stopped: bool,
    pub legs: Option<CycleLegs>,
}

impl CycleRecord {
    pub fn duration(&self) -> f64 {
        self.legs.as_ref().map_or(0.0, |l| l.dur_minus + l.dur_plus)
    }

    /// Embedded state after the cycle (the start state when stopped).
    pub fn y_next(&self) -> &[f64] {
        self.legs.as_ref().map_or(&self.y_start, |l| &l.y_end)
    }
}

/// Summary of a run up to the embedded stopping time `tau = T_2N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TauRun {
    /// `tau`, or the elapsed time when censored.
    pub tau: f64,
    /// Completed cycles `N`.
    pub n_cycles: u64,
    /// First entry time to regime 0.
    pub t0: f64,
    /// Cycle lengths `eta_i = T_2i+2 - T_2i`.
    pub cycle_durations: Vec<f64>,
    /// First grid time with `|X| <= M1`; `None` if not reached before the run ended.
    pub tau_m1: Option<f64>,
    pub y_final: Vec<f64>,
    pub censored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitTime {
    pub time: f64,
    pub censored: bool,
}

/// Grid trajectory of the pair `(X, Z)`; `regimes[i]` is the label on `[times[i], times[i+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub d: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub regimes: Vec<Regime>,
    /// `T_0 < T_1 < ...` realised within the simulated window.
    pub jump_times: Vec<f64>,
    pub censored: bool,
}

impl Path {
    /// Columnar text dump: header `time,x1,..,xd,regime`, one row per sample time.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "time")?;
        for k in 1..=self.d {
            write!(w, ",x{k}")?;
        }
        writeln!(w, ",regime")?;
        for ((t, x), z) in self.times.iter().zip(&self.states).zip(&self.regimes) {
            write!(w, "{t}")?;
            for v in x {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{}", z.index())?;
        }
        Ok(())
    }
}

/// Which jump time an occupation functional integrates up to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Upto {
    T0,
    T1,
    T2,
}

/// Simulator for one parameter set and drift.
#[derive(Debug, Clone, Copy)]
pub struct Engine<'a> {
    pub params: &'a ModelParams,
    pub spec: &'a DriftSpec,
    pub cfg: EngineConfig,
}

impl<'a> Engine<'a> {
    pub fn new(params: &'a ModelParams, spec: &'a DriftSpec, cfg: EngineConfig) -> Result<Self, EngineError> {
        cfg.validate()?;
        Ok(Engine { params, spec, cfg })
    }

    pub fn rng(&self) -> StreamRng {
        self.cfg.rng()
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), EngineError> {
        if x.len() != self.params.d {
            return Err(EngineError::DimensionMismatch {
                expected: self.params.d,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn inside_m1(&self, x: &[f64]) -> bool {
        norm_sq(x) <= self.params.m1 * self.params.m1
    }

    /// Euler–Maruyama over one holding interval, recording every grid point.
    pub fn integrate_between_jumps<R: Rng + ?Sized>(
        &self,
        x0: &[f64],
        z: Regime,
        duration: f64,
        rng: &mut R,
    ) -> Result<PathSegment, EngineError> {
        self.check_dim(x0)?;
        if !(duration.is_finite() && duration > 0.0) {
            return Err(EngineError::InvalidDuration(duration));
        }
        let mut x = x0.to_vec();
        let mut drift = vec![0.0; x.len()];
        let cap = step_count(duration, self.cfg.dt) as usize + 1;
        let mut times = Vec::with_capacity(cap);
        let mut states = Vec::with_capacity(cap);
        times.push(0.0);
        states.push(x.clone());
        advance(&mut x, self.spec.field(z), duration, self.cfg.dt, rng, &mut drift, |t, x| {
            times.push(t);
            states.push(x.to_vec());
            false
        })?;
        Ok(PathSegment {
            regime: z,
            times,
            states,
        })
    }

    /// Endpoint of one holding interval, integrated in place.
    pub fn integrate_in_place<R: Rng + ?Sized>(
        &self,
        x: &mut [f64],
        z: Regime,
        duration: f64,
        rng: &mut R,
    ) -> Result<(), EngineError> {
        let mut drift = vec![0.0; x.len()];
        advance(x, self.spec.field(z), duration, self.cfg.dt, rng, &mut drift, |_, _| false)?;
        Ok(())
    }

    /// One regime-0 holding followed by one regime-1 holding from the embedded state `y`.
    pub fn simulate_cycle<R: Rng + ?Sized>(&self, y: &[f64], rng: &mut R) -> Result<CycleRecord, EngineError> {
        self.check_dim(y)?;
        if self.inside_m1(y) {
            return Ok(CycleRecord {
                y_start: y.to_vec(),
                stopped: true,
                legs: None,
            });
        }
        let mut x = y.to_vec();
        let mut drift = vec![0.0; x.len()];
        let dur_minus = sample_holding_time(Regime::Minus, self.params, rng);
        advance(&mut x, &self.spec.minus, dur_minus, self.cfg.dt, rng, &mut drift, |_, _| false)?;
        let y_mid = x.clone();
        let dur_plus = sample_holding_time(Regime::Plus, self.params, rng);
        advance(&mut x, &self.spec.plus, dur_plus, self.cfg.dt, rng, &mut drift, |_, _| false)?;
        Ok(CycleRecord {
            y_start: y.to_vec(),
            stopped: false,
            legs: Some(CycleLegs {
                y_mid,
                y_end: x,
                dur_minus,
                dur_plus,
            }),
        })
    }

    /// Advances one holding interval capped at the horizon, recording the first
    /// grid time inside the recurrence ball. Returns false when the horizon cut it short.
    #[allow(clippy::too_many_arguments)]
    fn tracked_leg<R: Rng + ?Sized>(
        &self,
        state: &mut [f64],
        drift: &mut [f64],
        z: Regime,
        dur: f64,
        elapsed: &mut f64,
        tau_m1: &mut Option<f64>,
        rng: &mut R,
    ) -> Result<bool, EngineError> {
        let m1_sq = self.params.m1 * self.params.m1;
        let room = self.cfg.horizon - *elapsed;
        let (len, complete) = if dur <= room { (dur, true) } else { (room, false) };
        let base = *elapsed;
        if len > 0.0 {
            advance(state, self.spec.field(z), len, self.cfg.dt, rng, drift, |t, x| {
                if tau_m1.is_none() && norm_sq(x) <= m1_sq {
                    *tau_m1 = Some(base + t);
                }
                false
            })?;
        }
        *elapsed = if complete { base + dur } else { self.cfg.horizon };
        Ok(complete)
    }

    /// Runs from `(x, z)` to `tau = inf(T_2n : |X_T_2n| <= M1)`, tracking the
    /// continuous hitting time `tau_M1` along the way. Horizon exhaustion sets
    /// `censored`.
    pub fn run_to_tau<R: Rng + ?Sized>(&self, x: &[f64], z: Regime, rng: &mut R) -> Result<TauRun, EngineError> {
        self.check_dim(x)?;
        let mut state = x.to_vec();
        let mut drift = vec![0.0; state.len()];
        let mut elapsed = 0.0;
        let mut tau_m1 = if self.inside_m1(&state) { Some(0.0) } else { None };
        let mut cycle_durations = Vec::new();

        let censored_run = |elapsed: f64, t0: f64, cycle_durations: Vec<f64>, tau_m1, state| TauRun {
            tau: elapsed,
            n_cycles: cycle_durations.len() as u64,
            t0,
            cycle_durations,
            tau_m1,
            y_final: state,
            censored: true,
        };

        if z == Regime::Plus {
            let dur = sample_holding_time(Regime::Plus, self.params, rng);
            if !self.tracked_leg(&mut state, &mut drift, Regime::Plus, dur, &mut elapsed, &mut tau_m1, rng)? {
                return Ok(censored_run(elapsed, elapsed, cycle_durations, tau_m1, state));
            }
        }
        let t0 = elapsed;

        while !self.inside_m1(&state) {
            let d0 = sample_holding_time(Regime::Minus, self.params, rng);
            if !self.tracked_leg(&mut state, &mut drift, Regime::Minus, d0, &mut elapsed, &mut tau_m1, rng)? {
                return Ok(censored_run(elapsed, t0, cycle_durations, tau_m1, state));
            }
            let d1 = sample_holding_time(Regime::Plus, self.params, rng);
            if !self.tracked_leg(&mut state, &mut drift, Regime::Plus, d1, &mut elapsed, &mut tau_m1, rng)? {
                return Ok(censored_run(elapsed, t0, cycle_durations, tau_m1, state));
            }
            cycle_durations.push(d0 + d1);
        }
        Ok(TauRun {
            tau: elapsed,
            n_cycles: cycle_durations.len() as u64,
            t0,
            cycle_durations,
            tau_m1,
            y_final: state,
            censored: false,
        })
    }

    /// First grid time with `|X| <= radius` for the switching process started at `(x, z)`.
    pub fn hitting_time_continuous<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        z: Regime,
        radius: f64,
        rng: &mut R,
    ) -> Result<HitTime, EngineError> {
        self.check_dim(x)?;
        if !(radius > 0.0) {
            return Err(EngineError::InvalidConfig(format!("radius must be positive, got {radius}")));
        }
        let r_sq = radius * radius;
        if norm_sq(x) <= r_sq {
            return Ok(HitTime {
                time: 0.0,
                censored: false,
            });
        }
        let mut state = x.to_vec();
        let mut drift = vec![0.0; state.len()];
        let mut elapsed = 0.0;
        let mut regime = z;
        loop {
            let dur = sample_holding_time(regime, self.params, rng);
            let room = self.cfg.horizon - elapsed;
            let len = dur.min(room);
            let hit = advance(&mut state, self.spec.field(regime), len, self.cfg.dt, rng, &mut drift, |_, x| {
                norm_sq(x) <= r_sq
            })?;
            if let Some(t) = hit {
                return Ok(HitTime {
                    time: elapsed + t,
                    censored: false,
                });
            }
            if dur >= room {
                return Ok(HitTime {
                    time: self.cfg.horizon,
                    censored: true,
                });
            }
            elapsed += dur;
            regime = regime.other();
        }
    }

    /// Simulates the switching process on `[0, until]` and returns the state
    /// `(X, Z)` at each of the sorted `times` (all `<= until`).
    pub fn states_at<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        z: Regime,
        times: &[f64],
        rng: &mut R,
    ) -> Result<Vec<(Vec<f64>, Regime)>, EngineError> {
        self.check_dim(x)?;
        if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|t| !(*t >= 0.0)) {
            return Err(EngineError::InvalidConfig("snapshot times must be sorted and non-negative".into()));
        }
        let mut out = Vec::with_capacity(times.len());
        let mut state = x.to_vec();
        let mut drift = vec![0.0; state.len()];
        let mut regime = z;
        let mut now = 0.0;
        let mut next_jump = sample_holding_time(regime, self.params, rng);
        for &target in times {
            while now < target {
                let stop = next_jump.min(target);
                self.integrate_span(&mut state, &mut drift, regime, stop - now, rng)?;
                now = stop;
                if now >= next_jump {
                    regime = regime.other();
                    next_jump = now + sample_holding_time(regime, self.params, rng);
                }
            }
            out.push((state.clone(), regime));
        }
        Ok(out)
    }

    fn integrate_span<R: Rng + ?Sized>(
        &self,
        state: &mut [f64],
        drift: &mut [f64],
        z: Regime,
        len: f64,
        rng: &mut R,
    ) -> Result<(), EngineError> {
        if len > 0.0 {
            advance(state, self.spec.field(z), len, self.cfg.dt, rng, drift, |_, _| false)?;
        }
        Ok(())
    }

    /// `|X_T|^power - |x|^power` over one holding interval `T` in regime `z`.
    pub fn interval_change<R: Rng + ?Sized>(&self, x: &[f64], z: Regime, power: u32, rng: &mut R) -> Result<f64, EngineError> {
        self.check_dim(x)?;
        let mut state = x.to_vec();
        let dur = sample_holding_time(z, self.params, rng);
        self.integrate_in_place(&mut state, z, dur, rng)?;
        Ok(norm_pow(&state, power) - norm_pow(x, power))
    }

    /// `(|X_T|^power - |x|^power, C)` over one holding interval, where `C` is
    /// the zero-mean martingale control; the difference of the two is an
    /// unbiased low-variance sample of the same expectation.
    pub fn interval_change_cv<R: Rng + ?Sized>(&self, x: &[f64], z: Regime, power: u32, rng: &mut R) -> Result<(f64, f64), EngineError> {
        self.check_dim(x)?;
        let mut state = x.to_vec();
        let mut drift = vec![0.0; x.len()];
        let dur = sample_holding_time(z, self.params, rng);
        let c = advance_cv(&mut state, self.spec.field(z), dur, self.cfg.dt, power, rng, &mut drift)?;
        Ok((norm_pow(&state, power) - norm_pow(x, power), c))
    }

    /// `(|Y_1|^power - |y|^power, C)` over one full cycle from `y`, with the
    /// same control as [`Engine::interval_change_cv`]. The draws match
    /// [`Engine::simulate_cycle`].
    pub fn cycle_change_cv<R: Rng + ?Sized>(&self, y: &[f64], power: u32, rng: &mut R) -> Result<(f64, f64), EngineError> {
        self.check_dim(y)?;
        let mut x = y.to_vec();
        let mut drift = vec![0.0; x.len()];
        let dur_minus = sample_holding_time(Regime::Minus, self.params, rng);
        let mut c = advance_cv(&mut x, &self.spec.minus, dur_minus, self.cfg.dt, power, rng, &mut drift)?;
        let dur_plus = sample_holding_time(Regime::Plus, self.params, rng);
        c += advance_cv(&mut x, &self.spec.plus, dur_plus, self.cfg.dt, power, rng, &mut drift)?;
        Ok((norm_pow(&x, power) - norm_pow(y, power), c))
    }

    /// `int_0^T 1(inf_{s<=t} |X_s| <= M) dt` where `T` is the jump time `upto`
    /// reached from regime `z`: (0, T1), (0, T2), (1, T0) or (1, T1).
    pub fn occupation_near_ball<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        z: Regime,
        upto: Upto,
        rng: &mut R,
    ) -> Result<f64, EngineError> {
        self.check_dim(x)?;
        let legs = match (z, upto) {
            (Regime::Minus, Upto::T1) | (Regime::Plus, Upto::T0) => 1,
            (Regime::Minus, Upto::T2) | (Regime::Plus, Upto::T1) => 2,
            _ => {
                return Err(EngineError::InvalidConfig(format!(
                    "stopping label {upto:?} does not match starting regime {z}"
                )))
            }
        };
        let m_sq = self.params.m * self.params.m;
        let durations: Vec<f64> = {
            let mut zz = z;
            (0..legs)
                .map(|_| {
                    let d = sample_holding_time(zz, self.params, rng);
                    zz = zz.other();
                    d
                })
                .collect()
        };
        let total: f64 = durations.iter().sum();
        if norm_sq(x) <= m_sq {
            return Ok(total);
        }
        let mut state = x.to_vec();
        let mut drift = vec![0.0; state.len()];
        let mut elapsed = 0.0;
        let mut regime = z;
        for dur in durations {
            let hit = advance(&mut state, self.spec.field(regime), dur, self.cfg.dt, rng, &mut drift, |_, x| {
                norm_sq(x) <= m_sq
            })?;
            if let Some(t) = hit {
                return Ok(total - (elapsed + t));
            }
            elapsed += dur;
            regime = regime.other();
        }
        Ok(0.0)
    }

    /// Full grid trajectory over `[0, duration]` (capped at the horizon), keeping every
    /// `record_every`-th step plus all jump times.
    pub fn simulate_path<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        z: Regime,
        duration: f64,
        record_every: usize,
        rng: &mut R,
    ) -> Result<Path, EngineError> {
        self.check_dim(x)?;
        let record_every = record_every.max(1);
        let end = duration.min(self.cfg.horizon);
        let mut path = Path {
            d: self.params.d,
            times: vec![0.0],
            states: vec![x.to_vec()],
            regimes: vec![z],
            jump_times: Vec::new(),
            censored: duration > self.cfg.horizon,
        };
        if z == Regime::Minus {
            path.jump_times.push(0.0);
        }
        let mut state = x.to_vec();
        let mut drift = vec![0.0; state.len()];
        let mut regime = z;
        let mut now = 0.0;
        while now < end {
            let dur = sample_holding_time(regime, self.params, rng);
            let len = dur.min(end - now);
            let mut counter = 0usize;
            let base = now;
            let n = step_count(len, self.cfg.dt);
            advance(&mut state, self.spec.field(regime), len, self.cfg.dt, rng, &mut drift, |t, x| {
                counter += 1;
                if counter.is_multiple_of(record_every) || counter as u64 == n {
                    path.times.push(base + t);
                    path.states.push(x.to_vec());
                    path.regimes.push(regime);
                }
                false
            })?;
            now += len;
            if dur <= len {
                regime = regime.other();
                path.jump_times.push(now);
                // the row at the jump time carries the new label (cadlag)
                if let Some(last) = path.regimes.last_mut() {
                    *last = regime;
                }
            }
        }
        Ok(path)
    }
}

#[inline]
pub(crate) fn norm_pow(x: &[f64], power: u32) -> f64 {
    let r2 = norm_sq(x);
    match power {
        2 => r2,
        4 => r2 * r2,
        6 => r2 * r2 * r2,
        p => r2.sqrt().powi(p as i32),
    }
}
