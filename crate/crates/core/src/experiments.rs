//! Named suites of statistical checks.
//!
//! Every check draws from its own seed derived from the master seed and the
//! check label, so selecting a subset of suites never changes the numbers a
//! check reports. Reports come back sorted by `check_id`.

use std::cell::RefCell;
use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{
    conditional_moment_drift, cycle_duration_variance, decomposition_check, lemma11_constant, lemma2_delta, martingale_constants,
};
use crate::config::{ResolvedModel, RunConfig};
use crate::engine::coupled::LevelTau;
use crate::engine::{norm_pow, sample_holding_time, Engine, EngineConfig};
use crate::error::{Error, Result};
use crate::estimators::{
    dt_halving, fit_moment_change, growth_exponent, hitting_moments, interval_moment_change, moment_at_time, occupation_near_ball, replicate,
    search_m1, tv_decay, DtHalving, Ensemble, HittingMoments, M1Search, OCCUPATION_CASES,
};
use crate::model::{
    canonical_model, check_conditions, drift_bounds_audit, lle_residual, solve_epsilon_q, ConditionReport, ConditionTier, DriftAudit, DriftSpec,
    EpsilonQ, ModelParams, Regime,
};
use crate::rng::{derive_seed, stream_rng};
use crate::stats::{z_value, CiMethod, MomentEstimate};

/// A named parameter set of the canonical radial family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: &'static str,
    pub d: usize,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub kappa_minus: f64,
    pub kappa_plus: f64,
    pub m: f64,
}

pub fn preset_catalogue() -> Vec<Preset> {
    vec![
        Preset {
            name: "canonical-1d",
            d: 1,
            lambda_minus: 1.0,
            lambda_plus: 10.0,
            kappa_minus: 4.0,
            kappa_plus: 0.1,
            m: 1.0,
        },
        Preset {
            name: "canonical-3d",
            d: 3,
            lambda_minus: 1.0,
            lambda_plus: 10.0,
            kappa_minus: 6.0,
            kappa_plus: 0.1,
            m: 1.0,
        },
        // passes (c1), fails (c2): negative control
        Preset {
            name: "boundary-c1",
            d: 1,
            lambda_minus: 1.0,
            lambda_plus: 10.0,
            kappa_minus: 1.2,
            kappa_plus: 0.1,
            m: 1.0,
        },
    ]
}

pub fn preset(name: &str) -> Option<Preset> {
    preset_catalogue().into_iter().find(|p| p.name == name)
}

/// Suite ids with the condition each one needs.
pub const SUITES: [(&str, ConditionTier); 16] = [
    ("conditions", ConditionTier::None),
    ("engine", ConditionTier::None),
    ("martingale", ConditionTier::C1),
    ("lemma1", ConditionTier::C1),
    ("lemma2", ConditionTier::C1),
    ("lemma11", ConditionTier::C1),
    ("prop1", ConditionTier::C1),
    ("lemma50", ConditionTier::C2),
    ("lemma5-8", ConditionTier::C2),
    ("lemma9", ConditionTier::C2),
    ("lemma8fr-5a", ConditionTier::C2a),
    ("lemma9a", ConditionTier::C2a),
    ("theorem2", ConditionTier::C2a),
    ("remark1", ConditionTier::C2a),
    ("remark2", ConditionTier::C2a),
    ("all", ConditionTier::None),
];

pub fn suite_tier(id: &str) -> Option<ConditionTier> {
    SUITES.iter().find(|(s, _)| *s == id).map(|(_, t)| *t)
}

/// Every suite except the `all` alias, in catalogue order.
pub fn all_suites() -> Vec<&'static str> {
    SUITES.iter().map(|(s, _)| *s).filter(|s| *s != "all").collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Diagnostic,
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Diagnostic => "DIAG",
        }
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub check_id: String,
    pub suite: String,
    pub claim: String,
    pub estimate: f64,
    pub se: f64,
    pub threshold: Option<f64>,
    /// Positive when the check passes with room to spare.
    pub margin: Option<f64>,
    pub ci: [f64; 2],
    pub n: usize,
    pub censored_fraction: f64,
    pub ci_method: CiMethod,
    pub verdict: Verdict,
    pub config_hash: String,
    pub seed: u64,
}

/// One row of the conditional-drift table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub suite: String,
    pub y_radius: f64,
    pub m: u32,
    pub estimate: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
    pub verdict: Verdict,
}

/// Everything produced by one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub model: ResolvedModel,
    pub m1: f64,
    pub m1_search: Option<M1Search>,
    pub reports: Vec<SuiteReport>,
    pub drift_table: Vec<DriftRow>,
}

/// Resolved model, drift and derived constants shared by all suites.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: ResolvedModel,
    pub params: ModelParams,
    pub spec: DriftSpec,
    pub conditions: ConditionReport,
    pub audit: DriftAudit,
    pub epsilon_q: Option<EpsilonQ>,
    pub m1_search: Option<M1Search>,
}

/// Lower bounds keep JSON finite.
fn finite(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-f64::MAX, f64::MAX)
    }
}

fn radius_vec(d: usize, r: f64) -> Vec<f64> {
    let mut x = vec![0.0; d];
    x[0] = r;
    x
}

fn fmt_mult(k: f64) -> String {
    format!("{k}")
}

pub struct Runner<'c> {
    cfg: &'c RunConfig,
    scenario: Scenario,
    engine_cfg: EngineConfig,
    config_hash: String,
    hitting: RefCell<BTreeMap<(u8, usize), HittingMoments>>,
    drift_rows: RefCell<Vec<DriftRow>>,
}

impl<'c> Runner<'c> {
    /// Resolves the model and, when `m1 = "search"` and (c1) holds, runs the
    /// doubling search for `M1`.
    pub fn new(cfg: &'c RunConfig) -> Result<Self> {
        cfg.validate()?;
        let model = cfg.resolved_model()?;
        let mut params = model.params();
        let spec = canonical_model(&params, model.kappa_minus, model.kappa_plus)?;
        let est = &cfg.estimation;
        let mut conditions = check_conditions(&params);
        let epsilon_q = if conditions.holds_c1 {
            Some(solve_epsilon_q(&params, est.epsilon_fraction)?)
        } else {
            None
        };
        conditions.epsilon_q = epsilon_q;
        let mut audit_rng = stream_rng(derive_seed(cfg.seed, "audit"), 0);
        let audit = drift_bounds_audit(&spec, &params, est.audit_samples, est.audit_max_ratio, &mut audit_rng)?;
        let conditions = conditions.with_audit(&audit);
        let engine_cfg = EngineConfig::new(cfg.dt(), cfg.engine.horizon, cfg.seed, 0)?;
        let mut m1_search = None;
        if model.m1.is_none() {
            if let Some(eq) = epsilon_q {
                let engine = Engine::new(&params, &spec, engine_cfg)?;
                let delta = lemma2_delta(&params, eq, spec.norm_bound);
                let ens = Ensemble::new(est.m1_search_replicas, est.confidence, derive_seed(cfg.seed, "m1-search"))?;
                let s = search_m1(&engine, delta, est.m1_max_doublings, &ens)?;
                params.m1 = s.m1;
                m1_search = Some(s);
            }
        }
        Ok(Runner {
            cfg,
            scenario: Scenario {
                model,
                params,
                spec,
                conditions,
                audit,
                epsilon_q,
                m1_search,
            },
            engine_cfg,
            config_hash: cfg.config_hash(),
            hitting: RefCell::new(BTreeMap::new()),
            drift_rows: RefCell::new(Vec::new()),
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    fn engine(&self) -> Engine<'_> {
        Engine {
            params: &self.scenario.params,
            spec: &self.scenario.spec,
            cfg: self.engine_cfg,
        }
    }

    fn m1(&self) -> f64 {
        self.scenario.params.m1
    }

    fn d(&self) -> usize {
        self.scenario.params.d
    }

    fn z(&self) -> f64 {
        z_value(self.cfg.estimation.confidence).expect("validated level")
    }

    fn ens(&self, label: &str, replicas: usize) -> Result<Ensemble> {
        let mut e = Ensemble::new(replicas, self.cfg.estimation.confidence, derive_seed(self.cfg.seed, label))?;
        e.max_censored = self.cfg.estimation.max_censored_fraction;
        Ok(e)
    }

    fn eq(&self) -> EpsilonQ {
        self.scenario.epsilon_q.expect("suite gated on (c1)")
    }

    /// Checks the condition gate and runs one suite (`all` expands to every suite).
    pub fn run_suite(&self, id: &str) -> Result<Vec<SuiteReport>> {
        let tier = suite_tier(id).ok_or_else(|| Error::UnknownSuite(id.to_string()))?;
        if !tier.holds(&self.scenario.conditions) {
            return Err(Error::ConditionGate {
                suite: id.to_string(),
                condition: tier.label(),
                margins: self.scenario.conditions.margins.to_string(),
            });
        }
        let mut out = match id {
            "all" => {
                let mut v = Vec::new();
                for s in all_suites() {
                    if suite_tier(s).is_some_and(|t| t.holds(&self.scenario.conditions)) {
                        v.extend(self.run_suite(s)?);
                    }
                }
                v
            }
            "conditions" => self.suite_conditions()?,
            "engine" => self.suite_engine()?,
            "martingale" => self.suite_martingale()?,
            "lemma1" => self.suite_lemma1()?,
            "lemma2" => self.suite_lemma2()?,
            "lemma11" => self.suite_cycle_drift("lemma11", 1)?,
            "prop1" => self.suite_prop1()?,
            "lemma50" => self.suite_lemma50()?,
            "lemma5-8" => self.suite_coefficients("lemma5-8", 4)?,
            "lemma9" => self.suite_cycle_drift("lemma9", 2)?,
            "lemma8fr-5a" => self.suite_coefficients("lemma8fr-5a", 6)?,
            "lemma9a" => self.suite_cycle_drift("lemma9a", 3)?,
            "theorem2" => self.suite_theorem2()?,
            "remark1" => self.suite_remark1()?,
            "remark2" => self.suite_remark2()?,
            other => return Err(Error::UnknownSuite(other.to_string())),
        };
        out.sort_by(|a, b| a.check_id.cmp(&b.check_id));
        Ok(out)
    }

    /// Runs the given suites and assembles the sorted output.
    pub fn run(&self, suites: &[String]) -> Result<RunOutput> {
        let mut reports = Vec::new();
        for s in suites {
            reports.extend(self.run_suite(s)?);
        }
        reports.sort_by(|a, b| a.check_id.cmp(&b.check_id));
        reports.dedup_by(|a, b| a.check_id == b.check_id);
        let mut drift_table = self.drift_rows.borrow().clone();
        drift_table.sort_by(|a, b| a.m.cmp(&b.m).then(a.y_radius.total_cmp(&b.y_radius)));
        drift_table.dedup_by(|a, b| a.m == b.m && a.y_radius == b.y_radius);
        Ok(RunOutput {
            model: self.scenario.model.clone(),
            m1: self.m1(),
            m1_search: self.scenario.m1_search.clone(),
            reports,
            drift_table,
        })
    }

    // ---- report builders ----

    fn report(&self, id: String, suite: &str, claim: String, est: &MomentEstimate, threshold: Option<f64>, margin: Option<f64>, verdict: Verdict) -> SuiteReport {
        SuiteReport {
            check_id: id,
            suite: suite.to_string(),
            claim,
            estimate: finite(est.mean),
            se: finite(est.se),
            threshold: threshold.map(finite),
            margin: margin.map(finite),
            ci: [finite(est.ci_lo), finite(est.ci_hi)],
            n: est.n,
            censored_fraction: est.censored_fraction,
            ci_method: est.method,
            verdict,
            config_hash: self.config_hash.clone(),
            seed: self.cfg.seed,
        }
    }

    /// Passes iff the upper confidence limit is at most `threshold`.
    fn upper(&self, id: String, suite: &str, claim: String, est: &MomentEstimate, threshold: f64) -> SuiteReport {
        let ok = est.ci_hi <= threshold && !est.aborted;
        self.report(id, suite, claim, est, Some(threshold), Some(threshold - est.ci_hi), Verdict::from_bool(ok))
    }

    /// Passes iff the lower confidence limit is at least `threshold`.
    fn lower(&self, id: String, suite: &str, claim: String, est: &MomentEstimate, threshold: f64) -> SuiteReport {
        let ok = est.ci_lo >= threshold && !est.aborted;
        self.report(id, suite, claim, est, Some(threshold), Some(est.ci_lo - threshold), Verdict::from_bool(ok))
    }

    /// Passes iff `|mean - target| <= k * se`.
    fn agrees(&self, id: String, suite: &str, claim: String, est: &MomentEstimate, target: f64, k: f64) -> SuiteReport {
        let slack = k * est.se - (est.mean - target).abs();
        self.report(id, suite, claim, est, Some(target), Some(slack), Verdict::from_bool(slack >= 0.0))
    }

    /// A deterministic quantity compared with a threshold.
    fn value(&self, id: String, suite: &str, claim: String, value: f64, threshold: f64, ok: bool) -> SuiteReport {
        let est = MomentEstimate::exact(value);
        self.report(id, suite, claim, &est, Some(threshold), Some(threshold - value), Verdict::from_bool(ok))
    }

    fn diagnostic(&self, id: String, suite: &str, claim: String, est: &MomentEstimate, threshold: Option<f64>) -> SuiteReport {
        let margin = threshold.map(|t| t - est.mean);
        self.report(id, suite, claim, est, threshold, margin, Verdict::Diagnostic)
    }

    /// Estimate is the coarse-to-fine mean shift, threshold one coarse SE.
    fn halving(&self, id: String, suite: &str, claim: String, h: &DtHalving) -> SuiteReport {
        let shift = h.fine.mean - h.coarse.mean;
        let mut est = h.change;
        est.mean = shift;
        let ok = h.change_in_se() < 1.0;
        self.report(id, suite, claim, &est, Some(h.coarse.se), Some(h.coarse.se - shift.abs()), Verdict::from_bool(ok))
    }

    // ---- suites ----

    fn suite_conditions(&self) -> Result<Vec<SuiteReport>> {
        let s = "conditions";
        let c = &self.scenario.conditions;
        let m = &c.margins;
        let mut out = vec![
            self.value(
                "conditions.c1".into(),
                s,
                "2r_- - d > 0 and (2r_- - d)/lambda_- - (2r_+ + d)/lambda_+ > 0".into(),
                m.c1_dimension.min(m.c1_balance),
                0.0,
                c.holds_c1,
            ),
            self.value(
                "conditions.c2".into(),
                s,
                "(4r_- - (2d+4))/lambda_- - (4r_+ + (2d+4))/lambda_+ > 0".into(),
                m.c2,
                0.0,
                c.holds_c2,
            ),
            self.value(
                "conditions.c2a".into(),
                s,
                "(6r_- - (3d+12))/lambda_- - (6r_+ + (3d+12))/lambda_+ > 0".into(),
                m.c2a,
                0.0,
                c.holds_c2a,
            ),
        ];
        for r in out.iter_mut() {
            // margins here are the slack itself
            r.margin = Some(r.estimate);
        }

        let (violations, max_residual, checked) = condition_sweep(self.cfg.estimation.sweep_tuples, derive_seed(self.cfg.seed, "conditions/sweep"));
        out.push(self.value(
            "conditions.implication-chain".into(),
            s,
            format!("c2a => c2 => c1 on {} random tuples: violations = 0", self.cfg.estimation.sweep_tuples),
            violations as f64,
            0.0,
            violations == 0,
        ));
        let mut residual = max_residual;
        if let Some(eq) = self.scenario.epsilon_q {
            let (res, scale) = lle_residual(&self.scenario.params, eq);
            residual = residual.max(res / scale);
            out.push(self.value(
                "conditions.epsilon-q".into(),
                s,
                format!("epsilon > 0 and 0 < q < 1 (epsilon = {:.6}, q = {:.6})", eq.epsilon, eq.q),
                eq.q,
                1.0,
                eq.epsilon > 0.0 && eq.q > 0.0 && eq.q < 1.0,
            ));
        }
        out.push(self.value(
            "conditions.lle-residual".into(),
            s,
            format!("max relative residual of lambda_-(2r_+ + d + eps) = q lambda_+(2r_- - d - eps) over {checked} solutions <= 1e-12"),
            residual,
            1e-12,
            residual <= 1e-12,
        ));
        let a = &self.scenario.audit;
        let bad = a.b_violations + a.b2_violations + a.norm_violations;
        out.push(self.value(
            "conditions.drift-audit".into(),
            s,
            format!("drift bounds and |b| <= {} on {} audited points: violations = 0", self.scenario.spec.norm_bound, a.samples),
            bad as f64,
            0.0,
            bad == 0,
        ));
        Ok(out)
    }

    fn suite_engine(&self) -> Result<Vec<SuiteReport>> {
        let s = "engine";
        let est = &self.cfg.estimation;
        let d = self.d();
        let m1 = self.m1();
        let mut out = Vec::new();

        // Brownian oracle with the drift switched off
        let zero = DriftSpec::zero();
        let bm = Engine::new(&self.scenario.params, &zero, self.engine_cfg)?;
        let x0 = radius_vec(d, m1);
        let ens = self.ens("engine/brownian", est.brownian_replicas)?;
        let ends = replicate(ens.replicas, ens.seed, |rng| {
            let mut x = x0.clone();
            bm.integrate_in_place(&mut x, Regime::Minus, 1.0, rng)?;
            Ok(x[0] - x0[0])
        })?;
        let mean = MomentEstimate::from_samples(&ends, ens.level)?;
        out.push(self.agrees("engine.brownian.mean".into(), s, "b = 0: E X_1 = x0 within 3 SE".into(), &mean, 0.0, 3.0));
        let sq: Vec<f64> = ends.iter().map(|v| v * v).collect();
        let var = MomentEstimate::from_samples(&sq, ens.level)?;
        out.push(self.agrees("engine.brownian.variance".into(), s, "b = 0: Var X_1 = 1 within 3 SE".into(), &var, 1.0, 3.0));

        // Ito identity for the canonical family outside the inner ball
        let engine = self.engine();
        let t = 0.1;
        let xs = radius_vec(d, 4.0 * m1);
        let ens = self.ens("engine/ito", est.replicas)?;
        let vals = replicate(ens.replicas, ens.seed, |rng| {
            let mut x = xs.clone();
            engine.integrate_in_place(&mut x, Regime::Minus, t, rng)?;
            Ok(norm_pow(&x, 2))
        })?;
        let e2 = MomentEstimate::from_samples(&vals, ens.level)?;
        let exact = norm_pow(&xs, 2) + (d as f64 - 2.0 * self.scenario.model.kappa_minus) * t;
        out.push(self.agrees(
            "engine.ito-identity".into(),
            s,
            format!("regime 0 over t = {t}: E|X_t|^2 = |x|^2 + (d - 2 kappa_-) t within 3 SE"),
            &e2,
            exact,
            3.0,
        ));

        // dt-halving with coupled coarse/fine paths
        let n = est.dt_halving_replicas;
        let x2 = radius_vec(d, 2.0 * m1);
        let claim = |what: &str| format!("{what}: |E(dt/2) - E(dt)| < 1 SE of E(dt)");
        let h = dt_halving(&engine, &self.ens("engine/dt/moment", n)?, |c, rng| {
            let [a, b] = c.state_at(&x2, Regime::Minus, 1.0, rng)?;
            Ok([norm_pow(&a, 2), norm_pow(&b, 2)])
        })?;
        out.push(self.halving("engine.dt-halving.moment-p2".into(), s, claim("E|X_1|^2 from 2 M1"), &h));
        let h = dt_halving(&engine, &self.ens("engine/dt/interval", n)?, |c, rng| {
            let [a, b] = c.interval_end(&x2, Regime::Minus, rng)?;
            Ok([norm_pow(&a, 4), norm_pow(&b, 4)])
        })?;
        out.push(self.halving("engine.dt-halving.interval-p4".into(), s, claim("E|X_T1|^4 from 2 M1"), &h));
        let h = dt_halving(&engine, &self.ens("engine/dt/cycle", n)?, |c, rng| {
            let [a, b] = c.cycle_end(&x2, rng)?;
            Ok([norm_pow(&a, 2), norm_pow(&b, 2)])
        })?;
        out.push(self.halving("engine.dt-halving.cycle-p2".into(), s, claim("E|Y_1|^2 from 2 M1"), &h));
        let taus = |label: &str, pick: fn(&LevelTau) -> f64| -> Result<DtHalving> {
            dt_halving(&engine, &self.ens(label, n)?, |c, rng| {
                let r = c.run_to_tau(&x2, Regime::Minus, rng)?;
                Ok([pick(&r[0]), pick(&r[1])])
            })
        };
        let h = taus("engine/dt/tau", |l| l.tau)?;
        out.push(self.halving("engine.dt-halving.tau".into(), s, claim("E tau from 2 M1"), &h));
        let h = taus("engine/dt/tau", |l| l.tau_m1.unwrap_or(l.tau))?;
        out.push(self.halving("engine.dt-halving.tau-m1".into(), s, claim("E tau_M1 from 2 M1"), &h));

        // per-sample identities
        let dec = decomposition_check(&engine, &x2, Regime::Plus, &self.ens("engine/identities", est.hitting_replicas)?)?;
        let uncensored = dec.samples - dec.censored;
        out.push(self.value(
            "engine.identity.decomposition".into(),
            s,
            format!("tau = T0 + c1 N + S_N on all {uncensored} uncensored samples: failures = 0"),
            dec.identity_failures as f64,
            0.0,
            dec.identity_failures == 0,
        ));
        out.push(self.value(
            "engine.identity.dominance".into(),
            s,
            format!("tau_M1 <= tau on all {uncensored} uncensored samples: violations = 0"),
            dec.dominance_violations as f64,
            0.0,
            dec.dominance_violations == 0,
        ));
        Ok(out)
    }

    fn suite_martingale(&self) -> Result<Vec<SuiteReport>> {
        let s = "martingale";
        let est = &self.cfg.estimation;
        let p = &self.scenario.params;
        let level = est.confidence;
        let mut out = Vec::new();

        let draw = |label: &str, n: usize, f: &dyn Fn(&mut crate::rng::StreamRng) -> f64| -> Vec<f64> {
            let mut rng = stream_rng(derive_seed(self.cfg.seed, label), 0);
            (0..n).map(|_| f(&mut rng)).collect()
        };
        let minus = draw("martingale/holding/minus", est.holding_samples, &|r| sample_holding_time(Regime::Minus, p, r));
        let plus = draw("martingale/holding/plus", est.holding_samples, &|r| sample_holding_time(Regime::Plus, p, r));
        for (tag, xs, rate) in [("minus", &minus, p.lambda_minus), ("plus", &plus, p.lambda_plus)] {
            let e = MomentEstimate::from_samples(xs, level)?;
            out.push(self.agrees(format!("martingale.holding.{tag}.mean"), s, format!("E T = 1/{rate} within 3 SE"), &e, 1.0 / rate, 3.0));
            let mu = 1.0 / rate;
            let sq: Vec<f64> = xs.iter().map(|v| (v - mu) * (v - mu)).collect();
            let e = MomentEstimate::from_samples(&sq, level)?;
            out.push(self.agrees(format!("martingale.holding.{tag}.variance"), s, format!("Var T = 1/{rate}^2 within 3 SE"), &e, mu * mu, 3.0));
        }

        let k = martingale_constants(p);
        let eta = draw("martingale/eta", est.cycle_samples, &|r| {
            sample_holding_time(Regime::Minus, p, r) + sample_holding_time(Regime::Plus, p, r)
        });
        let e = MomentEstimate::from_samples(&eta, level)?;
        out.push(self.agrees("martingale.eta.mean".into(), s, "E eta = c1 = 1/lambda_- + 1/lambda_+ within 3 SE".into(), &e, k.c1, 3.0));
        let var_eta = cycle_duration_variance(p);
        let centred: Vec<f64> = eta.iter().map(|v| (v - k.c1) * (v - k.c1)).collect();
        let e = MomentEstimate::from_samples(&centred, level)?;
        out.push(self.agrees(
            "martingale.eta.variance".into(),
            s,
            "Var eta = 1/lambda_-^2 + 1/lambda_+^2 within 3 SE".into(),
            &e,
            var_eta,
            3.0,
        ));
        let sq: Vec<f64> = eta.iter().map(|v| v * v).collect();
        let e = MomentEstimate::from_samples(&sq, level)?;
        out.push(self.agrees(
            "martingale.eta.second-moment".into(),
            s,
            "E eta^2 = c2 = 2(1/lambda_-^2 + 1/(lambda_- lambda_+) + 1/lambda_+^2) within 3 SE".into(),
            &e,
            k.c2,
            3.0,
        ));
        // increments of <S>_n per step, from blocks of 10 cycles
        let block = 10usize;
        let sums: Vec<f64> = eta.chunks_exact(block).map(|c| c.iter().map(|v| v - k.c1).sum::<f64>().powi(2) / block as f64).collect();
        let e = MomentEstimate::from_samples(&sums, level)?;
        out.push(self.diagnostic(
            "martingale.compensator-slope".into(),
            s,
            format!("E S_{block}^2 / {block} compared with c2"),
            &e,
            Some(k.c2),
        ));

        // holding means inside cycles that have not stopped
        let engine = self.engine();
        let y = radius_vec(self.d(), 2.0 * self.m1());
        let ens = self.ens("martingale/lemma4", est.replicas)?;
        let recs = replicate(ens.replicas, ens.seed, |rng| {
            let r = engine.simulate_cycle(&y, rng)?;
            let legs = r.legs.expect("cycle from outside the ball runs");
            Ok((legs.dur_minus, legs.dur_plus))
        })?;
        let dm: Vec<f64> = recs.iter().map(|r| r.0).collect();
        let dp: Vec<f64> = recs.iter().map(|r| r.1).collect();
        let e = MomentEstimate::from_samples(&dm, level)?;
        out.push(self.agrees(
            "martingale.holding-in-cycle.minus".into(),
            s,
            "E[T_{2k+1} - T_{2k} | tau > T_{2k}] = 1/lambda_- within 3 SE".into(),
            &e,
            1.0 / p.lambda_minus,
            3.0,
        ));
        let e = MomentEstimate::from_samples(&dp, level)?;
        out.push(self.agrees(
            "martingale.holding-in-cycle.plus".into(),
            s,
            "E[T_{2k+2} - T_{2k+1} | tau > T_{2k}] = 1/lambda_+ within 3 SE".into(),
            &e,
            1.0 / p.lambda_plus,
            3.0,
        ));

        let x = radius_vec(self.d(), 2.0 * self.m1());
        let dec = decomposition_check(&engine, &x, Regime::Minus, &self.ens("martingale/s-n", est.hitting_replicas)?)?;
        out.push(self.diagnostic("martingale.s-n-mean".into(), s, "E S_N from 2 M1 (optional stopping sanity)".into(), &dec.s_n, Some(0.0)));
        Ok(out)
    }

    fn suite_lemma1(&self) -> Result<Vec<SuiteReport>> {
        let s = "lemma1";
        let est = &self.cfg.estimation;
        let engine = self.engine();
        let eq = self.eq();
        let delta = lemma2_delta(&self.scenario.params, eq, self.scenario.spec.norm_bound);
        let mut out = Vec::new();
        let claim = format!("max over start/stop cases of E int 1(inf_s<=t |X_s| <= M) dt at |x| = M1 < delta = {delta:.6}");
        match &self.scenario.m1_search {
            Some(search) => {
                let last = search.trail.last().expect("search visits a radius");
                let mut r = self.upper("lemma1.occupation.below-delta".into(), s, claim, &last.worst, delta);
                if !search.found {
                    r.verdict = Verdict::Fail;
                }
                out.push(r);
                let ens = Ensemble::new(est.m1_search_replicas, est.confidence, derive_seed(self.cfg.seed, "m1-search"))?;
                let again = search_m1(&engine, delta, est.m1_max_doublings, &ens)?;
                let same = &again == search;
                out.push(self.value(
                    "lemma1.m1-reproducible".into(),
                    s,
                    format!("doubling search repeated with the same seed returns M1 = {}", search.m1),
                    again.m1,
                    search.m1,
                    same,
                ));
                let z = self.z();
                let monotone = search
                    .trail
                    .windows(2)
                    .all(|w| w[1].worst.mean <= w[0].worst.mean + z * (w[0].worst.se.hypot(w[1].worst.se)));
                let first = &search.trail[0].worst;
                let mut r = self.value(
                    "lemma1.occupation.monotone".into(),
                    s,
                    format!("occupation estimate non-increasing over radii {:?}", search.trail.iter().map(|t| t.radius).collect::<Vec<_>>()),
                    last.worst.mean,
                    first.mean,
                    monotone,
                );
                r.margin = Some(finite(first.mean - last.worst.mean));
                out.push(r);
            }
            None => {
                let x = radius_vec(self.d(), self.m1());
                let mut worst: Option<MomentEstimate> = None;
                for (i, (z, upto)) in OCCUPATION_CASES.iter().enumerate() {
                    let e = occupation_near_ball(&engine, &x, *z, *upto, &self.ens(&format!("lemma1/fixed/{i}"), est.m1_search_replicas)?)?;
                    if worst.is_none_or(|w| e.ci_hi > w.ci_hi) {
                        worst = Some(e);
                    }
                }
                out.push(self.upper("lemma1.occupation.below-delta".into(), s, claim, &worst.expect("four cases"), delta));
            }
        }
        let x = radius_vec(self.d(), 1.1 * self.scenario.params.m);
        let e = occupation_near_ball(&engine, &x, Regime::Minus, crate::engine::Upto::T1, &self.ens("lemma1/near-ball", est.replicas)?)?;
        out.push(self.lower("lemma1.occupation.near-ball".into(), s, "occupation up to T1 from |x| = 1.1 M is positive".into(), &e, 0.0));
        if let Some(last) = out.last_mut() {
            // strictly positive: the lower limit must clear zero
            if last.ci[0] <= 0.0 {
                last.verdict = Verdict::Fail;
            }
        }
        Ok(out)
    }

    fn suite_lemma2(&self) -> Result<Vec<SuiteReport>> {
        let s = "lemma2";
        let p = &self.scenario.params;
        let eq = self.eq();
        let d = p.d as f64;
        let engine = self.engine();
        let minus_bound = -((2.0 * p.r_minus - d) - eq.epsilon) / p.lambda_minus;
        let plus_bound = ((2.0 * p.r_plus + d) + eq.epsilon) / p.lambda_plus;
        let mut out = Vec::new();
        for &k in &self.cfg.estimation.drift_multipliers {
            let x = radius_vec(p.d, k * self.m1());
            let tag = fmt_mult(k);
            let e = interval_moment_change(&engine, &x, Regime::Minus, 2, &self.ens(&format!("lemma2/minus/{tag}"), self.cfg.estimation.drift_replicas)?)?;
            out.push(self.upper(
                format!("lemma2.interval.minus.p2.r{tag}M1"),
                s,
                format!("E_x,0 |X_T1|^2 - |x|^2 <= -((2r_- - d) - eps)/lambda_- at |x| = {tag} M1"),
                &e,
                minus_bound,
            ));
            let e = interval_moment_change(&engine, &x, Regime::Plus, 2, &self.ens(&format!("lemma2/plus/{tag}"), self.cfg.estimation.drift_replicas)?)?;
            out.push(self.upper(
                format!("lemma2.interval.plus.p2.r{tag}M1"),
                s,
                format!("E_x,1 |X_T0|^2 - |x|^2 <= ((2r_+ + d) + eps)/lambda_+ at |x| = {tag} M1"),
                &e,
                plus_bound,
            ));
        }
        Ok(out)
    }

    /// Conditional drift of `|Y|^{2m}` at the drift radii. For `m = 1` the
    /// bound is `-c/2`; for `m = 2, 3` a constant `c'` is fitted from
    /// `drift = -c' |y|^{2m-2}` and each radius must satisfy `<= -c' |y|^{2m-2} / 2`.
    fn suite_cycle_drift(&self, s: &str, m: u32) -> Result<Vec<SuiteReport>> {
        let engine = self.engine();
        let est = &self.cfg.estimation;
        let radii: Vec<f64> = est.drift_multipliers.iter().map(|k| k * self.m1()).collect();
        let mut ests = Vec::new();
        for (&k, &r) in est.drift_multipliers.iter().zip(&radii) {
            let y = radius_vec(self.d(), r);
            ests.push(conditional_moment_drift(&engine, &y, m, &self.ens(&format!("{s}/drift/{}", fmt_mult(k)), est.drift_replicas)?)?);
        }
        let mut out = Vec::new();
        let power = 2 * m;
        let tail = 2 * m - 2;
        let threshold_at: Box<dyn Fn(f64) -> f64>;
        if m == 1 {
            let c = lemma11_constant(&self.scenario.params, self.eq());
            out.push(self.value("lemma11.constant".into(), s, "c = ((2r_- - d) - eps)/lambda_- - ((2r_+ + d) + eps)/lambda_+ > 0".into(), c, 0.0, c > 0.0));
            if let Some(r) = out.last_mut() {
                r.margin = Some(c);
            }
            threshold_at = Box::new(move |_| -c / 2.0);
        } else {
            let fit = fit_moment_change(&radii, &ests, &[tail])?;
            let c_fit = -fit.coef[0];
            let se = fit.se[0];
            let z = self.z();
            let e = MomentEstimate {
                mean: c_fit,
                se,
                ci_lo: c_fit - z * se,
                ci_hi: c_fit + z * se,
                n: radii.len(),
                ..MomentEstimate::exact(c_fit)
            };
            let mut r = self.lower(format!("{s}.fit.c-positive"), s, format!("fitted c in drift = -c |y|^{tail} is positive"), &e, 0.0);
            if e.ci_lo <= 0.0 {
                r.verdict = Verdict::Fail;
            }
            out.push(r);
            threshold_at = Box::new(move |r: f64| -c_fit * r.powi(tail as i32) / 2.0);
        }
        for ((&k, &r), e) in est.drift_multipliers.iter().zip(&radii).zip(&ests) {
            let thr = threshold_at(r);
            let bound = if m == 1 { "-c/2".to_string() } else { format!("-c |y|^{tail} / 2") };
            let mut rep = self.upper(
                format!("{s}.decrease.p{power}.r{}M1", fmt_mult(k)),
                s,
                format!("E[|Y1|^{power} | Y0 = y] - |y|^{power} <= {bound} and < 0 at |y| = {} M1", fmt_mult(k)),
                e,
                thr.min(0.0),
            );
            if e.ci_hi >= 0.0 {
                rep.verdict = Verdict::Fail;
            }
            self.drift_rows.borrow_mut().push(DriftRow {
                suite: s.to_string(),
                y_radius: r,
                m,
                estimate: finite(e.mean),
                se: finite(e.se),
                ci_lo: finite(e.ci_lo),
                ci_hi: finite(e.ci_hi),
                n: e.n,
                verdict: rep.verdict,
            });
            out.push(rep);
        }
        Ok(out)
    }

    /// Fits the one-interval change of `|X|^power` in each regime against the
    /// radius and compares the leading coefficient with the explicit one.
    fn suite_coefficients(&self, s: &str, power: u32) -> Result<Vec<SuiteReport>> {
        let p = &self.scenario.params;
        let d = p.d as f64;
        let est = &self.cfg.estimation;
        let engine = self.engine();
        let (shift, powers, lead, names) = match power {
            4 => (2.0 * d + 4.0, vec![0u32, 2], 2u32, ("lemma8", "lemma5")),
            _ => (3.0 * d + 12.0, vec![0u32, 2, 4], 4u32, ("lemma8fr", "lemma5a")),
        };
        let kp = power as f64;
        let stated_minus = -(kp * p.r_minus - shift) / p.lambda_minus;
        let stated_plus = (kp * p.r_plus + shift) / p.lambda_plus;
        let radii: Vec<f64> = est.coefficient_multipliers.iter().map(|k| k * self.m1()).collect();
        let z = self.z();
        let mut out = Vec::new();
        for (z_reg, name, stated) in [(Regime::Minus, names.0, stated_minus), (Regime::Plus, names.1, stated_plus)] {
            let mut ests = Vec::new();
            for (&k, &r) in est.coefficient_multipliers.iter().zip(&radii) {
                let x = radius_vec(p.d, r);
                let e = interval_moment_change(&engine, &x, z_reg, power, &self.ens(&format!("{s}/{name}/{}", fmt_mult(k)), est.coefficient_replicas)?)?;
                let sign_id = format!("{name}.sign.p{power}.r{}M1", fmt_mult(k));
                let claim_sign = |rel: &str| format!("E_x,{} |X_T|^{power} - |x|^{power} {rel} 0 at |x| = {} M1", z_reg.index(), fmt_mult(k));
                let mut rep = if z_reg == Regime::Minus {
                    self.upper(sign_id, s, claim_sign("<"), &e, 0.0)
                } else {
                    self.lower(sign_id, s, claim_sign(">"), &e, 0.0)
                };
                if e.ci_lo <= 0.0 && e.ci_hi >= 0.0 {
                    rep.verdict = Verdict::Fail;
                }
                out.push(rep);
                ests.push(e);
            }
            let fit = fit_moment_change(&radii, &ests, &powers)?;
            let i = powers.iter().position(|&q| q == lead).expect("leading power present");
            let (a, se) = (fit.coef[i], fit.se[i]);
            let allowed = est.coefficient_tolerance * stated.abs() + z * se;
            let ok = (a - stated).abs() <= allowed && a.signum() == stated.signum();
            let e = MomentEstimate {
                mean: a,
                se,
                ci_lo: a - z * se,
                ci_hi: a + z * se,
                n: radii.len(),
                ..MomentEstimate::exact(a)
            };
            out.push(self.report(
                format!("{name}.coef.p{power}"),
                s,
                format!(
                    "coefficient of |x|^{lead} in E_x,{} |X_T|^{power} - |x|^{power} matches {stated:.6} within {:.0}% + CI",
                    z_reg.index(),
                    100.0 * est.coefficient_tolerance
                ),
                &e,
                Some(stated),
                Some(allowed - (a - stated).abs()),
                Verdict::from_bool(ok),
            ));
        }
        Ok(out)
    }

    fn suite_lemma50(&self) -> Result<Vec<SuiteReport>> {
        let s = "lemma50";
        let est = &self.cfg.estimation;
        let engine = self.engine();
        let c_fit = 2.0 * self.scenario.audit.max_abs_inner + self.d() as f64;
        let x = radius_vec(self.d(), self.m1());
        let x2 = norm_pow(&x, 2);
        let mut out = Vec::new();
        for &zi in &est.start_regimes {
            let z = Regime::try_from(zi).expect("validated regime");
            for &t in &est.moment_times {
                let e = moment_at_time(&engine, &x, z, t, 2, &self.ens(&format!("lemma50/z{zi}/t{t}"), est.replicas)?)?;
                let rate = e.affine(1.0 / t, -x2 / t);
                let worst = rate.ci_hi.abs().max(rate.ci_lo.abs());
                out.push(self.report(
                    format!("lemma50.rate.z{zi}.t{t}"),
                    s,
                    format!("|E_x,{zi} |X_t|^2 - |x|^2| / t <= 2 sup|x.b| + d = {c_fit} at t = {t}"),
                    &rate,
                    Some(c_fit),
                    Some(c_fit - worst),
                    Verdict::from_bool(worst <= c_fit),
                ));
            }
        }
        Ok(out)
    }

    fn hitting(&self, zi: u8, idx: usize) -> Result<HittingMoments> {
        if let Some(h) = self.hitting.borrow().get(&(zi, idx)) {
            return Ok(h.clone());
        }
        let est = &self.cfg.estimation;
        let k = est.growth_multipliers[idx];
        let x = radius_vec(self.d(), k * self.m1());
        let z = Regime::try_from(zi).expect("validated regime");
        let ens = self.ens(&format!("hitting/z{zi}/{}", fmt_mult(k)), est.hitting_replicas)?;
        let h = hitting_moments(&self.engine(), &x, z, &ens, est.bootstrap_resamples)?;
        self.hitting.borrow_mut().insert((zi, idx), h.clone());
        Ok(h)
    }

    fn growth_ensemble(&self, zi: u8) -> Result<Vec<HittingMoments>> {
        (0..self.cfg.estimation.growth_multipliers.len()).map(|i| self.hitting(zi, i)).collect()
    }

    fn growth_radii(&self) -> Vec<f64> {
        self.cfg.estimation.growth_multipliers.iter().map(|k| k * self.m1()).collect()
    }

    fn exponent_report(&self, id: String, s: &str, claim: String, values: &[MomentEstimate], bound: f64) -> Result<SuiteReport> {
        let fit = growth_exponent(values, &self.growth_radii(), self.cfg.estimation.confidence)?;
        let aborted = values.iter().any(|v| v.aborted);
        let e = MomentEstimate {
            mean: fit.exponent,
            se: fit.exponent_se,
            ci_lo: fit.exponent - (fit.exponent_ci_hi - fit.exponent),
            ci_hi: fit.exponent_ci_hi,
            n: values.iter().map(|v| v.n).sum(),
            censored_fraction: values.iter().fold(0.0, |m, v| m.max(v.censored_fraction)),
            aborted,
            method: values[0].method,
        };
        Ok(self.upper(id, s, claim, &e, bound))
    }

    fn suite_prop1(&self) -> Result<Vec<SuiteReport>> {
        let s = "prop1";
        let est = &self.cfg.estimation;
        let bound = 2.0 + est.quadratic_exponent_tolerance;
        let mut out = Vec::new();
        for &zi in &est.start_regimes {
            let hs = self.growth_ensemble(zi)?;
            let tm1: Vec<_> = hs.iter().map(|h| h.tau_m1).collect();
            out.push(self.exponent_report(
                format!("prop1.exponent.tau-m1.z{zi}"),
                s,
                format!("log-log slope of E_x,{zi} tau_M1 in |x| <= {bound}"),
                &tm1,
                bound,
            )?);
            let n: Vec<_> = hs.iter().map(|h| h.n).collect();
            out.push(self.exponent_report(
                format!("prop1.exponent.n.z{zi}"),
                s,
                format!("log-log slope of E_x,{zi} N in |x| <= {bound}"),
                &n,
                bound,
            )?);
            let worst = hs.iter().fold(0.0f64, |m, h| m.max(h.censored_fraction));
            out.push(self.value(
                format!("prop1.censoring.z{zi}"),
                s,
                format!("censored fraction < {} at every radius", est.max_censored_fraction),
                worst,
                est.max_censored_fraction,
                worst < est.max_censored_fraction,
            ));
        }
        Ok(out)
    }

    fn suite_theorem2(&self) -> Result<Vec<SuiteReport>> {
        let s = "theorem2";
        let est = &self.cfg.estimation;
        let bound = 6.0 + est.sixth_exponent_tolerance;
        let mut out = Vec::new();
        for &zi in &est.start_regimes {
            let hs = self.growth_ensemble(zi)?;
            let t2: Vec<_> = hs.iter().map(|h| h.tau_m1_sq).collect();
            out.push(self.exponent_report(
                format!("theorem2.exponent.tau-m1-sq.z{zi}"),
                s,
                format!("log-log slope of E_x,{zi} tau_M1^2 in |x| <= {bound}"),
                &t2,
                bound,
            )?);
            let n2: Vec<_> = hs.iter().map(|h| h.n_sq).collect();
            out.push(self.exponent_report(
                format!("theorem2.exponent.n-sq.z{zi}"),
                s,
                format!("log-log slope of E_x,{zi} N^2 in |x| <= {bound}"),
                &n2,
                bound,
            )?);
        }
        Ok(out)
    }

    fn suite_remark1(&self) -> Result<Vec<SuiteReport>> {
        let s = "remark1";
        let est = &self.cfg.estimation;
        let mut out = Vec::new();
        for &zi in &est.start_regimes {
            let hs = self.growth_ensemble(zi)?;
            let t2: Vec<_> = hs.iter().map(|h| h.tau_m1_sq).collect();
            let mut r = self.exponent_report(
                format!("remark1.exponent.tau-m1-sq.z{zi}"),
                s,
                format!("log-log slope of E_x,{zi} tau_M1^2 compared with {}", est.conjectured_exponent),
                &t2,
                est.conjectured_exponent,
            )?;
            r.verdict = Verdict::Diagnostic;
            r.margin = Some(finite(est.conjectured_exponent - r.estimate));
            out.push(r);
        }
        Ok(out)
    }

    fn suite_remark2(&self) -> Result<Vec<SuiteReport>> {
        let s = "remark2";
        let est = &self.cfg.estimation;
        let r0 = est.tv_start_multiplier * self.m1();
        let x = radius_vec(self.d(), r0);
        let ens = self.ens("remark2/tv", est.tv_replicas)?;
        let r_max = 2.0 * r0.max(self.m1());
        let tv = tv_decay(&self.engine(), &x, Regime::Minus, &est.tv_times, est.tv_reference_time, est.tv_bins, r_max, &ens)?;
        let mut out = Vec::new();
        let worst_rise = tv.tv.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        let mut e = MomentEstimate::exact(finite(worst_rise.max(-1.0)));
        e.n = ens.replicas;
        out.push(self.diagnostic(
            "remark2.tv.non-increasing".into(),
            s,
            format!(
                "largest rise of TV(t) over {:?} vs noise floor {:.4}; non-increasing = {}",
                tv.times, tv.noise_floor, tv.non_increasing
            ),
            &e,
            Some(tv.noise_floor),
        ));
        let mut e = MomentEstimate::exact(tv.slope.map(finite).unwrap_or(0.0));
        e.n = ens.replicas;
        out.push(self.diagnostic(
            "remark2.tv.slope".into(),
            s,
            format!(
                "slope of log TV vs log(1+t) (points above noise: {}) compared with -2",
                if tv.slope.is_some() { "yes" } else { "too few" }
            ),
            &e,
            Some(-2.0),
        ));
        let mut e = MomentEstimate::exact(tv.overflow_fraction);
        e.n = ens.replicas;
        out.push(self.diagnostic(
            "remark2.tv.coverage".into(),
            s,
            format!("fraction of samples beyond r_max = {r_max}; undercovered = {}", tv.undercovered),
            &e,
            Some(1e-3),
        ));
        Ok(out)
    }
}

/// Random positive tuples: count implication failures of c2a => c2 => c1,
/// and the worst relative residual of the (epsilon, q) solution.
fn condition_sweep(n: usize, seed: u64) -> (usize, f64, usize) {
    let mut rng = stream_rng(seed, 0);
    let mut log_u = |lo: f64, hi: f64| (rng.random_range(lo.ln()..hi.ln())).exp();
    let mut violations = 0;
    let mut max_res = 0.0f64;
    let mut solved = 0;
    for _ in 0..n {
        let d = (log_u(1.0, 11.0).floor() as usize).clamp(1, 10);
        let r_minus = log_u(0.05, 100.0);
        let r_plus = log_u(0.01, 10.0);
        let p = ModelParams {
            d,
            lambda_minus: log_u(0.05, 20.0),
            lambda_plus: log_u(0.05, 20.0),
            r_minus,
            r_plus,
            big_r_minus: r_minus,
            big_r_plus: r_plus,
            m: 1.0,
            m1: 2.0,
        };
        let c = check_conditions(&p);
        if (c.holds_c2a && !c.holds_c2) || (c.holds_c2 && !c.holds_c1) {
            violations += 1;
        }
        if let Some(eq) = c.epsilon_q {
            let (res, scale) = lle_residual(&p, eq);
            max_res = max_res.max(res / scale);
            solved += 1;
        }
    }
    (violations, max_res, solved)
}

/// Resolves the config and runs its suites (or `suites` when given).
pub fn run_suites(cfg: &RunConfig, suites: Option<&[String]>) -> Result<RunOutput> {
    let runner = Runner::new(cfg)?;
    runner.run(suites.unwrap_or(&cfg.suites))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_have_the_advertised_condition_pattern() {
        let margins = |name: &str| {
            let p = preset(name).unwrap();
            let params = ModelParams {
                d: p.d,
                lambda_minus: p.lambda_minus,
                lambda_plus: p.lambda_plus,
                r_minus: p.kappa_minus,
                r_plus: p.kappa_plus,
                big_r_minus: p.kappa_minus,
                big_r_plus: p.kappa_plus,
                m: p.m,
                m1: 2.0 * p.m,
            };
            check_conditions(&params)
        };
        let c = margins("canonical-1d");
        assert!(c.holds_c2a && c.margins.c2a >= 5.0);
        let c = margins("canonical-3d");
        assert!(c.holds_c2a && c.margins.c2a >= 5.0);
        let c = margins("boundary-c1");
        assert!(c.holds_c1 && !c.holds_c2);
    }

    #[test]
    fn suite_ids_are_unique() {
        let mut ids: Vec<_> = SUITES.iter().map(|s| s.0).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), SUITES.len());
        assert_eq!(suite_tier("theorem2"), Some(ConditionTier::C2a));
        assert_eq!(suite_tier("nope"), None);
    }

    #[test]
    fn sweep_finds_no_violations() {
        let (v, res, solved) = condition_sweep(2000, 3);
        assert_eq!(v, 0);
        assert!(solved > 100);
        assert!(res <= 1e-12);
    }
}
