//! Drivers for the three reference experiments.
//!
//! 1. Seasonal transmission with a gradual intervention, classical SLIR
//!    against a PG-NODE whose β_eff is prescribed.
//! 2. A SLIRT ground truth fitted by a trained PG-NODE on an SLIR skeleton.
//! 3. Twenty-year forecasts under four intervention strategies started from
//!    the classical state at year 30.
//!
//! Every trajectory in a [`ScenarioResult`] is sampled on the result's shared
//! time grid, and all metrics are computed on that grid.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::analysis::basic_reproduction_number;
use crate::error::{Error, Result};
use crate::integrator::{integrate, uniform_grid, IntegratorConfig, Trajectory};
use crate::model::{slir_rhs_into, slirt_rhs_into, EpiState, ModelParams, SlirtExtension};
use crate::pgnode::{effective_rates, simulate, BetaSchedule, PgNodeModel};
use crate::training::{train, Observations, StopReason, TrainConfig, I_ONLY_MASK};

/// What counts as a "case" when accumulating averted cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Incidence {
    /// Person-years spent in `I`.
    #[default]
    ActiveYears,
    /// New active cases, the L → I flow k·L.
    Progression,
    /// New infections β·S·I/N.
    Infections,
}

impl Incidence {
    pub fn as_str(self) -> &'static str {
        match self {
            Incidence::ActiveYears => "active-years",
            Incidence::Progression => "progression",
            Incidence::Infections => "infections",
        }
    }

    /// Instantaneous rate for `x = [S, L, I, R]` under effective rates.
    pub fn rate(self, x: &[f64], params: &ModelParams) -> f64 {
        match self {
            Incidence::ActiveYears => x[2],
            Incidence::Progression => params.progression * x[1],
            Incidence::Infections => params.transmission * x[0] * x[2] / (x[0] + x[1] + x[2] + x[3]),
        }
    }
}

impl fmt::Display for Incidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Incidence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "active-years" => Ok(Incidence::ActiveYears),
            "progression" => Ok(Incidence::Progression),
            "infections" => Ok(Incidence::Infections),
            other => Err(Error::Contract(format!(
                "unknown incidence `{other}` (expected active-years, progression or infections)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: ModelParams,
    pub slirt: SlirtExtension,
    pub initial: EpiState,
    /// yr
    pub horizon: f64,
    /// Relative amplitude of the annual sin(2πt) modulation of β.
    pub seasonal_amplitude: f64,
    /// yr
    pub intervention_onset: f64,
    /// yr; the β multiplier reaches its final value here.
    pub intervention_end: f64,
    pub final_beta_multiplier: f64,
    /// yr; Strategy D ramps linearly over this span.
    pub strategy_ramp: f64,
    /// yr
    pub forecast_horizon: f64,
    pub incidence: Incidence,
    /// Output grid spacing, yr.
    pub output_step: f64,
    /// Observation spacing for the training experiment, yr.
    pub observation_step: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::default(),
            slirt: SlirtExtension::default(),
            initial: EpiState::reference_initial(),
            horizon: 30.0,
            seasonal_amplitude: 0.12,
            intervention_onset: 8.0,
            intervention_end: 30.0,
            final_beta_multiplier: 0.62,
            strategy_ramp: 10.0,
            forecast_horizon: 20.0,
            incidence: Incidence::ActiveYears,
            output_step: 0.05,
            observation_step: 0.25,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.slirt.validate()?;
        let positive = [
            ("horizon", self.horizon),
            ("forecast_horizon", self.forecast_horizon),
            ("output_step", self.output_step),
            ("observation_step", self.observation_step),
            ("final_beta_multiplier", self.final_beta_multiplier),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::ParameterDomain(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.seasonal_amplitude) {
            return Err(Error::ParameterDomain(format!(
                "seasonal_amplitude must lie in [0, 1), got {}",
                self.seasonal_amplitude
            )));
        }
        if !(self.intervention_onset >= 0.0 && self.intervention_end > self.intervention_onset) {
            return Err(Error::ParameterDomain("need 0 <= intervention_onset < intervention_end".into()));
        }
        if !(self.strategy_ramp >= 0.0) {
            return Err(Error::ParameterDomain("strategy_ramp must be >= 0".into()));
        }
        if self.initial.t.is_some() || !self.initial.is_non_negative() || self.initial.total() <= 0.0 {
            return Err(Error::ParameterDomain("initial state must be a non-negative SLIR state with N > 0".into()));
        }
        Ok(())
    }

    fn grid(&self, end: f64) -> Vec<f64> {
        uniform_grid(0.0, end, self.output_step)
    }
}

/// Intervention multiplier s(t): 1 before onset, a half-cosine ramp down to
/// the final multiplier, then constant.
pub fn intervention_multiplier(t: f64, cfg: &ScenarioConfig) -> f64 {
    let (t0, t1) = (cfg.intervention_onset, cfg.intervention_end);
    if t <= t0 {
        1.0
    } else if t <= t1 {
        let drop = 1.0 - cfg.final_beta_multiplier;
        1.0 - drop * (1.0 - (PI * (t - t0) / (t1 - t0)).cos()) / 2.0
    } else {
        cfg.final_beta_multiplier
    }
}

/// s(t)·(1 + A·sin 2πt)
pub fn prescribed_multiplier(t: f64, cfg: &ScenarioConfig) -> f64 {
    intervention_multiplier(t, cfg) * (1.0 + cfg.seasonal_amplitude * (2.0 * PI * t).sin())
}

/// β(t) = β₀·s(t)·(1 + A·sin 2πt).
pub fn prescribed_beta(t: f64, cfg: &ScenarioConfig) -> f64 {
    cfg.params.transmission * prescribed_multiplier(t, cfg)
}

/// A time series on the result grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrajectory {
    pub label: String,
    pub states: Vec<EpiState>,
}

impl LabeledTrajectory {
    pub fn compartment(&self, pick: impl Fn(&EpiState) -> f64) -> Vec<f64> {
        self.states.iter().map(pick).collect()
    }
}

/// Outcome of the training run inside scenario 2.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub stop_reason: String,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub id: u8,
    pub times: Vec<f64>,
    pub trajectories: Vec<LabeledTrajectory>,
    pub series: Vec<Series>,
    pub metrics: BTreeMap<String, f64>,
    pub training: Option<TrainingSummary>,
    /// Trained network for scenario 2.
    pub model: Option<PgNodeModel>,
}

impl ScenarioResult {
    fn new(id: u8, times: Vec<f64>) -> Self {
        Self {
            id,
            times,
            trajectories: Vec::new(),
            series: Vec::new(),
            metrics: BTreeMap::new(),
            training: None,
            model: None,
        }
    }

    pub fn trajectory(&self, label: &str) -> Option<&LabeledTrajectory> {
        self.trajectories.iter().find(|t| t.label == label)
    }

    pub fn series(&self, label: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.label == label)
    }

    fn push_trajectory(&mut self, label: &str, traj: &Trajectory) -> Result<()> {
        let states = traj.sample_states(&self.times)?;
        self.trajectories.push(LabeledTrajectory { label: label.into(), states });
        Ok(())
    }

    fn push_series(&mut self, label: &str, values: Vec<f64>) {
        self.series.push(Series { label: label.into(), values });
    }

    fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.into(), value);
    }
}

/// Classical SLIR with constant parameters.
pub fn simulate_slir(params: &ModelParams, x0: &EpiState, span: (f64, f64), cfg: &IntegratorConfig) -> Result<Trajectory> {
    let beta = params.transmission;
    integrate(|_, x, dx| slir_rhs_into(x, params, beta, dx), &[x0.s, x0.l, x0.i, x0.r], span, cfg)
}

/// SLIRT with `T(0)` taken from `x0` (zero when absent).
pub fn simulate_slirt(
    params: &ModelParams,
    ext: &SlirtExtension,
    x0: &EpiState,
    span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let start = [x0.s, x0.l, x0.i, x0.r, x0.t.unwrap_or(0.0)];
    integrate(|_, x, dx| slirt_rhs_into(x, params, ext, dx), &start, span, cfg)
}

fn slir_state_at(params: &ModelParams, x0: &EpiState, t: f64, cfg: &IntegratorConfig) -> Result<EpiState> {
    EpiState::from_slice(&simulate_slir(params, x0, (0.0, t), cfg)?.eval(t)?)
}

/// Root mean square of the pointwise difference.
pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Contract(format!("rmse needs equal non-empty series, got {} and {}", a.len(), b.len())));
    }
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sum / a.len() as f64).sqrt())
}

/// Trapezoidal running integral of `rate` over `times`, starting at 0.
pub fn cumulative(times: &[f64], rate: &[f64]) -> Result<Vec<f64>> {
    if times.len() != rate.len() {
        return Err(Error::Contract("time grid and rate series differ in length".into()));
    }
    let mut total = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        if k > 0 {
            total += 0.5 * (times[k] - times[k - 1]) * (rate[k] + rate[k - 1]);
        }
        out.push(total);
    }
    Ok(out)
}

/// Baseline cumulative incidence minus strategy cumulative incidence, with
/// both incidence-rate series sampled on `times`.
pub fn cases_averted(times: &[f64], strategy_rate: &[f64], baseline_rate: &[f64]) -> Result<Vec<f64>> {
    if strategy_rate.len() != baseline_rate.len() {
        return Err(Error::Contract("strategy and baseline grids differ".into()));
    }
    let s = cumulative(times, strategy_rate)?;
    let b = cumulative(times, baseline_rate)?;
    Ok(b.iter().zip(&s).map(|(b, s)| b - s).collect())
}

/// Reference experiment 1.
pub fn run_scenario1(cfg: &ScenarioConfig, integrator: &IntegratorConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let span = (0.0, cfg.horizon);
    let mut result = ScenarioResult::new(1, cfg.grid(cfg.horizon));

    let classical = simulate_slir(&cfg.params, &cfg.initial, span, integrator)?;
    let schedule_cfg = cfg.clone();
    let mut model = PgNodeModel::new(cfg.params, cfg.horizon, cfg.seed);
    model.beta_schedule = Some(BetaSchedule::new(move |t| prescribed_multiplier(t, &schedule_cfg)));
    let hybrid = simulate(&model, &cfg.initial, span, integrator)?;

    result.push_trajectory("classical", &classical)?;
    result.push_trajectory("pgnode", &hybrid)?;
    let beta: Vec<f64> = result.times.iter().map(|&t| prescribed_beta(t, cfg)).collect();
    result.push_series("beta_pgnode", beta);
    result.push_series("beta_classical", vec![cfg.params.transmission; result.times.len()]);

    let end = cfg.horizon;
    let mean_beta = cfg.params.transmission * intervention_multiplier(end, cfg);
    let final_params = ModelParams { transmission: mean_beta, ..cfg.params };
    let last = |label: &str| result.trajectory(label).and_then(|t| t.states.last()).map(|x| x.i).unwrap_or(f64::NAN);
    let (classical_i, hybrid_i) = (last("classical"), last("pgnode"));
    result.metric("classical_I_end", classical_i);
    result.metric("pgnode_I_end", hybrid_i);
    result.metric("beta_seasonal_mean_end", mean_beta);
    result.metric("r0_baseline", basic_reproduction_number(&cfg.params)?);
    result.metric("r0_end", basic_reproduction_number(&final_params)?);
    Ok(result)
}

/// Reference experiment 2. `train_cfg.seed` initializes the network.
///
/// A training failure is not an error: the result keeps the parameters from
/// the last completed epoch and records the failure in
/// [`ScenarioResult::training`].
pub fn run_scenario2(cfg: &ScenarioConfig, train_cfg: &TrainConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let integrator = &train_cfg.integrator;
    let span = (0.0, cfg.horizon);
    let mut result = ScenarioResult::new(2, cfg.grid(cfg.horizon));

    let truth = simulate_slirt(&cfg.params, &cfg.slirt, &cfg.initial, span, integrator)?;
    let classical = simulate_slir(&cfg.params, &cfg.initial, span, integrator)?;
    let untrained = PgNodeModel::new(cfg.params, cfg.horizon, train_cfg.seed);
    let untrained_traj = simulate(&untrained, &cfg.initial, span, integrator)?;

    let obs_times: Vec<f64> = uniform_grid(0.0, cfg.horizon, cfg.observation_step).into_iter().skip(1).collect();
    let obs_values = truth
        .sample_at(&obs_times)?
        .into_iter()
        .map(|x| std::array::from_fn(|c| I_ONLY_MASK[c].then_some(x[c])))
        .collect();
    let obs = Observations::new(0.0, cfg.initial, obs_times, obs_values)?;

    let (weights, summary) = match train(&untrained, &obs, train_cfg) {
        Ok(report) => {
            let stop = match report.stop_reason {
                StopReason::Converged => "converged".to_string(),
                StopReason::EpochBudget => "epoch-budget".to_string(),
            };
            (report.final_params.clone(), summarize(&report.loss_history, stop))
        }
        Err(failure) => {
            let stop = format!("failed: {}", failure.source);
            (failure.partial.final_params.clone(), summarize(&failure.partial.loss_history, stop))
        }
    };
    let trained = PgNodeModel { weights, ..untrained };
    let trained_traj = simulate(&trained, &cfg.initial, span, integrator)?;

    result.push_trajectory("slirt", &truth)?;
    result.push_trajectory("classical", &classical)?;
    result.push_trajectory("pgnode_untrained", &untrained_traj)?;
    result.push_trajectory("pgnode", &trained_traj)?;

    let infectious = |label: &str| result.trajectory(label).map(|t| t.compartment(|x| x.i)).unwrap_or_default();
    let truth_i = infectious("slirt");
    let rmse_classical = rmse(&infectious("classical"), &truth_i)?;
    let rmse_untrained = rmse(&infectious("pgnode_untrained"), &truth_i)?;
    let rmse_trained = rmse(&infectious("pgnode"), &truth_i)?;

    let hybrid = result.trajectory("pgnode").map(|t| t.states.clone()).unwrap_or_default();
    let mut beta = Vec::with_capacity(hybrid.len());
    let mut gamma = Vec::with_capacity(hybrid.len());
    let mut correction = Vec::with_capacity(hybrid.len());
    for (&t, x) in result.times.iter().zip(&hybrid) {
        let rates = effective_rates(&trained, t, x, &[])?;
        beta.push(rates.beta);
        gamma.push(rates.gamma);
        correction.push(rates.correction_flow);
    }
    result.push_series("beta_eff", beta);
    result.push_series("gamma_eff", gamma);
    result.push_series("correction_flow", correction);

    result.metric("rmse_classical", rmse_classical);
    result.metric("rmse_pgnode_untrained", rmse_untrained);
    result.metric("rmse_pgnode", rmse_trained);
    result.metric("rmse_reduction_pct", 100.0 * (1.0 - rmse_trained / rmse_classical));
    result.metric("reference_reduction_pct", 27.0);
    result.metric("slirt_I_end", truth_i.last().copied().unwrap_or(f64::NAN));
    result.metric("training_epochs", summary.epochs as f64);
    result.metric("training_final_loss", summary.final_loss);
    result.training = Some(summary);
    result.model = Some(trained);
    Ok(result)
}

fn summarize(history: &[f64], stop_reason: String) -> TrainingSummary {
    TrainingSummary {
        epochs: history.len(),
        initial_loss: history.first().copied().unwrap_or(f64::NAN),
        final_loss: history.last().copied().unwrap_or(f64::NAN),
        stop_reason,
        loss_history: history.to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Strategy {
    /// No intervention.
    A,
    /// Faster case detection: γ × 1.5.
    B,
    /// Transmission control: β × 0.6.
    C,
    /// Combined package phased in linearly: β × 0.6, γ × 1.5, k × 0.88.
    D,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::A, Strategy::B, Strategy::C, Strategy::D];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::A => "A",
            Strategy::B => "B",
            Strategy::C => "C",
            Strategy::D => "D",
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Strategy::A),
            "B" | "b" => Ok(Strategy::B),
            "C" | "c" => Ok(Strategy::C),
            "D" | "d" => Ok(Strategy::D),
            other => Err(Error::Contract(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Multipliers on (β, γ, k) at time `t` after the forecast starts.
pub fn strategy_params(strategy: Strategy, t: f64, ramp: f64) -> (f64, f64, f64) {
    match strategy {
        Strategy::A => (1.0, 1.0, 1.0),
        Strategy::B => (1.0, 1.5, 1.0),
        Strategy::C => (0.6, 1.0, 1.0),
        Strategy::D => {
            let w = if ramp <= 0.0 { 1.0 } else { (t / ramp).clamp(0.0, 1.0) };
            (1.0 - 0.4 * w, 1.0 + 0.5 * w, 1.0 - 0.12 * w)
        }
    }
}

/// `base` with the strategy multipliers applied at time `t`.
pub fn strategy_rates(base: &ModelParams, strategy: Strategy, t: f64, ramp: f64) -> ModelParams {
    let (mb, mg, mk) = strategy_params(strategy, t, ramp);
    ModelParams {
        transmission: base.transmission * mb,
        recovery: base.recovery * mg,
        progression: base.progression * mk,
        ..*base
    }
}

/// Reference experiment 3, with the four strategies integrated concurrently.
pub fn run_scenario3(cfg: &ScenarioConfig, integrator: &IntegratorConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let start = slir_state_at(&cfg.params, &cfg.initial, cfg.horizon, integrator)?;
    let end = cfg.forecast_horizon;
    let mut result = ScenarioResult::new(3, cfg.grid(end));

    let runs: Vec<Result<Trajectory>> = std::thread::scope(|scope| {
        let handles: Vec<_> = Strategy::ALL
            .iter()
            .map(|&strategy| {
                scope.spawn(move || {
                    integrate(
                        |t, x, dx| {
                            let p = strategy_rates(&cfg.params, strategy, t, cfg.strategy_ramp);
                            slir_rhs_into(x, &p, p.transmission, dx)
                        },
                        &[start.s, start.l, start.i, start.r],
                        (0.0, end),
                        integrator,
                    )
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::InternalConsistency("strategy worker panicked".into()))))
            .collect()
    });

    let mut incidence = Vec::with_capacity(4);
    for (strategy, run) in Strategy::ALL.iter().zip(runs) {
        let traj = run?;
        result.push_trajectory(strategy.label(), &traj)?;
        let rates: Vec<f64> = result
            .times
            .iter()
            .zip(&result.trajectories.last().expect("just pushed").states)
            .map(|(&t, x)| {
                let p = strategy_rates(&cfg.params, *strategy, t, cfg.strategy_ramp);
                cfg.incidence.rate(&[x.s, x.l, x.i, x.r], &p)
            })
            .collect();
        incidence.push(rates);
    }

    for (k, &strategy) in Strategy::ALL.iter().enumerate() {
        let averted = cases_averted(&result.times, &incidence[k], &incidence[0])?;
        let final_params = strategy_rates(&cfg.params, strategy, f64::INFINITY, cfg.strategy_ramp);
        result.metric(&format!("r0_{}", strategy.label()), basic_reproduction_number(&final_params)?);
        result.metric(&format!("averted_{}", strategy.label()), averted.last().copied().unwrap_or(0.0));
        result.push_series(&format!("averted_{}", strategy.label()), averted);
    }
    result.metric("start_S", start.s);
    result.metric("start_L", start.l);
    result.metric("start_I", start.i);
    result.metric("start_R", start.r);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prescribed_beta_values() {
        let cfg = ScenarioConfig::default();
        assert_eq!(prescribed_beta(0.0, &cfg), 5.0);
        assert!((prescribed_beta(0.25, &cfg) - 5.6).abs() < 1e-12);
        assert!((prescribed_beta(0.75, &cfg) - 4.4).abs() < 1e-12);
        assert!((intervention_multiplier(30.0, &cfg) - 0.62).abs() < 1e-15);
        assert!((intervention_multiplier(19.0, &cfg) - 0.81).abs() < 1e-12);
        assert_eq!(intervention_multiplier(40.0, &cfg), 0.62);
    }

    #[test]
    fn rmse_fixtures() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let b = [1.5, 2.0, 2.0, 4.0, 7.0, 6.0, 7.0, 8.0, 9.0, 13.0];
        // squared differences 0.25, 0, 1, 0, 4, 0, 0, 0, 0, 9 → mean 1.425
        assert!((rmse(&a, &b).unwrap() - 1.425_f64.sqrt()).abs() < 1e-15);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        let shifted: Vec<f64> = a.iter().map(|x| x + 2.5).collect();
        assert_eq!(rmse(&a, &shifted).unwrap(), 2.5);
        assert!(rmse(&a, &b[..3]).is_err());
    }

    #[test]
    fn cumulative_trapezoid() {
        let times = [0.0, 1.0, 3.0];
        assert_eq!(cumulative(&times, &[2.0, 4.0, 0.0]).unwrap(), vec![0.0, 3.0, 7.0]);
        let same = [1.0, 2.0, 3.0];
        assert_eq!(cases_averted(&times, &same, &same).unwrap(), vec![0.0; 3]);
        assert!(cases_averted(&times, &same, &same[..2]).is_err());
    }

    #[test]
    fn strategy_multipliers() {
        assert_eq!(strategy_params(Strategy::D, 0.0, 10.0), (1.0, 1.0, 1.0));
        let (b, g, k) = strategy_params(Strategy::D, 5.0, 10.0);
        assert!((b - 0.8).abs() < 1e-15 && (g - 1.25).abs() < 1e-15 && (k - 0.94).abs() < 1e-15);
        assert_eq!(strategy_params(Strategy::D, 12.0, 10.0), (0.6, 1.5, 0.88));
        assert_eq!(strategy_params(Strategy::D, 0.0, 0.0), (0.6, 1.5, 0.88));
        assert!("E".parse::<Strategy>().is_err());
        assert_eq!("progression".parse::<Incidence>().unwrap(), Incidence::Progression);
        assert!("cases".parse::<Incidence>().is_err());
    }

    #[test]
    fn config_rejects_bad_amplitude() {
        let cfg = ScenarioConfig { seasonal_amplitude: 1.0, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::ParameterDomain(_))));
    }
}
