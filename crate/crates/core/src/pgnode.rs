//! The hybrid SLIR field: the mechanistic skeleton with network-modulated
//! transmission and recovery rates and a bounded, mass-conserving flow
//! between `I` and `R`.
//!
//! With raw network outputs `(r₀, r₁, r₂)` evaluated on the features
//! `[t/T, S/N, L/N, I/N, R/N, u…]`:
//!
//! ```text
//! β_eff = β₀ · softplus(r₀ + c) / softplus(c)
//! γ_eff = γ₀ · softplus(r₁ + c) / softplus(c)        c = ln(e − 1)
//! δ     = ρ_max · tanh(r₂) · min(I, R)
//!
//! dS = Λ − β_eff·S·I/N − μS
//! dL = β_eff·S·I/N − (k + μ)L
//! dI = kL − (γ_eff + μ + d)I + δ
//! dR = γ_eff·I − μR − δ
//! ```
//!
//! The shift `c` makes softplus(c) = 1, so a network that outputs zero
//! reproduces the mechanistic rates exactly. Both rates stay strictly
//! positive for any output, and δ can never move more than `ρ_max` of the
//! smaller of `I` and `R` per year. δ enters `I` and `R` with opposite signs,
//! so dN/dt = Λ − μN − dI is untouched by the network.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig, Trajectory};
use crate::model::{infection_flow, EpiState, ModelParams};
use crate::neural::{backward_accumulate, forward_trace, init_params, MlpSpec, ParamVector, STATE_FEATURES};

/// ln(e − 1): the point where softplus equals one.
pub const SOFTPLUS_SHIFT: f64 = 0.541_324_854_612_918_1;

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Piecewise-linear exogenous covariates u(t), held constant outside the
/// sampled range.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateSeries {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl CovariateSeries {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Contract("covariate times and values must be non-empty and equal length".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Contract("covariate times must be strictly increasing".into()));
        }
        let dim = values[0].len();
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::Contract("covariate vectors must share one dimension".into()));
        }
        Ok(Self { times, values })
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1].clone();
        }
        let hi = self.times.partition_point(|&s| s <= t);
        let (t0, t1) = (self.times[hi - 1], self.times[hi]);
        let w = (t - t0) / (t1 - t0);
        self.values[hi - 1]
            .iter()
            .zip(&self.values[hi])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }
}

/// Deterministic multiplier m(t) applied to β₀, for analytically prescribed
/// transmission profiles.
#[derive(Clone)]
pub struct BetaSchedule(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl BetaSchedule {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn at(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

impl fmt::Debug for BetaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BetaSchedule(..)")
    }
}

/// A trained or untrained hybrid model.
///
/// `params.transmission` and `params.recovery` are the baselines β₀ and γ₀;
/// Λ, μ, d and k are fixed mechanistic constants.
#[derive(Debug, Clone)]
pub struct PgNodeModel {
    pub params: ModelParams,
    pub spec: MlpSpec,
    pub weights: ParamVector,
    /// ρ_max, yr⁻¹
    pub correction_cap: f64,
    /// T used to normalize time. Times past T are fed as t/T > 1.
    pub horizon: f64,
    pub covariates: Option<CovariateSeries>,
    pub beta_schedule: Option<BetaSchedule>,
}

pub const DEFAULT_CORRECTION_CAP: f64 = 0.1;

impl PgNodeModel {
    /// Default rate network (two hidden layers of 32) initialized from `seed`.
    pub fn new(params: ModelParams, horizon: f64, seed: u64) -> Self {
        let spec = MlpSpec::rate_network(0);
        let weights = init_params(&spec, seed);
        Self {
            params,
            spec,
            weights,
            correction_cap: DEFAULT_CORRECTION_CAP,
            horizon,
            covariates: None,
            beta_schedule: None,
        }
    }

    pub fn with_network(params: ModelParams, spec: MlpSpec, weights: ParamVector, horizon: f64) -> Result<Self> {
        let model = Self {
            params,
            spec,
            weights,
            correction_cap: DEFAULT_CORRECTION_CAP,
            horizon,
            covariates: None,
            beta_schedule: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.spec.validate()?;
        if self.weights.len() != self.spec.param_count() {
            return Err(Error::Contract("network weights do not match the network spec".into()));
        }
        let cov = self.covariates.as_ref().map_or(0, CovariateSeries::dim);
        if self.spec.input_dim != STATE_FEATURES + cov || self.spec.output_dim != 3 {
            return Err(Error::Contract(format!(
                "rate network must map {} features to 3 outputs, spec is {:?}",
                STATE_FEATURES + cov,
                self.spec.dims()
            )));
        }
        if !(self.correction_cap > 0.0 && self.horizon > 0.0) {
            return Err(Error::ParameterDomain("correction cap and horizon must be > 0".into()));
        }
        Ok(())
    }

    pub fn covariates_at(&self, t: f64) -> Vec<f64> {
        self.covariates.as_ref().map_or_else(Vec::new, |c| c.at(t))
    }

    fn beta_multiplier(&self, t: f64) -> f64 {
        self.beta_schedule.as_ref().map_or(1.0, |s| s.at(t))
    }

    /// Serializes the model as a plain-text key/value block followed by the
    /// network bytes (see [`crate::neural`] for the binary layout):
    ///
    /// ```text
    /// tbnode-model 1
    /// recruitment = 10000
    /// natural_mortality = 0.015
    /// tb_mortality = 0.15
    /// progression = 0.08
    /// beta0 = 5
    /// gamma0 = 1
    /// correction_cap = 0.1
    /// horizon = 30
    ///                              <- empty line
    /// <network bytes>
    /// ```
    ///
    /// Covariates and β schedules are runtime inputs and are not stored.
    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let mut out = format!(
            "{MODEL_MAGIC}\nrecruitment = {}\nnatural_mortality = {}\ntb_mortality = {}\nprogression = {}\n\
             beta0 = {}\ngamma0 = {}\ncorrection_cap = {}\nhorizon = {}\n\n",
            p.recruitment,
            p.natural_mortality,
            p.tb_mortality,
            p.progression,
            p.transmission,
            p.recovery,
            self.correction_cap,
            self.horizon
        )
        .into_bytes();
        out.extend(self.weights.to_bytes(&self.spec));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let split = bytes
            .windows(2)
            .position(|w| w == b"\n\n")
            .ok_or_else(|| Error::Format("missing blank line after model header".into()))?;
        let header = std::str::from_utf8(&bytes[..split]).map_err(|_| Error::Format("model header is not UTF-8".into()))?;
        let mut lines = header.lines();
        if lines.next() != Some(MODEL_MAGIC) {
            return Err(Error::Format(format!("expected first line {MODEL_MAGIC:?}")));
        }
        let mut fields = std::collections::BTreeMap::new();
        for line in lines {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("malformed header line {line:?}")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad number in header line {line:?}")))?;
            fields.insert(key.trim().to_string(), value);
        }
        let mut get = |key: &str| {
            fields.remove(key).ok_or_else(|| Error::Format(format!("model header lacks {key}")))
        };
        let params = ModelParams {
            recruitment: get("recruitment")?,
            natural_mortality: get("natural_mortality")?,
            tb_mortality: get("tb_mortality")?,
            progression: get("progression")?,
            transmission: get("beta0")?,
            recovery: get("gamma0")?,
        };
        let correction_cap = get("correction_cap")?;
        let horizon = get("horizon")?;
        if let Some(key) = fields.keys().next() {
            return Err(Error::Format(format!("unknown model header key {key}")));
        }
        let (spec, weights) = ParamVector::from_bytes(&bytes[split + 2..])?;
        let mut model = Self::with_network(params, spec, weights, horizon).map_err(|e| Error::Format(e.to_string()))?;
        model.correction_cap = correction_cap;
        model.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(model)
    }
}

const MODEL_MAGIC: &str = "tbnode-model 1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveRates {
    /// β_eff, yr⁻¹
    pub beta: f64,
    /// γ_eff, yr⁻¹
    pub gamma: f64,
    /// δ, persons·yr⁻¹ (positive moves people from R to I)
    pub correction_flow: f64,
}

/// Everything computed at one (t, x): reused by the field and its adjoint.
struct Evaluation {
    trace: crate::neural::Trace,
    n: f64,
    rates: EffectiveRates,
    dbeta_draw: f64,
    dgamma_draw: f64,
    ddelta_draw: f64,
    tanh_flow: f64,
}

fn evaluate(model: &PgNodeModel, t: f64, x: &[f64], u: &[f64]) -> Result<Evaluation> {
    let (s, l, i, r) = (x[0], x[1], x[2], x[3]);
    let n = s + l + i + r;
    if n == 0.0 {
        return Err(Error::DegeneratePopulation);
    }
    let mut features = Vec::with_capacity(STATE_FEATURES + u.len());
    features.extend_from_slice(&[t / model.horizon, s / n, l / n, i / n, r / n]);
    features.extend_from_slice(u);
    let trace = forward_trace(&model.spec, &model.weights, &features)?;
    let raw = trace.output();
    let unit = softplus(SOFTPLUS_SHIFT);
    let beta0 = model.params.transmission * model.beta_multiplier(t);
    let gamma0 = model.params.recovery;
    let tanh_flow = raw[2].tanh();
    let pool = i.min(r);
    let rates = EffectiveRates {
        beta: beta0 * (softplus(raw[0] + SOFTPLUS_SHIFT) / unit),
        gamma: gamma0 * (softplus(raw[1] + SOFTPLUS_SHIFT) / unit),
        correction_flow: model.correction_cap * tanh_flow * pool,
    };
    Ok(Evaluation {
        dbeta_draw: beta0 * sigmoid(raw[0] + SOFTPLUS_SHIFT) / unit,
        dgamma_draw: gamma0 * sigmoid(raw[1] + SOFTPLUS_SHIFT) / unit,
        ddelta_draw: model.correction_cap * (1.0 - tanh_flow * tanh_flow) * pool,
        trace,
        n,
        rates,
        tanh_flow,
    })
}

pub fn effective_rates(model: &PgNodeModel, t: f64, state: &EpiState, u: &[f64]) -> Result<EffectiveRates> {
    Ok(evaluate(model, t, &[state.s, state.l, state.i, state.r], u)?.rates)
}

/// Hybrid field on `[S, L, I, R]`, or `[S, L, I, R, N_aux]` where `N_aux`
/// integrates Λ − μ·N_aux − d·I alongside as a conservation check.
/// Covariates are taken from the model.
pub fn rhs_into(model: &PgNodeModel, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
    let u = model.covariates_at(t);
    let ev = evaluate(model, t, x, &u)?;
    write_field(model, x, &ev, dx);
    Ok(())
}

fn write_field(model: &PgNodeModel, x: &[f64], ev: &Evaluation, dx: &mut [f64]) {
    let p = &model.params;
    let (s, l, i, r) = (x[0], x[1], x[2], x[3]);
    let mu = p.natural_mortality;
    let EffectiveRates { beta, gamma, correction_flow } = ev.rates;
    let inf = infection_flow(beta, s, i, ev.n);
    dx[0] = p.recruitment - inf - mu * s;
    dx[1] = inf - (p.progression + mu) * l;
    dx[2] = p.progression * l - (gamma + mu + p.tb_mortality) * i + correction_flow;
    dx[3] = gamma * i - mu * r - correction_flow;
    if x.len() == 5 {
        dx[4] = p.recruitment - mu * x[4] - p.tb_mortality * i;
    }
}

pub fn pgnode_rhs(model: &PgNodeModel, t: f64, state: &EpiState, u: &[f64]) -> Result<EpiState> {
    let x = [state.s, state.l, state.i, state.r];
    let ev = evaluate(model, t, &x, u)?;
    let mut dx = [0.0; 4];
    write_field(model, &x, &ev, &mut dx);
    Ok(EpiState::slir(dx[0], dx[1], dx[2], dx[3]))
}

/// Adjoint contributions at (t, x) for costate `a`:
/// writes aᵀ·∂f/∂x into `a_fx` and adds aᵀ·∂f/∂θ into `a_ftheta`.
pub(crate) fn adjoint_terms(
    model: &PgNodeModel,
    t: f64,
    x: &[f64],
    a: &[f64],
    a_fx: &mut [f64],
    a_ftheta: &mut [f64],
) -> Result<()> {
    let u = model.covariates_at(t);
    let ev = evaluate(model, t, x, &u)?;
    let p = &model.params;
    let mu = p.natural_mortality;
    let (s, i, r) = (x[0], x[2], x[3]);
    let n = ev.n;
    let EffectiveRates { beta, gamma, .. } = ev.rates;

    // Coefficients of the infection flow, γ_eff·I and δ in aᵀf.
    let g_inf = a[1] - a[0];
    let g_gamma = a[3] - a[2];
    let g_delta = a[2] - a[3];

    let cotangent = [
        g_inf * (s * i / n) * ev.dbeta_draw,
        g_gamma * i * ev.dgamma_draw,
        g_delta * ev.ddelta_draw,
    ];
    let grad_features = backward_accumulate(&model.spec, &model.weights, &ev.trace, &cotangent, a_ftheta);

    let n2 = n * n;
    let dinf = [
        beta * i * (n - s) / n2,
        -beta * s * i / n2,
        beta * s * (n - i) / n2,
        -beta * s * i / n2,
    ];
    // δ = ρ·tanh(r₂)·min(I, R); ties are differentiated through I.
    let dpool = model.correction_cap * ev.tanh_flow;
    let (dpool_i, dpool_r) = if i <= r { (dpool, 0.0) } else { (0.0, dpool) };

    a_fx[0] = g_inf * dinf[0] - mu * a[0];
    a_fx[1] = g_inf * dinf[1] - (p.progression + mu) * a[1] + p.progression * a[2];
    a_fx[2] = g_inf * dinf[2] + g_gamma * gamma - (mu + p.tb_mortality) * a[2] + g_delta * dpool_i;
    a_fx[3] = g_inf * dinf[3] - mu * a[3] + g_delta * dpool_r;

    // Features X/N for X in (S, L, I, R): ∂(X/N)/∂Y = (1[X=Y]·N − X)/N².
    let fx = &grad_features[1..STATE_FEATURES];
    let weighted: f64 = fx.iter().zip(x).map(|(g, xi)| g * xi).sum::<f64>() / n2;
    for (out, g) in a_fx[..4].iter_mut().zip(fx) {
        *out += g / n - weighted;
    }

    if x.len() == 5 {
        a_fx[4] = -mu * a[4];
        a_fx[2] -= p.tb_mortality * a[4];
    }
    Ok(())
}

/// Integrates the hybrid model from `x0` (4 compartments).
pub fn simulate(model: &PgNodeModel, x0: &EpiState, t_span: (f64, f64), cfg: &IntegratorConfig) -> Result<Trajectory> {
    model.validate()?;
    let start = [x0.s, x0.l, x0.i, x0.r];
    integrate(|t, x, dx| rhs_into(model, t, x, dx), &start, t_span, cfg)
}
