//! Composite loss, adjoint-sensitivity gradients, Adam, and the training
//! loop for [`PgNodeModel`].
//!
//! The forward state is augmented with an auxiliary total `N_aux` that
//! integrates Λ − μ·N_aux − d·I next to the compartments. With `N₀` the
//! initial population and `x̂ = x/N₀`:
//!
//! ```text
//! data = Σ_k ‖mask_k ⊙ (x̂(t_k) − x̂_obs(t_k))‖²
//! phys = Σ_k ((S + L + I + R − N_aux)(t_k) / N₀)²
//! reg  = ‖θ‖²
//! loss = data + λ₁·phys + λ₂·reg
//! ```
//!
//! Gradients use the continuous adjoint. The forward solution is kept as a
//! dense interpolant; the costate `a` is integrated backward with
//! da/dt = −aᵀ∂f/∂x, jumping by ∂loss_k/∂x at each observation, while
//! aᵀ∂f/∂θ is accumulated alongside. The backward pass stops at every
//! forward step boundary so it only ever sees one smooth interpolant piece.

use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::integrator::{integrate, integrate_endpoint, IntegratorConfig, Method, Trajectory};
use crate::model::EpiState;
use crate::pgnode::{adjoint_terms, rhs_into, PgNodeModel};

/// Which of S, L, I, R a row observes.
pub type Mask = [bool; 4];
pub const FULL_MASK: Mask = [true; 4];
pub const I_ONLY_MASK: Mask = [false, false, true, false];

/// Observed compartments at increasing times, anchored at a known initial
/// state.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    start_time: f64,
    initial: EpiState,
    times: Vec<f64>,
    values: Vec<[Option<f64>; 4]>,
}

impl Observations {
    pub fn new(start_time: f64, initial: EpiState, times: Vec<f64>, values: Vec<[Option<f64>; 4]>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Contract("observation times and values differ in length".into()));
        }
        if initial.t.is_some() || !initial.is_non_negative() || initial.total() <= 0.0 {
            return Err(Error::Contract("initial state must be a non-negative SLIR state with N > 0".into()));
        }
        if let Some(row) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Contract(format!("observation times not increasing at row {}", row + 1)));
        }
        if times.first().is_some_and(|&t| t < start_time) {
            return Err(Error::Contract("observations precede the start time".into()));
        }
        for (row, v) in values.iter().enumerate() {
            if v.iter().flatten().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::Contract(format!("observation row {row} has a negative or non-finite value")));
            }
        }
        Ok(Self { start_time, initial, times, values })
    }

    /// Samples a trajectory (4 or 5 compartments; `T` is ignored) at `times`
    /// and keeps the masked compartments.
    pub fn from_trajectory(traj: &Trajectory, times: &[f64], mask: Mask) -> Result<Self> {
        let start = traj.span().0;
        let initial = EpiState::from_slice(&traj.state(0)[..4])?;
        let values = traj
            .sample_at(times)?
            .into_iter()
            .map(|x| std::array::from_fn(|c| mask[c].then_some(x[c])))
            .collect();
        Self::new(start, initial, times.to_vec(), values)
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn initial(&self) -> &EpiState {
        &self.initial
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[[Option<f64>; 4]] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn end_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(self.start_time)
    }

    fn scale(&self) -> f64 {
        self.initial.total()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamSettings {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamSettings {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// λ₁, weight of the conservation penalty.
    pub lambda_phys: f64,
    /// λ₂, weight of ‖θ‖².
    pub lambda_reg: f64,
    pub epochs: usize,
    /// Stop once ‖∇loss‖₂ falls below this.
    pub grad_tolerance: f64,
    pub seed: u64,
    pub adam: AdamSettings,
    pub integrator: IntegratorConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            lambda_phys: 1.0,
            lambda_reg: 1e-4,
            epochs: 200,
            grad_tolerance: 1e-6,
            seed: 0,
            adam: AdamSettings::default(),
            integrator: IntegratorConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.lambda_phys >= 0.0 && self.lambda_reg >= 0.0) {
            return Err(Error::ParameterDomain(
                "learning rate must be > 0 and loss weights >= 0".into(),
            ));
        }
        if self.epochs == 0 {
            return Err(Error::ParameterDomain("epochs must be >= 1".into()));
        }
        self.integrator.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub data: f64,
    pub phys: f64,
    pub reg: f64,
}

fn augmented_initial(obs: &Observations) -> [f64; 5] {
    let x = obs.initial();
    [x.s, x.l, x.i, x.r, x.total()]
}

fn forward(model: &PgNodeModel, obs: &Observations, cfg: &TrainConfig) -> Result<Trajectory> {
    integrate(
        |t, x, dx| rhs_into(model, t, x, dx),
        &augmented_initial(obs),
        (obs.start_time(), obs.end_time()),
        &cfg.integrator,
    )
}

/// Per-observation loss terms and their gradient with respect to the
/// augmented state.
fn observation_terms(obs: &Observations, k: usize, x: &[f64], lambda_phys: f64) -> (f64, f64, [f64; 5]) {
    let scale = obs.scale();
    let inv2 = 1.0 / (scale * scale);
    let mut data = 0.0;
    let mut grad = [0.0; 5];
    for (c, value) in obs.values()[k].iter().enumerate() {
        if let Some(v) = value {
            let diff = x[c] - v;
            data += diff * diff * inv2;
            grad[c] += 2.0 * diff * inv2;
        }
    }
    let drift = x[0] + x[1] + x[2] + x[3] - x[4];
    let phys = drift * drift * inv2;
    for g in &mut grad[..4] {
        *g += 2.0 * lambda_phys * drift * inv2;
    }
    grad[4] -= 2.0 * lambda_phys * drift * inv2;
    (data, phys, grad)
}

fn breakdown(data: f64, phys: f64, model: &PgNodeModel, cfg: &TrainConfig) -> LossBreakdown {
    let reg = model.weights.norm_squared();
    LossBreakdown {
        total: data + cfg.lambda_phys * phys + cfg.lambda_reg * reg,
        data,
        phys,
        reg,
    }
}

/// Composite loss of `model` against `obs`.
pub fn loss(model: &PgNodeModel, obs: &Observations, cfg: &TrainConfig) -> Result<LossBreakdown> {
    let traj = forward(model, obs, cfg)?;
    let (mut data, mut phys) = (0.0, 0.0);
    let mut x = [0.0; 5];
    for (k, &t) in obs.times().iter().enumerate() {
        traj.eval_into(t, &mut x)?;
        let (d, p, _) = observation_terms(obs, k, &x, cfg.lambda_phys);
        data += d;
        phys += p;
    }
    Ok(breakdown(data, phys, model, cfg))
}

/// Loss and its gradient with respect to the network parameters.
pub fn loss_and_gradient(model: &PgNodeModel, obs: &Observations, cfg: &TrainConfig) -> Result<(LossBreakdown, Vec<f64>)> {
    let traj = forward(model, obs, cfg)?;
    let n_params = model.weights.len();

    let mut jumps = Vec::with_capacity(obs.len());
    let (mut data, mut phys) = (0.0, 0.0);
    let mut x = [0.0; 5];
    for (k, &t) in obs.times().iter().enumerate() {
        traj.eval_into(t, &mut x)?;
        let (d, p, g) = observation_terms(obs, k, &x, cfg.lambda_phys);
        data += d;
        phys += p;
        jumps.push(g);
    }
    let losses = breakdown(data, phys, model, cfg);

    let mut grad = vec![0.0; n_params];
    let adjoint_scale = jumps.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    if adjoint_scale > 0.0 {
        backward_pass(model, obs, cfg, &traj, &jumps, adjoint_scale, &mut grad)?;
    }
    for (g, w) in grad.iter_mut().zip(model.weights.as_slice()) {
        *g += 2.0 * cfg.lambda_reg * w;
    }
    Ok((losses, grad))
}

/// Parameter gradient only.
pub fn adjoint_gradient(model: &PgNodeModel, obs: &Observations, cfg: &TrainConfig) -> Result<Vec<f64>> {
    Ok(loss_and_gradient(model, obs, cfg)?.1)
}

fn backward_pass(
    model: &PgNodeModel,
    obs: &Observations,
    cfg: &TrainConfig,
    traj: &Trajectory,
    jumps: &[[f64; 5]],
    adjoint_scale: f64,
    grad: &mut [f64],
) -> Result<()> {
    let n_params = grad.len();
    let mut breakpoints: Vec<f64> = traj.times().iter().chain(obs.times()).copied().collect();
    breakpoints.sort_by(|a, b| b.total_cmp(a));
    breakpoints.dedup();

    // z = (a, ∫aᵀ∂f/∂θ), integrated in reversed time s = −t.
    let mut z = vec![0.0; 5 + n_params];
    let mut next_obs = obs.len();
    let mut x = [0.0; 5];
    let mut a_fx = [0.0; 5];

    for (idx, &t_hi) in breakpoints.iter().enumerate() {
        while next_obs > 0 && obs.times()[next_obs - 1] == t_hi {
            next_obs -= 1;
            for (zc, j) in z[..5].iter_mut().zip(&jumps[next_obs]) {
                *zc += j;
            }
        }
        let Some(&t_lo) = breakpoints.get(idx + 1) else { break };
        let seg = t_hi - t_lo;
        let seg_cfg = IntegratorConfig {
            method: Method::Dp45,
            rtol: cfg.integrator.rtol,
            atol: cfg.integrator.rtol * adjoint_scale,
            h_init: seg,
            h_max: seg,
            max_steps: cfg.integrator.max_steps,
        };
        z = integrate_endpoint(
            |s, zs, dz| {
                let t = (-s).clamp(t_lo, t_hi);
                traj.eval_into(t, &mut x)?;
                let (a, _) = zs.split_at(5);
                let (da, dg) = dz.split_at_mut(5);
                dg.fill(0.0);
                adjoint_terms(model, t, &x, a, &mut a_fx, dg)?;
                da.copy_from_slice(&a_fx);
                Ok(())
            },
            &z,
            (-t_hi, -t_lo),
            &seg_cfg,
        )
        .map_err(|e| match e {
            Error::NumericalBlowup { t } | Error::StepBudget { t, .. } => Error::AdjointInstability { t: -t },
            other => other,
        })?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::AdjointInstability { t: t_lo });
        }
    }
    grad.copy_from_slice(&z[5..]);
    Ok(())
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl AdamMoments {
    pub fn zeros(n: usize) -> Self {
        Self { first: vec![0.0; n], second: vec![0.0; n] }
    }
}

/// One bias-corrected Adam update. `step` counts from 1.
pub fn adam_step(params: &mut [f64], grad: &[f64], moments: &mut AdamMoments, learning_rate: f64, adam: &AdamSettings, step: u32) -> Result<()> {
    if params.len() != grad.len() || moments.first.len() != grad.len() || moments.second.len() != grad.len() {
        return Err(Error::Contract("Adam shapes do not match".into()));
    }
    if step == 0 {
        return Err(Error::Contract("Adam step index starts at 1".into()));
    }
    let bias1 = 1.0 - adam.beta1.powi(step as i32);
    let bias2 = 1.0 - adam.beta2.powi(step as i32);
    for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut moments.first).zip(&mut moments.second) {
        *m = adam.beta1 * *m + (1.0 - adam.beta1) * g;
        *v = adam.beta2 * *v + (1.0 - adam.beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *p -= learning_rate * m_hat / (v_hat.sqrt() + adam.eps);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    Converged,
    EpochBudget,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Loss at the start of each epoch.
    pub loss_history: Vec<f64>,
    pub grad_norm_history: Vec<f64>,
    pub final_params: crate::neural::ParamVector,
    pub stop_reason: StopReason,
    pub wall_time: Duration,
}

/// Training stopped by an error; `partial` holds the epochs completed.
#[derive(Debug, Clone, thiserror::Error)]
#[error("training failed in epoch {epoch}: {source}")]
pub struct TrainFailure {
    pub epoch: usize,
    pub source: Error,
    pub partial: Box<TrainReport>,
}

/// Integrate → loss → adjoint gradient → Adam, until the gradient norm drops
/// below `grad_tolerance` or the epoch budget runs out.
pub fn train(model: &PgNodeModel, obs: &Observations, cfg: &TrainConfig) -> Result<TrainReport, TrainFailure> {
    let started = Instant::now();
    let mut current = model.clone();
    let mut report = TrainReport {
        loss_history: Vec::new(),
        grad_norm_history: Vec::new(),
        final_params: model.weights.clone(),
        stop_reason: StopReason::EpochBudget,
        wall_time: Duration::ZERO,
    };
    let fail = |epoch: usize, source: Error, report: &TrainReport| TrainFailure {
        epoch,
        source,
        partial: Box::new(TrainReport { wall_time: started.elapsed(), ..report.clone() }),
    };
    if let Err(e) = cfg.validate().and_then(|_| model.validate()) {
        return Err(fail(0, e, &report));
    }
    let mut moments = AdamMoments::zeros(current.weights.len());
    for epoch in 1..=cfg.epochs {
        let (losses, grad) = match loss_and_gradient(&current, obs, cfg) {
            Ok(v) => v,
            Err(e) => return Err(fail(epoch, e, &report)),
        };
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        report.loss_history.push(losses.total);
        report.grad_norm_history.push(norm);
        let step = u32::try_from(epoch).unwrap_or(u32::MAX);
        if let Err(e) = adam_step(current.weights.as_mut_slice(), &grad, &mut moments, cfg.learning_rate, &cfg.adam, step) {
            return Err(fail(epoch, e, &report));
        }
        report.final_params = current.weights.clone();
        if norm < cfg.grad_tolerance {
            report.stop_reason = StopReason::Converged;
            break;
        }
    }
    report.wall_time = started.elapsed();
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult {
    pub index: usize,
    pub adjoint: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub probes: Vec<ProbeResult>,
}

/// Relative finite-difference step per coordinate.
pub const GRADCHECK_STEP: f64 = 1e-5;

/// Compares the adjoint gradient with central differences of [`loss`] on
/// `n_probes` coordinates chosen with `cfg.seed`.
///
/// Each coordinate is perturbed by ±1e-5·max(|θⱼ|, 1). The relative error is
/// |adjoint − fd| / max(|adjoint|, |fd|, floor) with floor = 1e-6·‖∇‖∞, so
/// coordinates whose gradient is negligible next to the largest component
/// are not judged on noise.
pub fn gradient_check(model: &PgNodeModel, obs: &Observations, cfg: &TrainConfig, n_probes: usize) -> Result<GradientCheck> {
    let gradient = adjoint_gradient(model, obs, cfg)?;
    let indices = probe_indices(gradient.len(), n_probes, cfg.seed);
    let floor = 1e-6 * gradient.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    let mut probes = Vec::with_capacity(indices.len());
    for index in indices {
        let fd = central_difference(model, obs, cfg, index, GRADCHECK_STEP)?;
        let adjoint = gradient[index];
        let denom = adjoint.abs().max(fd.abs()).max(floor);
        let relative_error = if denom == 0.0 { 0.0 } else { (adjoint - fd).abs() / denom };
        probes.push(ProbeResult { index, adjoint, finite_difference: fd, relative_error });
    }
    let max_relative_error = probes.iter().fold(0.0_f64, |m, p| m.max(p.relative_error));
    Ok(GradientCheck { max_relative_error, probes })
}

fn probe_indices(n: usize, n_probes: usize, seed: u64) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = n_probes.min(n);
    for i in 0..picks {
        let j = i + (rng.next_u64() % (n - i) as u64) as usize;
        indices.swap(i, j);
    }
    indices.truncate(picks);
    indices.sort_unstable();
    indices
}

fn central_difference(model: &PgNodeModel, obs: &Observations, cfg: &TrainConfig, index: usize, step: f64) -> Result<f64> {
    let theta = model.weights.as_slice()[index];
    let h = step * theta.abs().max(1.0);
    let mut shifted = model.clone();
    shifted.weights.as_mut_slice()[index] = theta + h;
    let up = loss(&shifted, obs, cfg)?.total;
    shifted.weights.as_mut_slice()[index] = theta - h;
    let down = loss(&shifted, obs, cfg)?.total;
    Ok((up - down) / (2.0 * h))
}

/// Solver tolerance of the finite-difference reference in [`tolerance_sweep`].
pub const SWEEP_REFERENCE_RTOL: f64 = 1e-12;
/// Relative finite-difference step of that reference.
pub const SWEEP_REFERENCE_STEP: f64 = 1e-2;

/// Adjoint gradient error as a function of solver tolerance.
///
/// Richardson-extrapolated central differences at [`SWEEP_REFERENCE_RTOL`]
/// serve as the reference on the same probe coordinates [`gradient_check`]
/// would pick. For each entry
/// of `rtols` the adjoint gradient is recomputed with that `rtol` (and `atol`
/// scaled by the same factor) and the result is ‖adjoint − reference‖₂ /
/// ‖reference‖₂ over the probes.
pub fn tolerance_sweep(model: &PgNodeModel, obs: &Observations, cfg: &TrainConfig, n_probes: usize, rtols: &[f64]) -> Result<Vec<f64>> {
    let with_rtol = |rtol: f64| TrainConfig {
        integrator: IntegratorConfig {
            rtol,
            atol: cfg.integrator.atol * rtol / cfg.integrator.rtol,
            ..cfg.integrator
        },
        ..*cfg
    };
    let tight = with_rtol(SWEEP_REFERENCE_RTOL);
    let indices = probe_indices(model.weights.len(), n_probes, cfg.seed);
    let reference = indices
        .iter()
        .map(|&j| {
            let coarse = central_difference(model, obs, &tight, j, SWEEP_REFERENCE_STEP)?;
            let fine = central_difference(model, obs, &tight, j, 0.5 * SWEEP_REFERENCE_STEP)?;
            Ok((4.0 * fine - coarse) / 3.0)
        })
        .collect::<Result<Vec<f64>>>()?;
    let norm = reference.iter().map(|r| r * r).sum::<f64>().sqrt();
    rtols
        .iter()
        .map(|&rtol| {
            let g = adjoint_gradient(model, obs, &with_rtol(rtol))?;
            let diff = indices.iter().zip(&reference).map(|(&j, r)| (g[j] - r).powi(2)).sum::<f64>().sqrt();
            Ok(if norm == 0.0 { diff } else { diff / norm })
        })
        .collect()
}


#[cfg(test)]
mod adjoint_tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::neural::MlpSpec;

    fn perturbed_model(seed: u64) -> PgNodeModel {
        let spec = MlpSpec::rate_network(0);
        let mut weights = crate::neural::init_params(&spec, seed);
        let n = weights.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for w in &mut weights.as_mut_slice()[n - 3 * 32 - 3..] {
            *w = ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 0.2;
        }
        PgNodeModel::with_network(ModelParams::default(), spec, weights, 5.0).unwrap()
    }

    #[test]
    fn adjoint_matches_finite_differences() {
        let model = perturbed_model(11);
        let truth_params = ModelParams { transmission: 6.0, ..Default::default() };
        let truth = PgNodeModel::new(truth_params, 5.0, 0);
        let x0 = EpiState::reference_initial();
        let cfg = TrainConfig::default();
        let traj = crate::pgnode::simulate(&truth, &x0, (0.0, 5.0), &cfg.integrator).unwrap();
        let times: Vec<f64> = (1..=20).map(|k| 0.25 * k as f64).collect();
        let obs = Observations::from_trajectory(&traj, &times, I_ONLY_MASK).unwrap();
        let check = gradient_check(&model, &obs, &cfg, 20).unwrap();
        assert!(check.max_relative_error < 1e-3, "{}", check.max_relative_error);
    }
}
