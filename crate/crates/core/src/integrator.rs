//! Explicit Runge–Kutta integration: fixed-step classical RK4 and adaptive
//! Dormand–Prince 5(4).
//!
//! Both methods record every accepted step together with a quartic
//! polynomial in the normalized step coordinate θ ∈ [0, 1], so that the
//! solution can be evaluated anywhere inside the integration span:
//!
//! ```text
//! x(t_n + θ·h) = x_n + c₁θ + c₂θ² + c₃θ³ + c₄θ⁴
//! ```
//!
//! For DP45 the coefficients come from the method's fourth-order continuous
//! extension; for RK4 they encode a cubic Hermite interpolant built from the
//! endpoint states and derivatives (`c₄ = 0`).
//!
//! Stepping is fully deterministic: no randomization, no wall-clock input.

use crate::error::{Error, Result};
use crate::model::EpiState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Classical fourth-order Runge–Kutta with fixed step `h_init`.
    Rk4,
    /// Dormand–Prince 5(4) with local error control.
    Dp45,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub rtol: f64,
    /// Absolute tolerance, in the units of the state (persons for the
    /// epidemic models).
    pub atol: f64,
    pub h_init: f64,
    /// Upper bound on the step. The 0.1 yr default resolves an annual
    /// seasonal forcing with at least ten steps per period.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Dp45,
            rtol: 1e-8,
            atol: 1e-6,
            h_init: 1e-3,
            h_max: 0.1,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    /// Fixed-step RK4 with step `h`.
    pub fn rk4(h: f64) -> Self {
        Self { method: Method::Rk4, h_init: h, h_max: h.max(Self::default().h_max), ..Self::default() }
    }

    pub fn with_tolerances(self, rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.rtol) && positive(self.atol)) {
            return Err(Error::Contract(format!(
                "rtol and atol must be > 0, got {} and {}",
                self.rtol, self.atol
            )));
        }
        if !(positive(self.h_init) && positive(self.h_max) && self.h_init <= self.h_max) {
            return Err(Error::Contract(format!(
                "need 0 < h_init <= h_max, got h_init = {} and h_max = {}",
                self.h_init, self.h_max
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Contract("max_steps must be > 0".into()));
        }
        Ok(())
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// The last row holds the fifth-order weights (FSAL), so the seventh stage is
// evaluated at the new solution.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Continuous extension: x(t + θh) = x + h Σ_s k_s Σ_j P[s][j] θ^(j+1).
const P: [[f64; 4]; 7] = [
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0],
    [0.0; 4],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0, 701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0],
];

const SAFETY: f64 = 0.9;
const MAX_GROWTH: f64 = 5.0;
const MIN_SHRINK: f64 = 0.1;

/// A recorded solution: accepted step times, states, and per-step dense
/// output coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    // 4·dim coefficients per step, laid out [c1 | c2 | c3 | c4].
    coeffs: Vec<f64>,
}

impl Trajectory {
    fn start(t0: f64, x0: &[f64]) -> Self {
        Self { dim: x0.len(), times: vec![t0], states: x0.to_vec(), coeffs: Vec::new() }
    }

    fn push(&mut self, t: f64, x: &[f64], coeffs: &[f64]) {
        self.times.push(t);
        self.states.extend_from_slice(x);
        self.coeffs.extend_from_slice(coeffs);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored points (accepted steps + 1).
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, index: usize) -> &[f64] {
        &self.states[index * self.dim..(index + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().expect("trajectory is never empty"))
    }

    /// Stored states as epidemic records (4 or 5 compartments).
    pub fn epi_states(&self) -> Result<Vec<EpiState>> {
        self.states().map(EpiState::from_slice).collect()
    }

    /// Dense evaluation at `t`, written into `out`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let (start, end) = self.span();
        if !(t >= start && t <= end) {
            return Err(Error::OutOfRange { t, start, end });
        }
        // Index of the last stored time <= t.
        let idx = self.times.partition_point(|&s| s <= t) - 1;
        if self.times[idx] == t || idx + 1 == self.len() {
            out.copy_from_slice(self.state(idx));
            return Ok(());
        }
        let h = self.times[idx + 1] - self.times[idx];
        let theta = (t - self.times[idx]) / h;
        let d = self.dim;
        let c = &self.coeffs[idx * 4 * d..(idx + 1) * 4 * d];
        let y0 = self.state(idx);
        for j in 0..d {
            // Horner in θ.
            let poly = ((c[3 * d + j] * theta + c[2 * d + j]) * theta + c[d + j]) * theta + c[j];
            out[j] = y0[j] + poly * theta;
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    /// Dense evaluation at each of `times`.
    pub fn sample_at(&self, times: &[f64]) -> Result<Vec<Vec<f64>>> {
        times.iter().map(|&t| self.eval(t)).collect()
    }

    /// [`Trajectory::sample_at`] converted to epidemic records.
    pub fn sample_states(&self, times: &[f64]) -> Result<Vec<EpiState>> {
        times.iter().map(|&t| EpiState::from_slice(&self.eval(t)?)).collect()
    }
}

/// Uniform output grid `start, start + step, …` ending exactly at `end`.
pub fn uniform_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    if end <= start {
        return vec![start];
    }
    let n = ((end - start) / step - 1e-9).ceil().max(1.0) as usize;
    (0..=n)
        .map(|i| if i == n { end } else { start + i as f64 * step })
        .collect()
}

fn check_finite(t: f64, dx: &[f64]) -> Result<()> {
    if dx.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalBlowup { t })
    }
}

/// Drives the chosen method from `t0` to `t1`, handing each accepted step to
/// `on_step(t_new, x_new, coeffs)`. Coefficients are only computed when
/// `dense` is set (otherwise an empty slice is passed).
fn drive<F, O>(
    rhs: &mut F,
    x0: &[f64],
    (t0, t1): (f64, f64),
    cfg: &IntegratorConfig,
    dense: bool,
    mut on_step: O,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    O: FnMut(f64, &[f64], &[f64]),
{
    cfg.validate()?;
    if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
        return Err(Error::Contract(format!("time span must be increasing, got ({t0}, {t1})")));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("initial state must be finite".into()));
    }
    if t1 == t0 {
        return Ok(x0.to_vec());
    }
    match cfg.method {
        Method::Rk4 => drive_rk4(rhs, x0, (t0, t1), cfg, dense, &mut on_step),
        Method::Dp45 => drive_dp45(rhs, x0, (t0, t1), cfg, dense, &mut on_step),
    }
}

fn drive_rk4<F, O>(
    rhs: &mut F,
    x0: &[f64],
    (t0, t1): (f64, f64),
    cfg: &IntegratorConfig,
    dense: bool,
    on_step: &mut O,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    O: FnMut(f64, &[f64], &[f64]),
{
    let d = x0.len();
    let n = ((t1 - t0) / cfg.h_init - 1e-9).ceil().max(1.0) as usize;
    if n > cfg.max_steps {
        return Err(Error::StepBudget { max_steps: cfg.max_steps, t: t0 });
    }
    let h = (t1 - t0) / n as f64;
    let mut y = x0.to_vec();
    let mut k1 = vec![0.0; d];
    let (mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut tmp = vec![0.0; d];
    let mut y_new = vec![0.0; d];
    let mut f_new = vec![0.0; d];
    let mut coeffs = vec![0.0; if dense { 4 * d } else { 0 }];
    rhs(t0, &y, &mut k1)?;
    check_finite(t0, &k1)?;
    for step in 0..n {
        let t = t0 + step as f64 * h;
        let t_next = if step + 1 == n { t1 } else { t0 + (step + 1) as f64 * h };
        for j in 0..d {
            tmp[j] = y[j] + 0.5 * h * k1[j];
        }
        rhs(t + 0.5 * h, &tmp, &mut k2)?;
        check_finite(t, &k2)?;
        for j in 0..d {
            tmp[j] = y[j] + 0.5 * h * k2[j];
        }
        rhs(t + 0.5 * h, &tmp, &mut k3)?;
        check_finite(t, &k3)?;
        for j in 0..d {
            tmp[j] = y[j] + h * k3[j];
        }
        rhs(t + h, &tmp, &mut k4)?;
        check_finite(t, &k4)?;
        for j in 0..d {
            y_new[j] = y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        rhs(t_next, &y_new, &mut f_new)?;
        check_finite(t_next, &f_new)?;
        if dense {
            // Cubic Hermite in monomial form.
            for j in 0..d {
                let (y0, y1, hf0, hf1) = (y[j], y_new[j], h * k1[j], h * f_new[j]);
                coeffs[j] = hf0;
                coeffs[d + j] = -3.0 * y0 - 2.0 * hf0 + 3.0 * y1 - hf1;
                coeffs[2 * d + j] = 2.0 * y0 + hf0 - 2.0 * y1 + hf1;
                coeffs[3 * d + j] = 0.0;
            }
        }
        on_step(t_next, &y_new, &coeffs);
        std::mem::swap(&mut y, &mut y_new);
        std::mem::swap(&mut k1, &mut f_new);
    }
    Ok(y)
}

fn drive_dp45<F, O>(
    rhs: &mut F,
    x0: &[f64],
    (t0, t1): (f64, f64),
    cfg: &IntegratorConfig,
    dense: bool,
    on_step: &mut O,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    O: FnMut(f64, &[f64], &[f64]),
{
    let d = x0.len();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; d]; 7];
    let mut y = x0.to_vec();
    let mut y_new = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    let mut coeffs = vec![0.0; if dense { 4 * d } else { 0 }];
    let mut t = t0;
    let mut h = cfg.h_init.min(cfg.h_max);
    let mut attempts = 0usize;

    rhs(t, &y, &mut k[0])?;
    check_finite(t, &k[0])?;

    while t < t1 {
        attempts += 1;
        if attempts > cfg.max_steps {
            return Err(Error::StepBudget { max_steps: cfg.max_steps, t });
        }
        // Land exactly on t1 and avoid leaving a sliver step behind.
        let last = t + 1.01 * h >= t1;
        if last {
            h = t1 - t;
        }
        for s in 1..7 {
            for j in 0..d {
                let mut acc = 0.0;
                for (m, a) in A[s][..s].iter().enumerate() {
                    acc += a * k[m][j];
                }
                tmp[j] = y[j] + h * acc;
            }
            let ts = if s == 6 { t + h } else { t + C[s] * h };
            rhs(ts, &tmp, &mut k[s])?;
            check_finite(ts, &k[s])?;
            if s == 6 {
                y_new.copy_from_slice(&tmp);
            }
        }
        let mut err_norm = 0.0_f64;
        for j in 0..d {
            let mut e = 0.0;
            for (s, w) in E.iter().enumerate() {
                e += w * k[s][j];
            }
            let scale = cfg.atol + cfg.rtol * y[j].abs().max(y_new[j].abs());
            err_norm = err_norm.max((h * e).abs() / scale);
        }
        if !err_norm.is_finite() {
            return Err(Error::NumericalBlowup { t });
        }
        let proposal = if err_norm == 0.0 { MAX_GROWTH } else { SAFETY * err_norm.powf(-0.2) };
        if err_norm <= 1.0 {
            let t_new = if last { t1 } else { t + h };
            if dense {
                for j in 0..d {
                    for p in 0..4 {
                        let mut acc = 0.0;
                        for (s, ks) in k.iter().enumerate() {
                            acc += ks[j] * P[s][p];
                        }
                        coeffs[p * d + j] = h * acc;
                    }
                }
            }
            on_step(t_new, &y_new, &coeffs);
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            h = (h * proposal.clamp(MIN_SHRINK, MAX_GROWTH)).min(cfg.h_max);
        } else {
            // Rejected: shrink by at least half.
            h *= proposal.clamp(MIN_SHRINK, 0.5);
        }
    }
    Ok(y)
}

/// Integrates `rhs` over `t_span` and records the dense solution.
///
/// `rhs(t, x, dx)` must write dx/dt into `dx` and be free of side effects.
pub fn integrate<F>(
    mut rhs: F,
    x0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let mut traj = Trajectory::start(t_span.0, x0);
    drive(&mut rhs, x0, t_span, cfg, true, |t, x, c| traj.push(t, x, c))?;
    Ok(traj)
}

/// Like [`integrate`] but returns only the final state.
pub fn integrate_endpoint<F>(
    mut rhs: F,
    x0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    drive(&mut rhs, x0, t_span, cfg, false, |_, _, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        dx[0] = -x[0];
        Ok(())
    }

    #[test]
    fn exponential_decay_dp45() {
        let traj = integrate(decay, &[1.0], (0.0, 1.0), &IntegratorConfig::default()).unwrap();
        let end = traj.last_state()[0];
        assert!(((end - (-1.0f64).exp()) / (-1.0f64).exp()).abs() < 1e-8);
        assert_eq!(*traj.times().last().unwrap(), 1.0);
    }

    #[test]
    fn exponential_decay_rk4() {
        let traj = integrate(decay, &[1.0], (0.0, 1.0), &IntegratorConfig::rk4(1e-2)).unwrap();
        assert_eq!(traj.len(), 101);
        assert!((traj.last_state()[0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn zero_length_span() {
        let traj = integrate(decay, &[2.5], (3.0, 3.0), &IntegratorConfig::default()).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.eval(3.0).unwrap(), vec![2.5]);
    }

    #[test]
    fn sampling_at_step_times_is_exact() {
        let traj = integrate(decay, &[1.0], (0.0, 2.0), &IntegratorConfig::default()).unwrap();
        for (i, &t) in traj.times().iter().enumerate() {
            assert_eq!(traj.eval(t).unwrap()[0], traj.state(i)[0]);
        }
    }

    #[test]
    fn linear_solution_interpolates_exactly() {
        let ramp = |_t: f64, _x: &[f64], dx: &mut [f64]| -> Result<()> {
            dx[0] = 3.0;
            Ok(())
        };
        for cfg in [IntegratorConfig::default(), IntegratorConfig::rk4(0.25)] {
            let traj = integrate(ramp, &[1.0], (0.0, 1.0), &cfg).unwrap();
            let (a, b) = (traj.times()[0], traj.times()[1]);
            let mid = traj.eval(0.5 * (a + b)).unwrap()[0];
            let mean = 0.5 * (traj.state(0)[0] + traj.state(1)[0]);
            assert!((mid - mean).abs() < 1e-14, "{mid} vs {mean}");
        }
    }

    #[test]
    fn dense_output_tracks_decay() {
        let cfg = IntegratorConfig { h_max: 0.5, ..Default::default() };
        let traj = integrate(decay, &[1.0], (0.0, 5.0), &cfg).unwrap();
        let local_tol = cfg.rtol + cfg.atol;
        for i in 0..=500 {
            let t = i as f64 * 0.01;
            let err = (traj.eval(t).unwrap()[0] - (-t).exp()).abs();
            assert!(err < 10.0 * local_tol, "t = {t}: {err}");
        }
    }

    #[test]
    fn out_of_span_is_an_error() {
        let traj = integrate(decay, &[1.0], (0.0, 1.0), &IntegratorConfig::default()).unwrap();
        assert!(matches!(traj.eval(1.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(traj.eval(-0.1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn step_budget_and_blowup() {
        let cfg = IntegratorConfig { max_steps: 3, ..Default::default() };
        assert!(matches!(
            integrate(decay, &[1.0], (0.0, 10.0), &cfg),
            Err(Error::StepBudget { .. })
        ));
        let nan = |_t: f64, _x: &[f64], dx: &mut [f64]| -> Result<()> {
            dx[0] = f64::NAN;
            Ok(())
        };
        assert!(matches!(
            integrate(nan, &[1.0], (0.0, 1.0), &IntegratorConfig::default()),
            Err(Error::NumericalBlowup { .. })
        ));
    }

    #[test]
    fn rejects_bad_config_and_span() {
        let bad = IntegratorConfig { h_init: 1.0, h_max: 0.1, ..Default::default() };
        assert!(integrate(decay, &[1.0], (0.0, 1.0), &bad).is_err());
        assert!(integrate(decay, &[1.0], (1.0, 0.0), &IntegratorConfig::default()).is_err());
    }

    #[test]
    fn uniform_grid_ends_exactly() {
        let g = uniform_grid(0.0, 30.0, 0.05);
        assert_eq!(g.len(), 601);
        assert_eq!(*g.last().unwrap(), 30.0);
        assert_eq!(uniform_grid(2.0, 2.0, 0.1), vec![2.0]);
    }
}
