//! Closed-form analysis of the SLIR system: basic reproduction number,
//! equilibria, local stability of the disease-free state and normalized
//! sensitivity indices of R₀.

use crate::error::{Error, Result};
use crate::model::{slir_rhs, EpiState, ModelParams};

pub type Matrix2 = [[f64; 2]; 2];
pub type Matrix4 = [[f64; 4]; 4];

/// Relative agreement required between the closed-form endemic force of
/// infection and the bisection root.
pub const EE_CONSISTENCY_RTOL: f64 = 1e-9;

/// R₀ = β·k / ((k + μ)(γ + μ + d)).
pub fn basic_reproduction_number(params: &ModelParams) -> Result<f64> {
    let latent = params.latent_exit_rate();
    let infectious = params.infectious_exit_rate();
    if !(latent > 0.0 && infectious > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "R0 needs k + μ > 0 and γ + μ + d > 0, got {latent} and {infectious}"
        )));
    }
    Ok(params.transmission * params.progression / (latent * infectious))
}

/// (Λ/μ, 0, 0, 0)
pub fn disease_free_equilibrium(params: &ModelParams) -> EpiState {
    EpiState::slir(params.recruitment / params.natural_mortality, 0.0, 0.0, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndemicEquilibrium {
    /// λ* = β·I*/N*, yr⁻¹
    pub force_of_infection: f64,
    pub state: EpiState,
}

/// Equilibrium compartments as functions of a given force of infection.
pub fn equilibrium_state_for(params: &ModelParams, lambda: f64) -> EpiState {
    let mu = params.natural_mortality;
    let s = params.recruitment / (lambda + mu);
    let l = lambda * s / params.latent_exit_rate();
    let i = params.progression * l / params.infectious_exit_rate();
    let r = params.recovery * i / mu;
    EpiState::slir(s, l, i, r)
}

/// Closed-form positive root of λ = β·I*(λ)/N*(λ).
///
/// Writing N*/S* = D(λ) = 1 + λ/(k+μ) + λk/((k+μ)(γ+μ+d)) + λkγ/((k+μ)(γ+μ+d)μ),
/// the fixed-point condition reduces to D(λ) = R₀, which is linear in λ.
fn endemic_force_closed_form(params: &ModelParams, r0: f64) -> f64 {
    let mu = params.natural_mortality;
    let k = params.progression;
    let gamma = params.recovery;
    let a = params.latent_exit_rate();
    let b = params.infectious_exit_rate();
    (r0 - 1.0) * a * b * mu / (b * mu + k * mu + gamma * k)
}

/// λ* found by bisection on h(λ) = 1 − β·I*(λ)/(λ·N*(λ)) over [0, β].
///
/// h is increasing with h(0) = 1 − R₀, so a sign change exists exactly when
/// R₀ > 1. Returns `None` otherwise.
pub fn endemic_force_by_bisection(params: &ModelParams) -> Option<f64> {
    let a = params.latent_exit_rate();
    let b = params.infectious_exit_rate();
    let k = params.progression;
    let gamma = params.recovery;
    let mu = params.natural_mortality;
    // I/(λN) with S cancelled out; well defined at λ = 0.
    let h = |lambda: f64| {
        let i_over_s = lambda * k / (a * b);
        let n_over_s = 1.0 + lambda / a + i_over_s + gamma * i_over_s / mu;
        1.0 - params.transmission * (k / (a * b)) / n_over_s
    };
    let (mut lo, mut hi) = (0.0_f64, params.transmission);
    if !(h(lo) < 0.0 && h(hi) > 0.0) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Endemic equilibrium, present exactly when R₀ > 1.
///
/// The closed form is cross-checked against [`endemic_force_by_bisection`];
/// disagreement beyond [`EE_CONSISTENCY_RTOL`] is reported as an error.
pub fn endemic_equilibrium(params: &ModelParams) -> Result<Option<EndemicEquilibrium>> {
    let r0 = basic_reproduction_number(params)?;
    if r0 <= 1.0 {
        return Ok(None);
    }
    let lambda = endemic_force_closed_form(params, r0);
    let root = endemic_force_by_bisection(params).ok_or_else(|| {
        Error::InternalConsistency(format!("R0 = {r0} > 1 but bisection found no endemic root"))
    })?;
    if (lambda - root).abs() > EE_CONSISTENCY_RTOL * lambda.abs().max(root.abs()) {
        return Err(Error::InternalConsistency(format!(
            "closed-form λ* = {lambda} disagrees with bisection root {root}"
        )));
    }
    Ok(Some(EndemicEquilibrium {
        force_of_infection: lambda,
        state: equilibrium_state_for(params, lambda),
    }))
}

/// New-infection matrix F and transition matrix V for the infected
/// subsystem (L, I) at the disease-free equilibrium.
pub fn ngm_matrices(params: &ModelParams) -> (Matrix2, Matrix2) {
    let f = [[0.0, params.transmission], [0.0, 0.0]];
    let v = [
        [params.latent_exit_rate(), 0.0],
        [-params.progression, params.infectious_exit_rate()],
    ];
    (f, v)
}

fn mat2_mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    let mut c = [[0.0; 2]; 2];
    for (i, row) in c.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn mat2_inverse(m: &Matrix2) -> Result<Matrix2> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return Err(Error::ParameterDomain("singular transition matrix V".into()));
    }
    Ok([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

/// Eigenvalues of a 2×2 matrix as (re, im) pairs.
pub fn eigenvalues_2x2(m: &Matrix2) -> [(f64, f64); 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let half = 0.5 * tr;
    let disc = half * half - det;
    if disc >= 0.0 {
        let root = disc.sqrt();
        // Avoid cancellation in the smaller-magnitude root.
        let big = if half >= 0.0 { half + root } else { half - root };
        let small = if big != 0.0 { det / big } else { 0.0 };
        [(big, 0.0), (small, 0.0)]
    } else {
        let im = (-disc).sqrt();
        [(half, im), (half, -im)]
    }
}

/// ρ(F·V⁻¹).
pub fn ngm_spectral_radius(params: &ModelParams) -> Result<f64> {
    let (f, v) = ngm_matrices(params);
    let k = mat2_mul(&f, &mat2_inverse(&v)?);
    Ok(eigenvalues_2x2(&k)
        .iter()
        .map(|(re, im)| re.hypot(*im))
        .fold(0.0, f64::max))
}

/// M = F − V, the linearization of the infected subsystem at the DFE.
pub fn infected_block(params: &ModelParams) -> Matrix2 {
    let (f, v) = ngm_matrices(params);
    [
        [f[0][0] - v[0][0], f[0][1] - v[0][1]],
        [f[1][0] - v[1][0], f[1][1] - v[1][1]],
    ]
}

/// Analytic Jacobian of the SLIR field at the DFE, in (S, L, I, R) order.
pub fn jacobian_at_dfe(params: &ModelParams) -> Matrix4 {
    let mu = params.natural_mortality;
    let beta = params.transmission;
    let k = params.progression;
    // S/N = 1 at the DFE, so ∂(βSI/N)/∂I = β and the other partials vanish.
    [
        [-mu, 0.0, -beta, 0.0],
        [0.0, -params.latent_exit_rate(), beta, 0.0],
        [0.0, k, -params.infectious_exit_rate(), 0.0],
        [0.0, 0.0, params.recovery, -mu],
    ]
}

/// Eigenvalues of [`jacobian_at_dfe`] from its block structure: −μ twice
/// (the S and R rows) plus the two eigenvalues of M.
pub fn jacobian_eigenvalues_at_dfe(params: &ModelParams) -> [(f64, f64); 4] {
    let mu = params.natural_mortality;
    let [a, b] = eigenvalues_2x2(&infected_block(params));
    [(-mu, 0.0), (-mu, 0.0), a, b]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub r0: f64,
    pub dfe: EpiState,
    pub endemic: Option<EndemicEquilibrium>,
    pub trace_m: f64,
    pub det_m: f64,
    pub dfe_locally_stable: bool,
}

pub fn stability_report(params: &ModelParams) -> Result<StabilityReport> {
    let r0 = basic_reproduction_number(params)?;
    let m = infected_block(params);
    let trace_m = m[0][0] + m[1][1];
    let det_m = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    Ok(StabilityReport {
        r0,
        dfe: disease_free_equilibrium(params),
        endemic: endemic_equilibrium(params)?,
        trace_m,
        det_m,
        dfe_locally_stable: trace_m < 0.0 && det_m > 0.0,
    })
}

/// Normalized sensitivity indices Υθ = (∂R₀/∂θ)·(θ/R₀).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityIndices {
    pub upsilon_beta: f64,
    pub upsilon_k: f64,
    pub upsilon_gamma: f64,
    pub upsilon_d: f64,
    pub upsilon_mu: f64,
}

impl SensitivityIndices {
    /// (name, value) pairs in β, k, γ, d, μ order.
    pub fn entries(&self) -> [(&'static str, f64); 5] {
        [
            ("beta", self.upsilon_beta),
            ("k", self.upsilon_k),
            ("gamma", self.upsilon_gamma),
            ("d", self.upsilon_d),
            ("mu", self.upsilon_mu),
        ]
    }
}

pub fn sensitivity_indices(params: &ModelParams) -> SensitivityIndices {
    let mu = params.natural_mortality;
    let a = params.latent_exit_rate();
    let b = params.infectious_exit_rate();
    SensitivityIndices {
        upsilon_beta: 1.0,
        upsilon_k: mu / a,
        upsilon_gamma: -params.recovery / b,
        upsilon_d: -params.tb_mortality / b,
        upsilon_mu: -mu / a - mu / b,
    }
}

/// Residual of the SLIR field at `state`, max-norm.
pub fn equilibrium_residual(params: &ModelParams, state: &EpiState) -> Result<f64> {
    let d = slir_rhs(state, params, params.transmission)?;
    Ok(d.to_vec().into_iter().map(f64::abs).fold(0.0, f64::max))
}
