//! Parameter and state records plus the mechanistic SLIR and SLIRT vector
//! fields.
//!
//! The SLIR system in persons and years:
//!
//! ```text
//! dS/dt = Λ − β·S·I/N − μ·S
//! dL/dt = β·S·I/N − (k + μ)·L
//! dI/dt = k·L − (γ + μ + d)·I
//! dR/dt = γ·I − μ·R
//! ```
//!
//! SLIRT inserts a treatment compartment between `I` and `R`: infectious
//! people start treatment at rate `τ`, treated people relapse back to `I` at
//! rate `δ` and complete treatment (moving to `R`) at rate `ω`.

use crate::error::{Error, Result};

/// SLIR rate constants. Units are persons·yr⁻¹ for `recruitment` and yr⁻¹
/// for everything else.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Λ
    pub recruitment: f64,
    /// μ
    pub natural_mortality: f64,
    /// d
    pub tb_mortality: f64,
    /// β
    pub transmission: f64,
    /// k
    pub progression: f64,
    /// γ
    pub recovery: f64,
}

/// Literature ranges used to flag unusual user-supplied values.
pub const TYPICAL_RANGES: [(&str, f64, f64); 6] = [
    ("recruitment", 1e3, 1e6),
    ("natural_mortality", 0.010, 0.020),
    ("tb_mortality", 0.050, 0.300),
    ("transmission", 1.0, 20.0),
    ("progression", 0.001, 0.100),
    ("recovery", 0.50, 1.50),
];

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            recruitment: 10_000.0,
            natural_mortality: 0.015,
            tb_mortality: 0.150,
            transmission: 5.0,
            progression: 0.08,
            recovery: 1.0,
        }
    }
}

impl ModelParams {
    fn fields(&self) -> [f64; 6] {
        [
            self.recruitment,
            self.natural_mortality,
            self.tb_mortality,
            self.transmission,
            self.progression,
            self.recovery,
        ]
    }

    /// Checks that every rate is finite and strictly positive.
    pub fn validate(&self) -> Result<()> {
        for ((name, _, _), value) in TYPICAL_RANGES.iter().zip(self.fields()) {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::ParameterDomain(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Human-readable warnings for fields outside their literature range.
    /// These are advisory; out-of-range values are still accepted.
    pub fn range_warnings(&self) -> Vec<String> {
        TYPICAL_RANGES
            .iter()
            .zip(self.fields())
            .filter(|((_, lo, hi), v)| v < lo || v > hi)
            .map(|((name, lo, hi), v)| format!("{name} = {v} outside typical range [{lo}, {hi}]"))
            .collect()
    }

    /// Total removal rate out of `I`: γ + μ + d.
    pub fn infectious_exit_rate(&self) -> f64 {
        self.recovery + self.natural_mortality + self.tb_mortality
    }

    /// Total exit rate out of `L`: k + μ.
    pub fn latent_exit_rate(&self) -> f64 {
        self.progression + self.natural_mortality
    }
}

/// Parameters that only exist in the SLIRT model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlirtExtension {
    /// τ, yr⁻¹
    pub treatment_initiation: f64,
    /// δ, yr⁻¹ (T → I)
    pub relapse: f64,
    /// ω, yr⁻¹ (T → R); 2.0 corresponds to a six-month regimen.
    pub treatment_completion: f64,
}

impl Default for SlirtExtension {
    fn default() -> Self {
        Self {
            treatment_initiation: 0.80,
            relapse: 0.03,
            treatment_completion: 2.0,
        }
    }
}

impl SlirtExtension {
    pub fn validate(&self) -> Result<()> {
        let ok = self.treatment_initiation > 0.0
            && self.relapse >= 0.0
            && self.treatment_completion > 0.0
            && self.treatment_initiation.is_finite()
            && self.relapse.is_finite()
            && self.treatment_completion.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::ParameterDomain(format!(
                "SLIRT extension requires τ > 0, δ ≥ 0, ω > 0; got {self:?}"
            )))
        }
    }
}

/// Compartment populations in persons. `t` is the treatment compartment and
/// is only present for SLIRT states.
///
/// The same record is used for time derivatives (persons·yr⁻¹).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpiState {
    pub s: f64,
    pub l: f64,
    pub i: f64,
    pub r: f64,
    pub t: Option<f64>,
}

impl EpiState {
    pub fn slir(s: f64, l: f64, i: f64, r: f64) -> Self {
        Self { s, l, i, r, t: None }
    }

    pub fn slirt(s: f64, l: f64, i: f64, r: f64, t: f64) -> Self {
        Self { s, l, i, r, t: Some(t) }
    }

    /// Initial condition used throughout the scenarios: one million people,
    /// 18k of them with active TB.
    pub fn reference_initial() -> Self {
        Self::slir(800_000.0, 180_000.0, 18_000.0, 2_000.0)
    }

    /// S + L + I + R (+ T).
    pub fn total(&self) -> f64 {
        self.s + self.l + self.i + self.r + self.t.unwrap_or(0.0)
    }

    pub fn dim(&self) -> usize {
        if self.t.is_some() {
            5
        } else {
            4
        }
    }

    /// Compartments in `[S, L, I, R, T?]` order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.s, self.l, self.i, self.r];
        v.extend(self.t);
        v
    }

    /// Reads `[S, L, I, R]` or `[S, L, I, R, T]`.
    pub fn from_slice(x: &[f64]) -> Result<Self> {
        match *x {
            [s, l, i, r] => Ok(Self::slir(s, l, i, r)),
            [s, l, i, r, t] => Ok(Self::slirt(s, l, i, r, t)),
            _ => Err(Error::Contract(format!(
                "state vector must have 4 or 5 entries, got {}",
                x.len()
            ))),
        }
    }

    pub fn is_non_negative(&self) -> bool {
        self.to_vec().iter().all(|&v| v >= 0.0)
    }

    pub fn min_compartment(&self) -> f64 {
        self.to_vec().into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Infection flow β·S·I/N with N recomputed from the compartments.
#[inline]
pub(crate) fn infection_flow(beta: f64, s: f64, i: f64, n: f64) -> f64 {
    beta * s * i / n
}

/// SLIR vector field on a raw `[S, L, I, R]` slice. Writes the derivative
/// into `dx`.
pub fn slir_rhs_into(x: &[f64], params: &ModelParams, beta: f64, dx: &mut [f64]) -> Result<()> {
    let (s, l, i, r) = (x[0], x[1], x[2], x[3]);
    let n = s + l + i + r;
    if n == 0.0 {
        return Err(Error::DegeneratePopulation);
    }
    let mu = params.natural_mortality;
    let inf = infection_flow(beta, s, i, n);
    dx[0] = params.recruitment - inf - mu * s;
    dx[1] = inf - (params.progression + mu) * l;
    dx[2] = params.progression * l - (params.recovery + mu + params.tb_mortality) * i;
    dx[3] = params.recovery * i - mu * r;
    Ok(())
}

/// SLIR right-hand side with `beta_effective` substituted for β.
pub fn slir_rhs(state: &EpiState, params: &ModelParams, beta_effective: f64) -> Result<EpiState> {
    let x = [state.s, state.l, state.i, state.r];
    let mut dx = [0.0; 4];
    slir_rhs_into(&x, params, beta_effective, &mut dx)?;
    Ok(EpiState::slir(dx[0], dx[1], dx[2], dx[3]))
}

/// SLIRT vector field on a raw `[S, L, I, R, T]` slice.
pub fn slirt_rhs_into(
    x: &[f64],
    params: &ModelParams,
    ext: &SlirtExtension,
    dx: &mut [f64],
) -> Result<()> {
    let (s, l, i, r, t) = (x[0], x[1], x[2], x[3], x[4]);
    let n = s + l + i + r + t;
    if n == 0.0 {
        return Err(Error::DegeneratePopulation);
    }
    let mu = params.natural_mortality;
    let inf = infection_flow(params.transmission, s, i, n);
    dx[0] = params.recruitment - inf - mu * s;
    dx[1] = inf - (params.progression + mu) * l;
    dx[2] = params.progression * l - (ext.treatment_initiation + mu + params.tb_mortality) * i
        + ext.relapse * t;
    dx[3] = ext.treatment_completion * t - mu * r;
    dx[4] = ext.treatment_initiation * i - (ext.relapse + ext.treatment_completion + mu) * t;
    Ok(())
}

pub fn slirt_rhs(state: &EpiState, params: &ModelParams, ext: &SlirtExtension) -> Result<EpiState> {
    let t = state
        .t
        .ok_or_else(|| Error::Contract("SLIRT right-hand side needs a T compartment".into()))?;
    let x = [state.s, state.l, state.i, state.r, t];
    let mut dx = [0.0; 5];
    slirt_rhs_into(&x, params, ext, &mut dx)?;
    EpiState::from_slice(&dx)
}

/// Upper bound Λ/μ of the total population inside the feasible region.
pub fn feasible_region_cap(params: &ModelParams) -> f64 {
    params.recruitment / params.natural_mortality
}

/// Net population change Λ − μN − dI implied by any state.
pub fn population_balance(state: &EpiState, params: &ModelParams) -> f64 {
    params.recruitment - params.natural_mortality * state.total() - params.tb_mortality * state.i
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn baseline() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn dfe_is_fixed_point() {
        let p = baseline();
        let dfe = EpiState::slir(feasible_region_cap(&p), 0.0, 0.0, 0.0);
        let d = slir_rhs(&dfe, &p, p.transmission).unwrap();
        assert_eq!(d, EpiState::slir(0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn no_infectious_means_no_infection() {
        let p = baseline();
        let x = EpiState::slir(500_000.0, 1_000.0, 0.0, 300.0);
        let d = slir_rhs(&x, &p, p.transmission).unwrap();
        assert_eq!(d.l, -(p.progression + p.natural_mortality) * x.l);
        assert_eq!(d.s, p.recruitment - p.natural_mortality * x.s);
    }

    #[test]
    fn reference_state_matches_hand_substitution() {
        // Term-by-term substitution with N = 1,000,000:
        //   βSI/N = 5 · 800000 · 18000 / 1e6 = 72000
        //   dS = 10000 − 72000 − 0.015·800000 = −74000
        //   dL = 72000 − 0.095·180000          = 54900
        //   dI = 0.08·180000 − 1.165·18000     = −6570
        //   dR = 1.0·18000 − 0.015·2000         = 17970
        let p = baseline();
        let d = slir_rhs(&EpiState::reference_initial(), &p, p.transmission).unwrap();
        let expected = [-74_000.0, 54_900.0, -6_570.0, 17_970.0];
        for (got, want) in d.to_vec().iter().zip(expected) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
    }

    #[test]
    fn zero_population_is_rejected() {
        let p = baseline();
        let zero = EpiState::slir(0.0, 0.0, 0.0, 0.0);
        assert_eq!(slir_rhs(&zero, &p, 5.0), Err(Error::DegeneratePopulation));
        let zero_t = EpiState::slirt(0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(
            slirt_rhs(&zero_t, &p, &SlirtExtension::default()),
            Err(Error::DegeneratePopulation)
        );
    }

    #[test]
    fn slirt_without_treatment_or_infection() {
        let p = baseline();
        let ext = SlirtExtension::default();
        let x = EpiState::slirt(600_000.0, 50_000.0, 0.0, 10_000.0, 0.0);
        let d = slirt_rhs(&x, &p, &ext).unwrap();
        assert_eq!(d.t, Some(0.0));
        assert_eq!(d.i, p.progression * x.l);
    }

    #[test]
    fn slirt_needs_treatment_compartment() {
        let p = baseline();
        assert!(matches!(
            slirt_rhs(&EpiState::reference_initial(), &p, &SlirtExtension::default()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn feasible_cap_values() {
        assert!((feasible_region_cap(&baseline()) - 666_666.67).abs() < 0.01);
        let mut p = baseline();
        p.recruitment = 0.0;
        assert_eq!(feasible_region_cap(&p), 0.0);
        p.recruitment = 0.015;
        assert_eq!(feasible_region_cap(&p), 1.0);
    }

    #[test]
    fn validation_and_range_warnings() {
        assert!(baseline().validate().is_ok());
        assert!(baseline().range_warnings().is_empty());
        let mut p = baseline();
        p.transmission = 40.0;
        assert_eq!(p.range_warnings().len(), 1);
        p.recovery = 0.0;
        assert!(p.validate().is_err());
        let ext = SlirtExtension { relapse: -0.1, ..Default::default() };
        assert!(ext.validate().is_err());
    }

    fn state_strategy(with_t: bool) -> impl Strategy<Value = EpiState> {
        (0.0..1e6f64, 0.0..1e6f64, 0.0..1e5f64, 0.0..1e6f64, 0.0..1e5f64).prop_map(
            move |(s, l, i, r, t)| {
                let mut x = EpiState::slirt(s + 1.0, l, i, r, t);
                if !with_t {
                    x.t = None;
                }
                x
            },
        )
    }

    /// Largest magnitude term entering the balance, used to scale roundoff.
    fn flow_scale(x: &EpiState, p: &ModelParams) -> f64 {
        let inf = p.transmission * x.s * x.i / x.total();
        [p.recruitment, p.natural_mortality * x.total(), p.tb_mortality * x.i, inf, x.i, x.l * p.progression]
            .into_iter()
            .fold(1.0, f64::max)
    }

    proptest! {
        #[test]
        fn slir_population_balance(x in state_strategy(false)) {
            let p = baseline();
            let d = slir_rhs(&x, &p, p.transmission).unwrap();
            let sum = d.s + d.l + d.i + d.r;
            let err = (sum - population_balance(&x, &p)).abs();
            prop_assert!(err <= 1e-14 * flow_scale(&x, &p) * 4.0, "err {}", err);
        }

        #[test]
        fn slirt_population_balance(x in state_strategy(true)) {
            let p = baseline();
            let d = slirt_rhs(&x, &p, &SlirtExtension::default()).unwrap();
            let sum: f64 = d.to_vec().iter().sum();
            let err = (sum - population_balance(&x, &p)).abs();
            prop_assert!(err <= 1e-14 * flow_scale(&x, &p) * 4.0 * 2.0, "err {}", err);
        }

        #[test]
        fn infection_term_is_scale_homogeneous(x in state_strategy(false), c in 0.01..100.0f64) {
            let p = baseline();
            let scaled = EpiState::slir(c * x.s, c * x.l, c * x.i, c * x.r);
            let base = slir_rhs(&x, &p, p.transmission).unwrap();
            let big = slir_rhs(&scaled, &p, p.transmission).unwrap();
            // Remove the constant recruitment before comparing.
            let lhs = [big.s - p.recruitment, big.l, big.i, big.r];
            let rhs = [c * (base.s - p.recruitment), c * base.l, c * base.i, c * base.r];
            for (a, b) in lhs.iter().zip(rhs) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{} vs {}", a, b);
            }
        }
    }
}
