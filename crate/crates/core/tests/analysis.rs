mod common;

use common::{draw_params, rel, rng};
use nalgebra::Matrix4;
use tbnode::analysis::*;
use tbnode::integrator::{integrate, IntegratorConfig};
use tbnode::model::{slir_rhs_into, ModelParams};

const DRAWS: usize = 1000;

#[test]
fn ngm_radius_matches_closed_form() {
    let mut rng = rng(1);
    let mut above = 0;
    for _ in 0..DRAWS {
        let p = draw_params(&mut rng);
        let r0 = basic_reproduction_number(&p).unwrap();
        let rho = ngm_spectral_radius(&p).unwrap();
        assert!(rel(r0, rho) < 1e-12, "{p:?}: {r0} vs {rho}");
        above += usize::from(r0 > 1.0);
    }
    assert!(above > 100 && above < DRAWS - 100, "draws should straddle the threshold: {above}");
}

#[test]
fn endemic_equilibrium_iff_above_threshold() {
    let mut rng = rng(2);
    for _ in 0..DRAWS {
        let p = draw_params(&mut rng);
        let r0 = basic_reproduction_number(&p).unwrap();
        let ee = endemic_equilibrium(&p).unwrap();
        assert_eq!(ee.is_some(), r0 > 1.0, "{p:?}");
        assert_eq!(endemic_force_by_bisection(&p).is_some(), r0 > 1.0);
        if let Some(ee) = ee {
            let root = endemic_force_by_bisection(&p).unwrap();
            assert!(rel(ee.force_of_infection, root) < 1e-9);
            let n = ee.state.total();
            assert!(equilibrium_residual(&p, &ee.state).unwrap() < 1e-8 * n);
            assert!(ee.state.is_non_negative());
        }
    }
}

fn eigen_real_parts(p: &ModelParams) -> Vec<f64> {
    let j = jacobian_at_dfe(p);
    let m = Matrix4::from_fn(|r, c| j[r][c]);
    m.complex_eigenvalues().iter().map(|z| z.re).collect()
}

#[test]
fn dfe_stability_iff_below_threshold() {
    let mut rng = rng(3);
    for _ in 0..DRAWS {
        let p = draw_params(&mut rng);
        let r0 = basic_reproduction_number(&p).unwrap();
        let report = stability_report(&p).unwrap();
        let ours = jacobian_eigenvalues_at_dfe(&p);
        let stable = ours.iter().all(|(re, _)| *re < 0.0);
        assert_eq!(stable, r0 < 1.0);
        assert_eq!(report.dfe_locally_stable, r0 < 1.0);
        assert!(report.trace_m < 0.0);
        assert_eq!(report.det_m > 0.0, r0 < 1.0);

        let mut general = eigen_real_parts(&p);
        let mut structured: Vec<f64> = ours.iter().map(|(re, _)| *re).collect();
        general.sort_by(f64::total_cmp);
        structured.sort_by(f64::total_cmp);
        for (a, b) in general.iter().zip(&structured) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{general:?} vs {structured:?}");
        }
    }
}

#[test]
fn det_m_changes_sign_at_threshold_crossing() {
    let base = ModelParams::default();
    let beta_star = base.transmission / basic_reproduction_number(&base).unwrap();
    let mut last: Option<(f64, f64)> = None;
    for k in 0..=400 {
        let beta = beta_star * (0.5 + k as f64 / 400.0);
        let p = ModelParams { transmission: beta, ..base };
        let r0 = basic_reproduction_number(&p).unwrap();
        let det = stability_report(&p).unwrap().det_m;
        if let Some((prev_r0, prev_det)) = last {
            let flipped = (prev_det > 0.0) != (det > 0.0);
            let crossed = (prev_r0 < 1.0) != (r0 < 1.0);
            assert_eq!(flipped, crossed, "beta {beta}");
        }
        assert_eq!(det > 0.0, r0 < 1.0);
        last = Some((r0, det));
    }
}

#[test]
fn sensitivity_indices_match_finite_differences() {
    let base = ModelParams::default();
    let idx = sensitivity_indices(&base);
    let expected = [1.000, 0.158, -0.858, -0.129, -0.171];
    for ((_, v), e) in idx.entries().iter().zip(expected) {
        assert!((v - e).abs() < 1e-3, "{v} vs {e}");
    }
    let r0 = |p: &ModelParams| basic_reproduction_number(p).unwrap();
    let bumps: [(&str, fn(&mut ModelParams) -> &mut f64); 5] = [
        ("beta", |p| &mut p.transmission),
        ("k", |p| &mut p.progression),
        ("gamma", |p| &mut p.recovery),
        ("d", |p| &mut p.tb_mortality),
        ("mu", |p| &mut p.natural_mortality),
    ];
    for ((name, value), (bump_name, field)) in idx.entries().iter().zip(bumps) {
        assert_eq!(*name, bump_name);
        let theta = *field(&mut base.clone());
        let h = 1e-6 * theta;
        let mut up = base;
        *field(&mut up) = theta + h;
        let mut down = base;
        *field(&mut down) = theta - h;
        let fd = (r0(&up) - r0(&down)) / (2.0 * h) * theta / r0(&base);
        assert!((fd - value).abs() < 1e-6, "{name}: {fd} vs {value}");
    }
}

#[test]
fn long_run_settles_on_the_endemic_equilibrium() {
    let p = ModelParams::default();
    let ee = endemic_equilibrium(&p).unwrap().unwrap();
    let x0 = tbnode::model::EpiState::reference_initial();
    let traj = integrate(
        |_, x, dx| slir_rhs_into(x, &p, p.transmission, dx),
        &x0.to_vec(),
        (0.0, 500.0),
        &IntegratorConfig::default(),
    )
    .unwrap();
    let end = traj.last_state();
    for (a, b) in end.iter().zip(ee.state.to_vec()) {
        assert!(rel(*a, b) < 1e-3, "{end:?} vs {:?}", ee.state);
    }
    assert!((ee.force_of_infection - 0.04398).abs() < 1e-5);
    assert!((ee.state.i - 5390.0).abs() < 1.0);
}
