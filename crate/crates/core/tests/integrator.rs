use tbnode::integrator::{integrate, integrate_endpoint, IntegratorConfig, Method};
use tbnode::model::{slir_rhs_into, EpiState, ModelParams};

fn slir(cfg: &IntegratorConfig) -> tbnode::integrator::Trajectory {
    let p = ModelParams::default();
    integrate(
        |_, x, dx| slir_rhs_into(x, &p, p.transmission, dx),
        &EpiState::reference_initial().to_vec(),
        (0.0, 30.0),
        cfg,
    )
    .unwrap()
}

#[test]
fn dp45_agrees_with_fine_rk4_on_slir() {
    let fine = slir(&IntegratorConfig::rk4(1e-3));
    let adaptive = slir(&IntegratorConfig::default());
    for k in 0..=60 {
        let t = 0.5 * k as f64;
        let a = fine.eval(t).unwrap();
        let b = adaptive.eval(t).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0) + 1e-6, "t={t}: {a:?} vs {b:?}");
        }
    }
}

#[test]
fn harmonic_oscillator_energy_drift_is_small() {
    let cfg = IntegratorConfig { rtol: 1e-10, atol: 1e-12, h_max: 1.0, ..Default::default() };
    let end = integrate_endpoint(
        |_, x, dx| {
            dx[0] = x[1];
            dx[1] = -x[0];
            Ok(())
        },
        &[1.0, 0.0],
        (0.0, 100.0 * std::f64::consts::TAU),
        &cfg,
    )
    .unwrap();
    let energy = 0.5 * (end[0] * end[0] + end[1] * end[1]);
    assert!((energy - 0.5).abs() < 1e-7, "{energy}");
    assert!((end[0] - 1.0).abs() < 1e-6 && end[1].abs() < 1e-6, "{end:?}");
}

#[test]
fn rk4_converges_at_fourth_order() {
    let exact = (1.0_f64).sin() + 2.0 * (-1.0_f64).exp();
    let err = |h: f64| {
        let y = integrate_endpoint(
            |t, x, dx| {
                dx[0] = -x[0] + t.sin() + t.cos();
                Ok(())
            },
            &[2.0],
            (0.0, 1.0),
            &IntegratorConfig::rk4(h),
        )
        .unwrap();
        (y[0] - exact).abs()
    };
    let hs = [0.1, 0.05, 0.025, 0.0125];
    let errs: Vec<f64> = hs.iter().map(|&h| err(h)).collect();
    let slope = (errs[0] / errs[3]).ln() / (hs[0] / hs[3]).ln();
    assert!(slope >= 3.8, "observed order {slope}, errors {errs:?}");
}

#[test]
fn dp45_is_bitwise_deterministic() {
    let a = slir(&IntegratorConfig::default());
    let b = slir(&IntegratorConfig::default());
    assert_eq!(a.times(), b.times());
    for (x, y) in a.states().zip(b.states()) {
        assert_eq!(x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), y.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
    assert_eq!(IntegratorConfig::default().method, Method::Dp45);
}
