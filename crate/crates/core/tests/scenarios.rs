use tbnode::analysis::basic_reproduction_number;
use tbnode::integrator::IntegratorConfig;
use tbnode::scenarios::*;
use tbnode::training::TrainConfig;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn scenario1_reference_values() {
    let cfg = ScenarioConfig::default();
    let r = run_scenario1(&cfg, &IntegratorConfig::default()).unwrap();
    assert!(rel(r.metrics["classical_I_end"], 12_800.0) < 0.05);
    assert!((r.metrics["beta_seasonal_mean_end"] - 3.1).abs() < 0.05);
    assert!((r.metrics["r0_end"] - 2.24).abs() < 0.01);
    assert!(r.metrics["pgnode_I_end"] < r.metrics["classical_I_end"]);
    assert_eq!(r.series("beta_pgnode").unwrap().values[0], 5.0);
    for t in &r.trajectories {
        assert_eq!(t.states.len(), r.times.len());
    }
}

#[test]
fn scenario1_without_season_or_intervention_is_classical() {
    let cfg = ScenarioConfig { seasonal_amplitude: 0.0, final_beta_multiplier: 1.0, ..Default::default() };
    let r = run_scenario1(&cfg, &IntegratorConfig::default()).unwrap();
    let a = r.trajectory("classical").unwrap();
    let b = r.trajectory("pgnode").unwrap();
    for (x, y) in a.states.iter().zip(&b.states) {
        for (u, v) in x.to_vec().iter().zip(y.to_vec()) {
            assert!((u - v).abs() <= 1e-8 * u.abs());
        }
    }
}

#[test]
fn scenario1_intervention_leaves_pre_onset_untouched() {
    let unseasonal = ScenarioConfig { seasonal_amplitude: 0.0, ..Default::default() };
    let r = run_scenario1(&unseasonal, &IntegratorConfig::default()).unwrap();
    let a = r.trajectory("classical").unwrap();
    let b = r.trajectory("pgnode").unwrap();
    for ((t, x), y) in r.times.iter().zip(&a.states).zip(&b.states) {
        if *t <= 8.0 {
            assert!((x.i - y.i).abs() <= 1e-8 * x.i, "t={t}");
        }
    }
}

#[test]
fn scenario3_reference_values() {
    let cfg = ScenarioConfig::default();
    let r = run_scenario3(&cfg, &IntegratorConfig::default()).unwrap();
    let m = &r.metrics;
    for (key, expected) in [("start_S", 93_200.0), ("start_L", 177_600.0), ("start_I", 12_800.0), ("start_R", 518_100.0)] {
        assert!(rel(m[key], expected) < 0.05, "{key} {}", m[key]);
    }
    for (key, expected) in [("r0_A", 3.61), ("r0_B", 2.53), ("r0_C", 2.17), ("r0_D", 1.49)] {
        assert!((m[key] - expected).abs() < 0.01, "{key} {}", m[key]);
    }
    assert!(m["averted_B"] > m["averted_D"] && m["averted_D"] > m["averted_C"]);
    assert!(rel(m["averted_C"], 17_500.0) < 0.2);
    assert!(r.series("averted_A").unwrap().values.iter().all(|&v| v == 0.0));
    let c = &r.series("averted_C").unwrap().values;
    assert!(c.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn scenario3_r0_agrees_with_analysis() {
    let cfg = ScenarioConfig::default();
    let r = run_scenario3(&cfg, &IntegratorConfig::default()).unwrap();
    for s in Strategy::ALL {
        let p = strategy_rates(&cfg.params, s, 1e9, cfg.strategy_ramp);
        let direct = basic_reproduction_number(&p).unwrap();
        assert!(rel(r.metrics[&format!("r0_{}", s.label())], direct) < 1e-12);
    }
}

#[test]
fn scenario3_alternative_incidence_definitions_run() {
    for incidence in [Incidence::Progression, Incidence::Infections] {
        let cfg = ScenarioConfig { incidence, ..Default::default() };
        let r = run_scenario3(&cfg, &IntegratorConfig::default()).unwrap();
        assert!(r.metrics["averted_D"] > 0.0);
        assert_eq!(r.metrics["averted_A"], 0.0);
    }
}

#[test]
fn scenario2_training_beats_classical() {
    let cfg = ScenarioConfig::default();
    let train = TrainConfig { learning_rate: 1e-2, epochs: 25, ..Default::default() };
    let r = run_scenario2(&cfg, &train).unwrap();
    let m = &r.metrics;
    assert!(rel(m["rmse_pgnode_untrained"], m["rmse_classical"]) < 1e-8);
    assert!(m["rmse_pgnode"] < 0.85 * m["rmse_classical"], "{m:?}");
    let slirt = r.trajectory("slirt").unwrap();
    let classical = r.trajectory("classical").unwrap();
    assert!(slirt.states.last().unwrap().i > classical.states.last().unwrap().i);
    assert!(slirt.states[0].t.is_some());
}

#[test]
fn scenarios_are_deterministic() {
    let cfg = ScenarioConfig::default();
    let ic = IntegratorConfig::default();
    let a = run_scenario3(&cfg, &ic).unwrap();
    let b = run_scenario3(&cfg, &ic).unwrap();
    assert_eq!(a.trajectories, b.trajectories);
    assert_eq!(a.metrics, b.metrics);
}
