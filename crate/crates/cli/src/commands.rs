//! One function per subcommand. Inputs are fully validated before anything
//! is written, so a rejected invocation leaves no partial output.

use std::fmt::Write;
use std::path::Path;

use serde_json::{json, Value};
use tbnode::analysis::{sensitivity_indices, stability_report};
use tbnode::integrator::uniform_grid;
use tbnode::model::EpiState;
use tbnode::neural::{init_params, jitter, MlpSpec, STATE_FEATURES, RATE_OUTPUTS};
use tbnode::pgnode::{simulate as simulate_pgnode, PgNodeModel};
use tbnode::scenarios::{
    run_scenario1, run_scenario2, run_scenario3, simulate_slir, simulate_slirt, ScenarioResult,
};
use tbnode::training::{gradient_check, loss, tolerance_sweep, train as fit, Observations, StopReason, I_ONLY_MASK};

use crate::config::{Config, ModelKind};
use crate::io::{
    ensure_dir, read_bytes, read_observations, write_bytes, write_json, write_series_csv, write_text,
    write_trajectory_csv,
};
use crate::svg::{emit_svg, Chart, Line, Marker};
use crate::Failure;

/// Worst probe error accepted by `gradcheck` and `train --gradcheck`.
pub const GRADCHECK_TOLERANCE: f64 = 1e-3;

fn state_json(x: &EpiState) -> Value {
    let mut v = json!({ "S": x.s, "L": x.l, "I": x.i, "R": x.r });
    if let Some(t) = x.t {
        v["T"] = json!(t);
    }
    v
}

pub fn analyze(config: &Config, out: &Path) -> Result<(), Failure> {
    let params = config.params();
    let report = stability_report(&params)?;
    let sens = sensitivity_indices(&params);
    let verdict = match (report.dfe_locally_stable, report.endemic.is_some()) {
        (true, false) => "DFE stable, no endemic equilibrium",
        (false, true) => "DFE unstable, endemic equilibrium exists",
        (false, false) => "DFE not asymptotically stable (R0 = 1), no endemic equilibrium",
        (true, true) => return Err(Failure::Numerical("stable DFE alongside an endemic equilibrium".into())),
    };

    let mut text = String::new();
    let _ = writeln!(text, "R0 = {:.4}", report.r0);
    let d = &report.dfe;
    let _ = writeln!(text, "DFE: S = {:.2}, L = {}, I = {}, R = {}", d.s, d.l, d.i, d.r);
    match &report.endemic {
        Some(ee) => {
            let x = &ee.state;
            let _ = writeln!(
                text,
                "Endemic equilibrium: lambda* = {:.6}, S = {:.1}, L = {:.1}, I = {:.1}, R = {:.1}",
                ee.force_of_infection, x.s, x.l, x.i, x.r
            );
        }
        None => {
            let _ = writeln!(text, "Endemic equilibrium: none");
        }
    }
    let _ = writeln!(text, "Infected block M: trace = {:.6}, det = {:.6}", report.trace_m, report.det_m);
    let _ = writeln!(text, "{verdict}");
    let _ = writeln!(text, "Normalized sensitivity of R0:");
    for (name, value) in sens.entries() {
        let _ = writeln!(text, "  {name:<6} {value:+.3}");
    }
    for warning in params.range_warnings() {
        let _ = writeln!(text, "warning: {warning}");
    }

    let json = json!({
        "r0": report.r0,
        "dfe": state_json(&report.dfe),
        "endemic": report.endemic.map(|ee| json!({
            "force_of_infection": ee.force_of_infection,
            "state": state_json(&ee.state),
        })),
        "trace_m": report.trace_m,
        "det_m": report.det_m,
        "dfe_locally_stable": report.dfe_locally_stable,
        "verdict": verdict,
        "sensitivity": sens.entries().iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
        "warnings": params.range_warnings(),
    });
    ensure_dir(out)?;
    write_text(&out.join("analysis.txt"), &text)?;
    write_json(&out.join("analysis.json"), &json)?;
    print!("{text}");
    Ok(())
}

fn load_model(path: &Path) -> Result<PgNodeModel, Failure> {
    if path.as_os_str().is_empty() {
        return Err(Failure::User("simulate.model = \"pgnode\" needs simulate.model_file".into()));
    }
    let bytes = read_bytes(path)?;
    PgNodeModel::from_bytes(&bytes).map_err(|e| Failure::User(format!("{}: {e}", path.display())))
}

pub fn simulate(config: &Config, out: &Path) -> Result<(), Failure> {
    let sim = &config.simulate;
    let integrator = config.integrator();
    let x0 = config.initial_state()?;
    let span = (sim.t_start, sim.t_end);
    let traj = match sim.model {
        ModelKind::Slir => simulate_slir(&config.params(), &x0, span, &integrator)?,
        ModelKind::Slirt => {
            let start = EpiState { t: Some(config.initial.t), ..x0 };
            simulate_slirt(&config.params(), &config.slirt(), &start, span, &integrator)?
        }
        ModelKind::Pgnode => {
            let model = load_model(&sim.model_file)?;
            simulate_pgnode(&model, &x0, span, &integrator)?
        }
    };
    let times = uniform_grid(sim.t_start, sim.t_end, sim.output_step);
    let states = traj.sample_states(&times)?;

    ensure_dir(out)?;
    write_trajectory_csv(&out.join("trajectory.csv"), &times, &states)?;
    if sim.svg {
        let mut lines = vec![
            Line::new("S", &times, &states.iter().map(|x| x.s).collect::<Vec<_>>()),
            Line::new("L", &times, &states.iter().map(|x| x.l).collect::<Vec<_>>()),
            Line::new("I", &times, &states.iter().map(|x| x.i).collect::<Vec<_>>()),
            Line::new("R", &times, &states.iter().map(|x| x.r).collect::<Vec<_>>()),
        ];
        if states[0].t.is_some() {
            lines.push(Line::new("T", &times, &states.iter().map(|x| x.t.unwrap_or(0.0)).collect::<Vec<_>>()));
        }
        let chart = Chart {
            title: format!("{:?} trajectory", sim.model).to_uppercase(),
            x_label: "time (years)".into(),
            y_label: "persons".into(),
            lines,
            markers: Vec::new(),
        };
        write_text(&out.join("trajectory.svg"), &emit_svg(&chart)?)?;
    }
    let last = states.last().expect("grid is never empty");
    println!(
        "t = {}: S = {:.1}, L = {:.1}, I = {:.1}, R = {:.1}{}",
        times[times.len() - 1],
        last.s,
        last.l,
        last.i,
        last.r,
        last.t.map(|t| format!(", T = {t:.1}")).unwrap_or_default()
    );
    Ok(())
}

fn stop_label(reason: &StopReason) -> &'static str {
    match reason {
        StopReason::Converged => "converged",
        StopReason::EpochBudget => "epoch-budget",
    }
}

pub fn train(config: &Config, out: &Path) -> Result<(), Failure> {
    let t = &config.train;
    if t.observations.as_os_str().is_empty() {
        return Err(Failure::User("train needs an observations CSV (--observations or train.observations)".into()));
    }
    let obs = read_observations(&t.observations, t.t_start, config.initial_state()?)?;
    let spec = MlpSpec::new(STATE_FEATURES, t.hidden.clone(), RATE_OUTPUTS)?;
    let weights = init_params(&spec, config.seed);
    let mut model = PgNodeModel::with_network(config.params(), spec, weights, t.horizon)?;
    model.correction_cap = t.correction_cap;
    model.validate()?;
    let train_cfg = config.train_config();
    train_cfg.validate()?;

    let (report, failure) = match fit(&model, &obs, &train_cfg) {
        Ok(report) => (report, None),
        Err(f) => (*f.partial.clone(), Some(f)),
    };
    let trained = PgNodeModel { weights: report.final_params.clone(), ..model };
    let initial_loss = report.loss_history.first().copied();
    let final_loss = match failure {
        None => Some(loss(&trained, &obs, &train_cfg)?),
        Some(_) => None,
    };
    let mut doc = json!({
        "epochs": report.loss_history.len(),
        "stop_reason": failure.as_ref().map_or(stop_label(&report.stop_reason).to_string(), |f| format!("failed: {}", f.source)),
        "loss_history": report.loss_history,
        "grad_norm_history": report.grad_norm_history,
        "initial_loss": initial_loss,
        "final_loss": final_loss.map(|l| json!({ "total": l.total, "data": l.data, "phys": l.phys, "reg": l.reg })),
        "parameter_count": trained.weights.len(),
        "seed": config.seed,
    });
    let mut gradcheck_failed = None;
    if failure.is_none() && t.gradcheck {
        let check = gradient_check(&trained, &obs, &train_cfg, t.gradcheck_probes)?;
        let pass = check.max_relative_error < GRADCHECK_TOLERANCE;
        doc["gradcheck"] = gradcheck_json(&check, pass);
        if !pass {
            gradcheck_failed = Some(check.max_relative_error);
        }
    }

    ensure_dir(out)?;
    write_bytes(&out.join("model.bin"), &trained.to_bytes())?;
    write_json(&out.join("train_report.json"), &doc)?;
    println!(
        "epochs {}, stop {}, loss {} -> {}",
        report.loss_history.len(),
        doc["stop_reason"].as_str().unwrap_or(""),
        initial_loss.map_or("n/a".into(), |l| l.to_string()),
        final_loss.map_or("n/a".into(), |l| l.total.to_string()),
    );
    if let Some(f) = failure {
        return Err(Failure::Numerical(format!("training stopped in epoch {}: {}", f.epoch, f.source)));
    }
    if let Some(err) = gradcheck_failed {
        return Err(Failure::Numerical(format!("gradient check failed: max relative error {err}")));
    }
    Ok(())
}

fn gradcheck_json(check: &tbnode::training::GradientCheck, pass: bool) -> Value {
    json!({
        "max_relative_error": check.max_relative_error,
        "tolerance": GRADCHECK_TOLERANCE,
        "pass": pass,
        "probes": check.probes.iter().map(|p| json!({
            "index": p.index,
            "adjoint": p.adjoint,
            "finite_difference": p.finite_difference,
            "relative_error": p.relative_error,
        })).collect::<Vec<_>>(),
    })
}

pub fn gradcheck(config: &Config, out: &Path) -> Result<(), Failure> {
    let g = &config.gradcheck;
    let params = config.params();
    let integrator = config.integrator();
    let x0 = config.initial_state()?;
    let truth_params = tbnode::model::ModelParams { transmission: params.transmission * g.beta_scale, ..params };
    let truth = PgNodeModel::new(truth_params, g.horizon, 0);
    let traj = simulate_pgnode(&truth, &x0, (0.0, g.horizon), &integrator)?;
    let times: Vec<f64> = uniform_grid(0.0, g.horizon, g.observation_step).into_iter().skip(1).collect();
    let obs = Observations::from_trajectory(&traj, &times, I_ONLY_MASK)?;

    let spec = MlpSpec::new(STATE_FEATURES, g.hidden.clone(), RATE_OUTPUTS)?;
    let mut weights = init_params(&spec, config.seed);
    jitter(&mut weights, g.jitter, config.seed.wrapping_add(1));
    let model = PgNodeModel::with_network(params, spec, weights, g.horizon)?;
    let train_cfg = config.train_config();

    let check = gradient_check(&model, &obs, &train_cfg, g.probes)?;
    let pass = check.max_relative_error < GRADCHECK_TOLERANCE;
    let sweep = tolerance_sweep(&model, &obs, &train_cfg, g.probes, &g.sweep_rtols)?;
    let monotone = sweep.windows(2).all(|w| w[1] < w[0]);
    let doc = json!({
        "check": gradcheck_json(&check, pass),
        "parameter_count": model.weights.len(),
        "rtol": train_cfg.integrator.rtol,
        "seed": config.seed,
        "tolerance_sweep": {
            "rtols": g.sweep_rtols,
            "relative_errors": sweep,
            "monotone": monotone,
        },
    });
    ensure_dir(out)?;
    write_json(&out.join("gradcheck.json"), &doc)?;
    println!(
        "{} probes, max relative error {:.3e} ({}); tolerance sweep {}",
        check.probes.len(),
        check.max_relative_error,
        if pass { "pass" } else { "FAIL" },
        if monotone { "monotone" } else { "NOT monotone" }
    );
    if !pass || !monotone {
        return Err(Failure::Numerical("gradient check failed".into()));
    }
    Ok(())
}

fn column(result: &ScenarioResult, label: &str, pick: impl Fn(&EpiState) -> f64) -> Result<Vec<f64>, Failure> {
    result
        .trajectory(label)
        .map(|t| t.compartment(pick))
        .ok_or_else(|| Failure::Internal(format!("scenario result lacks `{label}`")))
}

fn series<'a>(result: &'a ScenarioResult, label: &str) -> Result<&'a [f64], Failure> {
    result
        .series(label)
        .map(|s| s.values.as_slice())
        .ok_or_else(|| Failure::Internal(format!("scenario result lacks series `{label}`")))
}

fn figures(id: u8, result: &ScenarioResult, config: &Config) -> Result<Vec<(String, Chart)>, Failure> {
    let t = &result.times;
    let chart = |title: &str, y_label: &str, lines: Vec<Line>, markers: Vec<Marker>| Chart {
        title: title.into(),
        x_label: "time (years)".into(),
        y_label: y_label.into(),
        lines,
        markers,
    };
    Ok(match id {
        1 => {
            let onset = vec![Marker { x: config.scenario.intervention_onset, label: "intervention onset".into() }];
            vec![
                (
                    "scenario1_infectious".into(),
                    chart(
                        "Active TB under time-varying transmission",
                        "infectious I (persons)",
                        vec![
                            Line::new("classical SLIR", t, &column(result, "classical", |x| x.i)?),
                            Line::new("PG-NODE", t, &column(result, "pgnode", |x| x.i)?),
                        ],
                        onset.clone(),
                    ),
                ),
                (
                    "scenario1_beta".into(),
                    chart(
                        "Effective transmission rate",
                        "beta (1/yr)",
                        vec![
                            Line::new("classical (constant)", t, series(result, "beta_classical")?),
                            Line::new("PG-NODE beta_eff(t)", t, series(result, "beta_pgnode")?),
                        ],
                        onset,
                    ),
                ),
            ]
        }
        2 => {
            let truth = column(result, "slirt", |x| x.i)?;
            let classical = column(result, "classical", |x| x.i)?;
            let hybrid = column(result, "pgnode", |x| x.i)?;
            let error = |model: &[f64]| model.iter().zip(&truth).map(|(m, g)| (m - g).abs()).collect::<Vec<_>>();
            vec![
                (
                    "scenario2_infectious".into(),
                    chart(
                        "Active TB: SLIRT truth and fitted models",
                        "infectious I (persons)",
                        vec![
                            Line::new("SLIRT (truth)", t, &truth),
                            Line::new("classical SLIR", t, &classical),
                            Line::new("PG-NODE (trained)", t, &hybrid),
                        ],
                        Vec::new(),
                    ),
                ),
                (
                    "scenario2_treated_recovered".into(),
                    chart(
                        "Treated plus recovered population",
                        "T + R (persons)",
                        vec![
                            Line::new("SLIRT T + R", t, &column(result, "slirt", |x| x.r + x.t.unwrap_or(0.0))?),
                            Line::new("classical SLIR R", t, &column(result, "classical", |x| x.r)?),
                            Line::new("PG-NODE R", t, &column(result, "pgnode", |x| x.r)?),
                        ],
                        Vec::new(),
                    ),
                ),
                (
                    "scenario2_error".into(),
                    chart(
                        "Absolute approximation error in I",
                        "|I - I_truth| (persons)",
                        vec![Line::new("classical SLIR", t, &error(&classical)), Line::new("PG-NODE", t, &error(&hybrid))],
                        Vec::new(),
                    ),
                ),
            ]
        }
        _ => {
            let mut infectious = Vec::new();
            let mut averted = Vec::new();
            for s in ["A", "B", "C", "D"] {
                infectious.push(Line::new(format!("Strategy {s}"), t, &column(result, s, |x| x.i)?));
                if s != "A" {
                    averted.push(Line::new(format!("Strategy {s}"), t, series(result, &format!("averted_{s}"))?));
                }
            }
            vec![
                (
                    "scenario3_infectious".into(),
                    chart("Active TB under intervention strategies", "infectious I (persons)", infectious, Vec::new()),
                ),
                (
                    "scenario3_averted".into(),
                    chart(
                        &format!("Cumulative cases averted vs Strategy A ({})", config.scenario.incidence),
                        "cases averted",
                        averted,
                        Vec::new(),
                    ),
                ),
            ]
        }
    })
}

pub fn scenario(id: u8, config: &Config, out: &Path) -> Result<(), Failure> {
    let scenario_cfg = config.scenario()?;
    let integrator = config.integrator();
    let result = match id {
        1 => run_scenario1(&scenario_cfg, &integrator)?,
        2 => run_scenario2(&scenario_cfg, &config.train_config())?,
        3 => run_scenario3(&scenario_cfg, &integrator)?,
        other => return Err(Failure::User(format!("unknown scenario {other}; expected 1, 2 or 3"))),
    };
    let charts = figures(id, &result, config)?
        .into_iter()
        .map(|(name, chart)| Ok((name, emit_svg(&chart)?)))
        .collect::<Result<Vec<_>, Failure>>()?;

    ensure_dir(out)?;
    for traj in &result.trajectories {
        write_trajectory_csv(&out.join(format!("scenario{id}_{}.csv", traj.label)), &result.times, &traj.states)?;
    }
    let columns: Vec<(&str, &[f64])> = result.series.iter().map(|s| (s.label.as_str(), s.values.as_slice())).collect();
    if !columns.is_empty() {
        write_series_csv(&out.join(format!("scenario{id}_series.csv")), &result.times, &columns)?;
    }
    for (name, svg) in &charts {
        write_text(&out.join(format!("{name}.svg")), svg)?;
    }
    let mut doc = json!({ "scenario": id, "metrics": result.metrics });
    if id == 3 {
        doc["incidence"] = json!(scenario_cfg.incidence.as_str());
        doc["strategy_ramp"] = json!(scenario_cfg.strategy_ramp);
    }
    if let Some(summary) = &result.training {
        doc["training"] = json!({
            "epochs": summary.epochs,
            "initial_loss": summary.initial_loss,
            "final_loss": summary.final_loss,
            "stop_reason": summary.stop_reason,
            "loss_history": summary.loss_history,
        });
    }
    if let Some(model) = &result.model {
        write_bytes(&out.join(format!("scenario{id}_model.bin")), &model.to_bytes())?;
    }
    write_json(&out.join(format!("scenario{id}_metrics.json")), &doc)?;
    for (key, value) in &result.metrics {
        println!("{key} = {value}");
    }
    Ok(())
}
