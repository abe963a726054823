//! Subcommand implementations. Each writes into one run directory:
//! CSV tables, `summary.json` and `config.resolved.toml`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use agecontrol_core::samples::{initial_sample, source_sample, terminal_sample};
use agecontrol_core::{
    caccioppoli_report, carleman_s_sweep, empirical_constant, observability_report, solve_backward, solve_forward,
    synthesize_control, verify_null, AdjointProblem, CarlemanSample, CertificateReport, Error as CoreError, Field,
    ForwardProblem, Grid, HumProblem, HumResult, Interval, ObservabilityForm, Rank,
};
use serde_json::{json, Value};

use crate::config::{CommandName, DatumKind, ExperimentConfig, FormName, InequalityName, Resolved};
use crate::csv::{export_field_csv, float, render_table, write_text};
use crate::error::{CliError, CliResult};

fn slice_datum(kind: DatumKind, grid: &Grid, seed: u64, id: u64, initial: bool) -> Field {
    match kind {
        DatumKind::Zero => Field::zeros(grid, Rank::Slice),
        DatumKind::Smooth => {
            let a_max = grid.a_max();
            Field::slice_from_fn(grid, |a, x| (PI * a / a_max).sin() * (PI * x).sin())
        }
        DatumKind::Sample if initial => initial_sample(grid, seed, id),
        DatumKind::Sample => terminal_sample(grid, seed, id),
    }
}

fn source_datum(kind: DatumKind, grid: &Grid, seed: u64, id: u64) -> Field {
    match kind {
        DatumKind::Zero => Field::zeros(grid, Rank::Trajectory),
        DatumKind::Smooth => {
            let (a_max, t_final) = (grid.a_max(), grid.t_final());
            Field::trajectory_from_fn(grid, |t, a, x| (PI * t / t_final).cos() * (PI * a / a_max).sin() * (PI * x).sin())
        }
        DatumKind::Sample => source_sample(grid, seed, id),
    }
}

fn write_json(path: &Path, v: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| CliError::config(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn grid_json(g: &Grid) -> Value {
    json!({ "T": g.t_final(), "A": g.a_max(), "nt": g.nt(), "na": g.na(), "nx": g.nx(), "x0": g.x0() })
}

/// Resolves `cfg`, prepares `out` and echoes the resolved config.
pub fn prepare(cfg: &mut ExperimentConfig, out: &Path) -> CliResult<Resolved> {
    let resolved = cfg.resolve()?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_text(&out.join("config.resolved.toml"), &cfg.to_toml()?)?;
    Ok(resolved)
}

pub fn execute(command: CommandName, cfg: &mut ExperimentConfig, out: &Path) -> CliResult<()> {
    if command == CommandName::Sweep {
        return sweep(cfg, out);
    }
    let r = prepare(cfg, out)?;
    match command {
        CommandName::Simulate => simulate(cfg, &r, out).map(|_| ()),
        CommandName::Adjoint => adjoint(cfg, &r, out).map(|_| ()),
        CommandName::Certify => certify(cfg, &r, out).map(|_| ()),
        CommandName::Control => control(cfg, &r, out).map(|_| ()),
        CommandName::Sweep => unreachable!(),
    }
}

pub fn simulate(cfg: &ExperimentConfig, r: &Resolved, out: &Path) -> CliResult<Value> {
    let b = &cfg.simulate;
    let y0 = slice_datum(b.initial, &r.grid, cfg.seed, b.sample_id, true);
    let mut p = ForwardProblem::new(r.coeff.clone(), r.rates.clone(), r.region, r.grid, y0).with_scheme(r.scheme);
    if b.control != DatumKind::Zero {
        p = p.with_control(source_datum(b.control, &r.grid, cfg.seed, b.sample_id));
    }
    let sol = solve_forward(&p)?;
    export_field_csv(&sol.trajectory, &out.join("trajectory.csv"))?;
    export_field_csv(&sol.terminal(), &out.join("terminal.csv"))?;
    let rows = sol.energy.norms_sq.iter().enumerate().map(|(n, e)| vec![float(r.grid.t(n)), float(*e)]);
    write_text(&out.join("energy.csv"), &render_table(&["t", "norm_sq"], rows))?;
    let summary = json!({
        "command": "simulate",
        "seed": cfg.seed,
        "grid": grid_json(&r.grid),
        "coefficient": r.coeff.label(),
        "classification": r.coeff.classification().tag(),
        "sup_norm_sq": sol.energy.sup_norm_sq,
        "dissipation": sol.energy.dissipation,
        "terminal_norm_sq": sol.energy.norms_sq.last(),
    });
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn adjoint(cfg: &ExperimentConfig, r: &Resolved, out: &Path) -> CliResult<Value> {
    let b = &cfg.adjoint;
    let vt = slice_datum(b.terminal, &r.grid, cfg.seed, b.sample_id, false);
    let mut p = AdjointProblem::new(r.coeff.clone(), r.rates.clone(), r.grid, vt).with_scheme(r.scheme);
    if b.source != DatumKind::Zero {
        p = p.with_source(source_datum(b.source, &r.grid, cfg.seed, b.sample_id));
    }
    if !b.nonlocal {
        p = p.local();
    }
    let v = solve_backward(&p)?;
    export_field_csv(&v, &out.join("adjoint.csv"))?;
    export_field_csv(&v.slice_at(0), &out.join("initial.csv"))?;
    let summary = json!({
        "command": "adjoint",
        "seed": cfg.seed,
        "grid": grid_json(&r.grid),
        "nonlocal": b.nonlocal,
        "norm_sq": v.scheme_norm_sq(),
        "initial_norm_sq": v.slice_at(0).scheme_norm_sq(),
    });
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn write_reports(path: &Path, reports: &[CertificateReport]) -> CliResult<()> {
    let mut text = String::from(CertificateReport::CSV_HEADER);
    text.push('\n');
    for r in reports {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn certify(cfg: &ExperimentConfig, r: &Resolved, out: &Path) -> CliResult<Value> {
    let b = &cfg.certify;
    let s_list = b.s.clone().value().expect("resolved");
    let seed = cfg.seed;
    let n = b.samples as u64;
    let need_weights = || {
        r.weights
            .clone()
            .ok_or_else(|| CliError::from(CoreError::Precondition("Carleman weights need a degenerate coefficient".into())))
    };
    let mut extra = json!({});
    let reports: Vec<CertificateReport> = match b.inequality {
        InequalityName::Carleman => {
            let ws = need_weights()?;
            let samples = (0..n)
                .map(|id| CarlemanSample::generate(&r.coeff, &r.rates, &r.grid, seed, id))
                .collect::<Result<Vec<_>, _>>()?;
            let sweep = carleman_s_sweep(&samples, &ws, &s_list)?;
            extra = json!({ "max_ratios": sweep.max_ratios, "plateau_s": sweep.plateau_s });
            sweep.flat()
        }
        InequalityName::Caccioppoli => {
            let ws = need_weights()?;
            let (inner, outer) = (Interval::new(b.inner[0], b.inner[1]), Interval::new(b.outer[0], b.outer[1]));
            let mut reps = vec![];
            for id in 0..n {
                let smp = CarlemanSample::generate(&r.coeff, &r.rates, &r.grid, seed, id)?;
                for &s in &s_list {
                    let rep = caccioppoli_report(&smp.v, &smp.f, inner, outer, &ws.with_s(s), &r.grid)?;
                    reps.push(rep.with_sample(id, Some(seed)));
                }
            }
            reps
        }
        InequalityName::Observability => {
            let form = match b.form {
                FormName::Sharp => ObservabilityForm::Sharp,
                FormName::AgeStrip => ObservabilityForm::WithAgeStrip,
            };
            (0..n)
                .map(|id| {
                    let vt = terminal_sample(&r.grid, seed, id);
                    observability_report(&vt, b.delta, &r.region, &r.rates, &r.coeff, &r.grid, form)
                        .map(|rep| rep.with_sample(id, Some(seed)))
                })
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    write_reports(&out.join("reports.csv"), &reports)?;
    let by_id = empirical_constant(&reports)?;
    let summary = json!({
        "command": "certify",
        "inequality": by_id.id.tag(),
        "seed": seed,
        "grid": grid_json(&r.grid),
        "samples": b.samples,
        "s": s_list,
        "empirical_constant": by_id.value,
        "reports": by_id.samples,
        "anomalies": reports.iter().filter(|x| x.anomaly).count(),
        "sweep": extra,
    });
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn hum_outputs(cfg: &ExperimentConfig, r: &Resolved, p: &HumProblem, res: &HumResult, out: &Path) -> CliResult<Value> {
    export_field_csv(&res.control, &out.join("control.csv"))?;
    export_field_csv(&res.terminal_state, &out.join("terminal_state.csv"))?;
    let rows = res
        .cg_residual_trace
        .iter()
        .enumerate()
        .map(|(k, x)| vec![k.to_string(), float(*x), res.energy_trace.get(k).map(|e| float(*e)).unwrap_or_default()]);
    write_text(&out.join("cg_trace.csv"), &render_table(&["iteration", "relative_residual", "energy"], rows))?;
    let check = verify_null(res, p)?;
    let y0_norm = p.y0.scheme_norm_sq().sqrt();
    let summary = json!({
        "command": "control",
        "seed": cfg.seed,
        "grid": grid_json(&r.grid),
        "delta": p.delta,
        "epsilon": p.epsilon,
        "converged": res.converged,
        "iterations": res.iterations,
        "terminal_residual": res.terminal_residual,
        "relative_terminal_residual": if y0_norm > 0.0 { res.terminal_residual / y0_norm } else { 0.0 },
        "verified_terminal_residual": check.terminal_residual,
        "control_norm": res.control_norm,
        "cost_ratio": res.cost_ratio,
        "penalized_cost": res.penalized_cost,
        "leakage": check.leakage,
        "region": r.region.label(),
    });
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn control(cfg: &ExperimentConfig, r: &Resolved, out: &Path) -> CliResult<Value> {
    let b = &cfg.control;
    let y0 = slice_datum(b.initial, &r.grid, cfg.seed, b.sample_id, true);
    let mut p = HumProblem::new(r.coeff.clone(), r.rates.clone(), r.region, r.grid, y0, b.delta, b.epsilon)?
        .with_iterations(b.max_iters, b.tol)?;
    p.scheme = r.scheme;
    match synthesize_control(&p) {
        Ok(res) => hum_outputs(cfg, r, &p, &res, out),
        Err(CoreError::NotConverged(res)) => {
            hum_outputs(cfg, r, &p, &res, out)?;
            Err(CoreError::NotConverged(res).into())
        }
        Err(e) => Err(e.into()),
    }
}

/// Cartesian product over the listed sweep parameters; each point runs in
/// its own subdirectory and contributes one row to `sweep.csv`.
pub fn sweep(cfg: &mut ExperimentConfig, out: &Path) -> CliResult<()> {
    let command = cfg.sweep.command.unwrap_or(CommandName::Certify);
    if command == CommandName::Sweep {
        return Err(CliError::config("sweep.command cannot be sweep"));
    }
    let sw = cfg.sweep.clone();
    let mut axes: Vec<(&str, Vec<String>)> = vec![];
    let push = |axes: &mut Vec<(&'static str, Vec<String>)>, name: &'static str, v: Vec<String>| {
        if !v.is_empty() {
            axes.push((name, v));
        }
    };
    push(&mut axes, "alpha", sw.alpha.iter().map(|v| v.to_string()).collect());
    push(&mut axes, "delta", sw.delta.iter().map(|v| v.to_string()).collect());
    push(&mut axes, "epsilon", sw.epsilon.iter().map(|v| v.to_string()).collect());
    push(&mut axes, "s", sw.s.iter().map(|v| v.to_string()).collect());
    push(&mut axes, "seed", sw.seed.iter().map(|v| v.to_string()).collect());
    push(&mut axes, "nt", sw.nt.iter().map(|v| v.to_string()).collect());
    if axes.is_empty() {
        return Err(CliError::config("sweep lists no parameters"));
    }
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let total: usize = axes.iter().map(|(_, v)| v.len()).product();
    let mut header: Vec<&str> = vec!["point"];
    header.extend(axes.iter().map(|(n, _)| *n));
    header.extend(["metric", "value", "exit_code"]);
    let mut rows = vec![];
    for point in 0..total {
        let mut c = cfg.clone();
        c.sweep = Default::default();
        let mut labels = vec![point.to_string()];
        for (name, values) in &axes {
            let v = &values[index_of(point, &axes, name)];
            apply_axis(&mut c, name, v)?;
            labels.push(v.clone());
        }
        let dir = out.join(format!("point-{point:04}"));
        let result = prepare(&mut c, &dir).and_then(|r| match command {
            CommandName::Simulate => simulate(&c, &r, &dir),
            CommandName::Adjoint => adjoint(&c, &r, &dir),
            CommandName::Certify => certify(&c, &r, &dir),
            CommandName::Control => control(&c, &r, &dir),
            CommandName::Sweep => unreachable!(),
        });
        let (metric, value, code) = match &result {
            Ok(v) => {
                let key = match command {
                    CommandName::Simulate => "terminal_norm_sq",
                    CommandName::Adjoint => "initial_norm_sq",
                    CommandName::Certify => "empirical_constant",
                    _ => "cost_ratio",
                };
                (key, v[key].as_f64().map(float).unwrap_or_default(), 0)
            }
            Err(e) => ("error", String::new(), e.exit_code()),
        };
        labels.extend([metric.to_string(), value, code.to_string()]);
        rows.push(labels);
    }
    write_text(&out.join("sweep.csv"), &render_table(&header, rows))?;
    let mut resolved = cfg.clone();
    resolved.command = Some(CommandName::Sweep);
    resolved.sweep.command = Some(command);
    write_text(&out.join("config.resolved.toml"), &resolved.to_toml()?)
}

fn index_of(point: usize, axes: &[(&str, Vec<String>)], name: &str) -> usize {
    let mut rest = point;
    for (n, values) in axes.iter().rev() {
        let idx = rest % values.len();
        if *n == name {
            return idx;
        }
        rest /= values.len();
    }
    unreachable!("axis {name} is listed")
}

fn apply_axis(c: &mut ExperimentConfig, name: &str, v: &str) -> CliResult<()> {
    let f = || v.parse::<f64>().map_err(|e| CliError::config(format!("sweep {name}: {e}")));
    match name {
        "alpha" => c.coefficient.alpha = f()?,
        "delta" => {
            c.certify.delta = f()?;
            c.control.delta = f()?;
        }
        "epsilon" => c.control.epsilon = f()?,
        "s" => {
            c.weights.s = crate::config::Auto::Value(f()?);
            c.certify.s = crate::config::Auto::Value(vec![f()?]);
        }
        "seed" => c.seed = v.parse().map_err(|e| CliError::config(format!("sweep seed: {e}")))?,
        "nt" => c.grid.nt = v.parse().map_err(|e| CliError::config(format!("sweep nt: {e}")))?,
        _ => unreachable!(),
    }
    // derived grid values are re-derived per point
    if name == "nt" {
        c.grid.na = crate::config::Auto::Auto;
    }
    Ok(())
}
