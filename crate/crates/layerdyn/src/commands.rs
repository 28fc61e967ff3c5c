//! Subcommand implementations.

use std::path::{Path, PathBuf};

use layerdyn_core::layer::{find_layer_equilibria, find_sliding_modes, SearchBox, TransitionKind};

use crate::config::{Format, Mode, RunConfig};
use crate::error::{config_err, numeric, CliError};
use crate::output::{render_trajectory, write_file, Table};
use crate::run::{adapted_state, amplitude, build_system, check_window, run, state_names, RunOutput};

/// Where results go and in which format.
#[derive(Clone, Debug, Default)]
pub struct Sink {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

impl Sink {
    fn resolve(&self, cfg: &RunConfig) -> (Option<PathBuf>, Format) {
        (self.path.clone().or_else(|| cfg.output.path.clone()), self.format.unwrap_or(cfg.output.format))
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn simulate(cfg: &RunConfig, sink: &Sink) -> Result<RunOutput, CliError> {
    let out = run(cfg)?;
    let (path, format) = sink.resolve(cfg);
    emit(path.as_deref(), &render_trajectory(&out, format))?;
    Ok(out)
}

/// Per-member statistics written to the sweep summary.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSummary {
    pub value: f64,
    pub final_t: f64,
    pub final_state: Vec<f64>,
    /// Half peak-to-peak of λ over the second half of the time span.
    pub amplitude: f64,
    pub sticks: usize,
    pub crosses: usize,
    /// Largest final-state difference to the hybrid run of the same configuration; regularized runs only.
    pub layer_gap: f64,
}

fn summarize(cfg: &RunConfig, value: f64, out: &RunOutput) -> Result<SweepSummary, CliError> {
    let last = out.final_row().ok_or_else(|| config_err("run produced no samples"))?;
    let [t0, t1] = cfg.t_span;
    let times = out.column("t").unwrap_or_default();
    let lambda = out.column("lambda").unwrap_or_default();
    let layer_gap = if cfg.mode == Mode::Regularized {
        let mut hybrid = cfg.clone();
        hybrid.mode = Mode::Hybrid;
        hybrid.sigmoid = None;
        let reference = run(&hybrid)?;
        let end = reference.final_row().ok_or_else(|| config_err("hybrid run produced no samples"))?;
        end.x.iter().zip(&last.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::NAN
    };
    Ok(SweepSummary {
        value,
        final_t: last.t,
        final_state: last.x.clone(),
        amplitude: amplitude(&times, &lambda, 0.5 * (t0 + t1), t1).unwrap_or(f64::NAN),
        sticks: out.count(TransitionKind::Stick),
        crosses: out.count(TransitionKind::CrossUp) + out.count(TransitionKind::CrossDown),
        layer_gap,
    })
}

/// Runs one member per value concurrently, writing `<dir>/<param>_<k>.<ext>`
/// and `<dir>/summary.<ext>` once all members finish.
pub fn sweep(
    cfg: &RunConfig,
    param: &str,
    values: &[f64],
    dir: &Path,
    format: Option<Format>,
) -> Result<Vec<SweepSummary>, CliError> {
    if values.is_empty() {
        return Err(config_err("sweep needs at least one value"));
    }
    let format = format.unwrap_or(cfg.output.format);
    let members = values.iter().map(|&v| cfg.with_parameter(param, v)).collect::<Result<Vec<_>, _>>()?;

    let results: Vec<Result<SweepSummary, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = members
            .iter()
            .zip(values)
            .enumerate()
            .map(|(k, (member, &value))| {
                let path = dir.join(format!("{param}_{k}.{}", format.extension()));
                s.spawn(move || {
                    let out = run(member)?;
                    write_file(&path, &render_trajectory(&out, format))?;
                    summarize(member, value, &out)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep member panicked")).collect()
    });
    let summaries = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut columns = vec![param.to_string(), "t_final".to_string()];
    columns.extend(state_names(cfg).into_iter().map(|n| format!("{n}_final")));
    columns.extend(["amplitude", "sticks", "crosses", "layer_gap"].map(String::from));
    let mut table = Table::new(columns);
    for s in &summaries {
        let mut row = vec![s.value, s.final_t];
        row.extend(&s.final_state);
        row.extend([s.amplitude, s.sticks as f64, s.crosses as f64, s.layer_gap]);
        table.push(None, row);
    }
    write_file(&dir.join(format!("summary.{}", format.extension())), &table.render(format))?;
    Ok(summaries)
}

/// Half the peak-to-peak range of `column` over `[lo, hi]`.
pub fn amplitude_report(cfg: &RunConfig, lo: f64, hi: f64, column: &str) -> Result<f64, CliError> {
    check_window(cfg, lo, hi)?;
    let out = run(cfg)?;
    let times = out.column("t").expect("time column");
    let values = out.column(column).ok_or_else(|| config_err(format!("no column named `{column}`")))?;
    amplitude(&times, &values, lo, hi).ok_or_else(|| config_err(format!("no finite `{column}` samples in the window")))
}

/// Names of the coordinates along the surface, in adapted order.
fn rest_names(cfg: &RunConfig) -> Vec<String> {
    match cfg.circuit_params() {
        Some(_) => vec!["I".into()],
        None => state_names(cfg).into_iter().skip(1).collect(),
    }
}

/// Sliding modes at surface points whose second coordinate runs over `grid`;
/// further coordinates come from `initial_state`.
pub fn sliding(cfg: &RunConfig, grid: &[f64], sink: &Sink) -> Result<Table, CliError> {
    cfg.validate()?;
    let sys = build_system(cfg)?;
    let t = cfg.t_span[0];
    let names = rest_names(cfg);
    let mut columns = vec!["stability".to_string(), names[0].clone(), "lambda".into(), "slope".into()];
    columns.extend(names.iter().map(|n| format!("d{n}")));
    let mut table = Table::new(columns);
    for &g in grid {
        let mut x_rest = adapted_state(cfg, &cfg.initial_state).split_off(1);
        x_rest[0] = g;
        let modes = find_sliding_modes(&sys, &x_rest, t).map_err(numeric("find_sliding_modes"))?;
        for m in modes {
            let mut row = vec![g, m.lambda, m.slope];
            row.extend(&m.sliding_field);
            table.push(Some(format!("{:?}", m.stability).to_lowercase()), row);
        }
    }
    let (path, format) = sink.resolve(cfg);
    emit(path.as_deref(), &table.render(format))?;
    Ok(table)
}

/// Layer equilibria found from seeds in `bounds` (one interval per rest coordinate).
pub fn equilibria(cfg: &RunConfig, bounds: Vec<(f64, f64)>, sink: &Sink) -> Result<Table, CliError> {
    cfg.validate()?;
    let sys = build_system(cfg)?;
    let names = rest_names(cfg);
    if bounds.len() != names.len() {
        return Err(config_err(format!("expected {} search intervals, got {}", names.len(), bounds.len())));
    }
    let found = find_layer_equilibria(&sys, &SearchBox::new(bounds), cfg.t_span[0])
        .map_err(numeric("find_layer_equilibria"))?;
    let mut columns = vec!["kind".to_string(), "lambda".into()];
    columns.extend(names.iter().cloned());
    columns.push("residual".into());
    for k in 1..=names.len() + 1 {
        columns.push(format!("eig{k}_re"));
        columns.push(format!("eig{k}_im"));
    }
    let mut table = Table::new(columns);
    for eq in found {
        let mut row = vec![eq.lambda];
        row.extend(&eq.x_rest);
        row.push(eq.residual);
        row.extend(eq.eigenvalues.iter().flat_map(|c| [c.re, c.im]));
        table.push(Some(format!("{:?}", eq.kind).to_lowercase()), row);
    }
    let (path, format) = sink.resolve(cfg);
    emit(path.as_deref(), &table.render(format))?;
    Ok(table)
}

/// Default seed region for [`equilibria`].
pub fn default_bounds(cfg: &RunConfig) -> Vec<(f64, f64)> {
    match cfg.circuit_params() {
        Some(p) => vec![(0.0, 2.0 * p.vb / p.r)],
        None => vec![(-2.0, 2.0); cfg.dim() - 1],
    }
}
