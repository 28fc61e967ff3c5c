//! Builds the configured system and runs it in the requested mode.

use layerdyn_core::integrate::{integrate_regularized, TrajectorySegment};
use layerdyn_core::layer::{integrate_hybrid, integrate_layer, TransitionKind};
use layerdyn_core::scenarios::{make_circuit, make_duffing, make_example1, make_example2, CircuitParams};
use layerdyn_core::{HybridTrajectory, State, SwitchedField};

use crate::config::{Mode, RunConfig, ScenarioConfig};
use crate::error::{config_err, numeric, CliError};

/// One output sample in physical coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub t: f64,
    pub regime: &'static str,
    pub x: Vec<f64>,
    /// `NaN` where the multiplier is not tracked.
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: &'static str,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    /// Names of the state columns.
    pub state_names: Vec<String>,
    pub rows: Vec<Row>,
    pub events: Vec<Event>,
    /// Present for hybrid runs.
    pub hybrid: Option<HybridTrajectory>,
}

impl RunOutput {
    pub fn final_row(&self) -> Option<&Row> {
        self.rows.last()
    }

    /// Looks up a column by name: `t`, `lambda` or a state name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        match name {
            "t" => Some(self.rows.iter().map(|r| r.t).collect()),
            "lambda" => Some(self.rows.iter().map(|r| r.lambda).collect()),
            _ => {
                let k = self.state_names.iter().position(|s| s == name)?;
                Some(self.rows.iter().map(|r| r.x[k]).collect())
            }
        }
    }

    pub fn count(&self, kind: TransitionKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind.name()).count()
    }
}

/// Maps between the configured physical coordinates and the adapted ones.
enum Coords {
    Identity,
    Circuit(CircuitParams),
}

impl Coords {
    fn to_adapted(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Coords::Identity => x.to_vec(),
            Coords::Circuit(p) => p.to_adapted(x[0], x[1]),
        }
    }

    fn to_physical(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Coords::Identity => x.to_vec(),
            Coords::Circuit(p) => {
                let (i, v) = p.to_physical(x);
                vec![i, v]
            }
        }
    }
}

pub fn state_names(cfg: &RunConfig) -> Vec<String> {
    match cfg.scenario {
        ScenarioConfig::Circuit { .. } => vec!["I".into(), "V".into()],
        _ => (1..=cfg.dim()).map(|k| format!("x{k}")).collect(),
    }
}

pub fn build_system(cfg: &RunConfig) -> Result<SwitchedField, CliError> {
    let sys = match &cfg.scenario {
        ScenarioConfig::Example1 { variant } => make_example1(RunConfig::example1_variant(*variant)),
        ScenarioConfig::Example2 { variant } => make_example2(RunConfig::example2_variant(*variant)),
        ScenarioConfig::Circuit { .. } => {
            make_circuit(cfg.circuit_params().expect("circuit")).map_err(|e| config_err(e.to_string()))?
        }
        ScenarioConfig::Duffing { .. } => {
            make_duffing(cfg.duffing_params().expect("duffing")).map_err(|e| config_err(e.to_string()))?
        }
    };
    Ok(if cfg.reverse_time { sys.reversed() } else { sys })
}

fn coords(cfg: &RunConfig) -> Coords {
    cfg.circuit_params().map_or(Coords::Identity, Coords::Circuit)
}

/// Maps a physical state to adapted coordinates.
pub fn adapted_state(cfg: &RunConfig, x: &[f64]) -> Vec<f64> {
    coords(cfg).to_adapted(x)
}

/// Maps an adapted state to physical coordinates.
pub fn physical_state(cfg: &RunConfig, x: &[f64]) -> Vec<f64> {
    coords(cfg).to_physical(x)
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let sys = build_system(cfg)?;
    let map = coords(cfg);
    let integrator = cfg.integrator();
    let [t0, t1] = cfg.t_span;
    let x0 = State::new(t0, map.to_adapted(&cfg.initial_state));

    let mut out = RunOutput { state_names: state_names(cfg), rows: Vec::new(), events: Vec::new(), hybrid: None };
    match cfg.mode {
        Mode::Hybrid => {
            let traj =
                integrate_hybrid(&sys, &x0, t1, &integrator, cfg.eps_layer).map_err(numeric("integrate_hybrid"))?;
            for seg in &traj.segments {
                push_segment(&mut out.rows, seg, &map);
            }
            out.events = traj.transitions.iter().map(|tr| Event { t: tr.t, kind: tr.kind.name() }).collect();
            out.hybrid = Some(traj);
        }
        Mode::Regularized => {
            let sigmoid = cfg.sigmoid.as_ref().expect("validated").spec()?;
            let seg = integrate_regularized(&sys, &sigmoid, &x0, t1, &integrator)
                .map_err(numeric("integrate_regularized"))?;
            push_segment(&mut out.rows, &seg, &map);
        }
        Mode::LayerOnly => {
            let lambda0 = cfg.initial_lambda.unwrap_or(0.0);
            let run = integrate_layer(&sys, lambda0, &x0, t1, &integrator, cfg.eps_layer)
                .map_err(numeric("integrate_layer"))?;
            push_segment(&mut out.rows, &run.segment, &map);
            if let Some(side) = run.exit {
                let t = run.segment.times().last().copied().unwrap_or(t0);
                log::info!("layer left through the {side:?} boundary at t = {t}");
                out.events.push(Event { t, kind: TransitionKind::LayerExit.name() });
            }
        }
    }
    Ok(out)
}

fn push_segment(rows: &mut Vec<Row>, seg: &TrajectorySegment, map: &Coords) {
    let regime = seg.regime.name();
    for i in 0..seg.len() {
        let lambda = seg.lambda().map_or(f64::NAN, |l| l[i]);
        rows.push(Row { t: seg.t(i), regime, x: map.to_physical(seg.x(i)), lambda });
    }
}

/// Half the peak-to-peak range of `values` over samples with `t ∈ [lo, hi]`.
pub fn amplitude(times: &[f64], values: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let (min, max) = times
        .iter()
        .zip(values)
        .filter(|(t, v)| (lo..=hi).contains(*t) && v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, &v)| (a.min(v), b.max(v)));
    (min <= max).then_some(0.5 * (max - min))
}

/// Checks that `[lo, hi]` is a non-empty window inside the configured time span.
pub fn check_window(cfg: &RunConfig, lo: f64, hi: f64) -> Result<(), CliError> {
    let [t0, t1] = cfg.t_span;
    if !(lo < hi && lo >= t0 && hi <= t1) {
        return Err(config_err(format!("window [{lo}, {hi}] is not inside t_span [{t0}, {t1}]")));
    }
    Ok(())
}
