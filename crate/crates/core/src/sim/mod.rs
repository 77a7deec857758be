//! Benchmark driver: configuration, time loop, diagnostics, and output.

mod config;
mod diagnostics;
mod output;

pub use config::{GradientNorm, PiKind, RunConfig, SchemeKind, CONFIG_KEYS};
pub use diagnostics::{
    blow_up_time, compute_component_average, compute_energy, compute_w1inf, BlowUp, Diagnostics, DiagnosticsRow,
};
pub use output::{emit_outputs, plot_script_path, read_series, write_series, CSV_HEADER};

use std::path::PathBuf;

use crate::fem::interpolate_initial_m;
use crate::integrator::{
    Advisory, Elastodynamics, MidpointIntegrator, SimulationState, StepReport, TangentIntegrator, TimeStepper,
};
use crate::mesh::{build_structured_mesh, Mesh};
use crate::SimError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub rows: Vec<DiagnosticsRow>,
    pub blow_up: BlowUp,
    pub advisories: Vec<String>,
    pub final_state: SimulationState,
}

/// Runs `stepper` for `n_steps`, recording a row at step 0, every
/// `cadence` steps, and at the last step.
pub fn run_stepper<S: TimeStepper>(
    stepper: &S,
    elastic: &Elastodynamics,
    diagnostics: &Diagnostics,
    mut state: SimulationState,
    n_steps: usize,
    cadence: usize,
) -> Result<(Vec<DiagnosticsRow>, SimulationState), SimError> {
    let mesh = stepper.mesh();
    let mut rows = vec![diagnostics.row(mesh, elastic, &state, &StepReport::default())];
    for _ in 0..n_steps {
        let (step, time) = (state.step, state.time);
        let report = stepper.advance(&mut state).map_err(|e| e.at_step(step + 1, time + stepper.time_step()))?;
        if state.step % cadence == 0 || state.step == n_steps {
            rows.push(diagnostics.row(mesh, elastic, &state, &report));
        }
    }
    Ok((rows, state))
}

/// The structured mesh, benchmark initial data, and chosen scheme for `cfg`.
pub fn run_benchmark(cfg: &RunConfig) -> Result<RunResult, SimError> {
    cfg.validate()?;
    let mesh = build_structured_mesh(cfg.r)?;
    run_on_mesh(cfg, &mesh)
}

fn run_on_mesh(cfg: &RunConfig, mesh: &Mesh) -> Result<RunResult, SimError> {
    let params = cfg.params()?;
    let state = SimulationState::at_rest(mesh, interpolate_initial_m(mesh, cfg.s)?)?;
    let diagnostics = Diagnostics::new(mesh, cfg.rho, cfg.gradient_norm)?;
    let mut advisories = Vec::new();
    let (rows, final_state) = match cfg.scheme {
        SchemeKind::Tangent => {
            let stepper = TangentIntegrator::new(mesh, params, cfg.k)?;
            if let Advisory::Warn(msg) = stepper.advisory() {
                advisories.push(msg);
            }
            run_stepper(&stepper, stepper.elastodynamics(), &diagnostics, state, cfg.n_steps(), cfg.cadence)?
        }
        SchemeKind::Midpoint => {
            let stepper = MidpointIntegrator::new(mesh, params, cfg.k, cfg.midpoint)?;
            if let Advisory::Warn(msg) = stepper.advisory() {
                advisories.push(msg);
            }
            run_stepper(&stepper, stepper.elastodynamics(), &diagnostics, state, cfg.n_steps(), cfg.cadence)?
        }
    };
    let blow_up = blow_up_time(&rows);
    Ok(RunResult { rows, blow_up, advisories, final_state })
}

/// Output path for one sweep member: `<stem>_<key>_<value>.<ext>`.
pub fn sweep_output_path(base: &Option<PathBuf>, key: &str, value: &str) -> Option<PathBuf> {
    let base = base.as_ref()?;
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    let ext = base.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    let tag: String = format!("{key}_{value}")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect();
    Some(base.with_file_name(format!("{stem}_{tag}.{ext}")))
}

/// One configuration per value of `key`, each with its own output path.
pub fn sweep_configs(base: &RunConfig, key: &str, values: &[String]) -> Result<Vec<RunConfig>, SimError> {
    values
        .iter()
        .map(|v| {
            let mut cfg = base.clone();
            cfg.set(key, v)?;
            cfg.out = sweep_output_path(&base.out, key, v);
            cfg.validate()?;
            Ok(cfg)
        })
        .collect()
}

/// Runs every configuration on its own thread and writes each output file.
pub fn run_sweep(configs: &[RunConfig]) -> Vec<Result<RunResult, SimError>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| {
                scope.spawn(move || {
                    let result = run_benchmark(cfg)?;
                    if let Some(out) = &cfg.out {
                        emit_outputs(&result.rows, out)?;
                    }
                    Ok(result)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    })
}
