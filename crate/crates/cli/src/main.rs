use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use magstrict::error::ErrorClass;
use magstrict::mesh::{build_structured_mesh, check_angle_condition};
use magstrict::sim::{emit_outputs, run_benchmark, run_sweep, sweep_configs, BlowUp, RunConfig, RunResult};
use magstrict::SimError;

#[derive(Parser)]
#[command(name = "magstrict", version, about = "LLG / elastodynamics simulations with magnetostriction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation.
    Run {
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Report size and angle condition of the structured mesh at level r.
    CheckMesh {
        #[arg(long)]
        r: i64,
    },
    /// Run one simulation per value of a config key, in parallel.
    Sweep {
        #[command(flatten)]
        opts: RunOpts,
        /// `key=v1,v2,...`
        #[arg(long)]
        vary: String,
    },
}

#[derive(Args)]
struct RunOpts {
    /// Config file of `key=value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mesh level; grid spacing 2^-r.
    #[arg(long)]
    r: Option<i64>,
    /// `tangent` or `midpoint`.
    #[arg(long)]
    scheme: Option<String>,
    /// Time step.
    #[arg(long)]
    k: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    final_time: Option<f64>,
    /// Gilbert damping.
    #[arg(long)]
    alpha: Option<f64>,
    /// Implicitness of the exchange term, in [0, 1].
    #[arg(long)]
    theta: Option<f64>,
    /// Diagonal elastic constant.
    #[arg(long = "Ce")]
    ce: Option<f64>,
    /// Diagonal magnetostrictive constant.
    #[arg(long = "Cm")]
    cm: Option<f64>,
    /// Exchange constant.
    #[arg(long = "Cexch")]
    cexch: Option<f64>,
    /// Sharpness of the initial magnetization.
    #[arg(long)]
    s: Option<f64>,
    /// CSV output path; a plotting script is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunOpts {
    fn config(&self) -> Result<RunConfig, SimError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        for kv in &self.set {
            let (key, value) =
                kv.split_once('=').ok_or_else(|| SimError::Config(format!("--set expects key=value, got {kv:?}")))?;
            cfg.set(key.trim(), value)?;
        }
        let numeric = [
            ("k", self.k),
            ("T", self.final_time),
            ("alpha", self.alpha),
            ("theta", self.theta),
            ("Ce", self.ce),
            ("Cm", self.cm),
            ("Cexch", self.cexch),
            ("s", self.s),
        ];
        for (key, value) in numeric {
            if let Some(v) = value {
                cfg.set(key, &format!("{v:?}"))?;
            }
        }
        if let Some(r) = self.r {
            cfg.r = r;
        }
        if let Some(scheme) = &self.scheme {
            cfg.set("scheme", scheme)?;
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn describe(blow_up: &BlowUp) -> String {
    match blow_up {
        BlowUp::None => "none".into(),
        BlowUp::At(t) => format!("{t:.6}"),
        BlowUp::NotBefore(t) => format!("> {t:.6} (still growing at the final time)"),
    }
}

fn report(cfg: &RunConfig, result: &RunResult) -> anyhow::Result<()> {
    for msg in &result.advisories {
        eprintln!("warning: {msg}");
    }
    let last = result.rows.last().context("run produced no diagnostics")?;
    println!("steps: {}", result.final_state.step);
    println!("final time: {:.6e}", last.t);
    println!("exchange energy: {:.10e}", last.e_exchange);
    println!("max modulus deviation: {:.3e}", result.rows.iter().map(|r| r.mod_dev).fold(0.0, f64::max));
    println!("blow-up time: {}", describe(&result.blow_up));
    if let Some(out) = &cfg.out {
        for path in emit_outputs(&result.rows, out)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<SimError>().map(SimError::class) {
        Some(ErrorClass::Config) => 2,
        Some(ErrorClass::Solver) => 3,
        Some(ErrorClass::Invariant) => 4,
        Some(ErrorClass::Io) | None => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { opts } => {
            let cfg = opts.config()?;
            let result = run_benchmark(&cfg)?;
            report(&cfg, &result)
        }
        Command::CheckMesh { r } => {
            let mesh = build_structured_mesh(r).map_err(SimError::from)?;
            let angle = check_angle_condition(&mesh).map_err(SimError::from)?;
            println!("level: {r}");
            println!("nodes: {}", mesh.n_nodes());
            println!("elements: {}", mesh.n_elements());
            println!("h_max: {:.6e}", mesh.h_max());
            println!("largest off-diagonal stiffness entry: {:.6e}", angle.worst_offdiag);
            if angle.pass {
                println!("angle condition: pass");
                Ok(())
            } else {
                println!("angle condition: FAIL at pair {:?}", angle.worst_pair);
                Err(SimError::Invariant(format!("angle condition fails on level {r}")).into())
            }
        }
        Command::Sweep { opts, vary } => {
            let base = opts.config()?;
            let (key, values) = vary
                .split_once('=')
                .ok_or_else(|| SimError::Config(format!("--vary expects key=v1,v2,..., got {vary:?}")))?;
            let values: Vec<String> = values.split(',').map(|v| v.trim().to_owned()).collect();
            let configs = sweep_configs(&base, key.trim(), &values)?;
            let mut first_err = None;
            for ((value, cfg), result) in values.iter().zip(&configs).zip(run_sweep(&configs)) {
                match result {
                    Ok(res) => {
                        let out = cfg.out.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "-".into());
                        println!("{key}={value}: blow-up time {} ({out})", describe(&res.blow_up));
                    }
                    Err(e) => {
                        println!("{key}={value}: failed: {e}");
                        first_err.get_or_insert(e);
                    }
                }
            }
            match first_err {
                Some(e) => Err(e.into()),
                None => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
