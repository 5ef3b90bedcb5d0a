use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use twostroke::analytic::{
    build_affine_maps, derive_params, relaxation_rate, steady_state, thermo_from_states, trajectory, work_closed_form,
    AnalyticInputs, AnalyticParams, ObservableVector,
};
use twostroke::config::EngineConfig;
use twostroke::emit::{emit, Format, Table};
use twostroke::strobe::{Engine, LimitCycleOptions, SolverMethod, DEFAULT_MAX_CYCLES, DEFAULT_TOL};
use twostroke::sweep::{run_sweep, SweepOptions, SweepPlan};
use twostroke::verify::{verify, VerifyOptions};
use twostroke::Error;

/// Stroboscopic two-stroke quantum heat engines.
#[derive(Parser, Debug)]
#[command(name = "twostroke", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-cycle ledger of the transient from the configured initial state.
    Simulate(Common),
    /// Limit-cycle report.
    LimitCycle(Common),
    /// Limit cycles over the config's "sweep" grid.
    Sweep(Common),
    /// Closed-form two-qubit trajectory; summary on stderr.
    Analytic(Common),
    /// Pass/fail table of every thermodynamic invariant.
    Verify(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Engine config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Cycles to run: ledger length for simulate, trajectory length for
    /// analytic, transient for verify, iteration budget otherwise.
    #[arg(long)]
    cycles: Option<usize>,
    /// Limit-cycle tolerance on the trace distance.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = SolverMethod::Spectral)]
    method: SolverMethod,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for sweeps; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

/// Exit status of a failed run.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Spec(_) | Error::Parameter(_) | Error::Layout(_) | Error::Composition(_) => 1,
        Error::Io { .. } | Error::Serialization(_) => 1,
        Error::Convergence { .. } | Error::Degenerate { .. } | Error::Singular(_) | Error::Consistency(_) => 2,
    }
}

fn solver(c: &Common, cfg: &EngineConfig) -> twostroke::Result<LimitCycleOptions> {
    Ok(LimitCycleOptions {
        method: c.method,
        tol: c.tol,
        max_cycles: c.cycles.unwrap_or(DEFAULT_MAX_CYCLES),
        initial: cfg.initial_state()?,
    })
}

fn analytic_params(cfg: &EngineConfig) -> twostroke::Result<AnalyticParams> {
    let base = AnalyticParams::from_spec(&cfg.to_spec()?)?;
    let Some(o) = &cfg.analytic else {
        return Ok(base);
    };
    derive_params(AnalyticInputs {
        lambda: o.lambda,
        p: o.p,
        ..base.inputs
    })
}

fn run(command: &Command) -> twostroke::Result<()> {
    let (Command::Simulate(c) | Command::LimitCycle(c) | Command::Sweep(c) | Command::Analytic(c) | Command::Verify(c)) =
        command;
    let cfg = EngineConfig::load(&c.config)?;
    let table = match command {
        Command::Simulate(_) => {
            let engine = Engine::new(&cfg.to_spec()?)?;
            let rho0 = engine.initial_state(&cfg.initial_state()?)?;
            Table::from(&engine.run_cycles(&rho0, c.cycles.unwrap_or(100), false)?)
        }
        Command::LimitCycle(_) => {
            let report = Engine::new(&cfg.to_spec()?)?.find_limit_cycle(&solver(c, &cfg)?)?;
            Table::from(&report)
        }
        Command::Sweep(_) => {
            let sweep = cfg
                .sweep
                .as_ref()
                .ok_or_else(|| Error::Config("the config has no \"sweep\" block".into()))?;
            let plan = SweepPlan::from_config(cfg.to_spec()?, sweep)?;
            let options = SweepOptions {
                solver: solver(c, &cfg)?,
                jobs: c.jobs,
            };
            run_sweep(&plan, &options)?.to_table()
        }
        Command::Analytic(_) => {
            let spec = cfg.to_spec()?;
            let params = analytic_params(&cfg)?;
            let maps = build_affine_maps(&params);
            let rho0 = Engine::new(&spec)?.initial_state(&cfg.initial_state()?)?;
            let x0 = ObservableVector::from_state(&rho0)?;
            let points = trajectory(&x0, c.cycles.unwrap_or(100), &maps);
            let steady = steady_state(&maps)?;
            let (q_c, q_h, w) = thermo_from_states(&steady.x, &steady.x_tilde, &steady.x, &params);
            eprintln!(
                "lambda {:.12} mu {:.12} Q_C* {q_c:.12e} Q_H* {q_h:.12e} W* {w:.12e} W*(closed form) {:.12e}",
                params.lambda,
                relaxation_rate(&maps),
                work_closed_form(&params)
            );
            Table::from(points.as_slice())
        }
        Command::Verify(_) => {
            let options = VerifyOptions {
                cycles: c.cycles.unwrap_or(VerifyOptions::default().cycles),
                solver: LimitCycleOptions {
                    max_cycles: DEFAULT_MAX_CYCLES,
                    ..solver(c, &cfg)?
                },
            };
            verify(&cfg.to_spec()?, &options)?.to_table()
        }
    };
    match &c.out {
        Some(path) => emit(&table, c.format, path)?,
        None => {
            let text = table.render(c.format)?;
            std::io::stdout()
                .lock()
                .write_all(text.as_bytes())
                .map_err(|e| Error::Serialization(format!("stdout: {e}")))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli.command) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
