use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phenoflow::experiments::verify::{SWEEP_EPSILONS, SWEEP_GAMMAS};
use phenoflow::experiments::{
    epsilon_sweep, gamma_sweep, parse_config, write_trajectory, RunConfig, SweepOptions, SweepResult, Verifier,
    VerifyOptions,
};
use phenoflow::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

#[derive(Parser)]
#[command(name = "phenoflow", version, about = "Phenotype-structured tumour growth simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write snapshots and diagnostics.
    Run {
        #[command(flatten)]
        io: IoArgs,
    },
    /// Repeat a run over pressure exponents.
    GammaSweep {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long, value_delimiter = ',', default_values_t = SWEEP_GAMMAS)]
        gammas: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Repeat a run over viscosities and compare against ε = 0.
    EpsilonSweep {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long, value_delimiter = ',', default_values_t = SWEEP_EPSILONS)]
        epsilons: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Run the acceptance suite against a directory of reference configs.
    Verify {
        #[arg(long, default_value = "configs")]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

#[derive(Args)]
struct IoArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output.dir`, then
    /// `$PHENOFLOW_OUT/<config name>`, then `out/<config name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "PHENOFLOW_OUT", hide_env_values = true)]
    out_root: Option<PathBuf>,
}

impl IoArgs {
    fn load(&self) -> Result<(RunConfig, PathBuf), Error> {
        let cfg = parse_config(&self.config)?;
        let out = match (&self.out, &cfg.output.dir) {
            (Some(o), _) => o.clone(),
            (None, Some(d)) => cfg.resolve(d),
            (None, None) => {
                let stem = self.config.file_stem().unwrap_or_default();
                self.out_root.clone().unwrap_or_else(|| PathBuf::from("out")).join(stem)
            }
        };
        Ok((cfg, out))
    }
}

fn exit_for(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(if err.is_runtime() { EXIT_RUNTIME } else { EXIT_VALIDATION })
}

fn run(io: &IoArgs) -> Result<(), Error> {
    let (cfg, out) = io.load()?;
    let prepared = cfg.prepare()?;
    let trajectory = prepared.solver.run(&prepared.n0)?;
    write_trajectory(&out, &trajectory, &prepared.solver.grid)?;
    let s = &trajectory.stats;
    println!(
        "{} steps to t = {}, mass {:.6e} -> {:.6e}, max sup ρ {:.6e}; wrote {}",
        s.steps,
        trajectory.t_end,
        s.initial_mass,
        s.final_mass,
        s.max_sup_rho,
        out.display()
    );
    if s.boundary_contacts > 0 {
        eprintln!("warning: support touched the boundary in {} steps", s.boundary_contacts);
    }
    Ok(())
}

fn report(result: &SweepResult, out: &Path) -> ExitCode {
    for row in &result.rows {
        match &row.outcome {
            Ok(m) => println!(
                "{:>10}  saturation {:.4e}  complementarity {:.4e}  ∬|∇p|⁴ {:.4e}  ∬p|D²p|² {:.4e}{}",
                row.value,
                m.saturation_residual,
                m.complementarity_residual,
                m.grad_p_l4_integral,
                m.hessian_integral,
                match (m.rho_l1_diff, m.v_l2_diff) {
                    (Some(r), Some(v)) => format!("  ‖Δρ‖₁ {r:.4e}  ‖Δv‖₂ {v:.4e}"),
                    _ => String::new(),
                }
            ),
            Err(e) => eprintln!("{:>10}  failed: {e}", row.value),
        }
    }
    println!("wrote {}", out.display());
    if result.all_ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_RUNTIME)
    }
}

fn sweep(
    io: &IoArgs,
    values: &[f64],
    jobs: usize,
    f: fn(&RunConfig, &[f64], &SweepOptions) -> phenoflow::Result<SweepResult>,
) -> ExitCode {
    let (cfg, out) = match io.load() {
        Ok(v) => v,
        Err(e) => return exit_for(&e),
    };
    let opts = SweepOptions {
        jobs,
        out: Some(out.clone()),
    };
    match f(&cfg, values, &opts) {
        Ok(result) => report(&result, &out),
        Err(e) => exit_for(&e),
    }
}

fn verify(config: PathBuf, jobs: usize) -> ExitCode {
    let mut opts = VerifyOptions::new(config);
    opts.jobs = jobs;
    let verifier = match Verifier::new(opts) {
        Ok(v) => v,
        Err(e) => return exit_for(&e),
    };
    let outcomes = verifier.run_with(|o| println!("{o}"));
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed; {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ACCEPTANCE)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { io } => match run(&io) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => exit_for(&e),
        },
        Command::GammaSweep { io, gammas, jobs } => sweep(&io, &gammas, jobs, gamma_sweep),
        Command::EpsilonSweep { io, epsilons, jobs } => sweep(&io, &epsilons, jobs, epsilon_sweep),
        Command::Verify { config, jobs } => verify(config, jobs),
    }
}
