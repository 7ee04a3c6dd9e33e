use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use netsched::harness::config::{Experiment, RunConfig};
use netsched::harness::generate::{gen_network, GeometryParams, DEFAULT_LINK_LENGTH};
use netsched::harness::report::{report, DEFAULT_WINDOW};
use netsched::harness::run::simulate_many;
use netsched::objective::UncertainParams;
use netsched::scheduler::SchedulerOptions;
use netsched::solver::{
    check_feasibility_bound, check_pen_dominance, solve_opt_exact_small, solve_pen_fw, FwOptions,
    StepRule, DEFAULT_FW_ITERATIONS, DEFAULT_FW_TOLERANCE, MAX_EXACT_MODES,
};

#[derive(Parser)]
#[command(name = "netsched", version, about = "Primal-dual wireless link scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Step {
    OpenLoop,
    Pairwise,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random geometric network file.
    GenNetwork {
        #[arg(long, default_value_t = 7)]
        links: usize,
        #[arg(long, default_value_t = 0.3)]
        radius: f64,
        #[arg(long, default_value_t = DEFAULT_LINK_LENGTH)]
        link_length: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one or more configs; several run in parallel.
    Simulate {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        slots: Option<u64>,
        /// Output directory (only with a single config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        oracle: Option<Switch>,
    },
    /// Solve the static problem on the config's true parameters.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_FW_ITERATIONS)]
        iters: u64,
        #[arg(long, default_value_t = DEFAULT_FW_TOLERANCE)]
        tol: f64,
        /// Step rule: `2/(k+2)` or pairwise steps with line search.
        #[arg(long, value_enum, default_value = "open-loop")]
        step: Step,
    },
    /// Write plot data for a finished run.
    Report {
        /// Run directory.
        #[arg(long)]
        run: PathBuf,
        /// Output directory (defaults to the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: u64,
    },
}

#[derive(Serialize)]
struct SolveReport {
    config_hash: String,
    iterations: u64,
    converged: bool,
    g_star: f64,
    f_at_x_star: f64,
    penalty_at_star: f64,
    gap: f64,
    lower_bound: f64,
    residual_norm: f64,
    residual_bound: f64,
    f_opt: Option<f64>,
    f_opt_tightened: Option<f64>,
    dominance_margin: Option<f64>,
    sensitivity_bound: Option<f64>,
    x_star: Vec<Vec<f64>>,
    z_star: Vec<f64>,
}

fn load(path: &Path, seed: Option<u64>, slots: Option<u64>, oracle: Option<Switch>, out: Option<&Path>) -> Result<Experiment> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = RunConfig::from_toml_str(&text).with_context(|| format!("in {}", path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(s) = slots {
        if s == 0 {
            bail!("--slots must be at least 1");
        }
        cfg.slots = s;
    }
    if let Some(o) = oracle {
        cfg.oracle = matches!(o, Switch::On);
    }
    if let Some(out) = out {
        cfg.output.dir = std::env::current_dir()?.join(out);
    }
    let base = path.parent().unwrap_or(Path::new("."));
    Experiment::build(cfg, base).with_context(|| format!("in {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenNetwork {
            links,
            radius,
            link_length,
            seed,
            out,
        } => {
            let net = gen_network(&GeometryParams {
                links,
                radius,
                link_length,
                seed,
            })?;
            let text = net.to_toml_string()?;
            match out {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
        }
        Command::Simulate {
            configs,
            seed,
            slots,
            out,
            oracle,
        } => {
            if out.is_some() && configs.len() > 1 {
                bail!("--out applies to a single --config");
            }
            let exps = configs
                .iter()
                .map(|c| load(c, seed, slots, oracle, out.as_deref()))
                .collect::<Result<Vec<_>>>()?;
            let mut failed = false;
            for (exp, res) in exps.iter().zip(simulate_many(&exps, SchedulerOptions::default())) {
                match res {
                    Ok(s) => {
                        print!("{}: T={} f={} max_queue={}", exp.out_dir.display(), s.slots, s.f, s.max_queue);
                        if let Some(o) = &s.oracle {
                            print!(" f_oracle={} rel_gap={:.4}", o.f_true, o.relative_cost_gap);
                        }
                        println!();
                    }
                    Err(e) => {
                        eprintln!("{}: {e}", exp.out_dir.display());
                        failed = true;
                    }
                }
            }
            if failed {
                bail!("one or more runs failed");
            }
        }
        Command::Solve {
            config,
            out,
            iters,
            tol,
            step,
        } => {
            let exp = load(&config, None, None, None, out.as_deref())?;
            let y = UncertainParams::new(exp.pi_true.clone(), exp.arrivals.rates())?;
            let res = solve_pen_fw(
                &exp.objective,
                &y,
                FwOptions {
                    max_iterations: iters,
                    tolerance: tol,
                    trace_every: 100,
                    step: match step {
                        Step::OpenLoop => StepRule::OpenLoop,
                        Step::Pairwise => StepRule::PairwiseLineSearch,
                    },
                },
            )?;
            let feas = check_feasibility_bound(&res, &exp.objective, &y)?;
            let modes: usize = exp.network.mode_counts().iter().sum();
            let exact = if modes <= MAX_EXACT_MODES {
                Some(solve_opt_exact_small(&exp.objective, &y)?)
            } else {
                None
            };
            let eps = exp.objective.penalty_config().epsilon;
            let report = SolveReport {
                config_hash: exp.config_hash.clone(),
                iterations: res.iterations,
                converged: res.converged,
                g_star: res.g_star,
                f_at_x_star: res.f_at_x_star,
                penalty_at_star: res.penalty_at_star,
                gap: res.gap,
                lower_bound: res.lower_bound,
                residual_norm: feas.norm,
                residual_bound: feas.bound,
                f_opt: exact.as_ref().map(|e| e.f0),
                f_opt_tightened: exact.as_ref().map(|e| e.f_eps),
                dominance_margin: exact.as_ref().map(|e| check_pen_dominance(&res, e.f_eps, 1e-6).margin),
                sensitivity_bound: exact.as_ref().map(|e| e.sensitivity_bound(eps)),
                x_star: res.x_star.blocks().to_vec(),
                z_star: res.z_star.as_slice().to_vec(),
            };
            let text = toml::to_string(&report)?;
            fs::create_dir_all(&exp.out_dir)?;
            fs::write(exp.out_dir.join("solve.toml"), &text)?;
            let mut w = csv::Writer::from_path(exp.out_dir.join("fw_trace.csv"))?;
            for row in &res.trace {
                w.serialize(row)?;
            }
            w.flush()?;
            print!("{text}");
        }
        Command::Report { run, out, window } => {
            let out = out.unwrap_or_else(|| run.clone());
            let files = report(&run, &out, window)?;
            println!(
                "wrote {} and {} ({} rows)",
                files.cost.display(),
                files.sources.display(),
                files.rows
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
