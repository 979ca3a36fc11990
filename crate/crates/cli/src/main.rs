use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use homog_core::effective::EffectiveModel;
use homog_core::fine::{solve_fine, FineProblem};
use homog_core::harness::pipeline::run_cell_stage;
use homog_core::harness::report::read_report_json;
use homog_core::harness::{
    emit_report, load_config, resolve_workers, run_pipeline_with, ReportFormat, SweepConfig, WORKERS_ENV,
};
use homog_core::homogenized::{solve_homogenized, MacroProblem};
use homog_core::io::{write_cell_field, write_wave_field};
use homog_core::wave::relative_mass_drift;

#[derive(Parser)]
#[command(
    name = "homog",
    version,
    about = "Periodic homogenization studies for oscillatory Schrödinger equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Sweep configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output.dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, help = format!("Concurrent per-eps pipelines (0 = all cores); overrides {WORKERS_ENV}"))]
    workers: Option<usize>,
    /// Seed for the random diagnostic test functions.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<SweepConfig> {
        let mut cfg = load_config(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the cell problems and write the correctors and eta.
    Cell(Common),
    /// Compute the effective model and write `effective.toml`.
    Effective(Common),
    /// Solve the oscillatory problem at one eps.
    SolveFine {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: f64,
    },
    /// Solve the homogenized problem on the fine grid of one eps.
    SolveHomog {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: f64,
        /// Effective model written by `effective`; computed when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run the full eps sweep and write the report files.
    Sweep(Common),
    /// Re-emit report files from a `report.json`.
    Report {
        /// Path to `report.json`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// One or more of csv, text, json.
        #[arg(long, value_delimiter = ',', default_value = "csv,text")]
        format: Vec<String>,
    },
}

fn fine_problem(cfg: &SweepConfig, epsilon: f64) -> Result<FineProblem> {
    let p = &cfg.problem;
    let rule = cfg.resolution.rule();
    if rule.interior_points(epsilon) > cfg.resolution.max_interior_points {
        bail!(
            "eps = {epsilon} needs more than {} interior points per axis",
            cfg.resolution.max_interior_points
        );
    }
    Ok(FineProblem::resolved(
        p.dim,
        epsilon,
        p.horizon,
        p.coefficient.clone(),
        p.potential.clone(),
        p.source.clone(),
        p.initial.clone(),
        rule,
    )?)
}

fn write_model(path: &Path, model: &EffectiveModel) -> Result<()> {
    std::fs::write(path, model.to_toml()).with_context(|| format!("writing {}", path.display()))
}

fn print_model(model: &EffectiveModel) {
    println!("q  = {:?}", model.q);
    println!("b  = {:?}", model.b);
    println!("mu = {:.16e}", model.mu);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Cell(common) => {
            let cfg = common.load()?;
            let cell = run_cell_stage(&cfg)?;
            let dir = cfg.output.dir;
            for (l, chi) in cell.solution.correctors.components().iter().enumerate() {
                let name = format!("chi_{l}");
                write_cell_field(dir.join(format!("{name}.bin")), &name, chi)?;
            }
            write_cell_field(dir.join("eta.bin"), "eta", cell.solution.eta.field())?;
            let c = cell.coefficient_diagnostics;
            println!("coefficient range [{:.6}, {:.6}]", c.alpha_eff, c.c1);
            println!("potential sup norm {:.6}", cell.potential_diagnostics.sup_norm);
            println!("wrote {}", dir.display());
        }
        Command::Effective(common) => {
            let cfg = common.load()?;
            let cell = run_cell_stage(&cfg)?;
            std::fs::create_dir_all(&cfg.output.dir)?;
            let path = cfg.output.dir.join("effective.toml");
            write_model(&path, &cell.solution.model)?;
            print_model(&cell.solution.model);
            println!("wrote {}", path.display());
        }
        Command::SolveFine { common, epsilon } => {
            let cfg = common.load()?;
            let p = fine_problem(&cfg, epsilon)?;
            let u = solve_fine(&p)?;
            let path = cfg.output.dir.join(format!("fine_eps_{epsilon}.bin"));
            write_wave_field(&path, &u)?;
            println!(
                "n = {}, steps = {}, relative mass drift {:.3e}",
                p.grid.n,
                p.grid.steps,
                relative_mass_drift(&u)
            );
            println!("wrote {}", path.display());
        }
        Command::SolveHomog {
            common,
            epsilon,
            model,
        } => {
            let cfg = common.load()?;
            let model = match model {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    EffectiveModel::from_toml(&text)?
                }
                None => {
                    let cell = run_cell_stage(&cfg)?;
                    cell.solution.model
                }
            };
            let fine = fine_problem(&cfg, epsilon)?;
            let u0 = solve_homogenized(&MacroProblem {
                model,
                grid: fine.grid,
                source: cfg.problem.source.clone(),
                initial: cfg.problem.initial.clone(),
            })?;
            let path = cfg.output.dir.join(format!("homogenized_eps_{epsilon}.bin"));
            write_wave_field(&path, &u0)?;
            println!("relative mass drift {:.3e}", relative_mass_drift(&u0));
            println!("wrote {}", path.display());
        }
        Command::Sweep(common) => {
            let cfg = common.load()?;
            let workers = resolve_workers(common.workers, cfg.run.workers);
            let report = run_pipeline_with(&cfg, workers)?;
            let files = emit_report(&report, &cfg.output.dir, &ReportFormat::ALL)?;
            print!("{}", homog_core::harness::report::summary_text(&report));
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Report { input, out, format } => {
            let formats = format
                .iter()
                .map(|f| f.parse::<ReportFormat>())
                .collect::<Result<Vec<_>, _>>()?;
            let report = read_report_json(&input)?;
            for f in emit_report(&report, &out, &formats)? {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
