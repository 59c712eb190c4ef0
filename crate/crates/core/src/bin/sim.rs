use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use synthsim::harness::sweep::rows_from_outcomes;
use synthsim::harness::{
    heatmap_optimal_p, run_simulation, sweep_parameters, write_json, Axis, Composition, CsvSink,
    HeatmapPlan, SimConfig, SweepPlan,
};
use synthsim::TaskKind;

#[derive(Parser)]
#[command(name = "sim", version, about = "Run the network simulator, parameter sweeps and heatmaps")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output formats; may be repeated or comma separated.
    #[arg(long, global = true, value_delimiter = ',', default_values = ["csv", "json"])]
    emit: Vec<Emit>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Regression,
    Classification,
}

impl From<Task> for TaskKind {
    fn from(t: Task) -> Self {
        match t {
            Task::Regression => TaskKind::Regression,
            Task::Classification => TaskKind::Classification,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    P,
    Alpha,
    Pi,
    Pf,
    Pr,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::P => Axis::P,
            AxisArg::Alpha => Axis::Alpha,
            AxisArg::Pi => Axis::Pi,
            AxisArg::Pf => Axis::Pf,
            AxisArg::Pr => Axis::Pr,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and print or save its per-epoch series.
    Run {
        #[arg(long, value_enum)]
        task: Option<Task>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// TOML configuration; command-line flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory; rows go to stdout as CSV when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one parameter over its standard grid and the compositions.
    Sweep {
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// File with one `N_i,N_f,N_r` triple per line; the standard six
        /// when absent.
        #[arg(long)]
        compositions: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Median optimal slope over inferer and forecaster counts.
    Heatmap {
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 400)]
        epochs: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<SimConfig> {
    match path {
        Some(p) => Ok(SimConfig::load(p)?),
        None => Ok(SimConfig::default()),
    }
}

/// Parses `N_i,N_f,N_r` lines; blank lines and `#` comments are skipped.
fn read_compositions(path: &Path) -> Result<Vec<Composition>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<usize> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("{}:{}: expected three integers", path.display(), lineno + 1))?;
        if parts.len() != 3 {
            anyhow::bail!("{}:{}: expected N_i,N_f,N_r", path.display(), lineno + 1);
        }
        out.push(Composition::new(parts[0], parts[1], parts[2])?);
    }
    if out.is_empty() {
        anyhow::bail!("{}: no compositions", path.display());
    }
    Ok(out)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn run(cli: &Cli) -> Result<()> {
    let csv = cli.emit.contains(&Emit::Csv);
    let json = cli.emit.contains(&Emit::Json);
    match &cli.command {
        Command::Run {
            task,
            epochs,
            seed,
            config,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(t) = task {
                cfg.task = (*t).into();
            }
            if let Some(n) = epochs {
                cfg.n_epochs = *n;
            }
            if let Some(s) = seed {
                cfg.seed = *s;
            }
            cfg.validate()?;
            let outcomes = run_simulation(&cfg)?;
            let rows = rows_from_outcomes(cfg.task, "p", cfg.params.p, cfg.composition, cfg.seed, &outcomes);
            match out {
                None => {
                    let stdout = std::io::stdout();
                    if json && !csv {
                        serde_json::to_writer_pretty(stdout.lock(), &outcomes)?;
                        writeln!(stdout.lock())?;
                    } else {
                        let mut sink = CsvSink::from_writer(Path::new("<stdout>"), stdout.lock())?;
                        sink.append(&rows)?;
                        sink.finish()?.flush()?;
                    }
                }
                Some(dir) => {
                    create_dir(dir)?;
                    if csv {
                        let mut sink = CsvSink::create(&dir.join("rows.csv"))?;
                        sink.append(&rows)?;
                        sink.finish()?;
                    }
                    if json {
                        write_json(&dir.join("outcomes.json"), &outcomes)?;
                    }
                    write_json(&dir.join("config.json"), &cfg)?;
                }
            }
        }
        Command::Sweep {
            task,
            axis,
            compositions,
            seeds,
            epochs,
            config,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            cfg.task = (*task).into();
            if let Some(n) = epochs {
                cfg.n_epochs = *n;
            }
            if let Some(path) = compositions {
                cfg.compositions = read_compositions(path)?;
            }
            cfg.validate()?;
            let axis: Axis = (*axis).into();
            let plan = SweepPlan::standard(cfg, axis, *seeds);
            create_dir(out)?;
            let stem = format!("sweep_{}_{}", plan.base.task, axis.column_name());
            let mut sink = if csv {
                Some(CsvSink::create(&out.join(format!("{stem}.csv")))?)
            } else {
                None
            };
            eprintln!(
                "sweep {stem}: {} runs, {} rows expected",
                plan.cells().len(),
                plan.expected_rows()
            );
            let result = sweep_parameters(&plan, |rows| match sink.as_mut() {
                Some(s) => s.append(rows),
                None => Ok(()),
            })?;
            if let Some(s) = sink {
                s.finish()?;
            }
            if json {
                write_json(&out.join(format!("{stem}_aggregates.json")), &result.aggregates()?)?;
            }
            if !result.failures.is_empty() {
                write_json(&out.join(format!("{stem}_failures.json")), &result.failures)?;
                eprintln!("{} runs failed; see {stem}_failures.json", result.failures.len());
            }
        }
        Command::Heatmap {
            task,
            seeds,
            epochs,
            config,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            cfg.task = (*task).into();
            cfg.n_epochs = *epochs;
            cfg.validate()?;
            let plan = HeatmapPlan::standard(cfg, *seeds);
            let map = heatmap_optimal_p(&plan)?;
            create_dir(out)?;
            write_json(&out.join(format!("heatmap_{}.json", map.task)), &map)?;
            eprintln!("grand mean optimal p: {:.4}", map.grand_mean);
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    run(&cli)
}
