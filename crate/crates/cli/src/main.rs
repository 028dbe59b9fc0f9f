//! `crossflow` command-line driver: single runs, parameter sweeps,
//! space-time plots, and post-hoc log verification.
//!
//! Exit codes: 0 success, 1 verification violations or failed sweep
//! points, 2 usage/config errors, 3 solver abort.

use std::path::{Path, PathBuf};
use std::sync::mpsc;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use crossflow_core::config::SimConfig;
use crossflow_core::lane::Lane;
use crossflow_core::metrics::{self, RunSummary};
use crossflow_core::sim::{run_sim_with, SimError, TrajectoryLog};
use crossflow_core::svg;
use crossflow_core::verify::verify_log;

const EXIT_VIOLATIONS: i32 = 1;
const EXIT_USAGE: i32 = 2;
const EXIT_SOLVER_ABORT: i32 = 3;

#[derive(Parser)]
#[command(name = "crossflow", version, about = "Centralized intersection control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write a trajectory log plus a summary row.
    Run(RunArgs),
    /// Run a grid of simulations over radius and s_dist.
    Sweep(SweepArgs),
    /// Render a space-time diagram from a trajectory log.
    PlotSpacetime(PlotArgs),
    /// Check a trajectory log against the safety and consistency invariants.
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Flat key=value config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long = "s-dist")]
    s_dist: Option<f64>,
    #[arg(long = "d-safe")]
    d_safe: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated duration in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Planning horizon in steps.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// Resolve cross-lane passing order from entry times instead of
    /// binary decisions.
    #[arg(long = "fixed-crossing-order")]
    fixed_crossing_order: bool,
}

impl ConfigArgs {
    fn build(&self) -> Result<SimConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                SimConfig::from_str_config(&text).map_err(|e| e.to_string())?
            }
            None => SimConfig::default(),
        };
        if let Some(v) = self.radius {
            cfg.radius = v;
        }
        if let Some(v) = self.s_dist {
            cfg.s_dist = v;
        }
        if let Some(v) = self.d_safe {
            cfg.d_safe = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.duration {
            cfg.duration = v;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if self.fixed_crossing_order {
            cfg.fixed_crossing_order = true;
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory for the log and summary.
    #[arg(long = "out-dir", default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated radius grid, e.g. 25,40,60,90,120,150,180.
    #[arg(long, value_delimiter = ',', required = true)]
    radii: Vec<f64>,
    /// Comma-separated s_dist grid, e.g. 4,5,6.
    #[arg(long = "s-dists", value_delimiter = ',', required = true)]
    s_dists: Vec<f64>,
    #[arg(long = "out-dir", default_value = "out")]
    out_dir: PathBuf,
    /// Concurrent sweep points.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct PlotArgs {
    /// Trajectory log to plot.
    log: PathBuf,
    /// Lane to plot: ns or we.
    #[arg(long, default_value = "ns")]
    lane: String,
    /// Output SVG path (defaults next to the log).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Trajectory log to check.
    log: PathBuf,
}

fn main() {
    env_logger::Builder::new()
        .parse_filters(
            &std::env::var("CROSSFLOW_LOG_LEVEL").unwrap_or_else(|_| "info".into()),
        )
        .init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::PlotSpacetime(args) => cmd_plot(&args),
        Command::Verify(args) => cmd_verify(&args),
    };
    std::process::exit(code);
}

fn usage_error(msg: &str) -> i32 {
    eprintln!("error: {msg}");
    EXIT_USAGE
}

fn point_stem(cfg: &SimConfig) -> String {
    format!("run_r{}_s{}_seed{}", cfg.radius, cfg.s_dist, cfg.seed)
}

/// Run one point, write its log, and report the summary.
fn run_point(cfg: &SimConfig, out_dir: &Path) -> Result<RunSummary, (String, i32)> {
    let stem = point_stem(cfg);
    let progress_every = (cfg.n_ticks() / 10).max(1);
    let result = run_sim_with(cfg, |t| {
        if t.t % progress_every == 0 {
            info!(
                "[{stem}] tick {}/{} in_region {} solver {:.3}s",
                t.t,
                cfg.n_ticks(),
                t.in_region,
                t.solver_wall_time
            );
        }
    });
    match result {
        Ok(log) => {
            let log_path = out_dir.join(format!("{stem}.json"));
            log.write_file(&log_path)
                .map_err(|e| (format!("writing {}: {e}", log_path.display()), EXIT_USAGE))?;
            info!("[{stem}] log written to {}", log_path.display());
            Ok(RunSummary::from_log(&log))
        }
        Err(SimError::SolverAbort { tick, detail, scene_json, problem_dump }) => {
            let scene_path = out_dir.join(format!("{stem}_abort_tick{tick}_scene.json"));
            let model_path = out_dir.join(format!("{stem}_abort_tick{tick}_model.lp"));
            let _ = std::fs::write(&scene_path, scene_json);
            let _ = std::fs::write(&model_path, problem_dump);
            Err((
                format!(
                    "solver abort at tick {tick}: {detail}; diagnostics at {} and {}",
                    scene_path.display(),
                    model_path.display()
                ),
                EXIT_SOLVER_ABORT,
            ))
        }
        Err(e) => Err((e.to_string(), EXIT_SOLVER_ABORT)),
    }
}

fn cmd_run(args: &RunArgs) -> i32 {
    let cfg = match args.config.build() {
        Ok(c) => c,
        Err(e) => return usage_error(&e),
    };
    if let Err(e) = std::fs::create_dir_all(&args.out_dir) {
        return usage_error(&format!("cannot create {}: {e}", args.out_dir.display()));
    }
    match run_point(&cfg, &args.out_dir) {
        Ok(summary) => {
            if summary.agents_completed == 0 {
                warn!("no completed agents; average_delay has no data");
            }
            let csv_path = args.out_dir.join(format!("{}.csv", point_stem(&cfg)));
            let text = format!("{}\n{}\n", metrics::CSV_HEADER, summary.to_csv_row());
            if let Err(e) = std::fs::write(&csv_path, text) {
                return usage_error(&format!("writing {}: {e}", csv_path.display()));
            }
            println!("{}", metrics::CSV_HEADER);
            println!("{}", summary.to_csv_row());
            0
        }
        Err((msg, code)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

fn cmd_sweep(args: &SweepArgs) -> i32 {
    let base = match args.config.build() {
        Ok(c) => c,
        Err(e) => return usage_error(&e),
    };
    if args.radii.is_empty() || args.s_dists.is_empty() {
        return usage_error("sweep grids must be non-empty");
    }
    if args.radii.iter().chain(args.s_dists.iter()).any(|&v| v <= 0.0) {
        return usage_error("sweep values must be positive");
    }
    if let Err(e) = std::fs::create_dir_all(&args.out_dir) {
        return usage_error(&format!("cannot create {}: {e}", args.out_dir.display()));
    }

    // Same seed everywhere so every point sees the same spawn stream.
    let mut grid: Vec<SimConfig> = Vec::new();
    for &r in &args.radii {
        for &s in &args.s_dists {
            let mut cfg = base.clone();
            cfg.radius = r;
            cfg.s_dist = s;
            if let Err(e) = cfg.validate() {
                return usage_error(&format!("grid point r={r} s={s}: {e}"));
            }
            grid.push(cfg);
        }
    }

    let workers = args.workers.max(1).min(grid.len());
    let (tx, rx) = mpsc::channel::<(usize, Result<RunSummary, (String, i32)>)>();
    let jobs = std::sync::Mutex::new(grid.iter().cloned().enumerate().collect::<Vec<_>>());
    let out_dir = args.out_dir.clone();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let jobs = &jobs;
            let out_dir = out_dir.clone();
            scope.spawn(move || loop {
                let job = jobs.lock().unwrap().pop();
                match job {
                    Some((idx, cfg)) => {
                        let res = run_point(&cfg, &out_dir);
                        if tx.send((idx, res)).is_err() {
                            break;
                        }
                    }
                    None => break,
                }
            });
        }
    });
    drop(tx);

    let mut summaries: Vec<Option<RunSummary>> = vec![None; grid.len()];
    let mut failed = false;
    for (idx, res) in rx {
        summaries[idx] = Some(match res {
            Ok(s) => s,
            Err((msg, _)) => {
                eprintln!("error: point r={} s={}: {msg}", grid[idx].radius, grid[idx].s_dist);
                failed = true;
                RunSummary::failed(grid[idx].radius, grid[idx].s_dist, grid[idx].seed, "abort")
            }
        });
    }
    let rows: Vec<RunSummary> = summaries.into_iter().map(|s| s.unwrap()).collect();

    let mut csv = String::from(metrics::CSV_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.to_csv_row());
        csv.push('\n');
    }
    let csv_path = args.out_dir.join("sweep.csv");
    if let Err(e) = std::fs::write(&csv_path, &csv) {
        return usage_error(&format!("writing {}: {e}", csv_path.display()));
    }
    let radius_svg = args.out_dir.join("delay_vs_radius.svg");
    let sdist_svg = args.out_dir.join("delay_vs_s_dist.svg");
    if let Err(e) = std::fs::write(&radius_svg, svg::delay_vs_radius_svg(&rows))
        .and_then(|_| std::fs::write(&sdist_svg, svg::delay_vs_s_dist_svg(&rows)))
    {
        return usage_error(&format!("writing charts: {e}"));
    }
    print!("{csv}");
    info!(
        "sweep complete: {} points, outputs in {}",
        rows.len(),
        args.out_dir.display()
    );
    if failed {
        EXIT_SOLVER_ABORT
    } else {
        0
    }
}

fn cmd_plot(args: &PlotArgs) -> i32 {
    let lane: Lane = match args.lane.parse() {
        Ok(l) => l,
        Err(e) => return usage_error(&e),
    };
    let log = match TrajectoryLog::read_file(&args.log) {
        Ok(l) => l,
        Err(e) => return usage_error(&format!("reading {}: {e}", args.log.display())),
    };
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.log.with_extension(format!("{lane}.svg")));
    if let Err(e) = std::fs::write(&out, svg::spacetime_svg(&log, lane)) {
        return usage_error(&format!("writing {}: {e}", out.display()));
    }
    println!("{}", out.display());
    0
}

fn cmd_verify(args: &VerifyArgs) -> i32 {
    let log = match TrajectoryLog::read_file(&args.log) {
        Ok(l) => l,
        Err(e) => return usage_error(&format!("reading {}: {e}", args.log.display())),
    };
    let report = verify_log(&log);
    if report.is_empty() {
        println!("clean: no violations");
        0
    } else {
        for v in &report {
            println!("{v}");
        }
        eprintln!("{} violation(s)", report.len());
        EXIT_VIOLATIONS
    }
}
