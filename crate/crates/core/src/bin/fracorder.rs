use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use fracorder::config::{load_configs, ScenarioConfig};
use fracorder::run::{cost_curve_csv, emit, run, scan, Format};
use fracorder::verify::run_checks;
use fracorder::{Error, Result};

/// Exit status for configuration, I/O and numerical errors.
const EXIT_ERROR: u8 = 1;

#[derive(Parser)]
#[command(
    name = "fracorder",
    version,
    about = "Identify the fractional order s of ∂_t y + L^s y = f"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize s for each scenario and write artifacts.
    Run {
        /// Scenario file (one object or an array); repeatable.
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "csv,json")]
        formats: Vec<String>,
        /// Override the number of scan grid points.
        #[arg(long)]
        grid: Option<usize>,
        /// Override the truncation J_max.
        #[arg(long)]
        jmax: Option<usize>,
    },
    /// Cost curve only, on a log grid.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        s_min: f64,
        #[arg(long)]
        s_max: f64,
        #[arg(long)]
        points: usize,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in self-checks.
    Verify,
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("FRACORDER_THREADS") else {
        return Ok(());
    };
    let n: usize =
        raw.trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidArgument {
                name: "FRACORDER_THREADS",
                reason: format!("expected a positive integer, got `{raw}`"),
            })?;
    // Fails only if a pool already exists, which cannot happen here.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn apply_overrides(
    mut c: ScenarioConfig,
    grid: Option<usize>,
    jmax: Option<usize>,
) -> Result<ScenarioConfig> {
    if let Some(n) = jmax {
        c = c.with_j_max(n)?;
    }
    if let Some(n) = grid {
        c = c.with_grid_points(n)?;
    }
    Ok(c)
}

fn cmd_run(
    paths: &[PathBuf],
    out: &std::path::Path,
    formats: &[String],
    grid: Option<usize>,
    jmax: Option<usize>,
) -> Result<u8> {
    let formats: Vec<Format> = formats.iter().map(|f| f.parse()).collect::<Result<_>>()?;
    let mut configs = Vec::new();
    for path in paths {
        for c in load_configs(path)? {
            configs.push(apply_overrides(c, grid, jmax)?);
        }
    }
    let labels: Vec<String> = configs
        .iter()
        .enumerate()
        .map(|(i, c)| c.label(i))
        .collect();
    let mut sorted = labels.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != labels.len() {
        return Err(Error::Config {
            field: "name".into(),
            reason: "scenario names must be unique within a batch".into(),
        });
    }
    let single = configs.len() == 1;
    let results: Vec<Result<(i32, String)>> = configs
        .par_iter()
        .zip(labels.par_iter())
        .map(|(c, label)| {
            let artifacts = run(c)?;
            let dir = if single {
                out.to_path_buf()
            } else {
                out.join(label)
            };
            emit(&artifacts, &dir, &formats)?;
            let r = &artifacts.report;
            let line = format!(
                "{label}: s_star={:.12} J={:.12e} dJ={:.3e} d2J={:.6e} verdict={} iterations={}{}",
                r.s_star,
                r.cost_star,
                r.d_cost_star,
                r.d2_cost_star,
                r.verdict,
                r.newton_iterations,
                if r.fallback_used { " fallback" } else { "" }
            );
            Ok((r.exit_code(), line))
        })
        .collect();
    let mut status = 0;
    for r in results {
        let (code, line) = r?;
        println!("{line}");
        status = status.max(code);
    }
    Ok(status as u8)
}

fn cmd_scan(
    path: &std::path::Path,
    s_min: f64,
    s_max: f64,
    points: usize,
    out: Option<&std::path::Path>,
) -> Result<u8> {
    let mut configs = load_configs(path)?;
    if configs.len() != 1 {
        return Err(Error::Config {
            field: "<root>".into(),
            reason: format!("scan takes one scenario, found {}", configs.len()),
        });
    }
    let rows = scan(&configs.remove(0), s_min, s_max, points)?;
    let csv = cost_curve_csv(&rows);
    match out {
        Some(p) => std::fs::write(p, csv).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        })?,
        None => print!("{csv}"),
    }
    Ok(0)
}

fn cmd_verify() -> u8 {
    let outcomes = run_checks();
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} checks, {failed} failed", outcomes.len());
    if failed == 0 {
        0
    } else {
        EXIT_ERROR
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match &cli.command {
        Command::Run {
            config,
            out,
            formats,
            grid,
            jmax,
        } => cmd_run(config, out, formats, *grid, *jmax),
        Command::Scan {
            config,
            s_min,
            s_max,
            points,
            out,
        } => cmd_scan(config, *s_min, *s_max, *points, out.as_deref()),
        Command::Verify => Ok(cmd_verify()),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
