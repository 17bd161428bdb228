//! `pitmesh`: command-line driver for the pitting corrosion simulator.
//!
//! Exit codes: 0 success, 1 invalid input, 2 runtime failure. Set
//! `PITMESH_LOG=debug|info|warn` for log output on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pitmesh::io::{parse_config, read_columns, run_to_dir};
use pitmesh::mesh::{read_mesh, write_mesh};
use pitmesh::sim::{init_mesh, smooth, Column, Sample, TimeSeries};
use pitmesh::PitError;

#[derive(Parser)]
#[command(name = "pitmesh", version, about = "Moving-mesh simulation of pitting corrosion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Triangulate the configured domain and smooth it toward the initial monitor.
    InitMesh {
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run a simulation to t_end and write VTK snapshots, CSV and summary.
    Run {
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Smooth an existing mesh on its fixed pit geometry.
    Smooth {
        config: PathBuf,
        mesh: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Fit a*t^b + c (t counted from 1) to a time-series column.
    Fit {
        csv: PathBuf,
        #[arg(long, value_enum)]
        column: ColumnArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ColumnArg {
    Depth,
    Width,
}

/// Unreadable input files count as invalid input, not runtime failures.
fn input<T>(r: Result<T, PitError>) -> Result<T, PitError> {
    r.map_err(|e| match e {
        PitError::Io { .. } => PitError::Invalid(e.to_string()),
        other => other,
    })
}

fn init_mesh_cmd(config: &Path, output: &Path) -> Result<(), PitError> {
    let cfg = input(parse_config(config))?;
    let (mesh, report) = init_mesh(&cfg)?;
    write_mesh(&mesh, output)?;
    println!(
        "wrote {} ({} vertices, {} cells); smoothing {} iterations, final displacement {:.3e}{}",
        output.display(),
        mesh.num_vertices(),
        mesh.num_cells(),
        report.iterations(),
        report.trace.last().copied().unwrap_or(0.0),
        if report.converged { "" } else { " (not converged)" }
    );
    Ok(())
}

fn run_cmd(config: &Path, output: &Path) -> Result<(), PitError> {
    let cfg = input(parse_config(config))?;
    let report = run_to_dir(&cfg, output)?;
    let last = report.sim.series.rows.last().copied().unwrap_or(Sample {
        t: 0.0,
        depth: 0.0,
        width: 0.0,
    });
    println!(
        "{} steps to t = {}; depth {:.4} um, width {:.4} um, {} merge(s)",
        report.sim.step,
        report.sim.t,
        last.depth,
        last.width,
        report.sim.merges()
    );
    for (name, f) in [("depth", &report.depth_fit), ("width", &report.width_fit)] {
        println!("{name}: a = {:.4}, b = {:.4}, c = {:.4}, R^2 = {:.6}", f.a, f.b, f.c, f.r_squared);
    }
    println!("artifacts in {}", report.artifacts.dir.display());
    Ok(())
}

fn smooth_cmd(config: &Path, mesh_path: &Path, output: &Path) -> Result<(), PitError> {
    let cfg = input(parse_config(config))?;
    let mut mesh = input(read_mesh(mesh_path))?;
    let report = smooth(&mut mesh, &cfg, cfg.adapt.smoothing_max_iters, cfg.smooth_physics_every)?;
    write_mesh(&mesh, output)?;
    println!(
        "wrote {}; {} iterations, final displacement {:.3e}{}",
        output.display(),
        report.iterations(),
        report.trace.last().copied().unwrap_or(0.0),
        if report.converged { "" } else { " (not converged)" }
    );
    Ok(())
}

fn fit_cmd(csv: &Path, column: ColumnArg) -> Result<(), PitError> {
    let text = std::fs::read_to_string(csv)
        .map_err(|e| PitError::Invalid(format!("cannot read {}: {e}", csv.display())))?;
    let (name, col) = match column {
        ColumnArg::Depth => ("depth_um", Column::Depth),
        ColumnArg::Width => ("width_um", Column::Width),
    };
    let cols = read_columns(&text, &csv.display().to_string(), &["t", name])?;
    if cols[0].len() < 4 {
        return Err(PitError::Invalid(format!(
            "{} has {} rows; the fit needs at least 4",
            csv.display(),
            cols[0].len()
        )));
    }
    let series = TimeSeries {
        rows: cols[0]
            .iter()
            .zip(&cols[1])
            .map(|(&t, &v)| Sample {
                t,
                depth: v,
                width: v,
            })
            .collect(),
    };
    let f = series.fit(col);
    println!("a = {:.6} +/- {:.2e}", f.a, f.se_a);
    println!("b = {:.6} +/- {:.2e}", f.b, f.se_b);
    println!("c = {:.6} +/- {:.2e}", f.c, f.se_c);
    println!("R^2 = {:.8}", f.r_squared);
    if !f.converged {
        log::warn!("fit stopped after {} iterations without converging", f.iterations);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("PITMESH_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::InitMesh { config, output } => init_mesh_cmd(config, output),
        Command::Run { config, output } => run_cmd(config, output),
        Command::Smooth { config, mesh, output } => smooth_cmd(config, mesh, output),
        Command::Fit { csv, column } => fit_cmd(csv, *column),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
