//! Configuration, file formats and run artifacts.

mod config;
mod series;
mod vtk;

pub use config::{parse_config, parse_config_str, parse_config_str_unchecked, write_config, write_config_string};
pub use series::{read_columns, read_timeseries, read_timeseries_str, write_timeseries, write_timeseries_string};
pub use vtk::{read_vtk, read_vtk_str, write_vtk, write_vtk_string, VtkData};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{PitError, Result};
use crate::mesh::write_mesh;
use crate::sim::{init_mesh, Column, Event, PowerLawFit, SimConfig, Simulation};

/// Output locations of a run directory.
#[derive(Clone, Debug, PartialEq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub vtk_dir: PathBuf,
    pub initial_mesh: PathBuf,
    pub final_mesh: PathBuf,
    pub timeseries: PathBuf,
    pub summary: PathBuf,
    pub config: PathBuf,
}

impl RunArtifacts {
    /// Creates the directory layout and checks that it is writable.
    pub fn prepare(dir: &Path) -> Result<Self> {
        let vtk_dir = dir.join("vtk");
        std::fs::create_dir_all(&vtk_dir).map_err(|e| PitError::io(&vtk_dir, e))?;
        let probe = dir.join(".write_test");
        std::fs::write(&probe, b"").map_err(|e| PitError::io(&probe, e))?;
        let _ = std::fs::remove_file(&probe);
        Ok(RunArtifacts {
            dir: dir.to_path_buf(),
            vtk_dir,
            initial_mesh: dir.join("initial_mesh.txt"),
            final_mesh: dir.join("final_mesh.txt"),
            timeseries: dir.join("timeseries.csv"),
            summary: dir.join("summary.txt"),
            config: dir.join("config.txt"),
        })
    }

    pub fn snapshot(&self, step: usize) -> PathBuf {
        self.vtk_dir.join(format!("step_{step:05}.vtk"))
    }

    /// Mesh and field at the last completed step of a failed run.
    pub fn failure_snapshot(&self, step: usize) -> (PathBuf, PathBuf) {
        (
            self.dir.join(format!("last_good_step_{step:05}.txt")),
            self.dir.join(format!("last_good_step_{step:05}.vtk")),
        )
    }
}

/// Outcome of [`run_to_dir`].
pub struct RunReport {
    pub sim: Simulation,
    pub artifacts: RunArtifacts,
    pub depth_fit: PowerLawFit,
    pub width_fit: PowerLawFit,
}

fn fit_lines(s: &mut String, name: &str, f: &PowerLawFit) {
    let _ = writeln!(s, "[fit {name}]");
    let _ = writeln!(s, "a = {:?}\nb = {:?}\nc = {:?}", f.a, f.b, f.c);
    let _ = writeln!(s, "se_a = {:?}\nse_b = {:?}\nse_c = {:?}", f.se_a, f.se_b, f.se_c);
    let _ = writeln!(s, "r_squared = {:?}\nconverged = {}", f.r_squared, f.converged);
}

/// Structured text summary of a finished (or failed) run.
pub fn summary_string(sim: &Simulation, failure: Option<&PitError>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[config]");
    s.push_str(&write_config_string(&sim.config));
    let _ = writeln!(s, "\n[run]");
    let _ = writeln!(s, "status = {}", if failure.is_some() { "failed" } else { "completed" });
    if let Some(e) = failure {
        let _ = writeln!(s, "error = \"{e}\"");
    }
    let _ = writeln!(s, "steps = {}\nt_final = {:?}", sim.step, sim.t);
    let _ = writeln!(s, "vertices = {}\ncells = {}", sim.mesh.num_vertices(), sim.mesh.num_cells());
    if let Some(last) = sim.series.rows.last() {
        let _ = writeln!(s, "final_depth_um = {:?}\nfinal_width_um = {:?}", last.depth, last.width);
    }
    let _ = writeln!(s, "merges = {}", sim.merges());
    for e in &sim.events {
        if let Event::Merge {
            step,
            t,
            left_pit,
            right_pit,
            gap,
            apex_vertex,
        } = e
        {
            let _ = writeln!(
                s,
                "merge = \"step {step} t {t:?} pits {left_pit}+{right_pit} gap {gap:?} apex vertex {apex_vertex}\""
            );
        }
    }
    let retries = sim.events.iter().filter(|e| matches!(e, Event::StepRetried { .. })).count();
    let _ = writeln!(s, "step_retries = {retries}");
    if sim.series.rows.len() >= 4 {
        s.push('\n');
        fit_lines(&mut s, "depth", &sim.series.fit(Column::Depth));
        s.push('\n');
        fit_lines(&mut s, "width", &sim.series.fit(Column::Width));
    }
    s
}

/// Builds the initial mesh, runs to `t_end` and writes all artifacts into
/// `dir`. On a failed step the last good mesh, field, series and summary are
/// still written before the error is returned.
pub fn run_to_dir(config: &SimConfig, dir: &Path) -> Result<RunReport> {
    config.validate()?;
    let artifacts = RunArtifacts::prepare(dir)?;
    write_config(config, &artifacts.config)?;
    let (mesh, report) = init_mesh(config)?;
    log::info!(
        "initial smoothing: {} iterations, final displacement {:.3e}",
        report.iterations(),
        report.trace.last().copied().unwrap_or(0.0)
    );
    write_mesh(&mesh, &artifacts.initial_mesh)?;
    let mut sim = Simulation::new(config.clone(), mesh)?;
    let every = config.vtk_every;
    if every > 0 {
        write_vtk(&sim.mesh, Some(&sim.phi), &artifacts.snapshot(0))?;
    }
    let result = sim.run(|s, info| {
        if every > 0 && info.step % every == 0 {
            write_vtk(&s.mesh, Some(&s.phi), &artifacts.snapshot(info.step))?;
        }
        Ok(())
    });
    write_timeseries(&sim.series, &artifacts.timeseries)?;
    if let Err(e) = result {
        let (mesh_path, vtk_path) = artifacts.failure_snapshot(sim.step);
        write_mesh(&sim.mesh, &mesh_path)?;
        write_vtk(&sim.mesh, Some(&sim.phi), &vtk_path)?;
        std::fs::write(&artifacts.summary, summary_string(&sim, Some(&e)))
            .map_err(|io| PitError::io(&artifacts.summary, io))?;
        return Err(e);
    }
    if every > 0 && sim.step % every != 0 {
        write_vtk(&sim.mesh, Some(&sim.phi), &artifacts.snapshot(sim.step))?;
    }
    write_mesh(&sim.mesh, &artifacts.final_mesh)?;
    std::fs::write(&artifacts.summary, summary_string(&sim, None))
        .map_err(|e| PitError::io(&artifacts.summary, e))?;
    Ok(RunReport {
        depth_fit: sim.series.fit(Column::Depth),
        width_fit: sim.series.fit(Column::Width),
        sim,
        artifacts,
    })
}
