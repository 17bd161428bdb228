//! Simulation driver: initial mesh, the alternating mesh/physics/front loop,
//! growth diagnostics and the power-law fit.

mod fit;
mod meshgen;

pub use fit::{fit_power_law, PowerLawFit};
pub use meshgen::{boundary_polygon, pit_chain_points, triangulate, Domain, PitSpec};

use crate::adapt::{
    mmpde_step_mackenzie, smooth_mesh, vertex_constraints, AdaptParams, SmoothReport,
};
use crate::error::{PitError, Result};
use crate::fem::{harmonic_extension, newton_solve, NewtonSettings, Physics};
use crate::front::{
    advance_points, check_chain, detect_merge, merge_pits, place_apex, update_corners,
    vertex_speeds, CornerEvent, FrontParams,
};
use crate::mesh::{normals_of_points, PitChain, TriMesh, Vec2};

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub physics: Physics,
    pub adapt: AdaptParams,
    pub front: FrontParams,
    pub newton: NewtonSettings,
    pub domain: Domain,
    /// Initial pits, left to right.
    pub pits: Vec<PitSpec>,
    pub pit_nodes: usize,
    /// Bulk edge length of the initial triangulation, um.
    pub mesh_h: f64,
    pub t_end: f64,
    /// Mesh-flow interval of one smoothing iteration, s.
    pub smooth_dt: f64,
    /// Potential solve cadence during initial smoothing (0 disables).
    pub smooth_physics_every: usize,
    pub post_merge_smoothing: usize,
    /// VTK snapshot cadence in steps (0 disables).
    pub vtk_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            physics: Physics::default(),
            adapt: AdaptParams::default(),
            front: FrontParams::default(),
            newton: NewtonSettings::default(),
            domain: Domain::default(),
            pits: vec![PitSpec {
                center: 0.0,
                width: 10.0,
                depth: 5.0,
            }],
            pit_nodes: 61,
            mesh_h: 1.0,
            t_end: 120.0,
            smooth_dt: 50.0,
            smooth_physics_every: 5,
            post_merge_smoothing: 5,
            vtk_every: 20,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.physics.electro.validate()?;
        self.adapt.validate()?;
        self.front.validate()?;
        let bad = |key: &str, message: String| {
            Err(PitError::Config {
                key: key.into(),
                message,
            })
        };
        if !(1..=4).contains(&self.physics.quad_points) {
            return bad("quad_points", format!("must be 1 to 4, got {}", self.physics.quad_points));
        }
        if self.physics.flux_sign != 1.0 && self.physics.flux_sign != -1.0 {
            return bad("flux_sign", format!("must be 1 or -1, got {}", self.physics.flux_sign));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end", format!("must be positive, got {}", self.t_end));
        }
        if !(self.smooth_dt > 0.0 && self.smooth_dt.is_finite()) {
            return bad("smooth_dt", format!("must be positive, got {}", self.smooth_dt));
        }
        if self.newton.max_iters == 0 {
            return bad("newton_max_iters", "must be at least 1".into());
        }
        if let crate::crystal::MaterialSpec::Homogeneous { v_corr } = self.physics.material {
            if !v_corr.is_finite() {
                return bad("v_corr", "must be finite".into());
            }
        }
        // Geometry checks live with the triangulator.
        boundary_polygon(&self.domain, &self.pits, self.pit_nodes, self.mesh_h).map(|_| ())
    }
}

/// Pit depth (deepest chain point below the surface) and width (largest
/// corner-to-corner span of any single pit), um.
pub fn diagnostics(mesh: &TriMesh, chains: &[PitChain]) -> (f64, f64) {
    let mut depth = 0.0f64;
    let mut width = 0.0f64;
    for c in chains {
        for &v in &c.vertices {
            depth = depth.max(-mesh.vertices[v].y);
        }
        width = width.max(mesh.vertices[c.right_corner()].x - mesh.vertices[c.left_corner()].x);
    }
    (depth, width)
}

/// Standard deviation of the distances from `center` divided by their mean.
pub fn radial_deviation(points: &[Vec2], center: Vec2) -> f64 {
    let r: Vec<f64> = points.iter().map(|p| (p - center).norm()).collect();
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Direction, in degrees below the horizontal, of the dominant straight
/// stretch of a wall: the length-weighted mode of edge directions (within a
/// 2 degree window), refined by averaging the edges inside that window.
pub fn dominant_wall_angle(points: &[Vec2]) -> Option<f64> {
    let edges: Vec<(f64, f64)> = points
        .windows(2)
        .filter_map(|w| {
            let d = w[1] - w[0];
            let len = d.norm();
            // Walls descend away from the surface; fold every edge into [0, 90].
            (len > 0.0).then(|| ((d.y.abs()).atan2(d.x.abs()).to_degrees(), len))
        })
        .collect();
    if edges.is_empty() {
        return None;
    }
    let window = 2.0;
    let score = |a: f64| -> f64 {
        edges
            .iter()
            .filter(|(e, _)| (e - a).abs() <= window)
            .map(|(_, l)| l)
            .sum()
    };
    let mut best = (0.0, f64::NEG_INFINITY);
    let mut a = 0.0;
    while a <= 90.0 {
        let s = score(a);
        if s > best.1 {
            best = (a, s);
        }
        a += 0.1;
    }
    let (sum, weight) = edges
        .iter()
        .filter(|(e, _)| (e - best.0).abs() <= window)
        .fold((0.0, 0.0), |(s, w), (e, l)| (s + e * l, w + l));
    Some(sum / weight)
}

/// Dominant wall angles (degrees below horizontal) left and right of the
/// deepest vertex of a chain.
pub fn wall_angles(points: &[Vec2]) -> Option<(f64, f64)> {
    let deepest = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.y.total_cmp(&b.1.y))?
        .0;
    let left = dominant_wall_angle(&points[..=deepest])?;
    let right = dominant_wall_angle(&points[deepest..])?;
    Some((left, right))
}

/// Triangulates the configured domain and smooths it toward the initial
/// monitor, solving the potential every `smooth_physics_every` iterations.
pub fn init_mesh(config: &SimConfig) -> Result<(TriMesh, SmoothReport)> {
    config.validate()?;
    let mut mesh = triangulate(&config.domain, &config.pits, config.pit_nodes, config.mesh_h)?;
    log::info!(
        "initial triangulation: {} vertices, {} cells",
        mesh.num_vertices(),
        mesh.num_cells()
    );
    let report = smooth(&mut mesh, config, config.adapt.smoothing_max_iters, config.smooth_physics_every)?;
    Ok((mesh, report))
}

/// Mesh smoothing on a fixed pit geometry.
pub fn smooth(
    mesh: &mut TriMesh,
    config: &SimConfig,
    max_iters: usize,
    physics_every: usize,
) -> Result<SmoothReport> {
    let chains = mesh.chains_from_tags()?;
    let mut phi = vec![0.0; mesh.num_vertices()];
    let physics = &config.physics;
    let newton = &config.newton;
    smooth_mesh(
        mesh,
        &chains,
        &config.adapt,
        config.smooth_dt,
        max_iters,
        physics_every,
        |m| {
            phi = newton_solve(m, &chains, physics, &phi, newton)?.phi;
            Ok(())
        },
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub depth: f64,
    pub width: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeSeries {
    pub rows: Vec<Sample>,
}

impl TimeSeries {
    /// Power-law fit of one column against `t + 1`.
    pub fn fit(&self, column: Column) -> PowerLawFit {
        let t: Vec<f64> = self.rows.iter().map(|r| r.t + 1.0).collect();
        let y: Vec<f64> = self.rows.iter().map(|r| column.of(r)).collect();
        fit_power_law(&t, &y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Column {
    Depth,
    Width,
}

impl Column {
    pub fn of(self, s: &Sample) -> f64 {
        match self {
            Column::Depth => s.depth,
            Column::Width => s.width,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    Merge {
        step: usize,
        t: f64,
        left_pit: usize,
        right_pit: usize,
        gap: f64,
        apex_vertex: usize,
    },
    CornerAbsorbed {
        step: usize,
        pit: usize,
        new_corner: usize,
    },
    StepRetried {
        step: usize,
        dt: f64,
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub mesh_iterations: usize,
    pub mesh_displacement: f64,
    pub newton_iterations: usize,
    pub max_speed: f64,
    pub merged: bool,
}

/// Halvings of the step tried before a failed front update aborts the run.
const MAX_RETRIES: usize = 6;

pub struct Simulation {
    pub config: SimConfig,
    pub mesh: TriMesh,
    pub chains: Vec<PitChain>,
    pub phi: Vec<f64>,
    pub t: f64,
    pub step: usize,
    pub series: TimeSeries,
    pub events: Vec<Event>,
    num_vertices: usize,
    num_cells: usize,
}

impl Simulation {
    /// Starts a run on an initialized mesh; solves the initial potential and
    /// records the first sample at `t = 0`.
    pub fn new(config: SimConfig, mesh: TriMesh) -> Result<Self> {
        config.validate()?;
        let report = mesh.validate();
        if !report.is_empty() {
            return Err(PitError::Invalid(format!("initial mesh is not valid: {report:?}")));
        }
        let chains = mesh.chains_from_tags()?;
        let phi0 = vec![0.0; mesh.num_vertices()];
        let phi = newton_solve(&mesh, &chains, &config.physics, &phi0, &config.newton)?.phi;
        let (depth, width) = diagnostics(&mesh, &chains);
        Ok(Simulation {
            num_vertices: mesh.num_vertices(),
            num_cells: mesh.num_cells(),
            config,
            mesh,
            chains,
            phi,
            t: 0.0,
            step: 0,
            series: TimeSeries {
                rows: vec![Sample { t: 0.0, depth, width }],
            },
            events: Vec::new(),
        })
    }

    pub fn finished(&self) -> bool {
        self.t >= self.config.t_end * (1.0 - 1e-12)
    }

    pub fn merges(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, Event::Merge { .. })).count()
    }

    /// Advances one time step. On error the state is left at the last
    /// completed step.
    pub fn step(&mut self) -> Result<StepInfo> {
        let step = self.step + 1;
        let saved = (self.mesh.clone(), self.chains.clone(), self.phi.clone(), self.t);
        self.try_step(step).map_err(|e| {
            (self.mesh, self.chains, self.phi, self.t) = saved;
            PitError::Step {
                step,
                source: Box::new(e),
            }
        })
    }

    fn try_step(&mut self, step: usize) -> Result<StepInfo> {
        let cfg = self.config.clone();
        let dt_nominal = cfg.front.dt.min(cfg.t_end - self.t);

        // Mesh follows the fronts as they stood after the previous step.
        let constraints = vertex_constraints(&self.mesh);
        let (x, mesh_report) =
            mmpde_step_mackenzie(&self.mesh, &self.chains, &cfg.adapt, &constraints, dt_nominal)?;
        let saved_vertices = std::mem::replace(&mut self.mesh.vertices, x);
        if let Some((cell, area)) = self.mesh.first_inverted() {
            self.mesh.vertices = saved_vertices;
            return Err(PitError::InvertedElement { cell, area });
        }

        let newton = match newton_solve(&self.mesh, &self.chains, &cfg.physics, &self.phi, &cfg.newton) {
            Ok(r) => r,
            Err(e) => {
                self.mesh.vertices = saved_vertices;
                return Err(e);
            }
        };
        self.phi = newton.phi.clone();

        let mut speeds = Vec::with_capacity(self.chains.len());
        let mut normals = Vec::with_capacity(self.chains.len());
        let mut min_edge = f64::INFINITY;
        let mut max_speed = 0.0f64;
        for c in &self.chains {
            let pts = c.points(&self.mesh);
            let n = normals_of_points(&pts)
                .map_err(|e| PitError::Geometry(format!("pit {} edge {e} has zero length", c.pit_id)))?;
            let phi_c: Vec<f64> = c.vertices.iter().map(|&v| self.phi[v]).collect();
            let s = vertex_speeds(&pts, &n, &phi_c, &cfg.physics)?;
            for w in pts.windows(2) {
                min_edge = min_edge.min((w[1] - w[0]).norm());
            }
            max_speed = s.iter().fold(max_speed, |m, &v| m.max(v.abs()));
            speeds.push(s);
            normals.push(n);
        }
        let mut dt = dt_nominal;
        if max_speed > 0.0 {
            dt = dt.min(0.2 * min_edge / max_speed);
        }

        let snapshot = (self.mesh.clone(), self.chains.clone());
        let mut retries = 0;
        let corner_events = loop {
            match self.move_fronts(&normals, &speeds, dt) {
                Ok(ev) => break ev,
                Err(e) if retries < MAX_RETRIES => {
                    retries += 1;
                    (self.mesh, self.chains) = snapshot.clone();
                    dt *= 0.5;
                    log::info!("step {step}: front update failed ({e}); retrying with dt = {dt:.3e}");
                    self.events.push(Event::StepRetried {
                        step,
                        dt,
                        reason: e.to_string(),
                    });
                }
                Err(e) => {
                    (self.mesh, self.chains) = snapshot;
                    self.mesh.vertices = saved_vertices;
                    return Err(e);
                }
            }
        };
        for (pit, ev) in corner_events {
            if let CornerEvent::Absorbed { new_corner, .. } = ev {
                self.events.push(Event::CornerAbsorbed {
                    step,
                    pit,
                    new_corner,
                });
            }
        }
        self.t += dt;

        let mut merged = false;
        if let Some(d) = detect_merge(&self.mesh, &self.chains, cfg.front.merge_gap_tol) {
            let out = merge_pits(&mut self.mesh, &mut self.chains, &d)?;
            log::info!(
                "step {step}: merged pits {} and {} across a {:.3e} um gap",
                d.left_pit,
                d.right_pit,
                d.length
            );
            self.events.push(Event::Merge {
                step,
                t: self.t,
                left_pit: d.left_pit,
                right_pit: d.right_pit,
                gap: d.length,
                apex_vertex: out.apex_vertex,
            });
            smooth(&mut self.mesh, &cfg, cfg.post_merge_smoothing, 0)?;
            merged = true;
        }

        if self.mesh.num_vertices() != self.num_vertices || self.mesh.num_cells() != self.num_cells {
            return Err(PitError::MeshMotion("vertex or cell count changed".into()));
        }
        if let Some((cell, area)) = self.mesh.first_inverted() {
            return Err(PitError::InvertedElement { cell, area });
        }

        let (depth, width) = diagnostics(&self.mesh, &self.chains);
        self.series.rows.push(Sample { t: self.t, depth, width });
        self.step = step;
        Ok(StepInfo {
            step,
            t: self.t,
            dt,
            mesh_iterations: mesh_report.iterations,
            mesh_displacement: mesh_report.displacement_sum,
            newton_iterations: newton.iterations,
            max_speed,
            merged,
        })
    }

    fn move_fronts(
        &mut self,
        normals: &[Vec<Vec2>],
        speeds: &[Vec<f64>],
        dt: f64,
    ) -> Result<Vec<(usize, CornerEvent)>> {
        let mut events = Vec::new();
        let before = self.mesh.vertices.clone();
        for ci in 0..self.chains.len() {
            let chain = &self.chains[ci];
            let old = chain.points(&self.mesh);
            let mut new = advance_points(&old, &normals[ci], &speeds[ci], dt, chain.apex);
            if let Some(a) = chain.apex {
                place_apex(&old, &mut new, a)?;
            }
            for (&v, p) in chain.vertices.iter().zip(&new) {
                self.mesh.vertices[v] = *p;
            }
            let chain = &mut self.chains[ci];
            for ev in update_corners(&mut self.mesh, chain, self.config.front.corner_close_factor)? {
                events.push((chain.pit_id, ev));
            }
            check_chain(&chain.points(&self.mesh), chain.pit_id, chain.apex)?;
        }
        // Interior vertices follow the boundary so that wall respacing does
        // not fold the cells next to the pit.
        let on_boundary: Vec<bool> = self.mesh.vertex_tags().iter().map(|t| !t.is_empty()).collect();
        let disp: Vec<Vec2> = self.mesh.vertices.iter().zip(&before).map(|(a, b)| a - b).collect();
        let old_mesh = TriMesh {
            vertices: before.clone(),
            ..self.mesh.clone()
        };
        let disp = harmonic_extension(&old_mesh, &disp, &on_boundary)?;
        // Near a closing gap the extension itself can fold cells; damp it.
        for theta in [1.0, 0.5, 0.25, 0.0] {
            for (v, d) in disp.iter().enumerate() {
                if !on_boundary[v] {
                    self.mesh.vertices[v] = before[v] + d * theta;
                }
            }
            if self.mesh.first_inverted().is_none() {
                break;
            }
        }
        if let Some((cell, area)) = self.mesh.first_inverted() {
            return Err(PitError::InvertedElement { cell, area });
        }
        Ok(events)
    }

    /// Steps until `t_end`, calling `observer` after every step.
    pub fn run(&mut self, mut observer: impl FnMut(&Simulation, &StepInfo) -> Result<()>) -> Result<()> {
        while !self.finished() {
            let info = self.step()?;
            log::debug!(
                "step {} t={:.4} dt={:.3e} mesh_it={} newton_it={} vmax={:.4e}",
                info.step,
                info.t,
                info.dt,
                info.mesh_iterations,
                info.newton_iterations,
                info.max_speed
            );
            observer(self, &info)?;
        }
        Ok(())
    }
}
