//! Variational mesh adaptation.
//!
//! Vertices move to minimize Huang's functional
//!
//! ```text
//! I = sum_K |K| sqrt(det M_K) [ theta tr(J M_K^-1 J^T)^(d gamma / 2)
//!                               + (1 - 2 theta) d^(d gamma / 2) (det J / sqrt(det M_K))^gamma ]
//! ```
//!
//! with `J` the inverse Jacobian of the affine map from the reference element
//! onto `K` and `d = 2`. The gradient flow `dx_i/dt = -(P_i / tau) dI/dx_i` is
//! integrated by one backward-Euler step, i.e. by minimizing
//! `I(x) + sum_i tau / (2 dt P_i) |x_i - x_i^n|^2`.
//!
//! [`energy`], [`grad_energy`] and [`mmpde_step`] take a frozen metric field.
//! With the metric frozen at the vertices, the fixed point of repeated steps
//! under-resolves the monitor, since `dI/dx` then misses the change of `M`
//! with position. The simulation therefore uses [`mmpde_step_mackenzie`],
//! which re-evaluates MacKenzie's monitor at the moving vertices.

use nalgebra::Matrix2;

use crate::error::{PitError, Result};
use crate::mesh::{min_distance_to_pit, BoundaryTag, PitChain, TriMesh, Vec2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReferenceShape {
    /// Right triangle (0,0), (1,0), (0,1).
    UnitRight,
    /// Equilateral triangle of the given area.
    Equilateral { area: f64 },
    /// Equilateral triangle of area `1/N` for a mesh of `N` cells, i.e. a
    /// computational domain of unit area.
    EquilateralUnitary,
}

impl ReferenceShape {
    fn edge_matrix(&self, cells: usize) -> Matrix2<f64> {
        match *self {
            ReferenceShape::UnitRight => Matrix2::identity(),
            ReferenceShape::EquilateralUnitary => {
                ReferenceShape::Equilateral { area: 1.0 / cells.max(1) as f64 }.edge_matrix(cells)
            }
            ReferenceShape::Equilateral { area } => {
                let a = (4.0 * area / 3f64.sqrt()).sqrt();
                Matrix2::new(a, 0.5 * a, 0.0, 0.5 * 3f64.sqrt() * a)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptParams {
    pub mu1: f64,
    pub mu2: f64,
    /// Mesh relaxation time, s.
    pub tau: f64,
    pub theta: f64,
    pub gamma: f64,
    /// Summed vertex displacement (um) below which smoothing stops.
    pub smoothing_tol: f64,
    pub smoothing_max_iters: usize,
    pub reference: ReferenceShape,
    /// Iteration cap of the inner minimization of one step.
    pub step_max_iters: usize,
    /// The inner minimization stops once the largest vertex move of an
    /// iteration falls below this length (um).
    pub step_tol: f64,
}

impl Default for AdaptParams {
    fn default() -> Self {
        AdaptParams {
            mu1: 100.0,
            mu2: 1.0,
            tau: 1e-5,
            theta: 1.0 / 3.0,
            gamma: 1.5,
            smoothing_tol: 1e-2,
            smoothing_max_iters: 40,
            reference: ReferenceShape::EquilateralUnitary,
            step_max_iters: 400,
            step_tol: 1e-9,
        }
    }
}

impl AdaptParams {
    pub fn validate(&self) -> Result<()> {
        let check = |key: &str, ok: bool, msg: String| {
            if ok {
                Ok(())
            } else {
                Err(PitError::Config {
                    key: key.into(),
                    message: msg,
                })
            }
        };
        check("mu1", self.mu1 >= 0.0 && self.mu1.is_finite(), format!("must be >= 0, got {}", self.mu1))?;
        check("mu2", self.mu2 >= 0.0 && self.mu2.is_finite(), format!("must be >= 0, got {}", self.mu2))?;
        check("tau", self.tau > 0.0 && self.tau.is_finite(), format!("must be > 0, got {}", self.tau))?;
        check(
            "theta",
            self.theta > 0.0 && self.theta < 0.5,
            format!("must lie in (0, 1/2), got {}", self.theta),
        )?;
        check("gamma", self.gamma > 1.0 && self.gamma.is_finite(), format!("must be > 1, got {}", self.gamma))?;
        check(
            "smoothing_tol",
            self.smoothing_tol > 0.0,
            format!("must be > 0, got {}", self.smoothing_tol),
        )?;
        check(
            "smoothing_max_iters",
            self.smoothing_max_iters >= 1,
            "must be >= 1".into(),
        )?;
        check("step_max_iters", self.step_max_iters >= 1, "must be >= 1".into())?;
        check("step_tol", self.step_tol > 0.0, format!("must be > 0, got {}", self.step_tol))
    }
}

/// Per-vertex metric tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    pub tensors: Vec<Matrix2<f64>>,
}

impl MetricField {
    pub fn identity(n: usize) -> Self {
        MetricField {
            tensors: vec![Matrix2::identity(); n],
        }
    }

    /// Arithmetic average of the three vertex tensors.
    pub fn cell_average(&self, tri: [usize; 3]) -> Matrix2<f64> {
        (self.tensors[tri[0]] + self.tensors[tri[1]] + self.tensors[tri[2]]) / 3.0
    }

    /// `det(M_i)^(1/(d+2))`, the scaling of the flow at each vertex.
    pub fn balance(&self) -> Vec<f64> {
        self.tensors.iter().map(|m| m.determinant().powf(0.25)).collect()
    }
}

pub fn mackenzie_value(d: f64, p: &AdaptParams) -> f64 {
    1.0 + p.mu1 / (p.mu2 * p.mu2 * d * d + 1.0).sqrt()
}

/// MacKenzie's distance monitor `(1 + mu1 / sqrt(mu2^2 d^2 + 1)) I`.
pub fn monitor_mackenzie(mesh: &TriMesh, chains: &[PitChain], p: &AdaptParams) -> MetricField {
    let tensors = mesh
        .vertices
        .iter()
        .map(|&x| {
            let d = if chains.is_empty() {
                f64::INFINITY
            } else {
                min_distance_to_pit(x, chains, mesh)
            };
            Matrix2::identity() * mackenzie_value(d, p)
        })
        .collect();
    MetricField { tensors }
}

/// MacKenzie's monitor as a function of position, for pit walls held fixed.
#[derive(Clone, Debug)]
pub struct MacKenzie {
    segments: Vec<(Vec2, Vec2)>,
    mu1: f64,
    mu2: f64,
}

impl MacKenzie {
    pub fn new(mesh: &TriMesh, chains: &[PitChain], p: &AdaptParams) -> Self {
        let mut segments = Vec::new();
        for c in chains {
            if c.len() == 1 {
                let x = mesh.vertices[c.vertices[0]];
                segments.push((x, x));
            }
            segments.extend(c.edges().map(|[a, b]| (mesh.vertices[a], mesh.vertices[b])));
        }
        MacKenzie {
            segments,
            mu1: p.mu1,
            mu2: p.mu2,
        }
    }

    fn closest(&self, x: Vec2, seg: usize) -> Vec2 {
        let (a, b) = self.segments[seg];
        let ab = b - a;
        let len2 = ab.norm_squared();
        let s = if len2 > 0.0 { ((x - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
        x - (a + ab * s)
    }

    /// Index of the segment nearest to `x`, if there are any.
    fn nearest_segment(&self, x: Vec2) -> Option<usize> {
        (0..self.segments.len()).min_by(|&i, &j| {
            self.closest(x, i).norm_squared().total_cmp(&self.closest(x, j).norm_squared())
        })
    }

    fn density_at_offset(&self, r: Vec2) -> (f64, Vec2) {
        let q = self.mu2 * self.mu2 * r.norm_squared() + 1.0;
        // d rho / dx = rho'(d) (x - nearest) / d, with the 1/d folded in.
        (1.0 + self.mu1 / q.sqrt(), r * (-self.mu1 * self.mu2 * self.mu2 / (q * q.sqrt())))
    }

    /// Monitor value and its spatial gradient at `x`.
    pub fn value_and_gradient(&self, x: Vec2) -> (f64, Vec2) {
        match self.nearest_segment(x) {
            Some(seg) => self.density_at_offset(self.closest(x, seg)),
            None => (1.0, Vec2::zeros()),
        }
    }

    /// Tensors (and derivatives) at `x`, measuring each vertex's distance to
    /// the segment `assigned` to it, or to the nearest segment if `None`.
    fn vertex_tensors_with(
        &self,
        x: &[Vec2],
        assigned: Option<&[Option<usize>]>,
        with_derivs: bool,
    ) -> (Vec<Matrix2<f64>>, Vec<MetricDerivatives>) {
        let mut tensors = Vec::with_capacity(x.len());
        let mut derivs = Vec::with_capacity(if with_derivs { x.len() } else { 0 });
        for (v, &p) in x.iter().enumerate() {
            let seg = match assigned {
                Some(a) => a[v],
                None => self.nearest_segment(p),
            };
            let (value, g) = match seg {
                Some(seg) => self.density_at_offset(self.closest(p, seg)),
                None => (1.0, Vec2::zeros()),
            };
            tensors.push(Matrix2::identity() * value);
            if with_derivs {
                derivs.push([Matrix2::identity() * g.x, Matrix2::identity() * g.y]);
            }
        }
        (tensors, derivs)
    }

    fn vertex_tensors(&self, x: &[Vec2], with_derivs: bool) -> (Vec<Matrix2<f64>>, Vec<MetricDerivatives>) {
        self.vertex_tensors_with(x, None, with_derivs)
    }
}

struct Functional {
    ref_edges: Matrix2<f64>,
    ref_det: f64,
    theta: f64,
    gamma: f64,
    /// (1 - 2 theta) d^(d gamma / 2)
    c2: f64,
}

/// Spatial derivatives `(dM/dx, dM/dy)` of the vertex tensors.
type MetricDerivatives = [Matrix2<f64>; 2];

fn check_metric(mesh: &TriMesh, metric: &MetricField) -> Result<()> {
    if metric.tensors.len() != mesh.num_vertices() {
        return Err(PitError::Invalid(format!(
            "metric has {} tensors for {} vertices",
            metric.tensors.len(),
            mesh.num_vertices()
        )));
    }
    for &t in &mesh.triangles {
        if metric.cell_average(t).try_inverse().is_none() {
            return Err(PitError::Invalid(format!("metric is singular on cell with vertices {t:?}")));
        }
    }
    Ok(())
}

impl Functional {
    fn new(mesh: &TriMesh, p: &AdaptParams) -> Self {
        let ref_edges = p.reference.edge_matrix(mesh.num_cells());
        Functional {
            ref_edges,
            ref_det: ref_edges.determinant(),
            theta: p.theta,
            gamma: p.gamma,
            c2: (1.0 - 2.0 * p.theta) * 2f64.powf(p.gamma),
        }
    }

    /// Energy and, if requested, the gradient. With `derivs` the vertex
    /// tensors are treated as functions of the vertex positions and their
    /// contribution enters the gradient. `Err(cell)` on an inverted cell.
    fn eval(
        &self,
        vertices: &[Vec2],
        triangles: &[[usize; 3]],
        tensors: &[Matrix2<f64>],
        derivs: Option<&[MetricDerivatives]>,
        mut grad: Option<&mut [Vec2]>,
    ) -> std::result::Result<f64, (usize, f64)> {
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = Vec2::zeros());
        }
        let mut total = 0.0;
        for (c, t) in triangles.iter().enumerate() {
            let (x0, x1, x2) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            let e = Matrix2::from_columns(&[x1 - x0, x2 - x0]);
            let det_e = e.determinant();
            if det_e <= 0.0 || !det_e.is_finite() {
                return Err((c, 0.5 * det_e));
            }
            let m = (tensors[t[0]] + tensors[t[1]] + tensors[t[2]]) / 3.0;
            let Some(m_inv) = m.try_inverse() else {
                return Err((c, 0.5 * det_e));
            };
            let sqrt_det = m.determinant().sqrt();
            let e_inv = Matrix2::new(e[(1, 1)], -e[(0, 1)], -e[(1, 0)], e[(0, 0)]) / det_e;
            let jm = self.ref_edges * e_inv;
            let tr = (jm * m_inv * jm.transpose()).trace();
            let det_j = self.ref_det / det_e;
            let area = 0.5 * det_e;
            let t1 = self.theta * tr.powf(self.gamma);
            let t2 = self.c2 * (det_j / sqrt_det).powf(self.gamma);
            total += area * sqrt_det * (t1 + t2);

            if let Some(g) = grad.as_deref_mut() {
                let e_inv_t = e_inv.transpose();
                let dtr = 2.0 * self.theta * self.gamma * tr.powf(self.gamma - 1.0);
                let de = (e_inv_t * (t1 + t2) - jm.transpose() * jm * m_inv * e_inv_t * dtr
                    - e_inv_t * (self.gamma * t2))
                    * (area * sqrt_det);
                let g1 = Vec2::new(de[(0, 0)], de[(1, 0)]);
                let g2 = Vec2::new(de[(0, 1)], de[(1, 1)]);
                g[t[1]] += g1;
                g[t[2]] += g2;
                g[t[0]] -= g1 + g2;
                if let Some(dm) = derivs {
                    // d(|K| G)/dM_K for symmetric M_K.
                    let dg = (m_inv * (0.5 * (t1 + t2) - 0.5 * self.gamma * t2)
                        - m_inv * jm.transpose() * jm * m_inv * (0.5 * dtr))
                        * (area * sqrt_det);
                    for &v in t {
                        for a in 0..2 {
                            g[v][a] += dg.component_mul(&dm[v][a]).sum() / 3.0;
                        }
                    }
                }
            }
        }
        Ok(total)
    }
}

fn inverted(mesh_cell: (usize, f64)) -> PitError {
    PitError::InvertedElement {
        cell: mesh_cell.0,
        area: mesh_cell.1,
    }
}

pub fn energy(mesh: &TriMesh, metric: &MetricField, p: &AdaptParams) -> Result<f64> {
    check_metric(mesh, metric)?;
    Functional::new(mesh, p)
        .eval(&mesh.vertices, &mesh.triangles, &metric.tensors, None, None)
        .map_err(inverted)
}

/// Gradient of [`energy`] with the metric field held fixed.
pub fn grad_energy(mesh: &TriMesh, metric: &MetricField, p: &AdaptParams) -> Result<Vec<Vec2>> {
    check_metric(mesh, metric)?;
    let mut g = vec![Vec2::zeros(); mesh.num_vertices()];
    Functional::new(mesh, p)
        .eval(&mesh.vertices, &mesh.triangles, &metric.tensors, None, Some(&mut g))
        .map_err(inverted)?;
    Ok(g)
}

/// Energy with MacKenzie's monitor evaluated at the current vertex positions.
pub fn energy_mackenzie(mesh: &TriMesh, chains: &[PitChain], p: &AdaptParams) -> Result<f64> {
    let monitor = MacKenzie::new(mesh, chains, p);
    let (tensors, _) = monitor.vertex_tensors(&mesh.vertices, false);
    Functional::new(mesh, p)
        .eval(&mesh.vertices, &mesh.triangles, &tensors, None, None)
        .map_err(inverted)
}

/// Gradient of [`energy_mackenzie`], including the motion of the monitor with
/// the vertices. Pit vertices are treated as fixed: the distance field does
/// not follow them.
pub fn grad_energy_mackenzie(mesh: &TriMesh, chains: &[PitChain], p: &AdaptParams) -> Result<Vec<Vec2>> {
    let monitor = MacKenzie::new(mesh, chains, p);
    let (tensors, derivs) = monitor.vertex_tensors(&mesh.vertices, true);
    let mut g = vec![Vec2::zeros(); mesh.num_vertices()];
    Functional::new(mesh, p)
        .eval(&mesh.vertices, &mesh.triangles, &tensors, Some(&derivs), Some(&mut g))
        .map_err(inverted)?;
    Ok(g)
}

/// How a vertex may move during mesh adaptation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constraint {
    Free,
    SlideX,
    SlideY,
    Fixed,
}

/// Pit vertices and rectangle corners are pinned, top and bottom vertices
/// slide horizontally, left and right vertices slide vertically.
pub fn vertex_constraints(mesh: &TriMesh) -> Vec<Constraint> {
    mesh.vertex_tags()
        .into_iter()
        .map(|tags| {
            if tags.is_empty() {
                return Constraint::Free;
            }
            if tags.iter().any(|t| t.is_pit()) {
                return Constraint::Fixed;
            }
            let horizontal = tags
                .iter()
                .any(|t| matches!(t, BoundaryTag::Top | BoundaryTag::Bottom));
            let vertical = tags
                .iter()
                .any(|t| matches!(t, BoundaryTag::Left | BoundaryTag::Right));
            match (horizontal, vertical) {
                (true, true) => Constraint::Fixed,
                (true, false) => Constraint::SlideX,
                (false, true) => Constraint::SlideY,
                (false, false) => Constraint::Free,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub iterations: usize,
    pub energy_before: f64,
    pub energy_after: f64,
    /// Sum over vertices of the distance moved, um.
    pub displacement_sum: f64,
    pub max_displacement: f64,
}

/// Free coordinates as (vertex, axis) pairs.
fn free_dofs(constraints: &[Constraint]) -> Vec<(usize, usize)> {
    let mut dofs = Vec::new();
    for (v, c) in constraints.iter().enumerate() {
        match c {
            Constraint::Free => {
                dofs.push((v, 0));
                dofs.push((v, 1));
            }
            Constraint::SlideX => dofs.push((v, 0)),
            Constraint::SlideY => dofs.push((v, 1)),
            Constraint::Fixed => {}
        }
    }
    dofs
}

/// Where the step takes its metric from.
#[derive(Clone, Copy)]
enum MetricSource<'a> {
    /// Vertex tensors held fixed over the step.
    Frozen(&'a [Matrix2<f64>]),
    /// Monitor re-evaluated at the moving vertices, each measuring its
    /// distance to one wall segment fixed for the step.
    Monitor(&'a MacKenzie, &'a [Option<usize>]),
}

impl MetricSource<'_> {
    fn eval(
        &self,
        functional: &Functional,
        x: &[Vec2],
        triangles: &[[usize; 3]],
        grad: Option<&mut [Vec2]>,
    ) -> std::result::Result<f64, (usize, f64)> {
        match *self {
            MetricSource::Frozen(tensors) => functional.eval(x, triangles, tensors, None, grad),
            MetricSource::Monitor(m, assigned) => {
                let (tensors, derivs) = m.vertex_tensors_with(x, Some(assigned), grad.is_some());
                let derivs = grad.is_some().then_some(derivs.as_slice());
                functional.eval(x, triangles, &tensors, derivs, grad)
            }
        }
    }
}

/// One backward-Euler step of the mesh gradient flow over `dt` seconds with
/// the metric field frozen. Returns the new vertex positions; the mesh itself
/// is not modified.
pub fn mmpde_step(
    mesh: &TriMesh,
    metric: &MetricField,
    p: &AdaptParams,
    constraints: &[Constraint],
    dt: f64,
) -> Result<(Vec<Vec2>, StepReport)> {
    check_metric(mesh, metric)?;
    flow_step(mesh, &metric.balance(), MetricSource::Frozen(&metric.tensors), p, constraints, dt)
}

/// As [`mmpde_step`], but MacKenzie's monitor moves with the vertices, so the
/// step descends the functional of the monitor itself rather than of its
/// values at the start of the step. Pit vertices must be fixed.
pub fn mmpde_step_mackenzie(
    mesh: &TriMesh,
    chains: &[PitChain],
    p: &AdaptParams,
    constraints: &[Constraint],
    dt: f64,
) -> Result<(Vec<Vec2>, StepReport)> {
    let monitor = MacKenzie::new(mesh, chains, p);
    // Tying each vertex to one segment keeps the step objective smooth; the
    // true distance has kinks where the nearest segment changes.
    let assigned: Vec<Option<usize>> = mesh.vertices.iter().map(|&x| monitor.nearest_segment(x)).collect();
    let (tensors, _) = monitor.vertex_tensors_with(&mesh.vertices, Some(&assigned), false);
    let balance = MetricField { tensors }.balance();
    flow_step(mesh, &balance, MetricSource::Monitor(&monitor, &assigned), p, constraints, dt)
}

fn flow_step(
    mesh: &TriMesh,
    balance: &[f64],
    source: MetricSource,
    p: &AdaptParams,
    constraints: &[Constraint],
    dt: f64,
) -> Result<(Vec<Vec2>, StepReport)> {
    if !(dt > 0.0) {
        return Err(PitError::Invalid(format!("mesh step interval must be > 0, got {dt}")));
    }
    if constraints.len() != mesh.num_vertices() {
        return Err(PitError::Invalid("one constraint per vertex is required".into()));
    }
    let functional = Functional::new(mesh, p);
    let x_old = mesh.vertices.clone();
    let weights: Vec<f64> = balance.iter().map(|&pi| p.tau / (2.0 * dt * pi)).collect();
    let dofs = free_dofs(constraints);

    let mut x = x_old.clone();
    let mut grad = vec![Vec2::zeros(); x.len()];
    let mut eval = |z: &[f64], x: &mut Vec<Vec2>, g: &mut [f64]| -> Option<f64> {
        for (k, &(v, a)) in dofs.iter().enumerate() {
            x[v][a] = z[k];
        }
        let e = source.eval(&functional, x, &mesh.triangles, Some(&mut grad)).ok()?;
        let mut prox = 0.0;
        for (k, &(v, a)) in dofs.iter().enumerate() {
            let dx = x[v][a] - x_old[v][a];
            prox += weights[v] * dx * dx;
            g[k] = grad[v][a] + 2.0 * weights[v] * dx;
        }
        Some(e + prox)
    };

    let energy_before = source
        .eval(&functional, &x_old, &mesh.triangles, None)
        .map_err(inverted)?;
    let z0: Vec<f64> = dofs.iter().map(|&(v, a)| x_old[v][a]).collect();
    let n = z0.len();
    let (z, iterations) = if n == 0 {
        (z0, 0)
    } else {
        lbfgs(z0, |z, g| eval(z, &mut x, g), p.step_max_iters, p.step_tol, |k| dofs[k].0)
    };
    let mut x_new = x_old.clone();
    for (k, &(v, a)) in dofs.iter().enumerate() {
        x_new[v][a] = z[k];
    }
    let energy_after = source
        .eval(&functional, &x_new, &mesh.triangles, None)
        .map_err(|(cell, area)| {
            PitError::MeshMotion(format!("mesh step produced inverted cell {cell} (area {area:e})"))
        })?;
    let moves: Vec<f64> = x_new.iter().zip(&x_old).map(|(a, b)| (a - b).norm()).collect();
    let report = StepReport {
        iterations,
        energy_before,
        energy_after,
        displacement_sum: moves.iter().sum(),
        max_displacement: moves.iter().cloned().fold(0.0, f64::max),
    };
    Ok((x_new, report))
}

/// Limited-memory BFGS with backtracking. `f` returns `None` for infeasible
/// points (inverted cells), which the line search treats as +inf. Stops when
/// an accepted step moves no vertex farther than `step_tol`.
fn lbfgs(
    mut z: Vec<f64>,
    mut f: impl FnMut(&[f64], &mut [f64]) -> Option<f64>,
    max_iters: usize,
    step_tol: f64,
    vertex_of: impl Fn(usize) -> usize,
) -> (Vec<f64>, usize) {
    const MEMORY: usize = 8;
    let n = z.len();
    let mut g = vec![0.0; n];
    let mut fz = match f(&z, &mut g) {
        Some(v) => v,
        None => return (z, 0),
    };
    let mut s_hist: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut moves: std::collections::HashMap<usize, f64> = Default::default();
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        // Two-loop recursion for the search direction.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, y, rho) in s_hist.iter().rev() {
            let a = rho * dot(s, &q);
            axpy(-a, y, &mut q);
            alphas.push(a);
        }
        let gamma0 = match s_hist.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / norm_inf(&g).max(1e-300) * 1e-2,
        };
        q.iter_mut().for_each(|v| *v *= gamma0);
        for ((s, y, rho), a) in s_hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            axpy(a - b, s, &mut q);
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            s_hist.clear();
            d = g.iter().map(|v| -v * 1e-2 / norm_inf(&g).max(1e-300)).collect();
            slope = dot(&g, &d);
            if !(slope < 0.0) {
                break;
            }
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            for k in 0..n {
                trial[k] = z[k] + step * d[k];
            }
            if let Some(ft) = f(&trial, &mut g_trial) {
                if ft <= fz + 1e-4 * step * slope {
                    accepted = Some(ft);
                    break;
                }
            }
            step *= 0.5;
        }
        let Some(ft) = accepted else {
            break;
        };

        moves.clear();
        for k in 0..n {
            let dz = step * d[k];
            *moves.entry(vertex_of(k)).or_insert(0.0) += dz * dz;
        }
        let max_move = moves.values().cloned().fold(0.0, f64::max).sqrt();

        let s: Vec<f64> = (0..n).map(|k| trial[k] - z[k]).collect();
        let y: Vec<f64> = (0..n).map(|k| g_trial[k] - g[k]).collect();
        let sy = dot(&s, &y);
        std::mem::swap(&mut z, &mut trial);
        std::mem::swap(&mut g, &mut g_trial);
        fz = ft;
        if sy > 1e-300 {
            if s_hist.len() == MEMORY {
                s_hist.pop_front();
            }
            s_hist.push_back((s, y, 1.0 / sy));
        }
        if max_move < step_tol {
            break;
        }
    }
    (z, iterations)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothReport {
    /// Summed vertex displacement of each iteration, um.
    pub trace: Vec<f64>,
    pub converged: bool,
}

impl SmoothReport {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Alternates the physics callback with mesh steps on a rebuilt monitor until
/// an iteration moves the vertices by less than `smoothing_tol` in total.
/// Stops after `max_iters` iterations (at most `smoothing_max_iters`) with
/// `converged = false`, leaving the last mesh in place.
pub fn smooth_mesh(
    mesh: &mut TriMesh,
    chains: &[PitChain],
    p: &AdaptParams,
    dt: f64,
    max_iters: usize,
    physics_every: usize,
    mut physics: impl FnMut(&TriMesh) -> Result<()>,
) -> Result<SmoothReport> {
    let constraints = vertex_constraints(mesh);
    let mut trace = Vec::new();
    let cap = max_iters.min(p.smoothing_max_iters).max(1);
    for it in 0..cap {
        if physics_every > 0 && it % physics_every == 0 {
            physics(mesh)?;
        }
        let (x, report) = mmpde_step_mackenzie(mesh, chains, p, &constraints, dt)?;
        mesh.vertices = x;
        trace.push(report.displacement_sum);
        log::debug!(
            "smoothing iteration {}: displacement {:.3e}, {} inner iterations",
            it + 1,
            report.displacement_sum,
            report.iterations
        );
        if report.displacement_sum < p.smoothing_tol {
            return Ok(SmoothReport {
                trace,
                converged: true,
            });
        }
    }
    log::warn!(
        "mesh smoothing stopped after {} iterations without reaching tolerance {}",
        trace.len(),
        p.smoothing_tol
    );
    Ok(SmoothReport {
        trace,
        converged: false,
    })
}

/// Max/min ratio of `|K| sqrt(det M_K)` over cells; 1 for perfect equidistribution.
pub fn equidistribution_spread(mesh: &TriMesh, metric: &MetricField) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (c, &t) in mesh.triangles.iter().enumerate() {
        let w = mesh.signed_area(c) * metric.cell_average(t).determinant().sqrt();
        lo = lo.min(w);
        hi = hi.max(w);
    }
    hi / lo
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    whole: f64,
    m: f64,
    fm: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let (left, lm, flm) = simpson(f, a, fa, m, fm);
    let (right, rm, frm) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_simpson(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
        + adaptive_simpson(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
}

/// `∫_a^b f` by adaptive Simpson quadrature.
pub fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    adaptive_simpson(f, a, fa, b, fb, whole, m, fm, tol, 50)
}

/// Mesh `a = x_0 < ... < x_N = b` with equal `∫ rho` over every subinterval.
pub fn solve_equidistribution_1d(
    rho: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    n: usize,
) -> Result<Vec<f64>> {
    if n < 1 || !(b > a) {
        return Err(PitError::Invalid(format!(
            "equidistribution needs N >= 1 and a < b (N = {n}, a = {a}, b = {b})"
        )));
    }
    const SAMPLES: usize = 1000;
    for k in 0..=SAMPLES {
        let x = a + (b - a) * k as f64 / SAMPLES as f64;
        let r = rho(x);
        // A density vanishing at an end point (rho = 2x on [0, 1]) still has
        // an invertible cumulative integral.
        let endpoint = k == 0 || k == SAMPLES;
        let ok = if endpoint { r >= 0.0 } else { r > 0.0 };
        if !ok || !r.is_finite() {
            return Err(PitError::Invalid(format!(
                "density must be positive and finite, rho({x}) = {r}"
            )));
        }
    }
    let total = integrate(&rho, a, b, 1e-14 * (b - a));
    let mut out = Vec::with_capacity(n + 1);
    out.push(a);
    // Each point is found from the previous one, so only one subinterval
    // integral is needed per Newton update.
    let mut prev = a;
    for i in 1..n {
        let target = total / n as f64;
        let (mut lo, mut hi) = (prev, b);
        let mut x = prev + (b - prev) / (n - i + 1) as f64;
        for _ in 0..200 {
            let c = integrate(&rho, prev, x, 1e-15 * (b - a)) - target;
            if c.abs() <= 1e-14 * total {
                break;
            }
            if c > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - c / rho(x);
            x = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 1e-15 * (b - a) {
                break;
            }
        }
        out.push(x);
        prev = x;
    }
    out.push(b);
    Ok(out)
}
