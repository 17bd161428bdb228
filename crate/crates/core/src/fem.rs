//! P1 finite elements for the electrolyte potential.
//!
//! Laplace's equation holds in the electrolyte with `phi = 0` on the top
//! boundary, zero flux on the sides and the undissolved surface, and the
//! Butler-Volmer flux `grad(phi).n = flux_sign * i(phi) / sigma_c` on pit
//! walls. The stiffness integral is independent of the length unit in 2D, so
//! only boundary lengths are converted from micrometres to metres.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::crystal::{vcorr, MaterialSpec, VcorrParams};
use crate::electrochem::{current_density, ElectroParams};
use crate::error::{PitError, Result};
use crate::mesh::{face_normal, BoundaryTag, PitChain, TriMesh, Vec2};

const UM_TO_M: f64 = 1e-6;

/// Everything the boundary flux depends on besides the mesh and the field.
#[derive(Clone, Debug, PartialEq)]
pub struct Physics {
    pub electro: ElectroParams,
    pub vcorr: VcorrParams,
    pub material: MaterialSpec,
    /// Sign applied to the printed pit flux; +1 makes the pit a current source.
    pub flux_sign: f64,
    /// Gauss-Legendre points per pit edge (1 to 4).
    pub quad_points: usize,
}

impl Default for Physics {
    fn default() -> Self {
        Physics {
            electro: ElectroParams::default(),
            vcorr: VcorrParams::default(),
            material: MaterialSpec::default(),
            flux_sign: 1.0,
            quad_points: 2,
        }
    }
}

impl Physics {
    /// Corrosion potential at a point of a pit edge with outward normal `n`.
    pub fn vcorr_at(&self, position: Vec2, n: Vec2) -> f64 {
        vcorr(&self.material, &self.vcorr, position, n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Stop once the largest potential update falls below this, V.
    pub step_tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            step_tol: 1e-13,
            max_iters: 25,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport {
    pub phi: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
    /// Residual norm before each iteration, then the final one.
    pub history: Vec<f64>,
}

/// Gauss-Legendre nodes and weights on [0, 1].
fn gauss_legendre(n: usize) -> Result<&'static [(f64, f64)]> {
    const G1: [(f64, f64); 1] = [(0.5, 1.0)];
    const G2: [(f64, f64); 2] = [
        (0.211_324_865_405_187_1, 0.5),
        (0.788_675_134_594_812_9, 0.5),
    ];
    const G3: [(f64, f64); 3] = [
        (0.112_701_665_379_258_3, 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.887_298_334_620_741_7, 5.0 / 18.0),
    ];
    const G4: [(f64, f64); 4] = [
        (0.069_431_844_202_973_7, 0.173_927_422_568_726_9),
        (0.330_009_478_207_571_9, 0.326_072_577_431_273_1),
        (0.669_990_521_792_428_1, 0.326_072_577_431_273_1),
        (0.930_568_155_797_026_3, 0.173_927_422_568_726_9),
    ];
    match n {
        1 => Ok(&G1),
        2 => Ok(&G2),
        3 => Ok(&G3),
        4 => Ok(&G4),
        _ => Err(PitError::Invalid(format!(
            "boundary quadrature supports 1 to 4 points, got {n}"
        ))),
    }
}

/// Element stiffness of one triangle.
fn element_stiffness(mesh: &TriMesh, cell: usize) -> Result<[[f64; 3]; 3]> {
    let [p0, p1, p2] = mesh.cell_points(cell);
    let area = mesh.signed_area(cell);
    if area <= 0.0 || !area.is_finite() {
        return Err(PitError::InvertedElement { cell, area });
    }
    // Gradient of the hat at vertex a is rot90(opposite edge) / (2|K|).
    let e = [p2 - p1, p0 - p2, p1 - p0];
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = e[a].dot(&e[b]) / (4.0 * area);
        }
    }
    Ok(k)
}

pub(crate) fn stiffness_triplets(mesh: &TriMesh) -> Result<Vec<(usize, usize, f64)>> {
    let mut out = Vec::with_capacity(9 * mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let k = element_stiffness(mesh, c)?;
        let t = mesh.triangles[c];
        for a in 0..3 {
            for b in 0..3 {
                out.push((t[a], t[b], k[a][b]));
            }
        }
    }
    Ok(out)
}

fn to_sparse(n: usize, entries: &[(usize, usize, f64)]) -> Result<SparseColMat<usize, f64>> {
    let triplets: Vec<Triplet<usize, usize, f64>> = entries
        .iter()
        .map(|&(r, c, v)| Triplet::new(r, c, v))
        .collect();
    SparseColMat::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| PitError::Singular(format!("sparse assembly failed: {e:?}")))
}

/// Global P1 stiffness matrix.
pub fn assemble_stiffness(mesh: &TriMesh) -> Result<SparseColMat<usize, f64>> {
    to_sparse(mesh.num_vertices(), &stiffness_triplets(mesh)?)
}

/// Discrete harmonic extension of vertex displacements: vertices with
/// `fixed[v]` keep `disp[v]`, the rest solve the P1 Laplace problem.
pub fn harmonic_extension(mesh: &TriMesh, disp: &[Vec2], fixed: &[bool]) -> Result<Vec<Vec2>> {
    let n = mesh.num_vertices();
    let mut free_index = vec![usize::MAX; n];
    let mut free = Vec::new();
    for v in 0..n {
        if !fixed[v] {
            free_index[v] = free.len();
            free.push(v);
        }
    }
    let mut out = disp.to_vec();
    if free.is_empty() {
        return Ok(out);
    }
    let mut entries = Vec::new();
    let mut rhs = vec![Vec2::zeros(); free.len()];
    for (i, j, k) in stiffness_triplets(mesh)? {
        let fi = free_index[i];
        if fi == usize::MAX {
            continue;
        }
        match free_index[j] {
            usize::MAX => rhs[fi] -= disp[j] * k,
            fj => entries.push((fi, fj, k)),
        }
    }
    let lu = to_sparse(free.len(), &entries)?
        .sp_lu()
        .map_err(|e| PitError::Singular(format!("sparse LU failed: {e:?}")))?;
    for axis in 0..2 {
        let b = Col::<f64>::from_fn(free.len(), |k| rhs[k][axis]);
        let x = lu.solve(&b);
        for (k, &v) in free.iter().enumerate() {
            out[v][axis] = x[k];
        }
    }
    Ok(out)
}

/// Boundary load and its derivative in sparse triplet form.
#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct BoundaryTerms {
    pub load: Vec<f64>,
    pub jacobian: Vec<(usize, usize, f64)>,
}

pub(crate) fn boundary_terms(
    mesh: &TriMesh,
    chains: &[PitChain],
    phi: &[f64],
    physics: &Physics,
) -> Result<BoundaryTerms> {
    let rule = gauss_legendre(physics.quad_points)?;
    let mut load = vec![0.0; mesh.num_vertices()];
    let mut jacobian = Vec::new();
    let p = &physics.electro;
    let slope = -p.alpha * p.zf_over_rt();
    let scale = physics.flux_sign / p.sigma_c;
    for chain in chains {
        for [a, b] in chain.edges() {
            let (xa, xb) = (mesh.vertices[a], mesh.vertices[b]);
            let n = face_normal(xa, xb).ok_or_else(|| {
                PitError::Geometry(format!("pit {} edge {a}-{b} has zero length", chain.pit_id))
            })?;
            let len = (xb - xa).norm() * UM_TO_M;
            let mut jl = [[0.0; 2]; 2];
            for &(s, w) in rule {
                let basis = [1.0 - s, s];
                let x = xa + (xb - xa) * s;
                let phi_q = basis[0] * phi[a] + basis[1] * phi[b];
                let i = current_density(p, physics.vcorr_at(x, n), phi_q).map_err(|e| {
                    PitError::Geometry(format!("pit {} edge {a}-{b}: {e}", chain.pit_id))
                })?;
                let di = slope * i;
                for r in 0..2 {
                    load[[a, b][r]] += scale * w * len * basis[r] * i;
                    for c in 0..2 {
                        jl[r][c] += scale * w * len * basis[r] * basis[c] * di;
                    }
                }
            }
            for r in 0..2 {
                for c in 0..2 {
                    jacobian.push(([a, b][r], [a, b][c], jl[r][c]));
                }
            }
        }
    }
    Ok(BoundaryTerms { load, jacobian })
}

/// Pit-wall load vector `b(phi)` (entries `∫ v_a flux_sign i(phi)/sigma_c ds`,
/// lengths in metres) and its derivative with respect to `phi`.
pub fn boundary_residual_and_jacobian(
    mesh: &TriMesh,
    chains: &[PitChain],
    phi: &[f64],
    physics: &Physics,
) -> Result<(Vec<f64>, SparseColMat<usize, f64>)> {
    if phi.len() != mesh.num_vertices() {
        return Err(PitError::Invalid(format!(
            "phi has {} entries for {} vertices",
            phi.len(),
            mesh.num_vertices()
        )));
    }
    let terms = boundary_terms(mesh, chains, phi, physics)?;
    let jac = to_sparse(mesh.num_vertices(), &terms.jacobian)?;
    Ok((terms.load, jac))
}

/// Vertices on the top boundary, where the potential reference `phi = 0` holds.
pub fn top_dirichlet(mesh: &TriMesh) -> Vec<(usize, f64)> {
    let mut v: Vec<usize> = mesh
        .boundary_edges
        .iter()
        .filter(|e| e.tag == BoundaryTag::Top)
        .flat_map(|e| e.v)
        .collect();
    v.sort_unstable();
    v.dedup();
    v.into_iter().map(|i| (i, 0.0)).collect()
}

/// Solves the potential problem with `phi = 0` on the top boundary.
pub fn newton_solve(
    mesh: &TriMesh,
    chains: &[PitChain],
    physics: &Physics,
    guess: &[f64],
    settings: &NewtonSettings,
) -> Result<NewtonReport> {
    newton_solve_with_dirichlet(mesh, chains, physics, guess, settings, &top_dirichlet(mesh))
}

/// Newton iteration with an explicit Dirichlet set, eliminated by row and
/// column so the linearized systems stay symmetric.
pub fn newton_solve_with_dirichlet(
    mesh: &TriMesh,
    chains: &[PitChain],
    physics: &Physics,
    guess: &[f64],
    settings: &NewtonSettings,
    dirichlet: &[(usize, f64)],
) -> Result<NewtonReport> {
    let n = mesh.num_vertices();
    if guess.len() != n {
        return Err(PitError::Invalid(format!(
            "initial guess has {} entries for {n} vertices",
            guess.len()
        )));
    }
    if dirichlet.is_empty() && chains.is_empty() {
        return Err(PitError::Singular(
            "no Dirichlet vertices: the potential is only defined up to a constant".into(),
        ));
    }
    let mut phi = guess.to_vec();
    let mut fixed = vec![false; n];
    for &(v, g) in dirichlet {
        fixed[v] = true;
        phi[v] = g;
    }
    // Free-vertex numbering of the reduced system.
    let mut free_index = vec![usize::MAX; n];
    let mut free = Vec::new();
    for v in 0..n {
        if !fixed[v] {
            free_index[v] = free.len();
            free.push(v);
        }
    }
    let stiffness = stiffness_triplets(mesh)?;

    let residual = |phi: &[f64]| -> Result<(Vec<f64>, BoundaryTerms)> {
        let terms = boundary_terms(mesh, chains, phi, physics)?;
        let mut r: Vec<f64> = terms.load.iter().map(|b| -b).collect();
        for &(i, j, k) in &stiffness {
            r[i] += k * phi[j];
        }
        Ok((r, terms))
    };
    let free_norm = |r: &[f64]| free.iter().map(|&v| r[v] * r[v]).sum::<f64>().sqrt();

    let (mut r, mut terms) = residual(&phi)?;
    let mut norm = free_norm(&r);
    let mut history = vec![norm];
    let target = settings.abs_tol.max(settings.rel_tol * norm);
    let mut iterations = 0;
    while norm > target {
        if iterations == settings.max_iters {
            return Err(PitError::NewtonDiverged {
                iterations,
                history,
            });
        }
        iterations += 1;

        let mut entries = Vec::with_capacity(stiffness.len() + terms.jacobian.len());
        let reduced = |(i, j, v): (usize, usize, f64)| {
            let (fi, fj) = (free_index[i], free_index[j]);
            (fi != usize::MAX && fj != usize::MAX).then_some((fi, fj, v))
        };
        entries.extend(stiffness.iter().copied().filter_map(reduced));
        entries.extend(
            terms
                .jacobian
                .iter()
                .map(|&(i, j, v)| (i, j, -v))
                .filter_map(reduced),
        );
        let jac = to_sparse(free.len(), &entries)?;
        let lu = jac
            .sp_lu()
            .map_err(|e| PitError::Singular(format!("sparse LU failed: {e:?}")))?;
        let rhs = Col::<f64>::from_fn(free.len(), |k| -r[free[k]]);
        let delta = lu.solve(&rhs);
        if (0..free.len()).any(|k| !delta[k].is_finite()) {
            return Err(PitError::Singular(format!(
                "Newton update is not finite at iteration {iterations}"
            )));
        }

        let largest = (0..free.len()).map(|k| delta[k].abs()).fold(0.0, f64::max);
        if largest <= settings.step_tol {
            // Residual is at round-off level; take the update and stop.
            for (k, &v) in free.iter().enumerate() {
                phi[v] += delta[k];
            }
            norm = free_norm(&residual(&phi)?.0);
            history.push(norm);
            break;
        }

        // Halve the step until the residual decreases.
        let mut step = 1.0;
        loop {
            let mut trial = phi.clone();
            for (k, &v) in free.iter().enumerate() {
                trial[v] += step * delta[k];
            }
            let attempt = residual(&trial);
            if let Ok((rt, tt)) = attempt {
                let nt = free_norm(&rt);
                if nt < norm || step < 1e-4 {
                    phi = trial;
                    r = rt;
                    terms = tt;
                    norm = nt;
                    break;
                }
            } else if step < 1e-4 {
                return Err(attempt.unwrap_err());
            }
            step *= 0.5;
        }
        history.push(norm);
        log::trace!("newton iteration {iterations}: residual {norm:e}");
    }
    Ok(NewtonReport {
        phi,
        iterations,
        residual_norm: norm,
        history,
    })
}
