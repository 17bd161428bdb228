//! Initial triangulation of the rectangle-plus-pits domain.

use std::collections::HashSet;

use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use crate::error::{PitError, Result};
use crate::mesh::{BoundaryEdge, BoundaryTag, TriMesh, Vec2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    pub height: f64,
}

impl Default for Domain {
    fn default() -> Self {
        Domain {
            x_min: -20.0,
            x_max: 20.0,
            height: 20.0,
        }
    }
}

/// Semi-elliptical initial pit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PitSpec {
    pub center: f64,
    pub width: f64,
    pub depth: f64,
}

/// Chain vertices of a semi-elliptical pit, evenly spaced in the ellipse
/// parameter, from the left corner to the right corner. Corners sit exactly
/// on `y = 0`.
pub fn pit_chain_points(pit: &PitSpec, nodes: usize) -> Vec<Vec2> {
    let a = 0.5 * pit.width;
    (0..nodes)
        .map(|i| {
            if i == 0 {
                return Vec2::new(pit.center - a, 0.0);
            }
            if i + 1 == nodes {
                return Vec2::new(pit.center + a, 0.0);
            }
            let t = std::f64::consts::PI * (1.0 + i as f64 / (nodes - 1) as f64);
            Vec2::new(pit.center + a * t.cos(), pit.depth * t.sin())
        })
        .collect()
}

/// Points strictly inside `[x0, x1]` on the surface line, spaced like `size`.
fn graded_points(x0: f64, x1: f64, size: impl Fn(f64) -> f64) -> Vec<f64> {
    const SAMPLES: usize = 2000;
    let dx = (x1 - x0) / SAMPLES as f64;
    let mut cum = vec![0.0];
    for k in 0..SAMPLES {
        let xm = x0 + (k as f64 + 0.5) * dx;
        cum.push(cum[k] + dx / size(xm));
    }
    let total = cum[SAMPLES];
    let pieces = total.round().max(1.0) as usize;
    let mut out = Vec::with_capacity(pieces.saturating_sub(1));
    let mut k = 0;
    for j in 1..pieces {
        let target = total * j as f64 / pieces as f64;
        while cum[k + 1] < target {
            k += 1;
        }
        let f = (target - cum[k]) / (cum[k + 1] - cum[k]);
        out.push(x0 + (k as f64 + f) * dx);
    }
    out
}

fn uniform(a: Vec2, b: Vec2, h: f64) -> Vec<Vec2> {
    let pieces = ((b - a).norm() / h).round().max(1.0) as usize;
    (1..pieces).map(|j| a + (b - a) * (j as f64 / pieces as f64)).collect()
}

/// Counterclockwise boundary polygon with the tag of the edge leaving each point.
pub fn boundary_polygon(
    domain: &Domain,
    pits: &[PitSpec],
    nodes: usize,
    h: f64,
) -> Result<Vec<(Vec2, BoundaryTag)>> {
    check_layout(domain, pits, nodes, h)?;
    let chains: Vec<Vec<Vec2>> = pits.iter().map(|p| pit_chain_points(p, nodes)).collect();
    let corner_size: Vec<f64> = chains.iter().map(|c| (c[1] - c[0]).norm()).collect();
    // Surface spacing grows away from pit corners up to the bulk size.
    let size = |x: f64| -> f64 {
        let mut s = h;
        for (c, &s0) in chains.iter().zip(&corner_size) {
            for corner in [c[0].x, c[c.len() - 1].x] {
                s = s.min(s0 + 0.25 * (x - corner).abs());
            }
        }
        s
    };

    let mut poly: Vec<(Vec2, BoundaryTag)> = Vec::new();
    let mut x = domain.x_min;
    for (id, chain) in chains.iter().enumerate() {
        poly.push((Vec2::new(x, 0.0), BoundaryTag::Bottom));
        for px in graded_points(x, chain[0].x, size) {
            poly.push((Vec2::new(px, 0.0), BoundaryTag::Bottom));
        }
        for p in &chain[..chain.len() - 1] {
            poly.push((*p, BoundaryTag::Pit(id)));
        }
        x = chain[chain.len() - 1].x;
    }
    poly.push((Vec2::new(x, 0.0), BoundaryTag::Bottom));
    for px in graded_points(x, domain.x_max, size) {
        poly.push((Vec2::new(px, 0.0), BoundaryTag::Bottom));
    }
    let corners = [
        (Vec2::new(domain.x_max, 0.0), BoundaryTag::Right),
        (Vec2::new(domain.x_max, domain.height), BoundaryTag::Top),
        (Vec2::new(domain.x_min, domain.height), BoundaryTag::Left),
        (Vec2::new(domain.x_min, 0.0), BoundaryTag::Bottom),
    ];
    for k in 0..3 {
        let (a, tag) = corners[k];
        poly.push((a, tag));
        for p in uniform(a, corners[k + 1].0, h) {
            poly.push((p, tag));
        }
    }
    Ok(poly)
}

fn check_layout(domain: &Domain, pits: &[PitSpec], nodes: usize, h: f64) -> Result<()> {
    let bad = |key: &str, message: String| {
        Err(PitError::Config {
            key: key.into(),
            message,
        })
    };
    if !(domain.x_max > domain.x_min && domain.height > 0.0) {
        return bad("domain", format!("degenerate domain {domain:?}"));
    }
    if !(h > 0.0 && h.is_finite()) {
        return bad("mesh_h", format!("must be positive, got {h}"));
    }
    if nodes < 5 {
        return bad("pit_nodes", format!("need at least 5 nodes per pit, got {nodes}"));
    }
    if pits.is_empty() {
        return bad("pit_centers", "at least one pit is required".into());
    }
    let mut right = domain.x_min;
    for (k, p) in pits.iter().enumerate() {
        if !(p.width > 0.0 && p.depth > 0.0) {
            return bad("pit_width", format!("pit {k} needs positive width and depth"));
        }
        if p.depth >= domain.height {
            return bad("pit_depth", format!("pit {k} is deeper than the domain is tall"));
        }
        let (l, r) = (p.center - 0.5 * p.width, p.center + 0.5 * p.width);
        if l <= right {
            return bad(
                "pit_centers",
                format!("pit {k} overlaps its neighbour or the domain edge; list centres left to right"),
            );
        }
        right = r;
    }
    if right >= domain.x_max {
        return bad("pit_centers", "last pit reaches the domain edge".into());
    }
    Ok(())
}

/// Constrained Delaunay triangulation of the domain, refined to a minimum
/// angle of 25 degrees and a maximum cell area set by the bulk edge length `h`.
/// The boundary polygon is kept exactly; interior points are added.
pub fn triangulate(domain: &Domain, pits: &[PitSpec], nodes: usize, h: f64) -> Result<TriMesh> {
    let poly = boundary_polygon(domain, pits, nodes, h)?;
    let fail = |what: &str| {
        let pts: Vec<String> = poly.iter().map(|(p, _)| format!("({:.6}, {:.6})", p.x, p.y)).collect();
        PitError::Triangulation(format!("{what}; boundary polygon: [{}]", pts.join(", ")))
    };

    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::new();
    let mut handles = Vec::with_capacity(poly.len());
    for (p, _) in &poly {
        let handle = cdt
            .insert(Point2::new(p.x, p.y))
            .map_err(|e| fail(&format!("cannot insert point ({}, {}): {e:?}", p.x, p.y)))?;
        handles.push(handle);
    }
    if cdt.num_vertices() != poly.len() {
        return Err(fail("boundary polygon has repeated points"));
    }
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (handles[i], handles[(i + 1) % n]);
        if !cdt.can_add_constraint(a, b) {
            return Err(fail(&format!("boundary segment {i} crosses another segment")));
        }
        cdt.add_constraint(a, b);
    }

    let max_area = 3f64.sqrt() / 4.0 * h * h;
    let result = cdt.refine(
        RefinementParameters::<f64>::new()
            .exclude_outer_faces(true)
            .keep_constraint_edges()
            .with_angle_limit(AngleLimit::from_deg(25.0))
            .with_max_allowed_area(max_area)
            .with_max_additional_vertices(200_000),
    );
    if !result.refinement_complete {
        log::warn!("initial triangulation refinement stopped before meeting all quality limits");
    }
    let excluded: HashSet<_> = result.excluded_faces.iter().copied().collect();

    let vertices: Vec<Vec2> = cdt
        .vertices()
        .map(|v| Vec2::new(v.position().x, v.position().y))
        .collect();
    let mut triangles = Vec::new();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix()) {
            continue;
        }
        let [a, b, c] = face.vertices().map(|v| v.fix().index());
        triangles.push([a, b, c]);
    }
    // Vertices are indexed in insertion order, so the polygon comes first.
    let edges: Vec<BoundaryEdge> = (0..n)
        .map(|i| BoundaryEdge {
            v: [i, (i + 1) % n],
            tag: poly[i].1,
        })
        .collect();
    let mesh = TriMesh::new(vertices, triangles, edges)?;
    let report = mesh.validate();
    if !report.is_empty() {
        return Err(fail(&format!("triangulation failed validation: {report:?}")));
    }
    Ok(mesh)
}
