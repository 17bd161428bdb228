//! Pit front motion: Faraday advance along vertex normals, corner updates on
//! the surface line, pit merging without topology change, and apex tracking.

use crate::electrochem::normal_velocity_um;
use crate::error::{PitError, Result};
use crate::fem::Physics;
use crate::mesh::{
    face_normal, polyline_self_intersection, BoundaryTag, PitChain, TriMesh, Vec2,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrontParams {
    /// Time step, s.
    pub dt: f64,
    /// Corner "close" tolerance as a multiple of the mean pit edge length.
    pub corner_close_factor: f64,
    /// Largest gap edge, um, that triggers a merge.
    pub merge_gap_tol: f64,
}

impl Default for FrontParams {
    fn default() -> Self {
        FrontParams {
            dt: 0.5,
            corner_close_factor: 1.5,
            merge_gap_tol: 1.0,
        }
    }
}

impl FrontParams {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("dt", self.dt),
            ("corner_close_factor", self.corner_close_factor),
            ("merge_gap_tol", self.merge_gap_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PitError::Config {
                    key: key.into(),
                    message: format!("must be positive and finite, got {v}"),
                });
            }
        }
        Ok(())
    }
}

fn chain_normals(points: &[Vec2], pit_id: usize) -> Result<Vec<Vec2>> {
    crate::mesh::normals_of_points(points)
        .map_err(|e| PitError::Geometry(format!("pit {pit_id} edge {e} has zero length")))
}

/// Front speed, um/s, at every chain vertex from the vertex potential and the
/// corrosion potential seen by the vertex normal.
pub fn vertex_speeds(
    points: &[Vec2],
    normals: &[Vec2],
    phi: &[f64],
    physics: &Physics,
) -> Result<Vec<f64>> {
    points
        .iter()
        .zip(normals)
        .zip(phi)
        .map(|((&x, &n), &p)| normal_velocity_um(&physics.electro, physics.vcorr_at(x, n), p))
        .collect()
}

/// New positions of the chain vertices after one explicit step. Corners and
/// the apex stay put; they are placed by [`update_corners`] and
/// [`track_apex`].
pub fn advance_points(
    points: &[Vec2],
    normals: &[Vec2],
    speeds: &[f64],
    dt: f64,
    apex: Option<usize>,
) -> Vec<Vec2> {
    let n = points.len();
    let mut out = points.to_vec();
    for i in 1..n.saturating_sub(1) {
        if Some(i) != apex {
            out[i] = points[i] + normals[i] * (dt * speeds[i]);
        }
    }
    out
}

/// Advances one pit chain with the potential `phi` (one entry per mesh vertex).
/// Returns the moved chain positions; the mesh is untouched.
pub fn advance_pit(
    mesh: &TriMesh,
    chain: &PitChain,
    phi: &[f64],
    physics: &Physics,
    dt: f64,
) -> Result<Vec<Vec2>> {
    let points = chain.points(mesh);
    let normals = chain_normals(&points, chain.pit_id)?;
    let phi_chain: Vec<f64> = chain.vertices.iter().map(|&v| phi[v]).collect();
    let speeds = vertex_speeds(&points, &normals, &phi_chain, physics)?;
    Ok(advance_points(&points, &normals, &speeds, dt, chain.apex))
}

/// Point where the line through `near` and `next` meets `y = 0`, or `None`
/// when the line is (numerically) horizontal.
pub fn extrapolate_to_surface(near: Vec2, next: Vec2) -> Option<Vec2> {
    let d = near - next;
    if d.norm() == 0.0 || d.y.abs() <= 1e-12 * d.norm() {
        return None;
    }
    let s = -near.y / d.y;
    Some(Vec2::new(near.x + s * d.x, 0.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CornerEvent {
    /// Corner slid along the surface line.
    Moved { vertex: usize, from: f64, to: f64 },
    /// The surface neighbour became the corner and the old corner joined the wall.
    Absorbed { new_corner: usize, old_corner: usize },
    /// Movement limited by the gap to another pit's corner.
    Clamped { vertex: usize },
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

/// Bottom-tagged neighbour of a corner vertex, if any.
fn surface_neighbour(mesh: &TriMesh, corner: usize) -> Option<(usize, usize)> {
    mesh.boundary_edges.iter().enumerate().find_map(|(k, e)| {
        if e.tag != BoundaryTag::Bottom {
            return None;
        }
        match e.v {
            [a, b] if a == corner => Some((k, b)),
            [a, b] if b == corner => Some((k, a)),
            _ => None,
        }
    })
}

fn mean_edge(points: &[Vec2]) -> f64 {
    let total: f64 = points.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    total / (points.len() - 1) as f64
}

/// Places the corners of a chain whose interior has already moved.
///
/// The line through the two wall vertices nearest a corner is extended to
/// `y = 0`. If that point is close to the old corner the corner slides there.
/// If it is far, or past the midpoint to the surface neighbour, the
/// neighbour becomes the new corner at that point and the old corner moves
/// onto the extrapolated wall, halfway to the next wall vertex.
pub fn update_corners(
    mesh: &mut TriMesh,
    chain: &mut PitChain,
    corner_close_factor: f64,
) -> Result<Vec<CornerEvent>> {
    if chain.len() < 4 {
        return Err(PitError::Geometry(format!(
            "pit {} has {} vertices; corner updates need at least 4",
            chain.pit_id,
            chain.len()
        )));
    }
    let tol = corner_close_factor * mean_edge(&chain.points(mesh));
    let mut events = Vec::new();
    for side in [Side::Left, Side::Right] {
        if let Some(e) = update_corner(mesh, chain, side, tol)? {
            events.push(e);
        }
    }
    Ok(events)
}

fn update_corner(
    mesh: &mut TriMesh,
    chain: &mut PitChain,
    side: Side,
    tol: f64,
) -> Result<Option<CornerEvent>> {
    let n = chain.len();
    let (ci, ni, xi, outward) = match side {
        Side::Left => (0, 1, 2, -1.0),
        Side::Right => (n - 1, n - 2, n - 3, 1.0),
    };
    let corner = chain.vertices[ci];
    let c = mesh.vertices[corner];
    let near = mesh.vertices[chain.vertices[ni]];
    let next = mesh.vertices[chain.vertices[xi]];
    let mut target = match extrapolate_to_surface(near, next) {
        Some(p) => p,
        None => {
            log::warn!(
                "pit {}: wall next to corner {corner} is parallel to the surface; projecting vertically",
                chain.pit_id
            );
            Vec2::new(near.x, 0.0)
        }
    };
    let advance = (target.x - c.x) * outward;
    let Some((edge, nb)) = surface_neighbour(mesh, corner) else {
        return Err(PitError::Geometry(format!(
            "corner {corner} of pit {} has no surface neighbour",
            chain.pit_id
        )));
    };
    let gap = (mesh.vertices[nb].x - c.x).abs();
    let foreign = mesh
        .boundary_edges
        .iter()
        .any(|e| e.v.contains(&nb) && e.tag.is_pit() && e.tag != BoundaryTag::Pit(chain.pit_id));

    if foreign {
        // Never take over another pit's corner; approach it geometrically.
        if advance > gap / 3.0 {
            target.x = c.x + outward * gap / 3.0;
            mesh.vertices[corner] = target;
            return Ok(Some(CornerEvent::Clamped { vertex: corner }));
        }
    } else if advance > 0.0 && (advance > 0.5 * gap || (target - c).norm() > tol) {
        mesh.vertices[nb] = target;
        mesh.vertices[corner] = 0.5 * (near + target);
        mesh.boundary_edges[edge].tag = BoundaryTag::Pit(chain.pit_id);
        match side {
            Side::Left => {
                chain.vertices.insert(0, nb);
                if let Some(a) = chain.apex.as_mut() {
                    *a += 1;
                }
            }
            Side::Right => {
                chain.vertices.push(nb);
            }
        }
        respace_from_corner(mesh, chain, side);
        return Ok(Some(CornerEvent::Absorbed {
            new_corner: nb,
            old_corner: corner,
        }));
    }
    if (target - c).norm() > tol {
        log::warn!(
            "pit {}: corner {corner} moves {:.3e} um inward, beyond the close tolerance",
            chain.pit_id,
            (target - c).norm()
        );
    }
    mesh.vertices[corner] = target;
    Ok(Some(CornerEvent::Moved {
        vertex: corner,
        from: c.x,
        to: target.x,
    }))
}

/// Vertices respaced next to a corner after an absorption.
const CORNER_WINDOW: usize = 4;

/// Spreads the first few wall vertices next to a corner evenly along the
/// wall when the corner edge has become short, so repeated absorptions do not
/// keep halving it.
fn respace_from_corner(mesh: &mut TriMesh, chain: &PitChain, side: Side) {
    let n = chain.len();
    let window = CORNER_WINDOW.min(n - 2);
    let idx: Vec<usize> = match side {
        Side::Left => (0..=window).collect(),
        Side::Right => (n - 1 - window..n).rev().collect(),
    };
    let p = |k: usize| mesh.vertices[chain.vertices[idx[k]]];
    if (p(1) - p(0)).norm() >= 0.6 * (p(2) - p(1)).norm() {
        return;
    }
    if let Some(a) = chain.apex {
        if idx.contains(&a) {
            return;
        }
    }
    let poly: Vec<Vec2> = idx.iter().map(|&k| mesh.vertices[chain.vertices[k]]).collect();
    let placed = redistribute(&poly, window - 1);
    for (k, p) in idx[1..window].iter().zip(placed) {
        mesh.vertices[chain.vertices[*k]] = p;
    }
}

fn cumulative_length(poly: &[Vec2]) -> Vec<f64> {
    let mut cum = vec![0.0];
    for w in poly.windows(2) {
        cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
    }
    cum
}

/// Points at increasing arc lengths `at` along a polyline.
fn sample_polyline(poly: &[Vec2], at: &[f64]) -> Vec<Vec2> {
    let cum = cumulative_length(poly);
    let mut seg = 0;
    at.iter()
        .map(|&s| {
            while seg + 2 < cum.len() && cum[seg + 1] < s {
                seg += 1;
            }
            let len = cum[seg + 1] - cum[seg];
            let f = if len > 0.0 { ((s - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
            poly[seg] + (poly[seg + 1] - poly[seg]) * f
        })
        .collect()
}

/// `count` points evenly spaced in arc length strictly between the first and
/// last points of a polyline.
pub fn redistribute(poly: &[Vec2], count: usize) -> Vec<Vec2> {
    let total = *cumulative_length(poly).last().unwrap();
    let at: Vec<f64> = (1..=count).map(|k| total * k as f64 / (count + 1) as f64).collect();
    sample_polyline(poly, &at)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MergeDescriptor {
    /// Index into `mesh.boundary_edges` of the gap edge.
    pub edge: usize,
    /// Pit on the left of the gap (owns the gap's left endpoint as its right corner).
    pub left_pit: usize,
    pub right_pit: usize,
    pub length: f64,
}

/// The shortest surface edge that joins the right corner of one pit to the
/// left corner of another and is shorter than `tol`.
pub fn detect_merge(mesh: &TriMesh, chains: &[PitChain], tol: f64) -> Option<MergeDescriptor> {
    let mut best: Option<MergeDescriptor> = None;
    for (k, e) in mesh.boundary_edges.iter().enumerate() {
        if e.tag != BoundaryTag::Bottom {
            continue;
        }
        let [a, b] = e.v;
        for ca in chains {
            for cb in chains {
                if ca.pit_id == cb.pit_id {
                    continue;
                }
                let joins = (ca.right_corner() == a && cb.left_corner() == b)
                    || (ca.right_corner() == b && cb.left_corner() == a);
                if !joins {
                    continue;
                }
                let length = (mesh.vertices[a] - mesh.vertices[b]).norm();
                if length < tol && best.is_none_or(|m| length < m.length) {
                    best = Some(MergeDescriptor {
                        edge: k,
                        left_pit: ca.pit_id,
                        right_pit: cb.pit_id,
                        length,
                    });
                }
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct MergeOutcome {
    pub apex_vertex: usize,
    pub relocated_vertex: usize,
    pub merged_pit: usize,
}

fn interior_angle(at: Vec2, p: Vec2, q: Vec2) -> f64 {
    let (u, v) = (p - at, q - at);
    (u.dot(&v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos()
}

/// Joins two adjacent pits across their gap edge without changing the mesh
/// topology. Chains are renumbered so pit ids stay contiguous and ordered.
pub fn merge_pits(
    mesh: &mut TriMesh,
    chains: &mut Vec<PitChain>,
    d: &MergeDescriptor,
) -> Result<MergeOutcome> {
    let [a, b] = mesh.boundary_edges[d.edge].v;
    let li = chains
        .iter()
        .position(|c| c.pit_id == d.left_pit)
        .ok_or_else(|| PitError::Merge(format!("no chain for pit {}", d.left_pit)))?;
    let ri = chains
        .iter()
        .position(|c| c.pit_id == d.right_pit)
        .ok_or_else(|| PitError::Merge(format!("no chain for pit {}", d.right_pit)))?;
    let (r, l) = if chains[li].right_corner() == a { (a, b) } else { (b, a) };
    if chains[li].len() < 3 || chains[ri].len() < 3 {
        return Err(PitError::Merge("pits to merge need at least 3 vertices each".into()));
    }

    let cells = mesh.cells_with_edge(r, l);
    if cells.len() != 1 {
        return Err(PitError::Merge(format!(
            "gap edge {r}-{l} belongs to {} cells",
            cells.len()
        )));
    }
    let t = mesh.triangles[cells[0]];
    let third = t.iter().copied().find(|&v| v != r && v != l).unwrap();
    let (pr, pl, pt) = (mesh.vertices[r], mesh.vertices[l], mesh.vertices[third]);
    let angle_r = interior_angle(pr, pl, pt);
    let angle_l = interior_angle(pl, pr, pt);

    let saved = mesh.clone();
    let mid = 0.5 * (pr + pl);
    let left_chain = &chains[li].vertices;
    let right_chain = &chains[ri].vertices;
    let (apex_v, moved_v) = if angle_r >= angle_l {
        let green = mesh.vertices[right_chain[1]];
        mesh.vertices[r] = mid;
        mesh.vertices[l] = 0.5 * (mid + green);
        (r, l)
    } else {
        let green = mesh.vertices[left_chain[left_chain.len() - 2]];
        mesh.vertices[l] = mid;
        mesh.vertices[r] = 0.5 * (mid + green);
        (l, r)
    };
    if let Some((cell, area)) = mesh.first_inverted() {
        *mesh = saved;
        return Err(PitError::Merge(format!(
            "merging pits {} and {} inverts cell {cell} (area {area:e}); use a smaller merge_gap_tol",
            d.left_pit, d.right_pit
        )));
    }

    let merged_id = d.left_pit.min(d.right_pit);
    let gone = d.left_pit.max(d.right_pit);
    let mut vertices = chains[li].vertices.clone();
    vertices.extend_from_slice(&chains[ri].vertices);
    let apex = vertices.iter().position(|&v| v == apex_v).unwrap();
    mesh.boundary_edges[d.edge].tag = BoundaryTag::Pit(merged_id);
    for e in &mut mesh.boundary_edges {
        if let BoundaryTag::Pit(id) = e.tag {
            if id == gone {
                e.tag = BoundaryTag::Pit(merged_id);
            } else if id > gone {
                e.tag = BoundaryTag::Pit(id - 1);
            }
        }
    }
    let merged = PitChain {
        pit_id: merged_id,
        vertices,
        apex: Some(apex),
    };
    let mut rest: Vec<PitChain> = chains
        .drain(..)
        .filter(|c| c.pit_id != d.left_pit && c.pit_id != d.right_pit)
        .map(|mut c| {
            if c.pit_id > gone {
                c.pit_id -= 1;
            }
            c
        })
        .collect();
    rest.push(merged);
    rest.sort_by_key(|x| x.pit_id);
    *chains = rest;
    Ok(MergeOutcome {
        apex_vertex: apex_v,
        relocated_vertex: moved_v,
        merged_pit: merged_id,
    })
}

/// Intersection of the lines through `(p1, p2)` and `(q1, q2)`, rejected when
/// their directions are within `min_angle` radians of parallel.
fn line_intersection(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2, min_angle: f64) -> Option<(Vec2, f64, f64)> {
    let u = p2 - p1;
    let v = q2 - q1;
    let cross = u.x * v.y - u.y * v.x;
    if cross.abs() <= min_angle.sin() * u.norm() * v.norm() {
        return None;
    }
    let w = q1 - p1;
    let s = (w.x * v.y - w.y * v.x) / cross;
    let t = (w.x * u.y - w.y * u.x) / cross;
    Some((p1 + u * s, s, t))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ApexMethod {
    Extrapolated,
    Fallback,
}

/// Apex from the straight-line extensions of the second edges on either side
/// of it: `(apex-2, apex-1)` on the left and `(apex+1, apex+2)` on the right.
/// Near-parallel walls (under 1 degree) fall back to moving the apex by the
/// mean displacement of its two neighbours, `old` being the positions before
/// the step.
pub fn track_apex(old: &[Vec2], new: &[Vec2], apex: usize) -> Result<(Vec2, ApexMethod)> {
    if apex < 2 || apex + 2 >= new.len() {
        return Err(PitError::Geometry(format!(
            "apex at {apex} needs two edges on each side in a chain of {}",
            new.len()
        )));
    }
    let hit = line_intersection(
        new[apex - 2],
        new[apex - 1],
        new[apex + 2],
        new[apex + 1],
        1f64.to_radians(),
    );
    match hit {
        Some((p, _, _)) => Ok((p, ApexMethod::Extrapolated)),
        None => {
            log::warn!("apex walls are within 1 degree of parallel; using neighbour displacement");
            let shift = 0.5 * ((new[apex - 1] - old[apex - 1]) + (new[apex + 1] - old[apex + 1]));
            Ok((old[apex] + shift, ApexMethod::Fallback))
        }
    }
}

/// Segment `k` on one side of the apex, counted outward; segment 0 is the ray
/// continuing the wall beyond the vertex next to the apex.
fn side_piece(points: &[Vec2], apex: usize, left: bool, k: usize) -> Option<(Vec2, Vec2, bool)> {
    let at = |off: usize| -> Option<Vec2> {
        if left {
            apex.checked_sub(off).map(|i| points[i])
        } else {
            points.get(apex + off).copied()
        }
    };
    if k == 0 {
        Some((at(2)?, at(1)?, true))
    } else {
        Some((at(k + 1)?, at(k)?, false))
    }
}

fn piece_hit(p: (Vec2, Vec2, bool), q: (Vec2, Vec2, bool)) -> Option<Vec2> {
    let (x, s, t) = line_intersection(p.0, p.1, q.0, q.1, 1e-9)?;
    let ok = |param: f64, ray: bool| if ray { param >= 1.0 } else { (0.0..=1.0).contains(&param) };
    (ok(s, p.2) && ok(t, q.2)).then_some(x)
}

/// Where the two walls of a merged pit meet after a step, and how many wall
/// vertices each side lost past that point.
fn apex_meeting(points: &[Vec2], apex: usize, max_swallow: usize) -> Option<(Vec2, usize, usize)> {
    for total in 0..=2 * max_swallow {
        for kl in 0..=total.min(max_swallow) {
            let kr = total - kl;
            if kr > max_swallow {
                continue;
            }
            let (Some(p), Some(q)) = (
                side_piece(points, apex, true, kl),
                side_piece(points, apex, false, kr),
            ) else {
                continue;
            };
            if let Some(x) = piece_hit(p, q) {
                return Some((x, kl, kr));
            }
        }
    }
    None
}

/// Places the apex of a merged chain after its other vertices have moved.
///
/// The apex goes to [`track_apex`]'s extrapolated point when the walls meet
/// there. When the converging walls have already passed vertices near the
/// apex, it goes to the actual meeting point and the vertices beyond it are
/// dropped. The apex never rises. Both walls are then resampled so each
/// vertex keeps its previous arc-length fraction between corner and apex.
pub fn place_apex(old: &[Vec2], points: &mut [Vec2], apex: usize) -> Result<ApexMethod> {
    let (tracked, method) = track_apex(old, points, apex)?;
    let n = points.len();
    let shift = 0.5 * ((points[apex - 1] - old[apex - 1]) + (points[apex + 1] - old[apex + 1]));
    let fallback = old[apex] + shift;
    let max_swallow = (apex - 1).min(n - apex - 2).min(8);
    let found = match method {
        ApexMethod::Extrapolated => apex_meeting(points, apex, max_swallow),
        ApexMethod::Fallback => None,
    };
    let (mut pos, mut kl, mut kr, mut method) = match found {
        Some((p, kl, kr)) => (p, kl, kr, ApexMethod::Extrapolated),
        None if method == ApexMethod::Fallback => (tracked, 0, 0, method),
        None => (fallback, 0, 0, ApexMethod::Fallback),
    };
    if pos.y > old[apex].y {
        pos = Vec2::new(fallback.x, fallback.y.min(old[apex].y));
        kl = 0;
        kr = 0;
        method = ApexMethod::Fallback;
    }
    points[apex] = pos;
    keep_fractions(old, points, apex, kl, true);
    keep_fractions(old, points, apex, kr, false);
    Ok(method)
}

/// Puts every vertex on one side of the apex at the arc-length fraction it
/// had before the step, measured along the wall from the corner to the apex.
/// The `lost` vertices nearest the apex were swallowed and are dropped from
/// the wall first.
fn keep_fractions(old: &[Vec2], points: &mut [Vec2], apex: usize, lost: usize, left: bool) {
    let side: Vec<usize> = if left {
        (0..=apex).collect()
    } else {
        (apex..points.len()).rev().collect()
    };
    let old_cum = cumulative_length(&side.iter().map(|&i| old[i]).collect::<Vec<_>>());
    let old_len = *old_cum.last().unwrap();
    if old_len <= 0.0 {
        return;
    }
    let mut wall: Vec<Vec2> = side[..side.len() - 1 - lost].iter().map(|&i| points[i]).collect();
    wall.push(points[apex]);
    let new_len = *cumulative_length(&wall).last().unwrap();
    let targets: Vec<f64> = old_cum[1..side.len() - 1]
        .iter()
        .map(|s| s / old_len * new_len)
        .collect();
    for (&i, p) in side[1..side.len() - 1].iter().zip(sample_polyline(&wall, &targets)) {
        points[i] = p;
    }
}

/// Checks the geometric invariants of an updated chain: no self-intersection,
/// corners on the surface, everything else below it (the apex may sit on it).
pub fn check_chain(points: &[Vec2], pit_id: usize, apex: Option<usize>) -> Result<()> {
    if let Some((first, second)) = polyline_self_intersection(points) {
        return Err(PitError::SelfIntersection {
            pit_id,
            first,
            second,
        });
    }
    let n = points.len();
    for (i, p) in points.iter().enumerate() {
        let corner = i == 0 || i + 1 == n;
        if corner && p.y != 0.0 {
            return Err(PitError::Geometry(format!(
                "pit {pit_id} corner {i} left the surface (y = {:e})",
                p.y
            )));
        }
        if !corner && p.y > 0.0 && Some(i) != apex {
            return Err(PitError::Geometry(format!(
                "pit {pit_id} wall vertex {i} crossed the surface (y = {:e}); reduce dt",
                p.y
            )));
        }
    }
    Ok(())
}

/// Outward unit normal of the first pit edge of a chain.
pub fn corner_normal(points: &[Vec2]) -> Option<Vec2> {
    face_normal(points[0], points[1])
}

/// Area of the pit cavity below `y = 0` enclosed by a chain.
pub fn pit_area(points: &[Vec2]) -> f64 {
    let mut s = 0.0;
    for w in points.windows(2) {
        s += w[0].x * w[1].y - w[1].x * w[0].y;
    }
    // Closing segment runs along y = 0 and contributes nothing.
    0.5 * s.abs()
}
