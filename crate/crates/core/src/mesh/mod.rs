//! Triangulation of the electrolyte domain.
//!
//! The mesh is the single evolving geometric state of a run. Coordinates are
//! in micrometres, cells are counterclockwise, and the boundary is covered by
//! tagged edges: the four sides of the rectangle plus one tag per pit.
//! Vertex and cell counts never change after construction; only positions and
//! the tags of boundary edges do.

mod exchange;
mod geometry;

use std::collections::HashMap;
use std::fmt;

use nalgebra::{Matrix2, Vector2};

use crate::error::{PitError, Result};

pub use exchange::{read_mesh, read_mesh_str, write_mesh, write_mesh_string};
pub(crate) use geometry::normals_of_points;
pub use geometry::{
    face_and_vertex_normals, face_normal, min_distance_to_pit, point_segment_distance,
    polyline_self_intersection, segments_intersect,
};

pub type Vec2 = Vector2<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    /// Electrolyte surface far from the metal; carries the potential reference.
    Top,
    Left,
    Right,
    /// Undissolved metal surface on `y = 0`.
    Bottom,
    /// Pit wall, identified by a contiguous pit id.
    Pit(usize),
}

impl BoundaryTag {
    pub fn pit_id(self) -> Option<usize> {
        match self {
            BoundaryTag::Pit(id) => Some(id),
            _ => None,
        }
    }

    pub fn is_pit(self) -> bool {
        matches!(self, BoundaryTag::Pit(_))
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryTag::Top => f.write_str("top"),
            BoundaryTag::Left => f.write_str("left"),
            BoundaryTag::Right => f.write_str("right"),
            BoundaryTag::Bottom => f.write_str("bottom"),
            BoundaryTag::Pit(id) => write!(f, "pit {id}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

/// Ordered vertex chain of one pit, from the left corner to the right corner.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PitChain {
    pub pit_id: usize,
    pub vertices: Vec<usize>,
    /// Position in `vertices` of the ridge left behind by a merge, if any.
    pub apex: Option<usize>,
}

impl PitChain {
    pub fn new(pit_id: usize, vertices: Vec<usize>) -> Self {
        PitChain {
            pit_id,
            vertices,
            apex: None,
        }
    }

    pub fn left_corner(&self) -> usize {
        self.vertices[0]
    }

    pub fn right_corner(&self) -> usize {
        *self.vertices.last().expect("pit chain is never empty")
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = [usize; 2]> + '_ {
        self.vertices.windows(2).map(|w| [w[0], w[1]])
    }

    pub fn points(&self, mesh: &TriMesh) -> Vec<Vec2> {
        self.vertices.iter().map(|&v| mesh.vertices[v]).collect()
    }
}

/// Affine map from the reference triangle (0,0),(1,0),(0,1) onto a cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMap {
    pub jacobian: Matrix2<f64>,
    pub translation: Vec2,
    pub area: f64,
}

impl AffineMap {
    pub fn apply(&self, reference: Vec2) -> Vec2 {
        self.jacobian * reference + self.translation
    }
}

impl TriMesh {
    /// Builds a mesh, flipping any clockwise cell to counterclockwise order.
    pub fn new(
        vertices: Vec<Vec2>,
        mut triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Self> {
        let n = vertices.len();
        for (c, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(PitError::Invalid(format!(
                    "cell {c} references a vertex outside 0..{n}"
                )));
            }
            if signed_area_of(&vertices, *tri) < 0.0 {
                tri.swap(1, 2);
            }
        }
        for e in &boundary_edges {
            if e.v.iter().any(|&v| v >= n) {
                return Err(PitError::Invalid(format!(
                    "boundary edge {:?} references a vertex outside 0..{n}",
                    e.v
                )));
            }
        }
        Ok(TriMesh {
            vertices,
            triangles,
            boundary_edges,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.triangles.len()
    }

    pub fn cell_points(&self, cell: usize) -> [Vec2; 3] {
        let t = self.triangles[cell];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn signed_area(&self, cell: usize) -> f64 {
        signed_area_of(&self.vertices, self.triangles[cell])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.signed_area(c)).sum()
    }

    pub fn min_signed_area(&self) -> (usize, f64) {
        (0..self.num_cells())
            .map(|c| (c, self.signed_area(c)))
            .fold((usize::MAX, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc })
    }

    /// First cell with non-positive signed area, if any.
    pub fn first_inverted(&self) -> Option<(usize, f64)> {
        (0..self.num_cells())
            .map(|c| (c, self.signed_area(c)))
            .find(|&(_, a)| a <= 0.0)
    }

    pub fn affine_map(&self, cell: usize) -> Result<AffineMap> {
        if cell >= self.num_cells() {
            return Err(PitError::Invalid(format!(
                "cell index {cell} out of range 0..{}",
                self.num_cells()
            )));
        }
        let [p0, p1, p2] = self.cell_points(cell);
        let jacobian = Matrix2::from_columns(&[p1 - p0, p2 - p0]);
        let det = jacobian.determinant();
        if det <= 0.0 {
            return Err(PitError::InvertedElement {
                cell,
                area: 0.5 * det,
            });
        }
        Ok(AffineMap {
            jacobian,
            translation: p0,
            area: 0.5 * det,
        })
    }

    pub fn tag_count(&self) -> HashMap<BoundaryTag, usize> {
        let mut out = HashMap::new();
        for e in &self.boundary_edges {
            *out.entry(e.tag).or_insert(0) += 1;
        }
        out
    }

    pub fn num_pits(&self) -> usize {
        self.boundary_edges
            .iter()
            .filter_map(|e| e.tag.pit_id())
            .max()
            .map_or(0, |m| m + 1)
    }

    /// Index of the boundary edge joining `a` and `b` (either orientation).
    pub fn find_boundary_edge(&self, a: usize, b: usize) -> Option<usize> {
        self.boundary_edges
            .iter()
            .position(|e| (e.v[0] == a && e.v[1] == b) || (e.v[0] == b && e.v[1] == a))
    }

    /// Cells that contain the undirected edge `a`-`b`.
    pub fn cells_with_edge(&self, a: usize, b: usize) -> Vec<usize> {
        self.triangles
            .iter()
            .enumerate()
            .filter(|(_, t)| t.contains(&a) && t.contains(&b))
            .map(|(c, _)| c)
            .collect()
    }

    /// Per-vertex list of incident cells.
    pub fn vertex_cells(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_vertices()];
        for (c, t) in self.triangles.iter().enumerate() {
            for &v in t {
                out[v].push(c);
            }
        }
        out
    }

    /// Unique undirected edges, each as (min, max).
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<[usize; 2]> = self
            .triangles
            .iter()
            .flat_map(|t| {
                [[t[0], t[1]], [t[1], t[2]], [t[2], t[0]]]
                    .map(|[a, b]| if a < b { [a, b] } else { [b, a] })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Tags attached to each vertex through its boundary edges.
    pub fn vertex_tags(&self) -> Vec<Vec<BoundaryTag>> {
        let mut out: Vec<Vec<BoundaryTag>> = vec![Vec::new(); self.num_vertices()];
        for e in &self.boundary_edges {
            for &v in &e.v {
                if !out[v].contains(&e.tag) {
                    out[v].push(e.tag);
                }
            }
        }
        out
    }

    /// Shoelace area of the tagged boundary loop.
    pub fn boundary_loop_area(&self) -> Result<f64> {
        // Orient every boundary edge the way its owning cell traverses it.
        let mut directed: HashMap<usize, usize> = HashMap::new();
        for e in &self.boundary_edges {
            let [a, b] = e.v;
            let cells = self.cells_with_edge(a, b);
            if cells.len() != 1 {
                return Err(PitError::Geometry(format!(
                    "boundary edge {a}-{b} belongs to {} cells",
                    cells.len()
                )));
            }
            let t = self.triangles[cells[0]];
            let forward = (0..3).any(|k| t[k] == a && t[(k + 1) % 3] == b);
            let (from, to) = if forward { (a, b) } else { (b, a) };
            directed.insert(from, to);
        }
        let mut area = 0.0;
        for (&from, &to) in &directed {
            let p = self.vertices[from];
            let q = self.vertices[to];
            area += p.x * q.y - q.x * p.y;
        }
        Ok(0.5 * area)
    }

    /// Pit chains reconstructed from the `Pit` edge tags, ordered left to right.
    pub fn chains_from_tags(&self) -> Result<Vec<PitChain>> {
        let mut per_pit: HashMap<usize, Vec<[usize; 2]>> = HashMap::new();
        for e in &self.boundary_edges {
            if let BoundaryTag::Pit(id) = e.tag {
                per_pit.entry(id).or_default().push(e.v);
            }
        }
        let mut ids: Vec<usize> = per_pit.keys().copied().collect();
        ids.sort_unstable();
        let mut chains = Vec::with_capacity(ids.len());
        for (expected, &id) in ids.iter().enumerate() {
            if id != expected {
                return Err(PitError::Invalid(format!(
                    "pit ids are not contiguous from 0 (found {id}, expected {expected})"
                )));
            }
            chains.push(order_chain(self, id, &per_pit[&id])?);
        }
        Ok(chains)
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

fn order_chain(mesh: &TriMesh, pit_id: usize, edges: &[[usize; 2]]) -> Result<PitChain> {
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    for &[a, b] in edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut ends: Vec<usize> = adj
        .iter()
        .filter(|(_, n)| n.len() == 1)
        .map(|(&v, _)| v)
        .collect();
    if ends.len() != 2 || adj.values().any(|n| n.len() > 2) {
        return Err(PitError::Invalid(format!(
            "pit {pit_id} edges do not form a simple open chain"
        )));
    }
    ends.sort_by(|&a, &b| mesh.vertices[a].x.total_cmp(&mesh.vertices[b].x));
    let mut chain = vec![ends[0]];
    let mut prev = usize::MAX;
    let mut cur = ends[0];
    while cur != ends[1] {
        let next = adj[&cur]
            .iter()
            .copied()
            .find(|&n| n != prev)
            .ok_or_else(|| PitError::Invalid(format!("pit {pit_id} chain is broken")))?;
        prev = cur;
        cur = next;
        chain.push(cur);
        if chain.len() > edges.len() + 1 {
            return Err(PitError::Invalid(format!("pit {pit_id} chain contains a loop")));
        }
    }
    if chain.len() != edges.len() + 1 {
        return Err(PitError::Invalid(format!(
            "pit {pit_id} edges are not connected"
        )));
    }
    Ok(PitChain::new(pit_id, chain))
}

pub(crate) fn signed_area_of(vertices: &[Vec2], t: [usize; 3]) -> f64 {
    let a = vertices[t[0]];
    let b = vertices[t[1]];
    let c = vertices[t[2]];
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NonPositiveArea { cell: usize, area: f64 },
    EdgeCellCount { v: [usize; 2], cells: usize },
    UntaggedBoundary { v: [usize; 2] },
    DuplicateTag { v: [usize; 2] },
    NonContiguousPitIds { ids: Vec<usize> },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate(mesh: &TriMesh) -> ValidationReport {
    let mut violations = Vec::new();
    for c in 0..mesh.num_cells() {
        let area = mesh.signed_area(c);
        if area <= 0.0 || !area.is_finite() {
            violations.push(Violation::NonPositiveArea { cell: c, area });
        }
    }

    let mut edge_cells: HashMap<[usize; 2], usize> = HashMap::new();
    for t in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *edge_cells.entry([a.min(b), a.max(b)]).or_insert(0) += 1;
        }
    }
    let mut tagged: HashMap<[usize; 2], usize> = HashMap::new();
    for e in &mesh.boundary_edges {
        let key = [e.v[0].min(e.v[1]), e.v[0].max(e.v[1])];
        *tagged.entry(key).or_insert(0) += 1;
        let cells = edge_cells.get(&key).copied().unwrap_or(0);
        if cells != 1 {
            violations.push(Violation::EdgeCellCount { v: e.v, cells });
        }
    }
    let mut dup: Vec<[usize; 2]> = tagged
        .iter()
        .filter(|(_, &n)| n > 1)
        .map(|(&k, _)| k)
        .collect();
    dup.sort_unstable();
    violations.extend(dup.into_iter().map(|v| Violation::DuplicateTag { v }));

    let mut open: Vec<[usize; 2]> = edge_cells
        .iter()
        .filter(|(k, &n)| n == 1 && !tagged.contains_key(*k))
        .map(|(&k, _)| k)
        .collect();
    open.sort_unstable();
    violations.extend(open.into_iter().map(|v| Violation::UntaggedBoundary { v }));

    let mut ids: Vec<usize> = mesh
        .boundary_edges
        .iter()
        .filter_map(|e| e.tag.pit_id())
        .collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.iter().enumerate().any(|(i, &id)| i != id) {
        violations.push(Violation::NonContiguousPitIds { ids });
    }
    ValidationReport { violations }
}
