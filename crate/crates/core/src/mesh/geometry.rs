use super::{PitChain, TriMesh, Vec2};
use crate::error::{PitError, Result};

/// Unit normal of the directed pit edge `a -> b`, pointing out of the
/// electrolyte and into the metal.
///
/// Chains run left to right underneath the electrolyte, so the metal lies on
/// the right-hand side of every edge.
pub fn face_normal(a: Vec2, b: Vec2) -> Option<Vec2> {
    let t = b - a;
    let len = t.norm();
    if len <= 0.0 || !len.is_finite() {
        return None;
    }
    Some(Vec2::new(t.y, -t.x) / len)
}

/// Vertex normals along a chain: normalized averages of the two adjacent face
/// normals, and the single face normal at each corner.
pub fn face_and_vertex_normals(mesh: &TriMesh, chain: &PitChain) -> Result<Vec<Vec2>> {
    normals_of_points(&chain.points(mesh)).map_err(|edge| {
        PitError::Geometry(format!(
            "pit {} edge {edge} ({} -> {}) has zero length",
            chain.pit_id,
            chain.vertices[edge],
            chain.vertices[edge + 1]
        ))
    })
}

/// Vertex normals of a bare polyline; the error carries the offending edge.
pub(crate) fn normals_of_points(points: &[Vec2]) -> std::result::Result<Vec<Vec2>, usize> {
    if points.len() < 3 {
        return Err(0);
    }
    let faces = points
        .windows(2)
        .enumerate()
        .map(|(i, w)| face_normal(w[0], w[1]).ok_or(i))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let n = points.len();
    let mut out = Vec::with_capacity(n);
    out.push(faces[0]);
    for i in 1..n - 1 {
        let avg = faces[i - 1] + faces[i];
        let len = avg.norm();
        // A perfect fold-back has no defined average; keep the incoming face.
        out.push(if len > 1e-300 { avg / len } else { faces[i - 1] });
    }
    out.push(faces[n - 2]);
    Ok(out)
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let s = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * s)).norm()
}

/// Euclidean distance from `p` to the nearest point on any pit chain segment.
pub fn min_distance_to_pit(p: Vec2, chains: &[PitChain], mesh: &TriMesh) -> f64 {
    let mut best = f64::INFINITY;
    for chain in chains {
        for [a, b] in chain.edges() {
            let d = point_segment_distance(p, mesh.vertices[a], mesh.vertices[b]);
            if d < best {
                best = d;
            }
        }
        if chain.len() == 1 {
            best = best.min((p - mesh.vertices[chain.vertices[0]]).norm());
        }
    }
    best
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// First pair of segments of an open polyline that cross, touch, or fold back.
pub fn polyline_self_intersection(points: &[Vec2]) -> Option<(usize, usize)> {
    let m = points.len().saturating_sub(1);
    for i in 0..m {
        let (a, b) = (points[i], points[i + 1]);
        if i + 1 < m {
            // Adjacent segments only meet at the shared vertex unless they fold back.
            let c = points[i + 2];
            let u = b - a;
            let v = c - b;
            if orient(a, b, c).abs() <= 1e-14 * u.norm() * v.norm() && u.dot(&v) < 0.0 {
                return Some((i, i + 1));
            }
        }
        for j in i + 2..m {
            if segments_intersect(a, b, points[j], points[j + 1]) {
                return Some((i, j));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundaryEdge, BoundaryTag};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn chain_mesh(points: &[Vec2]) -> (TriMesh, PitChain) {
        // Geometry queries only read vertex positions; cells are irrelevant here.
        let n = points.len();
        let edges = (0..n - 1)
            .map(|i| BoundaryEdge { v: [i, i + 1], tag: BoundaryTag::Pit(0) })
            .collect();
        let mesh = TriMesh {
            vertices: points.to_vec(),
            triangles: vec![],
            boundary_edges: edges,
        };
        (mesh, PitChain::new(0, (0..n).collect()))
    }

    #[test]
    fn flat_segment_normal_points_down() {
        let pts = [Vec2::new(-1.0, -1.0), Vec2::new(0.0, -1.0), Vec2::new(1.0, -1.0)];
        let (mesh, chain) = chain_mesh(&pts);
        let n = face_and_vertex_normals(&mesh, &chain).unwrap();
        assert_relative_eq!(n[1], Vec2::new(0.0, -1.0), epsilon = 1e-15);
    }

    #[test]
    fn right_angle_corner_normal() {
        let pts = [Vec2::new(-1.0, -1.0), Vec2::new(0.0, -1.0), Vec2::new(0.0, 0.0)];
        let (mesh, chain) = chain_mesh(&pts);
        let n = face_and_vertex_normals(&mesh, &chain).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert_relative_eq!(n[1], Vec2::new(s, -s), epsilon = 1e-15);
        // corners take their single face normal
        assert_relative_eq!(n[0], Vec2::new(0.0, -1.0), epsilon = 1e-15);
        assert_relative_eq!(n[2], Vec2::new(1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn semicircle_normals_are_radial() {
        let r = 5.0;
        for &n in &[16usize, 32, 64] {
            let pts: Vec<Vec2> = (0..=n)
                .map(|k| {
                    let th = std::f64::consts::PI * (1.0 + k as f64 / n as f64);
                    Vec2::new(r * th.cos(), r * th.sin())
                })
                .collect();
            let (mesh, chain) = chain_mesh(&pts);
            let normals = face_and_vertex_normals(&mesh, &chain).unwrap();
            for k in 1..n {
                let radial = pts[k] / r;
                // The averaged normal is the outward radial direction (into the metal).
                assert_relative_eq!(normals[k], radial, epsilon = 1e-12);
                assert_relative_eq!(normals[k].norm(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_length_edge_is_an_error() {
        let pts = [Vec2::new(0.0, 0.0), Vec2::new(0.0, 0.0), Vec2::new(1.0, -1.0)];
        let (mesh, chain) = chain_mesh(&pts);
        assert!(matches!(
            face_and_vertex_normals(&mesh, &chain),
            Err(PitError::Geometry(_))
        ));
    }

    #[test]
    fn distance_examples() {
        let pts = [Vec2::new(-5.0, 0.0), Vec2::new(0.0, 0.0), Vec2::new(5.0, 0.0)];
        let (mesh, chain) = chain_mesh(&pts);
        let chains = [chain];
        assert_eq!(min_distance_to_pit(pts[1], &chains, &mesh), 0.0);
        assert_relative_eq!(min_distance_to_pit(Vec2::new(0.0, 2.0), &chains, &mesh), 2.0);
        assert_relative_eq!(
            min_distance_to_pit(Vec2::new(8.0, 4.0), &chains, &mesh),
            5.0,
            epsilon = 1e-14
        );
    }

    fn dense_polyline_distance(p: Vec2, pts: &[Vec2]) -> f64 {
        let mut best = f64::INFINITY;
        for w in pts.windows(2) {
            for k in 0..=2000 {
                let s = k as f64 / 2000.0;
                best = best.min((p - (w[0] + (w[1] - w[0]) * s)).norm());
            }
        }
        best
    }

    proptest! {
        #[test]
        fn distance_matches_dense_sampling(
            px in -10.0f64..10.0, py in -10.0f64..10.0,
            ys in proptest::collection::vec(-4.0f64..0.0, 4..8)
        ) {
            let n = ys.len();
            let pts: Vec<Vec2> = ys.iter().enumerate()
                .map(|(i, &y)| Vec2::new(-5.0 + 10.0 * i as f64 / (n - 1) as f64, y))
                .collect();
            let (mesh, chain) = chain_mesh(&pts);
            let p = Vec2::new(px, py);
            let d = min_distance_to_pit(p, &[chain], &mesh);
            let brute = dense_polyline_distance(p, &pts);
            // Dense samples overestimate by at most half a sample spacing.
            prop_assert!(d <= brute + 1e-12);
            prop_assert!(brute - d <= 5e-3);
        }

        #[test]
        fn distance_is_one_lipschitz(
            ax in -10.0f64..10.0, ay in -10.0f64..10.0,
            bx in -10.0f64..10.0, by in -10.0f64..10.0
        ) {
            let pts: Vec<Vec2> = (0..=12)
                .map(|k| {
                    let th = std::f64::consts::PI * (1.0 + k as f64 / 12.0);
                    Vec2::new(3.0 * th.cos(), 3.0 * th.sin())
                })
                .collect();
            let (mesh, chain) = chain_mesh(&pts);
            let chains = [chain];
            let a = Vec2::new(ax, ay);
            let b = Vec2::new(bx, by);
            let da = min_distance_to_pit(a, &chains, &mesh);
            let db = min_distance_to_pit(b, &chains, &mesh);
            prop_assert!((da - db).abs() <= (a - b).norm() + 1e-12);
        }
    }

    #[test]
    fn self_intersection_detection() {
        let ok = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, -1.0),
            Vec2::new(2.0, -1.0),
            Vec2::new(3.0, 0.0),
        ];
        assert_eq!(polyline_self_intersection(&ok), None);
        let bow = [
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, -1.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(0.5, -1.0),
        ];
        assert_eq!(polyline_self_intersection(&bow), Some((0, 2)));
        let fold = [Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(1.0, 0.0)];
        assert_eq!(polyline_self_intersection(&fold), Some((0, 1)));
    }
}
