//! Plain-text mesh exchange format.
//!
//! ```text
//! $Nodes
//! <count>
//! <id> <x> <y>
//! $Elements
//! <count>
//! <id> <v1> <v2> <v3>
//! $BoundaryEdges
//! <count>
//! <v1> <v2> <tag> [pit_id]
//! ```
//!
//! Ids are 0-based. Tags are 1 = top, 2 = left, 3 = right, 4 = bottom and
//! 5 = pit, the last followed by the pit id. Coordinates use the shortest
//! representation that parses back to the same `f64`.

use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryEdge, BoundaryTag, TriMesh, Vec2};
use crate::error::{PitError, Result};

fn tag_code(tag: BoundaryTag) -> String {
    match tag {
        BoundaryTag::Top => "1".into(),
        BoundaryTag::Left => "2".into(),
        BoundaryTag::Right => "3".into(),
        BoundaryTag::Bottom => "4".into(),
        BoundaryTag::Pit(id) => format!("5 {id}"),
    }
}

pub fn write_mesh_string(mesh: &TriMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "$Nodes\n{}", mesh.num_vertices());
    for (i, p) in mesh.vertices.iter().enumerate() {
        let _ = writeln!(s, "{i} {:?} {:?}", p.x, p.y);
    }
    let _ = writeln!(s, "$Elements\n{}", mesh.num_cells());
    for (i, t) in mesh.triangles.iter().enumerate() {
        let _ = writeln!(s, "{i} {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "$BoundaryEdges\n{}", mesh.boundary_edges.len());
    for e in &mesh.boundary_edges {
        let _ = writeln!(s, "{} {} {}", e.v[0], e.v[1], tag_code(e.tag));
    }
    s
}

pub fn write_mesh(mesh: &TriMesh, path: &Path) -> Result<()> {
    std::fs::write(path, write_mesh_string(mesh)).map_err(|e| PitError::io(path, e))
}

pub fn read_mesh(path: &Path) -> Result<TriMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| PitError::io(path, e))?;
    read_mesh_str(&text, &path.display().to_string())
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    source: &'a str,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        loop {
            match self.inner.next() {
                Some((i, l)) => {
                    self.last = i + 1;
                    let l = l.trim();
                    if !l.is_empty() && !l.starts_with('#') {
                        return Ok(l);
                    }
                }
                None => return Err(self.err("unexpected end of file")),
            }
        }
    }

    fn err(&self, msg: impl Into<String>) -> PitError {
        PitError::Parse {
            path: self.source.to_string(),
            line: self.last,
            message: msg.into(),
        }
    }

    fn section(&mut self, name: &str) -> Result<usize> {
        let header = self.next()?;
        if header != name {
            return Err(self.err(format!("expected `{name}`, found `{header}`")));
        }
        let count = self.next()?;
        count
            .parse()
            .map_err(|_| self.err(format!("bad count `{count}` for {name}")))
    }

    fn fields<T: std::str::FromStr>(&mut self, n: usize) -> Result<Vec<T>> {
        let line = self.next()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != n {
            return Err(self.err(format!("expected {n} fields, found {}", parts.len())));
        }
        parts
            .iter()
            .map(|p| p.parse::<T>().map_err(|_| self.err(format!("cannot parse `{p}`"))))
            .collect()
    }
}

pub fn read_mesh_str(text: &str, source: &str) -> Result<TriMesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate().peekable(),
        source,
        last: 0,
    };

    let n = lines.section("$Nodes")?;
    let mut vertices = Vec::with_capacity(n);
    for i in 0..n {
        let line = lines.next()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(lines.err("node line must be `id x y`"));
        }
        let id: usize = parts[0].parse().map_err(|_| lines.err("bad node id"))?;
        if id != i {
            return Err(lines.err(format!("node ids must be consecutive from 0, found {id}")));
        }
        let x: f64 = parts[1].parse().map_err(|_| lines.err("bad x coordinate"))?;
        let y: f64 = parts[2].parse().map_err(|_| lines.err("bad y coordinate"))?;
        vertices.push(Vec2::new(x, y));
    }

    let m = lines.section("$Elements")?;
    let mut triangles = Vec::with_capacity(m);
    for i in 0..m {
        let f: Vec<usize> = lines.fields(4)?;
        if f[0] != i {
            return Err(lines.err(format!("element ids must be consecutive from 0, found {}", f[0])));
        }
        triangles.push([f[1], f[2], f[3]]);
    }

    let k = lines.section("$BoundaryEdges")?;
    let mut edges = Vec::with_capacity(k);
    for _ in 0..k {
        let line = lines.next()?;
        let f: Vec<usize> = line
            .split_whitespace()
            .map(|p| p.parse().map_err(|_| lines.err(format!("cannot parse `{p}`"))))
            .collect::<Result<_>>()?;
        let tag = match (f.get(2), f.len()) {
            (Some(1), 3) => BoundaryTag::Top,
            (Some(2), 3) => BoundaryTag::Left,
            (Some(3), 3) => BoundaryTag::Right,
            (Some(4), 3) => BoundaryTag::Bottom,
            (Some(5), 4) => BoundaryTag::Pit(f[3]),
            _ => return Err(lines.err(format!("bad boundary edge `{line}`"))),
        };
        edges.push(BoundaryEdge { v: [f[0], f[1]], tag });
    }
    TriMesh::new(vertices, triangles, edges)
}
