//! Legacy ASCII VTK unstructured grids.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{PitError, Result};
use crate::mesh::{TriMesh, Vec2};

/// VTK cell type of a linear triangle.
const VTK_TRIANGLE: u32 = 5;

pub fn write_vtk_string(mesh: &TriMesh, phi: Option<&[f64]>) -> Result<String> {
    if let Some(phi) = phi {
        if phi.len() != mesh.num_vertices() {
            return Err(PitError::Invalid(format!(
                "phi has {} values for {} vertices",
                phi.len(),
                mesh.num_vertices()
            )));
        }
    }
    let mut s = String::new();
    let n = mesh.num_vertices();
    let m = mesh.num_cells();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "pitmesh electrolyte mesh");
    let _ = writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {n} double");
    for p in &mesh.vertices {
        let _ = writeln!(s, "{:.16e} {:.16e} 0", p.x, p.y);
    }
    let _ = writeln!(s, "CELLS {m} {}", 4 * m);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {m}");
    for _ in 0..m {
        let _ = writeln!(s, "{VTK_TRIANGLE}");
    }
    if let Some(phi) = phi {
        let _ = writeln!(s, "POINT_DATA {n}\nSCALARS phi double 1\nLOOKUP_TABLE default");
        for v in phi {
            let _ = writeln!(s, "{v:.16e}");
        }
    }
    Ok(s)
}

pub fn write_vtk(mesh: &TriMesh, phi: Option<&[f64]>, path: &Path) -> Result<()> {
    std::fs::write(path, write_vtk_string(mesh, phi)?).map_err(|e| PitError::io(path, e))
}

/// Points, triangles and the optional `phi` field of a VTK file written by
/// [`write_vtk`]. Boundary tags are not part of the format.
#[derive(Clone, Debug, PartialEq)]
pub struct VtkData {
    pub points: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
    pub phi: Option<Vec<f64>>,
}

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
    source: &'a str,
}

impl<'a> Tokens<'a> {
    fn err(&self, line: usize, message: String) -> PitError {
        PitError::Parse {
            path: self.source.to_string(),
            line,
            message,
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let t = self.items.get(self.pos).copied();
        self.pos += 1;
        t.ok_or_else(|| self.err(0, format!("unexpected end of file, expected {what}")))
    }

    fn expect(&mut self, want: &str) -> Result<()> {
        let (line, t) = self.next(want)?;
        if t != want {
            return Err(self.err(line, format!("expected `{want}`, got `{t}`")));
        }
        Ok(())
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let (line, t) = self.next(what)?;
        t.parse()
            .map_err(|_| self.err(line, format!("expected {what}, got `{t}`")))
    }

    fn done(&self) -> bool {
        self.pos >= self.items.len()
    }
}

pub fn read_vtk_str(text: &str, source: &str) -> Result<VtkData> {
    let items = text
        .lines()
        .enumerate()
        .skip(2)
        .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)))
        .collect();
    let mut tok = Tokens {
        items,
        pos: 0,
        source,
    };
    for w in ["ASCII", "DATASET", "UNSTRUCTURED_GRID", "POINTS"] {
        tok.expect(w)?;
    }
    let n: usize = tok.number("a point count")?;
    tok.next("a point type")?;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = tok.number("a coordinate")?;
        let y: f64 = tok.number("a coordinate")?;
        let _: f64 = tok.number("a coordinate")?;
        points.push(Vec2::new(x, y));
    }
    tok.expect("CELLS")?;
    let m: usize = tok.number("a cell count")?;
    tok.next("a cell list size")?;
    let mut triangles = Vec::with_capacity(m);
    for _ in 0..m {
        let (line, k) = tok.next("a cell size")?;
        if k != "3" {
            return Err(tok.err(line, format!("cell has {k} vertices; only triangles are supported")));
        }
        let mut t = [0usize; 3];
        for v in &mut t {
            *v = tok.number("a vertex index")?;
            if *v >= n {
                return Err(tok.err(line, format!("vertex index {v} out of range")));
            }
        }
        triangles.push(t);
    }
    tok.expect("CELL_TYPES")?;
    tok.next("a cell count")?;
    for _ in 0..m {
        let (line, kind) = tok.next("a cell type")?;
        if kind != VTK_TRIANGLE.to_string() {
            return Err(tok.err(line, format!("cell type {kind} is not a triangle")));
        }
    }
    let mut phi = None;
    if !tok.done() {
        tok.expect("POINT_DATA")?;
        tok.next("a point count")?;
        tok.expect("SCALARS")?;
        tok.expect("phi")?;
        tok.next("a scalar type")?;
        tok.next("a component count")?;
        tok.expect("LOOKUP_TABLE")?;
        tok.next("a table name")?;
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(tok.number("a phi value")?);
        }
        phi = Some(values);
    }
    Ok(VtkData {
        points,
        triangles,
        phi,
    })
}

pub fn read_vtk(path: &Path) -> Result<VtkData> {
    let text = std::fs::read_to_string(path).map_err(|e| PitError::io(path, e))?;
    read_vtk_str(&text, &path.display().to_string())
}
