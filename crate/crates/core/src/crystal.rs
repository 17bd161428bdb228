//! Orientation-dependent corrosion potential.
//!
//! A crystal is described by its zone axis `k` (out of the computational
//! plane) and the crystal direction `i` that lies along the computational x
//! axis. The columns `i`, `j = k x i`, `k` form the matrix that takes a
//! computational normal `(nx, ny, 0)` into crystal coordinates.

use nalgebra::{Matrix3, Vector3};

use crate::error::{PitError, Result};
use crate::mesh::Vec2;

/// The six signed cube-face directions, in the fixed order used for
/// reporting the maximizing direction.
pub const CUBE_DIRECTIONS: [[i8; 3]; 6] = [
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZoneOrientation {
    pub i: Vector3<f64>,
    pub j: Vector3<f64>,
    pub k: Vector3<f64>,
    /// Integer zone axis and x direction the frame was built from.
    pub axes: ([i32; 3], [i32; 3]),
}

impl ZoneOrientation {
    pub fn identity() -> Self {
        ZoneOrientation {
            i: Vector3::x(),
            j: Vector3::y(),
            k: Vector3::z(),
            axes: ([0, 0, 1], [1, 0, 0]),
        }
    }

    /// Matrix with columns `i | j | k`.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.i, self.j, self.k])
    }

    /// Crystal-frame image of an in-plane unit normal.
    pub fn transform_normal(&self, n: Vec2) -> Vector3<f64> {
        self.i * n.x + self.j * n.y
    }
}

pub fn orientation_from_axes(zone_axis: [i32; 3], x_direction: [i32; 3]) -> Result<ZoneOrientation> {
    let k = Vector3::new(zone_axis[0] as f64, zone_axis[1] as f64, zone_axis[2] as f64);
    let i = Vector3::new(
        x_direction[0] as f64,
        x_direction[1] as f64,
        x_direction[2] as f64,
    );
    if k.norm() == 0.0 || i.norm() == 0.0 {
        return Err(PitError::Invalid(format!(
            "zone axis {zone_axis:?} and x direction {x_direction:?} must be nonzero"
        )));
    }
    let dot = k.dot(&i);
    if dot != 0.0 {
        return Err(PitError::Invalid(format!(
            "zone axis {zone_axis:?} and x direction {x_direction:?} are not perpendicular (dot product {dot})"
        )));
    }
    let k = k.normalize();
    let i = i.normalize();
    let j = k.cross(&i);
    Ok(ZoneOrientation {
        i,
        j,
        k,
        axes: (zone_axis, x_direction),
    })
}

pub fn transform_normal(orientation: &ZoneOrientation, n: Vec2) -> Vector3<f64> {
    orientation.transform_normal(n)
}

/// Largest projection of a crystal-frame normal onto the six cube-face
/// directions, with the index of the first maximizer in [`CUBE_DIRECTIONS`].
pub fn max_cube_projection(n_cd: &Vector3<f64>) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (idx, e) in CUBE_DIRECTIONS.iter().enumerate() {
        let dot = e[0] as f64 * n_cd.x + e[1] as f64 * n_cd.y + e[2] as f64 * n_cd.z;
        if dot > best.0 {
            best = (dot, idx);
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VcorrParams {
    /// Potential of a cube face, volts.
    pub k_const: f64,
    /// Spread between cube and body-diagonal faces, volts.
    pub s_const: f64,
}

impl Default for VcorrParams {
    fn default() -> Self {
        VcorrParams {
            k_const: -0.2297,
            s_const: 0.054,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MaterialSpec {
    Homogeneous { v_corr: f64 },
    Crystal { orientation: ZoneOrientation },
    Bicrystal {
        x_interface: f64,
        left: ZoneOrientation,
        right: ZoneOrientation,
    },
}

impl Default for MaterialSpec {
    fn default() -> Self {
        MaterialSpec::Homogeneous { v_corr: -0.24 }
    }
}

impl MaterialSpec {
    /// Orientation governing the point, or `None` for a homogeneous material.
    /// Points exactly on a bicrystal interface belong to the right grain.
    pub fn orientation_at(&self, position: Vec2) -> Option<&ZoneOrientation> {
        match self {
            MaterialSpec::Homogeneous { .. } => None,
            MaterialSpec::Crystal { orientation } => Some(orientation),
            MaterialSpec::Bicrystal {
                x_interface,
                left,
                right,
            } => Some(if position.x < *x_interface { left } else { right }),
        }
    }
}

pub fn vcorr_crystal(orientation: &ZoneOrientation, params: &VcorrParams, n: Vec2) -> f64 {
    let (proj, _) = max_cube_projection(&orientation.transform_normal(n));
    params.k_const - params.s_const * (1.0 - proj)
}

/// Corrosion potential (volts) at a pit-boundary point with outward normal `n`.
pub fn vcorr(material: &MaterialSpec, params: &VcorrParams, position: Vec2, n: Vec2) -> f64 {
    match material {
        MaterialSpec::Homogeneous { v_corr } => *v_corr,
        _ => {
            let o = material
                .orientation_at(position)
                .expect("crystalline materials always have an orientation");
            vcorr_crystal(o, params, n)
        }
    }
}
