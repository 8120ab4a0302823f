use std::collections::HashMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Indexed triangle mesh.
///
/// Construction through [`TriangleMesh::new`] validates indices and drops
/// zero-area triangles, so every stored triangle has a well-defined normal.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("non-finite vertex {v:?}")));
        }
        for t in &triangles {
            if t.iter().any(|&i| i as usize >= n) {
                return Err(Error::invalid(format!("triangle {t:?} indexes past {n} vertices")));
            }
        }
        let triangles = triangles
            .into_iter()
            .filter(|t| {
                t[0] != t[1] && t[1] != t[2] && t[0] != t[2] && {
                    let [a, b, c] = t.map(|i| vertices[i as usize]);
                    (b - a).cross(&(c - a)).norm_squared() > 0.0
                }
            })
            .collect();
        Ok(Self { vertices, triangles })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Signed enclosed volume; positive for closed meshes with outward normals.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(
            self.vertices
                .iter()
                .fold((first, first), |(lo, hi), v| (lo.inf(v), hi.sup(v))),
        )
    }

    /// Number of triangles incident to each undirected edge.
    pub fn edge_incidence(&self) -> HashMap<(u32, u32), usize> {
        let mut edges = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Every edge is shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        !self.triangles.is_empty() && self.edge_incidence().values().all(|&c| c == 2)
    }

    /// `V − E + F` over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &i in t {
                used[i as usize] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - self.edge_incidence().len() as i64 + self.triangles.len() as i64
    }

    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(f).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Concatenates meshes without merging vertices.
    pub fn merge(parts: &[TriangleMesh]) -> TriangleMesh {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for part in parts {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&part.vertices);
            triangles.extend(part.triangles.iter().map(|t| t.map(|i| i + base)));
        }
        TriangleMesh { vertices, triangles }
    }
}

/// Scales and translates so the bounding box is centered in `[0,1]³` with
/// its longest side equal to 1. Aspect ratio is preserved.
pub fn normalize_unit_cube(mesh: &TriangleMesh) -> Result<TriangleMesh> {
    let (lo, hi) = mesh.bounding_box().ok_or(Error::EmptyShape)?;
    let extent = hi - lo;
    let longest = extent.max();
    if !(longest > 0.0) {
        return Err(Error::invalid("all vertices coincide"));
    }
    let offset = extent.map(|e| (1.0 - e / longest) / 2.0);
    Ok(mesh.map_vertices(|v| (v - lo) / longest + offset))
}

/// Camera viewpoint, in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    azimuth: f64,
    elevation: f64,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        azimuth: 0.0,
        elevation: 0.0,
    };

    /// Azimuth in `[0, 360)`, elevation in `[0, 50)`.
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !(0.0..360.0).contains(&azimuth) || !(0.0..50.0).contains(&elevation) {
            return Err(Error::invalid(format!(
                "pose ({azimuth}, {elevation}) outside azimuth [0,360) / elevation [0,50)"
            )));
        }
        Ok(Self { azimuth, elevation })
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    /// `R = Rx(elevation) · Rz(azimuth)`: azimuth about the up axis (+z)
    /// first, then elevation about the right axis (+x). Right-handed.
    pub fn rotation(&self) -> Matrix3<f64> {
        let (ca, sa) = cos_sin_deg(self.azimuth);
        let (ce, se) = cos_sin_deg(self.elevation);
        let rz = Matrix3::new(ca, -sa, 0.0, sa, ca, 0.0, 0.0, 0.0, 1.0);
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, ce, -se, 0.0, se, ce);
        rx * rz
    }
}

/// Cosine and sine of an angle in degrees, exact at quarter turns.
fn cos_sin_deg(deg: f64) -> (f64, f64) {
    let turns = deg / 90.0;
    if turns.fract() == 0.0 {
        return match (turns as i64).rem_euclid(4) {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
    }
    let rad = deg.to_radians();
    (rad.cos(), rad.sin())
}

/// Rotates into the given viewpoint and re-normalizes to the unit cube.
pub fn rotate_mesh(mesh: &TriangleMesh, pose: Pose) -> Result<TriangleMesh> {
    let r = pose.rotation();
    normalize_unit_cube(&mesh.map_vertices(|v| r * v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::synth::box_mesh;
    use approx::assert_relative_eq;

    #[test]
    fn box_is_closed_and_outward() {
        let m = box_mesh(Vec3::zeros(), Vec3::new(1.0, 2.0, 3.0));
        assert!(m.is_watertight());
        assert_eq!(m.euler_characteristic(), 2);
        assert_relative_eq!(m.signed_volume(), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn construction_drops_degenerate_triangles() {
        let verts = vec![Vec3::zeros(), Vec3::x(), Vec3::new(2.0, 0.0, 0.0), Vec3::y()];
        let m = TriangleMesh::new(verts.clone(), vec![[0, 1, 2], [0, 1, 3], [1, 1, 3]]).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 3]]);
        assert!(TriangleMesh::new(verts, vec![[0, 1, 9]]).is_err());
    }

    #[test]
    fn normalize_examples() {
        let unit = box_mesh(Vec3::zeros(), Vec3::repeat(1.0));
        let n = normalize_unit_cube(&unit).unwrap();
        for (a, b) in n.vertices().iter().zip(unit.vertices()) {
            assert!((a - b).norm() < 1e-12);
        }

        let long = box_mesh(Vec3::zeros(), Vec3::new(2.0, 1.0, 1.0));
        let (lo, hi) = normalize_unit_cube(&long).unwrap().bounding_box().unwrap();
        assert_relative_eq!(lo, Vec3::new(0.0, 0.25, 0.25), epsilon = 1e-12);
        assert_relative_eq!(hi, Vec3::new(1.0, 0.75, 0.75), epsilon = 1e-12);

        let moved = long.map_vertices(|v| v * 7.0 + Vec3::new(-3.0, 11.0, 0.5));
        let a = normalize_unit_cube(&long).unwrap();
        let b = normalize_unit_cube(&moved).unwrap();
        for (p, q) in a.vertices().iter().zip(b.vertices()) {
            assert!((p - q).norm() < 1e-12);
        }

        let point = TriangleMesh::new(vec![Vec3::x(); 3], vec![]).unwrap();
        assert!(normalize_unit_cube(&point).is_err());
        assert!(normalize_unit_cube(&TriangleMesh::default()).is_err());
    }

    #[test]
    fn identity_pose_is_exact() {
        let m = normalize_unit_cube(&box_mesh(Vec3::new(0.1, 0.2, 0.3), Vec3::new(0.7, 0.5, 0.9))).unwrap();
        // the identity rotation is exact, so only normalization remains
        assert_eq!(
            rotate_mesh(&m, Pose::IDENTITY).unwrap(),
            normalize_unit_cube(&m).unwrap()
        );
        for (a, b) in rotate_mesh(&m, Pose::IDENTITY)
            .unwrap()
            .vertices()
            .iter()
            .zip(m.vertices())
        {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn four_quarter_turns_compose_to_identity() {
        let m = normalize_unit_cube(&box_mesh(Vec3::new(0.1, 0.2, 0.3), Vec3::new(0.7, 0.5, 0.9))).unwrap();
        let quarter = Pose::new(90.0, 0.0).unwrap();
        let mut r = m.clone();
        for _ in 0..4 {
            r = rotate_mesh(&r, quarter).unwrap();
        }
        for (a, b) in r.vertices().iter().zip(m.vertices()) {
            assert!((a - b).norm() < 1e-9);
        }
        assert_eq!(r.triangles(), m.triangles());
    }

    #[test]
    fn quarter_turn_moves_marker_as_matrix_predicts() {
        let mut verts = box_mesh(Vec3::zeros(), Vec3::repeat(1.0)).vertices().to_vec();
        let tris = box_mesh(Vec3::zeros(), Vec3::repeat(1.0)).triangles().to_vec();
        verts.push(Vec3::new(1.0, 0.5, 0.5));
        let mesh = TriangleMesh::new(verts.clone(), tris).unwrap();
        let rotated = rotate_mesh(&mesh, Pose::new(90.0, 0.0).unwrap()).unwrap();

        // explicit Rz(90°) multiply, then bounding-box normalization by hand
        let rz = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        let mul = |v: &Vec3| {
            Vec3::new(
                rz[0][0] * v.x + rz[0][1] * v.y + rz[0][2] * v.z,
                rz[1][0] * v.x + rz[1][1] * v.y + rz[1][2] * v.z,
                rz[2][0] * v.x + rz[2][1] * v.y + rz[2][2] * v.z,
            )
        };
        let moved: Vec<Vec3> = verts.iter().map(mul).collect();
        let lo = moved.iter().fold(Vec3::repeat(f64::MAX), |a, v| a.inf(v));
        let expected = moved[8] - lo;
        assert_relative_eq!(rotated.vertices()[8], expected, epsilon = 1e-12);
        assert_relative_eq!(expected, Vec3::new(0.5, 1.0, 0.5), epsilon = 1e-12);
    }

    #[test]
    fn rotation_preserves_distances_up_to_scale() {
        let m = box_mesh(Vec3::zeros(), Vec3::new(0.3, 0.6, 0.9));
        let r = rotate_mesh(&m, Pose::new(33.0, 21.0).unwrap()).unwrap();
        let v0 = m.vertices();
        let v1 = r.vertices();
        let scale = (v1[0] - v1[7]).norm() / (v0[0] - v0[7]).norm();
        for i in 0..v0.len() {
            for j in 0..v0.len() {
                assert_relative_eq!((v1[i] - v1[j]).norm(), scale * (v0[i] - v0[j]).norm(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn pose_ranges() {
        assert!(Pose::new(360.0, 0.0).is_err());
        assert!(Pose::new(0.0, 50.0).is_err());
        assert!(Pose::new(-1.0, 0.0).is_err());
        assert!(Pose::new(359.9, 49.9).is_ok());
    }
}
