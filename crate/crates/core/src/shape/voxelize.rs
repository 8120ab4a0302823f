//! Mesh to voxel-grid conversion.
//!
//! Surface voxelization marks every cell whose closed box overlaps a triangle
//! (separating-axis test). Solid voxelization of a closed mesh marks every cell
//! whose center has nonzero winding number with respect to the surface,
//! evaluated with exact tie-breaking along +x rays, followed by an exterior
//! flood fill. Meshes that are not closed fall back to the surface shell plus
//! flood fill.

use super::mesh::{TriangleMesh, Vec3};
use super::voxel::VoxelGrid;
use crate::{Error, Result};

/// Smallest resolution accepted for voxelizing a mesh.
pub const MIN_VOXELIZE_RESOLUTION: usize = 8;

/// Center coordinate of cell `i` along one axis.
#[inline]
pub fn cell_center(i: usize, resolution: usize) -> f64 {
    (i as f64 + 0.5) / resolution as f64
}

pub fn voxelize_mesh(mesh: &TriangleMesh, resolution: usize, solid: bool) -> Result<VoxelGrid> {
    if mesh.is_empty() {
        return Err(Error::EmptyShape);
    }
    if resolution < MIN_VOXELIZE_RESOLUTION {
        return Err(Error::InvalidResolution(resolution));
    }
    if !solid {
        return surface_shell(mesh, resolution);
    }
    if mesh.is_watertight() {
        Ok(winding_solid(mesh, resolution)?.fill_interior())
    } else {
        log::warn!("mesh is not closed; solid voxelization falls back to shell + flood fill");
        Ok(surface_shell(mesh, resolution)?.fill_interior())
    }
}

fn surface_shell(mesh: &TriangleMesh, resolution: usize) -> Result<VoxelGrid> {
    let mut grid = VoxelGrid::new(resolution)?;
    let r = resolution as f64;
    let max = resolution as i64 - 1;
    for t in 0..mesh.triangles().len() {
        // work in cell units: cell (x,y,z) is the box [x, x+1] × ...
        let tri = mesh.triangle(t).map(|v| v * r);
        let lo = tri[0].inf(&tri[1]).inf(&tri[2]);
        let hi = tri[0].sup(&tri[1]).sup(&tri[2]);
        let range = |a: f64, b: f64| {
            let start = (a.floor() as i64 - 1).clamp(0, max);
            let end = (b.floor() as i64).clamp(0, max);
            start..=end
        };
        if hi.iter().any(|&c| c < 0.0) || lo.iter().any(|&c| c > r) {
            continue;
        }
        for z in range(lo.z, hi.z) {
            for y in range(lo.y, hi.y) {
                for x in range(lo.x, hi.x) {
                    let center = Vec3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5);
                    if triangle_box_overlap(center, 0.5, &tri) {
                        grid.set(x as usize, y as usize, z as usize, true);
                    }
                }
            }
        }
    }
    Ok(grid)
}

/// Separating-axis test between a triangle and the closed axis-aligned cube
/// of the given center and half side. Touching counts as overlap.
pub fn triangle_box_overlap(center: Vec3, half: f64, tri: &[Vec3; 3]) -> bool {
    let v = tri.map(|p| p - center);
    let e = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];

    // box face normals
    for axis in [0, 1, 2] {
        let lo = v[0][axis].min(v[1][axis]).min(v[2][axis]);
        let hi = v[0][axis].max(v[1][axis]).max(v[2][axis]);
        if lo > half || hi < -half {
            return false;
        }
    }

    // triangle normal
    let n = e[0].cross(&e[1]);
    let radius = half * (n.x.abs() + n.y.abs() + n.z.abs());
    if n.dot(&v[0]).abs() > radius {
        return false;
    }

    // edge × box-axis cross products
    for edge in &e {
        for axis in 0..3 {
            let mut a = Vec3::zeros();
            a[axis] = 1.0;
            let a = a.cross(edge);
            if a.norm_squared() == 0.0 {
                continue;
            }
            let p = v.map(|p| a.dot(&p));
            let lo = p[0].min(p[1]).min(p[2]);
            let hi = p[0].max(p[1]).max(p[2]);
            let radius = half * (a.x.abs() + a.y.abs() + a.z.abs());
            if lo > radius || hi < -radius {
                return false;
            }
        }
    }
    true
}

type P2 = (f64, f64);

/// `(v − u) × (p − u)`, evaluated in a fixed vertex order so that the two
/// orientations of one edge give exactly negated results.
#[inline]
fn edge_function(u: P2, v: P2, p: P2) -> f64 {
    let raw = |u: P2, v: P2| (v.0 - u.0) * (p.1 - u.1) - (v.1 - u.1) * (p.0 - u.0);
    if u <= v {
        raw(u, v)
    } else {
        -raw(v, u)
    }
}

/// Whether a point on the edge `u → v` of a counter-clockwise triangle
/// belongs to that triangle (top-left rule).
#[inline]
fn owns_edge(u: P2, v: P2) -> bool {
    let (dx, dy) = (v.0 - u.0, v.1 - u.1);
    dy < 0.0 || (dy == 0.0 && dx < 0.0)
}

fn inside_ccw(a: P2, b: P2, c: P2, p: P2) -> bool {
    [(a, b), (b, c), (c, a)].iter().all(|&(u, v)| {
        let e = edge_function(u, v, p);
        e > 0.0 || (e == 0.0 && owns_edge(u, v))
    })
}

fn winding_solid(mesh: &TriangleMesh, resolution: usize) -> Result<VoxelGrid> {
    let r = resolution;
    let rf = r as f64;
    // per (y, z) row: ray crossings (x, winding contribution)
    let mut rows: Vec<Vec<(f64, i32)>> = vec![Vec::new(); r * r];
    for t in 0..mesh.triangles().len() {
        let [a, b, c] = mesh.triangle(t);
        let normal = (b - a).cross(&(c - a));
        if normal.x == 0.0 {
            continue;
        }
        let (pa, mut pb, mut pc) = ((a.y, a.z), (b.y, b.z), (c.y, c.z));
        // projected orientation decides the sign; make the projection CCW
        let orient = edge_function(pa, pb, pc);
        if orient == 0.0 {
            continue;
        }
        let contribution = if normal.x < 0.0 { 1 } else { -1 };
        if orient < 0.0 {
            std::mem::swap(&mut pb, &mut pc);
        }
        let idx_range = |lo: f64, hi: f64| {
            let start = ((lo * rf - 0.5).floor() as i64 - 1).max(0);
            let end = ((hi * rf - 0.5).ceil() as i64 + 1).min(r as i64 - 1);
            start..=end
        };
        for zi in idx_range(a.z.min(b.z).min(c.z), a.z.max(b.z).max(c.z)) {
            let pz = cell_center(zi as usize, r);
            for yi in idx_range(a.y.min(b.y).min(c.y), a.y.max(b.y).max(c.y)) {
                let py = cell_center(yi as usize, r);
                if inside_ccw(pa, pb, pc, (py, pz)) {
                    let x = a.x - (normal.y * (py - a.y) + normal.z * (pz - a.z)) / normal.x;
                    rows[yi as usize + r * zi as usize].push((x, contribution));
                }
            }
        }
    }

    let mut grid = VoxelGrid::new(r)?;
    for (row, crossings) in rows.iter_mut().enumerate() {
        if crossings.is_empty() {
            continue;
        }
        crossings.sort_by(|p, q| p.0.total_cmp(&q.0));
        let (y, z) = (row % r, row / r);
        let mut winding = 0;
        let mut k = 0;
        for x in 0..r {
            let center = cell_center(x, r);
            while k < crossings.len() && crossings[k].0 < center {
                winding += crossings[k].1;
                k += 1;
            }
            if winding != 0 {
                grid.set(x, y, z, true);
            }
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::synth::box_mesh;
    use crate::shape::synth::uv_sphere;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_cube_fills_grid() {
        let cube = box_mesh(Vec3::zeros(), Vec3::repeat(1.0));
        let g = voxelize_mesh(&cube, 8, true).unwrap();
        assert_eq!(g.count(), 512);
    }

    #[test]
    fn empty_mesh_is_an_error() {
        assert!(matches!(
            voxelize_mesh(&TriangleMesh::default(), 16, true),
            Err(Error::EmptyShape)
        ));
    }

    #[test]
    fn sphere_volume_close_to_analytic() {
        let sphere = uv_sphere(Vec3::repeat(0.5), 0.4, 96, 48);
        let g = voxelize_mesh(&sphere, 64, true).unwrap();
        let expected = 4.0 / 3.0 * std::f64::consts::PI * (0.4f64 * 64.0).powi(3);
        let rel = (g.count() as f64 - expected).abs() / expected;
        assert!(rel < 0.05, "count {} vs {expected}: {rel}", g.count());
    }

    #[test]
    fn solid_output_is_flood_fill_idempotent() {
        let sphere = uv_sphere(Vec3::new(0.45, 0.5, 0.55), 0.3, 40, 20);
        let g = voxelize_mesh(&sphere, 32, true).unwrap();
        assert_eq!(g.fill_interior(), g);
    }

    #[test]
    fn overlapping_closed_parts_union() {
        let a = box_mesh(Vec3::new(0.1, 0.1, 0.1), Vec3::new(0.6, 0.6, 0.6));
        let b = box_mesh(Vec3::new(0.4, 0.4, 0.4), Vec3::new(0.9, 0.9, 0.9));
        let g = voxelize_mesh(&TriangleMesh::merge(&[a, b]), 20, true).unwrap();
        let inside = |v: f64, lo: f64, hi: f64| v > lo && v < hi;
        let expected = VoxelGrid::from_fn(20, |x, y, z| {
            let c = [x, y, z].map(|i| cell_center(i, 20));
            c.iter().all(|&v| inside(v, 0.1, 0.6)) || c.iter().all(|&v| inside(v, 0.4, 0.9))
        })
        .unwrap();
        assert_eq!(g, expected);
    }

    /// Independent overlap oracle: clip the triangle polygon against the six
    /// slab planes of the cell and check that something survives.
    fn clip_overlap(cell: (usize, usize, usize), tri: &[Vec3; 3]) -> bool {
        let mut poly: Vec<Vec3> = tri.to_vec();
        let lo = [cell.0 as f64, cell.1 as f64, cell.2 as f64];
        for axis in 0..3 {
            for (bound, keep_above) in [(lo[axis], true), (lo[axis] + 1.0, false)] {
                let dist = |p: &Vec3| if keep_above { p[axis] - bound } else { bound - p[axis] };
                let mut out = Vec::new();
                for i in 0..poly.len() {
                    let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
                    let (dp, dq) = (dist(&p), dist(&q));
                    if dp >= 0.0 {
                        out.push(p);
                    }
                    if (dp >= 0.0) != (dq >= 0.0) {
                        out.push(p + (q - p) * (dp / (dp - dq)));
                    }
                }
                poly = out;
                if poly.is_empty() {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn open_triangle_shell_matches_clipping_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let pts: Vec<Vec3> = (0..3)
                .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()) * 0.9 + Vec3::repeat(0.05))
                .collect();
            let mesh = TriangleMesh::new(pts.clone(), vec![[0, 1, 2]]).unwrap();
            let res = 12;
            let g = voxelize_mesh(&mesh, res, false).unwrap();
            let scaled = [pts[0], pts[1], pts[2]].map(|p| p * res as f64);
            for z in 0..res {
                for y in 0..res {
                    for x in 0..res {
                        assert_eq!(g.get(x, y, z), clip_overlap((x, y, z), &scaled), "cell {x},{y},{z}");
                    }
                }
            }
            // solid flag on an open surface only keeps the shell
            assert_eq!(voxelize_mesh(&mesh, res, true).unwrap(), g);
        }
    }

    #[test]
    fn edge_function_antisymmetric_bitwise() {
        let u = (0.1, 0.7);
        let v = (0.3, 0.2);
        let p = (0.13, 0.51);
        assert_eq!(edge_function(u, v, p), -edge_function(v, u, p));
        assert_eq!(edge_function(u, v, u), 0.0);
        assert_eq!(edge_function(v, u, u), 0.0);
    }
}
