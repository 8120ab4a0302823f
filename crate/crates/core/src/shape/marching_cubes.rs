//! Marching cubes on binary occupancy grids.
//!
//! Samples sit at voxel centers and the iso-level is 0.5, so every surface
//! vertex is the midpoint of a lattice edge joining an occupied and an empty
//! sample. The 256-entry case table is derived once from the face-level
//! contour rules: each cube face contributes oriented segments, ambiguous
//! faces (diagonal corners occupied) separate the occupied corners, and the
//! segments chain into closed loops that are triangulated inside the cube.
//! Because the rule for a face depends only on that face's four corners,
//! neighbouring cubes agree on shared contours and the output is closed.

use std::collections::HashMap;
use std::sync::OnceLock;

use super::mesh::{TriangleMesh, Vec3};
use super::voxel::VoxelGrid;

/// Corner `c` of the unit cube sits at `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
fn corner_pos(c: usize) -> [f64; 3] {
    [(c & 1) as f64, ((c >> 1) & 1) as f64, ((c >> 2) & 1) as f64]
}

/// The 12 cube edges as `(low corner, axis)`.
fn cube_edges() -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(12);
    for axis in 0..3 {
        for c in 0..8 {
            if c & (1 << axis) == 0 {
                edges.push((c, axis));
            }
        }
    }
    edges
}

struct CaseTable {
    edges: Vec<(usize, usize)>,
    /// Triangles per configuration, as cube-edge indices.
    cases: Vec<Vec<[u8; 3]>>,
}

fn table() -> &'static CaseTable {
    static TABLE: OnceLock<CaseTable> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

fn build_table() -> CaseTable {
    let edges = cube_edges();
    let edge_of = |a: usize, b: usize| -> usize {
        let (lo, hi) = (a.min(b), a.max(b));
        let axis = (hi ^ lo).trailing_zeros() as usize;
        edges.iter().position(|&e| e == (lo, axis)).expect("not a cube edge")
    };
    let midpoint = |e: usize| -> [f64; 3] {
        let (c, axis) = edges[e];
        let mut p = corner_pos(c);
        p[axis] = 0.5;
        p
    };

    // faces as (cyclic corner order, outward normal)
    let mut faces = Vec::new();
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in 0..2 {
            let base = side << axis;
            let order = [base, base | (1 << u), base | (1 << u) | (1 << v), base | (1 << v)];
            let mut normal = [0.0; 3];
            normal[axis] = if side == 1 { 1.0 } else { -1.0 };
            faces.push((order, normal));
        }
    }
    let mut faces_of_edge = vec![Vec::new(); 12];
    for (f, (order, _)) in faces.iter().enumerate() {
        for i in 0..4 {
            faces_of_edge[edge_of(order[i], order[(i + 1) % 4])].push(f);
        }
    }
    let share_face = |a: usize, b: usize| faces_of_edge[a].iter().any(|f| faces_of_edge[b].contains(f));

    let sub = |a: [f64; 3], b: [f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];

    let mut cases = Vec::with_capacity(256);
    for config in 0..256usize {
        let inside = |c: usize| config & (1 << c) != 0;
        let mut next = [usize::MAX; 12];
        for (order, normal) in &faces {
            let fe: Vec<usize> = (0..4).map(|i| edge_of(order[i], order[(i + 1) % 4])).collect();
            let cut: Vec<usize> = (0..4)
                .filter(|&i| inside(order[i]) != inside(order[(i + 1) % 4]))
                .collect();
            // (edge a, edge b, an occupied corner on the occupied side)
            let mut segments = Vec::new();
            match cut.len() {
                0 => {}
                2 => {
                    let c = *order.iter().find(|&&c| inside(c)).unwrap();
                    segments.push((fe[cut[0]], fe[cut[1]], c));
                }
                4 => {
                    for i in 0..4 {
                        if inside(order[i]) {
                            segments.push((fe[(i + 3) % 4], fe[i], order[i]));
                        }
                    }
                }
                _ => unreachable!("a face cuts an even number of edges"),
            }
            for (a, b, c) in segments {
                let (pa, pb) = (midpoint(a), midpoint(b));
                let side = dot(cross(sub(pb, pa), sub(corner_pos(c), pa)), *normal);
                let (from, to) = if side > 0.0 { (a, b) } else { (b, a) };
                assert_eq!(next[from], usize::MAX, "config {config}: edge {from} leaves twice");
                next[from] = to;
            }
        }

        let mut visited = [false; 12];
        let mut tris = Vec::new();
        for start in 0..12 {
            if next[start] == usize::MAX || visited[start] {
                continue;
            }
            let mut ring = Vec::new();
            let mut e = start;
            while !visited[e] {
                visited[e] = true;
                ring.push(e);
                e = next[e];
                assert_ne!(e, usize::MAX, "config {config}: open contour");
            }
            assert_eq!(e, start, "config {config}: contour does not close");
            triangulate_ring(&ring, &share_face, &mut tris)
                .unwrap_or_else(|| panic!("config {config}: no admissible triangulation"));
        }
        cases.push(tris);
    }

    // orient outward: a lone occupied corner 0 must get a normal pointing away from it
    let [a, b, c] = cases[1][0].map(|e| midpoint(e as usize));
    let n = cross(sub(b, a), sub(c, a));
    if dot(n, [1.0, 1.0, 1.0]) < 0.0 {
        for tris in &mut cases {
            for t in tris.iter_mut() {
                t.swap(1, 2);
            }
        }
    }
    CaseTable { edges, cases }
}

/// Triangulates a contour loop using only chords whose endpoints do not lie
/// on a common cube face; such chords would coincide with a chord of the
/// neighbouring cube.
fn triangulate_ring(ring: &[usize], share_face: &impl Fn(usize, usize) -> bool, out: &mut Vec<[u8; 3]>) -> Option<()> {
    if ring.len() == 3 {
        out.push([ring[0], ring[1], ring[2]].map(|e| e as u8));
        return Some(());
    }
    let k = ring.len();
    'apex: for i in 1..k - 1 {
        let mut chords = Vec::new();
        if i != 1 {
            chords.push((ring[0], ring[i]));
        }
        if i != k - 2 {
            chords.push((ring[i], ring[k - 1]));
        }
        if chords.iter().any(|&(a, b)| share_face(a, b)) {
            continue;
        }
        let mut attempt = vec![[ring[0], ring[i], ring[k - 1]].map(|e| e as u8)];
        for part in [&ring[..=i], &ring[i..]] {
            if part.len() >= 3 && triangulate_ring(part, share_face, &mut attempt).is_none() {
                continue 'apex;
            }
        }
        out.extend(attempt);
        return Some(());
    }
    None
}

/// Extracts the 0.5 iso-surface of the occupancy field. The grid is treated
/// as padded with one empty layer, so surfaces of solid inputs are closed.
/// Vertices are in the unit-cube frame, with voxel `(x, y, z)` centered at
/// `((x + 0.5) / R, (y + 0.5) / R, (z + 0.5) / R)`.
pub fn marching_cubes(grid: &VoxelGrid) -> TriangleMesh {
    let table = table();
    let r = grid.resolution() as i64;
    let rf = r as f64;
    let p = (r + 2) as u64;
    let mut vertex_of: HashMap<u64, u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();

    let mut vertex = |sample: [i64; 3], axis: usize| -> u32 {
        let key =
            ((sample[0] + 1) as u64 + p * ((sample[1] + 1) as u64 + p * (sample[2] + 1) as u64)) * 3 + axis as u64;
        *vertex_of.entry(key).or_insert_with(|| {
            let coord = |k: usize| {
                if k == axis {
                    (sample[k] + 1) as f64 / rf
                } else {
                    (sample[k] as f64 + 0.5) / rf
                }
            };
            vertices.push(Vec3::new(coord(0), coord(1), coord(2)));
            (vertices.len() - 1) as u32
        })
    };

    for z in -1..r {
        for y in -1..r {
            for x in -1..r {
                let mut config = 0usize;
                for c in 0..8 {
                    let [dx, dy, dz] = corner_pos(c).map(|v| v as i64);
                    if grid.get_signed(x + dx, y + dy, z + dz) {
                        config |= 1 << c;
                    }
                }
                if config == 0 || config == 255 {
                    continue;
                }
                for tri in &table.cases[config] {
                    let idx = tri.map(|e| {
                        let (c, axis) = table.edges[e as usize];
                        let [dx, dy, dz] = corner_pos(c).map(|v| v as i64);
                        vertex([x + dx, y + dy, z + dz], axis)
                    });
                    triangles.push(idx);
                }
            }
        }
    }
    TriangleMesh::new(vertices, triangles).expect("marching cubes produced invalid indices")
}
