//! Procedural shape families used as a small stand-in for a real shape
//! collection.
//!
//! Every class is a fixed recipe of closed primitives (boxes, cylinders,
//! ellipsoids, extruded profiles). An instance perturbs the recipe's
//! proportions by a per-parameter factor `1 + jitter * u` with `u ∈ [-1, 1]`.
//! Training instances draw `u` from `[-1, 0]`. Held-out instances blend a
//! training partner's `u` with a draw from the disjoint range `[0.5, 1]`:
//! `u = c * u_partner + (1 - c) * u_far`, where `c` is the contamination.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mesh::{normalize_unit_cube, TriangleMesh, Vec3};
use crate::{Error, Result};

const CYLINDER_SEGMENTS: usize = 32;
const SPHERE_SLICES: usize = 32;
const SPHERE_STACKS: usize = 16;

/// Upper bound on jitter so every jittered proportion stays positive.
pub const MAX_JITTER: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    Box,
    Cylinder,
    Sphere,
    LBracket,
    Table,
    Chair,
    Lamp,
    Bottle,
}

impl Recipe {
    pub const ALL: [Recipe; 8] = [
        Recipe::Box,
        Recipe::Cylinder,
        Recipe::Sphere,
        Recipe::LBracket,
        Recipe::Table,
        Recipe::Chair,
        Recipe::Lamp,
        Recipe::Bottle,
    ];

    fn base_parameters(self) -> &'static [f64] {
        match self {
            // width, depth, height
            Recipe::Box => &[1.0, 0.6, 1.4],
            // radius, height
            Recipe::Cylinder => &[0.5, 1.2],
            // semi-axes
            Recipe::Sphere => &[1.0, 0.8, 0.6],
            // width, height, thickness, depth
            Recipe::LBracket => &[1.0, 1.0, 0.25, 0.6],
            // top width, top depth, top thickness, leg thickness, height
            Recipe::Table => &[1.2, 0.8, 0.08, 0.1, 0.8],
            // seat width, seat depth, seat thickness, seat height, back height, leg thickness
            Recipe::Chair => &[0.6, 0.6, 0.08, 0.5, 0.6, 0.07],
            // base radius, base height, pole radius, pole height, shade radius, shade squash
            Recipe::Lamp => &[0.35, 0.08, 0.04, 1.0, 0.35, 0.6],
            // body radius, body height, neck radius, neck height
            Recipe::Bottle => &[0.35, 0.9, 0.12, 0.4],
        }
    }

    pub fn parameter_count(self) -> usize {
        self.base_parameters().len()
    }

    fn build(self, p: &[f64]) -> TriangleMesh {
        let v = Vec3::new;
        match self {
            Recipe::Box => box_mesh(Vec3::zeros(), v(p[0], p[1], p[2])),
            Recipe::Cylinder => cylinder(Vec3::zeros(), p[0], p[1], CYLINDER_SEGMENTS),
            Recipe::Sphere => ellipsoid(Vec3::zeros(), v(p[0], p[1], p[2])),
            Recipe::LBracket => {
                let (w, h, t) = (p[0], p[1], p[2]);
                let profile = [(0.0, 0.0), (w, 0.0), (w, t), (t, t), (t, h), (0.0, h)];
                extruded_profile(&profile, 3, p[3])
            }
            Recipe::Table => {
                let (w, d, top, leg, h) = (p[0], p[1], p[2], p[3], p[4]);
                let mut parts = vec![box_mesh(v(0.0, 0.0, h - top), v(w, d, h))];
                for (x, y) in [(0.0, 0.0), (w - leg, 0.0), (0.0, d - leg), (w - leg, d - leg)] {
                    parts.push(box_mesh(v(x, y, 0.0), v(x + leg, y + leg, h - top * 0.5)));
                }
                TriangleMesh::merge(&parts)
            }
            Recipe::Chair => {
                let (w, d, seat, sh, bh, leg) = (p[0], p[1], p[2], p[3], p[4], p[5]);
                let mut parts = vec![
                    box_mesh(v(0.0, 0.0, sh - seat), v(w, d, sh)),
                    box_mesh(v(0.0, d - seat, sh - seat * 0.5), v(w, d, sh + bh)),
                ];
                for (x, y) in [(0.0, 0.0), (w - leg, 0.0), (0.0, d - leg), (w - leg, d - leg)] {
                    parts.push(box_mesh(v(x, y, 0.0), v(x + leg, y + leg, sh - seat * 0.5)));
                }
                TriangleMesh::merge(&parts)
            }
            Recipe::Lamp => {
                let (br, bh, pr, ph, sr, squash) = (p[0], p[1], p[2], p[3], p[4], p[5]);
                TriangleMesh::merge(&[
                    cylinder(Vec3::zeros(), br, bh, CYLINDER_SEGMENTS),
                    cylinder(v(0.0, 0.0, bh * 0.5), pr, ph, CYLINDER_SEGMENTS),
                    ellipsoid(v(0.0, 0.0, bh + ph), v(sr, sr, sr * squash)),
                ])
            }
            Recipe::Bottle => {
                let (br, bh, nr, nh) = (p[0], p[1], p[2], p[3]);
                TriangleMesh::merge(&[
                    cylinder(Vec3::zeros(), br, bh, CYLINDER_SEGMENTS),
                    cylinder(v(0.0, 0.0, bh * 0.9), nr, nh + bh * 0.1, CYLINDER_SEGMENTS),
                ])
            }
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = serde_json::to_value(self).ok();
        let name = name.as_ref().and_then(|v| v.as_str()).unwrap_or("?");
        f.write_str(name)
    }
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| Error::invalid(format!("unknown recipe {s:?}")))
    }
}

/// How a held-out instance relates to the training distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Holdout {
    /// Seed of the training instance this one is blended toward.
    pub partner_seed: u64,
    /// 1 copies the partner exactly; 0 draws from the disjoint far range.
    pub contamination: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub class_id: String,
    pub recipe: Recipe,
    /// Relative proportion jitter in `[0, MAX_JITTER]`.
    pub jitter: f64,
    pub seed: u64,
    /// `None` for training-distribution instances.
    pub holdout: Option<Holdout>,
}

fn draw(seed: u64, count: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random_range(lo..=hi)).collect()
}

impl ShapeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=MAX_JITTER).contains(&self.jitter) {
            return Err(Error::invalid(format!(
                "jitter {} outside [0, {MAX_JITTER}]",
                self.jitter
            )));
        }
        if let Some(h) = &self.holdout {
            if !(0.0..=1.0).contains(&h.contamination) {
                return Err(Error::invalid(format!(
                    "contamination {} outside [0, 1]",
                    h.contamination
                )));
            }
        }
        Ok(())
    }

    /// The unit-range variation vector `u` of this instance.
    pub fn variation(&self) -> Vec<f64> {
        let m = self.recipe.parameter_count();
        match &self.holdout {
            None => draw(self.seed, m, -1.0, 0.0),
            Some(h) => {
                let partner = draw(h.partner_seed, m, -1.0, 0.0);
                let far = draw(self.seed, m, 0.5, 1.0);
                let c = h.contamination;
                partner.iter().zip(&far).map(|(p, f)| c * p + (1.0 - c) * f).collect()
            }
        }
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.recipe
            .base_parameters()
            .iter()
            .zip(self.variation())
            .map(|(base, u)| base * (1.0 + self.jitter * u))
            .collect()
    }
}

/// Builds the instance mesh, normalized to the unit cube.
pub fn generate_synthetic(spec: &ShapeSpec) -> Result<TriangleMesh> {
    spec.validate()?;
    normalize_unit_cube(&spec.recipe.build(&spec.parameters()))
}

/// Axis-aligned box with outward-facing triangles.
pub fn box_mesh(lo: Vec3, hi: Vec3) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(8);
    for c in 0..8 {
        vertices.push(Vec3::new(
            if c & 1 == 0 { lo.x } else { hi.x },
            if c & 2 == 0 { lo.y } else { hi.y },
            if c & 4 == 0 { lo.z } else { hi.z },
        ));
    }
    let quads: [[u32; 4]; 6] = [
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
    ];
    let triangles = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    TriangleMesh::new(vertices, triangles).expect("box indices are valid")
}

/// Closed z-aligned cylinder standing on `base`.
pub fn cylinder(base: Vec3, radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let n = segments as u32;
    let mut vertices = Vec::with_capacity(2 * segments + 2);
    for z in [0.0, height] {
        for i in 0..segments {
            let a = TAU * i as f64 / segments as f64;
            vertices.push(base + Vec3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let bottom = vertices.len() as u32;
    vertices.push(base);
    let top = bottom + 1;
    vertices.push(base + Vec3::new(0.0, 0.0, height));
    let mut triangles = Vec::with_capacity(4 * segments);
    for i in 0..n {
        let j = (i + 1) % n;
        triangles.push([i, j, n + j]);
        triangles.push([i, n + j, n + i]);
        triangles.push([top, n + i, n + j]);
        triangles.push([bottom, j, i]);
    }
    TriangleMesh::new(vertices, triangles).expect("cylinder indices are valid")
}

/// Closed latitude/longitude sphere.
pub fn uv_sphere(center: Vec3, radius: f64, slices: usize, stacks: usize) -> TriangleMesh {
    ellipsoid_with(center, Vec3::repeat(radius), slices, stacks)
}

pub fn ellipsoid(center: Vec3, semi_axes: Vec3) -> TriangleMesh {
    ellipsoid_with(center, semi_axes, SPHERE_SLICES, SPHERE_STACKS)
}

fn ellipsoid_with(center: Vec3, semi_axes: Vec3, slices: usize, stacks: usize) -> TriangleMesh {
    let mut vertices = vec![center + Vec3::new(0.0, 0.0, semi_axes.z)];
    for k in 1..stacks {
        let phi = std::f64::consts::PI * k as f64 / stacks as f64;
        for j in 0..slices {
            let theta = TAU * j as f64 / slices as f64;
            let dir = Vec3::new(phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos());
            vertices.push(center + dir.component_mul(&semi_axes));
        }
    }
    vertices.push(center - Vec3::new(0.0, 0.0, semi_axes.z));
    let south = (vertices.len() - 1) as u32;
    let s = slices as u32;
    let ring = |k: u32, j: u32| 1 + (k - 1) * s + (j % s);
    let mut triangles = Vec::new();
    for j in 0..s {
        triangles.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for k in 1..stacks as u32 - 1 {
        for j in 0..s {
            triangles.push([ring(k, j), ring(k + 1, j), ring(k + 1, j + 1)]);
            triangles.push([ring(k, j), ring(k + 1, j + 1), ring(k, j + 1)]);
        }
    }
    let last = stacks as u32 - 1;
    for j in 0..s {
        triangles.push([south, ring(last, j + 1), ring(last, j)]);
    }
    TriangleMesh::new(vertices, triangles).expect("sphere indices are valid")
}

/// Extrudes a counter-clockwise `(x, z)` profile along +y by `depth`. Caps
/// are fanned from `apex`, which must see every other profile vertex.
pub fn extruded_profile(profile: &[(f64, f64)], apex: usize, depth: f64) -> TriangleMesh {
    let n = profile.len() as u32;
    let mut vertices = Vec::with_capacity(2 * profile.len());
    for y in [0.0, depth] {
        vertices.extend(profile.iter().map(|&(x, z)| Vec3::new(x, y, z)));
    }
    let mut triangles = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        triangles.push([i, n + j, j]);
        triangles.push([i, n + i, n + j]);
    }
    let a = apex as u32;
    for i in 0..n {
        let j = (i + 1) % n;
        if i == a || j == a {
            continue;
        }
        triangles.push([a, i, j]);
        triangles.push([n + a, n + j, n + i]);
    }
    TriangleMesh::new(vertices, triangles).expect("profile indices are valid")
}
