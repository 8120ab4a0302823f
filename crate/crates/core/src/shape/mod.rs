//! Voxel, mesh and point representations and conversions between them.

pub mod marching_cubes;
pub mod mesh;
pub mod sample;
pub mod synth;
pub mod voxel;
pub mod voxelize;

pub use marching_cubes::marching_cubes;
pub use mesh::{normalize_unit_cube, rotate_mesh, Pose, TriangleMesh, Vec3};
pub use sample::{sample_surface, PointCloud};
pub use synth::{generate_synthetic, Holdout, Recipe, ShapeSpec};
pub use voxel::{VoxelGrid, VXBG_VERSION};
pub use voxelize::voxelize_mesh;
