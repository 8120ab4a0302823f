use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// Largest supported grid side.
pub const MAX_RESOLUTION: usize = 512;

const VXBG_MAGIC: &[u8; 4] = b"VXBG";
pub const VXBG_VERSION: u8 = 1;

/// Cubic binary occupancy grid, bit-packed in x-fastest order.
///
/// Cell `(x, y, z)` has linear index `x + R*y + R*R*z`; bit `i` of byte `b`
/// holds cell `8*b + i`. Cell `(x, y, z)` covers `[x/R, (x+1)/R]` (and so on
/// per axis) of the unit cube.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct VoxelGrid {
    resolution: usize,
    bits: Vec<u8>,
}

impl std::fmt::Debug for VoxelGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VoxelGrid")
            .field("resolution", &self.resolution)
            .field("occupied", &self.count())
            .finish()
    }
}

fn byte_len(resolution: usize) -> usize {
    (resolution * resolution * resolution).div_ceil(8)
}

impl VoxelGrid {
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution == 0 || resolution > MAX_RESOLUTION {
            return Err(Error::InvalidResolution(resolution));
        }
        Ok(Self {
            resolution,
            bits: vec![0; byte_len(resolution)],
        })
    }

    pub fn full(resolution: usize) -> Result<Self> {
        let mut grid = Self::new(resolution)?;
        for i in 0..grid.len() {
            grid.set_index(i, true);
        }
        Ok(grid)
    }

    pub fn from_fn(resolution: usize, mut f: impl FnMut(usize, usize, usize) -> bool) -> Result<Self> {
        let mut grid = Self::new(resolution)?;
        let r = resolution;
        for z in 0..r {
            for y in 0..r {
                for x in 0..r {
                    if f(x, y, z) {
                        grid.set(x, y, z, true);
                    }
                }
            }
        }
        Ok(grid)
    }

    /// Builds a grid from raw packed bytes, validating length and padding bits.
    pub fn from_bytes(resolution: usize, bits: Vec<u8>) -> Result<Self> {
        if resolution == 0 || resolution > MAX_RESOLUTION {
            return Err(Error::InvalidResolution(resolution));
        }
        if bits.len() != byte_len(resolution) {
            return Err(Error::format(
                "VXBG",
                format!("expected {} occupancy bytes, got {}", byte_len(resolution), bits.len()),
            ));
        }
        let cells = resolution.pow(3);
        if !cells.is_multiple_of(8) {
            let tail = bits[bits.len() - 1];
            if tail >> (cells % 8) != 0 {
                return Err(Error::format("VXBG", "nonzero padding bits"));
            }
        }
        Ok(Self { resolution, bits })
    }

    #[inline]
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Number of cells, `R³`.
    #[inline]
    pub fn len(&self) -> usize {
        self.resolution * self.resolution * self.resolution
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.resolution * (y + self.resolution * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize, usize) {
        let r = self.resolution;
        (index % r, (index / r) % r, index / (r * r))
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> bool {
        self.bits[i >> 3] & (1 << (i & 7)) != 0
    }

    #[inline]
    pub fn set_index(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len());
        if value {
            self.bits[i >> 3] |= 1 << (i & 7);
        } else {
            self.bits[i >> 3] &= !(1 << (i & 7));
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.get_index(self.index(x, y, z))
    }

    /// Like [`get`](Self::get) but cells outside the grid read as empty.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64, z: i64) -> bool {
        let r = self.resolution as i64;
        if x < 0 || y < 0 || z < 0 || x >= r || y >= r || z >= r {
            return false;
        }
        self.get(x as usize, y as usize, z as usize)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.index(x, y, z);
        self.set_index(i, value);
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    pub fn iter_occupied(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .flat_map(|(b, &byte)| (0..8).filter(move |i| byte & (1 << i) != 0).map(move |i| 8 * b + i))
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.resolution != other.resolution {
            return Err(Error::ResolutionMismatch(self.resolution, other.resolution));
        }
        Ok(())
    }

    /// `(|a ∩ b|, |a ∪ b|)`.
    pub fn overlap_counts(&self, other: &Self) -> Result<(usize, usize)> {
        self.check_same(other)?;
        let mut inter = 0usize;
        let mut union = 0usize;
        for (a, b) in self.bits.iter().zip(&other.bits) {
            inter += (a & b).count_ones() as usize;
            union += (a | b).count_ones() as usize;
        }
        Ok((inter, union))
    }

    /// Occupancy as a dense `0.0 / 1.0` vector in linear index order.
    pub fn to_f32_vec(&self) -> Vec<f32> {
        (0..self.len())
            .map(|i| if self.get_index(i) { 1.0 } else { 0.0 })
            .collect()
    }

    /// Marks every cell that is not reachable from outside the grid through
    /// 6-connected empty cells.
    ///
    /// The grid is conceptually padded with one empty layer so every boundary
    /// cell touches the exterior.
    pub fn fill_interior(&self) -> VoxelGrid {
        let r = self.resolution;
        let p = r + 2;
        let pidx = |x: usize, y: usize, z: usize| x + p * (y + p * z);
        let mut exterior = vec![false; p * p * p];
        let blocked = |x: usize, y: usize, z: usize| -> bool {
            x >= 1 && y >= 1 && z >= 1 && x <= r && y <= r && z <= r && self.get(x - 1, y - 1, z - 1)
        };
        let mut queue = VecDeque::new();
        exterior[0] = true;
        queue.push_back((0usize, 0usize, 0usize));
        while let Some((x, y, z)) = queue.pop_front() {
            let neighbors = [
                (x.wrapping_sub(1), y, z),
                (x + 1, y, z),
                (x, y.wrapping_sub(1), z),
                (x, y + 1, z),
                (x, y, z.wrapping_sub(1)),
                (x, y, z + 1),
            ];
            for (nx, ny, nz) in neighbors {
                if nx >= p || ny >= p || nz >= p {
                    continue;
                }
                let ni = pidx(nx, ny, nz);
                if exterior[ni] || blocked(nx, ny, nz) {
                    continue;
                }
                exterior[ni] = true;
                queue.push_back((nx, ny, nz));
            }
        }
        let mut out = self.clone();
        for z in 0..r {
            for y in 0..r {
                for x in 0..r {
                    if !exterior[pidx(x + 1, y + 1, z + 1)] {
                        out.set(x, y, z, true);
                    }
                }
            }
        }
        out
    }

    /// Block-fraction downsampling: an output cell is occupied iff at least
    /// `frac` of its `factor³` input block is occupied.
    pub fn downsample(&self, factor: usize, frac: f64) -> Result<VoxelGrid> {
        if factor == 0 || !self.resolution.is_multiple_of(factor) {
            return Err(Error::invalid(format!(
                "downsample factor {factor} does not divide resolution {}",
                self.resolution
            )));
        }
        if !(frac > 0.0 && frac <= 1.0) {
            return Err(Error::invalid(format!("downsample fraction {frac} outside (0, 1]")));
        }
        let out_res = self.resolution / factor;
        let mut counts = vec![0u32; out_res * out_res * out_res];
        for i in self.iter_occupied() {
            let (x, y, z) = self.coords(i);
            let o = x / factor + out_res * (y / factor + out_res * (z / factor));
            counts[o] += 1;
        }
        let block = (factor * factor * factor) as f64;
        let mut out = VoxelGrid::new(out_res)?;
        for (i, &c) in counts.iter().enumerate() {
            if c as f64 >= frac * block {
                out.set_index(i, true);
            }
        }
        Ok(out)
    }

    /// Serializes to the VXBG container.
    pub fn to_vxbg(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(7 + self.bits.len());
        out.extend_from_slice(VXBG_MAGIC);
        out.push(VXBG_VERSION);
        out.extend_from_slice(&(self.resolution as u16).to_le_bytes());
        out.extend_from_slice(&self.bits);
        out
    }

    /// Parses a VXBG buffer; returns the grid and the number of bytes consumed.
    pub fn from_vxbg_prefix(data: &[u8]) -> Result<(VoxelGrid, usize)> {
        if data.len() < 7 || &data[..4] != VXBG_MAGIC {
            return Err(Error::format("VXBG", "bad magic"));
        }
        if data[4] != VXBG_VERSION {
            return Err(Error::format("VXBG", format!("unsupported version {}", data[4])));
        }
        let resolution = u16::from_le_bytes([data[5], data[6]]) as usize;
        if resolution == 0 || resolution > MAX_RESOLUTION {
            return Err(Error::InvalidResolution(resolution));
        }
        let n = byte_len(resolution);
        let payload = data
            .get(7..7 + n)
            .ok_or_else(|| Error::format("VXBG", "truncated occupancy payload"))?;
        Ok((VoxelGrid::from_bytes(resolution, payload.to_vec())?, 7 + n))
    }

    pub fn from_vxbg(data: &[u8]) -> Result<VoxelGrid> {
        let (grid, used) = Self::from_vxbg_prefix(data)?;
        if used != data.len() {
            return Err(Error::format("VXBG", "trailing bytes"));
        }
        Ok(grid)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, self.to_vxbg()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<VoxelGrid> {
        let path = path.as_ref();
        let data = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_vxbg(&data)
    }
}
