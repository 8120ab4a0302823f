//! Binary model container.
//!
//! ```text
//! "RBMD" | version u8 | kind u8 (0 cluster, 1 embedding) | payload
//! ```
//!
//! Cluster payload: `k u32, low_res u16, high_res u16`, centroids (`k × low_res³`
//! f32), member counts (`k` u32), threshold choices (`k` ×
//! `tau f64, mean_iou f64, all_empty u8`), mean shapes
//! (`k × high_res³` f32), then the `k` binarized mean shapes as VXBG.
//!
//! Embedding payload: `n u32, dim u32`, `n` ids (u16 length + UTF-8), mean row
//! (`n` f32), basis (`dim × n` f32), descriptors (`n × dim` f32).
//!
//! Integers and floats are little-endian; matrices are row-major. Mean shapes
//! round-trip exactly because counts are recovered from `value × members`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::cluster::{ClusterModel, MeanShape, ThresholdChoice};
use super::retrieval::EmbeddingModel;
use crate::shape::VoxelGrid;
use crate::{Error, Result};

pub const RBMD_MAGIC: &[u8; 4] = b"RBMD";
pub const RBMD_VERSION: u8 = 1;

const KIND_CLUSTER: u8 = 0;
const KIND_EMBED: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Cluster(ClusterModel),
    Embedding(EmbeddingModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Cluster(_) => "cluster",
            Model::Embedding(_) => "embedding",
        }
    }
}

fn put_f32s(out: &mut Vec<u8>, values: impl Iterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

pub fn encode(model: &Model) -> Vec<u8> {
    let mut out = RBMD_MAGIC.to_vec();
    out.push(RBMD_VERSION);
    match model {
        Model::Cluster(m) => {
            out.push(KIND_CLUSTER);
            let high = m.mean_shapes.first().map_or(0, |s| s.resolution());
            out.extend_from_slice(&(m.k() as u32).to_le_bytes());
            out.extend_from_slice(&(m.low_resolution as u16).to_le_bytes());
            out.extend_from_slice(&(high as u16).to_le_bytes());
            for c in &m.centroids {
                put_f32s(&mut out, c.iter().copied());
            }
            for s in &m.mean_shapes {
                out.extend_from_slice(&(s.member_count() as u32).to_le_bytes());
            }
            for t in &m.thresholds {
                out.extend_from_slice(&t.tau.to_le_bytes());
                out.extend_from_slice(&t.mean_iou.to_le_bytes());
                out.push(t.all_empty as u8);
            }
            for s in &m.mean_shapes {
                put_f32s(&mut out, s.values());
            }
            for (s, t) in m.mean_shapes.iter().zip(&m.thresholds) {
                out.extend_from_slice(&s.threshold(t.tau).to_vxbg());
            }
        }
        Model::Embedding(m) => {
            out.push(KIND_EMBED);
            out.extend_from_slice(&(m.train_count() as u32).to_le_bytes());
            out.extend_from_slice(&(m.dim() as u32).to_le_bytes());
            for id in &m.train_ids {
                out.extend_from_slice(&(id.len() as u16).to_le_bytes());
                out.extend_from_slice(id.as_bytes());
            }
            put_f32s(&mut out, m.mean_row.iter().copied());
            for row in m.basis.row_iter() {
                put_f32s(&mut out, row.iter().copied());
            }
            for row in m.descriptors.row_iter() {
                put_f32s(&mut out, row.iter().copied());
            }
        }
    }
    out
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| Error::format("RBMD", "truncated payload"))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::format("RBMD", "size overflow"))?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }
}

pub fn decode(data: &[u8]) -> Result<Model> {
    if data.len() < 6 || &data[..4] != RBMD_MAGIC {
        return Err(Error::format("RBMD", "bad magic"));
    }
    if data[4] != RBMD_VERSION {
        return Err(Error::format("RBMD", format!("unsupported version {}", data[4])));
    }
    let mut r = Reader { data, pos: 6 };
    let model = match data[5] {
        KIND_CLUSTER => Model::Cluster(decode_cluster(&mut r)?),
        KIND_EMBED => Model::Embedding(decode_embedding(&mut r)?),
        other => return Err(Error::format("RBMD", format!("unknown model kind {other}"))),
    };
    if r.pos != data.len() {
        return Err(Error::format("RBMD", "trailing bytes"));
    }
    Ok(model)
}

fn decode_cluster(r: &mut Reader) -> Result<ClusterModel> {
    let k = r.u32()? as usize;
    let low = r.u16()? as usize;
    let high = r.u16()? as usize;
    let (low_len, high_len) = (low.pow(3), high.pow(3));
    let centroids = (0..k).map(|_| r.f32s(low_len)).collect::<Result<Vec<_>>>()?;
    let members = (0..k).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let mut thresholds = Vec::with_capacity(k);
    for _ in 0..k {
        thresholds.push(ThresholdChoice {
            tau: r.f64()?,
            mean_iou: r.f64()?,
            all_empty: r.take(1)?[0] != 0,
        });
    }
    let mut mean_shapes = Vec::with_capacity(k);
    for &n in &members {
        let values = r.f32s(high_len)?;
        let mut counts = Vec::with_capacity(high_len);
        for v in values {
            let c = (v * n as f64).round();
            if !(0.0..=n as f64).contains(&c) || ((c / n as f64) as f32) as f64 != v {
                return Err(Error::format("RBMD", "mean-shape value is not a member fraction"));
            }
            counts.push(c as u32);
        }
        mean_shapes.push(MeanShape::from_counts(high, n, counts).map_err(|e| Error::format("RBMD", e.to_string()))?);
    }
    for (shape, t) in mean_shapes.iter().zip(&thresholds) {
        let (stored, used) = VoxelGrid::from_vxbg_prefix(&r.data[r.pos..])?;
        r.pos += used;
        if stored != shape.threshold(t.tau) {
            return Err(Error::format(
                "RBMD",
                "stored prediction disagrees with mean shape and threshold",
            ));
        }
    }
    Ok(ClusterModel {
        centroids,
        low_resolution: low,
        mean_shapes,
        thresholds,
    })
}

fn decode_embedding(r: &mut Reader) -> Result<EmbeddingModel> {
    let n = r.u32()? as usize;
    let dim = r.u32()? as usize;
    if dim > n {
        return Err(Error::format("RBMD", "descriptor dimension exceeds training count"));
    }
    let mut train_ids = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let len = r.u16()? as usize;
        let id = std::str::from_utf8(r.take(len)?).map_err(|_| Error::format("RBMD", "id is not UTF-8"))?;
        train_ids.push(id.to_owned());
    }
    let mean_row = DVector::from_vec(r.f32s(n)?);
    let basis = DMatrix::from_row_slice(dim, n, &r.f32s(dim * n)?);
    let descriptors = DMatrix::from_row_slice(n, dim, &r.f32s(n * dim)?);
    Ok(EmbeddingModel {
        train_ids,
        mean_row,
        basis,
        descriptors,
    })
}

pub fn save_model(path: impl AsRef<Path>, model: &Model) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    decode(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
