//! Minimal PLY reader/writer for triangle meshes and point clouds.
//!
//! Writes `ascii` or `binary_little_endian`; reads both, with any scalar
//! property types. Point clouds carry either a `float dist` property or
//! `uchar red/green/blue`.

use std::fs;
use std::io::{BufRead, BufReader, Cursor, Read, Write};
use std::path::Path;

use crate::shape::{PointCloud, TriangleMesh, Vec3};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PlyFormat {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

impl PlyFormat {
    fn header_name(self) -> &'static str {
        match self {
            PlyFormat::Ascii => "ascii",
            PlyFormat::BinaryLittleEndian => "binary_little_endian",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(Error::format("PLY", format!("unknown property type {other:?}"))),
        })
    }

    fn read_binary(self, r: &mut impl Read) -> std::io::Result<f64> {
        macro_rules! rd {
            ($t:ty) => {{
                let mut b = [0u8; std::mem::size_of::<$t>()];
                r.read_exact(&mut b)?;
                <$t>::from_le_bytes(b) as f64
            }};
        }
        Ok(match self {
            Scalar::I8 => rd!(i8),
            Scalar::U8 => rd!(u8),
            Scalar::I16 => rd!(i16),
            Scalar::U16 => rd!(u16),
            Scalar::I32 => rd!(i32),
            Scalar::U32 => rd!(u32),
            Scalar::F32 => rd!(f32),
            Scalar::F64 => rd!(f64),
        })
    }
}

#[derive(Clone, Debug)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar(n, _) | Property::List(n, _, _) => n,
        }
    }
}

#[derive(Clone, Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Clone, Debug, PartialEq)]
enum Value {
    Scalar(f64),
    List(Vec<f64>),
}

/// Parsed element data, one row per element instance.
struct ElementData {
    element: Element,
    rows: Vec<Vec<Value>>,
}

impl ElementData {
    fn column(&self, name: &str) -> Option<usize> {
        self.element.properties.iter().position(|p| p.name() == name)
    }

    fn scalar(&self, row: usize, col: usize) -> f64 {
        match &self.rows[row][col] {
            Value::Scalar(v) => *v,
            Value::List(_) => f64::NAN,
        }
    }
}

fn parse_err(reason: impl Into<String>) -> Error {
    Error::format("PLY", reason)
}

fn read_elements(data: &[u8]) -> Result<Vec<ElementData>> {
    let mut reader = BufReader::new(Cursor::new(data));
    let mut line = String::new();
    let mut next_line = |reader: &mut BufReader<Cursor<&[u8]>>| -> Result<String> {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| parse_err(e.to_string()))?;
        if n == 0 {
            return Err(parse_err("unexpected end of header"));
        }
        Ok(line.trim().to_owned())
    };

    if next_line(&mut reader)? != "ply" {
        return Err(parse_err("missing 'ply' magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let l = next_line(&mut reader)?;
        let tokens: Vec<&str> = l.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", f, _version] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(parse_err(format!("unsupported format {other}"))),
                })
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| parse_err(format!("bad count in {l:?}")))?,
                properties: Vec::new(),
            }),
            ["property", "list", ct, it, name] => elements
                .last_mut()
                .ok_or_else(|| parse_err("property before element"))?
                .properties
                .push(Property::List(name.to_string(), Scalar::parse(ct)?, Scalar::parse(it)?)),
            ["property", t, name] => elements
                .last_mut()
                .ok_or_else(|| parse_err("property before element"))?
                .properties
                .push(Property::Scalar(name.to_string(), Scalar::parse(t)?)),
            ["end_header"] => break,
            _ => return Err(parse_err(format!("unrecognized header line {l:?}"))),
        }
    }
    let format = format.ok_or_else(|| parse_err("missing format line"))?;

    let mut out = Vec::with_capacity(elements.len());
    match format {
        PlyFormat::Ascii => {
            let mut body = String::new();
            reader.read_to_string(&mut body).map_err(|e| parse_err(e.to_string()))?;
            let mut tokens = body.split_whitespace();
            let mut num = || -> Result<f64> {
                tokens
                    .next()
                    .ok_or_else(|| parse_err("truncated ascii body"))?
                    .parse::<f64>()
                    .map_err(|e| parse_err(e.to_string()))
            };
            for element in elements {
                let mut rows = Vec::with_capacity(element.count);
                for _ in 0..element.count {
                    let mut row = Vec::with_capacity(element.properties.len());
                    for p in &element.properties {
                        row.push(match p {
                            Property::Scalar(..) => Value::Scalar(num()?),
                            Property::List(..) => {
                                let n = num()? as usize;
                                Value::List((0..n).map(|_| num()).collect::<Result<_>>()?)
                            }
                        });
                    }
                    rows.push(row);
                }
                out.push(ElementData { element, rows });
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let eof = |e: std::io::Error| parse_err(format!("truncated binary body: {e}"));
            for element in elements {
                let mut rows = Vec::with_capacity(element.count);
                for _ in 0..element.count {
                    let mut row = Vec::with_capacity(element.properties.len());
                    for p in &element.properties {
                        row.push(match p {
                            Property::Scalar(_, t) => Value::Scalar(t.read_binary(&mut reader).map_err(eof)?),
                            Property::List(_, ct, it) => {
                                let n = ct.read_binary(&mut reader).map_err(eof)? as usize;
                                Value::List(
                                    (0..n)
                                        .map(|_| it.read_binary(&mut reader).map_err(eof))
                                        .collect::<Result<_>>()?,
                                )
                            }
                        });
                    }
                    rows.push(row);
                }
                out.push(ElementData { element, rows });
            }
        }
    }
    Ok(out)
}

fn vertex_positions(elements: &[ElementData]) -> Result<(Vec<Vec3>, &ElementData)> {
    let vertex = elements
        .iter()
        .find(|e| e.element.name == "vertex")
        .ok_or_else(|| parse_err("no vertex element"))?;
    let cols = ["x", "y", "z"].map(|n| vertex.column(n));
    let [Some(x), Some(y), Some(z)] = cols else {
        return Err(parse_err("vertex element lacks x/y/z"));
    };
    let points = (0..vertex.rows.len())
        .map(|i| Vec3::new(vertex.scalar(i, x), vertex.scalar(i, y), vertex.scalar(i, z)))
        .collect();
    Ok((points, vertex))
}

fn header(format: PlyFormat, elements: &[(&str, usize, &[&str])]) -> String {
    let mut h = format!("ply\nformat {} 1.0\n", format.header_name());
    for (name, count, props) in elements {
        h.push_str(&format!("element {name} {count}\n"));
        for p in *props {
            h.push_str(&format!("property {p}\n"));
        }
    }
    h.push_str("end_header\n");
    h
}

pub fn mesh_to_bytes(mesh: &TriangleMesh, format: PlyFormat) -> Vec<u8> {
    let mut out = header(
        format,
        &[
            ("vertex", mesh.vertices().len(), &["double x", "double y", "double z"]),
            ("face", mesh.triangles().len(), &["list uchar int vertex_indices"]),
        ],
    )
    .into_bytes();
    match format {
        PlyFormat::Ascii => {
            for v in mesh.vertices() {
                // `{:?}` prints the shortest representation that round-trips
                writeln!(out, "{:?} {:?} {:?}", v.x, v.y, v.z).unwrap();
            }
            for t in mesh.triangles() {
                writeln!(out, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
            }
        }
        PlyFormat::BinaryLittleEndian => {
            for v in mesh.vertices() {
                for c in v.iter() {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
            for t in mesh.triangles() {
                out.push(3);
                for &i in t {
                    out.extend_from_slice(&(i as i32).to_le_bytes());
                }
            }
        }
    }
    out
}

pub fn mesh_from_bytes(data: &[u8]) -> Result<TriangleMesh> {
    let elements = read_elements(data)?;
    let (vertices, _) = vertex_positions(&elements)?;
    let mut triangles = Vec::new();
    if let Some(face) = elements.iter().find(|e| e.element.name == "face") {
        let col = face
            .column("vertex_indices")
            .or_else(|| face.column("vertex_index"))
            .ok_or_else(|| parse_err("face element lacks vertex_indices"))?;
        for row in &face.rows {
            let Value::List(idx) = &row[col] else {
                return Err(parse_err("vertex_indices is not a list"));
            };
            let idx: Vec<u32> = idx.iter().map(|&i| i as u32).collect();
            // fan-triangulate polygons
            for k in 1..idx.len().saturating_sub(1) {
                triangles.push([idx[0], idx[k], idx[k + 1]]);
            }
        }
    }
    TriangleMesh::new(vertices, triangles)
}

/// Optional per-point attribute written alongside positions.
#[derive(Clone, Copy, Debug)]
pub enum PointAttribute<'a> {
    None,
    Distance(&'a [f64]),
    Color(&'a [[u8; 3]]),
    /// `dist` followed by `red green blue`.
    DistanceColor(&'a [f64], &'a [[u8; 3]]),
}

pub fn cloud_to_bytes(cloud: &PointCloud, attribute: PointAttribute<'_>, format: PlyFormat) -> Result<Vec<u8>> {
    let n = cloud.len();
    let (dist, color) = match attribute {
        PointAttribute::None => (None, None),
        PointAttribute::Distance(d) => (Some(d), None),
        PointAttribute::Color(c) => (None, Some(c)),
        PointAttribute::DistanceColor(d, c) => (Some(d), Some(c)),
    };
    let mut props: Vec<&str> = vec!["double x", "double y", "double z"];
    if let Some(d) = dist {
        if d.len() != n {
            return Err(Error::invalid("distance channel length mismatch"));
        }
        props.push("float dist");
    }
    if let Some(c) = color {
        if c.len() != n {
            return Err(Error::invalid("color channel length mismatch"));
        }
        props.extend(["uchar red", "uchar green", "uchar blue"]);
    }
    let mut out = header(format, &[("vertex", n, &props)]).into_bytes();
    for (i, p) in cloud.points().iter().enumerate() {
        match format {
            PlyFormat::Ascii => {
                write!(out, "{:?} {:?} {:?}", p.x, p.y, p.z).unwrap();
                if let Some(d) = dist {
                    write!(out, " {:?}", d[i] as f32).unwrap();
                }
                if let Some(c) = color {
                    write!(out, " {} {} {}", c[i][0], c[i][1], c[i][2]).unwrap();
                }
                out.push(b'\n');
            }
            PlyFormat::BinaryLittleEndian => {
                for c in p.iter() {
                    out.extend_from_slice(&c.to_le_bytes());
                }
                if let Some(d) = dist {
                    out.extend_from_slice(&(d[i] as f32).to_le_bytes());
                }
                if let Some(c) = color {
                    out.extend_from_slice(&c[i]);
                }
            }
        }
    }
    Ok(out)
}

/// A point cloud read back from PLY; `dist` lands in the scalar channel.
pub struct LoadedCloud {
    pub cloud: PointCloud,
    pub colors: Option<Vec<[u8; 3]>>,
}

pub fn cloud_from_bytes(data: &[u8]) -> Result<LoadedCloud> {
    let elements = read_elements(data)?;
    let (points, vertex) = vertex_positions(&elements)?;
    let mut cloud = PointCloud::new(points)?;
    if let Some(col) = vertex.column("dist") {
        cloud = cloud.with_scalars((0..vertex.rows.len()).map(|i| vertex.scalar(i, col)).collect())?;
    }
    let colors = match ["red", "green", "blue"].map(|c| vertex.column(c)) {
        [Some(r), Some(g), Some(b)] => Some(
            (0..vertex.rows.len())
                .map(|i| [r, g, b].map(|c| vertex.scalar(i, c) as u8))
                .collect(),
        ),
        _ => None,
    };
    Ok(LoadedCloud { cloud, colors })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn save_mesh(path: impl AsRef<Path>, mesh: &TriangleMesh, format: PlyFormat) -> Result<()> {
    write_file(path.as_ref(), &mesh_to_bytes(mesh, format))
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    mesh_from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn save_cloud(
    path: impl AsRef<Path>,
    cloud: &PointCloud,
    attribute: PointAttribute<'_>,
    format: PlyFormat,
) -> Result<()> {
    write_file(path.as_ref(), &cloud_to_bytes(cloud, attribute, format)?)
}

pub fn load_cloud(path: impl AsRef<Path>) -> Result<LoadedCloud> {
    let path = path.as_ref();
    cloud_from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
