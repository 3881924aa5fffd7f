use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::reconstruct::{PointCloud, TriangleMesh};

use super::{read_bytes, write_bytes};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
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

struct VertexLayout {
    colors: bool,
    normals: bool,
}

fn header(fmt: PlyFormat, comment: &str, vertices: usize, layout: &VertexLayout, faces: usize) -> String {
    let mut h = format!("ply\nformat {} 1.0\ncomment {comment}\nelement vertex {vertices}\n", fmt.header_name());
    h.push_str("property float x\nproperty float y\nproperty float z\n");
    if layout.normals {
        h.push_str("property float nx\nproperty float ny\nproperty float nz\n");
    }
    if layout.colors {
        h.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    let _ = write!(h, "element face {faces}\nproperty list uchar int vertex_indices\nend_header\n");
    h
}

struct Writer {
    fmt: PlyFormat,
    out: Vec<u8>,
    line: String,
}

impl Writer {
    fn float(&mut self, x: f64) {
        let x = x as f32;
        match self.fmt {
            PlyFormat::Ascii => {
                if !self.line.is_empty() {
                    self.line.push(' ');
                }
                let _ = write!(self.line, "{x}");
            }
            PlyFormat::BinaryLittleEndian => self.out.extend_from_slice(&x.to_le_bytes()),
        }
    }

    fn uchar(&mut self, x: u8) {
        match self.fmt {
            PlyFormat::Ascii => {
                if !self.line.is_empty() {
                    self.line.push(' ');
                }
                let _ = write!(self.line, "{x}");
            }
            PlyFormat::BinaryLittleEndian => self.out.push(x),
        }
    }

    fn int(&mut self, x: i32) {
        match self.fmt {
            PlyFormat::Ascii => {
                let _ = write!(self.line, " {x}");
            }
            PlyFormat::BinaryLittleEndian => self.out.extend_from_slice(&x.to_le_bytes()),
        }
    }

    fn end_record(&mut self) {
        if self.fmt == PlyFormat::Ascii {
            self.line.push('\n');
            self.out.extend_from_slice(self.line.as_bytes());
            self.line.clear();
        }
    }
}

pub fn write_ply_cloud(path: &Path, cloud: &PointCloud, fmt: PlyFormat) -> Result<()> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let layout = VertexLayout { colors: cloud.colors.is_some(), normals: false };
    let mut w = Writer {
        fmt,
        out: header(fmt, "mvsdf point cloud", cloud.len(), &layout, 0).into_bytes(),
        line: String::new(),
    };
    for (i, p) in cloud.points.iter().enumerate() {
        w.float(p.x);
        w.float(p.y);
        w.float(p.z);
        if let Some(c) = &cloud.colors {
            for &b in &c[i] {
                w.uchar(b);
            }
        }
        w.end_record();
    }
    write_bytes(path, &w.out)
}

pub fn write_ply_mesh(path: &Path, mesh: &TriangleMesh, fmt: PlyFormat) -> Result<()> {
    if mesh.vertices.is_empty() {
        return Err(Error::InvalidInput("cannot write a mesh without vertices".into()));
    }
    let layout = VertexLayout { colors: false, normals: mesh.normals.is_some() };
    let mut w = Writer {
        fmt,
        out: header(fmt, "mvsdf mesh", mesh.vertices.len(), &layout, mesh.triangles.len()).into_bytes(),
        line: String::new(),
    };
    for (i, p) in mesh.vertices.iter().enumerate() {
        w.float(p.x);
        w.float(p.y);
        w.float(p.z);
        if let Some(n) = &mesh.normals {
            w.float(n[i].x);
            w.float(n[i].y);
            w.float(n[i].z);
        }
        w.end_record();
    }
    for t in &mesh.triangles {
        w.uchar(3);
        for &i in t {
            let idx = i32::try_from(i).map_err(|_| Error::InvalidInput("mesh too large for int indices".into()))?;
            w.int(idx);
        }
        w.end_record();
    }
    write_bytes(path, &w.out)
}

/// Geometry read back from a PLY file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlyData {
    pub vertices: Vec<[f64; 3]>,
    pub normals: Option<Vec<[f64; 3]>>,
    pub colors: Option<Vec<[u8; 3]>>,
    pub faces: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
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
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Token source over either ascii records or a little-endian byte stream.
enum Body<'a> {
    Ascii { tokens: std::vec::IntoIter<(usize, &'a str)> },
    Binary { bytes: &'a [u8], pos: usize },
}

impl Body<'_> {
    fn next(&mut self, ty: Scalar, path: &Path) -> Result<f64> {
        match self {
            Body::Ascii { tokens } => {
                let (line, t) = tokens.next().ok_or_else(|| Error::format(path, 0, "unexpected end of data"))?;
                let bad = || Error::format(path, line, format!("invalid value '{t}'"));
                // parse at the declared width so ascii floats round like binary ones
                match ty {
                    Scalar::F32 => t.parse::<f32>().map(f64::from).map_err(|_| bad()),
                    _ => t.parse::<f64>().map_err(|_| bad()),
                }
            }
            Body::Binary { bytes, pos } => {
                let n = ty.size();
                if *pos + n > bytes.len() {
                    return Err(Error::format(path, 0, "truncated binary payload"));
                }
                let v = ty.read_le(&bytes[*pos..*pos + n]);
                *pos += n;
                Ok(v)
            }
        }
    }
}

pub fn read_ply(path: &Path) -> Result<PlyData> {
    let bytes = read_bytes(path)?;
    let marker = b"end_header\n";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| Error::format(path, 1, "missing end_header"))?;
    let head = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::format(path, 1, "header is not text"))?;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for (i, line) in head.lines().enumerate() {
        let n = i + 1;
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["ply"] if n == 1 => {}
            _ if n == 1 => return Err(Error::format(path, 1, "bad magic, expected 'ply'")),
            ["format", f, "1.0"] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(Error::format(path, n, format!("unsupported format '{other}'"))),
                })
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| Error::format(path, n, "invalid element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, it, name] => {
                let (Some(ct), Some(it)) = (Scalar::parse(ct), Scalar::parse(it)) else {
                    return Err(Error::format(path, n, "unknown list property type"));
                };
                let el = elements.last_mut().ok_or_else(|| Error::format(path, n, "property before element"))?;
                el.props.push(Property::List(name.to_string(), ct, it));
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty).ok_or_else(|| Error::format(path, n, format!("unknown type '{ty}'")))?;
                let el = elements.last_mut().ok_or_else(|| Error::format(path, n, "property before element"))?;
                el.props.push(Property::Scalar(name.to_string(), ty));
            }
            _ => return Err(Error::format(path, n, format!("unrecognized header line '{line}'"))),
        }
    }
    let format = format.ok_or_else(|| Error::format(path, 2, "missing format line"))?;
    let data = &bytes[end + marker.len()..];
    let header_lines = head.lines().count() + 1;
    let mut body = match format {
        PlyFormat::Ascii => {
            let text =
                std::str::from_utf8(data).map_err(|_| Error::format(path, header_lines, "ascii body is not text"))?;
            let tokens: Vec<(usize, &str)> = text
                .lines()
                .enumerate()
                .flat_map(|(i, l)| l.split_whitespace().map(move |t| (header_lines + 1 + i, t)))
                .collect();
            Body::Ascii { tokens: tokens.into_iter() }
        }
        PlyFormat::BinaryLittleEndian => Body::Binary { bytes: data, pos: 0 },
    };

    let mut out = PlyData::default();
    for el in &elements {
        let has = |n: &str| el.props.iter().any(|p| matches!(p, Property::Scalar(x, _) if x == n));
        if el.name == "vertex" {
            if has("nx") {
                out.normals = Some(Vec::with_capacity(el.count));
            }
            if has("red") {
                out.colors = Some(Vec::with_capacity(el.count));
            }
        }
        for _ in 0..el.count {
            let (mut xyz, mut nrm, mut rgb) = ([0.0; 3], [0.0; 3], [0u8; 3]);
            for prop in &el.props {
                match prop {
                    Property::Scalar(name, ty) => {
                        let v = body.next(*ty, path)?;
                        match name.as_str() {
                            "x" => xyz[0] = v,
                            "y" => xyz[1] = v,
                            "z" => xyz[2] = v,
                            "nx" => nrm[0] = v,
                            "ny" => nrm[1] = v,
                            "nz" => nrm[2] = v,
                            "red" => rgb[0] = v as u8,
                            "green" => rgb[1] = v as u8,
                            "blue" => rgb[2] = v as u8,
                            _ => {}
                        }
                    }
                    Property::List(name, ct, it) => {
                        let k = body.next(*ct, path)? as usize;
                        let mut idx = Vec::with_capacity(k);
                        for _ in 0..k {
                            idx.push(body.next(*it, path)? as usize);
                        }
                        if el.name == "face" && name == "vertex_indices" {
                            out.faces.push(idx);
                        }
                    }
                }
            }
            if el.name == "vertex" {
                out.vertices.push(xyz);
                if let Some(n) = out.normals.as_mut() {
                    n.push(nrm);
                }
                if let Some(c) = out.colors.as_mut() {
                    c.push(rgb);
                }
            }
        }
    }
    if out.faces.iter().flatten().any(|&i| i >= out.vertices.len()) {
        return Err(Error::format(path, 0, "face index out of range"));
    }
    Ok(out)
}
