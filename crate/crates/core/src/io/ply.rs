//! PLY point clouds.
//!
//! Written as binary little-endian with `float` x/y/z and optional `uchar`
//! red/green/blue. The reader also accepts ascii and big-endian files,
//! `double` coordinates and extra scalar vertex properties.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fusion::PointCloud;

pub fn ply_bytes(cloud: &PointCloud) -> Vec<u8> {
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", cloud.points.len()));
    header.push_str("property float x\nproperty float y\nproperty float z\n");
    if cloud.colors.is_some() {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    header.push_str("end_header\n");
    let stride = if cloud.colors.is_some() { 15 } else { 12 };
    let mut out = Vec::with_capacity(header.len() + stride * cloud.points.len());
    out.extend_from_slice(header.as_bytes());
    for (i, p) in cloud.points.iter().enumerate() {
        for v in p {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        if let Some(colors) = &cloud.colors {
            out.extend_from_slice(&colors[i]);
        }
    }
    out
}

pub fn write_ply(cloud: &PointCloud, path: &Path) -> Result<()> {
    if let Some(c) = &cloud.colors {
        if c.len() != cloud.points.len() {
            return Err(Error::InvalidConfig("one color per point required".into()));
        }
    }
    std::fs::write(path, ply_bytes(cloud)).map_err(|e| Error::io(path, e))
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&bytes, path)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Encoding {
    Ascii,
    Little,
    Big,
}

#[derive(Clone, Copy, Debug, PartialEq)]
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
    fn parse(name: &str) -> Option<Scalar> {
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

    fn read(self, b: &[u8], enc: Encoding) -> f64 {
        macro_rules! num {
            ($t:ty, $n:expr) => {{
                let mut a = [0u8; $n];
                a.copy_from_slice(&b[..$n]);
                (if enc == Encoding::Big {
                    <$t>::from_be_bytes(a)
                } else {
                    <$t>::from_le_bytes(a)
                }) as f64
            }};
        }
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => num!(i16, 2),
            Scalar::U16 => num!(u16, 2),
            Scalar::I32 => num!(i32, 4),
            Scalar::U32 => num!(u32, 4),
            Scalar::F32 => num!(f32, 4),
            Scalar::F64 => num!(f64, 8),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar(String, Scalar),
    List,
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

fn parse_ply(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::parse(path, line_no + 1, 1, "header is not terminated"))?;
        line_no += 1;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| Error::parse(path, line_no, 1, "header is not text"))?
            .trim();
        pos += end + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1 {
            if line != "ply" {
                return Err(Error::parse(path, 1, 1, "missing `ply` magic"));
            }
            continue;
        }
        match toks.first().copied() {
            Some("format") => {
                encoding = Some(match toks.get(1).copied() {
                    Some("ascii") => Encoding::Ascii,
                    Some("binary_little_endian") => Encoding::Little,
                    Some("binary_big_endian") => Encoding::Big,
                    other => {
                        return Err(Error::UnsupportedFormat {
                            path: path.to_path_buf(),
                            message: format!("ply format {other:?}"),
                        })
                    }
                })
            }
            Some("element") => {
                let (Some(name), Some(count)) = (toks.get(1), toks.get(2)) else {
                    return Err(Error::parse(path, line_no, 1, "malformed element line"));
                };
                let count = count
                    .parse()
                    .map_err(|_| Error::parse(path, line_no, 1, "bad element count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(path, line_no, 1, "property before element"))?;
                if toks.get(1) == Some(&"list") {
                    el.properties.push(Property::List);
                } else {
                    let (Some(ty), Some(name)) = (toks.get(1), toks.get(2)) else {
                        return Err(Error::parse(path, line_no, 1, "malformed property line"));
                    };
                    let ty = Scalar::parse(ty).ok_or_else(|| {
                        Error::parse(path, line_no, 10, format!("unknown type `{ty}`"))
                    })?;
                    el.properties.push(Property::Scalar(name.to_string(), ty));
                }
            }
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => {
                return Err(Error::parse(
                    path,
                    line_no,
                    1,
                    format!("unknown header keyword `{other}`"),
                ))
            }
        }
    }
    let encoding =
        encoding.ok_or_else(|| Error::parse(path, line_no, 1, "missing format line"))?;

    let mut skip = 0usize;
    let mut vertex = None;
    for el in &elements {
        if el.name == "vertex" {
            vertex = Some(el);
            break;
        }
        if encoding == Encoding::Ascii {
            skip += el.count;
            continue;
        }
        let mut stride = 0;
        for p in &el.properties {
            match p {
                Property::Scalar(_, s) => stride += s.size(),
                Property::List => {
                    return Err(Error::UnsupportedFormat {
                        path: path.to_path_buf(),
                        message: "list properties before the vertex element".into(),
                    })
                }
            }
        }
        skip += stride * el.count;
    }
    let vertex = vertex.ok_or_else(|| Error::Dataset(format!("{}: no vertex element", path.display())))?;
    let mut props = Vec::new();
    for p in &vertex.properties {
        match p {
            Property::Scalar(name, s) => props.push((name.as_str(), *s)),
            Property::List => {
                return Err(Error::UnsupportedFormat {
                    path: path.to_path_buf(),
                    message: "list property in vertex element".into(),
                })
            }
        }
    }
    let find = |n: &str| props.iter().position(|(name, _)| *name == n);
    let (Some(ix), Some(iy), Some(iz)) = (find("x"), find("y"), find("z")) else {
        return Err(Error::parse(path, line_no, 1, "vertex lacks x/y/z"));
    };
    let rgb = match (find("red"), find("green"), find("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        _ => None,
    };

    let n = vertex.count;
    let mut points = Vec::with_capacity(n);
    let mut colors = rgb.map(|_| Vec::with_capacity(n));
    let mut row = vec![0.0; props.len()];
    let mut emit = |row: &[f64]| {
        points.push([row[ix], row[iy], row[iz]]);
        if let (Some(c), Some(idx)) = (colors.as_mut(), rgb) {
            c.push(idx.map(|i| row[i] as u8));
        }
    };

    if encoding == Encoding::Ascii {
        let body = std::str::from_utf8(&bytes[pos..])
            .map_err(|_| Error::parse(path, line_no + 1, 1, "ascii body is not text"))?;
        let mut lines = body.lines().enumerate().skip(skip);
        for _ in 0..n {
            let (k, line) = lines.next().ok_or_else(|| {
                Error::parse(path, line_no + 1, 1, format!("expected {n} vertices"))
            })?;
            let ln = line_no + k + 1;
            let mut toks = line.split_whitespace();
            for slot in row.iter_mut() {
                let t = toks
                    .next()
                    .ok_or_else(|| Error::parse(path, ln, 1, "too few vertex values"))?;
                *slot = t
                    .parse()
                    .map_err(|_| Error::parse(path, ln, 1, format!("bad value `{t}`")))?;
            }
            emit(&row);
        }
    } else {
        let stride: usize = props.iter().map(|(_, s)| s.size()).sum();
        let start = pos + skip;
        let need = start + stride * n;
        if bytes.len() < need {
            return Err(Error::parse(
                path,
                line_no + 1,
                1,
                format!("binary body is {} bytes short", need - bytes.len()),
            ));
        }
        for v in 0..n {
            let mut off = start + v * stride;
            for (slot, (_, s)) in row.iter_mut().zip(&props) {
                *slot = s.read(&bytes[off..], encoding);
                off += s.size();
            }
            emit(&row);
        }
    }
    Ok(PointCloud { points, colors })
}
