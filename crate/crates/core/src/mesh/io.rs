//! OBJ and PLY reading, PLY (optionally vertex-coloured) and OBJ writing.

use std::path::Path;

use super::Mesh;
use crate::io_util::{read_file, write_atomic};
use crate::{Error, Result};

/// Loads a triangle mesh from `.obj` or `.ply`, fan-triangulating polygons.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    let (vertices, faces) = match ext.as_str() {
        "obj" => {
            let obj = read_obj(path)?;
            let faces = obj.triangles(path)?;
            (obj.positions, faces)
        }
        "ply" => read_ply(path)?,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "{}: unsupported mesh extension (expected .obj or .ply)",
                path.display()
            )))
        }
    };
    Mesh::new(vertices, faces).map_err(|e| match e {
        Error::InvalidMesh(msg) => Error::Format {
            path: path.to_path_buf(),
            msg,
        },
        other => other,
    })
}

/// One polygon of an OBJ file with optional texture-coordinate indices and
/// the material active when it was declared.
#[derive(Debug, Clone)]
pub struct ObjFace {
    pub vertices: Vec<usize>,
    pub texcoords: Vec<Option<usize>>,
    pub material: Option<String>,
    pub line: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ObjData {
    pub positions: Vec<[f64; 3]>,
    pub texcoords: Vec<[f64; 2]>,
    pub faces: Vec<ObjFace>,
    pub material_libs: Vec<String>,
}

impl ObjData {
    /// Fan-triangulates every polygon from its first vertex, returning the
    /// triangles together with the index of the polygon each came from.
    pub fn triangles_with_source(&self, path: &Path) -> Result<(Vec<[usize; 3]>, Vec<usize>)> {
        let mut tris = Vec::with_capacity(self.faces.len());
        let mut source = Vec::with_capacity(self.faces.len());
        for (fi, f) in self.faces.iter().enumerate() {
            if f.vertices.len() < 3 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: f.line,
                    msg: format!("face with {} vertices cannot be triangulated", f.vertices.len()),
                });
            }
            for k in 1..f.vertices.len() - 1 {
                tris.push([f.vertices[0], f.vertices[k], f.vertices[k + 1]]);
                source.push(fi);
            }
        }
        Ok((tris, source))
    }

    pub fn triangles(&self, path: &Path) -> Result<Vec<[usize; 3]>> {
        Ok(self.triangles_with_source(path)?.0)
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn resolve_index(raw: &str, count: usize, path: &Path, line: usize, what: &str) -> Result<usize> {
    let v: i64 = raw
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad {what} index {raw:?}")))?;
    let idx = if v > 0 {
        v - 1
    } else if v < 0 {
        count as i64 + v
    } else {
        -1
    };
    if idx < 0 || idx as usize >= count {
        return Err(parse_err(
            path,
            line,
            format!("{what} index {v} out of range ({count} defined so far)"),
        ));
    }
    Ok(idx as usize)
}

pub fn read_obj(path: &Path) -> Result<ObjData> {
    let bytes = read_file(path)?;
    let text = String::from_utf8_lossy(&bytes);
    parse_obj(&text, path)
}

pub fn parse_obj(text: &str, path: &Path) -> Result<ObjData> {
    let mut out = ObjData::default();
    let mut material: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut parts = content.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        match tag {
            "v" => {
                let coords: Vec<f64> = parts
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| parse_err(path, line, "bad vertex coordinate"))?;
                if coords.len() != 3 {
                    return Err(parse_err(path, line, "vertex needs three coordinates"));
                }
                out.positions.push([coords[0], coords[1], coords[2]]);
            }
            "vt" => {
                let coords: Vec<f64> = parts
                    .take(2)
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| parse_err(path, line, "bad texture coordinate"))?;
                let u = *coords.first().ok_or_else(|| parse_err(path, line, "empty vt record"))?;
                out.texcoords.push([u, coords.get(1).copied().unwrap_or(0.0)]);
            }
            "f" => {
                let mut face = ObjFace {
                    vertices: Vec::new(),
                    texcoords: Vec::new(),
                    material: material.clone(),
                    line,
                };
                for corner in parts {
                    let mut fields = corner.split('/');
                    let v = fields.next().unwrap_or("");
                    face.vertices
                        .push(resolve_index(v, out.positions.len(), path, line, "vertex")?);
                    let vt = match fields.next() {
                        Some(s) if !s.is_empty() => {
                            Some(resolve_index(s, out.texcoords.len(), path, line, "texcoord")?)
                        }
                        _ => None,
                    };
                    face.texcoords.push(vt);
                }
                out.faces.push(face);
            }
            "usemtl" => material = parts.next().map(str::to_owned),
            "mtllib" => out.material_libs.extend(parts.map(str::to_owned)),
            _ => {}
        }
    }
    Ok(out)
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
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
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
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(PartialEq)]
enum PlyFormat {
    Ascii,
    BinaryLe,
}

type Triangles = (Vec<[f64; 3]>, Vec<[usize; 3]>);

pub fn read_ply(path: &Path) -> Result<Triangles> {
    let bytes = read_file(path)?;
    parse_ply(&bytes, path)
}

pub fn parse_ply(bytes: &[u8], path: &Path) -> Result<Triangles> {
    // Header is ASCII, terminated by an `end_header` line.
    let mut pos = 0;
    let mut line_no = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let next_line = |pos: &mut usize| -> Option<String> {
        if *pos >= bytes.len() {
            return None;
        }
        let end = bytes[*pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| *pos + e);
        let s = String::from_utf8_lossy(&bytes[*pos..end]).trim_end_matches('\r').to_string();
        *pos = (end + 1).min(bytes.len());
        Some(s)
    };
    let first = next_line(&mut pos);
    line_no += 1;
    if first.as_deref().map(str::trim) != Some("ply") {
        return Err(parse_err(path, 1, "missing 'ply' magic line"));
    }
    loop {
        let Some(line) = next_line(&mut pos) else {
            return Err(parse_err(path, line_no, "header not terminated by end_header"));
        };
        line_no += 1;
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", _] => format = Some(PlyFormat::BinaryLe),
            ["format", other, _] => {
                return Err(parse_err(path, line_no, format!("unsupported PLY format {other}")))
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| parse_err(path, line_no, "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, line_no, "property before element"))?;
                let (Some(count), Some(item)) = (Scalar::parse(count), Scalar::parse(item)) else {
                    return Err(parse_err(path, line_no, "unknown list property type"));
                };
                el.props.push(Property::List {
                    name: name.to_string(),
                    count,
                    item,
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, line_no, "property before element"))?;
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| parse_err(path, line_no, format!("unknown property type {ty}")))?;
                el.props.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            _ => return Err(parse_err(path, line_no, format!("unrecognized header line {line:?}"))),
        }
    }
    let format = format.ok_or_else(|| parse_err(path, line_no, "missing format line"))?;

    let mut vertices = Vec::new();
    let mut polys: Vec<(Vec<usize>, usize)> = Vec::new();

    // Per element: positions of x/y/z or the index list among its properties.
    let xyz_slots = |el: &Element| -> Option<[usize; 3]> {
        let find = |n: &str| {
            el.props
                .iter()
                .position(|p| matches!(p, Property::Scalar { name, .. } if name == n))
        };
        Some([find("x")?, find("y")?, find("z")?])
    };
    let list_slot = |el: &Element| {
        el.props.iter().position(
            |p| matches!(p, Property::List { name, .. } if name == "vertex_indices" || name == "vertex_index"),
        )
    };

    match format {
        PlyFormat::Ascii => {
            let body = String::from_utf8_lossy(&bytes[pos..]);
            let mut lines = body.lines().enumerate().map(|(i, l)| (i + line_no + 1, l));
            for el in &elements {
                let slots = if el.name == "vertex" { xyz_slots(el) } else { None };
                if el.name == "vertex" && slots.is_none() {
                    return Err(parse_err(path, line_no, "vertex element lacks x/y/z"));
                }
                let list = if el.name == "face" { list_slot(el) } else { None };
                for _ in 0..el.count {
                    let (ln, l) = loop {
                        match lines.next() {
                            Some((_, l)) if l.trim().is_empty() => continue,
                            Some(x) => break x,
                            None => return Err(parse_err(path, line_no, format!("unexpected end of {} data", el.name))),
                        }
                    };
                    let mut toks = l.split_whitespace();
                    let mut scalars = vec![0.0; el.props.len()];
                    let mut face = Vec::new();
                    for (pi, p) in el.props.iter().enumerate() {
                        let mut next = || -> Result<f64> {
                            toks.next()
                                .ok_or_else(|| parse_err(path, ln, "too few values"))?
                                .parse::<f64>()
                                .map_err(|_| parse_err(path, ln, "bad numeric value"))
                        };
                        match p {
                            Property::Scalar { .. } => scalars[pi] = next()?,
                            Property::List { .. } => {
                                let cnt = next()? as usize;
                                let items: Vec<f64> = (0..cnt).map(|_| next()).collect::<Result<_>>()?;
                                if Some(pi) == list {
                                    face = items.iter().map(|&v| v as usize).collect();
                                }
                            }
                        }
                    }
                    if let Some([x, y, z]) = slots {
                        vertices.push([scalars[x], scalars[y], scalars[z]]);
                    }
                    if list.is_some() {
                        polys.push((face, ln));
                    }
                }
            }
        }
        PlyFormat::BinaryLe => {
            let data = &bytes[pos..];
            let mut off = 0usize;
            let take = |off: &mut usize, n: usize| -> Result<&[u8]> {
                if *off + n > data.len() {
                    return Err(Error::Format {
                        path: path.to_path_buf(),
                        msg: format!("binary PLY body truncated at byte {}", pos + *off),
                    });
                }
                let s = &data[*off..*off + n];
                *off += n;
                Ok(s)
            };
            for el in &elements {
                let slots = if el.name == "vertex" { xyz_slots(el) } else { None };
                if el.name == "vertex" && slots.is_none() {
                    return Err(parse_err(path, line_no, "vertex element lacks x/y/z"));
                }
                let list = if el.name == "face" { list_slot(el) } else { None };
                for item in 0..el.count {
                    let mut scalars = vec![0.0; el.props.len()];
                    let mut face = Vec::new();
                    for (pi, p) in el.props.iter().enumerate() {
                        match p {
                            Property::Scalar { ty, .. } => scalars[pi] = ty.read_le(take(&mut off, ty.size())?),
                            Property::List { count, item: it, .. } => {
                                let cnt = count.read_le(take(&mut off, count.size())?) as usize;
                                let raw = take(&mut off, cnt * it.size())?;
                                if Some(pi) == list {
                                    face = raw.chunks_exact(it.size()).map(|c| it.read_le(c) as usize).collect();
                                }
                            }
                        }
                    }
                    if let Some([x, y, z]) = slots {
                        vertices.push([scalars[x], scalars[y], scalars[z]]);
                    }
                    if list.is_some() {
                        // Binary files have no lines; report the element ordinal instead.
                        polys.push((face, item + 1));
                    }
                }
            }
        }
    }

    let n = vertices.len();
    let mut faces = Vec::with_capacity(polys.len());
    for (poly, line) in polys {
        if poly.len() < 3 {
            return Err(parse_err(path, line, format!("face with {} vertices cannot be triangulated", poly.len())));
        }
        if let Some(&bad) = poly.iter().find(|&&v| v >= n) {
            return Err(parse_err(path, line, format!("vertex index {bad} out of range ({n} vertices)")));
        }
        for k in 1..poly.len() - 1 {
            faces.push([poly[0], poly[k], poly[k + 1]]);
        }
    }
    Ok((vertices, faces))
}

/// Encodes a binary little-endian PLY with double-precision positions and,
/// when given, per-vertex `red`/`green`/`blue` uchar colours.
pub fn encode_ply(mesh: &Mesh, colors: Option<&[[u8; 3]]>) -> Result<Vec<u8>> {
    if let Some(c) = colors {
        if c.len() != mesh.n_vertices() {
            return Err(Error::Shape(format!(
                "{} colours for {} vertices",
                c.len(),
                mesh.n_vertices()
            )));
        }
    }
    let mut header = String::from("ply\nformat binary_little_endian 1.0\ncomment written by heatgen\n");
    header += &format!("element vertex {}\n", mesh.n_vertices());
    header += "property double x\nproperty double y\nproperty double z\n";
    if colors.is_some() {
        header += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    }
    header += &format!("element face {}\n", mesh.n_faces());
    header += "property list uchar int vertex_indices\nend_header\n";
    let mut out = header.into_bytes();
    for (i, p) in mesh.vertices().iter().enumerate() {
        for c in p {
            out.extend_from_slice(&c.to_le_bytes());
        }
        if let Some(c) = colors {
            out.extend_from_slice(&c[i]);
        }
    }
    for f in mesh.faces() {
        out.push(3);
        for &i in f {
            out.extend_from_slice(&(i as i32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_ply(path: &Path, mesh: &Mesh, colors: Option<&[[u8; 3]]>) -> Result<()> {
    write_atomic(path, &encode_ply(mesh, colors)?)
}

pub fn write_obj(path: &Path, mesh: &Mesh) -> Result<()> {
    use std::fmt::Write;
    let mut s = String::new();
    for p in mesh.vertices() {
        let _ = writeln!(s, "v {:e} {:e} {:e}", p[0], p[1], p[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    write_atomic(path, s.as_bytes())
}
