//! ASCII OBJ and OFF reading and writing.
//!
//! OBJ: `v x y z` and `f i j k ...` with 1-based (or negative, relative)
//! indices; `i/t/n` index forms are accepted and the texture/normal parts are
//! ignored. OFF: `OFF` header, `nv nf ne` counts, vertex lines, then
//! `n i0 .. i{n-1}` face lines with 0-based indices. Polygons are fan-split.
//! Coordinates are written with 17 significant digits so a reload is
//! bit-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{MeshError, TriangleMesh};
use crate::linalg::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Off,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self, MeshError> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("obj") => Ok(Self::Obj),
            Some("off") => Ok(Self::Off),
            _ => Err(MeshError::UnknownFormat(path.to_path_buf())),
        }
    }
}

impl std::str::FromStr for MeshFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(Self::Obj),
            "off" => Ok(Self::Off),
            other => Err(format!("unknown mesh format '{other}' (expected obj or off)")),
        }
    }
}

/// Reads a mesh. With `format = None` the format is taken from the file
/// extension.
pub fn load_mesh(path: impl AsRef<Path>, format: Option<MeshFormat>) -> Result<TriangleMesh, MeshError> {
    let path = path.as_ref();
    let format = match format {
        Some(f) => f,
        None => MeshFormat::from_path(path)?,
    };
    let text = fs::read_to_string(path).map_err(|source| MeshError::Io { path: path.to_path_buf(), source })?;
    parse_mesh(&text, format)
}

pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>, format: Option<MeshFormat>) -> Result<(), MeshError> {
    let path = path.as_ref();
    let format = match format {
        Some(f) => f,
        None => MeshFormat::from_path(path)?,
    };
    fs::write(path, write_mesh(mesh, format)).map_err(|source| MeshError::Io { path: path.to_path_buf(), source })
}

pub fn parse_mesh(text: &str, format: MeshFormat) -> Result<TriangleMesh, MeshError> {
    match format {
        MeshFormat::Obj => parse_obj(text),
        MeshFormat::Off => parse_off(text),
    }
}

pub fn write_mesh(mesh: &TriangleMesh, format: MeshFormat) -> String {
    let mut out = String::new();
    match format {
        MeshFormat::Obj => {
            for v in mesh.vertices() {
                let _ = writeln!(out, "v {:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
            }
            for f in mesh.faces() {
                let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
            }
        }
        MeshFormat::Off => {
            let _ = writeln!(out, "OFF");
            let _ = writeln!(out, "{} {} 0", mesh.num_vertices(), mesh.num_faces());
            for v in mesh.vertices() {
                let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
            }
            for f in mesh.faces() {
                let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
            }
        }
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse { line, message: message.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, MeshError> {
    tok.parse::<f64>().map_err(|_| parse_err(line, format!("invalid number '{tok}'")))
}

fn fan(polygon: &[usize], faces: &mut Vec<[usize; 3]>) {
    for k in 1..polygon.len() - 1 {
        faces.push([polygon[0], polygon[k], polygon[k + 1]]);
    }
}

fn parse_obj(text: &str) -> Result<TriangleMesh, MeshError> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces = Vec::new();
    let mut polygon = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let coords: Vec<&str> = toks.collect();
                if coords.len() < 3 {
                    return Err(parse_err(line_no, "vertex needs 3 coordinates"));
                }
                vertices.push([
                    parse_f64(coords[0], line_no)?,
                    parse_f64(coords[1], line_no)?,
                    parse_f64(coords[2], line_no)?,
                ]);
            }
            Some("f") => {
                polygon.clear();
                for tok in toks {
                    let idx_str = tok.split('/').next().unwrap_or("");
                    let idx: i64 = idx_str
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("invalid face index '{tok}'")))?;
                    let resolved = match idx {
                        0 => return Err(parse_err(line_no, "face index 0 is invalid (OBJ indices are 1-based)")),
                        k if k > 0 => (k - 1) as usize,
                        k => {
                            let back = (-k) as usize;
                            if back > vertices.len() {
                                return Err(parse_err(line_no, format!("relative index {k} precedes the first vertex")));
                            }
                            vertices.len() - back
                        }
                    };
                    polygon.push(resolved);
                }
                if polygon.len() < 3 {
                    return Err(parse_err(line_no, "face needs at least 3 vertices"));
                }
                fan(&polygon, &mut faces);
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

fn parse_off(text: &str) -> Result<TriangleMesh, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let mut htoks = header.split_whitespace();
    if htoks.next() != Some("OFF") {
        return Err(parse_err(hline, "expected 'OFF' header"));
    }
    let rest: Vec<&str> = htoks.collect();
    let (cline, counts): (usize, Vec<&str>) = if rest.is_empty() {
        let (n, l) = lines.next().ok_or_else(|| parse_err(hline, "missing counts line"))?;
        (n, l.split_whitespace().collect())
    } else {
        (hline, rest)
    };
    if counts.len() < 2 {
        return Err(parse_err(cline, "counts line needs vertex and face counts"));
    }
    let parse_count = |t: &str| t.parse::<usize>().map_err(|_| parse_err(cline, format!("invalid count '{t}'")));
    let nv = parse_count(counts[0])?;
    let nf = parse_count(counts[1])?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, l) = lines.next().ok_or_else(|| parse_err(cline, "unexpected end of file in vertex block"))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() < 3 {
            return Err(parse_err(n, "vertex needs 3 coordinates"));
        }
        vertices.push([parse_f64(t[0], n)?, parse_f64(t[1], n)?, parse_f64(t[2], n)?]);
    }

    let mut faces = Vec::with_capacity(nf);
    let mut polygon = Vec::new();
    for _ in 0..nf {
        let (n, l) = lines.next().ok_or_else(|| parse_err(cline, "unexpected end of file in face block"))?;
        let mut t = l.split_whitespace();
        let k: usize = t
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(n, "face line must start with a vertex count"))?;
        if k < 3 {
            return Err(parse_err(n, "face needs at least 3 vertices"));
        }
        polygon.clear();
        for _ in 0..k {
            let tok = t.next().ok_or_else(|| parse_err(n, "face line has fewer indices than declared"))?;
            let idx: usize = tok.parse().map_err(|_| parse_err(n, format!("invalid face index '{tok}'")))?;
            if idx >= nv {
                return Err(MeshError::IndexOutOfRange { face: faces.len(), index: idx, count: nv });
            }
            polygon.push(idx);
        }
        fan(&polygon, &mut faces);
    }
    TriangleMesh::new(vertices, faces)
}
