//! ASCII OBJ and OFF readers/writers, triangles only.
//!
//! Normals, texture coordinates, groups and materials are skipped on read and
//! never written. Coordinates are written with Rust's shortest round-trip
//! float formatting, so write-then-read reproduces positions bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{MeshError, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    Off,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "obj" => Some(Self::Obj),
            "off" => Some(Self::Off),
            _ => None,
        }
    }
}

impl FromStr for MeshFormat {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(Self::Obj),
            "off" => Ok(Self::Off),
            other => Err(MeshError::InvalidParam(format!("unknown mesh format `{other}`"))),
        }
    }
}

pub fn load_mesh<R: BufRead>(reader: R, format: MeshFormat) -> Result<TriangleMesh, MeshError> {
    match format {
        MeshFormat::Obj => read_obj(reader),
        MeshFormat::Off => read_off(reader),
    }
}

/// Writes `mesh` to `path`, choosing the format from the extension.
pub fn save_mesh(path: &Path, mesh: &TriangleMesh) -> Result<(), MeshError> {
    let format = MeshFormat::from_path(path)
        .ok_or_else(|| MeshError::InvalidParam(format!("cannot infer mesh format of {}", path.display())))?;
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        MeshFormat::Obj => write_obj(&mut out, mesh)?,
        MeshFormat::Off => write_off(&mut out, mesh)?,
    }
    out.flush()?;
    Ok(())
}

fn parse_error(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(token: Option<&str>, line: usize) -> Result<f64, MeshError> {
    let token = token.ok_or_else(|| parse_error(line, "missing coordinate"))?;
    token
        .parse()
        .map_err(|_| parse_error(line, format!("invalid number `{token}`")))
}

pub fn read_obj<R: BufRead>(reader: R) -> Result<TriangleMesh, MeshError> {
    let mut positions = Vec::new();
    let mut triangles = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.split('#').next().unwrap_or("");
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let x = parse_f64(tokens.next(), lineno)?;
                let y = parse_f64(tokens.next(), lineno)?;
                let z = parse_f64(tokens.next(), lineno)?;
                positions.push(Vector3::new(x, y, z));
            }
            Some("f") => {
                let corners = tokens
                    .map(|tok| obj_index(tok, positions.len(), lineno))
                    .collect::<Result<Vec<_>, _>>()?;
                if corners.len() != 3 {
                    return Err(parse_error(
                        lineno,
                        format!("face with {} vertices; only triangles are supported", corners.len()),
                    ));
                }
                triangles.push([corners[0], corners[1], corners[2]]);
            }
            _ => {}
        }
    }

    TriangleMesh::new(positions, triangles)
}

/// Resolves an OBJ face corner (`i`, `i/t`, `i//n`, `i/t/n`, negative = relative).
fn obj_index(token: &str, count: usize, line: usize) -> Result<usize, MeshError> {
    let head = token.split('/').next().unwrap_or("");
    let raw: i64 = head
        .parse()
        .map_err(|_| parse_error(line, format!("invalid face index `{token}`")))?;
    let index = match raw {
        0 => return Err(parse_error(line, "face index 0 is invalid in OBJ")),
        r if r > 0 => r as usize - 1,
        r => {
            let back = r.unsigned_abs() as usize;
            if back > count {
                return Err(parse_error(line, format!("relative index {r} out of range")));
            }
            count - back
        }
    };
    Ok(index)
}

pub fn read_off<R: BufRead>(reader: R) -> Result<TriangleMesh, MeshError> {
    // Tokens with their line numbers, comments stripped.
    let mut tokens: Vec<(usize, String)> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("");
        tokens.extend(line.split_whitespace().map(|t| (lineno + 1, t.to_owned())));
    }
    let mut it = tokens.into_iter();

    match it.next() {
        Some((_, h)) if h == "OFF" => {}
        Some((line, h)) => return Err(parse_error(line, format!("expected OFF header, found `{h}`"))),
        None => return Err(parse_error(1, "empty file")),
    }

    let mut next_usize = |what: &str| -> Result<(usize, usize), MeshError> {
        let (line, tok) = it
            .next()
            .ok_or_else(|| parse_error(0, format!("unexpected end of file reading {what}")))?;
        tok.parse()
            .map(|v| (line, v))
            .map_err(|_| parse_error(line, format!("invalid {what} `{tok}`")))
    };
    let (_, nv) = next_usize("vertex count")?;
    let (_, nf) = next_usize("face count")?;
    let _ = next_usize("edge count")?;

    let mut rest = it;
    let mut positions = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut coord = [0.0; 3];
        for c in &mut coord {
            let (line, tok) = rest
                .next()
                .ok_or_else(|| parse_error(0, "unexpected end of file in vertex block"))?;
            *c = parse_f64(Some(&tok), line)?;
        }
        positions.push(Vector3::from(coord));
    }

    // Faces are line-oriented: "k i0 .. ik-1 [color...]". Color tokens trail on
    // the same line, so regroup by line number.
    let remaining: Vec<(usize, String)> = rest.collect();
    let mut triangles = Vec::with_capacity(nf);
    let mut i = 0;
    while triangles.len() < nf {
        let (line, tok) = remaining
            .get(i)
            .cloned()
            .ok_or_else(|| parse_error(0, "unexpected end of file in face block"))?;
        let k: usize = tok
            .parse()
            .map_err(|_| parse_error(line, format!("invalid face size `{tok}`")))?;
        if k != 3 {
            return Err(parse_error(
                line,
                format!("face with {k} vertices; only triangles are supported"),
            ));
        }
        let mut tri = [0usize; 3];
        for (c, slot) in tri.iter_mut().enumerate() {
            let (l, t) = remaining
                .get(i + 1 + c)
                .filter(|(l, _)| *l == line)
                .ok_or_else(|| parse_error(line, "truncated face"))?;
            *slot = t
                .parse()
                .map_err(|_| parse_error(*l, format!("invalid face index `{t}`")))?;
        }
        triangles.push(tri);
        i += 4;
        while remaining.get(i).is_some_and(|(l, _)| *l == line) {
            i += 1;
        }
    }

    TriangleMesh::new(positions, triangles)
}

pub fn write_obj<W: Write>(mut out: W, mesh: &TriangleMesh) -> std::io::Result<()> {
    for p in &mesh.positions {
        writeln!(out, "v {} {} {}", p.x, p.y, p.z)?;
    }
    for [a, b, c] in &mesh.triangles {
        writeln!(out, "f {} {} {}", a + 1, b + 1, c + 1)?;
    }
    Ok(())
}

pub fn write_off<W: Write>(mut out: W, mesh: &TriangleMesh) -> std::io::Result<()> {
    writeln!(out, "OFF")?;
    writeln!(out, "{} {} 0", mesh.num_vertices(), mesh.num_triangles())?;
    for p in &mesh.positions {
        writeln!(out, "{} {} {}", p.x, p.y, p.z)?;
    }
    for [a, b, c] in &mesh.triangles {
        writeln!(out, "3 {a} {b} {c}")?;
    }
    Ok(())
}

/// Reads a mesh file, choosing the format from the extension.
pub fn read_path(path: &Path) -> Result<TriangleMesh, MeshError> {
    let format = MeshFormat::from_path(path)
        .ok_or_else(|| MeshError::InvalidParam(format!("cannot infer mesh format of {}", path.display())))?;
    load_mesh(BufReader::new(File::open(path)?), format)
}
