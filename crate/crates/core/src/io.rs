//! File formats: OBJ meshes, text point clouds, binary fields and flat
//! `key = value` configuration files.
//!
//! Field files hold a fixed header followed by the node values as
//! little-endian `f32`, x fastest:
//!
//! ```text
//! "LSF1" | nx ny nz: u32 | origin: 3 x f64 | spacing: f64 | values: f32...
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::distance::OrientedPointCloud;
use crate::grid::{GridSpec, ScalarField};
use crate::surface::TriMesh;
use crate::{Error, Result, Vec3};

const FIELD_MAGIC: &[u8; 4] = b"LSF1";
const FIELD_HEADER_LEN: usize = 4 + 3 * 4 + 4 * 8;
/// Normals further than this from unit length are rejected on read.
const NORMAL_TOLERANCE: f64 = 1e-3;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_floats<const N: usize>(fields: &[&str], path: &Path, line: usize) -> Result<[f64; N]> {
    if fields.len() != N {
        return Err(parse_err(path, line, format!("expected {N} numbers, found {}", fields.len())));
    }
    let mut out = [0.0f64; N];
    for (o, f) in out.iter_mut().zip(fields) {
        *o = f.parse().map_err(|_| parse_err(path, line, format!("not a number: {f:?}")))?;
        if !o.is_finite() {
            return Err(parse_err(path, line, format!("non-finite value {f:?}")));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- OBJ

/// Parses `v` and `f` records; other records are ignored. Polygons are
/// fanned from their first vertex. Face entries may carry `/vt/vn` suffixes.
pub fn parse_obj(text: &str, path: &Path) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("");
        let mut fields = body.split_whitespace();
        match fields.next() {
            Some("v") => {
                let rest: Vec<&str> = fields.collect();
                // Tolerate a trailing w or colour components.
                if rest.len() < 3 {
                    return Err(parse_err(path, line, "vertex needs 3 coordinates"));
                }
                let [x, y, z] = parse_floats::<3>(&rest[..3], path, line)?;
                vertices.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for f in fields {
                    let head = f.split('/').next().unwrap_or("");
                    let i: i64 = head.parse().map_err(|_| parse_err(path, line, format!("bad face index {f:?}")))?;
                    let resolved = match i {
                        0 => None,
                        i if i > 0 => Some(i - 1),
                        i => Some(vertices.len() as i64 + i),
                    };
                    match resolved {
                        Some(r) if r >= 0 && (r as usize) < vertices.len() => idx.push(r as usize),
                        _ => return Err(parse_err(path, line, format!("face index {i} out of range"))),
                    }
                }
                if idx.len() < 3 {
                    return Err(parse_err(path, line, "face needs at least 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, triangles)
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    parse_obj(&read_text(path)?, path)
}

pub fn format_obj(m: &TriMesh) -> String {
    let mut s = String::new();
    for v in &m.vertices {
        let _ = writeln!(s, "v {} {} {}", sig6(v.x), sig6(v.y), sig6(v.z));
    }
    for t in &m.triangles {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

pub fn write_obj(m: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), format_obj(m).as_bytes())
}

/// Six significant digits, without exponent noise for ordinary values.
fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let s = format!("{x:.5e}");
    let v: f64 = s.parse().expect("formatted float parses");
    let mag = v.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        let fixed = format!("{v:.decimals$}");
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        s
    }
}

// --------------------------------------------------------- point cloud

/// Parses `x y z nx ny nz` lines; `#` starts a comment. Normals within
/// `1e-3` of unit length are renormalised, others rejected.
pub fn parse_cloud(text: &str, path: &Path) -> Result<OrientedPointCloud> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let [x, y, z, nx, ny, nz] = parse_floats::<6>(&fields, path, line)?;
        let nrm = Vec3::new(nx, ny, nz);
        let len = nrm.norm();
        if (len - 1.0).abs() > NORMAL_TOLERANCE {
            return Err(parse_err(path, line, format!("normal length {len} is not unit")));
        }
        points.push(Vec3::new(x, y, z));
        normals.push(nrm / len);
    }
    if points.is_empty() {
        return Err(parse_err(path, 0, "point cloud has no records"));
    }
    OrientedPointCloud::new(points, normals).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn read_cloud(path: impl AsRef<Path>) -> Result<OrientedPointCloud> {
    let path = path.as_ref();
    parse_cloud(&read_text(path)?, path)
}

pub fn format_cloud(c: &OrientedPointCloud) -> String {
    let mut s = String::from("# x y z nx ny nz\n");
    for (p, n) in c.points().iter().zip(c.normals()) {
        // Shortest round-tripping representation.
        let _ = writeln!(s, "{:?} {:?} {:?} {:?} {:?} {:?}", p.x, p.y, p.z, n.x, n.y, n.z);
    }
    s
}

pub fn write_cloud(c: &OrientedPointCloud, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), format_cloud(c).as_bytes())
}

// ---------------------------------------------------------------- field

pub fn encode_field(f: &ScalarField) -> Result<Vec<u8>> {
    let spec = f.spec();
    let mut out = Vec::with_capacity(FIELD_HEADER_LEN + 4 * spec.len());
    out.extend_from_slice(FIELD_MAGIC);
    for d in spec.dims() {
        let d = u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} does not fit in u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for c in spec.origin().iter() {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out.extend_from_slice(&spec.spacing().to_le_bytes());
    for &v in f.values() {
        let v32 = v as f32;
        if !v32.is_finite() {
            return Err(Error::Format(format!("value {v} overflows f32")));
        }
        out.extend_from_slice(&v32.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_field(bytes: &[u8]) -> Result<ScalarField> {
    if bytes.len() < FIELD_HEADER_LEN {
        return Err(Error::Format(format!(
            "truncated header: expected {FIELD_HEADER_LEN} bytes, got {}",
            bytes.len()
        )));
    }
    if &bytes[..4] != FIELD_MAGIC {
        return Err(Error::Format(format!("bad magic {:?}, expected \"LSF1\"", String::from_utf8_lossy(&bytes[..4]))));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let dims = [u32_at(4), u32_at(8), u32_at(12)];
    let origin = Vec3::new(f64_at(16), f64_at(24), f64_at(32));
    let spacing = f64_at(40);
    let spec = GridSpec::new(dims, origin, spacing).map_err(|e| Error::Format(format!("bad header: {e}")))?;
    let expected = FIELD_HEADER_LEN + 4 * spec.len();
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "payload size mismatch: expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    let values = bytes[FIELD_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    ScalarField::new(spec, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_field(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_field(f: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_field(f)?)
}

// --------------------------------------------------------------- config

/// One `key = value` entry with its source line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigEntry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Flat `key = value` lines; `#` comments and blank lines are skipped.
/// Later duplicates override earlier ones when applied in order.
pub fn parse_config(text: &str, path: &Path) -> Result<Vec<ConfigEntry>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| parse_err(path, line, "expected `key = value`"))?;
        let key = k.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(parse_err(path, line, format!("bad key {key:?}")));
        }
        out.push(ConfigEntry {
            key: key.to_string(),
            value: v.trim().to_string(),
            line,
        });
    }
    Ok(out)
}

pub fn read_config(path: impl AsRef<Path>) -> Result<Vec<ConfigEntry>> {
    let path = path.as_ref();
    parse_config(&read_text(path)?, path)
}

/// Renders entries back in the same syntax.
pub fn format_config<K: AsRef<str>, V: std::fmt::Display>(entries: &[(K, V)]) -> String {
    entries.iter().map(|(k, v)| format!("{} = {v}\n", k.as_ref())).collect()
}

/// Path used in parse errors for in-memory text.
pub fn memory_path() -> PathBuf {
    PathBuf::from("<memory>")
}
