//! ASCII PCD reader/writer for plain x y z clouds.
//!
//! Supported subset: `VERSION .7`, `FIELDS x y z`, `SIZE 4 4 4`,
//! `TYPE F F F`, `COUNT 1 1 1`, `WIDTH n`, `HEIGHT h` (with n*h = POINTS),
//! `VIEWPOINT ...`, `POINTS n`, `DATA ascii`, followed by one `x y z` line
//! per point. Binary PCD is out of scope. Non-finite points (NaN fillers
//! from organized captures) are dropped on load and counted.

use super::{CloudError, PointCloud};
use nalgebra::Vector3;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Result of loading a PCD file: the finite points plus how many
/// non-finite placeholders were dropped.
#[derive(Debug)]
pub struct PcdLoad {
    pub cloud: PointCloud,
    pub dropped: usize,
}

fn parse_err(line: usize, msg: impl Into<String>) -> CloudError {
    CloudError::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn load_pcd(path: impl AsRef<Path>) -> Result<PcdLoad, CloudError> {
    let text = fs::read_to_string(path.as_ref())?;
    parse_pcd(&text)
}

pub fn parse_pcd(text: &str) -> Result<PcdLoad, CloudError> {
    let mut width: Option<u64> = None;
    let mut height: Option<u64> = None;
    let mut points_decl: Option<u64> = None;
    let mut data_line: Option<usize> = None;

    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    while i < lines.len() {
        let lineno = i + 1;
        let line = lines[i].trim();
        i += 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let key = tok.next().unwrap_or("");
        let rest: Vec<&str> = tok.collect();
        match key {
            "VERSION" => {
                if rest != [".7"] && rest != ["0.7"] {
                    return Err(parse_err(lineno, format!("unsupported VERSION {rest:?}")));
                }
            }
            "FIELDS" => {
                if rest != ["x", "y", "z"] {
                    return Err(parse_err(
                        lineno,
                        format!("unsupported FIELDS {rest:?}, expected x y z"),
                    ));
                }
            }
            "SIZE" => {
                if rest != ["4", "4", "4"] {
                    return Err(parse_err(lineno, format!("unsupported SIZE {rest:?}")));
                }
            }
            "TYPE" => {
                if rest != ["F", "F", "F"] {
                    return Err(parse_err(lineno, format!("unsupported TYPE {rest:?}")));
                }
            }
            "COUNT" => {
                if rest != ["1", "1", "1"] {
                    return Err(parse_err(lineno, format!("unsupported COUNT {rest:?}")));
                }
            }
            "WIDTH" => {
                width = Some(parse_u64(&rest, lineno, "WIDTH")?);
            }
            "HEIGHT" => {
                height = Some(parse_u64(&rest, lineno, "HEIGHT")?);
            }
            "VIEWPOINT" => {
                if rest.len() != 7 {
                    return Err(parse_err(lineno, "VIEWPOINT expects 7 numbers"));
                }
            }
            "POINTS" => {
                points_decl = Some(parse_u64(&rest, lineno, "POINTS")?);
            }
            "DATA" => {
                if rest != ["ascii"] {
                    return Err(parse_err(
                        lineno,
                        format!("unsupported DATA {rest:?}; only ascii is supported"),
                    ));
                }
                data_line = Some(i);
                break;
            }
            other => {
                return Err(parse_err(lineno, format!("unknown header field {other}")));
            }
        }
    }

    let data_start = data_line.ok_or_else(|| parse_err(lines.len(), "missing DATA header"))?;
    let n = points_decl.ok_or_else(|| parse_err(data_start, "missing POINTS header"))?;
    let (w, h) = (
        width.ok_or_else(|| parse_err(data_start, "missing WIDTH header"))?,
        height.ok_or_else(|| parse_err(data_start, "missing HEIGHT header"))?,
    );
    if w * h != n {
        return Err(parse_err(
            data_start,
            format!("WIDTH*HEIGHT = {} does not match POINTS = {n}", w * h),
        ));
    }

    let mut points = Vec::with_capacity(n as usize);
    let mut dropped = 0usize;
    let mut seen = 0u64;
    for (off, raw) in lines[data_start..].iter().enumerate() {
        let lineno = data_start + off + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if seen == n {
            return Err(parse_err(lineno, "more data rows than POINTS"));
        }
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != 3 {
            return Err(parse_err(
                lineno,
                format!("expected 3 values per row, got {}", vals.len()),
            ));
        }
        let mut coords = [0.0f64; 3];
        for (c, v) in coords.iter_mut().zip(&vals) {
            *c = v
                .parse::<f64>()
                .map_err(|e| parse_err(lineno, format!("bad number {v:?}: {e}")))?;
        }
        seen += 1;
        if coords.iter().all(|c| c.is_finite()) {
            points.push(Vector3::new(coords[0], coords[1], coords[2]));
        } else {
            dropped += 1;
        }
    }
    if seen != n {
        return Err(parse_err(
            lines.len(),
            format!("truncated data: got {seen} rows, POINTS says {n}"),
        ));
    }

    Ok(PcdLoad {
        cloud: PointCloud::new(points, "camera").expect("finite by construction"),
        dropped,
    })
}

fn parse_u64(rest: &[&str], lineno: usize, key: &str) -> Result<u64, CloudError> {
    if rest.len() != 1 {
        return Err(parse_err(lineno, format!("{key} expects one value")));
    }
    rest[0]
        .parse::<u64>()
        .map_err(|e| parse_err(lineno, format!("bad {key} value {:?}: {e}", rest[0])))
}

pub fn save_pcd(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<(), CloudError> {
    let mut out = String::new();
    write_pcd(cloud, &mut out);
    let mut f = fs::File::create(path.as_ref())?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

pub fn write_pcd(cloud: &PointCloud, out: &mut String) {
    use std::fmt::Write as _;
    let n = cloud.len();
    let _ = write!(
        out,
        "# .PCD v.7 - Point Cloud Data file format\n\
         VERSION .7\n\
         FIELDS x y z\n\
         SIZE 4 4 4\n\
         TYPE F F F\n\
         COUNT 1 1 1\n\
         WIDTH {n}\n\
         HEIGHT 1\n\
         VIEWPOINT 0 0 0 1 0 0 0\n\
         POINTS {n}\n\
         DATA ascii\n"
    );
    // Shortest round-trip formatting: loading back recovers the exact f64,
    // so composed pipeline stages match the in-process path bit for bit
    // (and the 1e-6 text round-trip contract holds trivially).
    for p in cloud.points() {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
}
