//! Part dataset files: one JSON object per line.
//!
//! Each line is a serialized [`BRepPart`]:
//!
//! ```json
//! {"id": "...",
//!  "faces": [{"id": "...", "surface": {"kind": "...", "params": {...}},
//!             "uv_domain": {"u": [u0,u1], "v": [v0,v1]},
//!             "loops": [["c0", ...]], "attrs": {"name": "token" | 1.25}}],
//!  "curves": [{"id": "...",
//!              "geometry": {"kind": "...", "params": {...}, "interval": [t0,t1]},
//!              "adjacent_faces": ["f0", ...]}]}
//! ```
//!
//! Parse failures report the 1-based line number. Written files are
//! byte-stable for identical inputs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::BRepPart;
use crate::error::{Error, Result};

pub fn write_parts(path: &Path, parts: &[BRepPart]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = BufWriter::new(file);
    for part in parts {
        let line = serde_json::to_string(part)?;
        out.write_all(line.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    out.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Read and validate every part. Blank lines are ignored.
pub fn read_parts(path: &Path) -> Result<Vec<BRepPart>> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut parts = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let part: BRepPart = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            reason: e.to_string(),
        })?;
        part.validate()?;
        parts.push(part);
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brep::synthetic::{generate_synthetic_family, FamilySpec};

    #[test]
    fn parts_round_trip_through_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("parts.jsonl");
        let mut parts = Vec::new();
        for spec in FamilySpec::default_set() {
            parts.extend(generate_synthetic_family(&spec, 2, 3).unwrap());
        }
        write_parts(&path, &parts).unwrap();
        let loaded = read_parts(&path).unwrap();
        assert_eq!(parts, loaded);
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.jsonl");
        let part = &generate_synthetic_family(&FamilySpec::example_box(), 1, 1).unwrap()[0];
        let good = serde_json::to_string(part).unwrap();
        std::fs::write(&path, format!("{good}\n{{not json\n{good}\n")).unwrap();
        match read_parts(&path).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn writing_twice_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        let parts = generate_synthetic_family(&FamilySpec::example_cylinder(), 4, 9).unwrap();
        write_parts(&a, &parts).unwrap();
        write_parts(&b, &parts).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}
