//! File output: atomic writes and `(x, q)` checkpoints.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::spectral_grid::{Field, Grid};

/// Writes to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::from(e)
    })
}

/// `x,q` rows with a header line.
pub fn field_csv(field: &Field) -> String {
    let mut s = String::from("x,q\n");
    for (x, q) in field.grid().nodes().iter().zip(field.samples()) {
        s.push_str(&format!("{x:.17e},{q:.17e}\n"));
    }
    s
}

pub fn parse_field_csv(text: &str, length: f64) -> Result<Field> {
    let mut q = vec![];
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let v = line
            .split(',')
            .nth(1)
            .and_then(|t| t.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Io(format!("bad CSV row {}: {line}", i + 1)))?;
        q.push(v);
    }
    Field::new(Grid::new(length, q.len())?, q)
}

/// Little-endian `f64` samples, no header.
pub fn field_bytes(field: &Field) -> Vec<u8> {
    field
        .samples()
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect()
}

pub fn parse_field_bytes(bytes: &[u8], length: f64) -> Result<Field> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Io(
            "binary field length is not a multiple of 8".into(),
        ));
    }
    let q = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect::<Vec<_>>();
    Field::new(Grid::new(length, q.len())?, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let g = Grid::new(10.0, 16).unwrap();
        let f = Field::from_fn(g, |x| (-x * x).exp() - 0.3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/f.csv");
        write_atomic(&p, field_csv(&f).as_bytes()).unwrap();
        let back = parse_field_csv(&fs::read_to_string(&p).unwrap(), 10.0).unwrap();
        assert_eq!(back.samples(), f.samples());
        let back = parse_field_bytes(&field_bytes(&f), 10.0).unwrap();
        assert_eq!(back.samples(), f.samples());
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
