//! Plain-text serialization: paths as `t,X` CSV, coefficient grids as
//! `j,k,d` CSV with a JSON metadata sidecar. Reals are written with 17
//! significant digits so they round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lfsm::{GridMeta, Octave, WaveletCoefGrid};

pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn path_csv(x: &[f64]) -> String {
    let mut s = String::with_capacity(x.len() * 28 + 8);
    s.push_str("t,X\n");
    for (t, v) in x.iter().enumerate() {
        let _ = writeln!(s, "{t},{}", fmt_real(*v));
    }
    s
}

pub fn write_path_csv(path: &Path, x: &[f64]) -> Result<()> {
    fs::write(path, path_csv(x))?;
    Ok(())
}

fn parse_real(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::data(format!("line {line}: '{field}' is not a real number")))
}

/// Reads a `t,X` CSV; `t` must run through `0, 1, ..., N`.
pub fn read_path_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with('t')) {
            continue;
        }
        let mut parts = line.split(',');
        let (t, x) = match (parts.next(), parts.next(), parts.next()) {
            (Some(t), Some(x), None) => (t, x),
            _ => return Err(Error::data(format!("line {}: expected two columns", i + 1))),
        };
        let t = parse_real(t, i + 1)?;
        if t != out.len() as f64 {
            return Err(Error::data(format!(
                "line {}: time index {t} out of sequence (expected {})",
                i + 1,
                out.len()
            )));
        }
        let x = parse_real(x, i + 1)?;
        if !x.is_finite() {
            return Err(Error::data(format!("line {}: non-finite sample", i + 1)));
        }
        out.push(x);
    }
    if out.len() < 2 {
        return Err(Error::data("path file holds fewer than two samples"));
    }
    Ok(out)
}

pub fn grid_csv(grid: &WaveletCoefGrid) -> String {
    let mut s = String::from("j,k,d\n");
    for o in &grid.octaves {
        for (k, d) in o.coeffs.iter().enumerate() {
            let _ = writeln!(s, "{},{k},{}", o.j, fmt_real(*d));
        }
    }
    s
}

/// Parses `j,k,d` rows; within an octave `k` must run through `0..N_j`.
pub fn parse_grid_csv(text: &str) -> Result<Vec<Octave>> {
    let mut octaves: Vec<Octave> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with('j')) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::data(format!("line {}: expected three columns", i + 1)));
        }
        let j: u32 = cols[0]
            .trim()
            .parse()
            .map_err(|_| Error::data(format!("line {}: bad octave '{}'", i + 1, cols[0])))?;
        let k: usize = cols[1]
            .trim()
            .parse()
            .map_err(|_| Error::data(format!("line {}: bad index '{}'", i + 1, cols[1])))?;
        let d = parse_real(cols[2], i + 1)?;
        match octaves.last_mut() {
            Some(o) if o.j == j => {
                if k != o.coeffs.len() {
                    return Err(Error::data(format!("line {}: index {k} out of sequence", i + 1)));
                }
                o.coeffs.push(d);
            }
            _ => {
                if k != 0 || octaves.iter().any(|o| o.j >= j) {
                    return Err(Error::data(format!(
                        "line {}: octave {j} must start at k = 0 after lower octaves",
                        i + 1
                    )));
                }
                octaves.push(Octave { j, coeffs: vec![d] });
            }
        }
    }
    if octaves.is_empty() {
        return Err(Error::data("grid file holds no coefficients"));
    }
    Ok(octaves)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

/// Sidecar path for a grid CSV: `grid.csv` → `grid.json`.
pub fn sidecar_path(csv: &Path) -> std::path::PathBuf {
    csv.with_extension("json")
}

/// Reads a grid CSV and, when present, its metadata sidecar (which may
/// nest the metadata under a `"meta"` key next to other run information).
pub fn read_grid(csv: &Path) -> Result<WaveletCoefGrid> {
    let text = fs::read_to_string(csv)?;
    let octaves = parse_grid_csv(&text)?;
    let side = sidecar_path(csv);
    let meta = if side.exists() {
        let v: serde_json::Value = read_json(&side)?;
        let m = v.get("meta").cloned().unwrap_or(v);
        serde_json::from_value::<GridMeta>(m)
            .map_err(|e| Error::data(format!("{}: {e}", side.display())))?
    } else {
        return Err(Error::data(format!(
            "metadata sidecar {} not found",
            side.display()
        )));
    };
    let counts: Vec<usize> = octaves.iter().map(|o| o.coeffs.len()).collect();
    if counts != meta.counts {
        return Err(Error::data(format!(
            "octave counts {counts:?} disagree with sidecar {:?}",
            meta.counts
        )));
    }
    Ok(WaveletCoefGrid { octaves, meta })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [0.1, -1.0 / 3.0, 6.02e23, f64::MIN_POSITIVE, 1e-300, 123456789.123456789] {
            assert_eq!(fmt_real(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn path_round_trip() {
        let dir = std::env::temp_dir().join(format!("sw-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("path.csv");
        let x = vec![0.0, 1.5, -2.25, 1.0 / 7.0];
        write_path_csv(&p, &x).unwrap();
        assert_eq!(read_path_csv(&p).unwrap(), x);
        fs::write(&p, "t,X\n0,1\n2,3\n").unwrap();
        assert!(matches!(read_path_csv(&p), Err(Error::Data(_))));
        assert!(matches!(read_path_csv(&dir.join("missing.csv")), Err(Error::Io(_))));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn grid_parse() {
        let o = parse_grid_csv("j,k,d\n1,0,1.5\n1,1,-2\n2,0,3\n").unwrap();
        assert_eq!(o.len(), 2);
        assert_eq!(o[0].coeffs, vec![1.5, -2.0]);
        assert!(parse_grid_csv("j,k,d\n1,1,1.5\n").is_err());
        assert!(parse_grid_csv("j,k,d\n2,0,1\n1,0,1\n").is_err());
    }
}
