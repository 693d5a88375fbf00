//! Field files.
//!
//! Binary: one JSON header line `{"tau_re":..,"tau_im":..,"N":..}` terminated
//! by `\n`, then `N²` little-endian `f64` samples in row-major order
//! (index `j·N + i` at `(x, y) = (i/N, j/N)`).
//!
//! CSV: a first line `# ` followed by the same JSON header, then `N` rows of
//! `N` comma-separated values, row `j` holding `y = j/N`.

use std::io::{BufRead, BufReader, Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ConformalTorus, SurfaceError, TorusShape};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub tau_re: f64,
    pub tau_im: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

impl FieldHeader {
    pub fn of(shape: TorusShape) -> Self {
        Self {
            tau_re: shape.tau().re,
            tau_im: shape.tau().im,
            n: shape.n(),
        }
    }

    pub fn shape(&self) -> Result<TorusShape, SurfaceError> {
        TorusShape::new(Complex64::new(self.tau_re, self.tau_im), self.n)
    }
}

fn header_json(shape: TorusShape) -> String {
    serde_json::to_string(&FieldHeader::of(shape)).expect("plain struct")
}

fn parse_header(line: &str) -> Result<TorusShape, SurfaceError> {
    let h: FieldHeader = serde_json::from_str(line.trim()).map_err(|e| SurfaceError::Format(e.to_string()))?;
    h.shape()
}

pub fn write_binary<W: Write>(mut w: W, shape: TorusShape, field: &[f64]) -> Result<(), SurfaceError> {
    super::check_field(&shape, field)?;
    writeln!(w, "{}", header_json(shape))?;
    for v in field {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(r: R) -> Result<(TorusShape, Vec<f64>), SurfaceError> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let shape = parse_header(&line)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * shape.len() {
        return Err(SurfaceError::FieldSize {
            expected: shape.len(),
            got: bytes.len() / 8,
        });
    }
    let field: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    super::check_field(&shape, &field)?;
    Ok((shape, field))
}

pub fn write_csv<W: Write>(mut w: W, shape: TorusShape, field: &[f64]) -> Result<(), SurfaceError> {
    super::check_field(&shape, field)?;
    writeln!(w, "# {}", header_json(shape))?;
    for row in field.chunks_exact(shape.n()) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<(TorusShape, Vec<f64>), SurfaceError> {
    let mut lines = BufReader::new(r).lines();
    let first = lines.next().ok_or_else(|| SurfaceError::Format("empty file".into()))??;
    let header = first
        .strip_prefix('#')
        .ok_or_else(|| SurfaceError::Format("missing '#' header".into()))?;
    let shape = parse_header(header)?;
    let mut field = Vec::with_capacity(shape.len());
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|e| SurfaceError::Format(format!("{tok:?}: {e}")))?;
            field.push(v);
        }
    }
    super::check_field(&shape, &field)?;
    Ok((shape, field))
}

/// Reads a field, picking the format from the extension (`.csv` or binary).
pub fn read_field(path: &std::path::Path) -> Result<(TorusShape, Vec<f64>), SurfaceError> {
    let file = std::fs::File::open(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv(file)
    } else {
        read_binary(file)
    }
}

/// Reads a conformal factor file.
pub fn read_metric(path: &std::path::Path) -> Result<ConformalTorus, SurfaceError> {
    let (shape, phi) = read_field(path)?;
    ConformalTorus::new(shape, phi)
}
