//! Raw-grid model and field files, and graymap previews.
//!
//! Both formats start with one ASCII line, `HELM-M v1 <nx> <ny>` for models
//! and `HELM-U v1 <nx> <ny>` for fields, followed by little-endian `f64`
//! values in row-major order (x fastest). Fields store interleaved
//! `(re, im)` pairs over the interior points.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::assemble::ComplexField;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::SlownessModel;
use crate::C64;

const MODEL_TAG: &str = "HELM-M";
const FIELD_TAG: &str = "HELM-U";

fn read_header<R: BufRead>(r: &mut R, tag: &str) -> Result<(usize, usize)> {
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    let line = String::from_utf8(line).map_err(|_| Error::Format("header is not ASCII".into()))?;
    let parts: Vec<&str> = line.split_whitespace().collect();
    match parts.as_slice() {
        [t, "v1", nx, ny] if *t == tag => {
            let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad size {s:?}")));
            Ok((parse(nx)?, parse(ny)?))
        }
        _ => Err(Error::Format(format!("expected \"{tag} v1 <nx> <ny>\" header, found {:?}", line.trim_end()))),
    }
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::Format(format!("payload has {} bytes, expected {}", bytes.len(), count * 8)));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn write_model(model: &SlownessModel, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{MODEL_TAG} v1 {} {}", model.nx(), model.ny())?;
    for v in model.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a model whose header must match the grid interior.
pub fn load_model(path: &Path, grid: &Grid) -> Result<SlownessModel> {
    let mut r = BufReader::new(File::open(path)?);
    let (nx, ny) = read_header(&mut r, MODEL_TAG)?;
    if (nx, ny) != (grid.nx, grid.ny) {
        return Err(Error::DimensionMismatch { expected: grid.nx * grid.ny, found: nx * ny });
    }
    let values = read_f64s(&mut r, nx * ny)?;
    SlownessModel::from_values(nx, ny, values)
}

/// Writes the interior of `u`.
pub fn write_field(u: &ComplexField, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{FIELD_TAG} v1 {} {}", u.grid.nx, u.grid.ny)?;
    for z in u.interior() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a field file; returns `(nx, ny, values)`.
pub fn read_field(path: &Path) -> Result<(usize, usize, Vec<C64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let (nx, ny) = read_header(&mut r, FIELD_TAG)?;
    let v = read_f64s(&mut r, 2 * nx * ny)?;
    Ok((nx, ny, v.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect()))
}

/// 8-bit levels of `Re(u)` on the interior, symmetric about mid-gray 128.
pub fn graymap_levels(u: &ComplexField) -> Vec<u8> {
    let vals = u.interior();
    let peak = vals.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    vals.iter()
        .map(|z| if peak == 0.0 { 128 } else { (128.0 + 127.0 * z.re / peak).round().clamp(0.0, 255.0) as u8 })
        .collect()
}

/// Binary portable graymap of `Re(u)`.
pub fn write_pgm(u: &ComplexField, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{} {}\n255\n", u.grid.nx, u.grid.ny)?;
    w.write_all(&graymap_levels(u))?;
    w.flush()?;
    Ok(())
}

/// Writes `<stem>.helm-u` and `<stem>.pgm` into `dir`.
pub fn dump_field(u: &ComplexField, dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_field(u, &dir.join(format!("{stem}.helm-u")))?;
    write_pgm(u, &dir.join(format!("{stem}.pgm")))
}
