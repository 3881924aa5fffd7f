use std::path::Path;

use crate::error::{Error, Result};
use crate::fusion::DepthMap;
use crate::grid::Grid;

use super::{read_bytes, write_bytes};

/// Single-channel PFM, little-endian, rows stored bottom to top. Values are
/// stored as `f32`; NaN marks invalid pixels.
pub fn write_pfm_grid(path: &Path, grid: &Grid<f64>) -> Result<()> {
    let (w, h) = (grid.width(), grid.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for v in (0..h).rev() {
        for u in 0..w {
            out.extend_from_slice(&(*grid.get(u, v) as f32).to_le_bytes());
        }
    }
    write_bytes(path, &out)
}

pub fn write_pfm(path: &Path, depth: &DepthMap) -> Result<()> {
    write_pfm_grid(path, &depth.to_nan_filled())
}

/// Splits off `n` newline-terminated header lines.
fn header_lines(bytes: &[u8], n: usize) -> Option<(Vec<&str>, usize)> {
    let mut lines = Vec::with_capacity(n);
    let mut start = 0;
    for _ in 0..n {
        let end = start + bytes[start..].iter().position(|&b| b == b'\n')?;
        lines.push(std::str::from_utf8(&bytes[start..end]).ok()?.trim());
        start = end + 1;
    }
    Some((lines, start))
}

pub fn read_pfm_grid(path: &Path) -> Result<Grid<f64>> {
    parse_pfm(&read_bytes(path)?, path)
}

pub(crate) fn parse_pfm(bytes: &[u8], path: &Path) -> Result<Grid<f64>> {
    let (lines, offset) = header_lines(bytes, 3).ok_or_else(|| Error::format(path, 1, "truncated PFM header"))?;
    match lines[0] {
        "Pf" => {}
        "PF" => return Err(Error::format(path, 1, "colour PFM ('PF') is not supported, expected 'Pf'")),
        other => return Err(Error::format(path, 1, format!("bad magic '{other}', expected 'Pf'"))),
    }
    let dims: Vec<usize> = lines[1].split_whitespace().filter_map(|t| t.parse().ok()).collect();
    let [w, h] = dims[..] else {
        return Err(Error::format(path, 2, format!("expected 'width height', found '{}'", lines[1])));
    };
    let scale: f64 = lines[2].parse().map_err(|_| Error::format(path, 3, format!("invalid scale '{}'", lines[2])))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format(path, 3, "scale must be non-zero"));
    }
    let little = scale < 0.0;
    let payload = &bytes[offset..];
    let need = w * h * 4;
    if payload.len() < need {
        return Err(Error::format(path, 4, format!("truncated payload: {} of {need} bytes", payload.len())));
    }
    let mut data = vec![0.0; w * h];
    for (i, chunk) in payload[..need].chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let x = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (row, u) = (i / w, i % w);
        data[(h - 1 - row) * w + u] = x as f64;
    }
    Ok(Grid::from_vec(w, h, data))
}

/// Depth map from a PFM; non-finite values are invalid.
pub fn read_pfm(path: &Path) -> Result<DepthMap> {
    let g = read_pfm_grid(path)?;
    Ok(DepthMap::from_values(g.width(), g.height(), g.into_vec()))
}
