use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Volume;

use super::{read_bytes, write_bytes};

/// Inspection dump of a D×H×W volume: `VOLF`, `D H W`, `-1.0` (little-endian
/// marker), then `f32` values in depth-major order; NaN marks invalid cells.
pub fn write_volume(path: &Path, vol: &Volume<f64>) -> Result<()> {
    let (d, h, w) = vol.shape();
    let mut out = format!("VOLF\n{d} {h} {w}\n-1.0\n").into_bytes();
    out.reserve(vol.as_slice().len() * 4);
    for &x in vol.as_slice() {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    write_bytes(path, &out)
}

pub fn read_volume(path: &Path) -> Result<Volume<f64>> {
    let bytes = read_bytes(path)?;
    let mut lines = Vec::new();
    let mut start = 0;
    for _ in 0..3 {
        let end = bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| p + start)
            .ok_or_else(|| Error::format(path, lines.len() + 1, "truncated header"))?;
        lines.push(String::from_utf8_lossy(&bytes[start..end]).trim().to_string());
        start = end + 1;
    }
    if lines[0] != "VOLF" {
        return Err(Error::format(path, 1, format!("bad magic '{}', expected 'VOLF'", lines[0])));
    }
    let dims: Vec<usize> = lines[1].split_whitespace().filter_map(|t| t.parse().ok()).collect();
    let [d, h, w] = dims[..] else {
        return Err(Error::format(path, 2, "expected 'D H W'"));
    };
    if lines[2] != "-1.0" {
        return Err(Error::format(path, 3, "only little-endian volumes (-1.0) are supported"));
    }
    let need = d * h * w * 4;
    let payload = &bytes[start..];
    if payload.len() < need {
        return Err(Error::format(path, 4, format!("truncated payload: {} of {need} bytes", payload.len())));
    }
    let data = payload[..need].chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
    Ok(Volume::from_vec(d, h, w, data))
}
