use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{CameraParams, PlaneHint};

use super::{read_text, write_bytes};

/// Camera text block: 4x4 world-to-camera extrinsic, 3x3 intrinsic, then
/// `DEPTH_MIN DEPTH_INTERVAL [NUM_PLANES DEPTH_MAX]`. Values use 17
/// significant digits so they parse back exactly.
pub fn format_cam(cam: &CameraParams) -> String {
    let mut s = String::from("extrinsic\n");
    let (r, t) = (cam.rotation(), cam.translation());
    for i in 0..3 {
        let _ = writeln!(s, "{:.16e} {:.16e} {:.16e} {:.16e}", r[(i, 0)], r[(i, 1)], r[(i, 2)], t[i]);
    }
    s.push_str("0 0 0 1\n\nintrinsic\n");
    let k = cam.intrinsics();
    for i in 0..3 {
        let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", k[(i, 0)], k[(i, 1)], k[(i, 2)]);
    }
    let _ = write!(s, "\n{:.16e} {:.16e}", cam.depth_min(), cam.depth_interval());
    if let Some(h) = cam.plane_hint() {
        let _ = write!(s, " {:.16e} {:.16e}", h.num_planes, h.depth_max);
    }
    s.push('\n');
    s
}

struct Lines<'a> {
    path: &'a Path,
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::format(self.path, line, msg)
    }

    fn line_no(&self) -> usize {
        self.lines.get(self.pos).map_or_else(|| self.lines.last().map_or(1, |l| l.0 + 1), |l| l.0)
    }

    fn skip_blank(&mut self) {
        while self.lines.get(self.pos).is_some_and(|(_, l)| l.trim().is_empty()) {
            self.pos += 1;
        }
    }

    fn expect_word(&mut self, word: &str) -> Result<()> {
        self.skip_blank();
        let n = self.line_no();
        match self.lines.get(self.pos) {
            Some((_, l)) if l.trim() == word => {
                self.pos += 1;
                Ok(())
            }
            Some((_, l)) => Err(self.err(n, format!("expected '{word}', found '{}'", l.trim()))),
            None => Err(self.err(n, format!("expected '{word}', found end of file"))),
        }
    }

    /// A line of exactly `count` numbers (or between `count` and `max` when given).
    fn numbers(&mut self, count: usize, max: usize, what: &str) -> Result<Vec<f64>> {
        let n = self.line_no();
        let Some((_, l)) = self.lines.get(self.pos) else {
            return Err(self.err(n, format!("expected {what}, found end of file")));
        };
        let vals: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| self.err(n, format!("invalid number '{t}' in {what}"))))
            .collect::<Result<_>>()?;
        if vals.len() < count || vals.len() > max {
            let want = if count == max { format!("{count}") } else { format!("{count} to {max}") };
            return Err(self.err(n, format!("expected {want} values for {what}, found {}", vals.len())));
        }
        self.pos += 1;
        Ok(vals)
    }
}

pub fn parse_cam(text: &str, path: &Path) -> Result<CameraParams> {
    let mut lines = Lines { path, lines: text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect(), pos: 0 };
    lines.expect_word("extrinsic")?;
    let mut ext = [[0.0; 4]; 4];
    for (i, row) in ext.iter_mut().enumerate() {
        let v = lines.numbers(4, 4, &format!("extrinsic row {}", i + 1))?;
        row.copy_from_slice(&v);
    }
    lines.expect_word("intrinsic")?;
    let mut k = [[0.0; 3]; 3];
    for (i, row) in k.iter_mut().enumerate() {
        let v = lines.numbers(3, 3, &format!("intrinsic row {}", i + 1))?;
        row.copy_from_slice(&v);
    }
    lines.skip_blank();
    let line = lines.line_no();
    let depth = lines.numbers(2, 4, "depth line")?;
    if depth.len() == 3 {
        return Err(lines.err(line, "depth line needs both NUM_PLANES and DEPTH_MAX"));
    }
    let rotation = Matrix3::from_fn(|i, j| ext[i][j]);
    let translation = Vector3::new(ext[0][3], ext[1][3], ext[2][3]);
    let intrinsics = Matrix3::from_fn(|i, j| k[i][j]);
    let cam = CameraParams::new(intrinsics, rotation, translation, depth[0], depth[1])
        .map_err(|e| lines.err(line, e.to_string()))?;
    let hint = if depth.len() == 4 { Some(PlaneHint { num_planes: depth[2], depth_max: depth[3] }) } else { None };
    Ok(cam.with_plane_hint(hint))
}

pub fn read_cam(path: &Path) -> Result<CameraParams> {
    parse_cam(&read_text(path)?, path)
}

pub fn write_cam(path: &Path, cam: &CameraParams) -> Result<()> {
    write_bytes(path, format_cam(cam).as_bytes())
}
