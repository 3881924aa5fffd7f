use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fusion::DepthMap;
use crate::geometry::CameraParams;
use crate::grid::Image;

use super::{read_cam, read_text, write_bytes, write_cam, write_image_gray16, write_pfm};

/// Ranked `(source view, score)` lists, one per reference view.
pub type PairList = Vec<Vec<(usize, f64)>>;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub root: PathBuf,
    pub image_paths: Vec<PathBuf>,
    pub cameras: Vec<CameraParams>,
    pub depth_paths: Option<Vec<PathBuf>>,
    pub pairs: PairList,
}

impl SceneBundle {
    pub fn view_count(&self) -> usize {
        self.cameras.len()
    }

    /// Source views for a reference, best first.
    pub fn sources(&self, reference: usize) -> Vec<usize> {
        self.pairs[reference].iter().map(|&(i, _)| i).collect()
    }
}

fn view_name(i: usize) -> String {
    format!("{i:08}")
}

pub fn image_path(root: &Path, i: usize) -> PathBuf {
    root.join("images").join(format!("{}.png", view_name(i)))
}

pub fn cam_path(root: &Path, i: usize) -> PathBuf {
    root.join("cams").join(format!("{}_cam.txt", view_name(i)))
}

pub fn depth_path(root: &Path, i: usize) -> PathBuf {
    root.join("depths").join(format!("{}.pfm", view_name(i)))
}

pub fn parse_pairs(text: &str, path: &Path) -> Result<PairList> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut next = |what: &str| {
        lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::format(path, text.lines().count() + 1, format!("expected {what}, found end of file")))
    };
    let (n0, first) = next("view count")?;
    let count: usize = first.trim().parse().map_err(|_| Error::format(path, n0, "expected view count"))?;
    let mut pairs = vec![Vec::new(); count];
    let mut seen = vec![false; count];
    for _ in 0..count {
        let (n, l) = next("reference view index")?;
        let r: usize = l.trim().parse().map_err(|_| Error::format(path, n, "expected reference view index"))?;
        if r >= count || seen[r] {
            return Err(Error::format(path, n, format!("reference index {r} out of range or repeated")));
        }
        seen[r] = true;
        let (n, l) = next("source list")?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        let k: usize =
            toks.first().and_then(|t| t.parse().ok()).ok_or_else(|| Error::format(path, n, "expected source count"))?;
        if toks.len() != 1 + 2 * k {
            return Err(Error::format(
                path,
                n,
                format!("expected {k} (index, score) pairs, found {} values", toks.len() - 1),
            ));
        }
        for c in toks[1..].chunks_exact(2) {
            let idx: usize =
                c[0].parse().map_err(|_| Error::format(path, n, format!("invalid view index '{}'", c[0])))?;
            let score: f64 = c[1].parse().map_err(|_| Error::format(path, n, format!("invalid score '{}'", c[1])))?;
            if idx >= count || idx == r {
                return Err(Error::format(path, n, format!("source index {idx} out of range or equal to reference")));
            }
            pairs[r].push((idx, score));
        }
    }
    Ok(pairs)
}

pub fn read_pairs(path: &Path) -> Result<PairList> {
    parse_pairs(&read_text(path)?, path)
}

pub fn write_pairs(path: &Path, pairs: &PairList) -> Result<()> {
    let mut s = format!("{}\n", pairs.len());
    for (r, list) in pairs.iter().enumerate() {
        let _ = write!(s, "{r}\n{}", list.len());
        for (i, score) in list {
            let _ = write!(s, " {i} {score:.16e}");
        }
        s.push('\n');
    }
    write_bytes(path, s.as_bytes())
}

/// Loads a scene directory. Every referenced image and camera must exist; the
/// `depths/` directory is optional but, when present, must be complete.
pub fn load_scene(root: &Path) -> Result<SceneBundle> {
    let pairs = read_pairs(&root.join("pair.txt"))?;
    let n = pairs.len();
    let mut cameras = Vec::with_capacity(n);
    let mut image_paths = Vec::with_capacity(n);
    for i in 0..n {
        cameras.push(read_cam(&cam_path(root, i))?);
        let img = image_path(root, i);
        if !img.is_file() {
            return Err(Error::io(
                &img,
                std::io::Error::new(std::io::ErrorKind::NotFound, "image referenced by pair.txt is missing"),
            ));
        }
        image_paths.push(img);
    }
    let depth_paths = if root.join("depths").is_dir() {
        let paths: Vec<PathBuf> = (0..n).map(|i| depth_path(root, i)).collect();
        if let Some(p) = paths.iter().find(|p| !p.is_file()) {
            return Err(Error::io(
                p,
                std::io::Error::new(std::io::ErrorKind::NotFound, "ground-truth depth is missing"),
            ));
        }
        Some(paths)
    } else {
        None
    };
    Ok(SceneBundle { root: root.to_path_buf(), image_paths, cameras, depth_paths, pairs })
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Writes a scene directory in the layout read by [`load_scene`].
pub fn write_scene(
    root: &Path,
    cameras: &[CameraParams],
    images: &[Image],
    depths: Option<&[DepthMap]>,
    pairs: &PairList,
) -> Result<()> {
    if cameras.len() != images.len() || pairs.len() != cameras.len() || depths.is_some_and(|d| d.len() != cameras.len())
    {
        return Err(Error::InvalidInput("scene parts disagree in view count".into()));
    }
    create_dir(&root.join("images"))?;
    create_dir(&root.join("cams"))?;
    for (i, (cam, img)) in cameras.iter().zip(images).enumerate() {
        write_cam(&cam_path(root, i), cam)?;
        write_image_gray16(&image_path(root, i), img)?;
    }
    if let Some(depths) = depths {
        create_dir(&root.join("depths"))?;
        for (i, d) in depths.iter().enumerate() {
            write_pfm(&depth_path(root, i), d)?;
        }
    }
    write_pairs(&root.join("pair.txt"), pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Vector3};

    #[test]
    fn two_view_pairs() {
        let p = parse_pairs("2\n0\n1 1 10.5\n1\n1 0 10.5\n", Path::new("pair.txt")).unwrap();
        assert_eq!(p, vec![vec![(1, 10.5)], vec![(0, 10.5)]]);
    }

    #[test]
    fn pair_index_out_of_range() {
        let r = parse_pairs("2\n0\n1 5 1.0\n1\n1 0 1.0\n", Path::new("pair.txt"));
        assert!(matches!(r, Err(Error::Format { line: 3, .. })));
    }

    #[test]
    fn scene_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cams: Vec<CameraParams> = (0..2)
            .map(|i| {
                CameraParams::pinhole(
                    100.0 / 3.0,
                    1.5,
                    1.0,
                    Matrix3::identity(),
                    Vector3::new(0.1 * i as f64, 0.0, 0.0),
                    1.0,
                    0.1,
                )
                .unwrap()
            })
            .collect();
        let imgs = vec![Image::gray(4, 3, vec![0.5; 12]); 2];
        let pairs = vec![vec![(1, 0.1)], vec![(0, 1.0 / 7.0)]];
        write_scene(dir.path(), &cams, &imgs, None, &pairs).unwrap();
        let b = load_scene(dir.path()).unwrap();
        assert_eq!(b.cameras, cams);
        assert_eq!(b.pairs, pairs);
        assert!(b.depth_paths.is_none());
        std::fs::remove_file(image_path(dir.path(), 1)).unwrap();
        assert!(matches!(load_scene(dir.path()), Err(Error::Io { .. })));
    }
}
