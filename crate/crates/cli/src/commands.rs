use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use mvsdf::io::{self, PlyFormat, SceneBundle};
use mvsdf::validation::{BoundEntry, DEFAULT_DISC_RATIO};
use mvsdf::*;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::settings::Settings;

/// Refuse grids larger than this many voxels unless the user narrows them.
const MAX_VOXELS: usize = 64_000_000;

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source: e }
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| io_err(p, e))
}

fn write_text(p: &Path, s: &str) -> Result<()> {
    std::fs::write(p, s).map_err(|e| io_err(p, e))
}

fn ply_format(ascii: bool) -> PlyFormat {
    if ascii {
        PlyFormat::Ascii
    } else {
        PlyFormat::BinaryLittleEndian
    }
}

fn view_file(dir: &Path, view: usize, suffix: &str) -> PathBuf {
    dir.join(format!("{view:08}{suffix}"))
}

/// `"x,y,z"` style lists.
fn parse_list<T: std::str::FromStr>(what: &str, s: &str) -> Result<Vec<T>> {
    s.split(',').map(|t| t.trim().parse().map_err(|_| Error::InvalidInput(format!("invalid {what} '{s}'")))).collect()
}

fn select_views(views: &Option<String>, count: usize) -> Result<Vec<usize>> {
    let list = match views {
        Some(s) => parse_list("view list", s)?,
        None => (0..count).collect(),
    };
    if let Some(&v) = list.iter().find(|&&v| v >= count) {
        return Err(Error::InvalidInput(format!("view {v} out of range (scene has {count})")));
    }
    Ok(list)
}

fn load_images(scene: &SceneBundle) -> Result<Vec<Image>> {
    scene.image_paths.par_iter().map(|p| io::read_image(p)).collect()
}

fn gt_depths(scene: &SceneBundle) -> Result<Vec<DepthMap>> {
    let paths = scene
        .depth_paths
        .as_ref()
        .ok_or_else(|| Error::InvalidInput(format!("{} has no depths/ directory", scene.root.display())))?;
    paths.iter().map(|p| io::read_pfm(p)).collect()
}

// synth ----------------------------------------------------------------------

#[derive(Args)]
pub struct SynthArgs {
    /// fronto, slanted, sphere, step, lowtex or sphere-plane.
    #[arg(long, default_value = "sphere-plane")]
    kind: String,
    /// Output scene directory.
    #[arg(long)]
    out: PathBuf,
    /// Seed of the procedural texture.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    views: Option<usize>,
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let mut spec = SceneSpec::new(a.kind.parse()?);
    if a.width.is_some() || a.height.is_some() {
        let (w, h) = (a.width.unwrap_or(spec.width), a.height.unwrap_or(spec.height));
        spec = spec.with_size(w, h);
    }
    if let Some(v) = a.views {
        spec.views = v;
    }
    spec.seed = a.seed;
    let scene = render_synthetic_scene(&spec)?;
    let n = scene.cameras.len();
    // nearest source first; scores only encode the ranking
    let pairs: io::PairList =
        scene.pairs.iter().map(|l| l.iter().enumerate().map(|(rank, &s)| (s, (n - rank) as f64)).collect()).collect();
    io::write_scene(&a.out, &scene.cameras, &scene.images, Some(&scene.depths), &pairs)?;
    println!("wrote {} views of '{}' to {}", n, spec.kind, a.out.display());
    Ok(())
}

// depth ----------------------------------------------------------------------

#[derive(Args)]
pub struct DepthArgs {
    /// Scene directory (images/, cams/, pair.txt).
    #[arg(long)]
    scene: PathBuf,
    /// Output directory for `NNNNNNNN.pfm` depth and `NNNNNNNN_conf.pfm` confidence.
    #[arg(long)]
    out: PathBuf,
    /// Reference views, comma separated (default: all).
    #[arg(long)]
    views: Option<String>,
    /// Also write the final stage's probability and distance volumes.
    #[arg(long)]
    dump_volumes: bool,
    #[command(flatten)]
    settings: Settings,
}

pub fn depth(a: DepthArgs) -> Result<()> {
    let cfg = a.settings.resolve()?;
    let scene = io::load_scene(&a.scene)?;
    let views = select_views(&a.views, scene.view_count())?;
    let images = load_images(&scene)?;
    create_dir(&a.out)?;
    for r in views {
        let est = estimate_depth(&images, &scene.cameras, r, &scene.sources(r), &cfg)?;
        io::write_pfm(&view_file(&a.out, r, ".pfm"), &est.depth)?;
        io::write_pfm_grid(&view_file(&a.out, r, "_conf.pfm"), &est.confidence.data)?;
        if a.dump_volumes {
            let st = est.stages.last().expect("at least one stage");
            io::write_volume(&view_file(&a.out, r, "_prob.vol"), &st.probability.data)?;
            io::write_volume(&view_file(&a.out, r, "_dist.vol"), &st.distance.data)?;
        }
        println!("view {r}: {} valid pixels", est.depth.valid_count());
    }
    Ok(())
}

// sdf-gt ---------------------------------------------------------------------

#[derive(Args)]
pub struct SdfGtArgs {
    /// Scene directory with ground-truth depths.
    #[arg(long)]
    scene: PathBuf,
    /// Output directory for `NNNNNNNN_sdf.vol` volumes (NaN marks invalid cells).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    views: Option<String>,
    /// Cascade stage whose hypotheses are queried (1-based, default last).
    #[arg(long)]
    stage: Option<usize>,
    #[command(flatten)]
    settings: Settings,
}

pub fn sdf_gt(a: SdfGtArgs) -> Result<()> {
    let cfg = a.settings.resolve()?;
    let scene = io::load_scene(&a.scene)?;
    let depths = gt_depths(&scene)?;
    let views = select_views(&a.views, scene.view_count())?;
    let stage = a.stage.unwrap_or(cfg.stages.len());
    if stage == 0 || stage > cfg.stages.len() {
        return Err(Error::InvalidInput(format!("stage must be in 1..={}", cfg.stages.len())));
    }
    let search = SearchConfig::new(cfg.patch_k)?;
    create_dir(&a.out)?;
    for r in views {
        let cam = &scene.cameras[r];
        let spec = cfg.stage_spec(stage - 1, cam);
        let gt = depths[r].downsample(spec.divisor);
        // later stages sweep around the ground truth, as they would around a perfect previous stage
        let prev = (stage > 1).then(|| depths[r].downsample(cfg.stages[stage - 2].divisor));
        let hyps = sample_hypotheses(&spec, cfg.global_range(cam), prev.as_ref(), gt.width(), gt.height())?;
        let sdf = generate_sdf_gt(&hyps, &gt, &cam.scaled(spec.divisor), &search)?;
        let vol = Volume::from_vec(
            hyps.count(),
            gt.height(),
            gt.width(),
            sdf.data
                .as_slice()
                .iter()
                .zip(sdf.valid.as_slice())
                .map(|(&x, &ok)| if ok { x } else { f64::NAN })
                .collect(),
        );
        io::write_volume(&view_file(&a.out, r, "_sdf.vol"), &vol)?;
        let valid = sdf.valid.as_slice().iter().filter(|&&v| v).count();
        println!("view {r}: {}x{}x{} cells, {valid} valid", hyps.count(), gt.height(), gt.width());
    }
    Ok(())
}

// fuse -----------------------------------------------------------------------

#[derive(Args)]
pub struct FuseArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Directory written by `depth`.
    #[arg(long)]
    depth: PathBuf,
    /// Output PLY.
    #[arg(long)]
    out: PathBuf,
    /// Write ascii instead of binary little-endian.
    #[arg(long)]
    ascii: bool,
    #[command(flatten)]
    settings: Settings,
}

pub fn fuse(a: FuseArgs) -> Result<()> {
    let cfg = a.settings.resolve()?;
    let scene = io::load_scene(&a.scene)?;
    let n = scene.view_count();
    let depths: Vec<DepthMap> = (0..n).map(|i| io::read_pfm(&view_file(&a.depth, i, ".pfm"))).collect::<Result<_>>()?;
    let confs: Vec<ConfidenceMap> = (0..n)
        .map(|i| io::read_pfm_grid(&view_file(&a.depth, i, "_conf.pfm")).map(|data| ConfidenceMap { data }))
        .collect::<Result<_>>()?;
    let images = load_images(&scene)?;
    let masks = cross_view_filter(&depths, &confs, &scene.cameras, &cfg.filter)?;
    let cloud = fuse_point_cloud(&depths, &masks, Some(&images), &scene.cameras, &cfg.filter)?;
    io::write_ply_cloud(&a.out, &cloud, ply_format(a.ascii))?;
    let kept: usize = masks.iter().map(|m| m.as_slice().iter().filter(|&&k| k).count()).sum();
    println!("{kept} consistent pixels fused into {} points", cloud.len());
    Ok(())
}

// mesh -----------------------------------------------------------------------

#[derive(Args)]
pub struct MeshArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Reference view whose distance volume is meshed.
    #[arg(long = "ref", default_value_t = 0)]
    reference: usize,
    #[arg(long)]
    out: PathBuf,
    /// Voxel spacing (default: half the camera's depth interval).
    #[arg(long)]
    spacing: Option<f64>,
    /// Center of the first voxel, "x,y,z" (default: bounding box of the estimated depth).
    #[arg(long)]
    origin: Option<String>,
    /// Voxel counts "nx,ny,nz" (required with --origin).
    #[arg(long, requires = "origin")]
    dims: Option<String>,
    #[arg(long)]
    ascii: bool,
    #[command(flatten)]
    settings: Settings,
}

pub fn mesh(a: MeshArgs) -> Result<()> {
    let cfg = a.settings.resolve()?;
    let scene = io::load_scene(&a.scene)?;
    if a.reference >= scene.view_count() {
        return Err(Error::InvalidInput(format!("reference view {} out of range", a.reference)));
    }
    let images = load_images(&scene)?;
    let cam = &scene.cameras[a.reference];
    let est = estimate_depth(&images, &scene.cameras, a.reference, &scene.sources(a.reference), &cfg)?;
    let st = est.stages.last().expect("at least one stage");
    let spacing = a.spacing.unwrap_or(0.5 * cam.depth_interval());
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidInput(format!("spacing must be > 0, got {spacing}")));
    }
    let grid_cfg = match (&a.origin, &a.dims) {
        (Some(o), Some(d)) => {
            let o: Vec<f64> = parse_list("origin", o)?;
            let d: Vec<usize> = parse_list("dims", d)?;
            if o.len() != 3 || d.len() != 3 {
                return Err(Error::InvalidInput("origin and dims need three values each".into()));
            }
            GridConfig { origin: Vector3::new(o[0], o[1], o[2]), spacing, dims: [d[0], d[1], d[2]] }
        }
        (Some(_), None) => return Err(Error::InvalidInput("--origin needs --dims".into())),
        _ => depth_bounding_grid(&est.depth, cam, spacing)?,
    };
    let voxels = grid_cfg.dims.iter().product::<usize>();
    if voxels > MAX_VOXELS {
        return Err(Error::InvalidInput(format!(
            "grid of {voxels} voxels is too large; raise --spacing or pass --origin/--dims"
        )));
    }
    let grid = sdf_grid_from_volume(&st.distance, &st.hypotheses, &st.camera, &grid_cfg)?;
    let mesh = marching_cubes(&grid, 0.0);
    if mesh.is_empty() {
        return Err(Error::InvalidInput("distance volume has no zero crossing inside the grid".into()));
    }
    io::write_ply_mesh(&a.out, &mesh, ply_format(a.ascii))?;
    println!(
        "{} vertices, {} triangles from a {:?} grid ({} valid voxels)",
        mesh.vertices.len(),
        mesh.triangles.len(),
        grid_cfg.dims,
        grid.valid_count()
    );
    Ok(())
}

/// Axis-aligned grid around the back-projected depth map, padded by two voxels.
fn depth_bounding_grid(depth: &DepthMap, cam: &CameraParams, spacing: f64) -> Result<GridConfig> {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for v in 0..depth.height() {
        for u in 0..depth.width() {
            if let Some(z) = depth.value(u, v) {
                let x = back_project(PixelCoord::new(u as f64, v as f64), z, cam)?;
                lo = lo.inf(&x);
                hi = hi.sup(&x);
            }
        }
    }
    if !lo.x.is_finite() {
        return Err(Error::InvalidInput("depth map has no valid pixels".into()));
    }
    let pad = 2.0 * spacing;
    let origin = lo - Vector3::repeat(pad);
    let extent = hi - lo + Vector3::repeat(2.0 * pad);
    let dims = [0, 1, 2].map(|i| (extent[i] / spacing).ceil() as usize + 1);
    Ok(GridConfig { origin, spacing, dims })
}

// eval -----------------------------------------------------------------------

#[derive(Args)]
pub struct EvalArgs {
    /// Reconstructed point cloud (PLY).
    #[arg(long)]
    recon: PathBuf,
    /// Reference point cloud (PLY).
    #[arg(long, conflicts_with = "gt_scene", required_unless_present = "gt_scene")]
    gt: Option<PathBuf>,
    /// Scene directory whose ground-truth depths form the reference cloud.
    #[arg(long)]
    gt_scene: Option<PathBuf>,
    /// With --gt-scene: keep reference points whose depth agrees (1% relative)
    /// with the ground truth of at least this many views, their own included.
    #[arg(long, default_value_t = 1, requires = "gt_scene")]
    min_visible: usize,
    /// Distance threshold for precision/recall (default: half the depth interval of view 0 with --gt-scene).
    #[arg(long)]
    tau: Option<f64>,
    /// Distances beyond this count as misses and are left out of the means (default 20 tau).
    #[arg(long)]
    max_dist: Option<f64>,
    /// Report file (`key = value` lines).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let recon: Vec<Point3> = io::read_ply(&a.recon)?.vertices.into_iter().map(Vector3::from).collect();
    let (gt, default_tau) = match (&a.gt, &a.gt_scene) {
        (Some(p), _) => (io::read_ply(p)?.vertices.into_iter().map(Vector3::from).collect::<Vec<_>>(), None),
        (None, Some(dir)) => {
            let scene = io::load_scene(dir)?;
            let depths = gt_depths(&scene)?;
            (scene_surface(&depths, &scene.cameras, a.min_visible)?, Some(0.5 * scene.cameras[0].depth_interval()))
        }
        (None, None) => unreachable!("clap requires one reference"),
    };
    let tau =
        a.tau.or(default_tau).ok_or_else(|| Error::InvalidInput("--tau is required with a PLY reference".into()))?;
    let rep = evaluate_point_clouds(&recon, &gt, tau, a.max_dist)?;
    let mut s = String::new();
    let _ = writeln!(s, "recon_points = {}", recon.len());
    let _ = writeln!(s, "gt_points = {}", gt.len());
    let _ = writeln!(s, "tau = {}", rep.tau);
    let _ = writeln!(s, "max_dist = {}", rep.max_dist);
    let _ = writeln!(s, "accuracy = {}", rep.accuracy);
    let _ = writeln!(s, "completeness = {}", rep.completeness);
    let _ = writeln!(s, "overall = {}", rep.overall);
    let _ = writeln!(s, "precision = {}", rep.precision);
    let _ = writeln!(s, "recall = {}", rep.recall);
    let _ = writeln!(s, "f_score = {}", rep.f_score);
    if let Some(out) = &a.out {
        write_text(out, &s)?;
    }
    print!("{s}");
    Ok(())
}

/// Back-projected ground-truth pixels of every view, optionally restricted to
/// points that `min_visible` views' ground truth agrees with.
fn scene_surface(depths: &[DepthMap], cams: &[CameraParams], min_visible: usize) -> Result<Vec<Point3>> {
    if depths.len() != cams.len() {
        return Err(Error::InvalidInput("one depth map per camera is required".into()));
    }
    let per_view: Vec<Vec<Point3>> = (0..depths.len())
        .into_par_iter()
        .map(|i| {
            let d = &depths[i];
            let mut pts = Vec::new();
            for v in 0..d.height() {
                for u in 0..d.width() {
                    let Some(z) = d.value(u, v) else { continue };
                    let Ok(x) = back_project(PixelCoord::new(u as f64, v as f64), z, &cams[i]) else { continue };
                    let seen = (0..depths.len()).filter(|&j| j == i || agrees(&x, &depths[j], &cams[j])).count();
                    if seen >= min_visible {
                        pts.push(x);
                    }
                }
            }
            pts
        })
        .collect();
    Ok(per_view.concat())
}

fn agrees(x: &Point3, depth: &DepthMap, cam: &CameraParams) -> bool {
    let Ok((px, z)) = project(x, cam) else { return false };
    let (u, v) = (px.u.round(), px.v.round());
    if u < 0.0 || v < 0.0 || u >= depth.width() as f64 || v >= depth.height() as f64 {
        return false;
    }
    depth.value(u as usize, v as usize).is_some_and(|d| (d - z).abs() <= 0.01 * z)
}

// bound-check ----------------------------------------------------------------

#[derive(Args)]
pub struct BoundCheckArgs {
    /// Depth map to triangulate (PFM); queries lie on pixel rays through vertices.
    #[arg(long, requires = "cam", conflicts_with = "random")]
    depth: Option<PathBuf>,
    /// Camera of the depth map.
    #[arg(long)]
    cam: Option<PathBuf>,
    /// Use this many random (query, triangle) pairs instead.
    #[arg(long, required_unless_present = "depth")]
    random: Option<usize>,
    /// Queries per run on a triangulated depth map.
    #[arg(long, default_value_t = 10_000)]
    queries: usize,
    /// Maximum relative offset of a query along its pixel ray.
    #[arg(long, default_value_t = 0.08)]
    offset: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-query TSV dump.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn bound_check(a: BoundCheckArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut entries: Vec<BoundEntry> = Vec::new();
    if let Some(n) = a.random {
        let mut p = |r: f64| Vector3::new(rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r));
        while entries.len() < n {
            let Ok(tri) = Triangle::new(p(1.0), p(1.0), p(1.0)) else { continue };
            entries.push(mvsdf::bound_check(&p(2.0), &tri));
        }
    } else {
        let depth = io::read_pfm(a.depth.as_ref().expect("clap enforces --depth"))?;
        let cam = io::read_cam(a.cam.as_ref().expect("clap enforces --cam"))?;
        let tris = triangulate_depth_map(&depth, &cam, DEFAULT_DISC_RATIO);
        if tris.is_empty() {
            return Err(Error::InvalidInput("depth map produced no triangles".into()));
        }
        let center = cam.center();
        for _ in 0..a.queries {
            let tri = &tris[rng.gen_range(0..tris.len())];
            let v = tri.vertices()[rng.gen_range(0..3)];
            let q = center + (v - center) * (1.0 + rng.gen_range(-a.offset..=a.offset));
            entries.push(mvsdf::bound_check(&q, tri));
        }
    }
    let report = BoundReport { entries };
    print!("{}", bound_table(&report));
    if let Some(out) = &a.out {
        let mut s =
            String::from("case\texact\tvertex_distance\terror\tcase_bound\tcase_holds\tfinal_bound\tfinal_holds\n");
        for e in &report.entries {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                e.feature.label(),
                e.exact,
                e.vertex_distance,
                e.error,
                e.case_bound,
                e.case_holds,
                e.final_bound,
                e.final_holds
            );
        }
        write_text(out, &s)?;
    }
    Ok(())
}

/// Per-case summary: queries, violations of the case bound and of the final
/// max-edge bound, largest nearest-vertex error.
fn bound_table(r: &BoundReport) -> String {
    let mut s = String::from("case\tqueries\tcase_violations\tfinal_violations\tmax_error\n");
    let rows = [("a", Some('a')), ("b", Some('b')), ("c", Some('c')), ("all", None)];
    for (name, label) in rows {
        let sel: Vec<&BoundEntry> = r.entries.iter().filter(|e| label.is_none_or(|l| e.feature.label() == l)).collect();
        let _ = writeln!(
            s,
            "{name}\t{}\t{}\t{}\t{}",
            sel.len(),
            sel.iter().filter(|e| !e.case_holds).count(),
            sel.iter().filter(|e| !e.final_holds).count(),
            sel.iter().map(|e| e.error).fold(0.0, f64::max)
        );
    }
    s
}
