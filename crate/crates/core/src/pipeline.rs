//! Cascade depth estimation for one reference view: features, plane-sweep
//! cost, probability and distance heads, branch fusion, repeated coarse to
//! fine.

use crate::cost_volume::{
    aggregate_cost, build_feature_volume, compute_view_weights, extract_features, reference_volume, WeightMode,
};
use crate::error::{Error, Result};
use crate::fusion::{
    confidence_map, full_retention, fuse_branches, softargmax_depth, ConfidenceMap, DepthMap, FusionConfig,
};
use crate::geometry::{sample_hypotheses, CameraParams, DepthRange, HypothesisSet, StageSpec};
use crate::grid::{Grid, Image};
use crate::reconstruct::FilterConfig;
use crate::region_heads::{distance_from_provisional, probability_from_cost, DistanceVolume, ProbabilityVolume};

/// One cascade level: hypothesis count, interval as a multiple of the camera's
/// depth interval, and image downsampling divisor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageConfig {
    pub hypotheses: usize,
    pub interval_multiplier: f64,
    pub divisor: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub stages: Vec<StageConfig>,
    pub theta: f64,
    /// `false` regresses depth with plain soft-argmax.
    pub fusion: bool,
    pub lambda: f64,
    pub patch_k: usize,
    /// Reference plus sources used per depth estimate.
    pub n_views: usize,
    /// Softmax temperature on the smoothed cost, in cost units.
    pub temperature: f64,
    pub smoothing_radius: usize,
    pub weight_mode: WeightMode,
    pub filter: FilterConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stages: vec![
                StageConfig { hypotheses: 64, interval_multiplier: 4.0, divisor: 4 },
                StageConfig { hypotheses: 32, interval_multiplier: 2.0, divisor: 2 },
                StageConfig { hypotheses: 8, interval_multiplier: 1.0, divisor: 1 },
            ],
            theta: FusionConfig::DEFAULT_THETA,
            fusion: true,
            lambda: crate::sdf_supervision::DEFAULT_LAMBDA,
            patch_k: 5,
            n_views: 5,
            temperature: 0.001,
            smoothing_radius: 1,
            weight_mode: WeightMode::Visibility,
            filter: FilterConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() || self.stages.len() > 3 {
            return Err(Error::InvalidInput("between 1 and 3 cascade stages are supported".into()));
        }
        for s in &self.stages {
            if s.hypotheses < 2 || !(s.interval_multiplier > 0.0) || s.divisor == 0 {
                return Err(Error::InvalidInput(
                    "stages need >= 2 hypotheses, a positive interval multiplier and a divisor >= 1".into(),
                ));
            }
        }
        FusionConfig::new(self.theta)?;
        if self.patch_k.is_multiple_of(2) || self.patch_k == 0 {
            return Err(Error::InvalidInput(format!("patch size must be odd, got {}", self.patch_k)));
        }
        if self.n_views < 2 {
            return Err(Error::InsufficientViews(self.n_views));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidInput("temperature must be > 0".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidInput("lambda must be >= 0".into()));
        }
        Ok(())
    }

    /// Sweep range shared by all stages: the first stage's full extent.
    pub fn global_range(&self, cam: &CameraParams) -> DepthRange {
        let s = &self.stages[0];
        let min = cam.depth_min();
        DepthRange { min, max: min + s.hypotheses as f64 * s.interval_multiplier * cam.depth_interval() }
    }

    pub fn stage_spec(&self, index: usize, cam: &CameraParams) -> StageSpec {
        let s = &self.stages[index];
        StageSpec {
            index: index + 1,
            hypotheses: s.hypotheses,
            interval: s.interval_multiplier * cam.depth_interval(),
            divisor: s.divisor,
        }
    }
}

/// Everything one stage produced, at that stage's resolution.
#[derive(Debug, Clone)]
pub struct StageOutput {
    pub camera: CameraParams,
    pub hypotheses: HypothesisSet,
    pub probability: ProbabilityVolume,
    pub distance: DistanceVolume,
    pub softargmax: DepthMap,
    pub depth: DepthMap,
    pub retained: Grid<usize>,
}

#[derive(Debug, Clone)]
pub struct DepthEstimate {
    pub depth: DepthMap,
    pub confidence: ConfidenceMap,
    pub stages: Vec<StageOutput>,
}

/// Cascade estimate for `reference` against the given source views.
pub fn estimate_depth(
    images: &[Image],
    cams: &[CameraParams],
    reference: usize,
    sources: &[usize],
    cfg: &PipelineConfig,
) -> Result<DepthEstimate> {
    cfg.validate()?;
    if images.len() != cams.len() {
        return Err(Error::InvalidInput(format!("{} images but {} cameras", images.len(), cams.len())));
    }
    if reference >= cams.len() || sources.iter().any(|&s| s >= cams.len() || s == reference) {
        return Err(Error::InvalidInput("view indices out of range or source equals reference".into()));
    }
    let sources: Vec<usize> = sources.iter().copied().take(cfg.n_views - 1).collect();
    if sources.is_empty() {
        return Err(Error::InsufficientViews(1));
    }
    let (w0, h0) = (images[reference].width, images[reference].height);
    if sources.iter().any(|&s| images[s].width != w0 || images[s].height != h0) {
        return Err(Error::InvalidInput("all views must share one image size".into()));
    }
    let global = cfg.global_range(&cams[reference]);
    let fusion = FusionConfig::new(cfg.theta)?;

    let mut stages: Vec<StageOutput> = Vec::with_capacity(cfg.stages.len());
    for si in 0..cfg.stages.len() {
        let spec = cfg.stage_spec(si, &cams[reference]);
        let cam_ref = cams[reference].scaled(spec.divisor);
        let feat_ref = extract_features(&images[reference], spec.divisor)?;
        let (w, h) = (feat_ref.width(), feat_ref.height());
        let prev = stages.last().map(|s| &s.depth);
        let hyps = sample_hypotheses(&spec, global, prev, w, h)?;

        let v0 = reference_volume(&feat_ref, hyps.count());
        let mut volumes = Vec::with_capacity(sources.len());
        for &s in &sources {
            let feat = extract_features(&images[s], spec.divisor)?;
            volumes.push(build_feature_volume(&feat, &cam_ref, &cams[s].scaled(spec.divisor), &hyps));
        }
        let weights = compute_view_weights(&v0, &volumes, cfg.weight_mode);
        let cost = aggregate_cost(&v0, &volumes, &weights)?;
        let probability = probability_from_cost(&cost, cfg.temperature, cfg.smoothing_radius)?;
        let distance = distance_from_provisional(&probability, &hyps, &cam_ref, cfg.patch_k, spec.extent() / 2.0)?;
        let softargmax = softargmax_depth(&probability, &hyps);
        let (depth, retained) = if cfg.fusion {
            fuse_branches(&probability, &distance, &hyps, &fusion)
        } else {
            (softargmax.clone(), full_retention(&hyps))
        };
        stages.push(StageOutput {
            camera: cam_ref,
            hypotheses: hyps,
            probability,
            distance,
            softargmax,
            depth,
            retained,
        });
    }
    let last = stages.last().expect("at least one stage");
    let confidence = confidence_map(&last.probability, &last.hypotheses, &last.depth, &last.retained);
    Ok(DepthEstimate { depth: last.depth.clone(), confidence, stages })
}
