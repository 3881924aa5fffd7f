use std::path::PathBuf;

use clap::Args;
use mvsdf::io::{apply_setting, read_config};
use mvsdf::{PipelineConfig, Result};

/// Pipeline settings. Each flag has the same name as its config-file key;
/// flags override the file, which overrides the built-in defaults.
#[derive(Args, Debug, Default, Clone)]
pub struct Settings {
    /// `key = value` config file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Hypotheses per stage, comma separated (default 64,32,8).
    #[arg(long, value_name = "LIST")]
    pub hypotheses: Option<String>,
    /// Interval multipliers per stage (default 4,2,1).
    #[arg(long, value_name = "LIST")]
    pub intervals: Option<String>,
    /// Resolution divisors per stage (default 4,2,1).
    #[arg(long, value_name = "LIST")]
    pub divisors: Option<String>,
    /// Branch-fusion threshold on |S| (default 0.1); 1.0 keeps every hypothesis.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Enable branch fusion (default true); false regresses with soft-argmax.
    #[arg(long, value_name = "BOOL")]
    pub fusion: Option<bool>,
    /// Weight of the distance loss (default 0.1).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Patch side for the nearest-neighbour search (odd, default 5).
    #[arg(long = "patch-k")]
    pub patch_k: Option<usize>,
    /// Views per depth estimate, reference included (default 5).
    #[arg(long = "n-views")]
    pub n_views: Option<usize>,
    /// Softmax temperature on the smoothed cost (default 0.001).
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Box smoothing radius of the cost (default 1).
    #[arg(long = "smoothing-radius")]
    pub smoothing_radius: Option<usize>,
    /// View weighting: uniform, similarity or visibility (default).
    #[arg(long = "weight-mode", value_name = "MODE")]
    pub weight_mode: Option<String>,
    /// Consistency check: max reprojection error in pixels (default 1).
    #[arg(long = "eps-px")]
    pub eps_px: Option<f64>,
    /// Consistency check: max relative depth error (default 0.01).
    #[arg(long = "eps-rel")]
    pub eps_rel: Option<f64>,
    /// Consistency check: other views that must agree (default 3).
    #[arg(long = "min-views")]
    pub min_views: Option<usize>,
    /// Minimum confidence kept by the consistency check (default 0.3).
    #[arg(long = "min-conf")]
    pub min_conf: Option<f64>,
}

impl Settings {
    fn flags(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut put = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        put("hypotheses", self.hypotheses.clone());
        put("intervals", self.intervals.clone());
        put("divisors", self.divisors.clone());
        put("theta", self.theta.map(|x| x.to_string()));
        put("fusion", self.fusion.map(|x| x.to_string()));
        put("lambda", self.lambda.map(|x| x.to_string()));
        put("patch-k", self.patch_k.map(|x| x.to_string()));
        put("n-views", self.n_views.map(|x| x.to_string()));
        put("temperature", self.temperature.map(|x| x.to_string()));
        put("smoothing-radius", self.smoothing_radius.map(|x| x.to_string()));
        put("weight-mode", self.weight_mode.clone());
        put("eps-px", self.eps_px.map(|x| x.to_string()));
        put("eps-rel", self.eps_rel.map(|x| x.to_string()));
        put("min-views", self.min_views.map(|x| x.to_string()));
        put("min-conf", self.min_conf.map(|x| x.to_string()));
        out
    }

    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = &self.config {
            read_config(path, &mut cfg)?;
        }
        for (k, v) in self.flags() {
            apply_setting(&mut cfg, k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_flag_is_a_config_key() {
        let s = Settings {
            hypotheses: Some("8,4".into()),
            intervals: Some("2,1".into()),
            divisors: Some("2,1".into()),
            theta: Some(0.5),
            fusion: Some(false),
            lambda: Some(0.2),
            patch_k: Some(3),
            n_views: Some(3),
            temperature: Some(0.01),
            smoothing_radius: Some(0),
            weight_mode: Some("uniform".into()),
            eps_px: Some(2.0),
            eps_rel: Some(0.02),
            min_views: Some(1),
            min_conf: Some(0.0),
            ..Default::default()
        };
        let keys: Vec<&str> = s.flags().iter().map(|(k, _)| *k).collect();
        assert_eq!(keys, mvsdf::io::CONFIG_KEYS);
        let cfg = s.resolve().unwrap();
        assert_eq!(cfg.stages.len(), 2);
        assert_eq!(cfg.theta, 0.5);
        assert!(!cfg.fusion);
        assert_eq!(cfg.filter.min_views, 1);
    }

    #[test]
    fn precedence_per_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(
            &path,
            "hypotheses = 16,8,4\nintervals = 3,2,1\ndivisors = 2,2,1\ntheta = 0.3\nfusion = false\nlambda = 0.4\n\
             patch-k = 7\nn-views = 4\ntemperature = 0.02\nsmoothing-radius = 2\nweight-mode = similarity\n\
             eps-px = 1.5\neps-rel = 0.03\nmin-views = 2\nmin-conf = 0.4\n",
        )
        .unwrap();
        let file_only = Settings { config: Some(path.clone()), ..Default::default() }.resolve().unwrap();
        let d = PipelineConfig::default();
        let stage_lists = |c: &PipelineConfig| {
            c.stages.iter().map(|s| (s.hypotheses, s.interval_multiplier, s.divisor)).collect::<Vec<_>>()
        };
        assert_eq!(stage_lists(&file_only), vec![(16, 3.0, 2), (8, 2.0, 2), (4, 1.0, 1)]);
        let scalars = |c: &PipelineConfig| {
            (
                c.theta,
                c.fusion,
                c.lambda,
                c.patch_k,
                c.n_views,
                c.temperature,
                c.smoothing_radius,
                c.weight_mode.to_string(),
            )
        };
        let filters = |c: &PipelineConfig| (c.filter.eps_px, c.filter.eps_rel, c.filter.min_views, c.filter.min_conf);
        assert_eq!(scalars(&file_only), (0.3, false, 0.4, 7, 4, 0.02, 2, "similarity".to_string()));
        assert_eq!(filters(&file_only), (1.5, 0.03, 2, 0.4));
        assert_ne!(scalars(&file_only), scalars(&d));
        assert_ne!(filters(&file_only), filters(&d));

        let both = Settings {
            config: Some(path),
            hypotheses: Some("32,16,8".into()),
            intervals: Some("4,2,1".into()),
            divisors: Some("4,2,1".into()),
            theta: Some(0.2),
            fusion: Some(true),
            lambda: Some(0.1),
            patch_k: Some(5),
            n_views: Some(3),
            temperature: Some(0.005),
            smoothing_radius: Some(1),
            weight_mode: Some("uniform".into()),
            eps_px: Some(0.5),
            eps_rel: Some(0.02),
            min_views: Some(1),
            min_conf: Some(0.2),
        }
        .resolve()
        .unwrap();
        assert_eq!(stage_lists(&both), vec![(32, 4.0, 4), (16, 2.0, 2), (8, 1.0, 1)]);
        assert_eq!(scalars(&both), (0.2, true, 0.1, 5, 3, 0.005, 1, "uniform".to_string()));
        assert_eq!(filters(&both), (0.5, 0.02, 1, 0.2));
    }
}
