//! Flat `key = value` configuration; keys mirror the command-line flags.

use std::path::Path;

use crate::error::{Error, Result};
use crate::pipeline::{PipelineConfig, StageConfig};

use super::read_text;

pub const CONFIG_KEYS: &[&str] = &[
    "hypotheses",
    "intervals",
    "divisors",
    "theta",
    "fusion",
    "lambda",
    "patch-k",
    "n-views",
    "temperature",
    "smoothing-radius",
    "weight-mode",
    "eps-px",
    "eps-rel",
    "min-views",
    "min-conf",
];

/// `(line, key, value)` entries; `#` starts a comment.
pub fn parse_config(text: &str, path: &Path) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, i + 1, format!("expected 'key = value', found '{line}'")))?;
        let (k, v) = (k.trim(), v.trim());
        if !CONFIG_KEYS.contains(&k) {
            return Err(Error::format(path, i + 1, format!("unknown key '{k}'")));
        }
        out.push((i + 1, k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Applies a config file on top of `cfg`.
pub fn read_config(path: &Path, cfg: &mut PipelineConfig) -> Result<()> {
    for (line, k, v) in parse_config(&read_text(path)?, path)? {
        apply_setting(cfg, &k, &v).map_err(|e| Error::format(path, line, e.to_string()))?;
    }
    Ok(())
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::InvalidInput(format!("invalid value '{v}' for {key}")))
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|t| num(key, t.trim())).collect()
}

/// Sets one field by its flag name. Stage lists are comma-separated and
/// resize the cascade when their length differs.
pub fn apply_setting(cfg: &mut PipelineConfig, key: &str, value: &str) -> Result<()> {
    fn resize(stages: &mut Vec<StageConfig>, n: usize) {
        let last = *stages.last().expect("config keeps at least one stage");
        stages.resize(n, last);
    }
    match key {
        "hypotheses" => {
            let v: Vec<usize> = list(key, value)?;
            resize(&mut cfg.stages, v.len());
            cfg.stages.iter_mut().zip(v).for_each(|(s, x)| s.hypotheses = x);
        }
        "intervals" => {
            let v: Vec<f64> = list(key, value)?;
            resize(&mut cfg.stages, v.len());
            cfg.stages.iter_mut().zip(v).for_each(|(s, x)| s.interval_multiplier = x);
        }
        "divisors" => {
            let v: Vec<usize> = list(key, value)?;
            resize(&mut cfg.stages, v.len());
            cfg.stages.iter_mut().zip(v).for_each(|(s, x)| s.divisor = x);
        }
        "theta" => cfg.theta = num(key, value)?,
        "fusion" => cfg.fusion = num(key, value)?,
        "lambda" => cfg.lambda = num(key, value)?,
        "patch-k" => cfg.patch_k = num(key, value)?,
        "n-views" => cfg.n_views = num(key, value)?,
        "temperature" => cfg.temperature = num(key, value)?,
        "smoothing-radius" => cfg.smoothing_radius = num(key, value)?,
        "weight-mode" => cfg.weight_mode = value.parse()?,
        "eps-px" => cfg.filter.eps_px = num(key, value)?,
        "eps-rel" => cfg.filter.eps_rel = num(key, value)?,
        "min-views" => cfg.filter.min_views = num(key, value)?,
        "min-conf" => cfg.filter.min_conf = num(key, value)?,
        _ => return Err(Error::InvalidInput(format!("unknown setting '{key}'"))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn applies_settings() {
        let text = "# comment\ntheta = 0.2\nhypotheses = 48, 16, 4\nmin-views=2\nweight-mode = uniform\n";
        let mut cfg = PipelineConfig::default();
        for (_, k, v) in parse_config(text, Path::new("c.cfg")).unwrap() {
            apply_setting(&mut cfg, &k, &v).unwrap();
        }
        assert_eq!(cfg.theta, 0.2);
        assert_eq!(cfg.stages.iter().map(|s| s.hypotheses).collect::<Vec<_>>(), vec![48, 16, 4]);
        assert_eq!(cfg.stages[0].interval_multiplier, 4.0);
        assert_eq!(cfg.filter.min_views, 2);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_key_reports_line() {
        let r = parse_config("theta=0.1\n\nbogus = 3\n", Path::new("c.cfg"));
        assert!(matches!(r, Err(Error::Format { line: 3, .. })));
    }
}
