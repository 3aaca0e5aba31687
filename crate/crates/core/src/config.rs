//! Pipeline parameters and the flat `key = value` configuration format.
//!
//! ```text
//! # comments start with '#'
//! p1 = 21
//! p2 = 45
//! census_pattern = sparse24        # registered name, or "dx,dy; dx,dy; ..."
//! enable_top_bottom = false
//! ```
//!
//! Unknown keys are rejected. `d1_max` / `d2_max` override the scene's
//! disparity range (full-baseline pixels).

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::census::{CensusPattern, PatternRegistry};
use crate::error::{Error, Result};
use crate::types::DisparityRange;

/// How the left-right and top-bottom consistency masks are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfidenceRule {
    /// Reliable iff both checks pass.
    Conjunction,
    /// Reliable iff both checks agree (pass or fail alike).
    Equality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Small SGM discontinuity penalty.
    pub p1: u32,
    /// Large SGM discontinuity penalty.
    pub p2: u32,
    /// Consistency threshold in full-baseline pixels.
    pub phi: f32,
    /// Half-width of the line-fit search window, in hypothesis indices.
    pub lambda: u32,
    /// Kernel bandwidth on normalized color.
    pub h: f32,
    /// Line-fit step coefficient; the slope step is `tau / (n - 1)`.
    pub tau: f64,
    pub census_pattern: CensusPattern,
    pub enable_top_bottom: bool,
    pub enable_edge_exclusion: bool,
    pub median_kernel: usize,
    pub num_paths: usize,
    /// Compare disparities at the same pixel instead of the matched pixel.
    pub literal_lr_check: bool,
    pub confidence_rule: ConfidenceRule,
    /// Gradient magnitude (0-255 scale) above which a pixel is an edge.
    pub sobel_threshold: f32,
    /// Treat every pixel as unreliable, so line fitting scans the full range.
    pub disable_confidence: bool,
    /// Overrides the scene's disparity range when set.
    pub range: Option<DisparityRange>,
    pub threads: usize,
    /// Registered estimator name.
    pub method: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            p1: 21,
            p2: 45,
            phi: 3.0,
            lambda: 2,
            h: 0.02,
            tau: 1.0 / 7.0,
            census_pattern: CensusPattern::sparse24(),
            enable_top_bottom: false,
            enable_edge_exclusion: false,
            median_kernel: 3,
            num_paths: 8,
            literal_lr_check: false,
            confidence_rule: ConfidenceRule::Conjunction,
            sobel_threshold: 48.0,
            disable_confidence: false,
            range: None,
            threads: 1,
            method: "sgm-linefit".to_string(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.p2 <= self.p1 {
            return fail(format!("p2 ({}) must exceed p1 ({})", self.p2, self.p1));
        }
        if self.p2 > 10_000 {
            return fail(format!("p2 ({}) is out of range", self.p2));
        }
        if !(self.phi > 0.0) {
            return fail(format!("phi must be positive, got {}", self.phi));
        }
        if !(self.h > 0.0) {
            return fail(format!("h must be positive, got {}", self.h));
        }
        if !(self.tau > 0.0) {
            return fail(format!("tau must be positive, got {}", self.tau));
        }
        if self.median_kernel == 0 || self.median_kernel % 2 == 0 {
            return fail(format!("median_kernel must be odd, got {}", self.median_kernel));
        }
        if self.num_paths != 4 && self.num_paths != 8 {
            return fail(format!("num_paths must be 4 or 8, got {}", self.num_paths));
        }
        if self.census_pattern.is_empty() {
            return fail("census pattern is empty".into());
        }
        if self.threads == 0 {
            return fail("threads must be at least 1".into());
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        text.parse()
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let patterns = PatternRegistry::builtin();
        let mut d1 = self.range.map(|r| r.d1_max);
        let mut d2 = self.range.map(|r| r.d2_max);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let at = |e: Error| Error::config(format!("line {}: {key}: {e}", lineno + 1));
            match key {
                "p1" => self.p1 = parse(value).map_err(at)?,
                "p2" => self.p2 = parse(value).map_err(at)?,
                "phi" => self.phi = parse(value).map_err(at)?,
                "lambda" => self.lambda = parse(value).map_err(at)?,
                "h" => self.h = parse(value).map_err(at)?,
                "tau" => self.tau = parse_fraction(value).map_err(at)?,
                "census_pattern" => self.census_pattern = patterns.resolve(value).map_err(at)?,
                "enable_top_bottom" => self.enable_top_bottom = parse(value).map_err(at)?,
                "enable_edge_exclusion" => self.enable_edge_exclusion = parse(value).map_err(at)?,
                "median_kernel" => self.median_kernel = parse(value).map_err(at)?,
                "num_paths" => self.num_paths = parse(value).map_err(at)?,
                "literal_lr_check" => self.literal_lr_check = parse(value).map_err(at)?,
                "confidence_rule" => {
                    self.confidence_rule = match value {
                        "conjunction" => ConfidenceRule::Conjunction,
                        "equality" => ConfidenceRule::Equality,
                        other => return Err(at(Error::config(format!("unknown rule `{other}`")))),
                    }
                }
                "sobel_threshold" => self.sobel_threshold = parse(value).map_err(at)?,
                "disable_confidence" => self.disable_confidence = parse(value).map_err(at)?,
                "d1_max" => d1 = Some(parse(value).map_err(at)?),
                "d2_max" => d2 = Some(parse(value).map_err(at)?),
                "threads" => self.threads = parse(value).map_err(at)?,
                "method" => self.method = value.to_string(),
                other => return Err(Error::config(format!("line {}: unknown key `{other}`", lineno + 1))),
            }
        }
        self.range = match (d1, d2) {
            (None, None) => None,
            (Some(a), Some(b)) => Some(DisparityRange::new(a, b)?),
            _ => return Err(Error::config("d1_max and d2_max must be given together")),
        };
        Ok(())
    }

    /// Renders the configuration in the format accepted by [`PipelineConfig::apply_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let pattern = if PatternRegistry::builtin().get(self.census_pattern.name()).ok().as_ref()
            == Some(&self.census_pattern)
        {
            self.census_pattern.name().to_string()
        } else {
            self.census_pattern
                .offsets()
                .iter()
                .map(|(i, j)| format!("{i},{j}"))
                .collect::<Vec<_>>()
                .join("; ")
        };
        let rule = match self.confidence_rule {
            ConfidenceRule::Conjunction => "conjunction",
            ConfidenceRule::Equality => "equality",
        };
        let _ = writeln!(out, "p1 = {}", self.p1);
        let _ = writeln!(out, "p2 = {}", self.p2);
        let _ = writeln!(out, "phi = {}", self.phi);
        let _ = writeln!(out, "lambda = {}", self.lambda);
        let _ = writeln!(out, "h = {}", self.h);
        let _ = writeln!(out, "tau = {}", self.tau);
        let _ = writeln!(out, "census_pattern = {pattern}");
        let _ = writeln!(out, "enable_top_bottom = {}", self.enable_top_bottom);
        let _ = writeln!(out, "enable_edge_exclusion = {}", self.enable_edge_exclusion);
        let _ = writeln!(out, "median_kernel = {}", self.median_kernel);
        let _ = writeln!(out, "num_paths = {}", self.num_paths);
        let _ = writeln!(out, "literal_lr_check = {}", self.literal_lr_check);
        let _ = writeln!(out, "confidence_rule = {rule}");
        let _ = writeln!(out, "sobel_threshold = {}", self.sobel_threshold);
        let _ = writeln!(out, "disable_confidence = {}", self.disable_confidence);
        if let Some(r) = self.range {
            let _ = writeln!(out, "d1_max = {}", r.d1_max);
            let _ = writeln!(out, "d2_max = {}", r.d2_max);
        }
        let _ = writeln!(out, "threads = {}", self.threads);
        let _ = writeln!(out, "method = {}", self.method);
        out
    }
}

impl FromStr for PipelineConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse<T: FromStr>(value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("cannot parse `{value}`")))
}

/// Accepts `0.25` or `1/4`.
fn parse_fraction(value: &str) -> Result<f64> {
    match value.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (parse(a.trim())?, parse(b.trim())?);
            if b == 0.0 {
                return Err(Error::config("division by zero"));
            }
            Ok(a / b)
        }
        None => parse(value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!((c.p1, c.p2, c.lambda, c.median_kernel, c.num_paths), (21, 45, 2, 3, 8));
        assert_eq!(c.phi, 3.0);
        assert_eq!(c.h, 0.02);
        assert!((c.tau - 1.0 / 7.0).abs() < 1e-15);
        assert!(!c.enable_top_bottom && !c.enable_edge_exclusion);
    }

    #[test]
    fn parses_flat_text() {
        let c: PipelineConfig = "p1 = 10\np2=30 # comment\ntau = 1/5\ncensus_pattern = dense5x5\nd1_max=4\nd2_max=6\nconfidence_rule = equality\n"
            .parse()
            .unwrap();
        assert_eq!((c.p1, c.p2), (10, 30));
        assert!((c.tau - 0.2).abs() < 1e-15);
        assert_eq!(c.census_pattern.len(), 24);
        assert_eq!(c.range, Some(DisparityRange { d1_max: 4, d2_max: 6 }));
        assert_eq!(c.confidence_rule, ConfidenceRule::Equality);
    }

    #[test]
    fn text_round_trip() {
        let mut c = PipelineConfig::default();
        c.census_pattern = CensusPattern::parse_offsets("1,0; 0,1; -2,-2").unwrap();
        c.range = Some(DisparityRange { d1_max: 3, d2_max: 9 });
        c.enable_top_bottom = true;
        let back: PipelineConfig = c.to_text().parse().unwrap();
        assert_eq!(back.census_pattern.offsets(), c.census_pattern.offsets());
        assert_eq!(back.range, c.range);
        assert!(back.enable_top_bottom);
        let d: PipelineConfig = PipelineConfig::default().to_text().parse().unwrap();
        assert_eq!(d, PipelineConfig::default());
    }

    #[test]
    fn rejects_bad_values() {
        assert!("p1 = 50".parse::<PipelineConfig>().is_err());
        assert!("median_kernel = 4".parse::<PipelineConfig>().is_err());
        assert!("num_paths = 6".parse::<PipelineConfig>().is_err());
        assert!("bogus = 1".parse::<PipelineConfig>().is_err());
        assert!("h = 0".parse::<PipelineConfig>().is_err());
        assert!("d1_max = 3".parse::<PipelineConfig>().is_err());
        assert!("census_pattern = nope".parse::<PipelineConfig>().is_err());
        assert!("p1 21".parse::<PipelineConfig>().is_err());
    }
}
