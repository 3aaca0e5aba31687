//! Depth estimators behind one trait, registered by name.

use std::time::Instant;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::linefit::{self, HypothesisGrid};
use crate::pipeline::{self, Intermediates, LineFitStats};
use crate::timing::StageTiming;
use crate::types::{DepthMap, DisparityRange, LightField};

#[derive(Debug, Clone)]
pub struct Estimate {
    /// Center-view per-view-step disparity.
    pub depth: DepthMap,
    pub timing: StageTiming,
    pub stats: Option<LineFitStats>,
    pub intermediates: Option<Intermediates>,
}

pub trait DepthEstimator: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn estimate(&self, lf: &LightField, range: DisparityRange, config: &PipelineConfig) -> Result<Estimate>;
}

/// Stereo prior, borders and bordered line fitting.
pub struct SgmLineFit;

impl DepthEstimator for SgmLineFit {
    fn name(&self) -> &'static str {
        "sgm-linefit"
    }

    fn description(&self) -> &'static str {
        "SGM stereo prior bounding a kernel-density line fit"
    }

    fn estimate(&self, lf: &LightField, range: DisparityRange, config: &PipelineConfig) -> Result<Estimate> {
        let out = pipeline::run(lf, range, config)?;
        Ok(Estimate {
            depth: out.depth,
            timing: out.timing,
            stats: Some(out.stats),
            intermediates: Some(out.intermediates),
        })
    }
}

/// Line fit over every hypothesis at every pixel.
pub struct FullScan;

impl DepthEstimator for FullScan {
    fn name(&self) -> &'static str {
        "full-scan"
    }

    fn description(&self) -> &'static str {
        "unbounded line fit over the whole disparity range"
    }

    fn estimate(&self, lf: &LightField, range: DisparityRange, config: &PipelineConfig) -> Result<Estimate> {
        config.validate()?;
        let start = Instant::now();
        let mut timing = StageTiming::new();
        let px = (lf.width() * lf.height()) as u64;
        let grid = HypothesisGrid::new(range, lf.n(), config.tau)?;
        let map = timing.time("linefit", px, || {
            linefit::full_scan_oracle(lf, &grid, config.h, config.median_kernel)
        });
        timing.total_seconds = start.elapsed().as_secs_f64();
        let evaluations = (grid.hypotheses() as u64 + 1) * px;
        Ok(Estimate {
            depth: pipeline::to_view_step(&map, lf.n()),
            timing,
            stats: Some(LineFitStats {
                hypotheses: grid.hypotheses(),
                lambda: config.lambda,
                evaluations,
                expected_evaluations: evaluations,
                bordered_pixels: 0,
                pixels: px as usize,
            }),
            intermediates: None,
        })
    }
}

/// The fused stereo prior alone; holes stay invalid.
pub struct SgmPrior;

impl DepthEstimator for SgmPrior {
    fn name(&self) -> &'static str {
        "sgm-prior"
    }

    fn description(&self) -> &'static str {
        "synthetic center-view depth from the extreme-view stereo pairs"
    }

    fn estimate(&self, lf: &LightField, range: DisparityRange, config: &PipelineConfig) -> Result<Estimate> {
        config.validate()?;
        let start = Instant::now();
        let mut timing = StageTiming::new();
        let prior = pipeline::stereo_prior(lf, range, config, &mut timing)?;
        timing.total_seconds = start.elapsed().as_secs_f64();
        Ok(Estimate {
            depth: pipeline::to_view_step(&prior.synthetic.depth, lf.n()),
            timing,
            stats: None,
            intermediates: None,
        })
    }
}

pub struct EstimatorRegistry {
    entries: Vec<Box<dyn DepthEstimator>>,
}

impl EstimatorRegistry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(SgmLineFit));
        r.register(Box::new(FullScan));
        r.register(Box::new(SgmPrior));
        r
    }

    /// Adds an estimator, replacing any with the same name.
    pub fn register(&mut self, estimator: Box<dyn DepthEstimator>) {
        self.entries.retain(|e| e.name() != estimator.name());
        self.entries.push(estimator);
    }

    pub fn get(&self, name: &str) -> Result<&dyn DepthEstimator> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .map(|e| e.as_ref())
            .ok_or_else(|| Error::UnknownName {
                kind: "estimator",
                name: name.to_string(),
                available: self.names().collect::<Vec<_>>().join(", "),
            })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.iter().map(|e| e.name())
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn DepthEstimator> {
        self.entries.iter().map(|e| e.as_ref())
    }
}

impl Default for EstimatorRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Runs the estimator named by `config.method`.
pub fn estimate(lf: &LightField, range: DisparityRange, config: &PipelineConfig) -> Result<Estimate> {
    EstimatorRegistry::builtin().get(&config.method)?.estimate(lf, range, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::synth::{generate_synthetic, SyntheticSceneSpec};

    #[test]
    fn registry_lookup() {
        let r = EstimatorRegistry::builtin();
        assert_eq!(r.names().collect::<Vec<_>>(), ["sgm-linefit", "full-scan", "sgm-prior"]);
        let err = r.get("nope").err().unwrap();
        assert!(err.to_string().contains("sgm-linefit"), "{err}");
    }

    struct Constant;

    impl DepthEstimator for Constant {
        fn name(&self) -> &'static str {
            "sgm-prior"
        }
        fn description(&self) -> &'static str {
            "constant"
        }
        fn estimate(&self, lf: &LightField, _: DisparityRange, _: &PipelineConfig) -> Result<Estimate> {
            Ok(Estimate {
                depth: DepthMap::filled(lf.width(), lf.height(), 0.0),
                timing: StageTiming::new(),
                stats: None,
                intermediates: None,
            })
        }
    }

    #[test]
    fn register_replaces_by_name() {
        let mut r = EstimatorRegistry::builtin();
        r.register(Box::new(Constant));
        assert_eq!(r.names().count(), 3);
        assert_eq!(r.get("sgm-prior").unwrap().description(), "constant");
    }

    #[test]
    fn estimators_agree_on_a_flat_scene() {
        let spec = SyntheticSceneSpec::plane(5, 24, 0.0, (-1.0, 1.0));
        let scene = generate_synthetic(&spec, 2).unwrap();
        let config = PipelineConfig::default();
        for e in EstimatorRegistry::builtin().iter() {
            let out = e.estimate(&scene.light_field, scene.range, &config).unwrap();
            assert_eq!(out.depth.get(12, 12), Some(0.0), "{}", e.name());
        }
    }
}
