//! Benchmark runs over scene directories: per-scene quality, median timing,
//! border coverage and hypothesis accounting.

use std::fmt::{self, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::estimator::{Estimate, EstimatorRegistry, FullScan, SgmLineFit, DepthEstimator};
use crate::io::scene::{load_scene, Scene};
use crate::metrics::{self, DEFAULT_BADPIX_THRESHOLD};
use crate::pipeline::LineFitStats;
use crate::timing::StageTiming;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneResult {
    pub scene: String,
    /// `None` without ground truth.
    pub badpix: Option<f64>,
    pub mse: Option<f64>,
    /// Median wall-clock over repetitions, decode excluded.
    pub runtime_seconds: f64,
    pub m_metric: Option<f64>,
    /// Fraction of pixels with `D_brd != 0`.
    pub bordered_fraction: Option<f64>,
    pub stats: Option<LineFitStats>,
    /// Every repetition produced the same map.
    pub deterministic: bool,
    pub timing: StageTiming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub badpix: Option<f64>,
    pub runtime_seconds: Option<f64>,
    pub m_metric: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub method: String,
    pub repetitions: usize,
    pub threshold: f32,
    pub scenes: Vec<SceneResult>,
    pub median: SummaryRow,
    pub average: SummaryRow,
    /// Scene and error that stopped the run; earlier rows are kept.
    pub aborted: Option<(String, String)>,
}

fn summarize(rows: &[SceneResult], f: fn(&[f64]) -> Option<f64>) -> SummaryRow {
    let col = |get: fn(&SceneResult) -> Option<f64>| {
        let v: Vec<f64> = rows.iter().filter_map(get).collect();
        f(&v)
    };
    SummaryRow {
        badpix: col(|r| r.badpix),
        runtime_seconds: col(|r| Some(r.runtime_seconds)),
        m_metric: col(|r| r.m_metric),
    }
}

/// Runs one loaded scene `repetitions` times.
pub fn run_scene(
    scene: &Scene,
    estimator: &dyn DepthEstimator,
    config: &PipelineConfig,
    repetitions: usize,
) -> Result<SceneResult> {
    if repetitions == 0 {
        return Err(Error::config("repetitions must be at least 1"));
    }
    let range = config.range.unwrap_or(scene.range);
    let mut runs: Vec<Estimate> = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let mut e = estimator.estimate(&scene.light_field, range, config)?;
        if let Some(s) = e.stats {
            if s.evaluations != s.expected_evaluations {
                return Err(Error::internal(format!(
                    "counted {} hypothesis evaluations, border map accounts for {}",
                    s.evaluations, s.expected_evaluations
                )));
            }
        }
        e.intermediates = e.intermediates.filter(|_| runs.is_empty());
        runs.push(e);
    }
    let deterministic = runs.iter().all(|r| r.depth == runs[0].depth);
    let timings: Vec<StageTiming> = runs.iter().map(|r| r.timing.clone()).collect();
    let timing = StageTiming::median_of(&timings);
    let first = &runs[0];
    let runtime = timing.total_seconds.max(f64::MIN_POSITIVE);
    let (badpix, mse) = match &scene.gt {
        Some(gt) => (
            Some(metrics::badpix(&first.depth, gt, DEFAULT_BADPIX_THRESHOLD, scene.mask.as_ref())?),
            Some(metrics::mse(&first.depth, gt, scene.mask.as_ref())?),
        ),
        None => (None, None),
    };
    Ok(SceneResult {
        scene: scene.name(),
        m_metric: badpix.map(|b| metrics::m_metric(b, runtime)).transpose()?,
        badpix,
        mse,
        runtime_seconds: runtime,
        bordered_fraction: first.intermediates.as_ref().map(|im| im.borders.bordered_fraction()),
        stats: first.stats,
        deterministic,
        timing,
    })
}

/// Loads and runs each scene in order. Scenes run sequentially; a failure
/// stops the run and is recorded next to the rows completed so far.
pub fn run_benchmark<P: AsRef<Path>>(scenes: &[P], config: &PipelineConfig, repetitions: usize) -> Result<BenchReport> {
    let registry = EstimatorRegistry::builtin();
    let estimator = registry.get(&config.method)?;
    config.validate()?;
    let mut rows = Vec::new();
    let mut aborted = None;
    for dir in scenes {
        let dir = dir.as_ref();
        let outcome = load_scene(dir).and_then(|s| run_scene(&s, estimator, config, repetitions));
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => {
                aborted = Some((dir.display().to_string(), e.to_string()));
                break;
            }
        }
    }
    Ok(BenchReport {
        method: config.method.clone(),
        repetitions,
        threshold: DEFAULT_BADPIX_THRESHOLD,
        median: summarize(&rows, metrics::median),
        average: summarize(&rows, metrics::mean),
        scenes: rows,
        aborted,
    })
}

impl BenchReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn is_complete(&self) -> bool {
        self.aborted.is_none()
    }
}

fn cell(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.prec$}"))
}

/// Columns: scene, BadPix %, MSE, runtime s, M, bordered %, hypotheses scored.
impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<16} {:>8} {:>9} {:>9} {:>8} {:>9} {:>12}",
            "scene", "badpix", "mse", "runtime", "M", "bordered", "evaluations"
        )?;
        for r in &self.scenes {
            writeln!(
                f,
                "{:<16} {:>8} {:>9} {:>9.3} {:>8} {:>9} {:>12}{}",
                r.scene,
                cell(r.badpix, 3),
                cell(r.mse, 4),
                r.runtime_seconds,
                cell(r.m_metric, 3),
                cell(r.bordered_fraction.map(|b| 100.0 * b), 1),
                r.stats.map_or("-".into(), |s| s.evaluations.to_string()),
                if r.deterministic { "" } else { "  NONDETERMINISTIC" }
            )?;
        }
        for (label, row) in [("Median", &self.median), ("Average", &self.average)] {
            writeln!(
                f,
                "{:<16} {:>8} {:>9} {:>9} {:>8}",
                label,
                cell(row.badpix, 3),
                "",
                cell(row.runtime_seconds, 3),
                cell(row.m_metric, 3)
            )?;
        }
        write!(f, "runtime: pipeline wall clock, median of {} runs, decode excluded", self.repetitions)?;
        if let Some((scene, err)) = &self.aborted {
            write!(f, "\nPARTIAL: stopped at {scene}: {err}")?;
        }
        Ok(())
    }
}

/// Bordered pipeline against the full-scan line fit on one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub hypotheses: usize,
    pub lambda: u32,
    pub bordered_fraction: f64,
    pub bordered_evaluations: u64,
    pub full_scan_evaluations: u64,
    /// `full_scan_evaluations / bordered_evaluations`.
    pub hypothesis_ratio: f64,
    /// Line-fit stage seconds, median over repetitions.
    pub bordered_linefit_seconds: f64,
    pub full_scan_linefit_seconds: f64,
    pub measured_speedup: f64,
}

impl SpeedupReport {
    /// Ratio predicted from coverage alone:
    /// `(N + 1) / (f·(2λ + 1) + (1 - f)·(N + 1))` for bordered fraction `f`.
    /// Clamped windows near the range ends make the real ratio slightly larger.
    pub fn predicted_ratio(&self) -> f64 {
        let full = self.hypotheses as f64 + 1.0;
        let f = self.bordered_fraction;
        full / (f * (2.0 * self.lambda as f64 + 1.0) + (1.0 - f) * full)
    }
}

pub fn compare_full_scan(scene: &Scene, config: &PipelineConfig, repetitions: usize) -> Result<SpeedupReport> {
    let bordered = run_scene(scene, &SgmLineFit, config, repetitions)?;
    let full = run_scene(scene, &FullScan, config, repetitions)?;
    let (Some(b), Some(fs)) = (bordered.stats, full.stats) else {
        return Err(Error::internal("line-fit statistics missing"));
    };
    let linefit = |r: &SceneResult| r.timing.stage("linefit").map_or(0.0, |s| s.seconds);
    let (bs, fss) = (linefit(&bordered), linefit(&full));
    Ok(SpeedupReport {
        hypotheses: b.hypotheses,
        lambda: b.lambda,
        bordered_fraction: bordered.bordered_fraction.unwrap_or(0.0),
        bordered_evaluations: b.evaluations,
        full_scan_evaluations: fs.evaluations,
        hypothesis_ratio: fs.evaluations as f64 / b.evaluations.max(1) as f64,
        bordered_linefit_seconds: bs,
        full_scan_linefit_seconds: fss,
        measured_speedup: if bs > 0.0 { fss / bs } else { f64::INFINITY },
    })
}

impl fmt::Display for SpeedupReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        writeln!(s, "hypotheses N+1:       {}", self.hypotheses + 1)?;
        writeln!(s, "bordered fraction:    {:.3}", self.bordered_fraction)?;
        writeln!(
            s,
            "evaluations:          {} bordered, {} full scan",
            self.bordered_evaluations, self.full_scan_evaluations
        )?;
        writeln!(
            s,
            "hypothesis ratio:     {:.2} (coverage predicts {:.2})",
            self.hypothesis_ratio,
            self.predicted_ratio()
        )?;
        write!(
            s,
            "line-fit speedup:     {:.2} ({:.3} s vs {:.3} s)",
            self.measured_speedup, self.full_scan_linefit_seconds, self.bordered_linefit_seconds
        )?;
        f.write_str(&s)
    }
}
