//! Disparity-map quality metrics and the correct-pixels-per-second score.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DepthMap, Mask};

/// Benchmark threshold for BadPix.
pub const DEFAULT_BADPIX_THRESHOLD: f32 = 0.07;

fn check_dims(result: &DepthMap, gt: &DepthMap, mask: Option<&Mask>) -> Result<()> {
    if result.width() != gt.width() || result.height() != gt.height() {
        return Err(Error::input(format!(
            "result is {}x{} but ground truth is {}x{}",
            result.width(),
            result.height(),
            gt.width(),
            gt.height()
        )));
    }
    if let Some(m) = mask {
        if m.width() != gt.width() || m.height() != gt.height() {
            return Err(Error::input("evaluation mask does not match ground truth size"));
        }
    }
    Ok(())
}

/// Pixel indices that are evaluated: valid ground truth, inside the mask.
fn evaluated<'a>(gt: &'a DepthMap, mask: Option<&'a Mask>) -> impl Iterator<Item = usize> + 'a {
    (0..gt.len()).filter(move |&i| gt.valid_mask()[i] && mask.is_none_or(|m| m.data()[i]))
}

/// Percentage of evaluated pixels with `|result - gt| > threshold`.
/// Invalid result pixels count as bad.
pub fn badpix(result: &DepthMap, gt: &DepthMap, threshold: f32, mask: Option<&Mask>) -> Result<f64> {
    check_dims(result, gt, mask)?;
    let (mut bad, mut total) = (0usize, 0usize);
    for i in evaluated(gt, mask) {
        total += 1;
        let g = gt.values()[i];
        match result.get_index(i) {
            Some(r) if (r - g).abs() <= threshold => {}
            _ => bad += 1,
        }
    }
    if total == 0 {
        return Err(Error::Metric("no pixels to evaluate".into()));
    }
    Ok(100.0 * bad as f64 / total as f64)
}

/// Mean squared error over evaluated pixels where the result is valid.
pub fn mse(result: &DepthMap, gt: &DepthMap, mask: Option<&Mask>) -> Result<f64> {
    check_dims(result, gt, mask)?;
    let (mut sum, mut total) = (0.0f64, 0usize);
    for i in evaluated(gt, mask) {
        if let Some(r) = result.get_index(i) {
            let e = r as f64 - gt.values()[i] as f64;
            sum += e * e;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::Metric("no pixels to evaluate".into()));
    }
    Ok(sum / total as f64)
}

/// Correctly computed pixels per second: `(100 - badpix) / runtime`.
pub fn m_metric(badpix: f64, runtime_seconds: f64) -> Result<f64> {
    if !(runtime_seconds > 0.0) {
        return Err(Error::Metric(format!("runtime must be positive, got {runtime_seconds}")));
    }
    Ok((100.0 - badpix) / runtime_seconds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub badpix_percent: f64,
    pub mse: f64,
    pub runtime_seconds: Option<f64>,
    /// `(100 - badpix) / runtime`, in percent per second; needs a runtime.
    pub m_metric: Option<f64>,
    pub evaluated_pixel_count: usize,
    pub threshold: f32,
}

impl EvalReport {
    pub fn compute(
        result: &DepthMap,
        gt: &DepthMap,
        threshold: f32,
        runtime_seconds: Option<f64>,
        mask: Option<&Mask>,
    ) -> Result<Self> {
        let badpix_percent = badpix(result, gt, threshold, mask)?;
        Ok(Self {
            badpix_percent,
            mse: mse(result, gt, mask)?,
            runtime_seconds,
            m_metric: runtime_seconds.map(|r| m_metric(badpix_percent, r)).transpose()?,
            evaluated_pixel_count: evaluated(gt, mask).count(),
            threshold,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Flat `key: value` block.
impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "badpix_percent: {:.3}", self.badpix_percent)?;
        writeln!(f, "mse: {:.6}", self.mse)?;
        match (self.runtime_seconds, self.m_metric) {
            (Some(r), Some(m)) => {
                writeln!(f, "runtime_seconds: {r:.3}")?;
                writeln!(f, "m_metric: {m:.3}")?;
            }
            _ => {
                writeln!(f, "runtime_seconds: -")?;
                writeln!(f, "m_metric: -")?;
            }
        }
        writeln!(f, "evaluated_pixel_count: {}", self.evaluated_pixel_count)?;
        write!(f, "threshold: {}", self.threshold)
    }
}

/// Median; even counts average the two central values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}
