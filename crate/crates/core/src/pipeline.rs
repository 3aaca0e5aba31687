//! The staged depth pipeline: stereo prior between extreme views, fusion in
//! the center view, and bordered line fitting.

use std::time::Instant;

use crate::census::{self, ShiftSign};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::filter;
use crate::fusion::{self, BorderMap, SyntheticDepth};
use crate::linefit::{self, HypothesisGrid};
use crate::sgm::{self, LrLookup};
use crate::timing::StageTiming;
use crate::types::{Axis, ColorImage, DepthMap, DisparityRange, LightField, Mask, ViewIndex};

/// Disparity maps and consistency masks for one matched view pair.
#[derive(Debug, Clone)]
pub struct StereoMaps {
    /// Reference = first view (left or top).
    pub first_init: DepthMap,
    pub first_sub: DepthMap,
    /// Reference = second view (right or bottom).
    pub second_init: DepthMap,
    pub second_sub: DepthMap,
    pub first_consistency: Mask,
    pub second_consistency: Mask,
}

/// Everything the pipeline produces on the way to the final map.
#[derive(Debug, Clone)]
pub struct Intermediates {
    pub left_right: StereoMaps,
    pub top_bottom: Option<StereoMaps>,
    pub synthetic: SyntheticDepth,
    /// `CMT_syn`.
    pub confidence: Mask,
    pub edges: Mask,
    pub borders: BorderMap,
    /// Line-fit result before median filtering, full-baseline disparity.
    pub raw_fit: DepthMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LineFitStats {
    /// `N`; windows range over `0..=N`.
    pub hypotheses: usize,
    pub lambda: u32,
    /// Hypotheses actually scored.
    pub evaluations: u64,
    /// Σ (B_H - B_L + 1) over the border map.
    pub expected_evaluations: u64,
    pub bordered_pixels: usize,
    pub pixels: usize,
}

/// Matches `first` against `second` in both directions.
///
/// With the crate's sign convention a pixel `x` of the first view matches
/// `x - D` in the second, and a pixel `x` of the second matches `x + D` in
/// the first; both maps therefore share one sign.
pub fn stereo_pair(
    first: &ColorImage,
    second: &ColorImage,
    range: DisparityRange,
    axis: Axis,
    config: &PipelineConfig,
    timing: &mut StageTiming,
) -> Result<StereoMaps> {
    let workers = config.threads;
    let px = (first.width() * first.height()) as u64;
    let (g1, g2) = (first.to_grayscale(), second.to_grayscale());
    let pattern = &config.census_pattern;
    let (c1, c2) = timing.time("census", 2 * px, || -> Result<_> {
        Ok((
            census::census_transform_par(&g1, pattern, workers)?,
            census::census_transform_par(&g2, pattern, workers)?,
        ))
    })?;
    let (v1, v2) = timing.time("cost", 2 * px, || -> Result<_> {
        Ok((
            census::build_cost_volume_par(&c1, &c2, range, axis, ShiftSign::Negative, workers)?,
            census::build_cost_volume_par(&c2, &c1, range, axis, ShiftSign::Positive, workers)?,
        ))
    })?;
    let directions = sgm::paths(config.num_paths)?;
    let (a1, a2) = timing.time("aggregate", 2 * px, || -> Result<_> {
        Ok((
            sgm::aggregate_paths(&v1, config.p1, config.p2, directions, workers)?,
            sgm::aggregate_paths(&v2, config.p1, config.p2, directions, workers)?,
        ))
    })?;
    drop((v1, v2));
    let (first_init, second_init) =
        timing.time("wta", 2 * px, || (sgm::winner_takes_all(&a1), sgm::winner_takes_all(&a2)));
    let (first_sub, second_sub) = timing.time("subpixel", 2 * px, || -> Result<_> {
        Ok((
            sgm::subpixel_refine(&a1, &first_init)?,
            sgm::subpixel_refine(&a2, &second_init)?,
        ))
    })?;
    let (look1, look2) = if config.literal_lr_check {
        (LrLookup::Literal, LrLookup::Literal)
    } else {
        (
            LrLookup::Correspondence {
                axis,
                sign: ShiftSign::Negative,
            },
            LrLookup::Correspondence {
                axis,
                sign: ShiftSign::Positive,
            },
        )
    };
    let (first_consistency, second_consistency) = timing.time("lr_check", 2 * px, || -> Result<_> {
        Ok((
            sgm::lr_check(&first_sub, &second_sub, config.phi, look1)?,
            sgm::lr_check(&second_sub, &first_sub, config.phi, look2)?,
        ))
    })?;
    Ok(StereoMaps {
        first_init,
        first_sub,
        second_init,
        second_sub,
        first_consistency,
        second_consistency,
    })
}

/// Stereo prior fused in the center view: `D_syn` and `CMT_syn`.
pub struct Prior {
    pub left_right: StereoMaps,
    pub top_bottom: Option<StereoMaps>,
    pub synthetic: SyntheticDepth,
    pub confidence: Mask,
}

pub fn stereo_prior(
    lf: &LightField,
    range: DisparityRange,
    config: &PipelineConfig,
    timing: &mut StageTiming,
) -> Result<Prior> {
    let (n, m) = (lf.n(), lf.m());
    let c = lf.center_index();
    let px = (lf.width() * lf.height()) as u64;
    if config.enable_top_bottom && m < 2 {
        return Err(Error::config(
            "top-bottom matching needs at least two view rows; this light field has one",
        ));
    }

    let (left, right) = (ViewIndex::new(1, c.t), ViewIndex::new(n, c.t));
    let lr = stereo_pair(lf.view(left), lf.view(right), range, Axis::Horizontal, config, timing)?;
    let start = Instant::now();
    let wl = fusion::warp_with_confidence(&lr.first_sub, &lr.first_consistency, left, n, m);
    let wr = fusion::warp_with_confidence(&lr.second_sub, &lr.second_consistency, right, n, m);
    timing.record("warp", start.elapsed(), 2 * px);
    let cmt_lr = fusion::pair_confidence(&wl.confidence, &wr.confidence)?;
    let mut warped = vec![wl.depth, wr.depth];

    let mut top_bottom = None;
    let mut cmt_tb = None;
    if config.enable_top_bottom {
        let ratio = (m - 1) as f64 / (n - 1) as f64;
        let tb_range = range.scaled(ratio);
        let (top, bottom) = (ViewIndex::new(c.s, 1), ViewIndex::new(c.s, m));
        let tb = stereo_pair(lf.view(top), lf.view(bottom), tb_range, Axis::Vertical, config, timing)?;
        // Vertical baseline disparities expressed over the horizontal baseline.
        let to_h = ((n - 1) as f64 / (m - 1) as f64) as f32;
        let start = Instant::now();
        let wt = fusion::warp_with_confidence(&tb.first_sub.scaled(to_h), &tb.first_consistency, top, n, m);
        let wb = fusion::warp_with_confidence(&tb.second_sub.scaled(to_h), &tb.second_consistency, bottom, n, m);
        timing.record("warp", start.elapsed(), 2 * px);
        cmt_tb = Some(fusion::pair_confidence(&wt.confidence, &wb.confidence)?);
        warped.push(wt.depth);
        warped.push(wb.depth);
        top_bottom = Some(tb);
    }

    let start = Instant::now();
    let refs: Vec<&DepthMap> = warped.iter().collect();
    let synthetic = fusion::synthesize(&refs)?;
    let combined = fusion::combine_confidence(&cmt_lr, cmt_tb.as_ref(), config.confidence_rule)?;
    let confidence = Mask::from_fn(lf.width(), lf.height(), |x, y| {
        !config.disable_confidence && combined.get(x, y) && synthetic.depth.get(x, y).is_some()
    });
    timing.record("fuse", start.elapsed(), px);
    Ok(Prior {
        left_right: lr,
        top_bottom,
        synthetic,
        confidence,
    })
}

/// Converts a full-baseline map to per-view-step disparity.
pub fn to_view_step(map: &DepthMap, n: usize) -> DepthMap {
    let steps = (n - 1) as f32;
    let mut out = map.clone();
    for (v, &ok) in out.values_mut().iter_mut().zip(map.valid_mask()) {
        if ok {
            *v /= steps;
        }
    }
    out
}

pub struct PipelineOutput {
    /// `D_final` in per-view-step disparity.
    pub depth: DepthMap,
    pub intermediates: Intermediates,
    pub stats: LineFitStats,
    pub timing: StageTiming,
}

/// Full pipeline: stereo prior, borders, bordered line fit and median filter.
pub fn run(lf: &LightField, range: DisparityRange, config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let total = Instant::now();
    let mut timing = StageTiming::new();
    let px = (lf.width() * lf.height()) as u64;
    let (w, h) = (lf.width(), lf.height());

    let prior = stereo_prior(lf, range, config, &mut timing)?;
    let grid = HypothesisGrid::new(range, lf.n(), config.tau)?;

    let start = Instant::now();
    let edges = fusion::edges_for(
        lf.center_view(),
        config.enable_edge_exclusion,
        config.median_kernel,
        config.sobel_threshold,
    );
    let borders = fusion::compute_borders(
        &prior.synthetic.depth,
        &prior.confidence,
        &edges,
        range,
        grid.hypotheses(),
        config.lambda,
    )?;
    timing.record("borders", start.elapsed(), px);

    let mut raw = vec![0.0f32; w * h];
    let evaluations = timing.time("linefit", px, || {
        linefit::fit_into(lf, &borders, &grid, config.h, config.threads, &mut raw)
    })?;
    let filtered = timing.time("median", px, || filter::median_filter(&raw, w, h, config.median_kernel));
    let depth = to_view_step(&DepthMap::from_values(w, h, filtered)?, lf.n());
    timing.total_seconds = total.elapsed().as_secs_f64();

    let stats = LineFitStats {
        hypotheses: grid.hypotheses(),
        lambda: config.lambda,
        evaluations,
        expected_evaluations: borders.hypothesis_evaluations(),
        bordered_pixels: borders.bordered_pixels(),
        pixels: w * h,
    };
    Ok(PipelineOutput {
        depth,
        intermediates: Intermediates {
            left_right: prior.left_right,
            top_bottom: prior.top_bottom,
            synthetic: prior.synthetic,
            confidence: prior.confidence,
            edges,
            borders,
            raw_fit: DepthMap::from_values(w, h, raw)?,
        },
        stats,
        timing,
    })
}
