//! Kernel-density line fitting through the 4D light field.
//!
//! For a center-view pixel `(u, v)` and a per-view-step disparity `d`, every
//! view `(s, t)` is sampled at `(u + (ŝ - s)·d, v + (t̂ - t)·d)` and compared
//! with the center color through the Epanechnikov kernel
//! `K(x) = max(0, 1 - |x|²/h²)`. The hypothesis with the highest summed
//! density wins.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::filter;
use crate::fusion::BorderMap;
use crate::par;
use crate::types::{ColorImage, DepthMap, DisparityRange, LightField};

/// Discrete line-fit hypotheses `k = 0..=N` spanning the disparity range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisGrid {
    hypotheses: usize,
    range: DisparityRange,
    view_steps: usize,
}

impl HypothesisGrid {
    /// `N` is the smallest count whose per-view step does not exceed
    /// `tau / (views - 1)`, so hypotheses tile the range exactly.
    pub fn new(range: DisparityRange, views_per_row: usize, tau: f64) -> Result<Self> {
        if views_per_row < 2 {
            return Err(Error::config("line fitting needs at least two views per row"));
        }
        if !(tau > 0.0) {
            return Err(Error::config("tau must be positive"));
        }
        let view_steps = views_per_row - 1;
        let nominal_step = tau / view_steps as f64;
        let window = range.span() as f64 / view_steps as f64;
        let hypotheses = ((window / nominal_step) - 1e-9).ceil().max(1.0) as usize;
        Ok(Self {
            hypotheses,
            range,
            view_steps,
        })
    }

    /// A grid with an explicit hypothesis count.
    pub fn with_hypotheses(range: DisparityRange, views_per_row: usize, hypotheses: usize) -> Result<Self> {
        if views_per_row < 2 || hypotheses < 1 {
            return Err(Error::config("grid needs two views per row and one hypothesis step"));
        }
        Ok(Self {
            hypotheses,
            range,
            view_steps: views_per_row - 1,
        })
    }

    /// `N`; valid indices are `0..=N`.
    pub fn hypotheses(&self) -> usize {
        self.hypotheses
    }

    pub fn range(&self) -> DisparityRange {
        self.range
    }

    /// `k_brd = N / (d1_max + d2_max)`.
    pub fn k_brd(&self) -> f64 {
        self.hypotheses as f64 / self.range.span() as f64
    }

    /// Depth step `DS` in per-view-step disparity.
    pub fn step(&self) -> f64 {
        self.range.span() as f64 / self.view_steps as f64 / self.hypotheses as f64
    }

    /// Depth window `DW` in per-view-step disparity.
    pub fn window(&self) -> f64 {
        self.range.span() as f64 / self.view_steps as f64
    }

    /// Full-baseline disparity of index `k`: `k / k_brd - d1_max`.
    pub fn disparity(&self, k: usize) -> f64 {
        k as f64 * self.range.span() as f64 / self.hypotheses as f64 - self.range.d1_max as f64
    }

    /// Per-view-step disparity (line slope) of index `k`.
    pub fn slope(&self, k: usize) -> f32 {
        (self.disparity(k) / self.view_steps as f64) as f32
    }

    pub fn view_steps(&self) -> usize {
        self.view_steps
    }
}

/// Density evaluator bound to one light field.
pub(crate) struct Scorer<'a> {
    views: &'a [ColorImage],
    n: usize,
    /// `(ŝ - s, t̂ - t)` per view, row-major.
    offsets: Vec<(f32, f32)>,
    center: &'a ColorImage,
    inv_h2: f32,
    max_x: f32,
    max_y: f32,
    /// Per-view-step slope of every hypothesis, when bound to a grid.
    slopes: Vec<f32>,
}

impl<'a> Scorer<'a> {
    pub(crate) fn new(lf: &'a LightField, h: f32) -> Self {
        let c = lf.center_index();
        let offsets = (1..=lf.m())
            .flat_map(|t| (1..=lf.n()).map(move |s| ((c.s as f32 - s as f32), (c.t as f32 - t as f32))))
            .collect();
        Self {
            views: lf.views(),
            n: lf.n(),
            offsets,
            center: lf.center_view(),
            inv_h2: 1.0 / (h * h),
            max_x: (lf.width() - 1) as f32,
            max_y: (lf.height() - 1) as f32,
            slopes: Vec::new(),
        }
    }

    fn for_grid(lf: &'a LightField, h: f32, grid: &HypothesisGrid) -> Self {
        let mut scorer = Self::new(lf, h);
        scorer.slopes = (0..=grid.hypotheses()).map(|k| grid.slope(k)).collect();
        scorer
    }

    /// `S(u, v, d)`, summed with `t` outer and `s` inner.
    #[inline]
    pub(crate) fn score(&self, u: usize, v: usize, d: f32) -> f32 {
        let c = self.center.pixel(u, v);
        let mut total = 0.0f32;
        for (i, &(ds, dt)) in self.offsets.iter().enumerate() {
            let x = u as f32 + ds * d;
            let y = v as f32 + dt * d;
            if x < 0.0 || y < 0.0 || x > self.max_x || y > self.max_y {
                continue;
            }
            let view = &self.views[i];
            let p = bilinear(view, x, y);
            let l = ((p[0] - c[0]) * (p[0] - c[0]) + (p[1] - c[1]) * (p[1] - c[1]) + (p[2] - c[2]) * (p[2] - c[2]))
                * self.inv_h2;
            total += epanechnikov(l);
        }
        debug_assert!(total <= (self.n * (self.offsets.len() / self.n)) as f32);
        total
    }

    /// Scores hypotheses `lo..=hi` into `out`, view by view. Each score
    /// accumulates views in the same order as [`Scorer::score`], so the
    /// results are bit-identical; only the memory access order changes.
    fn score_window(&self, u: usize, v: usize, lo: u32, hi: u32, out: &mut Vec<f32>) {
        let c = self.center.pixel(u, v);
        let slopes = &self.slopes[lo as usize..=hi as usize];
        out.clear();
        out.resize(slopes.len(), 0.0);
        for (i, &(ds, dt)) in self.offsets.iter().enumerate() {
            let view = &self.views[i];
            for (slot, &d) in out.iter_mut().zip(slopes) {
                let x = u as f32 + ds * d;
                let y = v as f32 + dt * d;
                if x < 0.0 || y < 0.0 || x > self.max_x || y > self.max_y {
                    continue;
                }
                let p = bilinear(view, x, y);
                let l = ((p[0] - c[0]) * (p[0] - c[0])
                    + (p[1] - c[1]) * (p[1] - c[1])
                    + (p[2] - c[2]) * (p[2] - c[2]))
                    * self.inv_h2;
                *slot += epanechnikov(l);
            }
        }
    }
}

/// `1 - l` for `l ≤ 1`, else 0, where `l = |x|²/h²`.
#[inline]
pub fn epanechnikov(l: f32) -> f32 {
    if l <= 1.0 {
        1.0 - l
    } else {
        0.0
    }
}

/// Kernel value for a color difference vector.
pub fn kernel(diff: [f32; 3], h: f32) -> f32 {
    let inv_h2 = 1.0 / (h * h);
    epanechnikov((diff[0] * diff[0] + diff[1] * diff[1] + diff[2] * diff[2]) * inv_h2)
}

#[inline]
fn bilinear(img: &ColorImage, x: f32, y: f32) -> [f32; 3] {
    let (w, h) = (img.width(), img.height());
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let fx = x - x0 as f32;
    let fy = y - y0 as f32;
    let dx = if x0 + 1 < w { 3 } else { 0 };
    let dy = if y0 + 1 < h { 3 * w } else { 0 };
    let i = (y0 * w + x0) * 3;
    let data = img.data();
    let (a, b) = (&data[i..i + 3], &data[i + dx..i + dx + 3]);
    let (c, d) = (&data[i + dy..i + dy + 3], &data[i + dy + dx..i + dy + dx + 3]);
    let mut out = [0.0f32; 3];
    for ch in 0..3 {
        let top = a[ch] + (b[ch] - a[ch]) * fx;
        let bottom = c[ch] + (d[ch] - c[ch]) * fx;
        out[ch] = top + (bottom - top) * fy;
    }
    out
}

/// Density score of the line through center pixel `(u, v)` with
/// per-view-step disparity `d`. Out-of-frame samples contribute nothing;
/// fractional positions are bilinearly interpolated.
pub fn density_score(lf: &LightField, u: usize, v: usize, d: f32, h: f32) -> f32 {
    Scorer::new(lf, h).score(u, v, d)
}

/// Reusable per-worker storage for the scores of one pixel.
#[derive(Debug)]
pub struct ScoreBuffer {
    scores: Vec<f32>,
}

impl ScoreBuffer {
    pub fn new(grid: &HypothesisGrid) -> Self {
        Self {
            scores: Vec::with_capacity(grid.hypotheses() + 1),
        }
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }
}

fn fit_with(
    scorer: &Scorer<'_>,
    u: usize,
    v: usize,
    window: (u32, u32),
    grid: &HypothesisGrid,
    buffer: &mut ScoreBuffer,
) -> Result<usize> {
    let (lo, hi) = window;
    if lo > hi || hi as usize > grid.hypotheses() {
        return Err(Error::internal(format!(
            "border window ({lo}, {hi}) outside [0, {}] at ({u}, {v})",
            grid.hypotheses()
        )));
    }
    scorer.score_window(u, v, lo, hi, &mut buffer.scores);
    let mut best = 0;
    for (i, &s) in buffer.scores.iter().enumerate() {
        if s > buffer.scores[best] {
            best = i;
        }
    }
    Ok(lo as usize + best)
}

/// Best hypothesis within `window` for one pixel, as full-baseline disparity.
/// Ties resolve to the lower index.
pub fn fit_pixel(
    lf: &LightField,
    u: usize,
    v: usize,
    window: (u32, u32),
    grid: &HypothesisGrid,
    h: f32,
) -> Result<f32> {
    let scorer = Scorer::for_grid(lf, h, grid);
    let mut buffer = ScoreBuffer::new(grid);
    let k = fit_with(&scorer, u, v, window, grid, &mut buffer)?;
    Ok(grid.disparity(k) as f32)
}

/// Line-fits every pixel into `out` (full-baseline disparity, row-major)
/// and returns the number of hypotheses evaluated.
///
/// Each worker owns one [`ScoreBuffer`] of `N + 1` scores and all workers
/// share one table of `N + 1` slopes; nothing else is allocated per pixel or
/// per row.
pub fn fit_into(
    lf: &LightField,
    borders: &BorderMap,
    grid: &HypothesisGrid,
    h: f32,
    workers: usize,
    out: &mut [f32],
) -> Result<u64> {
    let (w, ht) = (lf.width(), lf.height());
    if borders.width() != w || borders.height() != ht || out.len() != w * ht {
        return Err(Error::input("border map and output must match the light-field size"));
    }
    if borders.hypotheses() != grid.hypotheses() {
        return Err(Error::internal("border map and hypothesis grid disagree on N"));
    }
    let scorer = Scorer::for_grid(lf, h, grid);
    let evaluations = AtomicU64::new(0);
    let failure = std::sync::Mutex::new(None);
    par::for_each_band(out, w, workers, |rows, band| {
        let mut buffer = ScoreBuffer::new(grid);
        let mut count = 0u64;
        for (v, row) in rows.zip(band.chunks_mut(w)) {
            for (u, slot) in row.iter_mut().enumerate() {
                let window = borders.window(u, v);
                match fit_with(&scorer, u, v, window, grid, &mut buffer) {
                    Ok(k) => *slot = grid.disparity(k) as f32,
                    Err(e) => {
                        failure.lock().expect("poisoned").get_or_insert(e);
                        return;
                    }
                }
                count += (window.1 - window.0 + 1) as u64;
            }
        }
        evaluations.fetch_add(count, Ordering::Relaxed);
    });
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    Ok(evaluations.into_inner())
}

/// Line-fit result before and after median filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct LineFit {
    /// Median-filtered full-baseline disparity (`D_final`).
    pub depth: DepthMap,
    pub raw: DepthMap,
    pub evaluations: u64,
}

/// Bordered line fit of the center view followed by a median filter.
pub fn estimate(
    lf: &LightField,
    borders: &BorderMap,
    grid: &HypothesisGrid,
    h: f32,
    median_kernel: usize,
    workers: usize,
) -> Result<LineFit> {
    let (w, ht) = (lf.width(), lf.height());
    let mut raw = vec![0.0f32; w * ht];
    let evaluations = fit_into(lf, borders, grid, h, workers, &mut raw)?;
    let filtered = filter::median_filter(&raw, w, ht, median_kernel);
    Ok(LineFit {
        depth: DepthMap::from_values(w, ht, filtered)?,
        raw: DepthMap::from_values(w, ht, raw)?,
        evaluations,
    })
}

/// Reference line fit over every hypothesis at every pixel, without
/// borders, worker bands or buffer reuse.
pub fn full_scan_oracle(lf: &LightField, grid: &HypothesisGrid, h: f32, median_kernel: usize) -> DepthMap {
    let (w, ht) = (lf.width(), lf.height());
    let scorer = Scorer::new(lf, h);
    let mut raw = Vec::with_capacity(w * ht);
    for v in 0..ht {
        for u in 0..w {
            let scores: Vec<f32> = (0..=grid.hypotheses())
                .map(|k| scorer.score(u, v, grid.slope(k)))
                .collect();
            let mut best = 0;
            for k in 1..scores.len() {
                if scores[k] > scores[best] {
                    best = k;
                }
            }
            raw.push(grid.disparity(best) as f32);
        }
    }
    let filtered = filter::median_filter(&raw, w, ht, median_kernel);
    DepthMap::from_values(w, ht, filtered).expect("sized by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constant_field(n: usize, m: usize, rgb: [f32; 3]) -> LightField {
        let view = ColorImage::from_fn(8, 8, |_, _| rgb);
        LightField::new(n, m, vec![view; n * m]).unwrap()
    }

    /// Views that are exact integer shifts of one texture: view (s, t) at
    /// `(x, y)` shows texture `(x - (ŝ-s)·d, y - (t̂-t)·d)`.
    fn shifted_field(n: usize, m: usize, d: i32, w: usize, h: usize) -> LightField {
        let tex = |x: i32, y: i32| {
            let v = ((x * 7 + y * 13).rem_euclid(17)) as f32 / 16.0;
            [v, 1.0 - v, (v * 3.0) % 1.0]
        };
        let c = crate::types::center_index(n, m);
        let views = (1..=m)
            .flat_map(|t| (1..=n).map(move |s| (s, t)))
            .map(|(s, t)| {
                let ox = (c.s as i32 - s as i32) * d;
                let oy = (c.t as i32 - t as i32) * d;
                ColorImage::from_fn(w, h, |x, y| tex(x as i32 - ox, y as i32 - oy))
            })
            .collect();
        LightField::new(n, m, views).unwrap()
    }

    #[test]
    fn grid_matches_default_parameters() {
        // Range ±2 per view step on 9 views: DW = 4, nominal DS = 1/56.
        let grid = HypothesisGrid::new(DisparityRange::new(16, 16).unwrap(), 9, 1.0 / 7.0).unwrap();
        assert_eq!(grid.hypotheses(), 224);
        assert!((grid.step() - 1.0 / 56.0).abs() < 1e-12);
        assert_eq!(grid.disparity(0), -16.0);
        assert_eq!(grid.disparity(224), 16.0);
        assert_eq!(grid.k_brd(), 7.0);
        assert_eq!(grid.slope(56), -1.0);
        // Uneven windows round the count up and shrink the step.
        let g = HypothesisGrid::new(DisparityRange::new(3, 4).unwrap(), 9, 1.0 / 7.0).unwrap();
        assert_eq!(g.hypotheses(), 49);
        assert!(g.step() <= 1.0 / 56.0);
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel([0.0; 3], 0.02), 1.0);
        assert_eq!(kernel([0.02, 0.0, 0.0], 0.02), 0.0);
        // l = 0.0001 / 0.0004 = 0.25.
        assert!((kernel([0.01, 0.0, 0.0], 0.02) - 0.75).abs() < 1e-6);
        assert_eq!(kernel([0.03, 0.0, 0.0], 0.02), 0.0);
    }

    #[test]
    fn constant_field_scores_every_view() {
        let lf = constant_field(5, 3, [0.2, 0.4, 0.6]);
        assert_eq!(density_score(&lf, 4, 4, 0.0, 0.02), 15.0);
        assert_eq!(density_score(&lf, 4, 4, 0.3, 0.02), 15.0);
        // Far outside: only the center sample stays in frame.
        assert_eq!(density_score(&lf, 4, 4, 100.0, 0.02), 1.0);
    }

    #[test]
    fn perfect_line_scores_all_views() {
        let lf = shifted_field(5, 5, 1, 24, 24);
        for (u, v) in [(10, 10), (12, 8), (6, 14)] {
            assert_eq!(density_score(&lf, u, v, 1.0, 0.02), 25.0);
            assert!(density_score(&lf, u, v, 0.0, 0.02) < 25.0);
        }
    }

    #[test]
    fn fit_examples() {
        let lf = shifted_field(5, 5, 1, 24, 24);
        let grid = HypothesisGrid::with_hypotheses(DisparityRange::new(8, 8).unwrap(), 5, 16).unwrap();
        // Slope 1 is index 12 (disparity 4 over the baseline).
        assert_eq!(fit_pixel(&lf, 12, 12, (0, 16), &grid, 0.02).unwrap(), 4.0);
        assert_eq!(fit_pixel(&lf, 12, 12, (3, 3), &grid, 0.02).unwrap(), grid.disparity(3) as f32);
        let flat = constant_field(5, 5, [0.5; 3]);
        assert_eq!(fit_pixel(&flat, 4, 4, (2, 9), &grid, 0.02).unwrap(), grid.disparity(2) as f32);
        assert!(matches!(fit_pixel(&lf, 1, 1, (5, 4), &grid, 0.02), Err(Error::Internal(_))));
        assert!(fit_pixel(&lf, 1, 1, (0, 17), &grid, 0.02).is_err());
    }

    #[test]
    fn full_borders_match_oracle() {
        let lf = shifted_field(5, 5, 1, 20, 16);
        let grid = HypothesisGrid::with_hypotheses(DisparityRange::new(8, 8).unwrap(), 5, 16).unwrap();
        let borders = BorderMap::full(20, 16, 16);
        let oracle = full_scan_oracle(&lf, &grid, 0.02, 3);
        for workers in [1, 3] {
            let fit = estimate(&lf, &borders, &grid, 0.02, 3, workers).unwrap();
            assert_eq!(fit.depth, oracle);
            assert_eq!(fit.evaluations, 20 * 16 * 17);
        }
    }

    #[test]
    fn counts_bordered_evaluations() {
        let lf = shifted_field(5, 5, 1, 10, 6);
        let grid = HypothesisGrid::with_hypotheses(DisparityRange::new(8, 8).unwrap(), 5, 16).unwrap();
        let windows: Vec<(u32, u32)> = (0..60).map(|i| if i % 2 == 0 { (10, 14) } else { (0, 16) }).collect();
        let borders = BorderMap::from_windows(10, 6, 16, &windows).unwrap();
        let fit = estimate(&lf, &borders, &grid, 0.02, 1, 2).unwrap();
        assert_eq!(fit.evaluations, borders.hypothesis_evaluations());
        assert_eq!(fit.evaluations, 30 * 5 + 30 * 17);
    }

    proptest! {
        #[test]
        fn scores_are_bounded_and_monotone_in_bandwidth(
            seed in any::<u64>(), u in 0usize..8, v in 0usize..8, d in -3.0f32..3.0, h in 0.01f32..0.5, shrink in 0.1f32..1.0,
        ) {
            let mut state = seed;
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 40) as f32 / (1u64 << 24) as f32
            };
            let views = (0..9).map(|_| ColorImage::from_fn(8, 8, |_, _| [next(), next(), next()])).collect();
            let lf = LightField::new(3, 3, views).unwrap();
            let s = density_score(&lf, u, v, d, h);
            prop_assert!((0.0..=9.0).contains(&s));
            prop_assert!(density_score(&lf, u, v, d, h * shrink) <= s);
        }
    }
}
