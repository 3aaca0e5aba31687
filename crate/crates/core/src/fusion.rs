//! Center-view fusion of the stereo prior: forward warping, the synthetic
//! depth map, combined confidence, edge exclusion and line-fit borders.

use crate::config::ConfidenceRule;
use crate::error::{Error, Result};
use crate::filter;
use crate::types::{center_index, ColorImage, CombinedConfidence, DepthMap, DisparityRange, EdgeMask, Mask, ViewIndex};

/// A depth map forward-warped into center-view coordinates, with the
/// consistency mask that travelled with it. Holes are invalid and unreliable.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedMap {
    pub depth: DepthMap,
    pub confidence: Mask,
}

/// Forward-warps a full-baseline disparity map from `source` to the center view.
///
/// A pixel with disparity `D` at `(x, y)` lands at
/// `(x - (ŝ - s)·D/(n-1), y - (t̂ - t)·D/(n-1))`, rounded to the nearest pixel.
/// Collisions keep the larger disparity (nearer surface).
pub fn warp_to_center(d: &DepthMap, source: ViewIndex, n: usize, m: usize) -> DepthMap {
    let all = Mask::new(d.width(), d.height(), true);
    warp_with_confidence(d, &all, source, n, m).depth
}

pub fn warp_with_confidence(d: &DepthMap, conf: &Mask, source: ViewIndex, n: usize, m: usize) -> WarpedMap {
    assert!(n >= 2, "warping needs at least two views per row");
    let (w, h) = (d.width(), d.height());
    let center = center_index(n, m);
    let ds = center.s as f32 - source.s as f32;
    let dt = center.t as f32 - source.t as f32;
    let steps = (n - 1) as f32;
    let mut depth = DepthMap::invalid(w, h);
    let mut confidence = Mask::new(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let Some(disp) = d.get(x, y) else { continue };
            let step = disp / steps;
            let tx = (x as f32 - ds * step).round();
            let ty = (y as f32 - dt * step).round();
            if tx < 0.0 || ty < 0.0 || tx >= w as f32 || ty >= h as f32 {
                continue;
            }
            let (tx, ty) = (tx as usize, ty as usize);
            let c = conf.get(x, y);
            match depth.get(tx, ty) {
                Some(existing) if existing > disp => {}
                Some(existing) if existing == disp => {
                    confidence.set(tx, ty, confidence.get(tx, ty) || c);
                }
                _ => {
                    depth.set(tx, ty, disp);
                    confidence.set(tx, ty, c);
                }
            }
        }
    }
    WarpedMap { depth, confidence }
}

/// `D_syn`: per-pixel mean of the valid warped maps.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDepth {
    pub depth: DepthMap,
    /// Number of warped maps that contributed at each pixel.
    pub sources: Vec<u8>,
}

pub fn synthesize(warped: &[&DepthMap]) -> Result<SyntheticDepth> {
    let first = warped
        .first()
        .ok_or_else(|| Error::config("synthetic depth needs at least one warped map"))?;
    let (w, h) = (first.width(), first.height());
    if warped.iter().any(|d| d.width() != w || d.height() != h) {
        return Err(Error::input("warped maps differ in size"));
    }
    let mut depth = DepthMap::invalid(w, h);
    let mut sources = vec![0u8; w * h];
    let mut vals = Vec::with_capacity(warped.len());
    for i in 0..w * h {
        vals.clear();
        vals.extend(warped.iter().filter_map(|d| d.get_index(i)));
        if vals.is_empty() {
            continue;
        }
        // Sorted so the sum does not depend on input order.
        vals.sort_by(f32::total_cmp);
        let mean = vals.iter().map(|&v| v as f64).sum::<f64>() / vals.len() as f64;
        depth.set(i % w, i / w, mean as f32);
        sources[i] = vals.len() as u8;
    }
    Ok(SyntheticDepth { depth, sources })
}

/// Reliability of a matched pair after warping: both directions must have
/// landed and passed their consistency check.
pub fn pair_confidence(a: &Mask, b: &Mask) -> Result<Mask> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::input("confidence masks differ in size"));
    }
    Ok(Mask::from_fn(a.width(), a.height(), |x, y| a.get(x, y) && b.get(x, y)))
}

/// `CMT_syn`. Left-right only: the left-right mask itself. With top-bottom,
/// combined according to `rule`.
pub fn combine_confidence(lr: &Mask, tb: Option<&Mask>, rule: ConfidenceRule) -> Result<CombinedConfidence> {
    let Some(tb) = tb else { return Ok(lr.clone()) };
    if lr.width() != tb.width() || lr.height() != tb.height() {
        return Err(Error::input("confidence masks differ in size"));
    }
    Ok(Mask::from_fn(lr.width(), lr.height(), |x, y| {
        let (a, b) = (lr.get(x, y), tb.get(x, y));
        match rule {
            ConfidenceRule::Conjunction => a && b,
            ConfidenceRule::Equality => a == b,
        }
    }))
}

/// Sobel edges of the center view: gradient magnitude, median-filtered,
/// then thresholded (strictly greater than `threshold`).
pub fn edge_mask(center: &ColorImage, median_kernel: usize, threshold: f32) -> EdgeMask {
    let gray = center.to_grayscale();
    let (w, h) = (gray.width(), gray.height());
    let mag = filter::median_filter(&filter::sobel_magnitude(&gray), w, h, median_kernel);
    Mask::from_fn(w, h, |x, y| mag[y * w + x] > threshold)
}

/// Edge mask honoring the exclusion toggle; all-false when disabled.
pub fn edges_for(center: &ColorImage, enabled: bool, median_kernel: usize, threshold: f32) -> EdgeMask {
    if enabled {
        edge_mask(center, median_kernel, threshold)
    } else {
        Mask::new(center.width(), center.height(), false)
    }
}

/// Per-pixel line-fit search window `[low, high]` in hypothesis indices.
#[derive(Debug, Clone, PartialEq)]
pub struct BorderMap {
    width: usize,
    height: usize,
    hypotheses: usize,
    lambda: u32,
    k_brd: f64,
    d_brd: Vec<u32>,
    low: Vec<u32>,
    high: Vec<u32>,
}

impl BorderMap {
    /// `(0, N)` everywhere.
    pub fn full(width: usize, height: usize, hypotheses: usize) -> Self {
        Self {
            width,
            height,
            hypotheses,
            lambda: 0,
            k_brd: 0.0,
            d_brd: vec![0; width * height],
            low: vec![0; width * height],
            high: vec![hypotheses as u32; width * height],
        }
    }

    /// Builds a map from explicit windows; `d_brd` is set to 0 where the window is full.
    pub fn from_windows(width: usize, height: usize, hypotheses: usize, windows: &[(u32, u32)]) -> Result<Self> {
        if windows.len() != width * height {
            return Err(Error::input("border window count does not match image size"));
        }
        let mut map = Self::full(width, height, hypotheses);
        for (i, &(lo, hi)) in windows.iter().enumerate() {
            if lo > hi || hi as usize > hypotheses {
                return Err(Error::input(format!("border window ({lo}, {hi}) is outside [0, {hypotheses}]")));
            }
            map.low[i] = lo;
            map.high[i] = hi;
            map.d_brd[i] = if (lo, hi as usize) == (0, hypotheses) { 0 } else { (lo + hi) / 2 };
        }
        Ok(map)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `N`: highest hypothesis index.
    pub fn hypotheses(&self) -> usize {
        self.hypotheses
    }

    pub fn k_brd(&self) -> f64 {
        self.k_brd
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    #[inline]
    pub fn window(&self, x: usize, y: usize) -> (u32, u32) {
        let i = y * self.width + x;
        (self.low[i], self.high[i])
    }

    /// Normalized depth index, 0 for full-scan pixels.
    pub fn d_brd(&self, x: usize, y: usize) -> u32 {
        self.d_brd[y * self.width + x]
    }

    pub fn low(&self) -> &[u32] {
        &self.low
    }

    pub fn high(&self) -> &[u32] {
        &self.high
    }

    /// Pixels with a restricted window (`D_brd ≠ 0`).
    pub fn bordered_pixels(&self) -> usize {
        self.d_brd.iter().filter(|&&d| d != 0).count()
    }

    pub fn bordered_fraction(&self) -> f64 {
        self.bordered_pixels() as f64 / self.d_brd.len().max(1) as f64
    }

    /// Σ (high - low + 1): hypotheses a line fit over this map evaluates.
    pub fn hypothesis_evaluations(&self) -> u64 {
        self.low
            .iter()
            .zip(&self.high)
            .map(|(&l, &h)| (h - l + 1) as u64)
            .sum()
    }

    pub fn d_brd_values(&self) -> &[u32] {
        &self.d_brd
    }
}

/// Normalizes reliable synthetic depth into hypothesis indices and derives
/// the search window: `D_brd = round((D_syn + d1_max)·k_brd)` with
/// `k_brd = N / (d1_max + d2_max)`; unreliable, edge or invalid pixels get
/// `D_brd = 0` and scan `[0, N]`; others scan
/// `[max(D_brd - λ, 0), min(D_brd + λ, N)]`.
pub fn compute_borders(
    syn: &DepthMap,
    conf: &Mask,
    edges: &Mask,
    range: DisparityRange,
    hypotheses: usize,
    lambda: u32,
) -> Result<BorderMap> {
    if hypotheses < 1 {
        return Err(Error::config("line fitting needs at least one hypothesis step"));
    }
    let (w, h) = (syn.width(), syn.height());
    if conf.width() != w || conf.height() != h || edges.width() != w || edges.height() != h {
        return Err(Error::input("border inputs differ in size"));
    }
    let n = hypotheses as u32;
    let k_brd = hypotheses as f64 / range.span() as f64;
    let mut map = BorderMap::full(w, h, hypotheses);
    map.lambda = lambda;
    map.k_brd = k_brd;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let d_brd = match syn.get(x, y) {
                Some(d) if conf.get(x, y) && !edges.get(x, y) => {
                    ((d as f64 + range.d1_max as f64) * k_brd).round().clamp(0.0, n as f64) as u32
                }
                _ => 0,
            };
            map.d_brd[i] = d_brd;
            if d_brd == 0 {
                map.low[i] = 0;
                map.high[i] = n;
            } else {
                map.low[i] = d_brd.saturating_sub(lambda);
                map.high[i] = (d_brd + lambda).min(n);
            }
        }
    }
    Ok(map)
}
