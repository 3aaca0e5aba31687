//! Semi-global cost aggregation, winner-takes-all, parabolic sub-pixel
//! refinement and left-right consistency.

use crate::census::{CostVolume, ShiftSign};
use crate::error::{Error, Result};
use crate::par;
use crate::types::{Axis, ConsistencyMask, DepthMap, DisparityRange, Mask};

/// A unit traversal step `(du, dv)` of one aggregation path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathDirection {
    pub du: i32,
    pub dv: i32,
}

impl PathDirection {
    pub const fn new(du: i32, dv: i32) -> Self {
        Self { du, dv }
    }
}

pub const PATHS_4: [PathDirection; 4] = [
    PathDirection::new(1, 0),
    PathDirection::new(-1, 0),
    PathDirection::new(0, 1),
    PathDirection::new(0, -1),
];

pub const PATHS_8: [PathDirection; 8] = [
    PathDirection::new(1, 0),
    PathDirection::new(-1, 0),
    PathDirection::new(0, 1),
    PathDirection::new(0, -1),
    PathDirection::new(1, 1),
    PathDirection::new(-1, 1),
    PathDirection::new(1, -1),
    PathDirection::new(-1, -1),
];

pub fn paths(num_paths: usize) -> Result<&'static [PathDirection]> {
    match num_paths {
        4 => Ok(&PATHS_4),
        8 => Ok(&PATHS_8),
        n => Err(Error::config(format!("num_paths must be 4 or 8, got {n}"))),
    }
}

/// Sum over all paths of the path-wise aggregated costs `L_r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregatedVolume {
    width: usize,
    height: usize,
    range: DisparityRange,
    sum: Vec<u32>,
    raw_invalid: Vec<bool>,
}

impl AggregatedVolume {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn range(&self) -> DisparityRange {
        self.range
    }

    pub fn levels(&self) -> usize {
        self.range.levels()
    }

    #[inline]
    pub fn costs(&self, x: usize, y: usize) -> &[u32] {
        let l = self.levels();
        let i = (y * self.width + x) * l;
        &self.sum[i..i + l]
    }

    /// True when the raw matching cost at this level was the out-of-bounds cost.
    #[inline]
    pub fn raw_invalid(&self, x: usize, y: usize, level: usize) -> bool {
        self.raw_invalid[(y * self.width + x) * self.levels() + level]
    }
}

/// Aggregates along 4 or 8 paths with penalties `p1 < p2`.
pub fn aggregate(volume: &CostVolume, p1: u32, p2: u32, num_paths: usize) -> Result<AggregatedVolume> {
    aggregate_paths(volume, p1, p2, paths(num_paths)?, 1)
}

/// Aggregates along an explicit set of directions, spreading the paths over
/// up to `workers` threads. The result is independent of `workers`.
pub fn aggregate_paths(
    volume: &CostVolume,
    p1: u32,
    p2: u32,
    directions: &[PathDirection],
    workers: usize,
) -> Result<AggregatedVolume> {
    if p1 > p2 {
        return Err(Error::config(format!("SGM penalties need p1 <= p2, got {p1} and {p2}")));
    }
    // Path values stay below 2 * (max cost + p2) after normalization.
    if 2 * (u32::from(volume.invalid_cost()) + p2) > u32::from(u16::MAX) {
        return Err(Error::config(format!("SGM penalty p2 = {p2} is too large")));
    }
    if directions.is_empty() {
        return Err(Error::config("no aggregation paths"));
    }
    if let Some(d) = directions
        .iter()
        .find(|d| (d.du, d.dv) == (0, 0) || d.du.abs() > 1 || d.dv.abs() > 1)
    {
        return Err(Error::config(format!("invalid path step ({}, {})", d.du, d.dv)));
    }
    let len = volume.raw().len();
    let sum = if workers <= 1 {
        let mut acc = vec![0u32; len];
        for &dir in directions {
            aggregate_path(volume, p1, p2, dir, &mut acc);
        }
        acc
    } else {
        let groups: Vec<&[PathDirection]> = directions
            .chunks(directions.len().div_ceil(workers.min(directions.len())))
            .collect();
        let partials = par::map_ordered(&groups, workers, |group| {
            let mut acc = vec![0u32; len];
            for &dir in group.iter() {
                aggregate_path(volume, p1, p2, dir, &mut acc);
            }
            acc
        });
        let mut iter = partials.into_iter();
        let mut acc = iter.next().unwrap_or_else(|| vec![0; len]);
        for part in iter {
            acc.iter_mut().zip(part).for_each(|(a, b)| *a += b);
        }
        acc
    };
    let invalid = volume.invalid_cost();
    Ok(AggregatedVolume {
        width: volume.width(),
        height: volume.height(),
        range: volume.range(),
        sum,
        raw_invalid: volume.raw().iter().map(|&c| c == invalid).collect(),
    })
}

/// One path of the recurrence
/// `L(p,d) = C(p,d) + min(L(p-r,d), L(p-r,d±1) + P1, min_t L(p-r,t) + P2) - min_t L(p-r,t)`,
/// added into `acc`. Only the previous row of `L` is kept.
fn aggregate_path(volume: &CostVolume, p1: u32, p2: u32, dir: PathDirection, acc: &mut [u32]) {
    let (w, h, levels) = (volume.width(), volume.height(), volume.levels());
    let (p1, p2) = (p1 as u16, p2 as u16);
    let mut prev_row = vec![0u16; w * levels];
    let mut cur_row = vec![0u16; w * levels];
    let mut pred = vec![0u16; levels];

    let rows: Box<dyn Iterator<Item = usize>> = if dir.dv < 0 {
        Box::new((0..h).rev())
    } else {
        Box::new(0..h)
    };
    for y in rows {
        for i in 0..w {
            let x = if dir.du < 0 { w - 1 - i } else { i };
            let px = x as i64 - dir.du as i64;
            let py = y as i64 - dir.dv as i64;
            let raw = volume.costs(x, y);
            let out = (y * w + x) * levels;
            let has_pred = px >= 0 && py >= 0 && px < w as i64 && py < h as i64;
            if !has_pred {
                let cell = &mut cur_row[x * levels..(x + 1) * levels];
                for k in 0..levels {
                    cell[k] = raw[k] as u16;
                    acc[out + k] += raw[k] as u32;
                }
                continue;
            }
            let px = px as usize;
            let src = if dir.dv == 0 { &cur_row } else { &prev_row };
            pred.copy_from_slice(&src[px * levels..(px + 1) * levels]);
            let min_prev = *pred.iter().min().expect("at least one level");
            let jump = min_prev + p2;
            let cell = &mut cur_row[x * levels..(x + 1) * levels];
            for k in 0..levels {
                let mut best = pred[k].min(jump);
                if k > 0 {
                    best = best.min(pred[k - 1] + p1);
                }
                if k + 1 < levels {
                    best = best.min(pred[k + 1] + p1);
                }
                let l = raw[k] as u16 + best - min_prev;
                cell[k] = l;
                acc[out + k] += l as u32;
            }
        }
        std::mem::swap(&mut prev_row, &mut cur_row);
    }
}

/// Per-pixel arg-min of the aggregated cost; ties go to the lowest level.
///
/// Pixels whose winning level had an out-of-bounds raw cost are invalid.
pub fn winner_takes_all(agg: &AggregatedVolume) -> DepthMap {
    let mut out = DepthMap::invalid(agg.width, agg.height);
    for y in 0..agg.height {
        for x in 0..agg.width {
            let costs = agg.costs(x, y);
            let (level, _) = costs
                .iter()
                .enumerate()
                .fold((0, u32::MAX), |best, (k, &c)| if c < best.1 { (k, c) } else { best });
            if !agg.raw_invalid(x, y, level) {
                out.set(x, y, agg.range.disparity_of_level(level) as f32);
            }
        }
    }
    out
}

/// Vertex offset of the parabola through `(-1, c_prev)`, `(0, c_mid)`, `(1, c_next)`,
/// clamped to `[-0.5, 0.5]`; zero for a flat triple.
pub fn parabola_offset(c_prev: f64, c_mid: f64, c_next: f64) -> f64 {
    let denom = 2.0 * (c_prev - 2.0 * c_mid + c_next);
    if denom == 0.0 {
        return 0.0;
    }
    ((c_prev - c_next) / denom).clamp(-0.5, 0.5)
}

/// Parabolic sub-pixel refinement of a winner-takes-all map.
/// Pixels at the first or last hypothesis keep their integer value.
pub fn subpixel_refine(agg: &AggregatedVolume, init: &DepthMap) -> Result<DepthMap> {
    if init.width() != agg.width || init.height() != agg.height {
        return Err(Error::input("initial depth map does not match the aggregated volume"));
    }
    let levels = agg.levels() as i64;
    let mut out = init.clone();
    for y in 0..agg.height {
        for x in 0..agg.width {
            let Some(d) = init.get(x, y) else { continue };
            let level = d.round() as i64 + agg.range.d1_max as i64;
            if level <= 0 || level >= levels - 1 {
                continue;
            }
            let c = agg.costs(x, y);
            let k = level as usize;
            let off = parabola_offset(c[k - 1] as f64, c[k] as f64, c[k + 1] as f64);
            out.set(x, y, (d as f64 + off) as f32);
        }
    }
    Ok(out)
}

/// How the second map is addressed when checking a disparity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrLookup {
    /// Compare with the other map at the matched pixel `p + sign·round(D(p))` along `axis`.
    Correspondence { axis: Axis, sign: ShiftSign },
    /// Compare with the other map at the same pixel `p`.
    Literal,
}

/// `CMT(p) = 1` iff `|D_ref(p) - D_other(q)| < phi`, where `q` is chosen by `lookup`.
/// Invalid or out-of-frame lookups are unreliable.
pub fn lr_check(d_ref: &DepthMap, d_other: &DepthMap, phi: f32, lookup: LrLookup) -> Result<ConsistencyMask> {
    if d_ref.width() != d_other.width() || d_ref.height() != d_other.height() {
        return Err(Error::input("consistency check needs equally sized maps"));
    }
    let (w, h) = (d_ref.width() as i64, d_ref.height() as i64);
    Ok(Mask::from_fn(d_ref.width(), d_ref.height(), |x, y| {
        let Some(d) = d_ref.get(x, y) else { return false };
        let (qx, qy) = match lookup {
            LrLookup::Literal => (x as i64, y as i64),
            LrLookup::Correspondence { axis, sign } => {
                let shift = sign.value() as i64 * d.round() as i64;
                match axis {
                    Axis::Horizontal => (x as i64 + shift, y as i64),
                    Axis::Vertical => (x as i64, y as i64 + shift),
                }
            }
        };
        if qx < 0 || qy < 0 || qx >= w || qy >= h {
            return false;
        }
        match d_other.get(qx as usize, qy as usize) {
            Some(o) => (d - o).abs() < phi,
            None => false,
        }
    }))
}
