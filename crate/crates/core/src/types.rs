//! Core image, light-field and depth-map types shared by every stage.
//!
//! Angular coordinates are 1-based throughout the public API (`s` in `1..=n`
//! horizontally, `t` in `1..=m` vertically); storage is 0-based row-major
//! with `t` outer and `s` inner.
//!
//! Disparity sign convention: a scene point seen at `(u, v)` in the center
//! view `(ŝ, t̂)` appears at `(u + (ŝ - s)·d, v + (t̂ - t)·d)` in view `(s, t)`,
//! where `d` is the per-view-step disparity. Positive disparity is nearer to
//! the camera. Depth maps store full-baseline disparity `D = (n - 1)·d`, i.e.
//! the horizontal shift between the two extreme views of a row.

use crate::error::{Error, Result};

/// Value stored in [`DepthMap::values`] for invalid pixels, and written to PFM files.
pub const INVALID_DEPTH: f32 = -1.0e6;

/// RGB image with channels normalized to `[0, 1]`, interleaved row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height * 3],
        }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::input(format!(
                "color buffer has {} samples, expected {}",
                data.len(),
                width * height * 3
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn to_grayscale(&self) -> GrayImage {
        let data = self.data.chunks_exact(3).map(|p| luminance([p[0], p[1], p[2]])).collect();
        GrayImage {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// BT.601 luma of a normalized RGB triple, scaled to 8 bits.
pub fn luminance(rgb: [f32; 3]) -> u8 {
    let y = 0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64;
    (255.0 * y).round().clamp(0.0, 255.0) as u8
}

/// 8-bit luminance image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::input(format!(
                "gray buffer has {} samples, expected {}",
                data.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }
}

/// 1-based angular position of a view in the light-field grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ViewIndex {
    pub s: usize,
    pub t: usize,
}

impl ViewIndex {
    pub fn new(s: usize, t: usize) -> Self {
        Self { s, t }
    }
}

/// A grid of `n` × `m` equally sized color views.
#[derive(Debug, Clone, PartialEq)]
pub struct LightField {
    n: usize,
    m: usize,
    views: Vec<ColorImage>,
}

impl LightField {
    /// `views` are row-major: `t` outer (top to bottom), `s` inner (left to right).
    pub fn new(n: usize, m: usize, views: Vec<ColorImage>) -> Result<Self> {
        if n < 2 || m < 1 {
            return Err(Error::input(format!(
                "light field needs n >= 2 and m >= 1 views, got {n}x{m}"
            )));
        }
        if views.len() != n * m {
            return Err(Error::input(format!(
                "light field of {n}x{m} views needs {} images, got {}",
                n * m,
                views.len()
            )));
        }
        let (w, h) = (views[0].width(), views[0].height());
        if w == 0 || h == 0 {
            return Err(Error::input("light field views are empty"));
        }
        if let Some(i) = views.iter().position(|v| v.width() != w || v.height() != h) {
            return Err(Error::input(format!(
                "view {i} is {}x{}, expected {w}x{h}",
                views[i].width(),
                views[i].height()
            )));
        }
        Ok(Self { n, m, views })
    }

    /// Views per row (horizontal angular resolution).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Views per column (vertical angular resolution).
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn width(&self) -> usize {
        self.views[0].width()
    }

    pub fn height(&self) -> usize {
        self.views[0].height()
    }

    pub fn views(&self) -> &[ColorImage] {
        &self.views
    }

    pub fn center_index(&self) -> ViewIndex {
        center_index(self.n, self.m)
    }

    pub fn view(&self, at: ViewIndex) -> &ColorImage {
        assert!(
            (1..=self.n).contains(&at.s) && (1..=self.m).contains(&at.t),
            "view {at:?} outside {}x{} grid",
            self.n,
            self.m
        );
        &self.views[(at.t - 1) * self.n + (at.s - 1)]
    }

    pub fn center_view(&self) -> &ColorImage {
        self.view(self.center_index())
    }
}

/// Center view `(⌈n/2⌉, ⌈m/2⌉)`, 1-based.
pub fn center_index(n: usize, m: usize) -> ViewIndex {
    ViewIndex::new(n.div_ceil(2), m.div_ceil(2))
}

/// Disparity search range over the full extreme-view baseline: `[-d1_max, d2_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DisparityRange {
    pub d1_max: u32,
    pub d2_max: u32,
}

impl DisparityRange {
    pub fn new(d1_max: u32, d2_max: u32) -> Result<Self> {
        if d1_max + d2_max < 1 {
            return Err(Error::config("disparity range must span at least one pixel"));
        }
        Ok(Self { d1_max, d2_max })
    }

    /// Number of integer hypotheses, `d1_max + d2_max + 1`.
    pub fn levels(&self) -> usize {
        (self.d1_max + self.d2_max + 1) as usize
    }

    pub fn span(&self) -> u32 {
        self.d1_max + self.d2_max
    }

    #[inline]
    pub fn disparity_of_level(&self, level: usize) -> i32 {
        level as i32 - self.d1_max as i32
    }

    pub fn min(&self) -> i32 {
        -(self.d1_max as i32)
    }

    pub fn max(&self) -> i32 {
        self.d2_max as i32
    }

    pub fn contains(&self, d: f32) -> bool {
        d >= self.min() as f32 && d <= self.max() as f32
    }

    /// Rescale by `factor`, rounding each bound outward.
    pub fn scaled(&self, factor: f64) -> Self {
        let d1 = (self.d1_max as f64 * factor).ceil() as u32;
        let d2 = (self.d2_max as f64 * factor).ceil() as u32;
        Self {
            d1_max: d1,
            d2_max: d2.max(u32::from(d1 + d2 == 0)),
        }
    }
}

/// Per-pixel real disparity with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
    valid: Vec<bool>,
}

impl DepthMap {
    /// All pixels invalid.
    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![INVALID_DEPTH; width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            values: vec![value; width * height],
            valid: vec![true; width * height],
        }
    }

    /// Every pixel valid.
    pub fn from_values(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::input(format!(
                "depth buffer has {} samples, expected {}",
                values.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            valid: vec![true; values.len()],
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Option<f32>) -> Self {
        let mut map = Self::invalid(width, height);
        for y in 0..height {
            for x in 0..width {
                if let Some(d) = f(x, y) {
                    map.set(x, y, d);
                }
            }
        }
        map
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Raw values; invalid pixels hold [`INVALID_DEPTH`].
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        let i = y * self.width + x;
        self.valid[i].then(|| self.values[i])
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> Option<f32> {
        self.valid[i].then(|| self.values[i])
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, d: f32) {
        let i = y * self.width + x;
        self.values[i] = d;
        self.valid[i] = true;
    }

    pub fn invalidate(&mut self, x: usize, y: usize) {
        let i = y * self.width + x;
        self.values[i] = INVALID_DEPTH;
        self.valid[i] = false;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Multiply every valid value by `factor`.
    pub fn scaled(&self, factor: f32) -> Self {
        let mut out = self.clone();
        for (v, &ok) in out.values.iter_mut().zip(&self.valid) {
            if ok {
                *v *= factor;
            }
        }
        out
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }
}

/// Per-pixel boolean image: consistency masks, combined confidence and edge masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

/// Left-right (or top-bottom) consistency: `true` marks a reliable disparity.
pub type ConsistencyMask = Mask;
/// `CMT_syn` in center-view coordinates.
pub type CombinedConfidence = Mask;
/// `true` marks an edge pixel excluded from bordering.
pub type EdgeMask = Mask;

impl Mask {
    pub fn new(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Matching axis for stereo between two views of the light field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Horizontal,
    Vertical,
}
