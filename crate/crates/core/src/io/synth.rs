//! Procedural light fields of textured fronto-parallel layers.
//!
//! A layer with per-view-step disparity `d` places its center-view point
//! `(u, v)` at `(u + (ŝ - s)·d, v + (t̂ - t)·d)` in view `(s, t)`. Layers are
//! listed near-to-far and the first one covering a pixel wins.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::scene::{self, dequantize, quantize};
use crate::types::{center_index, ColorImage, DepthMap, DisparityRange, LightField, ViewIndex};

/// Axis-aligned region in center-view pixel coordinates, half-open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.x && u < self.x + self.width && v >= self.y && v < self.y + self.height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Texture {
    /// Two-octave value noise; `scale` is the coarse lattice cell in pixels.
    Noise { scale: f64 },
    /// Two random colors alternating in `size`-pixel squares.
    Checker { size: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Per-view-step disparity.
    pub disparity: f64,
    /// Whole plane when absent.
    #[serde(default)]
    pub region: Option<Rect>,
    pub texture: Texture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSceneSpec {
    pub n: usize,
    pub m: usize,
    pub width: usize,
    pub height: usize,
    /// Declared per-view-step range written to the parameters file.
    pub disp_min: f64,
    pub disp_max: f64,
    /// Near-to-far.
    pub layers: Vec<Layer>,
}

impl SyntheticSceneSpec {
    /// A single textured plane filling every view.
    pub fn plane(n: usize, size: usize, disparity: f64, range: (f64, f64)) -> Self {
        Self {
            n,
            m: n,
            width: size,
            height: size,
            disp_min: range.0,
            disp_max: range.1,
            layers: vec![Layer {
                disparity,
                region: None,
                texture: Texture::Noise { scale: 4.0 },
            }],
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(format!("synthetic scene spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::internal(format!("serializing scene spec: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n < 2 || self.m < 1 {
            return fail(format!("view grid {}x{} needs n >= 2 and m >= 1", self.n, self.m));
        }
        if self.width == 0 || self.height == 0 {
            return fail("image size must be positive".into());
        }
        if !(self.disp_min <= self.disp_max) {
            return fail(format!("disp_min {} exceeds disp_max {}", self.disp_min, self.disp_max));
        }
        if self.layers.is_empty() {
            return fail("at least one layer is required".into());
        }
        for (i, layer) in self.layers.iter().enumerate() {
            let d = layer.disparity;
            if !(d >= self.disp_min && d <= self.disp_max) {
                return fail(format!("layer {i} disparity {d} is outside [{}, {}]", self.disp_min, self.disp_max));
            }
            if i > 0 && d > self.layers[i - 1].disparity {
                return fail(format!("layer {i} is nearer than layer {}; list layers near-to-far", i - 1));
            }
            let size = match layer.texture {
                Texture::Noise { scale } => scale,
                Texture::Checker { size } => size,
            };
            if !(size > 0.0 && size.is_finite()) {
                return fail(format!("layer {i} texture size must be positive"));
            }
            if let Some(r) = layer.region {
                if !(r.width > 0.0 && r.height > 0.0) {
                    return fail(format!("layer {i} region is empty"));
                }
            }
        }
        Ok(())
    }

    /// Full-baseline range covering the declared interval.
    pub fn range(&self) -> Result<DisparityRange> {
        scene::range_from_view_step(self.disp_min, self.disp_max, self.n)
    }

    /// Angular offset `(ŝ - s, t̂ - t)` of a view.
    fn offset(&self, view: ViewIndex) -> (f64, f64) {
        let c = center_index(self.n, self.m);
        (c.s as f64 - view.s as f64, c.t as f64 - view.t as f64)
    }

    /// Index of the layer seen at `(x, y)` in `view`, if any.
    pub fn layer_at(&self, view: ViewIndex, x: f64, y: f64) -> Option<usize> {
        let (ds, dt) = self.offset(view);
        self.layers.iter().position(|l| {
            let (u, v) = (x - ds * l.disparity, y - dt * l.disparity);
            l.region.is_none_or(|r| r.contains(u, v))
        })
    }

    /// Whether the surface seen at center pixel `(u, v)` is hidden in `view`.
    pub fn occluded_in_view(&self, view: ViewIndex, u: f64, v: f64) -> bool {
        let c = center_index(self.n, self.m);
        let Some(i) = self.layer_at(c, u, v) else { return false };
        let (ds, dt) = self.offset(view);
        let d = self.layers[i].disparity;
        self.layer_at(view, u + ds * d, v + dt * d) != Some(i)
    }
}

struct ValueNoise {
    period: i64,
    lattice: Vec<f32>,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, period: i64) -> Self {
        let lattice = (0..period * period).map(|_| rng.gen::<f32>()).collect();
        Self { period, lattice }
    }

    fn at(&self, i: i64, j: i64) -> f32 {
        let (i, j) = (i.rem_euclid(self.period), j.rem_euclid(self.period));
        self.lattice[(j * self.period + i) as usize]
    }

    fn sample(&self, x: f64, y: f64) -> f32 {
        let (fx, fy) = (x.floor(), y.floor());
        let smooth = |t: f64| (t * t * (3.0 - 2.0 * t)) as f32;
        let (tx, ty) = (smooth(x - fx), smooth(y - fy));
        let (i, j) = (fx as i64, fy as i64);
        let top = self.at(i, j) * (1.0 - tx) + self.at(i + 1, j) * tx;
        let bottom = self.at(i, j + 1) * (1.0 - tx) + self.at(i + 1, j + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

enum Painter {
    Noise { scale: f64, octaves: Vec<[ValueNoise; 3]> },
    Checker { size: f64, colors: [[f32; 3]; 2] },
}

impl Painter {
    fn new(texture: Texture, rng: &mut ChaCha8Rng, extent: f64) -> Self {
        match texture {
            Texture::Noise { scale } => {
                let octaves = [scale, scale / 2.0]
                    .iter()
                    .map(|&s| {
                        let period = (extent / s).ceil() as i64 + 2;
                        [0, 1, 2].map(|_| ValueNoise::new(rng, period))
                    })
                    .collect();
                Painter::Noise { scale, octaves }
            }
            Texture::Checker { size } => {
                let mut color = || [rng.gen::<f32>(), rng.gen::<f32>(), rng.gen::<f32>()];
                Painter::Checker {
                    size,
                    colors: [color(), color()],
                }
            }
        }
    }

    fn color(&self, u: f64, v: f64) -> [f32; 3] {
        match self {
            Painter::Noise { scale, octaves } => {
                let mut rgb = [0.0f32; 3];
                let mut weight = 0.0f32;
                for (o, chans) in octaves.iter().enumerate() {
                    let s = scale / (1 << o) as f64;
                    let a = 1.0 / (1 << o) as f32;
                    for (c, noise) in rgb.iter_mut().zip(chans) {
                        *c += a * noise.sample(u / s, v / s);
                    }
                    weight += a;
                }
                rgb.map(|c| c / weight)
            }
            Painter::Checker { size, colors } => {
                let parity = ((u / size).floor() as i64 + (v / size).floor() as i64).rem_euclid(2);
                colors[parity as usize]
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub light_field: LightField,
    /// Center-view per-view-step disparity.
    pub gt: DepthMap,
    /// Full-baseline range from the declared interval.
    pub range: DisparityRange,
}

/// Renders every view with 8-bit quantization applied, so writing the scene
/// out and loading it back is lossless. Deterministic for a fixed seed.
pub fn generate_synthetic(spec: &SyntheticSceneSpec, seed: u64) -> Result<SyntheticScene> {
    spec.validate()?;
    let (n, m, w, h) = (spec.n, spec.m, spec.width, spec.height);
    let max_shift = spec.layers.iter().map(|l| l.disparity.abs()).fold(0.0, f64::max) * n.max(m) as f64;
    let extent = w.max(h) as f64 + 2.0 * max_shift + 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let painters: Vec<Painter> = spec
        .layers
        .iter()
        .map(|l| Painter::new(l.texture, &mut rng, extent))
        .collect();

    let mut views = Vec::with_capacity(n * m);
    for t in 1..=m {
        for s in 1..=n {
            let view = ViewIndex::new(s, t);
            let (ds, dt) = spec.offset(view);
            views.push(ColorImage::from_fn(w, h, |x, y| {
                let (x, y) = (x as f64, y as f64);
                match spec.layer_at(view, x, y) {
                    Some(i) => {
                        let d = spec.layers[i].disparity;
                        painters[i]
                            .color(x - ds * d, y - dt * d)
                            .map(|c| dequantize(quantize(c)))
                    }
                    None => [0.0; 3],
                }
            }));
        }
    }
    let center = center_index(n, m);
    let gt = DepthMap::from_fn(w, h, |x, y| {
        spec.layer_at(center, x as f64, y as f64)
            .map(|i| spec.layers[i].disparity as f32)
    });
    Ok(SyntheticScene {
        light_field: LightField::new(n, m, views)?,
        gt,
        range: spec.range()?,
    })
}

/// Generates a scene and writes it in the benchmark layout.
pub fn write_synthetic(spec: &SyntheticSceneSpec, seed: u64, dir: impl AsRef<Path>) -> Result<SyntheticScene> {
    let scene = generate_synthetic(spec, seed)?;
    scene::write_scene(dir, &scene.light_field, spec.disp_min, spec.disp_max, Some(&scene.gt))?;
    Ok(scene)
}
