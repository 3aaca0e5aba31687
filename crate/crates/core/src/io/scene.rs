//! Benchmark-layout scene directories.
//!
//! ```text
//! scene/
//!   parameters.cfg        INI; reads num_cams_x, num_cams_y, disp_min, disp_max
//!   input_Cam000.png      row-major views, t outer and s inner (PNG or PPM)
//!   ...
//!   gt_disp_lowres.pfm    optional center-view ground truth
//!   eval_mask.png         optional; non-zero pixels are evaluated
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage};

use crate::error::{Error, Result};
use crate::io::pfm;
use crate::types::{ColorImage, DepthMap, DisparityRange, LightField, Mask};

pub const PARAMETERS_FILE: &str = "parameters.cfg";
pub const GT_FILE: &str = "gt_disp_lowres.pfm";
pub const MASK_FILE: &str = "eval_mask.png";

/// 8-bit sample to the normalized `[0, 1]` scale used by [`ColorImage`].
#[inline]
pub fn dequantize(k: u8) -> f32 {
    k as f32 / 255.0
}

#[inline]
pub fn quantize(v: f32) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Maps a per-view-step disparity interval to full-baseline `d1_max`/`d2_max`,
/// rounding outward.
pub fn range_from_view_step(disp_min: f64, disp_max: f64, n: usize) -> Result<DisparityRange> {
    if !(disp_min <= disp_max) {
        return Err(Error::input(format!("disp_min {disp_min} exceeds disp_max {disp_max}")));
    }
    let steps = (n - 1) as f64;
    let out = |v: f64| (v.max(0.0) * steps - 1e-9).ceil() as u32;
    let (d1, d2) = (out(-disp_min), out(disp_max));
    DisparityRange::new(d1, d2.max(u32::from(d1 + d2 == 0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneDescriptor {
    pub path: PathBuf,
    pub n: usize,
    pub m: usize,
    /// Row-major angular order.
    pub images: Vec<PathBuf>,
    /// Per-view-step disparity bounds from the parameters file.
    pub disp_min: f64,
    pub disp_max: f64,
    pub range: DisparityRange,
    pub gt_path: Option<PathBuf>,
    pub mask_path: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub descriptor: SceneDescriptor,
    pub light_field: LightField,
    /// Full-baseline range.
    pub range: DisparityRange,
    /// Per-view-step ground truth.
    pub gt: Option<DepthMap>,
    pub mask: Option<Mask>,
}

impl Scene {
    pub fn name(&self) -> String {
        self.descriptor
            .path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.descriptor.path.display().to_string())
    }
}

fn load_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::SceneLoad {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Flat `key = value` view of an INI file; section headers are ignored.
fn parse_parameters(text: &str) -> HashMap<String, String> {
    text.lines()
        .map(|l| l.split(['#', ';']).next().unwrap_or("").trim())
        .filter(|l| !l.is_empty() && !l.starts_with('['))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_ascii_lowercase(), v.trim().to_string()))
        .collect()
}

/// Index of an `input_CamNNN.png|ppm` file name.
fn camera_index(name: &str) -> Option<usize> {
    let rest = name.strip_prefix("input_Cam")?;
    let (num, ext) = rest.split_once('.')?;
    let ext = ext.to_ascii_lowercase();
    if ext != "png" && ext != "ppm" {
        return None;
    }
    num.parse().ok()
}

pub fn describe_scene(dir: impl AsRef<Path>) -> Result<SceneDescriptor> {
    let dir = dir.as_ref();
    let params_path = dir.join(PARAMETERS_FILE);
    let text = fs::read_to_string(&params_path).map_err(|e| load_err(&params_path, e.to_string()))?;
    let params = parse_parameters(&text);
    let number = |key: &str| -> Result<Option<f64>> {
        params
            .get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| load_err(&params_path, format!("{key} = {v:?} is not a number")))
            })
            .transpose()
    };

    let mut cams: Vec<(usize, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| load_err(dir, e.to_string()))? {
        let entry = entry?;
        if let Some(i) = entry.file_name().to_str().and_then(camera_index) {
            cams.push((i, entry.path()));
        }
    }
    cams.sort();
    if cams.is_empty() {
        return Err(load_err(dir, "no input_CamNNN images found"));
    }
    for (expect, (i, p)) in cams.iter().enumerate() {
        if *i != expect {
            return Err(load_err(p, format!("camera indices are not contiguous: expected {expect}, found {i}")));
        }
    }

    let count = cams.len();
    let (n, m) = match (number("num_cams_x")?, number("num_cams_y")?) {
        (Some(x), Some(y)) => (x as usize, y as usize),
        (None, None) => {
            let side = (count as f64).sqrt().round() as usize;
            if side * side != count {
                return Err(load_err(&params_path, "num_cams_x/num_cams_y missing and image count is not square"));
            }
            (side, side)
        }
        _ => return Err(load_err(&params_path, "num_cams_x and num_cams_y must be given together")),
    };
    if n < 2 || m < 1 {
        return Err(load_err(&params_path, format!("unsupported view grid {n}x{m}")));
    }
    if n * m != count {
        return Err(load_err(dir, format!("found {count} images for a {n}x{m} grid ({} expected)", n * m)));
    }
    let (Some(disp_min), Some(disp_max)) = (number("disp_min")?, number("disp_max")?) else {
        return Err(load_err(&params_path, "disp_min and disp_max are required"));
    };
    let range = range_from_view_step(disp_min, disp_max, n).map_err(|e| load_err(&params_path, e.to_string()))?;
    let gt = dir.join(GT_FILE);
    let mask = dir.join(MASK_FILE);
    Ok(SceneDescriptor {
        path: dir.to_path_buf(),
        n,
        m,
        images: cams.into_iter().map(|(_, p)| p).collect(),
        disp_min,
        disp_max,
        range,
        gt_path: gt.is_file().then_some(gt),
        mask_path: mask.is_file().then_some(mask),
    })
}

fn decode_8bit(path: &Path) -> Result<DynamicImage> {
    let img = image::open(path).map_err(|e| load_err(path, e.to_string()))?;
    match img.color() {
        ColorType::L8 | ColorType::La8 | ColorType::Rgb8 | ColorType::Rgba8 => Ok(img),
        other => Err(load_err(path, format!("only 8-bit images are supported, got {other:?}"))),
    }
}

pub fn load_view(path: &Path) -> Result<ColorImage> {
    let rgb = decode_8bit(path)?.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    ColorImage::from_raw(w, h, rgb.into_raw().into_iter().map(dequantize).collect())
}

/// 8-bit image as a mask; non-zero pixels are set.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    let luma = decode_8bit(path)?.to_luma8();
    let (w, h) = (luma.width() as usize, luma.height() as usize);
    let data = luma.into_raw();
    Ok(Mask::from_fn(w, h, |x, y| data[y * w + x] != 0))
}

pub fn load_scene(dir: impl AsRef<Path>) -> Result<Scene> {
    let descriptor = describe_scene(dir)?;
    let mut views = Vec::with_capacity(descriptor.images.len());
    for p in &descriptor.images {
        let v = load_view(p)?;
        if let Some(first) = views.first() {
            let first: &ColorImage = first;
            if (v.width(), v.height()) != (first.width(), first.height()) {
                return Err(load_err(
                    p,
                    format!("is {}x{}, other views are {}x{}", v.width(), v.height(), first.width(), first.height()),
                ));
            }
        }
        views.push(v);
    }
    let light_field = LightField::new(descriptor.n, descriptor.m, views)?;
    let (w, h) = (light_field.width(), light_field.height());
    let gt = match &descriptor.gt_path {
        Some(p) => {
            let map = pfm::read_pfm(p).map_err(|e| load_err(p, e.to_string()))?;
            if (map.width(), map.height()) != (w, h) {
                return Err(load_err(p, format!("ground truth is {}x{}, views are {w}x{h}", map.width(), map.height())));
            }
            Some(map)
        }
        None => None,
    };
    let mask = match &descriptor.mask_path {
        Some(p) => {
            let mask = load_mask(p)?;
            if (mask.width(), mask.height()) != (w, h) {
                return Err(load_err(p, "evaluation mask does not match the view size"));
            }
            Some(mask)
        }
        None => None,
    };
    Ok(Scene {
        range: descriptor.range,
        descriptor,
        light_field,
        gt,
        mask,
    })
}

/// Writes a light field in the benchmark layout (PNG views).
pub fn write_scene(
    dir: impl AsRef<Path>,
    lf: &LightField,
    disp_min: f64,
    disp_max: f64,
    gt: Option<&DepthMap>,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let params = format!(
        "[extrinsics]\nnum_cams_x = {}\nnum_cams_y = {}\n\n[meta]\ndisp_min = {disp_min}\ndisp_max = {disp_max}\n",
        lf.n(),
        lf.m()
    );
    fs::write(dir.join(PARAMETERS_FILE), params)?;
    let (w, h) = (lf.width() as u32, lf.height() as u32);
    for (i, view) in lf.views().iter().enumerate() {
        let bytes: Vec<u8> = view.data().iter().map(|&v| quantize(v)).collect();
        let img = image::RgbImage::from_raw(w, h, bytes).ok_or_else(|| Error::internal("view buffer size"))?;
        img.save(dir.join(format!("input_Cam{i:03}.png")))?;
    }
    if let Some(gt) = gt {
        pfm::write_pfm(gt, dir.join(GT_FILE))?;
    }
    Ok(())
}
