//! Small image filters: median and Sobel magnitude. Borders replicate the
//! nearest pixel.

use crate::types::GrayImage;

/// `k`×`k` median of a row-major `f32` image. `k` must be odd; `k == 1` is the identity.
pub fn median_filter(data: &[f32], width: usize, height: usize, k: usize) -> Vec<f32> {
    assert!(k % 2 == 1, "median kernel must be odd");
    assert_eq!(data.len(), width * height);
    if k == 1 {
        return data.to_vec();
    }
    let r = (k / 2) as i64;
    let mut window = Vec::with_capacity(k * k);
    let mut out = Vec::with_capacity(data.len());
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            window.clear();
            for dy in -r..=r {
                let yy = (y + dy).clamp(0, height as i64 - 1) as usize;
                for dx in -r..=r {
                    let xx = (x + dx).clamp(0, width as i64 - 1) as usize;
                    window.push(data[yy * width + xx]);
                }
            }
            let mid = window.len() / 2;
            let (_, m, _) = window.select_nth_unstable_by(mid, f32::total_cmp);
            out.push(*m);
        }
    }
    out
}

/// Euclidean Sobel gradient magnitude on 8-bit luminance.
pub fn sobel_magnitude(img: &GrayImage) -> Vec<f32> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let at = |x: i64, y: i64| img.get(x.clamp(0, w - 1) as usize, y.clamp(0, h - 1) as usize) as f32;
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            out.push(gx.hypot(gy));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_removes_salt_pixel() {
        let mut data = vec![2.0f32; 25];
        data[12] = 100.0;
        let out = median_filter(&data, 5, 5, 3);
        assert!(out.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn median_identity_for_unit_kernel() {
        let data = vec![1.0, 5.0, 3.0, 4.0];
        assert_eq!(median_filter(&data, 2, 2, 1), data);
    }

    #[test]
    fn median_preserves_step() {
        let data: Vec<f32> = (0..36).map(|i| if i % 6 < 3 { 0.0 } else { 1.0 }).collect();
        assert_eq!(median_filter(&data, 6, 6, 3), data);
    }

    #[test]
    fn sobel_on_step_edge() {
        // Columns 0..4 dark, 4..8 bright: the two columns flanking the step see 4 * 200.
        let img = GrayImage::from_fn(8, 5, |x, _| if x < 4 { 10 } else { 210 });
        let mag = sobel_magnitude(&img);
        for y in 0..5 {
            for x in 0..8 {
                let expect = if x == 3 || x == 4 { 800.0 } else { 0.0 };
                assert_eq!(mag[y * 8 + x], expect, "({x},{y})");
            }
        }
    }

    #[test]
    fn sobel_constant_is_zero() {
        let img = GrayImage::from_fn(6, 6, |_, _| 99);
        assert!(sobel_magnitude(&img).iter().all(|&v| v == 0.0));
    }
}
