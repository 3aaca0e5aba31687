//! Sparse Census transform and Hamming-distance matching cost.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::par;
use crate::types::{Axis, DisparityRange, GrayImage};

/// Maximum number of comparisons a pattern may hold (bits of a `u64`).
pub const MAX_PATTERN_LEN: usize = 64;

/// A named set of `(dx, dy)` comparison offsets around the center pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensusPattern {
    name: String,
    offsets: Vec<(i32, i32)>,
}

impl CensusPattern {
    pub fn new(name: impl Into<String>, offsets: Vec<(i32, i32)>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::config("census pattern is empty"));
        }
        if offsets.len() > MAX_PATTERN_LEN {
            return Err(Error::config(format!(
                "census pattern has {} offsets, at most {MAX_PATTERN_LEN} supported",
                offsets.len()
            )));
        }
        if offsets.contains(&(0, 0)) {
            return Err(Error::config("census pattern must not compare the center with itself"));
        }
        Ok(Self {
            name: name.into(),
            offsets,
        })
    }

    /// 24 samples in a 7×7 window: every odd offset on the diagonal lattice
    /// plus the odd offsets along the center row and column.
    pub fn sparse24() -> Self {
        const ODD: [i32; 4] = [-3, -1, 1, 3];
        let mut offsets = Vec::with_capacity(24);
        for &j in &ODD {
            for &i in &ODD {
                offsets.push((i, j));
            }
        }
        for &i in &ODD {
            offsets.push((i, 0));
        }
        for &j in &ODD {
            offsets.push((0, j));
        }
        Self {
            name: "sparse24".into(),
            offsets,
        }
    }

    /// Every pixel of a `(2r+1)²` window except the center, row-major.
    pub fn dense(radius: i32) -> Self {
        let offsets = (-radius..=radius)
            .flat_map(|j| (-radius..=radius).map(move |i| (i, j)))
            .filter(|&o| o != (0, 0))
            .collect();
        let side = 2 * radius + 1;
        Self {
            name: format!("dense{side}x{side}"),
            offsets,
        }
    }

    /// Checkerboard subsampling of a 7×7 window (pixels with even `dx + dy`).
    pub fn checker7x7() -> Self {
        let offsets = (-3..=3)
            .flat_map(|j| (-3..=3).map(move |i| (i, j)))
            .filter(|&(i, j): &(i32, i32)| (i + j).rem_euclid(2) == 0 && (i, j) != (0, 0))
            .collect();
        Self {
            name: "checker7x7".into(),
            offsets,
        }
    }

    /// Parses `"dx,dy; dx,dy; ..."`.
    pub fn parse_offsets(text: &str) -> Result<Self> {
        let mut offsets = Vec::new();
        for item in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (a, b) = item
                .split_once(',')
                .ok_or_else(|| Error::config(format!("census offset `{item}` is not `dx,dy`")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<i32>()
                    .map_err(|_| Error::config(format!("census offset `{item}` is not an integer pair")))
            };
            offsets.push((parse(a)?, parse(b)?));
        }
        Self::new("custom", offsets)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Largest absolute offset along either axis.
    pub fn radius(&self) -> usize {
        self.offsets
            .iter()
            .map(|&(i, j)| i.unsigned_abs().max(j.unsigned_abs()))
            .max()
            .unwrap_or(0) as usize
    }

    /// Cost assigned to hypotheses that match outside the image.
    pub fn invalid_cost(&self) -> u8 {
        self.len() as u8 + 1
    }
}

impl Default for CensusPattern {
    fn default() -> Self {
        Self::sparse24()
    }
}

type PatternCtor = fn() -> CensusPattern;

/// Census patterns selectable by name from configuration.
pub struct PatternRegistry {
    patterns: BTreeMap<&'static str, PatternCtor>,
}

impl PatternRegistry {
    pub fn builtin() -> Self {
        let mut patterns: BTreeMap<&'static str, PatternCtor> = BTreeMap::new();
        patterns.insert("sparse24", CensusPattern::sparse24);
        patterns.insert("checker7x7", CensusPattern::checker7x7);
        patterns.insert("dense3x3", || CensusPattern::dense(1));
        patterns.insert("dense5x5", || CensusPattern::dense(2));
        patterns.insert("dense7x7", || CensusPattern::dense(3));
        Self { patterns }
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.patterns.keys().copied()
    }

    pub fn get(&self, name: &str) -> Result<CensusPattern> {
        self.patterns.get(name).map(|ctor| ctor()).ok_or_else(|| Error::UnknownName {
            kind: "census pattern",
            name: name.to_string(),
            available: self.names().collect::<Vec<_>>().join(", "),
        })
    }

    /// A registered name, or an explicit `"dx,dy; ..."` offset list.
    pub fn resolve(&self, spec: &str) -> Result<CensusPattern> {
        if spec.contains(',') {
            CensusPattern::parse_offsets(spec)
        } else {
            self.get(spec.trim())
        }
    }
}

/// Per-pixel Census bit strings. Bit `k` holds the comparison against `pattern[k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensusImage {
    width: usize,
    height: usize,
    len: usize,
    bits: Vec<u64>,
    margin_valid: Vec<bool>,
}

impl CensusImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Bit-string length (pattern size).
    pub fn bit_len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn bits(&self, x: usize, y: usize) -> u64 {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.margin_valid[y * self.width + x]
    }

    pub fn bit_string(&self, x: usize, y: usize) -> BitString {
        BitString {
            bits: self.bits(x, y),
            len: self.len as u32,
        }
    }
}

/// A bit string of at most 64 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitString {
    bits: u64,
    len: u32,
}

impl BitString {
    pub fn new(bits: u64, len: u32) -> Self {
        assert!(len as usize <= MAX_PATTERN_LEN);
        let mask = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        Self { bits: bits & mask, len }
    }

    /// Parses a string of `0`/`1`; the first character is bit 0.
    pub fn parse(s: &str) -> Result<Self> {
        if s.len() > MAX_PATTERN_LEN {
            return Err(Error::input("bit string longer than 64"));
        }
        let mut bits = 0u64;
        for (k, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => bits |= 1 << k,
                _ => return Err(Error::input(format!("`{c}` is not a bit"))),
            }
        }
        Ok(Self {
            bits,
            len: s.len() as u32,
        })
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Number of positions where `a` and `b` differ.
pub fn hamming(a: &BitString, b: &BitString) -> Result<u32> {
    if a.len != b.len {
        return Err(Error::internal(format!(
            "hamming distance between bit strings of length {} and {}",
            a.len, b.len
        )));
    }
    Ok((a.bits ^ b.bits).count_ones())
}

/// Census transform: bit `k` of pixel `(x, y)` is set iff `I(x, y) > I(x + dx_k, y + dy_k)`.
///
/// Pixels closer than the pattern radius to the frame are flagged invalid
/// and carry all-zero bits.
pub fn census_transform(img: &GrayImage, pattern: &CensusPattern) -> Result<CensusImage> {
    census_transform_par(img, pattern, 1)
}

pub(crate) fn census_transform_par(
    img: &GrayImage,
    pattern: &CensusPattern,
    workers: usize,
) -> Result<CensusImage> {
    if pattern.is_empty() {
        return Err(Error::config("census pattern is empty"));
    }
    let (w, h) = (img.width(), img.height());
    let r = pattern.radius();
    let offsets: Vec<isize> = pattern
        .offsets()
        .iter()
        .map(|&(i, j)| j as isize * w as isize + i as isize)
        .collect();
    let src = img.data();

    let mut bits = vec![0u64; w * h];
    par::for_each_band(&mut bits, w, workers, |rows, band| {
        for (y, row) in rows.zip(band.chunks_mut(w)) {
            if y < r || y + r >= h {
                continue;
            }
            for x in r..w.saturating_sub(r) {
                let center = y * w + x;
                let c = src[center];
                let mut word = 0u64;
                for (k, &off) in offsets.iter().enumerate() {
                    let q = src[(center as isize + off) as usize];
                    word |= u64::from(c > q) << k;
                }
                row[x] = word;
            }
        }
    });
    let margin_valid = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| y >= r && y + r < h && x >= r && x + r < w)
        .collect();
    Ok(CensusImage {
        width: w,
        height: h,
        len: pattern.len(),
        bits,
        margin_valid,
    })
}

/// Sign applied to the hypothesis when addressing the second image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftSign {
    /// Second image sampled at `u + d`.
    Positive,
    /// Second image sampled at `u - d`.
    Negative,
}

impl ShiftSign {
    pub fn value(self) -> i32 {
        match self {
            ShiftSign::Positive => 1,
            ShiftSign::Negative => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            ShiftSign::Positive => ShiftSign::Negative,
            ShiftSign::Negative => ShiftSign::Positive,
        }
    }
}

/// Matching cost per pixel and integer hypothesis; level `k` is disparity `k - d1_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostVolume {
    width: usize,
    height: usize,
    range: DisparityRange,
    invalid_cost: u8,
    cost: Vec<u8>,
}

impl CostVolume {
    /// Builds a volume from raw per-pixel cost rows (`levels` entries per pixel, row-major).
    pub fn from_raw(
        width: usize,
        height: usize,
        range: DisparityRange,
        invalid_cost: u8,
        cost: Vec<u8>,
    ) -> Result<Self> {
        if cost.len() != width * height * range.levels() {
            return Err(Error::input(format!(
                "cost buffer has {} entries, expected {}",
                cost.len(),
                width * height * range.levels()
            )));
        }
        Ok(Self {
            width,
            height,
            range,
            invalid_cost,
            cost,
        })
    }

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

    pub fn invalid_cost(&self) -> u8 {
        self.invalid_cost
    }

    pub fn raw(&self) -> &[u8] {
        &self.cost
    }

    #[inline]
    pub fn costs(&self, x: usize, y: usize) -> &[u8] {
        let l = self.levels();
        let i = (y * self.width + x) * l;
        &self.cost[i..i + l]
    }

    /// Cost at integer disparity `d` (not level index).
    pub fn at(&self, x: usize, y: usize, d: i32) -> u8 {
        self.costs(x, y)[(d + self.range.d1_max as i32) as usize]
    }
}

/// `cost(u, v, d) = HD(c1(u, v), c2(u + sign·d, v))` (or `v + sign·d` on the vertical axis).
///
/// Matches that leave the frame or land on margin pixels get
/// [`CostVolume::invalid_cost`], as do reference pixels that are themselves
/// margin pixels.
pub fn build_cost_volume(
    c1: &CensusImage,
    c2: &CensusImage,
    range: DisparityRange,
    axis: Axis,
    sign: ShiftSign,
) -> Result<CostVolume> {
    build_cost_volume_par(c1, c2, range, axis, sign, 1)
}

pub(crate) fn build_cost_volume_par(
    c1: &CensusImage,
    c2: &CensusImage,
    range: DisparityRange,
    axis: Axis,
    sign: ShiftSign,
    workers: usize,
) -> Result<CostVolume> {
    if c1.width != c2.width || c1.height != c2.height || c1.len != c2.len {
        return Err(Error::input(format!(
            "census images differ: {}x{} ({} bits) vs {}x{} ({} bits)",
            c1.width, c1.height, c1.len, c2.width, c2.height, c2.len
        )));
    }
    let (w, h) = (c1.width, c1.height);
    let levels = range.levels();
    let invalid = c1.len as u8 + 1;
    let s = sign.value();
    let mut cost = vec![invalid; w * h * levels];
    par::for_each_band(&mut cost, w * levels, workers, |rows, band| {
        for (y, row) in rows.zip(band.chunks_mut(w * levels)) {
            for x in 0..w {
                if !c1.is_valid(x, y) {
                    continue;
                }
                let a = c1.bits(x, y);
                let cell = &mut row[x * levels..(x + 1) * levels];
                for (k, c) in cell.iter_mut().enumerate() {
                    let d = s * range.disparity_of_level(k);
                    let (qx, qy) = match axis {
                        Axis::Horizontal => (x as i64 + d as i64, y as i64),
                        Axis::Vertical => (x as i64, y as i64 + d as i64),
                    };
                    if qx < 0 || qy < 0 || qx >= w as i64 || qy >= h as i64 {
                        continue;
                    }
                    let (qx, qy) = (qx as usize, qy as usize);
                    if c2.is_valid(qx, qy) {
                        *c = (a ^ c2.bits(qx, qy)).count_ones() as u8;
                    }
                }
            }
        }
    });
    Ok(CostVolume {
        width: w,
        height: h,
        range,
        invalid_cost: invalid,
        cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(w: usize, h: usize, data: &[u8]) -> GrayImage {
        GrayImage::from_raw(w, h, data.to_vec()).unwrap()
    }

    #[test]
    fn sparse_pattern_layout() {
        let p = CensusPattern::sparse24();
        assert_eq!(p.len(), 24);
        assert_eq!(p.radius(), 3);
        assert_eq!(p.invalid_cost(), 25);
        let mut uniq = p.offsets().to_vec();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 24);
        for c in [-3, -1, 0, 1, 3] {
            assert!(p.offsets().iter().any(|&(i, _)| i == c));
            assert!(p.offsets().iter().any(|&(_, j)| j == c));
        }
        assert_eq!(CensusPattern::checker7x7().len(), 24);
        assert_eq!(CensusPattern::dense(3).len(), 48);
    }

    #[test]
    fn registry_resolves_names_and_lists() {
        let reg = PatternRegistry::builtin();
        assert_eq!(reg.resolve("dense3x3").unwrap().len(), 8);
        assert_eq!(reg.resolve("1,0; -1,0").unwrap().offsets(), &[(1, 0), (-1, 0)]);
        assert!(matches!(reg.resolve("nope"), Err(Error::UnknownName { .. })));
        assert!(CensusPattern::parse_offsets("").is_err());
        assert!(CensusPattern::parse_offsets("1;2").is_err());
    }

    #[test]
    fn empty_pattern_is_config_error() {
        assert!(matches!(CensusPattern::new("x", vec![]), Err(Error::Config(_))));
    }

    #[test]
    fn constant_image_gives_zero_bits() {
        let img = GrayImage::from_fn(12, 12, |_, _| 77);
        let c = census_transform(&img, &CensusPattern::sparse24()).unwrap();
        for y in 0..12 {
            for x in 0..12 {
                assert_eq!(c.bits(x, y), 0);
            }
        }
        assert!(c.is_valid(3, 3));
        assert!(!c.is_valid(2, 3));
        assert!(!c.is_valid(9, 9));
    }

    #[test]
    fn bright_center_sets_every_bit() {
        let img = GrayImage::from_fn(7, 7, |x, y| if (x, y) == (3, 3) { 10 } else { 5 });
        let c = census_transform(&img, &CensusPattern::sparse24()).unwrap();
        assert_eq!(c.bits(3, 3), (1 << 24) - 1);
    }

    #[test]
    fn three_by_three_hand_enumeration() {
        // Neighbors in row-major order: 1 2 3 4 | 6 7 8 9; center 5.
        let img = gray(3, 3, &[1, 2, 3, 4, 5, 6, 7, 8, 9]);
        let c = census_transform(&img, &CensusPattern::dense(1)).unwrap();
        assert_eq!(c.bit_string(1, 1), BitString::parse("11110000").unwrap());
        assert!(!c.is_valid(0, 1));
    }

    #[test]
    fn hamming_examples() {
        let x = BitString::parse("1011").unwrap();
        assert_eq!(hamming(&x, &x).unwrap(), 0);
        let zero = BitString::parse("0000").unwrap();
        let ones = BitString::parse("1111").unwrap();
        assert_eq!(hamming(&zero, &ones).unwrap(), 4);
        let a = BitString::parse("0110").unwrap();
        let b = BitString::parse("1100").unwrap();
        assert_eq!(hamming(&a, &b).unwrap(), 2);
        assert!(matches!(
            hamming(&a, &BitString::parse("011").unwrap()),
            Err(Error::Internal(_))
        ));
    }

    fn noise(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        GrayImage::from_fn(w, h, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 56) as u8
        })
    }

    #[test]
    fn identical_images_zero_cost_at_zero_disparity() {
        let img = noise(20, 16, 3);
        let c = census_transform(&img, &CensusPattern::sparse24()).unwrap();
        let range = DisparityRange::new(2, 2).unwrap();
        let vol = build_cost_volume(&c, &c, range, Axis::Horizontal, ShiftSign::Positive).unwrap();
        for y in 3..13 {
            for x in 3..17 {
                assert_eq!(vol.at(x, y, 0), 0);
            }
        }
    }

    #[test]
    fn shifted_copy_matches_at_its_shift() {
        let base = noise(30, 16, 9);
        // c2(u) = c1(u - 2): content moved right by two pixels.
        let moved = GrayImage::from_fn(30, 16, |x, y| base.get(x.saturating_sub(2), y));
        let p = CensusPattern::sparse24();
        let c1 = census_transform(&base, &p).unwrap();
        let c2 = census_transform(&moved, &p).unwrap();
        let range = DisparityRange::new(3, 3).unwrap();
        let vol = build_cost_volume(&c1, &c2, range, Axis::Horizontal, ShiftSign::Positive).unwrap();
        for y in 3..13 {
            for x in 3..(30 - 3 - 2) {
                assert_eq!(vol.at(x, y, 2), 0, "({x},{y})");
            }
        }
        // Out of frame.
        assert_eq!(vol.at(29 - 3, 5, 3), vol.invalid_cost());
        assert_eq!(vol.at(0, 5, 0), vol.invalid_cost());
    }

    #[test]
    fn vertical_axis_uses_rows() {
        let base = noise(16, 30, 5);
        let moved = GrayImage::from_fn(16, 30, |x, y| base.get(x, y.saturating_sub(1)));
        let p = CensusPattern::sparse24();
        let c1 = census_transform(&base, &p).unwrap();
        let c2 = census_transform(&moved, &p).unwrap();
        let range = DisparityRange::new(2, 2).unwrap();
        let vol = build_cost_volume(&c1, &c2, range, Axis::Vertical, ShiftSign::Positive).unwrap();
        assert_eq!(vol.at(8, 10, 1), 0);
        let neg = build_cost_volume(&c2, &c1, range, Axis::Vertical, ShiftSign::Negative).unwrap();
        assert_eq!(neg.at(8, 11, 1), 0);
    }

    #[test]
    fn parallel_build_matches_serial() {
        let p = CensusPattern::sparse24();
        let a = noise(40, 33, 1);
        let b = noise(40, 33, 2);
        let ca = census_transform_par(&a, &p, 1).unwrap();
        let cb = census_transform_par(&b, &p, 1).unwrap();
        assert_eq!(ca, census_transform_par(&a, &p, 5).unwrap());
        let range = DisparityRange::new(4, 6).unwrap();
        let serial = build_cost_volume_par(&ca, &cb, range, Axis::Horizontal, ShiftSign::Negative, 1).unwrap();
        let par = build_cost_volume_par(&ca, &cb, range, Axis::Horizontal, ShiftSign::Negative, 4).unwrap();
        assert_eq!(serial, par);
    }

    proptest! {
        #[test]
        fn hamming_is_a_metric(a in any::<u64>(), b in any::<u64>(), c in any::<u64>(), len in 1u32..=64) {
            let (a, b, c) = (BitString::new(a, len), BitString::new(b, len), BitString::new(c, len));
            let ab = hamming(&a, &b).unwrap();
            prop_assert!(ab <= len);
            prop_assert_eq!(ab, hamming(&b, &a).unwrap());
            prop_assert_eq!(hamming(&a, &a).unwrap(), 0);
            prop_assert!(hamming(&a, &c).unwrap() <= ab + hamming(&b, &c).unwrap());
        }

        #[test]
        fn cost_is_symmetric_under_swap_and_negation(seed1 in any::<u64>(), seed2 in any::<u64>()) {
            let p = CensusPattern::sparse24();
            let c1 = census_transform(&noise(18, 10, seed1), &p).unwrap();
            let c2 = census_transform(&noise(18, 10, seed2), &p).unwrap();
            let range = DisparityRange::new(3, 3).unwrap();
            let fwd = build_cost_volume(&c1, &c2, range, Axis::Horizontal, ShiftSign::Positive).unwrap();
            let back = build_cost_volume(&c2, &c1, range, Axis::Horizontal, ShiftSign::Positive).unwrap();
            for y in 0..10 {
                for x in 0..18i32 {
                    for d in -3..=3i32 {
                        let q = x + d;
                        if q < 0 || q >= 18 {
                            continue;
                        }
                        let a = fwd.at(x as usize, y, d);
                        prop_assert!(a <= fwd.invalid_cost());
                        prop_assert_eq!(a, back.at(q as usize, y, -d));
                    }
                }
            }
        }
    }
}
