//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//!
//! Run with `cargo test -p lfdepth --test acceptance -- --nocapture` to see
//! the report. Criterion 8 needs the benchmark training scenes under
//! `LF_BENCHMARK_DIR` (directories boxes, cotton, dino, sideboard).

use std::alloc::{GlobalAlloc, Layout, System};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::Instant;

use lfdepth::census::{census_transform, hamming, BitString};
use lfdepth::fusion::BorderMap;
use lfdepth::io::pfm;
use lfdepth::io::synth::{generate_synthetic, Layer, Rect, SyntheticScene, SyntheticSceneSpec, Texture};
use lfdepth::linefit::{self, HypothesisGrid};
use lfdepth::metrics::{self, EvalReport};
use lfdepth::pipeline;
use lfdepth::timing::StageTiming;
use lfdepth::{CensusPattern, DepthMap, GrayImage, Mask, PipelineConfig};
use rand::{seq::index::sample, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Counting;

static TRACKING: AtomicBool = AtomicBool::new(false);
static ALLOCATED_BYTES: AtomicU64 = AtomicU64::new(0);
static ALLOCATIONS: AtomicU64 = AtomicU64::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        if TRACKING.load(Ordering::Relaxed) {
            ALLOCATED_BYTES.fetch_add(layout.size() as u64, Ordering::Relaxed);
            ALLOCATIONS.fetch_add(1, Ordering::Relaxed);
        }
        unsafe { System.alloc(layout) }
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) }
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

/// Bytes and allocation count while `f` runs.
fn track<T>(f: impl FnOnce() -> T) -> (T, u64, u64) {
    ALLOCATED_BYTES.store(0, Ordering::SeqCst);
    ALLOCATIONS.store(0, Ordering::SeqCst);
    TRACKING.store(true, Ordering::SeqCst);
    let out = f();
    TRACKING.store(false, Ordering::SeqCst);
    (out, ALLOCATED_BYTES.load(Ordering::SeqCst), ALLOCATIONS.load(Ordering::SeqCst))
}

#[derive(Default)]
struct Report {
    lines: Vec<(usize, &'static str, String)>,
}

impl Report {
    fn record(&mut self, id: usize, pass: bool, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id}: {verdict}  {detail}");
        self.lines.push((id, verdict, detail));
    }

    fn skip(&mut self, id: usize, detail: String) {
        println!("criterion {id}: SKIP  {detail}");
        self.lines.push((id, "SKIP", detail));
    }

    fn failures(&self) -> Vec<usize> {
        self.lines.iter().filter(|l| l.1 == "FAIL").map(|l| l.0).collect()
    }
}

fn two_layer_spec(n: usize, size: usize, near: f64, far: f64) -> SyntheticSceneSpec {
    let side = size as f64 * 0.4;
    let corner = (size as f64 - side) / 2.0;
    SyntheticSceneSpec {
        n,
        m: n,
        width: size,
        height: size,
        disp_min: -2.0,
        disp_max: 2.0,
        layers: vec![
            Layer {
                disparity: near,
                region: Some(Rect {
                    x: corner,
                    y: corner,
                    width: side,
                    height: side,
                }),
                texture: Texture::Noise { scale: 4.0 },
            },
            Layer {
                disparity: far,
                region: None,
                texture: Texture::Noise { scale: 5.0 },
            },
        ],
    }
}

fn run_pipeline(scene: &SyntheticScene, config: &PipelineConfig) -> pipeline::PipelineOutput {
    pipeline::run(&scene.light_field, scene.range, config).expect("pipeline run")
}

fn oracle_equivalence(report: &mut Report) {
    let scene = generate_synthetic(&two_layer_spec(5, 64, 1.0, -0.5), 101).unwrap();
    let config = PipelineConfig {
        disable_confidence: true,
        ..PipelineConfig::default()
    };
    let start = Instant::now();
    let out = run_pipeline(&scene, &config);
    let seconds = start.elapsed().as_secs_f64();
    let grid = HypothesisGrid::new(scene.range, 5, config.tau).unwrap();
    let oracle = linefit::full_scan_oracle(&scene.light_field, &grid, config.h, config.median_kernel);
    let oracle = pipeline::to_view_step(&oracle, 5);
    let same = pfm::encode(&out.depth) == pfm::encode(&oracle);
    report.record(
        1,
        same && seconds < 60.0,
        format!("pipeline PFM == full-scan oracle PFM: {same}; runtime {seconds:.2} s (< 60 s)"),
    );
}

/// Pixels at least `margin` away from the image border.
fn interior(w: usize, h: usize, margin: usize) -> impl Iterator<Item = (usize, usize)> {
    (margin..h - margin).flat_map(move |y| (margin..w - margin).map(move |x| (x, y)))
}

fn plane_recovery(report: &mut Report) {
    let config = PipelineConfig::default();
    let mut worst = 100.0f64;
    let mut details = Vec::new();
    for (i, &d) in [-1.0, 0.0, 0.75, 1.5].iter().enumerate() {
        let spec = SyntheticSceneSpec::plane(9, 128, d, (-2.0, 2.0));
        let scene = generate_synthetic(&spec, 200 + i as u64).unwrap();
        let out = run_pipeline(&scene, &config);
        let grid = HypothesisGrid::new(scene.range, 9, config.tau).unwrap();
        let half_step = grid.step() / 8.0 / 2.0;
        // Views shift by up to 4·|d| pixels; keep the samples of every view in frame.
        let margin = (4.0 * d.abs()).ceil() as usize + 4;
        let (mut good, mut total) = (0usize, 0usize);
        for (x, y) in interior(128, 128, margin) {
            total += 1;
            if out.depth.get(x, y).is_some_and(|v| (v as f64 - d).abs() <= half_step + 1e-6) {
                good += 1;
            }
        }
        let pct = 100.0 * good as f64 / total as f64;
        worst = worst.min(pct);
        details.push(format!("d*={d}: {pct:.1}%"));
    }
    report.record(
        2,
        worst >= 95.0,
        format!("|D - d*| <= DS/2 on interior pixels ({}), need >= 95%", details.join(", ")),
    );
}

fn two_layer_occlusion(report: &mut Report) {
    let spec = two_layer_spec(9, 128, 1.25, -0.5);
    let scene = generate_synthetic(&spec, 303).unwrap();
    let out = run_pipeline(&scene, &PipelineConfig::default());
    // Exclude pixels within 2 px of a label change in the center view.
    let label = |x: usize, y: usize| scene.gt.get(x, y).map(f32::to_bits);
    let near_boundary = |x: usize, y: usize| {
        let (x0, x1) = (x.saturating_sub(2), (x + 2).min(127));
        let (y0, y1) = (y.saturating_sub(2), (y + 2).min(127));
        (y0..=y1).any(|yy| (x0..=x1).any(|xx| label(xx, yy) != label(x, y)))
    };
    let mask = Mask::from_fn(128, 128, |x, y| !near_boundary(x, y));
    let bp = metrics::badpix(&out.depth, &scene.gt, 0.07, Some(&mask)).unwrap();
    report.record(
        3,
        bp <= 10.0,
        format!("BadPix(0.07) = {bp:.3}% outside the 2 px boundary band, need <= 10%"),
    );
}

fn sgm_sanity(report: &mut Report) {
    let k = 5.0;
    let mut spec = SyntheticSceneSpec::plane(2, 96, k, (-8.0, 8.0));
    spec.m = 1;
    let scene = generate_synthetic(&spec, 404).unwrap();
    let lf = &scene.light_field;
    let config = PipelineConfig::default();
    let mut timing = StageTiming::new();
    let maps = pipeline::stereo_pair(
        &lf.views()[0],
        &lf.views()[1],
        scene.range,
        lfdepth::Axis::Horizontal,
        &config,
        &mut timing,
    )
    .unwrap();
    // Left pixel x matches right x - k; skip the unmatched strip and census margin.
    let (mut hit, mut total) = (0usize, 0usize);
    for y in 3..93 {
        for x in (k as usize + 3)..93 {
            total += 1;
            if maps.first_init.get(x, y) == Some(k as f32) {
                hit += 1;
            }
        }
    }
    let pct = 100.0 * hit as f64 / total as f64;
    let offsets_ok = [(&maps.first_init, &maps.first_sub), (&maps.second_init, &maps.second_sub)]
        .iter()
        .all(|(init, sub)| {
            (0..init.len()).all(|i| match (init.get_index(i), sub.get_index(i)) {
                (Some(a), Some(b)) => (b - a).abs() <= 0.5,
                (None, None) => true,
                _ => false,
            })
        });
    report.record(
        4,
        pct >= 95.0 && offsets_ok,
        format!("D_init = {k} on {pct:.1}% of interior pixels (need >= 95%); subpixel offsets within 0.5: {offsets_ok}"),
    );
}

fn border_accounting(report: &mut Report) {
    let scene = generate_synthetic(&two_layer_spec(9, 96, 1.0, -0.75), 505).unwrap();
    let config = PipelineConfig::default();
    let out = run_pipeline(&scene, &config);
    let b: &BorderMap = &out.intermediates.borders;
    let conf = &out.intermediates.confidence;
    let exact = out.stats.evaluations == out.stats.expected_evaluations;
    let mut widest = 0u32;
    let mut confident = 0usize;
    for y in 0..96 {
        for x in 0..96 {
            if conf.get(x, y) {
                confident += 1;
                let (lo, hi) = b.window(x, y);
                widest = widest.max(hi - lo + 1);
            }
        }
    }
    let bound = 2 * config.lambda + 1;
    report.record(
        5,
        exact && widest <= bound && confident > 0,
        format!(
            "counted {} evaluations, border sum {}; widest confident window {widest} over {confident} pixels (<= {bound})",
            out.stats.evaluations, out.stats.expected_evaluations
        ),
    );
}

fn census_invariance(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let pattern = CensusPattern::default();
    let r = pattern.radius();
    let mut mismatched = 0usize;
    for _ in 0..1000 {
        let (w, h) = (rng.gen_range(8..20), rng.gen_range(8..20));
        let levels = rng.gen_range(2..=200usize);
        let data: Vec<u8> = (0..w * h).map(|_| rng.gen_range(0..levels) as u8).collect();
        // Strictly increasing remap of the used levels into 0..=255.
        let mut lut: Vec<usize> = sample(&mut rng, 256, levels).into_vec();
        lut.sort_unstable();
        let remapped: Vec<u8> = data.iter().map(|&v| lut[v as usize] as u8).collect();
        let a = census_transform(&GrayImage::from_raw(w, h, data).unwrap(), &pattern).unwrap();
        let b = census_transform(&GrayImage::from_raw(w, h, remapped).unwrap(), &pattern).unwrap();
        for y in r..h - r {
            for x in r..w - r {
                if a.bit_string(x, y) != b.bit_string(x, y) {
                    mismatched += 1;
                }
            }
        }
    }
    let mut axioms = true;
    for _ in 0..1000 {
        let len = rng.gen_range(1..=64u32);
        let mut bits = || BitString::new(rng.gen(), len);
        let (a, b, c) = (bits(), bits(), bits());
        let d = |x: &BitString, y: &BitString| hamming(x, y).unwrap();
        axioms &= d(&a, &a) == 0
            && d(&a, &b) == d(&b, &a)
            && d(&a, &c) <= d(&a, &b) + d(&b, &c)
            && (d(&a, &b) == 0) == (a == b);
    }
    report.record(
        6,
        mismatched == 0 && axioms,
        format!("1000 remapped images: {mismatched} interior bit-string mismatches; Hamming axioms hold: {axioms}"),
    );
}

fn metric_reproduction(report: &mut Report) {
    // Per-scene arithmetic.
    let gt = DepthMap::from_values(4, 1, vec![0.0; 4]).unwrap();
    let res = DepthMap::from_values(4, 1, vec![0.0, 0.07, 0.08, -0.5]).unwrap();
    let r = EvalReport::compute(&res, &gt, 0.07, Some(2.0), None).unwrap();
    let arithmetic = r.badpix_percent == 50.0 && r.m_metric == Some(25.0);
    // Table averages: M from the average BadPix and runtime is on the scale
    // of the reported average M, which averages per-scene values instead.
    let from_averages = metrics::m_metric(12.743, 5.962).unwrap();
    let scale_ok = (from_averages / 22.247) > 0.5 && (from_averages / 22.247) < 2.0;
    let per_scene = metrics::m_metric(10.0, 5.0).unwrap() == 18.0;
    report.record(
        7,
        arithmetic && scale_ok && per_scene,
        format!(
            "per-scene M = (100 - BadPix)/runtime exact: {}; (100 - 12.743)/5.962 = {from_averages:.3} vs reported average 22.247 (same scale; not derivable from averages)",
            arithmetic && per_scene
        ),
    );
}

fn benchmark_scale(report: &mut Report) {
    let Some(root) = std::env::var_os("LF_BENCHMARK_DIR").map(PathBuf::from) else {
        report.skip(8, "LF_BENCHMARK_DIR not set; benchmark training scenes unavailable".into());
        return;
    };
    let names = ["boxes", "cotton", "dino", "sideboard"];
    let dirs: Vec<PathBuf> = names.iter().map(|n| root.join(n)).collect();
    if let Some(missing) = dirs.iter().find(|d| !d.is_dir()) {
        report.skip(8, format!("{} not found", missing.display()));
        return;
    }
    let config = PipelineConfig::default();
    let bench = lfdepth::bench::run_benchmark(&dirs, &config, 1).unwrap();
    let slowest = bench.scenes.iter().map(|s| s.runtime_seconds).fold(0.0, f64::max);
    let avg = bench.average.badpix.unwrap_or(f64::NAN);
    let complete = bench.is_complete() && bench.scenes.len() == 4;
    println!("{bench}");
    report.record(
        8,
        complete && slowest < 60.0 && (avg - 12.743).abs() <= 8.0,
        format!("slowest scene {slowest:.1} s (< 60 s); average BadPix {avg:.3} (12.743 +/- 8)"),
    );
}

fn determinism_and_memory(report: &mut Report) {
    let scene = generate_synthetic(&two_layer_spec(9, 64, 1.0, -0.5), 909).unwrap();
    let outputs: Vec<Vec<u8>> = [1, 2, 8]
        .iter()
        .map(|&threads| {
            let config = PipelineConfig {
                threads,
                ..PipelineConfig::default()
            };
            pfm::encode(&run_pipeline(&scene, &config).depth)
        })
        .collect();
    let identical = outputs.iter().all(|o| *o == outputs[0]);

    // Line-fit auxiliary memory: one score buffer per worker, independent of
    // image size. Compare two image sizes with the same hypothesis grid.
    let config = PipelineConfig::default();
    let mut per_worker = Vec::new();
    let mut bounded = true;
    for size in [32usize, 64] {
        let scene = generate_synthetic(&two_layer_spec(9, size, 1.0, -0.5), 910).unwrap();
        let lf = &scene.light_field;
        let grid = HypothesisGrid::new(scene.range, 9, config.tau).unwrap();
        let borders = BorderMap::full(size, size, grid.hypotheses());
        let mut out = vec![0.0f32; size * size];
        for workers in [1usize, 4] {
            let (res, bytes, count) =
                track(|| linefit::fit_into(lf, &borders, &grid, config.h, workers, &mut out));
            res.unwrap();
            let buffer = (grid.hypotheses() + 1) * std::mem::size_of::<f32>();
            // Score buffers plus a small per-worker allowance for thread bookkeeping.
            let limit = workers * (buffer + 1024) + 4096;
            bounded &= bytes as usize <= limit;
            per_worker.push(format!("{size}px/{workers}w: {bytes} B in {count} allocs (limit {limit})"));
        }
    }
    report.record(
        9,
        identical && bounded,
        format!(
            "PFMs identical for 1/2/8 workers: {identical}; line-fit allocation {}",
            per_worker.join(", ")
        ),
    );
}

#[test]
fn acceptance() {
    let mut report = Report::default();
    oracle_equivalence(&mut report);
    plane_recovery(&mut report);
    two_layer_occlusion(&mut report);
    sgm_sanity(&mut report);
    border_accounting(&mut report);
    census_invariance(&mut report);
    metric_reproduction(&mut report);
    benchmark_scale(&mut report);
    determinism_and_memory(&mut report);
    let failed = report.failures();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
