//! File formats: PFM depth maps, benchmark scene directories, synthetic
//! scenes and intermediate dumps.

pub mod pfm;
pub mod scene;
pub mod synth;

use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::pipeline::{Intermediates, StereoMaps};
use crate::types::{DepthMap, Mask};

pub use pfm::{read_pfm, write_pfm};
pub use scene::{load_scene, write_scene, Scene, SceneDescriptor};
pub use synth::{generate_synthetic, write_synthetic, SyntheticScene, SyntheticSceneSpec};

/// Mask as a 0/1 float map.
pub fn mask_map(mask: &Mask) -> DepthMap {
    DepthMap::from_fn(mask.width(), mask.height(), |x, y| Some(if mask.get(x, y) { 1.0 } else { 0.0 }))
}

fn dump_pair(dir: &Path, tag: &str, maps: &StereoMaps) -> Result<()> {
    let names = ["left", "right"];
    let names = if tag == "tb" { ["top", "bottom"] } else { names };
    for (name, init, sub, cmt) in [
        (names[0], &maps.first_init, &maps.first_sub, &maps.first_consistency),
        (names[1], &maps.second_init, &maps.second_sub, &maps.second_consistency),
    ] {
        write_pfm(init, dir.join(format!("d_init_{name}.pfm")))?;
        write_pfm(sub, dir.join(format!("d_sub_{name}.pfm")))?;
        write_pfm(&mask_map(cmt), dir.join(format!("cmt_{name}.pfm")))?;
    }
    Ok(())
}

/// Writes every intermediate map as a PFM into `dir`.
pub fn dump_intermediates(dir: impl AsRef<Path>, im: &Intermediates) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    dump_pair(dir, "lr", &im.left_right)?;
    if let Some(tb) = &im.top_bottom {
        dump_pair(dir, "tb", tb)?;
    }
    write_pfm(&im.synthetic.depth, dir.join("d_syn.pfm"))?;
    write_pfm(&mask_map(&im.confidence), dir.join("cmt_syn.pfm"))?;
    write_pfm(&mask_map(&im.edges), dir.join("edges.pfm"))?;
    let b = &im.borders;
    let (w, h) = (b.width(), b.height());
    let as_map = |vals: &[u32]| DepthMap::from_values(w, h, vals.iter().map(|&v| v as f32).collect());
    write_pfm(&as_map(b.d_brd_values())?, dir.join("d_brd.pfm"))?;
    write_pfm(&as_map(b.low())?, dir.join("b_low.pfm"))?;
    write_pfm(&as_map(b.high())?, dir.join("b_high.pfm"))?;
    write_pfm(&im.raw_fit, dir.join("d_linefit_raw.pfm"))?;
    Ok(())
}
