//! Grayscale Portable Float Map codec.
//!
//! Layout: `Pf`, `width height`, a scale whose sign gives the byte order
//! (negative = little-endian), then rows bottom-to-top of 32-bit floats.
//! Invalid pixels are written as [`INVALID_DEPTH`]; reading maps that value
//! and any non-finite sample back to invalid.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{DepthMap, INVALID_DEPTH};

pub fn encode(map: &DepthMap) -> Vec<u8> {
    let (w, h) = (map.width(), map.height());
    let header = format!("Pf\n{w} {h}\n-1.0\n");
    let mut out = Vec::with_capacity(header.len() + 4 * w * h);
    out.extend_from_slice(header.as_bytes());
    for y in (0..h).rev() {
        for x in 0..w {
            let v = map.get(x, y).unwrap_or(INVALID_DEPTH);
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn token(&mut self, what: &str) -> Result<&'a str> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Pfm(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| Error::Pfm(format!("{what} is not ASCII")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<DepthMap> {
    let mut cur = Cursor { bytes, pos: 0 };
    match cur.token("magic")? {
        "Pf" => {}
        "PF" => return Err(Error::Pfm("color PFM (PF) is not a depth map".into())),
        other => return Err(Error::Pfm(format!("bad magic {other:?}"))),
    }
    let dim = |cur: &mut Cursor, what| -> Result<usize> {
        let t = cur.token(what)?;
        t.parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::Pfm(format!("bad {what} {t:?}")))
    };
    let w = dim(&mut cur, "width")?;
    let h = dim(&mut cur, "height")?;
    let scale_text = cur.token("scale")?;
    let scale: f32 = scale_text
        .parse()
        .ok()
        .filter(|s: &f32| s.is_finite() && *s != 0.0)
        .ok_or_else(|| Error::Pfm(format!("bad scale {scale_text:?}")))?;
    // Exactly one whitespace byte separates the header from the payload.
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(Error::Pfm("header is not terminated".into()));
    }
    let payload = &bytes[cur.pos + 1..];
    let need = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Pfm("dimensions overflow".into()))?;
    if payload.len() < need {
        return Err(Error::Pfm(format!("truncated payload: {} of {need} bytes", payload.len())));
    }
    let little = scale < 0.0;
    let mut map = DepthMap::invalid(w, h);
    for (i, chunk) in payload[..need].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        if v.is_finite() && v != INVALID_DEPTH {
            map.set(i % w, h - 1 - i / w, v);
        }
    }
    Ok(map)
}

pub fn write_pfm(map: &DepthMap, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(map))?;
    Ok(())
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<DepthMap> {
    decode(&fs::read(path)?)
}
