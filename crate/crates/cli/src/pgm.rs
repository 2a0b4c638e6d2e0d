//! Binary PGM (P5) images with values in `[0, 1]`.
//!
//! Writing maps `[0, 1]` linearly onto `0..=maxval` with round-half-to-even;
//! reading divides by `maxval`, so a round trip is off by at most
//! `1 / (2 maxval)`.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use pdfp_langevin::RealField;

use crate::output::atomic_write;

/// Encoded image plus whether any value had to be clamped into `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoded {
    pub bytes: Vec<u8>,
    pub clamped: bool,
}

pub fn encode(image: &RealField, maxval: u16) -> Result<Encoded> {
    let &[rows, cols] = image.shape() else {
        bail!("pgm needs a 2-D image, got shape {:?}", image.shape());
    };
    ensure!(maxval > 0, "pgm maxval must be positive");
    let mut bytes = format!("P5\n{cols} {rows}\n{maxval}\n").into_bytes();
    let wide = maxval > 255;
    let mut clamped = false;
    let scale = f64::from(maxval);
    for &v in image.as_slice() {
        // NaN clamps to 0
        let c = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        clamped |= c != v;
        let q = (c * scale).round_ties_even() as u16;
        if wide {
            bytes.extend_from_slice(&q.to_be_bytes());
        } else {
            bytes.push(q as u8);
        }
    }
    Ok(Encoded { bytes, clamped })
}

pub fn decode(bytes: &[u8]) -> Result<RealField> {
    let mut pos = 0;
    let magic = token(bytes, &mut pos)?;
    ensure!(magic == "P5", "not a binary PGM (magic `{magic}`, expected `P5`)");
    let cols: usize = number(bytes, &mut pos, "width")?;
    let rows: usize = number(bytes, &mut pos, "height")?;
    let maxval: u32 = number(bytes, &mut pos, "maxval")?;
    ensure!(cols > 0 && rows > 0, "pgm dimensions must be positive, got {cols}x{rows}");
    ensure!(
        (1..=65535).contains(&maxval),
        "pgm maxval must be in 1..=65535, got {maxval}"
    );
    // exactly one whitespace byte separates the header from the raster
    ensure!(
        bytes.get(pos).is_some_and(u8::is_ascii_whitespace),
        "malformed pgm header: no whitespace after maxval"
    );
    pos += 1;
    let width = if maxval > 255 { 2 } else { 1 };
    let need = rows * cols * width;
    let raster = &bytes[pos..];
    ensure!(
        raster.len() >= need,
        "truncated pgm raster: need {need} bytes, found {}",
        raster.len()
    );
    let scale = f64::from(maxval);
    let data = if width == 1 {
        raster[..need].iter().map(|&b| f64::from(b) / scale).collect()
    } else {
        raster[..need]
            .chunks_exact(2)
            .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])) / scale)
            .collect()
    };
    Ok(RealField::from_vec(&[rows, cols], data)?)
}

/// Next header token, skipping whitespace and `#` comments.
fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(_) => break,
            None => bail!("malformed pgm header: unexpected end of file"),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos]).context("malformed pgm header: non-ascii token")
}

fn number<T: std::str::FromStr>(bytes: &[u8], pos: &mut usize, what: &str) -> Result<T> {
    let t = token(bytes, pos)?;
    t.parse()
        .map_err(|_| anyhow::anyhow!("malformed pgm header: {what} `{t}` is not a number"))
}

pub fn read(path: &Path) -> Result<RealField> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode(&bytes).with_context(|| format!("decoding {}", path.display()))
}

/// Writes atomically; returns whether values were clamped.
pub fn write(path: &Path, image: &RealField, maxval: u16) -> Result<bool> {
    let enc = encode(image, maxval)?;
    atomic_write(path, &enc.bytes)?;
    Ok(enc.clamped)
}
