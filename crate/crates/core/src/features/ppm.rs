//! Binary portable pixmap (P6) reader and writer.

use std::path::Path;

use super::PixelGrid;
use crate::error::{Error, Result};

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Image(format!("bad {what} in PPM header")))
    }
}

pub fn read_ppm(bytes: &[u8]) -> Result<PixelGrid> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(Error::Image("not a binary PPM (missing P6 magic)".into()));
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Image(format!("unsupported maxval {maxval}")));
    }
    match bytes.get(h.pos) {
        Some(c) if c.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(Error::Image("missing separator after PPM header".into())),
    }
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| Error::Image("image too large".into()))?;
    let data = &bytes[h.pos..];
    if data.len() < need {
        return Err(Error::Image(format!("truncated pixel data: {} of {need} bytes", data.len())));
    }
    let scale = |c: u8| -> u8 {
        if maxval == 255 {
            c
        } else {
            ((u32::from(c) * 255 + maxval as u32 / 2) / maxval as u32).min(255) as u8
        }
    };
    let pixels = data[..need].chunks_exact(3).map(|c| [scale(c[0]), scale(c[1]), scale(c[2])]).collect();
    PixelGrid::new(width, height, pixels)
}

pub fn read_ppm_file(path: impl AsRef<Path>) -> Result<PixelGrid> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_ppm(&bytes)
}

pub fn write_ppm(img: &PixelGrid) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    for px in img.pixels() {
        out.extend_from_slice(px);
    }
    out
}
