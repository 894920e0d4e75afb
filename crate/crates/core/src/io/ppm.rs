//! Portable pixmap (PPM) images, binary P6 and ASCII P3, 8-bit channels.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB triples.
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::shape(
                format!("{} pixels for {width}x{height}", width * height),
                format!("{}", pixels.len()),
            ));
        }
        Ok(RgbImage { width, height, pixels })
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpmFormat {
    Ascii,
    Binary,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.buf.len() {
            match self.buf[self.pos] {
                b'#' => {
                    while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&str> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.buf.len() && !self.buf[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.buf[start..self.pos]).ok().filter(|s| !s.is_empty())
    }

    fn number(&mut self) -> Option<usize> {
        self.token()?.parse().ok()
    }
}

pub fn decode_ppm(bytes: &[u8], path: &Path) -> Result<RgbImage> {
    let err = |msg: &str| Error::Format {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    let mut c = Cursor { buf: bytes, pos: 0 };
    let format = match c.token() {
        Some("P6") => PpmFormat::Binary,
        Some("P3") => PpmFormat::Ascii,
        _ => return Err(err("unsupported image format (expected P3 or P6 PPM)")),
    };
    let width = c.number().ok_or_else(|| err("bad width"))?;
    let height = c.number().ok_or_else(|| err("bad height"))?;
    let maxval = c.number().ok_or_else(|| err("bad maximum value"))?;
    if maxval != 255 {
        return Err(err("only 8-bit PPM (maximum value 255) is supported"));
    }
    let count = width * height;
    let mut pixels = Vec::with_capacity(count);
    match format {
        PpmFormat::Binary => {
            // exactly one whitespace byte after the header
            let start = c.pos + 1;
            let body = bytes
                .get(start..start + 3 * count)
                .ok_or_else(|| err("truncated pixel data"))?;
            pixels.extend(body.chunks_exact(3).map(|p| [p[0], p[1], p[2]]));
        }
        PpmFormat::Ascii => {
            for _ in 0..count {
                let mut px = [0u8; 3];
                for v in &mut px {
                    *v = c
                        .number()
                        .and_then(|n| u8::try_from(n).ok())
                        .ok_or_else(|| err("bad or missing sample"))?;
                }
                pixels.push(px);
            }
        }
    }
    RgbImage::new(width, height, pixels)
}

pub fn load_ppm(path: &Path) -> Result<RgbImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    decode_ppm(&bytes, path)
}

pub fn write_ppm<W: Write>(mut w: W, img: &RgbImage, format: PpmFormat) -> Result<()> {
    match format {
        PpmFormat::Binary => {
            write!(w, "P6\n{} {}\n255\n", img.width, img.height)?;
            let body: Vec<u8> = img.pixels.iter().flatten().copied().collect();
            w.write_all(&body)?;
        }
        PpmFormat::Ascii => {
            writeln!(w, "P3\n{} {}\n255", img.width, img.height)?;
            for row in img.pixels.chunks(img.width) {
                let line: Vec<String> = row
                    .iter()
                    .map(|p| format!("{} {} {}", p[0], p[1], p[2]))
                    .collect();
                writeln!(w, "{}", line.join("  "))?;
            }
        }
    }
    Ok(())
}
