//! Netpbm grayscale (`P2` ASCII / `P5` binary) reader and writer.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PgmError {
    #[error("unsupported magic number (expected P2 or P5)")]
    BadMagic,
    #[error("truncated or malformed data: {0}")]
    TruncatedData(&'static str),
    #[error("maxval {0} unsupported (must be 1..=255)")]
    MaxvalUnsupported(u32),
}

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    /// Returns `None` when the dimensions are zero or don't match the buffer.
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Option<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return None;
        }
        Some(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut pixels = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                pixels.push(f(col, row));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn next_uint(&mut self, what: &'static str) -> Result<u32, PgmError> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PgmError::TruncatedData(what));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(PgmError::TruncatedData(what))
    }
}

/// Parses a PGM file. Comments are accepted anywhere in the header.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(PgmError::BadMagic);
    }
    let binary = match bytes[1] {
        b'2' => false,
        b'5' => true,
        _ => return Err(PgmError::BadMagic),
    };
    let mut rd = HeaderReader { bytes, pos: 2 };
    let width = rd.next_uint("width")? as usize;
    let height = rd.next_uint("height")? as usize;
    let maxval = rd.next_uint("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(PgmError::MaxvalUnsupported(maxval));
    }
    if width == 0 || height == 0 {
        return Err(PgmError::TruncatedData("zero dimension"));
    }
    let n = width
        .checked_mul(height)
        .ok_or(PgmError::TruncatedData("dimensions overflow"))?;

    let pixels = if binary {
        // exactly one whitespace byte separates maxval from the raster
        if rd.pos >= bytes.len() || !bytes[rd.pos].is_ascii_whitespace() {
            return Err(PgmError::TruncatedData("raster"));
        }
        let start = rd.pos + 1;
        let raster = bytes
            .get(start..start + n)
            .ok_or(PgmError::TruncatedData("raster"))?;
        if raster.iter().any(|&p| u32::from(p) > maxval) {
            return Err(PgmError::TruncatedData("sample exceeds maxval"));
        }
        raster.to_vec()
    } else {
        let mut px = Vec::with_capacity(n);
        for _ in 0..n {
            let v = rd.next_uint("raster")?;
            if v > maxval {
                return Err(PgmError::TruncatedData("sample exceeds maxval"));
            }
            px.push(v as u8);
        }
        px
    };

    Ok(GrayImage {
        width,
        height,
        pixels,
    })
}

/// Encodes as binary `P5` with maxval 255.
pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Encodes as ASCII `P2` with maxval 255, one image row per line.
pub fn write_pgm_ascii(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n255\n", img.width, img.height);
    for row in img.pixels.chunks(img.width) {
        let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}
