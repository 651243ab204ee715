//! PGM (P2/P5, maxval 255) and 8-bit grayscale PNG reading and writing.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imagecore::{GrayImage, LabelMask};
use crate::scalar::Scalar;

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];

struct Raster {
    width: usize,
    height: usize,
    bytes: Vec<u8>,
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::io(path, e),
    })
}

fn read_raster(path: &Path) -> Result<Raster> {
    let bytes = read_file(path)?;
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(path, &bytes)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(path, &bytes)
    } else if bytes.len() >= 2 && bytes[0] == b'P' && bytes[1].is_ascii_digit() {
        Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("netpbm variant P{} is not grayscale PGM", bytes[1] as char),
        })
    } else {
        Err(Error::UnsupportedFormat { path: path.to_path_buf(), reason: "expected PGM (P2/P5) or PNG".into() })
    }
}

/// Loads an 8-bit grayscale PGM or PNG, mapping samples with `v / 255`.
pub fn load_image<T: Scalar>(path: impl AsRef<Path>) -> Result<GrayImage<T>> {
    let r = read_raster(path.as_ref())?;
    GrayImage::from_u8(r.width, r.height, &r.bytes)
}

/// Writes PNG when the extension is `.png`, binary PGM otherwise.
pub fn save_image<T: Scalar>(img: &GrayImage<T>, path: impl AsRef<Path>) -> Result<()> {
    write_raster(path.as_ref(), img.width(), img.height(), &img.to_u8())
}

/// Writes a mask with classes spread evenly over `0..=255`.
pub fn save_mask(mask: &LabelMask, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = mask.labels().iter().map(|&l| mask.display_level(l)).collect();
    write_raster(path.as_ref(), mask.width(), mask.height(), &bytes)
}

/// Reads a mask image: the distinct gray levels, in ascending order, become classes `0, 1, ...`.
pub fn load_mask(path: impl AsRef<Path>) -> Result<LabelMask> {
    let r = read_raster(path.as_ref())?;
    let mut present = [false; 256];
    for &b in &r.bytes {
        present[b as usize] = true;
    }
    let mut class_of = [0u8; 256];
    let mut next = 0usize;
    for (level, &p) in present.iter().enumerate() {
        if p {
            class_of[level] = next as u8;
            next += 1;
        }
    }
    if next > u8::MAX as usize {
        return Err(Error::InvalidImage(format!("mask has {next} distinct levels")));
    }
    let labels = r.bytes.iter().map(|&b| class_of[b as usize]).collect();
    LabelMask::ground_truth(r.width, r.height, labels)
}

fn write_raster(path: &Path, width: usize, height: usize, bytes: &[u8]) -> Result<()> {
    let is_png = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let encoded = if is_png {
        encode_png(path, width, height, bytes)?
    } else {
        let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
        out.extend_from_slice(bytes);
        out
    };
    fs::write(path, encoded).map_err(|e| Error::io(path, e))
}

fn corrupt(path: &Path, reason: impl Into<String>) -> Error {
    Error::CorruptFile { path: path.to_path_buf(), reason: reason.into() }
}

/// Header/ASCII-body tokenizer that skips whitespace and `#` comments.
struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn next_token(&mut self) -> Option<&'a [u8]> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn next_number(&mut self, path: &Path, what: &str) -> Result<usize> {
        let tok = self.next_token().ok_or_else(|| corrupt(path, format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| corrupt(path, format!("invalid {what} `{}`", String::from_utf8_lossy(tok))))
    }
}

fn decode_pgm(path: &Path, bytes: &[u8]) -> Result<Raster> {
    let binary = bytes[1] == b'5';
    let mut toks = Tokens { bytes, pos: 2 };
    let width = toks.next_number(path, "width")?;
    let height = toks.next_number(path, "height")?;
    let maxval = toks.next_number(path, "maxval")?;
    if width == 0 || height == 0 {
        return Err(corrupt(path, format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("maxval {maxval}; only 8-bit (255) is supported"),
        });
    }
    let n = width.checked_mul(height).ok_or_else(|| corrupt(path, "dimensions overflow"))?;
    let data = if binary {
        // exactly one whitespace byte separates the header from the raster
        let start = toks.pos + 1;
        if start > bytes.len() || bytes.len() - start < n {
            return Err(corrupt(
                path,
                format!("truncated raster: expected {n} bytes, found {}", bytes.len().saturating_sub(start)),
            ));
        }
        bytes[start..start + n].to_vec()
    } else {
        let mut data = Vec::with_capacity(n);
        for i in 0..n {
            let v = toks.next_token().ok_or_else(|| corrupt(path, format!("truncated raster: {i} of {n} samples")))?;
            let v = std::str::from_utf8(v)
                .ok()
                .and_then(|s| s.parse::<u16>().ok())
                .filter(|&v| v <= 255)
                .ok_or_else(|| corrupt(path, format!("invalid sample `{}`", String::from_utf8_lossy(v))))?;
            data.push(v as u8);
        }
        data
    };
    Ok(Raster { width, height, bytes: data })
}

fn decode_png(path: &Path, bytes: &[u8]) -> Result<Raster> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| corrupt(path, format!("png header: {e}")))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("png color type {:?}; only grayscale is supported", info.color_type),
        });
    }
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("png bit depth {:?}; only 8-bit is supported", info.bit_depth),
        });
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let size = reader.output_buffer_size().ok_or_else(|| corrupt(path, "png image too large"))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(|e| corrupt(path, format!("png data: {e}")))?;
    let stride = frame.line_size;
    let mut out = Vec::with_capacity(width * height);
    for row in buf.chunks(stride).take(height) {
        out.extend_from_slice(&row[..width]);
    }
    Ok(Raster { width, height, bytes: out })
}

fn encode_png(path: &Path, width: usize, height: usize, bytes: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let to_err = |e: png::EncodingError| Error::io(path, std::io::Error::other(e.to_string()));
        let mut writer = enc.write_header().map_err(to_err)?;
        writer.write_image_data(bytes).map_err(to_err)?;
    }
    Ok(out)
}
