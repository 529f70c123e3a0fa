//! Grayscale PGM (P2/P5) and PNG images.
//!
//! Samples map to `[0, 1]` by dividing by the format's maximum value. On
//! save, values are clamped to `[0, 1]`, scaled and rounded half-to-even.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{DeconvError, Result};
use crate::grid::Image;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn maxval(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }

    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            _ => Err(DeconvError::Config(format!("unsupported bit depth {bits}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageEncoding {
    /// Binary PGM.
    P5(BitDepth),
    /// ASCII PGM.
    P2(BitDepth),
    Png(BitDepth),
}

impl ImageEncoding {
    /// PNG for `.png`, binary PGM otherwise.
    pub fn for_path(path: &Path, depth: BitDepth) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("png") => ImageEncoding::Png(depth),
            _ => ImageEncoding::P5(depth),
        }
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| DeconvError::Read {
        path: path.into(),
        source,
    })?;
    decode_image(&bytes).map_err(|message| DeconvError::format(path, message))
}

/// 8-bit image in the format implied by the extension.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    save_image_with(img, path, ImageEncoding::for_path(path, BitDepth::Eight))
}

pub fn save_image_with(img: &Image, path: impl AsRef<Path>, encoding: ImageEncoding) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_image(img, encoding).map_err(|message| DeconvError::format(path, message))?;
    fs::write(path, bytes).map_err(|source| DeconvError::Write {
        path: path.into(),
        source,
    })
}

pub fn decode_image(bytes: &[u8]) -> std::result::Result<Image, String> {
    if bytes.starts_with(b"\x89PNG") {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        decode_pgm(bytes)
    } else {
        Err("unrecognized image format (expected PGM or PNG)".into())
    }
}

pub fn encode_image(img: &Image, encoding: ImageEncoding) -> std::result::Result<Vec<u8>, String> {
    match encoding {
        ImageEncoding::P5(depth) => Ok(encode_pgm(img, depth, false)),
        ImageEncoding::P2(depth) => Ok(encode_pgm(img, depth, true)),
        ImageEncoding::Png(depth) => encode_png(img, depth),
    }
}

/// `[0, 1]` → `0..=maxval`, clamped, ties to even. NaN maps to 0.
pub fn quantize(v: f64, maxval: u32) -> u32 {
    let clamped = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (clamped * f64::from(maxval)).round_ties_even() as u32
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
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

    fn number(&mut self, what: &str) -> std::result::Result<u32, String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format!("malformed header: expected {what}"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| format!("malformed header: {what} out of range"))
    }
}

fn decode_pgm(bytes: &[u8]) -> std::result::Result<Image, String> {
    let ascii = &bytes[..2] == b"P2";
    let mut reader = HeaderReader { bytes, pos: 2 };
    let width = reader.number("width")? as usize;
    let height = reader.number("height")? as usize;
    let maxval = reader.number("maxval")?;
    if width == 0 || height == 0 {
        return Err("malformed header: zero dimension".into());
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("unsupported bit depth: maxval {maxval}"));
    }
    let count = width * height;
    let mut samples = Vec::with_capacity(count);
    if ascii {
        for _ in 0..count {
            let v = reader
                .number("sample")
                .map_err(|_| "truncated or malformed pixel data".to_string())?;
            samples.push(v);
        }
    } else {
        match bytes.get(reader.pos) {
            Some(c) if c.is_ascii_whitespace() => {}
            _ => return Err("malformed header: missing separator after maxval".into()),
        }
        let data = &bytes[reader.pos + 1..];
        let wide = maxval > 255;
        let needed = if wide { 2 * count } else { count };
        if data.len() < needed {
            return Err(format!("truncated pixel data: {} of {needed} bytes", data.len()));
        }
        if wide {
            samples.extend(
                data[..needed]
                    .chunks_exact(2)
                    .map(|c| u32::from(u16::from_be_bytes([c[0], c[1]]))),
            );
        } else {
            samples.extend(data[..needed].iter().map(|&b| u32::from(b)));
        }
    }
    if let Some(v) = samples.iter().find(|&&v| v > maxval) {
        return Err(format!("sample {v} exceeds maxval {maxval}"));
    }
    let scale = f64::from(maxval);
    Image::new(
        width,
        height,
        samples.into_iter().map(|v| f64::from(v) / scale).collect(),
    )
    .map_err(|e| e.to_string())
}

fn encode_pgm(img: &Image, depth: BitDepth, ascii: bool) -> Vec<u8> {
    let maxval = depth.maxval();
    let magic = if ascii { "P2" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", img.width(), img.height()).into_bytes();
    if ascii {
        for row in img.data().chunks(img.width()) {
            let line: Vec<String> = row.iter().map(|&v| quantize(v, maxval).to_string()).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    } else {
        for &v in img.data() {
            let q = quantize(v, maxval);
            match depth {
                BitDepth::Eight => out.push(q as u8),
                BitDepth::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
            }
        }
    }
    out
}

fn decode_png(bytes: &[u8]) -> std::result::Result<Image, String> {
    let mut decoder = png::Decoder::new(bytes);
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| format!("malformed PNG: {e}"))?;
    let (color, depth) = reader.output_color_type();
    if color != png::ColorType::Grayscale {
        return Err("grayscale required".into());
    }
    let mut buf = vec![0; reader.output_buffer_size()];
    let frame = reader.next_frame(&mut buf).map_err(|e| format!("malformed PNG: {e}"))?;
    let (width, height) = (frame.width as usize, frame.height as usize);
    let data = &buf[..frame.buffer_size()];
    let samples: Vec<f64> = match depth {
        png::BitDepth::Eight => data.iter().map(|&b| f64::from(b) / 255.0).collect(),
        png::BitDepth::Sixteen => data
            .chunks_exact(2)
            .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])) / 65535.0)
            .collect(),
        other => return Err(format!("unsupported bit depth: {other:?}")),
    };
    Image::new(width, height, samples).map_err(|e| e.to_string())
}

fn encode_png(img: &Image, depth: BitDepth) -> std::result::Result<Vec<u8>, String> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(BufWriter::new(&mut out), img.width() as u32, img.height() as u32);
        encoder.set_color(png::ColorType::Grayscale);
        let maxval = depth.maxval();
        let data: Vec<u8> = match depth {
            BitDepth::Eight => {
                encoder.set_depth(png::BitDepth::Eight);
                img.data().iter().map(|&v| quantize(v, maxval) as u8).collect()
            }
            BitDepth::Sixteen => {
                encoder.set_depth(png::BitDepth::Sixteen);
                img.data()
                    .iter()
                    .flat_map(|&v| (quantize(v, maxval) as u16).to_be_bytes())
                    .collect()
            }
        };
        let mut writer = encoder.write_header().map_err(|e| e.to_string())?;
        writer.write_image_data(&data).map_err(|e| e.to_string())?;
    }
    Ok(out)
}
