//! 8-bit PNG and PGM reading and writing.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{PrefError, Result};

/// Image with values in `[0, 1]`, row-major `[row][col][channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels || !(channels == 1 || channels == 3) {
            return Err(PrefError::Image(format!(
                "{width}x{height}x{channels} image needs {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_fn<F: Fn(usize, usize) -> f64>(width: usize, height: usize, f: F) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Self {
            width,
            height,
            channels: 1,
            data,
        }
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let o = (row * self.width + col) * self.channels;
        &self.data[o..o + self.channels]
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    /// Quantize to 8 bits and back.
    pub fn quantized(&self) -> Self {
        let data = self.to_bytes().into_iter().map(|b| f64::from(b) / 255.0).collect();
        Self { data, ..self.clone() }
    }
}

pub fn read_image(path: &Path) -> Result<Image> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(&bytes)
    } else {
        Err(PrefError::Image(format!(
            "{}: not a PNG or PGM file",
            path.display()
        )))
    }
}

pub fn write_image(path: &Path, image: &Image) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("pgm") => write_pgm(path, image),
        _ => write_png(path, image),
    }
}

fn decode_png(bytes: &[u8]) -> Result<Image> {
    let mut decoder = png::Decoder::new(bytes);
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder
        .read_info()
        .map_err(|e| PrefError::Image(format!("png: {e}")))?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| PrefError::Image(format!("png: {e}")))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let src_channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(PrefError::Image("indexed png was not expanded".into()))
        }
    };
    let channels = if src_channels <= 2 { 1 } else { 3 };
    let mut data = Vec::with_capacity(w * h * channels);
    for px in buf[..info.buffer_size()].chunks_exact(src_channels) {
        for &b in &px[..channels] {
            data.push(f64::from(b) / 255.0);
        }
    }
    Image::new(w, h, channels, data)
}

fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    let binary = bytes.starts_with(b"P5");
    // header: magic, width, height, maxval, separated by whitespace/comments
    let mut pos = 2;
    let mut fields = Vec::new();
    while fields.len() < 3 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(PrefError::Image("truncated pgm header".into()));
        }
        let v: usize = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| PrefError::Image("bad pgm header".into()))?;
        fields.push(v);
    }
    let (w, h, maxval) = (fields[0], fields[1], fields[2]);
    if maxval == 0 || maxval > 65535 {
        return Err(PrefError::Image(format!("bad pgm maxval {maxval}")));
    }
    let scale = maxval as f64;
    let count = w * h;
    let data: Vec<f64> = if binary {
        pos += 1; // single whitespace after maxval
        let width = if maxval > 255 { 2 } else { 1 };
        let body = bytes
            .get(pos..pos + count * width)
            .ok_or_else(|| PrefError::Image("truncated pgm body".into()))?;
        if width == 1 {
            body.iter().map(|&b| f64::from(b) / scale).collect()
        } else {
            body.chunks_exact(2)
                .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])) / scale)
                .collect()
        }
    } else {
        let text = std::str::from_utf8(&bytes[pos..])
            .map_err(|_| PrefError::Image("pgm body is not ascii".into()))?;
        let vals: std::result::Result<Vec<f64>, _> = text
            .split_ascii_whitespace()
            .take(count)
            .map(|t| t.parse::<u32>().map(|v| f64::from(v) / scale))
            .collect();
        let vals = vals.map_err(|_| PrefError::Image("bad pgm sample".into()))?;
        if vals.len() != count {
            return Err(PrefError::Image("truncated pgm body".into()));
        }
        vals
    };
    Image::new(w, h, 1, data)
}

pub fn write_png(path: &Path, image: &Image) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(file, image.width as u32, image.height as u32);
    enc.set_color(if image.channels == 1 {
        png::ColorType::Grayscale
    } else {
        png::ColorType::Rgb
    });
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc
        .write_header()
        .map_err(|e| PrefError::Image(format!("png: {e}")))?;
    writer
        .write_image_data(&image.to_bytes())
        .map_err(|e| PrefError::Image(format!("png: {e}")))?;
    Ok(())
}

/// ASCII (P2) grayscale PGM. Color images are converted to luma.
pub fn write_pgm(path: &Path, image: &Image) -> Result<()> {
    let gray: Vec<f64> = if image.channels == 1 {
        image.data.clone()
    } else {
        image
            .data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect()
    };
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "P2\n{} {}\n255", image.width, image.height)?;
    for row in gray.chunks(image.width) {
        let line: Vec<String> = row
            .iter()
            .map(|v| ((v.clamp(0.0, 1.0) * 255.0).round() as u8).to_string())
            .collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        std::env::temp_dir().join(format!("pref-imageio-{}-{name}", std::process::id()))
    }

    #[test]
    fn pgm_and_png_round_trip_8bit() {
        let img = Image::from_fn(7, 5, |i, j| ((i * 7 + j) % 11) as f64 / 10.0).quantized();
        for name in ["a.pgm", "a.png"] {
            let p = tmp(name);
            write_image(&p, &img).unwrap();
            let back = read_image(&p).unwrap();
            assert_eq!(back, img);
            std::fs::remove_file(p).ok();
        }
    }

    #[test]
    fn binary_pgm_with_comment() {
        let mut bytes = b"P5\n# hi\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 51, 102]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!(img.data, vec![0.0, 1.0, 0.2, 0.4]);
    }

    #[test]
    fn garbage_is_rejected() {
        let p = tmp("junk.bin");
        std::fs::write(&p, b"hello").unwrap();
        assert!(matches!(read_image(&p), Err(PrefError::Image(_))));
        std::fs::remove_file(p).ok();
    }
}
