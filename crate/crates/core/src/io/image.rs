//! 8-bit RGB rasters: binary PPM (P6) always, PNG with the `png` feature.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ImageFormatError {
    #[error("not a binary PPM (P6) file")]
    NotPpm,
    #[error("malformed PPM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PPM maxval {0} (only 255 is supported)")]
    UnsupportedMaxval(u32),
    #[error("pixel data truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("unsupported image format: {0}")]
    Unsupported(String),
    #[error("png: {0}")]
    Png(String),
}

/// Interleaved 8-bit RGB raster.
#[derive(Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for RgbImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RgbImage({}x{})", self.width, self.height)
    }
}

impl RgbImage {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        let data = fill.iter().copied().cycle().take(width * height * 3).collect();
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height * 3 {
            return Err(Error::Shape(format!(
                "{}x{} RGB image needs {} bytes, got {}",
                width,
                height,
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = (y * self.width + x) * 3;
            self.data[i..i + 3].copy_from_slice(&rgb);
        }
    }

    /// Copies `src` with its top-left corner at `(x, y)`, clipping at edges.
    pub fn blit(&mut self, src: &RgbImage, x: usize, y: usize) {
        for sy in 0..src.height {
            for sx in 0..src.width {
                self.put_pixel(x + sx, y + sy, src.pixel(sx, sy));
            }
        }
    }

    pub fn resize_nearest(&self, width: usize, height: usize) -> RgbImage {
        let mut out = RgbImage::new(width, height, [0; 3]);
        for y in 0..height {
            let sy = y * self.height / height;
            for x in 0..width {
                let sx = x * self.width / width;
                out.put_pixel(x, y, self.pixel(sx, sy));
            }
        }
        out
    }

    /// `(3, H, W)` tensor of raw 0..=255 values.
    pub fn to_tensor(&self) -> Tensor {
        let plane = self.width * self.height;
        let mut data = vec![0f32; 3 * plane];
        for (i, px) in self.data.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * plane + i] = px[c] as f32;
            }
        }
        Tensor::from_vec(&[3, self.height, self.width], data).expect("sized")
    }

    /// Inverse of [`to_tensor`](Self::to_tensor) with rounding and clamping.
    /// One-channel tensors become gray images.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let (c, h, w) = t.chw()?;
        if c != 1 && c != 3 {
            return Err(Error::Shape(format!("expected 1 or 3 channels, got {}", c)));
        }
        let plane = h * w;
        let byte = |v: f32| v.round().clamp(0.0, 255.0) as u8;
        let mut data = Vec::with_capacity(plane * 3);
        for i in 0..plane {
            for ch in 0..3 {
                let src = if c == 1 { 0 } else { ch };
                data.push(byte(t.data()[src * plane + i]));
            }
        }
        Self::from_raw(w, h, data)
    }
}

fn ppm_token<'a>(bytes: &'a [u8], pos: &mut usize) -> std::result::Result<&'a [u8], ImageFormatError> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(_) => break,
            None => return Err(ImageFormatError::MalformedHeader("unexpected end of header".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
        *pos += 1;
    }
    Ok(&bytes[start..*pos])
}

fn ppm_number(bytes: &[u8], pos: &mut usize, what: &str) -> std::result::Result<u32, ImageFormatError> {
    let token = ppm_token(bytes, pos)?;
    std::str::from_utf8(token)
        .ok()
        .filter(|s| s.bytes().all(|b| b.is_ascii_digit()))
        .and_then(|s| s.parse::<u32>().ok())
        .ok_or_else(|| {
            ImageFormatError::MalformedHeader(format!(
                "bad {} `{}`",
                what,
                String::from_utf8_lossy(token)
            ))
        })
}

pub fn decode_ppm(bytes: &[u8]) -> std::result::Result<RgbImage, ImageFormatError> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(ImageFormatError::NotPpm);
    }
    let mut pos = 2;
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(ImageFormatError::NotPpm);
    }
    let width = ppm_number(bytes, &mut pos, "width")? as usize;
    let height = ppm_number(bytes, &mut pos, "height")? as usize;
    let maxval = ppm_number(bytes, &mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(ImageFormatError::MalformedHeader(format!(
            "empty image {}x{}",
            width, height
        )));
    }
    if maxval != 255 {
        return Err(ImageFormatError::UnsupportedMaxval(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(ImageFormatError::MalformedHeader("missing separator after maxval".into()));
    }
    pos += 1;
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| ImageFormatError::MalformedHeader("dimensions overflow".into()))?;
    let found = bytes.len() - pos;
    if found < expected {
        return Err(ImageFormatError::Truncated { expected, found });
    }
    Ok(RgbImage {
        width,
        height,
        data: bytes[pos..pos + expected].to_vec(),
    })
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];

#[cfg(feature = "png")]
fn decode_png(bytes: &[u8]) -> std::result::Result<RgbImage, ImageFormatError> {
    let err = |e: png::DecodingError| ImageFormatError::Png(e.to_string());
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| ImageFormatError::Png("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(err)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let buf = &buf[..info.buffer_size()];
    let data: Vec<u8> = match info.color_type {
        png::ColorType::Rgb => buf.to_vec(),
        png::ColorType::Rgba => buf.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        png::ColorType::Grayscale => buf.iter().flat_map(|&g| [g, g, g]).collect(),
        png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0]]).collect(),
        png::ColorType::Indexed => return Err(ImageFormatError::Png("unexpanded palette".into())),
    };
    if w == 0 || h == 0 || data.len() != w * h * 3 {
        return Err(ImageFormatError::Png("unexpected buffer size".into()));
    }
    Ok(RgbImage {
        width: w,
        height: h,
        data,
    })
}

#[cfg(feature = "png")]
fn encode_png(img: &RgbImage) -> std::result::Result<Vec<u8>, ImageFormatError> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| ImageFormatError::Png(e.to_string()))?;
        writer
            .write_image_data(&img.data)
            .map_err(|e| ImageFormatError::Png(e.to_string()))?;
    }
    Ok(out)
}

/// Decodes PPM, or PNG when built with the `png` feature.
pub fn decode_image(bytes: &[u8]) -> std::result::Result<RgbImage, ImageFormatError> {
    if bytes.starts_with(&PNG_SIGNATURE) {
        #[cfg(feature = "png")]
        return decode_png(bytes);
        #[cfg(not(feature = "png"))]
        return Err(ImageFormatError::Unsupported("PNG support not built (enable the `png` feature)".into()));
    }
    decode_ppm(bytes)
}

pub fn read_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_image(&bytes)?)
}

/// Encodes by extension: `.png` as PNG (feature-gated), anything else as PPM.
pub fn encode_for_path(path: &Path, img: &RgbImage) -> Result<Vec<u8>> {
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        #[cfg(feature = "png")]
        return Ok(encode_png(img)?);
        #[cfg(not(feature = "png"))]
        return Err(ImageFormatError::Unsupported(
            "PNG support not built (enable the `png` feature)".into(),
        )
        .into());
    }
    Ok(encode_ppm(img))
}

pub fn write_image(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    let path = path.as_ref();
    super::write_atomic(path, &encode_for_path(path, img)?)
}
