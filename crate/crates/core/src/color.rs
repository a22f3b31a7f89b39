//! Channel separation and recombination.
//!
//! YCbCr uses the full-range BT.601 matrix (the JPEG/JFIF convention).
//! Channels are handed to the codec as reals in `[0, 1]`.

use crate::error::{invalid, Result};
use crate::plane::Plane;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelFormat {
    Gray8,
    Rgb8,
}

impl PixelFormat {
    pub fn channel_count(self) -> usize {
        match self {
            PixelFormat::Gray8 => 1,
            PixelFormat::Rgb8 => 3,
        }
    }
}

/// Color representation the codec works in. The discriminants are the
/// container's mode byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorMode {
    Gray = 0,
    YCbCr = 1,
    Rgb = 2,
}

impl ColorMode {
    pub fn channel_count(self) -> usize {
        match self {
            ColorMode::Gray => 1,
            ColorMode::YCbCr | ColorMode::Rgb => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ColorMode::Gray),
            1 => Some(ColorMode::YCbCr),
            2 => Some(ColorMode::Rgb),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    /// Gray for gray images, YCbCr for color ones.
    pub fn default_for(format: PixelFormat) -> Self {
        match format {
            PixelFormat::Gray8 => ColorMode::Gray,
            PixelFormat::Rgb8 => ColorMode::YCbCr,
        }
    }

    pub fn output_format(self) -> PixelFormat {
        match self {
            ColorMode::Gray => PixelFormat::Gray8,
            ColorMode::YCbCr | ColorMode::Rgb => PixelFormat::Rgb8,
        }
    }
}

impl std::str::FromStr for ColorMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "gray" | "grey" => Ok(ColorMode::Gray),
            "ycbcr" => Ok(ColorMode::YCbCr),
            "rgb" => Ok(ColorMode::Rgb),
            other => Err(format!("unknown color mode '{other}' (expected gray, ycbcr or rgb)")),
        }
    }
}

impl std::fmt::Display for ColorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ColorMode::Gray => "gray",
            ColorMode::YCbCr => "ycbcr",
            ColorMode::Rgb => "rgb",
        })
    }
}

/// An 8-bit image with interleaved, row-major samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    format: PixelFormat,
    samples: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, format: PixelFormat, samples: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return invalid(format!("image must be non-empty, got {width}x{height}"));
        }
        if samples.len() != width * height * format.channel_count() {
            return invalid(format!(
                "{format:?} image of {width}x{height} needs {} samples, got {}",
                width * height * format.channel_count(),
                samples.len()
            ));
        }
        Ok(Self { width, height, format, samples })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn format(&self) -> PixelFormat {
        self.format
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    /// Size of the uncompressed samples in bytes.
    pub fn raw_len(&self) -> usize {
        self.samples.len()
    }

    /// BT.601 luma in `[0, 1]`; the gray level itself for gray images.
    pub fn luma(&self) -> Plane {
        let data = match self.format {
            PixelFormat::Gray8 => self.samples.iter().map(|&v| v as f64 / 255.0).collect(),
            PixelFormat::Rgb8 => self
                .samples
                .chunks_exact(3)
                .map(|p| rgb_to_ycbcr(p[0] as f64, p[1] as f64, p[2] as f64)[0] / 255.0)
                .collect(),
        };
        Plane::new(self.width, self.height, data).expect("dimensions checked at construction")
    }
}

fn rgb_to_ycbcr(r: f64, g: f64, b: f64) -> [f64; 3] {
    [
        0.299 * r + 0.587 * g + 0.114 * b,
        128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b,
        128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b,
    ]
}

fn ycbcr_to_rgb(y: f64, cb: f64, cr: f64) -> [f64; 3] {
    [y + 1.402 * (cr - 128.0), y - 0.344136 * (cb - 128.0) - 0.714136 * (cr - 128.0), y + 1.772 * (cb - 128.0)]
}

fn to_byte(v: f64) -> u8 {
    // f64::round rounds half away from zero.
    v.clamp(0.0, 255.0).round() as u8
}

/// Splits an image into `mode.channel_count()` planes with values in `[0, 1]`.
pub fn split_channels(img: &ImageBuffer, mode: ColorMode) -> Result<Vec<Plane>> {
    let (w, h) = (img.width, img.height);
    let planes: Vec<Vec<f64>> = match (img.format, mode) {
        (PixelFormat::Gray8, ColorMode::Gray) => {
            vec![img.samples.iter().map(|&v| v as f64 / 255.0).collect()]
        }
        (PixelFormat::Rgb8, ColorMode::Gray) => vec![img.luma().into_data()],
        (PixelFormat::Rgb8, ColorMode::Rgb) => {
            (0..3).map(|c| img.samples.iter().skip(c).step_by(3).map(|&v| v as f64 / 255.0).collect()).collect()
        }
        (PixelFormat::Rgb8, ColorMode::YCbCr) => {
            let mut out: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(w * h)).collect();
            for p in img.samples.chunks_exact(3) {
                let ycc = rgb_to_ycbcr(p[0] as f64, p[1] as f64, p[2] as f64);
                for (plane, v) in out.iter_mut().zip(ycc) {
                    plane.push((v / 255.0).clamp(0.0, 1.0));
                }
            }
            out
        }
        (PixelFormat::Gray8, m) => return invalid(format!("gray images can only be coded in gray mode, not {m}")),
    };
    planes.into_iter().map(|d| Plane::new(w, h, d)).collect()
}

/// Inverse of [`split_channels`]: clamps to `[0, 255]` and rounds.
pub fn merge_channels(channels: &[Plane], mode: ColorMode) -> Result<ImageBuffer> {
    if channels.len() != mode.channel_count() {
        return invalid(format!("{mode} needs {} channels, got {}", mode.channel_count(), channels.len()));
    }
    let (w, h) = (channels[0].width(), channels[0].height());
    if channels.iter().any(|c| c.width() != w || c.height() != h) {
        return invalid("channels have mismatched dimensions");
    }
    let samples = match mode {
        ColorMode::Gray => channels[0].data().iter().map(|&v| to_byte(v * 255.0)).collect(),
        ColorMode::Rgb => {
            let mut s = Vec::with_capacity(w * h * 3);
            for i in 0..w * h {
                s.extend(channels.iter().map(|c| to_byte(c.data()[i] * 255.0)));
            }
            s
        }
        ColorMode::YCbCr => {
            let mut s = Vec::with_capacity(w * h * 3);
            let (y, cb, cr) = (channels[0].data(), channels[1].data(), channels[2].data());
            for i in 0..w * h {
                let rgb = ycbcr_to_rgb(y[i] * 255.0, cb[i] * 255.0, cr[i] * 255.0);
                s.extend(rgb.into_iter().map(to_byte));
            }
            s
        }
    };
    ImageBuffer::new(w, h, mode.output_format(), samples)
}
