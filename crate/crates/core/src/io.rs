//! PNG input and output.
//!
//! Palette and sub-byte images are expanded and 16-bit samples are reduced
//! to 8 bits. Images with an alpha channel are rejected.

use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Write};
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use crate::color::{ImageBuffer, PixelFormat};
use crate::error::{Error, Result};

pub fn read_png(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let file = File::open(path.as_ref())?;
    decode_png(BufReader::new(file))
}

pub fn read_png_bytes(bytes: &[u8]) -> Result<ImageBuffer> {
    decode_png(Cursor::new(bytes))
}

fn decode_png<R: std::io::BufRead + std::io::Seek>(reader: R) -> Result<ImageBuffer> {
    let mut decoder = png::Decoder::new(reader);
    decoder.set_transformations(Transformations::EXPAND | Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(png_error)?;
    let size = reader.output_buffer_size().ok_or_else(|| Error::Image("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(png_error)?;
    buf.truncate(info.buffer_size());

    if info.bit_depth != BitDepth::Eight {
        return Err(Error::Image(format!("unsupported bit depth {:?}", info.bit_depth)));
    }
    let format = match info.color_type {
        ColorType::Grayscale => PixelFormat::Gray8,
        ColorType::Rgb => PixelFormat::Rgb8,
        ColorType::GrayscaleAlpha | ColorType::Rgba => {
            return Err(Error::Image("images with an alpha channel are not supported".into()))
        }
        other => return Err(Error::Image(format!("unsupported color type {other:?}"))),
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let row = w * format.channel_count();
    let samples =
        if info.line_size == row { buf } else { buf.chunks(info.line_size).flat_map(|l| &l[..row]).copied().collect() };
    ImageBuffer::new(w, h, format, samples)
}

fn png_error(e: png::DecodingError) -> Error {
    match e {
        png::DecodingError::IoError(io) => Error::Io(io),
        other => Error::Image(other.to_string()),
    }
}

pub fn write_png(path: impl AsRef<Path>, img: &ImageBuffer) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    encode_png(&mut w, img)?;
    w.flush()?;
    Ok(())
}

pub fn write_png_bytes(img: &ImageBuffer) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    encode_png(&mut out, img)?;
    Ok(out)
}

fn encode_png<W: Write>(w: W, img: &ImageBuffer) -> Result<()> {
    let (width, height) = (
        u32::try_from(img.width()).map_err(|_| Error::Image("width exceeds PNG limits".into()))?,
        u32::try_from(img.height()).map_err(|_| Error::Image("height exceeds PNG limits".into()))?,
    );
    let mut enc = png::Encoder::new(w, width, height);
    enc.set_color(match img.format() {
        PixelFormat::Gray8 => ColorType::Grayscale,
        PixelFormat::Rgb8 => ColorType::Rgb,
    });
    enc.set_depth(BitDepth::Eight);
    let encode_err = |e: png::EncodingError| match e {
        png::EncodingError::IoError(io) => Error::Io(io),
        other => Error::Image(other.to_string()),
    };
    let mut writer = enc.write_header().map_err(encode_err)?;
    writer.write_image_data(img.samples()).map_err(encode_err)?;
    writer.finish().map_err(encode_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode_raw(w: u32, h: u32, color: ColorType, depth: BitDepth, data: &[u8], palette: Option<&[u8]>) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, w, h);
            enc.set_color(color);
            enc.set_depth(depth);
            if let Some(p) = palette {
                enc.set_palette(p.to_vec());
            }
            let mut wr = enc.write_header().unwrap();
            wr.write_image_data(data).unwrap();
        }
        out
    }

    #[test]
    fn round_trips_gray_and_rgb() {
        let gray = ImageBuffer::new(3, 2, PixelFormat::Gray8, vec![0, 50, 100, 150, 200, 255]).unwrap();
        assert_eq!(read_png_bytes(&write_png_bytes(&gray).unwrap()).unwrap(), gray);
        let rgb = ImageBuffer::new(2, 2, PixelFormat::Rgb8, (0..12).map(|v| v * 20).collect()).unwrap();
        assert_eq!(read_png_bytes(&write_png_bytes(&rgb).unwrap()).unwrap(), rgb);
    }

    #[test]
    fn expands_palette_and_low_bit_depths() {
        let palette = [10, 20, 30, 40, 50, 60];
        let bytes = encode_raw(2, 1, ColorType::Indexed, BitDepth::Eight, &[1, 0], Some(&palette));
        let img = read_png_bytes(&bytes).unwrap();
        assert_eq!(img.format(), PixelFormat::Rgb8);
        assert_eq!(img.samples(), &[40, 50, 60, 10, 20, 30]);

        // 1-bit gray: 0b1010_0000 -> 255, 0, 255, 0
        let bytes = encode_raw(4, 1, ColorType::Grayscale, BitDepth::One, &[0b1010_0000], None);
        assert_eq!(read_png_bytes(&bytes).unwrap().samples(), &[255, 0, 255, 0]);
    }

    #[test]
    fn reduces_sixteen_bit() {
        let bytes = encode_raw(2, 1, ColorType::Grayscale, BitDepth::Sixteen, &[0x12, 0x34, 0xff, 0xff], None);
        assert_eq!(read_png_bytes(&bytes).unwrap().samples(), &[0x12, 0xff]);
    }

    #[test]
    fn rejects_alpha_and_garbage() {
        let bytes = encode_raw(1, 1, ColorType::Rgba, BitDepth::Eight, &[1, 2, 3, 4], None);
        assert!(matches!(read_png_bytes(&bytes), Err(Error::Image(_))));
        assert!(matches!(read_png_bytes(b"not a png"), Err(Error::Image(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(read_png("/nonexistent/dir/x.png"), Err(Error::Io(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let img = ImageBuffer::new(5, 4, PixelFormat::Gray8, (0..20).collect()).unwrap();
        write_png(&path, &img).unwrap();
        assert_eq!(read_png(&path).unwrap(), img);
    }
}
