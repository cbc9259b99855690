use std::io::Cursor;

use crate::error::{Error, Result};
use crate::image::{LdrImage, RgbImage};

pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// 8-bit RGB PNG with pinned encoder settings so output bytes are stable.
pub fn encode_png(image: &LdrImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, image.width() as u32, image.height() as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Balanced);
        enc.set_filter(png::Filter::Sub);
        let mut writer = enc.write_header().map_err(|e| Error::Format(e.to_string()))?;
        let data: Vec<u8> = image.image().channel_values().map(quantize).collect();
        writer.write_image_data(&data).map_err(|e| Error::Format(e.to_string()))?;
        writer.finish().map_err(|e| Error::Format(e.to_string()))?;
    }
    Ok(out)
}

pub fn decode_png(bytes: &[u8]) -> Result<LdrImage> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| Error::Format(e.to_string()))?;
    let size = reader.output_buffer_size().ok_or_else(|| Error::Format("PNG too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::Format(e.to_string()))?;
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => return Err(Error::Format("unexpanded palette PNG".into())),
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let mut data = Vec::with_capacity(w * h);
    for v in 0..h {
        let row = &buf[v * info.line_size..];
        for u in 0..w {
            let px = &row[u * channels..];
            let f = |b: u8| b as f32 / 255.0;
            data.push(if channels < 3 { [f(px[0]); 3] } else { [f(px[0]), f(px[1]), f(px[2])] });
        }
    }
    LdrImage::new(RgbImage::new(w, h, data)?)
}
