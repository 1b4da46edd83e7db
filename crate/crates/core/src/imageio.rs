//! PNG encoding for RGB frames and binary masks.

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, ImageError, ImageFormat};

use crate::grid::Grid;
use crate::render::RgbImage;

pub fn encode_rgb_png(img: &RgbImage) -> Result<Vec<u8>, ImageError> {
    let raw: Vec<u8> = img.iter().flatten().copied().collect();
    encode(&raw, img.width(), img.height(), ExtendedColorType::Rgb8)
}

/// Grayscale PNG, 255 where the mask is set and 0 elsewhere.
pub fn encode_mask_png(mask: &Grid<bool>) -> Result<Vec<u8>, ImageError> {
    let raw: Vec<u8> = mask.iter().map(|&b| if b { 255 } else { 0 }).collect();
    encode(&raw, mask.width(), mask.height(), ExtendedColorType::L8)
}

fn encode(raw: &[u8], w: usize, h: usize, color: ExtendedColorType) -> Result<Vec<u8>, ImageError> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(raw, w as u32, h as u32, color)?;
    Ok(out)
}

pub fn decode_rgb_png(bytes: &[u8]) -> Result<RgbImage, ImageError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let px = img.pixels().map(|p| p.0).collect();
    Ok(Grid::from_vec(w, h, px).expect("decoder returns w*h pixels"))
}

/// Any nonzero gray level counts as set.
pub fn decode_mask_png(bytes: &[u8]) -> Result<Grid<bool>, ImageError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let px = img.pixels().map(|p| p.0[0] != 0).collect();
    Ok(Grid::from_vec(w, h, px).expect("decoder returns w*h pixels"))
}
