use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::grid::Image;

/// Loads a PNG (8- or 16-bit, gray or colour) into `[0, 1]` intensities.
pub fn read_image(path: &Path) -> Result<Image> {
    let img = image::open(path).map_err(|e| Error::format(path, 0, format!("cannot decode image: {e}")))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(match img {
        DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageLumaA16(_) => {
            let g = img.into_luma16();
            Image::gray(w, h, g.into_raw().into_iter().map(|x| x as f64 / 65535.0).collect())
        }
        _ => {
            let c = img.into_rgb16();
            Image::rgb(w, h, c.into_raw().into_iter().map(|x| x as f64 / 65535.0).collect())
        }
    })
}

/// Writes the luma of `img` as a 16-bit grayscale PNG.
pub fn write_image_gray16(path: &Path, img: &Image) -> Result<()> {
    let luma = img.luma();
    let raw: Vec<u16> = luma.as_slice().iter().map(|&x| (x.clamp(0.0, 1.0) * 65535.0).round() as u16).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(img.width as u32, img.height as u32, raw).expect("buffer matches dimensions");
    buf.save(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::format(path, 0, other.to_string()),
    })
}
