use std::path::Path;

use image::{ImageFormat, RgbImage};

use super::AugmentError;

/// Gray used for pixels uncovered by a warp.
pub const FILL_VALUE: u8 = 114;

/// Row-major 8-bit RGB pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Self { width, height, data }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, AugmentError> {
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(AugmentError::Buffer {
                expected,
                found: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let o = self.offset(x, y);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let o = self.offset(x, y);
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    /// Copy of the `w`×`h` block whose top-left pixel is `(x, y)`.
    pub fn crop(&self, x: u32, y: u32, w: u32, h: u32) -> RasterImage {
        RasterImage::from_fn(w, h, |cx, cy| self.pixel(x + cx, y + cy))
    }

    /// Writes `block` with its top-left pixel at `(x, y)`.
    pub fn paste(&mut self, block: &RasterImage, x: u32, y: u32) {
        for by in 0..block.height {
            let src = block.offset(0, by);
            let dst = self.offset(x, y + by);
            let len = block.width as usize * 3;
            self.data[dst..dst + len].copy_from_slice(&block.data[src..src + len]);
        }
    }

    pub fn load(path: &Path) -> Result<Self, AugmentError> {
        let img = image::open(path).map_err(|e| AugmentError::Image(format!("{}: {e}", path.display())))?;
        let rgb = img.to_rgb8();
        let (width, height) = rgb.dimensions();
        Ok(Self {
            width,
            height,
            data: rgb.into_raw(),
        })
    }

    /// Width and height read from the file header without decoding pixels.
    pub fn dimensions_of(path: &Path) -> Result<(u32, u32), AugmentError> {
        image::image_dimensions(path).map_err(|e| AugmentError::Image(format!("{}: {e}", path.display())))
    }

    pub fn save_png(&self, path: &Path) -> Result<(), AugmentError> {
        let buf = RgbImage::from_raw(self.width, self.height, self.data.clone())
            .expect("buffer length matches dimensions");
        buf.save_with_format(path, ImageFormat::Png)
            .map_err(|e| AugmentError::Image(format!("{}: {e}", path.display())))
    }
}
