use super::AnnotatedImage;

/// Row-major binary occupancy grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl PixelMask {
    pub fn get(&self, row: u32, col: u32) -> bool {
        self.bits[(row * self.width + col) as usize]
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Binary PGM (P5), 0 for background and 255 for covered pixels.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.bits.iter().map(|&b| if b { 255u8 } else { 0 }));
        out
    }
}

/// Sets pixel `(row i, col j)` iff its center `(j + 0.5, i + 0.5)` falls in
/// some ground-truth box.
pub fn rasterize_mask(image: &AnnotatedImage) -> PixelMask {
    let (w, h) = (image.width, image.height);
    let mut bits = vec![false; (w as usize) * (h as usize)];
    for lb in &image.boxes {
        let b = lb.bbox;
        // Column range whose centers satisfy x_min <= j + 0.5 < x_max.
        let c0 = (b.x_min - 0.5).ceil().max(0.0) as u32;
        let c1 = ((b.x_max - 0.5).ceil().max(0.0) as u32).min(w);
        let r0 = (b.y_min - 0.5).ceil().max(0.0) as u32;
        let r1 = ((b.y_max - 0.5).ceil().max(0.0) as u32).min(h);
        for row in r0..r1 {
            let base = (row * w) as usize;
            for col in c0..c1 {
                bits[base + col as usize] = true;
            }
        }
    }
    PixelMask {
        width: w,
        height: h,
        bits,
    }
}
