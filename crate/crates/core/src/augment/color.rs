use super::raster::RasterImage;
use super::Sample;

/// RGB to `(hue in degrees [0, 360), saturation [0, 1], value [0, 1])`.
pub fn rgb_to_hsv(rgb: [u8; 3]) -> (f64, f64, f64) {
    let [r, g, b] = rgb.map(|c| c as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta == 0.0 {
        return (0.0, s, max);
    }
    let h = if max == r {
        60.0 * ((g - b) / delta)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    (h.rem_euclid(360.0), s, max)
}

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r, g, b].map(|ch| ((ch + m) * 255.0).round().clamp(0.0, 255.0) as u8)
}

/// Shifts hue by `hue_shift` of a full turn and scales S and V (clamped).
/// Labels pass through untouched.
pub fn hsv_jitter(sample: &Sample, hue_shift: f64, sat_gain: f64, val_gain: f64) -> Sample {
    if hue_shift == 0.0 && sat_gain == 1.0 && val_gain == 1.0 {
        return sample.clone();
    }
    let src = &sample.image;
    let image = RasterImage::from_fn(src.width(), src.height(), |x, y| {
        let (h, s, v) = rgb_to_hsv(src.pixel(x, y));
        hsv_to_rgb(
            h + hue_shift * 360.0,
            (s * sat_gain).clamp(0.0, 1.0),
            (v * val_gain).clamp(0.0, 1.0),
        )
    });
    Sample {
        labels: sample.labels.clone(),
        image,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primaries_convert() {
        assert_eq!(rgb_to_hsv([255, 0, 0]), (0.0, 1.0, 1.0));
        assert_eq!(rgb_to_hsv([0, 255, 0]).0, 120.0);
        assert_eq!(rgb_to_hsv([0, 0, 255]).0, 240.0);
        assert_eq!(hsv_to_rgb(240.0, 1.0, 1.0), [0, 0, 255]);
        assert_eq!(hsv_to_rgb(-120.0, 1.0, 1.0), [0, 0, 255]);
    }

    #[test]
    fn every_color_round_trips_within_one() {
        for r in (0..=255).step_by(5) {
            for g in (0..=255).step_by(5) {
                for b in (0..=255).step_by(17) {
                    let rgb = [r as u8, g as u8, b as u8];
                    let (h, s, v) = rgb_to_hsv(rgb);
                    let back = hsv_to_rgb(h, s, v);
                    for c in 0..3 {
                        assert!((back[c] as i32 - rgb[c] as i32).abs() <= 1, "{rgb:?} -> {back:?}");
                    }
                }
            }
        }
    }
}
