use serde::{Deserialize, Serialize};

use super::AugmentError;

/// Augmentation magnitudes and probabilities for one training phase.
///
/// Geometric magnitudes are symmetric ranges: rotation and shear are drawn
/// from `±deg`, translation from `±frac` of the image size, and scale from
/// `[1 - scale_factor, 1 + scale_factor]` (so 0.7 means gains in
/// `[0.3, 1.7]`). Photometric magnitudes work the same way: hue shifts by
/// `±hue_frac` of the color wheel, saturation and value gains are drawn from
/// `1 ± frac`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPhasePreset {
    pub rotation_deg: f64,
    pub translation_frac: f64,
    pub scale_factor: f64,
    pub shear_deg: f64,
    pub hflip_p: f64,
    pub mosaic_p: f64,
    pub mixup_p: f64,
    pub copypaste_p: f64,
    pub hue_frac: f64,
    pub sat_frac: f64,
    pub val_frac: f64,
}

/// Spatially heavy preset for the feature-learning stage.
pub fn stage1_preset() -> AugmentationPhasePreset {
    AugmentationPhasePreset {
        rotation_deg: 8.0,
        translation_frac: 0.15,
        scale_factor: 0.7,
        shear_deg: 3.0,
        hflip_p: 0.50,
        mosaic_p: 1.0,
        mixup_p: 0.15,
        copypaste_p: 0.40,
        hue_frac: 0.01,
        sat_frac: 0.80,
        val_frac: 0.50,
    }
}

/// Photometric-leaning preset for fine-tuning.
pub fn stage2_preset() -> AugmentationPhasePreset {
    AugmentationPhasePreset {
        rotation_deg: 3.0,
        translation_frac: 0.08,
        scale_factor: 0.4,
        shear_deg: 1.0,
        hflip_p: 0.30,
        mosaic_p: 0.70,
        mixup_p: 0.08,
        copypaste_p: 0.20,
        hue_frac: 0.02,
        sat_frac: 0.90,
        val_frac: 0.70,
    }
}

impl AugmentationPhasePreset {
    /// All-zero preset: the pipeline leaves every sample untouched.
    pub fn identity() -> Self {
        Self {
            rotation_deg: 0.0,
            translation_frac: 0.0,
            scale_factor: 0.0,
            shear_deg: 0.0,
            hflip_p: 0.0,
            mosaic_p: 0.0,
            mixup_p: 0.0,
            copypaste_p: 0.0,
            hue_frac: 0.0,
            sat_frac: 0.0,
            val_frac: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        for (name, p) in [
            ("hflip_p", self.hflip_p),
            ("mosaic_p", self.mosaic_p),
            ("mixup_p", self.mixup_p),
            ("copypaste_p", self.copypaste_p),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(AugmentError::Preset(format!("{name} = {p} is not a probability")));
            }
        }
        for (name, m) in [
            ("rotation_deg", self.rotation_deg),
            ("translation_frac", self.translation_frac),
            ("scale_factor", self.scale_factor),
            ("shear_deg", self.shear_deg),
            ("hue_frac", self.hue_frac),
            ("sat_frac", self.sat_frac),
            ("val_frac", self.val_frac),
        ] {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(AugmentError::Preset(format!("{name} = {m} must be a non-negative number")));
            }
        }
        if self.scale_factor >= 1.0 {
            return Err(AugmentError::Preset("scale_factor must be below 1 so scale stays positive".into()));
        }
        if self.rotation_deg >= 90.0 || self.shear_deg >= 90.0 {
            return Err(AugmentError::Preset("rotation and shear must stay within ±90°".into()));
        }
        Ok(())
    }

    fn field_mut(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "rotation_deg" => &mut self.rotation_deg,
            "translation_frac" => &mut self.translation_frac,
            "scale_factor" => &mut self.scale_factor,
            "shear_deg" => &mut self.shear_deg,
            "hflip_p" => &mut self.hflip_p,
            "mosaic_p" => &mut self.mosaic_p,
            "mixup_p" => &mut self.mixup_p,
            "copypaste_p" => &mut self.copypaste_p,
            "hue_frac" => &mut self.hue_frac,
            "sat_frac" => &mut self.sat_frac,
            "val_frac" => &mut self.val_frac,
            _ => return None,
        })
    }

    /// Applies `key = value` lines (`:` also accepted, `#` starts a
    /// comment) on top of `self`, then validates the result.
    pub fn with_overrides(mut self, text: &str) -> Result<Self, AugmentError> {
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| AugmentError::Override { line: line_no, reason };
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let slot = self
                .field_mut(key)
                .ok_or_else(|| err(format!("unknown preset field `{key}`")))?;
            *slot = value
                .parse::<f64>()
                .map_err(|_| err(format!("`{value}` is not a number")))?;
        }
        self.validate()?;
        Ok(self)
    }
}
