use crate::error::{Error, Result};

/// Saturation of every probe hue patch.
pub const PROBE_SATURATION: f64 = 1.0;
/// Lightness of every probe hue patch (equiluminant).
pub const PROBE_LIGHTNESS: f64 = 0.5;

/// HSL → RGB on the 0–255 scale, unrounded.
///
/// `C = (1 - |2L - 1|)·S`, `X = C·(1 - |(H/60) mod 2 - 1|)`, `m = L - C/2`,
/// with `(R', G', B')` chosen by the 60° sextant of `H` and each channel
/// returned as `(c' + m)·255`.
pub fn hsl_to_rgb(hue: f64, saturation: f64, lightness: f64) -> Result<[f64; 3]> {
    if !(0.0..360.0).contains(&hue) {
        return Err(Error::HueOutOfRange(hue));
    }
    if !(0.0..=1.0).contains(&saturation) || !(0.0..=1.0).contains(&lightness) {
        return Err(Error::InvalidConfig(format!(
            "saturation {saturation} / lightness {lightness} outside [0, 1]"
        )));
    }
    let c = (1.0 - (2.0 * lightness - 1.0).abs()) * saturation;
    let x = c * (1.0 - ((hue / 60.0) % 2.0 - 1.0).abs());
    let m = lightness - c / 2.0;
    let (r, g, b) = match (hue / 60.0) as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    Ok([(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0])
}

/// [`hsl_to_rgb`] rounded to bytes.
pub fn hsl_to_rgb_bytes(hue: f64, saturation: f64, lightness: f64) -> Result<[u8; 3]> {
    Ok(hsl_to_rgb(hue, saturation, lightness)?.map(|v| v.round().clamp(0.0, 255.0) as u8))
}

/// Pixel value in [0, 1] of the fully saturated, equiluminant patch for `hue`.
pub fn probe_hue_rgb(hue: f64) -> Result<[f32; 3]> {
    Ok(hsl_to_rgb_bytes(hue, PROBE_SATURATION, PROBE_LIGHTNESS)?.map(|b| b as f32 / 255.0))
}
