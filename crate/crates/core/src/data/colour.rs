use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndnum::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum ColourSpace {
    #[default]
    Rgb,
    Lab,
    Grey,
}

impl ColourSpace {
    pub fn code(self) -> u8 {
        match self {
            ColourSpace::Rgb => 0,
            ColourSpace::Lab => 1,
            ColourSpace::Grey => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(ColourSpace::Rgb),
            1 => Ok(ColourSpace::Lab),
            2 => Ok(ColourSpace::Grey),
            other => Err(Error::Format(format!("unknown colour space code {other}"))),
        }
    }

    /// Map RGB pixels in [0, 1] into this space.
    pub fn convert(self, rgb: &Tensor) -> Tensor {
        match self {
            ColourSpace::Rgb => rgb.clone(),
            ColourSpace::Lab => rgb_to_lab(rgb),
            ColourSpace::Grey => to_greyscale(rgb),
        }
    }

    pub fn convert_in_place(self, pixels: &mut [f32]) {
        match self {
            ColourSpace::Rgb => {}
            ColourSpace::Lab => pixels.chunks_exact_mut(3).for_each(|p| {
                let lab = lab_pixel([p[0], p[1], p[2]]);
                p.copy_from_slice(&lab);
            }),
            ColourSpace::Grey => pixels.chunks_exact_mut(3).for_each(|p| {
                let y = luma([p[0], p[1], p[2]]);
                p.fill(y);
            }),
        }
    }
}

impl fmt::Display for ColourSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColourSpace::Rgb => "rgb",
            ColourSpace::Lab => "lab",
            ColourSpace::Grey => "grey",
        })
    }
}

impl FromStr for ColourSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rgb" => Ok(ColourSpace::Rgb),
            "lab" | "cielab" => Ok(ColourSpace::Lab),
            "grey" | "gray" | "greyscale" => Ok(ColourSpace::Grey),
            other => Err(Error::InvalidConfig(format!("unknown colour space '{other}'"))),
        }
    }
}

/// BT.601 luma.
pub fn luma([r, g, b]: [f32; 3]) -> f32 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// Replace each pixel by its luma in all three channels.
pub fn to_greyscale(rgb: &Tensor) -> Tensor {
    let mut out = rgb.clone();
    ColourSpace::Grey.convert_in_place(out.data_mut());
    out
}

// sRGB primaries, D65 white
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];
const WHITE_D65: [f64; 3] = [0.950_47, 1.0, 1.088_83];

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Unscaled CIE L*a*b* of one sRGB pixel.
pub fn srgb_to_cielab(rgb: [f32; 3]) -> [f64; 3] {
    let lin = rgb.map(|c| srgb_to_linear(c as f64));
    let xyz: Vec<f64> = RGB_TO_XYZ
        .iter()
        .map(|row| row.iter().zip(&lin).map(|(m, c)| m * c).sum())
        .collect();
    let fx = lab_f(xyz[0] / WHITE_D65[0]);
    let fy = lab_f(xyz[1] / WHITE_D65[1]);
    let fz = lab_f(xyz[2] / WHITE_D65[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// L*/100, (a*+128)/255, (b*+128)/255.
pub fn lab_pixel(rgb: [f32; 3]) -> [f32; 3] {
    let [l, a, b] = srgb_to_cielab(rgb);
    [(l / 100.0) as f32, ((a + 128.0) / 255.0) as f32, ((b + 128.0) / 255.0) as f32]
}

pub fn rgb_to_lab(rgb: &Tensor) -> Tensor {
    let mut out = rgb.clone();
    ColourSpace::Lab.convert_in_place(out.data_mut());
    out
}
