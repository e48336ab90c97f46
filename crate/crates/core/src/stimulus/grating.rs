use std::f64::consts::PI;

use crate::ndnum::Tensor;

/// Frequency of the illustrative grating family, `8/(2π)` radians per pixel.
pub const EXAMPLE_FREQUENCY: f64 = 8.0 / (2.0 * PI);

/// `0.5 + 0.5·sin(f·(x·cosθ + y·sinθ) + φ)` at column `x`, row `y`.
pub fn grating_pixel(x: usize, y: usize, theta_deg: f64, frequency: f64, phase: f64) -> f64 {
    let theta = theta_deg.to_radians();
    let u = x as f64 * theta.cos() + y as f64 * theta.sin();
    0.5 + 0.5 * (frequency * u + phase).sin()
}

/// Greyscale sinusoidal grating, `size×size×3` with identical channels.
pub fn grating(theta_deg: f64, frequency: f64, phase: f64, size: usize) -> Tensor {
    let mut data = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let v = grating_pixel(x, y, theta_deg, frequency, phase) as f32;
            data.extend([v, v, v]);
        }
    }
    Tensor::new(&[size, size, 3], data).expect("grating dims")
}
