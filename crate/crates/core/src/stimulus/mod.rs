//! Probe stimuli: equiluminant hue patches, greyscale sinusoidal gratings and
//! the all-zero baseline image.

mod grating;
mod hsl;
mod sweep;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

pub use grating::{grating, grating_pixel, EXAMPLE_FREQUENCY};
pub use hsl::{hsl_to_rgb, hsl_to_rgb_bytes, probe_hue_rgb, PROBE_LIGHTNESS, PROBE_SATURATION};
pub use sweep::{
    default_frequencies, default_grating_sweep, default_orientations, default_phases, grating_sweep, hue_sweep,
    uniform_patch, zero_stimulus, Stimulus, StimulusKind, StimulusSweep, SweepGrid, DEFAULT_HUES,
};

use crate::error::{Error, Result};
use crate::ndnum::Tensor;

/// Write an `H×W×3` image in [0, 1] as an 8-bit RGB PNG. Lossy; for viewing only.
pub fn write_png(path: &Path, image: &Tensor) -> Result<()> {
    let &[h, w, 3] = image.dims() else {
        return Err(Error::Shape(format!("PNG export needs H×W×3, got {:?}", image.dims())));
    };
    let bytes: Vec<u8> = image
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let file = BufWriter::new(File::create(path)?);
    let mut encoder = png::Encoder::new(file, w as u32, h as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::Format(format!("png header: {e}")))?;
    writer
        .write_image_data(&bytes)
        .map_err(|e| Error::Format(format!("png data: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_export_writes_signature() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        write_png(&path, &grating(45.0, EXAMPLE_FREQUENCY, 0.0, 32)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n");
        assert!(write_png(&path, &Tensor::zeros(&[4, 4])).is_err());
    }
}
