//! CIFAR-10 binary batches: 3073-byte records of one label byte followed by
//! the red, green and blue 32×32 planes, each row-major.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ndnum::Tensor;

pub const SIDE: usize = 32;
pub const CHANNELS: usize = 3;
pub const PLANE: usize = SIDE * SIDE;
pub const RECORD_BYTES: usize = 1 + CHANNELS * PLANE;
pub const CLASSES: usize = 10;

pub const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const TEST_FILE: &str = "test_batch.bin";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn files(self) -> &'static [&'static str] {
        match self {
            Split::Train => &TRAIN_FILES,
            Split::Test => std::slice::from_ref(&TEST_FILE),
        }
    }

    /// Image count of the published dataset.
    pub fn standard_len(self) -> usize {
        match self {
            Split::Train => 50_000,
            Split::Test => 10_000,
        }
    }
}

/// Images as `N×32×32×3` in [0, 1] with their class labels.
#[derive(Clone, Debug)]
pub struct Cifar10Set {
    pub images: Tensor,
    pub labels: Vec<u8>,
    pub split: Split,
}

impl Cifar10Set {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, index: usize) -> &[f32] {
        let n = PLANE * CHANNELS;
        &self.images.data()[index * n..(index + 1) * n]
    }

    /// First `n` images (or all of them).
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let n = n.min(self.len());
        Ok(Self {
            images: self.images.slice_outer(0, n)?,
            labels: self.labels[..n].to_vec(),
            split: self.split,
        })
    }

    /// True when the set has exactly the published image count.
    pub fn is_standard_size(&self) -> bool {
        self.len() == self.split.standard_len()
    }
}

/// Decode one batch file into interleaved `H×W×C` pixels and labels.
pub fn read_batch(path: &Path) -> Result<(Vec<f32>, Vec<u8>)> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path)?;
    decode_batch(&bytes, path)
}

fn decode_batch(bytes: &[u8], path: &Path) -> Result<(Vec<f32>, Vec<u8>)> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(RECORD_BYTES) {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            detail: format!(
                "{} bytes is not a whole number of {RECORD_BYTES}-byte records",
                bytes.len()
            ),
        });
    }
    let records = bytes.len() / RECORD_BYTES;
    let mut pixels = Vec::with_capacity(records * PLANE * CHANNELS);
    let mut labels = Vec::with_capacity(records);
    for (i, record) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
        let label = record[0];
        if label as usize >= CLASSES {
            return Err(Error::Format(format!(
                "{}: record {i} has label {label}",
                path.display()
            )));
        }
        labels.push(label);
        let planes = &record[1..];
        for p in 0..PLANE {
            for c in 0..CHANNELS {
                pixels.push(planes[c * PLANE + p] as f32 / 255.0);
            }
        }
    }
    Ok((pixels, labels))
}

/// Encode interleaved `N×32×32×3` pixels back into the planar record format.
pub fn encode_batch(pixels: &[f32], labels: &[u8]) -> Result<Vec<u8>> {
    if pixels.len() != labels.len() * PLANE * CHANNELS {
        return Err(Error::Shape(format!(
            "{} pixels for {} labels",
            pixels.len(),
            labels.len()
        )));
    }
    let mut out = Vec::with_capacity(labels.len() * RECORD_BYTES);
    for (image, &label) in pixels.chunks_exact(PLANE * CHANNELS).zip(labels) {
        out.push(label);
        for c in 0..CHANNELS {
            for p in 0..PLANE {
                out.push((image[p * CHANNELS + c].clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    Ok(out)
}

pub fn write_batch(path: &Path, pixels: &[f32], labels: &[u8]) -> Result<()> {
    fs::write(path, encode_batch(pixels, labels)?)?;
    Ok(())
}

/// Load the train (five batches) or test split from a directory of `.bin` files.
pub fn load_cifar10(dir: &Path, split: Split) -> Result<Cifar10Set> {
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for name in split.files() {
        let path: PathBuf = dir.join(name);
        let (p, l) = read_batch(&path)?;
        pixels.extend(p);
        labels.extend(l);
    }
    let images = Tensor::new(&[labels.len(), SIDE, SIDE, CHANNELS], pixels)?;
    Ok(Cifar10Set { images, labels, split })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_record_decodes_to_black_label_zero() {
        let bytes = vec![0u8; RECORD_BYTES];
        let (pixels, labels) = decode_batch(&bytes, Path::new("x")).unwrap();
        assert_eq!(labels, vec![0]);
        assert!(pixels.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn byte_255_is_exactly_one() {
        let mut bytes = vec![255u8; RECORD_BYTES];
        bytes[0] = 9;
        let (pixels, labels) = decode_batch(&bytes, Path::new("x")).unwrap();
        assert_eq!(labels, vec![9]);
        assert!(pixels.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn planar_layout_becomes_interleaved() {
        let mut bytes = vec![0u8; RECORD_BYTES];
        bytes[1] = 10; // red (0,0)
        bytes[1 + PLANE] = 20; // green (0,0)
        bytes[1 + 2 * PLANE + 33] = 30; // blue (1,1)
        let (pixels, _) = decode_batch(&bytes, Path::new("x")).unwrap();
        assert_eq!(pixels[0], 10.0 / 255.0);
        assert_eq!(pixels[1], 20.0 / 255.0);
        assert_eq!(pixels[(SIDE + 1) * 3 + 2], 30.0 / 255.0);
    }

    #[test]
    fn partial_record_is_truncation() {
        let bytes = vec![0u8; RECORD_BYTES + 100];
        assert!(matches!(decode_batch(&bytes, Path::new("x")), Err(Error::Truncated { .. })));
        assert!(matches!(decode_batch(&[], Path::new("x")), Err(Error::Truncated { .. })));
    }

    #[test]
    fn bad_label_rejected() {
        let mut bytes = vec![0u8; RECORD_BYTES];
        bytes[0] = 10;
        assert!(matches!(decode_batch(&bytes, Path::new("x")), Err(Error::Format(_))));
    }

    #[test]
    fn missing_directory() {
        let err = load_cifar10(Path::new("/definitely/not/here"), Split::Test).unwrap_err();
        assert!(matches!(err, Error::MissingFile(_)));
    }
}
