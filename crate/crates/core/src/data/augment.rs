//! Train-time image transforms on single `H×W×3` images.

use crate::ndnum::Rng;

/// Largest shift in pixels: 10% of a 32-pixel side, rounded.
pub const MAX_SHIFT: i64 = 3;

/// The six orderings of three channels, identity first.
pub const CHANNEL_PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Shift by `dx` columns and `dy` rows; vacated pixels become zero.
///
/// Output pixel `(y, x)` takes input pixel `(y - dy, x - dx)`.
pub fn translate(image: &[f32], h: usize, w: usize, c: usize, dx: i64, dy: i64) -> Vec<f32> {
    let mut out = vec![0.0; image.len()];
    for y in 0..h as i64 {
        let sy = y - dy;
        if sy < 0 || sy >= h as i64 {
            continue;
        }
        for x in 0..w as i64 {
            let sx = x - dx;
            if sx < 0 || sx >= w as i64 {
                continue;
            }
            let dst = ((y as usize) * w + x as usize) * c;
            let src = ((sy as usize) * w + sx as usize) * c;
            out[dst..dst + c].copy_from_slice(&image[src..src + c]);
        }
    }
    out
}

pub fn flip_horizontal(image: &[f32], h: usize, w: usize, c: usize) -> Vec<f32> {
    let mut out = vec![0.0; image.len()];
    for y in 0..h {
        for x in 0..w {
            let dst = (y * w + x) * c;
            let src = (y * w + (w - 1 - x)) * c;
            out[dst..dst + c].copy_from_slice(&image[src..src + c]);
        }
    }
    out
}

pub fn permute_channels(image: &[f32], perm: [usize; 3]) -> Vec<f32> {
    image
        .chunks_exact(3)
        .flat_map(|p| [p[perm[0]], p[perm[1]], p[perm[2]]])
        .collect()
}

/// Random flip (p = 0.5) then a uniform integer shift in `[-3, 3]` per axis.
pub fn augment(image: &[f32], h: usize, w: usize, rng: &mut Rng) -> Vec<f32> {
    let flip = rng.bernoulli(0.5);
    let dx = rng.range_inclusive(-MAX_SHIFT, MAX_SHIFT);
    let dy = rng.range_inclusive(-MAX_SHIFT, MAX_SHIFT);
    let base = if flip {
        flip_horizontal(image, h, w, 3)
    } else {
        image.to_vec()
    };
    translate(&base, h, w, 3, dx, dy)
}

/// Apply one of the six channel permutations drawn uniformly.
pub fn shuffle_channels(image: &[f32], rng: &mut Rng) -> Vec<f32> {
    let perm = CHANNEL_PERMUTATIONS[rng.below(6) as usize];
    permute_channels(image, perm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Vec<f32> {
        (0..h * w * 3).map(|i| (i % 97) as f32 / 97.0).collect()
    }

    #[test]
    fn zero_translation_is_identity() {
        let img = ramp(8, 8);
        assert_eq!(translate(&img, 8, 8, 3, 0, 0), img);
    }

    #[test]
    fn double_flip_is_identity() {
        let img = ramp(5, 7);
        assert_eq!(flip_horizontal(&flip_horizontal(&img, 5, 7, 3), 5, 7, 3), img);
    }

    #[test]
    fn shift_right_by_three() {
        let (h, w) = (6, 9);
        let img = ramp(h, w);
        let out = translate(&img, h, w, 3, 3, 0);
        for y in 0..h {
            for x in 0..w {
                let got = &out[(y * w + x) * 3..(y * w + x) * 3 + 3];
                if x >= 3 {
                    assert_eq!(got, &img[(y * w + x - 3) * 3..(y * w + x - 3) * 3 + 3]);
                } else {
                    assert_eq!(got, &[0.0; 3]);
                }
            }
        }
    }

    #[test]
    fn equal_channels_survive_shuffle() {
        let grey: Vec<f32> = (0..48).map(|i| ((i / 3) as f32) / 16.0).collect();
        let mut rng = Rng::new(1);
        for _ in 0..20 {
            assert_eq!(shuffle_channels(&grey, &mut rng), grey);
        }
        let img = ramp(4, 4);
        assert_eq!(permute_channels(&img, CHANNEL_PERMUTATIONS[0]), img);
    }

    #[test]
    fn augmented_shape_and_range() {
        let img = ramp(32, 32);
        let mut rng = Rng::new(2);
        for _ in 0..10 {
            let out = augment(&img, 32, 32, &mut rng);
            assert_eq!(out.len(), img.len());
            assert!(out.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn seeded_augmentation_reproduces() {
        let img = ramp(32, 32);
        let (mut a, mut b) = (Rng::new(5), Rng::new(5));
        assert_eq!(augment(&img, 32, 32, &mut a), augment(&img, 32, 32, &mut b));
    }
}
