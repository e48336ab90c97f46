//! CIFAR-10 ingestion, colour-space transforms and train-time augmentation.

pub mod augment;
pub mod cifar;
pub mod colour;

pub use augment::{augment, flip_horizontal, permute_channels, shuffle_channels, translate, CHANNEL_PERMUTATIONS};
pub use cifar::{
    encode_batch, load_cifar10, read_batch, write_batch, Cifar10Set, Split, CHANNELS, CLASSES, RECORD_BYTES, SIDE, TEST_FILE,
    TRAIN_FILES,
};
pub use colour::{lab_pixel, luma, rgb_to_lab, srgb_to_cielab, to_greyscale, ColourSpace};

/// Convert a whole set into the given colour space in place.
pub fn convert_set(set: &mut Cifar10Set, space: ColourSpace) {
    space.convert_in_place(set.images.data_mut());
}
