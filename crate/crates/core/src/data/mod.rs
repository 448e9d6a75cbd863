//! Training data: baking images onto vertices, per-face atlas conversion,
//! baked-sample files, split files and padded multi-shape batches.

mod batch;
mod image;
mod sample;
pub mod shapenet;

pub use batch::{build_batch, masked_loss, PaddedBatch, DEFAULT_CAPACITY};
pub use image::{bake_image_to_vertices, load_image, read_uv_file, RgbImage};
pub use sample::{
    atlas_to_vertices, decode_sample, encode_sample, read_partition_file, read_sample, read_split, write_sample,
    write_split, Partition, TexturedSample,
};

/// CelebA-HQ partition sizes (train / test; the validation partition is unused).
pub const CELEBA_HQ_TRAIN: usize = 24_183;
pub const CELEBA_HQ_TEST: usize = 2_824;
/// ShapeNetCore chair split sizes (train / test).
pub const SHAPENET_CHAIR_TRAIN: usize = 2_412;
pub const SHAPENET_CHAIR_TEST: usize = 311;
