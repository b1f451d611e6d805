//! Face-region features: five boxes around a face, Gabor/LBP/HOG
//! descriptors per box, PCA per descriptor type, concatenation.

pub mod boxes;
pub mod gabor;
pub mod hog;
pub mod image;
pub mod lbp;
pub mod reduce;

/// Side of every resampled box.
pub const PATCH_SIZE: usize = 128;

pub use boxes::{extract_boxes, load_box_table, resample, BoxLayout, BoxTable, FaceBoxFile, Rect};
pub use gabor::{gabor_features, GaborBank};
pub use hog::hog_features;
pub use image::GrayImage;
pub use lbp::lbp_histogram;
pub use reduce::{
    describe_image, describe_patch, fit_feature_pca, image_features, reduce_and_concat, DescriptorSet, FeaturePca,
    PcaDims, RawDescriptors,
};
