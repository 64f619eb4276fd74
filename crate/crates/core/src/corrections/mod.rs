//! Image distortion corrections applied to frames before detection, and the
//! batch pipeline that runs them over a frame directory.

mod filters;
mod image;
mod pipeline;
mod webp;

pub use self::image::{psnr, Image};
pub use filters::{
    gamma_correction, gamma_lut, gaussian_denoise, gaussian_kernel, horizontal_flip, mirror_box, unsharp_mask,
    unsharp_radius,
};
pub(crate) use pipeline::sha256_hex;
pub use pipeline::{
    apply_pipeline, ApplyOptions, CorrectionPipeline, Manifest, ManifestEntry, Stage, MANIFEST_FILE,
    MANIFEST_SCHEMA_VERSION,
};
pub use webp::{webp_compress, webp_decode, webp_encode};
