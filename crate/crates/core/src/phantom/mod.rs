//! Procedural ultrasound-like clips with ground truth, dataset manifests, the
//! GVID clip format and a steerable anatomy world.

mod anatomy;
mod clip;
mod dataset;
mod gvid;
mod mask;
mod render;

pub use anatomy::{render_at_pose, AnatomyMap, ProbePose, TorsoBounds, WorldVessel, MAX_THETA, WORLD_SIZE};
pub use clip::{
    generate_clip, mean_visible_centroid, GroundTruthFrame, Label, PhantomGroundTruth, PhantomParams, VesselParams,
    DEFAULT_SPECKLE, MIN_VESSEL_RADIUS,
};
pub use dataset::{
    clip_seed, generate_dataset, generate_entries, ClassCounts, DatasetSpec, Manifest, ManifestEntry, Split, CLIP_DIR,
    MANIFEST_NAME,
};
pub use gvid::{decode_clip, encode_clip, read_clip, write_clip};
pub use mask::{MaskShape, FAN_APERTURE_DEG, RECT_BORDER};
pub use render::INSIDE_FLOOR;
