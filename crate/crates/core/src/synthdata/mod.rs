//! Deterministic synthetic cardiac-like phantoms.
//!
//! Each sample is a bright disk (class 1) enclosed by a dark ring (class 2)
//! with a bright blob beside it (class 3), inside a textured body ellipse,
//! optionally with a bright distractor blob labelled background. Geometry
//! is a pure function of the seed; the vendor only changes appearance
//! (blur, contrast, gamma, noise), which gives a controlled domain gap.

mod augment;
mod batch;
mod pgm;
mod phantom;
mod splits;
mod vendor;

pub use augment::{augment, augment_with, AugmentParams};
pub use batch::{stack_inputs, standardize};
pub use pgm::{read_pgm, write_pgm16, write_pgm8};
pub use phantom::{generate, ring_encloses_disk, SegmentationSample, BACKGROUND, LV, MYO, NUM_CLASSES, RV};
pub use splits::{make_splits, DatasetManifest, ManifestEntry, Split, SplitConfig};
pub use vendor::{gaussian_blur, michelson_contrast, Vendor, VendorShift};
