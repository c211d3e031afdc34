//! Forward-only neural feature operators: tensors, primitive ops, the
//! HFF/HFS fusion pair, the MCE/MCD channel-aware stacks, weight bundles,
//! and synthetic inputs.

pub mod fusion;
pub mod mce;
pub mod ops;
pub mod synth;
pub mod tensor;
#[doc(hidden)]
pub mod test_oracles;
pub mod weights;

pub use fusion::{hff_forward, hfs_forward};
pub use mce::{fc_compress, fc_decompress, mcd_forward, mce_forward, MceConfig};
pub use tensor::{FeatureMap, FeaturePyramid};
pub use weights::{init_weights, ArchConfig, WeightBundle};
