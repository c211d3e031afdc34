//! Link-level simulator for task-driven digital MIMO transport of image
//! feature pyramids.
//!
//! The library models a closed-loop SVD-precoded N×N MIMO link carrying a
//! compressed feature pyramid over a digital baseband (tanh → m-bit uniform
//! quantization → Gray-mapped QPSK → precoding), together with forward-only
//! implementations of the hierarchical feature fusion/split and MIMO
//! channel-aware encoding/decoding operators that sit around the link.
//!
//! Top-level modules:
//!
//! - [`channel`]: Rayleigh block-fading channel, SVD precoding/combining,
//!   per-sub-channel equivalent SNR, AWGN injection.
//! - [`baseband`]: stream mapping, quantizer, bit packing, QPSK modem, and
//!   the end-to-end `transport_frame` chain.
//! - [`neuro`]: feature-map tensors, conv/pool/SE/BN operators, HFF/HFS,
//!   MCE/MCD, weight bundles and the synthetic pyramid generator.
//! - [`metrics`]: Monte Carlo BER estimation, feature distortion reports,
//!   sweep driver, CSV/JSON emission.
//! - [`config`]: run configuration for the CLI.

pub mod baseband;
pub mod channel;
pub mod config;
pub mod error;
pub mod golden;
pub mod metrics;
pub mod neuro;
pub mod pipeline;
pub mod rng;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
