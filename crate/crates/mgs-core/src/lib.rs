//! Ordered 2D Gaussian splat fitting with prefix-renderable models.
//!
//! The crate fits an importance-ordered set of anisotropic 2D Gaussian
//! splats to a target image so that rendering any prefix of the order gives
//! a coherent reconstruction, with fidelity growing in the budget. Training
//! samples a random budget each step and optimizes the sampled prefix
//! jointly with the full set; storage is re-sorted by importance after every
//! step, so truncating the splat array is all it takes to trade quality for
//! speed at deployment.
//!
//! Modules:
//! - [`splat`]: primitives, the ordered model, initialization
//! - [`render`]: tile-based alpha-compositing rasterizer
//! - [`grad`]: analytic backward pass and finite-difference oracle
//! - [`loss`]: L1 / SSIM reconstruction losses and the two-render objective
//! - [`ordering`]: importance scores and dynamic reordering
//! - [`train`]: stochastic budget training loop
//! - [`eval`]: PSNR/SSIM/quality metrics, sweeps, frontier envelopes
//! - [`checkpoint`]: binary model format plus optimizer-state sidecar
//! - [`scene`]: procedural target images
//! - [`image`]: f64 RGB raster container with PNG I/O

pub mod adam;
pub mod checkpoint;
pub mod error;
pub mod eval;
pub mod grad;
pub mod image;
pub mod loss;
pub mod ordering;
pub mod render;
pub mod scene;
pub mod splat;
pub mod train;

pub use adam::{AdamParams, AdamState, LearningRates};
pub use error::{Error, Result};
pub use eval::{Envelope, OperatingPoint};
pub use grad::{GradientBuffer, SplatGrad};
pub use image::Image;
pub use loss::LossConfig;
pub use ordering::{Direction, OrderingCriterion, ScoreKind};
pub use render::RenderSettings;
pub use splat::{InitConfig, Splat, SplatModel};
pub use train::{BudgetMode, TrainConfig, TrainLog, Trainer};
