//! Deterministic toolkit for synthesizing curvilinear-structure masks.
//!
//! The pipeline grows branching trees with a space colonization algorithm
//! ([`sca`]), assigns vessel-like radii, rasterizes them to binary masks and
//! post-processes those masks ([`raster`]), simulates quick noisy skeleton
//! annotations and inpainting masks ([`maskgen`]), persists curve/background
//! banks with reproducible manifests ([`bank`]), and evaluates segmentations
//! with overlap, surface-distance, and topology metrics plus loss kernels
//! ([`metrics`]). Built-in generation recipes live in [`preset`].
//!
//! Every operation is a pure function of its inputs and a 64-bit seed;
//! identical inputs produce byte-identical outputs.

pub mod bank;
pub mod fsio;
pub mod geom;
pub mod maskgen;
pub mod metrics;
pub mod preset;
pub mod raster;
pub mod rng;
pub mod sca;

pub use bank::{BankEntry, BankEntryKind, BankManifest, Histogram256, PairEntry};
pub use geom::{Point2, Region};
pub use maskgen::{ChainMaskParams, RectMaskParams};
pub use metrics::{ConfusionCounts, EvalReport, ImageEval, ProbMap};
pub use preset::{GeneratedMask, PostOp, Preset};
pub use raster::{ElasticParams, FlipAxis, GrayImage, Mask, StructuringElement};
pub use sca::{
    Attractor, CurveNode, CurveTree, Growth, GrowthConfig, ObstacleSpec, RootSpec,
};
