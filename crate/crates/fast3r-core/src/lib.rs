//! Single-pass multi-view pointmap reconstruction at desk scale.
//!
//! A fusion-transformer model maps N unordered RGB views to per-pixel 3D
//! pointmaps (in each camera's own frame and in the first camera's frame)
//! plus confidence maps, in one forward pass. The crate also contains the
//! synthetic scene renderer used as ground truth, the confidence-weighted
//! normalized regression losses and their analytic gradients, an AdamW
//! training loop, RANSAC-PnP camera recovery from predicted pointmaps, and
//! the alignment / evaluation metrics used downstream.

pub mod align;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod pose;
pub mod synthgen;
pub mod trainer;
