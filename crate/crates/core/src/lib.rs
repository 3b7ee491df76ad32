//! Asset pipeline for simulation-ready manipulation objects.
//!
//! From a triangle mesh the pipeline produces a consolidated [`model::AssetRecord`]
//! (physical properties, captions, functional and grasp points, verified
//! 6-DoF grasps and a placement annotation), then builds collision-free
//! tabletop layouts, grounded VQA pairs and a human review service on top of
//! those records.

pub mod clients;
pub mod geometry;
pub mod grasp;
pub mod layout;
pub mod model;
pub mod pipeline;
pub mod review;
pub mod vqa;
