//! Grasp post-processing: spatial filtering, diversity sampling, semantic
//! association and quasi-static verification.

mod filter;
mod verify;

pub use filter::{
    associate_semantics, fps_7dof, fps_7dof_indices, pose_distance, proximity_filter, FilterError,
    DEFAULT_GRASP_K, DEFAULT_PROXIMITY_THRESHOLD, DEFAULT_ROTATION_WEIGHT,
};
pub use verify::{
    check_penetration, close_fingers, force_closure, gripper_boxes, slide_directions, slide_resistance,
    verify_grasp, Contact, ContactSet, Finger, GripperBox, SlideResult, VerifyConfig, VerifyError,
    CONTACT_BAND_FRACTION, PAD_RAYS, SLIDE_FAIL_DISPLACEMENT,
};
