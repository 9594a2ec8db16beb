//! The unified per-frame pose vector.
//!
//! Every frame is a flat 669-float vector laid out as
//!
//! | offset      | width | content                                          |
//! |-------------|-------|--------------------------------------------------|
//! | `0..4`      | 4     | root yaw velocity, root XZ velocity, root height |
//! | `4..157`    | 153   | root-relative positions of joints 1..51          |
//! | `157..313`  | 156   | per-frame displacement of joints 0..51           |
//! | `313..619`  | 306   | local 6D rotations of joints 1..51               |
//! | `619..669`  | 50    | facial expression coefficients                   |
//!
//! Velocities are per-frame displacements; the frame rate travels alongside
//! the frames in [`MotionSequence`].

pub(crate) mod convert;
mod layout;
mod rotation;
mod skeleton;

pub use convert::{
    complete_missing_parts, keypoints_to_unified, keypoints_to_unified_with, rest_frame,
    unified_to_keypoints, yaw_rotation, IdentityIk, InverseKinematics, KeypointFrame, KnownRotations,
};
pub use layout::{canonical_layout, Part, PartLayout};
pub use rotation::{matrix_to_rot6d, rot6d_to_matrix, IDENTITY_6D};
pub use skeleton::{forward_kinematics, Skeleton};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Joints in the unified skeleton: 22 body joints followed by 2×15 hand joints.
pub const NUM_JOINTS: usize = 52;
/// Body parts the model treats as independent tokens.
pub const NUM_PARTS: usize = 10;
pub const FACE_DIM: usize = 50;
pub const FRAME_DIM: usize = 669;

pub const ROOT_ANGULAR_VEL: usize = 0;
pub const ROOT_LIN_VEL_X: usize = 1;
pub const ROOT_LIN_VEL_Z: usize = 2;
pub const ROOT_HEIGHT: usize = 3;
pub const JOINT_POS_OFFSET: usize = 4;
pub const JOINT_VEL_OFFSET: usize = JOINT_POS_OFFSET + 3 * (NUM_JOINTS - 1);
pub const JOINT_ROT_OFFSET: usize = JOINT_VEL_OFFSET + 3 * NUM_JOINTS;
pub const FACE_OFFSET: usize = JOINT_ROT_OFFSET + 6 * (NUM_JOINTS - 1);

const _: () = assert!(FACE_OFFSET + FACE_DIM == FRAME_DIM);

/// One frame of the unified representation in structured form.
#[derive(Clone, Debug, PartialEq)]
pub struct UnifiedFrame {
    /// Yaw change to the next frame, radians/frame.
    pub root_angular_vel: f64,
    /// Root displacement to the next frame in the current heading frame, m/frame.
    pub root_lin_vel_x: f64,
    pub root_lin_vel_z: f64,
    /// Root height above the ground plane, meters.
    pub root_height: f64,
    /// Joints 1..51 relative to the root, heading-aligned, meters.
    pub joint_pos: [[f64; 3]; NUM_JOINTS - 1],
    /// Joints 0..51 displacement to the next frame, heading-aligned, m/frame.
    pub joint_vel: [[f64; 3]; NUM_JOINTS],
    /// Local rotations of joints 1..51 in 6D form.
    pub joint_rot: [[f64; 6]; NUM_JOINTS - 1],
    pub face: [f64; FACE_DIM],
}

impl Default for UnifiedFrame {
    fn default() -> Self {
        Self {
            root_angular_vel: 0.0,
            root_lin_vel_x: 0.0,
            root_lin_vel_z: 0.0,
            root_height: 0.0,
            joint_pos: [[0.0; 3]; NUM_JOINTS - 1],
            joint_vel: [[0.0; 3]; NUM_JOINTS],
            joint_rot: [[0.0; 6]; NUM_JOINTS - 1],
            face: [0.0; FACE_DIM],
        }
    }
}

impl UnifiedFrame {
    pub fn pack(&self) -> [f64; FRAME_DIM] {
        let mut out = [0.0; FRAME_DIM];
        self.pack_into(&mut out);
        out
    }

    pub fn pack_into(&self, out: &mut [f64; FRAME_DIM]) {
        out[ROOT_ANGULAR_VEL] = self.root_angular_vel;
        out[ROOT_LIN_VEL_X] = self.root_lin_vel_x;
        out[ROOT_LIN_VEL_Z] = self.root_lin_vel_z;
        out[ROOT_HEIGHT] = self.root_height;
        for (dst, src) in out[JOINT_POS_OFFSET..JOINT_VEL_OFFSET]
            .chunks_exact_mut(3)
            .zip(&self.joint_pos)
        {
            dst.copy_from_slice(src);
        }
        for (dst, src) in out[JOINT_VEL_OFFSET..JOINT_ROT_OFFSET]
            .chunks_exact_mut(3)
            .zip(&self.joint_vel)
        {
            dst.copy_from_slice(src);
        }
        for (dst, src) in out[JOINT_ROT_OFFSET..FACE_OFFSET]
            .chunks_exact_mut(6)
            .zip(&self.joint_rot)
        {
            dst.copy_from_slice(src);
        }
        out[FACE_OFFSET..].copy_from_slice(&self.face);
    }

    pub fn unpack(v: &[f64]) -> Result<Self> {
        if v.len() != FRAME_DIM {
            return Err(Error::dim("unpack", FRAME_DIM, v.len()));
        }
        let mut f = UnifiedFrame {
            root_angular_vel: v[ROOT_ANGULAR_VEL],
            root_lin_vel_x: v[ROOT_LIN_VEL_X],
            root_lin_vel_z: v[ROOT_LIN_VEL_Z],
            root_height: v[ROOT_HEIGHT],
            ..Default::default()
        };
        for (dst, src) in f
            .joint_pos
            .iter_mut()
            .zip(v[JOINT_POS_OFFSET..JOINT_VEL_OFFSET].chunks_exact(3))
        {
            dst.copy_from_slice(src);
        }
        for (dst, src) in f
            .joint_vel
            .iter_mut()
            .zip(v[JOINT_VEL_OFFSET..JOINT_ROT_OFFSET].chunks_exact(3))
        {
            dst.copy_from_slice(src);
        }
        for (dst, src) in f
            .joint_rot
            .iter_mut()
            .zip(v[JOINT_ROT_OFFSET..FACE_OFFSET].chunks_exact(6))
        {
            dst.copy_from_slice(src);
        }
        f.face.copy_from_slice(&v[FACE_OFFSET..]);
        Ok(f)
    }
}

/// How the joint rotation channels of a sequence were obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationSource {
    /// Rotations came with the source data.
    #[default]
    Measured,
    /// Keypoint-only source; rotations set to identity.
    Identity,
    /// Rotations produced by an inverse-kinematics solver.
    Solver,
}

/// A motion clip: `F >= 1` frames at a fixed rate.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionSequence {
    frames: Vec<UnifiedFrame>,
    fps: f64,
    pub parts_present: [bool; NUM_PARTS],
    pub dataset: String,
    pub rotation_source: RotationSource,
}

impl MotionSequence {
    pub fn new(
        frames: Vec<UnifiedFrame>,
        fps: f64,
        parts_present: [bool; NUM_PARTS],
        dataset: impl Into<String>,
    ) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Validation("a motion sequence needs at least one frame".into()));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::Validation(format!("fps must be positive, got {fps}")));
        }
        Ok(Self {
            frames,
            fps,
            parts_present,
            dataset: dataset.into(),
            rotation_source: RotationSource::Measured,
        })
    }

    /// Builds a sequence from an `F × 669` matrix.
    pub fn from_matrix(
        m: &Array2<f64>,
        fps: f64,
        parts_present: [bool; NUM_PARTS],
        dataset: impl Into<String>,
    ) -> Result<Self> {
        if m.ncols() != FRAME_DIM {
            return Err(Error::dim("motion matrix width", FRAME_DIM, m.ncols()));
        }
        let frames = m
            .rows()
            .into_iter()
            .map(|row| UnifiedFrame::unpack(&row.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(frames, fps, parts_present, dataset)
    }

    pub fn to_matrix(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.frames.len(), FRAME_DIM));
        let mut buf = [0.0; FRAME_DIM];
        for (mut row, f) in m.rows_mut().into_iter().zip(&self.frames) {
            f.pack_into(&mut buf);
            row.as_slice_mut().expect("standard layout").copy_from_slice(&buf);
        }
        m
    }

    /// Same metadata, new frames. `frames` must be non-empty.
    pub fn with_frames(&self, frames: Vec<UnifiedFrame>) -> Result<Self> {
        let mut out = Self::new(frames, self.fps, self.parts_present, self.dataset.clone())?;
        out.rotation_source = self.rotation_source;
        Ok(out)
    }

    pub fn with_fps(mut self, fps: f64) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::Validation(format!("fps must be positive, got {fps}")));
        }
        self.fps = fps;
        Ok(self)
    }

    pub fn frames(&self) -> &[UnifiedFrame] {
        &self.frames
    }

    pub fn frames_mut(&mut self) -> &mut [UnifiedFrame] {
        &mut self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    /// Real time of frame `k`, seconds from the clip start.
    pub fn time_of(&self, k: usize) -> f64 {
        k as f64 / self.fps
    }

    pub fn duration(&self) -> f64 {
        self.time_of(self.frames.len() - 1)
    }
}
