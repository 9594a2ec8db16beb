use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::repr::{
    forward_kinematics, keypoints_to_unified_with, yaw_rotation, KeypointFrame, KnownRotations, MotionSequence,
    Skeleton, FACE_DIM, NUM_JOINTS,
};
use crate::rng;

/// Root displacement per frame for [`SynthPattern::ConstantVelocity`], meters.
pub const CONSTANT_STEP: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthPattern {
    /// Rest pose at the origin.
    Static,
    /// Rest pose sliding sideways along world X by a fixed step per frame.
    ConstantVelocity,
    /// Periodic limb swing with a one-second stride along a gently curving
    /// path.
    SineWalk,
}

impl SynthPattern {
    pub const ALL: [SynthPattern; 3] = [SynthPattern::Static, SynthPattern::ConstantVelocity, SynthPattern::SineWalk];

    pub fn name(self) -> &'static str {
        match self {
            SynthPattern::Static => "static",
            SynthPattern::ConstantVelocity => "constant_velocity",
            SynthPattern::SineWalk => "sine_walk",
        }
    }
}

impl fmt::Display for SynthPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SynthPattern::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown pattern `{s}`")))
    }
}

struct WalkParams {
    phase: f64,
    arm_phase: f64,
    face: [f64; FACE_DIM],
}

const LEFT_HIP: usize = 1;
const RIGHT_HIP: usize = 2;
const SPINE: usize = 3;
const LEFT_KNEE: usize = 4;
const RIGHT_KNEE: usize = 5;
const LEFT_SHOULDER: usize = 16;
const RIGHT_SHOULDER: usize = 17;
const LEFT_ELBOW: usize = 18;
const RIGHT_ELBOW: usize = 19;
const FIRST_HAND_JOINT: usize = 22;

fn about_x(a: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&Vector3::x_axis(), a).matrix()
}

fn about_y(a: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&Vector3::y_axis(), a).matrix()
}

/// Local rotations of all 52 joints at time `t`, root first.
fn walk_rotations(p: &WalkParams, t: f64, yaw: f64) -> Vec<Matrix3<f64>> {
    let stride = TAU * t + p.phase;
    let arms = TAU * t + p.arm_phase;
    let mut r = vec![Matrix3::identity(); NUM_JOINTS];
    r[0] = yaw_rotation(yaw);
    r[LEFT_HIP] = about_x(-0.5 * stride.sin());
    r[RIGHT_HIP] = about_x(0.5 * stride.sin());
    r[LEFT_KNEE] = about_x(0.3 * (1.0 - stride.cos()));
    r[RIGHT_KNEE] = about_x(0.3 * (1.0 + stride.cos()));
    r[SPINE] = about_y(0.05 * stride.sin());
    r[LEFT_SHOULDER] = about_x(0.3 * arms.sin());
    r[RIGHT_SHOULDER] = about_x(-0.3 * arms.sin());
    r[LEFT_ELBOW] = about_y(0.2 * (1.0 + arms.cos()));
    r[RIGHT_ELBOW] = about_y(-0.2 * (1.0 - arms.cos()));
    for (i, m) in r.iter_mut().enumerate().skip(FIRST_HAND_JOINT) {
        *m = about_x(0.1 * (arms + 0.2 * i as f64).sin());
    }
    r
}

/// Root path `(A(1 − cos ωt), h(t), v t)` with heading along its tangent.
fn walk_root(skeleton: &Skeleton, t: f64) -> (Vector3<f64>, f64) {
    let (amp, omega, speed) = (0.5, TAU / 8.0, 1.2);
    let pos = Vector3::new(
        amp * (1.0 - (omega * t).cos()),
        skeleton.rest_root_height + 0.02 * (2.0 * TAU * t).sin(),
        speed * t,
    );
    let yaw = (amp * omega * (omega * t).sin()).atan2(speed);
    (pos, yaw)
}

fn to_keypoints(positions: &[Vector3<f64>]) -> KeypointFrame {
    let mut kp = [[0.0; 3]; NUM_JOINTS];
    for (dst, p) in kp.iter_mut().zip(positions) {
        *dst = [p.x, p.y, p.z];
    }
    kp
}

/// Generates a synthetic clip starting at the origin facing +Z. Velocity
/// channels come from the keypoint converter, so all representation
/// invariants hold by construction.
pub fn synth_motion(pattern: SynthPattern, frames: usize, fps: f64, seed: u64) -> Result<MotionSequence> {
    if frames < 2 {
        return Err(Error::Length(format!("synthetic clips need at least 2 frames, got {frames}")));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::Validation(format!("fps must be positive, got {fps}")));
    }
    let skeleton = Skeleton::smplx();
    let mut r = rng::seeded(seed);
    let params = WalkParams {
        phase: r.random_range(0.0..TAU),
        arm_phase: r.random_range(0.0..TAU),
        face: std::array::from_fn(|_| r.random_range(-0.5..0.5)),
    };

    let mut keypoints = Vec::with_capacity(frames);
    let mut local = Vec::with_capacity(frames);
    for k in 0..frames {
        let t = k as f64 / fps;
        let (root, rots) = match pattern {
            SynthPattern::Static => (
                Vector3::new(0.0, skeleton.rest_root_height, 0.0),
                vec![Matrix3::identity(); NUM_JOINTS],
            ),
            SynthPattern::ConstantVelocity => (
                Vector3::new(CONSTANT_STEP * k as f64, skeleton.rest_root_height, 0.0),
                vec![Matrix3::identity(); NUM_JOINTS],
            ),
            SynthPattern::SineWalk => {
                let (root, yaw) = walk_root(&skeleton, t);
                (root, walk_rotations(&params, t, yaw))
            }
        };
        let positions = forward_kinematics(&skeleton, &root, &rots)?;
        keypoints.push(to_keypoints(&positions));
        local.push(rots[1..].to_vec());
    }

    let mut seq = keypoints_to_unified_with(&keypoints, fps, &KnownRotations(local))?;
    seq.dataset = format!("synth:{pattern}");
    if pattern == SynthPattern::SineWalk {
        for f in seq.frames_mut() {
            f.face = params.face;
        }
    }
    Ok(seq)
}
