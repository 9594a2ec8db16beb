//! Conversion between world-space keypoints and the unified representation.
//!
//! The heading (yaw) of each frame is estimated from the hip axis. Root and
//! joint displacements are expressed in the current frame's heading frame, so
//! integrating them back needs only the starting pose: the reconstruction in
//! [`unified_to_keypoints`] assumes the clip starts at the world origin
//! facing +Z.

use nalgebra::{Matrix3, Vector3};

use super::layout::{canonical_layout, Part};
use super::rotation::{matrix_to_rot6d, IDENTITY_6D};
use super::skeleton::{Skeleton, LEFT_HIP, RIGHT_HIP};
use super::{MotionSequence, RotationSource, UnifiedFrame, FRAME_DIM, NUM_JOINTS, NUM_PARTS};
use crate::error::{Error, Result};

/// World positions of all 52 joints for one frame, meters.
pub type KeypointFrame = [[f64; 3]; NUM_JOINTS];

/// Rotation about +Y by `yaw` radians.
pub fn yaw_rotation(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub(crate) fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = a % two_pi;
    if w > std::f64::consts::PI {
        w -= two_pi;
    } else if w <= -std::f64::consts::PI {
        w += two_pi;
    }
    w
}

/// Hook for recovering local joint rotations from keypoints.
pub trait InverseKinematics {
    /// Local rotations of joints 1..51 for frame `index`.
    fn solve(&self, index: usize, positions: &KeypointFrame) -> Vec<Matrix3<f64>>;

    fn source(&self) -> RotationSource;
}

/// Keypoint-only fallback: every joint keeps the rest orientation.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityIk;

impl InverseKinematics for IdentityIk {
    fn solve(&self, _index: usize, _positions: &KeypointFrame) -> Vec<Matrix3<f64>> {
        vec![Matrix3::identity(); NUM_JOINTS - 1]
    }

    fn source(&self) -> RotationSource {
        RotationSource::Identity
    }
}

/// Rotations that are already known, e.g. from a parametric source.
#[derive(Clone, Debug)]
pub struct KnownRotations(pub Vec<Vec<Matrix3<f64>>>);

impl InverseKinematics for KnownRotations {
    fn solve(&self, index: usize, _positions: &KeypointFrame) -> Vec<Matrix3<f64>> {
        self.0[index].clone()
    }

    fn source(&self) -> RotationSource {
        RotationSource::Measured
    }
}

fn v3(p: &[f64; 3]) -> Vector3<f64> {
    Vector3::new(p[0], p[1], p[2])
}

fn heading(frame: &KeypointFrame, fallback: f64) -> f64 {
    let across = v3(&frame[LEFT_HIP]) - v3(&frame[RIGHT_HIP]);
    // forward = across × up, projected on XZ
    let fx = -across.z;
    let fz = across.x;
    if fx == 0.0 && fz == 0.0 {
        fallback
    } else {
        fx.atan2(fz)
    }
}

pub fn keypoints_to_unified(positions: &[KeypointFrame], fps: f64) -> Result<MotionSequence> {
    keypoints_to_unified_with(positions, fps, &IdentityIk)
}

/// Converts world keypoints into the unified representation, using `ik` to
/// fill the rotation channels.
pub fn keypoints_to_unified_with(
    positions: &[KeypointFrame],
    fps: f64,
    ik: &dyn InverseKinematics,
) -> Result<MotionSequence> {
    if positions.is_empty() {
        return Err(Error::Validation("no keypoint frames".into()));
    }
    if positions.iter().flatten().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Validation("keypoints contain NaN or infinite values".into()));
    }
    let n = positions.len();
    let mut yaws = Vec::with_capacity(n);
    let mut last = 0.0;
    for p in positions {
        last = heading(p, last);
        yaws.push(last);
    }

    let mut frames = Vec::with_capacity(n);
    for (k, p) in positions.iter().enumerate() {
        let root = v3(&p[0]);
        let to_local = yaw_rotation(-yaws[k]);
        let mut f = UnifiedFrame {
            root_height: root.y,
            ..Default::default()
        };
        for j in 1..NUM_JOINTS {
            let local = to_local * (v3(&p[j]) - root);
            f.joint_pos[j - 1] = local.into();
        }
        let rots = ik.solve(k, p);
        if rots.len() != NUM_JOINTS - 1 {
            return Err(Error::dim("inverse kinematics output", NUM_JOINTS - 1, rots.len()));
        }
        for (dst, r) in f.joint_rot.iter_mut().zip(&rots) {
            *dst = matrix_to_rot6d(r);
        }
        if k + 1 < n {
            let next = &positions[k + 1];
            f.root_angular_vel = wrap_angle(yaws[k + 1] - yaws[k]);
            let d = to_local * (v3(&next[0]) - root);
            f.root_lin_vel_x = d.x;
            f.root_lin_vel_z = d.z;
            for j in 0..NUM_JOINTS {
                f.joint_vel[j] = (to_local * (v3(&next[j]) - v3(&p[j]))).into();
            }
        }
        frames.push(f);
    }
    if n >= 2 {
        let prev = frames[n - 2].clone();
        copy_velocities(&prev, &mut frames[n - 1]);
    }

    let mut seq = MotionSequence::new(frames, fps, [true; NUM_PARTS], "keypoints")?;
    seq.rotation_source = ik.source();
    Ok(seq)
}

pub(crate) fn copy_velocities(from: &UnifiedFrame, to: &mut UnifiedFrame) {
    to.root_angular_vel = from.root_angular_vel;
    to.root_lin_vel_x = from.root_lin_vel_x;
    to.root_lin_vel_z = from.root_lin_vel_z;
    to.joint_vel = from.joint_vel;
}

/// Integrates root velocities and places the root-relative joints back in
/// world space. Starts at the origin with zero heading.
pub fn unified_to_keypoints(seq: &MotionSequence) -> Vec<KeypointFrame> {
    let mut out = Vec::with_capacity(seq.len());
    let mut yaw = 0.0;
    let mut root = Vector3::new(0.0, seq.frames()[0].root_height, 0.0);
    for f in seq.frames() {
        root.y = f.root_height;
        let to_world = yaw_rotation(yaw);
        let mut kp = [[0.0; 3]; NUM_JOINTS];
        kp[0] = root.into();
        for j in 1..NUM_JOINTS {
            kp[j] = (root + to_world * v3(&f.joint_pos[j - 1])).into();
        }
        out.push(kp);
        let step = to_world * Vector3::new(f.root_lin_vel_x, 0.0, f.root_lin_vel_z);
        root.x += step.x;
        root.z += step.z;
        yaw += f.root_angular_vel;
    }
    out
}

/// Rest-pose frame: identity rotations, rest offsets, zero velocity and face.
pub fn rest_frame(skeleton: &Skeleton) -> UnifiedFrame {
    let rest = skeleton.rest_positions();
    let mut f = UnifiedFrame {
        root_height: skeleton.rest_root_height,
        ..Default::default()
    };
    for j in 1..NUM_JOINTS {
        f.joint_pos[j - 1] = rest[j].into();
        f.joint_rot[j - 1] = IDENTITY_6D;
    }
    f
}

/// Fills parts flagged absent with rest-pose values. Present parts and the
/// presence flags are untouched.
pub fn complete_missing_parts(seq: &MotionSequence) -> MotionSequence {
    if seq.parts_present.iter().all(|&p| p) {
        return seq.clone();
    }
    let layout = canonical_layout();
    let rest = rest_frame(&Skeleton::smplx()).pack();
    let absent: Vec<Part> = Part::ALL
        .into_iter()
        .filter(|p| !seq.parts_present[p.index()])
        .collect();
    let mut out = seq.clone();
    let mut buf = [0.0; FRAME_DIM];
    for f in out.frames_mut() {
        f.pack_into(&mut buf);
        for &part in &absent {
            for i in layout.indices(part) {
                buf[i] = rest[i];
            }
        }
        *f = UnifiedFrame::unpack(&buf).expect("669 values");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repr::{forward_kinematics, JOINT_ROT_OFFSET};

    fn pose_at(skel: &Skeleton, root: Vector3<f64>, yaw: f64) -> KeypointFrame {
        let mut rots = vec![Matrix3::identity(); NUM_JOINTS];
        rots[0] = yaw_rotation(yaw);
        let p = forward_kinematics(skel, &root, &rots).unwrap();
        let mut kp = [[0.0; 3]; NUM_JOINTS];
        for (dst, src) in kp.iter_mut().zip(p) {
            *dst = src.into();
        }
        kp
    }

    #[test]
    fn static_skeleton_has_zero_velocity() {
        let s = Skeleton::smplx();
        let frames = vec![pose_at(&s, Vector3::new(0.0, 0.9, 0.0), 0.3); 5];
        let seq = keypoints_to_unified(&frames, 30.0).unwrap();
        for f in seq.frames() {
            assert_eq!(f.root_angular_vel, 0.0);
            assert_eq!(f.root_lin_vel_x, 0.0);
            assert_eq!(f.root_lin_vel_z, 0.0);
            assert!(f.joint_vel.iter().flatten().all(|&v| v == 0.0));
        }
        assert_eq!(seq.rotation_source, RotationSource::Identity);
    }

    #[test]
    fn constant_x_velocity() {
        let s = Skeleton::smplx();
        let frames: Vec<_> = (0..6)
            .map(|k| pose_at(&s, Vector3::new(0.1 * k as f64, 0.9, 0.0), 0.0))
            .collect();
        let seq = keypoints_to_unified(&frames, 30.0).unwrap();
        for f in seq.frames() {
            assert!((f.root_lin_vel_x - 0.1).abs() < 1e-12);
            assert!(f.root_lin_vel_z.abs() < 1e-12);
        }
    }

    #[test]
    fn spinning_in_place() {
        let s = Skeleton::smplx();
        let frames: Vec<_> = (0..20)
            .map(|k| pose_at(&s, Vector3::new(0.0, 0.9, 0.0), 0.05 * k as f64))
            .collect();
        let seq = keypoints_to_unified(&frames, 30.0).unwrap();
        for f in seq.frames() {
            assert!((f.root_angular_vel - 0.05).abs() < 1e-9);
            assert!(f.root_lin_vel_x.abs() < 1e-9);
            assert!(f.root_lin_vel_z.abs() < 1e-9);
        }
    }

    #[test]
    fn yaw_wraps_across_pi() {
        let s = Skeleton::smplx();
        let frames: Vec<_> = (0..4)
            .map(|k| pose_at(&s, Vector3::zeros(), 3.0 + 0.1 * k as f64))
            .collect();
        let seq = keypoints_to_unified(&frames, 30.0).unwrap();
        for f in seq.frames() {
            assert!((f.root_angular_vel - 0.1).abs() < 1e-9);
        }
    }

    #[test]
    fn single_frame_has_zero_velocity() {
        let s = Skeleton::smplx();
        let seq = keypoints_to_unified(&[pose_at(&s, Vector3::zeros(), 0.0)], 30.0).unwrap();
        assert_eq!(seq.len(), 1);
        assert!(seq.frames()[0].joint_vel.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn nan_rejected() {
        let mut kp = [[0.0; 3]; NUM_JOINTS];
        kp[5][1] = f64::NAN;
        assert!(matches!(keypoints_to_unified(&[kp], 30.0), Err(Error::Validation(_))));
    }

    #[test]
    fn keypoint_round_trip() {
        let s = Skeleton::smplx();
        let frames: Vec<_> = (0..30)
            .map(|k| {
                let t = k as f64 / 30.0;
                pose_at(&s, Vector3::new(0.3 * t, 0.9 + 0.02 * (6.0 * t).sin(), 0.5 * t * t), 0.4 * (2.0 * t).sin())
            })
            .collect();
        let seq = keypoints_to_unified(&frames, 30.0).unwrap();
        let back = unified_to_keypoints(&seq);
        for (a, b) in frames.iter().zip(&back) {
            for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    fn sample_sequence() -> MotionSequence {
        let mut frames = Vec::new();
        for k in 0..4 {
            let v: Vec<f64> = (0..FRAME_DIM).map(|i| (i * 7 + k * 13) as f64 * 0.001).collect();
            frames.push(UnifiedFrame::unpack(&v).unwrap());
        }
        MotionSequence::new(frames, 30.0, [true; NUM_PARTS], "test").unwrap()
    }

    #[test]
    fn completion_is_noop_when_complete() {
        let seq = sample_sequence();
        assert_eq!(complete_missing_parts(&seq), seq);
    }

    #[test]
    fn completion_fills_left_hand_with_identity() {
        let mut seq = sample_sequence();
        seq.parts_present[Part::LeftHand.index()] = false;
        let out = complete_missing_parts(&seq);
        for f in out.frames() {
            for j in 22..=36 {
                assert_eq!(f.joint_rot[j - 1], IDENTITY_6D);
                assert_eq!(f.joint_vel[j], [0.0; 3]);
            }
        }
        assert_eq!(out.parts_present, seq.parts_present);
        // joint 22 rotation block starts at 313 + 6*21
        assert_eq!(out.to_matrix()[(0, JOINT_ROT_OFFSET + 6 * 21)], 1.0);
    }

    #[test]
    fn completion_is_local() {
        let mut seq = sample_sequence();
        seq.parts_present[Part::Head.index()] = false;
        let out = complete_missing_parts(&seq);
        let layout = canonical_layout();
        let (a, b) = (seq.to_matrix(), out.to_matrix());
        for k in 0..seq.len() {
            for i in layout.indices(Part::Spine) {
                assert_eq!(a[(k, i)].to_bits(), b[(k, i)].to_bits());
            }
        }
    }
}
