use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::repr::convert::{copy_velocities, wrap_angle};
use crate::repr::{yaw_rotation, MotionSequence, UnifiedFrame, NUM_JOINTS};

/// Keeps every `factor`-th frame and divides the frame rate accordingly.
///
/// State channels (root height, joint positions, rotations, face) are copied.
/// Velocity channels of each kept frame become the displacement to the next
/// kept frame, accumulated from the original per-frame velocities with the
/// heading change applied step by step. The last kept frame repeats the
/// previous velocity.
pub fn resample(seq: &MotionSequence, factor: usize) -> Result<MotionSequence> {
    if factor == 0 {
        return Err(Error::Validation("resample factor must be >= 1".into()));
    }
    if factor == 1 {
        return Ok(seq.clone());
    }
    let n = seq.len();
    if n <= factor {
        return Err(Error::Length(format!(
            "cannot resample {n} frames by factor {factor}"
        )));
    }
    let src = seq.frames();
    let kept: Vec<usize> = (0..n).step_by(factor).collect();
    let mut frames: Vec<UnifiedFrame> = Vec::with_capacity(kept.len());
    for &k in &kept {
        let mut f = src[k].clone();
        if k + factor < n {
            accumulate_window(&src[k..k + factor], &mut f);
        }
        frames.push(f);
    }
    let last = frames.len() - 1;
    let prev = frames[last - 1].clone();
    copy_velocities(&prev, &mut frames[last]);

    seq.with_frames(frames)?.with_fps(seq.fps() / factor as f64)
}

fn accumulate_window(window: &[UnifiedFrame], out: &mut UnifiedFrame) {
    let mut yaw = 0.0;
    let mut root = Vector3::zeros();
    let mut joints = [Vector3::<f64>::zeros(); NUM_JOINTS];
    for f in window {
        let r = yaw_rotation(yaw);
        root += r * Vector3::new(f.root_lin_vel_x, 0.0, f.root_lin_vel_z);
        for (acc, v) in joints.iter_mut().zip(&f.joint_vel) {
            *acc += r * Vector3::from(*v);
        }
        yaw += f.root_angular_vel;
    }
    out.root_angular_vel = wrap_angle(yaw);
    out.root_lin_vel_x = root.x;
    out.root_lin_vel_z = root.z;
    for (dst, acc) in out.joint_vel.iter_mut().zip(joints) {
        *dst = acc.into();
    }
}
