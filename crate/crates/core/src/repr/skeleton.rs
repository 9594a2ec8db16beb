use nalgebra::{Matrix3, Vector3};

use super::NUM_JOINTS;
use crate::error::{Error, Result};

/// Kinematic tree with rest-pose offsets. Parents precede children.
#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    parents: Vec<Option<usize>>,
    offsets: Vec<Vector3<f64>>,
    /// Pelvis height in the rest pose, meters.
    pub rest_root_height: f64,
}

// Body joints 0..21 in SMPL-X order. Left is +X, up is +Y, forward is +Z.
const BODY_PARENTS: [Option<usize>; 22] = [
    None,
    Some(0),
    Some(0),
    Some(0),
    Some(1),
    Some(2),
    Some(3),
    Some(4),
    Some(5),
    Some(6),
    Some(7),
    Some(8),
    Some(9),
    Some(9),
    Some(9),
    Some(12),
    Some(13),
    Some(14),
    Some(16),
    Some(17),
    Some(18),
    Some(19),
];

const BODY_OFFSETS: [[f64; 3]; 22] = [
    [0.0, 0.0, 0.0],
    [0.06, -0.09, 0.0],
    [-0.06, -0.09, 0.0],
    [0.0, 0.11, -0.01],
    [0.04, -0.38, 0.0],
    [-0.04, -0.38, 0.0],
    [0.0, 0.14, 0.01],
    [0.0, -0.40, -0.04],
    [0.0, -0.40, -0.04],
    [0.0, 0.05, 0.02],
    [0.0, -0.06, 0.12],
    [0.0, -0.06, 0.12],
    [0.0, 0.21, -0.03],
    [0.08, 0.12, -0.01],
    [-0.08, 0.12, -0.01],
    [0.0, 0.09, 0.05],
    [0.12, 0.03, -0.02],
    [-0.12, 0.03, -0.02],
    [0.26, 0.0, 0.0],
    [-0.26, 0.0, 0.0],
    [0.25, 0.0, 0.0],
    [-0.25, 0.0, 0.0],
];

const LEFT_WRIST: usize = 20;
const RIGHT_WRIST: usize = 21;
pub(crate) const LEFT_HIP: usize = 1;
pub(crate) const RIGHT_HIP: usize = 2;

// Finger roots relative to the wrist for a left hand (index, middle, pinky,
// ring, thumb); the right hand mirrors X.
const FINGER_ROOTS: [[f64; 3]; 5] = [
    [0.09, 0.0, 0.03],
    [0.095, 0.0, 0.01],
    [0.08, 0.0, -0.03],
    [0.088, 0.0, -0.01],
    [0.03, -0.01, 0.03],
];

impl Skeleton {
    /// 52-joint SMPL-X style skeleton: 22 body joints, then 15 left-hand and
    /// 15 right-hand joints (three per finger).
    pub fn smplx() -> Self {
        let mut parents = BODY_PARENTS.to_vec();
        let mut offsets: Vec<Vector3<f64>> = BODY_OFFSETS.iter().map(|o| Vector3::from(*o)).collect();
        for (wrist, sign) in [(LEFT_WRIST, 1.0), (RIGHT_WRIST, -1.0)] {
            for root in FINGER_ROOTS {
                let base = parents.len();
                parents.push(Some(wrist));
                offsets.push(Vector3::new(sign * root[0], root[1], root[2]));
                parents.push(Some(base));
                offsets.push(Vector3::new(sign * 0.03, 0.0, 0.0));
                parents.push(Some(base + 1));
                offsets.push(Vector3::new(sign * 0.025, 0.0, 0.0));
            }
        }
        debug_assert_eq!(parents.len(), NUM_JOINTS);
        Self {
            parents,
            offsets,
            rest_root_height: 0.93,
        }
    }

    /// Custom skeleton; checks the topological ordering.
    pub fn new(parents: Vec<Option<usize>>, offsets: Vec<Vector3<f64>>, rest_root_height: f64) -> Result<Self> {
        if parents.len() != offsets.len() || parents.is_empty() {
            return Err(Error::Validation("parents and offsets must be non-empty and equal length".into()));
        }
        if parents[0].is_some() {
            return Err(Error::Validation("joint 0 must be the root".into()));
        }
        for (i, p) in parents.iter().enumerate().skip(1) {
            match p {
                Some(p) if *p < i => {}
                _ => return Err(Error::Validation(format!("joint {i} has no earlier parent"))),
            }
        }
        Ok(Self {
            parents,
            offsets,
            rest_root_height,
        })
    }

    pub fn num_joints(&self) -> usize {
        self.parents.len()
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parents[joint]
    }

    pub fn offset(&self, joint: usize) -> Vector3<f64> {
        self.offsets[joint]
    }

    /// Joint positions relative to the root in the rest pose.
    pub fn rest_positions(&self) -> Vec<Vector3<f64>> {
        let rots = vec![Matrix3::identity(); self.num_joints()];
        forward_kinematics(self, &Vector3::zeros(), &rots).expect("identity pose is valid")
    }
}

/// World positions from local joint rotations; `rotations[0]` is the root's
/// global orientation.
pub fn forward_kinematics(
    skeleton: &Skeleton,
    root_pos: &Vector3<f64>,
    rotations: &[Matrix3<f64>],
) -> Result<Vec<Vector3<f64>>> {
    let n = skeleton.num_joints();
    if rotations.len() != n {
        return Err(Error::dim("forward_kinematics rotations", n, rotations.len()));
    }
    let mut global = Vec::with_capacity(n);
    let mut pos = Vec::with_capacity(n);
    global.push(rotations[0]);
    pos.push(*root_pos);
    for i in 1..n {
        let p = skeleton.parents[i].expect("non-root joint has a parent");
        let g = global[p] * rotations[i];
        let x = pos[p] + global[p] * skeleton.offsets[i];
        global.push(g);
        pos.push(x);
    }
    Ok(pos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Unit};

    fn two_joint() -> Skeleton {
        Skeleton::new(vec![None, Some(0)], vec![Vector3::zeros(), Vector3::new(0.0, 1.0, 0.0)], 0.0).unwrap()
    }

    #[test]
    fn smplx_is_topological() {
        let s = Skeleton::smplx();
        assert_eq!(s.num_joints(), 52);
        assert_eq!(s.parent(0), None);
        for i in 1..52 {
            assert!(s.parent(i).unwrap() < i);
        }
        assert_eq!(s.parent(22), Some(20));
        assert_eq!(s.parent(37), Some(21));
    }

    #[test]
    fn rejects_bad_order() {
        assert!(Skeleton::new(vec![None, Some(1)], vec![Vector3::zeros(); 2], 0.0).is_err());
        assert!(Skeleton::new(vec![Some(0)], vec![Vector3::zeros()], 0.0).is_err());
    }

    #[test]
    fn rest_pose_child() {
        let s = two_joint();
        let p = forward_kinematics(&s, &Vector3::zeros(), &[Matrix3::identity(); 2]).unwrap();
        assert_eq!(p[1], Vector3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn root_rotation_about_z() {
        let s = two_joint();
        let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2).into_inner();
        let p = forward_kinematics(&s, &Vector3::zeros(), &[rz, Matrix3::identity()]).unwrap();
        assert!((p[1] - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn rigid_equivariance() {
        let s = Skeleton::smplx();
        let rots: Vec<Matrix3<f64>> = (0..52)
            .map(|i| {
                Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(1.0, i as f64, 0.5)), 0.1 * i as f64)
                    .into_inner()
            })
            .collect();
        let base = forward_kinematics(&s, &Vector3::zeros(), &rots).unwrap();

        let shift = Vector3::new(1.0, 2.0, 3.0);
        let moved = forward_kinematics(&s, &shift, &rots).unwrap();
        for (a, b) in base.iter().zip(&moved) {
            assert!((b - a - shift).norm() < 1e-12);
        }

        let g = Rotation3::from_axis_angle(&Vector3::y_axis(), 0.7).into_inner();
        let mut turned = rots.clone();
        turned[0] = g * rots[0];
        let rotated = forward_kinematics(&s, &shift, &turned).unwrap();
        for (a, b) in base.iter().zip(&rotated) {
            assert!((b - (g * a + shift)).norm() < 1e-12);
        }
    }
}
