//! Continuous 6D rotation parameterization: the first two columns of the
//! rotation matrix, recovered by Gram-Schmidt.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub const IDENTITY_6D: [f64; 6] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];

const PARALLEL_TOL: f64 = 1e-9;

pub fn rot6d_to_matrix(r6: &[f64; 6]) -> Result<Matrix3<f64>> {
    let a1 = Vector3::new(r6[0], r6[1], r6[2]);
    let a2 = Vector3::new(r6[3], r6[4], r6[5]);
    if !(a1.iter().chain(a2.iter()).all(|v| v.is_finite())) {
        return Err(Error::Singular("non-finite component"));
    }
    let n1 = a1.norm();
    if n1 == 0.0 {
        return Err(Error::Singular("first column is zero"));
    }
    let b1 = a1 / n1;
    let n2 = a2.norm();
    if n2 == 0.0 || b1.cross(&a2).norm() <= PARALLEL_TOL * n2 {
        return Err(Error::Singular("second column parallel to first"));
    }
    let u2 = a2 - b1 * b1.dot(&a2);
    let b2 = u2 / u2.norm();
    let b3 = b1.cross(&b2);
    Ok(Matrix3::from_columns(&[b1, b2, b3]))
}

pub fn matrix_to_rot6d(m: &Matrix3<f64>) -> [f64; 6] {
    [
        m[(0, 0)],
        m[(1, 0)],
        m[(2, 0)],
        m[(0, 1)],
        m[(1, 1)],
        m[(2, 1)],
    ]
}
