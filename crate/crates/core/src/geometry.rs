//! Small geometric helpers shared across modules.

use nalgebra::{DMatrix, Matrix3, Vector3};

pub fn bounding_box(points: &[Vector3<f64>]) -> (Vector3<f64>, Vector3<f64>) {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    if points.is_empty() {
        (Vector3::zeros(), Vector3::zeros())
    } else {
        (lo, hi)
    }
}

pub fn bbox_diagonal(points: &[Vector3<f64>]) -> f64 {
    let (lo, hi) = bounding_box(points);
    (hi - lo).norm()
}

/// Packs points as the rows of an `n x 3` matrix.
pub fn to_matrix(points: &[Vector3<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(points.len(), 3, |i, j| points[i][j])
}

pub fn from_matrix(m: &DMatrix<f64>) -> Vec<Vector3<f64>> {
    assert_eq!(m.ncols(), 3, "expected an n x 3 matrix");
    (0..m.nrows())
        .map(|i| Vector3::new(m[(i, 0)], m[(i, 1)], m[(i, 2)]))
        .collect()
}

pub fn max_displacement(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}

/// A proper rigid motion `x -> rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidMotion {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn apply_all(&self, points: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        points.iter().map(|p| self.apply(p)).collect()
    }
}

/// Rotation by `angle` radians about `axis` (Rodrigues).
pub fn axis_angle(axis: Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = axis.normalize();
    let skew = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + skew * angle.sin() + skew * skew * (1.0 - angle.cos())
}

pub fn is_rotation(r: &Matrix3<f64>, tol: f64) -> bool {
    let orth = (r.transpose() * r - Matrix3::identity()).abs().max();
    orth <= tol && (r.determinant() - 1.0).abs() <= tol
}
