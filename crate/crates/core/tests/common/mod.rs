#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smooth_arap::linear::ConstraintSet;
use smooth_arap::mesh::{make_test_mesh, HalfEdgeMesh, MeshGenerator};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn mesh(generator: MeshGenerator) -> HalfEdgeMesh {
    HalfEdgeMesh::new(make_test_mesh(&generator).unwrap()).unwrap()
}

/// Bumpy `res x res` plane with noticeable relief.
pub fn bumpy(res: usize, seed: u64) -> HalfEdgeMesh {
    mesh(MeshGenerator::BumpyPlane {
        resolution: res,
        size: 1.0,
        bumps: 3,
        amplitude: 0.15,
        bump_radius: 0.25,
        seed,
    })
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let q = Quaternion::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
}

pub fn random_vector(rng: &mut ChaCha8Rng, scale: f64) -> Vector3<f64> {
    Vector3::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

pub fn perturbed(points: &[Vector3<f64>], rng: &mut ChaCha8Rng, scale: f64) -> Vec<Vector3<f64>> {
    points.iter().map(|p| p + random_vector(rng, scale)).collect()
}

pub fn max_distance(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `count` distinct vertices with random targets.
pub fn random_constraints(rng: &mut ChaCha8Rng, n: usize, count: usize, scale: f64) -> ConstraintSet {
    let mut set = ConstraintSet::new();
    while set.len() < count {
        let v = rng.random_range(0..n);
        if !set.contains(v) {
            set.insert(v, random_vector(rng, scale)).unwrap();
        }
    }
    set
}

/// Dense solve of `[A~ H^T; H 0] [V; L] = [r + eps prev; C]`.
pub fn dense_kkt(
    a_tilde: &DMatrix<f64>,
    r: &DMatrix<f64>,
    prev: &DMatrix<f64>,
    eps: f64,
    constraints: &ConstraintSet,
) -> DMatrix<f64> {
    let n = a_tilde.nrows();
    let nd = constraints.len();
    let mut k = DMatrix::zeros(n + nd, n + nd);
    k.view_mut((0, 0), (n, n)).copy_from(a_tilde);
    let mut rhs = DMatrix::zeros(n + nd, 3);
    rhs.rows_mut(0, n).copy_from(&(r + prev * eps));
    for (j, (v, t)) in constraints.iter().enumerate() {
        k[(n + j, v)] = 1.0;
        k[(v, n + j)] = 1.0;
        for c in 0..3 {
            rhs[(n + j, c)] = t[c];
        }
    }
    let x = k.full_piv_lu().solve(&rhs).expect("KKT matrix is invertible");
    x.rows(0, n).into_owned()
}

/// Plain spokes-and-rims ARAP written from scratch: per-triangle cotangents,
/// dense normal equations assembled neighborhood by neighborhood, dense
/// Cholesky of the free block, and SVD rotation fits. Starts from the rest
/// pose with handles snapped; stops when the largest vertex move over the
/// bbox diagonal drops below `tol`.
pub fn standard_arap(
    rest: &[Vector3<f64>],
    triangles: &[[usize; 3]],
    handles: &[(usize, Vector3<f64>)],
    tol: f64,
    max_iterations: usize,
) -> (Vec<Vector3<f64>>, usize) {
    let n = rest.len();
    let (mut lo, mut hi) = (rest[0], rest[0]);
    for p in rest {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let diag = (hi - lo).norm();

    // cot of the angle opposite each corner's edge: (a, b, cot) per triangle edge
    let mut edges: Vec<[(usize, usize, f64); 3]> = Vec::new();
    for t in triangles {
        let mut out = [(0, 0, 0.0); 3];
        for k in 0..3 {
            let (a, b, o) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
            let u = rest[a] - rest[o];
            let w = rest[b] - rest[o];
            out[k] = (a, b, u.dot(&w) / u.cross(&w).norm());
        }
        edges.push(out);
    }
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ti, t) in triangles.iter().enumerate() {
        for &v in t {
            incident[v].push(ti);
        }
    }

    // Normal matrix: every neighborhood adds c (e_a - e_b)(e_a - e_b)^T.
    let mut k = DMatrix::<f64>::zeros(n, n);
    for faces in &incident {
        for &ti in faces {
            for &(a, b, c) in &edges[ti] {
                k[(a, a)] += c;
                k[(b, b)] += c;
                k[(a, b)] -= c;
                k[(b, a)] -= c;
            }
        }
    }
    let mut fixed = vec![None; n];
    for &(v, t) in handles {
        fixed[v] = Some(t);
    }
    let free: Vec<usize> = (0..n).filter(|&v| fixed[v].is_none()).collect();
    let kff = DMatrix::from_fn(free.len(), free.len(), |i, j| k[(free[i], free[j])]);
    let chol = kff.cholesky().expect("free block is positive definite");

    let mut cur: Vec<Vector3<f64>> = (0..n).map(|v| fixed[v].unwrap_or(rest[v])).collect();
    for iteration in 1..=max_iterations {
        let rotations: Vec<Matrix3<f64>> = (0..n)
            .map(|v| {
                let mut s = Matrix3::zeros();
                for &ti in &incident[v] {
                    for &(a, b, c) in &edges[ti] {
                        s += c * (rest[a] - rest[b]) * (cur[a] - cur[b]).transpose();
                    }
                }
                let svd = s.svd(true, true);
                let u = svd.u.unwrap();
                let w = svd.v_t.unwrap().transpose();
                let mut r = w * u.transpose();
                if r.determinant() < 0.0 {
                    let sv = svd.singular_values;
                    let smallest = (0..3).min_by(|&i, &j| sv[i].total_cmp(&sv[j])).unwrap();
                    let mut u2 = u;
                    u2.column_mut(smallest).neg_mut();
                    r = w * u2.transpose();
                }
                r
            })
            .collect();
        // rhs: each neighborhood adds c (e_a - e_b) (R_v (p_a - p_b))^T
        let mut rhs = DMatrix::<f64>::zeros(n, 3);
        for v in 0..n {
            for &ti in &incident[v] {
                for &(a, b, c) in &edges[ti] {
                    let g = c * (rotations[v] * (rest[a] - rest[b]));
                    for d in 0..3 {
                        rhs[(a, d)] += g[d];
                        rhs[(b, d)] -= g[d];
                    }
                }
            }
        }
        let mut reduced = DMatrix::from_fn(free.len(), 3, |i, d| {
            let mut x = rhs[(free[i], d)];
            for (v, f) in fixed.iter().enumerate() {
                if let Some(t) = f {
                    x -= k[(free[i], v)] * t[d];
                }
            }
            x
        });
        chol.solve_mut(&mut reduced);
        let mut next = cur.clone();
        for (i, &v) in free.iter().enumerate() {
            next[v] = Vector3::new(reduced[(i, 0)], reduced[(i, 1)], reduced[(i, 2)]);
        }
        let change = max_distance(&next, &cur) / diag;
        cur = next;
        if change < tol {
            return (cur, iteration);
        }
    }
    (cur, max_iterations)
}
