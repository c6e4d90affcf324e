mod common;

use std::sync::Arc;

use common::*;
use nalgebra::{DMatrix, Vector3};
use proptest::prelude::*;
use rand::Rng;
use smooth_arap::deform::*;
use smooth_arap::geometry::{bbox_diagonal, to_matrix, RigidMotion};
use smooth_arap::harness::{boundary_constraints, nearest_vertex, Preset};
use smooth_arap::linear::{factorize, regularize, ConstraintSet, Factorization, SolverError, UpdatingSolver};
use smooth_arap::mesh::{DiscreteOperators, HalfEdgeMesh, MeshGenerator};

fn lifted_plane(res: usize, seed: u64) -> (HalfEdgeMesh, ConstraintSet) {
    let mesh = bumpy(res, seed);
    let mut c = boundary_constraints(&mesh);
    let center = nearest_vertex(&mesh, &Vector3::new(0.5, 0.5, 0.0));
    c.insert(center, mesh.positions()[center] + Vector3::new(0.1, 0.0, 0.3))
        .unwrap();
    (mesh, c)
}

fn params(lambda: f64) -> DeformParams {
    DeformParams {
        lambda,
        ..Default::default()
    }
}

#[test]
fn lambda_zero_matches_plain_arap() {
    let cases = [
        lifted_plane(16, 3),
        {
            let p = Preset::BumpyCylinder
                .build_with(&MeshGenerator::bumpy_cylinder(16, 12, 4, 2))
                .unwrap();
            (p.mesh, p.constraints)
        },
        {
            let p = Preset::Bar.build_with(&MeshGenerator::bar(2)).unwrap();
            (p.mesh, p.constraints)
        },
    ];
    for (mesh, constraints) in cases {
        let p = DeformParams {
            lambda: 0.0,
            init: Initialization::OriginalMesh,
            tolerance: 1e-6,
            max_iterations: 3000,
            ..Default::default()
        };
        let ours = deform(&mesh, &constraints, &p).unwrap();
        let handles: Vec<_> = constraints.iter().collect();
        let (oracle, _) = standard_arap(mesh.positions(), mesh.triangles(), &handles, 1e-6, 3000);
        let diag = bbox_diagonal(mesh.positions());
        let err = max_distance(&ours.positions, &oracle) / diag;
        assert!(err < 1e-6, "max deviation {err} bbox");
    }
}

#[test]
fn init_keeps_rest_when_handles_sit_at_rest() {
    let mesh = bumpy(9, 1);
    let ops = DiscreteOperators::assemble(&mesh).unwrap();
    let rest = mesh.positions();
    let c = boundary_constraints(&mesh);
    for mode in [
        Initialization::OriginalMesh,
        Initialization::Poisson,
        Initialization::BiLaplacian,
    ] {
        let x = initialize(&ops, rest, &c, mode, None).unwrap();
        assert!(max_distance(&x, rest) < 1e-9, "{mode:?}");
    }
}

#[test]
fn poisson_init_matches_dense_solve() {
    let mesh = mesh(MeshGenerator::bumpy_plane(5, 2, 4));
    let ops = DiscreteOperators::assemble(&mesh).unwrap();
    let rest = mesh.positions();
    let n = rest.len();
    assert!(n <= 25);
    let mut r = rng(2);
    let c = random_constraints(&mut r, n, 4, 1.0);
    let got = initialize(&ops, rest, &c, Initialization::Poisson, None).unwrap();

    // Replace constrained rows of L by identity rows.
    let l = ops.laplacian.to_dense();
    let mut k = l.clone();
    let mut rhs = &l * to_matrix(rest);
    for (v, t) in c.iter() {
        k.row_mut(v).fill(0.0);
        k[(v, v)] = 1.0;
        rhs.row_mut(v).copy_from(&t.transpose());
    }
    let dense = k.lu().solve(&rhs).unwrap();
    assert!((to_matrix(&got) - dense).amax() < 1e-10);
}

#[test]
fn original_init_only_moves_handles() {
    let (mesh, c) = lifted_plane(7, 2);
    let ops = DiscreteOperators::assemble(&mesh).unwrap();
    let x = initialize(&ops, mesh.positions(), &c, Initialization::OriginalMesh, None).unwrap();
    for (v, p) in x.iter().enumerate() {
        match c.target(v) {
            Some(t) => assert_eq!(*p, t),
            None => assert_eq!(*p, mesh.positions()[v]),
        }
    }
}

#[test]
fn unconstrained_inits_are_rejected() {
    let mesh = bumpy(5, 0);
    let ops = DiscreteOperators::assemble(&mesh).unwrap();
    let empty = ConstraintSet::new();
    for mode in [Initialization::Poisson, Initialization::BiLaplacian] {
        let err = initialize(&ops, mesh.positions(), &empty, mode, None).unwrap_err();
        assert!(matches!(err, DeformError::Solver(SolverError::SingularSystem)));
    }
    let err = initialize(&ops, mesh.positions(), &empty, Initialization::Previous, None).unwrap_err();
    assert!(matches!(err, DeformError::NoPreviousPositions));
}

#[test]
fn rigid_handles_give_the_rigid_pose() {
    let mut r = rng(5);
    let (mesh, _) = lifted_plane(10, 5);
    let diag = bbox_diagonal(mesh.positions());
    for _ in 0..3 {
        let motion = RigidMotion {
            rotation: random_rotation(&mut r),
            translation: random_vector(&mut r, 2.0),
        };
        let image = motion.apply_all(mesh.positions());
        let c =
            ConstraintSet::from_pairs(boundary_constraints(&mesh).indices().iter().map(|&v| (v, image[v]))).unwrap();
        let out = deform_from(&mesh, &c, &params(0.95), &image).unwrap();
        assert!(out.converged);
        assert!(out.energies.total <= 1e-10 * diag * diag, "{:?}", out.energies);
        assert!(max_distance(&out.positions, &image) <= 1e-8 * diag);
    }
}

#[test]
fn deformation_commutes_with_rigid_motions() {
    let (mesh, c) = lifted_plane(9, 6);
    let motion = RigidMotion {
        rotation: smooth_arap::geometry::axis_angle(Vector3::new(1.0, 1.0, 0.0), 0.7),
        translation: Vector3::new(3.0, -1.0, 0.5),
    };
    let moved_mesh = HalfEdgeMesh::new(
        smooth_arap::TriangleMesh::new(motion.apply_all(mesh.positions()), mesh.triangles().to_vec()).unwrap(),
    )
    .unwrap();
    let moved_c = ConstraintSet::from_pairs(c.iter().map(|(v, t)| (v, motion.apply(&t)))).unwrap();
    let p = DeformParams {
        tolerance: 1e-300,
        max_iterations: 25,
        ..params(0.95)
    };
    let a = deform(&mesh, &c, &p).unwrap();
    let b = deform(&moved_mesh, &moved_c, &p).unwrap();
    let diag = bbox_diagonal(mesh.positions());
    assert!(max_distance(&motion.apply_all(&a.positions), &b.positions) < 1e-8 * diag);
}

#[test]
fn handles_are_met_exactly() {
    let (mesh, c) = lifted_plane(10, 7);
    for mode in [ConstraintMode::Substitution, ConstraintMode::KktUpdating] {
        let out = deform(
            &mesh,
            &c,
            &DeformParams {
                constraint_mode: mode,
                ..params(0.95)
            },
        )
        .unwrap();
        for (v, t) in c.iter() {
            assert!((out.positions[v] - t).norm() < 1e-9, "{mode:?}");
        }
    }
}

#[test]
fn constraint_modes_agree() {
    let (mesh, c) = lifted_plane(12, 8);
    let a = deform(&mesh, &c, &params(0.95)).unwrap();
    let b = deform(
        &mesh,
        &c,
        &DeformParams {
            constraint_mode: ConstraintMode::KktUpdating,
            ..params(0.95)
        },
    )
    .unwrap();
    assert_eq!(a.iterations, b.iterations);
    assert!(max_distance(&a.positions, &b.positions) < 1e-7);
}

#[test]
fn energy_trace_is_recorded_per_iteration() {
    let (mesh, c) = lifted_plane(10, 9);
    let out = deform(&mesh, &c, &params(0.95)).unwrap();
    assert_eq!(out.trace.len(), out.iterations);
    for (k, row) in out.trace.iter().enumerate() {
        assert_eq!(row.iteration, k + 1);
        assert!((row.total - (0.05 * row.arap + 0.95 * row.smooth)).abs() <= 1e-12 * row.total.max(1.0));
    }
    assert!(out.converged);
    assert!(out.trace.last().unwrap().change < 1e-4);
}

#[test]
fn runs_are_bitwise_deterministic() {
    let (mesh, c) = lifted_plane(14, 10);
    let a = deform(&mesh, &c, &params(0.95)).unwrap();
    let b = deform(&mesh, &c, &params(0.95)).unwrap();
    assert_eq!(a.positions, b.positions);
    assert_eq!(a.trace, b.trace);
}

#[test]
fn adding_handles_never_refactorizes_in_kkt_mode() {
    let (mesh, c) = lifted_plane(12, 11);
    let mut d = Deformer::new(
        mesh,
        DeformParams {
            constraint_mode: ConstraintMode::KktUpdating,
            ..params(0.95)
        },
    )
    .unwrap();
    d.set_constraints(c).unwrap();
    d.initialize(Initialization::BiLaplacian).unwrap();
    d.run().unwrap();
    let before = d.factorizations();
    let free: Vec<usize> = (0..d.rest().len())
        .filter(|v| !d.constraints().contains(*v))
        .take(5)
        .collect();
    for &v in &free {
        let target = d.positions()[v] + Vector3::new(0.0, 0.0, 0.05);
        d.add_constraint(v, target).unwrap();
        d.iterate_up_to(3).unwrap();
    }
    d.move_constraint(free[0], Vector3::new(0.5, 0.5, 0.5)).unwrap();
    d.remove_constraint(free[1]).unwrap();
    d.iterate_up_to(3).unwrap();
    assert_eq!(d.factorizations(), before);

    d.set_lambda(0.5).unwrap();
    assert_eq!(d.factorizations(), before + 1);
}

#[test]
fn substitution_refactorizes_on_new_vertex_sets_only() {
    let (mesh, c) = lifted_plane(8, 12);
    let mut d = Deformer::new(mesh, params(0.95)).unwrap();
    d.set_constraints(c.clone()).unwrap();
    d.iterate().unwrap();
    assert_eq!(d.factorizations(), 1);
    let (v, t) = c.iter().last().unwrap();
    d.move_constraint(v, t + Vector3::new(0.0, 0.1, 0.0)).unwrap();
    d.iterate().unwrap();
    assert_eq!(d.factorizations(), 1);
    d.remove_constraint(v).unwrap();
    d.iterate().unwrap();
    assert_eq!(d.factorizations(), 2);
}

#[test]
fn invalid_params_and_vertices_are_rejected() {
    let mesh = bumpy(5, 0);
    for bad in [-0.1, 1.0, f64::NAN] {
        assert!(matches!(
            Deformer::new(mesh.clone(), params(bad)),
            Err(DeformError::InvalidParams(_))
        ));
    }
    let mut d = Deformer::new(mesh, params(0.5)).unwrap();
    assert!(d.add_constraint(999, Vector3::zeros()).is_err());
    d.add_constraint(3, Vector3::zeros()).unwrap();
    assert!(matches!(
        d.add_constraint(3, Vector3::zeros()),
        Err(DeformError::Solver(SolverError::DuplicateConstraint(3)))
    ));
    assert!(matches!(
        d.remove_constraint(4),
        Err(DeformError::Solver(SolverError::NotConstrained(4)))
    ));
}

fn kkt_case(n_d: usize, seed: u64) -> f64 {
    let mesh = bumpy(10, seed);
    let ops = DiscreteOperators::assemble(&mesh).unwrap();
    let n = ops.num_vertices();
    assert_eq!(n, 100);
    let eps = 1e-8;
    let a_tilde = regularize(&assemble_system_matrix(&ops, 0.95), eps);
    let mut r = rng(seed);
    let constraints = random_constraints(&mut r, n, n_d, 1.0);
    let rhs = DMatrix::from_fn(n, 3, |_, _| r.random_range(-1.0..1.0));
    let prev = DMatrix::from_fn(n, 3, |_, _| r.random_range(-1.0..1.0));

    let factor: Arc<dyn Factorization> = Arc::from(factorize(&a_tilde).unwrap());
    let solver = UpdatingSolver::new(factor, eps, constraints.clone()).unwrap();
    let ours = solver.kkt_solve(&rhs, &prev).unwrap();
    let dense = dense_kkt(&a_tilde.to_dense(), &rhs, &prev, eps, &constraints);
    (&ours - &dense).norm() / dense.norm()
}

#[test]
fn kkt_matches_dense_system() {
    for n_d in [1, 2, 10, 100] {
        for seed in 0..3 {
            let rel = kkt_case(n_d, seed);
            assert!(rel <= 1e-9, "n_d {n_d}: relative error {rel}");
        }
    }
}

#[test]
fn dense_step_cost_grows_with_handle_count() {
    let mesh = bumpy(50, 2);
    let ops = DiscreteOperators::assemble(&mesh).unwrap();
    let n = ops.num_vertices();
    let a = regularize(&assemble_system_matrix(&ops, 0.95), 1e-8);
    let factor: Arc<dyn Factorization> = Arc::from(factorize(&a).unwrap());
    let mut r = rng(2);
    let rhs = DMatrix::from_fn(n, 3, |_, _| r.random_range(-1.0..1.0));
    let mut times = Vec::new();
    for n_d in [2, 20, 80] {
        let constraints = random_constraints(&mut r, n, n_d, 1.0);
        let solver = UpdatingSolver::new(factor.clone(), 1e-8, constraints).unwrap();
        let mut samples: Vec<f64> = (0..21)
            .map(|_| {
                let start = std::time::Instant::now();
                std::hint::black_box(solver.multipliers(&rhs).unwrap());
                start.elapsed().as_secs_f64()
            })
            .collect();
        samples.sort_by(f64::total_cmp);
        times.push(samples[10]);
    }
    assert!(times[0] < times[1] && times[1] < times[2], "{times:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn incremental_constraints_match_batch(seed in 0u64..10_000, ops_count in 1usize..12) {
        let mesh = bumpy(8, seed);
        let dops = DiscreteOperators::assemble(&mesh).unwrap();
        let n = dops.num_vertices();
        let a = regularize(&assemble_system_matrix(&dops, 0.95), 1e-8);
        let factor: Arc<dyn Factorization> = Arc::from(factorize(&a).unwrap());
        let mut r = rng(seed);
        let mut solver = UpdatingSolver::new(factor.clone(), 1e-8, random_constraints(&mut r, n, 3, 1.0)).unwrap();
        for _ in 0..ops_count {
            let current = solver.constraints().clone();
            if current.len() > 1 && r.random_bool(0.4) {
                let v = current.indices()[r.random_range(0..current.len())];
                solver.remove_constraint(v).unwrap();
            } else {
                let v = loop {
                    let v = r.random_range(0..n);
                    if !current.contains(v) { break v; }
                };
                solver.add_constraint(v, random_vector(&mut r, 1.0)).unwrap();
            }
        }
        let batch = UpdatingSolver::new(factor, 1e-8, solver.constraints().clone()).unwrap();
        prop_assert!((solver.q_matrix() - batch.q_matrix()).amax() <= 1e-12);
        let rhs = DMatrix::from_fn(n, 3, |_, _| r.random_range(-1.0..1.0));
        let prev = DMatrix::from_fn(n, 3, |_, _| r.random_range(-1.0..1.0));
        let x = solver.kkt_solve(&rhs, &prev).unwrap();
        for (v, t) in solver.constraints().iter() {
            prop_assert!((x.row(v).transpose() - t).norm() < 1e-9);
        }
    }
}
