use super::*;
use crate::geometry::{generate_ellipsoid_mesh, Mesh};
use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ball(k: u32) -> Discretization {
    Discretization::new(generate_ellipsoid_mesh(1.0, 1.0, 1.0, k).unwrap())
}

fn ellipsoid(k: u32) -> Discretization {
    Discretization::new(generate_ellipsoid_mesh(1.2, 1.0, 0.8, k).unwrap())
}

fn unit_tet() -> Discretization {
    Discretization::new(
        Mesh::from_tets(
            vec![
                Point::new(0.0, 0.0, 0.0),
                Point::new(1.0, 0.0, 0.0),
                Point::new(0.0, 1.0, 0.0),
                Point::new(0.0, 0.0, 1.0),
            ],
            vec![[0, 1, 2, 3]],
        )
        .unwrap(),
    )
}

fn op_for(d: &Discretization) -> AssembledOperator {
    AssembledOperator::assemble(
        &d.spaces,
        &d.mesh,
        1.3,
        0.7,
        ConvectionForm::default(),
        None,
    )
    .unwrap()
}

/// `Σ |x_r| |A_rc| |y_c|` over the velocity block, the natural scale of `xᵀAy`.
fn abs_form(op: &AssembledOperator, vals: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let nu = x.len();
    let mut s = 0.0;
    for r in 0..nu {
        for k in op.pattern.row(r) {
            let c = op.pattern.cols[k];
            if c < nu {
                s += (x[r] * vals[k] * y[c]).abs();
            }
        }
    }
    s
}

fn rigid_fields(d: &Discretization) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for k in 0..3 {
        let e = Vector3::ith(k, 1.0);
        out.push(d.spaces.interpolate(|_| e));
        out.push(d.spaces.rigid(&e));
    }
    out
}

fn random_field(d: &Discretization, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d.spaces.num_velocity())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect()
}

#[test]
fn rigid_fields_have_zero_strain_energy() {
    let d = ball(0);
    let op = op_for(&d);
    for u in rigid_fields(&d) {
        let e = op.velocity_form(&op.stiffness, &u, &u);
        assert!(
            e.abs() <= 1e-12 * abs_form(&op, &op.stiffness, &u, &u),
            "{e}"
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let u = random_field(&d, &mut rng);
        let e = op.velocity_form(&op.stiffness, &u, &u);
        assert!(e > 1e-3 * abs_form(&op, &op.stiffness, &u, &u));
    }
}

#[test]
fn stiffness_and_mass_are_symmetric() {
    let d = ball(0);
    let op = op_for(&d);
    let nu = d.spaces.num_velocity();
    for r in 0..nu {
        for k in op.pattern.row(r) {
            let c = op.pattern.cols[k];
            if c < nu {
                let kt = op.pattern.find(c, r).unwrap();
                assert!((op.stiffness[k] - op.stiffness[kt]).abs() < 1e-14);
                assert!((op.mass[k] - op.mass[kt]).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn coriolis_block_is_skew() {
    let d = ellipsoid(0);
    let op = op_for(&d);
    let s = op.coriolis_values(&Vector3::new(0.3, -1.1, 2.0));
    let nu = d.spaces.num_velocity();
    let smax = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut sym = 0.0f64;
    for r in 0..nu {
        for k in op.pattern.row(r) {
            let c = op.pattern.cols[k];
            if c < nu {
                sym = sym.max((s[k] + s[op.pattern.find(c, r).unwrap()]).abs());
            }
        }
    }
    assert!(sym <= 1e-12 * smax, "{sym} vs {smax}");
}

#[test]
fn divergence_of_constants_vanishes() {
    let d = ellipsoid(0);
    let op = op_for(&d);
    let c = d.spaces.interpolate(|_| Vector3::new(0.4, -2.0, 1.5));
    let bc = op.apply_divergence(&c);
    let scale: f64 = op.divergence.iter().map(|v| v.abs()).fold(0.0, f64::max) * 2.0;
    for v in bc {
        assert!(v.abs() <= 1e-12 * scale, "{v}");
    }
    // rigid rotations are divergence free as well
    let r = d.spaces.rigid(&Vector3::new(1.0, 2.0, 3.0));
    for v in op.apply_divergence(&r) {
        assert!(v.abs() <= 1e-12 * scale * 3.0);
    }
}

#[test]
fn mass_of_unit_field_is_density_times_volume() {
    let d = ellipsoid(0);
    let op = op_for(&d);
    let e = d.spaces.interpolate(|_| Vector3::new(1.0, 0.0, 0.0));
    let m = op.velocity_form(&op.mass, &e, &e);
    assert!((m - 1.3 * d.volume()).abs() < 1e-12 * m);
}

#[test]
fn mass_matrix_is_positive_definite_on_samples() {
    let d = ball(0);
    let op = op_for(&d);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let u = random_field(&d, &mut rng);
        assert!(op.velocity_form(&op.mass, &u, &u) > 0.0);
    }
}

#[test]
fn boundary_values_are_rigid_rotation() {
    let d = ball(0);
    let g = d.boundary_values(&Vector3::new(0.0, 0.0, 1.0));
    for &n in d.spaces.boundary_nodes() {
        let x = d.spaces.nodes()[n];
        assert_eq!(&g[3 * n..3 * n + 3], &[-x.y, x.x, 0.0]);
    }
    let g0 = d.boundary_values(&Vector3::zeros());
    assert!(g0.iter().all(|&v| v == 0.0));
}

#[test]
fn zero_data_gives_zero_solution_and_exact_boundary_rows() {
    let d = ball(0);
    let mut lp = LiquidProblem::new(&d, 1.0, 0.1, ConvectionForm::default()).unwrap();
    let zero = vec![0.0; d.spaces.num_velocity()];
    let sol = lp
        .solve(&d, 0.01, &Vector3::zeros(), &zero, &zero, None)
        .unwrap();
    assert!(sol.u.iter().all(|v| v.abs() < 1e-14));
    assert!(sol.p.iter().all(|v| v.abs() < 1e-12));

    let omega = Vector3::new(0.2, 0.1, 1.0);
    let sol = lp.solve(&d, 0.01, &omega, &zero, &zero, None).unwrap();
    let g = d.boundary_values(&omega);
    for &n in d.spaces.boundary_nodes() {
        for i in 0..3 {
            assert_eq!(sol.u[3 * n + i], g[3 * n + i]);
        }
    }
    assert!(sol.residual < 1e-9);
    assert!(d.pressure_mean(&sol.p).abs() < 1e-12);
}

#[test]
fn steady_rigid_rotation_is_reproduced() {
    let omega = Vector3::new(0.3, -0.2, 1.0);
    let mut errs = Vec::new();
    for k in 0..2 {
        let d = ellipsoid(k);
        let mut lp = LiquidProblem::new(&d, 1.0, 0.1, ConvectionForm::default()).unwrap();
        let rigid = d.spaces.rigid(&omega);
        let zero = vec![0.0; rigid.len()];
        let sol = lp.solve(&d, 0.01, &omega, &rigid, &zero, None).unwrap();
        let diff: Vec<f64> = sol.u.iter().zip(&rigid).map(|(a, b)| a - b).collect();
        errs.push(d.l2_norm_sq(&diff).sqrt());
    }
    assert!(errs[0] < 1e-2, "{errs:?}");
    assert!(errs[1] < errs[0], "{errs:?}");
}

#[test]
fn norms_vanish_for_zero_relative_velocity() {
    let d = ball(0);
    let omega = Vector3::new(0.0, 0.0, 1.0);
    let u = d.spaces.interpolate(|x| Vector3::new(-x.y, x.x, 0.0));
    let v = d.relative_velocity(&u, &omega);
    assert!(d.l2_norm_sq(&v) < 1e-28);
    assert!(d.grad_norm_sq(&v) < 1e-28);
}

#[test]
fn norms_of_quadratic_field_on_unit_tet() {
    // v = (x², xy, 0): ∫|v|² = ∫x⁴ + x²y² = 24/7! + 4/7! ; ∫|∇v|² = ∫5x² + y² = 6/60
    let d = unit_tet();
    let v = d
        .spaces
        .interpolate(|x| Vector3::new(x.x * x.x, x.x * x.y, 0.0));
    assert!((d.l2_norm_sq(&v) - 28.0 / 5040.0).abs() < 1e-15);
    assert!((d.grad_norm_sq(&v) - 0.1).abs() < 1e-15);
}

#[test]
fn rigid_residual_matches_inertia_identity() {
    let d = ellipsoid(0);
    let omega = Vector3::new(0.7, -0.4, 1.3);
    let u = d.spaces.rigid(&omega);
    let w = d.relative_velocity(&u, &omega);
    let il = d.inertia(1.0);
    let expected = omega.cross(&(il * omega));
    for form in [
        ConvectionForm::Conservative,
        ConvectionForm::Advective,
        ConvectionForm::SkewSymmetric,
    ] {
        let r = d.rigid_residual(1.0, form, &u, &omega, &w, None);
        assert!(
            (r - expected).norm() < 1e-12 * expected.norm().max(1.0),
            "{form}"
        );
    }
}

#[test]
fn constant_pressure_exerts_no_torque() {
    let d = ellipsoid(0);
    let zero = vec![0.0; d.spaces.num_velocity()];
    let state = FlowState {
        u: zero,
        p: vec![2.5; d.spaces.num_pressure()],
        t: 0.0,
    };
    let t = d.traction_torque(1.0, ConvectionForm::default(), &state, &Vector3::zeros());
    assert!(t.norm() < 1e-12);
    assert!(d.surface_pressure_torque(&state.p).norm() < 1e-12);
}

#[test]
fn pressure_schur_complement_is_positive_off_constants() {
    let d = ball(0);
    let op = op_for(&d);
    let nu = d.spaces.num_velocity();
    let np = d.spaces.num_pressure();
    let mut mask = d.dirichlet_mask();
    for r in nu..mask.len() {
        mask[r] = true;
    }
    let mut solver = ConstrainedSolver::new(&op.pattern, mask).unwrap();
    let vals: Vec<f64> = op.mass.clone();
    let lu = solver.factor(&vals).unwrap();
    let n = d.spaces.num_unknowns();
    let zero = vec![0.0; n];
    let mut s = DMatrix::<f64>::zeros(np, np);
    for c in 0..np {
        // column c of Bᵀ
        let mut rhs = vec![0.0; n];
        for k in op.pattern.row(nu + c) {
            let col = op.pattern.cols[k];
            if col < nu {
                rhs[col] = op.divergence[k];
            }
        }
        let z = solver.solve(&lu, &op.pattern, &vals, &rhs, &zero).unwrap();
        let bz = op.apply_divergence(&z[..nu]);
        for r in 0..np {
            s[(r, c)] = bz[r];
        }
    }
    let s = 0.5 * (&s + s.transpose());
    let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let max = ev[np - 1];
    assert!(ev[0].abs() < 1e-10 * max, "constant mode {}", ev[0]);
    assert!(ev[1] > 1e-6 * max, "inf-sup constant {} vs {}", ev[1], max);
}

#[test]
fn first_order_in_time_for_forced_flow() {
    let d = ball(0);
    let rho = 1.0;
    let mut lp = LiquidProblem::new(&d, rho, 0.1, ConvectionForm::default()).unwrap();
    let shape =
        d.load_vector(|x| Vector3::new(-x.y, x.x, 0.3 * x.x * x.z) * (1.0 - x.norm_squared()));
    let omega = Vector3::zeros();
    let t_end = 0.4;
    let run = |lp: &mut LiquidProblem, steps: usize| {
        let tau = t_end / steps as f64;
        let mut u = vec![0.0; d.spaces.num_velocity()];
        for n in 1..=steps {
            let t = n as f64 * tau;
            let f: Vec<f64> = shape.iter().map(|v| v * 5.0 * (3.0 * t).cos()).collect();
            let mut w = u.clone();
            let mut un = u.clone();
            for _ in 0..8 {
                un = lp.solve(&d, tau, &omega, &u, &w, Some(&f)).unwrap().u;
                w = un.clone();
            }
            u = un;
        }
        u
    };
    let u1 = run(&mut lp, 10);
    let u2 = run(&mut lp, 20);
    let u4 = run(&mut lp, 40);
    let e12: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a - b).collect();
    let e24: Vec<f64> = u2.iter().zip(&u4).map(|(a, b)| a - b).collect();
    let ratio = (d.l2_norm_sq(&e12) / d.l2_norm_sq(&e24)).sqrt();
    assert!((1.7..2.3).contains(&ratio), "ratio {ratio}");
}

#[test]
fn factorization_reuse_matches_fresh_solves() {
    let d = ball(0);
    let mut fresh = LiquidProblem::new(&d, 1.0, 0.05, ConvectionForm::default())
        .unwrap()
        .with_policy(RefactorPolicy::Always);
    let mut reuse = LiquidProblem::new(&d, 1.0, 0.05, ConvectionForm::default()).unwrap();
    let mut u = vec![0.0; d.spaces.num_velocity()];
    let mut omega = Vector3::new(0.1, 0.2, 1.0);
    for _ in 0..6 {
        let a = fresh.solve(&d, 0.01, &omega, &u, &u, None).unwrap();
        let b = reuse.solve(&d, 0.01, &omega, &u, &u, None).unwrap();
        let diff =
            a.u.iter()
                .zip(&b.u)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff < 1e-10, "diff {diff}");
        u = b.u;
        omega += Vector3::new(0.002, -0.001, 0.003);
    }
    assert_eq!(fresh.factorizations(), 6);
    assert!(reuse.factorizations() < 6, "{}", reuse.factorizations());
}

fn enriched(k: u32) -> Discretization {
    Discretization::with_pressure(
        generate_ellipsoid_mesh(1.2, 1.0, 0.8, k).unwrap(),
        PressureSpace::P1Quadratic,
    )
}

#[test]
fn enriched_pressure_reproduces_rigid_rotation_exactly() {
    let d = enriched(0);
    let omega = Vector3::new(0.3, -0.2, 1.0);
    let rho = 1.4;
    let mut lp = LiquidProblem::new(&d, rho, 0.1, ConvectionForm::default()).unwrap();
    let rigid = d.spaces.rigid(&omega);
    let zero = vec![0.0; rigid.len()];
    let sol = lp.solve(&d, 0.01, &omega, &rigid, &zero, None).unwrap();
    let diff: Vec<f64> = sol.u.iter().zip(&rigid).map(|(a, b)| a - b).collect();
    assert!(d.l2_norm_sq(&diff).sqrt() < 1e-11);
    // ρ|ω×x|²/2 = ρ/2 (|ω|²|x|² − (ω·x)²)
    let nv = d.spaces.num_pressure();
    for (m, &(j, k)) in QUADRATIC_MONOMIALS.iter().enumerate() {
        let expected = if j == k {
            0.5 * rho * (omega.norm_squared() - omega[j] * omega[j])
        } else {
            -rho * omega[j] * omega[k]
        };
        assert!((sol.p[nv + m] - expected).abs() < 1e-10, "monomial {m}");
    }
    let c = sol.p[0];
    assert!(sol.p[..nv].iter().all(|v| (v - c).abs() < 1e-10));
    assert!(d.pressure_mean(&sol.p).abs() < 1e-12);
}

#[test]
fn bordered_elimination_matches_monolithic_lu() {
    let d = enriched(0);
    let op = op_for(&d);
    let vals: Vec<f64> = (0..op.pattern.nnz())
        .map(|k| op.mass[k] + op.stiffness[k] + op.divergence[k] + op.mean[k])
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = d.spaces.num_unknowns();
    let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let g = d.boundary_values(&Vector3::new(0.2, 0.1, -0.5));
    let mut plain = ConstrainedSolver::new(&op.pattern, d.dirichlet_mask()).unwrap();
    let mut border =
        ConstrainedSolver::bordered(&op.pattern, d.dirichlet_mask(), d.spaces.num_enrichment())
            .unwrap();
    let a = plain.factor(&vals).unwrap();
    let b = border.factor(&vals).unwrap();
    let xa = plain.solve(&a, &op.pattern, &vals, &rhs, &g).unwrap();
    let xb = border.solve(&b, &op.pattern, &vals, &rhs, &g).unwrap();
    let scale = xa.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = xa.iter().zip(&xb).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(diff < 1e-9 * scale, "diff {diff} scale {scale}");
    assert!(border.residual(&op.pattern, &vals, &xb, &rhs) < 1e-9 * scale);
}

#[test]
fn enriched_projection_is_orthogonal_to_quadratics() {
    let d = enriched(0);
    let projector = DivergenceFreeProjector::new(&d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut v = random_field(&d, &mut rng);
    for &n in d.spaces.boundary_nodes() {
        v[3 * n..3 * n + 3].fill(0.0);
    }
    let w = projector.project(&d, &v).unwrap();
    let scale = d.l2_norm_sq(&w).sqrt();
    for m in 0..QUADRATIC_MONOMIALS.len() {
        let s = d.integrate(&w, 0.0, |x, _, g, wq| wq * g.trace() * quadratic_monomial(m, x));
        assert!(s.abs() < 1e-11 * scale, "monomial {m}: {s}");
    }
    let div = projector.divergence(&w);
    assert_eq!(div.len(), d.spaces.num_pressure() + 6);
    assert!(div.iter().all(|b| b.abs() < 1e-11 * scale));
}
