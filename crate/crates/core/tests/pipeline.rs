//! End-to-end use of the library: mesh files, inertia set-up, coupled runs and their analysis.

use cavity_core::analysis::*;
use cavity_core::coupled_solver::*;
use cavity_core::fem_core::{ConvectionForm, Discretization};
use cavity_core::geometry::*;
use cavity_core::rigid_body::*;
use nalgebra::Vector3;

fn oblate_system(config: SolverConfig) -> CoupledSystem {
    let mesh = generate_ellipsoid_mesh(1.0, 1.0, 1.0, 0).unwrap();
    let liquid = liquid_inertia(&mesh, config.rho).unwrap();
    let shell = shell_inertia(&ShellInertiaSpec::TargetTotal([2.2, 2.2, 2.8]), &liquid).unwrap();
    CoupledSystem::new(Discretization::new(mesh), shell, config).unwrap()
}

#[test]
fn saved_mesh_reloads_with_identical_inertia() {
    let dir = std::env::temp_dir().join(format!("cavity-core-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("cylinder.mesh");
    let mesh = generate_cylinder_mesh(0.8, 1.2, 1).unwrap();
    save_mesh(&mesh, &path).unwrap();
    let back = generate_mesh(&CavityShape::FromFile { path: path.clone() }, 0).unwrap();
    assert_eq!(back.tets(), mesh.tets());
    assert_eq!(back.boundary_facets().len(), mesh.boundary_facets().len());
    let (a, b) = (
        liquid_inertia(&mesh, 1.0).unwrap(),
        liquid_inertia(&back, 1.0).unwrap(),
    );
    assert!((a.matrix() - b.matrix()).amax() < 1e-14);
    assert_eq!(mesh_measures(&back).volume, mesh_measures(&mesh).volume);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn missing_mesh_file_names_the_path() {
    let path = std::path::PathBuf::from("/nonexistent/cavity.mesh");
    let err = generate_mesh(&CavityShape::FromFile { path }, 0).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/cavity.mesh"), "{err}");
}

#[test]
fn nutating_oblate_run_conserves_momentum_and_dissipates_energy() {
    let mut sys = oblate_system(SolverConfig {
        t_end: 0.3,
        ..SolverConfig::default()
    });
    let omega0 = sys.total.frame() * Vector3::new(0.3, 0.2, 2.0);
    let v0 = vec![0.0; sys.disc.spaces.num_velocity()];
    let s = sys.run(&omega0, &v0).unwrap();
    assert_eq!(s.records.len(), 31);
    let e = check_energy_inequality(&s, ENERGY_STEP_TOL);
    assert!(e.passed(), "{e:?}");
    assert!(s.last().energy_total < s.records[0].energy_total);
    // conservative convection transfers momentum exactly up to the sub-iteration tolerance
    let m = check_momentum_conservation(&s);
    assert!(m.max_rel_drift < 1e-6, "{m:?}");
    // the liquid is dragged along, so the relative velocity grows from zero
    assert_eq!(s.records[0].v_l2, 0.0);
    assert!(s.last().v_l2 > 0.0);
}

#[test]
fn skew_symmetric_form_keeps_momentum_within_a_percent() {
    let mut sys = oblate_system(SolverConfig {
        t_end: 0.3,
        convection: ConvectionForm::SkewSymmetric,
        ..SolverConfig::default()
    });
    let omega0 = sys.total.frame() * Vector3::new(0.888, 0.628, 6.28);
    let v0 = vec![0.0; sys.disc.spaces.num_velocity()];
    let s = sys.run(&omega0, &v0).unwrap();
    assert!(check_energy_inequality(&s, ENERGY_STEP_TOL).passed());
    let drift = check_momentum_conservation(&s).max_rel_drift;
    assert!(drift > 0.0 && drift < 1e-2, "{drift}");
}

#[test]
fn initial_record_feeds_the_attainability_conditions() {
    let mut sys = oblate_system(SolverConfig {
        t_end: 0.02,
        ..SolverConfig::default()
    });
    let omega0 = sys.total.frame() * Vector3::new(0.3, 0.2, 2.0);
    let shape = CavityShape::Ellipsoid {
        a: 1.0,
        b: 1.0,
        c: 1.0,
    };
    let radius = normalized_radius(&shape, &sys.disc.mesh);
    let v0 = sys
        .initial_velocity(&InitialVelocity::RadialProfile { beta: -1.0 }, &omega0, radius)
        .unwrap();
    let s = sys.run(&omega0, &v0).unwrap();
    let first = &s.records[0];
    assert!(first.energy_liquid > 0.0);
    let pqr_inf = first
        .momentum_eig
        .component_div(&Vector3::from(s.eigenvalues));
    let report = attainability_report(first.energy_liquid, pqr_inf, s.eigenvalues).unwrap();
    assert_eq!(report.case, InertiaCase::SymmetricOblate);
    let oblate = report.inequality("oblate").unwrap();
    assert_eq!(oblate.lhs, first.energy_liquid);
    assert_eq!(oblate.verdict, Verdict::Satisfied);
}

#[test]
fn spherical_permanent_rotation_is_left_alone() {
    let mesh = generate_ellipsoid_mesh(1.0, 1.0, 1.0, 0).unwrap();
    let liquid = liquid_inertia(&mesh, 1.0).unwrap();
    let shell = isotropic_shell(&liquid, 3.0).unwrap();
    let mut sys = CoupledSystem::new(
        Discretization::new(mesh),
        shell,
        SolverConfig {
            t_end: 0.1,
            ..SolverConfig::default()
        },
    )
    .unwrap();
    let omega0 = Vector3::new(0.0, 0.0, 1.7);
    let v0 = vec![0.0; sys.disc.spaces.num_velocity()];
    let s = sys.run(&omega0, &v0).unwrap();
    for r in &s.records {
        assert!((r.omega - omega0).norm() < 1e-10);
        assert!(r.subiters <= 2);
    }
    assert!(matches!(detect_tc(&s, None), Err(AnalysisError::Undefined(_))));
}
