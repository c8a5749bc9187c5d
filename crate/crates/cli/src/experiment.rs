//! Experiment orchestration: system setup, simulation, invariant checks, artifacts.

use crate::config::{BodySpec, ExperimentConfig, ExperimentKind, Frame};
use crate::plot::{line_chart, Series};
use crate::report::{fmt_vec, Report};
use cavity_core::analysis::{
    attainability_report, check_energy_inequality, check_momentum_conservation, decay_fit,
    derive, detect_tc, estimate_omega_bar, flip_over_report, momentum_balance_residual,
    power_law_fit, predict_rstar, published_checks, stability_margin, AnalysisError,
};
use cavity_core::coupled_solver::{
    isotropic_shell, normalized_radius, CoupledError, CoupledSystem, Record, TimeSeries,
};
use cavity_core::fem_core::Discretization;
use cavity_core::geometry::{generate_mesh, Mesh};
use cavity_core::rigid_body::{liquid_inertia, shell_inertia, InertiaTensor, ShellInertiaSpec};
use nalgebra::{Matrix3, Vector3};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

pub const CSV_HEADER: &str =
    "t,p,q,r,v_l2,gradv_l2,E_total,E_liquid,Ap,Bq,Cr,subiters,residual";

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Solver(_) => EXIT_SOLVER,
            Failure::Io { .. } => EXIT_IO,
        }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |source| Failure::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn build_mesh(cfg: &ExperimentConfig) -> Result<Mesh, Failure> {
    generate_mesh(&cfg.shape, cfg.refinement).map_err(|e| Failure::Config(format!("mesh: {e}")))
}

/// Coupled system plus body-frame initial data.
pub struct Setup {
    pub system: CoupledSystem,
    pub omega0: Vector3<f64>,
    pub v0: Vec<f64>,
}

pub fn shell_tensor(cfg: &ExperimentConfig, liquid: &InertiaTensor) -> Result<InertiaTensor, Failure> {
    let shell = match &cfg.body {
        BodySpec::TargetTotal(t) => shell_inertia(&ShellInertiaSpec::TargetTotal(*t), liquid),
        BodySpec::Explicit(m) => {
            shell_inertia(&ShellInertiaSpec::Explicit(Matrix3::from_row_slice(m)), liquid)
        }
        BodySpec::Isotropic(lambda) => isotropic_shell(liquid, *lambda),
    };
    shell.map_err(|e| Failure::Config(format!("body: {e}")))
}

pub fn setup(cfg: &ExperimentConfig) -> Result<Setup, Failure> {
    let mesh = build_mesh(cfg)?;
    let liquid = liquid_inertia(&mesh, cfg.solver.rho)
        .map_err(|e| Failure::Config(format!("liquid inertia: {e}")))?;
    let shell = shell_tensor(cfg, &liquid)?;
    let radius = normalized_radius(&cfg.shape, &mesh);
    let disc = Discretization::with_pressure(mesh, cfg.solver.pressure);
    let system = CoupledSystem::new(disc, shell, cfg.solver.clone())
        .map_err(|e| Failure::Solver(e.to_string()))?;
    let w = Vector3::from(cfg.omega.components());
    let omega0 = match cfg.frame {
        Frame::Eigen => system.total.frame() * w,
        Frame::Body => w,
    };
    let v0 = system
        .initial_velocity(&cfg.velocity, &omega0, radius)
        .map_err(|e| Failure::Solver(format!("initial velocity: {e}")))?;
    Ok(Setup {
        system,
        omega0,
        v0,
    })
}

/// Steps to `T`, returning the series so far and the error that stopped it, if any.
pub fn simulate(
    setup: &mut Setup,
    mut progress: impl FnMut(&Record),
) -> Result<(TimeSeries, Option<CoupledError>), CoupledError> {
    let sys = &mut setup.system;
    let mut state = sys.initial_state(&setup.omega0, &setup.v0)?;
    let n = sys.config.num_steps();
    let mut records = vec![sys.record(&state, None)];
    let mut error = None;
    for k in 1..=n {
        match sys.step(&state) {
            Ok((next, report)) => {
                state = next;
                state.flow.t = k as f64 * sys.config.tau;
                let rec = sys.record(&state, Some(&report));
                progress(&rec);
                records.push(rec);
            }
            Err(e) => {
                error = Some(e);
                break;
            }
        }
    }
    Ok((
        TimeSeries {
            records,
            eigenvalues: sys.total.eigenvalues(),
            tau: sys.config.tau,
            mu: sys.config.mu(),
        },
        error,
    ))
}

pub fn write_csv(series: &TimeSeries, out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in &series.records {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}",
            r.t,
            r.pqr.x,
            r.pqr.y,
            r.pqr.z,
            r.v_l2,
            r.gradv_l2,
            r.energy_total,
            r.energy_liquid,
            r.momentum_eig.x,
            r.momentum_eig.y,
            r.momentum_eig.z,
            r.subiters,
            r.residual
        )?;
    }
    Ok(())
}

pub fn write_plots(series: &TimeSeries, dir: &Path) -> Result<(), Failure> {
    let t = series.times();
    let column = |f: fn(&Record) -> f64| series.records.iter().map(f).collect::<Vec<f64>>();
    let plots: [(&str, &str, Vec<f64>); 5] = [
        ("p", "p(t)", column(|r| r.pqr.x)),
        ("q", "q(t)", column(|r| r.pqr.y)),
        ("r", "r(t)", column(|r| r.pqr.z)),
        ("v_l2", "relative velocity ||v||_2", column(|r| r.v_l2)),
        ("E_total", "total energy", column(|r| r.energy_total)),
    ];
    for (name, title, y) in plots {
        let svg = line_chart(
            title,
            "t",
            name,
            &[Series {
                label: name,
                x: &t,
                y: &y,
            }],
        );
        let path = dir.join(format!("{name}.svg"));
        std::fs::write(&path, svg).map_err(io(&path))?;
    }
    Ok(())
}

/// Summary of one simulation, used by single runs and sweeps.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub nu: f64,
    pub exit_code: i32,
    pub report: Report,
    pub t_c: Result<f64, String>,
    /// `(p, q, r)` at the first sample at or after `t_c`
    pub pqr_tc: Option<Vector3<f64>>,
    pub r0: f64,
    pub r_bar: f64,
    pub sign_r0: i8,
    pub sign_rbar: i8,
    pub flipped: bool,
}

fn analysis_text<T: std::fmt::Display>(r: &Result<T, AnalysisError>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => format!("unavailable ({e})"),
    }
}

/// Checks and summary lines of a finished (or stopped) run.
fn summarize(
    cfg: &ExperimentConfig,
    setup: &Setup,
    series: &TimeSeries,
    error: Option<&CoupledError>,
    report: &mut Report,
) -> PointResult {
    let first = &series.records[0];
    let last = series.last();
    let sys = &setup.system;
    report.push("steps", series.records.len() - 1);
    report.push("steps_planned", cfg.solver.num_steps());
    report.push("t_final", last.t);
    report.push("eigenvalues", fmt_vec(&series.eigenvalues));
    report.push("omega0_pqr", fmt_vec(first.pqr.as_slice()));
    report.push("final_pqr", fmt_vec(last.pqr.as_slice()));
    report.push("final_omega_inf", fmt_vec(last.omega_inf.as_slice()));
    let w0 = first.omega.norm().max(f64::MIN_POSITIVE);
    let deviation = series
        .records
        .iter()
        .map(|r| (r.omega - first.omega).norm())
        .fold(0.0, f64::max)
        / w0;
    report.push("max_rel_omega_deviation", deviation);
    report.push("initial_v_l2", first.v_l2);
    report.push("final_v_l2", last.v_l2);
    report.push("initial_E_total", first.energy_total);
    report.push("final_E_total", last.energy_total);
    report.push("initial_E_liquid", first.energy_liquid);

    let times = series.times();
    let omegas: Vec<Vector3<f64>> = series.records.iter().map(|r| r.omega).collect();
    let bar = estimate_omega_bar(&times, &omegas);
    match &bar {
        Ok(b) => {
            report.push("omega_bar_pqr", fmt_vec(sys.total.to_eigenframe(&b.mean).as_slice()));
            report.push("omega_bar_std", b.std);
        }
        Err(e) => report.push("omega_bar_pqr", format!("unavailable ({e})")),
    }
    let t_c = detect_tc(series, None);
    report.push("t_c", analysis_text(&t_c));
    let pqr_tc = t_c.as_ref().ok().and_then(|&tc| {
        series
            .records
            .iter()
            .find(|r| r.t >= tc)
            .map(|r| r.pqr)
    });
    if let Some(p) = pqr_tc {
        report.push("pqr_at_t_c", fmt_vec(p.as_slice()));
    }

    let flip = flip_over_report(series);
    report.push("sign_r0", flip.sign_r0);
    report.push("sign_r_bar", flip.sign_rbar);
    report.push("r_bar", flip.rbar);
    report.push("flipped", flip.flipped);
    report.push("cos_theta0", flip.cos_theta0);
    report.push("cos_theta_inf", flip.cos_theta_inf);

    if sys.total.is_spherical(1e-6) {
        match decay_fit(series, false) {
            Ok(fit) => {
                report.push("decay_rate", fit.rate);
                report.push("decay_prefactor", fit.prefactor);
                report.push("decay_r_squared", fit.r_squared);
            }
            Err(e) => report.push("decay_rate", format!("unavailable ({e})")),
        }
    }

    let mut exit_code = EXIT_OK;
    if cfg.checks.energy {
        let e = check_energy_inequality(series, cfg.checks.energy_tol);
        report.push("energy_check", if e.passed() { "passed" } else { "failed" });
        report.push("energy_violations", e.violations.len());
        report.push("energy_max_increase", e.max_increase);
        report.push("energy_tolerance", e.tolerance);
        if !e.passed() {
            exit_code = EXIT_INVARIANT;
        }
    } else {
        report.push("energy_check", "disabled");
    }
    let m = check_momentum_conservation(series);
    if cfg.checks.momentum {
        let ok = m.max_rel_drift <= cfg.checks.momentum_tol;
        report.push("momentum_check", if ok { "passed" } else { "failed" });
        if !ok {
            exit_code = EXIT_INVARIANT;
        }
    } else {
        report.push("momentum_check", "disabled");
    }
    report.push("momentum_initial", m.initial);
    report.push("momentum_max_rel_drift", m.max_rel_drift);
    report.push("momentum_tolerance", cfg.checks.momentum_tol);
    report.push("max_omega_inf", m.max_omega_inf);
    report.push("momentum_balance_residual", momentum_balance_residual(series));
    let subiters: Vec<usize> = series.records.iter().skip(1).map(|r| r.subiters).collect();
    report.push("total_subiterations", subiters.iter().sum::<usize>());
    report.push("max_subiterations", subiters.iter().copied().max().unwrap_or(0));
    report.push("factorizations", sys.factorizations());

    if let Some(e) = error {
        exit_code = EXIT_SOLVER;
        report.push("error", e);
    }
    report.insert_status(exit_code);
    PointResult {
        nu: cfg.solver.nu,
        exit_code,
        report: report.clone(),
        t_c: t_c.map_err(|e| e.to_string()),
        pqr_tc,
        r0: flip.r0,
        r_bar: flip.rbar,
        sign_r0: flip.sign_r0,
        sign_rbar: flip.sign_rbar,
        flipped: flip.flipped,
    }
}

fn failed_point(cfg: &ExperimentConfig, failure: &Failure, report: &mut Report) -> PointResult {
    report.push("error", failure);
    report.insert_status(failure.exit_code());
    PointResult {
        nu: cfg.solver.nu,
        exit_code: failure.exit_code(),
        report: report.clone(),
        t_c: Err(failure.to_string()),
        pqr_tc: None,
        r0: f64::NAN,
        r_bar: f64::NAN,
        sign_r0: 0,
        sign_rbar: 0,
        flipped: false,
    }
}

fn write_report(report: &Report, dir: &Path) -> Result<(), Failure> {
    let path = dir.join("report.txt");
    std::fs::write(&path, report.render()).map_err(io(&path))
}

/// One simulation into `dir`: timeseries.csv, report.txt and the SVG plots. The report is
/// written on every path that gets as far as creating `dir`.
pub fn run_point(cfg: &ExperimentConfig, dir: &Path, label: &str) -> Result<PointResult, Failure> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut report = Report::new();
    report.push("experiment", label);
    report.push("nu", cfg.solver.nu);
    let mut setup = match setup(cfg) {
        Ok(s) => s,
        Err(f) => {
            let point = failed_point(cfg, &f, &mut report);
            write_report(&point.report, dir)?;
            return Ok(point);
        }
    };
    let n = cfg.solver.num_steps().max(1);
    let mut next = 1;
    let progress = |r: &Record| {
        let k = (r.t / cfg.solver.tau).round() as usize;
        if k * 10 >= next * n {
            next += 1;
            eprintln!(
                "[{label}] t = {:.3} pqr = {} |v| = {:.3e}",
                r.t,
                fmt_vec(r.pqr.as_slice()),
                r.v_l2
            );
        }
    };
    let (series, error) = match simulate(&mut setup, progress) {
        Ok(x) => x,
        Err(e) => {
            let point = failed_point(cfg, &Failure::Solver(e.to_string()), &mut report);
            write_report(&point.report, dir)?;
            return Ok(point);
        }
    };
    let csv = dir.join("timeseries.csv");
    let mut file = std::io::BufWriter::new(std::fs::File::create(&csv).map_err(io(&csv))?);
    write_csv(&series, &mut file)
        .and_then(|_| file.flush())
        .map_err(io(&csv))?;
    let point = summarize(cfg, &setup, &series, error.as_ref(), &mut report);
    write_report(&point.report, dir)?;
    if cfg.plots {
        write_plots(&series, dir)?;
    }
    Ok(point)
}

/// Sweep parallelism: `SPINNING_CAVITY_THREADS` if set, else the available cores.
pub fn thread_count(points: usize) -> usize {
    let cap = std::env::var("SPINNING_CAVITY_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    cap.min(points).max(1)
}

/// Applies `f` to every item on up to `threads` scoped workers; results keep item order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every item is processed"))
        .collect()
}

pub fn point_dir(out: &Path, nu: f64) -> PathBuf {
    out.join(format!("nu_{nu}"))
}

/// Outcome of an experiment: the merged report and the process exit code.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: Report,
}

fn worst(codes: impl Iterator<Item = i32>) -> i32 {
    // severity: configuration > solver > invariant > ok
    let rank = |c: i32| match c {
        EXIT_CONFIG => 4,
        EXIT_SOLVER => 3,
        EXIT_IO => 2,
        EXIT_INVARIANT => 1,
        _ => 0,
    };
    codes.max_by_key(|&c| rank(c)).unwrap_or(EXIT_OK)
}

fn sweep(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<Outcome, Failure> {
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out).map_err(io(out))?;
    let values = cfg.sweep_values();
    let threads = thread_count(values.len());
    let points = parallel_map(&values, threads, |&nu| {
        let mut c = cfg.clone();
        c.solver.nu = nu;
        let label = format!("nu={nu}");
        run_point(&c, &point_dir(out, nu), &label)
    });

    let mut report = Report::new();
    report.push("experiment", kind);
    report.push("nu_values", fmt_vec(&values));
    let mut csv = String::from("nu,t_c,p_tc,q_tc,r_tc,r0,r_bar,sign_r0,sign_r_bar,flipped,exit_code\n");
    let mut results = Vec::new();
    for p in points {
        let p = p?;
        let key = format!("nu_{}", p.nu);
        report.push(&format!("{key}.exit_code"), p.exit_code);
        report.push(
            &format!("{key}.t_c"),
            p.t_c.as_ref().map_or_else(|e| format!("unavailable ({e})"), f64::to_string),
        );
        report.push(&format!("{key}.r_bar"), p.r_bar);
        report.push(&format!("{key}.sign_r_bar"), p.sign_rbar);
        report.push(&format!("{key}.flipped"), p.flipped);
        let pqr = p.pqr_tc.unwrap_or(Vector3::repeat(f64::NAN));
        let _ = writeln!(
            csv,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{},{}",
            p.nu,
            p.t_c.as_ref().copied().unwrap_or(f64::NAN),
            pqr.x,
            pqr.y,
            pqr.z,
            p.r0,
            p.r_bar,
            p.sign_r0,
            p.sign_rbar,
            p.flipped,
            p.exit_code
        );
        results.push(p);
    }
    let path = out.join("sweep.csv");
    std::fs::write(&path, csv).map_err(io(&path))?;

    let mut fit: Vec<(f64, f64)> = results
        .iter()
        .filter_map(|p| p.t_c.as_ref().ok().map(|&t| (p.nu, t)))
        .collect();
    if fit.len() >= 2 {
        report.push("power_law_exponent", analysis_text(&power_law_fit(&fit)));
    } else {
        report.push("power_law_exponent", "unavailable (fewer than two t_c values)");
    }
    fit.sort_by(|a, b| b.0.total_cmp(&a.0));
    let increasing = fit.len() == results.len() && fit.windows(2).all(|w| w[1].1 > w[0].1);
    report.push("t_c_increasing_as_nu_decreases", increasing);
    let mut by_nu: Vec<&PointResult> = results.iter().collect();
    by_nu.sort_by(|a, b| b.nu.total_cmp(&a.nu));
    let changes: Vec<String> = by_nu
        .windows(2)
        .filter(|w| w[0].sign_rbar != 0 && w[1].sign_rbar != 0 && w[0].sign_rbar != w[1].sign_rbar)
        .map(|w| format!("({}, {})", w[1].nu, w[0].nu))
        .collect();
    report.push(
        "sign_change_intervals",
        if changes.is_empty() {
            "none".to_string()
        } else {
            changes.join(" ")
        },
    );
    let code = worst(results.iter().map(|p| p.exit_code));
    report.insert_status(code);
    write_report(&report, out)?;
    Ok(Outcome {
        exit_code: code,
        report,
    })
}

/// Conditions of the small-data attainability theorems for the configured initial data.
fn attainability(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let setup = setup(cfg)?;
    let sys = &setup.system;
    let mut u = sys.disc.spaces.rigid(&setup.omega0);
    for (ui, vi) in u.iter_mut().zip(&setup.v0) {
        *ui += vi;
    }
    let d = derive(&sys.disc, &u, &setup.omega0, &sys.total, cfg.solver.rho);
    let abc = sys.total.eigenvalues();
    let mut report = Report::new();
    report.push("experiment", ExperimentKind::Attainability);
    report.push("eigenvalues", fmt_vec(&abc));
    report.push("E0", d.energy_liquid);
    report.push("omega_inf0_pqr", fmt_vec(d.pqr.as_slice()));
    match attainability_report(d.energy_liquid, d.pqr, abc) {
        Ok(r) => push_conditions(&mut report, "", &r),
        Err(e) => report.push("verdict", format!("unavailable ({e})")),
    }
    report.insert_status(EXIT_OK);
    std::fs::create_dir_all(&cfg.output_dir).map_err(io(&cfg.output_dir))?;
    write_report(&report, &cfg.output_dir)?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        report,
    })
}

fn push_conditions(report: &mut Report, prefix: &str, r: &cavity_core::analysis::ConditionReport) {
    report.push(&format!("{prefix}case"), r.case.label());
    for i in &r.inequalities {
        report.push(&format!("{prefix}{}.statement", i.name), i.statement);
        report.push(&format!("{prefix}{}.lhs", i.name), i.lhs);
        report.push(&format!("{prefix}{}.rhs", i.name), i.rhs);
        report.push(&format!("{prefix}{}.verdict", i.name), i.verdict);
    }
    report.push(&format!("{prefix}verdict"), r.verdict);
    report.push(&format!("{prefix}prediction"), &r.prediction);
}

/// Published attainability inputs, with the conditions recomputed beside the printed values.
pub fn published_attainability() -> Outcome {
    let mut report = Report::new();
    report.push("experiment", "attainability (published inputs)");
    for (k, check) in published_checks().iter().enumerate() {
        let prefix = format!("check{}.", k + 1);
        report.push(&format!("{prefix}description"), check.description);
        report.push(&format!("{prefix}eigenvalues"), fmt_vec(&check.inertia));
        report.push(&format!("{prefix}omega0"), fmt_vec(check.omega0.as_slice()));
        report.push(&format!("{prefix}E0"), check.e0);
        let show = |v: Option<f64>| v.map_or("not printed".to_string(), |x| x.to_string());
        report.push(&format!("{prefix}printed_lhs"), show(check.printed.0));
        report.push(&format!("{prefix}printed_rhs"), show(check.printed.1));
        match attainability_report(check.e0, check.omega0, check.inertia) {
            Ok(r) => {
                if let Some(i) = r.inequality(check.inequality) {
                    report.push(&format!("{prefix}recomputed_lhs"), i.lhs);
                    report.push(&format!("{prefix}recomputed_rhs"), i.rhs);
                }
                push_conditions(&mut report, &prefix, &r);
            }
            Err(e) => report.push(&format!("{prefix}verdict"), format!("unavailable ({e})")),
        }
    }
    report.insert_status(EXIT_OK);
    Outcome {
        exit_code: EXIT_OK,
        report,
    }
}

/// Perturbed permanent rotation `ω₀ e₃`: margin, predicted limit and the simulated one.
fn stability(cfg: &ExperimentConfig, simulate_run: bool) -> Result<Outcome, Failure> {
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out).map_err(io(out))?;
    let s = setup(cfg)?;
    let abc = s.system.total.eigenvalues();
    let mut u = s.system.disc.spaces.rigid(&s.omega0);
    for (ui, vi) in u.iter_mut().zip(&s.v0) {
        *ui += vi;
    }
    let d = derive(&s.system.disc, &u, &s.omega0, &s.system.total, cfg.solver.rho);
    let perturbation = d.pqr - Vector3::new(0.0, 0.0, cfg.spin);
    let mut report = Report::new();
    report.push("experiment", ExperimentKind::Stability);
    report.push("eigenvalues", fmt_vec(&abc));
    report.push("spin", cfg.spin);
    report.push("perturbation_pqr", fmt_vec(perturbation.as_slice()));
    report.push("stability_margin", analysis_text(&stability_margin(abc)));
    let rstar = predict_rstar(abc, cfg.spin, perturbation);
    report.push("predicted_r_star", analysis_text(&rstar));
    let mut code = EXIT_OK;
    if simulate_run {
        let point = run_point(cfg, &out.join("run"), "stability")?;
        code = point.exit_code;
        report.push("run.exit_code", point.exit_code);
        report.push("run.r_bar", point.r_bar);
        let simulated = point.r_bar - cfg.spin;
        report.push("simulated_r_star", simulated);
        if let Ok(r) = rstar {
            report.push("r_star_difference", simulated - r);
        }
    }
    report.insert_status(code);
    write_report(&report, out)?;
    Ok(Outcome {
        exit_code: code,
        report,
    })
}

/// Runs the experiment selected by `kind`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    kind: ExperimentKind,
    simulate_stability: bool,
) -> Result<Outcome, Failure> {
    match kind {
        ExperimentKind::Run => {
            let p = run_point(cfg, &cfg.output_dir, "run")?;
            Ok(Outcome {
                exit_code: p.exit_code,
                report: p.report,
            })
        }
        ExperimentKind::SweepNu | ExperimentKind::FlipOver => sweep(cfg, kind),
        ExperimentKind::Attainability => attainability(cfg),
        ExperimentKind::Stability => stability(cfg, simulate_stability),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_keeps_order() {
        let items: Vec<usize> = (0..17).collect();
        for threads in [1, 3, 8] {
            let out = parallel_map(&items, threads, |&i| i * i);
            assert_eq!(out, items.iter().map(|i| i * i).collect::<Vec<_>>());
        }
    }

    #[test]
    fn severity_order_of_exit_codes() {
        assert_eq!(worst([0, 4, 0].into_iter()), 4);
        assert_eq!(worst([4, 3].into_iter()), 3);
        assert_eq!(worst([3, 2, 4].into_iter()), 2);
        assert_eq!(worst(std::iter::empty()), 0);
    }

    #[test]
    fn published_inputs_are_recomputed() {
        let out = published_attainability();
        let text = out.report.render();
        assert!(text.contains("check1.printed_lhs: 9.686"), "{text}");
        assert!(text.contains("check1.asymmetric_first.verdict: violated"), "{text}");
        assert!(text.contains("check3.oblate.verdict: violated"), "{text}");
    }
}
