//! Partitioned time stepping of the body–liquid system: an explicit θ-update of the body
//! with lagged torque, relaxation, and a linearised implicit-Euler liquid solve, repeated
//! until the angular velocity settles.

mod initial;

pub use initial::{normalized_radius, InitialVelocity};

use crate::analysis::derive;
use crate::fem_core::{
    ConvectionForm, Discretization, FemError, FlowState, LiquidProblem, PressureSpace,
    RefactorPolicy,
};
use crate::rigid_body::{liquid_inertia, InertiaTensor, RigidBodyError};
use nalgebra::{Matrix3, Vector3};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum CoupledError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Body(#[from] RigidBodyError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error(
        "step {step} (t = {t}) did not converge in {max} sub-iterations (last increment {increment:e})"
    )]
    SubiterationsExceeded {
        step: usize,
        t: f64,
        max: usize,
        increment: f64,
    },
    #[error("initial relative velocity is not admissible: {0}")]
    InitialVelocity(String),
}

macro_rules! choice_enum {
    ($(#[$m:meta])* $name:ident { $($(#[$vm:meta])* $variant:ident => $text:literal),+ $(,)? } default $default:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum $name {
            $($(#[$vm])* $variant),+
        }

        impl Default for $name {
            fn default() -> Self {
                $name::$default
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!(
                        "unknown value {s:?} (expected {})",
                        [$($text),+].join("|")
                    )),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self {
                    $($name::$variant => $text),+
                })
            }
        }
    };
}

choice_enum! {
    /// Base of the relaxation `ω^k = σ ω* + (1 − σ) base`.
    RelaxAgainst {
        PreviousStep => "previous_step",
        PreviousIterate => "previous_iterate",
    } default PreviousIterate
}

choice_enum! {
    /// Liquid torque used in the `(1 − θ)` part of the body update.
    OldTorque {
        /// the converged torque stored at the end of the previous step
        PreviousStep => "previous_step",
        /// previous-step spatial torque with the current time difference of the liquid
        /// momentum; makes the total angular momentum obey the θ-rule exactly
        CurrentDifference => "current_difference",
    } default CurrentDifference
}

choice_enum! {
    /// Tensor multiplying `dω/dt` and the gyroscopic term in the body update.
    BodyInertia {
        Shell => "shell",
        Total => "total",
    } default Shell
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tau: f64,
    pub t_end: f64,
    pub theta: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub max_subiters: usize,
    /// kinematic viscosity `μ/ρ`
    pub nu: f64,
    pub rho: f64,
    pub relax_against: RelaxAgainst,
    pub old_torque: OldTorque,
    pub body_inertia: BodyInertia,
    pub convection: ConvectionForm,
    pub pressure: PressureSpace,
    pub refactor: RefactorPolicy,
    /// largest admissible element Péclet number of the relative velocity
    pub max_peclet: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tau: 0.01,
            t_end: 20.0,
            theta: 0.5,
            sigma: 0.5,
            epsilon: 1e-8,
            max_subiters: 100,
            nu: 0.1,
            rho: 1.0,
            relax_against: RelaxAgainst::default(),
            old_torque: OldTorque::default(),
            body_inertia: BodyInertia::default(),
            convection: ConvectionForm::default(),
            pressure: PressureSpace::P1Quadratic,
            refactor: RefactorPolicy::default(),
            max_peclet: 100.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), CoupledError> {
        let bad = |m: String| Err(CoupledError::Config(m));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau = {} must be positive", self.tau));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be non-negative", self.t_end));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad(format!("theta = {} must lie in [0, 1]", self.theta));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return bad(format!("sigma = {} must lie in (0, 1)", self.sigma));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon = {} must be positive", self.epsilon));
        }
        if self.max_subiters < 2 {
            return bad(format!("max_subiters = {} must be at least 2", self.max_subiters));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return bad(format!("nu = {} must be positive", self.nu));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho = {} must be positive", self.rho));
        }
        if !(self.max_peclet > 0.0) {
            return bad(format!("max_peclet = {} must be positive", self.max_peclet));
        }
        Ok(())
    }

    pub fn mu(&self) -> f64 {
        self.nu * self.rho
    }

    /// `⌈T/τ⌉`
    pub fn num_steps(&self) -> usize {
        (self.t_end / self.tau * (1.0 - 1e-12)).ceil() as usize
    }
}

/// Explicit θ-update of the body with all right-hand side terms lagged:
///
/// `I_B (ω* − ω_{n−1})/τ = θ [G^{k−1} − ω^{k−1} × I_B ω^{k−1}]
///   + (1 − θ) [G_{n−1} − ω_{n−1} × I_B ω_{n−1}]`,
///
/// where `G` is the torque exerted by the liquid on the body.
pub fn body_step(
    i_b: &InertiaTensor,
    omega_prev: &Vector3<f64>,
    torque_prev: &Vector3<f64>,
    omega_iter: &Vector3<f64>,
    torque_iter: &Vector3<f64>,
    theta: f64,
    tau: f64,
) -> Vector3<f64> {
    let gyro = |w: &Vector3<f64>| w.cross(&i_b.apply(w));
    let rate =
        theta * (torque_iter - gyro(omega_iter)) + (1.0 - theta) * (torque_prev - gyro(omega_prev));
    omega_prev + tau * i_b.solve(&rate)
}

/// Converged discrete state at `t_n`.
#[derive(Debug, Clone)]
pub struct StepState {
    pub flow: FlowState,
    pub omega: Vector3<f64>,
    /// `∫ρ x × u`
    pub liquid_momentum: Vector3<f64>,
    /// spatial part (rotation and convection) of the consistent liquid residual on the
    /// rigid test fields
    pub spatial_residual: Vector3<f64>,
    /// full consistent residual `∫_{∂C} x × T·n` of the step that produced this state
    pub residual_torque: Vector3<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub subiters: usize,
    /// `|ω^k − ω^{k−1}|` per sub-iteration
    pub increments: Vec<f64>,
    pub linear_residual: f64,
    pub peclet: f64,
}

/// One time series sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: f64,
    /// body angular velocity, body frame
    pub omega: Vector3<f64>,
    /// `ω` in the eigenframe of the total inertia
    pub pqr: Vector3<f64>,
    /// `ω∞`, body frame
    pub omega_inf: Vector3<f64>,
    /// total angular momentum `A`, body frame
    pub momentum: Vector3<f64>,
    /// `I·ω∞` in the eigenframe, i.e. `(A p∞, B q∞, C r∞)`
    pub momentum_eig: Vector3<f64>,
    pub v_l2: f64,
    pub gradv_l2: f64,
    pub energy_total: f64,
    pub energy_liquid: f64,
    pub subiters: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub records: Vec<Record>,
    /// eigenvalues `A ≤ B ≤ C` of the total inertia
    pub eigenvalues: [f64; 3],
    pub tau: f64,
    pub mu: f64,
}

impl TimeSeries {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn last(&self) -> &Record {
        self.records.last().expect("time series is never empty")
    }
}

/// The discretised body–liquid system.
pub struct CoupledSystem {
    pub disc: Discretization,
    pub config: SolverConfig,
    pub shell: InertiaTensor,
    pub liquid: InertiaTensor,
    pub total: InertiaTensor,
    body: InertiaTensor,
    problem: LiquidProblem,
    step_index: usize,
}

impl fmt::Debug for CoupledSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoupledSystem")
            .field("config", &self.config)
            .field("total", &self.total.eigenvalues())
            .finish()
    }
}

impl CoupledSystem {
    pub fn new(
        disc: Discretization,
        shell: InertiaTensor,
        config: SolverConfig,
    ) -> Result<CoupledSystem, CoupledError> {
        config.validate()?;
        let disc = if disc.spaces.pressure_space() == config.pressure {
            disc
        } else {
            Discretization::with_pressure(disc.mesh, config.pressure)
        };
        let liquid = liquid_inertia(&disc.mesh, config.rho)?;
        let total = (&shell + &liquid)?;
        let body = match config.body_inertia {
            BodyInertia::Shell => shell.clone(),
            BodyInertia::Total => total.clone(),
        };
        let problem = LiquidProblem::new(&disc, config.rho, config.mu(), config.convection)?
            .with_policy(config.refactor);
        Ok(CoupledSystem {
            disc,
            config,
            shell,
            liquid,
            total,
            body,
            problem,
            step_index: 0,
        })
    }

    /// Number of numeric LU factorisations so far.
    pub fn factorizations(&self) -> usize {
        self.problem.factorizations()
    }

    fn residual_parts(
        &self,
        u: &[f64],
        omega: &Vector3<f64>,
        w: &[f64],
        u_prev: &[f64],
        l_prev: &Vector3<f64>,
    ) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let c = &self.config;
        let full =
            self.disc
                .rigid_residual(c.rho, c.convection, u, omega, w, Some((c.tau, u_prev)));
        let l = self.disc.moment(u) * c.rho;
        let spatial = full - (l - l_prev) / c.tau;
        (full, spatial, l)
    }

    /// State at `t = 0` from `ω₀` and a relative velocity `v₀` (zero on ∂C, discretely
    /// divergence-free).
    pub fn initial_state(
        &self,
        omega0: &Vector3<f64>,
        v0: &[f64],
    ) -> Result<StepState, CoupledError> {
        let d = &self.disc;
        let scale = d
            .spaces
            .rigid(omega0)
            .iter()
            .fold(1.0f64, |m, x| m.max(x.abs()));
        let vmax = v0.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for &n in d.spaces.boundary_nodes() {
            for i in 0..3 {
                if v0[3 * n + i].abs() > 1e-12 * scale.max(vmax) {
                    return Err(CoupledError::InitialVelocity(format!(
                        "v₀ = {:e} at boundary node {n}",
                        v0[3 * n + i]
                    )));
                }
            }
        }
        let div = self.problem.op.apply_divergence(v0);
        let dmax = div.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if dmax > 1e-9 * vmax.max(f64::MIN_POSITIVE) {
            return Err(CoupledError::InitialVelocity(format!(
                "discrete divergence {dmax:e} (velocity scale {vmax:e})"
            )));
        }
        let mut u = d.spaces.rigid(omega0);
        for (ui, vi) in u.iter_mut().zip(v0) {
            *ui += vi;
        }
        let c = &self.config;
        let spatial = d.rigid_residual(c.rho, c.convection, &u, omega0, v0, None);
        Ok(StepState {
            liquid_momentum: d.moment(&u) * c.rho,
            flow: FlowState {
                u,
                p: vec![0.0; d.spaces.num_pressure() + d.spaces.num_enrichment()],
                t: 0.0,
            },
            omega: *omega0,
            spatial_residual: spatial,
            residual_torque: spatial,
        })
    }

    /// One time step: sub-iterate body update, relaxation and liquid solve until
    /// `|ω^k − ω^{k−1}| < ε`.
    pub fn step(&mut self, prev: &StepState) -> Result<(StepState, StepReport), CoupledError> {
        self.step_from(prev, None)
    }

    /// As [`CoupledSystem::step`], with the sub-iteration started from `start` instead of
    /// the previous state.
    pub fn step_from(
        &mut self,
        prev: &StepState,
        start: Option<&StepState>,
    ) -> Result<(StepState, StepReport), CoupledError> {
        let c = self.config.clone();
        let u_prev = &prev.flow.u;
        let l_prev = prev.liquid_momentum;
        let torque_prev_stored = -prev.residual_torque;

        let mut omega_k = start.map_or(prev.omega, |s| s.omega);
        let mut u_k = start.map_or_else(|| u_prev.clone(), |s| s.flow.u.clone());
        let mut p_k: Vec<f64>;
        // iterate 0 defaults to the previous state, whose time difference vanishes
        let mut full_k = start.map_or(prev.spatial_residual, |s| s.residual_torque);
        let mut spatial_k: Vector3<f64>;
        let mut l_k = start.map_or(l_prev, |s| s.liquid_momentum);
        let mut report = StepReport::default();

        loop {
            if report.subiters == c.max_subiters {
                return Err(CoupledError::SubiterationsExceeded {
                    step: self.step_index + 1,
                    t: prev.flow.t + c.tau,
                    max: c.max_subiters,
                    increment: report.increments.last().copied().unwrap_or(f64::NAN),
                });
            }
            report.subiters += 1;
            let torque_old = match c.old_torque {
                OldTorque::PreviousStep => torque_prev_stored,
                OldTorque::CurrentDifference => -((l_k - l_prev) / c.tau + prev.spatial_residual),
            };
            let star = body_step(
                &self.body,
                &prev.omega,
                &torque_old,
                &omega_k,
                &-full_k,
                c.theta,
                c.tau,
            );
            let base = match c.relax_against {
                RelaxAgainst::PreviousStep => prev.omega,
                RelaxAgainst::PreviousIterate => omega_k,
            };
            let omega_new = c.sigma * star + (1.0 - c.sigma) * base;

            let w = self.disc.relative_velocity(&u_k, &omega_new);
            let sol = self
                .problem
                .solve(&self.disc, c.tau, &omega_new, u_prev, &w, None)?;
            let (full, spatial, l) = self.residual_parts(&sol.u, &omega_new, &w, u_prev, &l_prev);
            let increment = (omega_new - omega_k).norm();
            report.increments.push(increment);
            report.linear_residual = sol.residual;
            omega_k = omega_new;
            u_k = sol.u;
            p_k = sol.p;
            full_k = full;
            spatial_k = spatial;
            l_k = l;
            if !increment.is_finite() {
                return Err(CoupledError::SubiterationsExceeded {
                    step: self.step_index + 1,
                    t: prev.flow.t + c.tau,
                    max: report.subiters,
                    increment,
                });
            }
            // the first increment only reflects the lagged torque of the previous step
            if increment < c.epsilon && report.subiters >= 2 {
                break;
            }
        }

        let v = self.disc.relative_velocity(&u_k, &omega_k);
        let (peclet, tet) = self.disc.mesh_peclet(&v, c.nu);
        report.peclet = peclet;
        if peclet > c.max_peclet {
            return Err(FemError::PecletExceeded {
                peclet,
                limit: c.max_peclet,
                tet,
            }
            .into());
        }
        self.step_index += 1;
        Ok((
            StepState {
                flow: FlowState {
                    u: u_k,
                    p: p_k,
                    t: prev.flow.t + c.tau,
                },
                omega: omega_k,
                liquid_momentum: l_k,
                spatial_residual: spatial_k,
                residual_torque: full_k,
            },
            report,
        ))
    }

    pub fn record(&self, state: &StepState, report: Option<&StepReport>) -> Record {
        let d = derive(
            &self.disc,
            &state.flow.u,
            &state.omega,
            &self.total,
            self.config.rho,
        );
        Record {
            t: state.flow.t,
            omega: state.omega,
            pqr: self.total.to_eigenframe(&state.omega),
            omega_inf: d.omega_inf,
            momentum: d.momentum,
            momentum_eig: self.total.to_eigenframe(&d.momentum),
            v_l2: d.v_l2,
            gradv_l2: d.gradv_l2,
            energy_total: d.energy_total,
            energy_liquid: d.energy_liquid,
            subiters: report.map_or(0, |r| r.subiters),
            residual: report.map_or(0.0, |r| r.linear_residual),
        }
    }

    /// Runs from `(ω₀, v₀)` to `T`, calling `observe` after every step.
    pub fn run_with(
        &mut self,
        omega0: &Vector3<f64>,
        v0: &[f64],
        mut observe: impl FnMut(&Record, &StepReport),
    ) -> Result<TimeSeries, CoupledError> {
        let mut state = self.initial_state(omega0, v0)?;
        let n = self.config.num_steps();
        let mut records = Vec::with_capacity(n + 1);
        records.push(self.record(&state, None));
        self.step_index = 0;
        for k in 1..=n {
            let (next, report) = self.step(&state)?;
            state = next;
            // t_n = nτ without accumulated rounding
            state.flow.t = k as f64 * self.config.tau;
            let rec = self.record(&state, Some(&report));
            observe(&rec, &report);
            records.push(rec);
        }
        Ok(TimeSeries {
            records,
            eigenvalues: self.total.eigenvalues(),
            tau: self.config.tau,
            mu: self.config.mu(),
        })
    }

    pub fn run(&mut self, omega0: &Vector3<f64>, v0: &[f64]) -> Result<TimeSeries, CoupledError> {
        self.run_with(omega0, v0, |_, _| {})
    }

    /// Relative velocity for an initial-data mode.
    pub fn initial_velocity(
        &self,
        mode: &InitialVelocity,
        omega0: &Vector3<f64>,
        radius: impl Fn(&crate::geometry::Point) -> f64,
    ) -> Result<Vec<f64>, CoupledError> {
        initial::build(self, mode, omega0, radius)
    }
}

/// Shell tensor that, added to the liquid tensor, makes `I = λ𝟙`.
pub fn isotropic_shell(
    liquid: &InertiaTensor,
    lambda: f64,
) -> Result<InertiaTensor, RigidBodyError> {
    InertiaTensor::new(Matrix3::identity() * lambda - liquid.matrix())
}
