//! Derived physical quantities, invariant checks, the stability/attainability conditions
//! and the fits that connect simulations to the asymptotic theory.

mod conditions;
mod fits;
mod invariants;

pub use conditions::*;
pub use fits::*;
pub use invariants::*;

use crate::fem_core::Discretization;
use crate::rigid_body::InertiaTensor;
use nalgebra::Vector3;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnalysisError {
    #[error("eigenvalues must satisfy A ≤ B ≤ C, got {0:?}")]
    Unordered([f64; 3]),
    #[error("all initial data are zero")]
    ZeroData,
    #[error("{0}")]
    Undefined(String),
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("non-positive value {0} in a logarithmic fit")]
    NonPositive(f64),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

/// Quantities derived from a liquid field and the body angular velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedState {
    /// relative velocity `v = u − ω×x`
    pub v: Vec<f64>,
    /// `a = −I⁻¹ ∫ρ x×v`
    pub a: Vector3<f64>,
    /// `ω∞ = I⁻¹ A`
    pub omega_inf: Vector3<f64>,
    /// total angular momentum `A = I ω + ∫ρ x×v`
    pub momentum: Vector3<f64>,
    /// `ℰ = E + ½ ω∞·I·ω∞`
    pub energy_total: f64,
    /// `E = ½(ρ‖v‖² − a·I·a)`
    pub energy_liquid: f64,
    /// `(p, q, r)`: `ω∞` in the eigenframe of `I`
    pub pqr: Vector3<f64>,
    pub v_l2: f64,
    pub gradv_l2: f64,
}

/// `inertia` is the total tensor `I = I_B + I_L`.
pub fn derive(
    disc: &Discretization,
    u: &[f64],
    omega: &Vector3<f64>,
    inertia: &InertiaTensor,
    rho: f64,
) -> DerivedState {
    let v = disc.relative_velocity(u, omega);
    let m = disc.moment(&v) * rho;
    let momentum = inertia.apply(omega) + m;
    let omega_inf = inertia.solve(&momentum);
    let a = -inertia.solve(&m);
    let v_sq = disc.l2_norm_sq(&v);
    let energy_liquid = 0.5 * (rho * v_sq - a.dot(&inertia.apply(&a)));
    let energy_total = energy_liquid + 0.5 * omega_inf.dot(&inertia.apply(&omega_inf));
    DerivedState {
        pqr: inertia.to_eigenframe(&omega_inf),
        v_l2: v_sq.sqrt(),
        gradv_l2: disc.grad_norm_sq(&v).sqrt(),
        v,
        a,
        omega_inf,
        momentum,
        energy_total,
        energy_liquid,
    }
}
