use crate::coupled_solver::TimeSeries;
use crate::fem_core::{Discretization, DivergenceFreeProjector, FemError};
use crate::rigid_body::InertiaTensor;
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default per-step energy tolerance relative to `ℰ(0)`.
pub const ENERGY_STEP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    /// `(index, ℰ_n − ℰ_{n−1})` for every increase beyond the tolerance
    pub violations: Vec<(usize, f64)>,
    pub max_increase: f64,
    pub tolerance: f64,
    /// largest `ℰ(t_n) + μ ∫₀^{t_n} ‖∇v‖² − ℰ(0)` with the trapezoid rule, relative to `ℰ(0)`
    pub integral_excess: f64,
}

impl EnergyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_energy_inequality(series: &TimeSeries, rel_tol: f64) -> EnergyReport {
    let e: Vec<f64> = series.records.iter().map(|r| r.energy_total).collect();
    let e0 = e[0].abs().max(f64::MIN_POSITIVE);
    let tolerance = rel_tol * e0;
    let mut violations = Vec::new();
    let mut max_increase = f64::NEG_INFINITY;
    let mut dissipated = 0.0;
    let mut integral_excess = f64::NEG_INFINITY;
    for n in 1..e.len() {
        let inc = e[n] - e[n - 1];
        max_increase = max_increase.max(inc);
        if inc > tolerance {
            violations.push((n, inc));
        }
        let (r0, r1) = (&series.records[n - 1], &series.records[n]);
        dissipated += 0.5 * (r1.t - r0.t) * series.mu * (r0.gradv_l2.powi(2) + r1.gradv_l2.powi(2));
        integral_excess = integral_excess.max((e[n] + dissipated - e[0]) / e0);
    }
    EnergyReport {
        violations,
        max_increase: if e.len() > 1 { max_increase } else { 0.0 },
        tolerance,
        integral_excess: if e.len() > 1 { integral_excess } else { 0.0 },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumReport {
    /// `|I ω∞|` at `t = 0`
    pub initial: f64,
    /// `max_n ||I ω∞|(t_n) − |I ω∞|(0)|`
    pub max_abs_drift: f64,
    /// drift relative to the initial magnitude (infinite if that vanishes and drift does not)
    pub max_rel_drift: f64,
    pub max_omega_inf: f64,
}

pub fn check_momentum_conservation(series: &TimeSeries) -> MomentumReport {
    let initial = series.records[0].momentum.norm();
    let max_abs_drift = series
        .records
        .iter()
        .map(|r| (r.momentum.norm() - initial).abs())
        .fold(0.0, f64::max);
    let max_rel_drift = if initial > 0.0 {
        max_abs_drift / initial
    } else if max_abs_drift == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    MomentumReport {
        initial,
        max_abs_drift,
        max_rel_drift,
        max_omega_inf: series
            .records
            .iter()
            .map(|r| r.omega_inf.norm())
            .fold(0.0, f64::max),
    }
}

/// `max_n |(A_{n+1} − A_{n−1})/(2τ) − A_n × ω_n|` over interior samples: the discrete
/// residual of `dA/dt = A × ω`.
pub fn momentum_balance_residual(series: &TimeSeries) -> f64 {
    let r = &series.records;
    (1..r.len().saturating_sub(1))
        .map(|n| {
            let dt = r[n + 1].t - r[n - 1].t;
            ((r[n + 1].momentum - r[n - 1].momentum) / dt - r[n].momentum.cross(&r[n].omega)).norm()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityReport {
    pub min_quotient: f64,
    pub max_quotient: f64,
    pub samples: usize,
}

/// `(‖w‖² − ρ (I⁻¹ ∫x×w)·(∫x×w)) / ‖w‖²`
pub fn coercivity_quotient(
    disc: &Discretization,
    rho: f64,
    inertia: &InertiaTensor,
    w: &[f64],
) -> f64 {
    let m = disc.moment(w);
    let n2 = disc.l2_norm_sq(w);
    (n2 - rho * inertia.solve(&m).dot(&m)) / n2
}

/// Projected fields `P[b(|x|/R) e_k × x]` carrying angular momentum.
pub fn swirl_basis(
    disc: &Discretization,
    projector: &DivergenceFreeProjector,
) -> Result<[Vec<f64>; 3], FemError> {
    let r = disc
        .mesh
        .vertices()
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let field = |k: usize| {
        disc.spaces.interpolate(|x| {
            let s = (x.norm() / r).min(1.0);
            Vector3::ith(k, 1.0).cross(x) * (0.5 * (1.0 + (std::f64::consts::PI * s).cos()))
        })
    };
    Ok([
        projector.project(disc, &field(0))?,
        projector.project(disc, &field(1))?,
        projector.project(disc, &field(2))?,
    ])
}

/// Removes the moment `∫x×w` with a combination of the swirl basis; the result stays
/// discretely divergence-free.
pub fn remove_moment(disc: &Discretization, basis: &[Vec<f64>; 3], w: &[f64]) -> Vec<f64> {
    let mut j = Matrix3::zeros();
    for k in 0..3 {
        j.set_column(k, &disc.moment(&basis[k]));
    }
    let c = j
        .lu()
        .solve(&disc.moment(w))
        .expect("swirl basis spans the moments");
    let mut out = w.to_vec();
    for k in 0..3 {
        for (o, b) in out.iter_mut().zip(&basis[k]) {
            *o -= c[k] * b;
        }
    }
    out
}

/// Samples random discretely divergence-free fields vanishing on ∂C (interior noise plus
/// random swirl) and records the range of the coercivity quotient.
pub fn coercivity_check(
    disc: &Discretization,
    rho: f64,
    inertia: &InertiaTensor,
    n_samples: usize,
    seed: u64,
) -> Result<CoercivityReport, FemError> {
    assert!(n_samples >= 1, "need at least one sample");
    let projector = DivergenceFreeProjector::new(disc)?;
    let basis = swirl_basis(disc, &projector)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..n_samples {
        let mut w = vec![0.0; disc.spaces.num_velocity()];
        let noise = rng.random_range(0.0..2.0);
        for (node, _) in disc.spaces.nodes().iter().enumerate() {
            if !disc.spaces.is_boundary_node(node) {
                for i in 0..3 {
                    w[3 * node + i] = noise * rng.random_range(-1.0..1.0);
                }
            }
        }
        let mut w = projector.project(disc, &w)?;
        for b in &basis {
            let c: f64 = rng.random_range(-3.0..3.0);
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi += c * bi;
            }
        }
        let q = coercivity_quotient(disc, rho, inertia, &w);
        lo = lo.min(q);
        hi = hi.max(q);
    }
    Ok(CoercivityReport {
        min_quotient: lo,
        max_quotient: hi,
        samples: n_samples,
    })
}
