use super::{CoupledError, CoupledSystem};
use crate::fem_core::DivergenceFreeProjector;
use crate::geometry::{CavityShape, Mesh, Point};
use nalgebra::{Matrix3, Vector3};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Initial relative velocity `v₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialVelocity {
    Zero,
    /// `v₀ = P[β b(s̄) ω₀×x]` with the bump `b(s) = ½(1 + cos πs)` of the normalised radius
    /// `s̄` and `P` the discrete divergence-free projection. `β = −1` gives
    /// `u₀ = ½(1 − cos πs̄) ω₀×x`, a liquid at rest in the centre and co-rotating at the wall.
    RadialProfile {
        beta: f64,
    },
    /// Combination of projected bump fields `P[b(s̄) e_k×x]` whose liquid momentum cancels
    /// `I ω₀`, so that the total angular momentum vanishes.
    ZeroMomentum,
}

impl Default for InitialVelocity {
    fn default() -> Self {
        InitialVelocity::Zero
    }
}

impl FromStr for InitialVelocity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "zero" => Ok(InitialVelocity::Zero),
            "radial_profile" => Ok(InitialVelocity::RadialProfile { beta: -1.0 }),
            "zero_momentum" => Ok(InitialVelocity::ZeroMomentum),
            _ => Err(format!(
                "unknown initial velocity {s:?} (expected zero|radial_profile|zero_momentum)"
            )),
        }
    }
}

impl fmt::Display for InitialVelocity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitialVelocity::Zero => "zero",
            InitialVelocity::RadialProfile { .. } => "radial_profile",
            InitialVelocity::ZeroMomentum => "zero_momentum",
        })
    }
}

/// Radius normalised to 1 on the cavity wall.
pub fn normalized_radius(
    shape: &CavityShape,
    mesh: &Mesh,
) -> Box<dyn Fn(&Point) -> f64 + Send + Sync> {
    match *shape {
        CavityShape::Ellipsoid { a, b, c } => Box::new(move |x: &Point| {
            ((x.x / a).powi(2) + (x.y / b).powi(2) + (x.z / c).powi(2)).sqrt()
        }),
        CavityShape::Cylinder { radius, height } => {
            Box::new(move |x: &Point| (x.x.hypot(x.y) / radius).max(x.z.abs() / (0.5 * height)))
        }
        CavityShape::FromFile { .. } => {
            let r = mesh.vertices().iter().map(|v| v.norm()).fold(0.0, f64::max);
            Box::new(move |x: &Point| x.norm() / r)
        }
    }
}

fn bump(s: f64) -> f64 {
    0.5 * (1.0 + (PI * s.clamp(0.0, 1.0)).cos())
}

pub(super) fn build(
    sys: &CoupledSystem,
    mode: &InitialVelocity,
    omega0: &Vector3<f64>,
    radius: impl Fn(&Point) -> f64,
) -> Result<Vec<f64>, CoupledError> {
    let d = &sys.disc;
    let shaped = |axis: Vector3<f64>| d.spaces.interpolate(|x| axis.cross(x) * bump(radius(x)));
    match *mode {
        InitialVelocity::Zero => Ok(vec![0.0; d.spaces.num_velocity()]),
        InitialVelocity::RadialProfile { beta } => {
            let projector = DivergenceFreeProjector::new(d)?;
            let v = shaped(omega0 * beta);
            Ok(projector.project(d, &v)?)
        }
        InitialVelocity::ZeroMomentum => {
            let projector = DivergenceFreeProjector::new(d)?;
            let rho = sys.config.rho;
            let mut basis = Vec::with_capacity(3);
            let mut j = Matrix3::zeros();
            for k in 0..3 {
                let b = projector.project(d, &shaped(Vector3::ith(k, 1.0)))?;
                j.set_column(k, &(d.moment(&b) * rho));
                basis.push(b);
            }
            let target = -sys.total.apply(omega0);
            let coef = j.lu().solve(&target).ok_or_else(|| {
                CoupledError::InitialVelocity("bump fields carry no angular momentum".into())
            })?;
            let mut v = vec![0.0; d.spaces.num_velocity()];
            for k in 0..3 {
                for (vi, bi) in v.iter_mut().zip(&basis[k]) {
                    *vi += coef[k] * bi;
                }
            }
            Ok(v)
        }
    }
}
