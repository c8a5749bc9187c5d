//! Inertia tensors, the free Euler top and its implicit midpoint integrator.

use crate::geometry::Mesh;
use nalgebra::{Matrix3, SymmetricEigen, Vector3};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RigidBodyError {
    #[error("inertia matrix has non-finite entries")]
    NonFinite,
    #[error("inertia matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("inertia matrix is not positive definite (eigenvalues {0:?})")]
    NotPositiveDefinite([f64; 3]),
    #[error("density must be positive, got {0}")]
    NonPositiveDensity(f64),
    #[error("mesh has zero volume")]
    DegenerateMesh,
    #[error("target eigenvalues {0:?} must be positive and sorted ascending")]
    UnsortedTarget([f64; 3]),
    #[error(
        "target total eigenvalue {target} (axis {axis}) does not exceed the liquid eigenvalue {liquid}; \
         the shell inertia would be indefinite"
    )]
    InfeasibleTarget {
        axis: usize,
        target: f64,
        liquid: f64,
    },
    #[error("midpoint solve did not converge after {iterations} iterations (last increment {increment:e})")]
    NotConverged { iterations: usize, increment: f64 },
}

/// Eigenvalues closer than this (relative to the largest) are treated as one eigenspace.
const TIE_TOL: f64 = 1e-10;

/// Symmetric positive definite inertia tensor with eigenvalues `A ≤ B ≤ C` and a
/// right-handed eigenframe.
#[derive(Debug, Clone, PartialEq)]
pub struct InertiaTensor {
    matrix: Matrix3<f64>,
    inverse: Matrix3<f64>,
    eigenvalues: [f64; 3],
    /// columns e₁, e₂, e₃
    frame: Matrix3<f64>,
}

impl InertiaTensor {
    pub fn new(matrix: Matrix3<f64>) -> Result<InertiaTensor, RigidBodyError> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(RigidBodyError::NonFinite);
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        let asym = (matrix - matrix.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(RigidBodyError::NotSymmetric(asym));
        }
        let matrix = 0.5 * (matrix + matrix.transpose());
        let (eigenvalues, frame) = sorted_eigen(&matrix);
        if eigenvalues[0] <= 0.0 {
            return Err(RigidBodyError::NotPositiveDefinite(eigenvalues));
        }
        let inverse = matrix
            .try_inverse()
            .ok_or(RigidBodyError::NotPositiveDefinite(eigenvalues))?;
        Ok(InertiaTensor {
            matrix,
            inverse,
            eigenvalues,
            frame,
        })
    }

    pub fn diagonal(a: f64, b: f64, c: f64) -> Result<InertiaTensor, RigidBodyError> {
        InertiaTensor::new(Matrix3::from_diagonal(&Vector3::new(a, b, c)))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &Matrix3<f64> {
        &self.inverse
    }

    /// `[A, B, C]`, ascending.
    pub fn eigenvalues(&self) -> [f64; 3] {
        self.eigenvalues
    }

    /// Eigenvector `e_{i+1}` for `i ∈ {0, 1, 2}`.
    pub fn eigenvector(&self, i: usize) -> Vector3<f64> {
        self.frame.column(i).into_owned()
    }

    /// Orthogonal matrix with columns e₁, e₂, e₃ (determinant +1).
    pub fn frame(&self) -> &Matrix3<f64> {
        &self.frame
    }

    /// Components of a body-frame vector in the eigenframe.
    pub fn to_eigenframe(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.frame.transpose() * v
    }

    pub fn apply(&self, w: &Vector3<f64>) -> Vector3<f64> {
        self.matrix * w
    }

    pub fn solve(&self, l: &Vector3<f64>) -> Vector3<f64> {
        self.inverse * l
    }

    pub fn is_spherical(&self, rel_tol: f64) -> bool {
        self.eigenvalues[2] - self.eigenvalues[0] <= rel_tol * self.eigenvalues[2]
    }
}

impl std::ops::Add for &InertiaTensor {
    type Output = Result<InertiaTensor, RigidBodyError>;
    fn add(self, rhs: &InertiaTensor) -> Self::Output {
        InertiaTensor::new(self.matrix + rhs.matrix)
    }
}

/// Eigen-decomposition with ascending eigenvalues. Within a (numerically) repeated
/// eigenvalue the basis is the Gram–Schmidt image of the projected coordinate axes, so the
/// frame depends only on the eigenspaces. The sign of each vector makes its first
/// significant component positive, and e₃ = e₁ × e₂.
fn sorted_eigen(m: &Matrix3<f64>) -> ([f64; 3], Matrix3<f64>) {
    let eig = SymmetricEigen::new(*m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.map(|i| eig.eigenvalues[i]);
    let vecs = order.map(|i| eig.eigenvectors.column(i).into_owned());
    let scale = vals
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);

    let mut basis: Vec<Vector3<f64>> = Vec::with_capacity(3);
    let mut start = 0;
    while start < 3 {
        let mut end = start + 1;
        while end < 3 && vals[end] - vals[start] <= TIE_TOL * scale {
            end += 1;
        }
        if end - start == 1 {
            basis.push(vecs[start]);
        } else {
            let space = &vecs[start..end];
            let project =
                |v: Vector3<f64>| -> Vector3<f64> { space.iter().map(|e| e * e.dot(&v)).sum() };
            let mut chosen: Vec<Vector3<f64>> = Vec::new();
            for axis in 0..3 {
                if chosen.len() == end - start {
                    break;
                }
                let mut v = project(Vector3::ith(axis, 1.0));
                for c in chosen.iter().chain(&basis) {
                    v -= c * c.dot(&v);
                }
                if v.norm() > 1e-6 {
                    chosen.push(v.normalize());
                }
            }
            basis.extend(chosen);
        }
        start = end;
    }
    for v in basis.iter_mut() {
        let lead = v.iter().copied().find(|c| c.abs() > 1e-12).unwrap_or(1.0);
        if lead < 0.0 {
            *v = -*v;
        }
    }
    basis[2] = basis[0].cross(&basis[1]);
    (vals, Matrix3::from_columns(&basis))
}

/// `∫ ρ (|x|²𝟙 − x⊗x)` over the mesh, using the closed-form second moments of each tet.
pub fn liquid_inertia(mesh: &Mesh, rho: f64) -> Result<InertiaTensor, RigidBodyError> {
    if !(rho > 0.0) {
        return Err(RigidBodyError::NonPositiveDensity(rho));
    }
    let mut second = Matrix3::zeros();
    let mut volume = 0.0;
    for t in 0..mesh.num_tets() {
        let p = mesh.tet_points(t);
        let v = mesh.tet_volume(t);
        // ∫ x xᵀ = V/20 (Σ x_a x_aᵀ + s sᵀ), s = Σ x_a
        let s: Vector3<f64> = p.iter().sum();
        let mut m = s * s.transpose();
        for x in &p {
            m += x * x.transpose();
        }
        second += m * (v / 20.0);
        volume += v;
    }
    if !(volume > 0.0) {
        return Err(RigidBodyError::DegenerateMesh);
    }
    InertiaTensor::new((Matrix3::identity() * second.trace() - second) * rho)
}

/// Shell (body) inertia input.
#[derive(Debug, Clone, PartialEq)]
pub enum ShellInertiaSpec {
    Explicit(Matrix3<f64>),
    /// Eigenvalues the total tensor `I_B + I_L` should have, ascending. `I_B` shares the
    /// liquid eigenframe.
    TargetTotal([f64; 3]),
}

pub fn shell_inertia(
    spec: &ShellInertiaSpec,
    liquid: &InertiaTensor,
) -> Result<InertiaTensor, RigidBodyError> {
    match spec {
        ShellInertiaSpec::Explicit(m) => InertiaTensor::new(*m),
        ShellInertiaSpec::TargetTotal(target) => {
            if !(target[0] > 0.0 && target[0] <= target[1] && target[1] <= target[2]) {
                return Err(RigidBodyError::UnsortedTarget(*target));
            }
            let lam = liquid.eigenvalues();
            let mut diag = Vector3::zeros();
            for axis in 0..3 {
                let d = target[axis] - lam[axis];
                if !(d > 0.0) {
                    return Err(RigidBodyError::InfeasibleTarget {
                        axis,
                        target: target[axis],
                        liquid: lam[axis],
                    });
                }
                diag[axis] = d;
            }
            let q = liquid.frame();
            InertiaTensor::new(q * Matrix3::from_diagonal(&diag) * q.transpose())
        }
    }
}

/// Body-frame angular velocity at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    pub omega: Vector3<f64>,
    pub t: f64,
}

/// `ω̇ = −I⁻¹ (ω × I ω)`.
pub fn euler_rhs(inertia: &InertiaTensor, omega: &Vector3<f64>) -> Vector3<f64> {
    -inertia.solve(&omega.cross(&inertia.apply(omega)))
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    v.cross_matrix()
}

const MIDPOINT_TOL: f64 = 1e-12;
const NEWTON_MAX_ITERS: usize = 30;
const FIXED_POINT_MAX_ITERS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MidpointStep {
    pub omega: Vector3<f64>,
    pub iterations: usize,
}

/// One implicit midpoint step of `I ω̇ + ω × I ω = G(ω)`:
/// `I (ω₁ − ω₀)/τ + ω_m × I ω_m = G(ω_m)` with `ω_m = (ω₀ + ω₁)/2`.
///
/// Newton with the gyroscopic Jacobian (`G` is treated as frozen in the Jacobian), then a
/// fixed-point fallback. Stops when the relative increment drops below 1e-12, after one
/// extra polishing iteration.
pub fn midpoint_step(
    inertia: &InertiaTensor,
    omega: &Vector3<f64>,
    torque: impl Fn(&Vector3<f64>) -> Vector3<f64>,
    tau: f64,
) -> Result<MidpointStep, RigidBodyError> {
    assert!(tau > 0.0, "time step must be positive");
    let i = inertia.matrix();
    let residual = |x: &Vector3<f64>| -> Vector3<f64> {
        let m = 0.5 * (omega + x);
        i * (x - omega) / tau + m.cross(&(i * m)) - torque(&m)
    };
    let scale = omega.norm().max(f64::MIN_POSITIVE);

    let mut x = *omega;
    let mut increment = f64::INFINITY;
    let mut iterations = 0;
    while iterations < NEWTON_MAX_ITERS {
        iterations += 1;
        let m = 0.5 * (omega + x);
        let jac = i / tau + 0.5 * (skew(&m) * i - skew(&(i * m)));
        let Some(dx) = jac.lu().solve(&-residual(&x)) else {
            break;
        };
        x += dx;
        let done = increment <= MIDPOINT_TOL * scale;
        increment = dx.norm();
        if done || increment == 0.0 {
            return Ok(MidpointStep {
                omega: x,
                iterations,
            });
        }
        if !increment.is_finite() {
            break;
        }
    }

    let mut x = *omega;
    for k in 1..=FIXED_POINT_MAX_ITERS {
        let m = 0.5 * (omega + x);
        let next = omega + tau * inertia.solve(&(torque(&m) - m.cross(&(i * m))));
        increment = (next - x).norm();
        x = next;
        if increment <= MIDPOINT_TOL * scale {
            return Ok(MidpointStep {
                omega: x,
                iterations: iterations + k,
            });
        }
    }
    Err(RigidBodyError::NotConverged {
        iterations: iterations + FIXED_POINT_MAX_ITERS,
        increment,
    })
}

/// Exact free motion of a symmetric top `diag(A, A, C)`: `r` is constant and `p + iq` rotates
/// as `(p₀ + iq₀) e^{iΩt}`, `Ω = (C − A) r₀ / A`.
pub fn symmetric_top_exact(a: f64, c: f64, omega0: &Vector3<f64>, t: f64) -> Vector3<f64> {
    let big_omega = (c - a) * omega0.z / a;
    let (s, co) = (big_omega * t).sin_cos();
    Vector3::new(
        omega0.x * co - omega0.y * s,
        omega0.x * s + omega0.y * co,
        omega0.z,
    )
}
