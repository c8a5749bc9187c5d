//! P2–P1 (Taylor–Hood) spaces, operator assembly and the linear liquid problem in the body frame.

mod assembly;
pub mod quadrature;
mod spaces;
mod system;

pub use assembly::{AssembledOperator, ConvectionForm, Pattern, BLOCK_NAMES};
pub use spaces::{
    build_spaces, build_spaces_with, eval_field, eval_gradient, local_vectors, p2_values,
    quadratic_monomial, tet_geometries, FunctionSpaces, PressureSpace, ReferenceElement,
    TetGeometry, QUADRATIC_MONOMIALS,
};
pub use system::{ConstrainedSolver, Factorization};

use crate::geometry::{Mesh, Point};
use nalgebra::{Matrix3, Vector3};

#[derive(Debug, thiserror::Error)]
pub enum FemError {
    #[error("{name} must be positive, got {value}")]
    NonPositiveConstant { name: &'static str, value: f64 },
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("mesh Péclet number {peclet:.3e} exceeds the limit {limit:.3e} (tet {tet})")]
    PecletExceeded { peclet: f64, limit: f64, tet: usize },
}

/// Finite-element velocity and pressure coefficients at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub u: Vec<f64>,
    /// P1 vertex values followed by the quadratic enrichment coefficients, if any
    pub p: Vec<f64>,
    pub t: f64,
}

/// Mesh, spaces and per-element geometry bundled for integration of discrete fields.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub spaces: FunctionSpaces,
    pub geometry: Vec<TetGeometry>,
    pub reference: ReferenceElement,
}

impl Discretization {
    pub fn new(mesh: Mesh) -> Discretization {
        Discretization::with_pressure(mesh, PressureSpace::P1)
    }

    pub fn with_pressure(mesh: Mesh, pressure: PressureSpace) -> Discretization {
        let spaces = build_spaces_with(&mesh, pressure);
        let geometry = tet_geometries(&mesh);
        Discretization {
            mesh,
            spaces,
            geometry,
            reference: ReferenceElement::default(),
        }
    }

    pub fn volume(&self) -> f64 {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    /// Sums `f(x, value, gradient) · weight` over all quadrature points of a velocity field.
    fn integrate<T, F>(&self, u: &[f64], zero: T, mut f: F) -> T
    where
        T: std::ops::AddAssign,
        F: FnMut(&Point, &Vector3<f64>, &Matrix3<f64>, f64) -> T,
    {
        let mut acc = zero;
        for (geo, tn) in self.geometry.iter().zip(self.spaces.tet_nodes()) {
            let ul = local_vectors(u, tn);
            for (q, vals) in self.reference.points.iter().zip(&self.reference.values) {
                let x = geo.point(&q.bary);
                let grads = geo.p2_gradients(&q.bary);
                let val = eval_field(vals, &ul);
                let grad = eval_gradient(&grads, &ul);
                acc += f(&x, &val, &grad, q.weight * geo.volume);
            }
        }
        acc
    }

    /// `‖u‖₂²`
    pub fn l2_norm_sq(&self, u: &[f64]) -> f64 {
        self.integrate(u, 0.0, |_, v, _, w| w * v.norm_squared())
    }

    /// `‖∇u‖₂²`
    pub fn grad_norm_sq(&self, u: &[f64]) -> f64 {
        self.integrate(u, 0.0, |_, _, g, w| w * g.norm_squared())
    }

    /// `‖div u‖₂²`
    pub fn div_norm_sq(&self, u: &[f64]) -> f64 {
        self.integrate(u, 0.0, |_, _, g, w| w * g.trace().powi(2))
    }

    /// `∫ x × u`
    pub fn moment(&self, u: &[f64]) -> Vector3<f64> {
        self.integrate(u, Vector3::zeros(), |x, v, _, w| x.cross(v) * w)
    }

    /// `∫ u`
    pub fn mean_vector(&self, u: &[f64]) -> Vector3<f64> {
        self.integrate(u, Vector3::zeros(), |_, v, _, w| v * w)
    }

    /// `∫ ρ (|x|²𝟙 − x⊗x)` by the volume rule (exact for the degree-2 integrand).
    pub fn inertia(&self, rho: f64) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for geo in &self.geometry {
            for q in &self.reference.points {
                let x = geo.point(&q.bary);
                m += (Matrix3::identity() * x.norm_squared() - x * x.transpose())
                    * (rho * q.weight * geo.volume);
            }
        }
        0.5 * (m + m.transpose())
    }

    /// Mesh-weighted mean `∫ p / |C|` of a pressure in the layout of [`FlowState::p`].
    pub fn pressure_mean(&self, p: &[f64]) -> f64 {
        let nv = self.spaces.num_pressure();
        let mut s = 0.0;
        for (geo, t) in self.geometry.iter().zip(self.mesh.tets()) {
            s += geo.volume / 4.0 * t.iter().map(|&v| p[v]).sum::<f64>();
            for (m, c) in p[nv..].iter().enumerate() {
                for q in &self.reference.points {
                    s += c * q.weight * geo.volume * quadratic_monomial(m, &geo.point(&q.bary));
                }
            }
        }
        s / self.volume()
    }

    /// Pressure at `x` given its barycentric weights over the P1 `vertices`.
    fn pressure_at(&self, p: &[f64], vertices: &[usize], bary: &[f64], x: &Point) -> f64 {
        let nv = self.spaces.num_pressure();
        let linear: f64 = vertices.iter().zip(bary).map(|(&v, b)| p[v] * b).sum();
        linear
            + p[nv..]
                .iter()
                .enumerate()
                .map(|(m, c)| c * quadratic_monomial(m, x))
                .sum::<f64>()
    }

    /// Momentum residual of the discrete liquid equation applied to the rigid test fields
    /// `φ_i = e_i × x`, i.e. `∫_{∂C} x × T·n` evaluated variationally:
    ///
    /// `R_i = ∫ ρ[(u − u_prev)/τ + ω×u]·φ_i + c(w; u, φ_i)`.
    ///
    /// The viscous and pressure terms vanish identically because `D(φ_i) = 0` and
    /// `div φ_i = 0`. `time = None` drops the time-difference term.
    pub fn rigid_residual(
        &self,
        rho: f64,
        form: ConvectionForm,
        u: &[f64],
        omega: &Vector3<f64>,
        w: &[f64],
        time: Option<(f64, &[f64])>,
    ) -> Vector3<f64> {
        let mut r = Vector3::zeros();
        for (geo, tn) in self.geometry.iter().zip(self.spaces.tet_nodes()) {
            let ul = local_vectors(u, tn);
            let wl = local_vectors(w, tn);
            let pl = time.map(|(_, up)| local_vectors(up, tn));
            for (q, vals) in self.reference.points.iter().zip(&self.reference.values) {
                let x = geo.point(&q.bary);
                let wq = rho * q.weight * geo.volume;
                let uq = eval_field(vals, &ul);
                let wx = eval_field(vals, &wl);
                let mut f = omega.cross(&uq);
                if let (Some((tau, _)), Some(pl)) = (time, pl.as_ref()) {
                    f += (uq - eval_field(vals, pl)) / tau;
                }
                // ∫ f·(e_i×x) = e_i·∫ x×f
                let mut ri = x.cross(&f);
                // conservative: −(w·∇φ_i)·u = −(e_i×w)·u = e_i·(u×w)
                let cons = uq.cross(&wx);
                let adv = || {
                    let grads = geo.p2_gradients(&q.bary);
                    let g = eval_gradient(&grads, &ul);
                    x.cross(&(g * wx))
                };
                ri += match form {
                    ConvectionForm::Conservative => cons,
                    ConvectionForm::Advective => adv(),
                    ConvectionForm::SkewSymmetric => 0.5 * (cons + adv()),
                };
                r += ri * wq;
            }
        }
        r
    }

    /// Torque exerted by the liquid on the body, `−∫_{∂C} x × T(u,p)·n`, from the consistent
    /// residual of a steady state (no time-difference term).
    pub fn traction_torque(
        &self,
        rho: f64,
        form: ConvectionForm,
        state: &FlowState,
        omega: &Vector3<f64>,
    ) -> Vector3<f64> {
        let w = self.relative_velocity(&state.u, omega);
        -self.rigid_residual(rho, form, &state.u, omega, &w, None)
    }

    /// Torque of a pressure field on the body by direct surface quadrature,
    /// `∫_{∂C} p x × n` (the pressure part of `−∫ x × T·n`); a non-variational diagnostic.
    pub fn surface_pressure_torque(&self, p: &[f64]) -> Vector3<f64> {
        let rule = quadrature::triangle_rule();
        let v = self.mesh.vertices();
        let mut s = Vector3::zeros();
        for f in self.mesh.boundary_facets() {
            let (a, b, c) = (v[f[0]], v[f[1]], v[f[2]]);
            let an = crate::geometry::facet_area_normal(&a, &b, &c);
            for q in &rule {
                let x = a * q.bary[0] + b * q.bary[1] + c * q.bary[2];
                let pq = self.pressure_at(p, f, &q.bary, &x);
                s += x.cross(&an) * (pq * q.weight);
            }
        }
        s
    }

    /// `v = u − ω×x` (nodal, exact in the P2 space).
    pub fn relative_velocity(&self, u: &[f64], omega: &Vector3<f64>) -> Vec<f64> {
        let mut v = u.to_vec();
        for (a, x) in self.spaces.nodes().iter().enumerate() {
            let r = omega.cross(x);
            for i in 0..3 {
                v[3 * a + i] -= r[i];
            }
        }
        v
    }

    /// Largest element Péclet number `max|w|·h / (2ν)` with `h` the longest tet edge.
    pub fn mesh_peclet(&self, w: &[f64], nu: f64) -> (f64, usize) {
        let mut best = (0.0, 0);
        for (t, (geo, tn)) in self
            .geometry
            .iter()
            .zip(self.spaces.tet_nodes())
            .enumerate()
        {
            let p = &geo.points;
            let mut h: f64 = 0.0;
            for &(i, j) in &crate::geometry::TET_EDGES {
                h = h.max((p[i] - p[j]).norm());
            }
            let wmax = tn
                .iter()
                .map(|&n| Vector3::new(w[3 * n], w[3 * n + 1], w[3 * n + 2]).norm())
                .fold(0.0, f64::max);
            let pe = wmax * h / (2.0 * nu);
            if pe > best.0 {
                best = (pe, t);
            }
        }
        best
    }

    /// Constraint mask for the full saddle system: all boundary velocity dofs.
    pub fn dirichlet_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.spaces.num_unknowns()];
        for &n in self.spaces.boundary_nodes() {
            for i in 0..3 {
                mask[3 * n + i] = true;
            }
        }
        mask
    }

    /// Full-length vector holding `ω×x` at boundary velocity dofs and zero elsewhere.
    pub fn boundary_values(&self, omega: &Vector3<f64>) -> Vec<f64> {
        let mut g = vec![0.0; self.spaces.num_unknowns()];
        for &n in self.spaces.boundary_nodes() {
            let r = omega.cross(&self.spaces.nodes()[n]);
            g[3 * n..3 * n + 3].copy_from_slice(r.as_slice());
        }
        g
    }

    /// Load vector `∫ f·φ` of an analytic body force.
    pub fn load_vector(&self, f: impl Fn(&Point) -> Vector3<f64>) -> Vec<f64> {
        let mut b = vec![0.0; self.spaces.num_velocity()];
        for (geo, tn) in self.geometry.iter().zip(self.spaces.tet_nodes()) {
            for (q, vals) in self.reference.points.iter().zip(&self.reference.values) {
                let fx = f(&geo.point(&q.bary)) * (q.weight * geo.volume);
                for (k, &n) in tn.iter().enumerate() {
                    for i in 0..3 {
                        b[3 * n + i] += vals[k] * fx[i];
                    }
                }
            }
        }
        b
    }
}

/// Result of one linear liquid solve.
#[derive(Debug, Clone)]
pub struct LiquidSolution {
    pub u: Vec<f64>,
    /// laid out as [`FlowState::p`]
    pub p: Vec<f64>,
    /// max-norm residual of the free rows
    pub residual: f64,
}

/// When the liquid matrix is refactorised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefactorPolicy {
    /// Fresh LU for every solve.
    Always,
    /// Keep the last LU and correct the defect against the current matrix; refactorise when
    /// the correction stalls.
    #[default]
    Reuse,
}

impl std::str::FromStr for RefactorPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "always" => Ok(RefactorPolicy::Always),
            "reuse" => Ok(RefactorPolicy::Reuse),
            _ => Err(format!(
                "unknown refactor policy {s:?} (expected always|reuse)"
            )),
        }
    }
}

impl std::fmt::Display for RefactorPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RefactorPolicy::Always => "always",
            RefactorPolicy::Reuse => "reuse",
        })
    }
}

/// Relative residual target of the defect correction, against `‖b‖∞`.
const DEFECT_TOL: f64 = 1e-13;
const DEFECT_MAX_ITERS: usize = 12;

/// The linear saddle problem of one Picard sub-iteration, with cached pattern and symbolic LU.
pub struct LiquidProblem {
    pub op: AssembledOperator,
    solver: ConstrainedSolver,
    values: Vec<f64>,
    /// `(τ, constant part)` of the last assembled matrix
    constant: Option<(f64, Vec<f64>)>,
    policy: RefactorPolicy,
    lu: Option<Factorization>,
    factorizations: usize,
}

impl std::fmt::Debug for LiquidProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiquidProblem")
            .field("solver", &self.solver)
            .field("policy", &self.policy)
            .field("factorizations", &self.factorizations)
            .finish()
    }
}

impl LiquidProblem {
    pub fn new(
        disc: &Discretization,
        rho: f64,
        mu: f64,
        form: ConvectionForm,
    ) -> Result<LiquidProblem, FemError> {
        faer::set_global_parallelism(faer::Par::Seq);
        let op = AssembledOperator::assemble(&disc.spaces, &disc.mesh, rho, mu, form, None)?;
        let solver = ConstrainedSolver::bordered(
            &op.pattern,
            disc.dirichlet_mask(),
            disc.spaces.num_enrichment(),
        )?;
        Ok(LiquidProblem {
            op,
            solver,
            values: Vec::new(),
            constant: None,
            policy: RefactorPolicy::default(),
            lu: None,
            factorizations: 0,
        })
    }

    pub fn with_policy(mut self, policy: RefactorPolicy) -> LiquidProblem {
        self.policy = policy;
        self
    }

    /// Number of numeric factorisations performed so far.
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    fn refactor(&mut self) -> Result<(), FemError> {
        self.lu = Some(self.solver.factor(&self.values)?);
        self.factorizations += 1;
        Ok(())
    }

    /// Defect correction with the cached LU, returning the solution and its free-row
    /// residual. `None` when it stalls on a stale factorisation.
    fn refine(
        &self,
        b: &[f64],
        rhs: &[f64],
        scale: f64,
        fresh: bool,
    ) -> Result<Option<(Vec<f64>, f64)>, FemError> {
        let lu = self.lu.as_ref().expect("factorization present");
        let mut x = b.to_vec();
        self.solver.solve_constrained(lu, &mut x)?;
        let mut last = f64::INFINITY;
        for _ in 0..DEFECT_MAX_ITERS {
            let mut r = self
                .solver
                .free_residual(&self.op.pattern, &self.values, &x, rhs);
            let rn = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if rn <= DEFECT_TOL * scale {
                return Ok(Some((x, rn)));
            }
            // a fresh factorisation only needs refinement for roundoff
            if !(rn < 0.2 * last) {
                return Ok(fresh.then_some((x, rn)));
            }
            last = rn;
            self.solver.solve_constrained(lu, &mut r)?;
            for (xi, di) in x.iter_mut().zip(&r) {
                *xi += di;
            }
        }
        let rn = self
            .solver
            .free_residual(&self.op.pattern, &self.values, &x, rhs)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(fresh.then_some((x, rn)))
    }

    /// Solves `ρ(u − u_prev)/τ + ρ ω×u + ρ(w·∇)u − div T(u,p) = f`, `div u = 0`,
    /// `u = ω×x` on ∂C, zero-mean pressure. `forcing` is the load vector of `f`.
    pub fn solve(
        &mut self,
        disc: &Discretization,
        tau: f64,
        omega: &Vector3<f64>,
        u_prev: &[f64],
        w: &[f64],
        forcing: Option<&[f64]>,
    ) -> Result<LiquidSolution, FemError> {
        self.op.assemble_convection(w);
        if !matches!(&self.constant, Some((t, _)) if *t == tau) {
            self.constant = Some((tau, self.op.constant_values(tau)));
        }
        let constant = &self.constant.as_ref().expect("constant part").1;
        self.op.system_values(constant, omega, &mut self.values);
        let nu = disc.spaces.num_velocity();
        let mut rhs = vec![0.0; disc.spaces.num_unknowns()];
        let mu_prev = self.op.apply_mass(u_prev);
        for r in 0..nu {
            rhs[r] = mu_prev[r] / tau + forcing.map_or(0.0, |f| f[r]);
        }
        let g = disc.boundary_values(omega);
        let pattern = &self.op.pattern;
        let b = self.solver.lifted_rhs(pattern, &self.values, &rhs, &g);
        let scale = b
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);

        let mut fresh = false;
        if self.policy == RefactorPolicy::Always || self.lu.is_none() {
            self.refactor()?;
            fresh = true;
        }
        let (x, residual) = loop {
            match self.refine(&b, &rhs, scale, fresh) {
                Ok(Some(found)) => break found,
                Err(e) if fresh => return Err(e),
                _ => {}
            }
            self.refactor()?;
            fresh = true;
        };
        let np = disc.spaces.num_pressure();
        let mut p = x[nu..nu + np].to_vec();
        p.extend_from_slice(&x[disc.spaces.multiplier_dof() + 1..]);
        Ok(LiquidSolution {
            u: x[..nu].to_vec(),
            p,
            residual,
        })
    }
}

/// L2 projection onto discretely divergence-free fields with zero boundary trace:
/// solves `[M Bᵀ; B 0]` with the mean multiplier.
pub struct DivergenceFreeProjector {
    op: AssembledOperator,
    solver: ConstrainedSolver,
    lu: Factorization,
    values: Vec<f64>,
}

impl DivergenceFreeProjector {
    pub fn new(disc: &Discretization) -> Result<DivergenceFreeProjector, FemError> {
        faer::set_global_parallelism(faer::Par::Seq);
        let op = AssembledOperator::assemble(
            &disc.spaces,
            &disc.mesh,
            1.0,
            1.0,
            ConvectionForm::default(),
            None,
        )?;
        let values: Vec<f64> = (0..op.pattern.nnz())
            .map(|k| op.mass[k] + op.divergence[k] + op.mean[k])
            .collect();
        let mut solver = ConstrainedSolver::bordered(
            &op.pattern,
            disc.dirichlet_mask(),
            disc.spaces.num_enrichment(),
        )?;
        let lu = solver.factor(&values)?;
        Ok(DivergenceFreeProjector {
            op,
            solver,
            lu,
            values,
        })
    }

    pub fn project(&self, disc: &Discretization, v: &[f64]) -> Result<Vec<f64>, FemError> {
        let nu = disc.spaces.num_velocity();
        let mut rhs = vec![0.0; disc.spaces.num_unknowns()];
        rhs[..nu].copy_from_slice(&self.op.apply_mass(v));
        let g = vec![0.0; rhs.len()];
        let x = self
            .solver
            .solve(&self.lu, &self.op.pattern, &self.values, &rhs, &g)?;
        Ok(x[..nu].to_vec())
    }

    /// Discrete divergence `B w` (one entry per pressure dof).
    pub fn divergence(&self, w: &[f64]) -> Vec<f64> {
        self.op.apply_divergence(w)
    }
}

#[cfg(test)]
mod tests;
