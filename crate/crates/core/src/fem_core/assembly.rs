use super::spaces::{
    eval_field, local_vectors, quadratic_monomial, tet_geometries, FunctionSpaces,
    ReferenceElement, TetGeometry,
};
use super::FemError;
use crate::geometry::Mesh;
use nalgebra::Vector3;
use std::io::Write;

/// How the Picard convection term `ρ (w·∇)u · φ` is discretised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvectionForm {
    /// `ρ ∫ (w·∇u)·φ`
    Advective,
    /// `−ρ ∫ (w·∇φ)·u`; equal to the advective form for `div w = 0`, `w·n = 0`, and
    /// transfers angular momentum exactly to rigid test fields.
    #[default]
    Conservative,
    /// Average of the two; energy-neutral for any `w`.
    SkewSymmetric,
}

impl std::str::FromStr for ConvectionForm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "advective" => Ok(ConvectionForm::Advective),
            "conservative" => Ok(ConvectionForm::Conservative),
            "skew_symmetric" => Ok(ConvectionForm::SkewSymmetric),
            _ => Err(format!(
                "unknown convection form {s:?} (expected advective|conservative|skew_symmetric)"
            )),
        }
    }
}

impl std::fmt::Display for ConvectionForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConvectionForm::Advective => "advective",
            ConvectionForm::Conservative => "conservative",
            ConvectionForm::SkewSymmetric => "skew_symmetric",
        })
    }
}

/// Row-compressed sparsity of the full (unconstrained) saddle system.
#[derive(Debug, Clone)]
pub struct Pattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
}

impl Pattern {
    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, r: usize) -> std::ops::Range<usize> {
        self.row_ptr[r]..self.row_ptr[r + 1]
    }

    pub fn find(&self, r: usize, c: usize) -> Option<usize> {
        let range = self.row(r);
        self.cols[range.clone()]
            .binary_search(&c)
            .ok()
            .map(|k| range.start + k)
    }

    /// y = A x for values laid out on this pattern.
    pub fn mul(&self, vals: &[f64], x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut s = 0.0;
            for k in self.row(r) {
                s += vals[k] * x[self.cols[k]];
            }
            y[r] = s;
        }
    }
}

/// Per-tet slot offsets into the pattern.
#[derive(Debug, Clone)]
struct ElementSlots {
    /// `vv[(a*10 + b)*3 + i]`: slot of row (a,i), column (b,0); components j follow.
    vv: Vec<u32>,
    /// `vp[(a*3 + i)*4 + c]`: slot of row (a,i), pressure column c.
    vp: Vec<u32>,
    /// `pv[c*10 + b]`: slot of pressure row c, column (b,0).
    pv: Vec<u32>,
}

const VV: usize = 300;
const VP: usize = 120;
const PV: usize = 40;

/// Assembled blocks of the liquid problem on a fixed pattern.
///
/// The momentum rows read `M/τ + K + S(ω) + N(w)` together with `Bᵀ`; the continuity rows
/// hold `B` and the multiplier column; the last row fixes the mesh-weighted pressure mean.
#[derive(Debug, Clone)]
pub struct AssembledOperator {
    pub rho: f64,
    pub mu: f64,
    pub pattern: Pattern,
    /// ρ∫φ·ψ
    pub mass: Vec<f64>,
    /// 2μ∫D(u):D(φ)
    pub stiffness: Vec<f64>,
    /// ρ∫(e_k×u)·φ for k = 0,1,2
    pub coriolis: [Vec<f64>; 3],
    /// −∫q div u in both the continuity rows and (transposed) the momentum rows
    pub divergence: Vec<f64>,
    /// ∫q in the multiplier row and column
    pub mean: Vec<f64>,
    /// convection with the most recently assembled field
    pub convection: Vec<f64>,
    pub convection_form: ConvectionForm,
    num_enrichment: usize,
    slots: ElementSlots,
    geometry: Vec<TetGeometry>,
    reference: ReferenceElement,
    tet_nodes: Vec<[usize; 10]>,
    tet_vertices: Vec<[usize; 4]>,
}

fn build_pattern(spaces: &FunctionSpaces) -> Pattern {
    let nn = spaces.num_nodes();
    let nv = spaces.num_vertices();
    let mut node_nbrs: Vec<Vec<usize>> = vec![Vec::new(); nn];
    let mut node_pres: Vec<Vec<usize>> = vec![Vec::new(); nn];
    for tn in spaces.tet_nodes() {
        for &a in tn {
            node_nbrs[a].extend_from_slice(tn);
            node_pres[a].extend_from_slice(&tn[..4]);
        }
    }
    for l in node_nbrs.iter_mut().chain(node_pres.iter_mut()) {
        l.sort_unstable();
        l.dedup();
    }
    let nu = spaces.num_velocity();
    let n = spaces.num_unknowns();
    let mult = spaces.multiplier_dof();
    let extra = mult + 1..n;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    row_ptr.push(0);
    for a in 0..nn {
        for _i in 0..3 {
            for &b in &node_nbrs[a] {
                cols.extend_from_slice(&[3 * b, 3 * b + 1, 3 * b + 2]);
            }
            cols.extend(node_pres[a].iter().map(|&c| nu + c));
            cols.extend(extra.clone());
            row_ptr.push(cols.len());
        }
    }
    for c in 0..nv {
        for &b in &node_nbrs[c] {
            cols.extend_from_slice(&[3 * b, 3 * b + 1, 3 * b + 2]);
        }
        cols.push(mult);
        row_ptr.push(cols.len());
    }
    cols.extend((0..nv).map(|c| nu + c));
    cols.extend(extra.clone());
    row_ptr.push(cols.len());
    // global quadratic pressure modes couple to every velocity dof
    for _ in extra {
        cols.extend(0..nu);
        cols.push(mult);
        row_ptr.push(cols.len());
    }
    Pattern { n, row_ptr, cols }
}

impl AssembledOperator {
    /// Assembles the constant blocks (mass, viscous, Coriolis basis, divergence, mean) and
    /// the convection block for the field `w` (velocity coefficients; `None` means zero).
    pub fn assemble(
        spaces: &FunctionSpaces,
        mesh: &Mesh,
        rho: f64,
        mu: f64,
        convection_form: ConvectionForm,
        w: Option<&[f64]>,
    ) -> Result<AssembledOperator, FemError> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(FemError::NonPositiveConstant {
                name: "density",
                value: rho,
            });
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(FemError::NonPositiveConstant {
                name: "viscosity",
                value: mu,
            });
        }
        let pattern = build_pattern(spaces);
        let nu = spaces.num_velocity();
        let num_enrichment = spaces.num_enrichment();
        let geometry = tet_geometries(mesh);
        let tet_nodes = spaces.tet_nodes().to_vec();
        let tet_vertices = mesh.tets().to_vec();
        let nt = tet_nodes.len();

        let mut slots = ElementSlots {
            vv: Vec::with_capacity(nt * VV),
            vp: Vec::with_capacity(nt * VP),
            pv: Vec::with_capacity(nt * PV),
        };
        let slot = |r: usize, c: usize| pattern.find(r, c).expect("pattern entry") as u32;
        for (tn, tv) in tet_nodes.iter().zip(&tet_vertices) {
            for &a in tn {
                for &b in tn {
                    for i in 0..3 {
                        slots.vv.push(slot(3 * a + i, 3 * b));
                    }
                }
            }
            for &a in tn {
                for i in 0..3 {
                    for &c in tv {
                        slots.vp.push(slot(3 * a + i, nu + c));
                    }
                }
            }
            for &c in tv {
                for &b in tn {
                    slots.pv.push(slot(nu + c, 3 * b));
                }
            }
        }

        let nnz = pattern.nnz();
        let mut op = AssembledOperator {
            rho,
            mu,
            mass: vec![0.0; nnz],
            stiffness: vec![0.0; nnz],
            coriolis: [vec![0.0; nnz], vec![0.0; nnz], vec![0.0; nnz]],
            divergence: vec![0.0; nnz],
            mean: vec![0.0; nnz],
            convection: vec![0.0; nnz],
            convection_form,
            num_enrichment,
            pattern,
            slots,
            geometry,
            reference: ReferenceElement::default(),
            tet_nodes,
            tet_vertices,
        };
        op.assemble_constant_blocks(spaces);
        if let Some(w) = w {
            op.assemble_convection(w);
        }
        Ok(op)
    }

    fn assemble_constant_blocks(&mut self, spaces: &FunctionSpaces) {
        let nu = spaces.num_velocity();
        let nv = spaces.num_vertices();
        let mult = nu + nv;
        let ne = self.num_enrichment;
        // dq[m][3b + j] = ∫ g_m ∂_j N_b, gq[m] = ∫ g_m
        let mut dq = vec![vec![0.0f64; nu]; ne];
        let mut gq = vec![0.0f64; ne];
        for t in 0..self.tet_nodes.len() {
            let geo = self.geometry[t];
            let mut m = [[0.0f64; 10]; 10];
            // g[a][b][k][l] = ∫ ∂_k N_a ∂_l N_b
            let mut g = [[[[0.0f64; 3]; 3]; 10]; 10];
            // d[c][b][j] = ∫ λ_c ∂_j N_b
            let mut d = [[[0.0f64; 3]; 10]; 4];
            for (q, vals) in self.reference.points.iter().zip(&self.reference.values) {
                let wq = q.weight * geo.volume;
                let grads = geo.p2_gradients(&q.bary);
                for a in 0..10 {
                    for b in 0..10 {
                        m[a][b] += wq * vals[a] * vals[b];
                        for k in 0..3 {
                            for l in 0..3 {
                                g[a][b][k][l] += wq * grads[a][k] * grads[b][l];
                            }
                        }
                    }
                }
                for c in 0..4 {
                    for b in 0..10 {
                        for j in 0..3 {
                            d[c][b][j] += wq * q.bary[c] * grads[b][j];
                        }
                    }
                }
                if ne > 0 {
                    let x = geo.point(&q.bary);
                    let tn = &self.tet_nodes[t];
                    for m in 0..ne {
                        let gw = wq * quadratic_monomial(m, &x);
                        gq[m] += gw;
                        for b in 0..10 {
                            for j in 0..3 {
                                dq[m][3 * tn[b] + j] += gw * grads[b][j];
                            }
                        }
                    }
                }
            }
            let vv = &self.slots.vv[t * VV..(t + 1) * VV];
            for a in 0..10 {
                for b in 0..10 {
                    let lap = g[a][b][0][0] + g[a][b][1][1] + g[a][b][2][2];
                    for i in 0..3 {
                        let base = vv[(a * 10 + b) * 3 + i] as usize;
                        self.mass[base + i] += self.rho * m[a][b];
                        for j in 0..3 {
                            let delta = if i == j { lap } else { 0.0 };
                            self.stiffness[base + j] += self.mu * (delta + g[a][b][j][i]);
                        }
                        // (e_k × u)_i = ε_ikj u_j
                        for k in 0..3 {
                            for j in 0..3 {
                                let eps = levi_civita(i, k, j);
                                if eps != 0.0 {
                                    self.coriolis[k][base + j] += self.rho * eps * m[a][b];
                                }
                            }
                        }
                    }
                }
            }
            let vp = &self.slots.vp[t * VP..(t + 1) * VP];
            let pv = &self.slots.pv[t * PV..(t + 1) * PV];
            for c in 0..4 {
                for b in 0..10 {
                    let base = pv[c * 10 + b] as usize;
                    for j in 0..3 {
                        self.divergence[base + j] -= d[c][b][j];
                        self.divergence[vp[(b * 3 + j) * 4 + c] as usize] -= d[c][b][j];
                    }
                }
            }
            for &v in &self.tet_vertices[t] {
                let s = geo.volume / 4.0;
                let k1 = self.pattern.find(nu + v, mult).unwrap();
                let k2 = self.pattern.find(mult, nu + v).unwrap();
                self.mean[k1] += s;
                self.mean[k2] += s;
            }
        }
        for m in 0..ne {
            let e = mult + 1 + m;
            for (r, &v) in dq[m].iter().enumerate() {
                let k1 = self.pattern.find(e, r).unwrap();
                let k2 = self.pattern.find(r, e).unwrap();
                self.divergence[k1] -= v;
                self.divergence[k2] -= v;
            }
            let k1 = self.pattern.find(e, mult).unwrap();
            let k2 = self.pattern.find(mult, e).unwrap();
            self.mean[k1] += gq[m];
            self.mean[k2] += gq[m];
        }
    }

    /// Reassembles `N(w)` for a new linearisation field.
    pub fn assemble_convection(&mut self, w: &[f64]) {
        self.convection.iter_mut().for_each(|v| *v = 0.0);
        let form = self.convection_form;
        for t in 0..self.tet_nodes.len() {
            let geo = self.geometry[t];
            let wl = local_vectors(w, &self.tet_nodes[t]);
            let mut c = [[0.0f64; 10]; 10];
            for (q, vals) in self.reference.points.iter().zip(&self.reference.values) {
                let wq = q.weight * geo.volume * self.rho;
                let grads = geo.p2_gradients(&q.bary);
                let wx = eval_field(vals, &wl);
                let mut wg = [0.0f64; 10];
                for a in 0..10 {
                    wg[a] = wx.dot(&grads[a]);
                }
                for a in 0..10 {
                    for b in 0..10 {
                        // row a (test), column b (trial)
                        let adv = vals[a] * wg[b];
                        let cons = -wg[a] * vals[b];
                        c[a][b] += wq
                            * match form {
                                ConvectionForm::Advective => adv,
                                ConvectionForm::Conservative => cons,
                                ConvectionForm::SkewSymmetric => 0.5 * (adv + cons),
                            };
                    }
                }
            }
            let vv = &self.slots.vv[t * VV..(t + 1) * VV];
            for a in 0..10 {
                for b in 0..10 {
                    for i in 0..3 {
                        self.convection[vv[(a * 10 + b) * 3 + i] as usize + i] += c[a][b];
                    }
                }
            }
        }
    }

    /// Values of the ω- and w-independent part `M/τ + K + B + mean` on the pattern.
    pub fn constant_values(&self, tau: f64) -> Vec<f64> {
        let inv_tau = 1.0 / tau;
        (0..self.pattern.nnz())
            .map(|k| self.mass[k] * inv_tau + self.stiffness[k] + self.divergence[k] + self.mean[k])
            .collect()
    }

    /// Values of `M/τ + K + S(ω) + N + B + mean` given [`Self::constant_values`].
    pub fn system_values(&self, constant: &[f64], omega: &Vector3<f64>, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.pattern.nnz()).map(|k| {
            constant[k]
                + omega.x * self.coriolis[0][k]
                + omega.y * self.coriolis[1][k]
                + omega.z * self.coriolis[2][k]
                + self.convection[k]
        }));
    }

    pub fn coriolis_values(&self, omega: &Vector3<f64>) -> Vec<f64> {
        (0..self.pattern.nnz())
            .map(|k| {
                omega.x * self.coriolis[0][k]
                    + omega.y * self.coriolis[1][k]
                    + omega.z * self.coriolis[2][k]
            })
            .collect()
    }

    /// xᵀ A y over the velocity block of one set of values.
    pub fn velocity_form(&self, vals: &[f64], x: &[f64], y: &[f64]) -> f64 {
        let nu = x.len();
        let mut s = 0.0;
        for r in 0..nu {
            for k in self.pattern.row(r) {
                let c = self.pattern.cols[k];
                if c < nu {
                    s += x[r] * vals[k] * y[c];
                }
            }
        }
        s
    }

    /// Applies the divergence rows to a velocity vector: `(B u)_c = −∫q_c div u` for every
    /// pressure basis function (P1 vertices, then the enrichment).
    pub fn apply_divergence(&self, u: &[f64]) -> Vec<f64> {
        let nu = u.len();
        let mult = self.pattern.n - self.num_enrichment - 1;
        (nu..self.pattern.n)
            .filter(|&r| r != mult)
            .map(|r| {
                self.pattern
                    .row(r)
                    .filter(|&k| self.pattern.cols[k] < nu)
                    .map(|k| self.divergence[k] * u[self.pattern.cols[k]])
                    .sum()
            })
            .collect()
    }

    /// Mass-matrix product restricted to velocity: `M u`.
    pub fn apply_mass(&self, u: &[f64]) -> Vec<f64> {
        let nu = u.len();
        (0..nu)
            .map(|r| {
                self.pattern
                    .row(r)
                    .filter(|&k| self.pattern.cols[k] < nu)
                    .map(|k| self.mass[k] * u[self.pattern.cols[k]])
                    .sum()
            })
            .collect()
    }

    /// Writes one block (by name) in `row col value` text, skipping structural zeros.
    pub fn dump_block(&self, name: &str, out: &mut impl Write) -> std::io::Result<()> {
        let vals: &[f64] = match name {
            "mass" => &self.mass,
            "stiffness" => &self.stiffness,
            "coriolis_x" => &self.coriolis[0],
            "coriolis_y" => &self.coriolis[1],
            "coriolis_z" => &self.coriolis[2],
            "divergence" => &self.divergence,
            "mean" => &self.mean,
            "convection" => &self.convection,
            _ => {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidInput,
                    format!("unknown block {name}"),
                ))
            }
        };
        for r in 0..self.pattern.n {
            for k in self.pattern.row(r) {
                if vals[k] != 0.0 {
                    writeln!(out, "{} {} {:.16e}", r, self.pattern.cols[k], vals[k])?;
                }
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> &[TetGeometry] {
        &self.geometry
    }

    pub fn reference(&self) -> &ReferenceElement {
        &self.reference
    }
}

pub const BLOCK_NAMES: [&str; 8] = [
    "mass",
    "stiffness",
    "coriolis_x",
    "coriolis_y",
    "coriolis_z",
    "divergence",
    "mean",
    "convection",
];

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}
