//! Dirichlet-constrained saddle systems solved by sparse LU (faer), reusing one symbolic
//! factorisation across all numeric refactorisations on the fixed pattern. A few trailing
//! unknowns with dense rows and columns can be split off and eliminated by a Schur
//! complement, which keeps them out of the sparse factor.

use super::assembly::Pattern;
use super::FemError;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};

const IDENTITY: u32 = u32::MAX;

/// Column-compressed copy of the pattern with Dirichlet rows replaced by identity rows and
/// the constrained columns removed from the remaining rows.
pub struct ConstrainedSolver {
    n: usize,
    /// size of the sparse block; unknowns `ns..n` form the dense border
    ns: usize,
    constrained: Vec<bool>,
    /// `(row, slot)` of the free entries of each border column, rows `< ns`
    border_cols: Vec<Vec<(usize, u32)>>,
    /// `(column, slot)` of the free entries of each border row, columns `< ns`
    border_rows: Vec<Vec<(usize, u32)>>,
    /// `(i, j, slot)` of the border–border block
    corner: Vec<(usize, usize, u32)>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// full-pattern slot of each stored entry, or `IDENTITY`
    source: Vec<u32>,
    symbolic: SymbolicLu<usize>,
    values: Vec<f64>,
}

impl std::fmt::Debug for ConstrainedSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstrainedSolver")
            .field("n", &self.n)
            .field("nnz", &self.row_idx.len())
            .finish()
    }
}

pub struct Factorization {
    lu: Lu<usize, f64>,
    /// border rows as dense vectors over the sparse block
    rows: Vec<Vec<f64>>,
    /// `K⁻¹` applied to each border column
    z: Vec<Vec<f64>>,
    schur: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl ConstrainedSolver {
    /// `constrained[r]` marks unknowns with prescribed values.
    pub fn new(pattern: &Pattern, constrained: Vec<bool>) -> Result<ConstrainedSolver, FemError> {
        ConstrainedSolver::bordered(pattern, constrained, 0)
    }

    /// As [`ConstrainedSolver::new`], eliminating the last `border` (unconstrained) unknowns
    /// by a Schur complement.
    pub fn bordered(
        pattern: &Pattern,
        constrained: Vec<bool>,
        border: usize,
    ) -> Result<ConstrainedSolver, FemError> {
        let n = pattern.n;
        let ns = n - border;
        assert_eq!(constrained.len(), n);
        assert!(
            constrained[ns..].iter().all(|c| !c),
            "border unknowns must be free"
        );
        let mut border_cols = vec![Vec::new(); border];
        let mut border_rows = vec![Vec::new(); border];
        let mut corner = Vec::new();
        let mut entries: Vec<(usize, usize, u32)> = Vec::with_capacity(pattern.nnz());
        for r in 0..n {
            if constrained[r] {
                entries.push((r, r, IDENTITY));
                continue;
            }
            for k in pattern.row(r) {
                let c = pattern.cols[k];
                if constrained[c] {
                    continue;
                }
                match (r >= ns, c >= ns) {
                    (false, false) => entries.push((c, r, k as u32)),
                    (false, true) => border_cols[c - ns].push((r, k as u32)),
                    (true, false) => border_rows[r - ns].push((c, k as u32)),
                    (true, true) => corner.push((r - ns, c - ns, k as u32)),
                }
            }
        }
        // sort by (column, row)
        entries.sort_unstable_by_key(|&(c, r, _)| (c, r));
        let mut col_ptr = vec![0usize; ns + 1];
        for &(c, _, _) in &entries {
            col_ptr[c + 1] += 1;
        }
        for c in 0..ns {
            col_ptr[c + 1] += col_ptr[c];
        }
        let row_idx: Vec<usize> = entries.iter().map(|e| e.1).collect();
        let source: Vec<u32> = entries.iter().map(|e| e.2).collect();
        let sym = SymbolicSparseColMatRef::new_checked(ns, ns, &col_ptr, None, &row_idx);
        let symbolic =
            SymbolicLu::try_new(sym).map_err(|e| FemError::Factorization(format!("{e:?}")))?;
        let values = vec![0.0; row_idx.len()];
        Ok(ConstrainedSolver {
            n,
            ns,
            constrained,
            border_cols,
            border_rows,
            corner,
            col_ptr,
            row_idx,
            source,
            symbolic,
            values,
        })
    }

    pub fn is_constrained(&self, r: usize) -> bool {
        self.constrained[r]
    }

    /// Numeric LU of the constrained matrix built from full-pattern values.
    pub fn factor(&mut self, full_values: &[f64]) -> Result<Factorization, FemError> {
        for (v, &s) in self.values.iter_mut().zip(&self.source) {
            *v = if s == IDENTITY {
                1.0
            } else {
                full_values[s as usize]
            };
        }
        let ns = self.ns;
        let sym = SymbolicSparseColMatRef::new_checked(ns, ns, &self.col_ptr, None, &self.row_idx);
        let mat = SparseColMatRef::new(sym, &self.values);
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), mat)
            .map_err(|e| FemError::Factorization(format!("{e:?}")))?;
        let nb = self.n - ns;
        let dense = |list: &[(usize, u32)]| {
            let mut v = vec![0.0; ns];
            for &(i, s) in list {
                v[i] = full_values[s as usize];
            }
            v
        };
        let rows: Vec<Vec<f64>> = self.border_rows.iter().map(|l| dense(l)).collect();
        let mut z = Vec::with_capacity(nb);
        for l in &self.border_cols {
            let mut col = dense(l);
            lu.solve_in_place(faer::MatMut::from_column_major_slice_mut(&mut col, ns, 1));
            z.push(col);
        }
        let schur = (nb > 0).then(|| {
            let mut s = nalgebra::DMatrix::zeros(nb, nb);
            for &(i, j, k) in &self.corner {
                s[(i, j)] += full_values[k as usize];
            }
            for i in 0..nb {
                for j in 0..nb {
                    s[(i, j)] -= dot(&rows[i], &z[j]);
                }
            }
            s.lu()
        });
        if let Some(s) = &schur {
            if !s.is_invertible() {
                return Err(FemError::Factorization(
                    "singular border Schur complement".into(),
                ));
            }
        }
        Ok(Factorization { lu, rows, z, schur })
    }

    /// Right-hand side of the constrained system: prescribed values in constrained rows and
    /// `b − A g` (prescribed columns lifted) in the free rows.
    pub fn lifted_rhs(
        &self,
        pattern: &Pattern,
        full_values: &[f64],
        rhs: &[f64],
        prescribed: &[f64],
    ) -> Vec<f64> {
        let n = self.n;
        let g: Vec<f64> = (0..n)
            .map(|r| {
                if self.constrained[r] {
                    prescribed[r]
                } else {
                    0.0
                }
            })
            .collect();
        let mut lifted = vec![0.0; n];
        pattern.mul(full_values, &g, &mut lifted);
        (0..n)
            .map(|r| {
                if self.constrained[r] {
                    prescribed[r]
                } else {
                    rhs[r] - lifted[r]
                }
            })
            .collect()
    }

    /// Solves the constrained system in place.
    pub fn solve_constrained(&self, lu: &Factorization, b: &mut [f64]) -> Result<(), FemError> {
        let ns = self.ns;
        let (bs, be) = b.split_at_mut(ns);
        lu.lu
            .solve_in_place(faer::MatMut::from_column_major_slice_mut(bs, ns, 1));
        if let Some(schur) = &lu.schur {
            let r = nalgebra::DVector::from_iterator(
                be.len(),
                be.iter().zip(&lu.rows).map(|(e, row)| e - dot(row, bs)),
            );
            let lambda = schur.solve(&r).ok_or_else(|| {
                FemError::Factorization("singular border Schur complement".into())
            })?;
            for (l, z) in lambda.iter().zip(&lu.z) {
                for (x, zi) in bs.iter_mut().zip(z) {
                    *x -= l * zi;
                }
            }
            be.copy_from_slice(lambda.as_slice());
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(FemError::Factorization("non-finite solution".into()));
        }
        Ok(())
    }

    /// Solves `A x = b` for the full system where constrained unknowns take `prescribed`
    /// values.
    pub fn solve(
        &self,
        lu: &Factorization,
        pattern: &Pattern,
        full_values: &[f64],
        rhs: &[f64],
        prescribed: &[f64],
    ) -> Result<Vec<f64>, FemError> {
        let mut x = self.lifted_rhs(pattern, full_values, rhs, prescribed);
        self.solve_constrained(lu, &mut x)?;
        for r in 0..self.n {
            if self.constrained[r] {
                x[r] = prescribed[r];
            }
        }
        Ok(x)
    }

    /// `b − A x` on the free rows, zero on constrained rows.
    pub fn free_residual(
        &self,
        pattern: &Pattern,
        full_values: &[f64],
        x: &[f64],
        rhs: &[f64],
    ) -> Vec<f64> {
        let mut ax = vec![0.0; self.n];
        pattern.mul(full_values, x, &mut ax);
        (0..self.n)
            .map(|r| {
                if self.constrained[r] {
                    0.0
                } else {
                    rhs[r] - ax[r]
                }
            })
            .collect()
    }

    /// Max-norm residual of the unconstrained rows, `‖(A x − b)_free‖∞`.
    pub fn residual(&self, pattern: &Pattern, full_values: &[f64], x: &[f64], rhs: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n];
        pattern.mul(full_values, x, &mut ax);
        (0..self.n)
            .filter(|&r| !self.constrained[r])
            .map(|r| (ax[r] - rhs[r]).abs())
            .fold(0.0, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
