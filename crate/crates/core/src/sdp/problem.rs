use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Entries `(row, col, value)` of a Hermitian operator on one block. Both
/// triangles are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockTerm {
    pub block: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl BlockTerm {
    pub fn from_dense(block: usize, m: &ComplexMatrix) -> Self {
        let mut entries = Vec::new();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let z = m[(i, j)];
                if z.re != 0.0 || z.im != 0.0 {
                    entries.push((i, j, z));
                }
            }
        }
        Self { block, entries }
    }

    pub fn to_dense(&self, n: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n, n);
        for &(i, j, z) in &self.entries {
            m[(i, j)] += z;
        }
        m
    }

    /// `tr(F X)` for Hermitian `F` and `X`; the result is real.
    pub fn inner(&self, x: &ComplexMatrix) -> f64 {
        self.entries.iter().map(|&(i, j, z)| (z * x[(j, i)]).re).sum()
    }
}

/// `Σ_k tr(F_k X_k) = rhs`
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub terms: Vec<BlockTerm>,
    pub rhs: f64,
}

/// Standard-form Hermitian cone program over block-diagonal `X ⪰ 0`:
/// optimize `Σ_k tr(C_k X_k)` subject to `tr(F_i X) = b_i`.
///
/// The dual of the maximization is `min bᵀy` s.t. `Σ y_i F_i − C ⪰ 0`;
/// for minimization it is `max bᵀy` s.t. `C − Σ y_i F_i ⪰ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    pub blocks: Vec<usize>,
    pub objective: Vec<BlockTerm>,
    pub constraints: Vec<Constraint>,
    pub sense: Sense,
}

impl SdpProblem {
    pub fn new(blocks: Vec<usize>, sense: Sense) -> Self {
        Self {
            blocks,
            objective: Vec::new(),
            constraints: Vec::new(),
            sense,
        }
    }

    pub fn set_objective(&mut self, block: usize, c: &ComplexMatrix) {
        self.objective.retain(|t| t.block != block);
        self.objective.push(BlockTerm::from_dense(block, c));
    }

    pub fn add_constraint(&mut self, terms: Vec<BlockTerm>, rhs: f64) {
        self.constraints.push(Constraint { terms, rhs });
    }

    /// Adds `Φ(X) = target` for a linear map into `n×n` Hermitian matrices,
    /// given through its adjoint `H ↦ Φ†(H)`. One constraint per element of
    /// [`hermitian_basis`]; the returned range indexes them, so the dual
    /// operator is `from_basis_coefficients(n, &y[range])`.
    pub fn add_equality<F>(&mut self, target: &ComplexMatrix, mut adjoint: F) -> std::ops::Range<usize>
    where
        F: FnMut(&ComplexMatrix) -> Vec<BlockTerm>,
    {
        let n = target.rows();
        let start = self.constraints.len();
        for h in hermitian_basis(n) {
            let term = BlockTerm { block: 0, entries: h };
            let rhs = term.inner(target);
            let terms = adjoint(&term.to_dense(n));
            self.constraints.push(Constraint { terms, rhs });
        }
        start..self.constraints.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn rhs(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.rhs).collect()
    }

    /// Dense objective for `block` (zero if absent).
    pub fn objective_block(&self, block: usize) -> ComplexMatrix {
        let n = self.blocks[block];
        let mut m = ComplexMatrix::zeros(n, n);
        for t in self.objective.iter().filter(|t| t.block == block) {
            m += &t.to_dense(n);
        }
        m
    }

    /// `Σ_k tr(C_k X_k)`
    pub fn objective_value(&self, x: &[ComplexMatrix]) -> f64 {
        self.objective.iter().map(|t| t.inner(&x[t.block])).sum()
    }

    /// `(tr(F_i X))_i`
    pub fn apply(&self, x: &[ComplexMatrix]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| c.terms.iter().map(|t| t.inner(&x[t.block])).sum())
            .collect()
    }

    /// `Σ_i y_i F_i` blockwise.
    pub fn adjoint(&self, y: &[f64]) -> Vec<ComplexMatrix> {
        let mut out: Vec<ComplexMatrix> = self.blocks.iter().map(|&n| ComplexMatrix::zeros(n, n)).collect();
        for (c, &yi) in self.constraints.iter().zip(y) {
            if yi == 0.0 {
                continue;
            }
            for t in &c.terms {
                for &(i, j, z) in &t.entries {
                    out[t.block][(i, j)] += z * yi;
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() || self.blocks.contains(&0) {
            return Err(Error::InvalidArgument("block dimensions must be positive".into()));
        }
        let check = |t: &BlockTerm| -> Result<()> {
            let n = *self
                .blocks
                .get(t.block)
                .ok_or_else(|| Error::InvalidArgument(format!("block {} does not exist", t.block)))?;
            if t.entries.iter().any(|&(i, j, _)| i >= n || j >= n) {
                return Err(Error::InvalidArgument(format!("entry outside block {}", t.block)));
            }
            let d = t.to_dense(n);
            let defect = d.hermiticity_defect();
            if defect > 1e-12 * d.frobenius_norm().max(1.0) {
                return Err(Error::NotHermitian { deviation: defect });
            }
            if t.entries.iter().any(|(_, _, z)| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite);
            }
            Ok(())
        };
        for t in &self.objective {
            check(t)?;
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(Error::NonFinite);
            }
            for t in &c.terms {
                check(t)?;
            }
        }
        Ok(())
    }
}

/// Symmetric real operator on one block.
#[derive(Clone, Debug, PartialEq)]
pub enum RealTerm {
    Sparse(Vec<(usize, usize, f64)>),
    Dense(DMatrix<f64>),
}

impl RealTerm {
    pub fn inner(&self, x: &DMatrix<f64>) -> f64 {
        match self {
            RealTerm::Sparse(e) => e.iter().map(|&(i, j, v)| v * x[(i, j)]).sum(),
            RealTerm::Dense(a) => a.dot(x),
        }
    }

    pub fn add_scaled_to(&self, x: &mut DMatrix<f64>, s: f64) {
        match self {
            RealTerm::Sparse(e) => {
                for &(i, j, v) in e {
                    x[(i, j)] += s * v;
                }
            }
            RealTerm::Dense(a) => *x += a * s,
        }
    }

    pub fn to_dense(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        self.add_scaled_to(&mut m, 1.0);
        m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RealConstraint {
    pub terms: Vec<(usize, RealTerm)>,
    pub rhs: f64,
}

/// Standard-form program over real symmetric blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSdp {
    pub blocks: Vec<usize>,
    pub objective: Vec<DMatrix<f64>>,
    pub constraints: Vec<RealConstraint>,
    pub sense: Sense,
}

impl RealSdp {
    pub fn rhs(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.rhs).collect()
    }
}

fn compact(n: usize, entries: Vec<(usize, usize, f64)>) -> RealTerm {
    if entries.len() > 2 * n {
        let mut m = DMatrix::zeros(n, n);
        for (i, j, v) in entries {
            m[(i, j)] += v;
        }
        RealTerm::Dense(m)
    } else {
        RealTerm::Sparse(entries)
    }
}

/// Embeds `F` as `½·[[Re F, −Im F], [Im F, Re F]]`.
fn embed_entries(n: usize, entries: &[(usize, usize, C64)]) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::with_capacity(entries.len() * 4);
    for &(i, j, z) in entries {
        if z.re != 0.0 {
            out.push((i, j, 0.5 * z.re));
            out.push((i + n, j + n, 0.5 * z.re));
        }
        if z.im != 0.0 {
            out.push((i, j + n, -0.5 * z.im));
            out.push((i + n, j, 0.5 * z.im));
        }
    }
    out
}

/// Replaces each `d×d` Hermitian block by a `2d×2d` real symmetric block via
/// `M ↦ [[Re M, −Im M], [Im M, Re M]]`. Data are scaled by ½ so that
/// `tr(F X) = tr(½·embed(F) · embed(X))` and optimal values carry over unchanged.
pub fn embed_complex(p: &SdpProblem) -> RealSdp {
    let blocks: Vec<usize> = p.blocks.iter().map(|n| 2 * n).collect();
    let mut objective: Vec<DMatrix<f64>> = blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
    for t in &p.objective {
        for (i, j, v) in embed_entries(p.blocks[t.block], &t.entries) {
            objective[t.block][(i, j)] += v;
        }
    }
    let constraints = p
        .constraints
        .iter()
        .map(|c| {
            // one term per block, so the Schur assembly never sees duplicates
            let mut per_block: Vec<(usize, Vec<(usize, usize, f64)>)> = Vec::new();
            for t in &c.terms {
                let e = embed_entries(p.blocks[t.block], &t.entries);
                match per_block.iter_mut().find(|(b, _)| *b == t.block) {
                    Some((_, acc)) => acc.extend(e),
                    None => per_block.push((t.block, e)),
                }
            }
            RealConstraint {
                terms: per_block
                    .into_iter()
                    .map(|(b, e)| (b, compact(2 * p.blocks[b], e)))
                    .collect(),
                rhs: c.rhs,
            }
        })
        .collect();
    RealSdp {
        blocks,
        objective,
        constraints,
        sense: p.sense,
    }
}

/// Inverse of the embedding for a variable block: averages the two copies.
pub fn extract_hermitian(y: &DMatrix<f64>) -> ComplexMatrix {
    let n = y.nrows() / 2;
    ComplexMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (y[(i, j)] + y[(i + n, j + n)]);
        let im = 0.5 * (y[(i + n, j)] - y[(i, j + n)]);
        C64::new(re, im)
    })
}

/// The real embedding of a Hermitian variable (no ½ factor).
pub fn embed_hermitian(x: &ComplexMatrix) -> DMatrix<f64> {
    let n = x.rows();
    let mut y = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = x[(i, j)];
            y[(i, j)] = z.re;
            y[(i + n, j + n)] = z.re;
            y[(i, j + n)] = -z.im;
            y[(i + n, j)] = z.im;
        }
    }
    y
}

/// Real-linear basis of `n×n` Hermitian matrices: `E_kk`, `E_kl + E_lk`, and
/// `i(E_lk − E_kl)` for `k < l`. With coefficients `y`, `Σ y_i H_i` reproduces
/// the matrix and `tr(H_i M)` reads off the constraint functionals.
pub fn hermitian_basis(n: usize) -> Vec<Vec<(usize, usize, C64)>> {
    let one = C64::new(1.0, 0.0);
    let i_ = C64::new(0.0, 1.0);
    let mut out = Vec::with_capacity(n * n);
    for k in 0..n {
        out.push(vec![(k, k, one)]);
        for l in k + 1..n {
            out.push(vec![(k, l, one), (l, k, one)]);
            out.push(vec![(k, l, -i_), (l, k, i_)]);
        }
    }
    out
}

/// `Σ_i y_i H_i` for the basis of [`hermitian_basis`].
pub fn from_basis_coefficients(n: usize, y: &[f64]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n, n);
    for (h, &yi) in hermitian_basis(n).iter().zip(y) {
        for &(i, j, z) in h {
            m[(i, j)] += z * yi;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_preserves_inner_products() {
        let f = ComplexMatrix::new(
            2,
            2,
            vec![
                C64::new(1.0, 0.0),
                C64::new(0.3, -0.7),
                C64::new(0.3, 0.7),
                C64::new(-2.0, 0.0),
            ],
        )
        .unwrap();
        let x = ComplexMatrix::new(
            2,
            2,
            vec![
                C64::new(0.6, 0.0),
                C64::new(0.1, 0.2),
                C64::new(0.1, -0.2),
                C64::new(0.4, 0.0),
            ],
        )
        .unwrap();
        let direct = (&f * &x).trace().re;
        let term = compact(4, embed_entries(2, &BlockTerm::from_dense(0, &f).entries));
        let embedded = term.inner(&embed_hermitian(&x));
        assert!((direct - embedded).abs() < 1e-15);
        assert!(extract_hermitian(&embed_hermitian(&x)).approx_eq(&x, 0.0));
    }

    #[test]
    fn basis_reconstructs_and_reads_functionals() {
        let n = 3;
        let basis = hermitian_basis(n);
        assert_eq!(basis.len(), 9);
        let y: Vec<f64> = (0..9).map(|k| k as f64 * 0.25 - 1.0).collect();
        let m = from_basis_coefficients(n, &y);
        assert!(m.hermiticity_defect() < 1e-15);
        let b0 = BlockTerm {
            block: 0,
            entries: basis[1].clone(),
        };
        assert!((b0.inner(&m) - 2.0 * m[(0, 1)].re).abs() < 1e-15);
        let b1 = BlockTerm {
            block: 0,
            entries: basis[2].clone(),
        };
        assert!((b1.inner(&m) + 2.0 * m[(0, 1)].im).abs() < 1e-15);
    }

    #[test]
    fn real_problem_embeds_as_duplicate_blocks() {
        let mut p = SdpProblem::new(vec![2], Sense::Maximize);
        p.set_objective(0, &ComplexMatrix::from_real_diag(&[1.0, 2.0]));
        p.add_constraint(vec![BlockTerm::from_dense(0, &ComplexMatrix::identity(2))], 1.0);
        let r = embed_complex(&p);
        assert_eq!(r.blocks, vec![4]);
        let c = &r.objective[0];
        for i in 0..2 {
            assert_eq!(c[(i, i)], c[(i + 2, i + 2)]);
            for j in 0..2 {
                assert_eq!(c[(i, j + 2)], 0.0);
            }
        }
    }

    #[test]
    fn validate_rejects_non_hermitian() {
        let mut p = SdpProblem::new(vec![2], Sense::Maximize);
        p.add_constraint(
            vec![BlockTerm {
                block: 0,
                entries: vec![(0, 1, C64::new(1.0, 0.0))],
            }],
            1.0,
        );
        assert!(p.validate().is_err());
        let mut q = SdpProblem::new(vec![2], Sense::Maximize);
        q.add_constraint(
            vec![BlockTerm {
                block: 3,
                entries: vec![],
            }],
            1.0,
        );
        assert!(q.validate().is_err());
    }
}
