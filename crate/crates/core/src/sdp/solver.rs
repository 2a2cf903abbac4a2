use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::problem::{embed_complex, extract_hermitian, RealSdp, RealTerm, SdpProblem, Sense};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// An iterate with `|pobj − dobj| ≤ gap_tol·(1 + |pobj|)` and feasible
    /// residuals is accepted as optimal.
    pub gap_tol: f64,
    /// After acceptance the solver keeps going until the gap reaches this,
    /// progress stalls, or `polish_iter` more steps are taken; the best
    /// accepted iterate is returned.
    pub target_gap_tol: f64,
    pub polish_iter: usize,
    /// Relative primal and dual residual bound.
    pub feas_tol: f64,
    pub max_iter: usize,
    pub step_fraction: f64,
    /// Write one JSON object per iteration to this file.
    pub trace: Option<PathBuf>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            target_gap_tol: 1e-11,
            polish_iter: 8,
            feas_tol: 1e-8,
            max_iter: 200,
            step_fraction: 0.98,
            trace: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RealSolution {
    pub x: Vec<DMatrix<f64>>,
    pub y: Vec<f64>,
    pub s: Vec<DMatrix<f64>>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub x: Vec<ComplexMatrix>,
    pub y: Vec<f64>,
    pub s: Vec<ComplexMatrix>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub gap: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Errors unless the solve converged.
    pub fn into_optimal(self) -> Result<Self> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(Error::Solver {
                status: self.status,
                iterations: self.iterations,
            })
        }
    }
}

/// Solves a Hermitian program through its real embedding.
pub fn solve(p: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    p.validate()?;
    let real = embed_complex(p);
    let r = solve_real(&real, opts);
    Ok(SdpSolution {
        x: r.x.iter().map(extract_hermitian).collect(),
        s: r.s.iter().map(|s| extract_hermitian(s).scale(2.0)).collect(),
        y: r.y,
        primal_obj: r.primal_obj,
        dual_obj: r.dual_obj,
        gap: (r.primal_obj - r.dual_obj).abs(),
        primal_infeas: r.primal_infeas,
        dual_infeas: r.dual_infeas,
        status: r.status,
        iterations: r.iterations,
    })
}

struct Operator<'a> {
    m: usize,
    by_block: Vec<Vec<(usize, &'a RealTerm)>>,
}

impl<'a> Operator<'a> {
    fn new(p: &'a RealSdp) -> Self {
        let mut by_block = vec![Vec::new(); p.blocks.len()];
        for (i, c) in p.constraints.iter().enumerate() {
            for (k, t) in &c.terms {
                by_block[*k].push((i, t));
            }
        }
        Self {
            m: p.constraints.len(),
            by_block,
        }
    }

    fn apply(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (k, terms) in self.by_block.iter().enumerate() {
            for (i, t) in terms {
                out[*i] += t.inner(&x[k]);
            }
        }
        out
    }

    fn adjoint(&self, y: &DVector<f64>, blocks: &[usize]) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (k, terms) in self.by_block.iter().enumerate() {
            for (i, t) in terms {
                if y[*i] != 0.0 {
                    t.add_scaled_to(&mut out[k], y[*i]);
                }
            }
        }
        out
    }

    /// `M_ij = Σ_k tr(A_ik W_k A_jk W_k)`
    fn schur(&self, w: &[DMatrix<f64>]) -> DMatrix<f64> {
        let mut mm = DMatrix::zeros(self.m, self.m);
        for (k, terms) in self.by_block.iter().enumerate() {
            let wk = &w[k];
            let dense: Vec<Option<DMatrix<f64>>> = terms
                .iter()
                .map(|(_, t)| match t {
                    RealTerm::Dense(a) => Some(wk * a * wk),
                    RealTerm::Sparse(_) => None,
                })
                .collect();
            for (a, (i, ta)) in terms.iter().enumerate() {
                for (b, (j, tb)) in terms.iter().enumerate().skip(a) {
                    let val = match (&dense[a], &dense[b], ta, tb) {
                        (Some(g), _, _, _) => tb.inner(g),
                        (None, Some(g), _, _) => ta.inner(g),
                        (None, None, RealTerm::Sparse(ea), RealTerm::Sparse(eb)) => {
                            let mut acc = 0.0;
                            for &(r1, c1, v1) in ea {
                                for &(r2, c2, v2) in eb {
                                    acc += v1 * v2 * wk[(c1, r2)] * wk[(c2, r1)];
                                }
                            }
                            acc
                        }
                        _ => unreachable!(),
                    };
                    mm[(*i, *j)] += val;
                    if i != j {
                        mm[(*j, *i)] += val;
                    }
                }
            }
        }
        mm
    }
}

fn dot(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn frob(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn factor_schur(mut m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    symmetrize(&mut m);
    if let Some(c) = m.clone().cholesky() {
        return Some(c);
    }
    let scale = m.diagonal().amax().max(1e-300);
    let mut reg = 1e-14 * scale;
    for _ in 0..8 {
        let mut r = m.clone();
        for i in 0..r.nrows() {
            r[(i, i)] += reg;
        }
        if let Some(c) = r.cholesky() {
            return Some(c);
        }
        reg *= 100.0;
    }
    None
}

/// Largest `α` with `X + αΔ ⪰ 0`, given the Cholesky factor of `X`.
fn max_step(l: &DMatrix<f64>, delta: &DMatrix<f64>) -> f64 {
    let Some(t) = l.solve_lower_triangular(delta) else {
        return 0.0;
    };
    let Some(mut u) = l.solve_lower_triangular(&t.transpose()) else {
        return 0.0;
    };
    symmetrize(&mut u);
    let lmin = u.symmetric_eigenvalues().min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

struct Scaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    w: DMatrix<f64>,
    d: DVector<f64>,
    lx: DMatrix<f64>,
    ls: DMatrix<f64>,
}

/// Nesterov–Todd scaling: `W S W = X` with `W = G Gᵀ` and
/// `G⁻¹ X G⁻ᵀ = Gᵀ S G = diag(d)`.
fn nt_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<Scaling> {
    let lx = x.clone().cholesky()?.l();
    let ls = s.clone().cholesky()?.l();
    let svd = (ls.transpose() * &lx).svd(false, true);
    let q = svd.v_t?.transpose();
    let d = svd.singular_values;
    if d.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let inv_sqrt = DMatrix::from_diagonal(&d.map(|v| 1.0 / v.sqrt()));
    let sqrt = DMatrix::from_diagonal(&d.map(f64::sqrt));
    let g = &lx * &q * inv_sqrt;
    let n = x.nrows();
    let lx_inv = lx.solve_lower_triangular(&DMatrix::identity(n, n))?;
    let g_inv = sqrt * q.transpose() * lx_inv;
    let w = &g * g.transpose();
    Some(Scaling { g, g_inv, w, d, lx, ls })
}

struct Snapshot {
    merit: f64,
    /// Iteration of the first accepted iterate.
    found_at: usize,
    x: Vec<DMatrix<f64>>,
    s: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    objs: (f64, f64, f64, f64),
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
}

/// Primal-dual interior-point method (infeasible start, NT scaling,
/// Mehrotra predictor-corrector) for `max ⟨C,X⟩ s.t. A(X) = b, X ⪰ 0`
/// and its dual `min bᵀy s.t. Aᵀy − C = S ⪰ 0`. Minimization is handled by
/// negating `C`; reported values are always in the problem's own sense.
pub fn solve_real(p: &RealSdp, opts: &SolverOptions) -> RealSolution {
    let sign = match p.sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    let c: Vec<DMatrix<f64>> = p.objective.iter().map(|c| c * sign).collect();
    let b = DVector::from_vec(p.rhs());
    let op = Operator::new(p);
    let nb = p.blocks.len();
    let ntot: usize = p.blocks.iter().sum();
    let norm_b = b.norm();
    let norm_c = frob(&c);
    let xi = 1.0 + b.amax() + norm_c;

    let mut x: Vec<DMatrix<f64>> = p.blocks.iter().map(|&n| DMatrix::identity(n, n) * xi).collect();
    let mut s = x.clone();
    let mut y = DVector::zeros(op.m);

    let mut trace = opts
        .trace
        .as_ref()
        .and_then(|path| File::create(path).ok().map(BufWriter::new));

    let mut status = SolveStatus::MaxIter;
    let mut best: Option<Snapshot> = None;
    let mut iterations = 0;
    let (mut pobj, mut dobj, mut pinf, mut dinf);
    loop {
        let rp = &b - op.apply(&x);
        let aty = op.adjoint(&y, &p.blocks);
        let rd: Vec<DMatrix<f64>> = (0..nb).map(|k| &c[k] - &aty[k] + &s[k]).collect();
        pobj = dot(&c, &x);
        dobj = b.dot(&y);
        pinf = rp.norm() / (1.0 + norm_b);
        dinf = frob(&rd) / (1.0 + norm_c);
        let xs = dot(&x, &s);
        let mu = xs / ntot as f64;

        debug_assert!({
            let identity = xs - dot(&x, &rd) + rp.dot(&y);
            let scale = 1.0 + pobj.abs() + dobj.abs() + xs.abs();
            ((dobj - pobj) - identity).abs() <= 1e-6 * scale
        });

        let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs());
        if pinf <= opts.feas_tol && dinf <= opts.feas_tol && rel_gap <= opts.gap_tol {
            if rel_gap <= opts.target_gap_tol {
                status = SolveStatus::Optimal;
                break;
            }
            let merit = rel_gap.max(pinf).max(dinf);
            if best.as_ref().is_none_or(|b| merit < b.merit) {
                best = Some(Snapshot {
                    merit,
                    found_at: best.as_ref().map_or(iterations, |b| b.found_at),
                    x: x.clone(),
                    s: s.clone(),
                    y: y.clone(),
                    objs: (pobj, dobj, pinf, dinf),
                });
            }
        }
        if best
            .as_ref()
            .is_some_and(|b| iterations >= b.found_at + opts.polish_iter)
        {
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        let xnorm = frob(&x);
        if !xnorm.is_finite() || xnorm > 1e12 || y.amax() > 1e12 {
            status = SolveStatus::Infeasible;
            break;
        }

        let Some(sc) = x
            .iter()
            .zip(&s)
            .map(|(x, s)| nt_scaling(x, s))
            .collect::<Option<Vec<_>>>()
        else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let w: Vec<DMatrix<f64>> = sc.iter().map(|s| s.w.clone()).collect();
        let schur = op.schur(&w);
        let Some(chol) = factor_schur(schur.clone()) else {
            status = SolveStatus::NumericalFailure;
            break;
        };

        let wrdw: Vec<DMatrix<f64>> = (0..nb).map(|k| &w[k] * &rd[k] * &w[k]).collect();
        let direction = |rc: &[DMatrix<f64>]| -> Direction {
            let rhs: Vec<DMatrix<f64>> = (0..nb).map(|k| &rc[k] + &wrdw[k]).collect();
            let r = op.apply(&rhs) - &rp;
            let mut dy = chol.solve(&r);
            // refinement against the unregularized matrix
            for _ in 0..2 {
                let res = &r - &schur * &dy;
                dy += chol.solve(&res);
            }
            let atdy = op.adjoint(&dy, &p.blocks);
            let ds: Vec<DMatrix<f64>> = (0..nb).map(|k| &atdy[k] - &rd[k]).collect();
            let dx: Vec<DMatrix<f64>> = (0..nb)
                .map(|k| {
                    let mut d = &rc[k] - &w[k] * &ds[k] * &w[k];
                    symmetrize(&mut d);
                    d
                })
                .collect();
            Direction { dx, dy, ds }
        };
        let steps = |d: &Direction| -> (f64, f64) {
            let ap = (0..nb)
                .map(|k| max_step(&sc[k].lx, &d.dx[k]))
                .fold(f64::INFINITY, f64::min);
            let ad = (0..nb)
                .map(|k| max_step(&sc[k].ls, &d.ds[k]))
                .fold(f64::INFINITY, f64::min);
            ((opts.step_fraction * ap).min(1.0), (opts.step_fraction * ad).min(1.0))
        };

        let predictor_rc: Vec<DMatrix<f64>> = x.iter().map(|x| -x).collect();
        let pred = direction(&predictor_rc);
        let (ap, ad) = steps(&pred);
        let xs_aff: f64 = (0..nb)
            .map(|k| (&x[k] + &pred.dx[k] * ap).dot(&(&s[k] + &pred.ds[k] * ad)))
            .sum();
        let ratio = (xs_aff / xs).max(0.0);
        let expon = (3.0 * ap.min(ad).powi(2)).max(1.0);
        let sigma = ratio.powf(expon).min(1.0);

        let corrector_rc: Vec<DMatrix<f64>> = (0..nb)
            .map(|k| {
                let Scaling { g, g_inv, d, .. } = &sc[k];
                let dxt = g_inv * &pred.dx[k] * g_inv.transpose();
                let dst = g.transpose() * &pred.ds[k] * g;
                let prod = &dxt * &dst;
                let n = d.len();
                let h = DMatrix::from_fn(n, n, |i, j| {
                    let mut r = -0.5 * (prod[(i, j)] + prod[(j, i)]);
                    if i == j {
                        r += sigma * mu - d[i] * d[i];
                    }
                    2.0 * r / (d[i] + d[j])
                });
                let mut rc = g * h * g.transpose();
                symmetrize(&mut rc);
                rc
            })
            .collect();
        let corr = direction(&corrector_rc);
        let (ap, ad) = steps(&corr);

        if let Some(t) = trace.as_mut() {
            let line = serde_json::json!({
                "iter": iterations,
                "pobj": sign * pobj,
                "dobj": sign * dobj,
                "pinf": pinf,
                "dinf": dinf,
                "mu": mu,
                "sigma": sigma,
                "alpha_p": ap,
                "alpha_d": ad,
            });
            let _ = writeln!(t, "{line}");
        }

        if ap < 1e-12 && ad < 1e-12 {
            status = SolveStatus::NumericalFailure;
            break;
        }
        for k in 0..nb {
            x[k] += &corr.dx[k] * ap;
            s[k] += &corr.ds[k] * ad;
            symmetrize(&mut x[k]);
            symmetrize(&mut s[k]);
        }
        y += &corr.dy * ad;
        iterations += 1;
    }
    if let Some(t) = trace.as_mut() {
        let _ = t.flush();
    }
    if status != SolveStatus::Optimal {
        if let Some(b) = best {
            (x, s, y) = (b.x, b.s, b.y);
            (pobj, dobj, pinf, dinf) = b.objs;
            status = SolveStatus::Optimal;
        }
    }

    RealSolution {
        x,
        y: (y * sign).iter().copied().collect(),
        s,
        primal_obj: sign * pobj,
        dual_obj: sign * dobj,
        primal_infeas: pinf,
        dual_infeas: dinf,
        status,
        iterations,
    }
}
