//! Fidelity of recovery `F_{C→B}(ρ_AB‖σ_AC) = max_Γ F(ρ_AB, Γ_{C→B}(σ_AC))`.
//!
//! With `σ_ACD` a minimal purification, every recovered state has the form
//! `tr_D[√σ_AD τ_ABD √σ_AD]` with `τ ⪰ 0` and `tr_B τ = 1_AD`, which makes the
//! root fidelity a semidefinite program. Its dual variables `(L_AB, R_AB, Q_AD)`
//! are turned into an Alberti pair with `F = tr[ρR⁻¹]·tr[σ_AD Q]` and
//! `Q ⊗ 1_B ⪰ R ⊗ 1_D`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::channels::{apply_choi, is_cptp, petz_map, project_cptp, ChoiMatrix, CptpReport, CPTP_TOL};
use crate::entropy::{cqmi, fidelity, fidelity_matrices, renyi_half, Divergence};
use crate::error::{Error, Result};
use crate::linalg::{
    embed_operator, herm_eig, kron, mat_fn, norms, permute_factors, support_isometry, ComplexMatrix, HermEig, MatFn,
    MatrixFile, SystemDims, RANK_TOL,
};
use crate::sdp::{
    check_certificate, from_basis_coefficients, solve, BlockTerm, CertificateReport, SdpProblem, SdpSolution, Sense,
    SolverOptions,
};
use crate::states::{purify, schmidt, LabeledState};

/// Largest product program accepted by [`multiplicativity_check`], in real dimensions.
pub const SIZE_CAP: usize = 512;

/// Tolerance handed to [`check_certificate`] for the recovery program.
pub const CERTIFICATE_TOL: f64 = 1e-7;

/// Hermitian operator with factor labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    pub mat: ComplexMatrix,
    pub dims: SystemDims,
}

impl Operator {
    fn new(mat: ComplexMatrix, dims: SystemDims) -> Self {
        Self { mat, dims }
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            mat: kron(&self.mat, &other.mat),
            dims: self.dims.concat(&other.dims)?,
        })
    }

    pub fn relabel(&self, f: impl Fn(&str) -> String) -> Result<Self> {
        Ok(Self {
            mat: self.mat.clone(),
            dims: self.dims.relabel(f)?,
        })
    }
}

impl Serialize for Operator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixFile::from_matrix(&self.mat, &self.dims, Some("operator")).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (mat, dims) = MatrixFile::deserialize(d)?
            .to_matrix()
            .map_err(serde::de::Error::custom)?;
        Ok(Self { mat, dims })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlbertiPair {
    pub r_ab: Operator,
    pub q_ad: Operator,
    /// The purification marginal the pair refers to.
    pub sigma_ad: Operator,
    /// `tr[ρ_AB R⁻¹]·tr[σ_AD Q]`
    pub objective: f64,
    /// `λ_min(Q ⊗ 1_B − R ⊗ 1_D)`
    pub min_eigenvalue: f64,
}

impl AlbertiPair {
    /// Feasibility up to `tol` relative to the operator norms involved.
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.min_eigenvalue >= -tol * feasibility_scale(&self.r_ab, &self.q_ad)
    }
}

fn feasibility_scale(r: &Operator, q: &Operator) -> f64 {
    norms(&r.mat).operator_norm.max(norms(&q.mat).operator_norm).max(1.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub value: f64,
    pub primal_lb: f64,
    pub dual_ub: f64,
    pub gap: f64,
    /// CPTP map from the non-shared factors of `σ` to those of `ρ`.
    pub recovery_channel: ChoiMatrix,
    pub alberti_pair: AlbertiPair,
    /// `F(ρ_AB, Γ(σ_AC))` for the extracted channel, computed without solver data.
    pub achieved_fidelity: f64,
    pub channel_check: CptpReport,
    pub certificate: CertificateReport,
}

fn fresh_label(base: &str, taken: &[&str]) -> String {
    let mut l = base.to_string();
    while taken.contains(&l.as_str()) {
        l.push('\'');
    }
    l
}

fn inverse_pd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = herm_eig(&m.hermitian_part())?;
    if eig.values[0] > 0.0 {
        Ok(eig.reconstruct_with(|v| 1.0 / v))
    } else {
        mat_fn(&m.hermitian_part(), MatFn::Pinv)
    }
}

fn intersection<'a>(rho: &'a LabeledState, sigma: &LabeledState) -> Vec<&'a str> {
    rho.dims()
        .labels()
        .into_iter()
        .filter(|l| sigma.dims().contains(l))
        .collect()
}

/// One FoR instance with `ρ` ordered as `(A, B)` and `σ` as `(A, C)`.
#[derive(Clone, Debug)]
struct Instance {
    rho: LabeledState,
    sigma: LabeledState,
    b: Vec<String>,
    dims_ab: SystemDims,
    dims_ad: SystemDims,
    dims_abd: SystemDims,
    dims_b: SystemDims,
    dims_c: SystemDims,
    /// Schmidt form `Σ_k s_k |f_k⟩_AD |g_k⟩_C` of the purification.
    coeffs: Vec<f64>,
    f: ComplexMatrix,
    g: ComplexMatrix,
    sigma_ad: ComplexMatrix,
    sqrt_sigma_ad: ComplexMatrix,
    /// Isometry onto `supp ρ`.
    v: ComplexMatrix,
}

impl Instance {
    fn new(rho: &LabeledState, sigma: &LabeledState, shared: &[&str]) -> Result<Self> {
        for (i, l) in shared.iter().enumerate() {
            if shared[..i].contains(l) {
                return Err(Error::DuplicateLabel(l.to_string()));
            }
            let (dr, ds) = (rho.dims().dim_of(l)?, sigma.dims().dim_of(l)?);
            if dr != ds {
                return Err(Error::DimensionMismatch {
                    expected: dr,
                    found: ds,
                });
            }
        }
        let b: Vec<&str> = rho
            .dims()
            .labels()
            .into_iter()
            .filter(|l| !shared.contains(l))
            .collect();
        let c: Vec<&str> = sigma
            .dims()
            .labels()
            .into_iter()
            .filter(|l| !shared.contains(l))
            .collect();
        let order_ab: Vec<&str> = shared.iter().chain(&b).copied().collect();
        let order_ac: Vec<&str> = shared.iter().chain(&c).copied().collect();
        let rho_p = rho.permuted(&order_ab)?;
        let sigma_p = sigma.permuted(&order_ac)?;

        let taken: Vec<&str> = order_ab.iter().chain(&c).copied().collect();
        let d_label = fresh_label("D", &taken);
        let psi = purify(&sigma_p, &d_label)?;
        let rank = psi.dims().dim_of(&d_label)?;
        let left: Vec<&str> = shared.iter().copied().chain([d_label.as_str()]).collect();
        let (coeffs, f, g, dims_ad, dims_c) = if c.is_empty() {
            let v = psi.vec().to_vec();
            (
                vec![1.0],
                ComplexMatrix::column(&v),
                ComplexMatrix::identity(1),
                psi.dims().clone(),
                SystemDims::empty(),
            )
        } else {
            let s = schmidt(&psi, &left)?;
            (s.coefficients, s.left, s.right, s.left_dims, s.right_dims)
        };
        let k = coeffs.len();
        let weighted = |p: f64| ComplexMatrix::from_fn(f.rows(), k, |i, j| f[(i, j)] * coeffs[j].powf(p));
        let fs = weighted(1.0);
        let fh = weighted(0.5);
        let sigma_ad = &fs * &fs.adjoint();
        let sqrt_sigma_ad = &fh * &fh.adjoint();

        let dims_ab = rho_p.dims().clone();
        let dims_b = dims_ab.select(&b)?;
        let dims_abd = dims_ab.concat(&SystemDims::new(vec![(d_label.clone(), rank)])?)?;
        let v = support_isometry(rho_p.mat())?;
        Ok(Self {
            rho: rho_p,
            sigma: sigma_p,
            b: b.iter().map(|l| l.to_string()).collect(),
            dims_ab,
            dims_ad,
            dims_abd,
            dims_b,
            dims_c,
            coeffs,
            f,
            g,
            sigma_ad,
            sqrt_sigma_ad,
            v,
        })
    }

    fn rho_compressed(&self) -> ComplexMatrix {
        (&(&self.v.adjoint() * self.rho.mat()) * &self.v).hermitian_part()
    }

    fn real_size(&self) -> usize {
        2 * (self.v.cols() + self.dims_ab.total() + self.dims_abd.total())
    }

    /// Block 0 is `[[ρ̃, Z̃], [Z̃†, ω]]` with `ρ = V ρ̃ V†`, block 1 is `τ_ABD`.
    /// Maximizes `Re tr(V Z̃)` subject to the block-0 diagonal being `ρ̃` and
    /// `ω = tr_D[√σ_AD τ √σ_AD]`, and `tr_B τ = 1_AD`.
    fn problem(&self) -> Result<(SdpProblem, [Range<usize>; 3])> {
        let n_ab = self.dims_ab.total();
        let r = self.v.cols();
        let n0 = r + n_ab;
        let n1 = self.dims_abd.total();
        let mut p = SdpProblem::new(vec![n0, n1], Sense::Maximize);
        let mut c = ComplexMatrix::zeros(n0, n0);
        c.set_block(0, r, &self.v.adjoint().scale(0.5));
        c.set_block(r, 0, &self.v.scale(0.5));
        p.set_objective(0, &c);

        let place = |h: &ComplexMatrix, offset: usize| {
            let mut m = ComplexMatrix::zeros(n0, n0);
            m.set_block(offset, offset, h);
            BlockTerm::from_dense(0, &m)
        };
        let r1 = p.add_equality(&self.rho_compressed(), |h| vec![place(h, 0)]);

        // D is the last factor of ABD, so H_AB ⊗ 1_D is a plain Kronecker product.
        let s_hat = embed_operator(&self.sqrt_sigma_ad, &self.dims_ad, &self.dims_abd)?;
        let id_d = ComplexMatrix::identity(n1 / n_ab);
        let r2 = p.add_equality(&ComplexMatrix::zeros(n_ab, n_ab), |h| {
            let adj = &(&s_hat * &kron(h, &id_d)) * &s_hat;
            vec![place(h, r), BlockTerm::from_dense(1, &adj.scale(-1.0))]
        });

        let mut failure = None;
        let r3 = p.add_equality(
            &ComplexMatrix::identity(self.dims_ad.total()),
            |h| match embed_operator(h, &self.dims_ad, &self.dims_abd) {
                Ok(m) => vec![BlockTerm::from_dense(1, &m)],
                Err(e) => {
                    failure.get_or_insert(e);
                    Vec::new()
                }
            },
        );
        if let Some(e) = failure {
            return Err(e);
        }
        Ok((p, [r1, r2, r3]))
    }
}

/// The recovery program for one instance together with its solution.
#[derive(Clone, Debug)]
pub struct ForProgram {
    pub problem: SdpProblem,
    pub solution: SdpSolution,
    inst: Instance,
    ranges: [Range<usize>; 3],
}

/// Builds and solves the recovery program; `shared` names the factors common
/// to `rho` and `sigma`.
pub fn for_program(rho: &LabeledState, sigma: &LabeledState, shared: &[&str]) -> Result<ForProgram> {
    let inst = Instance::new(rho, sigma, shared)?;
    let (problem, ranges) = inst.problem()?;
    let solution = solve(&problem, &SolverOptions::default())?.into_optimal()?;
    Ok(ForProgram {
        problem,
        solution,
        inst,
        ranges,
    })
}

impl ForProgram {
    /// Lower bound on the root fidelity of recovery.
    pub fn root_primal(&self) -> f64 {
        self.solution.primal_obj
    }

    /// Upper bound on the root fidelity of recovery.
    pub fn root_dual(&self) -> f64 {
        self.solution.dual_obj
    }

    pub fn certificate(&self, tol: f64) -> Result<CertificateReport> {
        check_certificate(&self.problem, &self.solution.x, &self.solution.y, tol)
    }

    /// The Choi-type operator `τ_ABD` with `tr_B τ = 1_AD`.
    pub fn tau(&self) -> Operator {
        Operator::new(self.solution.x[1].hermitian_part(), self.inst.dims_abd.clone())
    }

    fn dual_operator(&self, k: usize, n: usize) -> ComplexMatrix {
        from_basis_coefficients(n, &self.solution.y[self.ranges[k].clone()]).hermitian_part()
    }

    /// Dual variables `(L_AB, R_AB, Q_AD)` with root value `tr[ρL] + tr Q`.
    pub fn dual_blocks(&self) -> (Operator, Operator, Operator) {
        let inst = &self.inst;
        let l = self.dual_operator(0, inst.v.cols());
        let l_ab = &(&inst.v * &l) * &inst.v.adjoint();
        (
            Operator::new(l_ab, inst.dims_ab.clone()),
            Operator::new(self.dual_operator(1, inst.dims_ab.total()), inst.dims_ab.clone()),
            Operator::new(self.dual_operator(2, inst.dims_ad.total()), inst.dims_ad.clone()),
        )
    }

    /// Alberti pair from the dual solution: `Q ← σ_AD^{-1/2} Q σ_AD^{-1/2}` on
    /// the support, extended to `ker σ_AD` (which `σ_AD` does not see) so that
    /// `Q ⊗ 1_B ⪰ R ⊗ 1_D` holds everywhere, then rescaled by `λ` so that both
    /// trace terms are equal.
    pub fn alberti_pair(&self) -> Result<AlbertiPair> {
        let inst = &self.inst;
        let (_, r_op, q_op) = self.dual_blocks();
        let y1 = self.dual_operator(0, inst.v.cols());
        let r = block_diagonal_r(&r_op.mat, &y1, &inst.v)?;
        let y3 = q_op.mat;
        let alpha = 4.0 * (&inst.rho_compressed() * &y1).trace().re;

        let k = inst.coeffs.len();
        let n_ad = inst.dims_ad.total();
        let nb = inst.dims_b.total();
        let f = &inst.f;
        let inv_sqrt = {
            let fi = ComplexMatrix::from_fn(n_ad, k, |i, j| f[(i, j)] / inst.coeffs[j]);
            &fi * &f.adjoint()
        };
        let q_s = (&(&inv_sqrt * &y3) * &inv_sqrt).hermitian_part();
        let beta_s = (&inst.sigma_ad * &q_s).trace().re;

        // feasibility is analysed in (A, D, B) order where ⊗1_B is a Kronecker factor
        let dims_adb = inst.dims_ad.concat(&inst.dims_b)?;
        let id_b = ComplexMatrix::identity(nb);
        let r_lift = embed_operator(&r, &inst.dims_ab, &dims_adb)?;
        let ps = kron(f, &id_b);
        let m_ss = (&(&ps.adjoint() * &(&kron(&q_s, &id_b) - &r_lift)) * &ps).hermitian_part();
        let lam = herm_eig(&m_ss)?.values[0];
        let eps = (-lam).max(0.0) + 1e-8 * beta_s.abs().max(1e-12);
        let proj_s = f * &f.adjoint();
        let mut q = &q_s + &proj_s.scale(eps);

        if k < n_ad {
            let u_k = support_isometry(&(&ComplexMatrix::identity(n_ad) - &proj_s).hermitian_part())?;
            let pk = kron(&u_k, &id_b);
            let t = &m_ss + &ComplexMatrix::identity(m_ss.rows()).scale(eps);
            let cross = &(&ps.adjoint() * &r_lift) * &pk;
            let m_kk = &(&pk.adjoint() * &r_lift) * &pk;
            let need = (&(&(&cross.adjoint() * &inverse_pd(&t)?) * &cross) + &m_kk).hermitian_part();
            let top = herm_eig(&need)?.values.last().copied().unwrap_or(0.0).max(0.0);
            let c = top * (1.0 + 1e-9) + 1e-9 * beta_s.abs().max(1e-12);
            q += &(&u_k * &u_k.adjoint()).scale(c);
        }

        // tr[σ_AD P_ker] = 0 exactly, so the objective only sees the support part
        let beta = beta_s + eps * inst.sigma_ad.trace().re;
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::InvalidState(format!(
                "dual solution yields a degenerate Alberti pair (tr ρR⁻¹ = {alpha}, tr σQ = {beta})"
            )));
        }
        let scale = (alpha / beta).sqrt();
        let r_f = Operator::new(r.scale(scale), inst.dims_ab.clone());
        let q_f = Operator::new(q.hermitian_part().scale(scale), inst.dims_ad.clone());
        let min_eigenvalue = alberti_feasibility(&r_f, &q_f)?;
        Ok(AlbertiPair {
            r_ab: r_f,
            q_ad: q_f,
            sigma_ad: Operator::new(inst.sigma_ad.clone(), inst.dims_ad.clone()),
            objective: alpha * beta,
            min_eigenvalue,
        })
    }

    /// Channel read off `τ`: with `σ_ACD = Σ_k s_k |f_k⟩|g_k⟩`,
    /// `Γ(|g_k⟩⟨g_l|) = ⟨f_k|τ|f_l⟩`. Inputs outside `supp σ_C` are measured and
    /// replaced by `ρ_B`.
    pub fn recovery_channel(&self) -> Result<ChoiMatrix> {
        let inst = &self.inst;
        let order: Vec<&str> = inst.dims_ad.labels().into_iter().chain(inst.dims_b.labels()).collect();
        let (t, _) = permute_factors(&self.tau().mat, &inst.dims_abd, &order)?;
        let nb = inst.dims_b.total();
        let k = inst.coeffs.len();
        let fb = kron(&inst.f, &ComplexMatrix::identity(nb));
        let tt = &(&fb.adjoint() * &t) * &fb;
        let g = &inst.g;
        let dc = g.rows();
        let complement = &ComplexMatrix::identity(dc) - &(g * &g.adjoint());
        let b_refs: Vec<&str> = inst.b.iter().map(String::as_str).collect();
        let rho_b = if b_refs.is_empty() {
            ComplexMatrix::identity(1)
        } else {
            inst.rho.marginal(&b_refs)?.mat().clone()
        };
        Ok(ChoiMatrix::from_action(
            inst.dims_c.clone(),
            inst.dims_b.clone(),
            |i, j| {
                let mut blk = ComplexMatrix::zeros(nb, nb);
                for k1 in 0..k {
                    for l1 in 0..k {
                        let w = g[(i, k1)].conj() * g[(j, l1)];
                        if w.norm() > 0.0 {
                            blk += &tt.block(k1 * nb, l1 * nb, nb, nb).scale_c(w);
                        }
                    }
                }
                let w = complement[(j, i)];
                if w.norm() > 1e-15 {
                    blk += &rho_b.scale_c(w);
                }
                blk
            },
        ))
    }

    /// `Γ(σ)` in the factor order of `ρ` as passed to the program.
    pub fn recovered_state(&self, channel: &ChoiMatrix) -> Result<LabeledState> {
        apply_choi(channel, &self.inst.sigma)?.permuted(&self.inst.dims_ab.labels())
    }

    /// Squares the root values, extracts and projects the channel, and
    /// recomputes its fidelity from scratch.
    pub fn result(&self) -> Result<RecoveryResult> {
        let p = self.root_primal().max(0.0).powi(2);
        let d = self.root_dual().max(0.0).powi(2);
        let (primal_lb, dual_ub) = (p.min(d), p.max(d));
        let recovery_channel = project_cptp(&self.recovery_channel()?)?;
        let channel_check = is_cptp(&recovery_channel, CPTP_TOL);
        let out = self.recovered_state(&recovery_channel)?;
        let achieved_fidelity = fidelity_matrices(self.inst.rho.mat(), out.mat())?;
        Ok(RecoveryResult {
            value: 0.5 * (primal_lb + dual_ub),
            primal_lb,
            dual_ub,
            gap: dual_ub - primal_lb,
            recovery_channel,
            alberti_pair: self.alberti_pair()?,
            achieved_fidelity,
            channel_check,
            certificate: self.certificate(CERTIFICATE_TOL)?,
        })
    }
}

fn clip_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(herm_eig(&m.hermitian_part())?.reconstruct_with(|v| v.max(0.0)))
}

/// Replaces the dual block `R` by `R' ⪯ R` that is block diagonal with respect
/// to `supp ρ = ran V`: `¼ V Y₁⁻¹ V†` on the support, which the slack condition
/// puts below `R`, plus the Schur complement of the remainder on the
/// orthogonal complement. Then `tr[ρ R'⁻¹] = 4 tr[ρ̃ Y₁]` without any
/// contribution from near-singular directions of `R` off the support.
fn block_diagonal_r(r: &ComplexMatrix, y1: &ComplexMatrix, v: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = r.rows();
    let on_support = (&(v * &inverse_pd(y1)?) * &v.adjoint()).scale(0.25);
    if v.cols() == n {
        return Ok(on_support.hermitian_part());
    }
    let u = support_isometry(&(&ComplexMatrix::identity(n) - &(v * &v.adjoint())).hermitian_part())?;
    let delta = clip_psd(&(r - &on_support))?;
    let d_ss = (&(&v.adjoint() * &delta) * v).hermitian_part();
    let d_us = &(&u.adjoint() * &delta) * v;
    let d_uu = &(&u.adjoint() * &delta) * &u;
    let schur = clip_psd(&(&d_uu - &(&(&d_us * &mat_fn(&d_ss, MatFn::Pinv)?) * &d_us.adjoint())))?;
    let reg = 1e-9 * norms(r).operator_norm.max(1.0);
    let off = &schur + &ComplexMatrix::identity(u.cols()).scale(reg);
    Ok((&on_support + &(&(&u * &off) * &u.adjoint())).hermitian_part())
}

/// `λ_min(Q ⊗ 1_B − R ⊗ 1_D)` on the union of the factors of `R` and `Q`.
pub fn alberti_feasibility(r: &Operator, q: &Operator) -> Result<f64> {
    let extra: Vec<&str> = q.dims.labels().into_iter().filter(|l| !r.dims.contains(l)).collect();
    let extra = q.dims.select(&extra)?;
    let joint = r.dims.concat(&extra)?;
    let m = &embed_operator(&q.mat, &q.dims, &joint)? - &embed_operator(&r.mat, &r.dims, &joint)?;
    Ok(herm_eig(&m.hermitian_part())?.values[0])
}

/// `tr[ρ R⁻¹]·tr[σ_AD Q]`, with `ρ` reordered to the factors of `R`.
pub fn alberti_objective(rho: &LabeledState, r: &Operator, sigma_ad: &Operator, q: &Operator) -> Result<f64> {
    alberti_objective_spectral(rho, &herm_eig(&r.mat)?, &r.dims, sigma_ad, &herm_eig(&q.mat)?, &q.dims)
}

/// Columns `√p_k |v_k⟩` over the numerical support of a PSD matrix.
fn psd_factor(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = herm_eig(&m.hermitian_part())?;
    let cut = RANK_TOL * eig.max_abs_value();
    let keep: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k] > cut).collect();
    Ok(ComplexMatrix::from_fn(m.rows(), keep.len(), |i, k| {
        eig.vectors[(i, keep[k])] * eig.values[keep[k]].sqrt()
    }))
}

/// `tr[W W† f(M)]` as a sum of nonnegative overlaps, so that huge
/// eigenvalues of `f(M)` on directions orthogonal to `W` cannot cancel.
fn spectral_trace(w: &ComplexMatrix, eig: &HermEig, f: impl Fn(f64) -> f64) -> f64 {
    let overlaps = &eig.vectors.adjoint() * w;
    (0..eig.values.len())
        .map(|k| {
            let weight: f64 = (0..w.cols()).map(|j| overlaps[(k, j)].norm_sqr()).sum();
            if weight == 0.0 {
                0.0
            } else {
                weight * f(eig.values[k])
            }
        })
        .sum()
}

fn tensor_eig(a: &HermEig, b: &HermEig) -> HermEig {
    let values = a
        .values
        .iter()
        .flat_map(|x| b.values.iter().map(move |y| x * y))
        .collect();
    HermEig {
        values,
        vectors: kron(&a.vectors, &b.vectors),
    }
}

/// As [`alberti_objective`] with the spectral decompositions of `R` and `Q`
/// supplied, e.g. as tensor products of the factor decompositions.
fn alberti_objective_spectral(
    rho: &LabeledState,
    eig_r: &HermEig,
    r_dims: &SystemDims,
    sigma_ad: &Operator,
    eig_q: &HermEig,
    q_dims: &SystemDims,
) -> Result<f64> {
    let rho_r = rho.permuted(&r_dims.labels())?;
    let (s, _) = permute_factors(&sigma_ad.mat, &sigma_ad.dims, &q_dims.labels())?;
    let alpha = spectral_trace(&psd_factor(rho_r.mat())?, eig_r, |v| {
        if v > 0.0 {
            1.0 / v
        } else {
            f64::INFINITY
        }
    });
    let beta = spectral_trace(&psd_factor(&s)?, eig_q, |v| v);
    Ok(alpha * beta)
}

/// FoR with the shared factors given explicitly.
pub fn fidelity_of_recovery_with(rho: &LabeledState, sigma: &LabeledState, shared: &[&str]) -> Result<RecoveryResult> {
    for_program(rho, sigma, shared)?.result()
}

/// FoR where the shared factors are the labels common to both states.
pub fn fidelity_of_recovery(rho: &LabeledState, sigma: &LabeledState) -> Result<RecoveryResult> {
    fidelity_of_recovery_with(rho, sigma, &intersection(rho, sigma))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrimalSolution {
    pub root_value: f64,
    pub tau: Operator,
}

pub fn for_primal(rho: &LabeledState, sigma: &LabeledState) -> Result<PrimalSolution> {
    let prog = for_program(rho, sigma, &intersection(rho, sigma))?;
    Ok(PrimalSolution {
        root_value: prog.root_primal(),
        tau: prog.tau(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualSolution {
    /// Squared dual objective.
    pub value: f64,
    pub l_ab: Operator,
    pub r_ab: Operator,
    pub q_ad: Operator,
    pub alberti: AlbertiPair,
}

pub fn for_dual(rho: &LabeledState, sigma: &LabeledState) -> Result<DualSolution> {
    let prog = for_program(rho, sigma, &intersection(rho, sigma))?;
    let (l_ab, r_ab, q_ad) = prog.dual_blocks();
    Ok(DualSolution {
        value: prog.root_dual().max(0.0).powi(2),
        l_ab,
        r_ab,
        q_ad,
        alberti: prog.alberti_pair()?,
    })
}

fn three_labels(rho: &LabeledState) -> Result<[&str; 3]> {
    match rho.dims().labels()[..] {
        [a, b, c] => Ok([a, b, c]),
        _ => Err(Error::InvalidArgument(format!(
            "expected a tripartite state, found factors {}",
            rho.dims()
        ))),
    }
}

/// `F(A;B|C) = F_{C→AC}(ρ_ABC‖ρ_BC)`: the channel acts on `C` of `ρ_BC`
/// and must rebuild `A` and `C`.
pub fn for_conditional_program(rho: &LabeledState) -> Result<ForProgram> {
    let [_, b, c] = three_labels(rho)?;
    for_program(rho, &rho.marginal(&[b, c])?, &[b])
}

pub fn for_conditional(rho: &LabeledState) -> Result<RecoveryResult> {
    for_conditional_program(rho)?.result()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplicativityReport {
    pub f1: f64,
    pub f2: f64,
    pub f12: f64,
    /// `f12 − f1·f2`
    pub defect: f64,
    /// Objective of the tensored Alberti pair on the product instance.
    pub witness_objective: f64,
    pub witness_min_eigenvalue: f64,
    pub witness_feasible: bool,
}

fn primed(taken: &[String]) -> impl Fn(&str) -> String + '_ {
    move |l: &str| {
        let mut out = l.to_string();
        while taken.iter().any(|t| *t == out) {
            out.push('\'');
        }
        out
    }
}

/// Solves the two factor instances and their tensor product, and checks that
/// the tensor product of the factor Alberti pairs is feasible for the product
/// instance with objective `f1·f2`.
pub fn multiplicativity_check(
    rho1: &LabeledState,
    sigma1: &LabeledState,
    rho2: &LabeledState,
    sigma2: &LabeledState,
) -> Result<MultiplicativityReport> {
    let taken: Vec<String> = rho1
        .dims()
        .labels()
        .into_iter()
        .chain(sigma1.dims().labels())
        .map(str::to_string)
        .collect();
    let rename = primed(&taken);
    let rho2 = rho2.relabel(&rename)?;
    let sigma2 = sigma2.relabel(&rename)?;
    let shared1 = intersection(rho1, sigma1);
    let shared2 = intersection(&rho2, &sigma2);
    let shared12: Vec<&str> = shared1.iter().chain(&shared2).copied().collect();
    let rho12 = rho1.tensor(&rho2)?;
    let sigma12 = sigma1.tensor(&sigma2)?;

    let inst12 = Instance::new(&rho12, &sigma12, &shared12)?;
    if inst12.real_size() > SIZE_CAP {
        return Err(Error::SizeLimit {
            size: inst12.real_size(),
            cap: SIZE_CAP,
        });
    }
    let r1 = fidelity_of_recovery_with(rho1, sigma1, &shared1)?;
    let r2 = fidelity_of_recovery_with(&rho2, &sigma2, &shared2)?;
    let r12 = fidelity_of_recovery_with(&rho12, &sigma12, &shared12)?;

    let p1 = &r1.alberti_pair;
    let pair1_labels: Vec<String> = p1
        .r_ab
        .dims
        .labels()
        .into_iter()
        .chain(p1.q_ad.dims.labels())
        .map(str::to_string)
        .collect();
    let rename_d = primed(&pair1_labels);
    let p2 = &r2.alberti_pair;
    let r_t = p1.r_ab.tensor(&p2.r_ab.relabel(&rename_d)?)?;
    let q_t = p1.q_ad.tensor(&p2.q_ad.relabel(&rename_d)?)?;
    let s_t = p1.sigma_ad.tensor(&p2.sigma_ad.relabel(&rename_d)?)?;
    let eig = |o: &Operator| herm_eig(&o.mat);
    let eig_r = tensor_eig(&eig(&p1.r_ab)?, &eig(&p2.r_ab)?);
    let eig_q = tensor_eig(&eig(&p1.q_ad)?, &eig(&p2.q_ad)?);
    let witness_objective = alberti_objective_spectral(&rho12, &eig_r, &r_t.dims, &s_t, &eig_q, &q_t.dims)?;
    let witness_min_eigenvalue = alberti_feasibility(&r_t, &q_t)?;
    let witness_feasible = witness_min_eigenvalue >= -1e-7 * feasibility_scale(&r_t, &q_t);
    Ok(MultiplicativityReport {
        f1: r1.value,
        f2: r2.value,
        f12: r12.value,
        defect: r12.value - r1.value * r2.value,
        witness_objective,
        witness_min_eigenvalue,
        witness_feasible,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrGap {
    pub cqmi_bits: f64,
    /// `−log₂` of the certified upper bound on the FoR.
    pub neg_log_for_bits: f64,
    /// `cqmi_bits − neg_log_for_bits`
    pub slack: f64,
}

pub fn fawzi_renner_gap_from(rho: &LabeledState, result: &RecoveryResult) -> Result<FrGap> {
    let cqmi_bits = cqmi(rho)?;
    let neg_log_for_bits = -result.dual_ub.log2();
    Ok(FrGap {
        cqmi_bits,
        neg_log_for_bits,
        slack: cqmi_bits - neg_log_for_bits,
    })
}

/// `I(A:B|C) ≥ −log₂ F(A;B|C)`, evaluated with the dual upper bound.
pub fn fawzi_renner_gap(rho: &LabeledState) -> Result<FrGap> {
    fawzi_renner_gap_from(rho, &for_conditional(rho)?)
}

/// Fidelity of `ρ_ABC` with the Petz reconstruction from `ρ_BC`, built on `ρ_AC` with anchor `C`.
pub fn petz_fidelity(rho: &LabeledState) -> Result<f64> {
    let [a, b, c] = three_labels(rho)?;
    let petz = petz_map(&rho.marginal(&[a, c])?, &[a], &[c])?;
    let out = apply_choi(&petz, &rho.marginal(&[b, c])?)?.permuted(&[a, b, c])?;
    fidelity(rho, &out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PetzGap {
    pub f_petz: f64,
    pub f_opt: f64,
    /// `f_petz / f_opt`, absent when `f_opt = 0`.
    pub ratio: Option<f64>,
}

pub fn petz_gap_from(rho: &LabeledState, result: &RecoveryResult) -> Result<PetzGap> {
    let f_petz = petz_fidelity(rho)?;
    let f_opt = result.value;
    Ok(PetzGap {
        f_petz,
        f_opt,
        ratio: (f_opt > 0.0).then(|| f_petz / f_opt),
    })
}

pub fn petz_gap(rho: &LabeledState) -> Result<PetzGap> {
    petz_gap_from(rho, &for_conditional(rho)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenyiIdentity {
    /// `−log₂ F(A;B|C)`
    pub lhs: f64,
    /// `D_{1/2}(ρ_ABC ‖ Γ*(ρ_BC))` for the extracted optimal channel.
    pub rhs: Divergence,
}

pub fn renyi_half_recovery_identity(rho: &LabeledState) -> Result<RenyiIdentity> {
    let prog = for_conditional_program(rho)?;
    let result = prog.result()?;
    let out = prog
        .recovered_state(&result.recovery_channel)?
        .permuted(&rho.dims().labels())?;
    Ok(RenyiIdentity {
        lhs: -result.value.log2(),
        rhs: renyi_half(rho, &out)?,
    })
}

/// `min tr Y_C` subject to `σ_AC ⪯ ψ_A⁺ ⊗ Y_C` on `supp ψ_A ⊗ C`, which equals
/// the FoR of a pure `ψ_AB`.
pub fn pure_state_value(psi: &LabeledState, sigma: &LabeledState, shared: &[&str]) -> Result<f64> {
    if psi.rank() != 1 {
        return Err(Error::InvalidArgument(format!(
            "expected a pure state, found rank {}",
            psi.rank()
        )));
    }
    let c: Vec<&str> = sigma
        .dims()
        .labels()
        .into_iter()
        .filter(|l| !shared.contains(l))
        .collect();
    let order: Vec<&str> = shared.iter().chain(&c).copied().collect();
    let sigma_p = sigma.permuted(&order)?;
    let psi_a = psi.marginal(shared)?.permuted(shared)?;
    let dc = sigma_p.dims().dim_of_all(&c)?;

    let va = support_isometry(psi_a.mat())?;
    let weight = inverse_pd(&(&(&va.adjoint() * psi_a.mat()) * &va))?;
    let lift = kron(&va, &ComplexMatrix::identity(dc));
    let sigma_t = (&(&lift.adjoint() * sigma_p.mat()) * &lift).hermitian_part();

    let mut p = SdpProblem::new(vec![sigma_t.rows()], Sense::Maximize);
    p.set_objective(0, &sigma_t);
    p.add_equality(&ComplexMatrix::identity(dc), |h| {
        vec![BlockTerm::from_dense(0, &kron(&weight, h))]
    });
    let sol = solve(&p, &SolverOptions::default())?.into_optimal()?;
    Ok(sol.dual_obj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::hmin_cond;
    use crate::states::{cq_markov, default_product, ghz3, max_entangled, random_state, Measure};

    fn qubits(labels: &[&str]) -> SystemDims {
        SystemDims::new(labels.iter().map(|l| (l.to_string(), 2)).collect()).unwrap()
    }

    fn check_result(r: &RecoveryResult) {
        assert!(r.certificate.ok, "{:?}", r.certificate);
        assert!(r.gap < 1e-6, "gap {}", r.gap);
        assert!(r.channel_check.ok, "{:?}", r.channel_check);
        assert!(
            r.achieved_fidelity >= r.primal_lb - 1e-6,
            "{} < {}",
            r.achieved_fidelity,
            r.primal_lb
        );
        assert!(r.achieved_fidelity <= r.dual_ub + 1e-7);
        assert!(r.alberti_pair.is_feasible(1e-7), "{}", r.alberti_pair.min_eigenvalue);
        assert!((r.alberti_pair.objective - r.value).abs() < 1e-6);
    }

    #[test]
    fn trivial_b_and_c_is_fidelity() {
        let rho = random_state(qubits(&["A"]), 2, Measure::HilbertSchmidt, 1).unwrap();
        let sigma = random_state(qubits(&["A"]), 2, Measure::HilbertSchmidt, 2).unwrap();
        let r = fidelity_of_recovery(&rho, &sigma).unwrap();
        check_result(&r);
        assert!((r.value - fidelity(&rho, &sigma).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn trivial_c_prepares_best_b() {
        // F(ρ_AB, σ_A ⊗ ω_B) maximized over ω
        let rho = random_state(qubits(&["A", "B"]), 4, Measure::HilbertSchmidt, 3).unwrap();
        let sigma = rho.marginal(&["A"]).unwrap();
        let r = fidelity_of_recovery(&rho, &sigma).unwrap();
        check_result(&r);
        let naive = fidelity(&rho, &sigma.tensor(&rho.marginal(&["B"]).unwrap()).unwrap()).unwrap();
        assert!(r.value >= naive - 1e-7);
        assert!(r.value <= 1.0 + 1e-7);
    }

    #[test]
    fn product_state_is_recoverable() {
        let r = for_conditional(&default_product()).unwrap();
        check_result(&r);
        assert!((r.value - 1.0).abs() < 1e-6, "{}", r.value);
    }

    #[test]
    fn cq_markov_chain_is_recoverable() {
        let r = for_conditional(&cq_markov()).unwrap();
        check_result(&r);
        assert!((r.value - 1.0).abs() < 1e-6, "{}", r.value);
    }

    #[test]
    fn ghz_is_partially_recoverable() {
        let rho = ghz3();
        let r = for_conditional(&rho).unwrap();
        check_result(&r);
        assert!(r.value > 0.5 - 1e-6 && r.value < 1.0, "{}", r.value);
        let gap = fawzi_renner_gap_from(&rho, &r).unwrap();
        assert!(gap.slack >= -1e-6, "{gap:?}");
    }

    #[test]
    fn primal_and_dual_agree_on_random_instances() {
        for seed in 0..4 {
            let rho = random_state(qubits(&["A", "B"]), 2, Measure::HilbertSchmidt, 10 + seed).unwrap();
            let sigma = random_state(qubits(&["A", "C"]), 2, Measure::HilbertSchmidt, 20 + seed).unwrap();
            let p = for_primal(&rho, &sigma).unwrap().root_value.powi(2);
            let d = for_dual(&rho, &sigma).unwrap().value;
            assert!((p - d).abs() <= 1e-5 * d.max(1e-12), "{p} vs {d}");
            check_result(&fidelity_of_recovery(&rho, &sigma).unwrap());
        }
    }

    #[test]
    fn maximally_entangled_matches_min_entropy() {
        let rho = max_entangled(2);
        let sigma = random_state(qubits(&["A", "C"]), 4, Measure::HilbertSchmidt, 5).unwrap();
        let r = fidelity_of_recovery(&rho, &sigma).unwrap();
        let h = hmin_cond(&sigma, &["A"], &["C"]).unwrap();
        let expected = 0.5 * 2f64.powf(-h.hmin_bits);
        assert!((r.value - expected).abs() < 1e-6, "{} vs {expected}", r.value);
    }

    #[test]
    fn pure_state_program_matches() {
        let psi = random_state(qubits(&["A", "B"]), 1, Measure::HilbertSchmidt, 6).unwrap();
        let sigma = random_state(qubits(&["A", "C"]), 3, Measure::HilbertSchmidt, 7).unwrap();
        let r = fidelity_of_recovery(&psi, &sigma).unwrap();
        let v = pure_state_value(&psi, &sigma, &["A"]).unwrap();
        assert!((r.value - v).abs() < 1e-6, "{} vs {v}", r.value);
    }

    #[test]
    fn rank_deficient_sigma_marginal() {
        // σ_AC pure, so σ_AD has a kernel
        let rho = random_state(qubits(&["A", "B"]), 3, Measure::HilbertSchmidt, 8).unwrap();
        let sigma = random_state(qubits(&["A", "C"]), 1, Measure::HilbertSchmidt, 9).unwrap();
        check_result(&fidelity_of_recovery(&rho, &sigma).unwrap());
    }

    #[test]
    fn multiplicativity_on_small_pair() {
        let rho1 = random_state(qubits(&["A", "B"]), 2, Measure::HilbertSchmidt, 30).unwrap();
        let sigma1 = random_state(qubits(&["A", "C"]), 1, Measure::HilbertSchmidt, 31).unwrap();
        let rho2 = random_state(qubits(&["A", "B"]), 2, Measure::HilbertSchmidt, 32).unwrap();
        let sigma2 = random_state(qubits(&["A", "C"]), 1, Measure::HilbertSchmidt, 33).unwrap();
        let m = multiplicativity_check(&rho1, &sigma1, &rho2, &sigma2).unwrap();
        assert!(m.defect.abs() < 1e-4, "{m:?}");
        assert!(m.witness_feasible, "{m:?}");
        assert!((m.witness_objective - m.f1 * m.f2).abs() < 1e-6, "{m:?}");
    }

    #[test]
    fn oversized_product_is_rejected() {
        let rho = random_state(qubits(&["A", "B"]), 4, Measure::HilbertSchmidt, 40).unwrap();
        let sigma = random_state(qubits(&["A", "C"]), 4, Measure::HilbertSchmidt, 41).unwrap();
        assert!(matches!(
            multiplicativity_check(&rho, &sigma, &rho, &sigma),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn petz_never_beats_optimum() {
        for rho in [
            ghz3(),
            random_state(qubits(&["A", "B", "C"]), 2, Measure::HilbertSchmidt, 50).unwrap(),
        ] {
            let g = petz_gap(&rho).unwrap();
            assert!(g.f_petz <= g.f_opt + 1e-6, "{g:?}");
        }
    }

    #[test]
    fn renyi_identity_on_ghz() {
        let id = renyi_half_recovery_identity(&ghz3()).unwrap();
        assert!((id.lhs - id.rhs.bits()).abs() < 1e-5, "{id:?}");
    }

    #[test]
    fn operator_round_trips_through_json() {
        let r = fidelity_of_recovery(
            &max_entangled(2),
            &max_entangled(2)
                .relabel(|l| if l == "B" { "C".into() } else { l.into() })
                .unwrap(),
        )
        .unwrap();
        let text = serde_json::to_string(&r.alberti_pair).unwrap();
        let back: AlbertiPair = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r.alberti_pair);
    }
}
