//! Quantum channels in Choi form.
//!
//! Convention: `J = Σ_ij |i⟩⟨j|_in ⊗ Γ(|i⟩⟨j|)_out`, input factor first.
//! Application transposes on the input side:
//! `Γ(X) = tr_in[(X^T ⊗ 1_out) J]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    embed_operator, herm_eig, kron, mat_fn, partial_trace, ComplexMatrix, MatFn, MatrixFile, SystemDims, C64, RANK_TOL,
};
use crate::states::LabeledState;

/// Trace-preservation tolerance used when validating solver-extracted channels.
pub const CPTP_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMatrix {
    mat: ComplexMatrix,
    in_dims: SystemDims,
    out_dims: SystemDims,
}

impl ChoiMatrix {
    /// Wraps a raw operator on `in ⊗ out`. Only shapes are checked; use [`is_cptp`] for validity.
    pub fn new(mat: ComplexMatrix, in_dims: SystemDims, out_dims: SystemDims) -> Result<Self> {
        let n = in_dims.total() * out_dims.total();
        if !mat.is_square() || mat.rows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: mat.rows(),
            });
        }
        Ok(Self { mat, in_dims, out_dims })
    }

    /// Builds the Choi matrix of `Γ` from its action on matrix units `|i⟩⟨j|`.
    pub fn from_action(
        in_dims: SystemDims,
        out_dims: SystemDims,
        mut action: impl FnMut(usize, usize) -> ComplexMatrix,
    ) -> Self {
        let (din, dout) = (in_dims.total(), out_dims.total());
        let mut mat = ComplexMatrix::zeros(din * dout, din * dout);
        for i in 0..din {
            for j in 0..din {
                let blk = action(i, j);
                mat.set_block(i * dout, j * dout, &blk);
            }
        }
        Self { mat, in_dims, out_dims }
    }

    pub fn mat(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn in_dims(&self) -> &SystemDims {
        &self.in_dims
    }

    pub fn out_dims(&self) -> &SystemDims {
        &self.out_dims
    }

    /// `Γ(|i⟩⟨j|)`
    pub fn action_block(&self, i: usize, j: usize) -> ComplexMatrix {
        let dout = self.out_dims.total();
        self.mat.block(i * dout, j * dout, dout, dout)
    }

    /// Factor list with `in:`/`out:` prefixes, so in and out may share labels.
    pub fn joint_dims(&self) -> SystemDims {
        self.in_dims
            .relabel(|l| format!("in:{l}"))
            .and_then(|i| i.concat(&self.out_dims.relabel(|l| format!("out:{l}")).unwrap()))
            .expect("prefixed labels are distinct")
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            mat: self.mat.scale(s),
            ..self.clone()
        }
    }

    pub fn to_file(&self) -> MatrixFile {
        let mut f = MatrixFile::from_matrix(&self.mat, &self.joint_dims(), Some("choi"));
        f.in_dims = Some(self.in_dims.factors().to_vec());
        f.out_dims = Some(self.out_dims.factors().to_vec());
        f
    }

    pub fn from_file(file: &MatrixFile) -> Result<Self> {
        let parse = |field: &str, message: String| Error::Parse {
            field: field.into(),
            message,
        };
        if file.kind.as_deref() != Some("choi") {
            return Err(parse("kind", format!("expected \"choi\", found {:?}", file.kind)));
        }
        let in_dims = SystemDims::new(file.in_dims.clone().ok_or_else(|| parse("in_dims", "missing".into()))?)
            .map_err(|e| parse("in_dims", e.to_string()))?;
        let out_dims = SystemDims::new(
            file.out_dims
                .clone()
                .ok_or_else(|| parse("out_dims", "missing".into()))?,
        )
        .map_err(|e| parse("out_dims", e.to_string()))?;
        let (m, _) = file.to_matrix()?;
        Self::new(m, in_dims, out_dims).map_err(|e| parse("dims", e.to_string()))
    }
}

impl Serialize for ChoiMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_file().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ChoiMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Self::from_file(&MatrixFile::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// `Σ_ij |ii⟩⟨jj|`, the Choi matrix of the identity channel on `dims`.
pub fn identity_channel(dims: &SystemDims) -> ChoiMatrix {
    let d = dims.total();
    ChoiMatrix::from_action(dims.clone(), dims.clone(), |i, j| {
        let mut e = ComplexMatrix::zeros(d, d);
        e[(i, j)] = C64::new(1.0, 0.0);
        e
    })
}

/// Identity channel on a single factor of dimension `d`, labeled `in` → `out`.
pub fn choi_of_identity(d: usize) -> ChoiMatrix {
    let mut c = identity_channel(&SystemDims::of(&[("in", d)]));
    c.out_dims = SystemDims::of(&[("out", d)]);
    c
}

/// Applies the channel to the factors of `input` named in `j.in_dims()`; every
/// other factor is a spectator. The output is on `spectators ⊗ out`.
pub fn apply_choi(j: &ChoiMatrix, input: &LabeledState) -> Result<LabeledState> {
    let in_labels = j.in_dims.labels();
    for (l, d) in j.in_dims.factors() {
        let found = input.dims().dim_of(l)?;
        if found != *d {
            return Err(Error::DimensionMismatch { expected: *d, found });
        }
    }
    let spect = input.dims().without(&in_labels)?;
    let order: Vec<&str> = spect.labels().into_iter().chain(in_labels.iter().copied()).collect();
    let x = input.permuted(&order)?;
    let (ds, din, dout) = (spect.total(), j.in_dims.total(), j.out_dims.total());
    let out_dims = spect.concat(&j.out_dims)?;
    let mut out = ComplexMatrix::zeros(ds * dout, ds * dout);
    for i in 0..din {
        for k in 0..din {
            let gamma = j.action_block(i, k);
            if gamma.max_abs() == 0.0 {
                continue;
            }
            for s in 0..ds {
                for t in 0..ds {
                    let xv = x.mat()[(s * din + i, t * din + k)];
                    if xv == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for a in 0..dout {
                        for b in 0..dout {
                            out[(s * dout + a, t * dout + b)] += xv * gamma[(a, b)];
                        }
                    }
                }
            }
        }
    }
    let tr = out.trace().re;
    if (tr - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidState(format!(
            "channel output has trace {tr}; map is not trace preserving"
        )));
    }
    LabeledState::from_unnormalized(out, out_dims)
}

/// Clips negative eigenvalues and conjugates by `(tr_out J)^{-1/2} ⊗ 1` so the
/// result is exactly CPTP. Meant for channels recovered from numerical solutions.
pub fn project_cptp(j: &ChoiMatrix) -> Result<ChoiMatrix> {
    let eig = herm_eig(&j.mat.hermitian_part())?;
    let psd = eig.reconstruct_with(|v| v.max(0.0));
    let joint = j.joint_dims();
    let out_labels: Vec<String> = j.out_dims.labels().iter().map(|l| format!("out:{l}")).collect();
    let out_refs: Vec<&str> = out_labels.iter().map(String::as_str).collect();
    let t = partial_trace(&psd, &joint, &out_refs)?;
    let fix = kron(
        &mat_fn(&t, MatFn::PinvSqrt)?,
        &ComplexMatrix::identity(j.out_dims.total()),
    );
    let mat = (&(&fix * &psd) * &fix).hermitian_part();
    ChoiMatrix::new(mat, j.in_dims.clone(), j.out_dims.clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CptpReport {
    pub ok: bool,
    /// Magnitude of the most negative eigenvalue, zero if PSD.
    pub psd_violation: f64,
    /// Frobenius norm of `tr_out J − 1_in`.
    pub tp_violation: f64,
}

pub fn is_cptp(j: &ChoiMatrix, tol: f64) -> CptpReport {
    let psd_violation = herm_eig(&j.mat.hermitian_part())
        .map(|e| (-e.values[0]).max(0.0))
        .unwrap_or(f64::INFINITY);
    let joint = j.joint_dims();
    let out_labels: Vec<String> = j.out_dims.labels().iter().map(|l| format!("out:{l}")).collect();
    let out_refs: Vec<&str> = out_labels.iter().map(String::as_str).collect();
    let tp_violation = partial_trace(&j.mat, &joint, &out_refs)
        .map(|m| (&m - &ComplexMatrix::identity(j.in_dims.total())).frobenius_norm())
        .unwrap_or(f64::INFINITY);
    CptpReport {
        ok: psd_violation <= tol && tp_violation <= tol,
        psd_violation,
        tp_violation,
    }
}

/// Petz map `X ↦ ρ^{1/2} (1 ⊗ ρ_anchor^{-1/2} X ρ_anchor^{-1/2}) ρ^{1/2}` from
/// `anchor` to all factors of `rho`. Inputs outside `supp(ρ_anchor)` are
/// measured and replaced by `rho` itself, which keeps the map CPTP.
pub fn petz_map(rho: &LabeledState, recover: &[&str], anchor: &[&str]) -> Result<ChoiMatrix> {
    let labels = rho.dims().labels();
    if recover.iter().chain(anchor).any(|l| !labels.contains(l))
        || recover.len() + anchor.len() != labels.len()
        || recover.iter().any(|l| anchor.contains(l))
    {
        return Err(Error::InvalidArgument(format!(
            "recover {recover:?} and anchor {anchor:?} must partition {labels:?}"
        )));
    }
    let anchor_state = rho.marginal(anchor)?;
    let anchor_dims = anchor_state.dims().clone();
    let inv_sqrt = mat_fn(anchor_state.mat(), MatFn::PinvSqrt)?;
    let sqrt_rho = mat_fn(rho.mat(), MatFn::Sqrt)?;
    let eig = herm_eig(anchor_state.mat())?;
    let cut = RANK_TOL * eig.max_abs_value();
    let complement = eig.reconstruct_with(|v| if v > cut { 0.0 } else { 1.0 });
    let d = anchor_dims.total();
    let mut failure = None;
    let choi = ChoiMatrix::from_action(anchor_dims.clone(), rho.dims().clone(), |i, j| {
        let u = ComplexMatrix::from_fn(d, d, |a, b| inv_sqrt[(a, i)] * inv_sqrt[(j, b)]);
        let lifted = match embed_operator(&u, &anchor_dims, rho.dims()) {
            Ok(m) => m,
            Err(e) => {
                failure.get_or_insert(e);
                return ComplexMatrix::zeros(rho.dims().total(), rho.dims().total());
            }
        };
        let mut blk = &(&sqrt_rho * &lifted) * &sqrt_rho;
        let w = complement[(j, i)];
        if w.norm() > 0.0 {
            blk += &rho.mat().scale_c(w);
        }
        blk
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(choi),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{cq_markov, instance_rng, random_state, random_state_with, Measure};

    fn qubits(labels: &[&str]) -> SystemDims {
        SystemDims::new(labels.iter().map(|l| (l.to_string(), 2)).collect()).unwrap()
    }

    /// Kraus operators from the Choi eigendecomposition: `K_k[a, i] = √λ_k v_k[(i, a)]`.
    fn kraus(j: &ChoiMatrix) -> Vec<ComplexMatrix> {
        let (din, dout) = (j.in_dims().total(), j.out_dims().total());
        let e = herm_eig(j.mat()).unwrap();
        e.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 1e-12)
            .map(|(k, &v)| ComplexMatrix::from_fn(dout, din, |a, i| e.vectors[(i * dout + a, k)] * v.sqrt()))
            .collect()
    }

    fn random_channel(seed: u64, din: usize, dout: usize) -> ChoiMatrix {
        // Stinespring: random isometry in → out ⊗ env, env dimension 2.
        let mut rng = instance_rng(seed, 99);
        let u = crate::states::haar_unitary(&mut rng, dout * 2);
        let v = u.block(0, 0, dout * 2, din);
        let ind = SystemDims::of(&[("C", din)]);
        let outd = SystemDims::of(&[("B", dout)]);
        ChoiMatrix::from_action(ind, outd, |i, j| {
            let mut acc = ComplexMatrix::zeros(dout, dout);
            for a in 0..dout {
                for b in 0..dout {
                    let mut s = C64::new(0.0, 0.0);
                    for e in 0..2 {
                        s += v[(a * 2 + e, i)] * v[(b * 2 + e, j)].conj();
                    }
                    acc[(a, b)] = s;
                }
            }
            acc
        })
    }

    #[test]
    fn identity_choi_basics() {
        let j1 = choi_of_identity(1);
        assert_eq!(j1.mat().rows(), 1);
        assert_eq!(j1.mat()[(0, 0)], C64::new(1.0, 0.0));
        let j2 = choi_of_identity(2);
        assert!((j2.mat().trace().re - 2.0).abs() < 1e-15);
        assert_eq!(herm_eig(j2.mat()).unwrap().rank(), 1);
        let r = is_cptp(&j2, 1e-12);
        assert!(r.ok && r.psd_violation < 1e-12 && r.tp_violation == 0.0);
    }

    #[test]
    fn identity_channel_round_trip() {
        for seed in 0..5 {
            let rho = random_state(qubits(&["A", "C"]), 4, Measure::HilbertSchmidt, seed).unwrap();
            let id = identity_channel(&qubits(&["C"]));
            let out = apply_choi(&id, &rho).unwrap();
            assert!(out.mat().approx_eq(rho.mat(), 1e-14));
        }
    }

    #[test]
    fn depolarizing_outputs_marginal_times_mixed() {
        let rho = random_state(qubits(&["A", "C"]), 4, Measure::HilbertSchmidt, 3).unwrap();
        let dep = ChoiMatrix::new(ComplexMatrix::identity(4).scale(0.5), qubits(&["C"]), qubits(&["B"])).unwrap();
        assert!(is_cptp(&dep, 1e-12).ok);
        let out = apply_choi(&dep, &rho).unwrap();
        let expect = kron(
            rho.marginal(&["A"]).unwrap().mat(),
            &ComplexMatrix::identity(2).scale(0.5),
        );
        assert!(out.mat().approx_eq(&expect, 1e-14));
        assert_eq!(out.dims().labels(), vec!["A", "B"]);
    }

    #[test]
    fn random_channel_matches_kraus_oracle() {
        for seed in 0..5 {
            let j = random_channel(seed, 2, 3);
            assert!(is_cptp(&j, 1e-10).ok);
            let rho = random_state(qubits(&["A", "C"]), 3, Measure::Bures, seed + 10).unwrap();
            let out = apply_choi(&j, &rho).unwrap();
            let mut expect = ComplexMatrix::zeros(6, 6);
            for k in kraus(&j) {
                let kk = kron(&ComplexMatrix::identity(2), &k);
                expect += &(&(&kk * rho.mat()) * &kk.adjoint());
            }
            assert!(out.mat().approx_eq(&expect, 1e-9));
            assert!((out.trace() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cptp_violations() {
        let j = choi_of_identity(2).scaled(1.1);
        let r = is_cptp(&j, 1e-7);
        assert!(!r.ok);
        assert!((r.tp_violation - 0.1 * 2f64.sqrt()).abs() < 1e-12);

        // transpose map: Choi is the swap operator, eigenvalue -1
        let swap = ChoiMatrix::from_action(qubits(&["in"]), qubits(&["out"]), |i, j| {
            let mut e = ComplexMatrix::zeros(2, 2);
            e[(j, i)] = C64::new(1.0, 0.0);
            e
        });
        let r = is_cptp(&swap, 1e-7);
        assert!(!r.ok);
        assert!((r.psd_violation - 1.0).abs() < 1e-12);
        assert!(r.tp_violation < 1e-15);
    }

    #[test]
    fn petz_product_case_factorizes() {
        let ra = random_state(qubits(&["A"]), 2, Measure::HilbertSchmidt, 1).unwrap();
        let rc = random_state(qubits(&["C"]), 2, Measure::HilbertSchmidt, 2).unwrap();
        let rho_ac = ra.tensor(&rc).unwrap();
        let petz = petz_map(&rho_ac, &["A"], &["C"]).unwrap();
        assert!(is_cptp(&petz, 1e-9).ok);
        let sigma = random_state(qubits(&["B", "C"]), 4, Measure::HilbertSchmidt, 3).unwrap();
        let out = apply_choi(&petz, &sigma).unwrap();
        // Γ(X) = ρ_A ⊗ X
        let expect = kron(ra.mat(), sigma.mat());
        let (ex, _) = crate::linalg::permute_factors(&expect, &qubits(&["A", "B", "C"]), &["B", "A", "C"]).unwrap();
        assert!(out.mat().approx_eq(&ex, 1e-10));
    }

    #[test]
    fn petz_recovers_its_marginal() {
        for seed in 0..10 {
            let rank = 1 + seed as usize % 4;
            let rho = random_state(qubits(&["A", "C"]), rank, Measure::HilbertSchmidt, seed).unwrap();
            let petz = petz_map(&rho, &["A"], &["C"]).unwrap();
            let r = is_cptp(&petz, 1e-8);
            assert!(r.ok, "{r:?}");
            let out = apply_choi(&petz, &rho.marginal(&["C"]).unwrap()).unwrap();
            assert!(out.mat().approx_eq(rho.mat(), 1e-8));
        }
    }

    #[test]
    fn petz_singular_anchor_is_cptp() {
        let dims = SystemDims::of(&[("A", 2), ("C", 3)]);
        let rho = random_state_with(&mut instance_rng(5, 0), dims.clone(), 1, Measure::HaarPure).unwrap();
        let petz = petz_map(&rho, &["A"], &["C"]).unwrap();
        assert!(is_cptp(&petz, 1e-8).ok);
        let out = apply_choi(&petz, &rho.marginal(&["C"]).unwrap()).unwrap();
        assert!(out.mat().approx_eq(rho.mat(), 1e-8));
    }

    #[test]
    fn petz_on_markov_chain_is_exact() {
        let rho = cq_markov();
        let rho_ac = rho.marginal(&["A", "C"]).unwrap();
        let petz = petz_map(&rho_ac, &["A"], &["C"]).unwrap();
        let out = apply_choi(&petz, &rho.marginal(&["B", "C"]).unwrap()).unwrap();
        let out = out.permuted(&["A", "B", "C"]).unwrap();
        assert!(out.mat().approx_eq(rho.mat(), 1e-10));
    }

    #[test]
    fn petz_rejects_bad_partition() {
        let rho = random_state(qubits(&["A", "C"]), 2, Measure::HilbertSchmidt, 0).unwrap();
        assert!(petz_map(&rho, &["A"], &["A"]).is_err());
        assert!(petz_map(&rho, &["A"], &["X"]).is_err());
    }

    #[test]
    fn choi_file_round_trip() {
        let j = random_channel(7, 2, 2);
        let text = serde_json::to_string(&j.to_file()).unwrap();
        let back = ChoiMatrix::from_file(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, j);
    }
}
