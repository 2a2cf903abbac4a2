//! Density matrices with factor structure, purification, Schmidt
//! decomposition, and the random and named states used as experiment inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, herm_eig, kron, marginal, permute_factors, ComplexMatrix, MatrixFile, SystemDims, C64, HERM_TOL, PSD_TOL,
    RANK_TOL,
};

/// Name recorded in reports for the generator behind every random draw.
pub const RNG_NAME: &str = "ChaCha20Rng(rand_chacha 0.9, seed_from_u64, stream=instance)";

const TRACE_TOL: f64 = 1e-9;

/// A density matrix together with its tensor-factor labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledState {
    mat: ComplexMatrix,
    dims: SystemDims,
}

impl LabeledState {
    /// Validates Hermiticity, positivity and unit trace; stores the Hermitian part.
    pub fn new(mat: ComplexMatrix, dims: SystemDims) -> Result<Self> {
        if !mat.is_square() || mat.rows() != dims.total() {
            return Err(Error::DimensionMismatch {
                expected: dims.total(),
                found: mat.rows(),
            });
        }
        let scale = mat.frobenius_norm();
        let defect = mat.hermiticity_defect();
        if defect > HERM_TOL * scale.max(1.0) {
            return Err(Error::NotHermitian { deviation: defect });
        }
        let mat = mat.hermitian_part();
        let tr = mat.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let min = linalg::min_eigenvalue(&mat)?;
        if min < -PSD_TOL * scale.max(1.0) {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        Ok(Self { mat, dims })
    }

    /// Normalizes a PSD operator to unit trace before validating.
    pub fn from_unnormalized(mat: ComplexMatrix, dims: SystemDims) -> Result<Self> {
        let tr = mat.trace().re;
        if tr <= 0.0 || !tr.is_finite() {
            return Err(Error::InvalidState(format!("cannot normalize trace {tr}")));
        }
        Self::new(mat.scale(1.0 / tr), dims)
    }

    pub fn maximally_mixed(dims: SystemDims) -> Self {
        let d = dims.total();
        Self {
            mat: ComplexMatrix::identity(d).scale(1.0 / d as f64),
            dims,
        }
    }

    pub fn mat(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn dims(&self) -> &SystemDims {
        &self.dims
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.mat.trace_product(&self.mat).re
    }

    pub fn rank(&self) -> usize {
        herm_eig(&self.mat).map(|e| e.rank()).unwrap_or(0)
    }

    /// Reduced state on `keep`, factors in their original order.
    pub fn marginal(&self, keep: &[&str]) -> Result<Self> {
        let (m, d) = marginal(&self.mat, &self.dims, keep)?;
        Ok(Self {
            mat: m.hermitian_part(),
            dims: d,
        })
    }

    pub fn permuted(&self, order: &[&str]) -> Result<Self> {
        let (m, d) = permute_factors(&self.mat, &self.dims, order)?;
        Ok(Self { mat: m, dims: d })
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let dims = self.dims.concat(&other.dims)?;
        Ok(Self {
            mat: kron(&self.mat, &other.mat),
            dims,
        })
    }

    pub fn relabel(&self, f: impl Fn(&str) -> String) -> Result<Self> {
        Ok(Self {
            mat: self.mat.clone(),
            dims: self.dims.relabel(f)?,
        })
    }

    pub fn to_file(&self) -> MatrixFile {
        MatrixFile::from_matrix(&self.mat, &self.dims, Some("state"))
    }

    pub fn from_file(file: &MatrixFile) -> Result<Self> {
        if let Some(kind) = &file.kind {
            if kind != "state" {
                return Err(Error::Parse {
                    field: "kind".into(),
                    message: format!("expected \"state\", found {kind:?}"),
                });
            }
        }
        let (m, d) = file.to_matrix()?;
        Self::new(m, d).map_err(|e| Error::Parse {
            field: "re/im".into(),
            message: e.to_string(),
        })
    }
}

impl Serialize for LabeledState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_file().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabeledState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Self::from_file(&MatrixFile::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// A normalized state vector with factor labels.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    vec: Vec<C64>,
    dims: SystemDims,
}

impl PureState {
    pub fn new(vec: Vec<C64>, dims: SystemDims) -> Result<Self> {
        if vec.len() != dims.total() {
            return Err(Error::DimensionMismatch {
                expected: dims.total(),
                found: vec.len(),
            });
        }
        let norm: f64 = vec.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("vector norm is {norm}")));
        }
        Ok(Self { vec, dims })
    }

    pub fn vec(&self) -> &[C64] {
        &self.vec
    }

    pub fn dims(&self) -> &SystemDims {
        &self.dims
    }

    pub fn density(&self) -> LabeledState {
        LabeledState {
            mat: ComplexMatrix::outer(&self.vec),
            dims: self.dims.clone(),
        }
    }
}

/// Minimal purification `Σ_i √λ_i |e_i⟩ ⊗ |i⟩`; the new factor has dimension `rank(s)`.
pub fn purify(s: &LabeledState, new_label: &str) -> Result<PureState> {
    if s.dims.contains(new_label) {
        return Err(Error::DuplicateLabel(new_label.to_string()));
    }
    let eig = herm_eig(&s.mat)?;
    let cut = RANK_TOL * eig.max_abs_value();
    let support: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k] > cut).collect();
    let r = support.len();
    let d = s.dims.total();
    let mut vec = vec![C64::new(0.0, 0.0); d * r];
    for (i, &k) in support.iter().enumerate() {
        let amp = eig.values[k].sqrt();
        for x in 0..d {
            vec[x * r + i] = eig.vectors[(x, k)] * amp;
        }
    }
    let norm: f64 = vec.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut vec {
        *z /= norm;
    }
    let mut factors = s.dims.factors().to_vec();
    factors.push((new_label.to_string(), r));
    PureState::new(vec, SystemDims::new(factors)?)
}

#[derive(Clone, Debug)]
pub struct Schmidt {
    /// Descending, strictly positive.
    pub coefficients: Vec<f64>,
    /// Columns are the left Schmidt vectors.
    pub left: ComplexMatrix,
    pub right: ComplexMatrix,
    pub left_dims: SystemDims,
    pub right_dims: SystemDims,
}

impl Schmidt {
    /// `Σ_k c_k |l_k⟩ ⊗ |r_k⟩` in (left, right) factor order.
    pub fn reconstruct(&self) -> Vec<C64> {
        let (dl, dr) = (self.left.rows(), self.right.rows());
        let mut v = vec![C64::new(0.0, 0.0); dl * dr];
        for (k, &c) in self.coefficients.iter().enumerate() {
            for i in 0..dl {
                for j in 0..dr {
                    v[i * dr + j] += self.left[(i, k)] * self.right[(j, k)] * c;
                }
            }
        }
        v
    }
}

/// Schmidt decomposition across `left | rest`.
pub fn schmidt(p: &PureState, left: &[&str]) -> Result<Schmidt> {
    let labels = p.dims.labels();
    if left.is_empty() || left.len() >= labels.len() {
        return Err(Error::InvalidArgument(
            "bipartition must have two nonempty sides".into(),
        ));
    }
    for l in left {
        p.dims.dim_of(l)?;
    }
    let right: Vec<&str> = labels.iter().copied().filter(|l| !left.contains(l)).collect();
    let order: Vec<&str> = left.iter().chain(right.iter()).copied().collect();
    let (v, _) = linalg::permute_vector(&p.vec, &p.dims, &order)?;
    let left_dims = p.dims.reordered(&order)?.select(left)?.reordered(left)?;
    let right_dims = p.dims.select(&right)?;
    let (dl, dr) = (left_dims.total(), right_dims.total());
    // nalgebra's complex SVD loses accuracy in the singular values when vectors
    // are requested, so work from the left reduced matrix instead.
    let m = ComplexMatrix::from_fn(dl, dr, |i, j| v[i * dr + j]);
    let eig = linalg::herm_eig(&(&m * &m.adjoint()))?;
    let mut rows: Vec<(f64, usize, ComplexMatrix)> = (0..dl)
        .map(|k| {
            let row = ComplexMatrix::from_fn(1, dr, |_, j| {
                (0..dl).map(|i| eig.vectors[(i, k)].conj() * m[(i, j)]).sum()
            });
            (row.frobenius_norm(), k, row)
        })
        .collect();
    rows.sort_by(|a, b| b.0.total_cmp(&a.0));
    let smax = rows.first().map_or(0.0, |r| r.0);
    rows.retain(|r| r.0 > 1e-13 * smax.max(1e-300));
    let coefficients = rows.iter().map(|r| r.0).collect();
    let left_m = ComplexMatrix::from_fn(dl, rows.len(), |i, k| eig.vectors[(i, rows[k].1)]);
    let right_m = ComplexMatrix::from_fn(dr, rows.len(), |j, k| rows[k].2[(0, j)] / rows[k].0);
    Ok(Schmidt {
        coefficients,
        left: left_m,
        right: right_m,
        left_dims,
        right_dims,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    HaarPure,
    HilbertSchmidt,
    Bures,
}

/// Deterministic generator for `(seed, stream)`.
pub fn instance_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn ginibre(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-random unitary: QR of a Ginibre matrix with the phases of `R`'s diagonal removed.
pub fn haar_unitary(rng: &mut impl Rng, d: usize) -> ComplexMatrix {
    let g = ginibre(rng, d, d).to_na();
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = ComplexMatrix::from_na(&q);
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..d {
            u[(i, j)] *= phase;
        }
    }
    u
}

pub fn random_pure_with(rng: &mut impl Rng, dims: SystemDims) -> PureState {
    let d = dims.total();
    let mut v: Vec<C64> = (0..d).map(|_| gaussian(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut v {
        *z /= norm;
    }
    PureState { vec: v, dims }
}

pub fn random_state_with(rng: &mut impl Rng, dims: SystemDims, rank: usize, measure: Measure) -> Result<LabeledState> {
    let d = dims.total();
    if rank == 0 || rank > d {
        return Err(Error::InvalidArgument(format!("rank {rank} out of range 1..={d}")));
    }
    match measure {
        Measure::HaarPure => {
            if rank != 1 {
                return Err(Error::InvalidArgument("haar_pure requires rank 1".into()));
            }
            Ok(random_pure_with(rng, dims).density())
        }
        Measure::HilbertSchmidt => {
            let g = ginibre(rng, d, rank);
            LabeledState::from_unnormalized(&g * &g.adjoint(), dims)
        }
        Measure::Bures => {
            let u = haar_unitary(rng, d);
            let g = ginibre(rng, d, rank);
            let a = &(&ComplexMatrix::identity(d) + &u) * &g;
            LabeledState::from_unnormalized(&a * &a.adjoint(), dims)
        }
    }
}

pub fn random_state(dims: SystemDims, rank: usize, measure: Measure, seed: u64) -> Result<LabeledState> {
    random_state_with(&mut ChaCha20Rng::seed_from_u64(seed), dims, rank, measure)
}

/// `Σ_i |ii⟩ / √d` on factors `A`, `B`.
pub fn max_entangled(d: usize) -> LabeledState {
    let amp = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    let mut v = vec![C64::new(0.0, 0.0); d * d];
    for i in 0..d {
        v[i * d + i] = amp;
    }
    PureState {
        vec: v,
        dims: SystemDims::of(&[("A", d), ("B", d)]),
    }
    .density()
}

/// `(|000⟩ + |111⟩)/√2` on `A`, `B`, `C`.
pub fn ghz3() -> LabeledState {
    let amp = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut v = vec![C64::new(0.0, 0.0); 8];
    v[0] = amp;
    v[7] = amp;
    PureState {
        vec: v,
        dims: SystemDims::of(&[("A", 2), ("B", 2), ("C", 2)]),
    }
    .density()
}

fn qubit(a: f64, off: C64) -> ComplexMatrix {
    ComplexMatrix::new(2, 2, vec![C64::new(a, 0.0), off, off.conj(), C64::new(1.0 - a, 0.0)]).unwrap()
}

/// Tensor product of single-factor states labeled `A`, `B`, `C`.
pub fn product(rho_a: &ComplexMatrix, rho_b: &ComplexMatrix, rho_c: &ComplexMatrix) -> Result<LabeledState> {
    let dims = SystemDims::of(&[("A", rho_a.rows()), ("B", rho_b.rows()), ("C", rho_c.rows())]);
    LabeledState::new(kron(&kron(rho_a, rho_b), rho_c), dims)
}

/// Fixed full-rank qubit product state.
pub fn default_product() -> LabeledState {
    product(
        &qubit(0.7, C64::new(0.2, -0.1)),
        &qubit(0.6, C64::new(0.0, 0.1)),
        &qubit(0.8, C64::new(0.05, 0.0)),
    )
    .expect("fixed product state is valid")
}

/// `Σ_c p_c ρ_A^c ⊗ ρ_B^c ⊗ |c⟩⟨c|`, a Markov chain `A − C − B`.
pub fn cq_markov_from(p: &[f64], rho_a: &[ComplexMatrix], rho_b: &[ComplexMatrix]) -> Result<LabeledState> {
    let dc = p.len();
    if rho_a.len() != dc || rho_b.len() != dc {
        return Err(Error::InvalidArgument(
            "one conditional state per classical value required".into(),
        ));
    }
    let (da, db) = (rho_a[0].rows(), rho_b[0].rows());
    let mut total = ComplexMatrix::zeros(da * db * dc, da * db * dc);
    for c in 0..dc {
        let mut proj = ComplexMatrix::zeros(dc, dc);
        proj[(c, c)] = C64::new(1.0, 0.0);
        total += &kron(&kron(&rho_a[c], &rho_b[c]), &proj).scale(p[c]);
    }
    LabeledState::new(total, SystemDims::of(&[("A", da), ("B", db), ("C", dc)]))
}

/// Fixed qubit instance of [`cq_markov_from`] with non-commuting conditionals.
pub fn cq_markov() -> LabeledState {
    cq_markov_from(
        &[0.6, 0.4],
        &[qubit(0.9, C64::new(0.1, 0.0)), qubit(0.3, C64::new(0.0, 0.2))],
        &[qubit(0.5, C64::new(0.3, 0.0)), qubit(0.8, C64::new(-0.1, 0.2))],
    )
    .expect("fixed Markov chain is valid")
}

/// Random qubit Markov chain with a classical conditioning system of dimension `dc`.
pub fn random_cq_markov_with(rng: &mut impl Rng, dc: usize) -> Result<LabeledState> {
    let mut p: Vec<f64> = (0..dc).map(|_| rng.random_range(0.1..1.0)).collect();
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= sum);
    let mut a = Vec::with_capacity(dc);
    let mut b = Vec::with_capacity(dc);
    for _ in 0..dc {
        a.push(random_state_with(rng, SystemDims::of(&[("A", 2)]), 2, Measure::HilbertSchmidt)?.mat);
        b.push(random_state_with(rng, SystemDims::of(&[("B", 2)]), 2, Measure::HilbertSchmidt)?.mat);
    }
    cq_markov_from(&p, &a, &b)
}

/// Canonical fixtures by name: `ghz3`, `max_entangled` / `max_entangled:<d>`, `product`, `cq_markov`.
pub fn named_state(name: &str) -> Result<LabeledState> {
    match name {
        "ghz3" => Ok(ghz3()),
        "product" => Ok(default_product()),
        "cq_markov" => Ok(cq_markov()),
        "max_entangled" => Ok(max_entangled(2)),
        other => {
            if let Some(d) = other.strip_prefix("max_entangled:") {
                let d: usize = d
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad dimension in `{other}`")))?;
                if d == 0 {
                    return Err(Error::InvalidArgument("dimension must be positive".into()));
                }
                return Ok(max_entangled(d));
            }
            Err(Error::UnknownName(other.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::partial_trace;

    fn qubits(labels: &[&str]) -> SystemDims {
        SystemDims::new(labels.iter().map(|l| (l.to_string(), 2)).collect()).unwrap()
    }

    #[test]
    fn purify_maximally_mixed_qubit() {
        let s = LabeledState::maximally_mixed(qubits(&["A"]));
        let p = purify(&s, "R").unwrap();
        assert_eq!(p.dims().dim_of("R").unwrap(), 2);
        let back = partial_trace(p.density().mat(), p.dims(), &["R"]).unwrap();
        assert!(back.approx_eq(s.mat(), 1e-12));
        let sch = schmidt(&p, &["A"]).unwrap();
        for c in sch.coefficients {
            assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        }
    }

    #[test]
    fn purify_pure_state_has_trivial_purifier() {
        let s = random_state(qubits(&["A", "B"]), 1, Measure::HaarPure, 3).unwrap();
        let p = purify(&s, "R").unwrap();
        assert_eq!(p.dims().dim_of("R").unwrap(), 1);
    }

    #[test]
    fn purify_rank_three() {
        let s = random_state(SystemDims::of(&[("A", 4)]), 3, Measure::HilbertSchmidt, 11).unwrap();
        let p = purify(&s, "D").unwrap();
        assert_eq!(p.dims().dim_of("D").unwrap(), 3);
        let back = partial_trace(p.density().mat(), p.dims(), &["D"]).unwrap();
        assert!(back.approx_eq(s.mat(), 1e-9));
    }

    #[test]
    fn purify_rejects_collision() {
        let s = LabeledState::maximally_mixed(qubits(&["A"]));
        assert!(matches!(purify(&s, "A"), Err(Error::DuplicateLabel(_))));
    }

    #[test]
    fn schmidt_product_and_random() {
        let a = random_pure_with(&mut instance_rng(1, 0), qubits(&["A"]));
        let b = random_pure_with(&mut instance_rng(1, 1), qubits(&["B"]));
        let v: Vec<C64> = a
            .vec()
            .iter()
            .flat_map(|x| b.vec().iter().map(move |y| x * y))
            .collect();
        let p = PureState::new(v, qubits(&["A", "B"])).unwrap();
        let s = schmidt(&p, &["A"]).unwrap();
        assert_eq!(s.coefficients.len(), 1);
        assert!((s.coefficients[0] - 1.0).abs() < 1e-12);

        let p = random_pure_with(&mut instance_rng(2, 0), qubits(&["A", "B", "C"]));
        let s = schmidt(&p, &["A"]).unwrap();
        let m = ComplexMatrix::new(2, 4, p.vec().to_vec()).unwrap();
        let sv = linalg::singular_values(&m);
        assert_eq!(s.coefficients.len(), 2);
        for (c, v) in s.coefficients.iter().zip(&sv) {
            assert!((c - v).abs() < 1e-12);
        }
        let total: f64 = s.coefficients.iter().map(|c| c * c).sum();
        assert!((total - 1.0).abs() < 1e-9);
        let rec = s.reconstruct();
        for (x, y) in rec.iter().zip(p.vec()) {
            assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn schmidt_of_product_purification_is_normalized() {
        // tall, rank-one cut that used to overshoot through the complex SVD
        let st = |l: &str, rank, seed| random_state(qubits(&[l]), rank, Measure::HilbertSchmidt, seed).unwrap();
        for seed in 0..40 {
            let s = st("A", 2, seed)
                .tensor(&st("C", 1, seed + 100))
                .unwrap()
                .tensor(&st("A'", 2, seed + 200))
                .unwrap()
                .tensor(&st("C'", 1, seed + 300))
                .unwrap()
                .permuted(&["A", "A'", "C", "C'"])
                .unwrap();
            let psi = purify(&s, "D").unwrap();
            let sch = schmidt(&psi, &["A", "A'", "D"]).unwrap();
            assert_eq!(sch.coefficients.len(), 1);
            assert!(
                (sch.coefficients[0] - 1.0).abs() < 1e-12,
                "seed {seed}: {:?}",
                sch.coefficients
            );
            let g = &sch.right.adjoint() * &sch.right;
            assert!(g.approx_eq(&ComplexMatrix::identity(1), 1e-12));
        }
    }

    #[test]
    fn schmidt_invalid_cut() {
        let p = random_pure_with(&mut instance_rng(3, 0), qubits(&["A", "B"]));
        assert!(schmidt(&p, &[]).is_err());
        assert!(schmidt(&p, &["A", "B"]).is_err());
        assert!(schmidt(&p, &["Q"]).is_err());
    }

    #[test]
    fn schmidt_reconstructs_noncontiguous_cut() {
        let p = random_pure_with(&mut instance_rng(4, 0), SystemDims::of(&[("A", 2), ("B", 3), ("C", 2)]));
        let s = schmidt(&p, &["C", "A"]).unwrap();
        assert_eq!(s.left_dims.labels(), vec!["C", "A"]);
        let full = s.left_dims.concat(&s.right_dims).unwrap();
        let rec = s.reconstruct();
        let (back, _) = linalg::permute_vector(&rec, &full, &["A", "B", "C"]).unwrap();
        for (x, y) in back.iter().zip(p.vec()) {
            assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn random_state_rank_purity_determinism() {
        let s = random_state(qubits(&["A", "B"]), 1, Measure::HaarPure, 5).unwrap();
        assert!((s.purity() - 1.0).abs() < 1e-9);
        let a = random_state(qubits(&["A", "B"]), 3, Measure::Bures, 9).unwrap();
        let b = random_state(qubits(&["A", "B"]), 3, Measure::Bures, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rank(), 3);
        assert!(random_state(qubits(&["A"]), 3, Measure::HilbertSchmidt, 0).is_err());
        assert!(random_state(qubits(&["A"]), 2, Measure::HaarPure, 0).is_err());
    }

    #[test]
    fn hilbert_schmidt_mean_purity_qubit() {
        // E[tr ρ²] = 2d/(d²+1) = 0.8 for full-rank d = 2
        let mut rng = instance_rng(2024, 0);
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|_| {
                random_state_with(&mut rng, qubits(&["A"]), 2, Measure::HilbertSchmidt)
                    .unwrap()
                    .purity()
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.8).abs() < 0.01, "mean purity {mean}");
    }

    #[test]
    fn named_states() {
        let me = named_state("max_entangled").unwrap();
        let half = ComplexMatrix::identity(2).scale(0.5);
        assert!(me.marginal(&["A"]).unwrap().mat().approx_eq(&half, 1e-12));
        assert!(me.marginal(&["B"]).unwrap().mat().approx_eq(&half, 1e-12));
        let g = named_state("ghz3").unwrap();
        assert!(g.marginal(&["C"]).unwrap().mat().approx_eq(&half, 1e-12));
        assert_eq!(named_state("max_entangled:3").unwrap().dims().total(), 9);
        assert!(matches!(named_state("w3"), Err(Error::UnknownName(_))));
        assert_eq!(named_state("cq_markov").unwrap().rank(), 8);
    }

    #[test]
    fn generated_states_are_valid_over_many_seeds() {
        for seed in 0..1000u64 {
            let measure = [Measure::HilbertSchmidt, Measure::Bures][(seed % 2) as usize];
            let rank = 1 + (seed as usize % 8);
            let s = random_state(qubits(&["A", "B", "C"]), rank, measure, seed).unwrap();
            assert!((s.trace() - 1.0).abs() < 1e-9);
            assert!(s.mat().hermiticity_defect() < 1e-12);
            assert!(linalg::min_eigenvalue(s.mat()).unwrap() > -1e-9);
        }
    }
}
