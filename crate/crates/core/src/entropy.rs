//! Entropies, conditional mutual information and fidelity, in bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{herm_eig, kron, mat_fn, norms, support_isometry, ComplexMatrix, MatFn};
use crate::sdp::{from_basis_coefficients, solve, BlockTerm, SdpProblem, Sense, SolverOptions};
use crate::states::LabeledState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Sdp,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub value: f64,
    pub method: Method,
    pub residual: f64,
}

/// A divergence that may be `+∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    pub fn bits(&self) -> f64 {
        match self {
            Divergence::Finite(v) => *v,
            Divergence::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Divergence::Infinite)
    }
}

/// `−tr ρ log₂ ρ` with `0 log 0 = 0`.
pub fn entropy_bits(m: &ComplexMatrix) -> Result<f64> {
    let eig = herm_eig(m)?;
    Ok(-eig
        .values
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.log2())
        .sum::<f64>())
}

/// Entropy of the marginal on `labels`.
pub fn von_neumann(s: &LabeledState, labels: &[&str]) -> Result<f64> {
    if labels.is_empty() {
        return Ok(0.0);
    }
    entropy_bits(s.marginal(labels)?.mat())
}

fn join<'a>(groups: &[&[&'a str]]) -> Vec<&'a str> {
    groups.iter().flat_map(|g| g.iter().copied()).collect()
}

/// `I(A:B|C) = H(AC) + H(BC) − H(ABC) − H(C)` for label groups.
pub fn cqmi_of(s: &LabeledState, a: &[&str], b: &[&str], c: &[&str]) -> Result<f64> {
    Ok(von_neumann(s, &join(&[a, c]))? + von_neumann(s, &join(&[b, c]))?
        - von_neumann(s, &join(&[a, b, c]))?
        - von_neumann(s, c)?)
}

/// `I(A:B|C)` where `A`, `B`, `C` are the state's three factors in order.
pub fn cqmi(s: &LabeledState) -> Result<f64> {
    let labels = s.dims().labels();
    if labels.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "expected three factors, found {}",
            labels.len()
        )));
    }
    cqmi_of(s, &labels[..1], &labels[1..2], &labels[2..])
}

fn same_size(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: b.rows(),
        });
    }
    Ok(())
}

/// `‖√a √b‖₁²` on raw density matrices.
pub fn fidelity_matrices(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    same_size(a, b)?;
    let root = norms(&(&mat_fn(a, MatFn::Sqrt)? * &mat_fn(b, MatFn::Sqrt)?)).trace_norm;
    Ok(root.powi(2).clamp(0.0, 1.0))
}

/// Squared Uhlmann fidelity.
pub fn fidelity(a: &LabeledState, b: &LabeledState) -> Result<f64> {
    fidelity_matrices(a.mat(), b.mat())
}

/// Fidelity through the root-fidelity program
/// `max Re tr Z s.t. [[a, Z], [Z†, b]] ⪰ 0`, whose dual is Alberti's
/// `min tr[aR⁻¹]·tr[bR]` after rescaling. Both states are compressed to
/// their supports so the program is strictly feasible.
pub fn fidelity_alberti(a: &LabeledState, b: &LabeledState) -> Result<EntropyReport> {
    same_size(a.mat(), b.mat())?;
    let va = support_isometry(a.mat())?;
    let vb = support_isometry(b.mat())?;
    let ra = &(&va.adjoint() * a.mat()) * &va;
    let rb = &(&vb.adjoint() * b.mat()) * &vb;
    let (na, nb) = (va.cols(), vb.cols());
    let n = na + nb;
    let w = &va.adjoint() * &vb;

    let mut c = ComplexMatrix::zeros(n, n);
    c.set_block(0, na, &w.scale(0.5));
    c.set_block(na, 0, &w.adjoint().scale(0.5));
    let mut p = SdpProblem::new(vec![n], Sense::Maximize);
    p.set_objective(0, &c);
    let place = |h: &ComplexMatrix, offset: usize| {
        let mut m = ComplexMatrix::zeros(n, n);
        m.set_block(offset, offset, h);
        vec![BlockTerm::from_dense(0, &m)]
    };
    p.add_equality(&ra, |h| place(h, 0));
    p.add_equality(&rb, |h| place(h, na));
    let sol = solve(&p, &SolverOptions::default())?.into_optimal()?;

    let value = sol.dual_obj.max(0.0).powi(2);
    let closed = fidelity(a, b)?;
    Ok(EntropyReport {
        value,
        method: Method::Sdp,
        residual: (value - closed).abs(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HminResult {
    pub hmin_bits: f64,
    /// `Y_C / tr Y_C` for the optimal `Y_C`.
    pub omega_c: ComplexMatrix,
    pub report: EntropyReport,
}

/// `H_min(A|C) = −log₂ min{tr Y_C : σ_AC ⪯ 1_A ⊗ Y_C}`, solved as the dual of
/// `max tr[σX] s.t. tr_A X = 1_C`.
pub fn hmin_cond(s: &LabeledState, a: &[&str], c: &[&str]) -> Result<HminResult> {
    let order: Vec<&str> = a.iter().chain(c).copied().collect();
    let st = s.marginal(&order)?.permuted(&order)?;
    let da = st.dims().dim_of_all(a)?;
    let dc = st.dims().dim_of_all(c)?;
    let id_a = ComplexMatrix::identity(da);

    let mut p = SdpProblem::new(vec![da * dc], Sense::Maximize);
    p.set_objective(0, st.mat());
    let range = p.add_equality(&ComplexMatrix::identity(dc), |h| {
        vec![BlockTerm::from_dense(0, &kron(&id_a, h))]
    });
    let sol = solve(&p, &SolverOptions::default())?.into_optimal()?;

    let y = from_basis_coefficients(dc, &sol.y[range]).hermitian_part();
    let tr = y.trace().re;
    Ok(HminResult {
        hmin_bits: -sol.dual_obj.log2(),
        omega_c: y.scale(1.0 / tr),
        report: EntropyReport {
            value: -sol.dual_obj.log2(),
            method: Method::Sdp,
            residual: sol.gap,
        },
    })
}

/// `D_{1/2}(a‖b) = −log₂ F(a, b)`, infinite for orthogonal supports.
pub fn renyi_half(a: &LabeledState, b: &LabeledState) -> Result<Divergence> {
    let f = fidelity(a, b)?;
    if f.sqrt() <= 1e-12 {
        Ok(Divergence::Infinite)
    } else {
        Ok(Divergence::Finite(-f.log2()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{SystemDims, C64};
    use crate::states::{cq_markov, default_product, ghz3, max_entangled, random_state, Measure, PureState};
    use proptest::prelude::*;

    fn pure(v: &[f64]) -> LabeledState {
        let vec = v.iter().map(|&x| C64::new(x, 0.0)).collect();
        PureState::new(vec, SystemDims::of(&[("A", v.len())]))
            .unwrap()
            .density()
    }

    fn qubits(labels: &[&str]) -> SystemDims {
        SystemDims::new(labels.iter().map(|l| (l.to_string(), 2)).collect()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert!(von_neumann(&pure(&[0.6, 0.8]), &["A"]).unwrap().abs() < 1e-12);
        let mixed = LabeledState::maximally_mixed(SystemDims::of(&[("A", 3)]));
        assert!((von_neumann(&mixed, &["A"]).unwrap() - 3f64.log2()).abs() < 1e-12);
        let d = LabeledState::new(
            ComplexMatrix::from_real_diag(&[0.25, 0.75]),
            SystemDims::of(&[("A", 2)]),
        )
        .unwrap();
        let expected = 2.0 - 0.75 * 3f64.log2();
        assert!((von_neumann(&d, &["A"]).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.811278).abs() < 1e-6);
    }

    #[test]
    fn cqmi_examples() {
        assert!((cqmi(&ghz3()).unwrap() - 1.0).abs() < 1e-12);
        assert!(cqmi(&default_product()).unwrap().abs() < 1e-12);
        assert!(cqmi(&cq_markov()).unwrap().abs() < 1e-9);
        assert!(cqmi(&max_entangled(2)).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let zero = pure(&[1.0, 0.0]);
        let one = pure(&[0.0, 1.0]);
        let plus = pure(&[std::f64::consts::FRAC_1_SQRT_2; 2]);
        assert!((fidelity(&plus, &plus).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(&zero, &one).unwrap() < 1e-24);
        assert!((fidelity(&zero, &plus).unwrap() - 0.5).abs() < 1e-12);
        let big = LabeledState::maximally_mixed(SystemDims::of(&[("A", 3)]));
        assert!(matches!(fidelity(&zero, &big), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn alberti_examples() {
        let zero = pure(&[1.0, 0.0]);
        let one = pure(&[0.0, 1.0]);
        let r = fidelity_alberti(&zero, &zero).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6);
        assert_eq!(r.method, Method::Sdp);
        assert!(fidelity_alberti(&zero, &one).unwrap().value < 1e-6);
        for seed in 0..10 {
            let a = random_state(qubits(&["A"]), 2, Measure::HilbertSchmidt, seed).unwrap();
            let b = random_state(qubits(&["A"]), 2, Measure::Bures, 1000 + seed).unwrap();
            let r = fidelity_alberti(&a, &b).unwrap();
            assert!(r.residual < 1e-6, "{r:?}");
            // root fidelity itself within 1e-7
            assert!((r.value.sqrt() - fidelity(&a, &b).unwrap().sqrt()).abs() < 1e-7);
        }
    }

    #[test]
    fn hmin_examples() {
        let sc = random_state(qubits(&["C"]), 2, Measure::HilbertSchmidt, 4).unwrap();
        let decoupled = LabeledState::maximally_mixed(qubits(&["A"])).tensor(&sc).unwrap();
        let h = hmin_cond(&decoupled, &["A"], &["C"]).unwrap();
        assert!((h.hmin_bits - 1.0).abs() < 1e-7);
        assert!(h.omega_c.approx_eq(sc.mat(), 1e-6));

        let phi = max_entangled(3)
            .relabel(|l| if l == "B" { "C".into() } else { l.into() })
            .unwrap();
        assert!((hmin_cond(&phi, &["A"], &["C"]).unwrap().hmin_bits + 3f64.log2()).abs() < 1e-7);

        let mut classical = ComplexMatrix::zeros(9, 9);
        for i in 0..3 {
            classical[(i * 3 + i, i * 3 + i)] = C64::new(1.0 / 3.0, 0.0);
        }
        let cl = LabeledState::new(classical, SystemDims::of(&[("A", 3), ("C", 3)])).unwrap();
        let h = hmin_cond(&cl, &["A"], &["C"]).unwrap();
        assert!(h.hmin_bits.abs() < 1e-7);
        assert!(h.omega_c.approx_eq(&ComplexMatrix::identity(3).scale(1.0 / 3.0), 1e-6));
    }

    #[test]
    fn hmin_respects_label_order() {
        let s = random_state(qubits(&["C", "A"]), 3, Measure::HilbertSchmidt, 8).unwrap();
        let swapped = s.permuted(&["A", "C"]).unwrap();
        let x = hmin_cond(&s, &["A"], &["C"]).unwrap().hmin_bits;
        let y = hmin_cond(&swapped, &["A"], &["C"]).unwrap().hmin_bits;
        assert!((x - y).abs() < 1e-7);
    }

    #[test]
    fn renyi_examples() {
        let zero = pure(&[1.0, 0.0]);
        let one = pure(&[0.0, 1.0]);
        let plus = pure(&[std::f64::consts::FRAC_1_SQRT_2; 2]);
        assert!(renyi_half(&plus, &plus).unwrap().bits().abs() < 1e-12);
        assert!(renyi_half(&zero, &one).unwrap().is_infinite());
        assert!((renyi_half(&zero, &plus).unwrap().bits() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn strong_subadditivity(seed in any::<u64>(), rank in 1usize..=8, dc in 2usize..=3) {
            let dims = SystemDims::of(&[("A", 2), ("B", 2), ("C", dc)]);
            let s = random_state(dims, rank, Measure::HilbertSchmidt, seed).unwrap();
            prop_assert!(cqmi(&s).unwrap() >= -1e-9);
        }

        #[test]
        fn pure_state_cqmi_duality(seed in any::<u64>()) {
            let dims = SystemDims::of(&[("A", 2), ("B", 2), ("C", 2), ("D", 2)]);
            let s = random_state(dims, 1, Measure::HaarPure, seed).unwrap();
            let c = cqmi_of(&s, &["A"], &["B"], &["C"]).unwrap();
            let d = cqmi_of(&s, &["A"], &["B"], &["D"]).unwrap();
            prop_assert!((c - d).abs() <= 1e-8);
        }

        #[test]
        fn fidelity_monotone_under_partial_trace(seed in any::<u64>(), ra in 1usize..=4, rb in 1usize..=4) {
            let a = random_state(qubits(&["A", "B"]), ra, Measure::HilbertSchmidt, seed).unwrap();
            let b = random_state(qubits(&["A", "B"]), rb, Measure::Bures, seed ^ 0x5555).unwrap();
            let full = fidelity(&a, &b).unwrap();
            let reduced = fidelity(&a.marginal(&["A"]).unwrap(), &b.marginal(&["A"]).unwrap()).unwrap();
            prop_assert!(full <= reduced + 1e-9);
            prop_assert!((fidelity(&b, &a).unwrap() - full).abs() < 1e-9);
        }

        #[test]
        fn alberti_is_tight(seed in any::<u64>(), ra in 1usize..=3, rb in 1usize..=3) {
            let dims = SystemDims::of(&[("A", 3)]);
            let a = random_state(dims.clone(), ra, Measure::HilbertSchmidt, seed).unwrap();
            let b = random_state(dims, rb, Measure::HilbertSchmidt, seed.wrapping_add(1)).unwrap();
            let r = fidelity_alberti(&a, &b).unwrap();
            prop_assert!(r.residual <= 1e-6, "{:?}", r);
        }
    }
}
