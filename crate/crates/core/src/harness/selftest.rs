//! Known-answer checks run by `selftest`. Each returns `Ok(None)` on success
//! and `Ok(Some(reason))` when the answer is wrong.

use crate::channels::{apply_choi, choi_of_identity, identity_channel, is_cptp, petz_map, ChoiMatrix};
use crate::entropy::{cqmi, entropy_bits, fidelity, fidelity_alberti, hmin_cond, renyi_half, Divergence};
use crate::error::Result;
use crate::linalg::{herm_eig, kron, mat_fn, norms, partial_trace, ComplexMatrix, MatFn, SystemDims, C64};
use crate::recovery::{
    fawzi_renner_gap, fidelity_of_recovery, for_conditional, for_dual, for_primal, multiplicativity_check, petz_gap,
    renyi_half_recovery_identity,
};
use crate::sdp::{check_certificate, embed_complex, solve, solve_real, BlockTerm, SdpProblem, Sense, SolverOptions};
use crate::states::{
    cq_markov, default_product, ghz3, max_entangled, named_state, purify, random_state, schmidt, LabeledState, Measure,
    PureState,
};

use super::{cmd_for_conditional, read_state};

pub struct SelfCheck {
    pub name: &'static str,
    pub run: fn() -> Result<Option<String>>,
}

fn expect(ok: bool, reason: impl FnOnce() -> String) -> Result<Option<String>> {
    Ok((!ok).then(reason))
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<Option<String>> {
    expect((got - want).abs() <= tol, || {
        format!("{name}: got {got}, expected {want} ± {tol:e}")
    })
}

fn matrices_close(got: &ComplexMatrix, want: &ComplexMatrix, tol: f64) -> Result<Option<String>> {
    let d = if got.rows() == want.rows() && got.cols() == want.cols() {
        got.max_abs_diff(want)
    } else {
        f64::INFINITY
    };
    expect(d <= tol, || format!("matrices differ by {d:.3e}"))
}

fn all(results: impl IntoIterator<Item = Result<Option<String>>>) -> Result<Option<String>> {
    for r in results {
        if let Some(msg) = r? {
            return Ok(Some(msg));
        }
    }
    Ok(None)
}

fn qubits(labels: &[&str]) -> SystemDims {
    SystemDims::new(labels.iter().map(|l| (l.to_string(), 2)).collect()).expect("distinct labels")
}

fn random(labels: &[&str], rank: usize, seed: u64) -> Result<LabeledState> {
    random_state(qubits(labels), rank, Measure::HilbertSchmidt, seed)
}

fn pure_qubit(labels: &str, amps: [f64; 2]) -> Result<LabeledState> {
    let v = amps.iter().map(|&a| C64::new(a, 0.0)).collect();
    Ok(PureState::new(v, qubits(&[labels]))?.density())
}

fn relabel(s: &LabeledState, from: &str, to: &str) -> Result<LabeledState> {
    s.relabel(|l| if l == from { to.to_string() } else { l.to_string() })
}

pub fn selftest_checks() -> Vec<SelfCheck> {
    vec![
        SelfCheck {
            name: "kron_identity",
            run: || {
                matrices_close(
                    &kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(2)),
                    &ComplexMatrix::identity(4),
                    0.0,
                )
            },
        },
        SelfCheck {
            name: "kron_diagonal",
            run: || {
                let k = kron(
                    &ComplexMatrix::from_real_diag(&[1.0, 2.0]),
                    &ComplexMatrix::from_real_diag(&[3.0, 4.0]),
                );
                matrices_close(&k, &ComplexMatrix::from_real_diag(&[3.0, 4.0, 6.0, 8.0]), 0.0)
            },
        },
        SelfCheck {
            name: "partial_trace_product",
            run: || {
                let rho = random(&["A"], 2, 1)?;
                let sigma = random(&["B"], 2, 2)?.mat().scale(3.0);
                let m = kron(rho.mat(), &sigma);
                let pt = partial_trace(&m, &qubits(&["A", "B"]), &["B"])?;
                matrices_close(&pt, &rho.mat().scale(3.0), 1e-12)
            },
        },
        SelfCheck {
            name: "partial_trace_maximally_entangled",
            run: || {
                let phi = max_entangled(3);
                matrices_close(
                    phi.marginal(&["A"])?.mat(),
                    &ComplexMatrix::identity(3).scale(1.0 / 3.0),
                    1e-12,
                )
            },
        },
        SelfCheck {
            name: "eigenvalues_diagonal",
            run: || {
                let v = herm_eig(&ComplexMatrix::from_real_diag(&[3.0, 1.0]))?.values;
                expect(v == vec![1.0, 3.0], || format!("{v:?}"))
            },
        },
        SelfCheck {
            name: "eigenvalues_pauli_x",
            run: || {
                let x = ComplexMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[vec![0.0; 2], vec![0.0; 2]])?;
                let v = herm_eig(&x)?.values;
                all([close("λ0", v[0], -1.0, 1e-12), close("λ1", v[1], 1.0, 1e-12)])
            },
        },
        SelfCheck {
            name: "mat_fn_sqrt_identity",
            run: || {
                matrices_close(
                    &mat_fn(&ComplexMatrix::identity(3), MatFn::Sqrt)?,
                    &ComplexMatrix::identity(3),
                    1e-12,
                )
            },
        },
        SelfCheck {
            name: "mat_fn_pinv_sqrt_null_direction",
            run: || {
                let m = mat_fn(&ComplexMatrix::from_real_diag(&[4.0, 9.0, 0.0]), MatFn::PinvSqrt)?;
                matrices_close(&m, &ComplexMatrix::from_real_diag(&[0.5, 1.0 / 3.0, 0.0]), 1e-12)
            },
        },
        SelfCheck {
            name: "norms_identity",
            run: || {
                let n = norms(&ComplexMatrix::identity(3));
                all([
                    close("trace norm", n.trace_norm, 3.0, 1e-12),
                    close("operator norm", n.operator_norm, 1.0, 1e-12),
                ])
            },
        },
        SelfCheck {
            name: "norms_diagonal",
            run: || {
                let n = norms(&ComplexMatrix::from_real_diag(&[3.0, -4.0]));
                all([
                    close("trace norm", n.trace_norm, 7.0, 1e-12),
                    close("operator norm", n.operator_norm, 4.0, 1e-12),
                ])
            },
        },
        SelfCheck {
            name: "purify_maximally_mixed_qubit",
            run: || {
                let mixed = LabeledState::maximally_mixed(qubits(&["A"]));
                let psi = purify(&mixed, "R")?;
                let s = schmidt(&psi, &["A"])?;
                let h = std::f64::consts::FRAC_1_SQRT_2;
                all([
                    matrices_close(psi.density().marginal(&["A"])?.mat(), mixed.mat(), 1e-12),
                    expect(s.coefficients.len() == 2, || {
                        format!("{} Schmidt terms", s.coefficients.len())
                    }),
                    close("schmidt", s.coefficients[0], h, 1e-12),
                ])
            },
        },
        SelfCheck {
            name: "purify_pure_state",
            run: || {
                let psi = purify(&pure_qubit("A", [0.6, 0.8])?, "R")?;
                let d = psi.dims().dim_of("R")?;
                expect(d == 1, || format!("purifying dimension {d}"))
            },
        },
        SelfCheck {
            name: "schmidt_product",
            run: || {
                let v = kron(
                    &ComplexMatrix::column(&[C64::new(0.6, 0.0), C64::new(0.8, 0.0)]),
                    &ComplexMatrix::column(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
                );
                let psi = PureState::new(v.data().to_vec(), qubits(&["A", "B"]))?;
                let s = schmidt(&psi, &["A"])?;
                all([
                    expect(s.coefficients.len() == 1, || format!("{:?}", s.coefficients)),
                    close("coefficient", s.coefficients[0], 1.0, 1e-12),
                ])
            },
        },
        SelfCheck {
            name: "schmidt_maximally_entangled",
            run: || {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                let v = vec![
                    C64::new(h, 0.0),
                    C64::new(0.0, 0.0),
                    C64::new(0.0, 0.0),
                    C64::new(h, 0.0),
                ];
                let s = schmidt(&PureState::new(v, qubits(&["A", "B"]))?, &["A"])?;
                all([
                    expect(s.coefficients.len() == 2, || format!("{:?}", s.coefficients)),
                    close("c0", s.coefficients[0], h, 1e-12),
                    close("c1", s.coefficients[1], h, 1e-12),
                ])
            },
        },
        SelfCheck {
            name: "random_rank_one_is_pure",
            run: || close("purity", random(&["A", "B"], 1, 5)?.purity(), 1.0, 1e-9),
        },
        SelfCheck {
            name: "random_state_is_deterministic",
            run: || {
                let a = random(&["A", "B"], 3, 9)?;
                let b = random(&["A", "B"], 3, 9)?;
                expect(a.mat().data() == b.mat().data(), || {
                    "same seed gave different states".into()
                })
            },
        },
        SelfCheck {
            name: "max_entangled_marginals",
            run: || {
                let phi = max_entangled(2);
                let half = ComplexMatrix::identity(2).scale(0.5);
                all([
                    matrices_close(phi.marginal(&["A"])?.mat(), &half, 1e-12),
                    matrices_close(phi.marginal(&["B"])?.mat(), &half, 1e-12),
                ])
            },
        },
        SelfCheck {
            name: "ghz3_marginal",
            run: || {
                matrices_close(
                    ghz3().marginal(&["C"])?.mat(),
                    &ComplexMatrix::identity(2).scale(0.5),
                    1e-12,
                )
            },
        },
        SelfCheck {
            name: "cq_markov_has_zero_cqmi",
            run: || close("cqmi", cqmi(&cq_markov())?, 0.0, 1e-9),
        },
        SelfCheck {
            name: "choi_identity_scalar",
            run: || matrices_close(choi_of_identity(1).mat(), &ComplexMatrix::identity(1), 0.0),
        },
        SelfCheck {
            name: "choi_identity_qubit",
            run: || {
                let j = choi_of_identity(2);
                let joint = j.joint_dims();
                let pt = partial_trace(j.mat(), &joint, &["out:out"])?;
                let eig = herm_eig(j.mat())?;
                all([
                    expect(eig.rank() == 1, || format!("rank {}", eig.rank())),
                    close("trace", j.mat().trace().re, 2.0, 1e-12),
                    matrices_close(&pt, &ComplexMatrix::identity(2), 1e-12),
                ])
            },
        },
        SelfCheck {
            name: "identity_channel_leaves_input",
            run: || {
                let rho = random(&["A", "B"], 3, 4)?;
                let out = apply_choi(&identity_channel(&qubits(&["B"])), &rho)?;
                matrices_close(out.mat(), rho.mat(), 1e-12)
            },
        },
        SelfCheck {
            name: "depolarizing_channel",
            run: || {
                let (din, dout) = (2, 3);
                let in_dims = qubits(&["B"]);
                let out_dims = SystemDims::of(&[("E", dout)]);
                let j = ChoiMatrix::new(
                    ComplexMatrix::identity(din * dout).scale(1.0 / dout as f64),
                    in_dims,
                    out_dims,
                )?;
                let rho = random(&["A", "B"], 4, 6)?;
                let out = apply_choi(&j, &rho)?;
                let want = kron(
                    rho.marginal(&["A"])?.mat(),
                    &ComplexMatrix::identity(dout).scale(1.0 / dout as f64),
                );
                matrices_close(out.mat(), &want, 1e-12)
            },
        },
        SelfCheck {
            name: "is_cptp_identity",
            run: || {
                let r = is_cptp(&choi_of_identity(2), 1e-12);
                expect(r.ok && r.psd_violation <= 1e-12 && r.tp_violation <= 1e-12, || {
                    format!("{r:?}")
                })
            },
        },
        SelfCheck {
            name: "is_cptp_scaled",
            run: || {
                let r = is_cptp(&choi_of_identity(2).scaled(1.1), 1e-7);
                all([
                    expect(!r.ok, || "scaled Choi matrix accepted".into()),
                    close("tp_violation", r.tp_violation, 0.1 * 2f64.sqrt(), 1e-12),
                ])
            },
        },
        SelfCheck {
            name: "petz_product_factorizes",
            run: || {
                let rho_a = random(&["A"], 2, 7)?;
                let rho_c = random(&["C"], 2, 8)?;
                let petz = petz_map(&rho_a.tensor(&rho_c)?, &["A"], &["C"])?;
                let sigma_c = random(&["C"], 2, 9)?;
                let out = apply_choi(&petz, &sigma_c)?;
                matrices_close(out.mat(), rho_a.tensor(&sigma_c)?.mat(), 1e-10)
            },
        },
        SelfCheck {
            name: "petz_recovers_its_marginal",
            run: || {
                let rho = random(&["A", "C"], 1, 10)?;
                let petz = petz_map(&rho, &["A"], &["C"])?;
                let out = apply_choi(&petz, &rho.marginal(&["C"])?)?;
                matrices_close(out.mat(), rho.mat(), 1e-10)
            },
        },
        SelfCheck {
            name: "entropy_pure",
            run: || close("entropy", entropy_bits(random(&["A", "B"], 1, 11)?.mat())?, 0.0, 1e-9),
        },
        SelfCheck {
            name: "entropy_maximally_mixed",
            run: || {
                close(
                    "entropy",
                    entropy_bits(&ComplexMatrix::identity(5).scale(0.2))?,
                    5f64.log2(),
                    1e-12,
                )
            },
        },
        SelfCheck {
            name: "entropy_binary",
            run: || {
                close(
                    "entropy",
                    entropy_bits(&ComplexMatrix::from_real_diag(&[0.25, 0.75]))?,
                    0.811278,
                    1e-6,
                )
            },
        },
        SelfCheck {
            name: "cqmi_product",
            run: || close("cqmi", cqmi(&default_product())?, 0.0, 1e-9),
        },
        SelfCheck {
            name: "cqmi_ghz3",
            run: || close("cqmi", cqmi(&ghz3())?, 1.0, 1e-9),
        },
        SelfCheck {
            name: "fidelity_self",
            run: || {
                let rho = random(&["A", "B"], 3, 12)?;
                close("fidelity", fidelity(&rho, &rho)?, 1.0, 1e-9)
            },
        },
        SelfCheck {
            name: "fidelity_orthogonal",
            run: || {
                close(
                    "fidelity",
                    fidelity(&pure_qubit("A", [1.0, 0.0])?, &pure_qubit("A", [0.0, 1.0])?)?,
                    0.0,
                    1e-12,
                )
            },
        },
        SelfCheck {
            name: "fidelity_overlap",
            run: || {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                close(
                    "fidelity",
                    fidelity(&pure_qubit("A", [1.0, 0.0])?, &pure_qubit("A", [h, h])?)?,
                    0.5,
                    1e-12,
                )
            },
        },
        SelfCheck {
            name: "fidelity_alberti_self",
            run: || {
                let rho = random(&["A"], 2, 13)?;
                close("fidelity", fidelity_alberti(&rho, &rho)?.value, 1.0, 1e-6)
            },
        },
        SelfCheck {
            name: "fidelity_alberti_orthogonal",
            run: || {
                let r = fidelity_alberti(&pure_qubit("A", [1.0, 0.0])?, &pure_qubit("A", [0.0, 1.0])?)?;
                close("fidelity", r.value, 0.0, 1e-6)
            },
        },
        SelfCheck {
            name: "hmin_decoupled",
            run: || {
                let da = 3;
                let sigma =
                    LabeledState::maximally_mixed(SystemDims::of(&[("A", da)])).tensor(&random(&["C"], 2, 14)?)?;
                close(
                    "hmin",
                    hmin_cond(&sigma, &["A"], &["C"])?.hmin_bits,
                    (da as f64).log2(),
                    1e-6,
                )
            },
        },
        SelfCheck {
            name: "renyi_identical",
            run: || {
                let rho = random(&["A"], 2, 15)?;
                close("divergence", renyi_half(&rho, &rho)?.bits(), 0.0, 1e-9)
            },
        },
        SelfCheck {
            name: "renyi_orthogonal",
            run: || {
                let d = renyi_half(&pure_qubit("A", [1.0, 0.0])?, &pure_qubit("A", [0.0, 1.0])?)?;
                expect(d == Divergence::Infinite, || format!("{d:?}"))
            },
        },
        SelfCheck {
            name: "renyi_half_fidelity",
            run: || {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                let d = renyi_half(&pure_qubit("A", [1.0, 0.0])?, &pure_qubit("A", [h, h])?)?;
                close("divergence", d.bits(), 1.0, 1e-9)
            },
        },
        SelfCheck {
            name: "sdp_diagonal_lp",
            run: || {
                let one = ComplexMatrix::identity(1);
                let mut p = SdpProblem::new(vec![1, 1], Sense::Maximize);
                p.set_objective(0, &one);
                p.add_constraint(
                    vec![BlockTerm::from_dense(0, &one), BlockTerm::from_dense(1, &one)],
                    1.0,
                );
                let sol = solve(&p, &SolverOptions::default())?;
                all([
                    expect(sol.is_optimal(), || format!("{:?}", sol.status)),
                    close("optimum", sol.primal_obj, 1.0, 1e-7),
                ])
            },
        },
        SelfCheck {
            name: "sdp_real_embedding",
            run: || {
                let m = ComplexMatrix::from_real_diag(&[1.0, 3.0, 2.0]);
                let mut p = SdpProblem::new(vec![3], Sense::Maximize);
                p.set_objective(0, &m);
                p.add_constraint(vec![BlockTerm::from_dense(0, &ComplexMatrix::identity(3))], 1.0);
                let real = embed_complex(&p);
                let c = &real.objective[0];
                let duplicated = (0..3).all(|i| (0..3).all(|j| c[(i, j)] == c[(i + 3, j + 3)] && c[(i, j + 3)] == 0.0));
                let sol = solve_real(&real, &SolverOptions::default());
                all([
                    expect(real.blocks == vec![6] && duplicated, || {
                        "embedding is not a doubled copy".into()
                    }),
                    close("optimum", sol.primal_obj, 3.0, 1e-7),
                ])
            },
        },
        SelfCheck {
            name: "sdp_pauli_y",
            run: || {
                let y = ComplexMatrix::new(
                    2,
                    2,
                    vec![
                        C64::new(0.0, 0.0),
                        C64::new(0.0, -1.0),
                        C64::new(0.0, 1.0),
                        C64::new(0.0, 0.0),
                    ],
                )?;
                let mut p = SdpProblem::new(vec![2], Sense::Maximize);
                p.set_objective(0, &y);
                p.add_constraint(vec![BlockTerm::from_dense(0, &ComplexMatrix::identity(2))], 1.0);
                close("λ_max", solve(&p, &SolverOptions::default())?.primal_obj, 1.0, 1e-7)
            },
        },
        SelfCheck {
            name: "certificate_hand_built_pair",
            run: || {
                let mut p = SdpProblem::new(vec![2], Sense::Maximize);
                p.set_objective(0, &ComplexMatrix::from_real_diag(&[1.0, 2.0]));
                p.add_constraint(vec![BlockTerm::from_dense(0, &ComplexMatrix::identity(2))], 1.0);
                let x = vec![ComplexMatrix::from_real_diag(&[0.0, 1.0])];
                let r = check_certificate(&p, &x, &[2.0], 1e-9)?;
                expect(r.ok, || format!("{r:?}"))
            },
        },
        SelfCheck {
            name: "certificate_flags_perturbation",
            run: || {
                let mut p = SdpProblem::new(vec![2], Sense::Maximize);
                p.set_objective(0, &ComplexMatrix::from_real_diag(&[1.0, 2.0]));
                p.add_constraint(vec![BlockTerm::from_dense(0, &ComplexMatrix::identity(2))], 1.0);
                let x = vec![ComplexMatrix::from_real_diag(&[1e-3, 1.0])];
                let r = check_certificate(&p, &x, &[2.0], 1e-7)?;
                all([
                    expect(!r.ok, || "perturbed pair accepted".into()),
                    close("residual", r.primal_feas_residual, 1e-3, 1e-9),
                ])
            },
        },
        SelfCheck {
            name: "for_trivial_b_and_c",
            run: || {
                let rho = random(&["A"], 2, 16)?;
                let sigma = random(&["A"], 2, 17)?;
                let root = for_primal(&rho, &sigma)?.root_value;
                close("root fidelity", root, fidelity(&rho, &sigma)?.sqrt(), 1e-6)
            },
        },
        SelfCheck {
            name: "for_product_recoverable",
            run: || {
                let rho_a = random(&["A"], 2, 18)?;
                let rho = rho_a.tensor(&random(&["B"], 2, 19)?)?;
                let sigma = rho_a.tensor(&random(&["C"], 2, 20)?)?;
                close("value", fidelity_of_recovery(&rho, &sigma)?.value, 1.0, 1e-6)
            },
        },
        SelfCheck {
            name: "for_dual_trivial_b_and_c",
            run: || {
                let rho = random(&["A"], 2, 21)?;
                let sigma = random(&["A"], 2, 22)?;
                let d = for_dual(&rho, &sigma)?;
                all([
                    close("value", d.value, fidelity_alberti(&rho, &sigma)?.value, 1e-6),
                    close("Alberti objective", d.alberti.objective, d.value, 1e-6),
                ])
            },
        },
        SelfCheck {
            name: "for_identity_recovery",
            run: || {
                let rho = random(&["A", "B"], 3, 23)?;
                let sigma = relabel(&rho, "B", "C")?;
                let d = for_dual(&rho, &sigma)?;
                all([
                    close("value", d.value, 1.0, 1e-6),
                    close("Alberti objective", d.alberti.objective, 1.0, 1e-6),
                    expect(d.alberti.is_feasible(1e-7), || {
                        format!("min eigenvalue {}", d.alberti.min_eigenvalue)
                    }),
                ])
            },
        },
        SelfCheck {
            name: "for_conditional_product",
            run: || close("value", for_conditional(&default_product())?.value, 1.0, 1e-6),
        },
        SelfCheck {
            name: "for_conditional_cq_markov",
            run: || close("value", for_conditional(&cq_markov())?.value, 1.0, 1e-6),
        },
        SelfCheck {
            name: "multiplicativity_trivial_factor",
            run: || {
                let rho = random(&["A", "B"], 2, 24)?;
                let sigma = random(&["A", "C"], 2, 25)?;
                let one = |l: &[(&str, usize)]| LabeledState::maximally_mixed(SystemDims::of(l));
                let m = multiplicativity_check(&rho, &sigma, &one(&[("A", 1), ("B", 1)]), &one(&[("A", 1), ("C", 1)]))?;
                close("defect", m.defect, 0.0, 1e-8)
            },
        },
        SelfCheck {
            name: "multiplicativity_product_states",
            run: || {
                let pair = |seed: u64| -> Result<(LabeledState, LabeledState)> {
                    let rho_a = random(&["A"], 2, seed)?;
                    Ok((
                        rho_a.tensor(&random(&["B"], 2, seed + 1)?)?,
                        rho_a.tensor(&random(&["C"], 1, seed + 2)?)?,
                    ))
                };
                let (r1, s1) = pair(26)?;
                let (r2, s2) = pair(29)?;
                let m = multiplicativity_check(&r1, &s1, &r2, &s2)?;
                all([close("f12", m.f12, 1.0, 1e-5), close("defect", m.defect, 0.0, 1e-5)])
            },
        },
        SelfCheck {
            name: "fr_gap_product",
            run: || {
                let g = fawzi_renner_gap(&default_product())?;
                all([
                    close("cqmi", g.cqmi_bits, 0.0, 1e-6),
                    close("-log F", g.neg_log_for_bits, 0.0, 1e-6),
                    close("slack", g.slack, 0.0, 1e-6),
                ])
            },
        },
        SelfCheck {
            name: "fr_gap_cq_markov",
            run: || {
                let g = fawzi_renner_gap(&cq_markov())?;
                all([
                    close("cqmi", g.cqmi_bits, 0.0, 1e-6),
                    close("-log F", g.neg_log_for_bits, 0.0, 1e-6),
                ])
            },
        },
        SelfCheck {
            name: "petz_cq_markov_optimal",
            run: || {
                let g = petz_gap(&cq_markov())?;
                all([close("f_petz", g.f_petz, 1.0, 1e-8), close("f_opt", g.f_opt, 1.0, 1e-6)])
            },
        },
        SelfCheck {
            name: "petz_product_ratio",
            run: || {
                close(
                    "ratio",
                    petz_gap(&default_product())?.ratio.unwrap_or(f64::NAN),
                    1.0,
                    1e-6,
                )
            },
        },
        SelfCheck {
            name: "renyi_identity_markov",
            run: || {
                let id = renyi_half_recovery_identity(&cq_markov())?;
                all([close("lhs", id.lhs, 0.0, 1e-6), close("rhs", id.rhs.bits(), 0.0, 1e-6)])
            },
        },
        SelfCheck {
            name: "renyi_identity_product",
            run: || {
                let id = renyi_half_recovery_identity(&default_product())?;
                all([close("lhs", id.lhs, 0.0, 1e-6), close("rhs", id.rhs.bits(), 0.0, 1e-6)])
            },
        },
        SelfCheck {
            name: "cli_for_named_product",
            run: || close("value", cmd_for_conditional(&named_state("product")?)?.value, 1.0, 1e-6),
        },
        SelfCheck {
            name: "cli_for_state_file",
            run: || {
                let path = std::env::temp_dir().join(format!("recoverlab-selftest-{}.json", std::process::id()));
                std::fs::write(&path, serde_json::to_string(&cq_markov())?)?;
                let rho = read_state(&path);
                let _ = std::fs::remove_file(&path);
                close("value", cmd_for_conditional(&rho?)?.value, 1.0, 1e-6)
            },
        },
    ]
}
