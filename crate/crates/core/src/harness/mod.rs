//! Seeded experiment sweeps, per-instance invariant checks and report output.

mod selftest;

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channels::{apply_choi, is_cptp, ChoiMatrix, CptpReport, CPTP_TOL};
use crate::entropy::{cqmi, fidelity};
use crate::error::{Error, Result};
use crate::linalg::SystemDims;
use crate::recovery::{
    alberti_feasibility, alberti_objective, fawzi_renner_gap_from, for_conditional, multiplicativity_check,
    petz_gap_from, AlbertiPair, RecoveryResult,
};
use crate::sdp::CertificateReport;
use crate::states::{instance_rng, random_cq_markov_with, random_state_with, LabeledState, Measure, RNG_NAME};

pub use selftest::{selftest_checks, SelfCheck};

/// Identifies the report layout and the invariant thresholds below.
pub const SPEC_REVISION: &str = "recoverlab-1";

pub const FR_SLACK_TOL: f64 = 1e-6;
pub const PETZ_TOL: f64 = 1e-6;
pub const DEFECT_TOL: f64 = 1e-4;
pub const WITNESS_TOL: f64 = 1e-6;
pub const BOUNDS_TOL: f64 = 1e-7;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_INPUT: i32 = 4;

/// Exit code for an error that aborted a command.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Solver { .. } => EXIT_SOLVER,
        _ => EXIT_INPUT,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Multiplicativity on product instances.
    Mult,
    /// CQMI against the fidelity of recovery.
    Fr,
    /// Petz map against the optimal recovery.
    Petz,
    /// Fixed sanity checks with known answers.
    Selftest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub n: usize,
    pub seed: u64,
    pub d_a: usize,
    pub d_b: usize,
    pub d_c: usize,
    /// Largest rank drawn for random states.
    pub rank: usize,
    pub rank1_sigma: bool,
    #[serde(skip)]
    pub timings: bool,
}

impl SweepConfig {
    pub fn new(kind: SweepKind, n: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            seed,
            d_a: 2,
            d_b: 2,
            d_c: 2,
            rank: 2,
            rank1_sigma: false,
            timings: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d_a == 0 || self.d_b == 0 || self.d_c == 0 {
            return Err(Error::InvalidArgument("dimensions must be positive".into()));
        }
        if self.rank == 0 {
            return Err(Error::InvalidArgument("rank must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InstanceInput {
    Tripartite {
        rho: LabeledState,
    },
    Product {
        rho1: LabeledState,
        sigma1: LabeledState,
        rho2: LabeledState,
        sigma2: LabeledState,
    },
    Check {
        name: String,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primal_lb: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_ub: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub achieved_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cqmi_bits: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neg_log_for_bits: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_petz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_min_eigenvalue: Option<f64>,
}

/// Everything needed to re-check a row offline: the recovery channel gives
/// the lower bound by direct evaluation, the Alberti pair the upper bound.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Certificates {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sdp: Option<CertificateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel_check: Option<CptpReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery_channel: Option<ChoiMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alberti_pair: Option<AlbertiPair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_feasible: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    InvariantViolation,
    SolverFailure,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceRow {
    pub instance_id: usize,
    pub seed: u64,
    pub d_a: Option<usize>,
    pub d_b: Option<usize>,
    pub d_c: Option<usize>,
    pub rank_sigma: Option<usize>,
    pub input: InstanceInput,
    pub outputs: InstanceOutputs,
    pub certificates: Certificates,
    pub status: RowStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub messages: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

impl InstanceRow {
    fn new(instance_id: usize, seed: u64, input: InstanceInput) -> Self {
        Self {
            instance_id,
            seed,
            d_a: None,
            d_b: None,
            d_c: None,
            rank_sigma: None,
            input,
            outputs: InstanceOutputs::default(),
            certificates: Certificates::default(),
            status: RowStatus::Ok,
            messages: Vec::new(),
            wall_time_ms: None,
        }
    }

    fn require(&mut self, ok: bool, message: impl FnOnce() -> String) {
        if !ok {
            self.messages.push(message());
            if self.status == RowStatus::Ok {
                self.status = RowStatus::InvariantViolation;
            }
        }
    }

    fn fail(&mut self, err: Error) {
        self.status = match err {
            Error::Solver { .. } => RowStatus::SolverFailure,
            _ => RowStatus::InvariantViolation,
        };
        self.messages.push(err.to_string());
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub count: usize,
}

impl Stat {
    fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        Some(Self {
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            count: v.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: usize,
    pub passed: usize,
    pub invariant_violations: usize,
    pub solver_failures: usize,
    pub slack: Option<Stat>,
    pub defect: Option<Stat>,
    pub gap: Option<Stat>,
}

impl Summary {
    pub fn from_rows(rows: &[InstanceRow]) -> Self {
        let count = |s: RowStatus| rows.iter().filter(|r| r.status == s).count();
        Self {
            rows: rows.len(),
            passed: count(RowStatus::Ok),
            invariant_violations: count(RowStatus::InvariantViolation),
            solver_failures: count(RowStatus::SolverFailure),
            slack: Stat::of(rows.iter().filter_map(|r| r.outputs.slack)),
            defect: Stat::of(rows.iter().filter_map(|r| r.outputs.defect)),
            gap: Stat::of(rows.iter().filter_map(|r| r.outputs.gap)),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec_revision: String,
    pub rng_name: String,
    pub seed: u64,
    pub config: SweepConfig,
    pub instances: Vec<InstanceRow>,
    pub summary: Summary,
}

pub const CSV_COLUMNS: [&str; 13] = [
    "seed",
    "instance_id",
    "d_A",
    "d_B",
    "d_C",
    "rank_sigma",
    "value",
    "gap",
    "cqmi_bits",
    "neglogF_bits",
    "slack",
    "f_petz",
    "wall_time_ms",
];

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    fn new(config: SweepConfig, mut instances: Vec<InstanceRow>) -> Self {
        instances.sort_by_key(|r| r.instance_id);
        Self {
            spec_revision: SPEC_REVISION.to_string(),
            rng_name: RNG_NAME.to_string(),
            seed: config.seed,
            summary: Summary::from_rows(&instances),
            config,
            instances,
        }
    }

    /// Solver failures take precedence over invariant violations.
    pub fn exit_code(&self) -> i32 {
        if self.summary.solver_failures > 0 {
            EXIT_SOLVER
        } else if self.summary.invariant_violations > 0 {
            EXIT_INVARIANT
        } else {
            EXIT_OK
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(CSV_COLUMNS)?;
        for r in &self.instances {
            let o = &r.outputs;
            w.write_record([
                r.seed.to_string(),
                r.instance_id.to_string(),
                cell(r.d_a),
                cell(r.d_b),
                cell(r.d_c),
                cell(r.rank_sigma),
                cell(o.value),
                cell(o.gap),
                cell(o.cqmi_bits),
                cell(o.neg_log_for_bits),
                cell(o.slack),
                cell(o.f_petz),
                cell(r.wall_time_ms),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn tripartite_labels(rho: &LabeledState) -> Result<[String; 3]> {
    match rho.dims().labels()[..] {
        [a, b, c] => Ok([a.to_string(), b.to_string(), c.to_string()]),
        _ => Err(Error::InvalidArgument(format!(
            "expected a tripartite state, found factors {}",
            rho.dims()
        ))),
    }
}

fn check_recovery(row: &mut InstanceRow, r: &RecoveryResult) {
    let o = &mut row.outputs;
    o.value = Some(r.value);
    o.primal_lb = Some(r.primal_lb);
    o.dual_ub = Some(r.dual_ub);
    o.gap = Some(r.gap);
    o.achieved_fidelity = Some(r.achieved_fidelity);
    row.certificates.sdp = Some(r.certificate.clone());
    row.certificates.channel_check = Some(r.channel_check.clone());
    row.certificates.recovery_channel = Some(r.recovery_channel.clone());
    row.certificates.alberti_pair = Some(r.alberti_pair.clone());

    row.require(r.certificate.ok, || format!("certificate failed: {:?}", r.certificate));
    row.require(r.gap <= 1e-5 * (1.0 + r.value), || {
        format!("duality gap {:.3e} too large", r.gap)
    });
    row.require(r.channel_check.ok, || {
        format!("recovery channel not CPTP: {:?}", r.channel_check)
    });
    row.require(
        r.achieved_fidelity >= r.primal_lb - BOUNDS_TOL && r.achieved_fidelity <= r.dual_ub + BOUNDS_TOL,
        || {
            format!(
                "achieved fidelity {} outside [{}, {}]",
                r.achieved_fidelity, r.primal_lb, r.dual_ub
            )
        },
    );
    row.require(r.alberti_pair.is_feasible(BOUNDS_TOL), || {
        format!(
            "Alberti pair infeasible (min eigenvalue {:.3e})",
            r.alberti_pair.min_eigenvalue
        )
    });
    row.require(r.alberti_pair.objective <= r.dual_ub + BOUNDS_TOL, || {
        format!(
            "Alberti objective {} exceeds dual bound {}",
            r.alberti_pair.objective, r.dual_ub
        )
    });
}

/// Full analysis of a tripartite state: optimal recovery, CQMI bound and Petz map.
fn tripartite_row(row: &mut InstanceRow, rho: &LabeledState, kind: SweepKind) -> Result<()> {
    let [a, b, c] = tripartite_labels(rho)?;
    let dims = rho.dims();
    row.d_a = Some(dims.dim_of(&a)?);
    row.d_b = Some(dims.dim_of(&b)?);
    row.d_c = Some(dims.dim_of(&c)?);
    row.rank_sigma = Some(rho.marginal(&[&b, &c])?.rank());

    let r = for_conditional(rho)?;
    check_recovery(row, &r);
    let fr = fawzi_renner_gap_from(rho, &r)?;
    let petz = petz_gap_from(rho, &r)?;
    let o = &mut row.outputs;
    o.cqmi_bits = Some(fr.cqmi_bits);
    o.neg_log_for_bits = Some(fr.neg_log_for_bits);
    o.slack = Some(fr.slack);
    o.f_petz = Some(petz.f_petz);
    match kind {
        SweepKind::Fr => row.require(fr.slack >= -FR_SLACK_TOL, || {
            format!("CQMI bound violated: slack {}", fr.slack)
        }),
        SweepKind::Petz => row.require(petz.f_petz <= petz.f_opt + PETZ_TOL, || {
            format!("Petz map beats the optimum: {} > {}", petz.f_petz, petz.f_opt)
        }),
        _ => {}
    }
    Ok(())
}

fn product_row(
    row: &mut InstanceRow,
    rho1: &LabeledState,
    sigma1: &LabeledState,
    rho2: &LabeledState,
    sigma2: &LabeledState,
) -> Result<()> {
    row.d_a = Some(rho1.dims().factors()[0].1);
    row.d_b = rho1.dims().factors().get(1).map(|f| f.1);
    row.d_c = sigma1.dims().factors().get(1).map(|f| f.1);
    row.rank_sigma = Some(sigma1.rank() * sigma2.rank());
    let m = multiplicativity_check(rho1, sigma1, rho2, sigma2)?;
    let o = &mut row.outputs;
    o.value = Some(m.f12);
    o.f1 = Some(m.f1);
    o.f2 = Some(m.f2);
    o.defect = Some(m.defect);
    o.witness_objective = Some(m.witness_objective);
    o.witness_min_eigenvalue = Some(m.witness_min_eigenvalue);
    row.certificates.witness_feasible = Some(m.witness_feasible);
    row.require(m.defect.abs() <= DEFECT_TOL, || {
        format!("multiplicativity defect {}", m.defect)
    });
    row.require(m.witness_feasible, || {
        format!(
            "tensored Alberti pair infeasible (min eigenvalue {:.3e})",
            m.witness_min_eigenvalue
        )
    });
    let product = m.f1 * m.f2;
    row.require((m.witness_objective - product).abs() <= WITNESS_TOL, || {
        format!(
            "tensored Alberti objective {} differs from f1·f2 = {product}",
            m.witness_objective
        )
    });
    Ok(())
}

fn labeled(labels: &[(&str, usize)]) -> SystemDims {
    SystemDims::of(labels)
}

/// Inputs for one sweep instance, drawn from its own RNG stream so any row
/// can be regenerated from `(seed, instance_id)` alone.
pub fn instance_input(cfg: &SweepConfig, id: usize) -> Result<InstanceInput> {
    let mut rng = instance_rng(cfg.seed, id as u64);
    let rank = |rng: &mut rand_chacha::ChaCha20Rng, max: usize| {
        use rand::Rng;
        rng.random_range(1..=max)
    };
    match cfg.kind {
        SweepKind::Fr | SweepKind::Petz => {
            let dims = labeled(&[("A", cfg.d_a), ("B", cfg.d_b), ("C", cfg.d_c)]);
            // every fourth Petz instance is an exact Markov chain
            if cfg.kind == SweepKind::Petz && id % 4 == 3 && cfg.d_a == 2 && cfg.d_b == 2 {
                return Ok(InstanceInput::Tripartite {
                    rho: random_cq_markov_with(&mut rng, cfg.d_c)?,
                });
            }
            let k = rank(&mut rng, cfg.rank.min(dims.total()));
            Ok(InstanceInput::Tripartite {
                rho: random_state_with(&mut rng, dims, k, Measure::HilbertSchmidt)?,
            })
        }
        SweepKind::Mult => {
            let ab = labeled(&[("A", cfg.d_a), ("B", cfg.d_b)]);
            let ac = labeled(&[("A", cfg.d_a), ("C", cfg.d_c)]);
            let draw = |rng: &mut rand_chacha::ChaCha20Rng| -> Result<(LabeledState, LabeledState)> {
                let kr = rank(rng, cfg.rank.min(ab.total()));
                let ks = if cfg.rank1_sigma {
                    1
                } else {
                    rank(rng, cfg.rank.min(ac.total()))
                };
                Ok((
                    random_state_with(rng, ab.clone(), kr, Measure::HilbertSchmidt)?,
                    random_state_with(rng, ac.clone(), ks, Measure::HilbertSchmidt)?,
                ))
            };
            let (rho1, sigma1) = draw(&mut rng)?;
            let (rho2, sigma2) = draw(&mut rng)?;
            Ok(InstanceInput::Product {
                rho1,
                sigma1,
                rho2,
                sigma2,
            })
        }
        SweepKind::Selftest => Err(Error::InvalidArgument("selftest instances are fixed checks".into())),
    }
}

/// Runs one instance. Errors that concern the whole sweep (size cap) are
/// returned; anything else is recorded on the row.
pub fn run_instance(cfg: &SweepConfig, id: usize, input: InstanceInput) -> Result<InstanceRow> {
    let start = Instant::now();
    let mut row = InstanceRow::new(id, cfg.seed, input.clone());
    let outcome = match &input {
        InstanceInput::Tripartite { rho } => tripartite_row(&mut row, rho, cfg.kind),
        InstanceInput::Product {
            rho1,
            sigma1,
            rho2,
            sigma2,
        } => product_row(&mut row, rho1, sigma1, rho2, sigma2),
        InstanceInput::Check { name } => Err(Error::InvalidArgument(format!("`{name}` is not a sweep instance"))),
    };
    match outcome {
        Ok(()) => {}
        Err(e @ Error::SizeLimit { .. }) => return Err(e),
        Err(e) => row.fail(e),
    }
    if cfg.timings {
        row.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(row)
}

fn selftest_rows(cfg: &SweepConfig) -> Vec<InstanceRow> {
    selftest_checks()
        .iter()
        .enumerate()
        .map(|(id, check)| {
            let start = Instant::now();
            let mut row = InstanceRow::new(
                id,
                cfg.seed,
                InstanceInput::Check {
                    name: check.name.to_string(),
                },
            );
            match (check.run)() {
                Ok(None) => {}
                Ok(Some(msg)) => row.require(false, || msg),
                Err(e) => row.fail(e),
            }
            if cfg.timings {
                row.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
            }
            row
        })
        .collect()
}

/// Runs a sweep. Instances are independent and evaluated in order of
/// `instance_id`, so the report depends only on the configuration.
pub fn run_sweep(cfg: &SweepConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let rows = if cfg.kind == SweepKind::Selftest {
        selftest_rows(cfg)
    } else {
        let mut rows = Vec::with_capacity(cfg.n);
        for id in 0..cfg.n {
            rows.push(run_instance(cfg, id, instance_input(cfg, id)?)?);
        }
        rows
    };
    Ok(ExperimentReport::new(cfg.clone(), rows))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowRecheck {
    /// Fidelity of the stored channel's output with the stored input.
    pub achieved_fidelity: Option<f64>,
    pub channel_check: Option<CptpReport>,
    /// Alberti objective and feasibility recomputed from the stored pair.
    pub alberti_objective: Option<f64>,
    pub alberti_min_eigenvalue: Option<f64>,
    pub cqmi_bits: Option<f64>,
}

/// Recomputes the witnesses of a tripartite row from its serialized data,
/// without running the solver.
pub fn recheck_row(row: &InstanceRow) -> Result<RowRecheck> {
    let mut out = RowRecheck {
        achieved_fidelity: None,
        channel_check: None,
        alberti_objective: None,
        alberti_min_eigenvalue: None,
        cqmi_bits: None,
    };
    let InstanceInput::Tripartite { rho } = &row.input else {
        return Ok(out);
    };
    let [a, b, c] = tripartite_labels(rho)?;
    let labels = [a.as_str(), b.as_str(), c.as_str()];
    out.cqmi_bits = Some(cqmi(rho)?);
    if let Some(ch) = &row.certificates.recovery_channel {
        let rec = apply_choi(ch, &rho.marginal(&[&b, &c])?)?.permuted(&labels)?;
        out.achieved_fidelity = Some(fidelity(rho, &rec)?);
        out.channel_check = Some(is_cptp(ch, CPTP_TOL));
    }
    if let Some(p) = &row.certificates.alberti_pair {
        out.alberti_objective = Some(alberti_objective(rho, &p.r_ab, &p.sigma_ad, &p.q_ad)?);
        out.alberti_min_eigenvalue = Some(alberti_feasibility(&p.r_ab, &p.q_ad)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForReport {
    pub value: f64,
    pub gap: f64,
    pub neg_log_value_bits: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cqmi_bits: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fr_slack: Option<f64>,
    pub result: RecoveryResult,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
}

impl ForReport {
    pub fn exit_code(&self) -> i32 {
        if self.violations.is_empty() {
            EXIT_OK
        } else {
            EXIT_INVARIANT
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "value        {:.6}\ngap          {:.3e}\n-log2 value  {:.6}\n",
            self.value, self.gap, self.neg_log_value_bits
        );
        if let (Some(c), Some(sl)) = (self.cqmi_bits, self.fr_slack) {
            s += &format!("cqmi_bits    {c:.6}\nfr_slack     {sl:.6}\n");
        }
        for v in &self.violations {
            s += &format!("violation: {v}\n");
        }
        s
    }
}

fn for_report(result: RecoveryResult, cqmi_bits: Option<f64>, fr_slack: Option<f64>) -> ForReport {
    let mut row = InstanceRow::new(0, 0, InstanceInput::Check { name: "for".into() });
    check_recovery(&mut row, &result);
    if let Some(sl) = fr_slack {
        row.require(sl >= -FR_SLACK_TOL, || format!("CQMI bound violated: slack {sl}"));
    }
    ForReport {
        value: result.value,
        gap: result.gap,
        neg_log_value_bits: -result.value.log2(),
        cqmi_bits,
        fr_slack,
        result,
        violations: row.messages,
    }
}

/// `F(A;B|C)` of a tripartite state with the CQMI comparison.
pub fn cmd_for_conditional(rho: &LabeledState) -> Result<ForReport> {
    let result = for_conditional(rho)?;
    let fr = fawzi_renner_gap_from(rho, &result)?;
    Ok(for_report(result, Some(fr.cqmi_bits), Some(fr.slack)))
}

/// `F_{C→B}(ρ‖σ)` for an explicit pair.
pub fn cmd_for_pair(rho: &LabeledState, sigma: &LabeledState) -> Result<ForReport> {
    Ok(for_report(
        crate::recovery::fidelity_of_recovery(rho, sigma)?,
        None,
        None,
    ))
}

/// Reads a state file, reporting JSON syntax errors with their position.
pub fn read_state(path: &Path) -> Result<LabeledState> {
    let text = std::fs::read_to_string(path)?;
    let file: crate::linalg::MatrixFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        field: format!("{}:{}:{}", path.display(), e.line(), e.column()),
        message: e.to_string(),
    })?;
    LabeledState::from_file(&file).map_err(|e| match e {
        Error::Parse { field, message } => Error::Parse {
            field: format!("{}: {field}", path.display()),
            message,
        },
        other => other,
    })
}
