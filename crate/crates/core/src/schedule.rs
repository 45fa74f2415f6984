//! Measurement plans and their execution.
//!
//! A [`MeasurementPlan`] is an ordered list of measurement steps on an initial
//! state, with free evolution under `H0` between step times. Running a plan
//! once gives a [`CycleRecord`]; [`run_ensemble`] runs `N` independent cycles
//! and packs them into a [`RecordSet`].
//!
//! Cycle `i` of an ensemble draws from its own ChaCha8 stream, keyed by
//! `(master_seed, i)`, so a record set depends only on the plan, `N` and the
//! seed. Worker count and scheduling order do not matter.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::meter::{PointerSpec, Reading, SpectralDecomp, Workspace};
use crate::qcore::{chsh_observables, epr_state, heisenberg, spin_observable, two_time_corr, Hamiltonian, Matrix, Observable, StateVector, Subsystem};

/// Cycles handed to one rayon task.
const BLOCK: usize = 4096;

/// Labels of the four scored CHSH readings.
pub const A1: &str = "A1";
pub const A2: &str = "A2";
pub const B1: &str = "B1";
pub const B2: &str = "B2";
/// Labels of the strong certificate readings.
pub const A_CERT: &str = "As";
pub const B_CERT: &str = "Bs";

/// Random stream for cycle `index` of an ensemble seeded with `master_seed`.
pub fn cycle_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Party {
    A,
    B,
    Single,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::A => "A",
            Party::B => "B",
            Party::Single => "single",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    Weak(PointerSpec),
    Strong,
}

/// What a step measures: a fixed observable, or one drawn uniformly per cycle
/// (the certificate step).
#[derive(Clone, Debug)]
pub enum Target {
    Fixed(Observable),
    Choice(Vec<Observable>),
}

#[derive(Clone, Debug)]
pub struct Step {
    pub label: String,
    pub party: Party,
    pub target: Target,
    pub mode: Mode,
    pub time: f64,
}

impl Step {
    pub fn weak(label: impl Into<String>, party: Party, op: Observable, sigma: f64, time: f64) -> Result<Self> {
        Ok(Self {
            label: label.into(),
            party,
            target: Target::Fixed(op),
            mode: Mode::Weak(PointerSpec::new(sigma)?),
            time,
        })
    }

    pub fn strong(label: impl Into<String>, party: Party, op: Observable, time: f64) -> Self {
        Self { label: label.into(), party, target: Target::Fixed(op), mode: Mode::Strong, time }
    }

    pub fn certificate(label: impl Into<String>, party: Party, choices: Vec<Observable>, time: f64) -> Self {
        Self { label: label.into(), party, target: Target::Choice(choices), mode: Mode::Strong, time }
    }

    fn observables(&self) -> &[Observable] {
        match &self.target {
            Target::Fixed(op) => std::slice::from_ref(op),
            Target::Choice(ops) => ops,
        }
    }
}

/// One-based indices `(i, j)` of a correlation `E(q^A_i q^B_j)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Pair {
    pub a: u8,
    pub b: u8,
}

impl Pair {
    /// CHSH order: (1,1), (1,2), (2,1), (2,2).
    pub const CHSH: [Pair; 4] = [Pair { a: 1, b: 1 }, Pair { a: 1, b: 2 }, Pair { a: 2, b: 1 }, Pair { a: 2, b: 2 }];

    pub fn new(a: u8, b: u8) -> Self {
        Self { a, b }
    }

    /// Labels of the weak readings that make up this pair.
    pub fn weak_labels(&self) -> Result<(&'static str, &'static str)> {
        let a = match self.a {
            1 => A1,
            2 => A2,
            _ => return Err(Error::InvalidArgument(format!("no A reading {}", self.a))),
        };
        let b = match self.b {
            1 => B1,
            2 => B2,
            _ => return Err(Error::InvalidArgument(format!("no B reading {}", self.b))),
        };
        Ok((a, b))
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

#[derive(Clone, Debug)]
pub struct MeasurementPlan {
    steps: Vec<Step>,
    initial_state: StateVector,
    h0: Hamiltonian,
    description: String,
}

impl MeasurementPlan {
    /// Validates and builds a plan.
    ///
    /// Times must be finite and non-decreasing, labels unique, and every
    /// operator must act on the initial state's register. Choice steps must be
    /// strong, come after every weak step, and appear at most once per party.
    pub fn new(
        initial_state: StateVector,
        h0: Hamiltonian,
        steps: Vec<Step>,
        description: impl Into<String>,
    ) -> Result<Self> {
        let dim = initial_state.dim();
        if h0.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: h0.dim() });
        }
        if steps.is_empty() {
            return Err(Error::InvalidPlan("plan has no steps".into()));
        }
        let mut last_time = 0.0f64;
        let mut seen = std::collections::HashSet::new();
        let mut choice_parties = Vec::new();
        let last_weak = steps.iter().rposition(|s| matches!(s.mode, Mode::Weak(_)));
        for (i, step) in steps.iter().enumerate() {
            if !step.time.is_finite() || step.time < last_time {
                return Err(Error::InvalidPlan(format!(
                    "step {:?} at time {} breaks the non-decreasing time order",
                    step.label, step.time
                )));
            }
            last_time = step.time;
            if !seen.insert(step.label.as_str()) {
                return Err(Error::InvalidPlan(format!("duplicate step label {:?}", step.label)));
            }
            for op in step.observables() {
                if op.dim() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: op.dim() });
                }
            }
            if let Target::Choice(ops) = &step.target {
                if ops.is_empty() {
                    return Err(Error::InvalidPlan(format!("choice step {:?} has no options", step.label)));
                }
                if step.mode != Mode::Strong {
                    return Err(Error::InvalidPlan(format!("choice step {:?} must be strong", step.label)));
                }
                if last_weak.is_some_and(|w| w > i) {
                    return Err(Error::InvalidPlan(format!(
                        "choice step {:?} precedes a weak step",
                        step.label
                    )));
                }
                if choice_parties.contains(&step.party) {
                    return Err(Error::InvalidPlan(format!("party {} has two choice steps", step.party)));
                }
                choice_parties.push(step.party);
            }
        }
        Ok(Self { steps, initial_state, h0, description: description.into() })
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.initial_state
    }

    pub fn h0(&self) -> &Hamiltonian {
        &self.h0
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn labels(&self) -> Vec<String> {
        self.steps.iter().map(|s| s.label.clone()).collect()
    }

    pub fn step_index(&self, label: &str) -> Option<usize> {
        self.steps.iter().position(|s| s.label == label)
    }

    /// Weak-limit prediction `Re <psi| O_i(t_i) O_j(t_j) |psi>` for two fixed steps.
    pub fn weak_limit_correlation(&self, first: &str, second: &str) -> Result<f64> {
        let fixed = |label: &str| -> Result<&Step> {
            let step = self
                .step_index(label)
                .map(|i| &self.steps[i])
                .ok_or_else(|| Error::MissingStep(label.to_owned()))?;
            match step.target {
                Target::Fixed(_) => Ok(step),
                Target::Choice(_) => Err(Error::InvalidArgument(format!("step {label:?} has no fixed observable"))),
            }
        };
        let (si, sj) = (fixed(first)?, fixed(second)?);
        let oi = heisenberg(&si.observables()[0], &self.h0, si.time)?;
        let oj = heisenberg(&sj.observables()[0], &self.h0, sj.time)?;
        // Operator order follows time order.
        if sj.time < si.time {
            two_time_corr(&self.initial_state, &oj, &oi)
        } else {
            two_time_corr(&self.initial_state, &oi, &oj)
        }
    }

    fn certificate_steps(&self) -> Option<(usize, usize)> {
        let find = |party| {
            self.steps
                .iter()
                .position(|s| s.party == party && matches!(s.target, Target::Choice(_)))
        };
        Some((find(Party::A)?, find(Party::B)?))
    }

    pub fn is_certified(&self) -> bool {
        self.certificate_steps().is_some()
    }
}

/// Sequential CHSH on the EPR state, `H0 = 0`.
///
/// `n_prior` complete CHSH sequences precede the scored one. Each sequence is
/// `A: sigma_x then sigma_z`, `B: sigma_{pi/4} then sigma_{3pi/4}`, all weak at
/// `sigma`, so consecutive observables of a party always anticommute. Scored
/// readings are labelled `A1, B1, A2, B2`; prior ones `p{k}:A1` and so on.
pub fn chsh_sequential_plan(sigma: f64, n_prior: usize) -> Result<MeasurementPlan> {
    PointerSpec::new(sigma)?;
    let ([a1, a2], [b1, b2]) = chsh_observables();
    let mut steps = Vec::with_capacity(4 * (n_prior + 1));
    for k in 0..=n_prior {
        let prefix = if k == n_prior { String::new() } else { format!("p{k}:") };
        let t = 2.0 * k as f64;
        steps.push(Step::weak(format!("{prefix}{A1}"), Party::A, a1.clone(), sigma, t + 1.0)?);
        steps.push(Step::weak(format!("{prefix}{B1}"), Party::B, b1.clone(), sigma, t + 1.0)?);
        steps.push(Step::weak(format!("{prefix}{A2}"), Party::A, a2.clone(), sigma, t + 2.0)?);
        steps.push(Step::weak(format!("{prefix}{B2}"), Party::B, b2.clone(), sigma, t + 2.0)?);
    }
    MeasurementPlan::new(
        epr_state(),
        Hamiltonian::zero(2)?,
        steps,
        format!("chsh-sequential sigma={sigma} n_prior={n_prior}"),
    )
}

/// Weak CHSH sequence on an arbitrary two-qubit state and observables
/// (`A1, B1` at t = 1, `A2, B2` at t = 2), optionally under a free Hamiltonian.
pub fn sequential_pair_plan(
    state: StateVector,
    a: [Observable; 2],
    b: [Observable; 2],
    sigma: f64,
    h0: Hamiltonian,
) -> Result<MeasurementPlan> {
    let [a1, a2] = a;
    let [b1, b2] = b;
    let steps = vec![
        Step::weak(A1, Party::A, a1, sigma, 1.0)?,
        Step::weak(B1, Party::B, b1, sigma, 1.0)?,
        Step::weak(A2, Party::A, a2, sigma, 2.0)?,
        Step::weak(B2, Party::B, b2, sigma, 2.0)?,
    ];
    MeasurementPlan::new(state, h0, steps, format!("sequential-pair sigma={sigma}"))
}

/// Sequential CHSH followed by one strong measurement per party of an
/// observable drawn uniformly from that party's two CHSH observables.
///
/// The choice is drawn per cycle from the cycle's own stream after all weak
/// steps have run, and reported in [`CycleRecord::certificate_choice`].
pub fn certified_plan(sigma: f64) -> Result<MeasurementPlan> {
    let base = chsh_sequential_plan(sigma, 0)?;
    let ([a1, a2], [b1, b2]) = chsh_observables();
    let mut steps = base.steps;
    steps.push(Step::certificate(A_CERT, Party::A, vec![a1, a2], 3.0));
    steps.push(Step::certificate(B_CERT, Party::B, vec![b1, b2], 3.0));
    MeasurementPlan::new(base.initial_state, base.h0, steps, format!("chsh-certified sigma={sigma}"))
}

/// Single-qubit Leggett-Garg sequence: `spin(theta_k)` measured weakly in the
/// listed order (`Q1, Q2, ...` at times 1, 2, ...), `H0 = 0`.
pub fn lg_plan(angles: &[f64], sigma: f64, psi0: StateVector) -> Result<MeasurementPlan> {
    if angles.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "a Leggett-Garg sequence needs at least 3 angles, got {}",
            angles.len()
        )));
    }
    if psi0.num_qubits() != 1 {
        return Err(Error::DimensionMismatch { expected: 2, found: psi0.dim() });
    }
    let steps = angles
        .iter()
        .enumerate()
        .map(|(k, &theta)| {
            let op = spin_observable(theta, Subsystem::SINGLE)?;
            Step::weak(lg_label(k), Party::Single, op, sigma, (k + 1) as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    MeasurementPlan::new(psi0, Hamiltonian::zero(1)?, steps, format!("leggett-garg sigma={sigma} angles={angles:?}"))
}

/// Label of the `k`-th (zero-based) reading of a Leggett-Garg plan.
pub fn lg_label(k: usize) -> String {
    format!("Q{}", k + 1)
}

/// Readings of one cycle, in step order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleRecord {
    pub readings: Vec<Reading>,
    pub certificate_choice: Option<Pair>,
    pub seed_index: u64,
}

impl CycleRecord {
    pub fn get(&self, label: &str) -> Option<&Reading> {
        self.readings.iter().find(|r| r.label == label)
    }
}

struct CompiledStep {
    spectra: Vec<SpectralDecomp>,
    mode: Mode,
    /// Free evolution since the previous step, if any.
    propagator: Option<Matrix>,
}

struct CompiledPlan {
    steps: Vec<CompiledStep>,
    initial: Vec<Complex64>,
    certificate: Option<(usize, usize)>,
}

impl CompiledPlan {
    fn new(plan: &MeasurementPlan) -> Result<Self> {
        let mut now = 0.0;
        let steps = plan
            .steps
            .iter()
            .map(|step| {
                let dt = step.time - now;
                now = step.time;
                let propagator = (dt > 0.0 && !plan.h0.is_zero()).then(|| plan.h0.propagator(dt));
                Ok(CompiledStep {
                    spectra: step.observables().iter().map(SpectralDecomp::of).collect::<Result<_>>()?,
                    mode: step.mode,
                    propagator,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            steps,
            initial: plan.initial_state.amplitudes().to_vec(),
            certificate: plan.certificate_steps(),
        })
    }

    /// Runs one cycle, writing one reading per step into `out`.
    fn run<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        out: &mut [f64],
        amps: &mut Vec<Complex64>,
        evolved: &mut Vec<Complex64>,
        work: &mut Workspace,
    ) -> Result<Option<Pair>> {
        amps.clear();
        amps.extend_from_slice(&self.initial);
        let mut choices = [0u8; 2];
        for (idx, (step, slot)) in self.steps.iter().zip(out.iter_mut()).enumerate() {
            if let Some(u) = &step.propagator {
                evolved.resize(amps.len(), Complex64::default());
                crate::qcore::mat_vec(u, amps, evolved);
                std::mem::swap(amps, evolved);
            }
            let pick = if step.spectra.len() > 1 { rng.random_range(0..step.spectra.len()) } else { 0 };
            if let Some((ia, ib)) = self.certificate {
                if idx == ia {
                    choices[0] = pick as u8 + 1;
                } else if idx == ib {
                    choices[1] = pick as u8 + 1;
                }
            }
            let spectrum = &step.spectra[pick];
            *slot = match step.mode {
                Mode::Weak(ptr) => spectrum.weak_in_place(amps, ptr, rng, work)?,
                Mode::Strong => spectrum.strong_in_place(amps, rng, work)?,
            };
        }
        Ok(self.certificate.map(|_| Pair::new(choices[0], choices[1])))
    }
}

/// Runs a plan once with the caller's stream.
pub fn run_cycle<R: Rng + ?Sized>(plan: &MeasurementPlan, rng: &mut R) -> Result<CycleRecord> {
    let compiled = CompiledPlan::new(plan)?;
    let mut out = vec![0.0; plan.steps.len()];
    let choice = compiled.run(rng, &mut out, &mut Vec::new(), &mut Vec::new(), &mut Workspace::default())?;
    Ok(CycleRecord {
        readings: plan
            .steps
            .iter()
            .zip(out)
            .map(|(s, q)| Reading { q, label: s.label.clone() })
            .collect(),
        certificate_choice: choice,
        seed_index: 0,
    })
}

/// `N` cycles with per-cycle streams derived from `master_seed`.
pub fn run_ensemble(plan: &MeasurementPlan, n: usize, master_seed: u64) -> Result<RecordSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("ensemble size must be at least 1".into()));
    }
    let compiled = CompiledPlan::new(plan)?;
    let width = plan.steps.len();
    let mut readings = vec![0.0; n * width];
    let blocks: Vec<Vec<Option<Pair>>> = readings
        .par_chunks_mut(BLOCK * width)
        .enumerate()
        .map(|(block, chunk)| {
            let (mut amps, mut evolved, mut work) = (Vec::new(), Vec::new(), Workspace::default());
            let first = block * BLOCK;
            chunk
                .chunks_mut(width)
                .enumerate()
                .map(|(offset, row)| {
                    let mut rng = cycle_rng(master_seed, (first + offset) as u64);
                    compiled.run(&mut rng, row, &mut amps, &mut evolved, &mut work)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let certificate = compiled
        .certificate
        .map(|_| blocks.into_iter().flatten().map(|c| c.expect("certified plan")).collect());
    RecordSet::from_parts(plan.labels(), readings, certificate, plan.description.clone(), master_seed)
}

/// Ensemble of cycle records, stored as a dense `N x steps` table.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordSet {
    labels: Vec<String>,
    readings: Vec<f64>,
    certificate: Option<Vec<Pair>>,
    description: String,
    master_seed: u64,
}

impl RecordSet {
    /// Assembles a record set from row-major readings; row `i` has seed index `i`.
    pub fn from_parts(
        labels: Vec<String>,
        readings: Vec<f64>,
        certificate: Option<Vec<Pair>>,
        description: String,
        master_seed: u64,
    ) -> Result<Self> {
        let width = labels.len();
        if width == 0 || !readings.len().is_multiple_of(width) {
            return Err(Error::InvalidArgument(format!(
                "{} readings do not fill rows of {width} labels",
                readings.len()
            )));
        }
        let n = readings.len() / width;
        if let Some(c) = &certificate {
            if c.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: c.len() });
            }
        }
        Ok(Self { labels, readings, certificate, description, master_seed })
    }

    pub fn len(&self) -> usize {
        self.readings.len() / self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn step_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::MissingStep(label.to_owned()))
    }

    /// Row `i` of the table: one reading per step.
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.labels.len();
        &self.readings[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.readings.chunks_exact(self.labels.len())
    }

    pub fn certificate_choices(&self) -> Option<&[Pair]> {
        self.certificate.as_deref()
    }

    pub fn record(&self, i: usize) -> CycleRecord {
        CycleRecord {
            readings: self
                .labels
                .iter()
                .zip(self.row(i))
                .map(|(l, &q)| Reading { q, label: l.clone() })
                .collect(),
            certificate_choice: self.certificate.as_ref().map(|c| c[i]),
            seed_index: i as u64,
        }
    }

    /// Same records in a different order, for permutation-invariance checks.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: order.len() });
        }
        let readings = order.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        let certificate = self.certificate.as_ref().map(|c| order.iter().map(|&i| c[i]).collect());
        Self::from_parts(self.labels.clone(), readings, certificate, self.description.clone(), self.master_seed)
    }

    /// First `n` records.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let n = n.min(self.len());
        let readings = self.readings[..n * self.labels.len()].to_vec();
        let certificate = self.certificate.as_ref().map(|c| c[..n].to_vec());
        Self::from_parts(self.labels.clone(), readings, certificate, self.description.clone(), self.master_seed)
    }
}
