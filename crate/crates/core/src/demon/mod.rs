//! Deterministic demons driving the engine.
//!
//! A policy maps `(pc, register)` to an action and the next `pc`. It never
//! sees the engine, so anything it learns about the particle has to pass
//! through a `Measure` into the register.

pub mod search;

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coding::{binary_entropy, enumerative_encode, k_estimate, Codeword, RecordTape};
use crate::engine::{
    self, EngineError, EngineGeometry, EngineWorld, ParticleSide, Side, TraceRecord, WorkLedger,
};
use crate::stats::RunningStats;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Register {
    #[default]
    Blank,
    Left,
    Right,
}

impl Register {
    pub const ALL: [Register; 3] = [Register::Blank, Register::Left, Register::Right];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl From<Side> for Register {
    fn from(s: Side) -> Self {
        match s {
            Side::Left => Register::Left,
            Side::Right => Register::Right,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemonState {
    pub register: Register,
    /// Archived outcomes, `true` for Left.
    pub tape: RecordTape,
    /// The tape after compression, replacing it.
    pub compressed: Option<Codeword>,
    pub pc: usize,
}

impl DemonState {
    pub fn occupied_bits(&self) -> u64 {
        let reg = u64::from(self.register != Register::Blank);
        let stored = match &self.compressed {
            Some(c) => c.len(),
            None => self.tape.len(),
        };
        reg + stored as u64
    }

    /// Blanks `n` bits: the register first, then stored bits from the end.
    pub(crate) fn clear_bits(&mut self, mut n: u64) {
        if n > 0 && self.register != Register::Blank {
            self.register = Register::Blank;
            n -= 1;
        }
        if n == 0 {
            return;
        }
        if let Some(c) = &mut self.compressed {
            let keep = c.payload.len().saturating_sub(n as usize);
            c.payload.truncate(keep);
            if keep == 0 {
                self.compressed = None;
            }
        } else {
            let keep = self.tape.len().saturating_sub(n as usize);
            self.tape.truncate(keep);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    InsertPartition,
    Measure,
    UndoMeasure,
    Expand,
    ExtractPartition,
    /// Compresses any stored tape, then erases all occupied memory.
    Erase,
    /// Moves the register contents onto the tape, leaving the register blank.
    Archive,
    Halt,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::InsertPartition => "insert_partition",
            Action::Measure => "measure",
            Action::UndoMeasure => "undo_measurement",
            Action::Expand => "isothermal_expansion",
            Action::ExtractPartition => "extract_partition",
            Action::Erase => "erase",
            Action::Archive => "archive",
            Action::Halt => "halt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub action: Action,
    pub next: usize,
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("policy declares no control states")]
    Empty,
    #[error("unknown control state {0:?}")]
    UnknownState(String),
    #[error("duplicate control state {0:?}")]
    DuplicateState(String),
    #[error("transition for ({0}, {1:?}) given twice")]
    Duplicate(String, Register),
    #[error("no transition for ({0}, {1:?})")]
    Missing(String, Register),
    #[error("unknown preset {0:?}; known: standard, choice-undo-first, choice-extract-first, delayed-erasure")]
    UnknownPreset(String),
}

/// Total transition table over `control_states x {Blank, Left, Right}`.
/// The first control state is the start state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    name: String,
    control_states: Vec<String>,
    table: Vec<[Transition; 3]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PolicyDoc {
    name: String,
    control_states: Vec<String>,
    transitions: Vec<TransitionDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TransitionDoc {
    state: String,
    register: Register,
    action: Action,
    next: String,
}

pub const PRESETS: [&str; 4] = [
    "standard",
    "choice-undo-first",
    "choice-extract-first",
    "delayed-erasure",
];

impl Policy {
    pub fn new(
        name: impl Into<String>,
        control_states: Vec<String>,
        table: Vec<[Transition; 3]>,
    ) -> Result<Self, PolicyError> {
        if control_states.is_empty() {
            return Err(PolicyError::Empty);
        }
        for (i, s) in control_states.iter().enumerate() {
            if control_states[..i].contains(s) {
                return Err(PolicyError::DuplicateState(s.clone()));
            }
        }
        if table.len() != control_states.len() {
            return Err(PolicyError::Missing(
                control_states[table.len().min(control_states.len() - 1)].clone(),
                Register::Blank,
            ));
        }
        if let Some(bad) = table.iter().flatten().find(|t| t.next >= control_states.len()) {
            return Err(PolicyError::UnknownState(format!("#{}", bad.next)));
        }
        Ok(Self {
            name: name.into(),
            control_states,
            table,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn control_states(&self) -> &[String] {
        &self.control_states
    }

    pub fn start(&self) -> usize {
        0
    }

    pub fn transition(&self, pc: usize, register: Register) -> Transition {
        self.table[pc][register.index()]
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let doc: PolicyDoc = serde_json::from_str(text)?;
        let index = |s: &str| {
            doc.control_states
                .iter()
                .position(|c| c == s)
                .ok_or_else(|| PolicyError::UnknownState(s.to_string()))
        };
        let mut slots: Vec<[Option<Transition>; 3]> = vec![[None; 3]; doc.control_states.len()];
        for t in &doc.transitions {
            let pc = index(&t.state)?;
            let slot = &mut slots[pc][t.register.index()];
            if slot.is_some() {
                return Err(PolicyError::Duplicate(t.state.clone(), t.register));
            }
            *slot = Some(Transition {
                action: t.action,
                next: index(&t.next)?,
            });
        }
        let mut table = Vec::with_capacity(slots.len());
        for (pc, row) in slots.iter().enumerate() {
            let mut full = [Transition { action: Action::Halt, next: 0 }; 3];
            for r in Register::ALL {
                full[r.index()] = row[r.index()]
                    .ok_or_else(|| PolicyError::Missing(doc.control_states[pc].clone(), r))?;
            }
            table.push(full);
        }
        Self::new(doc.name, doc.control_states, table)
    }

    pub fn to_json(&self) -> String {
        let transitions = self
            .table
            .iter()
            .enumerate()
            .flat_map(|(pc, row)| {
                Register::ALL.into_iter().map(move |r| TransitionDoc {
                    state: self.control_states[pc].clone(),
                    register: r,
                    action: row[r.index()].action,
                    next: self.control_states[row[r.index()].next].clone(),
                })
            })
            .collect();
        let doc = PolicyDoc {
            name: self.name.clone(),
            control_states: self.control_states.clone(),
            transitions,
        };
        serde_json::to_string_pretty(&doc).expect("policy serializes")
    }

    pub fn preset(name: &str) -> Result<Self, PolicyError> {
        const START: usize = 0;
        const ARMED: usize = 1;
        const SPENT: usize = 2;
        let t = |action, next| Transition { action, next };
        let mut table = vec![
            [
                t(Action::InsertPartition, ARMED),
                t(Action::Halt, START),
                t(Action::Halt, START),
            ],
            [
                t(Action::Measure, ARMED),
                t(Action::Expand, SPENT),
                t(Action::Expand, SPENT),
            ],
            [
                t(Action::Halt, SPENT),
                t(Action::Erase, START),
                t(Action::Erase, START),
            ],
        ];
        let right = Register::Right.index();
        match name {
            "standard" => {}
            "choice-undo-first" => table[ARMED][right] = t(Action::UndoMeasure, ARMED),
            "choice-extract-first" => table[ARMED][right] = t(Action::ExtractPartition, SPENT),
            "delayed-erasure" => {
                table[SPENT][Register::Left.index()] = t(Action::Archive, START);
                table[SPENT][right] = t(Action::Archive, START);
            }
            _ => return Err(PolicyError::UnknownPreset(name.to_string())),
        }
        let states = ["start", "armed", "spent"].map(String::from).to_vec();
        Self::new(name, states, table)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.name)?;
        for (pc, row) in self.table.iter().enumerate() {
            for r in Register::ALL {
                let t = row[r.index()];
                write!(
                    f,
                    " ({},{:?})->{:?}->{}",
                    self.control_states[pc],
                    r,
                    t.action,
                    self.control_states[t.next]
                )?;
            }
        }
        Ok(())
    }
}

/// How the particle lands when the partition goes in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Placement {
    Random,
    Forced(Side),
}

/// Independent stream `trial` of the generator seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// What one applied action did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEffect {
    pub action: Action,
    pub work: f64,
    pub erasure: f64,
    pub halted: bool,
}

/// Applies `action` to the engine and memory, posting work and erasure to the
/// ledger. The control state is left alone.
pub fn apply_action<R: Rng + ?Sized>(
    action: Action,
    world: &mut EngineWorld,
    demon: &mut DemonState,
    ledger: &mut WorkLedger,
    placement: Placement,
    rng: &mut R,
) -> Result<StepEffect, EngineError> {
    let paid_before = ledger.erasure_paid;
    let mut work = 0.0;
    match action {
        Action::InsertPartition => match placement {
            Placement::Random => engine::insert_partition(world, rng)?,
            Placement::Forced(side) => engine::insert_partition_at(world, side)?,
        },
        Action::Measure => engine::measure(world, demon)?,
        Action::UndoMeasure => engine::undo_measurement(world, demon)?,
        Action::Expand => {
            work = engine::isothermal_expansion(world, demon)?;
            ledger.extracted += work;
        }
        Action::ExtractPartition => engine::extract_partition(world)?,
        Action::Erase => {
            if demon.compressed.is_none() && !demon.tape.is_empty() {
                demon.compressed = Some(enumerative_encode(&demon.tape));
                demon.tape.clear();
            }
            let n = demon.occupied_bits();
            engine::erase(demon, ledger, n)?;
        }
        Action::Archive => {
            if demon.compressed.is_some() {
                return Err(EngineError::Protocol("tape already compressed"));
            }
            let bit = match demon.register {
                Register::Blank => return Err(EngineError::Protocol("nothing to archive")),
                r => r == Register::Left,
            };
            demon.tape.push(bit);
            demon.register = Register::Blank;
            world.correlated = false;
        }
        Action::Halt => {}
    }
    ledger.erasure_debt = demon.occupied_bits();
    Ok(StepEffect {
        action,
        work,
        erasure: ledger.erasure_paid - paid_before,
        halted: action == Action::Halt,
    })
}

/// Looks up the policy, applies the action and advances `pc`.
pub fn step<R: Rng + ?Sized>(
    world: &mut EngineWorld,
    demon: &mut DemonState,
    policy: &Policy,
    ledger: &mut WorkLedger,
    placement: Placement,
    rng: &mut R,
) -> Result<StepEffect, EngineError> {
    let t = policy.transition(demon.pc, demon.register);
    let effect = apply_action(t.action, world, demon, ledger, placement, rng)?;
    demon.pc = t.next;
    Ok(effect)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Termination {
    CompletedCycles,
    Livelock,
    Halted,
    ProtocolError(String),
    /// Step budget ran out before any other outcome.
    BudgetExhausted,
}

/// A configuration seen twice with no random event in between.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LivelockWitness {
    pub pc: String,
    pub register: Register,
    pub world: EngineWorld,
    /// Step count when the configuration was first reached.
    pub first_seen: u64,
    /// Step count when it recurred.
    pub repeated_at: u64,
    pub period: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub policy: String,
    pub ledger: WorkLedger,
    pub steps: u64,
    pub termination: Termination,
    pub livelock_witness: Option<LivelockWitness>,
    /// Net work of each completed cycle.
    pub per_cycle: RunningStats,
    pub world: EngineWorld,
    #[serde(skip)]
    pub memory: DemonState,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Stop after this many completed cycles.
    pub cycles: Option<u64>,
    pub max_steps: u64,
    pub placement: Placement,
    pub seed: u64,
    pub trial: u64,
    pub trace: bool,
}

impl RunOptions {
    pub fn cycles(cycles: u64, seed: u64) -> Self {
        Self {
            cycles: Some(cycles),
            max_steps: cycles.saturating_mul(16).saturating_add(64),
            placement: Placement::Random,
            seed,
            trial: 0,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct ConfigKey {
    pc: usize,
    register: Register,
    particle: ParticleSide,
    partition_in: bool,
    correlated: bool,
    gas_offset: u64,
    tape_len: usize,
    tape_weight: usize,
    compressed: Option<usize>,
}

impl ConfigKey {
    fn of(world: &EngineWorld, demon: &DemonState) -> Self {
        Self {
            pc: demon.pc,
            register: demon.register,
            particle: world.particle_side,
            partition_in: world.partition_in,
            correlated: world.correlated,
            gas_offset: world.gas_entropy_offset.to_bits(),
            tape_len: demon.tape.len(),
            tape_weight: demon.tape.weight(),
            compressed: demon.compressed.as_ref().map(Codeword::len),
        }
    }
}

/// Runs `policy` from a fresh engine and blank memory.
///
/// A cycle completes whenever control returns to the start state with the
/// partition out after at least one insertion. Between insertions the system
/// is deterministic, so the first repeated configuration is reported as a
/// livelock.
pub fn run_policy(policy: &Policy, geometry: EngineGeometry, opts: RunOptions) -> RunReport {
    let mut world = EngineWorld::new(geometry);
    let mut demon = DemonState {
        pc: policy.start(),
        ..DemonState::default()
    };
    run_from(policy, &mut world, &mut demon, opts)
}

fn run_from(
    policy: &Policy,
    world: &mut EngineWorld,
    demon: &mut DemonState,
    opts: RunOptions,
) -> RunReport {
    let mut rng = trial_rng(opts.seed, opts.trial);
    let mut ledger = WorkLedger::default();
    let mut per_cycle = RunningStats::new();
    let mut trace = Vec::new();
    let mut visited: HashMap<ConfigKey, u64> = HashMap::new();
    let mut steps = 0u64;
    let mut inserted = false;
    let mut net_at_cycle_start = 0.0;
    let mut witness = None;

    let termination = loop {
        if opts.cycles.is_some_and(|c| ledger.cycles >= c) {
            break Termination::CompletedCycles;
        }
        if steps >= opts.max_steps {
            break Termination::BudgetExhausted;
        }
        let key = ConfigKey::of(world, demon);
        if let Some(&first) = visited.get(&key) {
            witness = Some(LivelockWitness {
                pc: policy.control_states()[demon.pc].clone(),
                register: demon.register,
                world: *world,
                first_seen: first,
                repeated_at: steps,
                period: steps - first,
            });
            break Termination::Livelock;
        }
        visited.insert(key, steps);

        let side_before = world.particle_side.side();
        let effect = match step(world, demon, policy, &mut ledger, opts.placement, &mut rng) {
            Ok(e) => e,
            Err(e) => break Termination::ProtocolError(e.to_string()),
        };
        steps += 1;
        if opts.trace {
            trace.push(TraceRecord {
                cycle: ledger.cycles,
                step: steps,
                op: effect.action.name().to_string(),
                side: world.particle_side.side().or(side_before),
                work: effect.work,
                erasure: effect.erasure,
                gas_entropy_offset: world.gas_entropy_offset,
                erasure_debt: ledger.erasure_debt,
            });
        }
        if effect.halted {
            break Termination::Halted;
        }
        if effect.action == Action::InsertPartition {
            inserted = true;
            visited.clear();
        }
        if inserted && demon.pc == policy.start() && !world.partition_in {
            inserted = false;
            ledger.cycles += 1;
            per_cycle.push(ledger.net() - net_at_cycle_start);
            net_at_cycle_start = ledger.net();
        }
    };

    RunReport {
        policy: policy.name().to_string(),
        ledger,
        steps,
        termination,
        livelock_witness: witness,
        per_cycle,
        world: *world,
        memory: demon.clone(),
        trace,
    }
}

/// Insert, measure, expand, erase one bit; `cycles` times.
pub fn run_standard_demon(geometry: EngineGeometry, cycles: u64, seed: u64) -> RunReport {
    let policy = Policy::preset("standard").expect("preset");
    run_policy(&policy, geometry, RunOptions::cycles(cycles, seed))
}

/// Undoes unprofitable measurements; runs until livelock, halt or `max_steps`.
pub fn run_demon_of_choice_undo_first(
    geometry: EngineGeometry,
    max_steps: u64,
    seed: u64,
    placement: Placement,
) -> RunReport {
    let policy = Policy::preset("choice-undo-first").expect("preset");
    let opts = RunOptions {
        cycles: None,
        max_steps,
        placement,
        seed,
        trial: 0,
        trace: false,
    };
    run_policy(&policy, geometry, opts)
}

/// Abandons unprofitable cycles by pulling the partition, then erases.
pub fn run_demon_of_choice_extract_first(
    geometry: EngineGeometry,
    cycles: u64,
    seed: u64,
) -> RunReport {
    let policy = Policy::preset("choice-extract-first").expect("preset");
    run_policy(&policy, geometry, RunOptions::cycles(cycles, seed))
}

/// Closed-form mean net work per cycle of the extract-first demon.
pub fn extract_first_expected_work(geometry: &EngineGeometry) -> f64 {
    let p = geometry.ratio();
    p * (geometry.expansion_work(Side::Left) - 1.0) - (1.0 - p)
}

#[derive(Debug, Clone, Serialize)]
pub struct DelayedReport {
    pub run: RunReport,
    pub n: u64,
    /// Recorded Left outcomes.
    pub k: u64,
    pub k_estimate: u64,
    pub work_per_cycle: f64,
    pub net_per_cycle: f64,
    /// `h(k/N)`.
    pub empirical_entropy: f64,
}

/// Runs `n` cycles archiving each outcome, then compresses and erases the tape once.
pub fn run_delayed_erasure_demon(geometry: EngineGeometry, n: u64, seed: u64) -> DelayedReport {
    run_delayed_erasure_trial(geometry, n, seed, 0)
}

pub fn run_delayed_erasure_trial(
    geometry: EngineGeometry,
    n: u64,
    seed: u64,
    trial: u64,
) -> DelayedReport {
    let policy = Policy::preset("delayed-erasure").expect("preset");
    let mut opts = RunOptions::cycles(n, seed);
    opts.trial = trial;
    let mut report = run_policy(&policy, geometry, opts);
    let tape = report.memory.tape.clone();
    let k = tape.weight() as u64;
    let k_est = k_estimate(&tape);
    let mut world = report.world;
    let mut rng = trial_rng(seed, trial);
    match apply_action(
        Action::Erase,
        &mut world,
        &mut report.memory,
        &mut report.ledger,
        Placement::Random,
        &mut rng,
    ) {
        Ok(_) => {}
        Err(e) => report.termination = Termination::ProtocolError(e.to_string()),
    }
    let cycles = report.ledger.cycles.max(1) as f64;
    DelayedReport {
        n,
        k,
        k_estimate: k_est,
        work_per_cycle: report.ledger.extracted / cycles,
        net_per_cycle: report.ledger.net() / cycles,
        empirical_entropy: binary_entropy(k as f64 / tape.len().max(1) as f64),
        run: report,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::expected_cycle_work;

    fn geom(r: f64) -> EngineGeometry {
        EngineGeometry::from_ratio(r).unwrap()
    }

    #[test]
    fn presets_round_trip_through_json() {
        for name in PRESETS {
            let p = Policy::preset(name).unwrap();
            let back = Policy::from_json(&p.to_json()).unwrap();
            assert_eq!(p, back);
        }
        assert!(matches!(Policy::preset("nope"), Err(PolicyError::UnknownPreset(_))));
    }

    #[test]
    fn partial_policy_is_rejected() {
        let doc = r#"{"name":"x","control_states":["a"],"transitions":[
            {"state":"a","register":"Blank","action":"Halt","next":"a"},
            {"state":"a","register":"Left","action":"Halt","next":"a"}]}"#;
        assert!(matches!(Policy::from_json(doc), Err(PolicyError::Missing(_, Register::Right))));
        let dup = r#"{"name":"x","control_states":["a"],"transitions":[
            {"state":"a","register":"Blank","action":"Halt","next":"a"},
            {"state":"a","register":"Blank","action":"Halt","next":"a"}]}"#;
        assert!(matches!(Policy::from_json(dup), Err(PolicyError::Duplicate(..))));
        let bad_next = r#"{"name":"x","control_states":["a"],"transitions":[
            {"state":"a","register":"Blank","action":"Halt","next":"b"}]}"#;
        assert!(matches!(Policy::from_json(bad_next), Err(PolicyError::UnknownState(_))));
    }

    #[test]
    fn step_dispatch() {
        let policy = Policy::preset("choice-undo-first").unwrap();
        let mut world = EngineWorld::new(geom(0.25));
        let mut demon = DemonState::default();
        let mut ledger = WorkLedger::default();
        let mut rng = trial_rng(1, 0);
        let place = Placement::Forced(Side::Right);
        step(&mut world, &mut demon, &policy, &mut ledger, place, &mut rng).unwrap();
        assert!(world.partition_in);
        step(&mut world, &mut demon, &policy, &mut ledger, place, &mut rng).unwrap();
        assert_eq!(demon.register, Register::Right);
        engine::extract_partition(&mut world).unwrap();
        let err = step(&mut world, &mut demon, &policy, &mut ledger, place, &mut rng);
        assert_eq!(err, Err(EngineError::CorrelationLost));
    }

    #[test]
    fn standard_demon_small_run() {
        let r = run_standard_demon(geom(0.25), 2000, 3);
        assert_eq!(r.termination, Termination::CompletedCycles);
        assert_eq!(r.ledger.cycles, 2000);
        assert_eq!(r.steps, 8000);
        assert_eq!(r.ledger.erasure_paid, 2000.0);
        assert_eq!(r.per_cycle.count(), 2000);
        let gap = (r.per_cycle.mean() - expected_cycle_work(&geom(0.25))).abs();
        assert!(gap < 4.0 * r.per_cycle.stderr());
    }

    #[test]
    fn undo_first_livelocks_on_right() {
        let r = run_demon_of_choice_undo_first(geom(0.25), 100, 0, Placement::Forced(Side::Right));
        assert_eq!(r.termination, Termination::Livelock);
        let w = r.livelock_witness.unwrap();
        assert_eq!(w.period, 2);
        assert_eq!(w.register, Register::Blank);
        assert_eq!(r.ledger.extracted, 0.0);
        assert_eq!(r.ledger.erasure_paid, 0.0);

        let short = run_demon_of_choice_undo_first(geom(0.25), 3, 0, Placement::Forced(Side::Right));
        assert_eq!(short.termination, Termination::BudgetExhausted);
        assert!(short.livelock_witness.is_none());
    }

    #[test]
    fn undo_first_profits_on_left() {
        let policy = Policy::preset("choice-undo-first").unwrap();
        let mut opts = RunOptions::cycles(1, 0);
        opts.placement = Placement::Forced(Side::Left);
        let r = run_policy(&policy, geom(0.25), opts);
        assert_eq!(r.termination, Termination::CompletedCycles);
        assert_eq!(r.ledger.net(), 1.0);
    }

    #[test]
    fn extract_first_branch_accounting() {
        let policy = Policy::preset("choice-extract-first").unwrap();
        let mut opts = RunOptions::cycles(1, 0);
        opts.placement = Placement::Forced(Side::Right);
        let r = run_policy(&policy, geom(0.25), opts);
        assert_eq!(r.ledger.extracted, 0.0);
        assert_eq!(r.ledger.erasure_paid, 1.0);
        assert!((r.world.gas_entropy_offset - (4.0f64 / 3.0).log2()).abs() < 1e-12);
        assert_eq!(extract_first_expected_work(&geom(0.25)), -0.5);
        assert_eq!(extract_first_expected_work(&geom(0.5)), -0.5);
    }

    #[test]
    fn delayed_single_cycle_is_negative_on_average() {
        let g = geom(0.25);
        let mut total = 0.0;
        for trial in 0..4000 {
            let r = run_delayed_erasure_trial(g, 1, 9, trial);
            assert_eq!(r.k_estimate, 1);
            assert_eq!(r.run.ledger.erasure_paid, 1.0);
            total += r.net_per_cycle;
        }
        assert!(total / 4000.0 < -0.1);
    }

    #[test]
    fn delayed_erasure_pays_the_code_length() {
        let r = run_delayed_erasure_demon(geom(0.25), 500, 5);
        assert_eq!(r.run.ledger.cycles, 500);
        assert_eq!(r.run.ledger.erasure_paid, r.k_estimate as f64);
        assert_eq!(r.run.memory.occupied_bits(), 0);
        assert_eq!(r.run.ledger.erasure_debt, 0);
    }

    #[test]
    fn expand_work_matches_trace() {
        let policy = Policy::preset("standard").unwrap();
        let mut opts = RunOptions::cycles(50, 11);
        opts.trace = true;
        let r = run_policy(&policy, geom(0.3), opts);
        let from_trace: f64 = r.trace.iter().map(|t| t.work).sum();
        assert_eq!(from_trace, r.ledger.extracted);
        assert_eq!(r.trace.len() as u64, r.steps);
    }
}
