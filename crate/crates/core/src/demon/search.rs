//! Exhaustive search over small demon policies.
//!
//! Table entries are assigned lazily, the first time any seed reaches them,
//! so policies that differ only in unreachable entries are simulated once.
//! All seeds run in lockstep and share the same insertion outcomes (common
//! random numbers).
//!
//! Per entry the canonical options are: with a blank register, Insert,
//! Measure or Extract to either state, Erase to the other state, or Halt;
//! with a full register, Insert, Undo, Expand, Extract or Erase to either
//! state, or Halt. Options that can never succeed for that register value
//! are left out, and a blank erase back to the same state is a halt.
//!
//! A policy that commands an impossible operation in some seed is
//! inadmissible. Its score is still computed with the failing seeds frozen,
//! so the cost of treating a jam as a halt can be reported.

use rand::{Rng, RngCore};
use serde::Serialize;
use thiserror::Error;

use super::{apply_action, trial_rng, Action, DemonState, Placement, Policy, Register, Transition};
use crate::engine::{EngineGeometry, EngineWorld, Side, WorkLedger};
use crate::stats::RunningStats;

pub const MAX_POLICIES: u128 = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("policy space of {estimate} canonical tables exceeds the limit of 1000000")]
    SpaceTooLarge { estimate: u128 },
    #[error("invalid search bounds: {0}")]
    InvalidBounds(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchConfig {
    pub max_control_states: usize,
    pub horizon: u64,
    pub seeds: u64,
    pub base_seed: u64,
}

fn entry_options(states: usize, pc: usize, register: Register) -> Vec<Transition> {
    let movers: &[Action] = match register {
        Register::Blank => &[Action::InsertPartition, Action::Measure, Action::ExtractPartition],
        _ => &[
            Action::InsertPartition,
            Action::UndoMeasure,
            Action::Expand,
            Action::ExtractPartition,
            Action::Erase,
        ],
    };
    let mut out: Vec<Transition> = movers
        .iter()
        .flat_map(|&action| (0..states).map(move |next| Transition { action, next }))
        .collect();
    if register == Register::Blank {
        out.extend(
            (0..states)
                .filter(|&n| n != pc)
                .map(|next| Transition { action: Action::Erase, next }),
        );
    }
    out.push(Transition { action: Action::Halt, next: 0 });
    out
}

/// Number of canonical total tables with `states` control states.
pub fn space_size(states: usize) -> u128 {
    let mut total: u128 = 1;
    for pc in 0..states {
        for r in Register::ALL {
            total = total.saturating_mul(entry_options(states, pc, r).len() as u128);
        }
    }
    total
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyScore {
    /// Reached entries; unreached ones are shown as Halt.
    pub policy: String,
    /// Canonical tables sharing this behaviour.
    pub multiplicity: u128,
    pub mean_net: f64,
    pub stderr: f64,
    pub mean_work: f64,
    pub mean_paid: f64,
    pub mean_debt: f64,
    pub mean_cycles: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchReport {
    pub config: SearchConfig,
    pub ell_over_l: f64,
    pub space_size: u128,
    /// Sum of multiplicities over all explored classes; equals `space_size`.
    pub covered: u128,
    pub classes: u64,
    pub admissible_classes: u64,
    pub admissible_policies: u128,
    /// Best admissible policy, net of work, erasures and the horizon debt charge.
    pub best: PolicyScore,
    /// Best policy when jammed seeds are simply frozen instead of disqualified.
    pub best_jam_as_halt: PolicyScore,
    /// Admissible policies that never erase and never halt in any seed.
    pub never_erase_never_halt: u128,
    pub max_final_debt_bits: u64,
    /// `best.mean_net <= 3 * best.stderr`.
    pub pass: bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Running,
    Halted,
    Jammed,
}

#[derive(Clone)]
struct Seed {
    world: EngineWorld,
    demon: DemonState,
    ledger: WorkLedger,
    inserts: u32,
    status: Status,
    erased: bool,
    inserted_since_cycle: bool,
}

struct Ctx<'a> {
    states: usize,
    horizon: u64,
    sides: &'a [u64],
    choices: Vec<Vec<Vec<Transition>>>,
    report: Acc,
}

struct Acc {
    covered: u128,
    classes: u64,
    admissible_classes: u64,
    admissible_policies: u128,
    best: Option<PolicyScore>,
    best_jam: Option<PolicyScore>,
    never_erase_never_halt: u128,
    max_final_debt: u64,
}

type Table = Vec<[Option<Transition>; 3]>;

// Never consulted: every insertion in the search is forced from `sides`.
struct NoRng;

impl RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("search insertions are forced")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("search insertions are forced")
    }
    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("search insertions are forced")
    }
}

fn pending_entry(table: &Table, seeds: &[Seed]) -> Option<(usize, Register)> {
    seeds
        .iter()
        .filter(|s| s.status == Status::Running)
        .map(|s| (s.demon.pc, s.demon.register))
        .find(|&(pc, r)| table[pc][r.index()].is_none())
}

fn advance(table: &Table, seeds: &mut [Seed], sides: &[u64]) {
    let mut rng = NoRng;
    for (i, s) in seeds.iter_mut().enumerate() {
        if s.status != Status::Running {
            continue;
        }
        let t = table[s.demon.pc][s.demon.register.index()].expect("entry assigned");
        if t.action == Action::Halt {
            s.status = Status::Halted;
            continue;
        }
        let placement = if t.action == Action::InsertPartition {
            let left = (sides[i] >> (s.inserts % 64)) & 1 == 1;
            Placement::Forced(if left { Side::Left } else { Side::Right })
        } else {
            Placement::Random
        };
        match apply_action(t.action, &mut s.world, &mut s.demon, &mut s.ledger, placement, &mut rng) {
            Ok(effect) => {
                s.demon.pc = t.next;
                if t.action == Action::InsertPartition {
                    s.inserts += 1;
                    s.inserted_since_cycle = true;
                }
                if effect.erasure > 0.0 {
                    s.erased = true;
                }
                if s.inserted_since_cycle && s.demon.pc == 0 && !s.world.partition_in {
                    s.inserted_since_cycle = false;
                    s.ledger.cycles += 1;
                }
            }
            Err(_) => s.status = Status::Jammed,
        }
    }
}

fn multiplicity(ctx: &Ctx, table: &Table) -> u128 {
    let mut m = 1u128;
    for (pc, row) in table.iter().enumerate() {
        for r in Register::ALL {
            if row[r.index()].is_none() {
                m *= ctx.choices[pc][r.index()].len() as u128;
            }
        }
    }
    m
}

fn score(ctx: &Ctx, table: &Table, seeds: &[Seed], mult: u128) -> PolicyScore {
    let mut net = RunningStats::new();
    let (mut work, mut paid, mut debt, mut cycles) = (0.0, 0.0, 0.0, 0.0);
    for s in seeds {
        let d = s.demon.occupied_bits() as f64;
        net.push(s.ledger.net() - d);
        work += s.ledger.extracted;
        paid += s.ledger.erasure_paid;
        debt += d;
        cycles += s.ledger.cycles as f64;
    }
    let n = seeds.len() as f64;
    let names: Vec<String> = (0..ctx.states).map(|i| format!("s{i}")).collect();
    let full = table
        .iter()
        .map(|row| row.map(|t| t.unwrap_or(Transition { action: Action::Halt, next: 0 })))
        .collect();
    let policy = Policy::new("search", names, full).expect("valid table");
    PolicyScore {
        policy: policy.to_string(),
        multiplicity: mult,
        mean_net: net.mean(),
        stderr: net.stderr(),
        mean_work: work / n,
        mean_paid: paid / n,
        mean_debt: debt / n,
        mean_cycles: cycles / n,
    }
}

fn better(a: &Option<PolicyScore>, b: &PolicyScore) -> bool {
    match a {
        None => true,
        Some(a) => b.mean_net > a.mean_net,
    }
}

fn finish(ctx: &mut Ctx, table: &Table, seeds: &[Seed]) {
    let mult = multiplicity(ctx, table);
    let sc = score(ctx, table, seeds, mult);
    let acc = &mut ctx.report;
    acc.covered += mult;
    acc.classes += 1;
    if better(&acc.best_jam, &sc) {
        acc.best_jam = Some(sc.clone());
    }
    if seeds.iter().any(|s| s.status == Status::Jammed) {
        return;
    }
    acc.admissible_classes += 1;
    acc.admissible_policies += mult;
    let final_debt = seeds.iter().map(|s| s.demon.occupied_bits()).max().unwrap_or(0);
    acc.max_final_debt = acc.max_final_debt.max(final_debt);
    if seeds.iter().all(|s| s.status == Status::Running && !s.erased) {
        acc.never_erase_never_halt += mult;
    }
    if better(&acc.best, &sc) {
        acc.best = Some(sc);
    }
}

fn explore(ctx: &mut Ctx, table: &mut Table, mut seeds: Vec<Seed>, mut t: u64) {
    loop {
        let live = seeds.iter().any(|s| s.status == Status::Running);
        if t >= ctx.horizon || !live {
            finish(ctx, table, &seeds);
            return;
        }
        if let Some((pc, r)) = pending_entry(table, &seeds) {
            let opts = ctx.choices[pc][r.index()].clone();
            for o in opts {
                table[pc][r.index()] = Some(o);
                explore(ctx, table, seeds.clone(), t);
            }
            table[pc][r.index()] = None;
            return;
        }
        advance(table, &mut seeds, ctx.sides);
        t += 1;
    }
}

/// Simulates every canonical policy with up to `max_control_states` states for
/// `horizon` steps over `seeds` common seeds, charging un-erased memory at
/// 1 kT-bit per bit at the horizon.
pub fn enumerate_policies(
    geometry: EngineGeometry,
    cfg: SearchConfig,
) -> Result<SearchReport, SearchError> {
    if cfg.max_control_states == 0 {
        return Err(SearchError::InvalidBounds("need at least one control state"));
    }
    if cfg.seeds == 0 || cfg.horizon == 0 {
        return Err(SearchError::InvalidBounds("need at least one seed and one step"));
    }
    if cfg.horizon > 64 {
        return Err(SearchError::InvalidBounds("horizon above 64 steps"));
    }
    let estimate: u128 = (1..=cfg.max_control_states).map(space_size).sum();
    if estimate > MAX_POLICIES {
        return Err(SearchError::SpaceTooLarge { estimate });
    }

    let p = geometry.ratio();
    let sides: Vec<u64> = (0..cfg.seeds)
        .map(|s| {
            let mut rng = trial_rng(cfg.base_seed, s);
            (0..64).fold(0u64, |acc, j| acc | (u64::from(rng.random_bool(p)) << j))
        })
        .collect();
    let fresh = Seed {
        world: EngineWorld::new(geometry),
        demon: DemonState::default(),
        ledger: WorkLedger::default(),
        inserts: 0,
        status: Status::Running,
        erased: false,
        inserted_since_cycle: false,
    };

    let mut acc = Acc {
        covered: 0,
        classes: 0,
        admissible_classes: 0,
        admissible_policies: 0,
        best: None,
        best_jam: None,
        never_erase_never_halt: 0,
        max_final_debt: 0,
    };
    let mut space = 0;
    for states in 1..=cfg.max_control_states {
        space += space_size(states);
        let choices = (0..states)
            .map(|pc| Register::ALL.iter().map(|&r| entry_options(states, pc, r)).collect())
            .collect();
        let mut ctx = Ctx {
            states,
            horizon: cfg.horizon,
            sides: &sides,
            choices,
            report: acc,
        };
        let mut table: Table = vec![[None; 3]; states];
        explore(&mut ctx, &mut table, vec![fresh.clone(); cfg.seeds as usize], 0);
        acc = ctx.report;
    }

    let best = acc.best.expect("halting immediately is always admissible");
    let pass = best.mean_net <= 3.0 * best.stderr;
    Ok(SearchReport {
        config: cfg,
        ell_over_l: p,
        space_size: space,
        covered: acc.covered,
        classes: acc.classes,
        admissible_classes: acc.admissible_classes,
        admissible_policies: acc.admissible_policies,
        best,
        best_jam_as_halt: acc.best_jam.expect("at least one class"),
        never_erase_never_halt: acc.never_erase_never_halt,
        max_final_debt_bits: acc.max_final_debt,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_space_sizes() {
        assert_eq!(space_size(1), 4 * 6 * 6);
        assert_eq!(space_size(2), 937_024);
        assert!(space_size(3) > MAX_POLICIES);
    }

    #[test]
    fn three_states_rejected_with_estimate() {
        let g = EngineGeometry::from_ratio(0.25).unwrap();
        let cfg = SearchConfig { max_control_states: 3, horizon: 10, seeds: 4, base_seed: 0 };
        match enumerate_policies(g, cfg) {
            Err(SearchError::SpaceTooLarge { estimate }) => assert!(estimate > MAX_POLICIES),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_state_search_breaks_even() {
        let g = EngineGeometry::from_ratio(0.5).unwrap();
        let cfg = SearchConfig { max_control_states: 1, horizon: 20, seeds: 50, base_seed: 1 };
        let r = enumerate_policies(g, cfg).unwrap();
        assert_eq!(r.covered, r.space_size);
        assert_eq!(r.best.mean_net, 0.0);
        assert!(r.pass);
    }
}
