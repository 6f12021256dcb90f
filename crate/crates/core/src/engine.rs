//! One-particle engine with a movable partition.
//!
//! Work is in kT-bits (`k_B T ln 2`, with `k_B T = 1`), so expanding a particle
//! from width `w` to the full length `L` yields exactly `lg(L/w)`, and erasing
//! one bit costs exactly 1.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coding::binary_entropy;
use crate::demon::{DemonState, Register};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid geometry: need 0 < ell < L, got ell = {ell}, L = {length}")]
    InvalidGeometry { length: f64, ell: f64 },
    #[error("protocol violation: {0}")]
    Protocol(&'static str),
    #[error("memory register occupied; erase before measuring again")]
    MustEraseFirst,
    #[error("correlation lost; the measurement can no longer be undone")]
    CorrelationLost,
    #[error("cannot erase {requested} bits, only {occupied} occupied")]
    EraseExceedsMemory { requested: u64, occupied: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "Left",
            Side::Right => "Right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParticleSide {
    Left,
    Right,
    Anywhere,
}

impl ParticleSide {
    pub fn side(self) -> Option<Side> {
        match self {
            ParticleSide::Left => Some(Side::Left),
            ParticleSide::Right => Some(Side::Right),
            ParticleSide::Anywhere => None,
        }
    }
}

impl From<Side> for ParticleSide {
    fn from(s: Side) -> Self {
        match s {
            Side::Left => ParticleSide::Left,
            Side::Right => ParticleSide::Right,
        }
    }
}

/// Container of length `L` with the partition `ell` from the left wall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineGeometry {
    length: f64,
    ell: f64,
}

impl EngineGeometry {
    pub fn new(length: f64, ell: f64) -> Result<Self, EngineError> {
        if !(length.is_finite() && ell.is_finite() && ell > 0.0 && ell < length) {
            return Err(EngineError::InvalidGeometry { length, ell });
        }
        Ok(Self { length, ell })
    }

    /// Unit-length container with `ell = ratio`.
    pub fn from_ratio(ratio: f64) -> Result<Self, EngineError> {
        Self::new(1.0, ratio)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// `ell / L`, the probability of finding the particle on the left.
    pub fn ratio(&self) -> f64 {
        self.ell / self.length
    }

    pub fn width(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.ell,
            Side::Right => self.length - self.ell,
        }
    }

    /// `lg(L/w)` for the compartment on `side`.
    pub fn expansion_work(&self, side: Side) -> f64 {
        (self.length / self.width(side)).log2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineWorld {
    pub geometry: EngineGeometry,
    pub particle_side: ParticleSide,
    pub partition_in: bool,
    pub correlated: bool,
    /// Gas entropy in bits above the one-particle full-box reference,
    /// accumulated by free expansions.
    pub gas_entropy_offset: f64,
}

impl EngineWorld {
    pub fn new(geometry: EngineGeometry) -> Self {
        Self {
            geometry,
            particle_side: ParticleSide::Anywhere,
            partition_in: false,
            correlated: false,
            gas_entropy_offset: 0.0,
        }
    }

    pub fn invariants_hold(&self) -> bool {
        (!self.correlated || self.partition_in)
            && ((self.particle_side == ParticleSide::Anywhere) == !self.partition_in)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkLedger {
    pub extracted: f64,
    pub erasure_paid: f64,
    /// Occupied memory bits not yet erased.
    pub erasure_debt: u64,
    pub cycles: u64,
}

impl WorkLedger {
    pub fn net(&self) -> f64 {
        self.extracted - self.erasure_paid
    }

    /// Field-wise sum.
    pub fn merge(&mut self, other: &WorkLedger) {
        self.extracted += other.extracted;
        self.erasure_paid += other.erasure_paid;
        self.erasure_debt += other.erasure_debt;
        self.cycles += other.cycles;
    }
}

/// Inserts the partition; the particle lands left with probability `ell/L`.
pub fn insert_partition<R: Rng + ?Sized>(
    world: &mut EngineWorld,
    rng: &mut R,
) -> Result<(), EngineError> {
    if world.partition_in {
        return Err(EngineError::Protocol("partition already inserted"));
    }
    let side = if rng.random_bool(world.geometry.ratio()) {
        Side::Left
    } else {
        Side::Right
    };
    insert_partition_at(world, side)
}

/// Inserts the partition with the particle placed on `side`.
pub fn insert_partition_at(world: &mut EngineWorld, side: Side) -> Result<(), EngineError> {
    if world.partition_in {
        return Err(EngineError::Protocol("partition already inserted"));
    }
    world.partition_in = true;
    world.particle_side = side.into();
    world.correlated = false;
    Ok(())
}

fn correlation_intact(world: &EngineWorld, memory: &DemonState) -> bool {
    world.correlated && world.particle_side.side().map(Register::from) == Some(memory.register)
}

/// Copies the particle side into the blank register. Free.
pub fn measure(world: &mut EngineWorld, memory: &mut DemonState) -> Result<(), EngineError> {
    if !world.partition_in {
        return Err(EngineError::Protocol("nothing to measure without the partition"));
    }
    if memory.register != Register::Blank {
        return Err(EngineError::MustEraseFirst);
    }
    let side = world.particle_side.side().expect("partition in");
    memory.register = side.into();
    world.correlated = true;
    Ok(())
}

/// Repeats the controlled copy, which blanks the register. The particle stays put.
pub fn undo_measurement(world: &mut EngineWorld, memory: &mut DemonState) -> Result<(), EngineError> {
    if !correlation_intact(world, memory) {
        return Err(EngineError::CorrelationLost);
    }
    memory.register = Register::Blank;
    world.correlated = false;
    Ok(())
}

/// Lets the particle push the partition to the far wall; returns `lg(L/w)`.
/// The register keeps its now stale record.
pub fn isothermal_expansion(
    world: &mut EngineWorld,
    memory: &DemonState,
) -> Result<f64, EngineError> {
    if !world.partition_in {
        return Err(EngineError::Protocol("no partition to expand against"));
    }
    if !correlation_intact(world, memory) {
        return Err(EngineError::Protocol("expansion needs a record matching the particle"));
    }
    let side = world.particle_side.side().expect("partition in");
    let work = world.geometry.expansion_work(side);
    world.partition_in = false;
    world.particle_side = ParticleSide::Anywhere;
    world.correlated = false;
    Ok(work)
}

/// Pulls the partition out with no work; the gas expands freely.
pub fn extract_partition(world: &mut EngineWorld) -> Result<(), EngineError> {
    let side = match (world.partition_in, world.particle_side.side()) {
        (true, Some(s)) => s,
        _ => return Err(EngineError::Protocol("partition not inserted")),
    };
    world.gas_entropy_offset += world.geometry.expansion_work(side);
    world.partition_in = false;
    world.particle_side = ParticleSide::Anywhere;
    world.correlated = false;
    Ok(())
}

/// Erases `nbits` of memory at 1 kT-bit each: the register first, then the
/// stored record from its end.
pub fn erase(
    memory: &mut DemonState,
    ledger: &mut WorkLedger,
    nbits: u64,
) -> Result<(), EngineError> {
    let occupied = memory.occupied_bits();
    if nbits == 0 {
        return Ok(());
    }
    if occupied == 0 {
        log::warn!("erase of blank memory ignored");
        return Ok(());
    }
    if nbits > occupied {
        return Err(EngineError::EraseExceedsMemory {
            requested: nbits,
            occupied,
        });
    }
    memory.clear_bits(nbits);
    ledger.erasure_paid += nbits as f64;
    ledger.erasure_debt = memory.occupied_bits();
    Ok(())
}

/// Net work of one measure-expand-erase cycle given the measured side.
pub fn net_cycle_work(geometry: &EngineGeometry, side: Side) -> f64 {
    geometry.expansion_work(side) - 1.0
}

/// `-[1 + p lg p + q lg q]` with `p = ell/L`.
pub fn expected_cycle_work(geometry: &EngineGeometry) -> f64 {
    let p = geometry.ratio();
    let q = 1.0 - p;
    // adding 0.0 turns the break-even -0.0 into 0.0
    -(1.0 + p * p.log2() + q * q.log2()) + 0.0
}

/// `Z = H + K`.
pub fn physical_entropy(h: f64, k: f64) -> f64 {
    h + k
}

/// Work obtainable from a change in physical entropy, in kT-bits.
pub fn work_from_entropy_change(delta_z: f64) -> f64 {
    delta_z
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZBalance {
    pub delta_h: f64,
    pub delta_k: f64,
    pub delta_z: f64,
}

impl ZBalance {
    fn new(delta_h: f64, delta_k: f64) -> Self {
        Self {
            delta_h,
            delta_k,
            delta_z: physical_entropy(delta_h, delta_k),
        }
    }
}

/// Ensemble-averaged change of `Z` for one measurement, under both readings
/// of the record size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurementZReport {
    /// Record held in a fixed one-bit register.
    pub register: ZBalance,
    /// Record compressed to its minimal ensemble length, `h(ell/L)` per measurement.
    pub minimal_record: ZBalance,
}

pub fn measurement_z_balance(geometry: &EngineGeometry) -> MeasurementZReport {
    let h = binary_entropy(geometry.ratio());
    MeasurementZReport {
        register: ZBalance::new(-h, 1.0),
        minimal_record: ZBalance::new(-h, h),
    }
}

/// One line of the JSON-lines transition trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub cycle: u64,
    pub step: u64,
    pub op: String,
    pub side: Option<Side>,
    pub work: f64,
    pub erasure: f64,
    pub gas_entropy_offset: f64,
    pub erasure_debt: u64,
}
