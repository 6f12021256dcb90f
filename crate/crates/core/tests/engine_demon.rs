use demon_core::coding::RecordTape;
use demon_core::demon::{
    run_delayed_erasure_demon, run_demon_of_choice_extract_first, run_demon_of_choice_undo_first,
    run_policy, run_standard_demon, trial_rng, Action, DemonState, Placement, Policy, Register,
    RunOptions, Termination, PRESETS,
};
use demon_core::engine::{
    erase, expected_cycle_work, extract_partition, insert_partition, insert_partition_at,
    isothermal_expansion, measure, measurement_z_balance, net_cycle_work, undo_measurement,
    EngineError, EngineGeometry, EngineWorld, ParticleSide, Side, WorkLedger,
};

fn geometry(r: f64) -> EngineGeometry {
    EngineGeometry::from_ratio(r).unwrap()
}

#[test]
fn one_cycle_work_matches_log_ratio() {
    let g = geometry(0.25);
    assert!((g.expansion_work(Side::Left) - 2.0).abs() < 1e-12);
    assert!((g.expansion_work(Side::Right) - (4.0f64 / 3.0).log2()).abs() < 1e-12);
    assert!((net_cycle_work(&g, Side::Left) - 1.0).abs() < 1e-12);
    let mean = 0.25 * net_cycle_work(&g, Side::Left) + 0.75 * net_cycle_work(&g, Side::Right);
    assert!((mean - expected_cycle_work(&g)).abs() < 1e-12);
}

#[test]
fn expected_work_never_positive() {
    for i in 1..200 {
        let g = geometry(i as f64 / 200.0);
        assert!(expected_cycle_work(&g) <= 0.0);
    }
    assert_eq!(expected_cycle_work(&geometry(0.5)).to_bits(), 0f64.to_bits());
}

#[test]
fn invalid_geometry_rejected() {
    for r in [0.0, 1.0, -0.5, 2.0, f64::NAN] {
        assert!(matches!(EngineGeometry::from_ratio(r), Err(EngineError::InvalidGeometry { .. })));
    }
}

#[test]
fn measure_undo_is_free_and_reversible() {
    let mut w = EngineWorld::new(geometry(0.25));
    let mut m = DemonState::default();
    insert_partition_at(&mut w, Side::Right).unwrap();
    let before = (w, m.clone());
    measure(&mut w, &mut m).unwrap();
    assert_eq!(m.register, Register::Right);
    undo_measurement(&mut w, &mut m).unwrap();
    assert_eq!((w, m), before);
}

#[test]
fn measure_needs_blank_register() {
    let mut w = EngineWorld::new(geometry(0.5));
    let mut m = DemonState {
        register: Register::Left,
        ..DemonState::default()
    };
    insert_partition_at(&mut w, Side::Left).unwrap();
    assert_eq!(measure(&mut w, &mut m), Err(EngineError::MustEraseFirst));
}

#[test]
fn stale_record_cannot_be_undone() {
    let mut w = EngineWorld::new(geometry(0.5));
    let mut m = DemonState::default();
    insert_partition_at(&mut w, Side::Left).unwrap();
    measure(&mut w, &mut m).unwrap();
    isothermal_expansion(&mut w, &m).unwrap();
    assert_eq!(undo_measurement(&mut w, &mut m), Err(EngineError::CorrelationLost));
}

#[test]
fn extraction_is_a_free_expansion() {
    let mut w = EngineWorld::new(geometry(0.25));
    insert_partition_at(&mut w, Side::Left).unwrap();
    extract_partition(&mut w).unwrap();
    assert!((w.gas_entropy_offset - 2.0).abs() < 1e-12);
    assert_eq!(w.particle_side, ParticleSide::Anywhere);
    assert!(w.invariants_hold());
    assert!(extract_partition(&mut w).is_err());
}

#[test]
fn erase_charges_one_unit_per_bit() {
    let mut m = DemonState {
        register: Register::Left,
        tape: RecordTape::from_str_bits("101"),
        ..DemonState::default()
    };
    let mut ledger = WorkLedger::default();
    assert!(matches!(
        erase(&mut m, &mut ledger, 5),
        Err(EngineError::EraseExceedsMemory { .. })
    ));
    erase(&mut m, &mut ledger, 2).unwrap();
    assert_eq!(m.register, Register::Blank);
    assert_eq!(m.tape, RecordTape::from_str_bits("10"));
    assert_eq!(ledger.erasure_paid, 2.0);
    assert_eq!(ledger.erasure_debt, 2);
    erase(&mut m, &mut ledger, 2).unwrap();
    assert_eq!(m.occupied_bits(), 0);
    erase(&mut m, &mut ledger, 1).unwrap();
    assert_eq!(ledger.erasure_paid, 4.0);
}

#[test]
fn random_insertion_follows_ratio() {
    let g = geometry(0.25);
    let mut rng = trial_rng(9, 0);
    let trials = 40_000;
    let mut left = 0;
    for _ in 0..trials {
        let mut w = EngineWorld::new(g);
        insert_partition(&mut w, &mut rng).unwrap();
        left += usize::from(w.particle_side == ParticleSide::Left);
    }
    let freq = left as f64 / trials as f64;
    let sigma = (0.25f64 * 0.75 / trials as f64).sqrt();
    assert!((freq - 0.25).abs() < 4.0 * sigma, "freq {freq}");
}

#[test]
fn standard_ledger_decomposes() {
    let r = run_standard_demon(geometry(0.25), 5000, 1);
    assert_eq!(r.termination, Termination::CompletedCycles);
    assert_eq!(r.ledger.cycles, 5000);
    assert_eq!(r.ledger.erasure_paid, 5000.0);
    assert_eq!(r.ledger.erasure_debt, 0);
    assert!((r.per_cycle.mean() * 5000.0 - r.ledger.net()).abs() < 1e-6);
}

#[test]
fn shipped_policies_do_not_beat_the_second_law() {
    for name in PRESETS {
        let policy = Policy::preset(name).unwrap();
        for r in [0.125, 0.25, 0.5] {
            let report = run_policy(&policy, geometry(r), RunOptions::cycles(20_000, 3));
            let cycles = report.ledger.cycles.max(1) as f64;
            let per = (report.ledger.net() - report.ledger.erasure_debt as f64) / cycles;
            let bound = 4.0 * report.per_cycle.stderr() + 1e-9;
            assert!(per <= bound, "{name} at {r}: {per}");
        }
    }
}

#[test]
fn undo_first_livelocks_on_the_unprofitable_side() {
    let r = run_demon_of_choice_undo_first(geometry(0.25), 100, 4, Placement::Forced(Side::Right));
    assert_eq!(r.termination, Termination::Livelock);
    let w = r.livelock_witness.unwrap();
    assert_eq!(w.period, 2);
    assert_eq!(r.ledger.extracted, 0.0);
    assert_eq!(r.ledger.erasure_paid, 0.0);
}

#[test]
fn extract_first_pays_for_every_measurement() {
    let r = run_demon_of_choice_extract_first(geometry(0.25), 4000, 8);
    assert_eq!(r.ledger.erasure_paid, 4000.0);
    assert!((r.per_cycle.mean() + 0.5).abs() < 4.0 * r.per_cycle.stderr());
}

#[test]
fn delayed_erasure_pays_the_code_length() {
    let d = run_delayed_erasure_demon(geometry(0.25), 3000, 2);
    assert_eq!(d.run.ledger.erasure_paid, d.k_estimate as f64);
    assert_eq!(d.run.ledger.erasure_debt, 0);
    assert!(d.net_per_cycle <= 0.0);
}

#[test]
fn z_balance_conventions() {
    let rep = measurement_z_balance(&geometry(0.25));
    assert!(rep.minimal_record.delta_z.abs() < 1e-12);
    assert!(rep.register.delta_z >= -1e-12);
}

#[test]
fn policy_json_round_trip() {
    for name in PRESETS {
        let p = Policy::preset(name).unwrap();
        assert_eq!(Policy::from_json(&p.to_json()).unwrap(), p);
    }
    let halt_only = r#"{"name":"h","control_states":["s"],"transitions":[
        {"state":"s","register":"Blank","action":"Halt","next":"s"}]}"#;
    assert!(Policy::from_json(halt_only).is_err());
    assert_eq!(Action::Halt.name(), "halt");
}
