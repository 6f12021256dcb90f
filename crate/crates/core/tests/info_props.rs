use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use demon_core::demon::trial_rng;
use demon_core::info::{
    build_measurement_unitary, holevo_chi, measurement_entropy_audit, mutual_information,
    shannon_entropy, von_neumann_entropy, CMatrix, DensityMatrix, ProbabilityDistribution,
    ProjectorSet, C64,
};

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

fn ginibre(rng: &mut ChaCha8Rng, dim: usize) -> CMatrix {
    DMatrix::from_fn(dim, dim, |_, _| C64::new(gaussian(rng), gaussian(rng)))
}

fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> DensityMatrix {
    let g = ginibre(rng, dim);
    let m = &g * g.adjoint();
    let tr = m.trace();
    DensityMatrix::new(m / tr).unwrap()
}

fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> CMatrix {
    ginibre(rng, dim).qr().q()
}

fn rotated_projectors(u: &CMatrix) -> ProjectorSet {
    let dim = u.nrows();
    let projs = (0..dim)
        .map(|i| {
            let col = u.column(i).into_owned();
            &col * col.adjoint()
        })
        .collect();
    ProjectorSet::new(projs).unwrap()
}

#[test]
fn entropy_bounds_for_random_states() {
    let mut rng = trial_rng(1, 0);
    for dim in 1..=6 {
        for _ in 0..20 {
            let rho = random_state(&mut rng, dim);
            let h = von_neumann_entropy(&rho);
            assert!(h >= -1e-12 && h <= (dim as f64).log2() + 1e-10);
            let sum: f64 = rho.eigenvalues().iter().sum();
            assert!((sum - 1.0).abs() < 1e-10);
        }
    }
    let mixed = DensityMatrix::maximally_mixed(5).unwrap();
    assert!((von_neumann_entropy(&mixed) - 5f64.log2()).abs() < 1e-12);
}

#[test]
fn entropy_is_unitarily_invariant() {
    let mut rng = trial_rng(2, 0);
    for dim in 2..=5 {
        let rho = random_state(&mut rng, dim);
        let u = random_unitary(&mut rng, dim);
        let rotated = rho.conjugate(&u).unwrap();
        assert!((von_neumann_entropy(&rho) - von_neumann_entropy(&rotated)).abs() < 1e-10);
    }
}

#[test]
fn diagonal_states_reduce_to_shannon() {
    let p = [0.1, 0.2, 0.3, 0.4];
    let rho = DensityMatrix::diagonal(&p).unwrap();
    let d = ProbabilityDistribution::new(p.to_vec()).unwrap();
    let direct: f64 = p.iter().map(|x| -x * x.log2()).sum();
    assert!((shannon_entropy(&d) - direct).abs() < 1e-12);
    assert!((von_neumann_entropy(&rho) - direct).abs() < 1e-12);
}

#[test]
fn mutual_information_of_product_and_correlated_states() {
    let mut rng = trial_rng(3, 0);
    let a = random_state(&mut rng, 2);
    let b = random_state(&mut rng, 3);
    let product = a.tensor(&b).unwrap();
    assert!(mutual_information(&product, 2, 3).unwrap().abs() < 1e-10);

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let bell = DensityMatrix::pure(&[
        C64::new(s, 0.0),
        C64::default(),
        C64::default(),
        C64::new(s, 0.0),
    ])
    .unwrap();
    assert!((mutual_information(&bell, 2, 2).unwrap() - 2.0).abs() < 1e-10);
}

#[test]
fn holevo_chi_is_nonnegative_and_bounded() {
    let mut rng = trial_rng(4, 0);
    for _ in 0..20 {
        let comps: Vec<_> = (0..3).map(|_| random_state(&mut rng, 3)).collect();
        let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        let p = ProbabilityDistribution::new(w.iter().map(|x| x / total).collect()).unwrap();
        let chi = holevo_chi(&p, &comps).unwrap();
        assert!(chi >= -1e-10 && chi <= shannon_entropy(&p) + 1e-10);
    }
}

#[test]
fn measurement_unitary_is_an_involution() {
    let mut rng = trial_rng(5, 0);
    for dim in 2..=4 {
        let projs = rotated_projectors(&random_unitary(&mut rng, dim));
        let deltas: Vec<usize> = (1..=dim).collect();
        let u = build_measurement_unitary(&projs, dim + 1, 0, &deltas).unwrap();
        assert!(u.involution_error() < 1e-10);
        assert!(u.unitarity_error() < 1e-10);
    }
    let projs = ProjectorSet::computational(2).unwrap();
    assert!(build_measurement_unitary(&projs, 3, 0, &[1, 1]).is_err());
    assert!(build_measurement_unitary(&projs, 3, 0, &[1, 3]).is_err());
}

#[test]
fn audit_identity_holds_in_any_basis() {
    let mut rng = trial_rng(6, 0);
    for dim in 2..=4 {
        for _ in 0..5 {
            let rho = random_state(&mut rng, dim);
            let projs = rotated_projectors(&random_unitary(&mut rng, dim));
            let audit = measurement_entropy_audit(&rho, &projs, dim + 1).unwrap();
            assert!((audit.delta_h_d - audit.delta_i_sd).abs() < 1e-9);
            let p = ProbabilityDistribution::new(audit.outcome_probabilities.clone()).unwrap();
            assert!((audit.delta_h_d - shannon_entropy(&p)).abs() < 1e-9);
            assert!((audit.h_coherent - audit.h_before).abs() < 1e-9);
            assert!(audit.h_after >= audit.h_before - 1e-9);
        }
    }
}

#[test]
fn commuting_measurement_leaves_joint_entropy_unchanged() {
    let rho = DensityMatrix::diagonal(&[0.25, 0.75]).unwrap();
    let projs = ProjectorSet::computational(2).unwrap();
    assert!(projs.commutes_with(&rho, 1e-12));
    let audit = measurement_entropy_audit(&rho, &projs, 3).unwrap();
    assert!(audit.commuting);
    assert!((audit.h_after - audit.h_before).abs() < 1e-10);
    assert!(audit.chi.is_none());
}

#[test]
fn invalid_inputs_rejected() {
    assert!(ProbabilityDistribution::new(vec![0.5, 0.6]).is_err());
    assert!(ProbabilityDistribution::new(vec![-0.1, 1.1]).is_err());
    let not_herm = DMatrix::from_row_slice(
        2,
        2,
        &[C64::new(0.5, 0.0), C64::new(0.3, 0.0), C64::new(0.0, 0.0), C64::new(0.5, 0.0)],
    );
    assert!(DensityMatrix::new(not_herm).is_err());
    assert!(DensityMatrix::diagonal(&[1.2, -0.2]).is_err());
    assert!(DensityMatrix::maximally_mixed(65).is_err());
    let overlapping = vec![
        DMatrix::from_diagonal_element(2, 2, C64::new(1.0, 0.0)),
        DMatrix::zeros(2, 2),
    ];
    assert!(ProjectorSet::new(overlapping).is_ok());
    let half = DMatrix::from_diagonal_element(2, 2, C64::new(0.5, 0.0));
    assert!(ProjectorSet::new(vec![half.clone(), half]).is_err());
}
