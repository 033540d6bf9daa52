//! Trust-region behaviour on small problems.

use brickwall::circuit::{self, BrickwallCircuit, Geometry, TopologyLabel};
use brickwall::linalg;
use brickwall::manifold::UnitaryGate;
use brickwall::models::{
    exact_evolution, exact_unitary, partition_hamiltonian, splitting_circuit, splitting_method,
    LatticeModel, ModelKind,
};
use brickwall::trustregion::{
    bootstrap_pad, optimize, optimize_with_observer, splitting_warm_start, TrustRegionConfig,
};

fn ising6() -> LatticeModel {
    LatticeModel::new(ModelKind::Ising1d { j: 1.0, g: 0.75, h: 0.0 }, 6, 1.0).unwrap()
}

fn spectral(c: &BrickwallCircuit, u: &linalg::CMat) -> f64 {
    circuit::spectral_distance(&circuit::circuit_matrix(c), u).unwrap()
}

#[test]
fn single_layer_target_is_recovered() {
    let model = LatticeModel::new(ModelKind::Ising1d { j: 1.0, g: 0.75, h: 0.3 }, 4, 0.5).unwrap();
    let h_even = partition_hamiltonian(&model, TopologyLabel::Even).unwrap();
    let u = exact_evolution(&h_even, model.time).unwrap();
    let start = BrickwallCircuit::from_labels(
        &model.geometry(),
        2,
        vec![(TopologyLabel::Even, UnitaryGate::identity(4))],
    )
    .unwrap();
    let config = TrustRegionConfig { max_iter: 50, ..Default::default() };
    let (opt, _) = optimize(&start, &u, &config).unwrap();
    let err = spectral(&opt, &u);
    assert!(err < 1e-8, "spectral error {err:.3e}");
}

#[test]
fn warm_start_run_is_monotone_unitary_and_dominant() {
    let model = ising6();
    let u = exact_unitary(&model).unwrap();
    let start = splitting_warm_start(&splitting_method("strang").unwrap(), &model, 2).unwrap();
    let config = TrustRegionConfig { max_iter: 60, ..Default::default() };
    let mut worst_defect = 0.0f64;
    let mut max_radius = 0.0f64;
    let (opt, trace) = optimize_with_observer(&start, &u, &config, |rec, c| {
        max_radius = max_radius.max(rec.radius);
        for g in c.gates() {
            worst_defect = worst_defect.max(linalg::unitarity_defect(g.matrix()));
        }
    })
    .unwrap();
    assert!(worst_defect <= 1e-12);
    assert!(max_radius <= config.delta_max);
    let accepted = trace.accepted_f();
    assert!(accepted.windows(2).all(|w| w[1] <= w[0]));
    assert!(trace.final_f() <= trace.initial_f());
    assert!(spectral(&opt, &u) <= spectral(&start, &u));
}

#[test]
fn bootstrapped_circuit_does_not_lose_ground() {
    let model = ising6();
    let u = exact_unitary(&model).unwrap();
    let start = splitting_circuit(&splitting_method("strang").unwrap(), &model, 1).unwrap();
    let config = TrustRegionConfig { max_iter: 40, ..Default::default() };
    let (small, small_trace) = optimize(&start, &u, &config).unwrap();
    let padded = bootstrap_pad(&small, &model.geometry()).unwrap();
    let f_small = small_trace.final_f();
    assert!((circuit::target_f(&padded, &u).unwrap() - f_small).abs() < 1e-12);
    let (_, trace) = optimize(&padded, &u, &config).unwrap();
    assert!(trace.final_f() <= f_small);
}

#[test]
fn identity_start_improves() {
    let model = ising6();
    let u = exact_unitary(&model).unwrap();
    let start = BrickwallCircuit::identity(&Geometry::Chain { sites: 6 }, 2, 3).unwrap();
    let config = TrustRegionConfig { max_iter: 30, ..Default::default() };
    let (opt, _) = optimize(&start, &u, &config).unwrap();
    assert!(spectral(&opt, &u) < spectral(&start, &u));
}

#[test]
fn traces_are_reproducible() {
    let model = ising6();
    let u = exact_unitary(&model).unwrap();
    let start = splitting_circuit(&splitting_method("strang").unwrap(), &model, 1).unwrap();
    let config = TrustRegionConfig { max_iter: 15, record_spectral_error: true, ..Default::default() };
    let (a, ta) = optimize(&start, &u, &config).unwrap();
    let (b, tb) = optimize(&start, &u, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(format!("{ta:?}"), format!("{tb:?}"));
    assert!(ta.records.iter().all(|r| r.spectral_error.is_some()));
}
