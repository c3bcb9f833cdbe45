//! End-to-end bootstrap runs on short hydrogen chains.

use qbe::optimizer::{qbe_linear, qbe_quadratic, BeSystem, InnerOptions, LinearOptions, QbeOptions, ShotPolicy};

fn h8() -> BeSystem {
    BeSystem::h_chain(8, 1.4, 3).unwrap()
}

#[test]
fn parallel_and_serial_runs_agree() {
    let sys = h8();
    let opts = QbeOptions { threshold: 1e-3, ..Default::default() };
    let par = qbe_quadratic(&sys, &opts).unwrap();
    let ser = qbe_quadratic(&sys, &QbeOptions { parallel: false, ..opts }).unwrap();
    assert_eq!(par.records, ser.records);
    assert_eq!(par.energy, ser.energy);
}

#[test]
fn quadratic_run_keeps_electron_count_and_lowers_mismatch() {
    let sys = h8();
    let trace = qbe_quadratic(&sys, &QbeOptions { threshold: 1e-4, ..Default::default() }).unwrap();
    assert!(trace.converged);
    let first = trace.records.first().unwrap();
    let last = trace.records.last().unwrap();
    assert!(last.delta_rho <= 1e-4 && last.delta_rho < first.delta_rho);
    for r in &trace.records {
        assert!((r.electron_count - 8.0).abs() < 1e-9, "{}", r.electron_count);
    }
    // embedding correlates beyond mean field but stays above the full-space minimum
    assert!(trace.energy.total < -4.06498398520522);
    assert!(trace.energy.total > -4.2);
    let parts: f64 = trace.energy.fragment_contributions.iter().sum::<f64>() + trace.energy.e_nuc;
    assert!((parts - trace.energy.total).abs() < 1e-10);
}

#[test]
fn linear_run_converges_without_shots() {
    let sys = h8();
    let trace = qbe_linear(&sys, &LinearOptions { threshold: 1e-6, ..Default::default() }).unwrap();
    assert!(trace.converged);
    assert!(trace.records.last().unwrap().delta_rho <= 1e-6);
    assert_eq!(trace.state.shots, 0);
    let calls: Vec<u64> = trace.records.iter().map(|r| r.eigensolver_calls_cum).collect();
    assert!(calls.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn sampled_swap_run_is_seeded_and_counts_shots() {
    let sys = h8();
    let opts = QbeOptions {
        policy: ShotPolicy::Swap { epsilon: 1e-3 },
        max_outer: 2,
        threshold: 1e-12,
        inner: InnerOptions { max_iterations: 20, ..Default::default() },
        seed: 42,
        ..Default::default()
    };
    let a = qbe_quadratic(&sys, &opts).unwrap();
    let b = qbe_quadratic(&sys, &opts).unwrap();
    assert_eq!(a.records, b.records);
    assert!(!a.converged);
    assert!(a.state.ledger.swap > 0);
    assert_eq!(a.state.ledger.swap, a.records.last().unwrap().shots_cum);
    let c = qbe_quadratic(&sys, &QbeOptions { seed: 43, ..opts }).unwrap();
    assert_ne!(a.records, c.records);
}
