//! Statistical checks of the sampled energy estimator.

use qbe::fragment::EmbeddingHamiltonian;
use qbe::integrals::h_chain_integrals;
use qbe::oracle::{energy_expectation, GroundStateOracle, OracleLedger, Purpose, ShotModel};
use qbe::qubits::{jordan_wigner, SectorBasis, SectorHamiltonian};
use qbe::rng::seeded;

#[test]
fn sampled_energy_is_unbiased() {
    let ints = h_chain_integrals(2, 1.4).unwrap();
    let emb = EmbeddingHamiltonian::from_integrals(&ints, 2);
    let ham = SectorHamiltonian::new(&emb, SectorBasis::new(2, 1, 1).unwrap()).unwrap();
    let ledger = OracleLedger::new();
    let oracle = GroundStateOracle::new(&ham, &ledger);
    let psi = oracle.prepare_ground(Purpose::Energy).unwrap();
    let op = jordan_wigner(&emb).unwrap();
    let exact = oracle.ground_energy().unwrap();

    let mut rng = seeded(2024);
    let repeats = 10_000;
    let mut values = Vec::with_capacity(repeats);
    let mut reported = 0.0;
    for _ in 0..repeats {
        let e = energy_expectation(&op, &psi, ShotModel::Sampled { shots: 100 }, &mut rng, Some(&ledger)).unwrap();
        reported += e.std_error / repeats as f64;
        values.push(e.mean);
    }
    let n = repeats as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((mean - exact).abs() <= 3.0 * sd / n.sqrt(), "{mean} vs {exact} (sd {sd})");
    // propagated error agrees with the observed spread
    assert!((reported / sd - 1.0).abs() < 0.1, "reported {reported}, observed {sd}");
    let per_call = ledger.snapshot().energy - 1;
    assert_eq!(per_call % repeats as u64, 0);
    assert!(per_call / repeats as u64 >= 100);
}
