use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;

use super::*;
use crate::fragment::Overlap;
use crate::linalg::Tensor4;
use crate::matching::quad_constraint_exact;
use crate::qubits::{jordan_wigner, operator_in_sector, qubit_rdm};
use crate::rng::seeded;

/// Random embedding on `n` orbitals with site 0 as center and the rest as
/// edges matched against a fictitious neighbor.
fn toy_problem(n: usize, seed: u64) -> FragmentProblem {
    let mut rng = seeded(seed);
    let mut h = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
    h = (&h + h.transpose()) * 0.5;
    for i in 0..n {
        h[(i, i)] -= 1.0;
    }
    let mut v = Tensor4::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            for k in 0..n {
                for l in 0..=k {
                    let val = if i == j && k == l {
                        0.4 + 0.3 * rng.random::<f64>()
                    } else {
                        0.05 * (rng.random::<f64>() - 0.5)
                    };
                    v.set_sym(i, j, k, l, val);
                }
            }
        }
    }
    let emb = EmbeddingHamiltonian {
        n_emb: n,
        n_frag: n,
        h_bare: h.clone(),
        h,
        veff_core: DMatrix::zeros(n, n),
        v,
        e_core: 0.3,
        basis: DMatrix::identity(n, n),
        n_elec_emb: n + n % 2,
    };
    let mut frag = Fragment::new(0, (0..n).collect(), vec![0]).unwrap();
    frag.overlaps = vec![Overlap { neighbor: 1, sites: (1..n).collect() }];
    FragmentProblem::new(frag, emb).unwrap()
}

fn random_targets(n: usize, seed: u64) -> Vec<SiteRdm> {
    let mut rng = seeded(seed);
    (0..n)
        .map(|_| {
            let w: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>() + 0.05);
            let s: f64 = w.iter().sum();
            w.map(|x| x / s)
        })
        .collect()
}

fn random_potential(p: &FragmentProblem, scale: f64, seed: u64) -> VbePotential {
    let mut rng = seeded(seed);
    let x: Vec<f64> = (0..p.n_active()).map(|_| scale * (rng.random::<f64>() - 0.5)).collect();
    p.with_active(&x)
}

#[test]
fn generator_set_layout() {
    let v = VbePotential::for_edges(3, &[1, 2]);
    assert_eq!(v.m(), 14);
    assert_eq!(v.generators[2], PauliString::single(2, Pauli::Z));
    assert_eq!(v.generators[6], PauliString::from_ops(&[(2, Pauli::Z), (3, Pauli::Z)]));
    assert!(v.generators.iter().all(|g| g.support() & 0b11 == 0));
}

#[test]
fn zero_potential_leaves_operator_unchanged() {
    let p = toy_problem(2, 1);
    let op = jordan_wigner(&p.emb).unwrap();
    let out = apply_vbe(&op, &p.zero_potential()).unwrap();
    assert_eq!(out, op.clone().canonicalize(0.0));
}

#[test]
fn potential_is_local_to_edges() {
    let p = toy_problem(3, 2);
    let op = jordan_wigner(&p.emb).unwrap();
    let mut v = random_potential(&p, 0.4, 3);
    v.coefficients[0] = 0.2; // an X term, allowed on the operator level
    let diff = apply_vbe(&op, &v).unwrap().add(&op.scale(c1(-1.0))).canonicalize(1e-14);
    let edge_mask: u64 = 0b1111_00;
    assert!(!diff.terms.is_empty());
    assert!(diff.terms.iter().all(|(_, s)| s.support() & !edge_mask == 0));
    assert!(diff.hermiticity_violation() < 1e-14);
}

#[test]
fn sector_shift_matches_pauli_potential() {
    let p = toy_problem(3, 4);
    let v = random_potential(&p, 0.6, 5);
    let op = apply_vbe(&jordan_wigner(&p.emb).unwrap(), &v).unwrap();
    let dense = operator_in_sector(&op, &p.ham.sector).unwrap();
    let e_dense = SymmetricEigen::new(dense).eigenvalues.min();
    let sol = p.solve(&v, 0.0, None).unwrap();
    assert!((sol.eigenvalue - e_dense).abs() < 1e-10);
}

#[test]
fn number_changing_generators_are_rejected_in_sector() {
    let p = toy_problem(2, 6);
    let mut v = p.zero_potential();
    v.coefficients[0] = 0.1;
    assert!(matches!(p.solve(&v, 0.0, None), Err(QbeError::InvalidArgument(_))));
}

#[test]
fn first_order_energy_shift() {
    let p = toy_problem(3, 7);
    let base = p.solve(&p.zero_potential(), 0.0, None).unwrap();
    let z = p.generator_expectations(&base.coeffs)[0];
    let delta = 1e-5;
    let mut x = vec![0.0; p.n_active()];
    x[0] = delta;
    let shifted = p.solve_active(&x, 0.0, None).unwrap();
    assert!((shifted.eigenvalue - base.eigenvalue - delta * z).abs() < 1e-8);
}

#[test]
fn zero_penalty_cost_is_ground_energy() {
    let p = toy_problem(3, 8);
    let mut rng = seeded(0);
    let targets = random_targets(2, 9);
    let c = cost_function(&p, &p.zero_potential(), 0.0, 0.0, &targets, ShotPolicy::Exact, &mut rng, None).unwrap();
    let e0 = p.solve(&p.zero_potential(), 0.0, None).unwrap().eigenvalue;
    assert!((c.value - e0).abs() < 1e-12);
    // away from v = 0 the bare energy is variationally above the ground energy
    let v = random_potential(&p, 0.5, 10);
    let c = cost_function(&p, &v, 0.0, 0.0, &targets, ShotPolicy::Exact, &mut rng, None).unwrap();
    assert!(c.value > e0);
}

#[test]
fn matched_targets_have_no_penalty() {
    let p = toy_problem(3, 11);
    let v = random_potential(&p, 0.3, 12);
    let own = p.solve(&v, 0.0, None).unwrap().edge_rdms;
    let mut rng = seeded(0);
    let c = cost_function(&p, &v, 0.0, 5.0, &own, ShotPolicy::Exact, &mut rng, None).unwrap();
    assert_eq!(c.penalty, 0.0);
}

#[test]
fn exact_cost_matches_dense_oracle() {
    for seed in 0..4 {
        let p = toy_problem(2, 100 + seed);
        let v = random_potential(&p, 0.5, 200 + seed);
        let targets = random_targets(1, 300 + seed);
        let lambda = 1.7;
        let mut rng = seeded(0);
        let c = cost_function(&p, &v, 0.0, lambda, &targets, ShotPolicy::Exact, &mut rng, None).unwrap();

        let h = jordan_wigner(&p.emb).unwrap();
        let hv = apply_vbe(&h, &v).unwrap();
        let dense = operator_in_sector(&hv, &p.ham.sector).unwrap();
        let eig = SymmetricEigen::new(dense);
        let i0 = eig.eigenvalues.imin();
        let psi: Vec<f64> = eig.eigenvectors.column(i0).iter().copied().collect();
        let sv = Statevector::from_sector(&p.ham.sector, &psi).unwrap();
        let energy = sv.expectation(&h).re;
        let rho = qubit_rdm(&sv, &[2, 3]).unwrap();
        let target = site_rdm_to_qubit(vec![2, 3], &targets[0]);
        let expect = energy + lambda * quad_constraint_exact(&rho, &target).unwrap();
        assert!((c.value - expect).abs() < 1e-10, "seed {seed}: {} vs {expect}", c.value);
    }
}

#[test]
fn response_gradient_matches_spectral_gradient() {
    for seed in 0..5 {
        let p = toy_problem(3, 400 + seed);
        let v = random_potential(&p, 0.4, 500 + seed);
        let targets = random_targets(2, 600 + seed);
        let (mu, lambda) = (0.07, 3.0);
        let x = p.active_coefficients(&v);
        let sol = p.solve(&v, mu, None).unwrap();
        let g = p.cost_gradient(&x, mu, lambda, &targets, &sol).unwrap();
        let full = exact_penalty_gradient(&p, &v, mu, lambda, &targets).unwrap();
        let active: Vec<f64> = p.active_coefficients(&VbePotential { coefficients: full.clone(), ..v.clone() });
        for (a, b) in g.iter().zip(&active) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "seed {seed}: {a} vs {b}");
        }
        // off-sector generators carry no gradient
        for (i, gen) in v.generators.iter().enumerate() {
            if !gen.is_diagonal() {
                assert_eq!(full[i], 0.0);
            }
        }
    }
}

#[test]
fn spectral_gradient_guards() {
    let big = toy_problem(5, 1);
    let v = big.zero_potential();
    let t = random_targets(4, 1);
    assert!(matches!(exact_penalty_gradient(&big, &v, 0.0, 1.0, &t), Err(QbeError::Resource(_))));

    let mut p = toy_problem(2, 2);
    p.emb.h = DMatrix::zeros(2, 2);
    p.emb.v = Tensor4::zeros(2);
    let p = FragmentProblem::new(p.fragment.clone(), p.emb.clone()).unwrap();
    let t = random_targets(1, 2);
    assert!(matches!(exact_penalty_gradient(&p, &p.zero_potential(), 0.0, 1.0, &t), Err(QbeError::Numerical(_))));
}

#[test]
fn matched_neighbors_need_no_potential() {
    let p = toy_problem(3, 20);
    let own = p.solve(&p.zero_potential(), 0.0, None).unwrap().edge_rdms;
    let mut rng = seeded(1);
    let m = minimize_fragment(
        &p,
        &p.zero_potential(),
        0.0,
        4.0,
        &own,
        ShotPolicy::Exact,
        &InnerOptions::default(),
        &mut rng,
        None,
        None,
    )
    .unwrap();
    assert!(m.potential.norm_inf() < 1e-6, "{:?}", m.potential.coefficients);
}

#[test]
fn minimization_reduces_mismatch_on_h8() {
    let sys = BeSystem::h_chain(8, 1.4, 3).unwrap();
    let sols: Vec<_> = sys.problems.iter().map(|p| p.solve(&p.zero_potential(), 0.0, None).unwrap()).collect();
    let targets = sys.targets(&sols).unwrap();
    let p = &sys.problems[0];
    let before = p.exact_penalty(&sols[0], &targets[0]);
    let mut rng = seeded(2);
    let m = minimize_fragment(
        p,
        &p.zero_potential(),
        0.0,
        10.0,
        &targets[0],
        ShotPolicy::Exact,
        &InnerOptions::default(),
        &mut rng,
        None,
        None,
    )
    .unwrap();
    let after = p.exact_penalty(&m.solution, &targets[0]);
    assert!(before > 0.0 && after < before, "{before} -> {after}");
    assert!(!m.stagnated);
}

#[test]
fn sampled_minimization_is_reproducible() {
    let sys = BeSystem::h_chain(8, 1.4, 3).unwrap();
    let sols: Vec<_> = sys.problems.iter().map(|p| p.solve(&p.zero_potential(), 0.0, None).unwrap()).collect();
    let targets = sys.targets(&sols).unwrap();
    let p = &sys.problems[1];
    let opts = InnerOptions { max_iterations: 30, ..Default::default() };
    let run = |seed| {
        let mut rng = seeded(seed);
        minimize_fragment(
            p,
            &p.zero_potential(),
            0.0,
            10.0,
            &targets[1],
            ShotPolicy::Swap { epsilon: 0.01 },
            &opts,
            &mut rng,
            None,
            None,
        )
        .unwrap()
    };
    let (a, b) = (run(5), run(5));
    assert_eq!(a, b);
    assert!(a.shots > 0);
}

#[test]
fn full_span_embeddings_agree_without_potential() {
    // every window-3 embedding of H6 spans all six orbitals
    let sys = BeSystem::h_chain(6, 1.4, 3).unwrap();
    assert!(sys.problems.iter().all(|p| p.emb.n_emb == 6));
    let sols: Vec<_> = sys.problems.iter().map(|p| p.solve(&p.zero_potential(), 0.0, None).unwrap()).collect();
    assert!(sys.delta_rho(&sols).unwrap() < 1e-9);
}

#[test]
fn delta_rho_by_hand() {
    let zero = QubitRDM::from_diagonal(vec![0], &[1.0, 0.0]).unwrap();
    let one = QubitRDM::from_diagonal(vec![0], &[0.0, 1.0]).unwrap();
    assert!((delta_rho(&[(zero.clone(), one.clone())]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    let pairs = vec![(zero.clone(), one.clone()), (one.clone(), one.clone())];
    assert!((delta_rho(&pairs).unwrap() - 1.0).abs() < 1e-15);
    let swapped = vec![(one.clone(), one.clone()), (one, zero)];
    assert_eq!(delta_rho(&pairs).unwrap(), delta_rho(&swapped).unwrap());
    assert_eq!(delta_rho(&[]).unwrap(), 0.0);
}

#[test]
fn own_expectations_are_linear_targets() {
    let p = toy_problem(3, 30);
    let sol = p.solve(&random_potential(&p, 0.2, 31), 0.0, None).unwrap();
    let a = p.generator_expectations(&sol.coeffs);
    let b = p.generator_targets(&sol.edge_rdms).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn mean_field_partition_reproduces_hf_energy() {
    let sys = BeSystem::h_chain(8, 1.4, 3).unwrap();
    let mf = &sys.mean_field;
    let mut e = sys.e_nuc;
    for p in &sys.problems {
        let b = &p.emb.basis;
        let core_in_emb = b.transpose() * &mf.density * b;
        // embedding density = projected total density; the core lies outside the span
        e += mean_field_center_energy(&p.emb, &p.fragment.local_centers(), &core_in_emb);
    }
    assert!((e - mf.e_hf).abs() < 1e-8, "{e} vs {}", mf.e_hf);
}

#[test]
fn single_fragment_energy_is_fci() {
    let ints = h_chain_integrals(4, 1.4).unwrap();
    let mf = restricted_hartree_fock(&ints, 4).unwrap();
    let frag = Fragment::new(0, vec![0, 1, 2, 3], vec![0, 1, 2, 3]).unwrap();
    let sys = BeSystem::new(&ints, mf, vec![frag]).unwrap();
    let trace = qbe_quadratic(&sys, &QbeOptions::default()).unwrap();
    assert_eq!(trace.records.len(), 1);
    assert_eq!(trace.records[0].delta_rho, 0.0);
    assert!(trace.converged);
    assert!((trace.energy.total - -2.1394425490600475).abs() < 1e-8);
}

#[test]
fn ledger_is_conserved() {
    let sys = BeSystem::h_chain(8, 1.4, 3).unwrap();
    let trace = qbe_quadratic(&sys, &QbeOptions { threshold: 1e-4, ..Default::default() }).unwrap();
    let nf = sys.problems.len() as u64;
    let mut prev = trace.records[0].eigensolver_calls_cum
        - trace.records[0].inner_evaluations as u64
        - nf
        - trace.records[0].number_solves as u64;
    assert!(prev >= nf);
    for r in &trace.records {
        assert_eq!(r.eigensolver_calls_cum, prev + r.inner_evaluations as u64 + nf + r.number_solves as u64);
        prev = r.eigensolver_calls_cum;
    }
    assert_eq!(trace.state.ledger.total(), prev);
}

#[test]
fn penalty_schedule_is_geometric() {
    let sys = BeSystem::h_chain(8, 1.4, 3).unwrap();
    let opts = QbeOptions { lambda0: 0.5, gamma: 3.0, threshold: 1e-4, ..Default::default() };
    let trace = qbe_quadratic(&sys, &opts).unwrap();
    for (k, r) in trace.records.iter().enumerate() {
        assert!((r.lambda - 0.5 * 3f64.powi(k as i32)).abs() < 1e-12);
    }
    assert!(qbe_quadratic(&sys, &QbeOptions { gamma: 1.0, ..Default::default() }).is_err());
    assert!(qbe_quadratic(&sys, &QbeOptions { lambda0: 0.0, ..Default::default() }).is_err());
}

#[test]
fn tomography_policy_counts_every_pauli_string() {
    let p = toy_problem(3, 40);
    let v = random_potential(&p, 0.3, 41);
    let targets = random_targets(2, 42);
    let sol = p.solve(&v, 0.0, None).unwrap();
    let exact = p.exact_penalty(&sol, &targets);
    let ledger = OracleLedger::new();
    let mut rng = seeded(43);
    let policy = ShotPolicy::Tomography { epsilon: 1e-4, d: 1.0 };
    let c = cost_function(&p, &v, 0.0, 1.0, &targets, policy, &mut rng, Some(&ledger)).unwrap();
    assert_eq!(c.shots, 2 * 15 * 100_000_000);
    assert_eq!(ledger.snapshot().tomography, c.shots);
    assert!(c.std_error > 0.0 && c.std_error < 1e-3);
    assert!((c.penalty - exact).abs() < 4.0 * c.std_error, "{} vs {exact} ± {}", c.penalty, c.std_error);
}
