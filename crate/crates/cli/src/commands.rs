use std::path::Path;

use rayon::prelude::*;

use qbe::fragment::{fragment_chain, EmbeddingHamiltonian};
use qbe::integrals::{fcidump_read, fcidump_write, h_chain_integrals, IntegralSet};
use qbe::matching::{
    amplitude_estimate_bs, nsamp_swap, nsamp_swap_ae, nsamp_tomography, sample_swap_p0, swap_probability,
};
use qbe::optimizer::{
    qbe_linear, qbe_quadratic, BeSystem, InnerOptions, LinearOptions, QbeOptions, QbeTrace, ShotPolicy,
};
use qbe::qubits::{ground_state, qubit_rdm, Statevector};
use qbe::rng::{child_seed, seeded};
use qbe::scf::{restricted_hartree_fock, MeanFieldSolution};

use crate::config::{ExperimentConfig, Policy, Variant};
use crate::output::{num, write_csv, write_gnuplot, Metadata, Series};
use crate::CliError;

const SWAP_CONVENTION: &str = "one SWAP shot counts as one joint preparation of both fragment states";

/// Integrals of the configured system and its electron count.
fn load_integrals(cfg: &ExperimentConfig) -> Result<(IntegralSet, usize), CliError> {
    match &cfg.system.fcidump {
        Some(path) => {
            let f = fcidump_read(path)?;
            if f.ms2 != 0 {
                return Err(CliError::Config {
                    field: "system.fcidump".into(),
                    msg: format!("only closed-shell systems are supported, file has MS2={}", f.ms2),
                });
            }
            Ok((f.ints, f.n_elec))
        }
        None => Ok((h_chain_integrals(cfg.system.n_atoms, cfg.system.spacing)?, cfg.system.n_atoms)),
    }
}

fn mean_field(cfg: &ExperimentConfig) -> Result<(IntegralSet, MeanFieldSolution), CliError> {
    let (ints, n_elec) = load_integrals(cfg)?;
    let mf = restricted_hartree_fock(&ints, n_elec)?;
    Ok((ints, mf))
}

fn system(cfg: &ExperimentConfig) -> Result<BeSystem, CliError> {
    let (ints, mf) = mean_field(cfg)?;
    let n = ints.n_orb();
    if cfg.system.window > n {
        return Err(CliError::Config {
            field: "system.window".into(),
            msg: format!("{} exceeds the {n} orbitals of the system", cfg.system.window),
        });
    }
    Ok(BeSystem::new(&ints, mf, fragment_chain(n, cfg.system.window)?)?)
}

fn meta(command: &'static str, cfg: &ExperimentConfig) -> Metadata {
    Metadata::new(command, cfg.hash(), cfg.seed)
}

pub fn integrals(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let (ints, n_elec) = load_integrals(cfg)?;
    let n = ints.n_orb();
    let mut rows = Vec::new();
    for p in 0..n {
        for q in p..n {
            rows.push(vec![p.to_string(), q.to_string(), num(ints.h[(p, q)])]);
        }
    }
    let m = meta("integrals", cfg)
        .with("n_orbitals", n)
        .with("n_electrons", n_elec)
        .with("nuclear_repulsion", num(ints.e_nuc));
    let path = write_csv(out, "integrals", &m, &["p", "q", "h_pq"], &rows)?;
    println!("orbitals={n} electrons={n_elec} e_nuc={:.12} -> {}", ints.e_nuc, path.display());
    Ok(())
}

pub fn scf(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let (_, mf) = mean_field(cfg)?;
    let n_occ = mf.n_elec / 2;
    let rows: Vec<Vec<String>> = mf
        .orbital_energies
        .iter()
        .enumerate()
        .map(|(i, e)| vec![i.to_string(), num(*e), (if i < n_occ { 2 } else { 0 }).to_string()])
        .collect();
    let m = meta("scf", cfg).with("e_hf", num(mf.e_hf)).with("iterations", mf.iterations);
    let path = write_csv(out, "scf", &m, &["orbital", "energy", "occupation"], &rows)?;
    println!("e_hf={:.12} iterations={} -> {}", mf.e_hf, mf.iterations, path.display());
    Ok(())
}

pub fn fcidump_export(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let (ints, n_elec) = load_integrals(cfg)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let path = out.join("system.fcidump");
    fcidump_write(&ints, n_elec, 0, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn fcidump_import(path: &Path, fci: bool) -> Result<(), CliError> {
    let f = fcidump_read(path)?;
    print!("norb={} nelec={} ms2={} e_nuc={:.12}", f.ints.n_orb(), f.n_elec, f.ms2, f.ints.e_nuc);
    if fci {
        let emb = EmbeddingHamiltonian::from_integrals(&f.ints, f.n_elec);
        let (gs, _) = ground_state(&emb, f.n_elec, f.ms2)?;
        print!(" e_fci={:.12}", gs.energy);
    }
    println!();
    Ok(())
}

fn shot_policy(cfg: &ExperimentConfig) -> ShotPolicy {
    let r = &cfg.run;
    match r.policy {
        Policy::Exact => ShotPolicy::Exact,
        Policy::Swap => ShotPolicy::Swap { epsilon: r.epsilon },
        Policy::SwapAe => ShotPolicy::SwapAe { epsilon: r.epsilon, delta: r.delta },
        Policy::Tomography => ShotPolicy::Tomography { epsilon: r.epsilon, d: r.tomography_d },
    }
}

fn run_variant(cfg: &ExperimentConfig, sys: &BeSystem) -> Result<QbeTrace, CliError> {
    let r = &cfg.run;
    let trace = match r.variant {
        Variant::Quadratic => qbe_quadratic(
            sys,
            &QbeOptions {
                lambda0: r.lambda0,
                gamma: r.gamma,
                threshold: r.threshold,
                max_outer: r.max_outer,
                inner: InnerOptions { max_iterations: r.inner_max_iterations, ..Default::default() },
                policy: shot_policy(cfg),
                number_constraint: r.number_constraint,
                seed: cfg.seed,
                parallel: true,
            },
        )?,
        Variant::Linear => qbe_linear(
            sys,
            &LinearOptions {
                step: r.linear_step,
                threshold: r.threshold,
                max_outer: r.max_outer,
                number_constraint: r.number_constraint,
                parallel: true,
            },
        )?,
    };
    Ok(trace)
}

pub fn be_run(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let sys = system(cfg)?;
    let trace = run_variant(cfg, &sys)?;
    let e_final = trace.energy.total;
    let rows: Vec<Vec<String>> = trace
        .records
        .iter()
        .map(|r| {
            vec![
                r.iteration.to_string(),
                num(r.lambda),
                num(r.delta_rho),
                num(r.energy),
                num(r.energy - e_final),
                r.eigensolver_calls_cum.to_string(),
                r.shots_cum.to_string(),
            ]
        })
        .collect();
    let last = trace.records.last().expect("at least one iteration");
    let m = meta("be-run", cfg)
        .with("variant", format!("{:?}", cfg.run.variant).to_lowercase())
        .with("fragments", sys.problems.len())
        .with("converged", trace.converged)
        .with("final_energy", num(e_final))
        .with("convention", SWAP_CONVENTION);
    let header =
        ["iteration", "lambda", "delta_rho", "energy", "energy_error_vs_final", "eigensolver_calls_cum", "shots_cum"];
    let path = write_csv(out, "be_run", &m, &header, &rows)?;
    write_gnuplot(out, "be_run", "iteration", "delta rho", false, true, &[Series { x: 1, y: 3, title: "delta rho" }])?;
    println!(
        "converged={} iterations={} delta_rho={:.3e} energy={:.10} eigensolver_calls={} -> {}",
        trace.converged,
        last.iteration,
        last.delta_rho,
        e_final,
        last.eigensolver_calls_cum,
        path.display()
    );
    if trace.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!(
            "delta_rho {:.3e} above threshold {:.3e} after {} iterations",
            last.delta_rho, cfg.run.threshold, last.iteration
        )))
    }
}

fn h4_ground_state(spacing: f64) -> Result<Statevector, CliError> {
    let ints = h_chain_integrals(4, spacing)?;
    let emb = EmbeddingHamiltonian::from_integrals(&ints, 4);
    let (gs, ham) = ground_state(&emb, 4, 0)?;
    Ok(Statevector::from_sector(&ham.sector, &gs.coeffs)?)
}

pub fn overlap_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let o = &cfg.overlap_sweep;
    let swap = nsamp_swap(o.s, o.epsilon);
    let rows: Vec<Vec<String>> = o
        .qubits
        .iter()
        .map(|&m| {
            let t = nsamp_tomography(o.epsilon, m, o.tomography_d);
            vec![m.to_string(), t.to_string(), swap.to_string(), num(t as f64 / swap as f64)]
        })
        .collect();
    let m = meta("overlap-sweep", cfg)
        .with("epsilon", o.epsilon)
        .with("tomography_d", o.tomography_d)
        .with("swap_overlap_amplitude", o.s);
    let path = write_csv(out, "overlap_sweep", &m, &["m_qubits", "nsamp_tomography", "nsamp_swap", "ratio"], &rows)?;
    write_gnuplot(
        out,
        "overlap_sweep",
        "overlap qubits",
        "samples",
        false,
        true,
        &[Series { x: 1, y: 2, title: "tomography" }, Series { x: 1, y: 3, title: "SWAP" }],
    )?;

    // two identical, non-interacting H4 chains; SWAP test on the first m qubits of each
    let psi = h4_ground_state(cfg.system.spacing)?;
    let mut points = Vec::new();
    for &m in &o.qubits {
        let rho = qubit_rdm(&psi, &(0..m as usize).collect::<Vec<_>>())?;
        let p0 = swap_probability(&rho, &rho)?;
        for &shots in &o.shots {
            points.push((m, shots, p0));
        }
    }
    let inset = points
        .par_iter()
        .enumerate()
        .map(|(k, &(m, shots, p0))| {
            let est = sample_swap_p0(p0, shots, &mut seeded(child_seed(cfg.seed, k as u64)))?;
            let exact = p0.sqrt();
            Ok(vec![
                m.to_string(),
                shots.to_string(),
                num(est.amplitude),
                num(exact),
                num((est.amplitude - exact).abs()),
                num(est.amplitude_std_error),
            ])
        })
        .collect::<Result<Vec<_>, qbe::QbeError>>()?;
    let m = meta("overlap-sweep", cfg)
        .with("system", "two H4 chains, ancilla amplitude sqrt((1 + Tr[rho^2])/2)")
        .with("convention", SWAP_CONVENTION);
    let header = ["m_qubits", "shots", "estimate", "exact", "abs_error", "std_error"];
    let inset_path = write_csv(out, "overlap_h4", &m, &header, &inset)?;
    write_gnuplot(out, "overlap_h4", "shots", "abs error", true, true, &[Series { x: 2, y: 5, title: "abs error" }])?;
    println!("-> {} {}", path.display(), inset_path.display());
    Ok(())
}

/// Point where two positive curves cross, interpolated in log space.
fn crossing(x: &[f64], a: &[f64], b: &[f64]) -> Option<f64> {
    (1..x.len()).find_map(|i| {
        let d0 = a[i - 1].ln() - b[i - 1].ln();
        let d1 = a[i].ln() - b[i].ln();
        if d0 == 0.0 {
            Some(x[i - 1])
        } else if d0 * d1 < 0.0 {
            Some(x[i - 1] + d0 / (d0 - d1) * (x[i] - x[i - 1]))
        } else {
            None
        }
    })
}

fn ae_calls(s: f64, epsilon: f64, delta: f64, seed: u64) -> Result<u64, qbe::QbeError> {
    Ok(amplitude_estimate_bs(0.5 * (1.0 + s * s), epsilon, delta, &mut seeded(seed))?.eigensolver_calls)
}

pub fn crossover(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let c = &cfg.crossover;
    let (lo, hi) = (c.epsilon_min.log10(), c.epsilon_max.log10());
    let logs: Vec<f64> =
        (0..c.epsilon_points).map(|k| hi - (hi - lo) * k as f64 / (c.epsilon_points - 1) as f64).collect();
    let eps_rows = logs
        .par_iter()
        .enumerate()
        .map(|(k, &l)| {
            let e = 10f64.powf(l);
            Ok((e, nsamp_swap(c.s, e), ae_calls(c.s, e, c.delta, child_seed(cfg.seed, k as u64))?, nsamp_swap_ae(e)))
        })
        .collect::<Result<Vec<_>, qbe::QbeError>>()?;
    let eps_star = crossing(
        &logs,
        &eps_rows.iter().map(|r| r.1 as f64).collect::<Vec<_>>(),
        &eps_rows.iter().map(|r| r.2 as f64).collect::<Vec<_>>(),
    )
    .map(|l| 10f64.powf(l));

    let ss: Vec<f64> = (0..c.s_points).map(|k| c.s_max * k as f64 / (c.s_points - 1) as f64).collect();
    let s_rows = ss
        .par_iter()
        .enumerate()
        .map(|(k, &s)| {
            let seed = child_seed(cfg.seed, (c.epsilon_points + k) as u64);
            Ok((s, nsamp_swap(s, c.epsilon), ae_calls(s, c.epsilon, c.delta, seed)?))
        })
        .collect::<Result<Vec<_>, qbe::QbeError>>()?;
    let s_star = crossing(
        &ss,
        &s_rows.iter().map(|r| r.1 as f64).collect::<Vec<_>>(),
        &s_rows.iter().map(|r| r.2 as f64).collect::<Vec<_>>(),
    );

    let fmt_opt = |x: Option<f64>| x.map_or("none".to_string(), num);
    let m = meta("crossover", cfg)
        .with("overlap_amplitude", c.s)
        .with("delta", c.delta)
        .with("crossover_epsilon", fmt_opt(eps_star))
        .with("convention", SWAP_CONVENTION);
    let rows: Vec<Vec<String>> =
        eps_rows.iter().map(|r| vec![num(r.0), r.1.to_string(), r.2.to_string(), r.3.to_string()]).collect();
    let p1 =
        write_csv(out, "crossover_epsilon", &m, &["epsilon", "calls_swap", "calls_swap_ae", "closed_form_ae"], &rows)?;
    write_gnuplot(
        out,
        "crossover_epsilon",
        "epsilon",
        "eigensolver calls",
        true,
        true,
        &[Series { x: 1, y: 2, title: "SWAP" }, Series { x: 1, y: 3, title: "SWAP+AE" }],
    )?;

    let m = meta("crossover", cfg)
        .with("epsilon", c.epsilon)
        .with("delta", c.delta)
        .with("crossover_s", fmt_opt(s_star))
        .with("convention", SWAP_CONVENTION);
    let rows: Vec<Vec<String>> = s_rows.iter().map(|r| vec![num(r.0), r.1.to_string(), r.2.to_string()]).collect();
    let p2 = write_csv(out, "crossover_s", &m, &["s", "calls_swap", "calls_swap_ae"], &rows)?;
    write_gnuplot(
        out,
        "crossover_s",
        "overlap S",
        "eigensolver calls",
        false,
        true,
        &[Series { x: 1, y: 2, title: "SWAP" }, Series { x: 1, y: 3, title: "SWAP+AE" }],
    )?;
    println!(
        "crossover_epsilon={} crossover_s={} -> {} {}",
        fmt_opt(eps_star),
        fmt_opt(s_star),
        p1.display(),
        p2.display()
    );
    Ok(())
}
