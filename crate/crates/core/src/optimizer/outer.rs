//! Outer iterations: the quadratic penalty method with a geometric penalty
//! schedule, and the linear-constraint variant with multiplier updates.
//! Fragments are updated Jacobi-style against neighbor RDMs frozen at the
//! start of each iteration.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{
    evaluate_cost, lbfgs, nelder_mead, BeSystem, CostValue, EnergyReport, FragmentProblem, FragmentSolution,
    InnerOptions, ShotPolicy, SiteRdm, VbePotential,
};
use crate::error::{invalid, QbeError, Result};
use crate::oracle::{LedgerSnapshot, OracleLedger, Purpose};
use crate::rng::{child_seed, seeded, Rng};

const NUMBER_TOL: f64 = 1e-11;
const NUMBER_MAX_STEPS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QbeOptions {
    pub lambda0: f64,
    pub gamma: f64,
    pub threshold: f64,
    pub max_outer: usize,
    pub inner: InnerOptions,
    pub policy: ShotPolicy,
    /// Keep `Σ_A ⟨N_C⟩ = N_e` with a shared center chemical potential.
    pub number_constraint: bool,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for QbeOptions {
    fn default() -> Self {
        Self {
            lambda0: 1.0,
            gamma: 2.0,
            threshold: 1e-5,
            max_outer: 30,
            inner: InnerOptions::default(),
            policy: ShotPolicy::Exact,
            number_constraint: true,
            seed: 0,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearOptions {
    /// Damping of the Newton step on the multipliers.
    pub step: f64,
    pub threshold: f64,
    pub max_outer: usize,
    pub number_constraint: bool,
    pub parallel: bool,
}

impl Default for LinearOptions {
    fn default() -> Self {
        Self { step: 1.0, threshold: 1e-5, max_outer: 30, number_constraint: true, parallel: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Penalty weight used in this iteration; for the linear variant the
    /// largest multiplier magnitude.
    pub lambda: f64,
    pub mu: f64,
    pub delta_rho: f64,
    pub energy: f64,
    pub electron_count: f64,
    pub eigensolver_calls_cum: u64,
    pub shots_cum: u64,
    pub inner_evaluations: usize,
    /// Fragment re-solves spent on the chemical potential this iteration.
    pub number_solves: usize,
    pub stagnated_fragments: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BEState {
    pub iteration: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub mu: f64,
    pub potentials: Vec<VbePotential>,
    pub solutions: Vec<FragmentSolution>,
    pub delta_rho_history: Vec<f64>,
    pub ledger: LedgerSnapshot,
    pub shots: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QbeTrace {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub state: BEState,
    pub energy: EnergyReport,
}

/// Result of one fragment's inner minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentMinimum {
    pub potential: VbePotential,
    pub solution: FragmentSolution,
    pub cost: CostValue,
    pub evaluations: usize,
    pub stagnated: bool,
    pub shots: u64,
}

fn map_fragments<T, F>(n: usize, parallel: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Minimizes the fragment cost over the edge potential, starting at `v0`.
/// Exact mode uses L-BFGS with response gradients; sampled modes use
/// Nelder–Mead on the noisy cost.
#[allow(clippy::too_many_arguments)]
pub fn minimize_fragment(
    problem: &FragmentProblem,
    v0: &VbePotential,
    mu: f64,
    lambda: f64,
    targets: &[SiteRdm],
    policy: ShotPolicy,
    opts: &InnerOptions,
    rng: &mut Rng,
    ledger: Option<&OracleLedger>,
    start: Option<&[f64]>,
) -> Result<FragmentMinimum> {
    let x0 = problem.active_coefficients(v0);
    let mut warm: Option<Vec<f64>> = start.map(|s| s.to_vec());
    let mut shots = 0u64;
    let min = match policy {
        ShotPolicy::Exact => lbfgs(
            |x: &[f64]| -> Result<(f64, Vec<f64>)> {
                let sol = problem.solve_active(x, mu, warm.as_deref())?;
                let c = evaluate_cost(problem, &sol, lambda, targets, policy, rng, ledger)?;
                let g = problem.cost_gradient(x, mu, lambda, targets, &sol)?;
                warm = Some(sol.coeffs);
                Ok((c.value, g))
            },
            &x0,
            opts,
        )?,
        _ => nelder_mead(
            |x: &[f64]| -> Result<f64> {
                let sol = problem.solve_active(x, mu, warm.as_deref())?;
                let c = evaluate_cost(problem, &sol, lambda, targets, policy, rng, ledger)?;
                shots += c.shots;
                warm = Some(sol.coeffs);
                Ok(c.value)
            },
            &x0,
            opts,
        )?,
    };
    let solution = problem.solve_active(&min.x, mu, warm.as_deref())?;
    if let Some(l) = ledger {
        l.record(Purpose::Energy, 1);
    }
    let cost = evaluate_cost(problem, &solution, lambda, targets, ShotPolicy::Exact, rng, None)?;
    Ok(FragmentMinimum {
        potential: problem.with_active(&min.x),
        solution,
        cost,
        evaluations: min.evaluations,
        stagnated: min.stagnated,
        shots,
    })
}

fn solve_all(
    system: &BeSystem,
    xs: &[Vec<f64>],
    mu: f64,
    prev: Option<&[FragmentSolution]>,
    parallel: bool,
    ledger: &OracleLedger,
) -> Result<Vec<FragmentSolution>> {
    let sols = map_fragments(system.problems.len(), parallel, |i| {
        let start = prev.map(|p| p[i].coeffs.as_slice());
        system.problems[i].solve_active(&xs[i], mu, start)
    })?;
    ledger.record(Purpose::Energy, sols.len() as u64);
    Ok(sols)
}

/// Newton iterations on the shared center chemical potential so that the
/// center occupations add up to the electron count.
fn fix_number(
    system: &BeSystem,
    xs: &[Vec<f64>],
    mut mu: f64,
    mut sols: Vec<FragmentSolution>,
    parallel: bool,
    ledger: &OracleLedger,
) -> Result<(f64, Vec<FragmentSolution>, usize)> {
    let mut solves = 0;
    for _ in 0..NUMBER_MAX_STEPS {
        let err = system.n_elec as f64 - system.total_center_count(&sols);
        if err.abs() < NUMBER_TOL {
            break;
        }
        let slopes = map_fragments(system.problems.len(), parallel, |i| {
            system.problems[i].number_response(&xs[i], mu, &sols[i])
        })?;
        let slope: f64 = slopes.iter().sum();
        if !(slope < 0.0) {
            return Err(QbeError::Numerical(format!("center occupation response {slope} is not negative")));
        }
        mu += err / slope;
        sols = solve_all(system, xs, mu, Some(&sols), parallel, ledger)?;
        solves += sols.len();
    }
    Ok((mu, sols, solves))
}

#[allow(clippy::too_many_arguments)]
fn record(
    system: &BeSystem,
    iteration: usize,
    lambda: f64,
    mu: f64,
    sols: &[FragmentSolution],
    ledger: &OracleLedger,
    shots: u64,
    inner_evaluations: usize,
    number_solves: usize,
    stagnated_fragments: usize,
) -> Result<IterationRecord> {
    Ok(IterationRecord {
        iteration,
        lambda,
        mu,
        delta_rho: system.delta_rho(sols)?,
        energy: system.total_energy(sols).total,
        electron_count: system.total_center_count(sols),
        eigensolver_calls_cum: ledger.total(),
        shots_cum: shots,
        inner_evaluations,
        number_solves,
        stagnated_fragments,
    })
}

/// Quadratic penalty method: minimize every fragment's cost at fixed `λ`,
/// then `λ ← γλ`, until `Δρ ≤ threshold`.
pub fn qbe_quadratic(system: &BeSystem, opts: &QbeOptions) -> Result<QbeTrace> {
    if !(opts.lambda0 > 0.0) {
        return invalid(format!("initial penalty must be positive, got {}", opts.lambda0));
    }
    if !(opts.gamma > 1.0) {
        return invalid(format!("penalty growth factor must exceed 1, got {}", opts.gamma));
    }
    if !(opts.threshold > 0.0) || opts.max_outer == 0 {
        return invalid("threshold must be positive and the iteration cap non-zero");
    }
    let nf = system.problems.len();
    let ledger = OracleLedger::new();
    let mut potentials: Vec<VbePotential> = system.problems.iter().map(|p| p.zero_potential()).collect();
    let mut xs: Vec<Vec<f64>> = vec![Vec::new(); nf];
    for (x, p) in xs.iter_mut().zip(&system.problems) {
        *x = vec![0.0; p.n_active()];
    }
    let mut mu = 0.0;
    let mut sols = solve_all(system, &xs, mu, None, opts.parallel, &ledger)?;
    if opts.number_constraint {
        (mu, sols, _) = fix_number(system, &xs, mu, sols, opts.parallel, &ledger)?;
    }

    let mut lambda = opts.lambda0;
    let mut shots = 0u64;
    let mut records = Vec::new();
    let mut converged = false;
    for k in 1..=opts.max_outer {
        let targets = system.targets(&sols)?;
        let iter_seed = child_seed(opts.seed, k as u64);
        let mins = map_fragments(nf, opts.parallel, |i| {
            let mut rng = seeded(child_seed(iter_seed, i as u64));
            minimize_fragment(
                &system.problems[i],
                &potentials[i],
                mu,
                lambda,
                &targets[i],
                opts.policy,
                &opts.inner,
                &mut rng,
                Some(&ledger),
                Some(&sols[i].coeffs),
            )
        })?;
        let evals: usize = mins.iter().map(|m| m.evaluations).sum();
        let stagnated = mins.iter().filter(|m| m.stagnated).count();
        shots += mins.iter().map(|m| m.shots).sum::<u64>();
        for (i, m) in mins.into_iter().enumerate() {
            xs[i] = system.problems[i].active_coefficients(&m.potential);
            potentials[i] = m.potential;
            sols[i] = m.solution;
        }
        let mut nsolves = 0;
        if opts.number_constraint {
            (mu, sols, nsolves) = fix_number(system, &xs, mu, sols, opts.parallel, &ledger)?;
        }
        let rec = record(system, k, lambda, mu, &sols, &ledger, shots, evals, nsolves, stagnated)?;
        let done = rec.delta_rho <= opts.threshold;
        records.push(rec);
        if done {
            converged = true;
            break;
        }
        lambda *= opts.gamma;
    }
    finish(system, records, converged, lambda, opts.gamma, mu, potentials, sols, &ledger, shots)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    system: &BeSystem,
    records: Vec<IterationRecord>,
    converged: bool,
    lambda: f64,
    gamma: f64,
    mu: f64,
    potentials: Vec<VbePotential>,
    solutions: Vec<FragmentSolution>,
    ledger: &OracleLedger,
    shots: u64,
) -> Result<QbeTrace> {
    let energy = system.total_energy(&solutions);
    let state = BEState {
        iteration: records.last().map_or(0, |r| r.iteration),
        lambda,
        gamma,
        mu,
        potentials,
        solutions,
        delta_rho_history: records.iter().map(|r| r.delta_rho).collect(),
        ledger: ledger.snapshot(),
        shots,
    };
    Ok(QbeTrace { records, converged, state, energy })
}

/// Linear matching of `⟨Σ_α⟩` on each matched site. The edge potentials are
/// the Lagrange multipliers; each iteration takes a damped Newton step on
/// the dual using the fragment's static response.
pub fn qbe_linear(system: &BeSystem, opts: &LinearOptions) -> Result<QbeTrace> {
    if !(opts.step > 0.0 && opts.step <= 1.0) {
        return invalid(format!("multiplier step must lie in (0, 1], got {}", opts.step));
    }
    if !(opts.threshold > 0.0) || opts.max_outer == 0 {
        return invalid("threshold must be positive and the iteration cap non-zero");
    }
    let nf = system.problems.len();
    let ledger = OracleLedger::new();
    let mut xs: Vec<Vec<f64>> = system.problems.iter().map(|p| vec![0.0; p.n_active()]).collect();
    let mut mu = 0.0;
    let mut sols = solve_all(system, &xs, mu, None, opts.parallel, &ledger)?;
    if opts.number_constraint {
        (mu, sols, _) = fix_number(system, &xs, mu, sols, opts.parallel, &ledger)?;
    }
    let mut records = Vec::new();
    let mut converged = false;
    for k in 1..=opts.max_outer {
        let targets = system.targets(&sols)?;
        let updated = map_fragments(nf, opts.parallel, |i| {
            let p = &system.problems[i];
            let x = &xs[i];
            if x.is_empty() {
                return Ok((x.clone(), sols[i].clone()));
            }
            let sa = p.generator_expectations(&sols[i].coeffs);
            let sb = p.generator_targets(&targets[i])?;
            let chi = p.generator_response(x, mu, &sols[i])?;
            let rhs = DVector::from_iterator(sa.len(), sb.iter().zip(&sa).map(|(b, a)| b - a));
            let step = solve_response(&chi, &rhs)?;
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, d)| xi + opts.step * d).collect();
            let sol = p.solve_active(&xn, mu, Some(&sols[i].coeffs))?;
            Ok((xn, sol))
        })?;
        ledger.record(Purpose::Energy, nf as u64);
        for (i, (x, s)) in updated.into_iter().enumerate() {
            xs[i] = x;
            sols[i] = s;
        }
        let mut nsolves = 0;
        if opts.number_constraint {
            (mu, sols, nsolves) = fix_number(system, &xs, mu, sols, opts.parallel, &ledger)?;
        }
        let largest = xs.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let rec = record(system, k, largest, mu, &sols, &ledger, 0, nf, nsolves, 0)?;
        let done = rec.delta_rho <= opts.threshold;
        records.push(rec);
        if done {
            converged = true;
            break;
        }
    }
    let potentials = system.problems.iter().zip(&xs).map(|(p, x)| p.with_active(x)).collect();
    let lambda = records.last().map_or(0.0, |r| r.lambda);
    finish(system, records, converged, lambda, 1.0, mu, potentials, sols, &ledger, 0)
}

/// Solves `χ δ = r` for the (negative definite) static response `χ`.
fn solve_response(chi: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let neg = -chi;
    if let Some(ch) = neg.clone().cholesky() {
        return Ok(-ch.solve(rhs));
    }
    chi.clone().lu().solve(rhs).ok_or_else(|| QbeError::Numerical("singular generator response".into()))
}
