//! Small unconstrained minimizers for the per-fragment cost.

/// Outcome of an inner minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    /// Stopped on the iteration cap or a failed line search.
    pub stagnated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOptions {
    /// Stop when the step satisfies `‖Δx‖_∞ < step_tol`.
    pub step_tol: f64,
    /// Stop when `‖∇f‖_∞ < grad_tol`.
    pub grad_tol: f64,
    pub max_iterations: usize,
    /// Nelder–Mead initial simplex edge.
    pub simplex_step: f64,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self { step_tol: 1e-10, grad_tol: 1e-11, max_iterations: 200, simplex_step: 0.02 }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory BFGS with a backtracking Armijo line search.
/// `fg` returns the value and gradient at a point.
pub fn lbfgs<F, E>(mut fg: F, x0: &[f64], opts: &InnerOptions) -> Result<Minimum, E>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), E>,
{
    const MEMORY: usize = 8;
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut f, mut g) = fg(&x)?;
    let mut evals = 1;
    if n == 0 {
        return Ok(Minimum { x, value: f, evaluations: evals, iterations: 0, stagnated: false });
    }
    let mut hist: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::with_capacity(MEMORY);
    for it in 0..opts.max_iterations {
        if inf_norm(&g) < opts.grad_tol {
            return Ok(Minimum { x, value: f, evaluations: evals, iterations: it, stagnated: false });
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alpha = vec![0.0; hist.len()];
        for (i, (s, y, rho)) in hist.iter().enumerate().rev() {
            alpha[i] = rho * dot(s, &q);
            for (qj, yj) in q.iter_mut().zip(y) {
                *qj -= alpha[i] * yj;
            }
        }
        let gamma = match hist.last() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / inf_norm(&g).max(1.0),
        };
        for qj in q.iter_mut() {
            *qj *= gamma;
        }
        for (i, (s, y, rho)) in hist.iter().enumerate() {
            let beta = rho * dot(y, &q);
            for (qj, sj) in q.iter_mut().zip(s) {
                *qj += (alpha[i] - beta) * sj;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 {
            hist.clear();
            dir = g.iter().map(|v| -v / inf_norm(&g).max(1.0)).collect();
            slope = dot(&dir, &g);
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            if t * inf_norm(&dir) < opts.step_tol {
                // no decrease resolvable above the step tolerance
                return Ok(Minimum { x, value: f, evaluations: evals, iterations: it, stagnated: false });
            }
            let xt: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let (ft, gt) = fg(&xt)?;
            evals += 1;
            if ft <= f + 1e-4 * t * slope {
                accepted = Some((xt, ft, gt));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            return Ok(Minimum { x, value: f, evaluations: evals, iterations: it, stagnated: true });
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let step = inf_norm(&s);
        x = xn;
        f = fnew;
        g = gn;
        if step < opts.step_tol {
            return Ok(Minimum { x, value: f, evaluations: evals, iterations: it + 1, stagnated: false });
        }
        if sy > 1e-16 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if hist.len() == MEMORY {
                hist.remove(0);
            }
            hist.push((s, y, 1.0 / sy));
        }
    }
    Ok(Minimum { x, value: f, evaluations: evals, iterations: opts.max_iterations, stagnated: true })
}

/// Nelder–Mead simplex search with standard coefficients.
pub fn nelder_mead<F, E>(mut f: F, x0: &[f64], opts: &InnerOptions) -> Result<Minimum, E>
where
    F: FnMut(&[f64]) -> Result<f64, E>,
{
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };
    if n == 0 {
        let v = eval(x0, &mut evals)?;
        return Ok(Minimum { x: x0.to_vec(), value: v, evaluations: evals, iterations: 0, stagnated: false });
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0, &mut evals)?));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += opts.simplex_step;
        let v = eval(&x, &mut evals)?;
        simplex.push((x, v));
    }
    for it in 0..opts.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
            .fold(0.0, f64::max);
        if size < opts.step_tol {
            let (x, v) = simplex.swap_remove(0);
            return Ok(Minimum { x, value: v, evaluations: evals, iterations: it, stagnated: false });
        }
        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64).collect();
        let worst = simplex[n].clone();
        let along = |c: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(m, w)| m + c * (m - w)).collect() };
        let xr = along(1.0);
        let fr = eval(&xr, &mut evals)?;
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals)?;
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals)?;
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for k in 1..=n {
                    let xs: Vec<f64> = best.iter().zip(&simplex[k].0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    let fs = eval(&xs, &mut evals)?;
                    simplex[k] = (xs, fs);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    Ok(Minimum { x, value: v, evaluations: evals, iterations: opts.max_iterations, stagnated: true })
}
