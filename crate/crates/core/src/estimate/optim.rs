//! Derivative-free simplex search (Nelder–Mead) with restarts.
//!
//! Used for the outer searches over kernel and hyperparameters, which have
//! at most a handful of coordinates. The objective is minimized; callers
//! return `f64::INFINITY` for infeasible points.

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Initial simplex edge per coordinate.
    pub steps: Vec<f64>,
    pub max_evals: usize,
    /// Stop when the spread of objective values across the simplex falls below this.
    pub f_tol: f64,
    /// and every vertex lies within this distance of the best, per coordinate.
    pub x_tol: f64,
    /// Fresh simplices built around the best point after convergence.
    pub max_restarts: usize,
}

impl NelderMeadOptions {
    pub fn new(steps: Vec<f64>) -> Self {
        Self {
            steps,
            max_evals: 2000,
            f_tol: 1e-7,
            x_tol: 1e-5,
            max_restarts: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub restarts: usize,
    pub converged: bool,
    /// Best objective value after each iteration; never increases.
    pub trace: Vec<f64>,
}

pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut objective: F,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> NelderMeadResult {
    let dim = x0.len();
    assert_eq!(opts.steps.len(), dim, "one initial step per coordinate");
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0, &mut evals);
    let mut trace = vec![best_f];
    let mut restarts = 0;
    let mut converged = false;

    loop {
        let (x, f, done) = run_simplex(&mut eval, &mut evals, &best_x, best_f, opts, &mut trace);
        let improved = f < best_f - opts.f_tol;
        if f < best_f {
            best_x = x;
            best_f = f;
        }
        if !done {
            break;
        }
        // a converged simplex may have collapsed onto a non-stationary point;
        // rebuild it around the best vertex until a restart stops helping
        if (!improved && restarts > 0) || restarts >= opts.max_restarts || evals >= opts.max_evals {
            converged = true;
            break;
        }
        restarts += 1;
    }
    NelderMeadResult {
        x: best_x,
        f: best_f,
        evaluations: evals,
        restarts,
        converged,
        trace,
    }
}

fn run_simplex<E: FnMut(&[f64], &mut usize) -> f64>(
    eval: &mut E,
    evals: &mut usize,
    x0: &[f64],
    f0: f64,
    opts: &NelderMeadOptions,
    trace: &mut Vec<f64>,
) -> (Vec<f64>, f64, bool) {
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let dim = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), f0));
    for j in 0..dim {
        let mut x = x0.to_vec();
        x[j] += opts.steps[j];
        let f = eval(&x, evals);
        simplex.push((x, f));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    order(&mut simplex);

    loop {
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        let best_so_far = trace.last().copied().unwrap_or(f64::INFINITY).min(best);
        trace.push(best_so_far);

        let spread_f = worst - best;
        let spread_x = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread_f.is_finite() && spread_f <= opts.f_tol && spread_x <= opts.x_tol {
            return (simplex[0].0.clone(), best, true);
        }
        if *evals >= opts.max_evals {
            return (simplex[0].0.clone(), best, false);
        }

        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / dim as f64;
            }
        }
        let toward = |coef: f64, from: &[f64]| -> Vec<f64> {
            centroid.iter().zip(from).map(|(c, w)| c + coef * (c - w)).collect()
        };

        let xr = toward(REFLECT, &simplex[dim].0);
        let fr = eval(&xr, evals);
        if fr < simplex[0].1 {
            let xe = toward(EXPAND, &simplex[dim].0);
            let fe = eval(&xe, evals);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[dim].1 {
                // outside contraction: between centroid and reflected point
                let xc = toward(CONTRACT, &simplex[dim].0);
                let fc = eval(&xc, evals);
                (xc, fc)
            } else {
                let xc = toward(-CONTRACT, &simplex[dim].0);
                let fc = eval(&xc, evals);
                (xc, fc)
            };
            if fc < simplex[dim].1.min(fr) {
                simplex[dim] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = x_best
                        .iter()
                        .zip(&vertex.0)
                        .map(|(b, v)| b + SHRINK * (v - b))
                        .collect();
                    let f = eval(&x, evals);
                    *vertex = (x, f);
                }
            }
        }
        order(&mut simplex);
    }
}
