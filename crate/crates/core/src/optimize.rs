//! Nelder-Mead simplex search for small noisy objectives.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    /// Initial simplex offset per coordinate.
    pub step: Vec<f64>,
    /// Stop as soon as the best value drops below this.
    pub threshold: f64,
    pub max_iterations: usize,
    /// Simplex diameter (relative to `step`) that triggers a restart around
    /// the best point. A best value that improves by less than 1 % over
    /// n + 1 iterations triggers one as well.
    pub restart_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub best: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub best: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub restarts: usize,
    pub trace: Vec<IterationRecord>,
}

fn simplex_around<F: FnMut(&[f64]) -> f64>(x: &[f64], fx: f64, step: &[f64], f: &mut F, evals: &mut usize) -> Vec<(Vec<f64>, f64)> {
    // each vertex is probed on both sides of x and the better side kept,
    // so the first reflections already point downhill
    let mut s = vec![(x.to_vec(), fx)];
    for i in 0..x.len() {
        let mut v = x.to_vec();
        v[i] += step[i];
        let mut fv = f(&v);
        *evals += 1;
        if fv >= fx {
            let mut w = x.to_vec();
            w[i] -= step[i];
            let fw = f(&w);
            *evals += 1;
            if fw < fv {
                v = w;
                fv = fw;
            }
        }
        s.push((v, fv));
    }
    s
}

fn sort(s: &mut [(Vec<f64>, f64)]) {
    s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
}

/// Minimize `f` from `x0`. Iteration 0 is the evaluation of `x0` alone; if it
/// is already below the threshold no simplex is built.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> OptimizeResult {
    let n = x0.len();
    let mut evals = 1;
    let f0 = f(x0);
    let mut trace = vec![IterationRecord {
        iteration: 0,
        best: x0.to_vec(),
        value: f0,
    }];
    if f0 < opts.threshold || n == 0 {
        return OptimizeResult {
            best: x0.to_vec(),
            value: f0,
            converged: f0 < opts.threshold,
            iterations: 0,
            evaluations: evals,
            restarts: 0,
            trace,
        };
    }
    let mut s = simplex_around(x0, f0, &opts.step, &mut f, &mut evals);
    sort(&mut s);
    let mut restarts = 0;
    let mut iteration = 0;
    let mut last_best = s[0].1;
    let mut stalled = 0;
    while iteration < opts.max_iterations {
        iteration += 1;
        let worst = s[n].clone();
        let centroid: Vec<f64> = (0..n).map(|d| s[..n].iter().map(|v| v.0[d]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < s[0].1 {
            let xe = along(2.0);
            let fe = f(&xe);
            evals += 1;
            s[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < s[n - 1].1 {
            s[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            };
            evals += 1;
            if fc < worst.1.min(fr) {
                s[n] = (xc, fc);
            } else {
                let best = s[0].0.clone();
                for v in s.iter_mut().skip(1) {
                    let x: Vec<f64> = best.iter().zip(&v.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    let fx = f(&x);
                    evals += 1;
                    *v = (x, fx);
                }
            }
        }
        sort(&mut s);
        trace.push(IterationRecord {
            iteration,
            best: s[0].0.clone(),
            value: s[0].1,
        });
        if s[0].1 < opts.threshold {
            return OptimizeResult {
                best: s[0].0.clone(),
                value: s[0].1,
                converged: true,
                iterations: iteration,
                evaluations: evals,
                restarts,
                trace,
            };
        }
        if s[0].1 < 0.99 * last_best {
            last_best = s[0].1;
            stalled = 0;
        } else {
            stalled += 1;
        }
        let size = s[1..]
            .iter()
            .map(|v| {
                v.0.iter()
                    .zip(&s[0].0)
                    .zip(&opts.step)
                    .map(|((a, b), st)| ((a - b) / st).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let collapsed = size < opts.restart_size;
        if collapsed || stalled > n {
            // noise can trap a collapsed simplex on a lucky draw; rebuild it,
            // smaller each time so a genuine optimum is not thrown away.
            // A stalled simplex is rebuilt on the axes with the step scaled by
            // how far the objective has come down, which frees it from a kink
            // it has been crawling along.
            restarts += 1;
            let best = s[0].0.clone();
            let fb = f(&best);
            evals += 1;
            let fresh: Vec<f64> = if collapsed {
                let k = 0.5f64.powi(restarts as i32).max(4.0 * opts.restart_size);
                opts.step.iter().map(|v| k * v).collect()
            } else {
                let k = (fb / f0).clamp(opts.restart_size, 1.0);
                opts.step.iter().map(|v| k * v).collect()
            };
            stalled = 0;
            last_best = fb;
            s = simplex_around(&best, fb, &fresh, &mut f, &mut evals);
            sort(&mut s);
        }
    }
    OptimizeResult {
        best: s[0].0.clone(),
        value: s[0].1,
        converged: false,
        iterations: iteration,
        evaluations: evals,
        restarts,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        let opts = NelderMeadOptions {
            step: vec![0.5, 0.5],
            threshold: 1e-8,
            max_iterations: 500,
            restart_size: 1e-6,
        };
        let r = nelder_mead(|x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2), &[0.0, 0.0], &opts);
        assert!(r.converged);
        assert!((r.best[0] - 1.0).abs() < 1e-3 && (r.best[1] + 2.0).abs() < 1e-3);
    }

    #[test]
    fn already_optimal_stops_at_zero() {
        let opts = NelderMeadOptions {
            step: vec![0.1],
            threshold: 0.01,
            max_iterations: 50,
            restart_size: 1e-4,
        };
        let r = nelder_mead(|x| x[0].abs(), &[0.001], &opts);
        assert_eq!(r.iterations, 0);
        assert!(r.converged);
    }
}
