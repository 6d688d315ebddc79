//! Least-squares helpers: Levenberg-Marquardt with a numerical Jacobian and
//! weighted straight-line fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Weighted residual sum of squares.
    pub rss: f64,
    pub dof: usize,
    pub iterations: usize,
}

impl FitResult {
    pub fn stderr(&self, i: usize) -> f64 {
        self.covariance[i][i].max(0.0).sqrt()
    }
}

fn residuals<F: Fn(f64, &[f64]) -> f64>(f: &F, x: &[f64], y: &[f64], w: &[f64], p: &[f64]) -> DVector<f64> {
    DVector::from_iterator(x.len(), x.iter().zip(y).zip(w).map(|((&xi, &yi), &wi)| (yi - f(xi, p)) * wi))
}

fn jacobian<F: Fn(f64, &[f64]) -> f64>(f: &F, x: &[f64], w: &[f64], p: &[f64]) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(x.len(), p.len());
    let mut q = p.to_vec();
    for c in 0..p.len() {
        let h = 1e-7 * p[c].abs().max(1e-7);
        q[c] = p[c] + h;
        let up: Vec<f64> = x.iter().map(|&xi| f(xi, &q)).collect();
        q[c] = p[c] - h;
        let dn: Vec<f64> = x.iter().map(|&xi| f(xi, &q)).collect();
        q[c] = p[c];
        for r in 0..x.len() {
            j[(r, c)] = (up[r] - dn[r]) / (2.0 * h) * w[r];
        }
    }
    j
}

/// Fit `y ~ f(x, p)` starting from `p0`. With `sigma` the residuals are
/// weighted by `1/sigma`; the covariance is always scaled by the reduced
/// chi-square.
pub fn curve_fit<F: Fn(f64, &[f64]) -> f64>(f: F, x: &[f64], y: &[f64], sigma: Option<&[f64]>, p0: &[f64]) -> Result<FitResult> {
    let n = x.len();
    let np = p0.len();
    if n != y.len() || n <= np {
        return Err(invalid(format!("need more points ({n}) than parameters ({np})")));
    }
    let w: Vec<f64> = match sigma {
        Some(s) => {
            if s.len() != n || s.iter().any(|&v| !(v > 0.0)) {
                return Err(invalid("sigma must be positive, one per point"));
            }
            s.iter().map(|v| 1.0 / v).collect()
        }
        None => vec![1.0; n],
    };
    let mut p = p0.to_vec();
    let mut r = residuals(&f, x, y, &w, &p);
    let mut rss = r.norm_squared();
    if !rss.is_finite() {
        return Err(Error::NonConvergence {
            reason: "model not finite at the starting point".into(),
            rss,
        });
    }
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut jac = jacobian(&f, x, &w, &p);
    for it in 0..500 {
        iterations = it + 1;
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj.clone();
            for d in 0..np {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-30);
            }
            let Some(delta) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let rt = residuals(&f, x, y, &w, &trial);
            let rss_t = rt.norm_squared();
            if rss_t.is_finite() && rss_t <= rss {
                let rel = (rss - rss_t) / rss.max(1e-300);
                let step = delta.norm() / (p.iter().map(|v| v * v).sum::<f64>().sqrt() + 1e-30);
                p = trial;
                r = rt;
                rss = rss_t;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                if rel < 1e-14 || step < 1e-13 {
                    return finish(&f, x, &w, p, rss, n - np, iterations);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no downhill step at any damping: at a minimum to machine precision
            return finish(&f, x, &w, p, rss, n - np, iterations);
        }
        jac = jacobian(&f, x, &w, &p);
    }
    Err(Error::NonConvergence {
        reason: format!("no convergence after {iterations} iterations"),
        rss,
    })
}

fn finish<F: Fn(f64, &[f64]) -> f64>(
    f: &F,
    x: &[f64],
    w: &[f64],
    p: Vec<f64>,
    rss: f64,
    dof: usize,
    iterations: usize,
) -> Result<FitResult> {
    let jac = jacobian(f, x, w, &p);
    let jtj = jac.transpose() * &jac;
    let np = p.len();
    let scale = if dof > 0 { rss / dof as f64 } else { 0.0 };
    let cov = match jtj.clone().try_inverse() {
        Some(inv) => (0..np).map(|i| (0..np).map(|j| inv[(i, j)] * scale).collect()).collect(),
        None => vec![vec![f64::INFINITY; np]; np],
    };
    Ok(FitResult {
        params: p,
        covariance: cov,
        rss,
        dof,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub var_intercept: f64,
    pub var_slope: f64,
    pub cov: f64,
    pub reduced_chi2: f64,
}

/// Weighted least squares for `y = intercept + slope * x` with weights
/// `1/var`. Parameter variances are scaled by the reduced chi-square when
/// more than two points are given.
pub fn line_fit(x: &[f64], y: &[f64], var: Option<&[f64]>) -> Result<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(invalid("line fit needs at least two points"));
    }
    let w: Vec<f64> = match var {
        Some(v) => v.iter().map(|&s| 1.0 / s).collect(),
        None => vec![1.0; n],
    };
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        s += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
        sxx += w[i] * x[i] * x[i];
        sxy += w[i] * x[i] * y[i];
    }
    let d = s * sxx - sx * sx;
    if !(d.abs() > 0.0) {
        return Err(invalid("degenerate abscissae in line fit"));
    }
    let slope = (s * sxy - sx * sy) / d;
    let intercept = (sxx * sy - sx * sxy) / d;
    let chi2: f64 = (0..n).map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2)).sum();
    let red = if n > 2 { chi2 / (n - 2) as f64 } else { 1.0 };
    let scale = if var.is_some() && n <= 2 { 1.0 } else { red };
    Ok(LineFit {
        intercept,
        slope,
        var_intercept: sxx / d * scale,
        var_slope: s / d * scale,
        cov: -sx / d * scale,
        reduced_chi2: red,
    })
}

/// Frequency with the largest periodogram amplitude of mean-removed data on
/// the grid `(0, f_max]`.
pub fn dominant_frequency(t: &[f64], y: &[f64], f_max: f64, steps: usize) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut best = (0.0, f_max / steps as f64);
    for k in 1..=steps {
        let f = f_max * k as f64 / steps as f64;
        let (mut c, mut s) = (0.0, 0.0);
        for (&ti, &yi) in t.iter().zip(y) {
            let ph = 2.0 * std::f64::consts::PI * f * ti;
            c += (yi - mean) * ph.cos();
            s += (yi - mean) * ph.sin();
        }
        let p = c * c + s * s;
        if p > best.0 {
            best = (p, f);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exponential() {
        let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let y: Vec<f64> = x.iter().map(|&t| 2.0 * (-t / 3.0).exp() + 0.1).collect();
        let r = curve_fit(|t, p| p[0] * (-t / p[1]).exp() + p[2], &x, &y, None, &[1.0, 1.0, 0.0]).unwrap();
        assert!((r.params[0] - 2.0).abs() < 1e-8);
        assert!((r.params[1] - 3.0).abs() < 1e-8);
        assert!((r.params[2] - 0.1).abs() < 1e-8);
    }

    #[test]
    fn line_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let l = line_fit(&x, &y, None).unwrap();
        assert!((l.slope - 2.0).abs() < 1e-12 && (l.intercept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dominant_frequency_finds_tone() {
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
        let y: Vec<f64> = t.iter().map(|&x| (2.0 * std::f64::consts::PI * 7.0 * x).cos()).collect();
        let f = dominant_frequency(&t, &y, 20.0, 400);
        assert!((f - 7.0).abs() < 0.1);
    }
}
