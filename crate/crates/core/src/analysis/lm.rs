//! Box-constrained Levenberg-Marquardt with a finite-difference Jacobian.
//!
//! Sized for problems with a handful of parameters: the damped normal
//! equations are solved densely.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    /// Budget of residual evaluations, Jacobian columns included.
    pub max_evals: usize,
    /// Relative cost reduction below which an accepted step counts as converged.
    pub ftol: f64,
    /// Relative parameter change below which an accepted step counts as converged.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_evals: 4000,
            ftol: 1e-14,
            xtol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    /// Sum of squared residuals at `x`.
    pub cost: f64,
    pub n_evals: usize,
    pub converged: bool,
}

struct Problem<'a, F> {
    residuals: F,
    m: usize,
    lower: &'a [f64],
    upper: &'a [f64],
    n_evals: usize,
}

impl<F: FnMut(&[f64], &mut [f64])> Problem<'_, F> {
    fn eval(&mut self, x: &[f64], r: &mut [f64]) -> f64 {
        self.n_evals += 1;
        (self.residuals)(x, r);
        r.iter().map(|v| v * v).sum()
    }

    fn jacobian(&mut self, x: &[f64], jac: &mut [Vec<f64>]) {
        let mut xp = x.to_vec();
        let mut rp = vec![0.0; self.m];
        let mut rm = vec![0.0; self.m];
        for j in 0..x.len() {
            let h = 1e-6 * x[j].abs().max(1.0);
            let hi = (x[j] + h).min(self.upper[j]);
            let lo = (x[j] - h).max(self.lower[j]);
            xp[j] = hi;
            self.eval(&xp, &mut rp);
            xp[j] = lo;
            self.eval(&xp, &mut rm);
            xp[j] = x[j];
            let width = hi - lo;
            for i in 0..self.m {
                jac[j][i] = (rp[i] - rm[i]) / width;
            }
        }
    }
}

/// Solves `a x = b` for a small dense system by Gaussian elimination with
/// partial pivoting. Returns `None` if the matrix is singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 || !a[pivot][col].is_finite() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Minimizes `sum_i r_i(x)^2` subject to `lower <= x <= upper`.
///
/// `residuals(x, r)` fills the `m` residuals at `x`. Trial steps are projected
/// onto the box. When the budget runs out the best point found is returned
/// with `converged = false`.
pub fn minimize<F>(
    residuals: F,
    m: usize,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &LmOptions,
) -> LmOutcome
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = x0.len();
    assert!(lower.len() == n && upper.len() == n, "bounds must match the parameter count");
    let mut prob = Problem {
        residuals,
        m,
        lower,
        upper,
        n_evals: 0,
    };
    let clamp = |x: &mut [f64]| {
        for j in 0..n {
            x[j] = x[j].clamp(lower[j], upper[j]);
        }
    };

    let mut x = x0.to_vec();
    clamp(&mut x);
    let mut r = vec![0.0; m];
    let mut cost = prob.eval(&x, &mut r);
    let mut jac = vec![vec![0.0; m]; n];
    let mut lambda = 1e-3;
    let mut trial_r = vec![0.0; m];

    if cost == 0.0 {
        return LmOutcome { x, cost, n_evals: prob.n_evals, converged: true };
    }

    while prob.n_evals + 2 * n < opts.max_evals {
        prob.jacobian(&x, &mut jac);
        let mut a = vec![vec![0.0; n]; n];
        let mut g = vec![0.0; n];
        for j in 0..n {
            for k in 0..=j {
                let v: f64 = jac[j].iter().zip(&jac[k]).map(|(p, q)| p * q).sum();
                a[j][k] = v;
                a[k][j] = v;
            }
            g[j] = jac[j].iter().zip(&r).map(|(p, q)| p * q).sum();
        }

        // inner loop: raise damping until a step lowers the cost
        loop {
            if prob.n_evals + 1 > opts.max_evals {
                return LmOutcome { x, cost, n_evals: prob.n_evals, converged: false };
            }
            let mut damped = a.clone();
            for j in 0..n {
                damped[j][j] += lambda * a[j][j].max(1e-12);
            }
            let step = solve(damped, g.iter().map(|v| -v).collect());
            let Some(step) = step else {
                lambda *= 10.0;
                if lambda > 1e20 {
                    return LmOutcome { x, cost, n_evals: prob.n_evals, converged: false };
                }
                continue;
            };
            let mut trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            clamp(&mut trial);
            if trial == x {
                // projected step vanishes: stationary on the box
                return LmOutcome { x, cost, n_evals: prob.n_evals, converged: true };
            }
            let trial_cost = prob.eval(&trial, &mut trial_r);
            if trial_cost < cost {
                let small_step = trial
                    .iter()
                    .zip(&x)
                    .all(|(t, v)| (t - v).abs() <= opts.xtol * (v.abs() + opts.xtol));
                let small_gain = (cost - trial_cost) <= opts.ftol * cost;
                x = trial;
                std::mem::swap(&mut r, &mut trial_r);
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                if small_step || small_gain || cost == 0.0 {
                    return LmOutcome { x, cost, n_evals: prob.n_evals, converged: true };
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e20 {
                // no descent direction left at numerical precision
                return LmOutcome { x, cost, n_evals: prob.n_evals, converged: true };
            }
        }
    }
    LmOutcome { x, cost, n_evals: prob.n_evals, converged: false }
}
