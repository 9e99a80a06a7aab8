use serde::Serialize;

use super::lm::{self, LmOptions};
use crate::error::{Error, Result};
use crate::model;
use crate::params::ModelParams;

/// Bounds, starting point and budget for [`fit_energy_curve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub d_q_bounds: (f64, f64),
    pub t_s_bounds: (f64, f64),
    pub init: (f64, f64),
    pub max_evals: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            d_q_bounds: (1.0, 200.0),
            t_s_bounds: (5.0, 500.0),
            init: (25.0, 50.0),
            max_evals: 4000,
        }
    }
}

impl FitOptions {
    /// Defaults with the starting diffusion coefficient set to the classical `K^2/4`.
    #[allow(non_snake_case)]
    pub fn for_kick_strength(K: f64) -> Self {
        let mut opts = FitOptions::default();
        opts.init.0 = (K * K / 4.0).clamp(opts.d_q_bounds.0, opts.d_q_bounds.1);
        opts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct FitResult {
    pub D_q: f64,
    pub t_s: f64,
    /// Sum of squared residuals.
    pub residual_norm: f64,
    pub n_evals: usize,
    pub converged: bool,
    pub n_points: usize,
}

/// Least-squares fit of the filtered-energy model to a measured trace.
///
/// `trace[t]` is the filtered energy after `t` kicks; missing entries are
/// skipped. `Pi` and `Delta` are held fixed while `(D_q, t_s)` are adjusted
/// with uniform weights over the whole trace.
#[allow(non_snake_case)]
pub fn fit_energy_curve(trace: &[Option<f64>], Pi: f64, Delta: f64, opts: &FitOptions) -> Result<FitResult> {
    let points: Vec<(f64, f64)> = trace
        .iter()
        .enumerate()
        .filter_map(|(t, e)| e.filter(|v| v.is_finite()).map(|v| (t as f64, v)))
        .collect();
    fit_points(&points, Pi, Delta, opts)
}

/// Same as [`fit_energy_curve`] on explicit `(t, energy)` pairs.
#[allow(non_snake_case)]
pub fn fit_points(points: &[(f64, f64)], Pi: f64, Delta: f64, opts: &FitOptions) -> Result<FitResult> {
    if points.len() < 20 {
        return Err(Error::InsufficientData(format!(
            "energy fit needs at least 20 points, got {}",
            points.len()
        )));
    }
    // validates Pi and Delta
    ModelParams::new(opts.init.0, opts.init.1, Pi, Delta)?;
    let lower = [opts.d_q_bounds.0, opts.t_s_bounds.0];
    let upper = [opts.d_q_bounds.1, opts.t_s_bounds.1];
    if lower[0] < 0.0 || lower[1] <= 0.0 || lower[0] > upper[0] || lower[1] > upper[1] {
        return Err(Error::invalid("bounds", "need 0 <= D_q range and 0 < t_s range, lower <= upper"));
    }
    let out = lm::minimize(
        |x, r| {
            let mp = ModelParams { D_q: x[0], t_s: x[1], Pi, Delta };
            for (ri, &(t, e)) in r.iter_mut().zip(points) {
                *ri = e - model::e_bar(t, &mp);
            }
        },
        points.len(),
        &[opts.init.0, opts.init.1],
        &lower,
        &upper,
        &LmOptions {
            max_evals: opts.max_evals,
            ..LmOptions::default()
        },
    );
    Ok(FitResult {
        D_q: out.x[0],
        t_s: out.x[1],
        residual_norm: out.cost,
        n_evals: out.n_evals,
        converged: out.converged && out.cost.is_finite(),
        n_points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic(mp: &ModelParams, n: usize) -> Vec<Option<f64>> {
        (0..=n).map(|t| Some(model::e_bar(t as f64, mp))).collect()
    }

    #[test]
    fn recovers_noisy_synthetic_parameters() {
        let mp = ModelParams::new(30.7, 41.3, 0.01, 0.04).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let trace: Vec<Option<f64>> = synthetic(&mp, 500)
            .into_iter()
            .map(|e| e.map(|v| v * (1.0 + 0.01 * rng.gen_range(-1.0..1.0) * 3f64.sqrt())))
            .collect();
        let fit = fit_energy_curve(&trace, 0.01, 0.04, &FitOptions::for_kick_strength(10.0)).unwrap();
        assert!(fit.converged);
        assert!((fit.D_q / 30.7 - 1.0).abs() < 0.02, "{fit:?}");
        assert!((fit.t_s / 41.3 - 1.0).abs() < 0.02, "{fit:?}");
    }

    #[test]
    fn exact_trace_is_recovered_tightly() {
        let mp = ModelParams::new(36.6, 32.5, 0.02, 0.04).unwrap();
        let fit = fit_energy_curve(&synthetic(&mp, 500), 0.02, 0.04, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.D_q - 36.6).abs() < 1e-6 && (fit.t_s - 32.5).abs() < 1e-6, "{fit:?}");
    }

    #[test]
    fn scaling_the_data_scales_d_q_only() {
        let mp = ModelParams::new(25.5, 50.7, 0.0, 0.04).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base: Vec<Option<f64>> = synthetic(&mp, 500)
            .into_iter()
            .map(|e| e.map(|v| v * (1.0 + 0.05 * rng.gen_range(-1.0..1.0))))
            .collect();
        let f1 = fit_energy_curve(&base, 0.0, 0.04, &FitOptions::default()).unwrap();
        for c in [0.5, 2.0] {
            let scaled: Vec<Option<f64>> = base.iter().map(|e| e.map(|v| c * v)).collect();
            let fc = fit_energy_curve(&scaled, 0.0, 0.04, &FitOptions::default()).unwrap();
            assert!(((fc.D_q / f1.D_q) / c - 1.0).abs() < 1e-6, "{fc:?} vs {f1:?}");
            assert!((fc.t_s / f1.t_s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn missing_points_are_skipped() {
        let mp = ModelParams::new(30.0, 40.0, 0.01, 0.04).unwrap();
        let mut trace = synthetic(&mp, 100);
        trace[10] = None;
        trace[11] = Some(f64::NAN);
        let fit = fit_energy_curve(&trace, 0.01, 0.04, &FitOptions::default()).unwrap();
        assert_eq!(fit.n_points, 99);
        assert!((fit.D_q - 30.0).abs() < 1e-6);
    }

    #[test]
    fn short_traces_are_rejected() {
        let trace = vec![Some(1.0); 19];
        assert!(matches!(
            fit_energy_curve(&trace, 0.0, 0.04, &FitOptions::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn tiny_budget_reports_non_convergence() {
        let mp = ModelParams::new(30.7, 41.3, 0.01, 0.04).unwrap();
        let opts = FitOptions { max_evals: 6, ..FitOptions::default() };
        let fit = fit_energy_curve(&synthetic(&mp, 200), 0.01, 0.04, &opts).unwrap();
        assert!(!fit.converged);
        assert!(fit.D_q >= 1.0 && fit.t_s >= 5.0);
    }
}
