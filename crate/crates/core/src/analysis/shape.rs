use serde::Serialize;

use crate::ensemble::MomentumDistribution;
use crate::error::{Error, Result};

/// Residual ratio one model must beat the other by to win the verdict.
pub const SHAPE_MARGIN: f64 = 1.2;
/// Bins below this fraction of the peak are left out of the fits.
const FLOOR: f64 = 1e-6;
const MIN_BINS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Exponential,
    Gaussian,
    Intermediate,
}

/// Outcome of comparing exponential and Gaussian fits in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct ShapeVerdict {
    /// Amplitude `A` of `A exp(-|P| / P_L)`.
    pub exp_amplitude: f64,
    /// Localization length, in the distribution's momentum units.
    pub P_L: f64,
    /// Amplitude `B` of `B exp(-P^2 / (2 sigma^2))`.
    pub gauss_amplitude: f64,
    pub sigma: f64,
    pub ssr_exp: f64,
    pub ssr_gauss: f64,
    pub n_bins: usize,
    pub verdict: Shape,
}

/// Linear least squares `y = a + b x`; returns `(a, b, ssr)`.
fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let ssr = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    (a, b, ssr)
}

/// Decides whether a momentum distribution is exponential or Gaussian.
///
/// Fits `ln f` linearly against `|P|` and against `P^2` over the bins with
/// `|P| >= 1` and `f > 1e-6 max f`, then compares the residual sums with the
/// [`SHAPE_MARGIN`] ratio.
pub fn classify_distribution(dist: &MomentumDistribution) -> Result<ShapeVerdict> {
    let peak = dist.probabilities.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::InsufficientData("distribution has no mass".into()));
    }
    let (ps, logs): (Vec<f64>, Vec<f64>) = dist
        .centers()
        .into_iter()
        .zip(&dist.probabilities)
        .filter(|&(p, &f)| p.abs() >= 1.0 && f > FLOOR * peak)
        .map(|(p, &f)| (p, f.ln()))
        .unzip();
    if ps.len() < MIN_BINS {
        return Err(Error::InsufficientData(format!(
            "shape classification needs {MIN_BINS} populated bins with |P| >= 1, got {}",
            ps.len()
        )));
    }
    let abs_p: Vec<f64> = ps.iter().map(|p| p.abs()).collect();
    let sq_p: Vec<f64> = ps.iter().map(|p| p * p).collect();
    let (a_exp, b_exp, ssr_exp) = line_fit(&abs_p, &logs);
    let (a_gauss, b_gauss, ssr_gauss) = line_fit(&sq_p, &logs);

    let verdict = if ssr_exp * SHAPE_MARGIN < ssr_gauss {
        Shape::Exponential
    } else if ssr_gauss * SHAPE_MARGIN < ssr_exp {
        Shape::Gaussian
    } else {
        Shape::Intermediate
    };
    Ok(ShapeVerdict {
        exp_amplitude: a_exp.exp(),
        P_L: if b_exp < 0.0 { -1.0 / b_exp } else { f64::INFINITY },
        gauss_amplitude: a_gauss.exp(),
        sigma: if b_gauss < 0.0 { (-0.5 / b_gauss).sqrt() } else { f64::INFINITY },
        ssr_exp,
        ssr_gauss,
        n_bins: ps.len(),
        verdict,
    })
}
