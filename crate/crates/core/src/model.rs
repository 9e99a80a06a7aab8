//! Closed-form rate model for filtered detection under spontaneous emission.
//!
//! Three populations are tracked: `F0` (never scattered, always detected),
//! `FDelta` (scattered and back inside a detection window) and the remainder
//! outside every window. Coherent diffusion decays as `D0(t) = D_q e^{-t/t_s}`.
//! All functions are pure; time is measured in kicks.

use std::f64::consts::E;

use serde::Serialize;

use crate::params::ModelParams;

/// Instantaneous coherent diffusion coefficient `D_q e^{-t/t_s}`.
pub fn d0(t: f64, mp: &ModelParams) -> f64 {
    mp.D_q * (-t / mp.t_s).exp()
}

/// Asymptotic diffusion coefficient `D_q tau_s / (1 + tau_s)`.
pub fn d_infty(mp: &ModelParams) -> f64 {
    let tau = mp.tau_s();
    mp.D_q * tau / (1.0 + tau)
}

/// Coherent population `e^{-Pi t}`.
pub fn f0(t: f64, mp: &ModelParams) -> f64 {
    (-mp.Pi * t).exp()
}

/// Scattered-and-detected population `Delta (1 - e^{-Pi t})`.
pub fn f_delta(t: f64, mp: &ModelParams) -> f64 {
    -mp.Delta * (-mp.Pi * t).exp_m1()
}

/// Detected population `F0 + FDelta = Delta + (1 - Delta) e^{-Pi t}`.
pub fn detected_population(t: f64, mp: &ModelParams) -> f64 {
    mp.Delta + (1.0 - mp.Delta) * (-mp.Pi * t).exp()
}

/// Total energy of the coherent population, `D_q t_s (1 - e^{-t/t_s}) e^{-Pi t}`.
pub fn e0(t: f64, mp: &ModelParams) -> f64 {
    -mp.D_q * mp.t_s * (-t / mp.t_s).exp_m1() * (-mp.Pi * t).exp()
}

/// Time of the maximum of [`e0`], `t_s ln(1 + 1/tau_s)`; infinite when `tau_s = 0`.
pub fn t1(mp: &ModelParams) -> f64 {
    let tau = mp.tau_s();
    if tau == 0.0 {
        return f64::INFINITY;
    }
    mp.t_s * (1.0 / tau).ln_1p()
}

/// Total energy of the scattered-and-detected population.
///
/// `(Delta D_q t_s / (1 + tau_s)) [Pi t - (1 + tau_s) e^{-Pi t}
///   + tau_s (1 + 2 tau_s)/(1 + tau_s) e^{-(1 + tau_s) t / t_s}
///   + (1 + tau_s - tau_s^2)/(1 + tau_s)]`
///
/// The three constant parts of the bracket sum to zero, so it is evaluated
/// as `Pi t - (1 + tau_s) expm1(-Pi t) + tau_s (1 + 2 tau_s)/(1 + tau_s)
/// expm1(-(1 + tau_s) t / t_s)`, which vanishes exactly at `t = 0`.
/// The expression is negative at early times when `tau_s > 1`.
pub fn e_delta(t: f64, mp: &ModelParams) -> f64 {
    let tau = mp.tau_s();
    let a = 1.0 + tau;
    let bracket = mp.Pi * t - a * (-mp.Pi * t).exp_m1()
        + tau * (1.0 + 2.0 * tau) / a * (-a * t / mp.t_s).exp_m1();
    mp.Delta * mp.D_q * mp.t_s / a * bracket
}

/// Mean energy of detected atoms, `(E0 + EDelta) / (F0 + FDelta)`.
pub fn e_bar(t: f64, mp: &ModelParams) -> f64 {
    (e0(t, mp) + e_delta(t, mp)) / (f0(t, mp) + f_delta(t, mp))
}

/// Small-`Delta`, small-`tau_s` limit `D_q tau_s Pi Delta e^{Pi t} (1 + Pi t)`.
pub fn e_bar_approx(t: f64, mp: &ModelParams) -> f64 {
    let pt = mp.Pi * t;
    mp.D_q * mp.tau_s() * mp.Pi * mp.Delta * pt.exp() * (1.0 + pt)
}

/// Crossover time where `FDelta = F0`, `ln(1 + 1/Delta) / Pi`; infinite when `Pi = 0`.
pub fn t2_exact(mp: &ModelParams) -> f64 {
    if mp.Pi == 0.0 {
        return f64::INFINITY;
    }
    (1.0 / mp.Delta).ln_1p() / mp.Pi
}

/// Small-`Delta` crossover estimate `-ln(Delta) / Pi`; infinite when `Pi = 0`.
pub fn t2_approx(mp: &ModelParams) -> f64 {
    if mp.Pi == 0.0 {
        return f64::INFINITY;
    }
    -mp.Delta.ln() / mp.Pi
}

/// Reduced diffusion coefficient of the filtered plateau, `2 e D_q tau_s Delta`.
pub fn d_r(mp: &ModelParams) -> f64 {
    2.0 * E * mp.D_q * mp.tau_s() * mp.Delta
}

/// Characteristic quantities reported alongside model curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelSummary {
    pub tau_s: f64,
    pub t1: f64,
    pub t2_exact: f64,
    pub t2_approx: f64,
    pub d_infty: f64,
    pub d_r: f64,
    /// Coherent saturation energy `D_q t_s` reached without emission.
    pub e_saturation: f64,
}

pub fn summary(mp: &ModelParams) -> ModelSummary {
    ModelSummary {
        tau_s: mp.tau_s(),
        t1: t1(mp),
        t2_exact: t2_exact(mp),
        t2_approx: t2_approx(mp),
        d_infty: d_infty(mp),
        d_r: d_r(mp),
        e_saturation: mp.D_q * mp.t_s,
    }
}

/// Which quantity a [`ModelCurve`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CurveKind {
    D0,
    F0,
    FDelta,
    Detected,
    E0,
    EDelta,
    EBar,
    EBarApprox,
}

impl CurveKind {
    pub const ALL: [CurveKind; 8] = [
        CurveKind::D0,
        CurveKind::F0,
        CurveKind::FDelta,
        CurveKind::Detected,
        CurveKind::E0,
        CurveKind::EDelta,
        CurveKind::EBar,
        CurveKind::EBarApprox,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CurveKind::D0 => "D0",
            CurveKind::F0 => "F0",
            CurveKind::FDelta => "FDelta",
            CurveKind::Detected => "detected",
            CurveKind::E0 => "E0",
            CurveKind::EDelta => "EDelta",
            CurveKind::EBar => "Ebar",
            CurveKind::EBarApprox => "Ebar_approx",
        }
    }

    pub fn eval(self, t: f64, mp: &ModelParams) -> f64 {
        match self {
            CurveKind::D0 => d0(t, mp),
            CurveKind::F0 => f0(t, mp),
            CurveKind::FDelta => f_delta(t, mp),
            CurveKind::Detected => detected_population(t, mp),
            CurveKind::E0 => e0(t, mp),
            CurveKind::EDelta => e_delta(t, mp),
            CurveKind::EBar => e_bar(t, mp),
            CurveKind::EBarApprox => e_bar_approx(t, mp),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelCurve {
    pub kind: CurveKind,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ModelCurve {
    pub fn evaluate(kind: CurveKind, times: &[f64], mp: &ModelParams) -> Self {
        ModelCurve {
            kind,
            times: times.to_vec(),
            values: times.iter().map(|&t| kind.eval(t, mp)).collect(),
        }
    }

    pub fn label(&self) -> &'static str {
        self.kind.label()
    }
}

/// Uniform grid `0, dt, 2 dt, ..., horizon`.
pub fn time_grid(horizon: f64, dt: f64) -> Vec<f64> {
    let steps = (horizon / dt).round() as usize;
    (0..=steps).map(|i| i as f64 * dt).collect()
}

/// Default step of the rate-equation integrator, in kicks.
pub const ODE_STEP: f64 = 0.05;

/// Integrates the population and coherent-energy rate equations with classical RK4.
///
/// `dF0/dt = -Pi F0`, `dFDelta/dt = -Pi FDelta + Pi Delta`,
/// `dE0/dt = D0(t) F0 - Pi E0`, from `F0 = 1`, `FDelta = E0 = 0`.
/// Returns the `F0`, `FDelta` and `E0` curves on the integration grid.
pub fn ode_oracle(mp: &ModelParams, horizon: f64, dt: f64) -> [ModelCurve; 3] {
    let pi = mp.Pi;
    let rhs = |t: f64, y: [f64; 3]| -> [f64; 3] {
        [
            -pi * y[0],
            -pi * y[1] + pi * mp.Delta,
            d0(t, mp) * y[0] - pi * y[2],
        ]
    };
    let axpy = |y: [f64; 3], h: f64, k: [f64; 3]| [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]];

    let times = time_grid(horizon, dt);
    let mut y = [1.0, 0.0, 0.0];
    let mut out = [Vec::with_capacity(times.len()), Vec::with_capacity(times.len()), Vec::with_capacity(times.len())];
    for (i, &t) in times.iter().enumerate() {
        for (o, v) in out.iter_mut().zip(y) {
            o.push(v);
        }
        if i + 1 == times.len() {
            break;
        }
        let h = times[i + 1] - t;
        let k1 = rhs(t, y);
        let k2 = rhs(t + h / 2.0, axpy(y, h / 2.0, k1));
        let k3 = rhs(t + h / 2.0, axpy(y, h / 2.0, k2));
        let k4 = rhs(t + h, axpy(y, h, k3));
        for j in 0..3 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    let [a, b, c] = out;
    [
        ModelCurve { kind: CurveKind::F0, times: times.clone(), values: a },
        ModelCurve { kind: CurveKind::FDelta, times: times.clone(), values: b },
        ModelCurve { kind: CurveKind::E0, times, values: c },
    ]
}
