//! Parameter types shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default momentum-lattice half-width.
pub const DEFAULT_N_MAX: usize = 1024;
/// Default number of Monte Carlo trajectories.
pub const DEFAULT_N_TRAJ: usize = 4000;

/// Physical and numerical knobs of one ensemble simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct SimParams {
    /// Kick strength.
    pub K: f64,
    /// Effective Planck constant.
    pub kbar: f64,
    /// Spontaneous-emission probability per kick.
    pub Pi: f64,
    /// Width of the initial quasimomentum square and of the detection windows, in units of `kbar`.
    pub Delta: f64,
    pub n_kicks: usize,
    pub n_traj: usize,
    /// Lattice indices run over `-n_max..=n_max`.
    pub n_max: usize,
    pub seed: u64,
    /// Kick indices at which momentum distributions are recorded, sorted ascending.
    pub checkpoints: Vec<usize>,
}

impl SimParams {
    /// Reference configuration: `K = 10`, `kbar = 2.9`, `Delta = 0.04`, 500 kicks.
    pub fn reference(pi: f64) -> Self {
        SimParams {
            K: 10.0,
            kbar: 2.9,
            Pi: pi,
            Delta: 0.04,
            n_kicks: 500,
            n_traj: DEFAULT_N_TRAJ,
            n_max: DEFAULT_N_MAX,
            seed: 20_100_101,
            checkpoints: vec![500],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.K.is_finite() && self.K >= 0.0) {
            return Err(Error::invalid("K", format!("must be finite and >= 0, got {}", self.K)));
        }
        if !(self.kbar.is_finite() && self.kbar > 0.0) {
            return Err(Error::invalid("kbar", format!("must be > 0, got {}", self.kbar)));
        }
        if !(0.0..=1.0).contains(&self.Pi) {
            return Err(Error::invalid("Pi", format!("must lie in [0, 1], got {}", self.Pi)));
        }
        if !(self.Delta > 0.0 && self.Delta <= 1.0) {
            return Err(Error::invalid("Delta", format!("must lie in (0, 1], got {}", self.Delta)));
        }
        if self.n_kicks == 0 {
            return Err(Error::invalid("n_kicks", "must be positive"));
        }
        if self.n_traj == 0 {
            return Err(Error::invalid("n_traj", "must be positive"));
        }
        if self.n_max < 1 {
            return Err(Error::invalid("n_max", "must be >= 1"));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("checkpoints", "must be strictly increasing"));
        }
        if let Some(&last) = self.checkpoints.last() {
            if last > self.n_kicks {
                return Err(Error::invalid(
                    "checkpoints",
                    format!("checkpoint {last} exceeds n_kicks = {}", self.n_kicks),
                ));
            }
        }
        Ok(())
    }
}

/// Atom-light parameters entering the scattering probability per kick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct PhysicalParams {
    /// Product of the natural linewidth and the pulse duration.
    pub gamma_tau: f64,
    /// Resonant Rabi frequency.
    pub Omega: f64,
    /// Laser-atom detuning, same unit as `Omega`.
    pub Delta_L: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeMode {
    Exact,
    /// Large-detuning limit `|Delta_L| >> Gamma, Omega`.
    Approximate,
}

/// Spontaneous-emission probability per kick.
///
/// Exact mode evaluates `(Γτ/2)(Ω²/2)/(Δ_L² + Ω²/2 + Γ²/4)`; the `Γ²/4` term
/// uses the stored `Γτ` product in place of `Γ`. Approximate mode evaluates
/// `ΓτΩ²/(4Δ_L²)` and requires `Δ_L ≠ 0`.
pub fn se_probability(p: &PhysicalParams, mode: SeMode) -> Result<f64> {
    if !(p.gamma_tau.is_finite() && p.gamma_tau >= 0.0) {
        return Err(Error::invalid("gamma_tau", format!("must be >= 0, got {}", p.gamma_tau)));
    }
    let omega2 = p.Omega * p.Omega;
    let detuning2 = p.Delta_L * p.Delta_L;
    match mode {
        SeMode::Exact => {
            let g = p.gamma_tau;
            let denom = detuning2 + omega2 / 2.0 + g * g / 4.0;
            if denom == 0.0 {
                return Ok(0.0);
            }
            Ok(g / 2.0 * (omega2 / 2.0) / denom)
        }
        SeMode::Approximate => {
            if p.Delta_L == 0.0 {
                return Err(Error::Domain(
                    "approximate scattering probability needs a nonzero detuning".into(),
                ));
            }
            Ok(p.gamma_tau * omega2 / (4.0 * detuning2))
        }
    }
}

/// Parameters of the closed-form rate model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ModelParams {
    /// Initial quantum diffusion coefficient.
    pub D_q: f64,
    /// Decay time of the instantaneous diffusion coefficient, in kicks.
    pub t_s: f64,
    pub Pi: f64,
    pub Delta: f64,
}

impl ModelParams {
    #[allow(non_snake_case)]
    pub fn new(D_q: f64, t_s: f64, Pi: f64, Delta: f64) -> Result<Self> {
        let mp = ModelParams { D_q, t_s, Pi, Delta };
        mp.validate()?;
        Ok(mp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.D_q.is_finite() && self.D_q >= 0.0) {
            return Err(Error::invalid("D_q", format!("must be >= 0, got {}", self.D_q)));
        }
        if !(self.t_s.is_finite() && self.t_s > 0.0) {
            return Err(Error::invalid("t_s", format!("must be > 0, got {}", self.t_s)));
        }
        if !(0.0..=1.0).contains(&self.Pi) {
            return Err(Error::invalid("Pi", format!("must lie in [0, 1], got {}", self.Pi)));
        }
        if !(self.Delta > 0.0 && self.Delta <= 1.0) {
            return Err(Error::invalid("Delta", format!("must lie in (0, 1], got {}", self.Delta)));
        }
        Ok(())
    }

    /// `tau_s = Pi * t_s`.
    pub fn tau_s(&self) -> f64 {
        self.Pi * self.t_s
    }
}
