use std::f64::consts::TAU;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::rng::{substream, Purpose};

const BATCH: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalTrace {
    /// Ensemble mean of `p^2 / 2` after each step, starting with step 0.
    pub energies: Vec<f64>,
    /// Least-squares slope of the energy over the second half of the trace.
    pub slope: f64,
}

/// Ensemble of standard-map orbits `p <- p + K sin x`, `x <- x + p (mod 2 pi)`
/// started at `p = 0` with `x` uniform on the circle.
///
/// Particle `i` draws from its own substream of `seed`, and partial sums are
/// reduced in particle order, so the trace does not depend on thread count.
#[allow(non_snake_case)]
pub fn classical_diffusion(K: f64, n_steps: usize, n_particles: usize, seed: u64) -> ClassicalTrace {
    let batches: Vec<Vec<f64>> = (0..n_particles.div_ceil(BATCH))
        .into_par_iter()
        .map(|b| {
            let mut sums = vec![0.0; n_steps + 1];
            for i in b * BATCH..((b + 1) * BATCH).min(n_particles) {
                let mut rng = substream(seed, Purpose::ClassicalParticle, i as u64);
                let mut x: f64 = rng.gen_range(0.0..TAU);
                let mut p = 0.0f64;
                for s in sums.iter_mut().skip(1) {
                    p += K * x.sin();
                    x = (x + p).rem_euclid(TAU);
                    *s += 0.5 * p * p;
                }
            }
            sums
        })
        .collect();

    let mut energies = vec![0.0; n_steps + 1];
    for b in &batches {
        for (e, s) in energies.iter_mut().zip(b) {
            *e += s;
        }
    }
    if n_particles > 0 {
        energies.iter_mut().for_each(|e| *e /= n_particles as f64);
    }
    let slope = second_half_slope(&energies);
    ClassicalTrace { energies, slope }
}

fn second_half_slope(energies: &[f64]) -> f64 {
    let start = energies.len() / 2;
    let pts: Vec<(f64, f64)> = energies
        .iter()
        .enumerate()
        .skip(start)
        .map(|(t, &e)| (t as f64, e))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let me = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let ste: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - me)).sum();
    ste / stt
}
