//! Runs one reference ensemble and prints energies, populations and a fit.
//!
//! Usage: cargo run --release -p qkr-core --example reference_run -- <Pi> [n_traj]

use std::time::Instant;

use qkr::analysis::{classify_distribution, fit_energy_curve, FitOptions};
use qkr::ensemble::run_ensemble;
use qkr::SimParams;

fn main() {
    let mut args = std::env::args().skip(1);
    let pi: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let n_traj: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(400);
    let mut params = SimParams::reference(pi);
    params.n_traj = n_traj;
    params.checkpoints = vec![300, 500];

    let start = Instant::now();
    let res = run_ensemble(&params).expect("ensemble");
    println!("{n_traj} trajectories in {:.1?}", start.elapsed());

    let f0 = res.pop_f0();
    let det = res.detected_fraction();
    for t in [1, 10, 50, 100, 150, 200, 300, 400, 500] {
        println!(
            "t={t:4} E={:9.2} Ebar={:9.2} F0={:.4} detected={:.4}",
            res.mean_energy[t],
            res.filtered_energy[t].unwrap_or(f64::NAN),
            f0[t],
            det[t]
        );
    }
    let fit = fit_energy_curve(&res.filtered_energy, pi, params.Delta, &FitOptions::for_kick_strength(params.K));
    println!("fit: {fit:?}");
    for d in &res.distributions {
        println!("t={} unfiltered: {:?}", d.kick, classify_distribution(&d.unfiltered).map(|v| (v.verdict, v.ssr_exp, v.ssr_gauss)));
        println!("t={} filtered:   {:?}", d.kick, classify_distribution(&d.filtered).map(|v| (v.verdict, v.ssr_exp, v.ssr_gauss)));
    }
}
