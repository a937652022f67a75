//! Exercises the exact transport backend at scale: random mixed-weight
//! instances, a fully degenerate equal-weight instance, and a pair near the
//! supported size cap. Prints the certified dual gaps.
//!
//! Run with `cargo run --release -p wtan-core --example stress_probe`.

use rand::Rng;
use std::time::Instant;
use wtan_core::measure::DiscreteMeasure;
use wtan_core::rngutil::rng_at;
use wtan_core::transport::solve_ot_certified;

fn cloud(seed: u64, n: usize, d: usize, spread: f64) -> DiscreteMeasure {
    let mut rng = rng_at(seed, 0, n as u64);
    let atoms = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-spread..spread)).collect()).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    DiscreteMeasure::new(d, atoms, raw.iter().map(|w| w / s).collect()).unwrap()
}

fn main() {
    // many medium instances with degenerate-ish weights
    let t = Instant::now();
    let mut worst_gap = 0.0_f64;
    for i in 0..50u64 {
        let mut rng = rng_at(7, 1, i);
        let (m, n) = (rng.gen_range(50..=300), rng.gen_range(50..=400));
        let d = rng.gen_range(1..=3);
        let mu = cloud(i, m, d, 3.0);
        let nu = cloud(i + 999, n, d, 3.0);
        let sol = solve_ot_certified(&mu, &nu, 2.0).unwrap();
        worst_gap = worst_gap.max(sol.dual_gap.abs() / (1.0 + sol.objective));
    }
    println!("50 medium instances ok, worst relative gap {worst_gap:.2e} ({:?})", t.elapsed());

    // equal weights (fully degenerate) at size 500
    let t = Instant::now();
    let mu = DiscreteMeasure::empirical((0..500).map(|i| vec![(i as f64 * 0.717).sin(), (i as f64 * 0.313).cos()]).collect()).unwrap();
    let nu = DiscreteMeasure::empirical((0..500).map(|i| vec![(i as f64 * 0.111).cos() * 2.0, (i as f64 * 0.531).sin() * 2.0]).collect()).unwrap();
    let sol = solve_ot_certified(&mu, &nu, 2.0).unwrap();
    println!("500x500 equal-weight: W2 = {:.6}, gap {:.2e} ({:?})", sol.distance, sol.dual_gap, t.elapsed());

    // big one near the cap
    let t = Instant::now();
    let mu = cloud(5000, 1200, 2, 5.0);
    let nu = cloud(6000, 1500, 2, 5.0);
    let sol = solve_ot_certified(&mu, &nu, 2.0).unwrap();
    println!("1200x1500: W2 = {:.6}, gap {:.2e} ({:?})", sol.distance, sol.dual_gap, t.elapsed());
}
