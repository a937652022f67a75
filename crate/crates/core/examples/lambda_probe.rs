//! Compares the three tangent-element comparison quantities on the scaled
//! fields `x -> 2x` and `x -> 2(1-x)` over the discretized unit interval:
//! the fiberwise and transport-based comparisons agree near 4/3 while the
//! joint-law distance stays near 1/3.
//!
//! Run with `cargo run --release -p wtan-core --example lambda_probe`.

use std::time::Instant;

use wtan_core::measure::DiscreteMeasure;
use wtan_core::tangent::{compare_by_transport, sheaf_distance, tangent_distance, TangentElement};

fn main() {
    let lambda = 2.0;
    let n = 401;
    let mu = DiscreteMeasure::uniform_grid_1d(n);
    let phi = TangentElement::deterministic(mu.clone(), |x| vec![lambda * x[0]], 2.0).unwrap();
    let psi =
        TangentElement::deterministic(mu, |x| vec![lambda * (1.0 - x[0])], 2.0).unwrap();

    let t = Instant::now();
    let d = tangent_distance(&phi, &psi).unwrap();
    println!("fiberwise d^2     = {:.8}  ({} ms)", d * d, t.elapsed().as_millis());

    let t = Instant::now();
    let dd = sheaf_distance(&phi, &psi).unwrap();
    println!("joint-law D^2     = {:.8}  ({} ms)", dd * dd, t.elapsed().as_millis());

    let t = Instant::now();
    let e = compare_by_transport(&phi, &psi).unwrap();
    println!("transport-based E = {:.8}  ({} ms)", e, t.elapsed().as_millis());
    println!("strictly E > D^2: {}", e > dd * dd);
}
