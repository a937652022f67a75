//! Library face of the command-line front end: JSON formatting, SVG
//! emission, subcommand implementations, and example reproduction. The
//! binary in `main.rs` is a thin argument parser over these.

pub mod commands;
pub mod error;
pub mod jsonfmt;
pub mod repro;
pub mod svg;

/// Builds the global thread pool from `--threads` or `WTAN_THREADS`.
/// Results are independent of the thread count by construction; the knob
/// only affects wall time.
pub fn configure_threads(threads: Option<usize>) {
    let n = threads.or_else(|| {
        std::env::var("WTAN_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
    });
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}
