//! Entropically regularized optimal transport (log-domain Sinkhorn).
//!
//! Fast approximate backend for large sampled instances. The iteration runs
//! in the log domain for stability; the final plan is rounded onto the
//! transportation polytope so its marginals match the inputs to float
//! accuracy.

use crate::error::{Error, Result};
use crate::measure::{dist2, DiscreteMeasure};
use crate::transport::Coupling;

pub struct SinkhornOptions {
    pub max_iters: usize,
    /// stop when the L1 marginal violation of the unrounded plan drops below
    pub threshold: f64,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self { max_iters: 10_000, threshold: 1e-10 }
    }
}

/// Entropic OT plan for ground cost `|x-y|^p` and regularization `eps`.
pub fn sinkhorn(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    eps: f64,
    opts: &SinkhornOptions,
) -> Result<Coupling> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch(mu.dim(), nu.dim()));
    }
    assert!(eps > 0.0, "regularization must be positive");
    let (m, n) = (mu.len(), nu.len());
    let mut cost = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            cost[i * n + j] = dist2(mu.atom(i), nu.atom(j)).sqrt().powf(p);
        }
    }
    let a = mu.weights();
    let b = nu.weights();
    let log_a: Vec<f64> = a.iter().map(|x| x.max(1e-300).ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.max(1e-300).ln()).collect();
    let mut f = vec![0.0; m]; // dual potentials / eps
    let mut g = vec![0.0; n];
    let mut converged = false;
    for _ in 0..opts.max_iters {
        // f_i = eps (log a_i - logsumexp_j((g_j - c_ij)/eps))
        for i in 0..m {
            let mut mx = f64::NEG_INFINITY;
            for j in 0..n {
                mx = mx.max((g[j] - cost[i * n + j]) / eps);
            }
            let mut s = 0.0;
            for j in 0..n {
                s += ((g[j] - cost[i * n + j]) / eps - mx).exp();
            }
            f[i] = eps * (log_a[i] - mx - s.ln());
        }
        for j in 0..n {
            let mut mx = f64::NEG_INFINITY;
            for i in 0..m {
                mx = mx.max((f[i] - cost[i * n + j]) / eps);
            }
            let mut s = 0.0;
            for i in 0..m {
                s += ((f[i] - cost[i * n + j]) / eps - mx).exp();
            }
            g[j] = eps * (log_b[j] - mx - s.ln());
        }
        // after a column update the column sums are exact; check rows
        let mut violation = 0.0;
        for i in 0..m {
            let mut ri = 0.0;
            for j in 0..n {
                ri += ((f[i] + g[j] - cost[i * n + j]) / eps).exp();
            }
            violation += (ri - a[i]).abs();
        }
        if violation <= opts.threshold {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(opts.max_iters));
    }
    let mut plan = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            plan[i * n + j] = ((f[i] + g[j] - cost[i * n + j]) / eps).exp();
        }
    }
    round_to_polytope(&mut plan, a, b);
    let cells = plan
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(k, &w)| (k / n, k % n, w))
        .collect();
    Coupling::new(mu.clone(), nu.clone(), cells)
}

/// Rounds a positive matrix onto `Pi(a, b)`: scale rows and columns down to
/// their targets, then spread the residual as a rank-one correction.
fn round_to_polytope(plan: &mut [f64], a: &[f64], b: &[f64]) {
    let (m, n) = (a.len(), b.len());
    for i in 0..m {
        let ri: f64 = plan[i * n..(i + 1) * n].iter().sum();
        if ri > a[i] && ri > 0.0 {
            let s = a[i] / ri;
            for j in 0..n {
                plan[i * n + j] *= s;
            }
        }
    }
    for j in 0..n {
        let mut cj = 0.0;
        for i in 0..m {
            cj += plan[i * n + j];
        }
        if cj > b[j] && cj > 0.0 {
            let s = b[j] / cj;
            for i in 0..m {
                plan[i * n + j] *= s;
            }
        }
    }
    let mut era = vec![0.0; m];
    let mut erb = vec![0.0; n];
    let mut tot = 0.0;
    for i in 0..m {
        let ri: f64 = plan[i * n..(i + 1) * n].iter().sum();
        era[i] = a[i] - ri;
        tot += era[i];
    }
    for j in 0..n {
        let mut cj = 0.0;
        for i in 0..m {
            cj += plan[i * n + j];
        }
        erb[j] = b[j] - cj;
    }
    if tot > 0.0 {
        for i in 0..m {
            for j in 0..n {
                plan[i * n + j] += era[i] * erb[j] / tot;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::solve_ot;

    fn opts() -> SinkhornOptions {
        SinkhornOptions::default()
    }

    #[test]
    fn identical_measures_near_zero_cost() {
        let m = DiscreteMeasure::new(
            1,
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![0.25, 0.5, 0.25],
        )
        .unwrap();
        let eps = 1e-3;
        let c = sinkhorn(&m, &m, 2.0, eps, &opts()).unwrap();
        let n = m.len() as f64;
        assert!(c.cost_pow(2.0) <= 10.0 * eps * n.ln());
    }

    #[test]
    fn close_to_exact_lp_on_two_atoms() {
        let mu = DiscreteMeasure::new(1, vec![vec![0.0], vec![2.0]], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(1, vec![vec![1.0], vec![3.0]], vec![0.4, 0.6]).unwrap();
        let eps = 0.01;
        let approx_plan = sinkhorn(&mu, &nu, 2.0, eps, &opts()).unwrap();
        let (exact, _) = solve_ot(&mu, &nu, 2.0).unwrap();
        let gap = approx_plan.cost_pow(2.0) - exact.cost_pow(2.0);
        assert!(gap >= -1e-9, "entropic plan beat the exact optimum: {gap}");
        assert!(gap <= eps * 4.0_f64.ln() + 1e-6, "gap {gap}");
    }

    #[test]
    fn rounding_restores_marginals() {
        let mu = DiscreteMeasure::new(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![-1.0, 2.0]],
            vec![0.2, 0.5, 0.3],
        )
        .unwrap();
        let nu = DiscreteMeasure::new(
            2,
            vec![vec![0.5, 0.5], vec![2.0, -1.0]],
            vec![0.6, 0.4],
        )
        .unwrap();
        let c = sinkhorn(&mu, &nu, 2.0, 0.05, &opts()).unwrap();
        // Coupling::new already validates to 1e-10; recheck tighter here
        let mut rows = vec![0.0; mu.len()];
        for &(i, _, w) in c.cells() {
            rows[i] += w;
        }
        for i in 0..mu.len() {
            assert!((rows[i] - mu.weight(i)).abs() <= 1e-8);
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let mu = DiscreteMeasure::new(1, vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(1, vec![vec![0.3], vec![0.9]], vec![0.7, 0.3]).unwrap();
        let c1 = sinkhorn(&mu, &nu, 2.0, 0.02, &opts()).unwrap();
        let c2 = sinkhorn(&mu, &nu, 2.0, 0.02, &opts()).unwrap();
        assert_eq!(c1.cells(), c2.cells());
    }
}
