//! Linear program behind the transport-based comparison of tangent elements.
//!
//! The comparison value is
//!
//! ```text
//!   opt  sum sigma(x,y,z,z') |z - z'|^2
//!   s.t. (x,z)-marginal of sigma  = joint law of the first element
//!        (y,z')-marginal of sigma = joint law of the second element
//!        sum sigma |x - y|^2     <= W_2^2(mu, nu) + slack
//! ```
//!
//! over nonnegative sigma, with `opt` either min or max. The two pinned
//! marginals make sigma a transportation plan between the joint supports;
//! the positional cost of any such plan is at least `W_2^2(mu, nu)`, so the
//! cost constraint pins sigma (up to the slack) to the face of plans whose
//! positional part is a cost-minimizing coupling, which is exactly the set
//! of parallel transports along minimizing couplings composed with fiber
//! couplings at arrival.
//!
//! The side constraint is dualized. For the minimization,
//! `D(lambda) = min_sigma [(c + lambda g) . sigma] - lambda * budget`
//! is concave piecewise-linear in `lambda >= 0` and its maximum equals the
//! LP value. Each evaluation is a plain transportation solve, warm-started
//! across lambda; each optimal plan contributes a supporting line from
//! above and each feasible dual a bound from below, so bisection on the
//! line slope brackets the value with a certified gap.

use crate::error::{Error, Result};
use crate::measure::dist2;
use crate::tangent::{joint_support, TangentElement, GEODESIC_SLACK};
use crate::transport::simplex::{duality_gap, CombinedCost, SimplexState};
use crate::transport::solve_ot_certified;

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

/// Value of the face LP with a certified half-gap.
pub struct FaceLpSolution {
    pub value: f64,
    pub gap: f64,
}

/// Entry point used by `compare_by_transport{,_sup}`.
pub fn transport_comparison(a: &TangentElement, b: &TangentElement, sense: Sense) -> Result<f64> {
    if a.base().dim() != b.base().dim() {
        return Err(Error::DimensionMismatch(a.base().dim(), b.base().dim()));
    }
    let (pa, ma) = joint_support(a);
    let (pb, mb) = joint_support(b);
    if pa.len() * pb.len() > 1_000_000 {
        return Err(Error::TooLarge(format!(
            "comparison LP with {} variables",
            pa.len() * pb.len()
        )));
    }
    let wsq = solve_ot_certified(a.base(), b.base(), 2.0)?.objective;
    let budget = wsq + GEODESIC_SLACK * (1.0 + wsq);

    let n = pb.len();
    let mut vel_cost = vec![0.0; pa.len() * n];
    let mut pos_cost = vec![0.0; pa.len() * n];
    for (i, (xi, zi)) in pa.iter().enumerate() {
        for (j, (yj, zj)) in pb.iter().enumerate() {
            vel_cost[i * n + j] = dist2(zi, zj);
            pos_cost[i * n + j] = dist2(xi, yj);
        }
    }
    if sense == Sense::Max {
        for c in vel_cost.iter_mut() {
            *c = -*c;
        }
    }
    let sol = solve_face_lp(&ma, &mb, &vel_cost, &pos_cost, budget)?;
    let value = match sense {
        Sense::Min => sol.value,
        Sense::Max => -sol.value,
    };
    Ok(value.max(0.0))
}

/// Minimizes `base_cost . sigma` over the transportation polytope of
/// `(a, b)` subject to `side_cost . sigma <= budget`.
pub fn solve_face_lp(
    a: &[f64],
    b: &[f64],
    base_cost: &[f64],
    side_cost: &[f64],
    budget: f64,
) -> Result<FaceLpSolution> {
    let n = b.len();
    let max_pivots = 400 * (a.len() + n) + 20_000;
    let mut st = SimplexState::new(a, b);

    // one evaluation at fixed lambda: returns the supporting-line intercept
    // (base value of the optimal plan), its slope (side value minus budget),
    // and a feasible-dual lower bound on D(lambda)
    let evaluate = |st: &mut SimplexState, lambda: f64| -> Result<(f64, f64, f64)> {
        let cost = CombinedCost { base: base_cost, side: side_cost, lambda, n };
        st.optimize(&cost, max_pivots)?;
        let flows = st.extract_flows(a, b);
        let mut cval = 0.0;
        let mut gval = 0.0;
        for &(i, j, f) in &flows {
            cval += f * base_cost[i * n + j];
            gval += f * side_cost[i * n + j];
        }
        let primal = cval + lambda * gval;
        let (_, dual) = duality_gap(&cost, a, b, st.duals().0, primal);
        Ok((cval, gval - budget, dual - lambda * budget))
    };

    let (c0, s0, lb0) = evaluate(&mut st, 0.0)?;
    if s0 <= 0.0 {
        // unconstrained optimum already satisfies the side constraint
        return Ok(FaceLpSolution {
            value: 0.5 * (c0 + lb0.min(c0)),
            gap: 0.5 * (c0 - lb0.min(c0)).abs(),
        });
    }

    // cap on the dual maximum from two supporting lines of opposite slope
    let ub_from = |lo: (f64, f64, f64), hi: (f64, f64, f64)| -> f64 {
        let (l1, c1, s1) = lo;
        let (l2, c2, s2) = hi;
        if s1 - s2 <= 0.0 {
            return c2;
        }
        let t = ((c2 - s2 * l2) - (c1 - s1 * l1)) / (s1 - s2);
        c1 + s1 * (t - l1)
    };

    let mut lo = (0.0, c0, s0);
    let mut lower_bound = lb0;
    let mut hi_found = None;
    let mut lambda = 1.0;
    for _ in 0..200 {
        let (c, s, lb) = evaluate(&mut st, lambda)?;
        lower_bound = lower_bound.max(lb);
        if s <= 0.0 {
            hi_found = Some((lambda, c, s));
            break;
        }
        lo = (lambda, c, s);
        lambda *= 4.0;
        if lambda > 1e18 {
            break;
        }
    }
    let Some(mut hi) = hi_found else {
        return Err(Error::SolverFailure(
            "side constraint unattainable within multiplier range".into(),
        ));
    };
    // hi's plan is feasible for the LP, so its base value caps the optimum
    let mut upper_bound = ub_from(lo, hi).min(hi.1);

    for _ in 0..300 {
        let tol = 1e-10 * (1.0 + upper_bound.abs());
        if upper_bound - lower_bound <= tol || hi.0 - lo.0 <= 1e-15 * (1.0 + hi.0) {
            break;
        }
        let mid = 0.5 * (lo.0 + hi.0);
        let (c, s, lb) = evaluate(&mut st, mid)?;
        lower_bound = lower_bound.max(lb);
        if s > 0.0 {
            lo = (mid, c, s);
        } else {
            hi = (mid, c, s);
            upper_bound = upper_bound.min(c);
        }
        upper_bound = upper_bound.min(ub_from(lo, hi));
    }
    if upper_bound - lower_bound > 1e-6 * (1.0 + upper_bound.abs()) {
        return Err(Error::SolverFailure(format!(
            "face LP gap {:.3e} did not certify",
            upper_bound - lower_bound
        )));
    }
    Ok(FaceLpSolution {
        value: 0.5 * (lower_bound + upper_bound),
        gap: 0.5 * (upper_bound - lower_bound),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::DiscreteMeasure;
    use crate::tangent::{sheaf_distance, tangent_distance, TangentElement};
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_when_second_is_transport_image_of_first() {
        // deterministic field x -> x over two atoms, carried along the
        // unique optimal coupling onto a translated base: arrival fibers are
        // the same velocities, so the comparison vanishes
        let base = DiscreteMeasure::new(1, vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let shifted = base.translated(&[5.0]);
        let phi = TangentElement::deterministic(base, |x| x.to_vec(), 2.0).unwrap();
        // optimal coupling is the shift map; image element keeps velocities
        let psi = TangentElement::new(
            shifted,
            phi.fibers().to_vec(),
            2.0,
        )
        .unwrap();
        let e = transport_comparison(&phi, &psi, Sense::Min).unwrap();
        assert!(e <= 1e-9, "expected vanishing comparison, got {e}");
    }

    #[test]
    fn same_base_reduces_to_fiber_distance() {
        // identical bases force the (near-)identity coupling; the LP then
        // matches the fiberwise distance
        let base = DiscreteMeasure::new(
            1,
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![0.25, 0.5, 0.25],
        )
        .unwrap();
        let phi = TangentElement::deterministic(base.clone(), |x| vec![2.0 * x[0]], 2.0).unwrap();
        let psi =
            TangentElement::deterministic(base, |x| vec![2.0 * (1.0 - x[0])], 2.0).unwrap();
        let e = transport_comparison(&phi, &psi, Sense::Min).unwrap();
        let d = tangent_distance(&phi, &psi).unwrap();
        assert_abs_diff_eq!(e, d * d, epsilon = 1e-6);
    }

    #[test]
    fn comparison_bounds_sheaf_distance() {
        // D^2 <= W^2 + E on a small random-ish instance
        let mu = DiscreteMeasure::new(1, vec![vec![0.0], vec![2.0]], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(1, vec![vec![1.0], vec![4.0]], vec![0.25, 0.75]).unwrap();
        let phi = TangentElement::deterministic(mu.clone(), |x| vec![x[0] - 1.0], 2.0).unwrap();
        let psi = TangentElement::deterministic(nu.clone(), |x| vec![-x[0]], 2.0).unwrap();
        let e = transport_comparison(&phi, &psi, Sense::Min).unwrap();
        let d = sheaf_distance(&phi, &psi).unwrap();
        let wsq = solve_ot_certified(&mu, &nu, 2.0).unwrap().objective;
        assert!(d * d <= wsq + e + 1e-6, "{} > {} + {}", d * d, wsq, e);
    }

    #[test]
    fn sup_variant_dominates_inf() {
        let mu = DiscreteMeasure::new(1, vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(1, vec![vec![0.5], vec![1.5]], vec![0.5, 0.5]).unwrap();
        let phi = TangentElement::deterministic(mu, |x| vec![x[0]], 2.0).unwrap();
        let psi = TangentElement::deterministic(nu, |x| vec![1.0 - x[0]], 2.0).unwrap();
        let lo = transport_comparison(&phi, &psi, Sense::Min).unwrap();
        let hi = transport_comparison(&phi, &psi, Sense::Max).unwrap();
        assert!(hi >= lo - 1e-9);
    }

    #[test]
    fn forward_backward_symmetry() {
        let mu = DiscreteMeasure::new(1, vec![vec![0.0], vec![3.0]], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(1, vec![vec![1.0], vec![2.0]], vec![0.25, 0.75]).unwrap();
        let phi = TangentElement::new(
            mu,
            vec![
                DiscreteMeasure::new(1, vec![vec![0.0], vec![2.0]], vec![0.5, 0.5]).unwrap(),
                DiscreteMeasure::dirac(vec![-1.0]),
            ],
            2.0,
        )
        .unwrap();
        let psi = TangentElement::new(
            nu,
            vec![
                DiscreteMeasure::dirac(vec![1.0]),
                DiscreteMeasure::new(1, vec![vec![0.5], vec![-0.5]], vec![0.5, 0.5]).unwrap(),
            ],
            2.0,
        )
        .unwrap();
        let fwd = transport_comparison(&phi, &psi, Sense::Min).unwrap();
        let bwd = transport_comparison(&psi, &phi, Sense::Min).unwrap();
        assert!((fwd - bwd).abs() <= 1e-7 * (1.0 + fwd.abs()), "{fwd} vs {bwd}");
    }
}
