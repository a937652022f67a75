//! Independent reference computations used by the test suites only
//! (enabled by the `oracles` feature). Nothing here is reachable from the
//! solver paths it is used to check.

use num_traits::{ToPrimitive, Zero};

use crate::measure::{DiscreteMeasure, Rational};
use crate::transport::vertices::enumerate_vertices_exact;

/// Kuhn-Munkres assignment on a square cost matrix; returns the column
/// matched to each row and the total cost. O(n^3), shortest-augmenting-path
/// formulation with row/column potentials (rows and columns 1-indexed, a
/// virtual column 0 hosts the row being inserted).
pub fn hungarian(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    assert!(n > 0 && cost.iter().all(|r| r.len() == n));
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1]; // row matched to each column
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![usize::MAX; n];
    for j in 1..=n {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    let total = (0..n).map(|i| cost[i][assignment[i]]).sum();
    (assignment, total)
}

/// Exact minimum of a linear objective over the face of the transportation
/// polytope where a side cost attains its minimum: enumerates every vertex,
/// takes the exact minimum of the side cost as the face level, and minimizes
/// the objective over the vertices lying on it. Both cost matrices must hold
/// exactly representable values (e.g. squared distances of integer atoms).
///
/// Returns `(face level, objective minimum)`.
pub fn exact_face_minimum(
    row_masses: &[Rational],
    col_masses: &[Rational],
    objective: &[Vec<f64>],
    side: &[Vec<f64>],
) -> (Rational, Rational) {
    let verts = enumerate_vertices_exact(row_masses, col_masses);
    assert!(!verts.is_empty(), "empty transportation polytope");
    let exact = |x: f64| Rational::from_float(x).expect("finite cost");
    let mut level: Option<Rational> = None;
    for v in &verts {
        let g: Rational = v
            .iter()
            .map(|(i, j, w)| w.clone() * exact(side[*i][*j]))
            .fold(Rational::zero(), |a, b| a + b);
        if level.as_ref().is_none_or(|l| g < *l) {
            level = Some(g);
        }
    }
    let level = level.unwrap();
    let mut best: Option<Rational> = None;
    for v in &verts {
        let g: Rational = v
            .iter()
            .map(|(i, j, w)| w.clone() * exact(side[*i][*j]))
            .fold(Rational::zero(), |a, b| a + b);
        if g != level {
            continue;
        }
        let c: Rational = v
            .iter()
            .map(|(i, j, w)| w.clone() * exact(objective[*i][*j]))
            .fold(Rational::zero(), |a, b| a + b);
        if best.as_ref().is_none_or(|b| c < *b) {
            best = Some(c);
        }
    }
    (level, best.expect("face is nonempty"))
}

/// Exact minimum transport cost by vertex enumeration.
pub fn exact_ot_minimum(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &[Vec<f64>]) -> f64 {
    let a = mu.exact_weights().expect("exact weights");
    let b = nu.exact_weights().expect("exact weights");
    let verts = enumerate_vertices_exact(a, b);
    let exact = |x: f64| Rational::from_float(x).expect("finite cost");
    verts
        .iter()
        .map(|v| {
            v.iter()
                .map(|(i, j, w)| w.clone() * exact(cost[*i][*j]))
                .fold(Rational::zero(), |acc, t| acc + t)
        })
        .min()
        .expect("nonempty polytope")
        .to_f64()
        .unwrap()
}

/// Dynamic program on a position-velocity lattice for the one-dimensional
/// single-particle problem `min int |z|^2 dt + terminal(x_T)`: position grid
/// of `2 nx + 1` points on `[x0 - span, x0 + span]`, per-step displacement
/// of at most `nv` grid cells.
pub fn dp_lq_value(
    x0: f64,
    horizon: f64,
    steps: usize,
    span: f64,
    nx: usize,
    nv: usize,
    terminal: impl Fn(f64) -> f64,
) -> f64 {
    let dt = horizon / steps as f64;
    let h = span / nx as f64;
    let npos = 2 * nx + 1;
    let pos = |k: usize| x0 - span + k as f64 * h;
    let mut value: Vec<f64> = (0..npos).map(|k| terminal(pos(k))).collect();
    for _ in 0..steps {
        let mut next = vec![f64::INFINITY; npos];
        for k in 0..npos {
            for dv in -(nv as isize)..=(nv as isize) {
                let k2 = k as isize + dv;
                if k2 < 0 || k2 >= npos as isize {
                    continue;
                }
                let z = dv as f64 * h / dt;
                let cand = z * z * dt + value[k2 as usize];
                if cand < next[k] {
                    next[k] = cand;
                }
            }
        }
        value = next;
    }
    value[nx]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::ratio;

    fn brute_assignment(cost: &[Vec<f64>]) -> f64 {
        let n = cost.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        fn go(k: usize, perm: &mut Vec<usize>, cost: &[Vec<f64>], best: &mut f64) {
            let n = perm.len();
            if k == n {
                let v: f64 = (0..n).map(|i| cost[i][perm[i]]).sum();
                if v < *best {
                    *best = v;
                }
                return;
            }
            for i in k..n {
                perm.swap(k, i);
                go(k + 1, perm, cost, best);
                perm.swap(k, i);
            }
        }
        go(0, &mut perm, cost, &mut best);
        best
    }

    #[test]
    fn hungarian_matches_brute_force() {
        use rand::Rng;
        for seed in 0..40u64 {
            let mut rng = crate::rngutil::rng_at(11, 4, seed);
            let n = rng.gen_range(1..=7);
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(0.0..10.0)).collect())
                .collect();
            let (assignment, total) = hungarian(&cost);
            let mut seen = vec![false; n];
            for &j in &assignment {
                assert!(!seen[j]);
                seen[j] = true;
            }
            let want = brute_assignment(&cost);
            assert!(
                (total - want).abs() <= 1e-9,
                "seed {seed}: hungarian {total} vs brute {want}"
            );
        }
    }

    #[test]
    fn face_minimum_on_tied_square() {
        // opposite diagonals of the unit square: every plan has side cost 1,
        // so the face is the whole polytope and the objective minimum is the
        // better of the two matchings
        let half = ratio(1, 2);
        let rows = vec![half.clone(), half.clone()];
        let cols = vec![half.clone(), half];
        let side = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let objective = vec![vec![0.0, 4.0], vec![4.0, 0.0]];
        let (level, min) = exact_face_minimum(&rows, &cols, &objective, &side);
        assert_eq!(level, ratio(1, 1));
        assert_eq!(min, ratio(0, 1));
    }

    #[test]
    fn dp_recovers_the_lq_half() {
        // min int |z|^2 + (x_T)^2 from x0 = 1: value 1/2
        let v = dp_lq_value(1.0, 1.0, 20, 2.0, 200, 8, |x| x * x);
        assert!((v - 0.5).abs() <= 2e-2, "dp value {v}");
    }
}
