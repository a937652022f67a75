//! Couplings between discrete measures, exact and entropic optimal
//! transport, transport costs, and the gluing construction.

pub mod simplex;
pub mod sinkhorn;
pub mod vertices;

use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{dist2, DiscreteMeasure, Rational, MERGE_TOL};
use simplex::{duality_gap, MatrixCost, SimplexState};

/// Tolerance on coupling marginal sums.
pub const MARGINAL_TOL: f64 = 1e-10;

/// A finitely supported measure on `R^d x R^d` with tracked marginals.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Coupling {
    left: DiscreteMeasure,
    right: DiscreteMeasure,
    /// sparse cells `(i, j, mass)` with positive mass, sorted by `(i, j)`
    mass: Vec<(usize, usize, f64)>,
    #[serde(skip)]
    exact: Option<Vec<Rational>>,
}

impl Coupling {
    /// Validates marginal sums against the stated left/right measures.
    pub fn new(
        left: DiscreteMeasure,
        right: DiscreteMeasure,
        mut mass: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        mass.retain(|&(_, _, w)| w != 0.0);
        mass.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let c = Self { left, right, mass, exact: None };
        c.validate()?;
        Ok(c)
    }

    /// Builds a coupling with exact rational cell masses.
    pub fn from_rational(
        left: DiscreteMeasure,
        right: DiscreteMeasure,
        cells: Vec<(usize, usize, Rational)>,
    ) -> Result<Self> {
        let mut cells: Vec<_> = cells.into_iter().filter(|(_, _, w)| !w.is_zero()).collect();
        cells.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mass = cells
            .iter()
            .map(|(i, j, w)| (*i, *j, w.to_f64().unwrap()))
            .collect();
        let exact = cells.into_iter().map(|(_, _, w)| w).collect();
        let c = Self { left, right, mass, exact: Some(exact) };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let mut rows = vec![0.0; self.left.len()];
        let mut cols = vec![0.0; self.right.len()];
        for &(i, j, w) in &self.mass {
            if i >= self.left.len() || j >= self.right.len() {
                return Err(Error::InvalidInput(format!("cell ({i},{j}) out of range")));
            }
            if w < 0.0 || !w.is_finite() {
                return Err(Error::InvalidInput(format!("cell mass {w}")));
            }
            rows[i] += w;
            cols[j] += w;
        }
        for (i, r) in rows.iter().enumerate() {
            if (r - self.left.weight(i)).abs() > MARGINAL_TOL {
                return Err(Error::MarginalMismatch(format!(
                    "row {i}: {r} vs {}",
                    self.left.weight(i)
                )));
            }
        }
        for (j, c) in cols.iter().enumerate() {
            if (c - self.right.weight(j)).abs() > MARGINAL_TOL {
                return Err(Error::MarginalMismatch(format!(
                    "column {j}: {c} vs {}",
                    self.right.weight(j)
                )));
            }
        }
        Ok(())
    }

    /// Coupling of a measure with itself along the diagonal.
    pub fn identity(m: &DiscreteMeasure) -> Self {
        let mass = (0..m.len()).map(|i| (i, i, m.weight(i))).collect();
        let exact = m
            .exact_weights()
            .map(|ex| ex.to_vec());
        Self { left: m.clone(), right: m.clone(), mass, exact }
    }

    /// Independent product of two measures.
    pub fn product(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Self {
        let mut mass = Vec::with_capacity(mu.len() * nu.len());
        for i in 0..mu.len() {
            for j in 0..nu.len() {
                mass.push((i, j, mu.weight(i) * nu.weight(j)));
            }
        }
        let exact = match (mu.exact_weights(), nu.exact_weights()) {
            (Some(a), Some(b)) => Some(
                (0..mu.len())
                    .flat_map(|i| (0..nu.len()).map(move |j| (i, j)))
                    .map(|(i, j)| a[i].clone() * b[j].clone())
                    .collect(),
            ),
            _ => None,
        };
        Self { left: mu.clone(), right: nu.clone(), mass, exact }
    }

    /// Graph coupling induced by a pointwise map on the atoms.
    pub fn from_map<F: Fn(&[f64]) -> Vec<f64>>(mu: &DiscreteMeasure, f: F) -> Result<Self> {
        let images: Vec<Vec<f64>> = mu.atoms().iter().map(|a| f(a)).collect();
        let raw = DiscreteMeasure::new(images[0].len(), images.clone(), mu.weights().to_vec())?;
        let mass = images
            .iter()
            .enumerate()
            .map(|(i, im)| {
                let j = raw.nearest_atom(im).expect("image atom present");
                (i, j, mu.weight(i))
            })
            .collect();
        let mut c = Self { left: mu.clone(), right: raw, mass, exact: None };
        c.coalesce();
        Ok(c)
    }

    fn coalesce(&mut self) {
        self.mass.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(self.mass.len());
        for &(i, j, w) in &self.mass {
            if let Some(last) = out.last_mut() {
                if last.0 == i && last.1 == j {
                    last.2 += w;
                    continue;
                }
            }
            out.push((i, j, w));
        }
        self.mass = out;
    }

    pub fn left(&self) -> &DiscreteMeasure {
        &self.left
    }

    pub fn right(&self) -> &DiscreteMeasure {
        &self.right
    }

    pub fn cells(&self) -> &[(usize, usize, f64)] {
        &self.mass
    }

    pub fn exact_cells(&self) -> Option<Vec<(usize, usize, Rational)>> {
        self.exact.as_ref().map(|ex| {
            self.mass
                .iter()
                .zip(ex)
                .map(|(&(i, j, _), w)| (i, j, w.clone()))
                .collect()
        })
    }

    pub fn has_exact_cells(&self) -> bool {
        self.exact.is_some()
    }

    /// Transposed coupling (marginals swapped).
    pub fn transposed(&self) -> Self {
        let mut mass: Vec<_> = self.mass.iter().map(|&(i, j, w)| (j, i, w)).collect();
        let exact = self.exact.as_ref().map(|ex| {
            let mut pairs: Vec<_> = self
                .mass
                .iter()
                .zip(ex)
                .map(|(&(i, j, _), w)| ((j, i), w.clone()))
                .collect();
            pairs.sort_unstable_by_key(|&((i, j), _)| (i, j));
            pairs.into_iter().map(|(_, w)| w).collect()
        });
        mass.sort_unstable_by_key(|&(i, j, _)| (i, j));
        Self {
            left: self.right.clone(),
            right: self.left.clone(),
            mass,
            exact,
        }
    }

    /// Successors `(j, conditional mass)` of left atom `i`; conditional
    /// masses are relative to the left atom's weight.
    pub fn conditional(&self, i: usize) -> Vec<(usize, f64)> {
        let wi = self.left.weight(i);
        self.mass
            .iter()
            .filter(|&&(a, _, _)| a == i)
            .map(|&(_, j, w)| (j, w / wi))
            .collect()
    }

    /// Transport cost `(sum_ij pi_ij |x_i - y_j|^p)^{1/p}` for `p > 0`.
    ///
    /// `p >= 1` gives the usual transport costs; smaller exponents are
    /// accepted for the Jensen-comparison quantities (not a metric there).
    pub fn cost(&self, p: f64) -> f64 {
        let s = self.cost_pow(p);
        if p == 2.0 {
            s.sqrt()
        } else if p == 1.0 {
            s
        } else {
            s.powf(1.0 / p)
        }
    }

    /// Raw transport integral `sum_ij pi_ij |x_i - y_j|^p` without the root.
    pub fn cost_pow(&self, p: f64) -> f64 {
        assert!(p > 0.0, "cost exponent must be positive");
        self.mass
            .iter()
            .map(|&(i, j, w)| {
                let d2 = dist2(self.left.atom(i), self.right.atom(j));
                let term = if p == 2.0 {
                    d2
                } else if p == 1.0 {
                    d2.sqrt()
                } else {
                    d2.sqrt().powf(p)
                };
                w * term
            })
            .sum()
    }

    /// Checks that the left marginal matches `m` as a merged measure.
    pub fn left_matches(&self, m: &DiscreteMeasure) -> bool {
        self.left.measure_eq(m, MERGE_TOL, MARGINAL_TOL)
    }
}

/// Canonical gluing of two couplings sharing their left marginal: a sparse
/// measure on triples `(x, y, z)` using conditionally independent fibers.
#[derive(Clone, Debug)]
pub struct Gluing {
    pub base: DiscreteMeasure,
    pub mid: DiscreteMeasure,
    pub end: DiscreteMeasure,
    /// cells `(i, j, k, mass)`: mass on `(x_i, y_j, z_k)`
    pub cells: Vec<(usize, usize, usize, f64)>,
    pub exact: Option<Vec<Rational>>,
}

/// Conditional-product gluing: `mass(x_i, y_j, z_k) = a(i,j) b(i,k) / w_i`.
pub fn glue(left_route: &Coupling, right_route: &Coupling) -> Result<Gluing> {
    if !left_route
        .left()
        .measure_eq(right_route.left(), MERGE_TOL, MARGINAL_TOL)
    {
        return Err(Error::MarginalMismatch(
            "gluing requires equal left marginals".into(),
        ));
    }
    // map right_route's left atoms onto left_route's left atoms
    let base = left_route.left().clone();
    let remap: Vec<usize> = right_route
        .left()
        .atoms()
        .iter()
        .map(|a| base.nearest_atom(a).expect("shared atom"))
        .collect();
    let n = base.len();
    let mut by_i_a: Vec<Vec<(usize, f64, usize)>> = vec![Vec::new(); n];
    for (idx, &(i, j, w)) in left_route.cells().iter().enumerate() {
        by_i_a[i].push((j, w, idx));
    }
    let mut by_i_b: Vec<Vec<(usize, f64, usize)>> = vec![Vec::new(); n];
    for (idx, &(i, k, w)) in right_route.cells().iter().enumerate() {
        by_i_b[remap[i]].push((k, w, idx));
    }
    let exact_a = left_route.exact.as_deref();
    let exact_b = right_route.exact.as_deref();
    let exact_base = base.exact_weights();
    let both_exact = exact_a.is_some() && exact_b.is_some() && exact_base.is_some();

    let mut cells = Vec::new();
    let mut exact_cells: Vec<Rational> = Vec::new();
    for i in 0..n {
        let wi = base.weight(i);
        if wi == 0.0 {
            continue;
        }
        for &(j, wa, ia) in &by_i_a[i] {
            for &(k, wb, ib) in &by_i_b[i] {
                cells.push((i, j, k, wa * wb / wi));
                if both_exact {
                    let ea = &exact_a.unwrap()[ia];
                    let eb = &exact_b.unwrap()[ib];
                    let ew = &exact_base.unwrap()[i];
                    exact_cells.push(ea * eb / ew);
                }
            }
        }
    }
    cells.sort_unstable_by_key(|a| (a.0, a.1, a.2));
    Ok(Gluing {
        base,
        mid: left_route.right().clone(),
        end: right_route.right().clone(),
        cells,
        exact: if both_exact { Some(exact_cells) } else { None },
    })
}

impl Gluing {
    /// Projects back to the `(x, y)` coordinates.
    pub fn project_xy(&self) -> Result<Coupling> {
        let mut agg: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
        for &(i, j, _, w) in &self.cells {
            *agg.entry((i, j)).or_insert(0.0) += w;
        }
        Coupling::new(
            self.base.clone(),
            self.mid.clone(),
            agg.into_iter().map(|((i, j), w)| (i, j, w)).collect(),
        )
    }

    /// Projects back to the `(x, z)` coordinates.
    pub fn project_xz(&self) -> Result<Coupling> {
        let mut agg: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
        for &(i, _, k, w) in &self.cells {
            *agg.entry((i, k)).or_insert(0.0) += w;
        }
        Coupling::new(
            self.base.clone(),
            self.end.clone(),
            agg.into_iter().map(|((i, k), w)| (i, k, w)).collect(),
        )
    }
}

/// An optimal-transport solution with its duality certificate.
pub struct OtSolution {
    pub coupling: Coupling,
    /// `W_p` distance
    pub distance: f64,
    /// raw objective `sum pi |x-y|^p`
    pub objective: f64,
    /// certified optimality gap (primal minus feasible dual)
    pub dual_gap: f64,
}

/// Exact optimal transport between two discrete measures for ground cost
/// `|x - y|^p`. Returns the optimal coupling and `W_p`.
pub fn solve_ot(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<(Coupling, f64)> {
    let sol = solve_ot_certified(mu, nu, p)?;
    Ok((sol.coupling, sol.distance))
}

/// As [`solve_ot`], also returning the dual certificate.
///
/// The arguments are solved in a canonical orientation and transposed back
/// when needed, so the distance is bitwise symmetric in its arguments.
pub fn solve_ot_certified(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
) -> Result<OtSolution> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch(mu.dim(), nu.dim()));
    }
    if canonical_order(mu, nu) == std::cmp::Ordering::Greater {
        let sol = solve_ot_certified(nu, mu, p)?;
        return Ok(OtSolution {
            coupling: sol.coupling.transposed(),
            distance: sol.distance,
            objective: sol.objective,
            dual_gap: sol.dual_gap,
        });
    }
    if mu.len() > 2000 || nu.len() > 2000 {
        return Err(Error::TooLarge(format!(
            "solve_ot supports at most 2000 atoms per side, got {} x {}",
            mu.len(),
            nu.len()
        )));
    }
    let (m, n) = (mu.len(), nu.len());
    let mut costs = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            costs[i * n + j] = dist2(mu.atom(i), nu.atom(j)).sqrt().powf(p);
        }
    }
    let cost = MatrixCost { costs: &costs, n };
    let mut st = SimplexState::new(mu.weights(), nu.weights());
    let max_pivots = 400 * (m + n) + 20_000;
    st.optimize(&cost, max_pivots)?;
    let flows = st.extract_flows(mu.weights(), nu.weights());
    let objective: f64 = flows.iter().map(|&(i, j, f)| f * costs[i * n + j]).sum();
    let (gap, _) = duality_gap(&cost, mu.weights(), nu.weights(), st.duals().0, objective);
    if gap.abs() > 1e-9 * (1.0 + objective.abs()) {
        return Err(Error::SolverFailure(format!(
            "uncertified optimum: duality gap {gap:.3e} on objective {objective:.6e}"
        )));
    }
    let coupling = Coupling::new(mu.clone(), nu.clone(), flows)?;
    Ok(OtSolution {
        coupling,
        distance: objective.max(0.0).powf(1.0 / p),
        objective,
        dual_gap: gap,
    })
}

/// `W_p` distance only.
pub fn wasserstein(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    Ok(solve_ot(mu, nu, p)?.1)
}

/// Deterministic total order on measures (atom count, then coordinate and
/// weight bits); fixes the orientation in which a transport problem is
/// solved.
fn canonical_order(a: &DiscreteMeasure, b: &DiscreteMeasure) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        let key = |m: &DiscreteMeasure| -> Vec<u64> {
            m.atoms()
                .iter()
                .flatten()
                .chain(m.weights())
                .map(|c| c.to_bits())
                .collect()
        };
        key(a).cmp(&key(b))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::ratio;
    use approx::assert_abs_diff_eq;

    fn pair(a: f64, b: f64) -> DiscreteMeasure {
        DiscreteMeasure::new(1, vec![vec![a], vec![b]], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn identity_coupling_zero_cost() {
        let m = DiscreteMeasure::new(
            2,
            vec![vec![0.0, 1.0], vec![2.0, -1.0]],
            vec![0.25, 0.75],
        )
        .unwrap();
        let id = Coupling::identity(&m);
        assert_eq!(id.cost(2.0), 0.0);
    }

    #[test]
    fn single_pair_cost() {
        let c = Coupling::new(
            DiscreteMeasure::dirac(vec![0.0]),
            DiscreteMeasure::dirac(vec![3.0]),
            vec![(0, 0, 1.0)],
        )
        .unwrap();
        assert_eq!(c.cost(2.0), 3.0);
    }

    #[test]
    fn two_pair_cost_matches_shift() {
        // pairs (-4,-1) and (4,1), each with gap 3
        let mu = pair(-4.0, 4.0);
        let nu = pair(-1.0, 1.0);
        let c = Coupling::new(mu, nu, vec![(0, 0, 0.5), (1, 1, 0.5)]).unwrap();
        assert_eq!(c.cost(2.0), 3.0);
    }

    #[test]
    fn ot_identical_measures_is_zero() {
        let m = DiscreteMeasure::new(
            1,
            vec![vec![0.0], vec![1.0], vec![2.5]],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        let (c, w) = solve_ot(&m, &m, 2.0).unwrap();
        assert!(w <= 1e-12);
        assert_eq!(c.cost(2.0), 0.0);
    }

    #[test]
    fn ot_two_atom_translated_pair() {
        // m_t and its translation at t=0: squared distance 9
        let mu = pair(-4.0, 4.0);
        let nu = pair(-1.0, 1.0);
        let (_, w) = solve_ot(&mu, &nu, 2.0).unwrap();
        assert_abs_diff_eq!(w * w, 9.0, epsilon = 1e-12);
        // same pair at t = 2/3: atoms -2, 2 vs 1, -1; W^2 = (5-6t)^2 = 1
        let mu = pair(-2.0, 2.0);
        let nu = pair(1.0, -1.0);
        let (_, w) = solve_ot(&mu, &nu, 2.0).unwrap();
        assert_abs_diff_eq!(w * w, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn glue_product_of_two_splits() {
        // base dirac at 0; both routes split a half to each side
        let base = DiscreteMeasure::dirac(vec![0.0]);
        let ypts = pair(1.0, -1.0);
        let zpts = pair(0.0, 2.0);
        let a = Coupling::from_rational(
            base.clone(),
            ypts,
            vec![(0, 0, ratio(1, 2)), (0, 1, ratio(1, 2))],
        )
        .unwrap();
        let b = Coupling::from_rational(
            base,
            zpts,
            vec![(0, 0, ratio(1, 2)), (0, 1, ratio(1, 2))],
        )
        .unwrap();
        let g = glue(&a, &b).unwrap();
        assert_eq!(g.cells.len(), 4);
        for &(_, _, _, w) in &g.cells {
            assert_abs_diff_eq!(w, 0.25);
        }
        let ex = g.exact.as_ref().unwrap();
        assert!(ex.iter().all(|w| *w == ratio(1, 4)));
        // projections reproduce the inputs
        let xy = g.project_xy().unwrap();
        assert_eq!(xy.cells(), a.cells());
        let xz = g.project_xz().unwrap();
        assert_eq!(xz.cells(), b.cells());
    }

    #[test]
    fn glue_deterministic_route_is_relabeled() {
        // one z per x: gluing is the left route tensored with the map
        let base = pair(0.0, 1.0);
        let y = pair(5.0, 6.0);
        let a = Coupling::new(
            base.clone(),
            y,
            vec![(0, 0, 0.25), (0, 1, 0.25), (1, 0, 0.25), (1, 1, 0.25)],
        )
        .unwrap();
        let z = pair(-1.0, -2.0);
        let b = Coupling::new(base, z, vec![(0, 0, 0.5), (1, 1, 0.5)]).unwrap();
        let g = glue(&a, &b).unwrap();
        assert_eq!(g.cells.len(), 4);
        for &(i, _, k, _) in &g.cells {
            assert_eq!(i, k);
        }
    }

    #[test]
    fn glue_rejects_mismatched_bases() {
        let a = Coupling::identity(&pair(0.0, 1.0));
        let b = Coupling::identity(&pair(0.0, 2.0));
        assert!(matches!(glue(&a, &b), Err(Error::MarginalMismatch(_))));
    }

    #[test]
    fn ot_dimension_mismatch() {
        let a = DiscreteMeasure::dirac(vec![0.0]);
        let b = DiscreteMeasure::dirac(vec![0.0, 0.0]);
        assert!(matches!(
            solve_ot(&a, &b, 2.0),
            Err(Error::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn jensen_cost_comparison() {
        // C_{2a}(gamma)^a <= C_2(gamma)^a for a in (0,1)
        let mu = pair(-4.0, 4.0);
        let nu = pair(-1.0, 1.5);
        let c = Coupling::new(mu, nu, vec![(0, 0, 0.5), (1, 1, 0.5)]).unwrap();
        for alpha in [0.25, 0.5, 0.75] {
            let lhs = c.cost(2.0 * alpha).powf(alpha);
            let rhs = c.cost(2.0).powf(alpha);
            assert!(lhs <= rhs + 1e-12, "alpha={alpha}: {lhs} > {rhs}");
        }
    }
}
