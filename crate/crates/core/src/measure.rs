//! Finitely supported probability measures on `R^d`.
//!
//! A [`DiscreteMeasure`] is a list of atoms with nonnegative weights summing
//! to one. Atoms are merged on construction so that no two lie within the
//! merge tolerance of each other; this makes fiberwise constructions over a
//! base measure well defined. Weights are stored in double precision and may
//! additionally carry an exact rational representation, which the exact
//! enumeration routines require.

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact weight type used by the rational mode.
pub type Rational = BigRational;

/// Default tolerance under which two atoms are identified.
pub const MERGE_TOL: f64 = 1e-9;

/// Tolerance on the total mass of a measure.
pub const MASS_TOL: f64 = 1e-12;

/// Build a rational from a numerator/denominator pair.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(num.into(), den.into())
}

/// A finitely supported probability measure on `R^d`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
    #[serde(skip)]
    exact: Option<Vec<Rational>>,
}

impl DiscreteMeasure {
    /// Validates and canonicalizes raw atom/weight data, merging atoms that
    /// lie within [`MERGE_TOL`] of each other.
    pub fn new(dim: usize, atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let m = Self::raw(dim, atoms, weights, None)?;
        Ok(m.merged(MERGE_TOL))
    }

    /// Same as [`DiscreteMeasure::new`] with exact rational weights attached.
    pub fn from_rational(
        dim: usize,
        atoms: Vec<Vec<f64>>,
        weights: Vec<Rational>,
    ) -> Result<Self> {
        let total: Rational = weights.iter().cloned().sum();
        if total != Rational::from_integer(1.into()) {
            return Err(Error::InvalidMeasure(format!(
                "rational weights sum to {total}, expected 1"
            )));
        }
        if weights.iter().any(|w| w.is_negative()) {
            return Err(Error::InvalidMeasure("negative rational weight".into()));
        }
        let floats = weights.iter().map(|w| w.to_f64().unwrap()).collect();
        let m = Self::raw(dim, atoms, floats, Some(weights))?;
        Ok(m.merged(MERGE_TOL))
    }

    fn raw(
        dim: usize,
        atoms: Vec<Vec<f64>>,
        weights: Vec<f64>,
        exact: Option<Vec<Rational>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be positive".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms vs {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        for a in &atoms {
            if a.len() != dim {
                return Err(Error::DimensionMismatch(a.len(), dim));
            }
            if a.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidMeasure("non-finite coordinate".into()));
            }
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidMeasure("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, expected 1 within {MASS_TOL}"
            )));
        }
        Ok(Self { dim, atoms, weights, exact })
    }

    /// Unit mass at a single point.
    pub fn dirac(point: Vec<f64>) -> Self {
        let dim = point.len();
        Self {
            dim,
            atoms: vec![point],
            weights: vec![1.0],
            exact: Some(vec![Rational::from_integer(1.into())]),
        }
    }

    /// Empirical measure of a point cloud: weight `1/N` per point, merged.
    pub fn empirical(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::InvalidMeasure("empty point cloud".into()));
        }
        let w = ratio(1, n as i64);
        let weights = vec![w; n];
        let dim = points[0].len();
        Self::from_rational(dim, points, weights)
    }

    /// Uniform distribution on `[0,1]` discretized on `n` equispaced atoms.
    ///
    /// Uses the quantile (midpoint) convention `x_i = (i + 1/2)/n`, which
    /// integrates quadratics with `O(1/n^2)` error instead of `O(1/n)`.
    pub fn uniform_grid_1d(n: usize) -> Self {
        let atoms = (0..n).map(|i| vec![(i as f64 + 0.5) / n as f64]).collect();
        let w = ratio(1, n as i64);
        Self::from_rational(1, atoms, vec![w; n]).expect("valid grid")
    }

    /// Quantile discretization of the standard normal on `n` atoms,
    /// `x_i = Phi^{-1}((i + 1/2)/n)`.
    pub fn normal_quantiles_1d(n: usize) -> Self {
        let atoms = (0..n)
            .map(|i| vec![crate::rngutil::normal_quantile((i as f64 + 0.5) / n as f64)])
            .collect();
        let w = ratio(1, n as i64);
        Self::from_rational(1, atoms, vec![w; n]).expect("valid quantile grid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i]
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Exact rational weights, when the measure was built in rational mode.
    pub fn exact_weights(&self) -> Option<&[Rational]> {
        self.exact.as_deref()
    }

    pub fn has_exact_weights(&self) -> bool {
        self.exact.is_some()
    }

    /// Merges atoms within distance `tol` of each other.
    ///
    /// Identification is a greedy union-find over atom pairs in index order;
    /// each group keeps the position of its lowest-index member and the sum
    /// of its weights (exact when rational weights are present). The result
    /// is idempotent: merging a merged measure leaves it unchanged.
    pub fn merged(&self, tol: f64) -> Self {
        let n = self.atoms.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let d2: f64 = self.atoms[i]
                    .iter()
                    .zip(&self.atoms[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d2.sqrt() <= tol {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        // keep the smaller index as representative
                        let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
                        parent[hi] = lo;
                    }
                }
            }
        }
        let mut rep_of: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        let mut order: Vec<usize> = Vec::new();
        let mut slot = vec![usize::MAX; n];
        for i in 0..n {
            if slot[rep_of[i]] == usize::MAX {
                slot[rep_of[i]] = order.len();
                order.push(rep_of[i]);
            }
        }
        for r in rep_of.iter_mut() {
            *r = slot[*r];
        }
        let mut atoms = Vec::with_capacity(order.len());
        let mut weights = vec![0.0; order.len()];
        for &r in &order {
            atoms.push(self.atoms[r].clone());
        }
        for i in 0..n {
            weights[rep_of[i]] += self.weights[i];
        }
        let exact = self.exact.as_ref().map(|ex| {
            let mut sums = vec![Rational::zero(); order.len()];
            for i in 0..n {
                sums[rep_of[i]] += ex[i].clone();
            }
            sums
        });
        Self { dim: self.dim, atoms, weights, exact }
    }

    /// Index map from the atoms of `self` into the merged measure's atoms.
    pub fn merge_map(&self, tol: f64) -> (Self, Vec<usize>) {
        let merged = self.merged(tol);
        let map = self
            .atoms
            .iter()
            .map(|a| merged.nearest_atom(a).expect("merged atom present"))
            .collect();
        (merged, map)
    }

    /// Index of the atom within `tol` of `point`, if any.
    pub fn nearest_atom(&self, point: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, a) in self.atoms.iter().enumerate() {
            let d2: f64 = a.iter().zip(point).map(|(x, y)| (x - y) * (x - y)).sum();
            if best.is_none_or(|(_, bd)| d2 < bd) {
                best = Some((i, d2));
            }
        }
        best.filter(|(_, d2)| d2.sqrt() <= MERGE_TOL).map(|(i, _)| i)
    }

    /// `p`-th absolute moment: the weighted sum of `|x|^p` over atoms.
    pub fn moment(&self, p: f64) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| {
                let norm = a.iter().map(|c| c * c).sum::<f64>().sqrt();
                w * norm.powf(p)
            })
            .sum()
    }

    /// Weighted mean of the atoms.
    pub fn barycenter(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.dim];
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            for (bi, ai) in b.iter_mut().zip(a) {
                *bi += w * ai;
            }
        }
        b
    }

    /// Scales every atom by `s` (weights unchanged).
    pub fn dilated(&self, s: f64) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| a.iter().map(|c| s * c).collect())
            .collect();
        Self {
            dim: self.dim,
            atoms,
            weights: self.weights.clone(),
            exact: self.exact.clone(),
        }
        .merged(MERGE_TOL)
    }

    /// Translates every atom by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| a.iter().zip(shift).map(|(c, s)| c + s).collect())
            .collect();
        Self {
            dim: self.dim,
            atoms,
            weights: self.weights.clone(),
            exact: self.exact.clone(),
        }
    }

    /// Pushforward under a pointwise map (atoms mapped, then merged).
    pub fn pushforward<F: Fn(&[f64]) -> Vec<f64>>(&self, f: F) -> Result<Self> {
        let atoms: Vec<Vec<f64>> = self.atoms.iter().map(|a| f(a)).collect();
        let dim = atoms[0].len();
        let m = Self::raw(dim, atoms, self.weights.clone(), self.exact.clone())?;
        Ok(m.merged(MERGE_TOL))
    }

    /// Whether two measures have the same merged support and weights.
    pub fn measure_eq(&self, other: &Self, atom_tol: f64, weight_tol: f64) -> bool {
        if self.dim != other.dim || self.atoms.len() != other.atoms.len() {
            return false;
        }
        let mut taken = vec![false; other.atoms.len()];
        'outer: for (a, w) in self.atoms.iter().zip(&self.weights) {
            for (j, (b, v)) in other.atoms.iter().zip(&other.weights).enumerate() {
                if taken[j] {
                    continue;
                }
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                if d2.sqrt() <= atom_tol && (w - v).abs() <= weight_tol {
                    taken[j] = true;
                    continue 'outer;
                }
            }
            return false;
        }
        true
    }

    /// CSV export: one row per atom, columns `x_1..x_d,w`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for j in 1..=self.dim {
            out.push_str(&format!("x_{j},"));
        }
        out.push_str("w\n");
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            for c in a {
                out.push_str(&format!("{c:.16e},"));
            }
            out.push_str(&format!("{w:.16e}\n"));
        }
        out
    }
}

/// Squared Euclidean distance between two points.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Euclidean distance between two points.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn duplicate_atoms_collapse() {
        let m = DiscreteMeasure::new(1, vec![vec![0.0], vec![0.0]], vec![0.5, 0.5]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.weight(0), 1.0);
    }

    #[test]
    fn separated_atoms_unchanged() {
        let m = DiscreteMeasure::new(1, vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        assert_eq!(m.len(), 2);
    }

    #[test]
    fn greedy_merge_chain() {
        // {0, 5e-10, 1} with quarter/quarter/half weights: the first two merge.
        let m = DiscreteMeasure::new(
            1,
            vec![vec![0.0], vec![5e-10], vec![1.0]],
            vec![0.25, 0.25, 0.5],
        )
        .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.atom(0), &[0.0]);
        assert_eq!(m.weight(0), 0.5);
        assert_eq!(m.atom(1), &[1.0]);
        assert_eq!(m.weight(1), 0.5);
    }

    #[test]
    fn merge_idempotent() {
        let m = DiscreteMeasure::new(
            2,
            vec![vec![0.0, 0.0], vec![1e-10, 0.0], vec![3.0, 4.0]],
            vec![0.3, 0.3, 0.4],
        )
        .unwrap();
        let mm = m.merged(MERGE_TOL);
        assert_eq!(m.len(), mm.len());
        for i in 0..m.len() {
            assert_eq!(m.atom(i), mm.atom(i));
            assert_eq!(m.weight(i), mm.weight(i));
        }
    }

    #[test]
    fn moment_dirac_origin() {
        let m = DiscreteMeasure::dirac(vec![0.0]);
        assert_eq!(m.moment(2.0), 0.0);
    }

    #[test]
    fn moment_symmetric_pair() {
        let m = DiscreteMeasure::new(1, vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(m.moment(2.0), 1.0);
    }

    #[test]
    fn moment_uniform_grid_matches_integral() {
        // Riemann-sum oracle for the second moment of U[0,1].
        let n = 401;
        let m = DiscreteMeasure::uniform_grid_1d(n);
        let oracle: f64 = (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) / n as f64;
                x * x / n as f64
            })
            .sum();
        assert_eq!(m.moment(2.0), oracle);
        assert!((m.moment(2.0) - 1.0 / 3.0).abs() <= 1e-4);
    }

    #[test]
    fn moment_dilation_homogeneous() {
        let m = DiscreteMeasure::new(1, vec![vec![1.0], vec![2.0]], vec![0.25, 0.75]).unwrap();
        let s = -3.0;
        let p = 2.5;
        assert_abs_diff_eq!(
            m.dilated(s).moment(p),
            s.abs().powf(p) * m.moment(p),
            epsilon = 1e-12
        );
    }

    #[test]
    fn rational_mode_survives_merge() {
        let m = DiscreteMeasure::from_rational(
            1,
            vec![vec![0.0], vec![0.0], vec![1.0]],
            vec![ratio(1, 4), ratio(1, 4), ratio(1, 2)],
        )
        .unwrap();
        assert_eq!(m.len(), 2);
        let ex = m.exact_weights().unwrap();
        assert_eq!(ex[0], ratio(1, 2));
        assert_eq!(ex[1], ratio(1, 2));
    }

    #[test]
    fn serde_round_trip_bit_exact() {
        let m = DiscreteMeasure::new(
            2,
            vec![vec![0.1, -0.7], vec![1.0 / 3.0, 2.0_f64.sqrt()]],
            vec![0.25, 0.75],
        )
        .unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: DiscreteMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(m.atoms(), back.atoms());
        assert_eq!(m.weights(), back.weights());
    }

    #[test]
    fn rejects_bad_mass() {
        assert!(DiscreteMeasure::new(1, vec![vec![0.0]], vec![0.9]).is_err());
        assert!(DiscreteMeasure::new(1, vec![vec![f64::NAN]], vec![1.0]).is_err());
        assert!(DiscreteMeasure::new(1, vec![vec![0.0], vec![1.0]], vec![1.5, -0.5]).is_err());
    }
}
