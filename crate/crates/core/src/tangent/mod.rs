//! Extended tangent elements over a discrete base measure.
//!
//! A tangent element attaches to every base atom a probability distribution
//! of velocities. Deterministic velocity fields are the special case of
//! single-atom fibers. Equivalently, an element is the joint law on
//! base x velocity whose first marginal is the base; both views are exposed.
//!
//! The module carries three ways of comparing elements:
//!
//! * [`tangent_distance`] compares two elements over the same base by
//!   coupling their fibers atomwise (the triple-coupling infimum
//!   disintegrates into per-fiber optimal transport because the base
//!   coordinate is shared);
//! * [`sheaf_distance`] is the plain `W_2` distance between the joint laws
//!   seen as measures on `R^{2d}`;
//! * [`compare_by_transport`] moves the first element to the second base by
//!   parallel transport along some cost-minimizing coupling and measures the
//!   residual fiber discrepancy, taking the infimum over all transports and
//!   all minimizing couplings at once.

pub mod compare;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, Rational, MERGE_TOL};
use crate::transport::{solve_ot, Coupling, MARGINAL_TOL};

/// A fiberwise velocity distribution over a base measure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TangentElement {
    base: DiscreteMeasure,
    fibers: Vec<DiscreteMeasure>,
    /// exponent of the ambient space; fibers integrate to order p' = p/(p-1)
    #[serde(rename = "p")]
    p_conf: f64,
}

impl TangentElement {
    pub fn new(base: DiscreteMeasure, fibers: Vec<DiscreteMeasure>, p: f64) -> Result<Self> {
        if fibers.len() != base.len() {
            return Err(Error::InvalidInput(format!(
                "{} fibers for {} base atoms",
                fibers.len(),
                base.len()
            )));
        }
        if p <= 1.0 || !p.is_finite() {
            return Err(Error::InvalidInput(format!("ambient exponent p={p} must exceed 1")));
        }
        for f in &fibers {
            if f.dim() != base.dim() {
                return Err(Error::DimensionMismatch(f.dim(), base.dim()));
            }
        }
        Ok(Self { base, fibers, p_conf: p })
    }

    /// Deterministic element induced by a velocity field on the atoms.
    pub fn deterministic<F: Fn(&[f64]) -> Vec<f64>>(
        base: DiscreteMeasure,
        field: F,
        p: f64,
    ) -> Result<Self> {
        let fibers = base
            .atoms()
            .iter()
            .map(|a| {
                let v = field(a);
                if v.iter().any(|c| !c.is_finite()) {
                    return Err(Error::NonFiniteField(format!("{a:?}")));
                }
                Ok(DiscreteMeasure::dirac(v))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(base, fibers, p)
    }

    /// The zero element: every fiber is a Dirac at the origin.
    pub fn zero(base: DiscreteMeasure, p: f64) -> Self {
        let d = base.dim();
        let fibers = (0..base.len())
            .map(|_| DiscreteMeasure::dirac(vec![0.0; d]))
            .collect();
        Self { base, fibers, p_conf: p }
    }

    /// Rebuilds an element from a joint coupling (base on the left).
    pub fn from_joint(joint: &Coupling, p: f64) -> Result<Self> {
        let base = joint.left().clone();
        let mut fibers = Vec::with_capacity(base.len());
        for i in 0..base.len() {
            let cond = joint.conditional(i);
            if cond.is_empty() {
                return Err(Error::MarginalMismatch(format!("base atom {i} has no fiber mass")));
            }
            let atoms: Vec<Vec<f64>> = cond
                .iter()
                .map(|&(j, _)| joint.right().atom(j).to_vec())
                .collect();
            let mut weights: Vec<f64> = cond.iter().map(|&(_, w)| w).collect();
            // guard against conditional rounding: renormalize the tail
            let s: f64 = weights.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                for w in weights.iter_mut() {
                    *w /= s;
                }
            }
            fibers.push(DiscreteMeasure::new(joint.right().dim(), atoms, weights)?);
        }
        Self::new(base, fibers, p)
    }

    pub fn base(&self) -> &DiscreteMeasure {
        &self.base
    }

    pub fn fibers(&self) -> &[DiscreteMeasure] {
        &self.fibers
    }

    pub fn fiber(&self, i: usize) -> &DiscreteMeasure {
        &self.fibers[i]
    }

    pub fn p(&self) -> f64 {
        self.p_conf
    }

    /// Conjugate exponent `p' = p/(p-1)` of the fiber integrability.
    pub fn p_prime(&self) -> f64 {
        self.p_conf / (self.p_conf - 1.0)
    }

    /// Whether every fiber is a single Dirac.
    pub fn is_deterministic(&self) -> bool {
        self.fibers.iter().all(|f| f.len() == 1)
    }

    /// Integrated fiber moment `sum_i w_i int |z|^{p'} psi_{x_i}(dz)`.
    pub fn velocity_moment(&self) -> f64 {
        let pp = self.p_prime();
        self.base
            .weights()
            .iter()
            .zip(&self.fibers)
            .map(|(w, f)| w * f.moment(pp))
            .sum()
    }

    /// Velocity marginal (second marginal of the joint law).
    pub fn velocity_marginal(&self) -> DiscreteMeasure {
        let d = self.base.dim();
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for (w, f) in self.base.weights().iter().zip(&self.fibers) {
            for (z, fw) in f.atoms().iter().zip(f.weights()) {
                atoms.push(z.clone());
                weights.push(w * fw);
            }
        }
        DiscreteMeasure::new(d, atoms, weights).expect("valid marginal")
    }

    /// Joint law as a coupling base -> velocity.
    pub fn as_joint(&self) -> Coupling {
        let right = self.velocity_marginal();
        let mut cells = Vec::new();
        for (i, (w, f)) in self.base.weights().iter().zip(&self.fibers).enumerate() {
            for (z, fw) in f.atoms().iter().zip(f.weights()) {
                let j = right.nearest_atom(z).expect("velocity atom present");
                cells.push((i, j, w * fw));
            }
        }
        Coupling::new(self.base.clone(), right, cells).expect("joint law is a coupling")
    }

    /// Joint law as a measure on `R^{2d}` (atoms are `(x, z)` pairs).
    pub fn joint_measure(&self) -> DiscreteMeasure {
        let d = self.base.dim();
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        let mut exact: Option<Vec<Rational>> = match (
            self.base.exact_weights(),
            self.fibers.iter().all(|f| f.has_exact_weights()),
        ) {
            (Some(_), true) => Some(Vec::new()),
            _ => None,
        };
        for (i, (w, f)) in self.base.weights().iter().zip(&self.fibers).enumerate() {
            for (k, (z, fw)) in f.atoms().iter().zip(f.weights()).enumerate() {
                let mut xz = self.base.atom(i).to_vec();
                xz.extend_from_slice(z);
                atoms.push(xz);
                weights.push(w * fw);
                if let Some(ex) = exact.as_mut() {
                    ex.push(
                        self.base.exact_weights().unwrap()[i].clone()
                            * f.exact_weights().unwrap()[k].clone(),
                    );
                }
            }
        }
        match exact {
            Some(ex) => DiscreteMeasure::from_rational(2 * d, atoms, ex),
            None => DiscreteMeasure::new(2 * d, atoms, weights),
        }
        .expect("joint atoms are distinct")
    }

    /// Whether two elements share the same merged base.
    pub fn same_base(&self, other: &Self) -> bool {
        self.base.measure_eq(&other.base, MERGE_TOL, MARGINAL_TOL)
    }

    /// Maps this element's base atom indices into `other`'s base.
    fn base_map(&self, other: &Self) -> Result<Vec<usize>> {
        if !self.same_base(other) {
            return Err(Error::BaseMismatch(format!(
                "{} vs {} atoms or differing supports",
                self.base.len(),
                other.base.len()
            )));
        }
        Ok(self
            .base
            .atoms()
            .iter()
            .map(|a| other.base.nearest_atom(a).expect("merged base atom"))
            .collect())
    }
}

/// Fiberwise `W_2` distance between two elements over the same base:
/// `d(psi, psi')^2 = sum_i w_i W_2^2(psi_{x_i}, psi'_{x_i})`.
pub fn tangent_distance(a: &TangentElement, b: &TangentElement) -> Result<f64> {
    let map = a.base_map(b)?;
    let squares: Vec<f64> = (0..a.base().len())
        .into_par_iter()
        .map(|i| {
            let (_, w) = solve_ot(a.fiber(i), b.fiber(map[i]), 2.0)?;
            Ok(a.base().weight(i) * w * w)
        })
        .collect::<Result<Vec<_>>>()?;
    // summation in fiber order keeps results identical across thread counts
    Ok(squares.iter().sum::<f64>().max(0.0).sqrt())
}

/// Bilinear pairing through the squared distances to the zero element:
/// `<psi, psi'> = d^2(psi, 0) + d^2(0, psi') - d^2(psi, psi')`.
///
/// Note the absence of the conventional 1/2 polarization factor; the pairing
/// of a deterministic field with itself is `2 ||alpha||^2`.
pub fn inner_product(a: &TangentElement, b: &TangentElement) -> Result<f64> {
    let zero = TangentElement::zero(a.base().clone(), a.p());
    let da = tangent_distance(a, &zero)?;
    let db = tangent_distance(&zero, b)?;
    let dab = tangent_distance(a, b)?;
    Ok(da * da + db * db - dab * dab)
}

/// `W_2` distance between the joint laws on `R^{2d}`.
pub fn sheaf_distance(a: &TangentElement, b: &TangentElement) -> Result<f64> {
    if a.base().dim() != b.base().dim() {
        return Err(Error::DimensionMismatch(a.base().dim(), b.base().dim()));
    }
    let (_, w) = solve_ot(&a.joint_measure(), &b.joint_measure(), 2.0)?;
    Ok(w)
}

/// Relative slack allowed on the geodesic-cost constraint.
pub const GEODESIC_SLACK: f64 = 1e-7;

/// Transport-based comparison of elements over different bases: the least
/// squared fiber discrepancy achievable by parallel transport along a
/// `W_2`-cost-minimizing coupling, over all transports and all minimizing
/// couplings. See [`compare::solve_face_lp`] for the linear program.
pub fn compare_by_transport(a: &TangentElement, b: &TangentElement) -> Result<f64> {
    compare::transport_comparison(a, b, compare::Sense::Min)
}

/// Same linear program with maximization over transports and couplings.
pub fn compare_by_transport_sup(a: &TangentElement, b: &TangentElement) -> Result<f64> {
    compare::transport_comparison(a, b, compare::Sense::Max)
}

/// A joint-support atom: base position and velocity.
pub type JointAtom = (Vec<f64>, Vec<f64>);

/// Joint-support atoms `(x, z)` and their masses, in (base, fiber) order.
pub(crate) fn joint_support(e: &TangentElement) -> (Vec<JointAtom>, Vec<f64>) {
    let mut pts = Vec::new();
    let mut masses = Vec::new();
    for (i, (w, f)) in e.base().weights().iter().zip(e.fibers()).enumerate() {
        for (z, fw) in f.atoms().iter().zip(f.weights()) {
            pts.push((e.base().atom(i).to_vec(), z.clone()));
            masses.push(w * fw);
        }
    }
    (pts, masses)
}

/// Joint-support atoms with exact masses; requires the base and every fiber
/// to carry rational weights.
pub fn joint_support_exact(e: &TangentElement) -> Result<(Vec<JointAtom>, Vec<Rational>)> {
    let base_exact = e
        .base()
        .exact_weights()
        .ok_or_else(|| Error::NonRationalWeights("base".into()))?;
    let mut pts = Vec::new();
    let mut masses = Vec::new();
    for (i, f) in e.fibers().iter().enumerate() {
        let fiber_exact = f
            .exact_weights()
            .ok_or_else(|| Error::NonRationalWeights(format!("fiber {i}")))?;
        for (z, fw) in f.atoms().iter().zip(fiber_exact) {
            pts.push((e.base().atom(i).to_vec(), z.clone()));
            masses.push(base_exact[i].clone() * fw.clone());
        }
    }
    Ok((pts, masses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::ratio;
    use approx::assert_abs_diff_eq;

    fn uniform_pair() -> DiscreteMeasure {
        DiscreteMeasure::new(1, vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn joint_round_trip() {
        let base = uniform_pair();
        let e = TangentElement::new(
            base.clone(),
            vec![
                DiscreteMeasure::new(1, vec![vec![0.0], vec![2.0]], vec![0.5, 0.5]).unwrap(),
                DiscreteMeasure::dirac(vec![-1.0]),
            ],
            2.0,
        )
        .unwrap();
        let joint = e.as_joint();
        let back = TangentElement::from_joint(&joint, 2.0).unwrap();
        assert!(e.base().measure_eq(back.base(), 1e-12, 1e-12));
        for i in 0..e.fibers().len() {
            assert!(e.fiber(i).measure_eq(back.fiber(i), 1e-12, 1e-12));
        }
    }

    #[test]
    fn split_fiber_joint_masses() {
        // base dirac at 0 with fiber half at 0, half at 2
        let e = TangentElement::new(
            DiscreteMeasure::dirac(vec![0.0]),
            vec![DiscreteMeasure::from_rational(
                1,
                vec![vec![0.0], vec![2.0]],
                vec![ratio(1, 2), ratio(1, 2)],
            )
            .unwrap()],
            2.0,
        )
        .unwrap();
        let joint = e.as_joint();
        assert_eq!(joint.cells().len(), 2);
        for &(_, _, w) in joint.cells() {
            assert_abs_diff_eq!(w, 0.5);
        }
    }

    #[test]
    fn deterministic_distance_is_l2_norm() {
        // alpha(x) = x, alpha'(x) = -x over two symmetric atoms
        let base = DiscreteMeasure::new(1, vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let a = TangentElement::deterministic(base.clone(), |x| x.to_vec(), 2.0).unwrap();
        let b = TangentElement::deterministic(base, |x| vec![-x[0]], 2.0).unwrap();
        // ||alpha - alpha'||^2 = sum w (2x)^2 = 4
        let d = tangent_distance(&a, &b).unwrap();
        assert_abs_diff_eq!(d * d, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn distance_zero_on_equal_elements() {
        let base = uniform_pair();
        let e = TangentElement::deterministic(base, |x| vec![3.0 * x[0]], 2.0).unwrap();
        assert_abs_diff_eq!(tangent_distance(&e, &e).unwrap(), 0.0);
    }

    #[test]
    fn inner_product_signs() {
        let base = uniform_pair();
        let a = TangentElement::deterministic(base.clone(), |x| vec![x[0] + 1.0], 2.0).unwrap();
        let minus = TangentElement::deterministic(base.clone(), |x| vec![-(x[0] + 1.0)], 2.0)
            .unwrap();
        let zero = TangentElement::zero(base, 2.0);
        let norm2: f64 = a
            .base()
            .weights()
            .iter()
            .zip(a.base().atoms())
            .map(|(w, x)| w * (x[0] + 1.0) * (x[0] + 1.0))
            .sum();
        // pairing with the zero element vanishes: the first and third terms
        // of the defining combination cancel
        assert_abs_diff_eq!(inner_product(&a, &zero).unwrap(), 0.0, epsilon = 1e-12);
        // <a, a> = 2 ||a||^2 (verbatim formula, no 1/2)
        assert_abs_diff_eq!(inner_product(&a, &a).unwrap(), 2.0 * norm2, epsilon = 1e-12);
        // <a, -a> = -2 ||a||^2
        assert_abs_diff_eq!(
            inner_product(&a, &minus).unwrap(),
            -2.0 * norm2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn base_mismatch_rejected() {
        let a = TangentElement::zero(uniform_pair(), 2.0);
        let other = DiscreteMeasure::new(1, vec![vec![0.0], vec![2.0]], vec![0.5, 0.5]).unwrap();
        let b = TangentElement::zero(other, 2.0);
        assert!(matches!(
            tangent_distance(&a, &b),
            Err(Error::BaseMismatch(_))
        ));
    }

    #[test]
    fn sheaf_distance_zero_on_identical() {
        let base = uniform_pair();
        let e = TangentElement::deterministic(base, |x| vec![2.0 * x[0] - 1.0], 2.0).unwrap();
        assert!(sheaf_distance(&e, &e).unwrap() <= 1e-12);
    }

    #[test]
    fn velocity_moment_matches_hand_sum() {
        let base = uniform_pair();
        let e = TangentElement::new(
            base,
            vec![
                DiscreteMeasure::new(1, vec![vec![1.0], vec![-3.0]], vec![0.5, 0.5]).unwrap(),
                DiscreteMeasure::dirac(vec![2.0]),
            ],
            2.0,
        )
        .unwrap();
        // p' = 2: 0.5*(0.5*1 + 0.5*9) + 0.5*4 = 4.5
        assert_abs_diff_eq!(e.velocity_moment(), 4.5, epsilon = 1e-12);
    }
}
