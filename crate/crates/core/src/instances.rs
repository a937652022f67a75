//! Ready-made example instances used by the reproduction command and the
//! acceptance suite: branching transports, the scaled-field comparison over
//! the unit interval, translated two-atom curves, branch-splitting
//! translations, Dirac-collapse arrival, path dependence, the Lipschitz
//! sweep problem, and the split-target mode gap.

use std::sync::Arc;

use crate::control::{ControlProblem, MeanFieldTerm, TerminalCost};
use crate::curves::{uniform_grid, PathEnsemble, Trajectory};
use crate::measure::{ratio, DiscreteMeasure, Rational};
use crate::tangent::TangentElement;
use crate::transport::Coupling;

/// Branching-transport instance: a split velocity fiber over a Dirac carried
/// along a symmetric two-point coupling. Exactly three transport laws exist.
pub struct BranchingTransport {
    pub element: TangentElement,
    pub route: Coupling,
    /// the three expected laws as triples (x, y, z, mass)
    pub expected: Vec<Vec<(f64, f64, f64, Rational)>>,
}

/// The two-branch split instance with velocity fiber `{0, 2}` over a Dirac.
pub fn branching_transport() -> BranchingTransport {
    let base = DiscreteMeasure::dirac(vec![0.0]);
    let fiber = DiscreteMeasure::from_rational(
        1,
        vec![vec![0.0], vec![2.0]],
        vec![ratio(1, 2), ratio(1, 2)],
    )
    .unwrap();
    let element = TangentElement::new(base.clone(), vec![fiber], 2.0).unwrap();
    let targets = DiscreteMeasure::from_rational(
        1,
        vec![vec![1.0], vec![-1.0]],
        vec![ratio(1, 2), ratio(1, 2)],
    )
    .unwrap();
    let route = Coupling::from_rational(
        base,
        targets,
        vec![(0, 0, ratio(1, 2)), (0, 1, ratio(1, 2))],
    )
    .unwrap();
    let half = ratio(1, 2);
    let quarter = ratio(1, 4);
    let expected = vec![
        // forward branch keeps velocity 0, backward branch carries 2
        vec![
            (0.0, 1.0, 0.0, half.clone()),
            (0.0, -1.0, 2.0, half.clone()),
        ],
        // swapped assignment
        vec![(0.0, 1.0, 2.0, half.clone()), (0.0, -1.0, 0.0, half)],
        // independent product: four quarter-mass branches
        vec![
            (0.0, 1.0, 0.0, quarter.clone()),
            (0.0, 1.0, 2.0, quarter.clone()),
            (0.0, -1.0, 0.0, quarter.clone()),
            (0.0, -1.0, 2.0, quarter),
        ],
    ];
    BranchingTransport { element, route, expected }
}

/// Scaled-field comparison instance over the discretized unit interval:
/// `phi_x = lambda x`, `psi_x = lambda (1 - x)` over the same base.
pub fn scaled_field_pair(lambda: f64, atoms: usize) -> (TangentElement, TangentElement) {
    let mu = DiscreteMeasure::uniform_grid_1d(atoms);
    let phi = TangentElement::deterministic(mu.clone(), move |x| vec![lambda * x[0]], 2.0)
        .expect("deterministic element");
    let psi = TangentElement::deterministic(mu, move |x| vec![lambda * (1.0 - x[0])], 2.0)
        .expect("deterministic element");
    (phi, psi)
}

/// Two-atom inward-motion curve and the optimal coupling onto its shrunken
/// copy. The squared distance between the curve and its translation is 9 up
/// to `t = 1/3` and `(5 - 6t)^2` afterwards.
pub struct TranslatedDistance {
    pub ensemble: PathEnsemble,
    pub gamma0: Coupling,
}

pub fn translated_distance() -> TranslatedDistance {
    let m0 = DiscreteMeasure::from_rational(
        1,
        vec![vec![-4.0], vec![4.0]],
        vec![ratio(1, 2), ratio(1, 2)],
    )
    .unwrap();
    // twelve uniform steps put t = 1/3 on the grid
    let ensemble = PathEnsemble::from_velocity_field(
        &m0,
        |_, x| vec![if x[0] >= 0.0 { -3.0 } else { 3.0 }],
        uniform_grid(12),
    )
    .unwrap();
    let target = DiscreteMeasure::from_rational(
        1,
        vec![vec![-1.0], vec![1.0]],
        vec![ratio(1, 2), ratio(1, 2)],
    )
    .unwrap();
    let gamma0 = Coupling::from_rational(
        m0,
        target,
        vec![(0, 0, ratio(1, 2)), (1, 1, ratio(1, 2))],
    )
    .unwrap();
    TranslatedDistance { ensemble, gamma0 }
}

/// Closed-form squared distance of the translated-curve instance.
pub fn translated_distance_closed_form(t: f64) -> f64 {
    let crossed = (5.0 - 6.0 * t) * (5.0 - 6.0 * t);
    crossed.min(9.0)
}

/// Exact pairing enumeration for two-atom measures: the minimum of the two
/// perfect pairings, computed directly from the atoms. Independent route
/// against the transport solver on these instances.
pub fn two_atom_pairing_minimum(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    assert!(a.len() <= 2 && b.len() <= 2, "pairing oracle is 2x2 only");
    let sq = |x: &[f64], y: &[f64]| -> f64 {
        x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum()
    };
    if a.len() == 1 || b.len() == 1 {
        let mut acc = 0.0;
        for i in 0..a.len() {
            for j in 0..b.len() {
                acc += a.weight(i) * b.weight(j) * sq(a.atom(i), b.atom(j));
            }
        }
        return acc;
    }
    let matched = a.weight(0) * sq(a.atom(0), b.atom(0)) + a.weight(1) * sq(a.atom(1), b.atom(1));
    let crossed = a.weight(0) * sq(a.atom(0), b.atom(1)) + a.weight(1) * sq(a.atom(1), b.atom(0));
    matched.min(crossed)
}

/// Branch-splitting translation instance: two labeled branches out of a
/// Dirac coupled to a symmetric two-point split; exactly three translations.
pub struct SplitTranslations {
    pub ensemble: PathEnsemble,
    pub gamma0: Coupling,
    pub expected: Vec<PathEnsemble>,
}

pub fn split_translations() -> SplitTranslations {
    let grid = uniform_grid(10);
    let mk_branch = |start: f64, vel: f64, weight: Rational| -> Trajectory {
        let mut x = start;
        let mut positions = Vec::with_capacity(grid.len());
        for j in 0..grid.len() {
            positions.push(vec![x]);
            if j + 1 < grid.len() {
                x += vel * (grid[j + 1] - grid[j]);
            }
        }
        Trajectory {
            weight: num_traits::ToPrimitive::to_f64(&weight).unwrap(),
            positions,
            velocities: Some(vec![vec![vel]; grid.len()]),
            label: None,
            exact_weight: Some(weight),
        }
    };
    let ensemble = PathEnsemble::new(
        grid.clone(),
        vec![
            mk_branch(0.0, 1.0, ratio(1, 2)),
            mk_branch(0.0, -1.0, ratio(1, 2)),
        ],
    )
    .unwrap();
    let target = DiscreteMeasure::from_rational(
        1,
        vec![vec![-2.0], vec![2.0]],
        vec![ratio(1, 2), ratio(1, 2)],
    )
    .unwrap();
    let gamma0 = Coupling::from_rational(
        DiscreteMeasure::dirac(vec![0.0]),
        target,
        vec![(0, 0, ratio(1, 2)), (0, 1, ratio(1, 2))],
    )
    .unwrap();
    // the three laws: outward, inward, and the quarter-mass product
    let expected = vec![
        PathEnsemble::new(
            grid.clone(),
            vec![
                mk_branch(2.0, 1.0, ratio(1, 2)),
                mk_branch(-2.0, -1.0, ratio(1, 2)),
            ],
        )
        .unwrap(),
        PathEnsemble::new(
            grid.clone(),
            vec![
                mk_branch(-2.0, 1.0, ratio(1, 2)),
                mk_branch(2.0, -1.0, ratio(1, 2)),
            ],
        )
        .unwrap(),
        PathEnsemble::new(
            grid.clone(),
            vec![
                mk_branch(-2.0, 1.0, ratio(1, 4)),
                mk_branch(2.0, 1.0, ratio(1, 4)),
                mk_branch(-2.0, -1.0, ratio(1, 4)),
                mk_branch(2.0, -1.0, ratio(1, 4)),
            ],
        )
        .unwrap(),
    ];
    SplitTranslations { ensemble, gamma0, expected }
}

/// Identity field over a normal quantile grid, transported onto a single
/// point: the arrival fiber there is the whole source measure.
pub fn dirac_arrival() -> (TangentElement, Coupling) {
    let mu = DiscreteMeasure::normal_quantiles_1d(200);
    let element = TangentElement::deterministic(mu.clone(), |x| x.to_vec(), 2.0).unwrap();
    let route = Coupling::new(
        mu.clone(),
        DiscreteMeasure::dirac(vec![0.0]),
        (0..mu.len()).map(|i| (i, 0, mu.weight(i))).collect(),
    )
    .unwrap();
    (element, route)
}

/// Identity field over the unit interval with two ensembles sharing every
/// time marginal: the motionless one and the crossing one. Their transports
/// differ.
pub fn path_dependence() -> (TangentElement, PathEnsemble, PathEnsemble) {
    let mu = DiscreteMeasure::uniform_grid_1d(401);
    let element = TangentElement::deterministic(mu.clone(), |x| x.to_vec(), 2.0).unwrap();
    let grid = uniform_grid(10);
    let still = PathEnsemble::constant(&mu, grid.clone()).unwrap();
    let cross = Coupling::from_map(&mu, |x| vec![1.0 - x[0]]).unwrap();
    let crossing = PathEnsemble::from_interpolation(&cross, grid).unwrap();
    (element, still, crossing)
}

/// Regularity-hypotheses-compliant control problem: quadratic kinetic cost,
/// a Lipschitz integral mean-field term, and a bounded transport-Lipschitz
/// terminal cost.
pub fn lipschitz_problem(steps: usize) -> ControlProblem {
    let mut p = ControlProblem::kinetic(1.0, steps, 1.0, 4.0);
    p.terminal = TerminalCost::CappedSquaredW2 {
        cap: 1.0,
        reference: DiscreteMeasure::from_rational(
            1,
            vec![vec![-1.0], vec![1.0]],
            vec![ratio(1, 2), ratio(1, 2)],
        )
        .unwrap(),
    };
    p.mean_field_coeff = 0.5;
    p.mean_field = Some(MeanFieldTerm::Integral {
        f: Arc::new(|x: &[f64]| (1.0 + x.iter().map(|c| c * c).sum::<f64>()).sqrt()),
        grad_f: Arc::new(|x: &[f64]| {
            let n = (1.0 + x.iter().map(|c| c * c).sum::<f64>()).sqrt();
            x.iter().map(|c| c / n).collect()
        }),
        lipschitz: 1.0,
    });
    p
}

/// Base measure and shifted pairs (with the optimal shift couplings) for the
/// Lipschitz sweep.
pub fn lipschitz_pairs(
    deltas: &[f64],
) -> (DiscreteMeasure, Vec<(DiscreteMeasure, DiscreteMeasure, Coupling)>) {
    let base = DiscreteMeasure::from_rational(
        1,
        vec![vec![-0.6], vec![-0.1], vec![0.3], vec![0.8]],
        vec![ratio(1, 4), ratio(1, 4), ratio(1, 4), ratio(1, 4)],
    )
    .unwrap();
    let pairs = deltas
        .iter()
        .map(|&delta| {
            let shifted = base.translated(&[delta]);
            let gamma = Coupling::from_rational(
                base.clone(),
                shifted.clone(),
                (0..base.len())
                    .map(|i| (i, i, base.exact_weights().unwrap()[i].clone()))
                    .collect(),
            )
            .unwrap();
            (base.clone(), shifted, gamma)
        })
        .collect();
    (base, pairs)
}

/// Split-target control instance: coincident particles at the origin, a tiny
/// kinetic penalty, and a terminal cost rewarding an even split onto two
/// points. Position-tied controls cannot split and pay the full terminal
/// cost; randomized branches split and pay only the kinetic term.
pub fn split_target(
    eps: f64,
    steps: usize,
    particles: usize,
) -> (ControlProblem, DiscreteMeasure) {
    let mut p = ControlProblem::kinetic(1.0, steps, eps, 4.0);
    p.terminal = TerminalCost::CappedSquaredW2 {
        cap: 1.0,
        reference: DiscreteMeasure::from_rational(
            1,
            vec![vec![-1.0], vec![1.0]],
            vec![ratio(1, 2), ratio(1, 2)],
        )
        .unwrap(),
    };
    // coincident particles merge into a single atom; the particle count
    // reappears as the branch count of the randomized relaxation
    let m0 = DiscreteMeasure::empirical(vec![vec![0.0]; particles]).unwrap();
    (p, m0)
}

/// Collapse-then-split curve with a kink (velocities are not Lipschitz in
/// space): two ensemble representations of the same measure curve. After the
/// collapse a branch may continue straight or bounce back; both ensembles
/// have identical marginals at every time, yet their translations along the
/// same deterministic initial coupling differ. Shipped as the documented
/// exercise instance; only non-uniqueness is asserted.
pub struct NonsmoothSplit {
    pub straight: PathEnsemble,
    pub bounce: PathEnsemble,
    pub gamma0: Coupling,
}

pub fn nonsmooth_split() -> NonsmoothSplit {
    // collapse at t = 1/4, split at t = 3/4 on a 16-step grid
    let grid = uniform_grid(16);
    let speed = |t: f64, turn: f64| -> f64 {
        if t < 0.25 {
            -1.0
        } else if t < 0.75 {
            0.0
        } else {
            turn
        }
    };
    let mk = |start: f64, turn: f64| -> Trajectory {
        let mut x = start;
        let mut positions = Vec::new();
        let mut velocities = Vec::new();
        let sgn = if start >= 0.0 { 1.0 } else { -1.0 };
        for j in 0..grid.len() {
            let v = sgn * speed(grid[j], turn);
            positions.push(vec![x]);
            velocities.push(vec![v]);
            if j + 1 < grid.len() {
                x += v * (grid[j + 1] - grid[j]);
            }
        }
        Trajectory {
            weight: 0.5,
            positions,
            velocities: Some(velocities),
            label: Some(if start >= 0.0 { 0 } else { 1 }),
            exact_weight: Some(ratio(1, 2)),
        }
    };
    // straight: the branch from +1/4 keeps moving downward through the
    // collapse point; bounce: it returns upward
    let straight = PathEnsemble::new(grid.clone(), vec![mk(0.25, 1.0), mk(-0.25, 1.0)]).unwrap();
    let bounce = PathEnsemble::new(grid.clone(), vec![mk(0.25, -1.0), mk(-0.25, -1.0)]).unwrap();
    let m0 = straight.marginal_at(0.0);
    let shifted = m0.translated(&[5.0]);
    let gamma0 = Coupling::from_rational(
        m0.clone(),
        shifted,
        (0..m0.len())
            .map(|i| (i, i, m0.exact_weights().unwrap()[i].clone()))
            .collect(),
    )
    .unwrap();
    NonsmoothSplit { straight, bounce, gamma0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ptransport::{enumerate_transports, transport_law_eq};
    use crate::transport::solve_ot;

    #[test]
    fn branching_transport_expected_is_complete() {
        let inst = branching_transport();
        let laws = enumerate_transports(&inst.element, &inst.route, 16).unwrap();
        assert_eq!(laws.len(), inst.expected.len());
        for want in &inst.expected {
            let found = laws.iter().any(|tr| {
                let mut got: Vec<(f64, f64, f64, Rational)> = tr
                    .triples()
                    .iter()
                    .map(|c| {
                        (
                            tr.source().base().atom(c.base)[0],
                            tr.route().right().atom(c.target)[0],
                            c.velocity[0],
                            c.exact.clone().unwrap(),
                        )
                    })
                    .collect();
                got.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mut want = want.clone();
                want.sort_by(|a, b| a.partial_cmp(b).unwrap());
                got == want
            });
            assert!(found, "law {want:?} not produced");
        }
    }

    #[test]
    fn translated_distance_matches_closed_form() {
        let inst = translated_distance();
        let (_, translated) = inst.ensemble.translate(&inst.gamma0).unwrap();
        for (j, &t) in inst.ensemble.grid().iter().enumerate() {
            let m = inst.ensemble.marginal_at(t);
            let mt = translated.marginal_at(t);
            let oracle = two_atom_pairing_minimum(&m, &mt);
            let (_, w) = solve_ot(&m, &mt, 2.0).unwrap();
            assert_eq!(w * w, oracle, "pairing mismatch at grid index {j}");
            assert!(
                (oracle - translated_distance_closed_form(t)).abs() <= 1e-12,
                "closed form mismatch at t={t}: {oracle}"
            );
        }
    }

    #[test]
    fn split_translations_expected_are_the_enumeration() {
        let inst = split_translations();
        let laws = inst.ensemble.enumerate_translations(&inst.gamma0, 16).unwrap();
        assert_eq!(laws.len(), 3);
        for want in &inst.expected {
            assert!(
                laws.iter().any(|l| l.law_eq(want, 0.0)),
                "expected law missing from enumeration"
            );
        }
    }

    #[test]
    fn nonsmooth_split_translations_differ() {
        let inst = nonsmooth_split();
        // identical marginals at every grid time
        for &t in inst.straight.grid() {
            assert!(inst
                .straight
                .marginal_at(t)
                .measure_eq(&inst.bounce.marginal_at(t), 1e-12, 1e-12));
        }
        let (_, ta) = inst.straight.translate(&inst.gamma0).unwrap();
        let (_, tb) = inst.bounce.translate(&inst.gamma0).unwrap();
        assert!(!ta.law_eq(&tb, 1e-12), "translations should differ");
    }

    #[test]
    fn path_dependence_instance_detects_route_difference() {
        let (element, still, crossing) = path_dependence();
        // both ensembles start and end at the base measure (the crossing one
        // is a measure-preserving reflection at time one)
        for t in [0.0, 1.0] {
            assert!(still
                .marginal_at(t)
                .measure_eq(&crossing.marginal_at(t), 1e-9, 1e-12));
        }
        assert!(crate::ptransport::path_dependence_check(&element, &still, &crossing).unwrap());
    }

    #[test]
    fn dirac_arrival_is_nondeterministic() {
        let (element, route) = dirac_arrival();
        let tr = crate::ptransport::transport_along_coupling(&element, &route).unwrap();
        assert!(!tr.arrival().is_deterministic());
        assert!(tr.arrival().fiber(0).measure_eq(element.base(), 1e-12, 1e-10));
        let again = crate::ptransport::transport_along_coupling(&element, &route).unwrap();
        assert!(transport_law_eq(&tr, &again, 0.0));
    }
}
