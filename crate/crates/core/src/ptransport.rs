//! Parallel transport of tangent elements along couplings (flat case).
//!
//! A transport of an element along a coupling is a path-ensemble law on
//! position-velocity pairs: positions interpolate the coupling linearly,
//! velocities stay constant along every trajectory, and the time-0 joint law
//! is the element's joint law. Only the endpoints of the position paths
//! matter in flat space, so a coupling determines the transports up to the
//! choice of gluing between the coupling fiber and the velocity fiber over
//! each base atom; that freedom is exactly what the enumeration explores.

use num_traits::ToPrimitive;

use crate::curves::{uniform_grid, PathEnsemble, Trajectory};
use crate::error::{Error, Result};
use crate::measure::{dist, DiscreteMeasure, Rational, MERGE_TOL};
use crate::tangent::TangentElement;
use crate::transport::vertices::enumerate_vertices_exact;
use crate::transport::{Coupling, MARGINAL_TOL};

/// Number of uniform time steps used for transport trajectories.
pub const DEFAULT_TRANSPORT_STEPS: usize = 10;

/// Outcome of the uniqueness classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UniquenessClass {
    /// every fiber of the element is a single Dirac
    UniqueDeterministicTangent,
    /// every base atom has a single successor under the coupling
    UniqueDeterministicFlow,
    PossiblyNonUnique,
}

/// A realized parallel transport.
pub struct TransportResult {
    source: TangentElement,
    route: Coupling,
    /// trajectories on `R^{2d}`: position part moves, velocity part is frozen
    ensemble: PathEnsemble,
    arrival: TangentElement,
    /// triple law `(base atom, route target, velocity)` with masses
    triples: Vec<TransportCell>,
}

#[derive(Clone, Debug)]
pub struct TransportCell {
    pub base: usize,
    pub target: usize,
    pub velocity: Vec<f64>,
    pub mass: f64,
    pub exact: Option<Rational>,
}

impl TransportResult {
    pub fn source(&self) -> &TangentElement {
        &self.source
    }

    pub fn route(&self) -> &Coupling {
        &self.route
    }

    pub fn ensemble(&self) -> &PathEnsemble {
        &self.ensemble
    }

    pub fn arrival(&self) -> &TangentElement {
        &self.arrival
    }

    pub fn triples(&self) -> &[TransportCell] {
        &self.triples
    }

    /// The (position, velocity) law at grid index `j` as a tangent element
    /// over the positional marginal.
    pub fn element_at(&self, j: usize) -> Result<TangentElement> {
        let grid = self.ensemble.grid();
        assert!(j < grid.len());
        let d = self.ensemble.dim() / 2;
        let atoms: Vec<Vec<f64>> = self
            .ensemble
            .trajectories()
            .iter()
            .map(|tr| tr.positions[j][..d].to_vec())
            .collect();
        let weights: Vec<f64> = self
            .ensemble
            .trajectories()
            .iter()
            .map(|tr| tr.weight)
            .collect();
        let base = DiscreteMeasure::new(d, atoms.clone(), weights)?;
        let mut fiber_atoms: Vec<Vec<Vec<f64>>> = vec![Vec::new(); base.len()];
        let mut fiber_weights: Vec<Vec<f64>> = vec![Vec::new(); base.len()];
        for (tr, pos) in self.ensemble.trajectories().iter().zip(&atoms) {
            let a = base.nearest_atom(pos).expect("merged atom");
            fiber_atoms[a].push(tr.positions[j][d..].to_vec());
            fiber_weights[a].push(tr.weight / base.weight(a));
        }
        let fibers = fiber_atoms
            .into_iter()
            .zip(fiber_weights)
            .map(|(za, zw)| {
                let s: f64 = zw.iter().sum();
                let zw: Vec<f64> = zw.iter().map(|w| w / s).collect();
                DiscreteMeasure::new(d, za, zw)
            })
            .collect::<Result<Vec<_>>>()?;
        TangentElement::new(base, fibers, self.source.p())
    }

    /// Numerical check of the defining conditions; all fields should be at
    /// the tolerances stated by the caller's test.
    pub fn verify(&self) -> TransportCheck {
        let d = self.ensemble.dim() / 2;
        // velocity part constant along every trajectory (bitwise)
        let mut vel_err = 0.0_f64;
        for tr in self.ensemble.trajectories() {
            let z0 = &tr.positions[0][d..];
            for p in &tr.positions {
                for k in 0..d {
                    vel_err = vel_err.max((p[d + k] - z0[k]).abs());
                }
            }
        }
        // time-0 joint law matches the source element
        let time0 = self.ensemble.marginal_at(0.0);
        let source_joint = self.source.joint_measure();
        let time0_err = measure_gap(&time0, &source_joint);
        // positional marginal at each grid time matches the interpolated route
        let mut route_err = 0.0_f64;
        for (j, t) in self.ensemble.grid().iter().enumerate() {
            let marg = positional_marginal(&self.ensemble, j, d);
            let interp = interpolate_route(&self.route, *t);
            route_err = route_err.max(measure_gap(&marg, &interp));
        }
        // velocity moment is carried unchanged
        let moment_err =
            (self.arrival.velocity_moment() - self.source.velocity_moment()).abs();
        TransportCheck { time0_err, vel_err, route_err, moment_err }
    }
}

/// Sup-style discrepancies of the three defining conditions.
pub struct TransportCheck {
    pub time0_err: f64,
    pub vel_err: f64,
    pub route_err: f64,
    pub moment_err: f64,
}

fn positional_marginal(ensemble: &PathEnsemble, j: usize, d: usize) -> DiscreteMeasure {
    let atoms: Vec<Vec<f64>> = ensemble
        .trajectories()
        .iter()
        .map(|tr| tr.positions[j][..d].to_vec())
        .collect();
    let weights: Vec<f64> = ensemble.trajectories().iter().map(|tr| tr.weight).collect();
    DiscreteMeasure::new(d, atoms, weights).expect("valid marginal")
}

fn interpolate_route(route: &Coupling, t: f64) -> DiscreteMeasure {
    let atoms: Vec<Vec<f64>> = route
        .cells()
        .iter()
        .map(|&(i, j, _)| {
            route
                .left()
                .atom(i)
                .iter()
                .zip(route.right().atom(j))
                .map(|(x, y)| (1.0 - t) * x + t * y)
                .collect()
        })
        .collect();
    let weights: Vec<f64> = route.cells().iter().map(|&(_, _, w)| w).collect();
    DiscreteMeasure::new(route.left().dim(), atoms, weights).expect("valid interpolation")
}

/// Greedy sup-distance between two measures with matched supports; infinite
/// when supports cannot be matched within the merge tolerance.
fn measure_gap(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut taken = vec![false; b.len()];
    let mut worst = 0.0_f64;
    'outer: for i in 0..a.len() {
        for j in 0..b.len() {
            if !taken[j] && dist(a.atom(i), b.atom(j)) <= MERGE_TOL {
                taken[j] = true;
                worst = worst
                    .max(dist(a.atom(i), b.atom(j)))
                    .max((a.weight(i) - b.weight(j)).abs());
                continue 'outer;
            }
        }
        return f64::INFINITY;
    }
    worst
}

/// Canonical parallel transport of an element along a coupling: the
/// conditionally independent gluing of route and velocity fibers pushed
/// through straight-line motion.
pub fn transport_along_coupling(
    element: &TangentElement,
    route: &Coupling,
) -> Result<TransportResult> {
    transport_with_grid(element, route, uniform_grid(DEFAULT_TRANSPORT_STEPS))
}

/// As [`transport_along_coupling`] on a caller-supplied grid.
pub fn transport_with_grid(
    element: &TangentElement,
    route: &Coupling,
    grid: Vec<f64>,
) -> Result<TransportResult> {
    let fibers = transport_fibers(element, route)?;
    let mut cells = Vec::new();
    for fiber in &fibers {
        // conditionally independent product within the fiber
        for &(j, wj, ref ej) in &fiber.succ {
            for &(z, wz, ref ez) in &fiber.vel {
                let mass = fiber.weight * wj * wz;
                let exact = match (&fiber.exact, ej, ez) {
                    (Some(ew), Some(ej), Some(ez)) => Some(ew.clone() * ej * ez),
                    _ => None,
                };
                cells.push(TransportCell {
                    base: fiber.atom,
                    target: j,
                    velocity: element.fiber(fiber.atom).atom(z).to_vec(),
                    mass,
                    exact,
                });
            }
        }
    }
    assemble_transport(element, route, grid, cells)
}

/// All transports whose per-fiber gluings are vertex couplings, plus the
/// canonical product, deduplicated by the law of the triple
/// (start, end, velocity). Requires exact weights.
pub fn enumerate_transports(
    element: &TangentElement,
    route: &Coupling,
    limit: usize,
) -> Result<Vec<TransportResult>> {
    if route.exact_cells().is_none() {
        return Err(Error::NonRationalWeights("route coupling".into()));
    }
    if element.base().exact_weights().is_none()
        || element.fibers().iter().any(|f| !f.has_exact_weights())
    {
        return Err(Error::NonRationalWeights("tangent element".into()));
    }
    let fibers = transport_fibers(element, route)?;

    let mut per_fiber: Vec<Vec<Vec<(usize, usize, Rational)>>> = Vec::new();
    let mut combos: usize = 1;
    for fiber in &fibers {
        let lefts: Vec<Rational> = fiber.succ.iter().map(|(_, _, e)| e.clone().unwrap()).collect();
        let rights: Vec<Rational> = fiber.vel.iter().map(|(_, _, e)| e.clone().unwrap()).collect();
        if lefts.len() * rights.len() > 20 {
            return Err(Error::TooLarge(format!(
                "fiber gluing polytope with {} cells",
                lefts.len() * rights.len()
            )));
        }
        let verts = enumerate_vertices_exact(&lefts, &rights);
        combos = combos.saturating_mul(verts.len());
        if combos > limit.max(1) * 4 {
            return Err(Error::TooLarge(format!("{combos}+ gluing combinations")));
        }
        per_fiber.push(verts);
    }

    let mut results: Vec<TransportResult> = Vec::new();
    let mut keys: Vec<Vec<(usize, usize, u64, Rational)>> = Vec::new();
    fn push_unique(
        tr: TransportResult,
        keys: &mut Vec<Vec<(usize, usize, u64, Rational)>>,
        results: &mut Vec<TransportResult>,
    ) {
        let key = triple_key(&tr);
        if !keys.contains(&key) {
            keys.push(key);
            results.push(tr);
        }
    }

    // canonical product gluing
    push_unique(
        transport_along_coupling(element, route)?,
        &mut keys,
        &mut results,
    );

    let mut index = vec![0usize; per_fiber.len()];
    loop {
        let mut cells = Vec::new();
        for (f, fiber) in fibers.iter().enumerate() {
            for (li, ri, w) in &per_fiber[f][index[f]] {
                let (j, _, _) = fiber.succ[*li];
                let (z, _, _) = fiber.vel[*ri];
                let exact = fiber.exact.clone().unwrap() * w;
                cells.push(TransportCell {
                    base: fiber.atom,
                    target: j,
                    velocity: element.fiber(fiber.atom).atom(z).to_vec(),
                    mass: exact.to_f64().unwrap(),
                    exact: Some(exact),
                });
            }
        }
        push_unique(
            assemble_transport(element, route, uniform_grid(DEFAULT_TRANSPORT_STEPS), cells)?,
            &mut keys,
            &mut results,
        );
        if results.len() > limit {
            return Err(Error::TooLarge(format!("more than {limit} transport laws")));
        }
        let mut k = 0;
        loop {
            if k == index.len() {
                return Ok(results);
            }
            index[k] += 1;
            if index[k] < per_fiber[k].len() {
                break;
            }
            index[k] = 0;
            k += 1;
        }
    }
}

fn triple_key(tr: &TransportResult) -> Vec<(usize, usize, u64, Rational)> {
    let mut key: Vec<(usize, usize, u64, Rational)> = tr
        .triples
        .iter()
        .map(|c| {
            (
                c.base,
                c.target,
                c.velocity.iter().map(|v| v.to_bits()).fold(0u64, |h, b| {
                    h.wrapping_mul(0x100000001b3).wrapping_add(b)
                }),
                c.exact
                    .clone()
                    .unwrap_or_else(|| Rational::from_float(c.mass).unwrap()),
            )
        })
        .collect();
    key.sort_unstable_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)).then_with(|| a.3.cmp(&b.3)));
    // collapse duplicate triples
    let mut out: Vec<(usize, usize, u64, Rational)> = Vec::new();
    for item in key {
        if let Some(last) = out.last_mut() {
            if last.0 == item.0 && last.1 == item.1 && last.2 == item.2 {
                last.3 += item.3;
                continue;
            }
        }
        out.push(item);
    }
    out
}

struct TransportFiber {
    atom: usize,
    weight: f64,
    exact: Option<Rational>,
    /// successors: (right atom, conditional weight, exact conditional)
    succ: Vec<(usize, f64, Option<Rational>)>,
    /// velocity atoms: (fiber atom index, conditional weight, exact)
    vel: Vec<(usize, f64, Option<Rational>)>,
}

fn transport_fibers(element: &TangentElement, route: &Coupling) -> Result<Vec<TransportFiber>> {
    if !route.left_matches(element.base()) {
        return Err(Error::MarginalMismatch(
            "route must start at the element's base".into(),
        ));
    }
    let base = element.base();
    let remap: Vec<usize> = route
        .left()
        .atoms()
        .iter()
        .map(|a| base.nearest_atom(a).expect("shared base atom"))
        .collect();
    let route_exact = route.exact_cells();
    let mut fibers: Vec<TransportFiber> = (0..base.len())
        .map(|atom| TransportFiber {
            atom,
            weight: base.weight(atom),
            exact: base.exact_weights().map(|ex| ex[atom].clone()),
            succ: Vec::new(),
            vel: Vec::new(),
        })
        .collect();
    for (cell, &(i, j, w)) in route.cells().iter().enumerate() {
        let a = remap[i];
        let cond = w / base.weight(a);
        let exact = match (&route_exact, base.exact_weights()) {
            (Some(ex), Some(eb)) => Some(ex[cell].2.clone() / eb[a].clone()),
            _ => None,
        };
        fibers[a].succ.push((j, cond, exact));
    }
    for fiber in fibers.iter_mut() {
        let f = element.fiber(fiber.atom);
        for z in 0..f.len() {
            fiber.vel.push((
                z,
                f.weight(z),
                f.exact_weights().map(|ex| ex[z].clone()),
            ));
        }
        if fiber.succ.is_empty() {
            return Err(Error::MarginalMismatch(format!(
                "base atom {} has no route successor",
                fiber.atom
            )));
        }
    }
    Ok(fibers)
}

fn assemble_transport(
    element: &TangentElement,
    route: &Coupling,
    grid: Vec<f64>,
    cells: Vec<TransportCell>,
) -> Result<TransportResult> {
    let d = element.base().dim();
    let steps = grid.len();
    let mut trajectories = Vec::with_capacity(cells.len());
    for (idx, cell) in cells.iter().enumerate() {
        let x = element.base().atom(cell.base);
        let y = route.right().atom(cell.target);
        let vel: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - a).collect();
        let mut positions = Vec::with_capacity(steps);
        let mut velocities = Vec::with_capacity(steps);
        let mut p: Vec<f64> = x.iter().chain(cell.velocity.iter()).copied().collect();
        let v: Vec<f64> = vel.iter().copied().chain(std::iter::repeat_n(0.0, d)).collect();
        for j in 0..steps {
            positions.push(p.clone());
            velocities.push(v.clone());
            if j + 1 < steps {
                let dt = grid[j + 1] - grid[j];
                for k in 0..d {
                    p[k] += v[k] * dt;
                }
                // velocity half stays exactly frozen
            }
        }
        trajectories.push(Trajectory {
            weight: cell.mass,
            positions,
            velocities: Some(velocities),
            label: Some(idx as u64),
            exact_weight: cell.exact.clone(),
        });
    }
    let ensemble = PathEnsemble::new(grid, trajectories)?;

    // arrival element: group the triples by route target
    let nu = route.right();
    let mut fiber_atoms: Vec<Vec<Vec<f64>>> = vec![Vec::new(); nu.len()];
    let mut fiber_weights: Vec<Vec<f64>> = vec![Vec::new(); nu.len()];
    for cell in &cells {
        fiber_atoms[cell.target].push(cell.velocity.clone());
        fiber_weights[cell.target].push(cell.mass / nu.weight(cell.target));
    }
    let fibers = fiber_atoms
        .into_iter()
        .zip(fiber_weights)
        .map(|(za, zw)| {
            if za.is_empty() {
                return Err(Error::MarginalMismatch("route target without mass".into()));
            }
            let s: f64 = zw.iter().sum();
            let zw: Vec<f64> = zw.iter().map(|w| w / s).collect();
            DiscreteMeasure::new(d, za, zw)
        })
        .collect::<Result<Vec<_>>>()?;
    let arrival = TangentElement::new(nu.clone(), fibers, element.p())?;
    Ok(TransportResult {
        source: element.clone(),
        route: route.clone(),
        ensemble,
        arrival,
        triples: cells,
    })
}

/// Classification of the uniqueness of parallel transport.
pub fn classify_uniqueness(element: &TangentElement, route: &Coupling) -> UniquenessClass {
    if element.is_deterministic() {
        return UniquenessClass::UniqueDeterministicTangent;
    }
    let base = element.base();
    let mut succ_count = vec![0usize; base.len()];
    for &(i, _, _) in route.cells() {
        let a = base
            .nearest_atom(route.left().atom(i))
            .unwrap_or(i.min(base.len() - 1));
        succ_count[a] += 1;
    }
    if succ_count.iter().all(|&c| c <= 1) {
        UniquenessClass::UniqueDeterministicFlow
    } else {
        UniquenessClass::PossiblyNonUnique
    }
}

/// Time reversal: mirrors every trajectory; source and arrival swap.
pub fn reverse(tr: &TransportResult) -> TransportResult {
    let grid = tr.ensemble.grid();
    let horizon = *grid.last().unwrap();
    let m = grid.len() - 1;
    let new_grid: Vec<f64> = (0..=m).map(|j| horizon - grid[m - j]).collect();
    let trajectories: Vec<Trajectory> = tr
        .ensemble
        .trajectories()
        .iter()
        .map(|t| {
            let positions: Vec<Vec<f64>> = (0..=m).map(|j| t.positions[m - j].clone()).collect();
            let velocities = t.velocities.as_ref().map(|z| {
                (0..=m)
                    .map(|j| {
                        let src = if j < m { m - 1 - j } else { 0 };
                        z[src].iter().map(|c| -c).collect()
                    })
                    .collect()
            });
            Trajectory {
                weight: t.weight,
                positions,
                velocities,
                label: t.label,
                exact_weight: t.exact_weight.clone(),
            }
        })
        .collect();
    let ensemble = PathEnsemble::new(new_grid, trajectories).expect("reversed ensemble");
    let triples = tr
        .triples
        .iter()
        .map(|c| TransportCell {
            base: c.target,
            target: c.base,
            velocity: c.velocity.clone(),
            mass: c.mass,
            exact: c.exact.clone(),
        })
        .collect();
    TransportResult {
        source: tr.arrival.clone(),
        route: tr.route.transposed(),
        ensemble,
        arrival: tr.source.clone(),
        triples,
    }
}

/// Whether the canonical transports along the endpoint couplings of two
/// ensembles differ in law.
pub fn path_dependence_check(
    element: &TangentElement,
    eta1: &PathEnsemble,
    eta2: &PathEnsemble,
) -> Result<bool> {
    let m1 = eta1.marginal_at(0.0);
    let m2 = eta2.marginal_at(0.0);
    if !m1.measure_eq(element.base(), MERGE_TOL, MARGINAL_TOL)
        || !m2.measure_eq(element.base(), MERGE_TOL, MARGINAL_TOL)
    {
        return Err(Error::MarginalMismatch(
            "both ensembles must start at the element's base".into(),
        ));
    }
    let t1 = transport_along_coupling(element, &eta1.endpoint_coupling()?)?;
    let t2 = transport_along_coupling(element, &eta2.endpoint_coupling()?)?;
    Ok(!transport_law_eq(&t1, &t2, 1e-12))
}

/// Law comparison of two transports through their (start, end, velocity)
/// triples.
pub fn transport_law_eq(a: &TransportResult, b: &TransportResult, tol: f64) -> bool {
    let flat = |tr: &TransportResult| -> Vec<(Vec<f64>, f64)> {
        let mut v: Vec<(Vec<f64>, f64)> = tr
            .triples
            .iter()
            .map(|c| {
                let mut key = tr.source.base().atom(c.base).to_vec();
                key.extend_from_slice(tr.route.right().atom(c.target));
                key.extend_from_slice(&c.velocity);
                (key, c.mass)
            })
            .collect();
        v.sort_by(|x, y| {
            x.0.iter()
                .map(|c| c.to_bits())
                .collect::<Vec<_>>()
                .cmp(&y.0.iter().map(|c| c.to_bits()).collect())
        });
        let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
        for (k, w) in v {
            if let Some(last) = out.last_mut() {
                if last.0.iter().zip(&k).all(|(x, y)| x.to_bits() == y.to_bits()) {
                    last.1 += w;
                    continue;
                }
            }
            out.push((k, w));
        }
        out
    };
    let fa = flat(a);
    let fb = flat(b);
    if fa.len() != fb.len() {
        return false;
    }
    fa.iter().zip(&fb).all(|((ka, wa), (kb, wb))| {
        ka.len() == kb.len()
            && ka.iter().zip(kb).all(|(x, y)| (x - y).abs() <= tol)
            && (wa - wb).abs() <= tol
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::ratio;

    fn wml_element() -> TangentElement {
        TangentElement::new(
            DiscreteMeasure::dirac(vec![0.0]),
            vec![DiscreteMeasure::from_rational(
                1,
                vec![vec![0.0], vec![2.0]],
                vec![ratio(1, 2), ratio(1, 2)],
            )
            .unwrap()],
            2.0,
        )
        .unwrap()
    }

    fn wml_route() -> Coupling {
        Coupling::from_rational(
            DiscreteMeasure::dirac(vec![0.0]),
            DiscreteMeasure::from_rational(
                1,
                vec![vec![1.0], vec![-1.0]],
                vec![ratio(1, 2), ratio(1, 2)],
            )
            .unwrap(),
            vec![(0, 0, ratio(1, 2)), (0, 1, ratio(1, 2))],
        )
        .unwrap()
    }

    #[test]
    fn identity_route_returns_source() {
        let e = wml_element();
        let id = Coupling::identity(e.base());
        let tr = transport_along_coupling(&e, &id).unwrap();
        assert!(tr.arrival().base().measure_eq(e.base(), 1e-12, 1e-12));
        assert!(tr.arrival().fiber(0).measure_eq(e.fiber(0), 1e-12, 1e-12));
        let chk = tr.verify();
        assert!(chk.time0_err <= 1e-12);
        assert_eq!(chk.vel_err, 0.0);
        assert!(chk.route_err <= 1e-10);
        assert_eq!(chk.moment_err, 0.0);
    }

    #[test]
    fn branching_route_gives_product_transport() {
        let e = wml_element();
        let tr = transport_along_coupling(&e, &wml_route()).unwrap();
        assert_eq!(tr.triples().len(), 4);
        for c in tr.triples() {
            assert_eq!(c.exact.clone().unwrap(), ratio(1, 4));
        }
    }

    #[test]
    fn wml_instance_has_exactly_three_laws() {
        let e = wml_element();
        let laws = enumerate_transports(&e, &wml_route(), 16).unwrap();
        assert_eq!(laws.len(), 3);
        for tr in &laws {
            let chk = tr.verify();
            assert!(chk.time0_err <= 1e-12);
            assert_eq!(chk.vel_err, 0.0);
            assert!(chk.route_err <= 1e-10);
        }
    }

    #[test]
    fn deterministic_element_single_transport() {
        let base = DiscreteMeasure::from_rational(
            1,
            vec![vec![0.0], vec![1.0]],
            vec![ratio(1, 2), ratio(1, 2)],
        )
        .unwrap();
        let e = TangentElement::deterministic(base.clone(), |x| vec![x[0] + 1.0], 2.0).unwrap();
        // make fibers exact for the enumeration
        let e = TangentElement::new(
            base,
            e.fibers()
                .iter()
                .map(|f| {
                    DiscreteMeasure::from_rational(1, f.atoms().to_vec(), vec![ratio(1, 1)])
                        .unwrap()
                })
                .collect(),
            2.0,
        )
        .unwrap();
        let laws = enumerate_transports(&e, &wml_route_over(e.base()), 16).unwrap();
        assert_eq!(laws.len(), 1);
        assert_eq!(
            classify_uniqueness(&e, &wml_route_over(e.base())),
            UniquenessClass::UniqueDeterministicTangent
        );
    }

    fn wml_route_over(base: &DiscreteMeasure) -> Coupling {
        // each atom splits half-half onto two shifted targets
        let targets = DiscreteMeasure::from_rational(
            1,
            vec![vec![5.0], vec![6.0]],
            vec![ratio(1, 2), ratio(1, 2)],
        )
        .unwrap();
        Coupling::from_rational(
            base.clone(),
            targets,
            vec![
                (0, 0, ratio(1, 4)),
                (0, 1, ratio(1, 4)),
                (1, 0, ratio(1, 4)),
                (1, 1, ratio(1, 4)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn graph_route_single_transport() {
        let e = wml_element();
        let graph = Coupling::from_rational(
            e.base().clone(),
            DiscreteMeasure::dirac(vec![3.0]),
            vec![(0, 0, ratio(1, 1))],
        )
        .unwrap();
        let laws = enumerate_transports(&e, &graph, 16).unwrap();
        assert_eq!(laws.len(), 1);
        assert_eq!(
            classify_uniqueness(&e, &graph),
            UniquenessClass::UniqueDeterministicFlow
        );
        assert_eq!(
            classify_uniqueness(&e, &wml_route()),
            UniquenessClass::PossiblyNonUnique
        );
    }

    #[test]
    fn dirac_arrival_carries_the_base() {
        // deterministic element x -> x transported onto a single point: the
        // arrival fiber at that point is the whole source distribution
        let mu = DiscreteMeasure::normal_quantiles_1d(200);
        let e = TangentElement::deterministic(mu.clone(), |x| x.to_vec(), 2.0).unwrap();
        let route = Coupling::new(
            mu.clone(),
            DiscreteMeasure::dirac(vec![0.0]),
            (0..mu.len()).map(|i| (i, 0, mu.weight(i))).collect(),
        )
        .unwrap();
        let tr = transport_along_coupling(&e, &route).unwrap();
        assert_eq!(tr.arrival().base().len(), 1);
        let fiber = tr.arrival().fiber(0);
        assert!(fiber.measure_eq(&mu, 1e-12, 1e-10));
        assert!(!tr.arrival().is_deterministic());
    }

    #[test]
    fn velocity_marginal_survives_round_trip() {
        // transport along a coupling and back along its transpose: the
        // velocity marginal never changes
        let e = wml_element();
        let fwd = transport_along_coupling(&e, &wml_route()).unwrap();
        let back = transport_along_coupling(fwd.arrival(), &wml_route().transposed()).unwrap();
        let src = e.velocity_marginal();
        let out = back.arrival().velocity_marginal();
        assert!(out.measure_eq(&src, 1e-12, 1e-12));
    }

    #[test]
    fn reverse_is_involutive_in_law() {
        let e = wml_element();
        let tr = transport_along_coupling(&e, &wml_route()).unwrap();
        let back = reverse(&reverse(&tr));
        assert!(transport_law_eq(&tr, &back, 0.0));
        let rev = reverse(&tr);
        let chk = rev.verify();
        assert!(chk.time0_err <= 1e-12);
        assert_eq!(chk.vel_err, 0.0);
        assert!(chk.route_err <= 1e-10);
    }

    #[test]
    fn reversing_identity_transport_is_identity() {
        let e = wml_element();
        let id = Coupling::identity(e.base());
        let tr = transport_along_coupling(&e, &id).unwrap();
        let rev = reverse(&tr);
        assert!(transport_law_eq(&tr, &rev, 0.0));
    }

    #[test]
    fn path_dependence_detected_on_crossing_flows() {
        let mu = DiscreteMeasure::uniform_grid_1d(51);
        let e = TangentElement::deterministic(mu.clone(), |x| x.to_vec(), 2.0).unwrap();
        let grid = uniform_grid(10);
        let eta1 = PathEnsemble::constant(&mu, grid.clone()).unwrap();
        let cross = Coupling::from_map(&mu, |x| vec![1.0 - x[0]]).unwrap();
        let eta2 = PathEnsemble::from_interpolation(&cross, grid.clone()).unwrap();
        assert!(path_dependence_check(&e, &eta1, &eta2).unwrap());
        // reparametrization with the same endpoints changes nothing
        assert!(!path_dependence_check(&e, &eta1, &eta1).unwrap());
    }
}
