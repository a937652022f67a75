//! Lagrangian curves: weighted families of time-sampled trajectories.
//!
//! A [`PathEnsemble`] represents a curve of measures through its sample
//! paths. When velocity tracks are present, positions follow the
//! left-endpoint rule `x(t_{j+1}) = x(t_j) + z(t_j) (t_{j+1} - t_j)` exactly;
//! the same rule integrates a trajectory and its translation, which is what
//! makes the pairwise difference `X_t - Y_t` constant to the last bit and
//! not merely up to quadrature error.

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, Rational};
use crate::transport::vertices::enumerate_vertices_exact;
use crate::transport::Coupling;

/// Tolerance used when validating externally supplied velocity tracks.
pub const VELOCITY_RULE_TOL: f64 = 1e-12;

/// One weighted sample path, optionally with a velocity track and a
/// randomization label.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    #[serde(rename = "w")]
    pub weight: f64,
    /// positions, one point per grid time
    #[serde(rename = "x")]
    pub positions: Vec<Vec<f64>>,
    /// velocities, one sample per grid time (the final sample repeats the
    /// previous one; integration only reads samples 0..M-1)
    #[serde(rename = "z", skip_serializing_if = "Option::is_none", default)]
    pub velocities: Option<Vec<Vec<f64>>>,
    #[serde(rename = "k", skip_serializing_if = "Option::is_none", default)]
    pub label: Option<u64>,
    #[serde(skip)]
    pub exact_weight: Option<Rational>,
}

/// A weighted collection of time-sampled trajectories.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawEnsemble")]
pub struct PathEnsemble {
    #[serde(skip)]
    dim: usize,
    grid: Vec<f64>,
    trajectories: Vec<Trajectory>,
}

#[derive(Deserialize)]
struct RawEnsemble {
    grid: Vec<f64>,
    trajectories: Vec<Trajectory>,
}

impl TryFrom<RawEnsemble> for PathEnsemble {
    type Error = Error;
    fn try_from(raw: RawEnsemble) -> Result<Self> {
        PathEnsemble::new(raw.grid, raw.trajectories)
    }
}

/// Uniform grid `t_j = j/m` on `[0,1]`.
pub fn uniform_grid(m: usize) -> Vec<f64> {
    assert!(m >= 1);
    (0..=m).map(|j| j as f64 / m as f64).collect()
}

/// Uniform grid on `[0, horizon]` with `m` steps.
pub fn uniform_grid_to(horizon: f64, m: usize) -> Vec<f64> {
    assert!(m >= 1 && horizon > 0.0);
    (0..=m).map(|j| horizon * j as f64 / m as f64).collect()
}

impl PathEnsemble {
    pub fn new(grid: Vec<f64>, trajectories: Vec<Trajectory>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::InvalidInput("grid needs at least two times".into()));
        }
        if grid[0] != 0.0 {
            return Err(Error::InvalidInput("grid must start at 0".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("grid must be strictly increasing".into()));
        }
        if trajectories.is_empty() {
            return Err(Error::InvalidInput("empty ensemble".into()));
        }
        let dim = trajectories[0].positions.first().map_or(0, |p| p.len());
        if dim == 0 {
            return Err(Error::InvalidInput("zero-dimensional trajectory".into()));
        }
        let mut total = 0.0;
        for (ti, t) in trajectories.iter().enumerate() {
            if t.weight < 0.0 || !t.weight.is_finite() {
                return Err(Error::InvalidInput(format!("trajectory {ti} weight {}", t.weight)));
            }
            total += t.weight;
            if t.positions.len() != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "trajectory {ti}: {} samples for {} grid times",
                    t.positions.len(),
                    grid.len()
                )));
            }
            for p in &t.positions {
                if p.len() != dim {
                    return Err(Error::DimensionMismatch(p.len(), dim));
                }
                if p.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidInput(format!("trajectory {ti} has a non-finite position")));
                }
            }
            if let Some(z) = &t.velocities {
                if z.len() != grid.len() {
                    return Err(Error::GridMismatch(format!(
                        "trajectory {ti}: {} velocity samples for {} grid times",
                        z.len(),
                        grid.len()
                    )));
                }
                for (j, dt) in grid.windows(2).map(|w| w[1] - w[0]).enumerate() {
                    for k in 0..dim {
                        let step = t.positions[j][k] + z[j][k] * dt;
                        let err = (t.positions[j + 1][k] - step).abs();
                        let scale = 1.0 + t.positions[j][k].abs() + z[j][k].abs();
                        if err > VELOCITY_RULE_TOL * scale {
                            return Err(Error::InvalidInput(format!(
                                "trajectory {ti} violates the left-endpoint rule at step {j} (err {err:.3e})"
                            )));
                        }
                    }
                }
            }
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!("trajectory weights sum to {total}")));
        }
        Ok(Self { dim, grid, trajectories })
    }

    /// Ensemble of motionless trajectories above a measure.
    pub fn constant(m0: &DiscreteMeasure, grid: Vec<f64>) -> Result<Self> {
        let steps = grid.len();
        let trajectories = (0..m0.len())
            .map(|i| Trajectory {
                weight: m0.weight(i),
                positions: vec![m0.atom(i).to_vec(); steps],
                velocities: Some(vec![vec![0.0; m0.dim()]; steps]),
                label: Some(i as u64),
                exact_weight: m0.exact_weights().map(|ex| ex[i].clone()),
            })
            .collect();
        Self::new(grid, trajectories)
    }

    /// One trajectory per atom of `m0`, integrated by left-endpoint Euler:
    /// `x(t_{j+1}) = x(t_j) + field(t_j, x(t_j)) dt_j` exactly.
    pub fn from_velocity_field<F: Fn(f64, &[f64]) -> Vec<f64>>(
        m0: &DiscreteMeasure,
        field: F,
        grid: Vec<f64>,
    ) -> Result<Self> {
        let mut trajectories = Vec::with_capacity(m0.len());
        for i in 0..m0.len() {
            let mut positions = Vec::with_capacity(grid.len());
            let mut velocities = Vec::with_capacity(grid.len());
            let mut x = m0.atom(i).to_vec();
            for j in 0..grid.len() {
                let z = field(grid[j], &x);
                if z.iter().any(|c| !c.is_finite()) {
                    return Err(Error::NonFiniteField(format!("t={}, x={x:?}", grid[j])));
                }
                positions.push(x.clone());
                velocities.push(z.clone());
                if j + 1 < grid.len() {
                    let dt = grid[j + 1] - grid[j];
                    for k in 0..x.len() {
                        x[k] += z[k] * dt;
                    }
                }
            }
            trajectories.push(Trajectory {
                weight: m0.weight(i),
                positions,
                velocities: Some(velocities),
                label: Some(i as u64),
                exact_weight: m0.exact_weights().map(|ex| ex[i].clone()),
            });
        }
        Self::new(grid, trajectories)
    }

    /// Straight-line interpolation ensemble of a coupling: one trajectory per
    /// cell, moving from the left atom to the right atom at constant speed.
    pub fn from_interpolation(route: &Coupling, grid: Vec<f64>) -> Result<Self> {
        let horizon = *grid.last().unwrap();
        let exact = route.exact_cells();
        let mut trajectories = Vec::with_capacity(route.cells().len());
        for (idx, &(i, j, w)) in route.cells().iter().enumerate() {
            let x0 = route.left().atom(i);
            let y = route.right().atom(j);
            let vel: Vec<f64> = x0
                .iter()
                .zip(y)
                .map(|(a, b)| (b - a) / horizon)
                .collect();
            let mut positions = Vec::with_capacity(grid.len());
            let mut x = x0.to_vec();
            for g in 0..grid.len() {
                positions.push(x.clone());
                if g + 1 < grid.len() {
                    let dt = grid[g + 1] - grid[g];
                    for k in 0..x.len() {
                        x[k] += vel[k] * dt;
                    }
                }
            }
            trajectories.push(Trajectory {
                weight: w,
                positions,
                velocities: Some(vec![vel; grid.len()]),
                label: Some(idx as u64),
                exact_weight: exact.as_ref().map(|ex| ex[idx].2.clone()),
            });
        }
        Self::new(grid, trajectories)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn has_velocities(&self) -> bool {
        self.trajectories.iter().all(|t| t.velocities.is_some())
    }

    pub fn has_exact_weights(&self) -> bool {
        self.trajectories.iter().all(|t| t.exact_weight.is_some())
    }

    /// Kinetic energy `sum_traj w sum_j |z(t_j)|^2 dt_j`.
    pub fn kinetic_energy(&self) -> Result<f64> {
        let mut total = 0.0;
        for t in &self.trajectories {
            let z = t
                .velocities
                .as_ref()
                .ok_or_else(|| Error::MissingVelocities("kinetic energy".into()))?;
            let mut acc = 0.0;
            for j in 0..self.steps() {
                let dt = self.grid[j + 1] - self.grid[j];
                acc += z[j].iter().map(|c| c * c).sum::<f64>() * dt;
            }
            total += t.weight * acc;
        }
        Ok(total)
    }

    /// Position of trajectory `ti` at time `t` (linear between grid samples).
    fn position_at(&self, ti: usize, t: f64) -> Vec<f64> {
        let traj = &self.trajectories[ti];
        let grid = &self.grid;
        if t <= grid[0] {
            return traj.positions[0].clone();
        }
        if t >= *grid.last().unwrap() {
            return traj.positions.last().unwrap().clone();
        }
        let j = match grid.binary_search_by(|g| g.partial_cmp(&t).unwrap()) {
            Ok(j) => return traj.positions[j].clone(),
            Err(j) => j - 1,
        };
        let s = (t - grid[j]) / (grid[j + 1] - grid[j]);
        traj.positions[j]
            .iter()
            .zip(&traj.positions[j + 1])
            .map(|(a, b)| a + s * (b - a))
            .collect()
    }

    /// Pushforward of the ensemble at time `t`, merged.
    pub fn marginal_at(&self, t: f64) -> DiscreteMeasure {
        let atoms: Vec<Vec<f64>> = (0..self.trajectories.len())
            .map(|ti| self.position_at(ti, t))
            .collect();
        let weights: Vec<f64> = self.trajectories.iter().map(|tr| tr.weight).collect();
        if self.has_exact_weights() && self.grid.contains(&t) {
            let exact = self
                .trajectories
                .iter()
                .map(|tr| tr.exact_weight.clone().unwrap())
                .collect();
            if let Ok(m) = DiscreteMeasure::from_rational(self.dim, atoms.clone(), exact) {
                return m;
            }
        }
        DiscreteMeasure::new(self.dim, atoms, weights).expect("valid marginal")
    }

    /// The coupling `(e_0, e_1)# eta` between the endpoint marginals.
    pub fn endpoint_coupling(&self) -> Result<Coupling> {
        let horizon = *self.grid.last().unwrap();
        let m0 = self.marginal_at(0.0);
        let m1 = self.marginal_at(horizon);
        let mut cells: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
        for tr in &self.trajectories {
            let i = m0.nearest_atom(&tr.positions[0]).expect("merged start atom");
            let j = m1
                .nearest_atom(tr.positions.last().unwrap())
                .expect("merged end atom");
            *cells.entry((i, j)).or_insert(0.0) += tr.weight;
        }
        Coupling::new(m0, m1, cells.into_iter().map(|((i, j), w)| (i, j, w)).collect())
    }

    /// Weight-averaged velocity per (grid time, merged position atom).
    pub fn eulerian_field(&self) -> Result<EulerianField> {
        if !self.has_velocities() {
            return Err(Error::MissingVelocities("eulerian reduction".into()));
        }
        let mut per_time = Vec::with_capacity(self.grid.len());
        for j in 0..self.grid.len() {
            let atoms: Vec<Vec<f64>> = self
                .trajectories
                .iter()
                .map(|tr| tr.positions[j].clone())
                .collect();
            let weights: Vec<f64> = self.trajectories.iter().map(|tr| tr.weight).collect();
            let support = DiscreteMeasure::new(self.dim, atoms, weights)?;
            let mut sums = vec![vec![0.0; self.dim]; support.len()];
            let mut mass = vec![0.0; support.len()];
            for tr in &self.trajectories {
                let a = support.nearest_atom(&tr.positions[j]).expect("merged atom");
                let z = &tr.velocities.as_ref().unwrap()[j];
                for k in 0..self.dim {
                    sums[a][k] += tr.weight * z[k];
                }
                mass[a] += tr.weight;
            }
            for (s, m) in sums.iter_mut().zip(&mass) {
                for c in s.iter_mut() {
                    *c /= m;
                }
            }
            per_time.push((support, sums));
        }
        Ok(EulerianField { grid: self.grid.clone(), per_time })
    }

    /// Translates the ensemble along an initial coupling: every trajectory is
    /// glued with the coupling fiber over its start atom (conditionally
    /// independent product over the randomization), and each glued pair
    /// integrates the partner path with the same velocity samples, so the
    /// pairwise difference stays constant.
    ///
    /// Returns the coupling curve on `R^{2d}` and the translated ensemble.
    pub fn translate(&self, gamma0: &Coupling) -> Result<(PathEnsemble, PathEnsemble)> {
        let glued = self.glue_with_initial(gamma0, None)?;
        Ok(self.build_translation(gamma0, &glued))
    }

    /// All translations whose initial gluing is a per-fiber vertex coupling,
    /// plus the canonical product, deduplicated by law of the translated
    /// ensemble.
    pub fn enumerate_translations(
        &self,
        gamma0: &Coupling,
        limit: usize,
    ) -> Result<Vec<PathEnsemble>> {
        if !self.has_exact_weights() {
            return Err(Error::NonRationalWeights("trajectory weights".into()));
        }
        let gamma_exact = gamma0
            .exact_cells()
            .ok_or_else(|| Error::NonRationalWeights("initial coupling".into()))?;
        let m0 = self.marginal_at(0.0);
        if !gamma0.left_matches(&m0) {
            return Err(Error::MarginalMismatch(
                "initial coupling must start at the ensemble's time-0 marginal".into(),
            ));
        }
        let fibers = self.start_fibers(&m0, gamma0)?;

        // per-fiber exact vertex couplings between trajectory mass and
        // coupling successors
        let mut per_fiber: Vec<Vec<Vec<(usize, usize, Rational)>>> = Vec::new();
        let mut combos: usize = 1;
        for fiber in &fibers {
            let e_base = m0.exact_weights().unwrap()[fiber.atom].clone();
            let lefts: Vec<Rational> = fiber
                .trajs
                .iter()
                .map(|&ti| self.trajectories[ti].exact_weight.clone().unwrap() / e_base.clone())
                .collect();
            let rights: Vec<Rational> = fiber
                .succ
                .iter()
                .map(|&(cell, _)| gamma_exact[cell].2.clone() / e_base.clone())
                .collect();
            if lefts.len() * rights.len() > 20 {
                return Err(Error::TooLarge(format!(
                    "fiber polytope with {} cells",
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

        let mut results: Vec<PathEnsemble> = Vec::new();
        let push_unique = |ens: PathEnsemble, results: &mut Vec<PathEnsemble>| {
            if !results.iter().any(|r| r.law_eq(&ens, 1e-12)) {
                results.push(ens);
            }
        };

        // canonical product gluing first
        let glued = self.glue_with_initial(gamma0, None)?;
        let (_, canonical) = self.build_translation(gamma0, &glued);
        push_unique(canonical, &mut results);

        let mut index = vec![0usize; per_fiber.len()];
        loop {
            let mut cells: Vec<GluedCell> = Vec::new();
            for (f, fiber) in fibers.iter().enumerate() {
                let e_base = m0.exact_weights().unwrap()[fiber.atom].clone();
                for (li, ri, w) in &per_fiber[f][index[f]] {
                    let (_, succ_j) = fiber.succ[*ri];
                    cells.push(GluedCell {
                        traj: fiber.trajs[*li],
                        target: succ_j,
                        weight: (w.clone() * e_base.clone()).to_f64().unwrap(),
                        exact: Some(w.clone() * e_base.clone()),
                    });
                }
            }
            let (_, translated) = self.build_translation(gamma0, &cells);
            push_unique(translated, &mut results);
            if results.len() > limit {
                return Err(Error::TooLarge(format!("more than {limit} translations")));
            }
            // odometer
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

    fn start_fibers(&self, m0: &DiscreteMeasure, gamma0: &Coupling) -> Result<Vec<StartFiber>> {
        let remap: Vec<usize> = gamma0
            .left()
            .atoms()
            .iter()
            .map(|a| m0.nearest_atom(a).expect("shared start atom"))
            .collect();
        let mut fibers: Vec<StartFiber> = (0..m0.len())
            .map(|atom| StartFiber { atom, trajs: Vec::new(), succ: Vec::new() })
            .collect();
        for (ti, tr) in self.trajectories.iter().enumerate() {
            let a = m0.nearest_atom(&tr.positions[0]).expect("merged start atom");
            fibers[a].trajs.push(ti);
        }
        for (cell, &(i, j, _)) in gamma0.cells().iter().enumerate() {
            fibers[remap[i]].succ.push((cell, j));
        }
        if fibers.iter().any(|f| f.trajs.is_empty() || f.succ.is_empty()) {
            return Err(Error::MarginalMismatch("start atom without mass".into()));
        }
        Ok(fibers)
    }

    /// Canonical (conditionally independent) gluing of trajectories with the
    /// initial coupling, or an externally chosen set of glued cells.
    fn glue_with_initial(
        &self,
        gamma0: &Coupling,
        _chosen: Option<()>,
    ) -> Result<Vec<GluedCell>> {
        let m0 = self.marginal_at(0.0);
        if !gamma0.left_matches(&m0) {
            return Err(Error::MarginalMismatch(
                "initial coupling must start at the ensemble's time-0 marginal".into(),
            ));
        }
        if !self.has_velocities() {
            return Err(Error::MissingVelocities("translation".into()));
        }
        let fibers = self.start_fibers(&m0, gamma0)?;
        let gamma_exact = gamma0.exact_cells();
        let all_exact = self.has_exact_weights() && gamma_exact.is_some() && m0.has_exact_weights();
        let mut cells = Vec::new();
        for fiber in &fibers {
            let w_base = m0.weight(fiber.atom);
            for &ti in &fiber.trajs {
                for &(cell, j) in &fiber.succ {
                    let w = self.trajectories[ti].weight * gamma0.cells()[cell].2 / w_base;
                    let exact = if all_exact {
                        let e = self.trajectories[ti].exact_weight.clone().unwrap()
                            * gamma_exact.as_ref().unwrap()[cell].2.clone()
                            / m0.exact_weights().unwrap()[fiber.atom].clone();
                        Some(e)
                    } else {
                        None
                    };
                    cells.push(GluedCell { traj: ti, target: j, weight: w, exact });
                }
            }
        }
        Ok(cells)
    }

    fn build_translation(
        &self,
        gamma0: &Coupling,
        cells: &[GluedCell],
    ) -> (PathEnsemble, PathEnsemble) {
        let steps = self.grid.len();
        let mut pair_trajs = Vec::with_capacity(cells.len());
        let mut translated_trajs = Vec::with_capacity(cells.len());
        for (idx, cell) in cells.iter().enumerate() {
            let tr = &self.trajectories[cell.traj];
            let z = tr.velocities.as_ref().expect("velocities checked");
            let y0 = gamma0.right().atom(cell.target);
            let mut ypos = Vec::with_capacity(steps);
            let mut y = y0.to_vec();
            for j in 0..steps {
                ypos.push(y.clone());
                if j + 1 < steps {
                    let dt = self.grid[j + 1] - self.grid[j];
                    for k in 0..self.dim {
                        y[k] += z[j][k] * dt;
                    }
                }
            }
            let mut pair_pos = Vec::with_capacity(steps);
            let mut pair_vel = Vec::with_capacity(steps);
            for j in 0..steps {
                let mut p = tr.positions[j].clone();
                p.extend_from_slice(&ypos[j]);
                pair_pos.push(p);
                let mut v = z[j].clone();
                v.extend_from_slice(&z[j]);
                pair_vel.push(v);
            }
            pair_trajs.push(Trajectory {
                weight: cell.weight,
                positions: pair_pos,
                velocities: Some(pair_vel),
                label: Some(idx as u64),
                exact_weight: cell.exact.clone(),
            });
            translated_trajs.push(Trajectory {
                weight: cell.weight,
                positions: ypos,
                velocities: Some(z.clone()),
                label: Some(idx as u64),
                exact_weight: cell.exact.clone(),
            });
        }
        let pair = PathEnsemble::new(self.grid.clone(), pair_trajs).expect("valid coupling curve");
        let translated =
            PathEnsemble::new(self.grid.clone(), translated_trajs).expect("valid translation");
        (pair, translated)
    }

    /// Law comparison: trajectories sorted by path, equal weights summed.
    /// With `tol = 0` the comparison is bitwise on positions and exact on
    /// rational weights when both sides carry them.
    pub fn law_eq(&self, other: &Self, tol: f64) -> bool {
        if self.dim != other.dim || self.grid.len() != other.grid.len() {
            return false;
        }
        if self
            .grid
            .iter()
            .zip(&other.grid)
            .any(|(a, b)| (a - b).abs() > tol.max(1e-15))
        {
            return false;
        }
        let a = self.collapsed_law();
        let b = other.collapsed_law();
        if a.len() != b.len() {
            return false;
        }
        for ((pa, wa, ea), (pb, wb, eb)) in a.iter().zip(&b) {
            let close = pa
                .iter()
                .zip(pb)
                .all(|(x, y)| x.iter().zip(y).all(|(c, d)| (c - d).abs() <= tol));
            if !close {
                return false;
            }
            match (ea, eb) {
                (Some(ea), Some(eb)) if tol == 0.0 => {
                    if ea != eb {
                        return false;
                    }
                }
                _ => {
                    if (wa - wb).abs() > tol.max(1e-12) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn collapsed_law(&self) -> Vec<(Vec<Vec<f64>>, f64, Option<Rational>)> {
        let mut items: Vec<(Vec<Vec<f64>>, f64, Option<Rational>)> = self
            .trajectories
            .iter()
            .map(|t| (t.positions.clone(), t.weight, t.exact_weight.clone()))
            .collect();
        items.sort_by(|a, b| {
            let ka: Vec<u64> = a.0.iter().flatten().map(|c| c.to_bits()).collect();
            let kb: Vec<u64> = b.0.iter().flatten().map(|c| c.to_bits()).collect();
            ka.cmp(&kb)
        });
        let mut out: Vec<(Vec<Vec<f64>>, f64, Option<Rational>)> = Vec::new();
        for (p, w, e) in items {
            if let Some(last) = out.last_mut() {
                let same = last.0.len() == p.len()
                    && last
                        .0
                        .iter()
                        .flatten()
                        .zip(p.iter().flatten())
                        .all(|(a, b)| a.to_bits() == b.to_bits());
                if same {
                    last.1 += w;
                    last.2 = match (last.2.take(), e) {
                        (Some(x), Some(y)) => Some(x + y),
                        _ => None,
                    };
                    continue;
                }
            }
            out.push((p, w, e));
        }
        out
    }

    /// Largest deviation of the pairwise difference from its initial value,
    /// over a coupling-curve ensemble on `R^{2d}`.
    pub fn constant_difference_deviation(&self) -> f64 {
        assert!(self.dim.is_multiple_of(2), "expects a coupling curve on R^{{2d}}");
        let d = self.dim / 2;
        let mut worst = 0.0_f64;
        for tr in &self.trajectories {
            let d0: Vec<f64> = (0..d)
                .map(|k| tr.positions[0][k] - tr.positions[0][d + k])
                .collect();
            for p in &tr.positions {
                for k in 0..d {
                    worst = worst.max(((p[k] - p[d + k]) - d0[k]).abs());
                }
            }
        }
        worst
    }

    /// CSV export: one block per trajectory with time and coordinates.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trajectory,t");
        for k in 1..=self.dim {
            out.push_str(&format!(",x_{k}"));
        }
        out.push_str(",w\n");
        for (ti, tr) in self.trajectories.iter().enumerate() {
            for (j, t) in self.grid.iter().enumerate() {
                out.push_str(&format!("{ti},{t:.16e}"));
                for c in &tr.positions[j] {
                    out.push_str(&format!(",{c:.16e}"));
                }
                out.push_str(&format!(",{:.16e}\n", tr.weight));
            }
        }
        out
    }
}

struct StartFiber {
    atom: usize,
    trajs: Vec<usize>,
    /// (cell index into gamma0.cells(), right-atom index)
    succ: Vec<(usize, usize)>,
}

struct GluedCell {
    traj: usize,
    target: usize,
    weight: f64,
    exact: Option<Rational>,
}

/// Eulerian reduction of an ensemble: averaged velocities per time and atom.
pub struct EulerianField {
    grid: Vec<f64>,
    per_time: Vec<(DiscreteMeasure, Vec<Vec<f64>>)>,
}

impl EulerianField {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Support measure at grid index `j`.
    pub fn support_at(&self, j: usize) -> &DiscreteMeasure {
        &self.per_time[j].0
    }

    /// Averaged velocity at grid index `j` and position `x`, if `x` is an
    /// atom of the time-`j` support.
    pub fn velocity_at(&self, j: usize, x: &[f64]) -> Option<&[f64]> {
        let (support, sums) = &self.per_time[j];
        support.nearest_atom(x).map(|a| sums[a].as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::ratio;
    use approx::assert_abs_diff_eq;

    fn split_measure() -> DiscreteMeasure {
        DiscreteMeasure::from_rational(
            1,
            vec![vec![-4.0], vec![4.0]],
            vec![ratio(1, 2), ratio(1, 2)],
        )
        .unwrap()
    }

    #[test]
    fn constant_ensemble_marginals() {
        let m = split_measure();
        let e = PathEnsemble::constant(&m, uniform_grid(10)).unwrap();
        for t in [0.0, 0.35, 1.0] {
            assert!(e.marginal_at(t).measure_eq(&m, 1e-12, 1e-12));
        }
    }

    #[test]
    fn euler_rule_holds_exactly() {
        let m = split_measure();
        let e = PathEnsemble::from_velocity_field(
            &m,
            |_, x| vec![if x[0] >= 0.0 { -3.0 } else { 3.0 }],
            uniform_grid(10),
        )
        .unwrap();
        for tr in e.trajectories() {
            let z = tr.velocities.as_ref().unwrap();
            for j in 0..e.steps() {
                let dt = e.grid()[j + 1] - e.grid()[j];
                let step = tr.positions[j][0] + z[j][0] * dt;
                assert_eq!(tr.positions[j + 1][0], step);
            }
        }
    }

    #[test]
    fn inward_motion_matches_closed_form() {
        // two atoms at -4 and 4 moving inward at speed 3
        let m = split_measure();
        let e = PathEnsemble::from_velocity_field(
            &m,
            |_, x| vec![-3.0 * x[0].signum()],
            uniform_grid(10),
        )
        .unwrap();
        let mid = e.marginal_at(0.5);
        // -4 + 1.5 = -2.5 and 4 - 1.5 = 2.5
        assert!(mid.nearest_atom(&[-2.5]).is_some());
        assert!(mid.nearest_atom(&[2.5]).is_some());
    }

    #[test]
    fn interpolation_hits_right_marginal() {
        let m = split_measure();
        let target = DiscreteMeasure::new(1, vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let c = crate::transport::solve_ot(&m, &target, 2.0).unwrap().0;
        let e = PathEnsemble::from_interpolation(&c, uniform_grid(8)).unwrap();
        assert!(e.marginal_at(1.0).measure_eq(&target, 1e-9, 1e-10));
    }

    #[test]
    fn eulerian_field_averages_colliding_branches() {
        // two branches through the origin with opposite speeds
        let trajs = vec![
            Trajectory {
                weight: 0.5,
                positions: uniform_grid(4).iter().map(|t| vec![*t]).collect(),
                velocities: Some(vec![vec![1.0]; 5]),
                label: Some(0),
                exact_weight: Some(ratio(1, 2)),
            },
            Trajectory {
                weight: 0.5,
                positions: uniform_grid(4).iter().map(|t| vec![-*t]).collect(),
                velocities: Some(vec![vec![-1.0]; 5]),
                label: Some(1),
                exact_weight: Some(ratio(1, 2)),
            },
        ];
        let e = PathEnsemble::new(uniform_grid(4), trajs).unwrap();
        let f = e.eulerian_field().unwrap();
        // at t=0 both sit at 0: average velocity is 0
        assert_abs_diff_eq!(f.velocity_at(0, &[0.0]).unwrap()[0], 0.0);
        // later they separate and keep their own speeds
        assert_abs_diff_eq!(f.velocity_at(2, &[0.5]).unwrap()[0], 1.0);
        assert_abs_diff_eq!(f.velocity_at(2, &[-0.5]).unwrap()[0], -1.0);
    }

    #[test]
    fn eulerian_reduction_recovers_smooth_fields() {
        // no collisions: the averaged velocity at each (time, atom) pair is
        // the field value itself
        let m = DiscreteMeasure::new(
            1,
            vec![vec![-1.0], vec![0.5], vec![2.0]],
            vec![0.25, 0.25, 0.5],
        )
        .unwrap();
        let field = |t: f64, x: &[f64]| vec![0.3 * x[0] + t];
        let e = PathEnsemble::from_velocity_field(&m, field, uniform_grid(6)).unwrap();
        let f = e.eulerian_field().unwrap();
        for (j, &t) in e.grid().iter().enumerate() {
            for tr in e.trajectories() {
                let got = f.velocity_at(j, &tr.positions[j]).unwrap();
                let want = field(t, &tr.positions[j]);
                assert_abs_diff_eq!(got[0], want[0], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn identity_translation_returns_source() {
        let m = split_measure();
        let e = PathEnsemble::from_velocity_field(
            &m,
            |_, x| vec![-3.0 * x[0].signum()],
            uniform_grid(10),
        )
        .unwrap();
        let id = Coupling::identity(&e.marginal_at(0.0));
        let (_, translated) = e.translate(&id).unwrap();
        assert!(translated.law_eq(&e, 0.0));
    }

    #[test]
    fn translation_keeps_difference_constant() {
        let m = split_measure();
        let e = PathEnsemble::from_velocity_field(
            &m,
            |_, x| vec![-3.0 * x[0].signum()],
            uniform_grid(10),
        )
        .unwrap();
        let m0 = e.marginal_at(0.0);
        let tgt = DiscreteMeasure::from_rational(
            1,
            vec![vec![-1.0], vec![1.0]],
            vec![ratio(1, 2), ratio(1, 2)],
        )
        .unwrap();
        let gamma = Coupling::from_rational(
            m0,
            tgt,
            vec![(0, 0, ratio(1, 2)), (1, 1, ratio(1, 2))],
        )
        .unwrap();
        let (pair, translated) = e.translate(&gamma).unwrap();
        assert!(pair.constant_difference_deviation() <= 1e-12);
        assert_eq!(translated.kinetic_energy().unwrap(), e.kinetic_energy().unwrap());
    }

    #[test]
    fn dirac_translation_shadows_the_curve() {
        let m = DiscreteMeasure::dirac(vec![1.0]);
        let e =
            PathEnsemble::from_velocity_field(&m, |t, _| vec![t * t + 1.0], uniform_grid(6))
                .unwrap();
        let gamma = Coupling::from_rational(
            e.marginal_at(0.0),
            DiscreteMeasure::dirac(vec![5.0]),
            vec![(0, 0, ratio(1, 1))],
        )
        .unwrap();
        let (pair, translated) = e.translate(&gamma).unwrap();
        assert!(pair.constant_difference_deviation() <= 1e-12);
        // y_t - x_t = 4 for every grid time
        for j in 0..=6 {
            let t = translated.grid()[j];
            let x = e.trajectories()[0].positions[j][0];
            let y = translated.trajectories()[0].positions[j][0];
            assert_abs_diff_eq!(y - x, 4.0, epsilon = 1e-13);
            let _ = t;
        }
    }

    #[test]
    fn split_instance_has_three_translations() {
        // two labeled branches out of a Dirac, coupled to a symmetric split
        let grid = uniform_grid(10);
        let trajs: Vec<Trajectory> = [1.0_f64, -1.0]
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let mut x = 0.0;
                let mut positions = Vec::new();
                for j in 0..grid.len() {
                    positions.push(vec![x]);
                    if j + 1 < grid.len() {
                        x += v * (grid[j + 1] - grid[j]);
                    }
                }
                Trajectory {
                    weight: 0.5,
                    positions,
                    velocities: Some(vec![vec![v]; grid.len()]),
                    label: Some(k as u64),
                    exact_weight: Some(ratio(1, 2)),
                }
            })
            .collect();
        let e = PathEnsemble::new(grid, trajs).unwrap();
        let tgt = DiscreteMeasure::from_rational(
            1,
            vec![vec![-2.0], vec![2.0]],
            vec![ratio(1, 2), ratio(1, 2)],
        )
        .unwrap();
        let gamma = Coupling::from_rational(
            e.marginal_at(0.0),
            tgt,
            vec![(0, 0, ratio(1, 2)), (0, 1, ratio(1, 2))],
        )
        .unwrap();
        let laws = e.enumerate_translations(&gamma, 16).unwrap();
        assert_eq!(laws.len(), 3);
    }

    #[test]
    fn graph_coupling_and_map_induced_give_single_law() {
        let m = split_measure();
        let e = PathEnsemble::from_velocity_field(&m, |_, x| vec![0.5 * x[0]], uniform_grid(5))
            .unwrap();
        let gamma = {
            let m0 = e.marginal_at(0.0);
            let shifted = m0.translated(&[1.0]);
            Coupling::from_rational(
                m0,
                shifted,
                vec![(0, 0, ratio(1, 2)), (1, 1, ratio(1, 2))],
            )
            .unwrap()
        };
        let laws = e.enumerate_translations(&gamma, 16).unwrap();
        assert_eq!(laws.len(), 1);
    }

    #[test]
    fn velocity_rule_violations_rejected() {
        let grid = uniform_grid(2);
        let bad = Trajectory {
            weight: 1.0,
            positions: vec![vec![0.0], vec![0.9], vec![1.0]],
            velocities: Some(vec![vec![1.0]; 3]),
            label: None,
            exact_weight: None,
        };
        assert!(matches!(
            PathEnsemble::new(grid, vec![bad]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn serde_round_trip() {
        let m = split_measure();
        let e = PathEnsemble::from_velocity_field(&m, |_, x| vec![-x[0]], uniform_grid(4))
            .unwrap();
        let s = serde_json::to_string(&e).unwrap();
        let back: PathEnsemble = serde_json::from_str(&s).unwrap();
        assert!(e.law_eq(&back, 0.0) || e.law_eq(&back, 1e-15));
    }
}
