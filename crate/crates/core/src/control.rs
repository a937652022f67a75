//! Particle-level mean-field optimal control.
//!
//! Value functions are approximated by direct trajectory optimization:
//! multi-start gradient descent over per-group velocity sequences under the
//! left-endpoint integration rule. Returned values are upper bounds on the
//! true infimum (best candidate found within the budget).
//!
//! Two control modes differ only in how velocity variables are shared:
//! deterministic-constrained ties all particles that coincide at time zero
//! to one velocity sequence (velocities are a function of the position
//! there), while randomized gives every branch its own sequence. Every
//! deterministic candidate is also evaluated inside a randomized run, so at
//! equal budget the randomized value never exceeds the constrained one.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::curves::{PathEnsemble, Trajectory};
use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, Rational};
use crate::rngutil::rng_at;
use crate::transport::{solve_ot, Coupling};

type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type ControlMap = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Mean-field term entering the running cost.
#[derive(Clone)]
pub enum MeanFieldTerm {
    /// `F(m) = int f dm` with a Lipschitz integrand and its gradient.
    Integral { f: ScalarField, grad_f: VectorField, lipschitz: f64 },
    /// `F(m) = W_2(m, reference)`.
    W2ToRef { reference: DiscreteMeasure },
}

/// Terminal cost.
#[derive(Clone)]
pub enum TerminalCost {
    Zero,
    /// `G(m) = int f dm`.
    Integral { f: ScalarField },
    /// `G(m) = min(cap, W_2^2(m, reference))`.
    CappedSquaredW2 { cap: f64, reference: DiscreteMeasure },
    Custom { g: MeasureFunctional },
}

type MeasureFunctional = Arc<dyn Fn(&DiscreteMeasure) -> f64 + Send + Sync>;

/// Constant of the value-function regularity hypotheses: the terminal cost
/// is bounded by `c` and `c`-Lipschitz in the transport distance, and the
/// running cost dominates `|z|^2 / c - c`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TheoremConstants {
    pub c: f64,
}

/// A control problem on `[0, horizon]` with composite running cost
/// `kinetic_coeff |z|^2 + V(x) + mean_field_coeff F(m)` and terminal cost.
#[derive(Clone)]
pub struct ControlProblem {
    pub horizon: f64,
    pub grid: Vec<f64>,
    pub kinetic_coeff: f64,
    pub potential: Option<(ScalarField, VectorField)>,
    pub mean_field_coeff: f64,
    pub mean_field: Option<MeanFieldTerm>,
    pub terminal: TerminalCost,
    /// optional control-to-velocity hook `z = beta(x, a)`; identity when
    /// absent (the optimizer then uses analytic kinetic gradients)
    pub beta: Option<ControlMap>,
    pub constants: TheoremConstants,
}

impl ControlProblem {
    /// Kinetic-only problem skeleton on a uniform grid.
    pub fn kinetic(horizon: f64, steps: usize, kinetic_coeff: f64, c: f64) -> Self {
        Self {
            horizon,
            grid: crate::curves::uniform_grid_to(horizon, steps),
            kinetic_coeff,
            potential: None,
            mean_field_coeff: 0.0,
            mean_field: None,
            terminal: TerminalCost::Zero,
            beta: None,
            constants: TheoremConstants { c },
        }
    }

    /// Pointwise running cost `L(s, x, z, m)`.
    pub fn running_cost(&self, _s: f64, x: &[f64], z: &[f64], m: &DiscreteMeasure) -> f64 {
        let mut l = self.kinetic_coeff * z.iter().map(|c| c * c).sum::<f64>();
        if let Some((v, _)) = &self.potential {
            l += v(x);
        }
        if self.mean_field_coeff != 0.0 {
            l += self.mean_field_coeff * self.mean_field_value(m);
        }
        l
    }

    fn mean_field_value(&self, m: &DiscreteMeasure) -> f64 {
        match &self.mean_field {
            None => 0.0,
            Some(MeanFieldTerm::Integral { f, .. }) => m
                .atoms()
                .iter()
                .zip(m.weights())
                .map(|(x, w)| w * f(x))
                .sum(),
            Some(MeanFieldTerm::W2ToRef { reference }) => {
                solve_ot(m, reference, 2.0).map(|(_, w)| w).unwrap_or(f64::INFINITY)
            }
        }
    }

    /// Terminal cost `G(m)`.
    pub fn terminal_cost(&self, m: &DiscreteMeasure) -> f64 {
        match &self.terminal {
            TerminalCost::Zero => 0.0,
            TerminalCost::Integral { f } => m
                .atoms()
                .iter()
                .zip(m.weights())
                .map(|(x, w)| w * f(x))
                .sum(),
            TerminalCost::CappedSquaredW2 { cap, reference } => {
                let (_, w) = solve_ot(m, reference, 2.0).expect("terminal transport");
                (w * w).min(*cap)
            }
            TerminalCost::Custom { g } => g(m),
        }
    }

    fn velocity(&self, x: &[f64], a: &[f64]) -> Vec<f64> {
        match &self.beta {
            None => a.to_vec(),
            Some(b) => b(x, a),
        }
    }

    /// Samples the regularity hypotheses on the given measures: terminal
    /// bound and Lipschitz constant, and coercivity of the running cost.
    pub fn check_hypotheses(&self, samples: &[DiscreteMeasure]) -> Result<HypothesisCheck> {
        let c = self.constants.c;
        let mut g_bound = true;
        let mut g_lip = true;
        let mut coercive = true;
        for m in samples {
            if self.terminal_cost(m).abs() > c + 1e-12 {
                g_bound = false;
            }
        }
        for (i, m) in samples.iter().enumerate() {
            for mp in samples.iter().skip(i + 1) {
                if m.dim() != mp.dim() {
                    continue;
                }
                let (_, w2) = solve_ot(m, mp, 2.0)?;
                let dg = (self.terminal_cost(m) - self.terminal_cost(mp)).abs();
                if dg > c * w2 + 1e-9 {
                    g_lip = false;
                }
            }
        }
        for m in samples {
            for x in m.atoms() {
                for speed in [0.0, 0.5, 1.0, 5.0, 20.0] {
                    let z = vec![speed; m.dim()];
                    let l = self.running_cost(0.0, x, &z, m);
                    let floor = z.iter().map(|c| c * c).sum::<f64>() / c - c;
                    if l < floor - 1e-9 {
                        coercive = false;
                    }
                }
            }
        }
        Ok(HypothesisCheck { terminal_bounded: g_bound, terminal_lipschitz: g_lip, coercive })
    }
}

#[derive(Debug, Serialize)]
pub struct HypothesisCheck {
    pub terminal_bounded: bool,
    pub terminal_lipschitz: bool,
    pub coercive: bool,
}

/// How velocity variables are shared among particles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ControlMode {
    /// particles sharing a position atom at time zero share velocities
    DeterministicConstrained,
    /// every branch carries its own velocity sequence (label space)
    Randomized,
}

/// A controlled path ensemble together with its variable-sharing structure.
#[derive(Clone)]
pub struct ControlledEnsemble {
    pub ensemble: PathEnsemble,
    pub mode: ControlMode,
    /// group id per trajectory: trajectories in a group share velocities
    pub groups: Vec<usize>,
}

impl ControlledEnsemble {
    /// Checks the tying invariant of the deterministic-constrained mode.
    pub fn check_tying(&self) -> bool {
        if self.mode == ControlMode::Randomized {
            return true;
        }
        let m0 = self.ensemble.marginal_at(0.0);
        let mut group_of_atom: Vec<Option<usize>> = vec![None; m0.len()];
        for (ti, tr) in self.ensemble.trajectories().iter().enumerate() {
            let a = m0.nearest_atom(&tr.positions[0]).expect("merged atom");
            match group_of_atom[a] {
                None => group_of_atom[a] = Some(self.groups[ti]),
                Some(g) => {
                    if g != self.groups[ti] {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Quadrature of the running cost along an ensemble plus the terminal cost.
pub fn evaluate_cost(problem: &ControlProblem, e: &ControlledEnsemble) -> Result<f64> {
    let grid = e.ensemble.grid();
    if grid.len() != problem.grid.len()
        || grid.iter().zip(&problem.grid).any(|(a, b)| a != b)
    {
        return Err(Error::GridMismatch("ensemble grid differs from problem grid".into()));
    }
    if !e.ensemble.has_velocities() {
        return Err(Error::MissingVelocities("cost evaluation".into()));
    }
    let mut total = 0.0;
    for j in 0..grid.len() - 1 {
        let dt = grid[j + 1] - grid[j];
        let m = marginal_at_index(&e.ensemble, j);
        let mut stage = 0.0;
        for tr in e.ensemble.trajectories() {
            let z = &tr.velocities.as_ref().unwrap()[j];
            let x = &tr.positions[j];
            let mut l = problem.kinetic_coeff * z.iter().map(|c| c * c).sum::<f64>();
            if let Some((v, _)) = &problem.potential {
                l += v(x);
            }
            stage += tr.weight * l;
        }
        if problem.mean_field_coeff != 0.0 {
            stage += problem.mean_field_coeff * problem.mean_field_value(&m);
        }
        total += dt * stage;
    }
    let m_t = marginal_at_index(&e.ensemble, grid.len() - 1);
    Ok(total + problem.terminal_cost(&m_t))
}

fn marginal_at_index(e: &PathEnsemble, j: usize) -> DiscreteMeasure {
    let atoms: Vec<Vec<f64>> = e
        .trajectories()
        .iter()
        .map(|tr| tr.positions[j].clone())
        .collect();
    let weights: Vec<f64> = e.trajectories().iter().map(|tr| tr.weight).collect();
    DiscreteMeasure::new(e.dim(), atoms, weights).expect("marginal")
}

/// Options for the trajectory optimizer.
#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// number of descent starts (budget)
    pub starts: usize,
    /// branches per atom in randomized mode
    pub branches: usize,
    /// descent iterations per start
    pub max_iters: usize,
    /// magnitude of the random initial controls
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { starts: 8, branches: 4, max_iters: 150, init_scale: 1.0, seed: 0 }
    }
}

/// Outcome of a value solve: an upper bound on the infimum.
pub struct SolveOutcome {
    pub value: f64,
    pub ensemble: ControlledEnsemble,
    /// integrated squared control of the returned ensemble
    pub kinetic: f64,
    pub starts_used: usize,
    /// true when the best candidate appeared at the last start, hinting
    /// that a larger budget could still improve the bound
    pub budget_exhausted: bool,
}

struct Layout {
    starts: Vec<Vec<f64>>,
    weights: Vec<f64>,
    exact: Option<Vec<Rational>>,
    groups: Vec<usize>,
    n_groups: usize,
}

fn layout_for(m0: &DiscreteMeasure, mode: ControlMode, branches: usize) -> Layout {
    match mode {
        ControlMode::DeterministicConstrained => Layout {
            starts: m0.atoms().to_vec(),
            weights: m0.weights().to_vec(),
            exact: m0.exact_weights().map(|e| e.to_vec()),
            groups: (0..m0.len()).collect(),
            n_groups: m0.len(),
        },
        ControlMode::Randomized => {
            let b = branches.max(1);
            let mut starts = Vec::new();
            let mut weights = Vec::new();
            let mut groups = Vec::new();
            let mut exact = m0.exact_weights().map(|_| Vec::new());
            for i in 0..m0.len() {
                for k in 0..b {
                    starts.push(m0.atom(i).to_vec());
                    weights.push(m0.weight(i) / b as f64);
                    groups.push(i * b + k);
                    if let Some(ex) = exact.as_mut() {
                        let w = m0.exact_weights().unwrap()[i].clone()
                            / Rational::from_integer((b as i64).into());
                        ex.push(w);
                    }
                }
            }
            Layout { starts, weights, exact, groups, n_groups: m0.len() * b }
        }
    }
}

fn rollout(
    problem: &ControlProblem,
    layout: &Layout,
    controls: &[f64],
    mode: ControlMode,
) -> ControlledEnsemble {
    let grid = &problem.grid;
    let d = layout.starts[0].len();
    let m = grid.len() - 1;
    let mut trajectories = Vec::with_capacity(layout.starts.len());
    for (ti, start) in layout.starts.iter().enumerate() {
        let g = layout.groups[ti];
        let mut positions = Vec::with_capacity(grid.len());
        let mut velocities = Vec::with_capacity(grid.len());
        let mut x = start.clone();
        for j in 0..grid.len() {
            let a = &controls[(g * m + j.min(m - 1)) * d..(g * m + j.min(m - 1)) * d + d];
            let z = problem.velocity(&x, a);
            positions.push(x.clone());
            velocities.push(z.clone());
            if j < m {
                let dt = grid[j + 1] - grid[j];
                for k in 0..d {
                    x[k] += z[k] * dt;
                }
            }
        }
        trajectories.push(Trajectory {
            weight: layout.weights[ti],
            positions,
            velocities: Some(velocities),
            label: Some(ti as u64),
            exact_weight: layout.exact.as_ref().map(|e| e[ti].clone()),
        });
    }
    ControlledEnsemble {
        ensemble: PathEnsemble::new(grid.clone(), trajectories).expect("rollout"),
        mode,
        groups: layout.groups.clone(),
    }
}

/// Gradient of the rollout cost with respect to the control variables.
/// Kinetic, potential, and integral mean-field terms are differentiated
/// analytically through the Euler map; transport-based terminal and
/// mean-field terms fall back to central finite differences in the particle
/// positions (step scaled to the local magnitude), chained through the same
/// map. A non-identity control hook switches the whole gradient to finite
/// differences in the controls.
fn gradient(
    problem: &ControlProblem,
    layout: &Layout,
    controls: &[f64],
    mode: ControlMode,
) -> Vec<f64> {
    let d = layout.starts[0].len();
    let m = problem.grid.len() - 1;
    if problem.beta.is_some() {
        // finite differences in control space
        let mut g = vec![0.0; controls.len()];
        let mut probe = controls.to_vec();
        let cost_of = |c: &[f64]| {
            let e = rollout(problem, layout, c, mode);
            evaluate_cost(problem, &e).unwrap_or(f64::INFINITY)
        };
        for k in 0..controls.len() {
            let h = 1e-5 * (1.0 + controls[k].abs());
            probe[k] = controls[k] + h;
            let up = cost_of(&probe);
            probe[k] = controls[k] - h;
            let dn = cost_of(&probe);
            probe[k] = controls[k];
            g[k] = (up - dn) / (2.0 * h);
        }
        return g;
    }

    let e = rollout(problem, layout, controls, mode);
    let grid = &problem.grid;
    let n = layout.starts.len();
    // per-trajectory position gradients of the cost, one vector per time
    let mut pos_grad = vec![vec![0.0; d * (m + 1)]; n];

    // potential term: d/dx of dt * w * V(x_j)
    if let Some((_, grad_v)) = &problem.potential {
        for (ti, tr) in e.ensemble.trajectories().iter().enumerate() {
            for j in 0..m {
                let dt = grid[j + 1] - grid[j];
                let gv = grad_v(&tr.positions[j]);
                for k in 0..d {
                    pos_grad[ti][j * d + k] += dt * tr.weight * gv[k];
                }
            }
        }
    }
    // integral mean-field term
    if problem.mean_field_coeff != 0.0 {
        match &problem.mean_field {
            Some(MeanFieldTerm::Integral { grad_f, .. }) => {
                for (ti, tr) in e.ensemble.trajectories().iter().enumerate() {
                    for j in 0..m {
                        let dt = grid[j + 1] - grid[j];
                        let gf = grad_f(&tr.positions[j]);
                        for k in 0..d {
                            pos_grad[ti][j * d + k] +=
                                dt * problem.mean_field_coeff * tr.weight * gf[k];
                        }
                    }
                }
            }
            Some(MeanFieldTerm::W2ToRef { .. }) => {
                // finite differences through the stage marginals
                for j in 0..m {
                    let dt = grid[j + 1] - grid[j];
                    let base_atoms: Vec<Vec<f64>> = e
                        .ensemble
                        .trajectories()
                        .iter()
                        .map(|tr| tr.positions[j].clone())
                        .collect();
                    let weights: Vec<f64> =
                        e.ensemble.trajectories().iter().map(|tr| tr.weight).collect();
                    for ti in 0..n {
                        for k in 0..d {
                            let h = 1e-5 * (1.0 + base_atoms[ti][k].abs());
                            let mut up = base_atoms.clone();
                            up[ti][k] += h;
                            let mut dn = base_atoms.clone();
                            dn[ti][k] -= h;
                            let mu = DiscreteMeasure::new(d, up, weights.clone()).unwrap();
                            let md = DiscreteMeasure::new(d, dn, weights.clone()).unwrap();
                            let fu = problem.mean_field_value(&mu);
                            let fd = problem.mean_field_value(&md);
                            pos_grad[ti][j * d + k] +=
                                dt * problem.mean_field_coeff * (fu - fd) / (2.0 * h);
                        }
                    }
                }
            }
            None => {}
        }
    }
    // terminal term: finite differences unless integral
    match &problem.terminal {
        TerminalCost::Zero => {}
        TerminalCost::Integral { f } => {
            // d/dx int f dm_T by analytic weights with finite-diff gradient
            for (ti, tr) in e.ensemble.trajectories().iter().enumerate() {
                let x = &tr.positions[m];
                for k in 0..d {
                    let h = 1e-6 * (1.0 + x[k].abs());
                    let mut up = x.clone();
                    up[k] += h;
                    let mut dn = x.clone();
                    dn[k] -= h;
                    pos_grad[ti][m * d + k] += tr.weight * (f(&up) - f(&dn)) / (2.0 * h);
                }
            }
        }
        _ => {
            let atoms: Vec<Vec<f64>> = e
                .ensemble
                .trajectories()
                .iter()
                .map(|tr| tr.positions[m].clone())
                .collect();
            let weights: Vec<f64> =
                e.ensemble.trajectories().iter().map(|tr| tr.weight).collect();
            for ti in 0..n {
                for k in 0..d {
                    let h = 1e-5 * (1.0 + atoms[ti][k].abs());
                    let mut up = atoms.clone();
                    up[ti][k] += h;
                    let mut dn = atoms.clone();
                    dn[ti][k] -= h;
                    let mu = DiscreteMeasure::new(d, up, weights.clone()).unwrap();
                    let md = DiscreteMeasure::new(d, dn, weights.clone()).unwrap();
                    pos_grad[ti][m * d + k] +=
                        (problem.terminal_cost(&mu) - problem.terminal_cost(&md)) / (2.0 * h);
                }
            }
        }
    }

    // chain through the Euler map: x_l depends on a_j (j < l) with
    // sensitivity dt_j, so each control receives the suffix sum of position
    // gradients; the kinetic term contributes directly
    let mut grad = vec![0.0; controls.len()];
    for (ti, tr) in e.ensemble.trajectories().iter().enumerate() {
        let g = layout.groups[ti];
        let mut suffix = vec![0.0; d];
        for j in (0..m).rev() {
            for k in 0..d {
                suffix[k] += pos_grad[ti][(j + 1) * d + k];
            }
            let dt = grid[j + 1] - grid[j];
            let z = &tr.velocities.as_ref().unwrap()[j];
            for k in 0..d {
                grad[(g * m + j) * d + k] += dt * suffix[k]
                    + dt * tr.weight * 2.0 * problem.kinetic_coeff * z[k];
            }
        }
    }
    grad
}

fn descend(
    problem: &ControlProblem,
    layout: &Layout,
    mode: ControlMode,
    init: Vec<f64>,
    max_iters: usize,
) -> (f64, Vec<f64>) {
    let mut controls = init;
    let mut cost = {
        let e = rollout(problem, layout, &controls, mode);
        evaluate_cost(problem, &e).unwrap_or(f64::INFINITY)
    };
    let mut step = 0.5;
    for _ in 0..max_iters {
        let g = gradient(problem, layout, &controls, mode);
        let gn2: f64 = g.iter().map(|c| c * c).sum();
        if gn2.sqrt() < 1e-10 {
            break;
        }
        let mut accepted = false;
        let mut s = step;
        for _ in 0..40 {
            let probe: Vec<f64> = controls.iter().zip(&g).map(|(c, gk)| c - s * gk).collect();
            let e = rollout(problem, layout, &probe, mode);
            let c_new = evaluate_cost(problem, &e).unwrap_or(f64::INFINITY);
            if c_new <= cost - 1e-4 * s * gn2 {
                controls = probe;
                cost = c_new;
                step = (s * 2.0).min(8.0);
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (cost, controls)
}

/// Best control found within the budget; the value is an upper bound on the
/// true infimum and never increases with the budget.
pub fn solve_value(
    problem: &ControlProblem,
    m0: &DiscreteMeasure,
    mode: ControlMode,
    opts: &SolveOptions,
) -> Result<SolveOutcome> {
    solve_value_with_candidates(problem, m0, mode, opts, &[])
}

/// As [`solve_value`], with externally supplied candidate ensembles that are
/// evaluated raw and used as extra descent starts on their own structure.
pub fn solve_value_with_candidates(
    problem: &ControlProblem,
    m0: &DiscreteMeasure,
    mode: ControlMode,
    opts: &SolveOptions,
    extra: &[ControlledEnsemble],
) -> Result<SolveOutcome> {
    if m0.len() > 200 {
        return Err(Error::TooLarge(format!("{} atoms (limit 200)", m0.len())));
    }
    let layout = layout_for(m0, mode, opts.branches);
    let d = m0.dim();
    let m = problem.grid.len() - 1;
    let nvars = layout.n_groups * m * d;

    let inits: Vec<(u64, Vec<f64>)> = (0..opts.starts as u64)
        .map(|s| (s, initial_controls(problem, &layout, s, opts, nvars, d, m)))
        .collect();
    let mut candidates: Vec<(f64, Vec<f64>)> = inits
        .into_par_iter()
        .map(|(_, init)| descend(problem, &layout, mode, init, opts.max_iters))
        .collect();

    // deterministic candidates are feasible randomized ones: fold in the
    // constrained solve so the randomized bound can only be tighter
    if mode == ControlMode::Randomized {
        let det = solve_value(problem, m0, ControlMode::DeterministicConstrained, opts)?;
        let expanded = expand_controls(&det, m0, &layout, d, m);
        let (c, controls) = descend(problem, &layout, mode, expanded, opts.max_iters / 4);
        candidates.push((c, controls));
    }

    let mut best = 0usize;
    for (i, c) in candidates.iter().enumerate() {
        if c.0 < candidates[best].0 {
            best = i;
        }
    }
    let mut best_value = candidates[best].0;
    let mut best_ensemble = rollout(problem, &layout, &candidates[best].1, mode);
    let budget_exhausted = best + 1 == opts.starts.max(1);

    // externally supplied candidates keep their own trajectory structure
    for cand in extra {
        let value = evaluate_cost(problem, cand)?;
        let cand_layout = Layout {
            starts: cand
                .ensemble
                .trajectories()
                .iter()
                .map(|tr| tr.positions[0].clone())
                .collect(),
            weights: cand.ensemble.trajectories().iter().map(|tr| tr.weight).collect(),
            exact: None,
            groups: (0..cand.ensemble.trajectories().len()).collect(),
            n_groups: cand.ensemble.trajectories().len(),
        };
        let init: Vec<f64> = cand
            .ensemble
            .trajectories()
            .iter()
            .flat_map(|tr| {
                tr.velocities.as_ref().unwrap()[..m]
                    .iter()
                    .flatten()
                    .copied()
                    .collect::<Vec<_>>()
            })
            .collect();
        let (c, controls) = descend(problem, &cand_layout, mode, init, opts.max_iters / 4);
        let polished = rollout(problem, &cand_layout, &controls, mode);
        for (v, ens) in [(value, cand.clone()), (c, polished)] {
            if v < best_value {
                best_value = v;
                best_ensemble = ens;
            }
        }
    }

    let kinetic = best_ensemble.ensemble.kinetic_energy()?;
    Ok(SolveOutcome {
        value: best_value,
        ensemble: best_ensemble,
        kinetic,
        starts_used: opts.starts,
        budget_exhausted,
    })
}

fn initial_controls(
    problem: &ControlProblem,
    layout: &Layout,
    start_index: u64,
    opts: &SolveOptions,
    nvars: usize,
    d: usize,
    m: usize,
) -> Vec<f64> {
    match start_index {
        0 => vec![0.0; nvars],
        1 => {
            // aim the groups at the terminal reference atoms, cyclically
            let reference = match &problem.terminal {
                TerminalCost::CappedSquaredW2 { reference, .. } => Some(reference),
                _ => None,
            };
            let mut ctl = vec![0.0; nvars];
            if let Some(rf) = reference {
                let horizon = problem.horizon;
                // representative start per group
                let mut start_of_group = vec![None; layout.n_groups];
                for (ti, &g) in layout.groups.iter().enumerate() {
                    if start_of_group[g].is_none() {
                        start_of_group[g] = Some(layout.starts[ti].clone());
                    }
                }
                for g in 0..layout.n_groups {
                    let x0 = start_of_group[g].clone().unwrap_or_else(|| vec![0.0; d]);
                    let target = rf.atom(g % rf.len());
                    for j in 0..m {
                        for k in 0..d {
                            ctl[(g * m + j) * d + k] = (target[k] - x0[k]) / horizon;
                        }
                    }
                }
            }
            ctl
        }
        s => {
            let mut rng = rng_at(opts.seed, 0xC791, s);
            (0..nvars)
                .map(|_| opts.init_scale * rng.gen_range(-1.0..1.0))
                .collect()
        }
    }
}

fn expand_controls(
    det: &SolveOutcome,
    m0: &DiscreteMeasure,
    rand_layout: &Layout,
    d: usize,
    m: usize,
) -> Vec<f64> {
    // deterministic solution has one group per atom; copy onto all branches
    let mut out = vec![0.0; rand_layout.n_groups * m * d];
    for (ti, tr) in det.ensemble.ensemble.trajectories().iter().enumerate() {
        let atom = m0
            .nearest_atom(&tr.positions[0])
            .unwrap_or(ti.min(m0.len() - 1));
        let z = tr.velocities.as_ref().unwrap();
        let b = rand_layout.n_groups / m0.len();
        for k in 0..b {
            let g = atom * b + k;
            for j in 0..m {
                for c in 0..d {
                    out[(g * m + j) * d + c] = z[j][c];
                }
            }
        }
    }
    out
}

/// One pair of the Lipschitz sweep.
#[derive(Serialize)]
pub struct SweepRow {
    pub pair_id: usize,
    pub w2: f64,
    pub u_m: f64,
    pub u_mprime: f64,
    pub translated_cost: f64,
    pub ratio: f64,
    pub certificate_rhs: f64,
    /// right-hand side of the translated-cost certificate
    pub translated_certificate_rhs: f64,
    pub kinetic: f64,
}

/// Report of [`lipschitz_sweep`].
#[derive(Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub max_ratio: f64,
    pub max_certificate: f64,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("pair_id,W2,U_m,U_mprime,translated_cost,ratio,certificate_rhs\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.pair_id, r.w2, r.u_m, r.u_mprime, r.translated_cost, r.ratio, r.certificate_rhs
            ));
        }
        out
    }
}

/// For each pair `(m, m', gamma0)` with `gamma0` cost-optimal: solve the
/// `m` side, translate the optimal ensemble along `gamma0`, evaluate the
/// translated ensemble as an admissible control for `m'` (also feeding it to
/// the `m'` solve as a candidate), and record the two-sided ratio plus the
/// translation certificates.
pub fn lipschitz_sweep(
    problem: &ControlProblem,
    pairs: &[(DiscreteMeasure, DiscreteMeasure, Coupling)],
    mode: ControlMode,
    opts: &SolveOptions,
) -> Result<SweepReport> {
    let c = problem.constants.c;
    let t_horizon = problem.horizon;
    let mut rows = Vec::with_capacity(pairs.len());
    for (pair_id, (m, mp, gamma0)) in pairs.iter().enumerate() {
        let (_, w2) = solve_ot(m, mp, 2.0)?;
        let g_cost = gamma0.cost(2.0);
        if (g_cost - w2).abs() > 1e-7 * (1.0 + w2) {
            return Err(Error::InvalidInput(format!(
                "pair {pair_id}: initial coupling is not cost-optimal ({g_cost} vs {w2})"
            )));
        }
        let solved = solve_value(problem, m, mode, opts)?;
        let (_, translated) = solved.ensemble.ensemble.translate(gamma0)?;
        let translated = ControlledEnsemble {
            groups: (0..translated.trajectories().len()).collect(),
            ensemble: translated,
            mode: ControlMode::Randomized,
        };
        let translated_cost = evaluate_cost(problem, &translated)?;
        let solved_p =
            solve_value_with_candidates(problem, mp, mode, opts, std::slice::from_ref(&translated))?;
        let ratio = if w2 > 0.0 {
            (solved.value - solved_p.value).abs() / w2
        } else {
            0.0
        };
        let sqrt_i = solved.kinetic.max(0.0).sqrt();
        let certificate_rhs = c * (1.0 + sqrt_i) * (1.0 + t_horizon);
        let translated_certificate_rhs =
            c * (1.0 + sqrt_i) * (w2 + t_horizon * w2) + 1e-9 * (1.0 + solved.value.abs());
        rows.push(SweepRow {
            pair_id,
            w2,
            u_m: solved.value,
            u_mprime: solved_p.value,
            translated_cost,
            ratio,
            certificate_rhs,
            translated_certificate_rhs,
            kinetic: solved.kinetic,
        });
    }
    let max_ratio = rows.iter().fold(0.0_f64, |a, r| a.max(r.ratio));
    let max_certificate = rows.iter().fold(0.0_f64, |a, r| a.max(r.certificate_rhs));
    Ok(SweepReport { rows, max_ratio, max_certificate })
}
