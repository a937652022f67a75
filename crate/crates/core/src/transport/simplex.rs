//! Transportation simplex on the dense bipartite graph.
//!
//! Solves `min sum_{ij} c_ij pi_ij` over couplings with prescribed row and
//! column sums. The basis is a spanning tree over the `m + n` nodes; entering
//! arcs are priced in rotating blocks (most negative reduced cost within a
//! block); degeneracy is removed by a deterministic perturbation of the
//! supplies, and final flows are recomputed from the unperturbed data on the
//! optimal tree. The basis survives cost changes, which makes warm-started
//! parametric solves cheap.

use crate::error::{Error, Result};

/// Cost oracle for arc `(i, j)`.
pub trait CostSource {
    fn at(&self, i: usize, j: usize) -> f64;
    /// Upper bound on `|cost|`, used to scale optimality tolerances.
    fn scale(&self, m: usize, n: usize) -> f64 {
        let mut s = 0.0_f64;
        for i in 0..m {
            for j in 0..n {
                s = s.max(self.at(i, j).abs());
            }
        }
        s.max(1.0)
    }
}

/// Dense row-major cost matrix.
pub struct MatrixCost<'a> {
    pub costs: &'a [f64],
    pub n: usize,
}

impl CostSource for MatrixCost<'_> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.costs[i * self.n + j]
    }
}

/// `base + lambda * side`, evaluated on the fly for parametric solves.
pub struct CombinedCost<'a> {
    pub base: &'a [f64],
    pub side: &'a [f64],
    pub lambda: f64,
    pub n: usize,
}

impl CostSource for CombinedCost<'_> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        let k = i * self.n + j;
        self.base[k] + self.lambda * self.side[k]
    }
}

const NO_NODE: usize = usize::MAX;

/// Spanning-tree basis of a transportation problem.
pub struct SimplexState {
    m: usize,
    n: usize,
    // node layout: sources 0..m, sinks m..m+n
    parent: Vec<usize>,
    /// cell (i, j) of the arc linking a node to its parent
    parent_arc: Vec<(usize, usize)>,
    /// flow on the arc to the parent (perturbed units during pivoting)
    flow: Vec<f64>,
    depth: Vec<u32>,
    children: Vec<Vec<usize>>,
    u: Vec<f64>,
    v: Vec<f64>,
    in_basis: Vec<bool>,
    block_cursor: usize,
}

pub struct PivotStats {
    pub pivots: usize,
}

impl SimplexState {
    /// Northwest-corner starting basis on perturbed supplies.
    pub fn new(a: &[f64], b: &[f64]) -> Self {
        let (m, n) = (a.len(), b.len());
        assert!(m > 0 && n > 0, "empty marginal");
        let total: f64 = a.iter().sum();
        let eps = total.max(1e-300) * 1e-12 / (m + n) as f64;
        let pa: Vec<f64> = a.iter().map(|x| x + eps).collect();
        let mut pb: Vec<f64> = b.to_vec();
        pb[n - 1] += eps * m as f64;

        let mut arcs: Vec<(usize, usize, f64)> = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0usize, 0usize);
        let mut ra = pa[0];
        let mut rb = pb[0];
        loop {
            let t = ra.min(rb);
            arcs.push((i, j, t));
            ra -= t;
            rb -= t;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if j == n - 1 || (ra < rb && i < m - 1) {
                i += 1;
                ra = pa[i];
            } else {
                j += 1;
                rb = pb[j];
            }
        }
        debug_assert_eq!(arcs.len(), m + n - 1);

        let mut state = Self {
            m,
            n,
            parent: vec![NO_NODE; m + n],
            parent_arc: vec![(0, 0); m + n],
            flow: vec![0.0; m + n],
            depth: vec![0; m + n],
            children: vec![Vec::new(); m + n],
            u: vec![0.0; m],
            v: vec![0.0; n],
            in_basis: vec![false; m * n],
            block_cursor: 0,
        };
        state.build_tree(&arcs);
        state
    }

    fn build_tree(&mut self, arcs: &[(usize, usize, f64)]) {
        let (m, n) = (self.m, self.n);
        let mut adj: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); m + n];
        for &(i, j, f) in arcs {
            self.in_basis[i * n + j] = true;
            adj[i].push((m + j, i * n + j, f));
            adj[m + j].push((i, i * n + j, f));
        }
        let mut stack = vec![0usize];
        let mut seen = vec![false; m + n];
        seen[0] = true;
        self.parent[0] = NO_NODE;
        self.depth[0] = 0;
        while let Some(x) = stack.pop() {
            for &(y, cell, f) in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    self.parent[y] = x;
                    self.parent_arc[y] = (cell / n, cell % n);
                    self.flow[y] = f;
                    self.depth[y] = self.depth[x] + 1;
                    self.children[x].push(y);
                    stack.push(y);
                }
            }
        }
        debug_assert!(seen.iter().all(|&s| s), "basis arcs do not span");
    }

    fn recompute_potentials<C: CostSource>(&mut self, cost: &C) {
        let m = self.m;
        let mut stack = vec![0usize];
        self.u[0] = 0.0;
        while let Some(x) = stack.pop() {
            for &y in &self.children[x] {
                let (i, j) = self.parent_arc[y];
                if y < m {
                    self.u[y] = cost.at(i, j) - self.v[j];
                } else {
                    self.v[y - m] = cost.at(i, j) - self.u[i];
                }
                stack.push(y);
            }
        }
    }

    /// Pivots to optimality for the given cost. Returns the pivot count.
    pub fn optimize<C: CostSource>(&mut self, cost: &C, max_pivots: usize) -> Result<PivotStats> {
        let (m, n) = (self.m, self.n);
        self.recompute_potentials(cost);
        let scale = cost.scale(m, n);
        let tol = scale * 1e-12;
        let arcs = m * n;
        let block = (arcs / 16).clamp(64, 1 << 16).min(arcs);
        let mut pivots = 0usize;
        loop {
            let mut entering: Option<(usize, usize, f64)> = None;
            let mut scanned = 0usize;
            let mut cursor = self.block_cursor;
            while scanned < arcs {
                let hi = (cursor + block).min(arcs);
                let mut best = -tol;
                for k in cursor..hi {
                    if self.in_basis[k] {
                        continue;
                    }
                    let (i, j) = (k / n, k % n);
                    let r = cost.at(i, j) - self.u[i] - self.v[j];
                    if r < best {
                        best = r;
                        entering = Some((i, j, r));
                    }
                }
                scanned += hi - cursor;
                cursor = if hi == arcs { 0 } else { hi };
                if entering.is_some() {
                    self.block_cursor = cursor;
                    break;
                }
            }
            let Some((ei, ej, r)) = entering else {
                return Ok(PivotStats { pivots });
            };
            if pivots >= max_pivots {
                return Err(Error::SolverFailure(format!(
                    "transportation simplex exceeded {max_pivots} pivots"
                )));
            }
            self.pivot(ei, ej, r);
            pivots += 1;
        }
    }

    /// One basis exchange: enter cell (ei, ej), push flow around the tree
    /// cycle, drop the blocking arc, reattach the cut subtree and shift its
    /// potentials.
    fn pivot(&mut self, ei: usize, ej: usize, reduced: f64) {
        let m = self.m;
        let x = ei;
        let y = m + ej;
        // walk both endpoints to their common ancestor
        let mut px: Vec<usize> = Vec::new();
        let mut py: Vec<usize> = Vec::new();
        let (mut cx, mut cy) = (x, y);
        while self.depth[cx] > self.depth[cy] {
            px.push(cx);
            cx = self.parent[cx];
        }
        while self.depth[cy] > self.depth[cx] {
            py.push(cy);
            cy = self.parent[cy];
        }
        while cx != cy {
            px.push(cx);
            py.push(cy);
            cx = self.parent[cx];
            cy = self.parent[cy];
        }
        // the tree is bipartite, so cells along each walk alternate sign,
        // starting with -delta on the arc incident to the entering endpoint
        let mut delta = f64::INFINITY;
        let mut leaving = NO_NODE;
        for (k, &node) in px.iter().enumerate() {
            if k % 2 == 0 && self.flow[node] < delta {
                delta = self.flow[node];
                leaving = node;
            }
        }
        for (k, &node) in py.iter().enumerate() {
            if k % 2 == 0 && self.flow[node] < delta {
                delta = self.flow[node];
                leaving = node;
            }
        }
        debug_assert_ne!(leaving, NO_NODE, "cycle without a blocking arc");
        for (k, &node) in px.iter().enumerate() {
            if k % 2 == 0 {
                self.flow[node] -= delta;
            } else {
                self.flow[node] += delta;
            }
        }
        for (k, &node) in py.iter().enumerate() {
            if k % 2 == 0 {
                self.flow[node] -= delta;
            } else {
                self.flow[node] += delta;
            }
        }
        let (li, lj) = self.parent_arc[leaving];
        self.in_basis[li * self.n + lj] = false;
        self.in_basis[ei * self.n + ej] = true;

        // detach the subtree rooted at the leaving node
        let lp = self.parent[leaving];
        let pos = self.children[lp]
            .iter()
            .position(|&c| c == leaving)
            .expect("leaving node is a child of its parent");
        self.children[lp].swap_remove(pos);

        let in_sub = self.mark_subtree(leaving);
        let (new_root, attach_to) = if in_sub[x] { (x, y) } else { (y, x) };
        debug_assert!(in_sub[new_root] && !in_sub[attach_to]);

        // re-root the subtree at new_root: reverse parent pointers along the
        // chain new_root -> ... -> leaving; each reversed node inherits the
        // arc that linked its new parent upward before the reversal
        let mut chain = vec![new_root];
        let mut node = new_root;
        while node != leaving {
            node = self.parent[node];
            chain.push(node);
        }
        let old_arcs: Vec<(usize, usize)> =
            chain.iter().map(|&c| self.parent_arc[c]).collect();
        let old_flows: Vec<f64> = chain.iter().map(|&c| self.flow[c]).collect();
        for w in 1..chain.len() {
            let child = chain[w];
            let p = chain[w - 1];
            if let Some(q) = self.children[child].iter().position(|&c| c == p) {
                self.children[child].swap_remove(q);
            }
            self.children[p].push(child);
            self.parent[child] = p;
            self.parent_arc[child] = old_arcs[w - 1];
            self.flow[child] = old_flows[w - 1];
        }
        self.parent[new_root] = attach_to;
        self.parent_arc[new_root] = (ei, ej);
        self.flow[new_root] = delta;
        self.children[attach_to].push(new_root);

        // depths and potentials of the moved subtree shift together
        let shift = if new_root < m { reduced } else { -reduced };
        let mut stack = vec![new_root];
        while let Some(s) = stack.pop() {
            self.depth[s] = self.depth[self.parent[s]] + 1;
            if s < m {
                self.u[s] += shift;
            } else {
                self.v[s - m] -= shift;
            }
            for &c in &self.children[s] {
                stack.push(c);
            }
        }
    }

    fn mark_subtree(&self, root: usize) -> Vec<bool> {
        let mut mark = vec![false; self.m + self.n];
        let mut stack = vec![root];
        mark[root] = true;
        while let Some(x) = stack.pop() {
            for &c in &self.children[x] {
                mark[c] = true;
                stack.push(c);
            }
        }
        mark
    }

    /// Recomputes exact tree flows for the unperturbed marginals and returns
    /// the positive cells, sorted by (row, column).
    pub fn extract_flows(&self, a: &[f64], b: &[f64]) -> Vec<(usize, usize, f64)> {
        let (m, n) = (self.m, self.n);
        let clamp_tol = 1e-9 * a.iter().sum::<f64>().max(1.0);
        let mut surplus: Vec<f64> = a.iter().copied().chain(b.iter().map(|x| -x)).collect();
        let mut order = vec![0usize];
        let mut head = 0;
        while head < order.len() {
            let x = order[head];
            head += 1;
            for &c in &self.children[x] {
                order.push(c);
            }
        }
        let mut cells = Vec::with_capacity(m + n - 1);
        for &node in order.iter().rev() {
            if node == 0 {
                continue;
            }
            let (i, j) = self.parent_arc[node];
            let f = if node < m { surplus[node] } else { -surplus[node] };
            debug_assert!(f >= -clamp_tol, "infeasible tree flow {f}");
            let parent = self.parent[node];
            surplus[parent] += surplus[node];
            cells.push((i, j, f.max(0.0)));
        }
        cells.retain(|&(_, _, f)| f > 0.0);
        cells.sort_unstable_by_key(|&(i, j, _)| (i, j));
        cells
    }

    pub fn duals(&self) -> (&[f64], &[f64]) {
        (&self.u, &self.v)
    }

    /// Objective of the current basis under `cost` for the given marginals.
    pub fn objective<C: CostSource>(&self, cost: &C, a: &[f64], b: &[f64]) -> f64 {
        self.extract_flows(a, b)
            .iter()
            .map(|&(i, j, f)| f * cost.at(i, j))
            .sum()
    }

    /// Side-cost value of the current basis (used by parametric sweeps).
    pub fn side_value(&self, side: &[f64], a: &[f64], b: &[f64]) -> f64 {
        self.extract_flows(a, b)
            .iter()
            .map(|&(i, j, f)| f * side[i * self.n + j])
            .sum()
    }
}

/// Projects the duals to feasibility and returns the certified optimality gap
/// `primal - dual >= 0` together with the feasible dual objective.
pub fn duality_gap<C: CostSource>(
    cost: &C,
    a: &[f64],
    b: &[f64],
    u: &[f64],
    primal: f64,
) -> (f64, f64) {
    let (m, n) = (a.len(), b.len());
    let mut dual = 0.0;
    for (i, ai) in a.iter().enumerate() {
        dual += ai * u[i];
    }
    for j in 0..n {
        let mut vj = f64::INFINITY;
        for i in 0..m {
            vj = vj.min(cost.at(i, j) - u[i]);
        }
        dual += b[j] * vj;
    }
    (primal - dual, dual)
}
