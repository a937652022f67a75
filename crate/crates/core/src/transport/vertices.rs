//! Exact enumeration of the extreme points of a transportation polytope.
//!
//! Vertices of `Pi(mu, nu)` are exactly the couplings whose support is a
//! spanning forest of the bipartite support graph. The enumeration walks all
//! edge subsets of size `m + n - 1` that form a spanning tree, solves the
//! tree flows in exact rational arithmetic, keeps the nonnegative ones and
//! deduplicates degenerate vertices reached through several trees.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, Rational};
use crate::transport::Coupling;

/// All extreme points of `Pi(mu, nu)`, exactly.
///
/// Requires exact rational weights on both marginals and a support product
/// of at most 20 cells; `limit` bounds the number of returned couplings.
pub fn enumerate_vertex_couplings(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    limit: usize,
) -> Result<Vec<Coupling>> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch(mu.dim(), nu.dim()));
    }
    let a = mu
        .exact_weights()
        .ok_or_else(|| Error::NonRationalWeights("left measure".into()))?;
    let b = nu
        .exact_weights()
        .ok_or_else(|| Error::NonRationalWeights("right measure".into()))?;
    if mu.len() * nu.len() > 20 {
        return Err(Error::TooLarge(format!(
            "vertex enumeration supports n_mu * n_nu <= 20, got {}",
            mu.len() * nu.len()
        )));
    }
    let verts = enumerate_vertices_exact(a, b);
    if verts.len() > limit {
        return Err(Error::TooLarge(format!(
            "{} vertices exceed limit {limit}",
            verts.len()
        )));
    }
    verts
        .into_iter()
        .map(|cells| Coupling::from_rational(mu.clone(), nu.clone(), cells))
        .collect()
}

/// Raw exact enumeration on weight vectors; returns positive cells per vertex.
pub fn enumerate_vertices_exact(
    a: &[Rational],
    b: &[Rational],
) -> Vec<Vec<(usize, usize, Rational)>> {
    let (m, n) = (a.len(), b.len());
    let total_edges = m * n;
    let need = m + n - 1;
    let mut out: BTreeMap<Vec<(usize, usize, Rational)>, ()> = BTreeMap::new();
    let mut chosen: Vec<usize> = Vec::with_capacity(need);
    enumerate_rec(0, need, total_edges, &mut chosen, &mut |edges| {
        if let Some(flows) = tree_flows(m, n, edges, a, b) {
            let key: Vec<(usize, usize, Rational)> = flows
                .into_iter()
                .filter(|(_, _, f)| !f.is_zero())
                .collect();
            out.entry(key).or_insert(());
        }
    });
    out.into_keys().collect()
}

fn enumerate_rec(
    start: usize,
    remaining: usize,
    total: usize,
    chosen: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]),
) {
    if remaining == 0 {
        f(chosen);
        return;
    }
    // not enough edges left to fill the subset
    for e in start..=(total - remaining) {
        chosen.push(e);
        enumerate_rec(e + 1, remaining - 1, total, chosen, f);
        chosen.pop();
    }
}

/// Solves the unique flows on a candidate spanning tree; `None` when the
/// edges do not span, contain a cycle, or force a negative flow.
fn tree_flows(
    m: usize,
    n: usize,
    edges: &[usize],
    a: &[Rational],
    b: &[Rational],
) -> Option<Vec<(usize, usize, Rational)>> {
    let nodes = m + n;
    let mut parent: Vec<usize> = (0..nodes).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
    for (idx, &e) in edges.iter().enumerate() {
        let (i, j) = (e / n, e % n);
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, m + j));
        if ri == rj {
            return None; // cycle
        }
        parent[ri] = rj;
        adj[i].push((m + j, idx));
        adj[m + j].push((i, idx));
    }
    let root = find(&mut parent, 0);
    if (0..nodes).any(|x| find(&mut parent, x) != root) {
        return None; // not spanning
    }
    // peel leaves
    let mut surplus: Vec<Rational> = a
        .iter()
        .cloned()
        .chain(b.iter().map(|x| -x.clone()))
        .collect();
    let mut deg: Vec<usize> = adj.iter().map(|l| l.len()).collect();
    let mut used = vec![false; edges.len()];
    let mut removed = vec![false; nodes];
    let mut flows: Vec<Option<Rational>> = vec![None; edges.len()];
    let mut leaves: Vec<usize> = (0..nodes).filter(|&x| deg[x] == 1).collect();
    while let Some(x) = leaves.pop() {
        if removed[x] {
            continue;
        }
        let Some(&(other, eidx)) = adj[x].iter().find(|&&(_, e)| !used[e]) else {
            continue;
        };
        removed[x] = true;
        used[eidx] = true;
        let f = if x < m {
            surplus[x].clone()
        } else {
            -surplus[x].clone()
        };
        if f < Rational::zero() {
            return None;
        }
        let s = surplus[x].clone();
        surplus[other] += s;
        flows[eidx] = Some(f);
        deg[other] -= 1;
        if deg[other] == 1 && !removed[other] {
            leaves.push(other);
        }
    }
    if flows.iter().any(|f| f.is_none()) {
        return None;
    }
    let mut cells: Vec<(usize, usize, Rational)> = edges
        .iter()
        .zip(flows)
        .map(|(&e, f)| (e / n, e % n, f.unwrap()))
        .collect();
    cells.sort_unstable_by_key(|&(i, j, _)| (i, j));
    Some(cells)
}
