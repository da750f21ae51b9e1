//! Root-pinned backtracking search for edge-exact bijections between ball
//! prefixes whose covariates agree within a tolerance.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{Ball, Weight};

const UNMAPPED: usize = usize::MAX;

/// Node-expansion counter shared by every search inside one distance
/// computation.
#[derive(Debug)]
pub(crate) struct Budget {
    used: u64,
    cap: Option<u64>,
}

impl Budget {
    pub(crate) fn new(cap: Option<u64>) -> Self {
        Budget { used: 0, cap }
    }

    fn tick(&mut self) -> Result<()> {
        self.used += 1;
        match self.cap {
            Some(cap) if self.used > cap => Err(Error::BudgetExceeded { cap }),
            _ => Ok(()),
        }
    }
}

/// The first `n` vertices of a ball (every vertex within some radius),
/// with degrees restricted to the prefix.
pub(crate) struct Prefix<'a> {
    pub(crate) ball: &'a Ball,
    pub(crate) n: usize,
    /// `(root distance, in-degree, out-degree)` inside the prefix.
    sig: Vec<(u64, u32, u32)>,
}

impl<'a> Prefix<'a> {
    pub(crate) fn new(ball: &'a Ball, n: usize) -> Self {
        let sig = (0..n)
            .map(|v| {
                let indeg = ball.in_edges(v).iter().filter(|&&(s, _)| s < n).count() as u32;
                let outdeg = ball.out_edges(v).iter().filter(|&&(d, _)| d < n).count() as u32;
                (ball.root_distances()[v], indeg, outdeg)
            })
            .collect();
        Prefix { ball, n, sig }
    }

    fn out_edges(&self, v: usize) -> impl Iterator<Item = (usize, Weight)> + '_ {
        self.ball.out_edges(v).iter().copied().filter(move |&(d, _)| d < self.n)
    }

    fn in_edges(&self, v: usize) -> impl Iterator<Item = (usize, Weight)> + '_ {
        self.ball.in_edges(v).iter().copied().filter(move |&(s, _)| s < self.n)
    }

    fn edge_weights(&self) -> Vec<Weight> {
        let mut w: Vec<Weight> = (0..self.n).flat_map(|v| self.out_edges(v).map(|(_, w)| w)).collect();
        w.sort_unstable();
        w
    }
}

/// Largest per-coordinate covariate gap between `u` in `a` and `v` in `b`.
pub(crate) fn covariate_gap(a: &Ball, u: usize, b: &Ball, v: usize) -> f64 {
    a.covariates(u).iter().zip(b.covariates(v)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Cheap invariants that must agree for any bijection to exist.
pub(crate) fn quick_reject(a: &Prefix<'_>, b: &Prefix<'_>) -> bool {
    if a.n != b.n {
        return true;
    }
    if a.ball.root_distances()[..a.n] != b.ball.root_distances()[..b.n] {
        return true;
    }
    let mut sa = a.sig.clone();
    let mut sb = b.sig.clone();
    sa.sort_unstable();
    sb.sort_unstable();
    sa != sb || a.edge_weights() != b.edge_weights()
}

/// Tolerances worth testing: the covariate gaps of structurally compatible
/// vertex pairs, sorted and deduplicated. The optimum is always one of them.
pub(crate) fn candidate_gaps(a: &Prefix<'_>, b: &Prefix<'_>) -> Vec<f64> {
    let mut gaps = Vec::new();
    for u in 0..a.n {
        for v in 0..b.n {
            if a.sig[u] == b.sig[v] {
                gaps.push(covariate_gap(a.ball, u, b.ball, v));
            }
        }
    }
    gaps.sort_by(f64::total_cmp);
    gaps.dedup();
    gaps
}

/// Finds a root-preserving, edge-exact bijection between the two prefixes
/// with every covariate gap at most `eps`. Returns `map[u] = v`.
pub(crate) fn find_bijection(
    a: &Prefix<'_>,
    b: &Prefix<'_>,
    eps: f64,
    budget: &mut Budget,
) -> Result<Option<Vec<usize>>> {
    if quick_reject(a, b) {
        return Ok(None);
    }
    let n = a.n;
    let compatible = |u: usize, v: usize| a.sig[u] == b.sig[v] && covariate_gap(a.ball, u, b.ball, v) <= eps;
    if a.ball.covariate_dim() > 0 && !perfect_matching_exists(n, &compatible) {
        return Ok(None);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&u| {
        let (d, i, o) = a.sig[u];
        (d, std::cmp::Reverse(i + o), u)
    });
    let anchor: Vec<Option<(usize, Weight)>> = (0..n)
        .map(|u| {
            let du = a.sig[u].0;
            a.in_edges(u).filter(|&(p, _)| a.sig[p].0 < du).min_by_key(|&(p, _)| (a.sig[p].2, p))
        })
        .collect();
    debug_assert!((1..n).all(|u| anchor[u].is_some()), "every non-root vertex has a shorter-path parent");

    let twin = twin_classes(b);
    let mut m =
        Matcher { a, b, eps, order, anchor, twin, map_ab: vec![UNMAPPED; n], map_ba: vec![UNMAPPED; n], budget };
    if m.extend(0)? {
        Ok(Some(m.map_ab))
    } else {
        Ok(None)
    }
}

/// Non-adjacent twins: vertices with identical in/out neighbour lists,
/// root distance and covariates. Swapping two twins is an automorphism.
fn twin_classes(b: &Prefix<'_>) -> Vec<usize> {
    type Key = (u64, Vec<u64>, Vec<(usize, Weight)>, Vec<(usize, Weight)>);
    let mut classes: HashMap<Key, usize> = HashMap::new();
    (0..b.n)
        .map(|v| {
            let key = (
                b.sig[v].0,
                b.ball.covariates(v).iter().map(|c| c.to_bits()).collect(),
                b.out_edges(v).collect(),
                b.in_edges(v).collect(),
            );
            let next = classes.len();
            *classes.entry(key).or_insert(next)
        })
        .collect()
}

struct Matcher<'p, 'a, 'b> {
    a: &'p Prefix<'a>,
    b: &'p Prefix<'b>,
    eps: f64,
    order: Vec<usize>,
    anchor: Vec<Option<(usize, Weight)>>,
    twin: Vec<usize>,
    map_ab: Vec<usize>,
    map_ba: Vec<usize>,
    budget: &'p mut Budget,
}

impl Matcher<'_, '_, '_> {
    fn extend(&mut self, depth: usize) -> Result<bool> {
        if depth == self.order.len() {
            return Ok(true);
        }
        let u = self.order[depth];
        let candidates: Vec<usize> = match self.anchor[u] {
            None => vec![0],
            Some((p, w)) => {
                let fp = self.map_ab[p];
                self.b.out_edges(fp).filter(|&(_, wv)| wv == w).map(|(v, _)| v).collect()
            }
        };
        let mut tried: Vec<usize> = Vec::new();
        for v in candidates {
            if self.map_ba[v] != UNMAPPED || tried.contains(&self.twin[v]) {
                continue;
            }
            if self.a.sig[u] != self.b.sig[v]
                || covariate_gap(self.a.ball, u, self.b.ball, v) > self.eps
                || !self.consistent(u, v)
            {
                continue;
            }
            self.budget.tick()?;
            tried.push(self.twin[v]);
            self.map_ab[u] = v;
            self.map_ba[v] = u;
            if self.extend(depth + 1)? {
                return Ok(true);
            }
            self.map_ab[u] = UNMAPPED;
            self.map_ba[v] = UNMAPPED;
        }
        Ok(false)
    }

    /// Links between `u` and already-mapped vertices must reappear with
    /// equal weights between `v` and their images, and vice versa.
    fn consistent(&self, u: usize, v: usize) -> bool {
        let (a, b) = (self.a, self.b);
        let mut count = 0usize;
        for (w, wt) in a.out_edges(u) {
            let fw = self.map_ab[w];
            if fw != UNMAPPED {
                if b.ball.weight(v, fw) != Some(wt) {
                    return false;
                }
                count += 1;
            }
        }
        if b.out_edges(v).filter(|&(x, _)| self.map_ba[x] != UNMAPPED).count() != count {
            return false;
        }
        count = 0;
        for (w, wt) in a.in_edges(u) {
            let fw = self.map_ab[w];
            if fw != UNMAPPED {
                if b.ball.weight(fw, v) != Some(wt) {
                    return false;
                }
                count += 1;
            }
        }
        b.in_edges(v).filter(|&(x, _)| self.map_ba[x] != UNMAPPED).count() == count
    }
}

/// Kuhn's augmenting-path bipartite matching on the compatibility relation.
fn perfect_matching_exists(n: usize, compatible: &dyn Fn(usize, usize) -> bool) -> bool {
    let adj: Vec<Vec<usize>> = (0..n).map(|u| (0..n).filter(|&v| compatible(u, v)).collect()).collect();
    let mut owner = vec![UNMAPPED; n];
    for u in 0..n {
        let mut seen = vec![false; n];
        if !augment(u, &adj, &mut owner, &mut seen) {
            return false;
        }
    }
    true
}

fn augment(u: usize, adj: &[Vec<usize>], owner: &mut [usize], seen: &mut [bool]) -> bool {
    for &v in &adj[u] {
        if seen[v] {
            continue;
        }
        seen[v] = true;
        if owner[v] == UNMAPPED || augment(owner[v], adj, owner, seen) {
            owner[v] = u;
            return true;
        }
    }
    false
}
