//! Brute-force reference implementations and random instance generators
//! shared by the integration tests.
#![allow(dead_code)]

use netlocal::graph::full_ball;
use netlocal::{Ball, CommunityBuilder, CommunityGraph};
use rand::seq::SliceRandom;
use rand::Rng;

/// Dense weighted digraph with per-vertex scalar covariates.
#[derive(Debug, Clone)]
pub struct Net {
    pub w: Vec<Vec<Option<u32>>>,
    pub cov: Vec<f64>,
}

impl Net {
    pub fn len(&self) -> usize {
        self.cov.len()
    }

    pub fn to_graph(&self) -> CommunityGraph {
        let mut b = CommunityBuilder::new(true, 1);
        for (i, c) in self.cov.iter().enumerate() {
            b.add_agent(&format!("v{i}"), &[*c], None).unwrap();
        }
        for i in 0..self.len() {
            for j in 0..self.len() {
                if let Some(w) = self.w[i][j] {
                    b.add_edge_index(i, j, w).unwrap();
                }
            }
        }
        b.build()
    }

    /// Complete rooted network at `root` as the library sees it.
    pub fn ball(&self, root: usize) -> Ball {
        full_ball(&self.to_graph(), root)
    }

    /// Same network with vertex `i` renamed `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Net {
        let n = self.len();
        let mut w = vec![vec![None; n]; n];
        let mut cov = vec![0.0; n];
        for i in 0..n {
            cov[perm[i]] = self.cov[i];
            for j in 0..n {
                w[perm[i]][perm[j]] = self.w[i][j];
            }
        }
        Net { w, cov }
    }
}

/// Shortest path length by enumerating every simple path.
pub fn brute_path(net: &Net, i: usize, j: usize) -> Option<u64> {
    fn walk(net: &Net, u: usize, target: usize, seen: &mut Vec<bool>, len: u64, best: &mut Option<u64>) {
        if u == target {
            *best = Some(best.map_or(len, |b| b.min(len)));
            return;
        }
        for v in 0..net.len() {
            if let Some(w) = net.w[u][v] {
                if !seen[v] {
                    seen[v] = true;
                    walk(net, v, target, seen, len + u64::from(w), best);
                    seen[v] = false;
                }
            }
        }
    }
    let mut seen = vec![false; net.len()];
    seen[i] = true;
    let mut best = None;
    walk(net, i, j, &mut seen, 0, &mut best);
    best
}

/// Vertices within `r` of `root` (root first) and their distances.
fn ball_vertices(net: &Net, root: usize, r: u64) -> Vec<(usize, u64)> {
    let mut out = vec![(root, 0)];
    for v in 0..net.len() {
        if v != root {
            if let Some(d) = brute_path(net, root, v) {
                if d <= r {
                    out.push((v, d));
                }
            }
        }
    }
    out
}

/// Smallest covariate tolerance over every root-preserving bijection of the
/// radius-`r` balls that matches edge weights exactly; infinity when none.
pub fn brute_min_eps(a: &Net, ra: usize, b: &Net, rb: usize, r: u64) -> f64 {
    let va = ball_vertices(a, ra, r);
    let vb = ball_vertices(b, rb, r);
    if va.len() != vb.len() {
        return f64::INFINITY;
    }
    let n = va.len();
    let mut perm: Vec<usize> = (1..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let image = |x: usize| if x == 0 { 0 } else { p[x - 1] };
        for x in 0..n {
            for y in 0..n {
                if a.w[va[x].0][va[y].0] != b.w[vb[image(x)].0][vb[image(y)].0] {
                    return;
                }
            }
        }
        let gap = (0..n).map(|x| (a.cov[va[x].0] - b.cov[vb[image(x)].0]).abs()).fold(0.0, f64::max);
        best = best.min(gap);
    });
    best
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

fn eccentricity(net: &Net, root: usize) -> u64 {
    (0..net.len()).filter_map(|v| brute_path(net, root, v)).max().unwrap_or(0)
}

/// Distance by exhaustive search over every radius and every bijection.
pub fn brute_distance(a: &Net, ra: usize, b: &Net, rb: usize) -> f64 {
    let big_r = eccentricity(a, ra).max(eccentricity(b, rb));
    let mut best: f64 = 2.0;
    let mut last = f64::INFINITY;
    for r in 0..=big_r {
        let eps = brute_min_eps(a, ra, b, rb, r);
        best = best.min(1.0 / (1.0 + r as f64) + eps);
        last = eps;
    }
    best.min(last)
}

/// The ε profile for r = 0..=R.
pub fn brute_profile(a: &Net, ra: usize, b: &Net, rb: usize) -> Vec<(u64, f64)> {
    let big_r = eccentricity(a, ra).max(eccentricity(b, rb));
    (0..=big_r).map(|r| (r, brute_min_eps(a, ra, b, rb, r))).collect()
}

/// Random network on `n` vertices: arcs appear with probability `p`,
/// weights from `1..=max_w`, covariates from a coarse grid so that ties
/// and near matches are common.
pub fn random_net<R: Rng>(rng: &mut R, n: usize, p: f64, max_w: u32, directed: bool) -> Net {
    let mut w = vec![vec![None; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j || (!directed && j < i) {
                continue;
            }
            if rng.random::<f64>() < p {
                let wt = rng.random_range(1..=max_w);
                w[i][j] = Some(wt);
                if !directed {
                    w[j][i] = Some(wt);
                }
            }
        }
    }
    let cov = (0..n).map(|_| f64::from(rng.random_range(0..4u8)) * 0.25).collect();
    Net { w, cov }
}

/// A relabeled copy with a few covariates nudged and sometimes one arc
/// toggled, so that pairs agree up to some radius.
pub fn perturbed<R: Rng>(rng: &mut R, net: &Net, directed: bool) -> Net {
    let n = net.len();
    let mut out = net.clone();
    for c in out.cov.iter_mut() {
        if rng.random::<f64>() < 0.3 {
            *c += f64::from(rng.random_range(1..=3u8)) * 0.125 * if rng.random() { 1.0 } else { -1.0 };
        }
    }
    if n >= 2 && rng.random::<f64>() < 0.5 {
        let i = rng.random_range(0..n);
        let j = (i + rng.random_range(1..n)) % n;
        let new = if out.w[i][j].is_some() { None } else { Some(1) };
        out.w[i][j] = new;
        if !directed {
            out.w[j][i] = new;
        }
    }
    let mut perm: Vec<usize> = (1..n).collect();
    perm.shuffle(rng);
    let full: Vec<usize> = std::iter::once(0).chain(perm).collect();
    out.relabel(&full)
}

/// A random pair of rooted networks (root 0) with at most `max_n` vertices.
pub fn random_pair<R: Rng>(rng: &mut R, max_n: usize) -> (Net, Net) {
    let directed = rng.random::<f64>() < 0.3;
    let max_w = if rng.random::<f64>() < 0.5 { 1 } else { 3 };
    let n = rng.random_range(1..=max_n);
    let p = rng.random_range(0.2..0.6);
    let a = random_net(rng, n, p, max_w, directed);
    let b = if rng.random::<f64>() < 0.8 {
        perturbed(rng, &a, directed)
    } else {
        let m = rng.random_range(1..=max_n);
        random_net(rng, m, p, max_w, directed)
    };
    (a, b)
}
