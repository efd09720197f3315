//! Empirical neighborhood statistics: the depth-h distribution of rooted
//! balls, mark and degree marginals, oriented edge-type counts, distances
//! between measures, and a Monte Carlo mass-transport check.
//!
//! Weights are stored as exact counts over a common denominator; floating
//! point enters only when a caller asks for numeric weights.

use crate::ball::{ball, RootedBall};
use crate::canon::{canonical_code, tree_code, CanonicalCode};
use crate::error::{GraphLdpError, Result};
use crate::graph::MarkedGraph;
use crate::mark::Sym;
use crate::metric::local_distance;
use crate::tree::MarkedTree;
use rand::Rng;
use rayon::prelude::*;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
struct Atom {
    count: u64,
    rep: RootedBall,
}

/// A finitely supported distribution over depth-`h` ball classes, with one
/// representative ball per class. Weights are exact fractions
/// `count / total`.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    h: u32,
    total: u64,
    atoms: BTreeMap<CanonicalCode, Atom>,
}

impl EmpiricalMeasure {
    /// Accumulate a sample of balls into a measure. All balls must carry
    /// finite marks and depth at least `h`.
    pub fn from_balls<I: IntoIterator<Item = RootedBall>>(balls: I, h: u32) -> Result<Self> {
        let mut atoms: BTreeMap<CanonicalCode, Atom> = BTreeMap::new();
        let mut total = 0u64;
        for b in balls {
            if b.depth < h {
                return Err(GraphLdpError::validation(format!(
                    "ball of depth {} in a depth-{} measure",
                    b.depth, h
                )));
            }
            let code = canonical_code(&b)?;
            total += 1;
            match atoms.entry(code) {
                Entry::Vacant(e) => {
                    e.insert(Atom { count: 1, rep: b });
                }
                Entry::Occupied(mut e) => e.get_mut().count += 1,
            }
        }
        if total == 0 {
            return Err(GraphLdpError::validation("empty sample"));
        }
        Ok(EmpiricalMeasure { h, total, atoms })
    }

    pub fn depth(&self) -> u32 {
        self.h
    }

    /// Common denominator of all weights.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct ball classes.
    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }

    /// Iterate `(code, count, representative)` in code order.
    pub fn iter(&self) -> impl Iterator<Item = (&CanonicalCode, u64, &RootedBall)> {
        self.atoms.iter().map(|(c, a)| (c, a.count, &a.rep))
    }

    pub fn count_of(&self, code: &CanonicalCode) -> u64 {
        self.atoms.get(code).map_or(0, |a| a.count)
    }

    pub fn weight_of(&self, code: &CanonicalCode) -> f64 {
        self.count_of(code) as f64 / self.total as f64
    }

    pub fn representative(&self, code: &CanonicalCode) -> Option<&RootedBall> {
        self.atoms.get(code).map(|a| &a.rep)
    }

    /// Check that each representative reproduces its key.
    pub fn validate(&self) -> Result<()> {
        for (code, atom) in &self.atoms {
            if &canonical_code(&atom.rep)? != code {
                return Err(GraphLdpError::validation(
                    "representative does not reproduce its code",
                ));
            }
        }
        let total: u64 = self.atoms.values().map(|a| a.count).sum();
        if total != self.total {
            return Err(GraphLdpError::validation("weights do not sum to one"));
        }
        Ok(())
    }
}

/// Empirical neighborhood distribution of a graph at depth `h`:
/// the uniform mixture over the `n` rooted balls `ball(G, v, h)`.
pub fn empirical_distribution(g: &MarkedGraph, h: u32) -> Result<EmpiricalMeasure> {
    if !(g.theta_space().is_finite() && g.xi_space().is_finite()) {
        return Err(GraphLdpError::validation(
            "empirical distribution needs finite mark alphabets; project real marks first",
        ));
    }
    if g.n() == 0 {
        return Err(GraphLdpError::validation("empty graph"));
    }
    let codes: Result<Vec<CanonicalCode>> = (0..g.n() as u32)
        .into_par_iter()
        .map(|v| canonical_code(&ball(g, v, h)))
        .collect();
    let mut firsts: BTreeMap<CanonicalCode, (u64, u32)> = BTreeMap::new();
    for (v, code) in codes?.into_iter().enumerate() {
        let e = firsts.entry(code).or_insert((0, v as u32));
        e.0 += 1;
    }
    let atoms = firsts
        .into_iter()
        .map(|(code, (count, v))| {
            (
                code,
                Atom {
                    count,
                    rep: ball(g, v, h),
                },
            )
        })
        .collect();
    Ok(EmpiricalMeasure {
        h,
        total: g.n() as u64,
        atoms,
    })
}

/// Distribution of the root mark: a probability vector over `Θ`.
pub fn mark_marginal(mu: &EmpiricalMeasure) -> Result<Vec<f64>> {
    let kt = mu
        .atoms
        .values()
        .next()
        .and_then(|a| a.rep.graph.theta_space().size())
        .ok_or_else(|| GraphLdpError::validation("mark marginal needs a finite vertex alphabet"))?;
    let mut counts = vec![0u64; kt];
    for atom in mu.atoms.values() {
        counts[atom.rep.graph.tau(0).as_sym()? as usize] += atom.count;
    }
    Ok(counts.iter().map(|&c| c as f64 / mu.total as f64).collect())
}

/// Mean counts of root neighbors by oriented mark pair: entry `(x, x')`
/// counts neighbors `v` of the root `o` with `ξ(v,o) = x` and
/// `ξ(o,v) = x'`. Also returns the total mean degree.
pub fn degree_matrix(mu: &EmpiricalMeasure) -> Result<(Vec<Vec<f64>>, f64)> {
    if mu.h < 1 {
        return Err(GraphLdpError::validation(
            "degree matrix needs measure depth at least 1",
        ));
    }
    let kx = mu
        .atoms
        .values()
        .next()
        .and_then(|a| a.rep.graph.xi_space().size())
        .ok_or_else(|| GraphLdpError::validation("degree matrix needs a finite edge alphabet"))?;
    let mut counts = vec![vec![0u64; kx]; kx];
    for atom in mu.atoms.values() {
        let g = &atom.rep.graph;
        for &v in g.neighbors(0) {
            let x = g.xi(v, 0)?.as_sym()? as usize;
            let xp = g.xi(0, v)?.as_sym()? as usize;
            counts[x][xp] += atom.count;
        }
    }
    let mut deg = vec![vec![0.0; kx]; kx];
    let mut scalar = 0.0;
    for x in 0..kx {
        for xp in 0..kx {
            deg[x][xp] = counts[x][xp] as f64 / mu.total as f64;
            scalar += deg[x][xp];
        }
    }
    Ok((deg, scalar))
}

/// Type of an edge at the root, truncated one level below the type depth
/// `h`: the oriented mark pair together with the classes of the two
/// components left by deleting the edge.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeType {
    /// `(ξ(v, o), class of the root-side component at depth h−1)`.
    pub toward: (Sym, CanonicalCode),
    /// `(ξ(o, v), class of the far-side component at depth h−1)`.
    pub away: (Sym, CanonicalCode),
}

impl EdgeType {
    /// The same edge viewed from its other endpoint.
    pub fn flip(&self) -> EdgeType {
        EdgeType {
            toward: self.away.clone(),
            away: self.toward.clone(),
        }
    }
}

/// BFS component of `start` after deleting the edge `cut`, truncated at
/// `depth`. Errors unless the truncated component is a tree.
fn component_tree(g: &MarkedGraph, start: u32, cut: (u32, u32), depth: u32) -> Result<MarkedTree> {
    let is_cut = |a: u32, b: u32| (a, b) == cut || (b, a) == cut;
    let n = g.n();
    let mut dist = vec![u32::MAX; n];
    let mut order = vec![start];
    dist[start as usize] = 0;
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        let du = dist[u as usize];
        if du == depth {
            continue;
        }
        for &w in g.neighbors(u) {
            if is_cut(u, w) || dist[w as usize] != u32::MAX {
                continue;
            }
            dist[w as usize] = du + 1;
            order.push(w);
        }
    }
    // The truncated component is the subgraph induced by `order`; it is a
    // tree exactly when the induced edge count is |order| − 1.
    let mut induced = 0usize;
    for &u in &order {
        for &w in g.neighbors(u) {
            if u < w && !is_cut(u, w) && dist[w as usize] != u32::MAX {
                induced += 1;
            }
        }
    }
    if induced != order.len() - 1 {
        return Err(GraphLdpError::validation(
            "edge type undefined: component contains a cycle within the truncation depth",
        ));
    }
    let mut t = MarkedTree::new_root(g.tau(start).as_sym()?);
    let mut new_id = vec![0u32; n];
    for &v in order.iter().skip(1) {
        let p = *g
            .neighbors(v)
            .iter()
            .find(|&&u| !is_cut(u, v) && dist[u as usize] + 1 == dist[v as usize])
            .expect("non-root BFS vertex has a parent");
        let nid = t.add_child(
            new_id[p as usize],
            g.tau(v).as_sym()?,
            g.xi(p, v)?.as_sym()?,
            g.xi(v, p)?.as_sym()?,
        );
        new_id[v as usize] = nid;
    }
    Ok(t)
}

/// Depth-`h` types of the edges at the root of `b`, with multiplicities.
/// Needs `b.depth ≥ h ≥ 1`; both components of every root edge must be
/// trees within depth `h − 1`.
pub fn edge_type_counts(b: &RootedBall, h: u32) -> Result<BTreeMap<EdgeType, u64>> {
    if h < 1 {
        return Err(GraphLdpError::validation("edge types need depth at least 1"));
    }
    if b.depth < h {
        return Err(GraphLdpError::validation(format!(
            "ball of depth {} cannot resolve depth-{} edge types",
            b.depth, h
        )));
    }
    let g = &b.graph;
    let root = b.root();
    let mut out: BTreeMap<EdgeType, u64> = BTreeMap::new();
    for &v in g.neighbors(root) {
        let cut = (root, v);
        let root_side = component_tree(g, root, cut, h - 1)?;
        let far_side = component_tree(g, v, cut, h - 1)?;
        let ty = EdgeType {
            toward: (g.xi(v, root)?.as_sym()?, tree_code(&root_side, h - 1)),
            away: (g.xi(root, v)?.as_sym()?, tree_code(&far_side, h - 1)),
        };
        *out.entry(ty).or_insert(0) += 1;
    }
    Ok(out)
}

/// Mean edge-type counts under `mu`: `e(g, g') = E[count of type (g, g')
/// at the root]`.
pub fn e_mu(mu: &EmpiricalMeasure, h: u32) -> Result<BTreeMap<EdgeType, f64>> {
    let mut acc: BTreeMap<EdgeType, u64> = BTreeMap::new();
    for atom in mu.atoms.values() {
        for (ty, c) in edge_type_counts(&atom.rep, h)? {
            *acc.entry(ty).or_insert(0) += c * atom.count;
        }
    }
    Ok(acc
        .into_iter()
        .map(|(ty, c)| (ty, c as f64 / mu.total as f64))
        .collect())
}

/// Average truncated distance between the balls of two graphs on the same
/// vertex set under the identity coupling:
/// `(1/n) Σ_v min(dist(ball(G1,v,h), ball(G2,v,h)), 2)`. This upper-bounds
/// the bounded-Lipschitz distance between the two depth-`h` empirical
/// distributions.
pub fn coupled_bl_bound(g1: &MarkedGraph, g2: &MarkedGraph, h: u32) -> Result<f64> {
    if g1.n() != g2.n() {
        return Err(GraphLdpError::validation(format!(
            "vertex sets differ: {} vs {}",
            g1.n(),
            g2.n()
        )));
    }
    if g1.n() == 0 {
        return Err(GraphLdpError::validation("empty graph"));
    }
    let per: Result<Vec<f64>> = (0..g1.n() as u32)
        .into_par_iter()
        .map(|v| {
            let b1 = ball(g1, v, h);
            let b2 = ball(g2, v, h);
            local_distance(&b1, &b2, h).map(|d| d.min(2.0))
        })
        .collect();
    Ok(per?.iter().sum::<f64>() / g1.n() as f64)
}

/// Total variation distance between two same-depth measures.
pub fn tv_distance(mu1: &EmpiricalMeasure, mu2: &EmpiricalMeasure) -> Result<f64> {
    if mu1.h != mu2.h {
        return Err(GraphLdpError::validation(format!(
            "depth mismatch: {} vs {}",
            mu1.h, mu2.h
        )));
    }
    // |c1/n1 − c2/n2| = |c1 n2 − c2 n1| / (n1 n2), summed exactly.
    let (n1, n2) = (mu1.total as u128, mu2.total as u128);
    let mut num = 0u128;
    for (code, a) in &mu1.atoms {
        let c1 = a.count as u128;
        let c2 = mu2.count_of(code) as u128;
        num += (c1 * n2).abs_diff(c2 * n1);
    }
    for (code, a) in &mu2.atoms {
        if !mu1.atoms.contains_key(code) {
            num += a.count as u128 * n1;
        }
    }
    Ok(num as f64 / (2.0 * (n1 * n2) as f64))
}

/// Monte Carlo mass-transport check. For each sampled rooted ball the two
/// sums `Σ_{v∼o} f(b, o, v)` and `Σ_{v∼o} f(b, v, o)` are accumulated;
/// their means agree for unimodular sampling laws. Returns both means and
/// the 99% half-width of the paired difference.
pub fn check_unimodular_mc<R, S, F>(
    mut sampler: S,
    f: F,
    n_samples: u64,
    rng: &mut R,
) -> (f64, f64, f64)
where
    R: Rng,
    S: FnMut(&mut R) -> RootedBall,
    F: Fn(&RootedBall, u32, u32) -> f64,
{
    assert!(n_samples >= 2, "need at least two samples");
    let mut sum_l = 0.0;
    let mut sum_r = 0.0;
    let mut sum_d = 0.0;
    let mut sum_d2 = 0.0;
    for _ in 0..n_samples {
        let b = sampler(rng);
        let root = b.root();
        let mut l = 0.0;
        let mut r = 0.0;
        for &v in b.graph.neighbors(root) {
            l += f(&b, root, v);
            r += f(&b, v, root);
        }
        sum_l += l;
        sum_r += r;
        let d = l - r;
        sum_d += d;
        sum_d2 += d * d;
    }
    let n = n_samples as f64;
    let mean_d = sum_d / n;
    let var = ((sum_d2 - n * mean_d * mean_d) / (n - 1.0)).max(0.0);
    // 99% two-sided normal quantile.
    let ci = 2.5758293035489004 * (var / n).sqrt();
    (sum_l / n, sum_r / n, ci)
}

/// Largest deviation of the seed's mean edge-type counts from flip
/// symmetry, `max |e(t,t') − e(t',t)|`. Admissible seeds keep it at
/// floating-point noise; a defect above `tol` is a certification error.
pub fn check_admissible(seed: &crate::entropy::Seed, tol: f64) -> Result<f64> {
    let e = crate::entropy::e_seed(seed)?;
    let mut defect = 0.0f64;
    for (ty, &v) in &e {
        let flipped = e.get(&ty.flip()).copied().unwrap_or(0.0);
        defect = defect.max((v - flipped).abs());
    }
    if defect > tol {
        return Err(GraphLdpError::certification(format!(
            "edge-type symmetry defect {defect} exceeds {tol}"
        )));
    }
    Ok(defect)
}
