//! Sampling the unimodular branching process driven by a depth-h seed:
//! draw a depth-h tree from the seed, then repeatedly extend the frontier
//! one level at a time with the seed's conditional extension kernel.
//!
//! The extension kernel at a directed edge is determined by the pair of
//! depth-(h−1) component types on its two sides; candidates and weights
//! come from decomposing seed atoms at their root edges.

use crate::canon::{tree_code, CanonicalCode};
use crate::entropy::{e_seed_explicit, ExplicitSeed};
use crate::error::{GraphLdpError, Result};
use crate::mark::{check_prob_vector, Sym};
use crate::tree::MarkedTree;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Poisson;
use std::collections::HashMap;

/// Abort sampling once a tree holds this many vertices.
pub const DEFAULT_VERTEX_BUDGET: usize = 1_000_000;

/// A directed component type: the edge mark pointing into the component
/// root, together with the component itself.
#[derive(Debug, Clone)]
pub struct GraftArg {
    pub mark: Sym,
    pub subtree: MarkedTree,
}

/// Join two directed components: the root keeps the first component's
/// subtree and gains one extra child carrying the second component, with
/// `ξ(child, root)` the first mark and `ξ(root, child)` the second.
pub fn oplus(t: &GraftArg, t_prime: &GraftArg) -> Result<MarkedTree> {
    let mut out = t.subtree.clone();
    let v = out.add_child(0, t_prime.subtree.mark[0], t_prime.mark, t.mark);
    out.graft(v, &t_prime.subtree)?;
    Ok(out)
}

type KernelKey = (Sym, CanonicalCode, Sym, CanonicalCode);

fn kernel_key(t_mark: Sym, t_tree: &MarkedTree, tp_mark: Sym, tp_tree: &MarkedTree, h: u32) -> KernelKey {
    (
        t_mark,
        tree_code(t_tree, h - 1),
        tp_mark,
        tree_code(tp_tree, h - 1),
    )
}

/// Candidate extensions per kernel key: full-depth replacement templates
/// with their unnormalized weights, merged by template class.
fn build_table(seed: &ExplicitSeed) -> Result<HashMap<KernelKey, Vec<(MarkedTree, f64)>>> {
    let h = seed.depth();
    let mut table: HashMap<KernelKey, Vec<(CanonicalCode, MarkedTree, f64)>> = HashMap::new();
    for atom in seed.atoms() {
        let tree = &atom.tree;
        for &w in tree.children(0) {
            // Decompose the atom at the root edge to w: the component away
            // from w is the extended side, the branch at w is the far side.
            let rest = tree.rest_view(w, h)?;
            let far = tree.subtree(w, h);
            let key = kernel_key(
                tree.xi_up[w as usize],
                &rest,
                tree.xi_down[w as usize],
                &far,
                h,
            );
            let code = tree_code(&rest, h);
            let entry = table.entry(key).or_default();
            match entry.iter_mut().find(|(c, _, _)| *c == code) {
                Some((_, _, weight)) => *weight += atom.prob,
                None => entry.push((code, rest, atom.prob)),
            }
        }
    }
    Ok(table
        .into_iter()
        .map(|(k, v)| (k, v.into_iter().map(|(_, t, w)| (t, w)).collect()))
        .collect())
}

/// The extension kernel of `seed` at the directed type pair `(t, t')`:
/// the conditional law of the full-depth type refining `t`, given the
/// far-side view `t'`. Returns class representatives with probabilities;
/// degenerate keys (mass below 1e−300) fall back to the point mass at
/// `t` itself.
pub fn hat_p(seed: &ExplicitSeed, t: &GraftArg, t_prime: &GraftArg) -> Result<Vec<(GraftArg, f64)>> {
    let h = seed.depth();
    if h < 1 {
        return Err(GraphLdpError::validation("seed depth must be at least 1"));
    }
    let table = build_table(seed)?;
    let key = kernel_key(t.mark, &t.subtree, t_prime.mark, &t_prime.subtree, h);
    let total: f64 = table
        .get(&key)
        .map(|v| v.iter().map(|(_, w)| w).sum())
        .unwrap_or(0.0);
    if total < 1e-300 {
        return Ok(vec![(t.clone(), 1.0)]);
    }
    Ok(table
        .get(&key)
        .unwrap()
        .iter()
        .map(|(tree, w)| {
            (
                GraftArg {
                    mark: t.mark,
                    subtree: tree.clone(),
                },
                w / total,
            )
        })
        .collect())
}

struct Kernel {
    templates: Vec<MarkedTree>,
    dist: WeightedIndex<f64>,
}

/// Reusable sampler: the kernel table is built once per seed.
pub struct UgwtSampler {
    h: u32,
    table: HashMap<KernelKey, Kernel>,
    atom_trees: Vec<MarkedTree>,
    atom_dist: WeightedIndex<f64>,
    budget: usize,
}

/// A sampled tree with diagnostics of the extension process.
#[derive(Debug)]
pub struct UgwtSample {
    pub tree: MarkedTree,
    /// Extension sites whose kernel key was missing or degenerate; the
    /// subtree was kept as is.
    pub fallbacks: u64,
    pub extensions: u64,
}

impl UgwtSampler {
    /// Needs an admissible seed: the mean edge-type counts must be flip
    /// symmetric, else the extension process is inconsistent.
    pub fn new(seed: &ExplicitSeed) -> Result<Self> {
        if seed.depth() < 1 {
            return Err(GraphLdpError::validation("seed depth must be at least 1"));
        }
        let e = e_seed_explicit(seed)?;
        let mut defect = 0.0f64;
        for (ty, &v) in &e {
            let flipped = e.get(&ty.flip()).copied().unwrap_or(0.0);
            defect = defect.max((v - flipped).abs());
        }
        if defect > 1e-9 {
            return Err(GraphLdpError::certification(format!(
                "seed is not admissible: edge-type symmetry defect {defect}"
            )));
        }
        let table = build_table(seed)?
            .into_iter()
            .filter_map(|(key, entries)| {
                let total: f64 = entries.iter().map(|(_, w)| w).sum();
                if total < 1e-300 {
                    return None;
                }
                let (templates, weights): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
                let dist = WeightedIndex::new(&weights).ok()?;
                Some((key, Kernel { templates, dist }))
            })
            .collect();
        let atom_trees: Vec<MarkedTree> = seed.atoms().iter().map(|a| a.tree.clone()).collect();
        let atom_dist = WeightedIndex::new(seed.atoms().iter().map(|a| a.prob))
            .map_err(|e| GraphLdpError::validation(format!("bad atom weights: {e}")))?;
        Ok(UgwtSampler {
            h: seed.depth(),
            table,
            atom_trees,
            atom_dist,
            budget: DEFAULT_VERTEX_BUDGET,
        })
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    /// Sample the process truncated at depth `cutoff ≥ h`.
    pub fn sample<R: Rng>(&self, cutoff: u32, rng: &mut R) -> Result<UgwtSample> {
        let h = self.h;
        if cutoff < h {
            return Err(GraphLdpError::validation(
                "cutoff must be at least the seed depth",
            ));
        }
        let mut tree = self.atom_trees[self.atom_dist.sample(rng)].clone();
        let mut live = tree.len();
        let mut fallbacks = 0u64;
        let mut extensions = 0u64;
        let mut frontier: Vec<u32> = tree.children(0).to_vec();
        for _round in 1..=(cutoff - h) {
            if frontier.is_empty() {
                break;
            }
            let mut next: Vec<u32> = Vec::new();
            for &v in &frontier {
                let vu = v as usize;
                let sub = tree.subtree(v, h - 1);
                let rest = tree.rest_view(v, h - 1)?;
                let key = kernel_key(tree.xi_down[vu], &sub, tree.xi_up[vu], &rest, h);
                extensions += 1;
                match self.table.get(&key) {
                    Some(kernel) => {
                        let template = &kernel.templates[kernel.dist.sample(rng)];
                        live = live + template.len() - sub.len();
                        if live > self.budget {
                            return Err(GraphLdpError::budget(format!(
                                "tree exceeded the vertex budget of {}",
                                self.budget
                            )));
                        }
                        tree.clear_children(v);
                        tree.graft(v, template)?;
                    }
                    None => {
                        fallbacks += 1;
                    }
                }
                next.extend_from_slice(tree.children(v));
            }
            frontier = next;
        }
        Ok(UgwtSample {
            tree: tree.compact(cutoff),
            fallbacks,
            extensions,
        })
    }
}

/// One tree from the process of `seed` truncated at depth `cutoff`, with
/// the default vertex budget. Build a [`UgwtSampler`] to amortize the
/// table across many draws.
pub fn sample_ugwt<R: Rng>(seed: &ExplicitSeed, cutoff: u32, rng: &mut R) -> Result<MarkedTree> {
    Ok(UgwtSampler::new(seed)?.sample(cutoff, rng)?.tree)
}

/// Direct sampler of the depth-`cutoff` branching process behind the
/// closed-form seed: every vertex gets Poisson(`d`) children, child marks
/// iid from `nu`, and each parent edge gets a pair from `chi` in a
/// uniformly random orientation.
pub fn sample_pstar_tree<R: Rng>(
    nu: &[f64],
    chi: &[Vec<f64>],
    d: f64,
    cutoff: u32,
    rng: &mut R,
) -> Result<MarkedTree> {
    check_prob_vector(nu, "vertex mark law")?;
    let k = chi.len();
    if k == 0 || chi.iter().any(|row| row.len() != k) {
        return Err(GraphLdpError::validation("edge-pair law must be square"));
    }
    let flat: Vec<f64> = chi.iter().flatten().copied().collect();
    check_prob_vector(&flat, "edge-pair law")?;
    if !(d > 0.0) || !d.is_finite() {
        return Err(GraphLdpError::validation("mean degree must be positive"));
    }
    let mark_dist = WeightedIndex::new(nu)
        .map_err(|e| GraphLdpError::validation(format!("bad vertex law: {e}")))?;
    let pair_dist = WeightedIndex::new(&flat)
        .map_err(|e| GraphLdpError::validation(format!("bad edge-pair law: {e}")))?;
    let offspring = Poisson::new(d)
        .map_err(|e| GraphLdpError::validation(format!("bad mean degree: {e}")))?;

    let root_mark = mark_dist.sample(rng) as Sym;
    let mut tree = MarkedTree::new_root(root_mark);
    let mut frontier: Vec<u32> = vec![0];
    for _depth in 0..cutoff {
        let mut next = Vec::new();
        for &v in &frontier {
            let n_children = offspring.sample(rng) as u64;
            for _ in 0..n_children {
                if tree.len() >= DEFAULT_VERTEX_BUDGET {
                    return Err(GraphLdpError::budget(format!(
                        "tree exceeded the vertex budget of {DEFAULT_VERTEX_BUDGET}"
                    )));
                }
                let mark = mark_dist.sample(rng) as Sym;
                let flat_idx = pair_dist.sample(rng);
                let (x1, x2) = ((flat_idx / k) as Sym, (flat_idx % k) as Sym);
                let (down, up) = if rng.random::<bool>() {
                    (x1, x2)
                } else {
                    (x2, x1)
                };
                next.push(tree.add_child(v, mark, down, up));
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    Ok(tree)
}

fn ordered_pair_prob(chi: &[Vec<f64>], down: Sym, up: Sym) -> f64 {
    (chi[down as usize][up as usize] + chi[up as usize][down as usize]) / 2.0
}

fn gw_children_prob(
    nu: &[f64],
    chi: &[Vec<f64>],
    d: f64,
    tree: &MarkedTree,
    v: u32,
    depth_left: u32,
) -> f64 {
    if depth_left == 0 {
        return 1.0;
    }
    // Children form a Poisson process over slot types; group them by
    // (edge pair, subtree class) so multiplicities get their 1/m! factor.
    let mut groups: HashMap<(Sym, Sym, CanonicalCode), (u32, f64)> = HashMap::new();
    for &c in tree.children(v) {
        let cu = c as usize;
        let code = tree_code(&tree.subtree(c, depth_left - 1), depth_left - 1);
        let key = (tree.xi_down[cu], tree.xi_up[cu], code);
        match groups.get_mut(&key) {
            Some((m, _)) => *m += 1,
            None => {
                let q = ordered_pair_prob(chi, tree.xi_down[cu], tree.xi_up[cu])
                    * nu[tree.mark[cu] as usize]
                    * gw_children_prob(nu, chi, d, tree, c, depth_left - 1);
                groups.insert(key, (1, q));
            }
        }
    }
    let mut p = (-d).exp();
    for (m, q) in groups.into_values() {
        let mut fact = 1.0;
        for i in 1..=m {
            fact *= i as f64;
        }
        p *= (d * q).powi(m as i32) / fact;
    }
    p
}

/// Exact probability that the depth-`cutoff` truncation of the branching
/// process behind the closed-form seed lands in the isomorphism class of
/// `tree` (itself read to depth `cutoff`).
pub fn pstar_class_prob(
    nu: &[f64],
    chi: &[Vec<f64>],
    d: f64,
    tree: &MarkedTree,
    cutoff: u32,
) -> Result<f64> {
    check_prob_vector(nu, "vertex mark law")?;
    let k = chi.len();
    if k == 0 || chi.iter().any(|row| row.len() != k) {
        return Err(GraphLdpError::validation("edge-pair law must be square"));
    }
    let flat: Vec<f64> = chi.iter().flatten().copied().collect();
    check_prob_vector(&flat, "edge-pair law")?;
    if !(d > 0.0) || !d.is_finite() {
        return Err(GraphLdpError::validation("mean degree must be positive"));
    }
    if tree.mark.iter().any(|&m| m as usize >= nu.len()) {
        return Err(GraphLdpError::validation("vertex mark outside the law"));
    }
    for v in 1..tree.len() {
        if tree.xi_down[v] as usize >= k || tree.xi_up[v] as usize >= k {
            return Err(GraphLdpError::validation("edge mark outside the law"));
        }
    }
    Ok(nu[tree.mark[0] as usize] * gw_children_prob(nu, chi, d, tree, 0, cutoff))
}
