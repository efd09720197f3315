//! Truncated entropy of depth-h neighborhood distributions and the
//! finite-depth rate functions of the three ensembles, plus exact
//! counting of marked graphs with given mark statistics.
//!
//! A seed is a probability distribution over depth-h rooted tree classes.
//! It is either explicit (a finite atom list) or the closed-form
//! Poisson-type seed determined by a vertex law, an edge-pair law and a
//! mean degree. The entropy functional J_h combines the seed entropy,
//! the edge-type distribution it induces, and factorial corrections; all
//! infinite sums are truncated with certified remainder bounds.

use crate::ball::tree_to_ball;
use crate::canon::{tree_code, CanonicalCode};
use crate::empirical::{edge_type_counts, EdgeType};
use crate::ensembles::{pair_count, CountVectors};
use crate::error::{GraphLdpError, Result};
use crate::mark::{check_prob_vector, chi_sorted, EdgePairLaw, MarkSpace, Sym, VertexLaw};
use crate::tree::MarkedTree;
use num_bigint::BigUint;
use num_integer::binomial;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Compensated sum; the error stays O(machine epsilon) regardless of the
/// number of terms.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    pub(crate) fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum
    }
}

/// One atom of an explicit seed: a depth-bounded rooted tree class with
/// its probability.
#[derive(Debug, Clone)]
pub struct SeedAtom {
    pub tree: MarkedTree,
    pub prob: f64,
    pub code: CanonicalCode,
}

/// A finitely supported distribution over rooted tree classes of bounded
/// depth, over finite mark alphabets.
#[derive(Debug, Clone)]
pub struct ExplicitSeed {
    depth: u32,
    theta_size: usize,
    xi_size: usize,
    atoms: Vec<SeedAtom>,
    index: BTreeMap<CanonicalCode, usize>,
    /// Total-variation distance to the untruncated distribution this seed
    /// approximates; zero for seeds that are exact by construction.
    truncation_bound: f64,
}

impl ExplicitSeed {
    pub fn new(
        depth: u32,
        theta_size: usize,
        xi_size: usize,
        atoms: Vec<(MarkedTree, f64)>,
        truncation_bound: f64,
    ) -> Result<Self> {
        if theta_size == 0 || xi_size == 0 {
            return Err(GraphLdpError::validation("alphabets must be nonempty"));
        }
        if !(truncation_bound >= 0.0) {
            return Err(GraphLdpError::validation("truncation bound must be nonnegative"));
        }
        let mut out: Vec<SeedAtom> = Vec::with_capacity(atoms.len());
        let mut index = BTreeMap::new();
        let mut total = Kahan::default();
        for (tree, prob) in atoms {
            if !prob.is_finite() || prob < 0.0 {
                return Err(GraphLdpError::validation("atom probabilities must be finite and nonnegative"));
            }
            if prob == 0.0 {
                continue;
            }
            if tree.depth() > depth {
                return Err(GraphLdpError::validation("atom tree deeper than the seed depth"));
            }
            for v in 0..tree.len() {
                if tree.mark[v] as usize >= theta_size {
                    return Err(GraphLdpError::validation("vertex mark outside the alphabet"));
                }
                if v > 0
                    && (tree.xi_down[v] as usize >= xi_size || tree.xi_up[v] as usize >= xi_size)
                {
                    return Err(GraphLdpError::validation("edge mark outside the alphabet"));
                }
            }
            let code = tree_code(&tree, depth);
            if index.insert(code.clone(), out.len()).is_some() {
                return Err(GraphLdpError::validation("duplicate atom class"));
            }
            total.add(prob);
            out.push(SeedAtom { tree, prob, code });
        }
        if out.is_empty() {
            return Err(GraphLdpError::validation("seed needs at least one atom"));
        }
        if (total.value() - 1.0).abs() > 1e-12 {
            return Err(GraphLdpError::validation(format!(
                "atom probabilities sum to {}, not 1",
                total.value()
            )));
        }
        Ok(ExplicitSeed {
            depth,
            theta_size,
            xi_size,
            atoms: out,
            index,
            truncation_bound,
        })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn theta_size(&self) -> usize {
        self.theta_size
    }

    pub fn xi_size(&self) -> usize {
        self.xi_size
    }

    pub fn atoms(&self) -> &[SeedAtom] {
        &self.atoms
    }

    pub fn truncation_bound(&self) -> f64 {
        self.truncation_bound
    }

    /// Probability of a depth-truncated tree class, zero off the support.
    pub fn prob_of(&self, code: &CanonicalCode) -> f64 {
        self.index.get(code).map_or(0.0, |&i| self.atoms[i].prob)
    }
}

/// A seed distribution over depth-h rooted tree classes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SeedRepr", into = "SeedRepr")]
pub enum Seed {
    Explicit(ExplicitSeed),
    /// The Poisson-type closed-form seed at depth 1: root mark from `nu`,
    /// independent Poisson counts of children per (mark, edge-pair) cell
    /// with intensities `nu[θ']·d_mat[x][x']`.
    PStar {
        nu: Vec<f64>,
        chi: Vec<Vec<f64>>,
        d: f64,
    },
}

#[derive(Serialize, Deserialize)]
struct SeedAtomRepr {
    prob: f64,
    mark: Vec<Sym>,
    parent: Vec<u32>,
    xi_down: Vec<Sym>,
    xi_up: Vec<Sym>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SeedRepr {
    PStar {
        nu: Vec<f64>,
        chi: Vec<Vec<f64>>,
        d: f64,
    },
    Explicit {
        depth: u32,
        theta_size: usize,
        xi_size: usize,
        truncation_bound: f64,
        atoms: Vec<SeedAtomRepr>,
    },
}

impl From<Seed> for SeedRepr {
    fn from(s: Seed) -> SeedRepr {
        match s {
            Seed::PStar { nu, chi, d } => SeedRepr::PStar { nu, chi, d },
            Seed::Explicit(e) => SeedRepr::Explicit {
                depth: e.depth,
                theta_size: e.theta_size,
                xi_size: e.xi_size,
                truncation_bound: e.truncation_bound,
                atoms: e
                    .atoms
                    .into_iter()
                    .map(|a| SeedAtomRepr {
                        prob: a.prob,
                        mark: a.tree.mark.clone(),
                        parent: a.tree.parent.clone(),
                        xi_down: a.tree.xi_down.clone(),
                        xi_up: a.tree.xi_up.clone(),
                    })
                    .collect(),
            },
        }
    }
}

impl TryFrom<SeedRepr> for Seed {
    type Error = GraphLdpError;

    fn try_from(r: SeedRepr) -> Result<Seed> {
        match r {
            SeedRepr::PStar { nu, chi, d } => seed_pstar(nu, chi, d),
            SeedRepr::Explicit {
                depth,
                theta_size,
                xi_size,
                truncation_bound,
                atoms,
            } => {
                let atoms = atoms
                    .into_iter()
                    .map(|a| {
                        MarkedTree::from_parts(a.mark, a.parent, a.xi_down, a.xi_up)
                            .map(|t| (t, a.prob))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Seed::Explicit(ExplicitSeed::new(
                    depth,
                    theta_size,
                    xi_size,
                    atoms,
                    truncation_bound,
                )?))
            }
        }
    }
}

impl Seed {
    pub fn depth(&self) -> u32 {
        match self {
            Seed::Explicit(e) => e.depth,
            Seed::PStar { .. } => 1,
        }
    }

    pub fn theta_size(&self) -> usize {
        match self {
            Seed::Explicit(e) => e.theta_size,
            Seed::PStar { nu, .. } => nu.len(),
        }
    }

    pub fn xi_size(&self) -> usize {
        match self {
            Seed::Explicit(e) => e.xi_size,
            Seed::PStar { chi, .. } => chi.len(),
        }
    }
}

/// Validated closed-form seed with root-mark law `nu`, oriented edge-pair
/// law `chi` and mean degree `d`.
pub fn seed_pstar(nu: Vec<f64>, chi: Vec<Vec<f64>>, d: f64) -> Result<Seed> {
    check_prob_vector(&nu, "vertex mark law")?;
    let k = chi.len();
    if k == 0 || chi.iter().any(|row| row.len() != k) {
        return Err(GraphLdpError::validation("edge-pair law must be square"));
    }
    let flat: Vec<f64> = chi.iter().flatten().copied().collect();
    check_prob_vector(&flat, "edge-pair law")?;
    if !(d > 0.0) || !d.is_finite() {
        return Err(GraphLdpError::validation("mean degree must be positive"));
    }
    Ok(Seed::PStar { nu, chi, d })
}

/// Shannon entropy −Σ p log p of a probability vector, in nats.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    check_prob_vector(p, "entropy argument")?;
    let mut acc = Kahan::default();
    for &x in p {
        if x > 0.0 {
            acc.add(-x * x.ln());
        }
    }
    Ok(acc.value())
}

/// Relative entropy Σ p log(p/q); +∞ when p charges a q-null point.
pub fn relative_entropy(p: &[f64], q: &[f64]) -> Result<f64> {
    check_prob_vector(p, "relative entropy numerator")?;
    check_prob_vector(q, "relative entropy denominator")?;
    if p.len() != q.len() {
        return Err(GraphLdpError::validation("dimension mismatch"));
    }
    let mut acc = Kahan::default();
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Ok(f64::INFINITY);
            }
            acc.add(pi * (pi / qi).ln());
        }
    }
    Ok(acc.value().max(0.0))
}

/// The degree entropy term `s(d) = d/2 − (d/2) log d`, with `s(0) = 0`.
pub fn s_scalar(d: f64) -> Result<f64> {
    if !(d >= 0.0) || !d.is_finite() {
        return Err(GraphLdpError::validation("degree must be finite and nonnegative"));
    }
    if d == 0.0 {
        return Ok(0.0);
    }
    Ok(d / 2.0 - (d / 2.0) * d.ln())
}

/// Σ over all ordered mark pairs of `s(d_mat[x][x'])`; needs a symmetric
/// nonnegative matrix.
pub fn s_vec(d_mat: &[Vec<f64>]) -> Result<f64> {
    let k = d_mat.len();
    if k == 0 || d_mat.iter().any(|row| row.len() != k) {
        return Err(GraphLdpError::validation("degree matrix must be square"));
    }
    for x in 0..k {
        for y in 0..k {
            if (d_mat[x][y] - d_mat[y][x]).abs() > 1e-9 {
                return Err(GraphLdpError::validation("degree matrix must be symmetric"));
            }
        }
    }
    let mut acc = Kahan::default();
    for row in d_mat {
        for &v in row {
            acc.add(s_scalar(v)?);
        }
    }
    Ok(acc.value())
}

/// Split a total mean degree over mark pairs according to a sorted-pair
/// law: `d_mat[x][x] = d·p(x,x)` and `d_mat[x][x'] = (d/2)·p(min,max)`
/// off the diagonal. The result is symmetric with entries summing to `d`
/// when each off-diagonal pair is counted twice.
pub fn d_vector(d: f64, p_sorted: &BTreeMap<(Sym, Sym), f64>, k: usize) -> Result<Vec<Vec<f64>>> {
    if !(d >= 0.0) || !d.is_finite() {
        return Err(GraphLdpError::validation("degree must be finite and nonnegative"));
    }
    if k == 0 {
        return Err(GraphLdpError::validation("alphabet must be nonempty"));
    }
    let mut mat = vec![vec![0.0; k]; k];
    let mut total = Kahan::default();
    for (&(x, y), &p) in p_sorted {
        if x > y || y as usize >= k {
            return Err(GraphLdpError::validation("pair law keys must be sorted pairs in range"));
        }
        if !(p >= 0.0) || !p.is_finite() {
            return Err(GraphLdpError::validation("pair law entries must be nonnegative"));
        }
        total.add(p);
        if x == y {
            mat[x as usize][x as usize] = d * p;
        } else {
            mat[x as usize][y as usize] = d / 2.0 * p;
            mat[y as usize][x as usize] = d / 2.0 * p;
        }
    }
    if (total.value() - 1.0).abs() > 1e-9 {
        return Err(GraphLdpError::validation("pair law must sum to 1"));
    }
    Ok(mat)
}

fn ln_factorial(k: u64) -> f64 {
    let mut s = 0.0;
    for i in 2..=k {
        s += (i as f64).ln();
    }
    s
}

/// Truncated `E[log N!]` for `N ~ Poisson(lambda)` with a certified
/// remainder bound: after the stop index the terms decay at least
/// geometrically with ratio 1/2.
fn poisson_log_factorial_mean(lambda: f64) -> Result<(f64, f64)> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(GraphLdpError::validation("Poisson intensity must be nonnegative"));
    }
    if lambda == 0.0 {
        return Ok((0.0, 0.0));
    }
    if lambda > 700.0 {
        return Err(GraphLdpError::numeric("intensity too large for certified truncation"));
    }
    let mut p = (-lambda).exp();
    let mut lf = 0.0;
    let mut acc = Kahan::default();
    let k_min = (4.0 * lambda + 16.0).ceil() as u64;
    let mut k = 0u64;
    loop {
        k += 1;
        p *= lambda / k as f64;
        lf += (k as f64).ln();
        let term = p * lf;
        acc.add(term);
        if k >= k_min && term < 1e-22 * (1.0 + acc.value()) {
            let next = p * lambda / (k + 1) as f64 * (lf + ((k + 1) as f64).ln());
            return Ok((acc.value(), 2.0 * next));
        }
    }
}

/// Certified upper bound on `P(Poisson(lambda) > n)`.
fn poisson_upper_tail(lambda: f64, n: u32) -> Result<f64> {
    if !(lambda >= 0.0) || lambda > 700.0 {
        return Err(GraphLdpError::validation("intensity out of certified range"));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let mut p = (-lambda).exp();
    for k in 1..=n as u64 {
        p *= lambda / k as f64;
    }
    // p = pmf(n); sum the tail from n+1 until geometric domination.
    let mut acc = Kahan::default();
    let mut k = n as u64;
    loop {
        k += 1;
        p *= lambda / k as f64;
        acc.add(p);
        if k as f64 >= 2.0 * lambda + 16.0 && p < 1e-25 * (1.0 + acc.value()) {
            // ratio ≤ 1/2 beyond this point
            return Ok(acc.value() + 2.0 * p * lambda / (k + 1) as f64);
        }
    }
}

/// Mean root degree of a seed.
pub fn mean_degree(seed: &Seed) -> Result<f64> {
    match seed {
        Seed::Explicit(e) => {
            let mut acc = Kahan::default();
            for a in &e.atoms {
                acc.add(a.prob * a.tree.children(0).len() as f64);
            }
            Ok(acc.value())
        }
        Seed::PStar { d, .. } => Ok(*d),
    }
}

/// Root-mark law of a seed.
pub fn seed_mark_marginal(seed: &Seed) -> Result<Vec<f64>> {
    match seed {
        Seed::Explicit(e) => {
            let mut out = vec![0.0; e.theta_size];
            for a in &e.atoms {
                out[a.tree.mark[0] as usize] += a.prob;
            }
            Ok(out)
        }
        Seed::PStar { nu, .. } => Ok(nu.clone()),
    }
}

/// Mean number of root children per oriented edge-mark cell:
/// entry `[x][x']` counts children whose upward mark (into the root) is
/// `x` and downward mark is `x'`. Also returns the total mean degree.
pub fn seed_degree_matrix(seed: &Seed) -> Result<(Vec<Vec<f64>>, f64)> {
    match seed {
        Seed::Explicit(e) => {
            let k = e.xi_size;
            let mut mat = vec![vec![0.0; k]; k];
            for a in &e.atoms {
                for &c in a.tree.children(0) {
                    mat[a.tree.xi_up[c as usize] as usize][a.tree.xi_down[c as usize] as usize] +=
                        a.prob;
                }
            }
            let total = mat.iter().flatten().sum();
            Ok((mat, total))
        }
        Seed::PStar { chi, d, .. } => {
            let mat = d_vector(*d, &chi_sorted(chi), chi.len())?;
            Ok((mat, *d))
        }
    }
}

fn single_vertex_code(theta: Sym) -> CanonicalCode {
    tree_code(&MarkedTree::new_root(theta), 0)
}

pub(crate) fn e_seed_explicit(e: &ExplicitSeed) -> Result<BTreeMap<EdgeType, f64>> {
    let theta_space = MarkSpace::finite_discrete(e.theta_size);
    let xi_space = MarkSpace::finite_discrete(e.xi_size);
    let maps = e
        .atoms
        .par_iter()
        .map(|a| {
            let b = tree_to_ball(&a.tree, theta_space.clone(), xi_space.clone(), e.depth, false)?;
            Ok((a.prob, edge_type_counts(&b, e.depth)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out: BTreeMap<EdgeType, Kahan> = BTreeMap::new();
    for (p, counts) in maps {
        for (ty, c) in counts {
            out.entry(ty).or_default().add(p * c as f64);
        }
    }
    Ok(out.into_iter().map(|(ty, k)| (ty, k.value())).collect())
}

/// Mean edge-type counts at the root under the seed:
/// `e(t, t') = E[number of root edges of type (t, t')]`.
pub fn e_seed(seed: &Seed) -> Result<BTreeMap<EdgeType, f64>> {
    match seed {
        Seed::Explicit(e) => e_seed_explicit(e),
        Seed::PStar { nu, chi, d } => {
            let k = chi.len();
            let dmat = d_vector(*d, &chi_sorted(chi), k)?;
            let root_codes: Vec<CanonicalCode> =
                (0..nu.len()).map(|t| single_vertex_code(t as Sym)).collect();
            let mut out = BTreeMap::new();
            for (t, &qt) in nu.iter().enumerate() {
                for (tp, &qtp) in nu.iter().enumerate() {
                    for x in 0..k {
                        for xp in 0..k {
                            let v = qt * qtp * dmat[x][xp];
                            if v > 0.0 {
                                let ty = EdgeType {
                                    toward: (x as Sym, root_codes[t].clone()),
                                    away: (xp as Sym, root_codes[tp].clone()),
                                };
                                out.insert(ty, v);
                            }
                        }
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Edge-type distribution `π = e/d` induced by the seed.
pub fn pi_p(seed: &Seed) -> Result<BTreeMap<EdgeType, f64>> {
    let e = e_seed(seed)?;
    let d: f64 = e.values().sum();
    if d <= 0.0 {
        return Err(GraphLdpError::validation("seed has zero mean degree"));
    }
    Ok(e.into_iter().map(|(ty, v)| (ty, v / d)).collect())
}

/// Terms of the truncated entropy functional, reported separately.
#[derive(Debug, Clone, Serialize)]
pub struct EntropyReport {
    pub depth: u32,
    pub mean_degree: f64,
    /// Entropy of the seed distribution itself.
    pub h_seed: f64,
    /// `s(d) = d/2 − (d/2) log d` at the mean degree.
    pub s_of_degree: f64,
    /// Entropy of the induced edge-type distribution.
    pub h_pi: f64,
    /// `Σ_{t,t'} E[log (count of type (t,t'))!]`.
    pub e_log_factorials: f64,
    /// `J_h = −s(d) + h_seed − (d/2)·h_pi − e_log_factorials`.
    pub value: f64,
    /// Certified bound on the error from truncating infinite sums.
    pub truncation_bound: f64,
}

fn entropy_explicit(e: &ExplicitSeed) -> Result<EntropyReport> {
    let mut deg_acc = Kahan::default();
    for a in &e.atoms {
        deg_acc.add(a.prob * a.tree.children(0).len() as f64);
    }
    let d = deg_acc.value();
    if d <= 0.0 {
        return Err(GraphLdpError::validation(
            "entropy undefined for a seed with zero mean degree",
        ));
    }
    let mut h_seed = Kahan::default();
    for a in &e.atoms {
        h_seed.add(-a.prob * a.prob.ln());
    }

    let theta_space = MarkSpace::finite_discrete(e.theta_size);
    let xi_space = MarkSpace::finite_discrete(e.xi_size);
    let per_atom = e
        .atoms
        .par_iter()
        .map(|a| {
            let b = tree_to_ball(&a.tree, theta_space.clone(), xi_space.clone(), e.depth, false)?;
            let counts = edge_type_counts(&b, e.depth)?;
            let lf: f64 = counts.values().map(|&c| ln_factorial(c)).sum();
            Ok((a.prob, counts, lf))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut e_map: BTreeMap<EdgeType, Kahan> = BTreeMap::new();
    let mut elf = Kahan::default();
    for (p, counts, lf) in per_atom {
        elf.add(p * lf);
        for (ty, c) in counts {
            e_map.entry(ty).or_default().add(p * c as f64);
        }
    }
    let mut h_pi = Kahan::default();
    for k in e_map.values() {
        let w = k.value() / d;
        if w > 0.0 {
            h_pi.add(-w * w.ln());
        }
    }

    let s_d = s_scalar(d)?;
    let value = -s_d + h_seed.value() - d / 2.0 * h_pi.value() - elf.value();
    Ok(EntropyReport {
        depth: e.depth,
        mean_degree: d,
        h_seed: h_seed.value(),
        s_of_degree: s_d,
        h_pi: h_pi.value(),
        e_log_factorials: elf.value(),
        value,
        truncation_bound: 0.0,
    })
}

fn entropy_pstar(nu: &[f64], chi: &[Vec<f64>], d: f64) -> Result<EntropyReport> {
    let k = chi.len();
    let dmat = d_vector(d, &chi_sorted(chi), k)?;
    let h_q = shannon_entropy(nu)?;

    // Seed entropy: root-mark entropy plus one Poisson entropy per
    // (child mark, edge-mark pair) cell, H(Poi(λ)) = 2 s(λ) + E[log N!].
    let mut h_seed = Kahan::default();
    h_seed.add(h_q);
    let mut elf = Kahan::default();
    let mut bound = Kahan::default();
    for &q in nu {
        for row in &dmat {
            for &dv in row {
                let alpha = q * dv;
                let (m, rem) = poisson_log_factorial_mean(alpha)?;
                h_seed.add(2.0 * s_scalar(alpha)?);
                h_seed.add(m);
                elf.add(m);
                bound.add(2.0 * rem);
            }
        }
    }

    // Edge-type entropy: mark pair (θ, θ') iid from nu, edge cell from
    // the normalized degree split, independent of each other.
    let mut h_w = Kahan::default();
    for row in &dmat {
        for &dv in row {
            let w = dv / d;
            if w > 0.0 {
                h_w.add(-w * w.ln());
            }
        }
    }
    let h_pi = 2.0 * h_q + h_w.value();

    let s_d = s_scalar(d)?;
    let value = -s_d + h_seed.value() - d / 2.0 * h_pi - elf.value();
    Ok(EntropyReport {
        depth: 1,
        mean_degree: d,
        h_seed: h_seed.value(),
        s_of_degree: s_d,
        h_pi,
        e_log_factorials: elf.value(),
        value,
        truncation_bound: bound.value(),
    })
}

/// The depth-h entropy functional
/// `J_h(P) = −s(d) + H(P) − (d/2)·H(π_P) − Σ_{t,t'} E[log E_h(t,t')!]`.
///
/// Explicit seeds evaluate at their own depth; closed-form seeds evaluate
/// at depth 1 where every term factorizes over Poisson cells.
pub fn truncated_entropy_jh(seed: &Seed, h: u32) -> Result<EntropyReport> {
    match seed {
        Seed::Explicit(e) => {
            if h != e.depth {
                return Err(GraphLdpError::validation(format!(
                    "explicit seed of depth {} evaluates only at its own depth, got {h}",
                    e.depth
                )));
            }
            entropy_explicit(e)
        }
        Seed::PStar { nu, chi, d } => {
            if h != 1 {
                return Err(GraphLdpError::validation(
                    "closed-form seeds evaluate at depth 1",
                ));
            }
            entropy_pstar(nu, chi, *d)
        }
    }
}

/// Finite atom list approximating a closed-form seed: all depth-1 trees
/// with total root degree at most `n_max`, conditioned to that event.
/// The conditioning cost is recorded as the truncation bound. Explicit
/// seeds pass through unchanged.
pub fn explicit_truncation(seed: &Seed, n_max: u32) -> Result<ExplicitSeed> {
    let (nu, chi, d) = match seed {
        Seed::Explicit(e) => return Ok(e.clone()),
        Seed::PStar { nu, chi, d } => (nu, chi, *d),
    };
    let tk = nu.len();
    let xk = chi.len();
    let dmat = d_vector(d, &chi_sorted(chi), xk)?;
    // Cells in fixed order: (child mark, upward mark, downward mark).
    let mut cells: Vec<(Sym, Sym, Sym, f64)> = Vec::with_capacity(tk * xk * xk);
    for tp in 0..tk {
        for xu in 0..xk {
            for xd in 0..xk {
                cells.push((tp as Sym, xu as Sym, xd as Sym, nu[tp] * dmat[xu][xd]));
            }
        }
    }
    let c = cells.len();
    let mut est = 1f64;
    for i in 1..=c {
        est *= (n_max as f64 + i as f64) / i as f64;
    }
    if est * tk as f64 > 6e6 {
        return Err(GraphLdpError::budget(format!(
            "truncation would enumerate about {:.2e} atoms",
            est * tk as f64
        )));
    }

    let mut pmf = vec![vec![0.0f64; n_max as usize + 1]; c];
    for (i, &(_, _, _, a)) in cells.iter().enumerate() {
        let mut p = (-a).exp();
        for j in 0..=n_max as usize {
            pmf[i][j] = p;
            p *= a / (j as f64 + 1.0);
        }
    }

    // Depth-first enumeration of count assignments with total ≤ n_max.
    let mut atoms: Vec<(MarkedTree, f64)> = Vec::with_capacity(est as usize * tk);
    let mut raw_total = Kahan::default();
    let mut counts = vec![0u32; c];
    fn recurse(
        cells: &[(Sym, Sym, Sym, f64)],
        pmf: &[Vec<f64>],
        counts: &mut Vec<u32>,
        idx: usize,
        left: u32,
        prob: f64,
        root: Sym,
        atoms: &mut Vec<(MarkedTree, f64)>,
        raw_total: &mut Kahan,
    ) {
        if idx == cells.len() {
            let mut t = MarkedTree::new_root(root);
            for (i, &(tp, xu, xd, _)) in cells.iter().enumerate() {
                for _ in 0..counts[i] {
                    t.add_child(0, tp, xd, xu);
                }
            }
            raw_total.add(prob);
            atoms.push((t, prob));
            return;
        }
        for j in 0..=left {
            counts[idx] = j;
            recurse(
                cells,
                pmf,
                counts,
                idx + 1,
                left - j,
                prob * pmf[idx][j as usize],
                root,
                atoms,
                raw_total,
            );
        }
        counts[idx] = 0;
    }
    for (t, &q) in nu.iter().enumerate() {
        if q == 0.0 {
            continue;
        }
        recurse(
            &cells,
            &pmf,
            &mut counts,
            0,
            n_max,
            q,
            t as Sym,
            &mut atoms,
            &mut raw_total,
        );
    }

    let total = raw_total.value();
    if !(total > 0.0) {
        return Err(GraphLdpError::numeric("truncation kept no mass"));
    }
    for a in &mut atoms {
        a.1 /= total;
    }
    let tail = poisson_upper_tail(d, n_max)?;
    let bound = (1.0 - total).max(0.0).max(tail) + 1e-14;
    ExplicitSeed::new(1, tk, xk, atoms, bound)
}

/// Why a rate evaluated to +∞.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InfiniteRateReason {
    /// The seed's degree statistics differ from the required ones.
    DegreeMismatch,
    /// The seed's root-mark law differs from the required one.
    MarkMarginalMismatch,
    /// The seed charges cells that the projection leaves empty.
    SupportOutsideProjection,
    /// A relative-entropy term diverged.
    AbsoluteContinuityFailure,
}

/// A rate function evaluation with its decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub value: f64,
    pub reason: Option<InfiniteRateReason>,
    /// The entropy report behind the evaluation; absent when the rate
    /// short-circuited to +∞ before the entropy was needed.
    pub entropy: Option<EntropyReport>,
    /// Entropy of the seed's root-mark law.
    pub h_mark: f64,
    /// `s` summed over the seed's symmetrized degree matrix.
    pub s_d: f64,
    pub kl_edge: f64,
    pub kl_mark: f64,
    pub psi: f64,
    pub truncation_bound: f64,
}

impl RateReport {
    fn infinite(reason: InfiniteRateReason) -> RateReport {
        RateReport {
            value: f64::INFINITY,
            reason: Some(reason),
            entropy: None,
            h_mark: 0.0,
            s_d: 0.0,
            kl_edge: 0.0,
            kl_mark: 0.0,
            psi: 0.0,
            truncation_bound: 0.0,
        }
    }
}

const MARGINAL_TOL: f64 = 1e-9;

/// Rate function of the conditioned ensemble with degree split `d_mat`
/// and mark law `q`: `H(q) + s(d_mat) − J_h(P)` on seeds matching both
/// statistics, +∞ otherwise.
pub fn rate_da(seed: &Seed, h: u32, d_mat: &[Vec<f64>], q: &[f64]) -> Result<RateReport> {
    check_prob_vector(q, "mark law")?;
    if q.len() != seed.theta_size() || d_mat.len() != seed.xi_size() {
        return Err(GraphLdpError::validation("alphabet sizes do not match the seed"));
    }
    let s_d = s_vec(d_mat)?;
    let h_mark = shannon_entropy(q)?;

    // Only the symmetrized degree split is identified, so the seed matrix
    // is symmetrized before comparing against the target.
    let (deg, _) = seed_degree_matrix(seed)?;
    let k = deg.len();
    let mut sym_dev = 0.0f64;
    for x in 0..k {
        for y in 0..k {
            let s = (deg[x][y] + deg[y][x]) / 2.0;
            sym_dev = sym_dev.max((s - d_mat[x][y]).abs());
        }
    }
    if sym_dev > MARGINAL_TOL {
        return Ok(RateReport::infinite(InfiniteRateReason::DegreeMismatch));
    }
    let marg = seed_mark_marginal(seed)?;
    let mark_dev = marg
        .iter()
        .zip(q)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if mark_dev > MARGINAL_TOL {
        return Ok(RateReport::infinite(InfiniteRateReason::MarkMarginalMismatch));
    }

    let ent = truncated_entropy_jh(seed, h)?;
    Ok(RateReport {
        value: h_mark + s_d - ent.value,
        reason: None,
        h_mark,
        s_d,
        kl_edge: 0.0,
        kl_mark: 0.0,
        psi: 0.0,
        truncation_bound: ent.truncation_bound,
        entropy: Some(ent),
    })
}

fn kl_sorted_pairs(
    p: &BTreeMap<(Sym, Sym), f64>,
    q: &BTreeMap<(Sym, Sym), f64>,
) -> f64 {
    let mut acc = Kahan::default();
    for (key, &pv) in p {
        if pv <= 0.0 {
            continue;
        }
        let qv = q.get(key).copied().unwrap_or(0.0);
        if qv <= 0.0 {
            return f64::INFINITY;
        }
        acc.add(pv * (pv / qv).ln());
    }
    acc.value().max(0.0)
}

/// Rate function of the uniform ensemble with `m_n/n → d/2` edges and iid
/// marks `(nu, chi)`: the conditioned rate at the seed's own degree
/// statistics plus relative-entropy costs of those statistics, +∞ when
/// the total degree differs from `d`.
pub fn rate_uniform(
    seed: &Seed,
    h: u32,
    d: f64,
    nu: &[f64],
    chi: &[Vec<f64>],
) -> Result<RateReport> {
    check_prob_vector(nu, "vertex mark law")?;
    if nu.len() != seed.theta_size() || chi.len() != seed.xi_size() {
        return Err(GraphLdpError::validation("alphabet sizes do not match the seed"));
    }
    if chi.iter().any(|row| row.len() != chi.len()) {
        return Err(GraphLdpError::validation("edge-pair law must be square"));
    }
    let flat: Vec<f64> = chi.iter().flatten().copied().collect();
    check_prob_vector(&flat, "edge-pair law")?;
    if !(d > 0.0) || !d.is_finite() {
        return Err(GraphLdpError::validation("mean degree must be positive"));
    }
    let (deg, deg_total) = seed_degree_matrix(seed)?;
    if (deg_total - d).abs() > MARGINAL_TOL {
        return Ok(RateReport::infinite(InfiniteRateReason::DegreeMismatch));
    }

    let k = deg.len();
    let mut sym = vec![vec![0.0; k]; k];
    let mut p_deg: BTreeMap<(Sym, Sym), f64> = BTreeMap::new();
    for x in 0..k {
        for y in 0..k {
            sym[x][y] = (deg[x][y] + deg[y][x]) / 2.0;
        }
        p_deg.insert((x as Sym, x as Sym), deg[x][x] / deg_total);
        for y in (x + 1)..k {
            p_deg.insert(
                (x as Sym, y as Sym),
                (deg[x][y] + deg[y][x]) / deg_total,
            );
        }
    }
    let s_d = s_vec(&sym)?;
    let marg = seed_mark_marginal(seed)?;
    let h_mark = shannon_entropy(&marg)?;
    let kl_edge = d / 2.0 * kl_sorted_pairs(&p_deg, &chi_sorted(chi));
    let kl_mark = relative_entropy(&marg, nu)?;

    let ent = truncated_entropy_jh(seed, h)?;
    let value = h_mark + s_d - ent.value + kl_edge + kl_mark;
    let reason = if value.is_finite() {
        None
    } else {
        Some(InfiniteRateReason::AbsoluteContinuityFailure)
    };
    Ok(RateReport {
        value,
        reason,
        h_mark,
        s_d,
        kl_edge,
        kl_mark,
        psi: 0.0,
        truncation_bound: ent.truncation_bound,
        entropy: Some(ent),
    })
}

/// The binomial edge-count rate `ψ(x) = (x log(x/d) − x + d)/2` per
/// vertex, with `ψ(0) = d/2`.
pub fn binomial_rate_psi(x: f64, d: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(GraphLdpError::validation("reference degree must be positive"));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(GraphLdpError::validation("degree must be finite and nonnegative"));
    }
    if x == 0.0 {
        return Ok(d / 2.0);
    }
    Ok(0.5 * (x * (x / d).ln() - x + d))
}

/// Rate function of the sparse binomial ensemble with mean degree `d`:
/// the uniform rate at the seed's own mean degree plus the edge-count
/// cost `ψ`.
pub fn rate_er(seed: &Seed, h: u32, d: f64, nu: &[f64], chi: &[Vec<f64>]) -> Result<RateReport> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(GraphLdpError::validation("mean degree must be positive"));
    }
    let (_, deg_total) = seed_degree_matrix(seed)?;
    let mut rep = rate_uniform(seed, h, deg_total, nu, chi)?;
    let psi = binomial_rate_psi(deg_total, d)?;
    rep.psi = psi;
    rep.value += psi;
    Ok(rep)
}

/// Which base ensemble a discretized rate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscretizedModel {
    Uniform,
    ErDegree,
}

/// Rate function against the cell alphabets of two partitions: the seed
/// lives on cell symbols, the continuous mark laws are pushed forward
/// through the partitions, and the chosen base rate is evaluated there.
pub fn rate_discretized(
    seed: &Seed,
    h: u32,
    model: DiscretizedModel,
    d: f64,
    nu: &VertexLaw,
    chi: &EdgePairLaw,
    part_a: &crate::discretization::TaggedPartition,
    part_b: &crate::discretization::TaggedPartition,
) -> Result<RateReport> {
    let push_nu = part_a.pushforward_vertex(nu)?;
    let push_chi = part_b.pushforward_pair(chi)?;
    if seed.theta_size() != push_nu.len() || seed.xi_size() != push_chi.len() {
        return Err(GraphLdpError::validation(
            "seed alphabets must match the partition cell counts",
        ));
    }
    // Mass on a structurally empty remainder cell means the seed does not
    // describe a projection of anything.
    let marg = seed_mark_marginal(seed)?;
    let ra = part_a.remainder_index();
    if push_nu[ra] == 0.0 && marg[ra] > 0.0 {
        return Ok(RateReport::infinite(InfiniteRateReason::SupportOutsideProjection));
    }
    let (deg, _) = seed_degree_matrix(seed)?;
    let rb = part_b.remainder_index();
    let rem_rows_zero = (0..push_chi.len())
        .all(|i| push_chi[rb][i] == 0.0 && push_chi[i][rb] == 0.0);
    let seed_rem_mass: f64 = (0..deg.len()).map(|i| deg[rb][i] + deg[i][rb]).sum();
    if rem_rows_zero && seed_rem_mass > 0.0 {
        return Ok(RateReport::infinite(InfiniteRateReason::SupportOutsideProjection));
    }
    match model {
        DiscretizedModel::Uniform => rate_uniform(seed, h, d, &push_nu, &push_chi),
        DiscretizedModel::ErDegree => rate_er(seed, h, d, &push_nu, &push_chi),
    }
}

fn factorial(n: u64) -> BigUint {
    let mut out = BigUint::from(1u32);
    for i in 2..=n {
        out *= i;
    }
    out
}

fn multinomial(counts: &[u64]) -> BigUint {
    let total: u64 = counts.iter().sum();
    let mut out = factorial(total);
    for &c in counts {
        out /= factorial(c);
    }
    out
}

/// Number of sequences over a finite alphabet with the given symbol
/// counts.
pub fn type_class_size(counts: &[u64]) -> BigUint {
    multinomial(counts)
}

/// Exact number of marked graphs with the given vertex-mark counts and
/// sorted edge-pair counts:
/// skeleton choices × vertex-mark arrangements × edge-pair arrangements
/// × orientation choices for the asymmetric pairs.
pub fn count_graphs(cv: &CountVectors) -> BigUint {
    let m = cv.total_edges();
    let mut out = binomial(BigUint::from(pair_count(cv.n())), BigUint::from(m));
    out *= multinomial(cv.vertex_counts());
    let edge_counts: Vec<u64> = cv.edge_counts().values().copied().collect();
    out *= multinomial(&edge_counts);
    let offdiag: u64 = cv
        .edge_counts()
        .iter()
        .filter(|((x, y), _)| x != y)
        .map(|(_, &c)| c)
        .sum();
    out << offdiag
}

/// First-order exponent of the count of graphs with `m_total` edges,
/// mark law `q` and degree split `d_mat` on `n` vertices:
/// `m_total·log n + n·(H(q) + s(d_mat))`.
pub fn log_count_asymptotic(n: u64, m_total: u64, q: &[f64], d_mat: &[Vec<f64>]) -> Result<f64> {
    if n == 0 {
        return Err(GraphLdpError::validation("need at least one vertex"));
    }
    Ok(m_total as f64 * (n as f64).ln() + n as f64 * (shannon_entropy(q)? + s_vec(d_mat)?))
}
