//! Brute-force enumeration of tiny marked-graph domains with exact
//! rational probabilities.
//!
//! Everything here is ground truth: graphs are enumerated one by one,
//! model probabilities are computed in `BigRational` arithmetic, and the
//! counting and mixture identities used elsewhere in the crate are checked
//! for literal equality, not up to a tolerance. Domains are capped by a
//! precomputed sweep budget so a typo in a test cannot start a year-long
//! enumeration.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::ensembles::{pair_count, CountVectors};
use crate::entropy::{count_graphs, type_class_size};
use crate::error::{GraphLdpError, Result};
use crate::graph::MarkedGraph;
use crate::mark::{Mark, MarkSpace, Sym};

/// Default cap on the number of (skeleton, mark assignment) items swept.
pub const DEFAULT_ENUM_BUDGET: u64 = 100_000_000;

/// Shorthand for an exact fraction.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn rat_pow(x: &BigRational, k: u64) -> BigRational {
    let mut out = BigRational::one();
    for _ in 0..k {
        out *= x;
    }
    out
}

fn big_to_rational(x: BigUint) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

fn check_rational_law(
    nu: &[BigRational],
    chi: &[Vec<BigRational>],
    theta_size: usize,
    xi_size: usize,
) -> Result<()> {
    if nu.len() != theta_size {
        return Err(GraphLdpError::validation(format!(
            "nu has {} entries, domain has {} vertex marks",
            nu.len(),
            theta_size
        )));
    }
    if nu.iter().any(|p| p.is_negative()) || nu.iter().sum::<BigRational>() != BigRational::one() {
        return Err(GraphLdpError::validation(
            "nu must be a probability vector with exact total 1",
        ));
    }
    if chi.len() != xi_size || chi.iter().any(|row| row.len() != xi_size) {
        return Err(GraphLdpError::validation(format!(
            "chi must be a {xi_size}x{xi_size} matrix"
        )));
    }
    let total: BigRational = chi.iter().flatten().sum();
    if chi.iter().flatten().any(|p| p.is_negative()) || total != BigRational::one() {
        return Err(GraphLdpError::validation(
            "chi must be a probability matrix with exact total 1",
        ));
    }
    Ok(())
}

/// A finite family of labeled marked graphs small enough to sweep in full.
///
/// The family is all graphs on `n` vertices with marks in the discrete
/// alphabets `{0,…,theta_size−1}` and `{0,…,xi_size−1}`, optionally
/// restricted to a fixed edge total or to exact count vectors.
#[derive(Debug, Clone)]
pub struct EnumerationDomain {
    n: usize,
    theta_size: usize,
    xi_size: usize,
    edge_total: Option<u64>,
    counts: Option<CountVectors>,
    budget: u64,
}

impl EnumerationDomain {
    pub fn new(n: usize, theta_size: usize, xi_size: usize) -> Result<Self> {
        if n == 0 || n > 6 {
            return Err(GraphLdpError::validation(format!(
                "enumeration needs 1 <= n <= 6, got {n}"
            )));
        }
        if theta_size == 0 || theta_size > 3 {
            return Err(GraphLdpError::validation(format!(
                "enumeration needs 1 <= |Theta| <= 3, got {theta_size}"
            )));
        }
        if xi_size == 0 || xi_size > 2 {
            return Err(GraphLdpError::validation(format!(
                "enumeration needs 1 <= |Xi| <= 2, got {xi_size}"
            )));
        }
        Ok(EnumerationDomain {
            n,
            theta_size,
            xi_size,
            edge_total: None,
            counts: None,
            budget: DEFAULT_ENUM_BUDGET,
        })
    }

    /// Restrict to graphs with exactly this many edges.
    pub fn with_edge_total(mut self, m: u64) -> Result<Self> {
        if m > pair_count(self.n) {
            return Err(GraphLdpError::validation(format!(
                "{} edges do not fit on {} vertices",
                m, self.n
            )));
        }
        self.edge_total = Some(m);
        Ok(self)
    }

    /// Restrict to graphs with exactly these count vectors.
    pub fn with_counts(mut self, cv: CountVectors) -> Result<Self> {
        if cv.n() != self.n || cv.vertex_counts().len() != self.theta_size
            || cv.xi_size() != self.xi_size
        {
            return Err(GraphLdpError::validation(
                "count vectors do not match the domain dimensions",
            ));
        }
        self.edge_total = Some(cv.total_edges());
        self.counts = Some(cv);
        Ok(self)
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta_size(&self) -> usize {
        self.theta_size
    }

    pub fn xi_size(&self) -> usize {
        self.xi_size
    }

    /// Exact number of (skeleton, mark assignment) items the sweep visits.
    ///
    /// A count-vector restriction is applied by filtering, so it does not
    /// shrink the sweep below the corresponding fixed-edge-total sweep.
    pub fn sweep_size(&self) -> BigUint {
        let pairs = pair_count(self.n);
        let per_edge = BigUint::from((self.xi_size * self.xi_size) as u64);
        let vertex_marks = BigUint::from(self.theta_size as u64).pow(self.n as u32);
        let mut skeleton_sum = BigUint::zero();
        let totals: Vec<u64> = match self.edge_total {
            Some(m) => vec![m],
            None => (0..=pairs).collect(),
        };
        for k in totals {
            skeleton_sum +=
                binomial(BigUint::from(pairs), BigUint::from(k)) * per_edge.pow(k as u32);
        }
        skeleton_sum * vertex_marks
    }

    fn check_budget(&self) -> Result<()> {
        let size = self.sweep_size();
        if size > BigUint::from(self.budget) {
            return Err(GraphLdpError::budget(format!(
                "enumeration sweep of {} items exceeds the budget of {}",
                size, self.budget
            )));
        }
        Ok(())
    }
}

/// Visits every labeled marked graph of the domain exactly once and
/// returns how many were visited.
///
/// Order is fixed: vertex pairs sorted lexicographically, skeletons by
/// ascending bitmask over those pairs, then vertex marks and per-edge
/// ordered mark pairs as odometers with the last coordinate fastest.
pub fn enumerate_marked_graphs<F>(dom: &EnumerationDomain, mut visit: F) -> Result<u64>
where
    F: FnMut(&MarkedGraph) -> Result<()>,
{
    dom.check_budget()?;
    let n = dom.n;
    let mut pairs = Vec::new();
    for u in 0..n as u32 {
        for v in (u + 1)..n as u32 {
            pairs.push((u, v));
        }
    }
    let theta_space = MarkSpace::finite_discrete(dom.theta_size);
    let xi_space = MarkSpace::finite_discrete(dom.xi_size);
    let k = dom.xi_size as u64;
    let mut visited = 0u64;
    for mask in 0u32..(1u32 << pairs.len()) {
        if let Some(m) = dom.edge_total {
            if u64::from(mask.count_ones()) != m {
                continue;
            }
        }
        let edges: Vec<(u32, u32)> = (0..pairs.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| pairs[i])
            .collect();
        let mut tau = vec![0u64; n];
        loop {
            let mut edge_codes = vec![0u64; edges.len()];
            loop {
                let tau_marks: Vec<Mark> = tau.iter().map(|&t| Mark::Sym(t as Sym)).collect();
                let mut xi = BTreeMap::new();
                for (i, &(u, v)) in edges.iter().enumerate() {
                    xi.insert((u, v), Mark::Sym((edge_codes[i] / k) as Sym));
                    xi.insert((v, u), Mark::Sym((edge_codes[i] % k) as Sym));
                }
                let g = MarkedGraph::new(
                    n,
                    edges.clone(),
                    tau_marks,
                    xi,
                    theta_space.clone(),
                    xi_space.clone(),
                )?;
                let keep = match &dom.counts {
                    Some(cv) => CountVectors::of_graph(&g)? == *cv,
                    None => true,
                };
                if keep {
                    visit(&g)?;
                    visited += 1;
                }
                if !advance(&mut edge_codes, k * k) {
                    break;
                }
            }
            if !advance(&mut tau, dom.theta_size as u64) {
                break;
            }
        }
    }
    Ok(visited)
}

/// Odometer step in base `radix`, last coordinate fastest; false on wrap.
fn advance(digits: &mut [u64], radix: u64) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < radix {
            return true;
        }
        *d = 0;
    }
    false
}

pub fn collect_marked_graphs(dom: &EnumerationDomain) -> Result<Vec<MarkedGraph>> {
    let mut out = Vec::new();
    enumerate_marked_graphs(dom, |g| {
        out.push(g.clone());
        Ok(())
    })?;
    Ok(out)
}

/// A labeled-graph identity key: two graphs get the same key iff they have
/// the same vertex set, edge set, and mark assignment.
pub fn graph_key(g: &MarkedGraph) -> Result<Vec<u16>> {
    let mut key = vec![g.n() as u16];
    for &(u, v) in g.edges() {
        key.push(u as u16);
        key.push(v as u16);
        key.push(g.xi(u, v)?.as_sym()?);
        key.push(g.xi(v, u)?.as_sym()?);
    }
    for v in 0..g.n() as u32 {
        key.push(g.tau(v).as_sym()?);
    }
    Ok(key)
}

/// A random-graph law whose probabilities are exact rationals.
#[derive(Debug, Clone)]
pub enum ExactModel {
    /// Uniform skeleton with a fixed edge count, i.i.d. marks.
    UniformIid {
        edge_total: u64,
        nu: Vec<BigRational>,
        chi: Vec<Vec<BigRational>>,
    },
    /// Every vertex pair joined independently with probability d/n,
    /// i.i.d. marks.
    ErIid {
        d: BigRational,
        nu: Vec<BigRational>,
        chi: Vec<Vec<BigRational>>,
    },
    /// Uniform over the graphs with exactly the given count vectors.
    Da { counts: CountVectors },
}

/// Probability of the ordered mark pair on one edge: marks are drawn as a
/// sorted pair and oriented by a fair coin, so a strict pair (a, b) has
/// probability (chi(a,b) + chi(b,a)) / 2 and a tie keeps chi(a,a).
fn pair_factor(chi: &[Vec<BigRational>], a: Sym, b: Sym) -> BigRational {
    let (a, b) = (a as usize, b as usize);
    if a == b {
        chi[a][a].clone()
    } else {
        (&chi[a][b] + &chi[b][a]) / BigRational::from_integer(BigInt::from(2))
    }
}

fn iid_mark_factor(
    g: &MarkedGraph,
    nu: &[BigRational],
    chi: &[Vec<BigRational>],
) -> Result<BigRational> {
    let mut out = BigRational::one();
    for v in 0..g.n() as u32 {
        out *= &nu[g.tau(v).as_sym()? as usize];
    }
    for &(u, v) in g.edges() {
        out *= pair_factor(chi, g.xi(u, v)?.as_sym()?, g.xi(v, u)?.as_sym()?);
    }
    Ok(out)
}

fn model_dims(model: &ExactModel) -> (usize, usize) {
    match model {
        ExactModel::UniformIid { nu, chi, .. } | ExactModel::ErIid { nu, chi, .. } => {
            (nu.len(), chi.len())
        }
        ExactModel::Da { counts } => (counts.vertex_counts().len(), counts.xi_size()),
    }
}

/// Exact probability the model assigns to one labeled marked graph.
pub fn model_probability(model: &ExactModel, g: &MarkedGraph) -> Result<BigRational> {
    match model {
        ExactModel::UniformIid {
            edge_total,
            nu,
            chi,
        } => {
            check_rational_law(nu, chi, nu.len(), chi.len())?;
            if g.edge_count() as u64 != *edge_total {
                return Ok(BigRational::zero());
            }
            let skeletons =
                binomial(BigUint::from(pair_count(g.n())), BigUint::from(*edge_total));
            Ok(iid_mark_factor(g, nu, chi)? / big_to_rational(skeletons))
        }
        ExactModel::ErIid { d, nu, chi } => {
            check_rational_law(nu, chi, nu.len(), chi.len())?;
            let p = d / BigRational::from_integer(BigInt::from(g.n() as u64));
            if p.is_negative() || p > BigRational::one() {
                return Err(GraphLdpError::validation(
                    "edge probability d/n must lie in [0, 1]",
                ));
            }
            let m = g.edge_count() as u64;
            let skeleton = rat_pow(&p, m)
                * rat_pow(&(BigRational::one() - &p), pair_count(g.n()) - m);
            Ok(skeleton * iid_mark_factor(g, nu, chi)?)
        }
        ExactModel::Da { counts } => {
            if CountVectors::of_graph(g)? == *counts {
                Ok(BigRational::one() / big_to_rational(count_graphs(counts)))
            } else {
                Ok(BigRational::zero())
            }
        }
    }
}

/// Exact probability of an event under the model, by full enumeration.
///
/// The domain must cover the model's support: graphs outside the domain
/// contribute nothing to the sum.
pub fn exact_event_probability<F>(
    dom: &EnumerationDomain,
    model: &ExactModel,
    mut event: F,
) -> Result<BigRational>
where
    F: FnMut(&MarkedGraph) -> bool,
{
    let (ts, xs) = model_dims(model);
    if ts != dom.theta_size || xs != dom.xi_size {
        return Err(GraphLdpError::validation(
            "model mark alphabets do not match the enumeration domain",
        ));
    }
    let mut total = BigRational::zero();
    enumerate_marked_graphs(dom, |g| {
        if event(g) {
            total += model_probability(model, g)?;
        }
        Ok(())
    })?;
    Ok(total)
}

/// Probability that an i.i.d. mark sequence realizes exactly the given
/// vertex-mark counts: (number of arrangements) × (product of mark
/// probabilities).
fn vertex_type_probability(u: &[u64], nu: &[BigRational]) -> BigRational {
    let mut out = big_to_rational(type_class_size(u));
    for (theta, &count) in u.iter().enumerate() {
        out *= rat_pow(&nu[theta], count);
    }
    out
}

/// Same for the sorted edge-pair counts, under the sorted-pair law
/// induced by chi: a strict pair (a, b) carries chi(a,b) + chi(b,a).
fn edge_type_probability(
    m: &BTreeMap<(Sym, Sym), u64>,
    chi: &[Vec<BigRational>],
) -> BigRational {
    let counts: Vec<u64> = m.values().copied().collect();
    let mut out = big_to_rational(type_class_size(&counts));
    for (&(a, b), &count) in m {
        let sorted = if a == b {
            chi[a as usize][a as usize].clone()
        } else {
            &chi[a as usize][b as usize] + &chi[b as usize][a as usize]
        };
        out *= rat_pow(&sorted, count);
    }
    out
}

// The sorted-pair law charges a strict pair both orientations at once;
// the class size carries a factor 2^{#strict edges} that spreads this
// mass over the two orientations of each such edge.
fn mixture_product(
    g: &MarkedGraph,
    nu: &[BigRational],
    chi: &[Vec<BigRational>],
) -> Result<BigRational> {
    let cv = CountVectors::of_graph(g)?;
    let uniform_in_class = BigRational::one() / big_to_rational(count_graphs(&cv));
    Ok(uniform_in_class
        * vertex_type_probability(cv.vertex_counts(), nu)
        * edge_type_probability(cv.edge_counts(), chi))
}

/// Checks, graph by graph, that the uniform-skeleton i.i.d.-mark law
/// equals the mixture "pick count vectors by type probabilities, then a
/// uniform graph in the class". Returns the largest absolute discrepancy,
/// which must be exactly zero.
pub fn verify_mixture(
    dom: &EnumerationDomain,
    nu: &[BigRational],
    chi: &[Vec<BigRational>],
) -> Result<BigRational> {
    check_rational_law(nu, chi, dom.theta_size, dom.xi_size)?;
    let edge_total = dom.edge_total.ok_or_else(|| {
        GraphLdpError::validation("mixture check needs a domain with a fixed edge total")
    })?;
    let model = ExactModel::UniformIid {
        edge_total,
        nu: nu.to_vec(),
        chi: chi.to_vec(),
    };
    let mut worst = BigRational::zero();
    enumerate_marked_graphs(dom, |g| {
        let direct = model_probability(&model, g)?;
        let mixed = mixture_product(g, nu, chi)?;
        let gap = (direct - mixed).abs();
        if gap > worst {
            worst = gap;
        }
        Ok(())
    })?;
    Ok(worst)
}

/// Same comparison for the sparse binomial model: the direct product law
/// against "draw the edge count binomially, then run the fixed-edge-count
/// mixture". Returns the largest absolute discrepancy (exactly zero).
pub fn verify_er_mixture(
    dom: &EnumerationDomain,
    nu: &[BigRational],
    chi: &[Vec<BigRational>],
    d: &BigRational,
) -> Result<BigRational> {
    check_rational_law(nu, chi, dom.theta_size, dom.xi_size)?;
    if dom.edge_total.is_some() || dom.counts.is_some() {
        return Err(GraphLdpError::validation(
            "binomial mixture check needs an unrestricted domain",
        ));
    }
    let model = ExactModel::ErIid {
        d: d.clone(),
        nu: nu.to_vec(),
        chi: chi.to_vec(),
    };
    let pairs = pair_count(dom.n);
    let p = d / BigRational::from_integer(BigInt::from(dom.n as u64));
    let mut worst = BigRational::zero();
    enumerate_marked_graphs(dom, |g| {
        let direct = model_probability(&model, g)?;
        let m = g.edge_count() as u64;
        let edge_count_prob = big_to_rational(binomial(BigUint::from(pairs), BigUint::from(m)))
            * rat_pow(&p, m)
            * rat_pow(&(BigRational::one() - &p), pairs - m);
        let mixed = edge_count_prob * mixture_product(g, nu, chi)?;
        let gap = (direct - mixed).abs();
        if gap > worst {
            worst = gap;
        }
        Ok(())
    })?;
    Ok(worst)
}

/// Checks that i.i.d. mark sequences are exchangeable in the exact sense:
/// the probability of each sequence equals the probability of its type
/// class divided by the class size. The class probability is obtained by
/// brute-force summation, not from a formula.
pub fn verify_type_class(n: usize, nu: &[BigRational]) -> Result<bool> {
    if n == 0 || n > 8 {
        return Err(GraphLdpError::validation(format!(
            "type-class check needs 1 <= n <= 8, got {n}"
        )));
    }
    let k = nu.len();
    if k == 0 || k > 3 {
        return Err(GraphLdpError::validation(format!(
            "type-class check needs 1 <= |Theta| <= 3, got {k}"
        )));
    }
    if nu.iter().any(|p| p.is_negative()) || nu.iter().sum::<BigRational>() != BigRational::one() {
        return Err(GraphLdpError::validation(
            "nu must be a probability vector with exact total 1",
        ));
    }
    let mut class_mass: BTreeMap<Vec<u64>, BigRational> = BTreeMap::new();
    let mut sequences = Vec::new();
    let mut seq = vec![0u64; n];
    loop {
        let mut counts = vec![0u64; k];
        let mut prob = BigRational::one();
        for &s in &seq {
            counts[s as usize] += 1;
            prob *= &nu[s as usize];
        }
        *class_mass.entry(counts.clone()).or_insert_with(BigRational::zero) += &prob;
        sequences.push((counts, prob));
        if !advance(&mut seq, k as u64) {
            break;
        }
    }
    for (counts, prob) in sequences {
        let class = class_mass[&counts].clone() / big_to_rational(type_class_size(&counts));
        if class != prob {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Result of a likelihood-ratio goodness-of-fit test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GTestReport {
    pub statistic: f64,
    pub degrees_of_freedom: u64,
    pub p_value: f64,
}

/// Likelihood-ratio (G) test of observed counts against exact cell
/// probabilities. Cells with probability zero must stay empty; an
/// observation there yields p = 0 outright.
pub fn g_test(observed: &[u64], expected_probs: &[f64]) -> Result<GTestReport> {
    if observed.is_empty() || observed.len() != expected_probs.len() {
        return Err(GraphLdpError::validation(
            "observed counts and expected probabilities must have equal nonzero length",
        ));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(GraphLdpError::validation("no observations"));
    }
    let mass: f64 = expected_probs.iter().sum();
    if expected_probs.iter().any(|&p| p < 0.0) || (mass - 1.0).abs() > 1e-9 {
        return Err(GraphLdpError::validation(
            "expected probabilities must be nonnegative and sum to 1",
        ));
    }
    let mut statistic = 0.0;
    let mut support = 0u64;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        if p == 0.0 {
            if o > 0 {
                return Ok(GTestReport {
                    statistic: f64::INFINITY,
                    degrees_of_freedom: 0,
                    p_value: 0.0,
                });
            }
            continue;
        }
        support += 1;
        if o > 0 {
            statistic += 2.0 * o as f64 * (o as f64 / (total as f64 * p)).ln();
        }
    }
    if support <= 1 {
        return Ok(GTestReport {
            statistic: 0.0,
            degrees_of_freedom: 0,
            p_value: 1.0,
        });
    }
    let df = support - 1;
    let chi = ChiSquared::new(df as f64)
        .map_err(|e| GraphLdpError::numeric(format!("chi-squared setup failed: {e}")))?;
    Ok(GTestReport {
        statistic,
        degrees_of_freedom: df,
        p_value: chi.sf(statistic.max(0.0)),
    })
}

/// Exact cell probabilities of a model over an enumerated domain, keyed by
/// labeled-graph identity. Used to test samplers against the oracle.
pub fn support_probabilities(
    dom: &EnumerationDomain,
    model: &ExactModel,
) -> Result<BTreeMap<Vec<u16>, BigRational>> {
    let (ts, xs) = model_dims(model);
    if ts != dom.theta_size || xs != dom.xi_size {
        return Err(GraphLdpError::validation(
            "model mark alphabets do not match the enumeration domain",
        ));
    }
    let mut out = BTreeMap::new();
    enumerate_marked_graphs(dom, |g| {
        let p = model_probability(model, g)?;
        if out.insert(graph_key(g)?, p).is_some() {
            return Err(GraphLdpError::numeric("enumeration visited a graph twice"));
        }
        Ok(())
    })?;
    Ok(out)
}

/// G-test of sampled graphs against the exact model probabilities.
///
/// `draws` maps each sampled graph through [`graph_key`]; a sample outside
/// the enumerated support makes the test fail with p = 0.
pub fn sampler_g_test(
    dom: &EnumerationDomain,
    model: &ExactModel,
    draws: &[Vec<u16>],
) -> Result<GTestReport> {
    let support = support_probabilities(dom, model)?;
    let mut observed: Vec<u64> = Vec::with_capacity(support.len() + 1);
    let mut expected: Vec<f64> = Vec::with_capacity(support.len() + 1);
    let mut index: BTreeMap<&Vec<u16>, usize> = BTreeMap::new();
    for (key, prob) in &support {
        index.insert(key, observed.len());
        observed.push(0);
        expected.push(prob.to_f64().ok_or_else(|| {
            GraphLdpError::numeric("cell probability does not fit in f64")
        })?);
    }
    // Overflow cell for samples outside the enumerated support.
    observed.push(0);
    expected.push(0.0);
    let outside = observed.len() - 1;
    for key in draws {
        match index.get(key) {
            Some(&i) => observed[i] += 1,
            None => observed[outside] += 1,
        }
    }
    g_test(&observed, &expected)
}
