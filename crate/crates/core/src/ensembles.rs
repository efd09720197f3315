//! Random-graph ensembles: Erdős–Rényi and uniform-m skeletons, iid mark
//! decoration, and the count-vector-conditioned marked ensemble.
//!
//! Every sampler takes the generator explicitly; fixed seed means
//! bit-identical output. The count-vector sampler is exactly uniform over
//! its support because the counting of that support factorizes into a
//! skeleton choice, two multiset permutations, and orientation coins.

use crate::error::{GraphLdpError, Result};
use crate::graph::MarkedGraph;
use crate::mark::{EdgePairLaw, Mark, MarkLaw, MarkSpace, Sym, VertexLaw};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};

/// Number of unordered vertex pairs.
pub fn pair_count(n: usize) -> u64 {
    let n = n as u64;
    n * (n.saturating_sub(1)) / 2
}

/// Vertex-mark and edge-mark count vectors `(u⃗, m⃗)` for graphs on `n`
/// vertices: `u(θ)` vertices carry mark `θ` and `m(x, x')` edges carry the
/// sorted oriented-mark pair `(x, x')` with `x ≤ x'`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CountVectorsRepr", into = "CountVectorsRepr")]
pub struct CountVectors {
    u: Vec<u64>,
    m: BTreeMap<(Sym, Sym), u64>,
    xi_size: usize,
}

#[derive(Serialize, Deserialize)]
struct CountVectorsRepr {
    u: Vec<u64>,
    /// Entries `[x, x', count]` with `x ≤ x'`.
    m: Vec<(Sym, Sym, u64)>,
    xi_size: usize,
}

impl From<CountVectors> for CountVectorsRepr {
    fn from(cv: CountVectors) -> Self {
        CountVectorsRepr {
            u: cv.u,
            m: cv.m.into_iter().map(|((x, y), c)| (x, y, c)).collect(),
            xi_size: cv.xi_size,
        }
    }
}

impl TryFrom<CountVectorsRepr> for CountVectors {
    type Error = GraphLdpError;
    fn try_from(r: CountVectorsRepr) -> Result<Self> {
        let m = r.m.into_iter().map(|(x, y, c)| ((x, y), c)).collect();
        CountVectors::new(r.u, m, r.xi_size)
    }
}

impl CountVectors {
    pub fn new(u: Vec<u64>, mut m: BTreeMap<(Sym, Sym), u64>, xi_size: usize) -> Result<Self> {
        if u.is_empty() {
            return Err(GraphLdpError::validation("empty vertex-count vector"));
        }
        m.retain(|_, c| *c > 0);
        for &(x, y) in m.keys() {
            if x > y {
                return Err(GraphLdpError::validation(format!(
                    "edge-count key ({x}, {y}) must be sorted"
                )));
            }
            if y as usize >= xi_size {
                return Err(GraphLdpError::validation(format!(
                    "edge-mark symbol {y} out of range for alphabet of size {xi_size}"
                )));
            }
        }
        let n: u64 = u.iter().sum();
        let edges: u64 = m.values().sum();
        if edges > pair_count(n as usize) {
            return Err(GraphLdpError::validation(format!(
                "{edges} edges cannot fit on {n} vertices"
            )));
        }
        Ok(CountVectors { u, m, xi_size })
    }

    /// Count vectors of a finite-alphabet marked graph.
    pub fn of_graph(g: &MarkedGraph) -> Result<Self> {
        let kt = g
            .theta_space()
            .size()
            .ok_or_else(|| GraphLdpError::validation("count vectors need a finite vertex alphabet"))?;
        let kx = g
            .xi_space()
            .size()
            .ok_or_else(|| GraphLdpError::validation("count vectors need a finite edge alphabet"))?;
        let mut u = vec![0u64; kt];
        for mk in g.vertex_marks() {
            u[mk.as_sym()? as usize] += 1;
        }
        let mut m = BTreeMap::new();
        for &(a, b) in g.edges() {
            let x = g.xi(a, b)?.as_sym()?;
            let y = g.xi(b, a)?.as_sym()?;
            let key = if x <= y { (x, y) } else { (y, x) };
            *m.entry(key).or_insert(0u64) += 1;
        }
        CountVectors::new(u, m, kx)
    }

    pub fn n(&self) -> usize {
        self.u.iter().sum::<u64>() as usize
    }

    /// Total edge count `‖m⃗‖₁ = Σ_{x ≤ x'} m(x, x')`.
    pub fn total_edges(&self) -> u64 {
        self.m.values().sum()
    }

    pub fn vertex_counts(&self) -> &[u64] {
        &self.u
    }

    /// Edge counts keyed by sorted mark pair; zero entries are dropped.
    pub fn edge_counts(&self) -> &BTreeMap<(Sym, Sym), u64> {
        &self.m
    }

    pub fn theta_size(&self) -> usize {
        self.u.len()
    }

    pub fn xi_size(&self) -> usize {
        self.xi_size
    }
}

/// Erdős–Rényi skeleton `G(n, d/n)`: every unordered pair is an edge
/// independently with probability `d/n`. Requires `0 < d < n`.
pub fn sample_er<R: Rng>(n: usize, d: f64, rng: &mut R) -> Result<MarkedGraph> {
    if n == 0 {
        return Err(GraphLdpError::validation("need at least one vertex"));
    }
    if !(d > 0.0 && d < n as f64) {
        return Err(GraphLdpError::validation(format!(
            "edge density d = {d} must satisfy 0 < d < n = {n}"
        )));
    }
    let p = d / n as f64;
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in (u + 1)..n as u32 {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    MarkedGraph::unmarked(n, edges)
}

/// Uniform skeleton with exactly `m` edges: an `m`-subset of the
/// `C(n,2)` pairs chosen uniformly without replacement.
pub fn sample_uniform<R: Rng>(n: usize, m: usize, rng: &mut R) -> Result<MarkedGraph> {
    let total = pair_count(n);
    let m = m as u64;
    if m > total {
        return Err(GraphLdpError::validation(format!(
            "{m} edges exceed the {total} vertex pairs of n = {n}"
        )));
    }
    // Floyd's subset sampling: exactly m draws, uniform over m-subsets.
    let mut chosen: HashSet<u64> = HashSet::with_capacity(m as usize);
    for j in (total - m)..total {
        let t = rng.random_range(0..=j);
        let pick = if chosen.contains(&t) { j } else { t };
        chosen.insert(pick);
    }
    let edges = chosen.into_iter().map(|k| pair_at(n as u64, k)).collect();
    MarkedGraph::unmarked(n, edges)
}

/// Unrank pair index `k` under the lexicographic order of pairs `(u, v)`,
/// `u < v`: `rank(u, v) = u(2n−u−1)/2 + (v−u−1)`.
fn pair_at(n: u64, k: u64) -> (u32, u32) {
    let base = |u: u64| u * (2 * n - u - 1) / 2;
    let (mut lo, mut hi) = (0u64, n - 2);
    while lo < hi {
        let mid = (lo + hi + 1) / 2;
        if base(mid) <= k {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let u = lo;
    let v = u + 1 + (k - base(u));
    (u as u32, v as u32)
}

/// Replace all marks of `g` by an iid decoration: vertex marks iid `ν`;
/// each edge draws an ordered pair from `χ` and a fair coin assigns it to
/// the two orientations in one order or the other.
pub fn decorate_iid<R: Rng>(g: &MarkedGraph, law: &MarkLaw, rng: &mut R) -> Result<MarkedGraph> {
    law.validate()?;
    let n = g.n();
    let (theta_space, tau): (MarkSpace, Vec<Mark>) = match &law.nu {
        VertexLaw::Finite(p) => {
            let dist = WeightedIndex::new(p)
                .map_err(|e| GraphLdpError::validation(format!("nu weights: {e}")))?;
            let tau = (0..n).map(|_| Mark::Sym(dist.sample(rng) as Sym)).collect();
            (MarkSpace::finite_discrete(p.len()), tau)
        }
        VertexLaw::Real(rl) => {
            let tau = (0..n).map(|_| Mark::Real(rl.sample(rng))).collect();
            (MarkSpace::Real, tau)
        }
    };
    let mut xi = BTreeMap::new();
    let xi_space = match &law.chi {
        EdgePairLaw::Finite(rows) => {
            let k = rows.len();
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            let dist = WeightedIndex::new(&flat)
                .map_err(|e| GraphLdpError::validation(format!("chi weights: {e}")))?;
            for &(u, v) in g.edges() {
                let idx = dist.sample(rng);
                let pair = ((idx / k) as Sym, (idx % k) as Sym);
                let (a, b) = if rng.random::<bool>() { pair } else { (pair.1, pair.0) };
                xi.insert((u, v), Mark::Sym(a));
                xi.insert((v, u), Mark::Sym(b));
            }
            MarkSpace::finite_discrete(k)
        }
        EdgePairLaw::RealIid(rl) => {
            for &(u, v) in g.edges() {
                let pair = (rl.sample(rng), rl.sample(rng));
                let (a, b) = if rng.random::<bool>() { pair } else { (pair.1, pair.0) };
                xi.insert((u, v), Mark::Real(a));
                xi.insert((v, u), Mark::Real(b));
            }
            MarkSpace::Real
        }
    };
    MarkedGraph::new(n, g.edges().to_vec(), tau, xi, theta_space, xi_space)
}

/// Uniform marked graph with the exact count vectors `cv`: uniform
/// skeleton with `‖m⃗‖₁` edges, vertex-mark multiset assigned by a uniform
/// permutation, edge-pair multiset likewise, and an independent fair coin
/// orienting every pair with distinct marks.
pub fn sample_da<R: Rng>(cv: &CountVectors, rng: &mut R) -> Result<MarkedGraph> {
    let n = cv.n();
    let skel = sample_uniform(n, cv.total_edges() as usize, rng)?;

    let mut tau: Vec<Mark> = Vec::with_capacity(n);
    for (theta, &cnt) in cv.vertex_counts().iter().enumerate() {
        tau.extend(std::iter::repeat_n(Mark::Sym(theta as Sym), cnt as usize));
    }
    tau.shuffle(rng);

    let mut pairs: Vec<(Sym, Sym)> = Vec::with_capacity(cv.total_edges() as usize);
    for (&(x, y), &cnt) in cv.edge_counts() {
        pairs.extend(std::iter::repeat_n((x, y), cnt as usize));
    }
    pairs.shuffle(rng);

    let mut xi = BTreeMap::new();
    for (&(u, v), &(x, y)) in skel.edges().iter().zip(&pairs) {
        let (a, b) = if x == y || rng.random::<bool>() { (x, y) } else { (y, x) };
        xi.insert((u, v), Mark::Sym(a));
        xi.insert((v, u), Mark::Sym(b));
    }
    let g = MarkedGraph::new(
        n,
        skel.edges().to_vec(),
        tau,
        xi,
        MarkSpace::finite_discrete(cv.theta_size()),
        MarkSpace::finite_discrete(cv.xi_size()),
    )?;
    // Invariant: the construction preserves both count vectors exactly.
    let back = CountVectors::of_graph(&g)?;
    assert_eq!(&back, cv, "count vectors drifted during conditioned sampling");
    Ok(g)
}

/// Erdős–Rényi skeleton with iid mark decoration.
pub fn sample_er_marked<R: Rng>(n: usize, d: f64, law: &MarkLaw, rng: &mut R) -> Result<MarkedGraph> {
    let skel = sample_er(n, d, rng)?;
    decorate_iid(&skel, law, rng)
}

/// Uniform `m`-edge skeleton with iid mark decoration.
pub fn sample_uniform_marked<R: Rng>(
    n: usize,
    m: usize,
    law: &MarkLaw,
    rng: &mut R,
) -> Result<MarkedGraph> {
    let skel = sample_uniform(n, m, rng)?;
    decorate_iid(&skel, law, rng)
}
