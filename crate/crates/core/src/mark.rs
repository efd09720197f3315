//! Mark spaces, mark values, and mark laws.
//!
//! Vertex marks live in a space `Θ`, oriented-edge marks in a space `Ξ`.
//! Two kinds of space are supported:
//!
//! * finite alphabets with an explicit symmetric pairwise distance table
//!   (default: the discrete 0/1 metric);
//! * the real line with the absolute metric.
//!
//! Real-valued marks are never hashed or canonically encoded; operations
//! that need exact equality (codes, histograms) require prior projection
//! onto a finite tag alphabet (see the `discretization` module).

use crate::error::{GraphLdpError, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Symbol index into a finite alphabet.
pub type Sym = u16;

/// A single mark value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mark {
    Sym(Sym),
    Real(f64),
}

impl Mark {
    pub fn as_sym(&self) -> Result<Sym> {
        match self {
            Mark::Sym(s) => Ok(*s),
            Mark::Real(_) => Err(GraphLdpError::validation(
                "real-valued mark where a finite-alphabet mark is required",
            )),
        }
    }

    pub fn as_real(&self) -> Result<f64> {
        match self {
            Mark::Real(x) => Ok(*x),
            Mark::Sym(_) => Err(GraphLdpError::validation(
                "finite-alphabet mark where a real mark is required",
            )),
        }
    }
}

/// A mark space: finite alphabet with distance table, or the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkSpace {
    Finite {
        symbols: Vec<String>,
        /// Row-major `k × k` distance table; symmetric, zero diagonal.
        dist: Vec<f64>,
    },
    Real,
}

impl MarkSpace {
    /// Finite alphabet `{0, …, k−1}` with the discrete 0/1 metric.
    pub fn finite_discrete(k: usize) -> Self {
        let symbols = (0..k).map(|i| i.to_string()).collect();
        let mut dist = vec![1.0; k * k];
        for i in 0..k {
            dist[i * k + i] = 0.0;
        }
        MarkSpace::Finite { symbols, dist }
    }

    /// Finite alphabet with an explicit distance table.
    pub fn finite_with_table(symbols: Vec<String>, dist: Vec<f64>) -> Result<Self> {
        let k = symbols.len();
        if dist.len() != k * k {
            return Err(GraphLdpError::validation(format!(
                "distance table has {} entries, expected {}",
                dist.len(),
                k * k
            )));
        }
        for i in 0..k {
            if dist[i * k + i] != 0.0 {
                return Err(GraphLdpError::validation("distance table diagonal must be zero"));
            }
            for j in 0..k {
                let d = dist[i * k + j];
                if !d.is_finite() || d < 0.0 {
                    return Err(GraphLdpError::validation("distances must be finite and nonnegative"));
                }
                if (d - dist[j * k + i]).abs() > 0.0 {
                    return Err(GraphLdpError::validation("distance table must be symmetric"));
                }
            }
        }
        Ok(MarkSpace::Finite { symbols, dist })
    }

    /// One-symbol alphabet; the mark space of unmarked graphs.
    pub fn unit() -> Self {
        MarkSpace::finite_discrete(1)
    }

    pub fn real() -> Self {
        MarkSpace::Real
    }

    /// Alphabet size for finite spaces.
    pub fn size(&self) -> Option<usize> {
        match self {
            MarkSpace::Finite { symbols, .. } => Some(symbols.len()),
            MarkSpace::Real => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, MarkSpace::Finite { .. })
    }

    pub fn check_mark(&self, m: &Mark) -> Result<()> {
        match (self, m) {
            (MarkSpace::Finite { symbols, .. }, Mark::Sym(s)) => {
                if (*s as usize) < symbols.len() {
                    Ok(())
                } else {
                    Err(GraphLdpError::validation(format!(
                        "symbol {} out of range for alphabet of size {}",
                        s,
                        symbols.len()
                    )))
                }
            }
            (MarkSpace::Real, Mark::Real(x)) => {
                if x.is_finite() {
                    Ok(())
                } else {
                    Err(GraphLdpError::validation("real mark must be finite"))
                }
            }
            _ => Err(GraphLdpError::validation("mark kind does not match mark space")),
        }
    }

    /// Distance between two marks of this space.
    pub fn mark_dist(&self, a: &Mark, b: &Mark) -> Result<f64> {
        match (self, a, b) {
            (MarkSpace::Finite { symbols, dist }, Mark::Sym(i), Mark::Sym(j)) => {
                let k = symbols.len();
                let (i, j) = (*i as usize, *j as usize);
                if i >= k || j >= k {
                    return Err(GraphLdpError::validation("symbol out of range"));
                }
                Ok(dist[i * k + j])
            }
            (MarkSpace::Real, Mark::Real(x), Mark::Real(y)) => Ok((x - y).abs()),
            _ => Err(GraphLdpError::validation("mark kind does not match mark space")),
        }
    }
}

/// Validate a probability vector.
pub fn check_prob_vector(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(GraphLdpError::validation(format!("{what}: empty probability vector")));
    }
    let mut sum = 0.0;
    for &x in p {
        if !x.is_finite() || x < 0.0 {
            return Err(GraphLdpError::validation(format!("{what}: entries must be in [0,1]")));
        }
        sum += x;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(GraphLdpError::validation(format!(
            "{what}: entries sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Parametric law on the real line, used for real-valued marks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealLaw {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, sd: f64 },
}

impl RealLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RealLaw::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(GraphLdpError::validation("uniform law requires lo < hi"));
                }
            }
            RealLaw::Gaussian { mean, sd } => {
                if !(mean.is_finite() && sd.is_finite() && sd > 0.0) {
                    return Err(GraphLdpError::validation("gaussian law requires sd > 0"));
                }
            }
        }
        Ok(())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            RealLaw::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            RealLaw::Gaussian { mean, sd } => Normal::new(mean, sd).unwrap().cdf(x),
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            RealLaw::Uniform { lo, hi } => lo + p.clamp(0.0, 1.0) * (hi - lo),
            RealLaw::Gaussian { mean, sd } => Normal::new(mean, sd).unwrap().inverse_cdf(p),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            RealLaw::Uniform { lo, hi } => rng.random_range(lo..hi),
            RealLaw::Gaussian { mean, sd } => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                mean + sd * z
            }
        }
    }
}

/// Law of a vertex mark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexLaw {
    /// Probability vector over a finite `Θ`.
    Finite(Vec<f64>),
    Real(RealLaw),
}

/// Law of the (ordered) pair of marks carried by one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgePairLaw {
    /// Row-major matrix `χ(x, x')` over a finite `Ξ × Ξ`.
    Finite(Vec<Vec<f64>>),
    /// Independent coordinates, each with the given real law.
    RealIid(RealLaw),
}

/// Joint mark law `(ν, χ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkLaw {
    pub nu: VertexLaw,
    pub chi: EdgePairLaw,
}

impl MarkLaw {
    pub fn validate(&self) -> Result<()> {
        match &self.nu {
            VertexLaw::Finite(p) => check_prob_vector(p, "nu")?,
            VertexLaw::Real(law) => law.validate()?,
        }
        match &self.chi {
            EdgePairLaw::Finite(rows) => {
                let k = rows.len();
                let mut flat = Vec::with_capacity(k * k);
                for row in rows {
                    if row.len() != k {
                        return Err(GraphLdpError::validation("chi must be square"));
                    }
                    flat.extend_from_slice(row);
                }
                check_prob_vector(&flat, "chi")?;
            }
            EdgePairLaw::RealIid(law) => law.validate()?,
        }
        Ok(())
    }

    /// Finite unmarked law (singleton alphabets); useful in tests.
    pub fn unmarked() -> Self {
        MarkLaw {
            nu: VertexLaw::Finite(vec![1.0]),
            chi: EdgePairLaw::Finite(vec![vec![1.0]]),
        }
    }
}

/// Symmetrized oriented-pair law: the law of the mark pair seen from an
/// edge endpoint when the underlying pair is drawn from `χ` and assigned
/// an orientation by a fair coin. `χ_sym(x,x') = (χ(x,x') + χ(x',x)) / 2`.
pub fn chi_symmetrized(chi: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = chi.len();
    let mut out = vec![vec![0.0; k]; k];
    for x in 0..k {
        for y in 0..k {
            out[x][y] = 0.5 * (chi[x][y] + chi[y][x]);
        }
    }
    out
}

/// Law of the *sorted* pair `(x, x')` with `x ≤ x'`: the diagonal keeps
/// `χ(x,x)` and off-diagonal entries merge both orientations.
/// Returned as a map keyed by the sorted pair.
pub fn chi_sorted(chi: &[Vec<f64>]) -> std::collections::BTreeMap<(Sym, Sym), f64> {
    let k = chi.len();
    let mut out = std::collections::BTreeMap::new();
    for x in 0..k {
        for y in x..k {
            let p = if x == y { chi[x][x] } else { chi[x][y] + chi[y][x] };
            out.insert((x as Sym, y as Sym), p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_metric() {
        let s = MarkSpace::finite_discrete(3);
        assert_eq!(s.mark_dist(&Mark::Sym(0), &Mark::Sym(0)).unwrap(), 0.0);
        assert_eq!(s.mark_dist(&Mark::Sym(0), &Mark::Sym(2)).unwrap(), 1.0);
    }

    #[test]
    fn real_metric_is_absolute_difference() {
        let s = MarkSpace::real();
        assert_eq!(s.mark_dist(&Mark::Real(1.5), &Mark::Real(-0.5)).unwrap(), 2.0);
        assert!(s.mark_dist(&Mark::Sym(0), &Mark::Real(0.0)).is_err());
    }

    #[test]
    fn table_validation_rejects_asymmetry() {
        let t = MarkSpace::finite_with_table(
            vec!["a".into(), "b".into()],
            vec![0.0, 1.0, 2.0, 0.0],
        );
        assert!(t.is_err());
    }

    #[test]
    fn sorted_pair_law_has_unit_mass() {
        let chi = vec![vec![0.1, 0.3], vec![0.2, 0.4]];
        let sorted = chi_sorted(&chi);
        let total: f64 = sorted.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((sorted[&(0, 1)] - 0.5).abs() < 1e-12);
        assert!((sorted[&(0, 0)] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn gaussian_quantile_inverts_cdf() {
        let law = RealLaw::Gaussian { mean: 1.0, sd: 2.0 };
        let q = law.quantile(0.975);
        assert!((law.cdf(q) - 0.975).abs() < 1e-9);
    }
}
