//! Interacting gradient diffusions on networks of real-marked vertices
//! and oriented real edge strengths, their Hamiltonian and drift, an
//! Euler scheme, and the per-vertex tilt functionals whose exponential
//! averages to one over Brownian reference paths.

use crate::error::{GraphLdpError, Result};
use crate::graph::{graph_from_json, graph_to_json, MarkedGraph};
use crate::rng;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// 99% two-sided normal quantile, shared by the Monte Carlo checks.
const Z99: f64 = 2.5758293035489004;

/// Pair potential f(x; w, w') and external field g(x; w) with their first
/// two x-derivatives. Registration cross-checks the derivative handles
/// against central finite differences, so a mismatched derivative is
/// caught before it corrupts a long simulation.
pub struct Potentials {
    f: Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>,
    fp: Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>,
    fpp: Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>,
    g: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    gp: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    gpp: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for Potentials {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.write_str("Potentials { .. }")
    }
}

impl Potentials {
    pub fn new(
        f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        fp: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        fpp: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        gp: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        gpp: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let pot = Potentials {
            f: Box::new(f),
            fp: Box::new(fp),
            fpp: Box::new(fpp),
            g: Box::new(g),
            gp: Box::new(gp),
            gpp: Box::new(gpp),
        };
        pot.registration_check()?;
        Ok(pot)
    }

    /// f = g = 0; the dynamics degenerate to driftless noise.
    pub fn zero() -> Self {
        Potentials {
            f: Box::new(|_, _, _| 0.0),
            fp: Box::new(|_, _, _| 0.0),
            fpp: Box::new(|_, _, _| 0.0),
            g: Box::new(|_, _| 0.0),
            gp: Box::new(|_, _| 0.0),
            gpp: Box::new(|_, _| 0.0),
        }
    }

    /// Alignment dynamics: with unit strengths the drift at v is
    /// scale * sum over neighbors of sin(x_v - x_u). The ordered-pair
    /// Hamiltonian counts each edge twice, hence the -cos(x)/2 shape.
    pub fn kuramoto(scale: f64) -> Result<Self> {
        if !scale.is_finite() {
            return Err(GraphLdpError::validation("scale must be finite"));
        }
        let s = scale / 2.0;
        Potentials::new(
            move |x, _, _| -s * x.cos(),
            move |x, _, _| s * x.sin(),
            move |x, _, _| s * x.cos(),
            |_, _| 0.0,
            |_, _| 0.0,
            |_, _| 0.0,
        )
    }

    pub fn f(&self, x: f64, w: f64, wp: f64) -> f64 {
        (self.f)(x, w, wp)
    }
    pub fn fp(&self, x: f64, w: f64, wp: f64) -> f64 {
        (self.fp)(x, w, wp)
    }
    pub fn fpp(&self, x: f64, w: f64, wp: f64) -> f64 {
        (self.fpp)(x, w, wp)
    }
    pub fn g(&self, x: f64, w: f64) -> f64 {
        (self.g)(x, w)
    }
    pub fn gp(&self, x: f64, w: f64) -> f64 {
        (self.gp)(x, w)
    }
    pub fn gpp(&self, x: f64, w: f64) -> f64 {
        (self.gpp)(x, w)
    }

    fn registration_check(&self) -> Result<()> {
        const EPS: f64 = 1e-5;
        const XS: [f64; 7] = [-2.3, -1.1, -0.4, 0.0, 0.6, 1.7, 2.9];
        const WS: [f64; 3] = [-1.2, 0.0, 0.8];
        let close = |fd: f64, claimed: f64| (fd - claimed).abs() <= 1e-5 * (1.0 + claimed.abs());
        for &x in &XS {
            for &w in &WS {
                for &wp in &WS {
                    let d1 = (self.f(x + EPS, w, wp) - self.f(x - EPS, w, wp)) / (2.0 * EPS);
                    if !close(d1, self.fp(x, w, wp)) {
                        return Err(GraphLdpError::certification(format!(
                            "registered f' disagrees with finite differences of f at x={x}, w={w}, w'={wp}"
                        )));
                    }
                    let d2 = (self.fp(x + EPS, w, wp) - self.fp(x - EPS, w, wp)) / (2.0 * EPS);
                    if !close(d2, self.fpp(x, w, wp)) {
                        return Err(GraphLdpError::certification(format!(
                            "registered f'' disagrees with finite differences of f' at x={x}, w={w}, w'={wp}"
                        )));
                    }
                }
                let d1 = (self.g(x + EPS, w) - self.g(x - EPS, w)) / (2.0 * EPS);
                if !close(d1, self.gp(x, w)) {
                    return Err(GraphLdpError::certification(format!(
                        "registered g' disagrees with finite differences of g at x={x}, w={w}"
                    )));
                }
                let d2 = (self.gp(x + EPS, w) - self.gp(x - EPS, w)) / (2.0 * EPS);
                if !close(d2, self.gpp(x, w)) {
                    return Err(GraphLdpError::certification(format!(
                        "registered g'' disagrees with finite differences of g' at x={x}, w={w}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A graph whose vertices carry a real medium variable w_v and an initial
/// condition x_v(0), and whose oriented edges carry real interaction
/// strengths mu(v, u).
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    graph: MarkedGraph,
    omega: Vec<f64>,
    x0: Vec<f64>,
    /// Strengths aligned with `graph.neighbors(v)`: out is mu(v, u),
    /// in is mu(u, v).
    mu_out: Vec<Vec<f64>>,
    mu_in: Vec<Vec<f64>>,
}

impl Network {
    /// Requires every vertex and oriented-edge mark of `graph` to be real
    /// and `x0` to list one finite initial condition per vertex.
    pub fn new(graph: MarkedGraph, x0: Vec<f64>) -> Result<Self> {
        let n = graph.n();
        if x0.len() != n {
            return Err(GraphLdpError::validation(format!(
                "{} initial conditions for {} vertices",
                x0.len(),
                n
            )));
        }
        if x0.iter().any(|x| !x.is_finite()) {
            return Err(GraphLdpError::validation("non-finite initial condition"));
        }
        let mut omega = Vec::with_capacity(n);
        for v in 0..n {
            omega.push(graph.tau(v as u32).as_real()?);
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(GraphLdpError::validation("non-finite medium variable"));
        }
        let mut mu_out = Vec::with_capacity(n);
        let mut mu_in = Vec::with_capacity(n);
        for v in 0..n as u32 {
            let mut out = Vec::new();
            let mut inc = Vec::new();
            for &u in graph.neighbors(v) {
                out.push(graph.xi(v, u)?.as_real()?);
                inc.push(graph.xi(u, v)?.as_real()?);
            }
            if out.iter().chain(&inc).any(|m| !m.is_finite()) {
                return Err(GraphLdpError::validation("non-finite interaction strength"));
            }
            mu_out.push(out);
            mu_in.push(inc);
        }
        Ok(Network {
            graph,
            omega,
            x0,
            mu_out,
            mu_in,
        })
    }

    /// Decorate a skeleton with unit strengths on every oriented edge.
    pub fn with_unit_strengths(skeleton: &MarkedGraph, omega: Vec<f64>, x0: Vec<f64>) -> Result<Self> {
        use crate::mark::{Mark, MarkSpace};
        let n = skeleton.n();
        if omega.len() != n {
            return Err(GraphLdpError::validation(format!(
                "{} medium variables for {} vertices",
                omega.len(),
                n
            )));
        }
        let tau = omega.iter().map(|&w| Mark::Real(w)).collect();
        let mut xi = std::collections::BTreeMap::new();
        for &(u, v) in skeleton.edges() {
            xi.insert((u, v), Mark::Real(1.0));
            xi.insert((v, u), Mark::Real(1.0));
        }
        let graph = MarkedGraph::new(
            n,
            skeleton.edges().to_vec(),
            tau,
            xi,
            MarkSpace::real(),
            MarkSpace::real(),
        )?;
        Network::new(graph, x0)
    }

    pub fn graph(&self) -> &MarkedGraph {
        &self.graph
    }
    pub fn n(&self) -> usize {
        self.graph.n()
    }
    pub fn omega(&self, v: u32) -> f64 {
        self.omega[v as usize]
    }
    pub fn x0(&self) -> &[f64] {
        &self.x0
    }
}

pub fn network_to_json(net: &Network) -> serde_json::Value {
    serde_json::json!({
        "graph": graph_to_json(&net.graph),
        "x0": net.x0,
    })
}

pub fn network_from_json(v: &serde_json::Value) -> Result<Network> {
    let graph = graph_from_json(
        v.get("graph")
            .ok_or_else(|| GraphLdpError::validation("network JSON lacks \"graph\""))?,
    )?;
    let x0: Vec<f64> = serde_json::from_value(
        v.get("x0")
            .ok_or_else(|| GraphLdpError::validation("network JSON lacks \"x0\""))?
            .clone(),
    )
    .map_err(|e| GraphLdpError::validation(format!("bad x0 array: {e}")))?;
    Network::new(graph, x0)
}

/// Energy of a state: the sum over ordered adjacent pairs (v, u) of
/// mu(v,u) f(x_v - x_u; w_v, w_u) plus the external field at each vertex.
pub fn hamiltonian(net: &Network, x: &[f64], pot: &Potentials) -> Result<f64> {
    if x.len() != net.n() {
        return Err(GraphLdpError::validation(format!(
            "state dimension {} for {} vertices",
            x.len(),
            net.n()
        )));
    }
    let mut h = 0.0;
    for v in 0..net.n() {
        h += pot.g(x[v], net.omega[v]);
        for (i, &u) in net.graph.neighbors(v as u32).iter().enumerate() {
            h += net.mu_out[v][i] * pot.f(x[v] - x[u as usize], net.omega[v], net.omega[u as usize]);
        }
    }
    Ok(h)
}

/// Gradient of the Hamiltonian in the v coordinate. Both pair sums keep
/// the potential's medium arguments in source-then-target order, which is
/// what differentiating the ordered-pair energy produces.
pub fn drift(net: &Network, x: &[f64], pot: &Potentials, v: u32) -> f64 {
    let vu = v as usize;
    let wv = net.omega[vu];
    let mut b = pot.gp(x[vu], wv);
    for (i, &u) in net.graph.neighbors(v).iter().enumerate() {
        let uu = u as usize;
        let wu = net.omega[uu];
        b += net.mu_out[vu][i] * pot.fp(x[vu] - x[uu], wv, wu);
        b -= net.mu_in[vu][i] * pot.fp(x[uu] - x[vu], wu, wv);
    }
    b
}

/// Trajectories of every vertex on the uniform grid 0, dt, ..., K dt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBundle {
    pub dt: f64,
    /// One array of K+1 values per vertex; entry 0 is the initial state.
    pub paths: Vec<Vec<f64>>,
}

impl PathBundle {
    pub fn steps(&self) -> usize {
        self.paths.first().map_or(0, |p| p.len().saturating_sub(1))
    }

    pub fn t_final(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    fn check_grid(&self, n: usize) -> Result<usize> {
        if self.paths.len() != n {
            return Err(GraphLdpError::validation(format!(
                "{} trajectories for {} vertices",
                self.paths.len(),
                n
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(GraphLdpError::validation("dt must be positive"));
        }
        let len = self.paths.first().map_or(0, |p| p.len());
        if len < 1 || self.paths.iter().any(|p| p.len() != len) {
            return Err(GraphLdpError::validation(
                "trajectories must share one nonempty grid",
            ));
        }
        Ok(len - 1)
    }
}

fn split_steps(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() || !(t_final > 0.0) || !t_final.is_finite() {
        return Err(GraphLdpError::validation("need T > 0 and dt > 0"));
    }
    let k = (t_final / dt).round();
    if (k * dt - t_final).abs() > 1e-9 * t_final.max(1.0) || k < 1.0 {
        return Err(GraphLdpError::validation(format!(
            "T = {t_final} is not an integer multiple of dt = {dt}"
        )));
    }
    Ok(k as usize)
}

/// Euler scheme driven by the given noise increments: increments[v][k]
/// is added to vertex v over step k, on top of drift * dt. Each step
/// reads a frozen snapshot of the state.
pub fn simulate_driven(
    net: &Network,
    pot: &Potentials,
    dt: f64,
    increments: &[Vec<f64>],
) -> Result<PathBundle> {
    let n = net.n();
    if increments.len() != n {
        return Err(GraphLdpError::validation(format!(
            "{} increment arrays for {} vertices",
            increments.len(),
            n
        )));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(GraphLdpError::validation("dt must be positive"));
    }
    let k_steps = increments.first().map_or(0, |a| a.len());
    if increments.iter().any(|a| a.len() != k_steps) {
        return Err(GraphLdpError::validation(
            "increment arrays must share one length",
        ));
    }
    let mut x = net.x0.to_vec();
    let mut paths: Vec<Vec<f64>> = (0..n)
        .map(|v| {
            let mut p = Vec::with_capacity(k_steps + 1);
            p.push(x[v]);
            p
        })
        .collect();
    let mut b = vec![0.0; n];
    for k in 0..k_steps {
        for v in 0..n {
            b[v] = drift(net, &x, pot, v as u32);
        }
        for v in 0..n {
            x[v] += b[v] * dt + increments[v][k];
            if !x[v].is_finite() {
                return Err(GraphLdpError::numeric(format!(
                    "state diverged at vertex {v}, step {k}"
                )));
            }
            paths[v].push(x[v]);
        }
    }
    Ok(PathBundle { dt, paths })
}

/// Euler scheme with fresh Gaussian noise, x += drift dt + sigma dB.
/// Returns the bundle and the driving noise increments sigma dB.
pub fn simulate<R: Rng>(
    net: &Network,
    pot: &Potentials,
    sigma: f64,
    t_final: f64,
    dt: f64,
    rng: &mut R,
) -> Result<(PathBundle, Vec<Vec<f64>>)> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(GraphLdpError::validation("sigma must be nonnegative"));
    }
    let k_steps = split_steps(t_final, dt)?;
    let sd = sigma * dt.sqrt();
    let increments: Vec<Vec<f64>> = (0..net.n())
        .map(|_| {
            (0..k_steps)
                .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let bundle = simulate_driven(net, pot, dt, &increments)?;
    Ok((bundle, increments))
}

/// Reference paths x_v(t) = x_v(0) + sigma B_v(t) with independent
/// Brownian motions.
pub fn brownian_bundle<R: Rng>(
    net: &Network,
    sigma: f64,
    t_final: f64,
    dt: f64,
    rng: &mut R,
) -> Result<PathBundle> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(GraphLdpError::validation("sigma must be positive"));
    }
    let k_steps = split_steps(t_final, dt)?;
    let sd = sigma * dt.sqrt();
    let paths = (0..net.n())
        .map(|v| {
            let mut p = Vec::with_capacity(k_steps + 1);
            let mut x = net.x0[v];
            p.push(x);
            for _ in 0..k_steps {
                x += sd * rng.sample::<f64, _>(StandardNormal);
                p.push(x);
            }
            p
        })
        .collect();
    Ok(PathBundle { dt, paths })
}

/// The four tilt ingredients of one vertex, reading only the vertex and
/// its neighbors: the boundary energies F1 at times T and 0, the
/// integrated squared drift F2, and the integrated second derivative F3.
/// Time integrals are left-Riemann sums on the bundle grid.
pub fn tilt_terms(
    net: &Network,
    bundle: &PathBundle,
    pot: &Potentials,
    v: u32,
) -> Result<(f64, f64, f64, f64)> {
    let k_steps = bundle.check_grid(net.n())?;
    let vu = v as usize;
    if vu >= net.n() {
        return Err(GraphLdpError::validation(format!("vertex {v} out of range")));
    }
    let wv = net.omega[vu];
    let nbrs = net.graph.neighbors(v);
    let f1_at = |k: usize| {
        let xv = bundle.paths[vu][k];
        let mut e = pot.g(xv, wv);
        for (i, &u) in nbrs.iter().enumerate() {
            let uu = u as usize;
            e += net.mu_out[vu][i] * pot.f(xv - bundle.paths[uu][k], wv, net.omega[uu]);
        }
        e
    };
    let f1_t = f1_at(k_steps);
    let f1_0 = f1_at(0);
    let mut f2 = 0.0;
    let mut f3 = 0.0;
    for k in 0..k_steps {
        let xv = bundle.paths[vu][k];
        let mut b = pot.gp(xv, wv);
        let mut c = pot.gpp(xv, wv);
        for (i, &u) in nbrs.iter().enumerate() {
            let uu = u as usize;
            let xu = bundle.paths[uu][k];
            let wu = net.omega[uu];
            b += net.mu_out[vu][i] * pot.fp(xv - xu, wv, wu);
            b -= net.mu_in[vu][i] * pot.fp(xu - xv, wu, wv);
            c += net.mu_out[vu][i] * pot.fpp(xv - xu, wv, wu);
            c += net.mu_in[vu][i] * pot.fpp(xu - xv, wu, wv);
        }
        f2 += b * b;
        f3 += c;
    }
    Ok((f1_t, f1_0, f2 * bundle.dt, f3 * bundle.dt))
}

/// Normalized log density of the gradient-descent dynamics against the
/// Brownian reference, as an average of per-vertex terms:
/// F = (1/n) sum_v [ -(F1_T - F1_0)/sigma^2 - F2/(2 sigma^2) + F3/2 ].
/// exp(n F) integrates to one over Brownian bundles.
pub fn tilt_f(net: &Network, bundle: &PathBundle, pot: &Potentials, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(GraphLdpError::validation("sigma must be positive"));
    }
    let s2 = sigma * sigma;
    let mut total = 0.0;
    for v in 0..net.n() as u32 {
        let (f1_t, f1_0, f2, f3) = tilt_terms(net, bundle, pot, v)?;
        total += -(f1_t - f1_0) / s2 - f2 / (2.0 * s2) + f3 / 2.0;
    }
    Ok(total / net.n() as f64)
}

/// Monte Carlo mass of exp(n F) over Brownian bundles: the mean with its
/// 99% confidence half-width. The exact value is 1 up to discretization
/// bias of order dt.
pub fn girsanov_check<R: Rng>(
    net: &Network,
    pot: &Potentials,
    sigma: f64,
    t_final: f64,
    dt: f64,
    n_samples: u64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if n_samples < 2 {
        return Err(GraphLdpError::validation("need at least two samples"));
    }
    split_steps(t_final, dt)?;
    let master: u64 = rng.random();
    let n = net.n() as f64;
    let stats = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let mut r = rng::substream(master, "girsanov", s);
            let bundle = brownian_bundle(net, sigma, t_final, dt, &mut r)?;
            let w = (n * tilt_f(net, &bundle, pot, sigma)?).exp();
            Ok((w, w * w))
        })
        .try_reduce(|| (0.0, 0.0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let m = n_samples as f64;
    let mean = stats.0 / m;
    let var = ((stats.1 - m * mean * mean) / (m - 1.0)).max(0.0);
    Ok((mean, Z99 * (var / m).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::sample_er;
    use crate::rng;

    fn line_network(n: usize, omega: Vec<f64>, x0: Vec<f64>) -> Network {
        let edges = (0..n as u32 - 1).map(|v| (v, v + 1)).collect();
        let skel = MarkedGraph::unmarked(n, edges).unwrap();
        Network::with_unit_strengths(&skel, omega, x0).unwrap()
    }

    /// Asymmetric in the medium pair, so argument-order mistakes show up.
    fn skew_potentials() -> Potentials {
        Potentials::new(
            |x, w, wp| (1.0 + 0.5 * w) * x.sin() + 0.3 * wp * x.cos() + 0.1 * w * wp * x * x,
            |x, w, wp| (1.0 + 0.5 * w) * x.cos() - 0.3 * wp * x.sin() + 0.2 * w * wp * x,
            |x, w, wp| -(1.0 + 0.5 * w) * x.sin() - 0.3 * wp * x.cos() + 0.2 * w * wp,
            |x, w| w * x + 0.25 * x * x,
            |x, w| w + 0.5 * x,
            |_, _| 0.5,
        )
        .unwrap()
    }

    #[test]
    fn registration_rejects_a_wrong_derivative() {
        let bad = Potentials::new(
            |x, _, _| x.sin(),
            |x, _, _| x.cos(),
            |x, _, _| x.sin(), // should be -sin
            |_, _| 0.0,
            |_, _| 0.0,
            |_, _| 0.0,
        );
        assert!(matches!(bad, Err(GraphLdpError::Certification(_))));
        let bad_g = Potentials::new(
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |x, w| w * x,
            |_, w| w + 0.01,
            |_, _| 0.0,
        );
        assert!(bad_g.is_err());
    }

    #[test]
    fn hamiltonian_hand_values() {
        // No edges: only the external field.
        let skel = MarkedGraph::unmarked(2, vec![]).unwrap();
        let net = Network::with_unit_strengths(&skel, vec![0.5, -1.0], vec![0.0; 2]).unwrap();
        let pot = Potentials::new(
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |x, w| w * x,
            |_, w| w,
            |_, _| 0.0,
        )
        .unwrap();
        let h = hamiltonian(&net, &[2.0, 3.0], &pot).unwrap();
        assert!((h - (0.5 * 2.0 - 1.0 * 3.0)).abs() < 1e-12);
        assert!(hamiltonian(&net, &[1.0], &pot).is_err());

        // One edge, quadratic pair term: both orientations add up.
        let net = line_network(2, vec![0.0, 0.0], vec![0.0, 0.0]);
        let pot = Potentials::new(
            |x, _, _| x * x,
            |x, _, _| 2.0 * x,
            |_, _, _| 2.0,
            |_, _| 0.0,
            |_, _| 0.0,
            |_, _| 0.0,
        )
        .unwrap();
        let h = hamiltonian(&net, &[1.2, -0.3], &pot).unwrap();
        assert!((h - 2.0 * (1.2f64 + 0.3).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn drift_is_the_gradient_of_the_hamiltonian() {
        use crate::mark::{Mark, MarkSpace};
        let pot = skew_potentials();
        let mut r = rng::stream(11, "grad");
        for case in 0..12 {
            let skel = sample_er(7, 2.0, &mut r).unwrap();
            let n = skel.n();
            let tau: Vec<Mark> = (0..n).map(|_| Mark::Real(r.random_range(-1.0..1.0))).collect();
            let mut xi = std::collections::BTreeMap::new();
            for &(u, v) in skel.edges() {
                xi.insert((u, v), Mark::Real(r.random_range(0.2..1.5)));
                xi.insert((v, u), Mark::Real(r.random_range(0.2..1.5)));
            }
            let graph = MarkedGraph::new(
                n,
                skel.edges().to_vec(),
                tau,
                xi,
                MarkSpace::real(),
                MarkSpace::real(),
            )
            .unwrap();
            let net = Network::new(graph, vec![0.0; n]).unwrap();
            let x: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
            for v in 0..n {
                let b = drift(&net, &x, &pot, v as u32);
                let eps = 1e-5;
                let mut xp = x.clone();
                xp[v] += eps;
                let mut xm = x.clone();
                xm[v] -= eps;
                let fd = (hamiltonian(&net, &xp, &pot).unwrap()
                    - hamiltonian(&net, &xm, &pot).unwrap())
                    / (2.0 * eps);
                assert!(
                    (b - fd).abs() <= 1e-6 * (1.0 + fd.abs()),
                    "case {case} vertex {v}: drift {b} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn isolated_vertex_feels_only_the_field() {
        let skel = MarkedGraph::unmarked(1, vec![]).unwrap();
        let net = Network::with_unit_strengths(&skel, vec![0.7], vec![0.0]).unwrap();
        let pot = skew_potentials();
        let b = drift(&net, &[1.3], &pot, 0);
        assert!((b - pot.gp(1.3, 0.7)).abs() < 1e-15);
    }

    #[test]
    fn kuramoto_single_edge_drift() {
        let net = line_network(2, vec![0.0, 0.0], vec![0.0, 0.0]);
        for scale in [1.0, 2.5] {
            let pot = Potentials::kuramoto(scale).unwrap();
            let x = [0.9, -0.4];
            let b = drift(&net, &x, &pot, 0);
            assert!((b - scale * (x[0] - x[1]).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_noise_paths_are_brownian() {
        let skel = MarkedGraph::unmarked(10, vec![]).unwrap();
        let net = Network::with_unit_strengths(&skel, vec![0.0; 10], vec![0.0; 10]).unwrap();
        let pot = Potentials::zero();
        let dt = 1e-4;
        let mut r = rng::stream(13, "noise");
        let (bundle, inc) = simulate(&net, &pot, 1.0, 1.0, dt, &mut r).unwrap();
        // With zero drift the path increments are the noise, up to the
        // rounding of the running sum.
        for v in 0..10 {
            for k in 0..bundle.steps() {
                let diff = bundle.paths[v][k + 1] - bundle.paths[v][k];
                assert!((diff - inc[v][k]).abs() < 1e-12);
            }
        }
        let all: Vec<f64> = inc.iter().flatten().copied().collect();
        assert_eq!(all.len(), 100_000);
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / (all.len() - 1) as f64;
        let tol = 3.0 * dt * (2.0 / all.len() as f64).sqrt();
        assert!((var - dt).abs() < tol, "increment variance {var} vs dt {dt}");
    }

    #[test]
    fn deterministic_linear_field_decays_exponentially() {
        // g(x) = -x^2/2 gives drift -x; with no noise the scheme tracks
        // x0 e^{-t} to first order in dt.
        let skel = MarkedGraph::unmarked(1, vec![]).unwrap();
        let net = Network::with_unit_strengths(&skel, vec![0.0], vec![2.0]).unwrap();
        let pot = Potentials::new(
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |x, _| -0.5 * x * x,
            |x, _| -x,
            |_, _| -1.0,
        )
        .unwrap();
        let mut r = rng::stream(17, "ode");
        let (bundle, _) = simulate(&net, &pot, 0.0, 1.0, 1e-3, &mut r).unwrap();
        let x_t = *bundle.paths[0].last().unwrap();
        let exact = 2.0 * (-1.0f64).exp();
        assert!((x_t - exact).abs() < 2.0 * 1e-3, "{x_t} vs {exact}");
    }

    #[test]
    fn shared_seed_reproduces_bitwise() {
        let mut r1 = rng::stream(19, "sim");
        let mut r2 = rng::stream(19, "sim");
        let net = line_network(4, vec![0.1; 4], vec![0.0, 1.0, -1.0, 0.5]);
        let pot = Potentials::kuramoto(0.8).unwrap();
        let (b1, _) = simulate(&net, &pot, 1.0, 0.5, 1e-2, &mut r1).unwrap();
        let (b2, _) = simulate(&net, &pot, 1.0, 0.5, 1e-2, &mut r2).unwrap();
        assert_eq!(b1, b2);
        let (b3, _) = simulate(&net, &pot, 1.0, 0.5, 1e-2, &mut r1).unwrap();
        assert_ne!(b1, b3);
    }

    #[test]
    fn euler_strong_order_one() {
        // Against a dt/8 reference driven by the same noise, halving dt
        // halves the endpoint error.
        let net = line_network(3, vec![0.2, -0.1, 0.4], vec![0.3, -0.2, 0.1]);
        let pot = Potentials::kuramoto(1.0).unwrap();
        let t_final = 1.0;
        let fine = 512usize;
        let sigma = 0.5;
        let dt_f = t_final / fine as f64;
        let coarsen = |inc: &[Vec<f64>], m: usize| -> Vec<Vec<f64>> {
            inc.iter()
                .map(|a| a.chunks(m).map(|c| c.iter().sum()).collect())
                .collect()
        };
        let (mut e_h, mut e_2h) = (0.0, 0.0);
        for rep in 0..20 {
            let mut r = rng::substream(23, "order", rep);
            let inc: Vec<Vec<f64>> = (0..3)
                .map(|_| {
                    (0..fine)
                        .map(|_| sigma * dt_f.sqrt() * r.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect();
            let reference = simulate_driven(&net, &pot, dt_f, &inc).unwrap();
            let at_h = simulate_driven(&net, &pot, 8.0 * dt_f, &coarsen(&inc, 8)).unwrap();
            let at_2h = simulate_driven(&net, &pot, 16.0 * dt_f, &coarsen(&inc, 16)).unwrap();
            for v in 0..3 {
                let x_ref = *reference.paths[v].last().unwrap();
                e_h += (at_h.paths[v].last().unwrap() - x_ref).abs();
                e_2h += (at_2h.paths[v].last().unwrap() - x_ref).abs();
            }
        }
        let ratio = e_2h / e_h;
        assert!((ratio - 2.0).abs() < 0.3, "error ratio {ratio}");
    }

    #[test]
    fn tilt_terms_trivial_and_constant_paths() {
        // Isolated root with no field: everything vanishes.
        let skel = MarkedGraph::unmarked(1, vec![]).unwrap();
        let net = Network::with_unit_strengths(&skel, vec![0.3], vec![1.1]).unwrap();
        let bundle = PathBundle {
            dt: 0.25,
            paths: vec![vec![1.1; 5]],
        };
        let (a, b, c, d) = tilt_terms(&net, &bundle, &Potentials::zero(), 0).unwrap();
        assert_eq!((a, b, c, d), (0.0, 0.0, 0.0, 0.0));

        // One quadratic edge with constant paths: closed forms in T.
        let net = line_network(2, vec![0.0, 0.0], vec![0.7, -0.2]);
        let pot = Potentials::new(
            |x, _, _| x * x,
            |x, _, _| 2.0 * x,
            |_, _, _| 2.0,
            |_, _| 0.0,
            |_, _| 0.0,
            |_, _| 0.0,
        )
        .unwrap();
        let (x0, x1) = (0.7, -0.2);
        let t_total = 2.0;
        let bundle = PathBundle {
            dt: 0.5,
            paths: vec![vec![x0; 5], vec![x1; 5]],
        };
        let (f1_t, f1_0, f2, f3) = tilt_terms(&net, &bundle, &pot, 0).unwrap();
        let gap: f64 = x0 - x1;
        assert!((f1_t - gap * gap).abs() < 1e-12);
        assert_eq!(f1_t, f1_0);
        // drift(0) = 2 gap - (-2 gap) = 4 gap, squared and integrated.
        assert!((f2 - t_total * 16.0 * gap * gap).abs() < 1e-12);
        assert!((f3 - t_total * 4.0).abs() < 1e-12);
    }

    #[test]
    fn tilt_single_vertex_linear_field_closed_form() {
        let skel = MarkedGraph::unmarked(1, vec![]).unwrap();
        let net = Network::with_unit_strengths(&skel, vec![0.0], vec![0.4]).unwrap();
        let pot = Potentials::new(
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _| 0.0,
            |x, _| x,
            |_, _| 1.0,
            |_, _| 0.0,
        )
        .unwrap();
        let sigma = 0.8;
        let mut r = rng::stream(29, "tiltg");
        let bundle = brownian_bundle(&net, sigma, 0.5, 1e-2, &mut r).unwrap();
        let f = tilt_f(&net, &bundle, &pot, sigma).unwrap();
        let x_t = *bundle.paths[0].last().unwrap();
        let expect = -(x_t - 0.4 + 0.25) / (sigma * sigma);
        assert!((f - expect).abs() < 1e-12, "{f} vs {expect}");
    }

    #[test]
    fn tilt_reads_only_the_depth_one_ball() {
        let net = line_network(4, vec![0.1, -0.2, 0.3, 0.0], vec![0.0, 0.2, -0.1, 0.4]);
        let pot = skew_potentials();
        let mut r = rng::stream(31, "local");
        let bundle = brownian_bundle(&net, 1.0, 0.25, 1e-2, &mut r).unwrap();
        let before = tilt_terms(&net, &bundle, &pot, 0).unwrap();
        let neighbor_before = tilt_terms(&net, &bundle, &pot, 1).unwrap();
        let mut tampered = bundle.clone();
        for z in tampered.paths[2].iter_mut() {
            *z += 5.0;
        }
        for z in tampered.paths[3].iter_mut() {
            *z -= 3.0;
        }
        assert_eq!(before, tilt_terms(&net, &tampered, &pot, 0).unwrap());
        assert_ne!(neighbor_before, tilt_terms(&net, &tampered, &pot, 1).unwrap());
    }

    #[test]
    fn girsanov_weight_is_one_without_potentials() {
        let net = line_network(3, vec![0.0; 3], vec![0.0; 3]);
        let mut r = rng::stream(37, "triv");
        let (mean, ci) = girsanov_check(&net, &Potentials::zero(), 1.0, 0.5, 0.05, 50, &mut r).unwrap();
        assert_eq!(mean, 1.0);
        assert_eq!(ci, 0.0);
    }

    #[test]
    fn girsanov_unit_mass_small_network() {
        let skel = MarkedGraph::unmarked(4, vec![(0, 1), (1, 2), (2, 3), (0, 2)]).unwrap();
        let net = Network::with_unit_strengths(&skel, vec![0.0; 4], vec![0.1, -0.3, 0.2, 0.0]).unwrap();
        let pot = Potentials::kuramoto(0.1).unwrap();
        let mut r = rng::stream(41, "mass");
        let (mean, ci) = girsanov_check(&net, &pot, 1.0, 0.25, 1e-3, 2000, &mut r).unwrap();
        assert!(
            (mean - 1.0).abs() <= ci,
            "mean {mean} deviates from 1 beyond the 99% half-width {ci}"
        );
        assert!(ci < 0.1, "uninformative check, ci = {ci}");
    }

    #[test]
    fn network_json_round_trip() {
        let net = line_network(3, vec![0.5, -0.1, 0.0], vec![1.0, 2.0, 3.0]);
        let j = network_to_json(&net);
        let back = network_from_json(&j).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn grid_validation_errors() {
        let net = line_network(2, vec![0.0; 2], vec![0.0; 2]);
        let bundle = PathBundle {
            dt: 0.1,
            paths: vec![vec![0.0; 4], vec![0.0; 5]],
        };
        assert!(tilt_terms(&net, &bundle, &Potentials::zero(), 0).is_err());
        let mut r = rng::stream(43, "bad");
        assert!(simulate(&net, &Potentials::zero(), 1.0, 1.0, 0.3, &mut r).is_err());
    }
}
