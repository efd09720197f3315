//! Computable local-topology toolkit for sparse marked random graphs.
//!
//! The crate covers the pipeline
//!
//! ```text
//!   ensembles  ──►  marked graphs  ──►  empirical neighborhood statistics
//!       │                                     │
//!       │                              truncated entropies / rate functions
//!       │                                     │
//!   tree reconstruction (UGWT)  ◄──  seeds (explicit or Poisson-product)
//! ```
//!
//! plus mark-space discretization with certified remainder bounds, an
//! interacting-diffusion simulator with exponential path tilts, and exact
//! rational brute-force oracles used to validate every sampler and counting
//! formula on small domains.
//!
//! All randomness flows through explicitly seeded counter-based generators
//! (see [`rng`]); identical seeds yield identical artifacts.

pub mod ball;
pub mod canon;
pub mod diffusion;
pub mod discretization;
pub mod empirical;
pub mod ensembles;
pub mod entropy;
pub mod error;
pub mod graph;
pub mod mark;
pub mod metric;
pub mod oracle;
pub mod rng;
pub mod tree;
pub mod ugwt;

pub use ball::{ball, RootedBall};
pub use canon::{canonical_code, CanonicalCode, CODE_SIZE_CAP};
pub use error::GraphLdpError;
pub use graph::MarkedGraph;
pub use mark::{Mark, MarkSpace, Sym};
pub use metric::local_distance;
pub use tree::MarkedTree;
