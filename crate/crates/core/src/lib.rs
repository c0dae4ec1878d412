//! Sparse code multiple access (SCMA) link-level simulation.
//!
//! The crate covers the full chain of an SCMA link:
//!
//! - [`codebook`]: sparse multidimensional codebooks, the codebook text format,
//!   symbol-to-codeword mapping and superposition.
//! - [`factor_graph`]: the user/resource bipartite graph and its neighborhoods.
//! - [`channel`]: downlink and uplink received-signal models, AWGN and Rayleigh
//!   sampling, seeded per-stream generators.
//! - [`mpa`]: message-passing multi-user detection.
//! - [`design`]: rotated-PAM codebook design driven by a mutual-information bound.
//! - [`hma`]: hybrid multiple access, two SCMA groups superposed in power with
//!   successive interference cancellation at the near users.
//! - [`sim`]: Monte Carlo symbol-error-rate sweeps and their CSV output.
//! - [`fixtures`]: bundled codebooks and the worked 6x4 example.
//!
//! ```
//! use scma::{fixtures, mpa};
//!
//! let codebooks = fixtures::table2();
//! let graph = fixtures::graph_6x4();
//! let obs = mpa::Observation::awgn(fixtures::example_received(), 6, fixtures::example_n0());
//! let det = mpa::detect(&obs, &codebooks, &graph, &mpa::DetectorConfig::default()).unwrap();
//! assert_eq!(det.symbols, fixtures::EXAMPLE_SYMBOLS);
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod codebook;
pub mod design;
pub mod error;
pub mod factor_graph;
pub mod fixtures;
pub mod hma;
pub mod mpa;
pub mod sim;

pub use codebook::{Codebook, CodebookSet, Codeword};
pub use error::{Error, Result};
pub use factor_graph::FactorGraph;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/codebooks.md")]
    mod codebooks {}
    #[doc = include_str!("../../../book/src/factor-graph.md")]
    mod factor_graph {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/mpa.md")]
    mod mpa {}
    #[doc = include_str!("../../../book/src/design.md")]
    mod design {}
    #[doc = include_str!("../../../book/src/hma.md")]
    mod hma {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
