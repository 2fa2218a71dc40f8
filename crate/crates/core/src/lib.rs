//! Learned feature coordinates for image classification.
//!
//! Each image becomes a load on a heterogeneous membrane. A sequence of small
//! linear programs shapes the membrane's material fields until the mutual
//! energy between a reference displacement and the load separates two groups
//! of images. Many such membranes, grown as a forest of splits, give a feature
//! vector that a Gaussian classifier consumes.
//!
//! ```
//! use meip::fem::GridMesh;
//!
//! let mesh = GridMesh::new(28, 28);
//! assert_eq!(mesh.node_count(), 841);
//! ```

pub mod dataset;
pub mod error;
pub mod fem;
pub mod lp;
pub mod pipeline;
pub mod optimizer;
pub mod classifier;
pub mod forest;

pub use error::{Error, Result};

// Book chapters, so their snippets run with `cargo test --doc`.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/membrane.md")]
    pub mod membrane {}
    #[doc = include_str!("../../../book/src/low-pass.md")]
    pub mod low_pass {}
    #[doc = include_str!("../../../book/src/axis-optimization.md")]
    pub mod axis_optimization {}
    #[doc = include_str!("../../../book/src/forests.md")]
    pub mod forests {}
    #[doc = include_str!("../../../book/src/classifier.md")]
    pub mod classifier {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    pub mod pipeline {}
}
