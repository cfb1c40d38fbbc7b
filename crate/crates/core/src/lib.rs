//! Phylogeny reconstruction when sites evolve at unknown, varying speeds.
//!
//! The pipeline clusters sites by a sparse agreement statistic, keeps one
//! bin of sites with nearly equal speed, and rebuilds the topology from
//! distances estimated on that bin. See the `book/` directory for a guided
//! tour.

// `!(x > 0.0)` is how NaN gets rejected alongside bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binning;
pub mod clustering;
pub mod distance;
pub mod io;
pub mod matrix;
pub mod model;
pub mod pipeline;
pub mod reconstruct;
pub mod tree;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/trees.md")]
    mod trees {}
    #[doc = include_str!("../../../book/src/rates.md")]
    mod rates {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/binning.md")]
    mod binning {}
    #[doc = include_str!("../../../book/src/reconstruction.md")]
    mod reconstruction {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
