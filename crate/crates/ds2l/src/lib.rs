//! Supervised subspace learning for paired two-modality data.
//!
//! Given feature matrices from two modalities describing the same samples,
//! plus shared category labels, the library learns one orthonormal projection
//! per modality. The training objective couples three ingredients: a kernel
//! dependence score that pulls the projected modalities toward each other and
//! toward the labels, a label-similarity graph that keeps semantically close
//! samples close after projection, and a row-sparsity penalty that prunes
//! uninformative features. Projections are optimized by conjugate gradients
//! along geodesics of the Stiefel manifold, alternating between modalities.
//!
//! The [`retrieval`] module scores cross-modal retrieval (one modality
//! queries, the other serves as gallery) with mean average precision and
//! cumulative match curves. The [`cli`] module wires everything into the
//! `ds2l` binary.

pub mod cli;
pub mod data;
pub mod error;
pub mod hsic;
pub mod model;
pub mod retrieval;
pub mod semantics;
pub mod stiefel;

pub use error::{Error, Result};
