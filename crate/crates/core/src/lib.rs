//! Zero-shot resizing of vector-quantization codebooks.
//!
//! A large parent codebook is embedded in the Poincaré ball, organized into a
//! minimum spanning tree under hyperbolic distance, and pruned leaf by leaf.
//! The pruning order is a global importance ranking: the first `K` entries
//! form a child codebook of size `K`, for any `K`, with no retraining.
//!
//! ```
//! use kb_resize::{compute_ranking, resize, EuclideanCodebook};
//!
//! let parent = EuclideanCodebook::from_rows(&[[0.1, 0.0], [0.2, 0.0], [0.3, 0.0]])?;
//! let ranking = compute_ranking(&parent)?;
//! let child = resize(&parent, &ranking, 2)?;
//! assert_eq!(child.size(), 2);
//! # Ok::<(), kb_resize::Error>(())
//! ```
//!
//! Module map:
//!
//! - [`geometry`]: exponential/logarithmic maps and hyperbolic distance
//! - [`tree`]: Prim's MST, root selection, leaf-pruning order
//! - [`ranking`]: importance rankings and resizing
//! - [`codec`]: quantization, index packing, receiver lookup
//! - [`harness`]: synthetic sources, k-means baselines, rate–distortion sweep
//! - [`cli`]: the `kbresize` command-line front end

pub mod cli;
pub mod codebook;
pub mod codec;
pub mod error;
pub mod format;
pub mod fsio;
pub mod geometry;
pub mod harness;
pub mod ranking;
pub mod tree;

pub use codebook::EuclideanCodebook;
pub use codec::{
    bits_per_index, dequantize, pack, quantize, unpack, FeatureGrid, IndexGrid, Payload,
};
pub use error::{Error, Result};
pub use geometry::{exp_map, hyperbolic_distance, log_map, PoincarePointSet, PoincareVector};
pub use ranking::{compute_ranking, resize, verify_ranking, ImportanceRanking};
pub use tree::{
    build_mst, compute_removal_order, prune_to_size, select_root, RemovalOrder, SemanticTree,
};
