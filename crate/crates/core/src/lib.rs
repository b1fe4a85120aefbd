//! Open-vocabulary change detection as post-processing over the decoupled
//! output heads of a promptable segmentation model.
//!
//! For each image of a bi-temporal pair, instance queries, semantic maps and
//! presence scores are fused into a per-pixel label map ([`fusion`]). Each
//! category mask is split into 8-connected instances ([`decouple`]), and
//! instances without a sufficiently overlapping counterpart at the other time
//! make up the change mask ([`matching`]). [`metrics`] scores change masks,
//! [`pipeline`] runs whole directories, [`synth`] and [`oracle`] supply
//! fixtures and reference implementations for testing.
//!
//! ```
//! use sfid::grid::BinaryMask;
//! use sfid::matching::{detect_changes_instance, MatchConfig};
//!
//! let before = BinaryMask::from_rows("1100/1100/0000/0000");
//! let after = BinaryMask::from_rows("1100/1100/0000/0011");
//! let change = detect_changes_instance(&before, &after, &MatchConfig::default()).unwrap();
//! assert_eq!(change, BinaryMask::from_rows("0000/0000/0000/0011"));
//! ```

pub mod decouple;
pub mod error;
pub mod fusion;
pub mod grid;
pub mod matching;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
pub mod store;
pub mod synth;

pub use error::{Error, Result, StoreError};
