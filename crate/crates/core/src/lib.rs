//! Graph message augmentation and message-level graph contrastive learning.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command-line
//! tool and threading live in the companion `gma` crate.

#![no_std]

extern crate alloc;

pub mod attgma;
pub mod augment;
pub mod autodiff;
pub mod error;
pub mod fixtures;
pub mod gnn;
pub mod gradsuite;
pub mod graph;
pub mod linalg;
pub mod losses;
pub mod message;
pub mod mixup;
pub mod model;
pub mod params;
pub mod probe;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{AttributedGraph, Edge, GraphDataset};
pub use linalg::Matrix;
pub use message::{MessageFn, MessageMatrix};
