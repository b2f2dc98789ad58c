//! Tight Hamilton cycles in random hypergraphs: data structures, random
//! models, regularity bookkeeping, the matching LP and the reservoir search.

pub mod comb;
pub mod expand;
pub mod matchlp;
pub mod pipeline;
pub mod error;
pub mod hypercore;
pub mod randmodel;
pub mod regcomplex;

pub use error::{Result, TrlError};
pub use hypercore::{Hypergraph, TightCycle, TightPath, Vertex};
