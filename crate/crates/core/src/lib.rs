//! Interactive design-space exploration.
//!
//! Each round the engine shows a grid of candidate designs, takes binary
//! like/not-like feedback, retrains a preference model over modality
//! embeddings, and fills the next grid with a mix of exploring and
//! exploiting proposal strategies.

pub mod catalog;
pub mod error;
pub mod imaging;
pub mod raster;

pub use catalog::{Catalog, Design, DesignId, DesignParams};
pub use error::{Error, Result};
pub use raster::{ImageSize, Mask};
pub mod preference;
pub mod space;

pub use space::{DesignSpace, EmbeddingLookup, EmbeddingMap};
pub mod proposer;
pub mod metrics;
pub mod session;

pub use proposer::{Strategy, StrategyMix};
pub use session::{Session, SessionConfig, Transcript};
pub mod simbench;
