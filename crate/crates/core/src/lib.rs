//! Object-centric state extraction over a deterministic mini-console.
//!
//! Each cartridge keeps its whole state in 128 bytes of RAM. Objects can be
//! recovered two ways: by decoding RAM ([`rem`]) or by segmenting the rendered
//! frame ([`vem`]). [`evalkit`] compares the two, [`discovery`] rebuilds RAM
//! annotations from rollouts, and [`oda`] writes paired datasets.

pub mod agents;
pub mod assign;
pub mod console;
pub mod discovery;
pub mod env;
pub mod error;
pub mod evalkit;
pub mod games;
pub mod inspector;
pub mod model;
pub mod oda;
pub mod overlay;
pub mod rem;
pub mod report;
pub mod rng;
pub mod vem;

pub use console::{Console, RamState, SavedState};
pub use error::{Error, Result};
pub use games::{Cartridge, GameId, QuirkKind, QuirkSet};
pub use model::{BBox, Category, Frame, GameObject, ObjectList, Palette};
