pub mod error;
pub mod extensions;
pub mod data;
pub mod fp_sim;
pub mod graph;
pub mod inference;
pub mod par;
pub mod pvalues;
pub mod regression;
pub mod rng;
pub mod selection;
pub mod sim;
pub mod special;

pub use error::{Error, Result, SpecialError};
pub use par::Exec;
pub use regression::{Dataset, Design, FitState};
