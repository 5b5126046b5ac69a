//! Built-in model families.

pub mod ar;
pub mod changepoint;
pub mod mixture;
pub mod toy;

pub use ar::{ArHyper, ArModel};
pub use changepoint::{ChangePointHyper, ChangePointModel};
pub use mixture::{MixtureHyper, MixtureModel};
pub use toy::{ConjugateMeanToy, DiscreteToy, GaussianToy};
