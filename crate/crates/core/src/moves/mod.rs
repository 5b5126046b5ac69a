//! Between-model move constructors.

pub mod annealed;
pub mod autorj;
pub mod centering;
pub mod delayed;
pub mod jump;
pub mod mixture;

pub use annealed::AnnealedMove;
pub use autorj::{autorj_move, AutoRjMap, Moments};
pub use centering::CenteringSolution;
pub use delayed::{DelayedRejectionMove, StageTwoMap};
pub use jump::{AuxDensity, DimensionMap, JumpMove};
pub use mixture::{BirthDeathMove, SplitMergeMove};
