pub mod correct;
pub mod nudge;
pub mod report;
pub mod simulate;
pub mod sweep;
pub mod train;

pub use correct::{correct, correct_file, corrector_seed};
pub use nudge::nudge;
pub use report::report;
pub use simulate::{simulate, SimulateSummary};
pub use sweep::{sweep, SweepCell};
pub use train::{member_seed, train};
