//! Episode harness for the courtside simulator: scenario presets, the
//! closed-loop episode scheduler, batch metrics and the `courtside` CLI.

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod cli;
pub mod episode;
pub mod launcher;
pub mod outcome;
pub mod report;
pub mod scenario;

pub use batch::{run_batch, Batch, Metrics};
pub use episode::{run_episode, EpisodeResult};
pub use launcher::{launch, LauncherConfig};
pub use outcome::{classify_outcome, Outcome};
pub use scenario::{RigScheduler, Scenario};
