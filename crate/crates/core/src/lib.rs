//! Exact tools for multipartite binary non-signaling boxes and the
//! information-causality family of tests.

pub mod behavior;
pub mod cli;
pub mod criteria;
pub mod entropy;
pub mod error;
pub mod format;
pub mod io;
pub mod protocol;
pub mod scan;

pub use behavior::{mix, named_box, Behavior, BoxParams, Relabeling, ValidationReport, Violation};
pub use criteria::{evaluate, CriterionId, CriterionReport, EvalOptions};
pub use entropy::{binary_entropy, Channel, JointDistribution, Variable};
pub use error::{Error, Result};
pub use io::BoxCatalog;
pub use protocol::{ProtocolConfig, SuccessProfile};
pub use scan::{BoundaryCurve, SliceSpec};
