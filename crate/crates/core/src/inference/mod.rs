//! Bootstrap intervals and Monte Carlo replication studies.

pub mod bootstrap;
pub mod replicate;

pub use bootstrap::{bootstrap_ci, percentile, resample_indices, BootstrapConfig, BootstrapOutcome};
pub use replicate::{
    replicate, replicate_seed, write_long_csv, write_report_csv, write_report_text, ReplicateEstimate, ReplicationPlan,
    ReplicationReport, ReplicationRow,
};
