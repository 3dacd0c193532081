//! Configuration-driven runs, verification reports and suites.

pub mod config;
pub mod report;
pub mod run;
pub mod suite;

pub use config::{GeneralSpecDoc, MajorantSpec, RunConfig, Task};
pub use report::{theorem_records, CheckRecord, Summary, VerificationReport};
pub use run::{crossover_pair, execute, origin_anchor, Artifact, RunOutput, CROSSOVER_TOL};
pub use suite::{run_suite, SuiteEntry, SuiteReport, EXPECTED_ANCHORS};
