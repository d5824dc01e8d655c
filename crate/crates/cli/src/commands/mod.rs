//! One module per subcommand. Each takes the effective configuration and
//! the output directory, writes its artifacts atomically, and finishes with
//! a run report.

pub mod analyze;
pub mod entangle;
pub mod rabi;
pub mod scans;
pub mod tomo;
