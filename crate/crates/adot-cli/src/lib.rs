//! IO, report plumbing, and seeded instance generation for the `adot`
//! command-line tool. The solver library itself lives in `adot-core`.

pub mod formats;
pub mod instances;
pub mod report;
