//! Command-line plumbing around the `iomon` monitors: reading decision
//! streams, writing witness reports and statistics, generating synthetic
//! streams with planted violations, and latency sweeps.

pub mod bench;
pub mod error;
pub mod generate;
pub mod ingest;
pub mod run;
pub mod tune;

use std::path::Path;

use iomon::Schema;

pub use error::{CliError, Result};
pub use generate::{plant, uniform, Dataset, PlantSpec, Planted};
pub use ingest::{read_points, write_records, Format, Record};
pub use run::{run, AutoTau, RunOptions, RunStats};

/// Reads and validates a JSON schema file.
pub fn load_schema(path: &Path) -> Result<Schema> {
    let schema: Schema = serde_json::from_reader(std::fs::File::open(path)?)?;
    schema.validate()?;
    Ok(schema)
}
