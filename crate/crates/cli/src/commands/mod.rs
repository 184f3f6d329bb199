pub mod evaluate;
pub mod experiment;
pub mod gen;
pub mod predict;
pub mod search;
pub mod train;

use std::path::Path;

use rtbopt_core::data::{load_log, CampaignDataset, IngestReport, LogSchema};
use rtbopt_core::scoring::attach_profitability;

use crate::config::FileConfig;
use crate::errors::{usage, CliError};

/// Global flags shared by every subcommand.
pub struct Context {
    pub config: FileConfig,
    pub timings: bool,
}

/// Loads a log and prints the ingestion summary to stderr.
pub fn load_reported(path: &Path) -> Result<(CampaignDataset, IngestReport), CliError> {
    let (dataset, report) = load_log(path, &LogSchema::default())?;
    eprintln!(
        "loaded {}: {} rows ({} rejected)",
        path.display(),
        report.rows_loaded,
        report.rows_rejected
    );
    for issue in &report.issues {
        eprintln!("  line {}: {}", issue.line, issue.reason);
    }
    Ok((dataset, report))
}

/// Loads a scored dataset: the cvr column must be present, the
/// profitability column is derived from it when missing.
pub fn load_scored(path: &Path) -> Result<CampaignDataset, CliError> {
    let (mut dataset, _) = load_reported(path)?;
    if dataset.cvr().is_none() {
        return Err(usage(format!(
            "{}: no cvr column; run `rtbopt predict` first",
            path.display()
        )));
    }
    if dataset.profitability().is_none() {
        attach_profitability(&mut dataset)?;
    }
    Ok(dataset)
}
