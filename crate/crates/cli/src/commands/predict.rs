use std::path::PathBuf;

use clap::Args;

use rtbopt_core::data::write_log;
use rtbopt_core::model::load_checkpoint;
use rtbopt_core::scoring::attach_profitability;

use super::Context;
use crate::errors::{usage, CliError};
use crate::manifest::{manifest_path_for, ManifestBuilder};

#[derive(Args)]
pub struct PredictArgs {
    /// Input log.
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// Model checkpoint.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Output dataset with cvr and profitability columns appended.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Skip the first N rows (e.g. the training prefix).
    #[arg(long)]
    skip_rows: Option<usize>,
}

pub fn run(ctx: &Context, args: PredictArgs) -> Result<(), CliError> {
    let skip_rows = ctx.config.resolve(args.skip_rows, "skip-rows")?.unwrap_or(0);
    let (dataset, _) = super::load_reported(&args.input)?;
    if skip_rows >= dataset.len() {
        return Err(usage(format!(
            "skip-rows {skip_rows} leaves no rows (dataset has {})",
            dataset.len()
        )));
    }
    let dataset = if skip_rows > 0 {
        dataset.slice_rows(skip_rows..dataset.len())
    } else {
        dataset
    };

    let model = load_checkpoint(&args.model)?;
    let mut scored = model.predict_all(dataset);
    attach_profitability(&mut scored)?;
    write_log(&scored, &args.out)?;
    eprintln!("scored {} rows to {}", scored.len(), args.out.display());

    let mut manifest = ManifestBuilder::new("predict");
    manifest
        .set("skip-rows", skip_rows)
        .input(&args.input)
        .input(&args.model)
        .output(&args.out);
    manifest.write(&manifest_path_for(&args.out))
}
