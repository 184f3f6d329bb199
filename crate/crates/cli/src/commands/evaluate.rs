use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;

use rtbopt_core::model::load_checkpoint;

use super::Context;
use crate::errors::{usage, CliError};
use crate::manifest::{manifest_path_for, ManifestBuilder};

#[derive(Args)]
pub struct EvaluateArgs {
    /// Labelled input log.
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// Model checkpoint.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Metrics JSON output.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Decision threshold on the predicted probability.
    #[arg(long)]
    threshold: Option<f64>,
    /// Skip the first N rows (e.g. the training prefix).
    #[arg(long)]
    skip_rows: Option<usize>,
}

pub fn run(ctx: &Context, args: EvaluateArgs) -> Result<(), CliError> {
    let threshold = ctx.config.resolve(args.threshold, "threshold")?.unwrap_or(0.5);
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
    let metrics = model.evaluate(&dataset, threshold)?;
    let mut w = BufWriter::new(File::create(&args.out)?);
    serde_json::to_writer_pretty(&mut w, &metrics).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    match metrics.auc {
        Some(auc) => eprintln!(
            "rows={} accuracy={:.4} auc={:.4} log_loss={:.4}",
            metrics.rows, metrics.accuracy, auc, metrics.log_loss
        ),
        None => eprintln!(
            "rows={} accuracy={:.4} auc=absent (single class) log_loss={:.4}",
            metrics.rows, metrics.accuracy, metrics.log_loss
        ),
    }

    let mut manifest = ManifestBuilder::new("evaluate");
    manifest
        .set("threshold", threshold)
        .set("skip-rows", skip_rows)
        .input(&args.input)
        .input(&args.model)
        .output(&args.out);
    manifest.write(&manifest_path_for(&args.out))
}
