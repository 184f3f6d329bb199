use std::path::PathBuf;

use clap::Args;

use rtbopt_core::model::{
    write_checkpoint, CvrModel, HashMode, DEFAULT_ALPHA, DEFAULT_HASH_BITS, DEFAULT_LOSS_WINDOW,
};

use super::Context;
use crate::errors::{usage, CliError};
use crate::manifest::{manifest_path_for, ManifestBuilder};

#[derive(Args)]
pub struct TrainArgs {
    /// Input log.
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// Output model checkpoint.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Train on the first N rows only (time order); default all rows.
    #[arg(long)]
    train_rows: Option<usize>,
    /// Hash-space size as a power of two (D = 2^bits).
    #[arg(long)]
    hash_bits: Option<u32>,
    /// Learning rate.
    #[arg(long)]
    alpha: Option<f64>,
    /// Salt attribute positions into the hash (use for codes that are
    /// small per-attribute integers rather than pre-hashed values).
    #[arg(long)]
    salted: bool,
    /// Rows per reported log-loss window.
    #[arg(long)]
    loss_window: Option<usize>,
}

pub fn run(ctx: &Context, args: TrainArgs) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let hash_bits = cfg.resolve(args.hash_bits, "hash-bits")?.unwrap_or(DEFAULT_HASH_BITS);
    if hash_bits == 0 || hash_bits > 31 {
        return Err(usage(format!("hash-bits must lie in 1..=31, got {hash_bits}")));
    }
    let alpha = cfg.resolve(args.alpha, "alpha")?.unwrap_or(DEFAULT_ALPHA);
    let salted = cfg.resolve_switch(args.salted, "salted")?;
    let loss_window = cfg
        .resolve(args.loss_window, "loss-window")?
        .unwrap_or(DEFAULT_LOSS_WINDOW);
    let train_rows = cfg.resolve(args.train_rows, "train-rows")?;

    let (dataset, _) = super::load_reported(&args.input)?;
    let train = match train_rows {
        Some(n) if n < dataset.len() => dataset.split_train_test(n)?.0,
        _ => dataset,
    };

    let mode = if salted { HashMode::Salted } else { HashMode::Direct };
    let mut model = CvrModel::new(1 << hash_bits, alpha, mode)?;
    let log = model.train_with_window(&train, loss_window);
    let mut seen = 0usize;
    for window in &log.windows {
        seen += window.rows;
        eprintln!("trained {seen} rows, window log loss {:.6}", window.mean_log_loss);
    }
    write_checkpoint(&model, &args.out)?;
    eprintln!(
        "checkpoint {} (d=2^{hash_bits}, alpha={alpha}, rows={})",
        args.out.display(),
        model.rows_trained()
    );

    let mut manifest = ManifestBuilder::new("train");
    manifest
        .set("hash-bits", hash_bits)
        .set("alpha", alpha)
        .set("salted", salted)
        .set("loss-window", loss_window)
        .set_opt("train-rows", train_rows)
        .input(&args.input)
        .output(&args.out);
    manifest.write(&manifest_path_for(&args.out))
}
