use std::path::PathBuf;

use clap::Args;

use rtbopt_core::data::{
    generate_synthetic, parse_planted_segments, write_log, CostRange, SyntheticSpec,
};
use rtbopt_core::scoring::attach_profitability;

use super::Context;
use crate::errors::{usage, CliError};
use crate::manifest::{manifest_path_for, ManifestBuilder};

#[derive(Args)]
pub struct GenArgs {
    /// Output dataset file (tab-separated).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Number of rows.
    #[arg(long)]
    rows: Option<usize>,
    /// Number of categorical attributes.
    #[arg(long)]
    attributes: Option<usize>,
    /// Per-attribute cardinalities, comma-separated; one value applies to
    /// all attributes.
    #[arg(long, value_name = "N[,N..]")]
    cardinalities: Option<String>,
    /// Conversion rate outside planted segments.
    #[arg(long)]
    background_rate: Option<f64>,
    /// Background cost range, lower end.
    #[arg(long)]
    cost_min: Option<f64>,
    /// Background cost range, upper end.
    #[arg(long)]
    cost_max: Option<f64>,
    /// RNG seed; identical flags and seed reproduce the file bit for bit.
    #[arg(long)]
    seed: Option<u64>,
    /// Planted-segment file (segment.K.where/rate/cost-min/cost-max keys).
    #[arg(long, value_name = "FILE")]
    planted: Option<PathBuf>,
    /// Also emit cvr/profitability columns holding each row's true rate.
    #[arg(long)]
    fill_true_cvr: bool,
    /// Overwrite an existing output file.
    #[arg(long)]
    force: bool,
}

pub fn run(ctx: &Context, args: GenArgs) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let rows = cfg.resolve(args.rows, "rows")?.unwrap_or(10_000);
    let attributes = cfg.resolve(args.attributes, "attributes")?.unwrap_or(9);
    let cardinalities: Vec<u64> = match cfg
        .resolve_list::<u64>(args.cardinalities.as_deref(), "cardinalities")?
    {
        None => vec![16; attributes],
        Some(one) if one.len() == 1 => vec![one[0]; attributes],
        Some(list) => list,
    };
    let background_rate = cfg
        .resolve(args.background_rate, "background-rate")?
        .unwrap_or(0.02);
    let cost_min = cfg.resolve(args.cost_min, "cost-min")?.unwrap_or(0.05);
    let cost_max = cfg.resolve(args.cost_max, "cost-max")?.unwrap_or(1.0);
    let seed = cfg.resolve(args.seed, "seed")?.unwrap_or(0);
    let fill_true_cvr = cfg.resolve_switch(args.fill_true_cvr, "fill-true-cvr")?;
    let planted_path = cfg.resolve(args.planted, "planted")?;

    let planted_segments = match &planted_path {
        None => Vec::new(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            parse_planted_segments(&text)?
        }
    };

    if args.out.exists() && !args.force {
        return Err(usage(format!(
            "{} exists; pass --force to overwrite",
            args.out.display()
        )));
    }

    let spec = SyntheticSpec {
        n_rows: rows,
        n_attributes: attributes,
        cardinalities,
        planted_segments,
        background_rate,
        background_cost: CostRange::new(cost_min, cost_max)?,
        fill_true_cvr,
        rng_seed: seed,
    };
    let mut dataset = generate_synthetic(&spec)?;
    if fill_true_cvr {
        attach_profitability(&mut dataset)?;
    }
    write_log(&dataset, &args.out)?;
    eprintln!("wrote {} rows to {}", dataset.len(), args.out.display());

    let mut manifest = ManifestBuilder::new("gen");
    manifest
        .set("rows", rows)
        .set("attributes", attributes)
        .set("background-rate", background_rate)
        .set("cost-min", cost_min)
        .set("cost-max", cost_max)
        .set("fill-true-cvr", fill_true_cvr)
        .set_opt("planted", planted_path.as_ref().map(|p| p.display()))
        .seed(seed)
        .output(&args.out);
    if let Some(p) = &planted_path {
        manifest.input(p);
    }
    manifest.write(&manifest_path_for(&args.out))
}
