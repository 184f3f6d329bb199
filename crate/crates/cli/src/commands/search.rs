use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::Args;

use rtbopt_core::search::{search, write_ranked_json, write_ranked_text, SearchParams};

use super::Context;
use crate::errors::{usage, CliError};
use crate::manifest::{manifest_path_for, ManifestBuilder};

#[derive(Args)]
pub struct SearchArgs {
    /// Scored dataset (cvr column required).
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// Ranked configurations, tab-separated.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Also write the ranking as JSON.
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
    /// Required number of visits.
    #[arg(long)]
    limit: Option<usize>,
    /// Keep and score configurations below the limit instead of
    /// rejecting them.
    #[arg(long)]
    allow_below_limit: bool,
    /// Largest attribute-subset size to enumerate.
    #[arg(long)]
    max_subset_size: Option<usize>,
    /// Disable subset pruning (identical output, slower).
    #[arg(long)]
    no_prune: bool,
}

pub fn run(ctx: &Context, args: SearchArgs) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let limit = cfg
        .resolve(args.limit, "limit")?
        .ok_or_else(|| usage("--limit is required"))?;
    let allow_below_limit = cfg.resolve_switch(args.allow_below_limit, "allow-below-limit")?;
    let no_prune = cfg.resolve_switch(args.no_prune, "no-prune")?;
    let max_subset_size = cfg.resolve(args.max_subset_size, "max-subset-size")?;

    let dataset = super::load_scored(&args.input)?;
    let params = SearchParams {
        limit,
        allow_below_limit,
        max_subset_size: max_subset_size.unwrap_or(usize::MAX),
        prune: !no_prune,
    };
    let ranked = search(&dataset, &params)?;
    if ranked.is_empty() {
        eprintln!("warning: no configuration reaches {limit} visits; table is empty");
    } else {
        eprintln!(
            "{} configurations, best quality score {}",
            ranked.len(),
            ranked[0].quality_score
        );
    }

    let mut w = BufWriter::new(File::create(&args.out)?);
    write_ranked_text(&mut w, &ranked, ctx.timings)?;
    drop(w);
    if let Some(json_path) = &args.json {
        let mut w = BufWriter::new(File::create(json_path)?);
        write_ranked_json(&mut w, &ranked, ctx.timings)?;
    }

    let mut manifest = ManifestBuilder::new("search");
    manifest
        .set("limit", limit)
        .set("allow-below-limit", allow_below_limit)
        .set("no-prune", no_prune)
        .set_opt("max-subset-size", max_subset_size)
        .input(&args.input)
        .output(&args.out);
    if let Some(json_path) = &args.json {
        manifest.output(json_path);
    }
    manifest.write(&manifest_path_for(&args.out))
}
