use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::Args;

use rtbopt_core::data::CampaignDataset;
use rtbopt_core::strategies::{
    run_experiment, write_figure_tsv, ExperimentId, ExperimentSpec, ThresholdKind,
};

use super::Context;
use crate::errors::{usage, CliError};
use crate::manifest::ManifestBuilder;

#[derive(Args)]
pub struct ExperimentArgs {
    /// Which strategy to run: I..V (or a descriptive name).
    #[arg(long)]
    id: Option<String>,
    /// Scored dataset file; repeat for several slices.
    #[arg(long = "input", value_name = "FILE", required = true)]
    inputs: Vec<PathBuf>,
    /// Cut each input into single-campaign slices of this many rows
    /// instead of treating each file as one slice.
    #[arg(long)]
    slice_size: Option<usize>,
    /// Output directory for the report, figure data and manifest.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Required-visit limits, comma-separated and ascending.
    #[arg(long)]
    limits: Option<String>,
    /// Per-round limits for strategy II, comma-separated.
    #[arg(long)]
    slice_sizes: Option<String>,
    /// Prefix fractions for strategy III, comma-separated, in (0, 1].
    #[arg(long)]
    fractions: Option<String>,
    /// Threshold variable for strategy IV: cost, profitability or none.
    #[arg(long)]
    threshold_kind: Option<String>,
    /// Largest attribute-subset size to enumerate.
    #[arg(long)]
    max_subset_size: Option<usize>,
    /// Seed echoed into the report.
    #[arg(long)]
    seed: Option<u64>,
}

pub fn run(ctx: &Context, args: ExperimentArgs) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let id: ExperimentId = cfg
        .resolve(args.id.clone(), "id")?
        .ok_or_else(|| usage("--id is required (I..V)"))?
        .parse()
        .map_err(usage)?;

    let mut spec = ExperimentSpec::defaults(id);
    if let Some(limits) = cfg.resolve_list(args.limits.as_deref(), "limits")? {
        spec.limits = limits;
    }
    if let Some(sizes) = cfg.resolve_list(args.slice_sizes.as_deref(), "slice-sizes")? {
        spec.slice_sizes = sizes;
    }
    if let Some(fractions) = cfg.resolve_list(args.fractions.as_deref(), "fractions")? {
        spec.prefix_fractions = fractions;
    }
    if let Some(kind) = cfg.resolve(args.threshold_kind.clone(), "threshold-kind")? {
        spec.threshold_kind = kind.parse::<ThresholdKind>().map_err(usage)?;
    }
    spec.max_subset_size = cfg.resolve(args.max_subset_size, "max-subset-size")?;
    spec.rng_seed = cfg.resolve(args.seed, "seed")?.unwrap_or(0);

    let slice_size = cfg.resolve(args.slice_size, "slice-size")?;
    let mut slices: Vec<CampaignDataset> = Vec::new();
    for input in &args.inputs {
        let dataset = super::load_scored(input)?;
        match slice_size {
            None => slices.push(dataset),
            Some(size) => {
                let (cut, report) = dataset.campaign_slices(size)?;
                eprintln!(
                    "{}: {} slices ({} campaigns skipped, {} rows discarded)",
                    input.display(),
                    cut.len(),
                    report.campaigns_skipped,
                    report.rows_discarded
                );
                slices.extend(cut);
            }
        }
    }
    if slices.is_empty() {
        return Err(usage("no slices to run on"));
    }
    for (i, slice) in slices.iter().enumerate() {
        eprintln!("slice {i}: campaign {} rows {}", slice.campaign_id(), slice.len());
    }

    let report = run_experiment(&slices, &spec)?;
    let report = if ctx.timings {
        report
    } else {
        report.without_timings()
    };

    std::fs::create_dir_all(&args.out_dir)?;
    let report_path = args.out_dir.join(format!("report_{id}.json"));
    let figure_path = args.out_dir.join(format!("figure_{id}.tsv"));
    let mut w = BufWriter::new(File::create(&report_path)?);
    report.write_json(&mut w)?;
    drop(w);
    let mut w = BufWriter::new(File::create(&figure_path)?);
    write_figure_tsv(&report, &mut w)?;
    drop(w);
    eprintln!(
        "experiment {id}: report {} figure {}",
        report_path.display(),
        figure_path.display()
    );

    let mut manifest = ManifestBuilder::new("experiment");
    manifest
        .set("id", id)
        .set("limits", join(&spec.limits))
        .set("slice-sizes", join(&spec.slice_sizes))
        .set("fractions", join(&spec.prefix_fractions))
        .set("threshold-kind", format!("{:?}", spec.threshold_kind).to_lowercase())
        .set_opt("max-subset-size", spec.max_subset_size)
        .set_opt("slice-size", slice_size)
        .seed(spec.rng_seed);
    for input in &args.inputs {
        manifest.input(input);
    }
    manifest.output(&report_path).output(&figure_path);
    manifest.write(&args.out_dir.join(format!("manifest_{id}.json")))
}

fn join<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join(",")
}
