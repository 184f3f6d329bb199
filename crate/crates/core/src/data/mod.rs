//! Impression data model: columnar campaign datasets, log ingestion,
//! time-ordered splits, per-campaign slicing, and synthetic generation.

mod dataset;
pub mod ingest;
pub mod synth;

pub use dataset::{
    CampaignDataset, DataError, ImpressionRecord, SliceInfo, SliceReport, MIXED_CAMPAIGNS,
};
pub use ingest::{load_log, save_log, write_log, IngestReport, LogSchema, RowIssue};
pub use synth::{
    generate_synthetic, parse_planted_segments, CostRange, PlantedSegment, SyntheticSpec,
};
