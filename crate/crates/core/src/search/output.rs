//! Serialization of ranked search results as delimited text and JSON.

use std::io::{self, Write};

use serde::Serialize;

use super::ScoredConfiguration;

/// One serialized ranking row.
#[derive(Debug, Serialize)]
pub struct RankedRow<'a> {
    pub rank: usize,
    pub avg_profitability: f64,
    pub matched_rows: usize,
    pub selected_columns: &'a [usize],
    pub values: &'a [u64],
    pub quality_score: f64,
    /// Only populated when timings were requested; wall times are not
    /// reproducible across runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
}

/// Ranking rows for the given results, 1-based ranks.
pub fn ranked_rows(
    results: &[ScoredConfiguration],
    include_timings: bool,
) -> Vec<RankedRow<'_>> {
    results
        .iter()
        .enumerate()
        .map(|(i, r)| RankedRow {
            rank: i + 1,
            avg_profitability: r.avg_profitability,
            matched_rows: r.matched_rows,
            selected_columns: r.config.attribute_indices(),
            values: r.config.values(),
            quality_score: r.quality_score,
            elapsed_seconds: include_timings.then_some(r.elapsed_seconds),
        })
        .collect()
}

/// Writes results as tab-separated text with a header row. The
/// `selected_columns` and `values` cells use `(0, 1, 4)` / `[5, 2, 9]`
/// notation.
pub fn write_ranked_text<W: Write>(
    w: &mut W,
    results: &[ScoredConfiguration],
    include_timings: bool,
) -> io::Result<()> {
    let mut header = vec![
        "rank",
        "avg_profitability",
        "matched_rows",
        "selected_columns",
        "values",
        "quality_score",
    ];
    if include_timings {
        header.push("elapsed_seconds");
    }
    writeln!(w, "{}", header.join("\t"))?;
    for row in ranked_rows(results, include_timings) {
        write!(
            w,
            "{}\t{}\t{}\t({})\t[{}]\t{}",
            row.rank,
            row.avg_profitability,
            row.matched_rows,
            join(row.selected_columns),
            join(row.values),
            row.quality_score,
        )?;
        if let Some(t) = row.elapsed_seconds {
            write!(w, "\t{t}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Writes results as a pretty-printed JSON array with stable key order.
pub fn write_ranked_json<W: Write>(
    w: &mut W,
    results: &[ScoredConfiguration],
    include_timings: bool,
) -> io::Result<()> {
    let rows = ranked_rows(results, include_timings);
    serde_json::to_writer_pretty(&mut *w, &rows)?;
    writeln!(w)?;
    Ok(())
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use super::super::{search, SearchParams};
    use super::*;

    #[test]
    fn text_output_is_stable_and_skips_timings_by_default() {
        let d = super::super::tests::dataset(&[
            (&[1, 5], 0.5),
            (&[1, 5], 0.5),
            (&[2, 6], 0.25),
        ]);
        let ranked = search(&d, &SearchParams::new(2)).unwrap();
        let mut a = Vec::new();
        write_ranked_text(&mut a, &ranked, false).unwrap();
        let text = String::from_utf8(a.clone()).unwrap();
        assert!(text.starts_with(
            "rank\tavg_profitability\tmatched_rows\tselected_columns\tvalues\tquality_score\n"
        ));
        assert!(!text.contains("elapsed"));
        // deterministic given the same results
        let mut b = Vec::new();
        write_ranked_text(&mut b, &ranked, false).unwrap();
        assert_eq!(a, b);

        let mut with_timings = Vec::new();
        write_ranked_text(&mut with_timings, &ranked, true).unwrap();
        assert!(String::from_utf8(with_timings)
            .unwrap()
            .contains("elapsed_seconds"));
    }

    #[test]
    fn json_output_has_table_columns() {
        let d = super::super::tests::dataset(&[(&[1], 0.5), (&[1], 0.5)]);
        let ranked = search(&d, &SearchParams::new(2)).unwrap();
        let mut buf = Vec::new();
        write_ranked_json(&mut buf, &ranked, false).unwrap();
        let parsed: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let row = &parsed.as_array().unwrap()[0];
        assert_eq!(row["rank"], 1);
        assert_eq!(row["matched_rows"], 2);
        assert!(row.get("elapsed_seconds").is_none());
        assert_eq!(row["selected_columns"], serde_json::json!([0]));
    }
}
