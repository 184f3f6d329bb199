//! Delimited-log ingestion and serialization.
//!
//! Input is header-first delimited text (tab or comma, auto-detected from
//! the header line). Columns are matched by name, never by position. Only
//! timestamp, campaign, conversion, cost and the categorical columns are
//! required; click, cpo, cvr and profitability are picked up when present
//! and other columns are ignored. Rows with a missing categorical cell or
//! a malformed numeric cell are rejected individually; ingestion aborts
//! only when more than 1% of the data rows fail.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use super::dataset::{CampaignDataset, Columns, DataError};
use crate::scoring::ProfitabilityColumn;

/// Logical-to-header column name mapping. Defaults to the production log's
/// names; categorical columns are `<attribute_prefix>1..<attribute_prefix>9`.
#[derive(Debug, Clone)]
pub struct LogSchema {
    pub timestamp: String,
    pub campaign: String,
    pub conversion: String,
    pub cost: String,
    pub click: String,
    pub cpo: String,
    pub cvr: String,
    pub profitability: String,
    pub attribute_prefix: String,
    /// Maximum number of categorical columns to look for.
    pub max_attributes: usize,
}

impl Default for LogSchema {
    fn default() -> Self {
        LogSchema {
            timestamp: "timestamp".into(),
            campaign: "campaign".into(),
            conversion: "conversion".into(),
            cost: "cost".into(),
            click: "click".into(),
            cpo: "cpo".into(),
            cvr: "cvr".into(),
            profitability: "profitability".into(),
            attribute_prefix: "cat".into(),
            max_attributes: 9,
        }
    }
}

/// Outcome counters for one ingestion run.
#[derive(Debug, Clone)]
pub struct IngestReport {
    pub rows_loaded: usize,
    pub rows_rejected: usize,
    /// First few row-level problems, with 1-based file line numbers.
    pub issues: Vec<RowIssue>,
    pub delimiter: u8,
}

#[derive(Debug, Clone)]
pub struct RowIssue {
    pub line: u64,
    pub reason: String,
}

const MAX_REPORTED_ISSUES: usize = 20;
/// Abort when more than this fraction of data rows fails to parse.
const MAX_BAD_ROW_FRACTION: f64 = 0.01;

/// Loads a delimited impression log from `path`.
pub fn load_log(
    path: &Path,
    schema: &LogSchema,
) -> Result<(CampaignDataset, IngestReport), DataError> {
    let file = File::open(path)?;
    load_log_reader(BufReader::new(file), schema)
}

/// Loads a delimited impression log from any seekable reader.
pub fn load_log_reader<R: Read + Seek>(
    mut reader: R,
    schema: &LogSchema,
) -> Result<(CampaignDataset, IngestReport), DataError> {
    let delimiter = detect_delimiter(&mut reader)?;
    reader.seek(SeekFrom::Start(0))?;
    let mut csv_reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .from_reader(reader);

    let headers = csv_reader.headers()?.clone();
    let layout = ColumnLayout::resolve(&headers, schema)?;

    let n_attr = layout.attributes.len();
    let mut cols = Columns {
        timestamps: Vec::new(),
        campaigns: Vec::new(),
        conversions: Vec::new(),
        clicks: Vec::new(),
        costs: Vec::new(),
        cpo: layout.cpo.map(|_| Vec::new()),
        attributes: vec![Vec::new(); n_attr],
        cvr: layout.cvr.map(|_| Vec::new()),
        profitability: None,
    };
    let mut prof_vals = Vec::new();
    let mut prof_excluded = Vec::new();

    let mut report = IngestReport {
        rows_loaded: 0,
        rows_rejected: 0,
        issues: Vec::new(),
        delimiter,
    };
    let mut total_rows = 0usize;

    let mut record = csv::StringRecord::new();
    while csv_reader.read_record(&mut record)? {
        total_rows += 1;
        // header is line 1
        let line = total_rows as u64 + 1;
        match parse_row(&record, &layout) {
            Ok(row) => {
                cols.timestamps.push(row.timestamp);
                cols.campaigns.push(row.campaign);
                cols.conversions.push(row.conversion);
                cols.clicks.push(row.click);
                cols.costs.push(row.cost);
                if let Some(cpo) = cols.cpo.as_mut() {
                    cpo.push(row.cpo.unwrap_or(f64::NAN));
                }
                for (a, v) in row.attributes.iter().enumerate() {
                    cols.attributes[a].push(*v);
                }
                if let Some(cvr) = cols.cvr.as_mut() {
                    cvr.push(row.cvr.expect("layout guarantees cvr"));
                }
                if layout.profitability.is_some() {
                    prof_vals.push(row.profitability.unwrap_or(0.0));
                    prof_excluded.push(row.profitability.is_none());
                }
                report.rows_loaded += 1;
            }
            Err(reason) => {
                report.rows_rejected += 1;
                if report.issues.len() < MAX_REPORTED_ISSUES {
                    report.issues.push(RowIssue { line, reason });
                }
            }
        }
    }

    if total_rows > 0
        && report.rows_rejected as f64 > MAX_BAD_ROW_FRACTION * total_rows as f64
    {
        return Err(DataError::TooManyBadRows {
            failed: report.rows_rejected,
            total: total_rows,
            first: report
                .issues
                .first()
                .map(|i| format!("line {}: {}", i.line, i.reason))
                .unwrap_or_default(),
        });
    }

    if layout.profitability.is_some() {
        cols.profitability = Some(ProfitabilityColumn::from_parts(prof_vals, prof_excluded));
    }
    let dataset = CampaignDataset::from_columns(cols)?;
    Ok((dataset, report))
}

struct ParsedRow {
    timestamp: u64,
    campaign: u64,
    conversion: bool,
    click: bool,
    cost: f64,
    cpo: Option<f64>,
    attributes: Vec<u64>,
    cvr: Option<f64>,
    profitability: Option<f64>,
}

struct ColumnLayout {
    timestamp: usize,
    campaign: usize,
    conversion: usize,
    cost: usize,
    click: Option<usize>,
    cpo: Option<usize>,
    cvr: Option<usize>,
    profitability: Option<usize>,
    attributes: Vec<usize>,
}

impl ColumnLayout {
    fn resolve(headers: &csv::StringRecord, schema: &LogSchema) -> Result<Self, DataError> {
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let require = |name: &str| {
            find(name).ok_or_else(|| DataError::MissingColumn(name.to_string()))
        };

        // Categorical columns must form a contiguous run starting at 1; a
        // gap is reported as the first missing name so `cat7` absent while
        // `cat8` exists names the hole.
        let mut attributes = Vec::new();
        for k in 1..=schema.max_attributes {
            let name = format!("{}{k}", schema.attribute_prefix);
            match find(&name) {
                Some(idx) => attributes.push(idx),
                None => {
                    let later_exists = (k + 1..=schema.max_attributes)
                        .any(|j| find(&format!("{}{j}", schema.attribute_prefix)).is_some());
                    if later_exists || k == 1 {
                        return Err(DataError::MissingColumn(name));
                    }
                    break;
                }
            }
        }

        Ok(ColumnLayout {
            timestamp: require(&schema.timestamp)?,
            campaign: require(&schema.campaign)?,
            conversion: require(&schema.conversion)?,
            cost: require(&schema.cost)?,
            click: find(&schema.click),
            cpo: find(&schema.cpo),
            cvr: find(&schema.cvr),
            profitability: find(&schema.profitability),
            attributes,
        })
    }
}

fn parse_row(record: &csv::StringRecord, layout: &ColumnLayout) -> Result<ParsedRow, String> {
    let cell = |idx: usize| record.get(idx).map(str::trim).unwrap_or("");

    let timestamp = parse_u64(cell(layout.timestamp), "timestamp")?;
    let campaign = parse_u64(cell(layout.campaign), "campaign")?;
    let conversion = parse_binary(cell(layout.conversion), "conversion")?;
    let click = match layout.click {
        Some(idx) => parse_binary(cell(idx), "click")?,
        None => false,
    };
    let cost = parse_f64(cell(layout.cost), "cost")?;
    if cost < 0.0 {
        return Err(format!("cost must be >= 0, got {cost}"));
    }
    let cpo = match layout.cpo {
        Some(idx) if !cell(idx).is_empty() => Some(parse_f64(cell(idx), "cpo")?),
        _ => None,
    };
    let mut attributes = Vec::with_capacity(layout.attributes.len());
    for (k, &idx) in layout.attributes.iter().enumerate() {
        let raw = cell(idx);
        if raw.is_empty() {
            return Err(format!("missing categorical cell cat{}", k + 1));
        }
        attributes.push(parse_u64(raw, &format!("cat{}", k + 1))?);
    }
    let cvr = match layout.cvr {
        Some(idx) => {
            let p = parse_f64(cell(idx), "cvr")?;
            if !(p > 0.0 && p < 1.0) {
                return Err(format!("cvr must lie in (0, 1), got {p}"));
            }
            Some(p)
        }
        None => None,
    };
    let profitability = match layout.profitability {
        Some(idx) if !cell(idx).is_empty() => {
            let v = parse_f64(cell(idx), "profitability")?;
            if v < 0.0 {
                return Err(format!("profitability must be >= 0, got {v}"));
            }
            Some(v)
        }
        _ => None,
    };

    Ok(ParsedRow {
        timestamp,
        campaign,
        conversion,
        click,
        cost,
        cpo,
        attributes,
        cvr,
        profitability,
    })
}

fn parse_u64(raw: &str, what: &str) -> Result<u64, String> {
    raw.parse()
        .map_err(|_| format!("unparseable {what} `{raw}`"))
}

fn parse_f64(raw: &str, what: &str) -> Result<f64, String> {
    let v: f64 = raw
        .parse()
        .map_err(|_| format!("unparseable {what} `{raw}`"))?;
    if !v.is_finite() {
        return Err(format!("non-finite {what} `{raw}`"));
    }
    Ok(v)
}

fn parse_binary(raw: &str, what: &str) -> Result<bool, String> {
    match raw {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(format!("{what} must be 0 or 1, got `{raw}`")),
    }
}

fn detect_delimiter<R: Read>(reader: &mut R) -> Result<u8, DataError> {
    let mut first_line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        match reader.read(&mut byte)? {
            0 => break,
            _ if byte[0] == b'\n' => break,
            _ => first_line.push(byte[0]),
        }
        if first_line.len() > 1 << 20 {
            break;
        }
    }
    if first_line.is_empty() {
        return Err(DataError::EmptyInput);
    }
    Ok(if first_line.contains(&b'\t') {
        b'\t'
    } else {
        b','
    })
}

/// Serializes a dataset as tab-separated text, appending cvr and
/// profitability columns (6 significant digits) when they are filled.
/// Excluded rows leave the profitability cell empty.
pub fn save_log<W: Write>(d: &CampaignDataset, w: &mut W) -> Result<(), DataError> {
    let mut header = vec![
        "timestamp".to_string(),
        "campaign".into(),
        "conversion".into(),
        "click".into(),
        "cost".into(),
    ];
    if d.cpo_raw().is_some() {
        header.push("cpo".into());
    }
    for k in 1..=d.n_attributes() {
        header.push(format!("cat{k}"));
    }
    if d.cvr().is_some() {
        header.push("cvr".into());
    }
    if d.profitability().is_some() {
        header.push("profitability".into());
    }
    writeln!(w, "{}", header.join("\t"))?;

    let mut line = String::with_capacity(128);
    for i in 0..d.len() {
        line.clear();
        use std::fmt::Write as _;
        let _ = write!(
            line,
            "{}\t{}\t{}\t{}\t{}",
            d.timestamps()[i],
            d.campaigns()[i],
            d.conversions()[i] as u8,
            d.clicks()[i] as u8,
            d.costs()[i],
        );
        if let Some(cpo) = d.cpo_raw() {
            line.push('\t');
            if !cpo[i].is_nan() {
                let _ = write!(line, "{}", cpo[i]);
            }
        }
        for a in 0..d.n_attributes() {
            let _ = write!(line, "\t{}", d.attribute(a)[i]);
        }
        if let Some(cvr) = d.cvr() {
            let _ = write!(line, "\t{}", format_sig6(cvr[i]));
        }
        if let Some(col) = d.profitability() {
            line.push('\t');
            if let Some(v) = col.get(i) {
                let _ = write!(line, "{}", format_sig6(v));
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Writes a dataset to `path` via [`save_log`].
pub fn write_log(d: &CampaignDataset, path: &Path) -> Result<(), DataError> {
    let mut w = BufWriter::new(File::create(path)?);
    save_log(d, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Decimal formatting with 6 significant digits.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0.000000".into();
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (5 - exponent).clamp(0, 17) as usize;
    format!("{v:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn load_str(text: &str) -> Result<(CampaignDataset, IngestReport), DataError> {
        load_log_reader(Cursor::new(text.as_bytes()), &LogSchema::default())
    }

    const HEADER9: &str =
        "timestamp\tcampaign\tconversion\tclick\tcost\tcpo\tcat1\tcat2\tcat3\tcat4\tcat5\tcat6\tcat7\tcat8\tcat9";

    fn row9(ts: u64, conv: u8, cost: f64, seed: u64) -> String {
        let cats: Vec<String> = (0..9).map(|k| (seed * 10 + k).to_string()).collect();
        format!("{ts}\t77\t{conv}\t0\t{cost}\t\t{}", cats.join("\t"))
    }

    #[test]
    fn three_valid_rows_load_sorted() {
        let text = format!(
            "{HEADER9}\n{}\n{}\n{}\n",
            row9(5, 0, 1.0, 1),
            row9(1, 1, 2.0, 2),
            row9(3, 0, 0.5, 3)
        );
        let (d, report) = load_str(&text).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(report.rows_loaded, 3);
        assert_eq!(report.rows_rejected, 0);
        assert_eq!(d.timestamps(), &[1, 3, 5]);
        assert_eq!(d.n_attributes(), 9);
        assert_eq!(d.campaign_id(), 77);
    }

    #[test]
    fn missing_cat7_is_a_schema_error_naming_the_column() {
        let header = HEADER9.replace("\tcat7", "");
        let err = load_str(&format!("{header}\n")).unwrap_err();
        match err {
            DataError::MissingColumn(name) => assert_eq!(name, "cat7"),
            other => panic!("expected missing column, got {other:?}"),
        }
    }

    #[test]
    fn shorter_attribute_runs_are_accepted() {
        let text = "timestamp,campaign,conversion,cost,cat1,cat2\n0,1,0,1.0,10,20\n";
        let (d, report) = load_str(text).unwrap();
        assert_eq!(d.n_attributes(), 2);
        assert_eq!(report.delimiter, b',');
        assert_eq!(d.attribute(1), &[20]);
    }

    #[test]
    fn bad_rows_are_collected_with_line_numbers() {
        // 1 bad row out of 151 stays under the 1% abort threshold
        let mut text = format!("{HEADER9}\n");
        for i in 0..150 {
            text.push_str(&row9(i, 0, 1.0, i));
            text.push('\n');
        }
        // row with missing categorical cell (cat3 empty)
        text.push_str("150\t77\t0\t0\t1.0\t\t1\t2\t\t4\t5\t6\t7\t8\t9\n");
        let (d, report) = load_str(&text).unwrap();
        assert_eq!(report.rows_rejected, 1);
        assert_eq!(d.len() + report.rows_rejected, 151);
        assert_eq!(report.issues[0].line, 152);
        assert!(report.issues[0].reason.contains("cat3"));
    }

    #[test]
    fn too_many_bad_rows_aborts() {
        let text = format!("{HEADER9}\nnot_a_number\t77\t0\t0\t1.0\t\t1\t2\t3\t4\t5\t6\t7\t8\t9\n");
        let err = load_str(&text).unwrap_err();
        assert!(matches!(err, DataError::TooManyBadRows { failed: 1, total: 1, .. }));
    }

    #[test]
    fn conversion_outside_binary_is_rejected() {
        let mut text = format!("{HEADER9}\n");
        for i in 0..150 {
            text.push_str(&row9(i, 0, 1.0, i));
            text.push('\n');
        }
        text.push_str("150\t77\t2\t0\t1.0\t\t1\t2\t3\t4\t5\t6\t7\t8\t9\n");
        let (_, report) = load_str(&text).unwrap();
        assert_eq!(report.rows_rejected, 1);
        assert!(report.issues[0].reason.contains("conversion"));
    }

    #[test]
    fn save_and_reload_round_trips_scored_columns() {
        let text = format!(
            "{HEADER9}\n{}\n{}\n",
            row9(0, 1, 0.5, 1),
            row9(1, 0, 0.0, 2) // zero cost -> excluded profitability
        );
        let (mut d, _) = load_str(&text).unwrap();
        d.set_cvr(vec![0.25, 0.5]);
        crate::scoring::attach_profitability(&mut d).unwrap();

        let mut buf = Vec::new();
        save_log(&d, &mut buf).unwrap();
        let (d2, _) = load_log_reader(Cursor::new(&buf), &LogSchema::default()).unwrap();
        assert_eq!(d2.len(), 2);
        assert_eq!(d2.cvr().unwrap(), &[0.25, 0.5]);
        let col = d2.profitability().unwrap();
        assert_eq!(col.get(0), Some(0.5));
        assert_eq!(col.get(1), None);

        // serialization is deterministic
        let mut buf2 = Vec::new();
        save_log(&d2, &mut buf2).unwrap();
        let mut buf3 = Vec::new();
        save_log(&d2, &mut buf3).unwrap();
        assert_eq!(buf2, buf3);
    }

    #[test]
    fn format_sig6_keeps_six_significant_digits() {
        assert_eq!(format_sig6(0.5), "0.500000");
        assert_eq!(format_sig6(1234.5678), "1234.57");
        assert_eq!(format_sig6(0.0001234567), "0.000123457");
        assert_eq!(format_sig6(0.0), "0.000000");
        assert_eq!(format_sig6(123456.0), "123456");
    }
}
