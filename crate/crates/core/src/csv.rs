//! Plain-text tables: comma-separated numeric columns with `#` comments.
//!
//! The format is deliberately small. Lines starting with `#` are
//! comments and survive a read-write round trip; comments of the form
//! `# key = value` double as typed annotations (a photon stream stores
//! its duration there). The first non-comment row is treated as a header
//! when any of its cells is not a number. Data cells are written with 17
//! significant digits, so values round-trip exactly.

use std::path::Path;

use crate::fit::{DataSeries, SeriesMetadata};
use crate::photon::PhotonRecord;
use crate::{Error, Result};

/// An in-memory numeric table: leading comments, optional header,
/// column-major data.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    /// Comment lines in file order, without the `#` prefix, trimmed.
    pub comments: Vec<String>,
    pub header: Option<Vec<String>>,
    pub columns: Vec<Vec<f64>>,
}

impl CsvTable {
    /// Table with the given header and no rows.
    pub fn with_header(names: &[&str]) -> Self {
        Self {
            comments: Vec::new(),
            header: Some(names.iter().map(|s| s.to_string()).collect()),
            columns: vec![Vec::new(); names.len()],
        }
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.n_cols(), "row width must match the table");
        for (col, &v) in self.columns.iter_mut().zip(row) {
            col.push(v);
        }
    }

    /// Add a `# key = value` annotation.
    pub fn annotate(&mut self, key: &str, value: f64) {
        self.comments.push(format!("{key} = {value:.16e}"));
    }

    /// Value of a `# key = value` annotation, if present and numeric.
    pub fn annotation(&self, key: &str) -> Option<f64> {
        self.comments.iter().find_map(|line| {
            let (k, v) = line.split_once('=')?;
            if k.trim() == key {
                v.trim().parse().ok()
            } else {
                None
            }
        })
    }

    /// Resolve a column by header name or numeric index.
    ///
    /// Index selectors work with or without a header; name selectors
    /// require one. Names match case-insensitively.
    pub fn find_column(&self, selector: &str) -> Result<usize> {
        if let Ok(idx) = selector.parse::<usize>() {
            if idx < self.n_cols() {
                return Ok(idx);
            }
            return Err(Error::MissingColumn(format!(
                "index {idx} out of range for a {}-column table",
                self.n_cols()
            )));
        }
        let Some(header) = &self.header else {
            return Err(Error::MissingColumn(format!(
                "`{selector}` (the table has no header; use a column index)"
            )));
        };
        header
            .iter()
            .position(|name| name.eq_ignore_ascii_case(selector))
            .ok_or_else(|| {
                Error::MissingColumn(format!(
                    "`{selector}` (available: {})",
                    header.join(", ")
                ))
            })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut comments = Vec::new();
        let mut header = None;
        let mut columns: Vec<Vec<f64>> = Vec::new();
        let mut saw_data = false;

        for (line_no, raw) in text.lines().enumerate() {
            let line = if line_no == 0 {
                raw.trim_start_matches('\u{feff}')
            } else {
                raw
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                comments.push(comment.trim().to_string());
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if !saw_data {
                // First content row: a header if any cell is non-numeric.
                if cells.iter().any(|c| c.parse::<f64>().is_err()) {
                    header = Some(cells.iter().map(|c| c.to_string()).collect());
                    columns = vec![Vec::new(); cells.len()];
                    saw_data = true;
                    continue;
                }
                if columns.is_empty() {
                    columns = vec![Vec::new(); cells.len()];
                }
                saw_data = true;
            }
            if cells.len() != columns.len() {
                return Err(Error::Csv(format!(
                    "line {}: expected {} cells, found {}",
                    line_no + 1,
                    columns.len(),
                    cells.len()
                )));
            }
            for (col, (cell, store)) in cells.iter().zip(&mut columns).enumerate() {
                let value: f64 = cell.parse().map_err(|_| {
                    Error::Csv(format!(
                        "line {}, column {}: `{cell}` is not a number",
                        line_no + 1,
                        col + 1
                    ))
                })?;
                store.push(value);
            }
        }

        if columns.is_empty() {
            return Err(Error::Csv("no data rows".into()));
        }
        Ok(Self {
            comments,
            header,
            columns,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Csv(msg) => Error::Csv(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for comment in &self.comments {
            out.push_str("# ");
            out.push_str(comment);
            out.push('\n');
        }
        if let Some(header) = &self.header {
            out.push_str(&header.join(","));
            out.push('\n');
        }
        for row in 0..self.n_rows() {
            for (col, values) in self.columns.iter().enumerate() {
                if col > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{:.16e}", values[row]));
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_text())?)
    }
}

/// Extract a [`DataSeries`] from a table.
///
/// `x`, `y`, and `sigma` are column selectors (header name or index).
/// When omitted, x and y default to the first two columns and sigma to a
/// column literally named `sigma`, if one exists. Rows are sorted by x
/// and duplicate x values are averaged; the returned count says how many
/// rows were merged away.
pub fn series_from_table(
    table: &CsvTable,
    x: Option<&str>,
    y: Option<&str>,
    sigma: Option<&str>,
) -> Result<(DataSeries, usize)> {
    if table.n_cols() < 2 {
        return Err(Error::Csv(format!(
            "need at least two columns (x and y), found {}",
            table.n_cols()
        )));
    }
    let x_idx = match x {
        Some(sel) => table.find_column(sel)?,
        None => 0,
    };
    let y_idx = match y {
        Some(sel) => table.find_column(sel)?,
        None => 1,
    };
    let sigma_idx = match sigma {
        Some(sel) => Some(table.find_column(sel)?),
        None => table
            .header
            .as_ref()
            .and_then(|h| h.iter().position(|n| n.eq_ignore_ascii_case("sigma"))),
    };
    let name = |idx: usize| {
        table
            .header
            .as_ref()
            .map(|h| h[idx].clone())
            .unwrap_or_else(|| format!("column {idx}"))
    };
    let metadata = SeriesMetadata {
        source: None,
        x_name: Some(name(x_idx)),
        y_name: Some(name(y_idx)),
    };
    DataSeries::from_unsorted(
        table.columns[x_idx].clone(),
        table.columns[y_idx].clone(),
        sigma_idx.map(|i| table.columns[i].clone()),
        metadata,
    )
}

/// Comment marker that declares a table to be a photon stream.
const STREAM_MARKER: &str = "timestamps_ns";

/// Serialize a photon stream: a `# timestamps_ns` marker, one
/// `timestamp_ns` column, and the duration, detection efficiency, and
/// seed carried as annotations.
pub fn photon_record_to_table(record: &PhotonRecord) -> CsvTable {
    let mut table = CsvTable::with_header(&["timestamp_ns"]);
    table.comments.push(STREAM_MARKER.to_string());
    table.annotate("duration_ns", record.duration_ns);
    table.annotate("detection_efficiency", record.detection_efficiency);
    table.annotate("seed", record.seed as f64);
    table.columns[0] = record.timestamps.clone();
    table
}

/// Whether a table looks like a photon stream rather than an (x, y)
/// series: the `# timestamps_ns` marker, a timestamp column header, or a
/// single column with a duration annotation.
pub fn is_photon_stream(table: &CsvTable) -> bool {
    if table.comments.iter().any(|c| c == STREAM_MARKER) {
        return true;
    }
    if let Some(header) = &table.header {
        if header.iter().any(|n| n.eq_ignore_ascii_case("timestamp_ns")) {
            return true;
        }
    }
    table.n_cols() == 1 && table.annotation("duration_ns").is_some()
}

/// Rebuild a photon stream written by [`photon_record_to_table`].
///
/// External single-column dumps are accepted too: a missing duration
/// annotation falls back to the last timestamp (slightly biasing the
/// correlator normalization low), and the detection efficiency defaults
/// to 1.
pub fn photon_record_from_table(table: &CsvTable) -> Result<PhotonRecord> {
    let idx = table.find_column("timestamp_ns").or_else(|_| {
        if table.n_cols() == 1 {
            Ok(0)
        } else {
            Err(Error::MissingColumn(
                "`timestamp_ns` (a photon stream table needs exactly one column)".into(),
            ))
        }
    })?;
    let timestamps = table.columns[idx].clone();
    let duration_ns = match table.annotation("duration_ns") {
        Some(d) => d,
        None => *timestamps.last().ok_or_else(|| {
            Error::Csv(
                "photon stream table has no timestamps and no `# duration_ns = ...` annotation"
                    .into(),
            )
        })?,
    };
    let detection_efficiency = table.annotation("detection_efficiency").unwrap_or(1.0);
    let seed = table.annotation("seed").unwrap_or(0.0) as u64;
    PhotonRecord::new(timestamps, duration_ns, detection_efficiency, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_header_comments_and_data() {
        let text = "# simulated g2\n# alpha = 5.3e-2\ntau_ns,g2\n0,0.1\n2.5,0.4\n";
        let table = CsvTable::parse(text).unwrap();
        assert_eq!(table.comments.len(), 2);
        assert_eq!(table.annotation("alpha"), Some(0.053));
        assert_eq!(table.header.as_deref().unwrap(), ["tau_ns", "g2"]);
        assert_eq!(table.columns, vec![vec![0.0, 2.5], vec![0.1, 0.4]]);
    }

    #[test]
    fn headerless_numeric_table() {
        let table = CsvTable::parse("1,2\n3,4\n").unwrap();
        assert!(table.header.is_none());
        assert_eq!(table.n_rows(), 2);
    }

    #[test]
    fn round_trip_is_exact() {
        let mut table = CsvTable::with_header(&["x", "y"]);
        table.annotate("duration_ns", 1.0e9);
        table.push_row(&[0.1 + 0.2, std::f64::consts::PI]);
        table.push_row(&[1.0 / 3.0, f64::MIN_POSITIVE]);
        let back = CsvTable::parse(&table.to_text()).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn ragged_row_names_the_line() {
        let err = CsvTable::parse("x,y\n1,2\n3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("expected 2"), "{msg}");
    }

    #[test]
    fn bad_cell_names_line_and_column() {
        let err = CsvTable::parse("x,y\n1,2\n3,oops\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3, column 2"), "{msg}");
        assert!(msg.contains("oops"), "{msg}");
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(CsvTable::parse("# only a comment\n").is_err());
        assert!(CsvTable::parse("").is_err());
    }

    #[test]
    fn find_column_by_name_index_and_miss() {
        let table = CsvTable::parse("Tau_ns,G2,sigma\n1,2,3\n").unwrap();
        assert_eq!(table.find_column("tau_ns").unwrap(), 0);
        assert_eq!(table.find_column("2").unwrap(), 2);
        let msg = table.find_column("counts").unwrap_err().to_string();
        assert!(msg.contains("available: Tau_ns, G2, sigma"), "{msg}");
        assert!(table.find_column("7").is_err());
    }

    #[test]
    fn series_defaults_and_sigma_by_name() {
        let table = CsvTable::parse("tau_ns,g2,sigma\n0,1,0.1\n1,2,0.2\n2,3,0.3\n").unwrap();
        let (series, merged) = series_from_table(&table, None, None, None).unwrap();
        assert_eq!(merged, 0);
        assert_eq!(series.sigma().unwrap(), &[0.1, 0.2, 0.3]);
        assert_eq!(series.metadata.x_name.as_deref(), Some("tau_ns"));
    }

    #[test]
    fn series_sorts_and_averages_duplicates() {
        let table = CsvTable::parse("5,50\n1,10\n5,70\n").unwrap();
        let (series, merged) = series_from_table(&table, None, None, None).unwrap();
        assert_eq!(merged, 1);
        assert_eq!(series.x(), &[1.0, 5.0]);
        assert_eq!(series.y(), &[10.0, 60.0]);
    }

    #[test]
    fn photon_record_round_trip() {
        let record = PhotonRecord::new(vec![1.5, 20.25, 300.125], 1.0e6, 0.4, 7).unwrap();
        let table = photon_record_to_table(&record);
        assert!(is_photon_stream(&table));
        let back = photon_record_from_table(&table).unwrap();
        assert_eq!(back.timestamps, record.timestamps);
        assert_eq!(back.duration_ns, record.duration_ns);
        assert_eq!(back.detection_efficiency, record.detection_efficiency);
        assert_eq!(back.seed, record.seed);
    }

    #[test]
    fn bare_timestamp_dump_is_accepted() {
        let table = CsvTable::parse("# timestamps_ns\n5\n12\n40\n").unwrap();
        assert!(is_photon_stream(&table));
        let record = photon_record_from_table(&table).unwrap();
        assert_eq!(record.duration_ns, 40.0);
        assert_eq!(record.detection_efficiency, 1.0);
    }

    #[test]
    fn xy_tables_are_not_photon_streams() {
        let table = CsvTable::parse("tau_ns,g2\n0,0.1\n2,0.5\n").unwrap();
        assert!(!is_photon_stream(&table));
    }
}
