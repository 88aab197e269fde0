//! CSV and JSON emission of result tables.
//!
//! CSV files start with a `# schema_version=N table=NAME` comment line,
//! then a header row in the table's fixed column order, then one line per
//! record. An empty table is the comment plus the header.

use std::io::{Read, Write};
use std::path::Path;

use masr_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::SCHEMA_VERSION;

/// A record type with a stable column order.
pub trait Table: Serialize + DeserializeOwned {
    const NAME: &'static str;
    const COLUMNS: &'static [&'static str];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Parameter(format!("unknown format `{s}`, expected csv or json"))),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonDoc<R> {
    schema_version: u32,
    table: String,
    rows: R,
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize);
    Error::Parse { line, msg: e.to_string() }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stream>", e)
}

pub fn write_table<T: Table, W: Write>(rows: &[T], format: Format, mut out: W) -> Result<()> {
    match format {
        Format::Csv => {
            writeln!(out, "# schema_version={SCHEMA_VERSION} table={}", T::NAME).map_err(io_err)?;
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(T::COLUMNS).map_err(csv_err)?;
            for r in rows {
                w.serialize(r).map_err(csv_err)?;
            }
            w.flush().map_err(io_err)?;
        }
        Format::Json => {
            let doc = JsonDoc {
                schema_version: SCHEMA_VERSION,
                table: T::NAME.to_string(),
                rows,
            };
            serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| Error::Parameter(e.to_string()))?;
            writeln!(out).map_err(io_err)?;
        }
    }
    Ok(())
}

pub fn table_string<T: Table>(rows: &[T], format: Format) -> String {
    let mut buf = Vec::new();
    write_table(rows, format, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("reports are UTF-8")
}

/// Writes `dir/NAME.EXT`.
pub fn write_table_file<T: Table>(rows: &[T], format: Format, dir: &Path) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("{}.{}", T::NAME, format.extension()));
    let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_table(rows, format, std::io::BufWriter::new(f)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(&path, source),
        e => e,
    })?;
    Ok(path)
}

fn check_version(v: u32) -> Result<()> {
    if v == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(Error::Parse {
            line: Some(1),
            msg: format!("schema version {v}, expected {SCHEMA_VERSION}"),
        })
    }
}

/// Parses a table written by [`write_table`], checking schema version,
/// table name and column order.
pub fn read_table<T: Table, R: Read>(format: Format, mut input: R) -> Result<Vec<T>> {
    let mut src = String::new();
    input.read_to_string(&mut src).map_err(io_err)?;
    match format {
        Format::Csv => {
            let first = src.lines().next().unwrap_or_default();
            let meta = first
                .strip_prefix("# ")
                .ok_or_else(|| Error::Parse { line: Some(1), msg: "missing schema line".into() })?;
            let mut version = None;
            let mut table = None;
            for kv in meta.split_whitespace() {
                match kv.split_once('=') {
                    Some(("schema_version", v)) => version = v.parse::<u32>().ok(),
                    Some(("table", t)) => table = Some(t),
                    _ => {}
                }
            }
            check_version(version.ok_or_else(|| Error::Parse { line: Some(1), msg: "no schema_version".into() })?)?;
            if table != Some(T::NAME) {
                return Err(Error::Parse {
                    line: Some(1),
                    msg: format!("table {table:?}, expected {}", T::NAME),
                });
            }
            let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(src.as_bytes());
            let header = r.headers().map_err(csv_err)?;
            if header.iter().ne(T::COLUMNS.iter().copied()) {
                return Err(Error::Parse {
                    line: Some(2),
                    msg: format!("columns {:?}, expected {:?}", header, T::COLUMNS),
                });
            }
            r.deserialize().map(|row| row.map_err(csv_err)).collect()
        }
        Format::Json => {
            let doc: JsonDoc<Vec<T>> = serde_json::from_str(&src).map_err(|e| Error::Parse {
                line: Some(e.line()),
                msg: e.to_string(),
            })?;
            check_version(doc.schema_version)?;
            if doc.table != T::NAME {
                return Err(Error::Parse {
                    line: None,
                    msg: format!("table `{}`, expected {}", doc.table, T::NAME),
                });
            }
            Ok(doc.rows)
        }
    }
}

pub fn read_table_file<T: Table>(path: &Path) -> Result<Vec<T>> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        _ => Format::Csv,
    };
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(format, f)
}

macro_rules! table {
    ($ty:ty, $name:literal, [$($col:literal),* $(,)?]) => {
        impl Table for $ty {
            const NAME: &'static str = $name;
            const COLUMNS: &'static [&'static str] = &[$($col),*];
        }
    };
}

table!(crate::runner::RunRow, "runs", [
    "config_id", "seed", "horiz_lanes", "vert_lanes", "horiz_pes", "lanes", "queue_depth", "act_banks",
    "load_balance", "error", "total_cycles", "utilization", "frac_mac", "frac_frontend", "frac_stall",
    "frac_idle", "frac_vvadd", "frac_load", "mac_count", "stolen_macs", "skipped_columns", "dram_bytes",
    "weight_exposed_cycles", "act_exposed_cycles", "area", "energy", "power", "golden_match", "output_checksum",
]);
table!(crate::pareto::ParetoPoint, "pareto", [
    "config_id", "lanes", "cycles", "energy", "area", "on_energy_front", "on_area_front",
]);
table!(crate::experiments::ScaleRow, "scale", [
    "hidden", "nz", "weight_density", "act_density", "sparse_cycles", "dense_cycles", "speedup",
]);
table!(crate::experiments::ResourceRow, "fig8_resources", ["design", "lanes", "metric", "category", "value"]);
table!(crate::experiments::BankRow, "fig9_left", ["banks", "category", "fraction"]);
table!(crate::experiments::QueueRow, "fig9_center", ["queue_depth", "category", "fraction"]);
table!(crate::experiments::UtilRow, "fig9_right", ["lanes", "design", "utilization"]);
table!(crate::experiments::BaselineRow, "fig11_baselines", ["lanes", "design", "metric", "value", "normalized"]);
table!(crate::experiments::EncodingRow, "encodings", [
    "partitions", "encoding", "value_bits", "mask_bits", "row_offset_bits", "column_index_bits", "metadata_bits",
    "total_bits",
]);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::BankRow;

    fn rows() -> Vec<BankRow> {
        vec![
            BankRow { banks: 1, category: "vvadd".into(), fraction: 0.35 },
            BankRow { banks: 8, category: "mac".into(), fraction: 1.0 / 3.0 },
        ]
    }

    #[test]
    fn csv_and_json_roundtrip() {
        for f in [Format::Csv, Format::Json] {
            let s = table_string(&rows(), f);
            let back: Vec<BankRow> = read_table(f, s.as_bytes()).unwrap();
            assert_eq!(back, rows());
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let s = table_string::<BankRow>(&[], Format::Csv);
        assert_eq!(s, format!("# schema_version={SCHEMA_VERSION} table=fig9_left\nbanks,category,fraction\n"));
        assert!(read_table::<BankRow, _>(Format::Csv, s.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn wrong_schema_or_table_rejected() {
        let s = table_string(&rows(), Format::Csv).replace("schema_version=1", "schema_version=9");
        assert!(read_table::<BankRow, _>(Format::Csv, s.as_bytes()).is_err());
        let s = table_string(&rows(), Format::Csv).replace("fig9_left", "fig9_center");
        assert!(read_table::<BankRow, _>(Format::Csv, s.as_bytes()).is_err());
        let s = table_string(&rows(), Format::Csv).replace("banks,category", "category,banks");
        assert!(read_table::<BankRow, _>(Format::Csv, s.as_bytes()).is_err());
    }
}
