use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{validate_schema, FactorSpec, WellTable};
use crate::error::{Error, Result};

/// Units accepted without a warning.
pub const KNOWN_UNITS: &[&str] = &[
    "-", "", "m", "%", "MPa", "°", "deg", "m³", "m^3", "m³/m", "m^3/m", "10⁸m³", "10^8m^3",
    "10⁸ m³", "10^8 m^3", "t", "t/m", "days", "d",
];

/// One warning per schema entry whose unit is not in [`KNOWN_UNITS`].
pub fn unit_warnings(schema: &[FactorSpec]) -> Vec<String> {
    schema
        .iter()
        .filter(|s| !KNOWN_UNITS.contains(&s.unit.trim()))
        .map(|s| format!("factor `{}` has unrecognized unit `{}`", s.name, s.unit))
        .collect()
}

/// Load a JSON schema file: a list of [`FactorSpec`].
pub fn load_schema(path: impl AsRef<Path>) -> Result<Vec<FactorSpec>> {
    let specs: Vec<FactorSpec> = serde_json::from_reader(File::open(path)?)?;
    validate_schema(&specs)?;
    Ok(specs)
}

pub fn load_csv(path: impl AsRef<Path>, schema: &[FactorSpec]) -> Result<WellTable> {
    read_csv(File::open(path)?, schema)
}

/// Parse CSV with a header row. Columns are matched to the schema by name,
/// extra columns are ignored, and empty cells become missing values.
pub fn read_csv<R: Read>(reader: R, schema: &[FactorSpec]) -> Result<WellTable> {
    validate_schema(schema)?;
    for warning in unit_warnings(schema) {
        log::warn!("{warning}");
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let positions = schema
        .iter()
        .map(|spec| {
            header
                .iter()
                .position(|h| h == spec.name)
                .ok_or_else(|| Error::MissingColumn(spec.name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::MalformedRow {
                row: row_idx,
                reason: format!("expected {} cells, found {}", header.len(), record.len()),
            });
        }
        let mut row = Vec::with_capacity(schema.len());
        for (spec, &pos) in schema.iter().zip(&positions) {
            let cell = &record[pos];
            if cell.is_empty() {
                row.push(None);
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(Some(v)),
                _ => {
                    return Err(Error::MalformedRow {
                        row: row_idx,
                        reason: format!("unparseable value `{cell}` in column `{}`", spec.name),
                    })
                }
            }
        }
        rows.push(row);
    }
    WellTable::new(schema.to_vec(), rows)
}

/// Write the table as CSV in schema order. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(table: &WellTable, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(table.specs().iter().map(|s| s.name.as_str()))?;
    for row in table.rows() {
        wtr.write_record(row.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()))?;
    }
    wtr.flush()?;
    Ok(())
}
