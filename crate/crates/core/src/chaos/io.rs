//! `multiindex,coefficient` CSV form of an expansion.

use std::io::{Read, Write};

use super::{ChaosExpansion, GridSpec};
use crate::error::{Error, Result};
use crate::multiindex::MultiIndex;

pub(super) const HEADER: [&str; 2] = ["multiindex", "coefficient"];

/// 17 significant digits, enough for an exact `f64` round trip.
pub(crate) fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub(super) fn write_expansion<W: Write>(f: &ChaosExpansion, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(HEADER)?;
    for (a, c) in f.iter() {
        out.write_record([a.to_string(), format_real(c)])?;
    }
    out.flush()?;
    Ok(())
}

pub(super) fn read_expansion<R: Read>(reader: R, grid: GridSpec) -> Result<ChaosExpansion> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(HEADER) {
        return Err(Error::Parse(format!(
            "expected header \"multiindex,coefficient\", got \"{}\"",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut coeffs = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(Error::Parse(format!(
                "row {} has {} fields",
                line + 1,
                record.len()
            )));
        }
        let a: MultiIndex = record[0].parse()?;
        let c: f64 = record[1].parse().map_err(|e| {
            Error::Parse(format!(
                "row {}: bad coefficient {:?}: {e}",
                line + 1,
                &record[1]
            ))
        })?;
        coeffs.push((a, c));
    }
    ChaosExpansion::new(grid, coeffs)
}
