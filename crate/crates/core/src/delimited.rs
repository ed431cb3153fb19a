//! Reading and writing the delimited text tables used at every file boundary.
//!
//! Files ending in `.csv` are comma separated; everything else is read and
//! written tab separated.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim, WriterBuilder};

pub fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => b',',
        _ => b'\t',
    }
}

/// Reads a headed table. Returns the header and the data rows with their
/// 1-based line numbers. Lines starting with `#` are skipped.
pub fn read_table(path: &Path) -> io::Result<(Vec<String>, Vec<(u64, StringRecord)>)> {
    let file = File::open(path)?;
    read_table_from(file, delimiter_for(path))
}

pub fn read_table_from<R: io::Read>(
    reader: R,
    delimiter: u8,
) -> io::Result<(Vec<String>, Vec<(u64, StringRecord)>)> {
    let mut rdr = ReaderBuilder::new()
        .delimiter(delimiter)
        .comment(Some(b'#'))
        .trim(Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(to_io)?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(to_io)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, rec));
    }
    Ok((header, rows))
}

/// Index of each requested column in `header`; errors name the first missing column.
pub fn column_indices(header: &[String], wanted: &[&str]) -> Result<Vec<usize>, String> {
    wanted
        .iter()
        .map(|w| {
            header
                .iter()
                .position(|h| h.eq_ignore_ascii_case(w))
                .ok_or_else(|| format!("missing column `{w}`"))
        })
        .collect()
}

/// Writes a headed table, choosing the delimiter from the extension.
pub fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> io::Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let file = BufWriter::new(File::create(path)?);
    write_table_to(file, delimiter_for(path), header, rows)
}

pub fn write_table_to<W: Write, I, R>(
    writer: W,
    delimiter: u8,
    header: &[&str],
    rows: I,
) -> io::Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut wtr = WriterBuilder::new().delimiter(delimiter).from_writer(writer);
    wtr.write_record(header).map_err(to_io)?;
    for row in rows {
        wtr.write_record(row.into_iter().collect::<Vec<_>>()).map_err(to_io)?;
    }
    wtr.flush()
}

fn to_io(e: csv::Error) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e)
}
