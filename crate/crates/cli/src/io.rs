//! Tab-separated matrix and group files.
//!
//! Matrix: header `alteration<TAB>sample…`, then one row per alteration with
//! cells `0`, `1` or `NA` (read as 0). Groups: header `sample<TAB>group`, then
//! one line per sample.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use anticooc_core::dataset::AlterationMatrix;
use anticooc_core::Error as CoreError;

use crate::{Error, Result};

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(true)
        .flexible(true)
        .quoting(false)
        .from_reader(input)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Sample id to group label.
pub fn read_groups<R: Read>(input: R, path: &Path) -> Result<HashMap<String, String>> {
    let mut rdr = reader(input);
    let header = rdr.headers().map_err(csv_err(path))?.clone();
    if header.len() != 2 || &header[0] != "sample" || &header[1] != "group" {
        return Err(Error::Format {
            path: path.to_path_buf(),
            line: 1,
            message: "header must be `sample<TAB>group`".into(),
        });
    }
    let mut groups = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err(path))?;
        if record.len() != 2 {
            return Err(Error::Format {
                path: path.to_path_buf(),
                line: line_of(&record),
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        if groups.insert(record[0].to_string(), record[1].to_string()).is_some() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                line: line_of(&record),
                message: format!("sample {} listed twice", &record[0]),
            });
        }
    }
    Ok(groups)
}

/// Parses a matrix given its group assignment.
pub fn read_matrix<R: Read>(input: R, path: &Path, groups: &HashMap<String, String>) -> Result<AlterationMatrix> {
    let mut rdr = reader(input);
    let header = rdr.headers().map_err(csv_err(path))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(CoreError::NoRows.into());
    }
    if &header[0] != "alteration" {
        return Err(Error::Format {
            path: path.to_path_buf(),
            line: 1,
            message: "first header field must be `alteration`".into(),
        });
    }
    let samples: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let sample_groups = samples
        .iter()
        .map(|s| groups.get(s).cloned().ok_or_else(|| Error::MissingSample(s.clone())))
        .collect::<Result<Vec<_>>>()?;
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<bool>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err(path))?;
        let label = record.get(0).unwrap_or_default().to_string();
        if record.len() != samples.len() + 1 {
            return Err(CoreError::RowLength {
                row: label,
                found: record.len().saturating_sub(1),
                expected: samples.len(),
            }
            .into());
        }
        let row = record
            .iter()
            .skip(1)
            .map(|cell| match cell {
                "1" => Ok(true),
                "0" | "NA" => Ok(false),
                other => Err(Error::Format {
                    path: path.to_path_buf(),
                    line: line_of(&record),
                    message: format!("malformed cell {other:?} in row {label}"),
                }),
            })
            .collect::<Result<Vec<bool>>>()?;
        labels.push(label);
        rows.push(row);
    }
    Ok(AlterationMatrix::from_rows(&labels, &samples, &sample_groups, &rows)?)
}

/// Reads a matrix and its groups file from disk.
pub fn load_matrix(matrix_path: &Path, groups_path: &Path) -> Result<AlterationMatrix> {
    let groups = read_groups(open(groups_path)?, groups_path)?;
    read_matrix(open(matrix_path)?, matrix_path, &groups)
}

/// Writes `matrix` in the matrix format, samples in stored order.
pub fn write_matrix<W: Write>(matrix: &AlterationMatrix, mut out: W) -> std::io::Result<()> {
    write!(out, "alteration")?;
    for s in matrix.samples() {
        write!(out, "\t{s}")?;
    }
    writeln!(out)?;
    let n = matrix.samples().len();
    let mut line = String::new();
    for r in 0..matrix.rows() as u32 {
        line.clear();
        line.push_str(matrix.alteration(r).label());
        for j in 0..n {
            line.push_str(if matrix.get(r, j) { "\t1" } else { "\t0" });
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Writes the group assignment of `matrix`.
pub fn write_groups<W: Write>(matrix: &AlterationMatrix, mut out: W) -> std::io::Result<()> {
    writeln!(out, "sample\tgroup")?;
    for (j, s) in matrix.samples().iter().enumerate() {
        writeln!(out, "{s}\t{}", matrix.group_labels()[matrix.sample_group(j)])?;
    }
    Ok(())
}

/// Writes `matrix.tsv` and `groups.tsv` into `dir`.
pub fn save_matrix(matrix: &AlterationMatrix, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut body = Vec::new();
    write_matrix(matrix, &mut body).expect("write to memory");
    write_file(&dir.join("matrix.tsv"), &body)?;
    body.clear();
    write_groups(matrix, &mut body).expect("write to memory");
    write_file(&dir.join("groups.tsv"), &body)
}

pub(crate) fn write_file(path: &Path, body: &[u8]) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}
