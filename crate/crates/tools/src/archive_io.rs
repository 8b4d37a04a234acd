//! Archive dump and load as CSV with columns
//! `record_id,generation,realization_id,value,coord_0,...,coord_{n-1}`.

use std::io::{Read, Write};

use ensemble_cma::{Archive, EvaluationRecord};

use crate::{fmt_f64, Result, ToolError};

pub fn write_archive<W: Write>(out: W, archive: &Archive) -> Result<()> {
    let dim = archive.records().first().map_or(0, |r| r.point.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["record_id", "generation", "realization_id", "value"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..dim).map(|i| format!("coord_{i}")));
    w.write_record(&header)?;
    for r in archive.records() {
        let mut row = vec![
            r.record_id.to_string(),
            r.generation.to_string(),
            r.realization_id.to_string(),
            fmt_f64(r.value),
        ];
        row.extend(r.point.iter().map(|v| fmt_f64(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let s = row.get(i).unwrap_or("");
    s.parse().map_err(|_| {
        ToolError::Format(format!(
            "archive line {line}: bad value {s:?} in column {i}"
        ))
    })
}

pub fn read_archive<R: Read>(input: R) -> Result<Archive> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let fixed = ["record_id", "generation", "realization_id", "value"];
    if header.len() < fixed.len() || fixed.iter().zip(header.iter()).any(|(a, b)| *a != b) {
        return Err(ToolError::Format(
            "archive header does not start with record_id,generation,realization_id,value".into(),
        ));
    }
    for (i, name) in header.iter().skip(fixed.len()).enumerate() {
        if name != format!("coord_{i}") {
            return Err(ToolError::Format(format!(
                "archive column {name:?} should be coord_{i}"
            )));
        }
    }
    let dim = header.len() - fixed.len();
    let mut archive = Archive::new();
    for (k, row) in r.records().enumerate() {
        let row = row?;
        let line = k + 2;
        let point = (0..dim)
            .map(|i| field(&row, fixed.len() + i, line))
            .collect::<Result<Vec<f64>>>()?;
        archive.restore(EvaluationRecord {
            record_id: field(&row, 0, line)?,
            generation: field(&row, 1, line)?,
            realization_id: field(&row, 2, line)?,
            value: field(&row, 3, line)?,
            point,
        })?;
    }
    Ok(archive)
}
