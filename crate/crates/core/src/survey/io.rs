use std::io::{Read, Write};

use super::{Column, SurveyError, SurveyRecord, SurveyTable};

/// Reads the ten raw columns from a headed CSV. Extra columns are ignored.
/// Row numbers in errors count data rows from 1.
pub fn parse_survey_csv<R: Read>(source: R) -> Result<SurveyTable, SurveyError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let mut positions = [0usize; 10];
    for (slot, col) in positions.iter_mut().zip(Column::RAW) {
        *slot = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(col.key()))
            .ok_or(SurveyError::MissingColumn(col.key()))?;
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 1;
        let mut values = [0.0f64; 10];
        for ((value, &pos), col) in values.iter_mut().zip(&positions).zip(Column::RAW) {
            let cell = row.get(pos).unwrap_or("");
            *value = cell.parse::<f64>().map_err(|_| SurveyError::Parse {
                row: line,
                column: col.key(),
                value: cell.to_string(),
            })?;
            check_range(line, col, *value)?;
        }
        records.push(SurveyRecord {
            gender: values[0] as u8,
            age_band: values[1] as u8,
            bl: values[2] as u8,
            b_act: values[3],
            b_int: values[4],
            b_gro: values[5],
            c_mgt: values[6],
            c_com: values[7],
            e_int: values[8],
            e_sat: values[9],
        });
    }
    Ok(SurveyTable::from_records(records))
}

fn check_range(row: usize, column: Column, value: f64) -> Result<(), SurveyError> {
    let (ok, allowed) = match column {
        Column::Gender | Column::Bl => (value == 0.0 || value == 1.0, "{0, 1}"),
        Column::AgeBand => (
            value.fract() == 0.0 && (0.0..=3.0).contains(&value),
            "{0, 1, 2, 3}",
        ),
        _ => ((1.0..=7.0).contains(&value), "[1, 7]"),
    };
    if ok {
        Ok(())
    } else {
        Err(SurveyError::OutOfRange {
            row,
            column: column.key(),
            value,
            allowed,
        })
    }
}

/// Writes the raw columns in input-schema order. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_survey_csv<W: Write>(table: &SurveyTable, sink: W) -> Result<(), SurveyError> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(Column::RAW.iter().map(|c| c.key()))?;
    for r in table.records() {
        writer.write_record([
            r.gender.to_string(),
            r.age_band.to_string(),
            r.bl.to_string(),
            r.b_act.to_string(),
            r.b_int.to_string(),
            r.b_gro.to_string(),
            r.c_mgt.to_string(),
            r.c_com.to_string(),
            r.e_int.to_string(),
            r.e_sat.to_string(),
        ])?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}
