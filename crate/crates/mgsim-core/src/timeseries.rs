//! Column-major recording of simulation outputs and its CSV rendering.
//!
//! Values are written with the shortest decimal form that round-trips to
//! the same `f64`, and column order is fixed by the caller at construction,
//! so the same run always renders byte-identical CSV.

use crate::units::format_value;
use std::io::{self, Write};

/// A recorded run: named columns of equal length, column 0 being time.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    names: Vec<String>,
    /// `data[c][r]`: column-major so per-signal slices are zero-copy.
    data: Vec<Vec<f64>>,
}

impl TimeSeries {
    /// Creates an empty series with the given column names. The first
    /// column is expected to be the time axis.
    pub fn new(names: Vec<String>) -> Self {
        assert!(
            !names.is_empty(),
            "a time series needs at least a time column"
        );
        let data = names.iter().map(|_| Vec::new()).collect();
        TimeSeries { names, data }
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.data[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends one sample across all columns.
    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(
            row.len(),
            self.names.len(),
            "row width {} does not match {} columns",
            row.len(),
            self.names.len()
        );
        for (column, &value) in self.data.iter_mut().zip(row) {
            column.push(value);
        }
    }

    /// The time axis (column 0).
    pub fn time(&self) -> &[f64] {
        &self.data[0]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// A column's samples by name, zero-copy.
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.column_index(name).map(|i| self.data[i].as_slice())
    }

    /// Half-open index range of samples with `t_from <= t < t_to`.
    /// The time axis is strictly increasing by construction.
    pub fn window(&self, t_from: f64, t_to: f64) -> std::ops::Range<usize> {
        let time = self.time();
        let start = time.partition_point(|&t| t < t_from);
        let end = time.partition_point(|&t| t < t_to);
        start..end
    }

    /// Mean of a column slice over an index range; `None` if the range is
    /// empty or the column unknown.
    pub fn mean(&self, name: &str, range: std::ops::Range<usize>) -> Option<f64> {
        let column = self.column(name)?;
        let slice = column.get(range)?;
        if slice.is_empty() {
            return None;
        }
        Some(slice.iter().sum::<f64>() / slice.len() as f64)
    }

    /// Writes the series as CSV: a header row, then one row per sample,
    /// comma-separated with `\n` endings. All fields are plain numbers or
    /// `[a-z0-9_]` names, so no quoting is ever required.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut line = String::new();
        for (i, name) in self.names.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(name);
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;

        for r in 0..self.len() {
            line.clear();
            for (c, column) in self.data.iter().enumerate() {
                if c > 0 {
                    line.push(',');
                }
                line.push_str(&format_value(column[r]));
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    /// The CSV rendering as a string.
    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}
