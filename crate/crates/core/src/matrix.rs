//! Count matrices and their TSV encoding.
//!
//! The file format is a header line of tab-separated column names followed by
//! one line per observation holding base-10 nonnegative integers.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// `n x p` matrix of nonnegative counts, stored column-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    n: usize,
    names: Vec<String>,
    columns: Vec<Vec<u32>>,
}

impl CountMatrix {
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<u32>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::usage(format!(
                "{} column names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, Vec::len);
        if let Some(j) = columns.iter().position(|c| c.len() != n) {
            return Err(Error::usage(format!(
                "column {j} has {} rows, expected {n}",
                columns[j].len()
            )));
        }
        Ok(CountMatrix { n, names, columns })
    }

    /// Build from rows with default names `X1..Xp`.
    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::with_capacity(rows.len()); p];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::usage(format!(
                    "row {i} has {} entries, expected {p}",
                    row.len()
                )));
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        CountMatrix::from_columns(default_names(p), columns)
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[u32] {
        &self.columns[j]
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.columns[j][i]
    }

    pub fn max_value(&self) -> u32 {
        self.columns
            .iter()
            .flat_map(|c| c.iter().copied())
            .max()
            .unwrap_or(0)
    }

    /// Reorder columns so that new column `k` is old column `order[k]`.
    pub fn select_columns(&self, order: &[usize]) -> Result<Self> {
        if let Some(&j) = order.iter().find(|&&j| j >= self.ncols()) {
            return Err(Error::usage(format!("column index {j} out of range")));
        }
        Ok(CountMatrix {
            n: self.n,
            names: order.iter().map(|&j| self.names[j].clone()).collect(),
            columns: order.iter().map(|&j| self.columns[j].clone()).collect(),
        })
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(line) => line?,
            None => return Err(Error::format(1, "empty input, expected a header line")),
        };
        let names: Vec<String> = header.split('\t').map(|s| s.trim().to_string()).collect();
        if names.iter().any(String::is_empty) {
            return Err(Error::format(1, "empty column name in header"));
        }
        let p = names.len();
        let mut columns = vec![Vec::new(); p];
        for (idx, line) in lines.enumerate() {
            let line = line?;
            let lineno = idx + 2;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != p {
                return Err(Error::format(
                    lineno,
                    format!("expected {p} fields, found {}", cells.len()),
                ));
            }
            for (j, cell) in cells.iter().enumerate() {
                let v: u32 = cell.trim().parse().map_err(|_| {
                    Error::format(
                        lineno,
                        format!("column {j}: '{cell}' is not a nonnegative integer"),
                    )
                })?;
                columns[j].push(v);
            }
        }
        CountMatrix::from_columns(names, columns)
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.names.join("\t"))?;
        let mut line = String::new();
        for i in 0..self.n {
            line.clear();
            for (j, col) in self.columns.iter().enumerate() {
                if j > 0 {
                    line.push('\t');
                }
                line.push_str(&col[i].to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("X{j}")).collect()
}
