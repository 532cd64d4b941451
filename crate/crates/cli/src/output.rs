//! CSV tables with a fixed number format.

use std::io::Write;

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Cell {
    /// Reals use 17 significant digits in scientific notation.
    pub fn render(&self) -> String {
        match self {
            Cell::Real(x) if x.is_finite() => format!("{x:.16e}"),
            Cell::Real(x) if x.is_nan() => "nan".into(),
            Cell::Real(x) => if *x > 0.0 { "inf".into() } else { "-inf".into() },
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, w: W) -> Result<(), CliError> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let io = |e: csv::Error| match e.kind() {
            csv::ErrorKind::Io(inner) if inner.kind() == std::io::ErrorKind::BrokenPipe => CliError::Closed,
            _ => CliError::Io(e.to_string()),
        };
        out.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            out.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        out.flush().map_err(CliError::from)?;
        Ok(())
    }

    pub fn to_string(&self) -> Result<String, CliError> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        String::from_utf8(buf).map_err(|e| CliError::Io(e.to_string()))
    }
}

/// Coordinates joined by spaces, e.g. `-3 4`.
pub fn site(x: &[i64]) -> String {
    x.iter().map(i64::to_string).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_and_quoting() {
        let mut t = Table::new(&["x", "label"]);
        t.push(vec![0.1.into(), "a,b".into()]);
        t.push(vec![Cell::Int(-3), Cell::Real(f64::INFINITY)]);
        assert_eq!(t.to_string().unwrap(), "x,label\n1.0000000000000001e-1,\"a,b\"\n-3,inf\n");
    }
}
