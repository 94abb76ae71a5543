//! CSV report tables: 12 significant digits for the exact variant, fixed
//! decimals for the `-display` variant.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const SIGNIFICANT_DIGITS: usize = 12;
pub const DEFAULT_DISPLAY_DECIMALS: usize = 4;
/// Written for undefined metrics.
pub const MISSING: &str = "NA";

/// `x` rounded to 12 significant digits, shortest form, scientific only for
/// very small or very large magnitudes.
pub fn sig(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses");
    let mag = rounded.abs();
    if (1e-6..1e15).contains(&mag) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

pub fn opt_sig(x: Option<f64>) -> String {
    x.map_or_else(|| MISSING.to_string(), sig)
}

pub fn fixed(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    // avoid "-0.000"
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Num(f64),
    Missing,
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<u64> for Cell {
    fn from(n: u64) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Int(b as i64)
    }
}

impl Cell {
    fn render(&self, decimals: Option<usize>) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(n) => n.to_string(),
            Cell::Num(x) => match decimals {
                Some(d) => fixed(*x, d),
                None => sig(*x),
            },
            Cell::Missing => MISSING.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub display_decimals: usize,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            display_decimals: DEFAULT_DISPLAY_DECIMALS,
        }
    }

    pub fn with_display_decimals(mut self, d: usize) -> Self {
        self.display_decimals = d;
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.header.len(),
            "row width mismatch in {}",
            self.name
        );
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn render(&self, decimals: Option<usize>) -> Result<Vec<u8>> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(&self.header)?;
        for row in &self.rows {
            wtr.write_record(row.iter().map(|c| c.render(decimals)))?;
        }
        wtr.into_inner()
            .map_err(|e| Error::InvalidInput(format!("csv buffer: {e}")))
    }

    pub fn to_csv(&self) -> Result<String> {
        Ok(String::from_utf8(self.render(None)?).expect("csv output is utf-8"))
    }

    pub fn to_display_csv(&self) -> Result<String> {
        Ok(String::from_utf8(self.render(Some(self.display_decimals))?)
            .expect("csv output is utf-8"))
    }

    /// Writes `<name>.csv` and `<name>-display.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        let exact = dir.join(format!("{}.csv", self.name));
        let display = dir.join(format!("{}-display.csv", self.name));
        std::fs::write(&exact, self.render(None)?).map_err(|e| Error::io(&exact, e))?;
        std::fs::write(&display, self.render(Some(self.display_decimals))?)
            .map_err(|e| Error::io(&display, e))?;
        Ok((exact, display))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig(0.0901), "0.0901");
        assert_eq!(sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig(4739.123456789012), "4739.12345679");
        assert_eq!(sig(-0.0), "0");
        assert_eq!(sig(1e-9), "1e-9");
        assert_eq!(sig(2.0), "2");
        assert_eq!(sig(f64::NAN), "NaN");
    }

    #[test]
    fn fixed_decimals() {
        assert_eq!(fixed(0.14384, 3), "0.144");
        assert_eq!(fixed(-0.00001, 3), "0.000");
        assert_eq!(fixed(-0.25, 1), "-0.2");
    }

    #[test]
    fn table_variants() {
        let mut t = Table::new("t", &["poet", "value", "n", "maybe"]).with_display_decimals(3);
        t.push(vec![
            "a".into(),
            0.123456789.into(),
            5usize.into(),
            None.into(),
        ]);
        assert_eq!(
            t.to_csv().unwrap(),
            "poet,value,n,maybe\na,0.123456789,5,NA\n"
        );
        assert_eq!(
            t.to_display_csv().unwrap(),
            "poet,value,n,maybe\na,0.123,5,NA\n"
        );
    }
}
