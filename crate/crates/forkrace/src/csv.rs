//! Minimal CSV output: header row, '#' comment lines, numbers to 9
//! significant digits.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

/// Formats with 9 significant digits, independent of locale.
pub fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let rounded: f64 = format!("{x:.8e}").parse().unwrap();
    format!("{rounded}")
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn comment(&mut self, c: impl Into<String>) {
        self.comments.push(c.into());
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Body without comment lines (for byte-level comparisons).
    pub fn body(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: Option<&Path>) -> io::Result<()> {
        let text = self.to_string();
        match path {
            Some(p) => std::fs::write(p, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

impl std::fmt::Display for Table {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str(&self.body());
        f.write_str(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::num;

    #[test]
    fn nine_digits() {
        assert_eq!(num(0.2208391234567), "0.220839123");
        assert_eq!(num(2016.0), "2016");
        assert_eq!(num(0.0), "0");
        assert_eq!(num(-1.0 / 3.0), "-0.333333333");
    }
}
