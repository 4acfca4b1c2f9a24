//! Rendering of command results as aligned text, CSV or JSON.

use std::io::Write;

use clap::ValueEnum;
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

/// Formats with 12 significant digits, dropping trailing zeros.
pub fn sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let fixed = format!("{x:.*}", (11 - exp).max(0) as usize);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Undef,
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Num(x) => sig(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Undef => "undef".into(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => {
                let rounded: f64 = sig(*x).parse().expect("sig output parses");
                serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
            }
            Cell::Num(x) if x.is_nan() => Value::Null,
            Cell::Num(x) => Value::String(sig(*x)),
            Cell::Int(i) => Value::from(*i),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Undef => Value::Null,
        }
    }

    fn numeric(&self) -> bool {
        matches!(self, Cell::Num(_) | Cell::Int(_))
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Undef, Into::into)
    }
}

/// One table of a report. In text output, rows sharing the first `group`
/// columns are printed as a block under their own heading.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub group: usize,
}

impl Section {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            group: 0,
        }
    }

    pub fn with_columns(name: &str, columns: Vec<String>) -> Self {
        Self {
            name: name.into(),
            columns,
            rows: Vec::new(),
            group: 0,
        }
    }

    pub fn grouped(mut self, group: usize) -> Self {
        self.group = group;
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in section {}", self.name);
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub sections: Vec<Section>,
}

impl Report {
    pub fn render(&self, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
        match format {
            Format::Table => self.render_table(out),
            Format::Csv => self.render_csv(out),
            Format::Json => self.render_json(out),
        }
    }

    fn render_table(&self, out: &mut dyn Write) -> Result<(), CliError> {
        for (i, section) in self.sections.iter().enumerate() {
            if i > 0 {
                writeln!(out)?;
            }
            writeln!(out, "== {} ==", section.name)?;
            let g = section.group;
            let rows = &section.rows;
            if rows.is_empty() {
                write_aligned(out, &section.columns, g, &[])?;
                continue;
            }
            let mut start = 0;
            while start < rows.len() {
                let key = &rows[start][..g];
                let end = start + rows[start..].iter().take_while(|r| &r[..g] == key).count();
                if g > 0 {
                    if start > 0 {
                        writeln!(out)?;
                    }
                    let heading: Vec<String> = section.columns[..g]
                        .iter()
                        .zip(key)
                        .map(|(c, v)| format!("{c} {}", v.text()))
                        .collect();
                    writeln!(out, "-- {} --", heading.join(", "))?;
                }
                write_aligned(out, &section.columns, g, &rows[start..end])?;
                start = end;
            }
        }
        Ok(())
    }

    fn render_csv(&self, out: &mut dyn Write) -> Result<(), CliError> {
        for (i, section) in self.sections.iter().enumerate() {
            if i > 0 {
                writeln!(out)?;
            }
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(&section.columns)?;
            for row in &section.rows {
                w.write_record(row.iter().map(Cell::text))?;
            }
            w.flush()?;
        }
        Ok(())
    }

    fn render_json(&self, out: &mut dyn Write) -> Result<(), CliError> {
        let mut root = Map::new();
        for section in &self.sections {
            let rows = section
                .rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> =
                        section.columns.iter().cloned().zip(row.iter().map(Cell::json)).collect();
                    Value::Object(obj)
                })
                .collect();
            root.insert(section.name.clone(), Value::Array(rows));
        }
        serde_json::to_writer_pretty(&mut *out, &Value::Object(root)).map_err(|e| CliError::Output(e.to_string()))?;
        writeln!(out)?;
        Ok(())
    }
}

// Columns before `skip` are shown in the block heading instead.
fn write_aligned(out: &mut dyn Write, columns: &[String], skip: usize, rows: &[Vec<Cell>]) -> Result<(), CliError> {
    let columns = &columns[skip..];
    let mut widths: Vec<usize> = columns.iter().map(|c| c.chars().count()).collect();
    let texts: Vec<Vec<(String, bool)>> = rows
        .iter()
        .map(|r| r[skip..].iter().map(|c| (c.text(), c.numeric())).collect())
        .collect();
    for row in &texts {
        for (w, (t, _)) in widths.iter_mut().zip(row) {
            *w = (*w).max(t.chars().count());
        }
    }
    let header: Vec<String> = columns.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
    writeln!(out, "{}", header.join("  ").trim_end())?;
    for row in &texts {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|((t, numeric), w)| if *numeric { format!("{t:>w$}") } else { format!("{t:<w$}") })
            .collect();
        writeln!(out, "{}", line.join("  ").trim_end())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig(0.0), "0");
        assert_eq!(sig(-0.0), "0");
        assert_eq!(sig(100.0), "100");
        assert_eq!(sig(0.2), "0.2");
        assert_eq!(sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig(2.0 / 3.0 * 1000.0), "666.666666667");
        assert_eq!(sig(4.999999999823826), "4.99999999982");
        assert_eq!(sig(9.9999999999999), "10");
        assert_eq!(sig(1.5e-7), "1.5e-7");
        assert_eq!(sig(123456789012345.0), "1.23456789012e14");
        assert_eq!(sig(-42.5), "-42.5");
        assert_eq!(sig(f64::INFINITY), "inf");
    }

    fn sample() -> Report {
        let mut s = Section::new("rows", &["scenario", "firm", "value"]).grouped(1);
        s.push(vec!["a".into(), 0usize.into(), 1.5.into()]);
        s.push(vec!["a".into(), 1usize.into(), Cell::Undef]);
        s.push(vec!["b, c".into(), 0usize.into(), f64::INFINITY.into()]);
        Report { sections: vec![s] }
    }

    fn render(format: Format) -> String {
        let mut buf = Vec::new();
        sample().render(format, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn csv_quotes_and_keeps_order() {
        assert_eq!(render(Format::Csv), "scenario,firm,value\na,0,1.5\na,1,undef\n\"b, c\",0,inf\n");
    }

    #[test]
    fn json_keys_follow_columns() {
        let text = render(Format::Json);
        let v: Value = serde_json::from_str(&text).unwrap();
        let rows = v["rows"].as_array().unwrap();
        assert_eq!(rows[0]["value"], Value::from(1.5));
        assert_eq!(rows[1]["value"], Value::Null);
        assert_eq!(rows[2]["value"], Value::from("inf"));
        let keys: Vec<&String> = rows[0].as_object().unwrap().keys().collect();
        assert_eq!(keys, ["scenario", "firm", "value"]);
    }

    #[test]
    fn table_groups_rows() {
        let text = render(Format::Table);
        assert!(text.contains("-- scenario a --"));
        assert!(text.contains("-- scenario b, c --"));
        assert!(text.contains("undef"));
    }
}
