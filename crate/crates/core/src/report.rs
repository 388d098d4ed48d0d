//! Structured text documents: `key: value` lines followed by optional
//! comma-separated tables. Numbers are printed with a fixed format so that
//! identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// Fixed-width scientific notation used in every report.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.12e}")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    fields: Vec<(String, String)>,
    tables: Vec<Table>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

impl Document {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.fields.push((key.into(), value.into()));
        self
    }

    pub fn number(&mut self, key: &str, value: f64) -> &mut Self {
        self.text(key, num(value))
    }

    pub fn flag(&mut self, key: &str, value: bool) -> &mut Self {
        self.text(key, if value { "pass" } else { "fail" })
    }

    pub fn table(&mut self, table: Table) -> &mut Self {
        self.tables.push(table);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.fields {
            let _ = writeln!(out, "{k}: {v}");
        }
        for t in &self.tables {
            let _ = writeln!(out, "\n[{}]", t.name);
            out.push_str(&t.to_csv());
        }
        out
    }

    /// Write `<stem>.txt` and one `<stem>.<table>.csv` per table.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.txt")), self.render())?;
        for t in &self.tables {
            std::fs::write(dir.join(format!("{stem}.{}.csv", t.name)), t.to_csv())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_fields_then_tables() {
        let mut d = Document::new();
        d.text("name", "demo").number("value", 0.5).flag("ok", true);
        let mut t = Table::new("sweep", &["s", "c"]);
        t.push(vec![num(1.0), num(2.0)]);
        d.table(t);
        let text = d.render();
        assert!(text.starts_with("name: demo\nvalue: 5.000000000000e-1\nok: pass\n"));
        assert!(text.ends_with("[sweep]\ns,c\n1.000000000000e0,2.000000000000e0\n"));
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn writes_text_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut d = Document::new();
        d.table(Table::new("rows", &["a"]));
        d.write(dir.path(), "r").unwrap();
        assert!(dir.path().join("r.txt").exists());
        assert_eq!(std::fs::read_to_string(dir.path().join("r.rows.csv")).unwrap(), "a\n");
    }
}
