use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::{json, Value as Json};

/// Output format of report tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format {s:?}")),
        }
    }
}

/// Rounds to six significant digits. Non-finite values pass through.
pub fn round_sig6(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    /// Rendered with six significant digits; `None` is an explicit null.
    Float(Option<f64>),
    Bool(bool),
    Text(String),
}

impl Cell {
    pub fn float(x: f64) -> Self {
        Cell::Float(x.is_finite().then_some(x))
    }

    pub fn count(n: usize) -> Self {
        Cell::Int(n as i64)
    }

    /// The CSV spelling of the cell, before quoting. Nulls are empty.
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(Some(v)) => round_sig6(*v).to_string(),
            Cell::Float(None) => String::new(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> Json {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Float(Some(v)) => json!(round_sig6(*v)),
            Cell::Float(None) => Json::Null,
            Cell::Bool(b) => json!(b),
            Cell::Text(s) => json!(s),
        }
    }

    fn from_json(v: &Json) -> Result<Self, String> {
        Ok(match v {
            Json::Null => Cell::Float(None),
            Json::Bool(b) => Cell::Bool(*b),
            Json::String(s) => Cell::Text(s.clone()),
            Json::Number(n) => match n.as_i64() {
                Some(i) if !n.is_f64() => Cell::Int(i),
                _ => Cell::Float(n.as_f64()),
            },
            other => return Err(format!("unexpected cell {other}")),
        })
    }
}

/// A named report table with a stable column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

impl Table {
    pub fn new<S: Into<String>>(name: &str, columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width of table {}",
            self.name
        );
        self.rows.push(row);
    }

    pub fn file_name(&self, format: Format) -> String {
        format!("{}.{}", self.name, format.extension())
    }

    /// A `# manifest: <file>` line, the header, then one line per row.
    pub fn to_csv(&self, manifest: &str) -> String {
        let mut out = format!("# manifest: {manifest}\n");
        let header: Vec<String> = self.columns.iter().map(|c| quote(c)).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| quote(&c.render())).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self, manifest: &str) -> String {
        let rows: Vec<Json> = self
            .rows
            .iter()
            .map(|r| Json::Array(r.iter().map(Cell::to_json).collect()))
            .collect();
        let doc = json!({
            "manifest": manifest,
            "table": self.name,
            "columns": self.columns,
            "rows": rows,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("table serializes");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format, manifest: &str) -> String {
        match format {
            Format::Csv => self.to_csv(manifest),
            Format::Json => self.to_json(manifest),
        }
    }

    /// Parses [`Table::to_json`] output; returns the manifest reference too.
    pub fn from_json(text: &str) -> Result<(String, Table), String> {
        let doc: Json = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let field = |k: &str| doc.get(k).ok_or_else(|| format!("missing {k:?}"));
        let manifest = field("manifest")?
            .as_str()
            .ok_or("manifest is not a string")?;
        let name = field("table")?.as_str().ok_or("table is not a string")?;
        let columns: Vec<String> =
            serde_json::from_value(field("columns")?.clone()).map_err(|e| e.to_string())?;
        let mut table = Table::new(name, columns);
        for row in field("rows")?.as_array().ok_or("rows is not an array")? {
            let cells = row
                .as_array()
                .ok_or("row is not an array")?
                .iter()
                .map(Cell::from_json)
                .collect::<Result<Vec<_>, _>>()?;
            if cells.len() != table.columns.len() {
                return Err(format!("row has {} cells", cells.len()));
            }
            table.rows.push(cells);
        }
        Ok((manifest.to_string(), table))
    }
}

/// Manifest reference, header and rows of a parsed CSV report.
pub type CsvParts = (String, Vec<String>, Vec<Vec<String>>);

/// Splits [`Table::to_csv`] output into manifest reference, header and rows
/// of unquoted fields.
pub fn parse_csv(text: &str) -> Result<CsvParts, String> {
    let mut lines = text.lines();
    let manifest = lines
        .next()
        .and_then(|l| l.strip_prefix("# manifest: "))
        .ok_or("missing manifest line")?
        .to_string();
    let header = split_csv_line(lines.next().ok_or("missing header")?)?;
    let rows = lines.map(split_csv_line).collect::<Result<Vec<_>, _>>()?;
    Ok((manifest, header, rows))
}

fn split_csv_line(line: &str) -> Result<Vec<String>, String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars().peekable();
    let mut quoted = false;
    while let Some(c) = chars.next() {
        match (quoted, c) {
            (true, '"') if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            (true, '"') => quoted = false,
            (false, '"') if cur.is_empty() => quoted = true,
            (false, ',') => fields.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    if quoted {
        return Err(format!("unterminated quote in {line:?}"));
    }
    fields.push(cur);
    Ok(fields)
}

/// Writes a `metric,value` table from key/value pairs.
pub fn key_value_table(name: &str, entries: &[(&str, Cell)]) -> Table {
    let mut t = Table::new(name, ["metric", "value"]);
    for (k, v) in entries {
        t.push(vec![Cell::Text(k.to_string()), v.clone()]);
    }
    t
}

/// Formats bytes as lowercase hex.
pub fn hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new("t", ["name", "n", "x", "ok"]);
        t.push(vec![
            Cell::Text("a,b".into()),
            Cell::Int(3),
            Cell::float(0.123456789),
            Cell::Bool(true),
        ]);
        t.push(vec![
            Cell::Text("q\"".into()),
            Cell::Int(-1),
            Cell::Float(None),
            Cell::Bool(false),
        ]);
        t.push(vec![
            Cell::Text("c".into()),
            Cell::Int(0),
            Cell::float(1234567.0),
            Cell::Bool(false),
        ]);
        t
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(Cell::float(0.123456789).render(), "0.123457");
        assert_eq!(Cell::float(1234567.0).render(), "1234570");
        assert_eq!(Cell::float(1.0).render(), "1");
        assert_eq!(Cell::float(f64::NAN).render(), "");
        assert_eq!(round_sig6(-2.0 / 3.0), -0.666667);
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new("e", ["a", "b"]);
        assert_eq!(t.to_csv("m.json"), "# manifest: m.json\na,b\n");
    }

    #[test]
    fn csv_and_json_agree_field_for_field() {
        let t = sample();
        let (m1, header, rows) = parse_csv(&t.to_csv("x.manifest.json")).unwrap();
        let (m2, back) = Table::from_json(&t.to_json("x.manifest.json")).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(header, back.columns);
        assert_eq!(rows.len(), back.rows.len());
        for (csv_row, json_row) in rows.iter().zip(&back.rows) {
            let rendered: Vec<String> = json_row.iter().map(Cell::render).collect();
            assert_eq!(csv_row, &rendered);
        }
    }

    #[test]
    fn hex_encoding() {
        assert_eq!(hex(&[0, 15, 255]), "000fff");
    }
}
