use serde::Serialize;
use serde_json::{Map, Value};

/// Result of one subcommand: ordered key/value fields plus an optional table,
/// printed as JSON or as aligned text.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub fields: Map<String, Value>,
    pub table: Option<Table>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Report {
    pub fn new(command: &'static str) -> Self {
        Report {
            command,
            fields: Map::new(),
            table: None,
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).expect("report values serialize");
        self.fields.insert(key.to_string(), v);
        self
    }

    pub fn to_json(&self) -> Value {
        let mut out = Map::new();
        out.insert("command".into(), Value::String(self.command.into()));
        out.extend(self.fields.clone());
        if let Some(t) = &self.table {
            let rows = t
                .rows
                .iter()
                .map(|r| Value::Object(t.columns.iter().cloned().zip(r.iter().cloned()).collect()))
                .collect();
            out.insert(t.name.clone(), Value::Array(rows));
        }
        Value::Object(out)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let flat = flatten(&self.fields);
        let width = flat.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &flat {
            out.push_str(&format!("{k:<width$}  {v}\n"));
        }
        if let Some(t) = &self.table {
            let cells: Vec<Vec<String>> = t.rows.iter().map(|r| r.iter().map(scalar).collect()).collect();
            let widths: Vec<usize> = t
                .columns
                .iter()
                .enumerate()
                .map(|(i, c)| cells.iter().map(|r| r[i].len()).chain([c.len()]).max().unwrap())
                .collect();
            out.push('\n');
            let line = |row: &[String]| {
                row.iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            out.push_str(&line(&t.columns));
            out.push('\n');
            for r in &cells {
                out.push_str(&line(r));
                out.push('\n');
            }
        }
        out
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if !n.is_i64() && !n.is_u64() => format!("{f:.6}"),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

/// Nested objects become dotted keys.
fn flatten(fields: &Map<String, Value>) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (k, v) in fields {
        match v {
            Value::Object(inner) => {
                for (ik, iv) in flatten(inner) {
                    out.push((format!("{k}.{ik}"), iv));
                }
            }
            other => out.push((k.clone(), scalar(other))),
        }
    }
    out
}
