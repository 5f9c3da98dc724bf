use serde_json::{json, Map, Value};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

/// What a subcommand produced: a JSON result, flat rows for CSV, and an
/// optional hand-written text form.
pub struct Report {
    pub ok: bool,
    pub result: Value,
    pub rows: Vec<Map<String, Value>>,
    pub text: Option<String>,
}

impl Report {
    pub fn new(ok: bool, result: Value) -> Self {
        Self {
            ok,
            result,
            rows: vec![],
            text: None,
        }
    }

    pub fn rows(mut self, rows: Vec<Value>) -> Self {
        self.rows = rows
            .into_iter()
            .map(|r| match r {
                Value::Object(m) => m,
                other => {
                    let mut m = Map::new();
                    m.insert("value".into(), other);
                    m
                }
            })
            .collect();
        self
    }

    pub fn text(mut self, t: String) -> Self {
        self.text = Some(t);
        self
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

pub fn render(command: &str, params: &Value, report: &Report, format: Format, mut w: impl Write) -> std::io::Result<()> {
    match format {
        Format::Json => {
            let doc = json!({
                "schema": 1,
                "command": command,
                "params": params,
                "ok": report.ok,
                "result": report.result,
            });
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)
        }
        Format::Csv => {
            let mut header: Vec<String> = vec![];
            for r in &report.rows {
                for k in r.keys() {
                    if !header.contains(k) {
                        header.push(k.clone());
                    }
                }
            }
            let mut out = csv::Writer::from_writer(w);
            out.write_record(&header)?;
            for r in &report.rows {
                out.write_record(header.iter().map(|k| r.get(k).map(cell).unwrap_or_default()))?;
            }
            out.flush()
        }
        Format::Text => {
            if let Some(t) = &report.text {
                return write!(w, "{t}");
            }
            writeln!(w, "# {command} ok={}", report.ok)?;
            if let Value::Object(m) = &report.result {
                for (k, v) in m {
                    if !v.is_array() && !v.is_object() {
                        writeln!(w, "{k}: {}", cell(v))?;
                    }
                }
            }
            for r in &report.rows {
                let line: Vec<String> = r.values().map(cell).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
            Ok(())
        }
    }
}
