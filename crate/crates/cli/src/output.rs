//! CSV and JSON table writers.

use std::io::{self, Write};

use lor_transfer::experiments::{Cell, Table};
use serde_json::{json, Map, Value};

pub fn write_csv(w: &mut impl Write, t: &Table, config: &[(String, String)]) -> io::Result<()> {
    writeln!(w, "{}", t.columns.join(","))?;
    for row in &t.rows {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    let cfg: Vec<String> = config.iter().map(|(k, v)| format!("{k}={v}")).collect();
    writeln!(w, "# config {}", cfg.join(" "))
}

fn cell_value(c: &Cell) -> Value {
    match c {
        Cell::Int(v) => json!(v),
        Cell::Sci(v) | Cell::Real(v) => json!(v),
        Cell::Rate(v) => json!(v),
        Cell::Text(s) => json!(s),
        Cell::Empty => Value::Null,
    }
}

pub fn write_json(w: &mut impl Write, t: &Table, config: &[(String, String)]) -> io::Result<()> {
    let rows: Vec<Value> = t
        .rows
        .iter()
        .map(|r| Value::Array(r.iter().map(cell_value).collect()))
        .collect();
    let cfg: Map<String, Value> = config.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    let doc = json!({ "columns": t.columns, "rows": rows, "config": cfg });
    serde_json::to_writer_pretty(&mut *w, &doc)?;
    writeln!(w)
}
