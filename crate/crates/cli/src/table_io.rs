//! Long-format CSV tables: one column per variable plus a final `count` column.

use std::collections::HashMap;
use std::path::Path;

use margmod::{Table, VariableScheme};

use crate::CliError;

pub fn read_table(path: &Path, pinned: &[(String, Vec<String>)]) -> Result<Table, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read table {}: {e}", path.display())))?;
    parse_table(&text, pinned).map_err(|e| CliError::input(format!("{}: {}", path.display(), e.message)))
}

pub fn parse_table(text: &str, pinned: &[(String, Vec<String>)]) -> Result<Table, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::input(format!("header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.len() < 2 || !headers.last().unwrap().eq_ignore_ascii_case("count") {
        return Err(CliError::input("line 1: header must list the variables followed by a final `count` column"));
    }
    let vars = &headers[..headers.len() - 1];
    for (name, _) in pinned {
        if !vars.contains(name) {
            return Err(CliError::input(format!("levels block names {name:?}, which is not a table column")));
        }
    }
    let mut levels: Vec<Vec<String>> = vars
        .iter()
        .map(|v| pinned.iter().find(|(n, _)| n == v).map(|(_, l)| l.clone()).unwrap_or_default())
        .collect();
    let is_pinned: Vec<bool> = vars.iter().map(|v| pinned.iter().any(|(n, _)| n == v)).collect();
    let mut rows: Vec<(Vec<usize>, f64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::input(format!("{e}")))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != headers.len() {
            return Err(CliError::input(format!("line {line}: expected {} fields, found {}", headers.len(), rec.len())));
        }
        let mut idx = Vec::with_capacity(vars.len());
        for (j, value) in rec.iter().take(vars.len()).enumerate() {
            let pos = match levels[j].iter().position(|l| l == value) {
                Some(p) => p,
                None if is_pinned[j] => {
                    return Err(CliError::input(format!(
                        "line {line}, field {}: level {value:?} is not among the pinned levels",
                        vars[j]
                    )))
                }
                None => {
                    levels[j].push(value.to_string());
                    levels[j].len() - 1
                }
            };
            idx.push(pos);
        }
        let raw = &rec[vars.len()];
        let count: f64 = raw
            .parse()
            .ok()
            .filter(|c: &f64| c.is_finite() && *c >= 0.0)
            .ok_or_else(|| CliError::input(format!("line {line}, field count: {raw:?} is not a non-negative number")))?;
        rows.push((idx, count));
    }
    for (j, l) in levels.iter_mut().enumerate() {
        if l.is_empty() {
            return Err(CliError::input(format!("variable {} has no observed levels", vars[j])));
        }
        if l.len() == 1 {
            return Err(CliError::input(format!("variable {} has a single level; pin its levels in the model file", vars[j])));
        }
    }
    let scheme = VariableScheme::new(vars.iter().cloned().zip(levels).collect())?;
    let mut cells = vec![0.0; scheme.cell_count()];
    let mut seen: HashMap<usize, usize> = HashMap::new();
    for (i, (idx, c)) in rows.into_iter().enumerate() {
        let k = scheme.encode(&idx);
        if let Some(prev) = seen.insert(k, i) {
            log::warn!("rows {} and {} repeat a cell; counts are summed", prev + 1, i + 1);
        }
        cells[k] += c;
    }
    Ok(Table::counts(scheme, cells)?)
}

pub fn write_table(table: &Table) -> String {
    let s = table.scheme();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = s.names().to_vec();
    header.push("count".into());
    w.write_record(&header).expect("in-memory write");
    let mut cats = vec![0usize; s.n_vars()];
    for (k, &c) in table.cells().iter().enumerate() {
        s.decode(k, &mut cats);
        let mut rec: Vec<String> = cats.iter().enumerate().map(|(j, &l)| s.level_labels(j)[l].clone()).collect();
        rec.push(format!("{c}"));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 output")
}

/// Level labels of cell `k`.
pub fn cell_labels(scheme: &VariableScheme, k: usize) -> Vec<String> {
    let mut cats = vec![0usize; scheme.n_vars()];
    scheme.decode(k, &mut cats);
    cats.iter().enumerate().map(|(j, &l)| scheme.level_labels(j)[l].clone()).collect()
}
