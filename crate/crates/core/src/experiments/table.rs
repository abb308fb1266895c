use std::cmp::Ordering;
use std::path::Path;

use crate::error::{Error, Result};

pub const HEADER: [&str; 5] = ["sweep", "method", "metric", "trials", "stderr"];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep: f64,
    pub method: String,
    pub metric: f64,
    /// Trials that contributed; zero for analytic rows.
    pub trials: usize,
    pub stderr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    /// Written as a trailing `# ...` comment line.
    pub metadata: Option<String>,
}

impl ResultTable {
    /// Orders rows by `(sweep, method)`.
    pub fn sort(&mut self) {
        self.rows
            .sort_by(|a, b| a.sweep.total_cmp(&b.sweep).then_with(|| a.method.cmp(&b.method)));
    }

    pub fn get(&self, sweep: f64, method: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.sweep.total_cmp(&sweep) == Ordering::Equal && r.method == method)
    }

    /// Rows of one method in sweep order.
    pub fn series(&self, method: &str) -> Vec<&ResultRow> {
        let mut rows: Vec<_> = self.rows.iter().filter(|r| r.method == method).collect();
        rows.sort_by(|a, b| a.sweep.total_cmp(&b.sweep));
        rows
    }
}

// Debug formatting of f64 is the shortest string that parses back to the same bits
fn float(v: f64) -> String {
    format!("{v:?}")
}

/// CSV text for `table`, rows sorted, LF line endings.
pub fn to_csv_string(table: &ResultTable) -> Result<String> {
    let mut sorted = table.clone();
    sorted.sort();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(HEADER)?;
    for r in &sorted.rows {
        w.write_record([
            float(r.sweep),
            r.method.clone(),
            float(r.metric),
            r.trials.to_string(),
            float(r.stderr),
        ])?;
    }
    let mut out =
        String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("csv output is utf-8");
    if let Some(meta) = &sorted.metadata {
        out.push_str("# ");
        out.push_str(&meta.replace('\n', " "));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_csv(table: &ResultTable, path: &Path) -> Result<()> {
    std::fs::write(path, to_csv_string(table)?)?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<ResultTable> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().ne(HEADER) {
        return Err(Error::InvalidInput(format!(
            "unexpected CSV header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let number = |field: &str, what: &str| {
        field
            .parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("bad {what} value `{field}`")))
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(ResultRow {
            sweep: number(&record[0], "sweep")?,
            method: record[1].to_string(),
            metric: number(&record[2], "metric")?,
            trials: record[3]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad trials value `{}`", &record[3])))?,
            stderr: number(&record[4], "stderr")?,
        });
    }
    let metadata = text
        .lines()
        .find_map(|l| l.strip_prefix('#'))
        .map(|m| m.trim().to_string());
    Ok(ResultTable { rows, metadata })
}

pub fn read_csv(path: &Path) -> Result<ResultTable> {
    parse_csv(&std::fs::read_to_string(path)?)
}
