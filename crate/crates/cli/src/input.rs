//! Reading distributions and value batches from CSV or JSON files.

use std::path::Path;

use midp::{DiscreteNull, UnitDistribution};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Uses the explicit format if given, otherwise the file extension.
pub fn resolve_format(path: &Path, explicit: Option<Format>) -> Format {
    explicit.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
        _ => Format::Csv,
    })
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))
}

pub fn read_null(path: &Path, format: Option<Format>) -> Result<DiscreteNull, CliError> {
    let text = read_text(path)?;
    let parsed = match resolve_format(path, format) {
        Format::Json => DiscreteNull::from_json_str(&text),
        Format::Csv => DiscreteNull::from_csv_reader(text.as_bytes()),
    };
    parsed.map_err(|e| CliError::in_file(path, e))
}

pub fn read_unit_distribution(path: &Path, format: Option<Format>) -> Result<UnitDistribution, CliError> {
    match resolve_format(path, format) {
        Format::Json => {
            UnitDistribution::from_json_str(&read_text(path)?).map_err(|e| CliError::in_file(path, e))
        }
        Format::Csv => {
            // same value,prob layout as a null; only the range check differs
            let null = read_null(path, Some(Format::Csv))?;
            UnitDistribution::new(null.atoms().iter().map(|a| (a.value, a.prob)))
                .map_err(|e| CliError::in_file(path, e))
        }
    }
}

/// A batch of mid-p-values with optional standard deviations and group labels.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Batch {
    pub q: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
    pub group: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonBatch {
    Values(Vec<f64>),
    Rows(Vec<JsonRow>),
    Columns {
        q: Vec<f64>,
        sigma: Option<Vec<f64>>,
        group: Option<Vec<String>>,
    },
}

#[derive(Deserialize)]
struct JsonRow {
    q: f64,
    sigma: Option<f64>,
    group: Option<String>,
}

fn parse_number(field: &str, path: &Path, line: usize) -> Result<f64, CliError> {
    field.trim().parse::<f64>().map_err(|_| {
        CliError::parse(format!("{}: line {line}: cannot parse '{field}' as a number", path.display()))
    })
}

pub fn read_batch(path: &Path, format: Option<Format>) -> Result<Batch, CliError> {
    let text = read_text(path)?;
    match resolve_format(path, format) {
        Format::Json => batch_from_json(&text, path),
        Format::Csv => batch_from_csv(&text, path),
    }
}

fn batch_from_json(text: &str, path: &Path) -> Result<Batch, CliError> {
    let parsed: JsonBatch = serde_json::from_str(text)
        .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    Ok(match parsed {
        JsonBatch::Values(q) => Batch { q, ..Batch::default() },
        JsonBatch::Columns { q, sigma, group } => Batch { q, sigma, group },
        JsonBatch::Rows(rows) => {
            let all = |f: fn(&JsonRow) -> bool| rows.iter().all(f);
            let sigma = all(|r| r.sigma.is_some()).then(|| rows.iter().filter_map(|r| r.sigma).collect());
            let group = all(|r| r.group.is_some())
                .then(|| rows.iter().filter_map(|r| r.group.clone()).collect());
            Batch {
                q: rows.iter().map(|r| r.q).collect(),
                sigma,
                group,
            }
        }
    })
}

/// Either a headed CSV with a `q` column (plus optional `sigma` and
/// `group`), or bare values one per line.
fn batch_from_csv(text: &str, path: &Path) -> Result<Batch, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let records: Vec<csv::StringRecord> = rdr
        .records()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    let records: Vec<csv::StringRecord> = records
        .into_iter()
        .filter(|r| r.iter().any(|f| !f.is_empty()))
        .collect();
    let Some(first) = records.first() else {
        return Ok(Batch::default());
    };
    let headed = first.get(0).is_none_or(|f| f.parse::<f64>().is_err());
    if !headed {
        let q = records
            .iter()
            .enumerate()
            .map(|(i, r)| parse_number(&r[0], path, i + 1))
            .collect::<Result<_, _>>()?;
        return Ok(Batch { q, ..Batch::default() });
    }

    let column = |name: &str| first.iter().position(|h| h.eq_ignore_ascii_case(name));
    let q_col = column("q")
        .ok_or_else(|| CliError::parse(format!("{}: no column named q", path.display())))?;
    let numbers = |col: usize| -> Result<Vec<f64>, CliError> {
        records[1..]
            .iter()
            .enumerate()
            .map(|(i, r)| parse_number(r.get(col).unwrap_or(""), path, i + 2))
            .collect()
    };
    Ok(Batch {
        q: numbers(q_col)?,
        sigma: column("sigma").map(numbers).transpose()?,
        group: column("group").map(|col| {
            records[1..]
                .iter()
                .map(|r| r.get(col).unwrap_or("").to_string())
                .collect()
        }),
    })
}
