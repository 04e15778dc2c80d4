//! Dataset CSV format.
//!
//! ```text
//! # crosscal-dataset v1; f1=two_piece_normal; f2=normal:AR1
//! y,v,f1_mu,f1_sig1,f1_sig2,f2_mean,f2_sd
//! 2.1,0.5,1.9,0.4,0.6,2.0,0.5
//! ```
//!
//! The metadata line declares the family of every forecaster and optionally a
//! label after a colon (default `F{i}`). A family list passed on the command
//! line replaces the metadata line. Column `v` is optional; when it is absent
//! the randomizers are drawn from the ingest seed. Columns may appear in any
//! order; extra columns are ignored.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crosscal::{Family, Forecaster, PredictionDataset};

use crate::CliError;

pub const METADATA_TAG: &str = "crosscal-dataset v1";

/// Declared forecaster: family and label.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecasterDecl {
    pub family: Family,
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestConfig {
    /// Overrides the metadata line when set.
    pub families: Option<Vec<ForecasterDecl>>,
    /// Seed for randomizers when the file has no `v` column.
    pub seed: u64,
}

/// Parses `family` or `family:label` for forecaster `i` (1-based).
pub fn parse_decl(i: usize, s: &str) -> Result<ForecasterDecl, CliError> {
    let (fam, label) = match s.split_once(':') {
        Some((f, l)) => (f, l.trim().to_string()),
        None => (s, format!("F{i}")),
    };
    let family = fam.parse::<Family>().map_err(|e| CliError::Input(e.to_string()))?;
    if label.is_empty() {
        return Err(CliError::Input(format!("empty label for forecaster f{i}")));
    }
    Ok(ForecasterDecl { family, label })
}

fn parse_metadata(line: &str) -> Result<Vec<ForecasterDecl>, CliError> {
    let body = line.trim_start_matches('#').trim();
    let mut parts = body.split(';').map(str::trim);
    if parts.next() != Some(METADATA_TAG) {
        return Err(CliError::Input(format!("metadata line must start with `# {METADATA_TAG}`")));
    }
    let mut decls: Vec<(usize, ForecasterDecl)> = Vec::new();
    for part in parts.filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("malformed metadata entry `{part}`")))?;
        let i = key
            .trim()
            .strip_prefix('f')
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|&i| i >= 1)
            .ok_or_else(|| CliError::Input(format!("malformed forecaster key `{key}`")))?;
        decls.push((i, parse_decl(i, value.trim())?));
    }
    decls.sort_by_key(|(i, _)| *i);
    for (pos, (i, _)) in decls.iter().enumerate() {
        if *i != pos + 1 {
            return Err(CliError::Input(format!("forecaster keys must be f1..f{}", decls.len())));
        }
    }
    Ok(decls.into_iter().map(|(_, d)| d).collect())
}

/// Reads a dataset file.
pub fn ingest_csv(path: &Path, config: &IngestConfig) -> Result<PredictionDataset, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    ingest_str(&text, config)
}

pub fn ingest_str(text: &str, config: &IngestConfig) -> Result<PredictionDataset, CliError> {
    let (meta, body, offset) = match text.split_once('\n') {
        Some((first, rest)) if first.starts_with('#') => (Some(first.trim_end_matches('\r')), rest, 1),
        _ => (None, text, 0),
    };
    let decls = match (&config.families, meta) {
        (Some(d), _) => d.clone(),
        (None, Some(m)) => parse_metadata(m)?,
        (None, None) => {
            return Err(CliError::Input(
                "no metadata line and no family declarations; pass --families".into(),
            ))
        }
    };
    if decls.is_empty() {
        return Err(CliError::Input("no forecasters declared".into()));
    }

    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Input(format!("bad header: {e}")))?
        .clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(c, h)| (h, c)).collect();
    let col = |name: &str| -> Result<usize, CliError> {
        index
            .get(name)
            .copied()
            .ok_or_else(|| CliError::Input(format!("missing column `{name}`")))
    };
    let y_col = col("y")?;
    let v_col = index.get("v").copied();
    let mut param_cols = Vec::new();
    for (i, d) in decls.iter().enumerate() {
        let cols = d
            .family
            .param_names()
            .iter()
            .map(|p| col(&format!("f{}_{p}", i + 1)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Input(format!("forecaster f{} ({}): {e}", i + 1, d.family)))?;
        param_cols.push(cols);
    }

    let mut y = Vec::new();
    let mut v = Vec::new();
    let mut params: Vec<Vec<Vec<f64>>> = vec![Vec::new(); decls.len()];
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Input(format!("malformed CSV: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line()) + offset;
        let cell = |c: usize| -> Result<f64, CliError> {
            let raw = rec.get(c).unwrap_or("");
            if raw.is_empty() {
                return Err(CliError::Input(format!("line {line}: missing value in column `{}`", &headers[c])));
            }
            raw.parse::<f64>().map_err(|_| {
                CliError::Input(format!("line {line}: non-numeric value `{raw}` in column `{}`", &headers[c]))
            })
        };
        y.push(cell(y_col)?);
        if let Some(c) = v_col {
            let val = cell(c)?;
            if !(0.0..=1.0).contains(&val) {
                return Err(CliError::Input(format!("line {line}: v = {val} outside [0, 1]")));
            }
            v.push(val);
        }
        for (i, cols) in param_cols.iter().enumerate() {
            params[i].push(cols.iter().map(|&c| cell(c)).collect::<Result<_, _>>()?);
        }
    }
    if y.is_empty() {
        return Err(CliError::Input("no data rows".into()));
    }

    let forecasters = decls
        .iter()
        .zip(&params)
        .map(|(d, rows)| Forecaster::from_params(d.label.clone(), d.family, rows))
        .collect::<crosscal::Result<Vec<_>>>()
        .map_err(|e| CliError::Input(e.to_string()))?;
    let ds = match v_col {
        Some(_) => PredictionDataset::new(forecasters, y, v),
        None => PredictionDataset::with_seeded_randomizers(forecasters, y, config.seed),
    };
    ds.map_err(|e| CliError::Input(e.to_string()))
}

/// Writes a dataset in the format read by [`ingest_str`], including `v`.
///
/// Floats use the shortest representation that parses back to the same value.
pub fn dump_csv(ds: &PredictionDataset) -> String {
    let mut out = format!("# {METADATA_TAG}");
    for (i, f) in ds.forecasters().iter().enumerate() {
        let _ = write!(out, "; f{}={}", i + 1, f.family());
        if f.label() != format!("F{}", i + 1) {
            let _ = write!(out, ":{}", f.label());
        }
    }
    out.push_str("\ny,v");
    for (i, f) in ds.forecasters().iter().enumerate() {
        for p in f.family().param_names() {
            let _ = write!(out, ",f{}_{p}", i + 1);
        }
    }
    out.push('\n');
    for t in 0..ds.n() {
        let _ = write!(out, "{:?},{:?}", ds.y()[t], ds.v()[t]);
        for f in ds.forecasters() {
            for p in f.forecasts()[t].params() {
                let _ = write!(out, ",{p:?}");
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_row_two_piece_file() {
        let text = "# crosscal-dataset v1; f1=two_piece_normal\n\
                    y,f1_mu,f1_sig1,f1_sig2\n\
                    1.0,0.9,0.5,0.7\n2.0,1.8,0.4,0.6\n1.5,1.5,0.5,0.5\n";
        let ds = ingest_str(text, &IngestConfig::default()).unwrap();
        assert_eq!((ds.k(), ds.n()), (1, 3));
        assert_eq!(ds.forecaster(0).unwrap().label(), "F1");
    }

    #[test]
    fn missing_parameter_column_is_named() {
        let text = "# crosscal-dataset v1; f1=two_piece_normal\ny,f1_mu,f1_sig1\n1.0,0.9,0.5\n";
        let err = ingest_str(text, &IngestConfig::default()).unwrap_err().to_string();
        assert!(err.contains("f1_sig2"), "{err}");
    }

    #[test]
    fn missing_cell_reports_line() {
        let text = "# crosscal-dataset v1; f1=normal\ny,f1_mean,f1_sd\n1.0,0.0,1.0\n2.0,,1.0\n";
        let err = ingest_str(text, &IngestConfig::default()).unwrap_err().to_string();
        assert!(err.contains("line 4") && err.contains("f1_mean"), "{err}");
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = IngestConfig::default();
        let unknown = "# crosscal-dataset v1; f1=gamma\ny\n1\n";
        assert!(ingest_str(unknown, &cfg).unwrap_err().to_string().contains("gamma"));
        let text = "# crosscal-dataset v1; f1=normal\ny,f1_mean,f1_sd\n1.0,abc,1.0\n";
        assert!(ingest_str(text, &cfg).unwrap_err().to_string().contains("non-numeric"));
        let text = "# crosscal-dataset v1; f1=bernoulli\ny,v,f1_p\n1,1.5,0.3\n";
        assert!(ingest_str(text, &cfg).unwrap_err().to_string().contains("outside"));
        assert!(ingest_str("y,f1_p\n1,0.3\n", &cfg).is_err());
    }

    #[test]
    fn family_override_and_labels() {
        let cfg = IngestConfig {
            families: Some(vec![parse_decl(1, "normal:AR1").unwrap()]),
            seed: 3,
        };
        let ds = ingest_str("y,f1_mean,f1_sd\n0.5,0.0,1.0\n", &cfg).unwrap();
        assert_eq!(ds.forecaster(0).unwrap().label(), "AR1");
        let again = ingest_str(&dump_csv(&ds), &IngestConfig::default()).unwrap();
        assert_eq!(again, ds);
    }
}
