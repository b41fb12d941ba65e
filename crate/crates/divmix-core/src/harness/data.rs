//! Data files and single-sample estimation.

use super::config::{EstimatorEntry, InitSpec};
use super::csv::fmt6;
use super::run::{run_method, Outcome};
use crate::models::Observations;
use crate::{Error, Result};
use std::path::Path;

/// One observation per line: `x`, or `x,y` / `x y` for bivariate data.
/// Blank lines and lines starting with '#' are skipped. A single leading
/// header line that does not parse is skipped too.
pub fn parse_observations(text: &str) -> Result<Observations> {
    let mut uni = vec![];
    let mut bi = vec![];
    let mut width: Option<usize> = None;
    let mut header_allowed = true;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c == ';' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let vals = match parsed {
            Ok(v) => v,
            Err(_) if header_allowed => {
                header_allowed = false;
                continue;
            }
            Err(_) => return Err(Error::Parse { line: line_no, msg: format!("not a number: '{line}'") }),
        };
        header_allowed = false;
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse { line: line_no, msg: "non-finite value".into() });
        }
        match (width, vals.len()) {
            (Some(w), l) if w != l => {
                return Err(Error::Parse { line: line_no, msg: format!("expected {w} columns, found {l}") })
            }
            (_, 1) => uni.push(vals[0]),
            (_, 2) => bi.push([vals[0], vals[1]]),
            (_, l) => return Err(Error::Parse { line: line_no, msg: format!("expected 1 or 2 columns, found {l}") }),
        }
        width = Some(vals.len());
    }
    match width {
        Some(2) => Ok(Observations::Bi(bi)),
        Some(1) => Ok(Observations::Uni(uni)),
        _ => Err(Error::Parse { line: text.lines().count().max(1), msg: "no observations".into() }),
    }
}

/// Writes a univariate sample in the format `parse_observations` reads.
/// Values use Rust's shortest round-trip formatting, so nothing is lost.
pub fn write_sample(path: &Path, data: &[f64]) -> Result<()> {
    let mut s = String::with_capacity(data.len() * 20);
    for v in data {
        s.push_str(&format!("{v:?}\n"));
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_estimator(path: &Path) -> Result<EstimatorEntry> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
}

/// Fits one estimator to the observations of a data file. Jittered starts
/// are not allowed here; a fixed start is applied to the method.
pub fn estimate_file(data_path: &Path, entry: &EstimatorEntry) -> Result<Outcome> {
    let text = std::fs::read_to_string(data_path)?;
    let obs = parse_observations(&text)?;
    estimate_observations(&obs, entry)
}

pub fn estimate_observations(obs: &Observations, entry: &EstimatorEntry) -> Result<Outcome> {
    entry.validate()?;
    let mut method = entry.method.clone();
    match &entry.init {
        InitSpec::Config => {}
        InitSpec::Fixed(v) => method.set_init(v.clone()),
        InitSpec::Jitter { .. } => {
            return Err(Error::Config("jittered starts only make sense inside an experiment".into()))
        }
    }
    if method.needs_bivariate() != obs.is_bivariate() {
        return Err(Error::Config("the estimator does not match the data dimension".into()));
    }
    run_method(&method, obs)
}

/// (x, y) pairs as a two-column CSV.
pub fn xy_csv(header: (&str, &str), points: &[(f64, f64)]) -> String {
    let mut s = format!("{},{}\n", header.0, header.1);
    for (x, y) in points {
        s.push_str(&format!("{},{}\n", fmt6(*x), fmt6(*y)));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse_observations("1.0\n2.0\n\nfoo\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        match parse_observations("1,2\n3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_comments_and_pairs() {
        let o = parse_observations("x\n# c\n1.5\n-2e-3\n").unwrap();
        assert_eq!(o, Observations::Uni(vec![1.5, -2e-3]));
        let o = parse_observations("0 1\n2,3\n").unwrap();
        assert_eq!(o, Observations::Bi(vec![[0.0, 1.0], [2.0, 3.0]]));
        assert!(parse_observations("# nothing\n").is_err());
    }
}
