use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;

/// One observable measurement; append-only, always traceable to a config
/// hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub experiment: String,
    pub t: f64,
    pub observable: String,
    pub value: f64,
    /// Standard error for stochastic observables.
    pub std_err: Option<f64>,
    pub seed: Option<u64>,
    pub config_hash: String,
}

impl MetricsRow {
    pub fn new(experiment: &str, t: f64, observable: String, value: f64, hash: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            t,
            observable,
            value,
            std_err: None,
            seed: None,
            config_hash: hash.to_string(),
        }
    }

    pub fn with_err(mut self, std_err: f64) -> Self {
        self.std_err = Some(std_err);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// Write metrics as CSV. The first line is a `#`-prefixed timestamp comment;
/// everything after it is byte-deterministic for a fixed input.
pub fn write_metrics(rows: &[MetricsRow], path: &Path) -> Result<(), HarnessError> {
    let mut file = std::fs::File::create(path)?;
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    writeln!(file, "# written_at_unix={now}")?;
    let mut w = csv::WriterBuilder::new().from_writer(file);
    w.write_record(["experiment", "t", "observable", "value", "std_err", "seed", "config_hash"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.experiment.as_str(),
            &format!("{}", r.t),
            r.observable.as_str(),
            &format!("{}", r.value),
            &r.std_err.map(|e| format!("{e}")).unwrap_or_default(),
            &r.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.config_hash.as_str(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, HarnessError> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    // Skip comment lines before the header.
    let mut body = String::new();
    for line in &mut lines {
        let line = line?;
        if line.starts_with('#') {
            continue;
        }
        body.push_str(&line);
        body.push('\n');
    }
    let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let parse_f = |s: &str| s.parse::<f64>().map_err(|e| HarnessError::Invalid(e.to_string()));
        out.push(MetricsRow {
            experiment: record[0].to_string(),
            t: parse_f(&record[1])?,
            observable: record[2].to_string(),
            value: parse_f(&record[3])?,
            std_err: if record[4].is_empty() {
                None
            } else {
                Some(parse_f(&record[4])?)
            },
            seed: if record[5].is_empty() {
                None
            } else {
                Some(
                    record[5]
                        .parse::<u64>()
                        .map_err(|e| HarnessError::Invalid(e.to_string()))?,
                )
            },
            config_hash: record[6].to_string(),
        });
    }
    Ok(out)
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Invalid(format!("csv: {e}"))
}

/// Strip the timestamp comment; used by reproducibility checks.
pub fn metrics_body(path: &Path) -> Result<String, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<MetricsRow> {
        vec![
            MetricsRow::new("test", 0.0, "obs_a".into(), 1.25, "deadbeef00000000"),
            MetricsRow::new("test", 0.5, "obs_b".into(), -3.5e-7, "deadbeef00000000")
                .with_err(0.01)
                .with_seed(42),
        ]
    }

    #[test]
    fn metrics_round_trip() {
        let dir = std::env::temp_dir().join("meancurve_metrics_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.csv");
        let rows = rows();
        write_metrics(&rows, &path).unwrap();
        let back = read_metrics(&path).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn body_is_deterministic_modulo_timestamp() {
        let dir = std::env::temp_dir().join("meancurve_metrics_test");
        std::fs::create_dir_all(&dir).unwrap();
        let (p1, p2) = (dir.join("a.csv"), dir.join("b.csv"));
        write_metrics(&rows(), &p1).unwrap();
        std::thread::sleep(std::time::Duration::from_millis(5));
        write_metrics(&rows(), &p2).unwrap();
        assert_eq!(metrics_body(&p1).unwrap(), metrics_body(&p2).unwrap());
    }

    #[test]
    fn every_row_carries_the_hash() {
        for r in rows() {
            assert!(!r.config_hash.is_empty());
        }
    }
}
