use crate::CliError;
use std::fs::OpenOptions;
use std::path::Path;

/// One solver run, written as a CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub command: String,
    pub instance: String,
    pub method: String,
    pub seed: u64,
    pub sample_size: usize,
    pub sample_seed: u64,
    /// Remaining parameters as `key=value` pairs joined by `;`.
    pub params: String,
    pub objective: f64,
    pub lower_bound: Option<f64>,
    pub gap: Option<f64>,
    pub status: String,
    /// Seconds; zero under `--deterministic`.
    pub wall_time: f64,
    pub iterations: u64,
}

impl RunRecord {
    pub const HEADER: [&'static str; 13] = [
        "command",
        "instance",
        "method",
        "seed",
        "sample_size",
        "sample_seed",
        "params",
        "objective",
        "lower_bound",
        "gap",
        "status",
        "wall_time",
        "iterations",
    ];

    fn fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        vec![
            self.command.clone(),
            self.instance.clone(),
            self.method.clone(),
            self.seed.to_string(),
            self.sample_size.to_string(),
            self.sample_seed.to_string(),
            self.params.clone(),
            format!("{:.6}", self.objective),
            opt(self.lower_bound),
            opt(self.gap),
            self.status.clone(),
            format!("{:.3}", self.wall_time),
            self.iterations.to_string(),
        ]
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::HEADER)?;
        w.write_record(self.fields())?;
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
    }

    /// Appends the row to `path`, writing the header first if the file is new or empty.
    pub fn append(&self, path: &Path) -> Result<(), CliError> {
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut w = csv::Writer::from_writer(file);
        if fresh {
            w.write_record(Self::HEADER)?;
        }
        w.write_record(self.fields())?;
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> RunRecord {
        RunRecord {
            command: "solve".into(),
            instance: "x".into(),
            method: "ts".into(),
            seed: 1,
            sample_size: 100,
            sample_seed: 2,
            params: "iters=10;deterministic=true".into(),
            objective: 1.5,
            lower_bound: None,
            gap: None,
            status: "heuristic".into(),
            wall_time: 0.0,
            iterations: 10,
        }
    }

    #[test]
    fn csv_has_header_and_row() {
        let text = record().to_csv().unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), RunRecord::HEADER.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "solve,x,ts,1,100,2,iters=10;deterministic=true,1.500000,,,heuristic,0.000,10"
        );
    }

    #[test]
    fn append_writes_header_once() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.csv");
        record().append(&path).unwrap();
        record().append(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
    }
}
