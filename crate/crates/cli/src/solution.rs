//! Solution files: a version line, the instance id, the sample seed and the
//! permutation.

use crate::CliError;
use mms_core::Sequence;
use std::path::Path;

pub const SOLUTION_FORMAT: &str = "mms-solution/1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolutionFile {
    pub instance: String,
    pub sample_seed: u64,
    pub sequence: Sequence,
}

impl SolutionFile {
    pub fn to_text(&self) -> String {
        format!(
            "{SOLUTION_FORMAT}\ninstance {}\nsample_seed {}\npermutation {}\n",
            self.instance, self.sample_seed, self.sequence
        )
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some(SOLUTION_FORMAT) {
            return Err(CliError::Usage(format!("solution file must start with `{SOLUTION_FORMAT}`")));
        }
        let mut field = |key: &str| -> Result<String, CliError> {
            let line = lines
                .next()
                .ok_or_else(|| CliError::Usage(format!("solution file lacks `{key}`")))?;
            match line.split_once(char::is_whitespace) {
                Some((k, v)) if k == key => Ok(v.trim().to_string()),
                None if line == key => Ok(String::new()),
                _ => Err(CliError::Usage(format!("expected `{key} ...` in solution file, found `{line}`"))),
            }
        };
        let instance = field("instance")?;
        let sample_seed = field("sample_seed")?
            .parse()
            .map_err(|e| CliError::Usage(format!("bad sample_seed: {e}")))?;
        let sequence = field("permutation")?.parse()?;
        Ok(SolutionFile { instance, sample_seed, sequence })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}
