use std::path::PathBuf;

use agecontrol_core::Error as CoreError;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("malformed CSV {path}: {detail}")]
    Csv { path: PathBuf, detail: String },

    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 validation, 3 solver, 4 non-convergence, 1 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Csv { .. } => 1,
            CliError::Core(e) => match e {
                CoreError::Parameter(_) | CoreError::Shape(_) | CoreError::Domain(_) | CoreError::Precondition(_) => 2,
                CoreError::Singularity(_) | CoreError::Solver { .. } | CoreError::Inconsistency(_) => 3,
                CoreError::NotConverged(_) => 4,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "validation",
            3 => "solver",
            4 => "not_converged",
            _ => "io",
        }
    }

    /// Machine-readable error record.
    pub fn record(&self) -> serde_json::Value {
        json!({ "error": { "kind": self.kind(), "exit_code": self.exit_code(), "message": self.to_string() } })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::config("x").exit_code(), 2);
        assert_eq!(CliError::from(CoreError::Parameter("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(CoreError::Solver { step: 1, detail: "x".into() }).exit_code(), 3);
        let r = CliError::config("bad").record();
        assert_eq!(r["error"]["exit_code"], 2);
        assert_eq!(r["error"]["kind"], "validation");
    }
}
