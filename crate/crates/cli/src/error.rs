use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum CliError {
    Core(pktwin::Error),
    MissingFile(PathBuf),
    Config(String),
    Usage(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::MissingFile(_) => "missing_file",
            CliError::Config(_) => "malformed_config",
            CliError::Usage(_) => "usage",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::MissingFile(p) => write!(f, "no such file: {}", p.display()),
            CliError::Config(m) | CliError::Usage(m) => f.write_str(m),
        }
    }
}

impl From<pktwin::Error> for CliError {
    fn from(e: pktwin::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

/// `error code=<code> msg="<message>"` with quotes and newlines escaped.
pub fn error_line(e: &CliError) -> String {
    let msg = e.to_string().replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n");
    format!("error code={} msg=\"{msg}\"", e.code())
}

pub fn require(path: &Path) -> Result<&Path, CliError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::MissingFile(path.to_path_buf()))
    }
}

pub fn open(path: &Path) -> Result<std::fs::File, CliError> {
    Ok(std::fs::File::open(require(path)?)?)
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    Ok(std::fs::read_to_string(require(path)?)?)
}
