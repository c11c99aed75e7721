use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use batchlpn::dist::NoiseDistribution;
use batchlpn::linearize::{BiasFunction, TableFile};
use batchlpn::lpn::SecretKey;
use batchlpn::rational::{parse_rational, Rational};
use tempfile::NamedTempFile;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] batchlpn::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Line {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn with_path<T>(path: &Path, r: std::result::Result<T, batchlpn::Error>) -> Result<T> {
    r.map_err(|e| CliError::Line {
        path: path.to_path_buf(),
        line: 1,
        message: e.to_string(),
    })
}

pub fn read_sk(path: &Path) -> Result<SecretKey> {
    with_path(path, SecretKey::from_json(&read_text(path)?))
}

pub fn read_p(path: &Path) -> Result<NoiseDistribution> {
    with_path(path, NoiseDistribution::from_json(&read_text(path)?))
}

pub fn read_q(path: &Path) -> Result<BiasFunction> {
    let text = read_text(path)?;
    let file: TableFile = serde_json::from_str(&text).map_err(|e| CliError::Line {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    Ok(BiasFunction::from_file(&file)?)
}

pub fn parse_delta(s: &str) -> Result<Rational> {
    parse_rational(s).map_err(|e| CliError::Usage(format!("--delta {s}: {e}")))
}

/// Iterates over the non-empty lines of a JSON Lines file with their line numbers.
pub fn json_lines(path: &Path) -> Result<impl Iterator<Item = Result<(usize, String)>> + '_> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(move |(i, l)| l.map(|l| (i + 1, l)).map_err(io_err(path)))
        .filter(|r| !matches!(r, Ok((_, l)) if l.trim().is_empty())))
}

/// Output written to a temporary file beside the target and renamed into
/// place only on [`AtomicOutput::commit`].
pub struct AtomicOutput {
    path: PathBuf,
    writer: BufWriter<NamedTempFile>,
}

impl AtomicOutput {
    pub fn create(path: &Path) -> Result<Self> {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let tmp = NamedTempFile::new_in(dir).map_err(io_err(path))?;
        Ok(AtomicOutput {
            path: path.to_path_buf(),
            writer: BufWriter::new(tmp),
        })
    }

    pub fn write_line(&mut self, line: &str) -> Result<()> {
        self.writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.write_all(b"\n"))
            .map_err(io_err(&self.path))
    }

    pub fn commit(self) -> Result<()> {
        let path = self.path;
        let tmp = self.writer.into_inner().map_err(|e| CliError::Io {
            path: path.clone(),
            source: e.into_error(),
        })?;
        tmp.persist(&path).map_err(|e| CliError::Io {
            path: path.clone(),
            source: e.error,
        })?;
        Ok(())
    }
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut out = AtomicOutput::create(path)?;
    out.write_line(contents)?;
    out.commit()
}
