//! Posterior draws on disk: JSON lines, one header record followed by one
//! record per kept draw. The header carries everything the summaries need
//! (config, moderator matrix and kinds, stratum ids), so a draws file can
//! be summarized on its own.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampler::{ChainStats, Draw, PosteriorDraws, SamplerConfig};
use crate::strata::{Dataset, ModeratorKind};

pub const DRAWS_FORMAT: &str = "clbart-draws";
pub const DRAWS_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DrawsError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path}: not a draws file (format {format:?}, version {version})")]
    Format {
        path: PathBuf,
        format: String,
        version: u32,
    },
    #[error("{path}: empty file")]
    Empty { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawsHeader {
    pub format: String,
    pub version: u32,
    pub config: SamplerConfig,
    pub stats: ChainStats,
    pub stratum_ids: Vec<String>,
    pub confounder_names: Vec<String>,
    pub moderator_names: Vec<String>,
    pub moderator_kinds: Vec<ModeratorKind>,
    /// Moderator vector w_i per stratum, in stratum order.
    pub moderators: Vec<Vec<f64>>,
}

impl DrawsHeader {
    pub fn new(data: &Dataset, posterior: &PosteriorDraws) -> Self {
        Self {
            format: DRAWS_FORMAT.to_string(),
            version: DRAWS_VERSION,
            config: posterior.config.clone(),
            stats: posterior.stats.clone(),
            stratum_ids: data.strata.iter().map(|s| s.id().to_string()).collect(),
            confounder_names: data.confounder_names.clone(),
            moderator_names: data.moderator_names.clone(),
            moderator_kinds: data.moderator_kinds.clone(),
            moderators: data.moderator_matrix(),
        }
    }
}

/// Writes `bytes` to `path` through a temporary sibling and a rename, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn encode_draws(header: &DrawsHeader, draws: &[Draw]) -> Vec<u8> {
    let mut out = Vec::new();
    serde_json::to_writer(&mut out, header).expect("header serializes");
    out.push(b'\n');
    for d in draws {
        serde_json::to_writer(&mut out, d).expect("draw serializes");
        out.push(b'\n');
    }
    out
}

pub fn write_draws(path: &Path, header: &DrawsHeader, draws: &[Draw]) -> Result<(), DrawsError> {
    write_atomic(path, &encode_draws(header, draws)).map_err(|source| DrawsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_draws(path: &Path) -> Result<(DrawsHeader, Vec<Draw>), DrawsError> {
    let io = |source| DrawsError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(fs::File::open(path).map_err(io)?);
    let mut lines = reader.lines();
    let first = lines.next().ok_or_else(|| DrawsError::Empty {
        path: path.to_path_buf(),
    })?;
    let json = |line, source| DrawsError::Json {
        path: path.to_path_buf(),
        line,
        source,
    };
    let header: DrawsHeader = serde_json::from_str(&first.map_err(io)?).map_err(|e| json(1, e))?;
    if header.format != DRAWS_FORMAT || header.version != DRAWS_VERSION {
        return Err(DrawsError::Format {
            path: path.to_path_buf(),
            format: header.format,
            version: header.version,
        });
    }
    let mut draws = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        draws.push(serde_json::from_str(&line).map_err(|e| json(i + 2, e))?);
    }
    Ok((header, draws))
}
