//! Execution-model hierarchies.
//!
//! An architecture is an ordered stack of execution levels, outermost
//! first: `tiled` splits the domain into per-worker tiles exchanging halo
//! messages, `threaded` partitions a (sub)domain across worker threads,
//! `device` stages data into a simulated accelerator buffer, `sequential`
//! is the reference loop. Legal stacks follow a fixed DAG; `device` can
//! only start a hierarchy or sit directly under `tiled`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{GsclError, Result};
use crate::grid::StorageSelector;

/// One execution level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LevelTag {
    Tiled,
    Threaded,
    Device,
    Sequential,
}

impl LevelTag {
    pub const ALL: [LevelTag; 4] = [
        LevelTag::Tiled,
        LevelTag::Threaded,
        LevelTag::Device,
        LevelTag::Sequential,
    ];

    /// Legal children in the hierarchy DAG.
    pub fn may_precede(self, next: LevelTag) -> bool {
        use LevelTag::*;
        matches!(
            (self, next),
            (Tiled, Threaded) | (Tiled, Device) | (Tiled, Sequential) | (Threaded, Sequential)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LevelTag::Tiled => "tiled",
            LevelTag::Threaded => "threaded",
            LevelTag::Device => "device",
            LevelTag::Sequential => "sequential",
        }
    }
}

impl fmt::Display for LevelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LevelTag {
    type Err = GsclError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "tiled" => Ok(LevelTag::Tiled),
            "threaded" => Ok(LevelTag::Threaded),
            "device" => Ok(LevelTag::Device),
            "sequential" => Ok(LevelTag::Sequential),
            other => Err(GsclError::InvalidHierarchy(
                other.to_string(),
                "<not a level tag>".to_string(),
            )),
        }
    }
}

/// A validated hierarchy of execution levels, outermost first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchitectureSpec {
    levels: Vec<LevelTag>,
}

impl ArchitectureSpec {
    pub fn levels(&self) -> &[LevelTag] {
        &self.levels
    }

    pub fn has(&self, tag: LevelTag) -> bool {
        self.levels.contains(&tag)
    }

    pub fn is_tiled(&self) -> bool {
        self.levels.first() == Some(&LevelTag::Tiled)
    }

    pub fn has_device(&self) -> bool {
        self.has(LevelTag::Device)
    }

    pub fn has_threaded(&self) -> bool {
        self.has(LevelTag::Threaded)
    }

    /// Comma-separated form, e.g. `tiled,threaded,sequential`.
    pub fn parse(s: &str) -> Result<Self> {
        let tags = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(LevelTag::from_str)
            .collect::<Result<Vec<_>>>()?;
        make_arch(&tags)
    }

    /// The resolved hierarchy, one tag per line, outermost first — the
    /// run-time analog of printing the chosen platform at build time.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for tag in &self.levels {
            out.push_str(tag.as_str());
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for ArchitectureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.levels.iter().map(|t| t.as_str()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Validate a hierarchy against the level DAG.
pub fn make_arch(levels: &[LevelTag]) -> Result<ArchitectureSpec> {
    if levels.is_empty() {
        return Err(GsclError::InvalidHierarchy(
            "<empty>".to_string(),
            "<empty>".to_string(),
        ));
    }
    for pair in levels.windows(2) {
        if !pair[0].may_precede(pair[1]) {
            return Err(GsclError::InvalidHierarchy(
                pair[0].to_string(),
                pair[1].to_string(),
            ));
        }
    }
    Ok(ArchitectureSpec {
        levels: levels.to_vec(),
    })
}

/// Buffer strategy grids must use under `arch`: plain host buffer,
/// `workers` tile buffers with ghost frames when the hierarchy starts
/// tiled, plus a staging buffer when a device level is present. Grid
/// construction through the selector is the only architecture-dependent
/// line in application code.
pub fn default_storage(arch: &ArchitectureSpec, workers: usize) -> Result<StorageSelector> {
    if workers < 1 {
        return Err(GsclError::InvalidWorkerCount(workers));
    }
    Ok(StorageSelector {
        tile_workers: arch.is_tiled().then_some(workers),
        device: arch.has_device(),
    })
}

/// Pick the default hierarchy: an explicit override wins, then a
/// configuration file, then a machine probe (two or more hardware workers
/// selects `threaded,sequential`).
pub(crate) fn resolve_default_arch(
    env_override: Option<&str>,
    file_arch: Option<&str>,
    hardware_workers: usize,
) -> Result<ArchitectureSpec> {
    if let Some(s) = env_override {
        return ArchitectureSpec::parse(s);
    }
    if let Some(s) = file_arch {
        return ArchitectureSpec::parse(s);
    }
    if hardware_workers >= 2 {
        make_arch(&[LevelTag::Threaded, LevelTag::Sequential])
    } else {
        make_arch(&[LevelTag::Sequential])
    }
}

/// Key-value configuration file (`arch = ...`, `workers = ...`). The path
/// comes from `GSCL_CONFIG`, defaulting to `gscl.toml` in the working
/// directory.
#[derive(Debug, Default, Clone)]
pub(crate) struct ConfigFile {
    pub arch: Option<String>,
    pub workers: Option<usize>,
}

pub(crate) fn read_config(path: &Path) -> Result<ConfigFile> {
    let mut cfg = ConfigFile::default();
    let Ok(text) = std::fs::read_to_string(path) else {
        return Ok(cfg); // absent file means no configuration
    };
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let value = value.trim().trim_matches('"');
        match key.trim() {
            "arch" => cfg.arch = Some(value.to_string()),
            "workers" => {
                let w: usize = value
                    .parse()
                    .map_err(|_| GsclError::InvalidWorkerCount(0))?;
                cfg.workers = Some(w);
            }
            _ => {}
        }
    }
    Ok(cfg)
}

pub(crate) fn hardware_workers() -> usize {
    std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
}
