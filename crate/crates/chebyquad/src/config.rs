//! Frozen constants, from `--config`, `$CHEBYQUAD_CONFIG` or the built-in table.

use std::path::{Path, PathBuf};

use chebyquad_core::config::Constants;

use crate::error::{CliError, Result};
use crate::formats::read_bytes;

pub const CONFIG_ENV: &str = "CHEBYQUAD_CONFIG";

pub fn parse_constants(path: &Path, bytes: &[u8]) -> Result<Constants> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let c: Constants = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| {
                let before = &text[..s.start];
                let line = before.matches('\n').count() + 1;
                (line, s.start - before.rfind('\n').map_or(0, |p| p + 1) + 1)
            })
            .unwrap_or((0, 0));
        CliError::Parse {
            path: path.into(),
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    c.validate()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(c)
}

/// The constants in force and, when read from a file, its path and content.
#[derive(Debug, Clone)]
pub struct LoadedConstants {
    pub constants: Constants,
    pub source: Option<(PathBuf, Vec<u8>)>,
}

pub fn load_constants(explicit: Option<&Path>) -> Result<LoadedConstants> {
    let path = match explicit {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(CONFIG_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from),
    };
    match path {
        None => Ok(LoadedConstants {
            constants: Constants::default(),
            source: None,
        }),
        Some(p) => {
            let bytes = read_bytes(&p)?;
            let constants = parse_constants(&p, &bytes)?;
            Ok(LoadedConstants {
                constants,
                source: Some((p, bytes)),
            })
        }
    }
}
