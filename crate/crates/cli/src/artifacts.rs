//! Artifact files are written atomically (temp file, then rename) and hold no
//! timestamps, so re-running a command with the same inputs reproduces them
//! byte for byte.  The write time goes into a sibling `<stem>.meta.json`.

use crate::config::RunConfig;
use crate::CliError;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    result: &'a T,
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes)
        .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        CliError::Validation(format!("cannot move {} into place: {e}", path.display()))
    })
}

fn write_meta(path: &Path) -> Result<(), CliError> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("artifact");
    let meta = path.with_file_name(format!("{stem}.meta.json"));
    let ms = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    write_atomic(&meta, format!("{{\"written_unix_ms\":{ms}}}\n").as_bytes())
}

/// Plain artifact (CSV, checkpoint): content as given, plus the meta file.
pub fn write_raw(path: &Path, content: &str) -> Result<(), CliError> {
    write_atomic(path, content.as_bytes())?;
    write_meta(path)
}

/// JSON artifact wrapped in an envelope recording the binary version, the
/// subcommand, and the resolved configuration next to the payload.
pub fn write_envelope<T: Serialize>(
    dir: &Path,
    name: &str,
    command: &str,
    config: &RunConfig,
    result: &T,
) -> Result<PathBuf, CliError> {
    let env = Envelope {
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        result,
    };
    let mut body = serde_json::to_string_pretty(&env)
        .map_err(|e| CliError::Numerical(format!("cannot serialize {name}: {e}")))?;
    body.push('\n');
    let path = dir.join(name);
    write_atomic(&path, body.as_bytes())?;
    write_meta(&path)?;
    Ok(path)
}
