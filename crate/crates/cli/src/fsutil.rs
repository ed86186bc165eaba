use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{CliError, Result};

/// Write via a sibling temp file and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp_name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let mut file = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| CliError::io(&tmp, e))?;
    file.sync_all().map_err(|e| CliError::io(&tmp, e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}
