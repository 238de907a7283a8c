pub mod exit_times;
pub mod importance;
pub mod path_rate;
pub mod quasipotential;
pub mod rate;
pub mod simulate;

use std::path::Path;

use anyhow::{Context, Result};

/// Create the output directory if needed.
pub fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
}

/// Write a text file, returning its path for the manifest.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
