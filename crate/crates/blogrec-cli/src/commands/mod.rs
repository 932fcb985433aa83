pub mod evaluate;
pub mod ingest;
pub mod stats;
pub mod synth;
pub mod train;

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use blogrec::corpus::{ingest_apps_from, ingest_follows_from, AppIngest, FollowIngest, Vocab};

use crate::error::{io_ctx, CliError};

/// [`ingest_follows_from`] on a file, naming the path in open errors.
pub fn open_follows(path: &Path) -> Result<FollowIngest, CliError> {
    let name = path.display().to_string();
    let file = fs::File::open(path).map_err(io_ctx(name.clone()))?;
    Ok(ingest_follows_from(BufReader::new(file), &name)?)
}

/// [`ingest_apps_from`] on a file, naming the path in open errors.
pub fn open_apps(path: &Path, users: &Vocab, top_k: usize) -> Result<AppIngest, CliError> {
    let name = path.display().to_string();
    let file = fs::File::open(path).map_err(io_ctx(name.clone()))?;
    Ok(ingest_apps_from(BufReader::new(file), &name, users, top_k)?)
}

/// Opens `<dir>/<name>` for buffered writing.
pub fn create_artifact(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<fs::File>), CliError> {
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(io_ctx(path.display().to_string()))?;
    Ok((path, BufWriter::new(file)))
}

/// Writes one artifact through a closure and flushes it.
pub fn write_artifact(
    dir: &Path,
    name: &str,
    fill: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let (path, mut w) = create_artifact(dir, name)?;
    fill(&mut w)
        .and_then(|()| w.flush())
        .map_err(io_ctx(path.display().to_string()))?;
    Ok(())
}
