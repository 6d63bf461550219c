//! On-disk layout under the data directory:
//!
//! ```text
//! docs/                      knowledge store
//! sessions/<id>.jsonl        append-only session event log
//! experiments/<id>/job.json  job state; artifacts alongside once done
//! ```

use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Write via a temporary sibling and rename, so readers never see a torn file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

pub fn append_json_line<T: Serialize>(path: &Path, event: &T) -> std::io::Result<()> {
    let mut line = serde_json::to_vec(event)?;
    line.push(b'\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(&line)?;
    f.sync_data()
}

/// Reads every event of a log. A torn final line (crash mid-append) is
/// dropped with a warning; corruption anywhere else is an error.
pub fn read_json_lines<T: DeserializeOwned>(path: &Path) -> std::io::Result<Vec<T>> {
    let lines: Vec<String> = BufReader::new(fs::File::open(path)?)
        .lines()
        .collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            Err(e) if i + 1 == lines.len() => {
                log::warn!("{}: dropping torn last line: {e}", path.display());
            }
            Err(e) => {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), i + 1),
                ))
            }
        }
    }
    Ok(out)
}
