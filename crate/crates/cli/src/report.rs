//! Output plumbing shared by all commands: a CSV payload plus a plain-text
//! report, with an optional timestamp line on each.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::Failure;

pub struct Output {
    pub csv: Vec<u8>,
    pub text: String,
    /// Extra files written beside the main CSV, keyed by suffix.
    pub extra: Vec<(String, Vec<u8>)>,
}

impl Output {
    pub fn new() -> Self {
        Self {
            csv: Vec::new(),
            text: String::new(),
            extra: Vec::new(),
        }
    }

    pub fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }
}

fn stamp() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    format!("# generated_unix_s {secs}\n")
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, header: &str, body: &[u8]) -> Result<(), Failure> {
    let mut f = fs::File::create(path).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", path.display())))?;
    f.write_all(header.as_bytes())
        .and_then(|_| f.write_all(body))
        .map_err(|e| Failure::Internal(format!("writing {}: {e}", path.display())))
}

/// With `out`, the CSV goes to `out` and the text to `out.txt`; otherwise the
/// text goes to stdout.
pub fn emit(output: &Output, out: Option<&Path>, timestamp: bool) -> Result<(), Failure> {
    let header = if timestamp { stamp() } else { String::new() };
    match out {
        Some(path) => {
            write_file(path, &header, &output.csv)?;
            write_file(&sibling(path, ".txt"), &header, output.text.as_bytes())?;
            for (suffix, body) in &output.extra {
                write_file(&sibling(path, suffix), &header, body)?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(header.as_bytes())
                .and_then(|_| stdout.write_all(output.text.as_bytes()))
                .map_err(|e| Failure::Internal(format!("writing stdout: {e}")))?;
        }
    }
    Ok(())
}

/// Engineering formatting with a fixed number of significant digits.
pub fn sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-3..6).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}
