//! External matcher processes.
//!
//! A matcher is any command that reads two image crops and writes a match
//! CSV in crop pixel coordinates. The command template is split like a shell
//! command line and the tokens `{a}`, `{b}` and `{out}` are replaced by the
//! paths of the moving crop, the fixed crop and the CSV to write.

use std::path::{Path, PathBuf};
use std::process::Command;

use deformreg_core::multiscale::{CropRequest, Matcher};
use deformreg_core::MatchSet;

use crate::error::{Error, Result};
use crate::formats::{read_match_csv, write_image};

pub const TOKENS: [&str; 3] = ["{a}", "{b}", "{out}"];

#[derive(Debug)]
pub struct CommandMatcher {
    words: Vec<String>,
    dir: tempfile::TempDir,
    calls: usize,
}

impl CommandMatcher {
    pub fn new(template: &str) -> Result<Self> {
        let words = shell_words::split(template)
            .map_err(|e| Error::Usage(format!("matcher template: {e}")))?;
        if words.is_empty() {
            return Err(Error::Usage("matcher template is empty".into()));
        }
        for t in TOKENS {
            if !words.iter().any(|w| w.contains(t)) {
                return Err(Error::Usage(format!("matcher template lacks {t}")));
            }
        }
        let dir = tempfile::Builder::new()
            .prefix("deformreg-crops")
            .tempdir()
            .map_err(|e| Error::io(std::env::temp_dir(), e))?;
        Ok(Self {
            words,
            dir,
            calls: 0,
        })
    }

    /// The command line for one call.
    pub fn command_line(&self, a: &Path, b: &Path, out: &Path) -> Vec<String> {
        let subst = [
            (TOKENS[0], a.display().to_string()),
            (TOKENS[1], b.display().to_string()),
            (TOKENS[2], out.display().to_string()),
        ];
        self.words
            .iter()
            .map(|w| {
                subst
                    .iter()
                    .fold(w.clone(), |acc, (tok, val)| acc.replace(tok, val))
            })
            .collect()
    }

    fn paths(&self, level: u32) -> (PathBuf, PathBuf, PathBuf) {
        let stem = format!("l{level}_{:05}", self.calls);
        let d = self.dir.path();
        (
            d.join(format!("{stem}_a.png")),
            d.join(format!("{stem}_b.png")),
            d.join(format!("{stem}.csv")),
        )
    }
}

impl Matcher for CommandMatcher {
    type Error = Error;

    fn match_crops(&mut self, req: &CropRequest) -> Result<MatchSet> {
        let (a, b, out) = self.paths(req.level);
        self.calls += 1;
        write_image(&req.a, &a)?;
        write_image(&req.b, &b)?;
        let argv = self.command_line(&a, &b, &out);
        log::debug!("matcher: {argv:?}");
        let output = Command::new(&argv[0])
            .args(&argv[1..])
            .output()
            .map_err(|e| Error::Matcher(format!("cannot run {:?}: {e}", argv[0])))?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            let tail: Vec<&str> = stderr.lines().rev().take(5).collect();
            return Err(Error::Matcher(format!(
                "{:?} exited with {}: {}",
                argv[0],
                output.status,
                tail.into_iter().rev().collect::<Vec<_>>().join(" | ")
            )));
        }
        read_match_csv(&out).map_err(|e| Error::Matcher(e.to_string()))
    }
}
