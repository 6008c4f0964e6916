#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_deformreg")
}

/// Runs the CLI with `DEFORMREG_THREADS` cleared.
pub fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env_remove("DEFORMREG_THREADS")
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn deformreg")
}

pub fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "deformreg {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Path of the `block_matcher` example, built on first use with the profile
/// of the binary under test.
pub fn block_matcher() -> &'static Path {
    static PATH: OnceLock<PathBuf> = OnceLock::new();
    PATH.get_or_init(|| {
        let dir = Path::new(bin()).parent().unwrap().to_path_buf();
        let mut cmd = Command::new(env!("CARGO"));
        cmd.args(["build", "--quiet", "-p", "deformreg", "--example", "block_matcher"]);
        if dir.file_name().is_some_and(|n| n == "release") {
            cmd.arg("--release");
        }
        let status = cmd.status().expect("spawn cargo");
        assert!(status.success(), "building block_matcher failed");
        dir.join("examples")
            .join(format!("block_matcher{}", std::env::consts::EXE_SUFFIX))
    })
}

pub fn matcher_template(extra: &str) -> String {
    let exe = shell_quote(block_matcher());
    format!("{exe} {{a}} {{b}} {{out}} {extra}")
}

fn shell_quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}
