//! External programs over files.
//!
//! Protocol: the dataset is written as CSV (header `x1,...,xd,y`, shortest
//! round-trip decimals) with its JSON sidecar beside it. In
//! [`IoMode::PathArg`] the CSV path is the last argument; in [`IoMode::Stdin`]
//! the CSV bytes are piped to standard input. The program prints the
//! coefficients as whitespace-separated decimals on stdout, `β₀` first in the
//! intercept form, and exits 0.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use super::Raw;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IoMode {
    #[default]
    PathArg,
    Stdin,
}

const STDERR_TAIL: usize = 512;

fn io_err(what: &str, e: impl std::fmt::Display) -> Error {
    Error::HarnessIo(format!("{what}: {e}"))
}

pub(super) fn run(command: &str, args: &[String], mode: IoMode, ds: &Dataset, timeout: Duration) -> Result<Raw> {
    let dir = tempfile::tempdir().map_err(|e| io_err("temp dir", e))?;
    let csv_path = dir.path().join("dataset.csv");
    ds.save(&csv_path, None, None).map_err(|e| io_err("writing dataset", e))?;

    let mut cmd = Command::new(command);
    cmd.args(args).stdout(Stdio::piped()).stderr(Stdio::piped());
    match mode {
        IoMode::PathArg => {
            cmd.arg(&csv_path).stdin(Stdio::null());
        }
        IoMode::Stdin => {
            cmd.stdin(Stdio::piped());
        }
    }
    let mut child = cmd.spawn().map_err(|e| io_err(&format!("spawning `{command}`"), e))?;

    let feeder = child.stdin.take().map(|mut stdin| {
        let bytes = std::fs::read(&csv_path);
        thread::spawn(move || {
            // A SUT that exits without reading its input is not our error.
            if let Ok(bytes) = bytes {
                let _ = stdin.write_all(&bytes);
            }
        })
    });
    let mut stdout = child.stdout.take().expect("stdout piped");
    let mut stderr = child.stderr.take().expect("stderr piped");
    let out_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stdout.read_to_end(&mut buf);
        buf
    });
    let err_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr.read_to_end(&mut buf);
        buf
    });

    let status = child.wait_timeout(timeout).map_err(|e| io_err("waiting for child", e))?;
    let status = match status {
        Some(s) => s,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Ok(Raw::TimedOut);
        }
    };
    if let Some(f) = feeder {
        let _ = f.join();
    }
    let out = out_reader.join().unwrap_or_default();
    let err = err_reader.join().unwrap_or_default();

    if !status.success() {
        let text = String::from_utf8_lossy(&err);
        let tail: String = text.chars().rev().take(STDERR_TAIL).collect::<Vec<_>>().into_iter().rev().collect();
        let message = match status.code() {
            Some(code) => format!("exit code {code}: {}", tail.trim()),
            None => format!("terminated by signal: {}", tail.trim()),
        };
        return Ok(Raw::Halted { exit_code: status.code(), message });
    }
    Ok(parse_coefficients(&out))
}

/// Whitespace-separated decimals; any token that is not a number makes the
/// whole output non-numeric.
pub(super) fn parse_coefficients(stdout: &[u8]) -> Raw {
    let Ok(text) = std::str::from_utf8(stdout) else {
        return Raw::Unparseable;
    };
    let mut values = Vec::new();
    for tok in text.split_whitespace() {
        match tok.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) => return Raw::Unparseable,
        }
    }
    Raw::Values(values)
}
