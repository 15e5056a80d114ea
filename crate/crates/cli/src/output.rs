//! CSV and JSON writers. Floats in CSV use 17 significant digits.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use impulse_core::ergodic::TraceRow;
use impulse_core::model::MarkovModel;

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Square matrix with a header row of state labels; the first column repeats them.
pub fn matrix_csv(model: &MarkovModel, rows: &[Vec<f64>]) -> String {
    let mut out = String::from("state");
    for l in model.labels() {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        out.push_str(model.label(i));
        for v in row {
            out.push(',');
            out.push_str(&num(*v));
        }
        out.push('\n');
    }
    out
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("m,alpha,lambda,residual,gap\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.m, num(r.alpha), num(r.lambda), num(r.residual), num(r.gap));
    }
    out
}

/// Collects the files a command writes, so they can be listed afterwards.
pub struct OutDir {
    dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn text(&mut self, name: &str, body: &str) -> std::io::Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, body)?;
        self.written.push(path);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let mut body = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        body.push('\n');
        self.text(name, &body)
    }
}
