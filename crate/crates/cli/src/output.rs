//! Output files with a provenance header.

use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn header(&self) -> String {
        format!(
            "diracloc {} command={} config={} seed={}",
            VERSION, self.command, self.config_hash, self.seed
        )
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        x.to_string()
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NaN".into(), num)
}

pub struct Writer {
    dir: PathBuf,
    prov: Provenance,
    written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(dir: &Path, prov: Provenance) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            prov,
            written: Vec::new(),
        })
    }

    pub fn provenance(&self) -> &Provenance {
        &self.prov
    }

    pub fn csv(
        &mut self,
        name: &str,
        headers: &[&str],
        rows: &[Vec<String>],
    ) -> std::io::Result<()> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path)?;
        writeln!(f, "# {}", self.prov.header())?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(headers).map_err(std::io::Error::other)?;
        for r in rows {
            w.write_record(r).map_err(std::io::Error::other)?;
        }
        w.flush()?;
        self.written.push(path);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> std::io::Result<()> {
        let mut value = serde_json::to_value(body).map_err(std::io::Error::other)?;
        if let serde_json::Value::Object(map) = &mut value {
            map.insert("config_hash".into(), self.prov.config_hash.clone().into());
            map.insert("seed".into(), self.prov.seed.into());
            map.insert("version".into(), VERSION.into());
            map.insert("command".into(), self.prov.command.into());
        }
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(&value).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(&path, text)?;
        self.written.push(path);
        Ok(())
    }

    pub fn svg(&mut self, name: &str, body: &str) -> std::io::Result<()> {
        let path = self.dir.join(name);
        let text = body.replacen(
            "<svg ",
            &format!("<!-- {} -->\n<svg ", self.prov.header()),
            1,
        );
        fs::write(&path, text)?;
        self.written.push(path);
        Ok(())
    }

    pub fn into_written(self) -> Vec<PathBuf> {
        self.written
    }
}
