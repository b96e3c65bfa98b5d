//! Output writers. CSV floats are printed with 17 significant digits so
//! values round-trip exactly; JSON goes through serde_json, whose float
//! encoding is also round-trip exact.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub fn fmt_f64(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        // keep integers readable; still exact
        format!("{v:.1}")
    } else {
        format!("{v:.16e}")
    }
}

pub struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> std::io::Result<PathBuf> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }

    /// Writes rows either as CSV or as a JSON array of objects, per the
    /// requested format; returns the file path.
    pub fn write_table(
        &self,
        stem: &str,
        format: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> std::io::Result<PathBuf> {
        if format == "json" {
            let objects: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    header
                        .iter()
                        .zip(row)
                        .map(|(k, v)| {
                            let value = v
                                .parse::<f64>()
                                .map(|f| {
                                    serde_json::Number::from_f64(f)
                                        .map(serde_json::Value::Number)
                                        .unwrap_or(serde_json::Value::String(v.clone()))
                                })
                                .unwrap_or(serde_json::Value::String(v.clone()));
                            ((*k).to_string(), value)
                        })
                        .collect::<serde_json::Map<_, _>>()
                        .into()
                })
                .collect();
            return self.write_json(&format!("{stem}.json"), &objects);
        }
        let path = self.path(&format!("{stem}.csv"));
        let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(file, "{}", header.join(","))?;
        for row in rows {
            writeln!(file, "{}", row.join(","))?;
        }
        file.flush()?;
        Ok(path)
    }
}
