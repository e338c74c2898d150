//! Deterministic CSV/JSON writers. Nothing here embeds a timestamp, so
//! reruns with the same config and seed are byte-identical.

use anyhow::{Context, Result};
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use timebin_core::units::angular_to_wavelength;
use timebin_core::SpectralField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

pub struct OutputDir {
    dir: PathBuf,
    pub format: TableFormat,
}

impl OutputDir {
    pub fn create(dir: &Path, format: TableFormat) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let file = File::create(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        let mut writer = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut writer, value)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    /// Writes a table in the selected format. `name` carries no extension;
    /// `.csv` or `.json` is appended.
    pub fn write_table(
        &self,
        name: &str,
        fingerprint: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<PathBuf> {
        match self.format {
            TableFormat::Csv => {
                let path = self.path(&format!("{name}.csv"));
                let file = File::create(&path)
                    .with_context(|| format!("creating {}", path.display()))?;
                let mut w = BufWriter::new(file);
                writeln!(w, "# {fingerprint}")?;
                writeln!(w, "{}", header.join(","))?;
                for row in rows {
                    writeln!(w, "{}", row.join(","))?;
                }
                w.flush()?;
                println!("wrote {}", path.display());
                Ok(path)
            }
            TableFormat::Json => {
                let path = self.path(&format!("{name}.json"));
                let objects: Vec<serde_json::Value> = rows
                    .iter()
                    .map(|row| {
                        let mut map = serde_json::Map::new();
                        for (key, value) in header.iter().zip(row) {
                            let parsed = value
                                .parse::<f64>()
                                .map(|v| {
                                    serde_json::Number::from_f64(v)
                                        .map(serde_json::Value::Number)
                                        .unwrap_or_else(|| serde_json::Value::String(value.clone()))
                                })
                                .unwrap_or_else(|_| serde_json::Value::String(value.clone()));
                            map.insert((*key).to_string(), parsed);
                        }
                        serde_json::Value::Object(map)
                    })
                    .collect();
                let doc = serde_json::json!({
                    "fingerprint": fingerprint,
                    "rows": objects,
                });
                let file = File::create(&path)
                    .with_context(|| format!("creating {}", path.display()))?;
                let mut writer = BufWriter::new(file);
                serde_json::to_writer_pretty(&mut writer, &doc)?;
                writer.write_all(b"\n")?;
                writer.flush()?;
                println!("wrote {}", path.display());
                Ok(path)
            }
        }
    }
}

/// Spectrum rows in ascending wavelength: (wavelength_nm,
/// angular_frequency_rad_s, intensity_normalized).
pub fn spectrum_rows(field: &SpectralField) -> Vec<Vec<String>> {
    let grid = field.grid();
    let intensity = field.intensity();
    (0..grid.count())
        .rev()
        .map(|i| {
            let omega = grid.omega(i);
            let lambda = angular_to_wavelength(omega).unwrap_or(f64::NAN);
            vec![
                format!("{:.9}", lambda * 1e9),
                format!("{:.9e}", omega),
                format!("{:.9e}", intensity[i]),
            ]
        })
        .collect()
}

pub const SPECTRUM_HEADER: [&str; 3] = [
    "wavelength_nm",
    "angular_frequency_rad_s",
    "intensity_normalized",
];
