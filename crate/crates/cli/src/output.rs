//! JSON result documents and CSV tables.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use halfeig_core::mesh::{Grid, GridFunction};

/// A number together with the tolerance it was computed to.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Measured<T> {
    pub value: T,
    pub tol: f64,
}

pub fn measured(value: f64, tol: f64) -> Measured<f64> {
    Measured { value, tol }
}

/// Counts, indices and other exact integers.
pub fn exact(value: usize) -> Measured<usize> {
    Measured { value, tol: 0.0 }
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
        })
    }

    pub fn write_json(&self, name: &str, doc: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(doc)?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Grid function as `x[,y],value`, one row per node in grid order.
    pub fn write_grid_function(&self, name: &str, grid: &Grid, u: &GridFunction) -> Result<()> {
        let header: &[&str] = if grid.dim() == 1 { &["x", "value"] } else { &["x", "y", "value"] };
        let rows = (0..grid.len()).map(|k| {
            let p = grid.point(k);
            let mut row: Vec<String> = p[..grid.dim()].iter().map(|v| v.to_string()).collect();
            row.push(u[k].to_string());
            row
        });
        self.write_table(name, header, rows)
    }

    pub fn write_table(
        &self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<()> {
        let path = self.root.join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}
