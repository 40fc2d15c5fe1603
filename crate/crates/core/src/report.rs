//! Correlation tables, their CSV form, and decay-plot data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::{Error, Result};

/// One comparison `|measured - target|` with its certified radius.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub j: usize,
    pub k: usize,
    pub m: i64,
    pub sigma_shifted: f64,
    pub sigma_target: f64,
    pub error: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CorrelationTable {
    pub rows: Vec<CorrelationRow>,
}

/// Fixed 17-significant-digit float text used in every artifact.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl CorrelationTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn extend(&mut self, other: CorrelationTable) {
        self.rows.extend(other.rows);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,k,m,sigma_shifted,sigma_target,error,radius\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.j,
                r.k,
                r.m,
                fmt_f64(r.sigma_shifted),
                fmt_f64(r.sigma_target),
                fmt_f64(r.error),
                fmt_f64(r.radius)
            );
        }
        out
    }

    /// Per `k`, the largest error over `m` for each `j`; an error below its
    /// certified radius is shown as the radius.
    pub fn plot_data(&self) -> Result<String> {
        if self.rows.is_empty() {
            return Err(Error::EmptyTable);
        }
        let js: Vec<usize> = {
            let mut v: Vec<usize> = self.rows.iter().map(|r| r.j).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let mut worst: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
        for r in &self.rows {
            let shown = r.error.max(r.radius);
            let slot = worst.entry(r.k).or_default().entry(r.j).or_insert(0.0);
            if shown > *slot {
                *slot = shown;
            }
        }
        let mut out = String::from("# k");
        for j in &js {
            let _ = write!(out, " max_err_j{j}");
        }
        out.push('\n');
        for (k, per_j) in &worst {
            let _ = write!(out, "{k}");
            for j in &js {
                match per_j.get(j) {
                    Some(v) => {
                        let _ = write!(out, " {}", fmt_f64(*v));
                    }
                    None => out.push_str(" nan"),
                }
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// Writes [`CorrelationTable::plot_data`] to `path`.
pub fn emit_plotdata(table: &CorrelationTable, path: &Path) -> Result<()> {
    let text = table.plot_data()?;
    std::fs::write(path, text)?;
    Ok(())
}
