use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};

use stable_wavelet::estimators::EstimateResult;
use stable_wavelet::harness::McReport;
use stable_wavelet::io::{fmt_real, grid_csv, write_json, write_path_csv};
use stable_wavelet::lfsm::WaveletCoefGrid;
use stable_wavelet::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

pub struct Output {
    dir: PathBuf,
    format: Format,
}

fn envelope(command: &str, seed: Option<u64>, config: &impl Serialize) -> Value {
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": seed,
        "config": serde_json::to_value(config).unwrap_or(Value::Null),
    })
}

fn with(mut base: Value, key: &str, v: Value) -> Value {
    base[key] = v;
    base
}

impl Output {
    pub fn new(dir: &Path, format: Format) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
        })
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn announce(&self, p: &Path) {
        eprintln!("wrote {}", p.display());
    }

    /// `<name>.csv` with a `<name>.json` sidecar.
    pub fn path(
        &self,
        name: &str,
        x: &[f64],
        command: &str,
        seed: u64,
        config: &impl Serialize,
        extra: Value,
    ) -> Result<()> {
        let csv = self.file(&format!("{name}.csv"));
        write_path_csv(&csv, x)?;
        let side = with(envelope(command, Some(seed), config), "path", extra);
        let side = with(side, "samples", json!(x.len()));
        let json_path = self.file(&format!("{name}.json"));
        write_json(&json_path, &side)?;
        self.announce(&csv);
        Ok(())
    }

    pub fn grid(
        &self,
        name: &str,
        grid: &WaveletCoefGrid,
        command: &str,
        seed: u64,
        config: &impl Serialize,
    ) -> Result<()> {
        let csv = self.file(&format!("{name}.csv"));
        fs::write(&csv, grid_csv(grid))?;
        let meta = serde_json::to_value(&grid.meta).unwrap_or(Value::Null);
        let side = with(envelope(command, Some(seed), config), "meta", meta);
        write_json(&self.file(&format!("{name}.json")), &side)?;
        self.announce(&csv);
        Ok(())
    }

    pub fn estimate(&self, name: &str, est: &EstimateResult, config: &impl Serialize) -> Result<()> {
        let result = serde_json::to_value(est).unwrap_or(Value::Null);
        let doc = with(envelope("estimate", None, config), "result", result);
        let p = self.file(&format!("{name}.json"));
        write_json(&p, &doc)?;
        self.announce(&p);
        if self.format == Format::Csv {
            let mut s = String::from("j,n,y,w\n");
            for i in 0..est.j.len() {
                let _ = writeln!(s, "{},{},{},{}", est.j[i], est.n[i], fmt_real(est.y[i]), fmt_real(est.w[i]));
            }
            let p = self.file(&format!("{name}.csv"));
            fs::write(&p, s)?;
            self.announce(&p);
        }
        Ok(())
    }

    pub fn json(&self, name: &str, command: &str, seed: Option<u64>, config: &impl Serialize, result: Value) -> Result<()> {
        let doc = with(envelope(command, seed, config), "result", result);
        let p = self.file(&format!("{name}.json"));
        write_json(&p, &doc)?;
        self.announce(&p);
        Ok(())
    }

    /// `<name>_report.json`, plus `<name>_samples.csv` when the run kept
    /// per-replicate statistics and `<name>_rows.csv` in csv format.
    pub fn report(&self, name: &str, report: &McReport) -> Result<()> {
        let body = serde_json::to_value(report).unwrap_or(Value::Null);
        let mut doc = envelope(name, Some(report.seed), &report.config);
        doc["report"] = body;
        let p = self.file(&format!("{name}_report.json"));
        write_json(&p, &doc)?;
        self.announce(&p);
        if !report.samples.is_empty() {
            let p = self.file(&format!("{name}_samples.csv"));
            fs::write(&p, report.samples_csv())?;
            self.announce(&p);
        }
        if self.format == Format::Csv {
            let mut s = String::from("label,N,count,mean,variance,ad_p\n");
            for r in &report.rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    r.label,
                    r.n.map(|n| n.to_string()).unwrap_or_default(),
                    r.count,
                    fmt_real(r.mean),
                    fmt_real(r.variance),
                    r.ad.as_ref().map(|a| fmt_real(a.p_value)).unwrap_or_default()
                );
            }
            let p = self.file(&format!("{name}_rows.csv"));
            fs::write(&p, s)?;
            self.announce(&p);
        }
        Ok(())
    }
}
