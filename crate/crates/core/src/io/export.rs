//! Display PNGs, CSV tables and line-delimited JSON records.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Image;
use crate::metrics::capped;
use crate::solver::TraceRow;

/// 8-bit grayscale PNG with the linear window `[0, 1]`.
pub fn write_png(path: &Path, img: &Image) -> Result<()> {
    let n = img.width() as u32;
    let file = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(file, n, n);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header().map_err(|e| Error::Format(e.to_string()))?;
    let bytes: Vec<u8> = img.as_slice().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    w.write_image_data(&bytes).map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r).map_err(|e| Error::Format(e.to_string()))?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|p| format!("{}", capped(p))).unwrap_or_default()
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "iter,step_type,Q,F,psnr")?;
    for r in rows {
        writeln!(f, "{},{},{},{},{}", r.iter, r.step, r.q, r.f, opt(r.psnr))?;
    }
    f.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub id: String,
    pub method: String,
    pub psnr: f64,
    pub ssim: f64,
    pub mae: f64,
}

/// Per-row metrics followed by one `mean` row per method, in order of
/// first appearance.
pub fn write_metrics_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "id,method,psnr,ssim,mae")?;
    for r in rows {
        writeln!(f, "{},{},{},{},{}", r.id, r.method, capped(r.psnr), r.ssim, r.mae)?;
    }
    for m in mean_rows(rows) {
        writeln!(f, "{},{},{},{},{}", m.id, m.method, capped(m.psnr), m.ssim, m.mae)?;
    }
    f.flush()?;
    Ok(())
}

/// Averages per method; PSNR is averaged after capping.
pub fn mean_rows(rows: &[MetricRow]) -> Vec<MetricRow> {
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let sel: Vec<&MetricRow> = rows.iter().filter(|r| r.method == m).collect();
            let k = sel.len() as f64;
            MetricRow {
                id: "mean".into(),
                method: m.to_string(),
                psnr: sel.iter().map(|r| capped(r.psnr)).sum::<f64>() / k,
                ssim: sel.iter().map(|r| r.ssim).sum::<f64>() / k,
                mae: sel.iter().map(|r| r.mae).sum::<f64>() / k,
            }
        })
        .collect()
}
