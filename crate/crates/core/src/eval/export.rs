use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::metrics::MetricReport;
use super::predict::{PredictedTrajectory, Predictor};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::mbd::Trajectory;

const KIND: &str = "kind";

/// Writes paired label/prediction columns per output, one row per sample,
/// followed by `r2` and `mse` summary rows. Returns the metrics written.
pub fn write_scatter<S: AsRef<str>>(
    names: &[S],
    labels: &[f64],
    predictions: &[f64],
    path: &Path,
) -> Result<MetricReport> {
    let report = MetricReport::compute(names, labels, predictions)?;
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(f));
    let io = |e: csv::Error| Error::io(path, e.into());

    let mut header = vec![KIND.to_owned()];
    for n in names {
        header.push(format!("{}_label", n.as_ref()));
        header.push(format!("{}_prediction", n.as_ref()));
    }
    w.write_record(&header).map_err(io)?;
    let width = names.len();
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for (l, p) in labels.chunks_exact(width).zip(predictions.chunks_exact(width)) {
        rec.clear();
        rec.push("point".into());
        for (a, b) in l.iter().zip(p) {
            rec.push(a.to_string());
            rec.push(b.to_string());
        }
        w.write_record(&rec).map_err(io)?;
    }
    let r2: Vec<String> = report
        .columns
        .iter()
        .map(|c| c.r2.map_or_else(String::new, |v| v.to_string()))
        .collect();
    let mse: Vec<String> = report.columns.iter().map(|c| c.mse.to_string()).collect();
    for (kind, values) in [("r2", r2), ("mse", mse)] {
        rec.clear();
        rec.push(kind.into());
        for v in values {
            rec.push(v);
            rec.push(String::new());
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(report)
}

/// Predicts every test row with `predictor` and writes the scatter file.
pub fn scatter_export(predictor: Predictor<'_>, test: &Dataset, path: &Path) -> Result<MetricReport> {
    let pred = predictor.predict_dataset(test)?;
    write_scatter(&test.schema.labels, test.labels(), &pred, path)
}

/// Recomputes the metrics from the sample rows of a scatter file.
pub fn read_scatter(path: &Path) -> Result<MetricReport> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(BufReader::new(f));
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.first().map(String::as_str) != Some(KIND) || header.len() % 2 != 1 {
        return Err(Error::SchemaMismatch(format!("not a scatter file header: {header:?}")));
    }
    let names: Vec<String> = header[1..]
        .chunks(2)
        .map(|p| {
            p[0].strip_suffix("_label")
                .map(str::to_owned)
                .ok_or_else(|| Error::SchemaMismatch(format!("unexpected column `{}`", p[0])))
        })
        .collect::<Result<_>>()?;
    let (mut labels, mut preds) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        if rec.get(0) != Some("point") {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line() as usize);
        for (c, field) in rec.iter().enumerate().skip(1) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse `{field}`"),
            })?;
            if c % 2 == 1 {
                labels.push(v);
            } else {
                preds.push(v);
            }
        }
    }
    MetricReport::compute(&names, &labels, &preds)
}

/// Columns `t`, every label, then every prediction (`<name>_pred`).
pub fn trajectory_export(pt: &PredictedTrajectory, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(f));
    let io = |e: csv::Error| Error::io(path, e.into());
    let mut header = vec!["t".to_owned()];
    header.extend(pt.label_names.iter().cloned());
    header.extend(pt.label_names.iter().map(|n| format!("{n}_pred")));
    w.write_record(&header).map_err(io)?;
    let width = pt.width();
    for (i, t) in pt.times.iter().enumerate() {
        let row = std::iter::once(*t)
            .chain(pt.labels[i * width..(i + 1) * width].iter().copied())
            .chain(pt.predictions[i * width..(i + 1) * width].iter().copied())
            .map(|v| v.to_string());
        w.write_record(row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Simulator output: `t` followed by one column per label.
pub fn write_trajectory<S: AsRef<str>>(traj: &Trajectory, names: &[S], path: &Path) -> Result<()> {
    if names.len() != traj.width {
        return Err(Error::shape(format!("{} column names", traj.width), names.len()));
    }
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(f));
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(std::iter::once("t").chain(names.iter().map(AsRef::as_ref)))
        .map_err(io)?;
    for (t, row) in traj.times.iter().zip(traj.rows()) {
        w.write_record(std::iter::once(t).chain(row).map(f64::to_string))
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::io(path, e.into()))?;
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| Error::io(path, e))
}
