use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, Normalization, Provenance, Schema, Structure};
use crate::error::{Error, Result};

const FORMAT: &str = "mbdnn-dataset";
const VERSION: u32 = 1;

/// Contents of the `.meta.json` sidecar written next to each dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format: String,
    pub version: u32,
    #[serde(flatten)]
    pub structure: Structure,
    pub inputs: Vec<String>,
    pub labels: Vec<String>,
    /// Refitted from the rows when absent.
    #[serde(default)]
    pub norm: Option<Normalization>,
    #[serde(default)]
    pub provenance: Provenance,
    #[serde(default)]
    pub rows: Option<usize>,
}

/// `data/train.csv` -> `data/train.meta.json`.
pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let io_err = |e: csv::Error| Error::io(path, e.into());

    w.write_record(ds.schema.inputs.iter().chain(&ds.schema.labels))
        .map_err(io_err)?;
    let mut record: Vec<String> = Vec::with_capacity(ds.input_dim() + ds.label_dim());
    for i in 0..ds.len() {
        record.clear();
        // `{}` on f64 prints the shortest string that parses back to the same bits.
        record.extend(ds.input_row(i).iter().chain(ds.label_row(i)).map(|v| v.to_string()));
        w.write_record(&record).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let meta = DatasetMeta {
        format: FORMAT.into(),
        version: VERSION,
        structure: ds.structure,
        inputs: ds.schema.inputs.clone(),
        labels: ds.schema.labels.clone(),
        norm: Some(ds.norm.clone()),
        provenance: ds.provenance.clone(),
        rows: Some(ds.len()),
    };
    let meta_file = meta_path(path);
    let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    let mut f = File::create(&meta_file).map_err(|e| Error::io(&meta_file, e))?;
    f.write_all(json.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| Error::io(&meta_file, e))
}

pub fn read_meta(path: &Path) -> Result<DatasetMeta> {
    let meta_file = meta_path(path);
    let f = File::open(&meta_file).map_err(|e| Error::io(&meta_file, e))?;
    let meta: DatasetMeta = serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", meta_file.display()),
    })?;
    if meta.format != FORMAT {
        return Err(Error::SchemaMismatch(format!("not a dataset sidecar: {}", meta.format)));
    }
    if meta.version != VERSION {
        return Err(Error::VersionMismatch {
            found: meta.version,
            expected: VERSION,
        });
    }
    Ok(meta)
}

pub fn read_csv(path: &Path) -> Result<Dataset> {
    let meta = read_meta(path)?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(BufReader::new(file));

    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    let expected: Vec<String> = meta.inputs.iter().chain(&meta.labels).cloned().collect();
    if header != expected {
        return Err(Error::SchemaMismatch(format!(
            "header {header:?} does not match sidecar columns {expected:?}"
        )));
    }

    let (di, width) = (meta.inputs.len(), expected.len());
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} columns, found {}", record.len()),
            });
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("column `{}`: cannot parse `{field}`", expected[c]),
            })?;
            if c < di {
                inputs.push(v);
            } else {
                labels.push(v);
            }
        }
    }

    let schema = Schema {
        inputs: meta.inputs,
        labels: meta.labels,
    };
    let mut ds = Dataset::new(schema, meta.structure, inputs, labels)?;
    if let Some(rows) = meta.rows {
        if rows != ds.len() {
            return Err(Error::SchemaMismatch(format!(
                "sidecar declares {rows} rows, file has {}",
                ds.len()
            )));
        }
    }
    if let Some(norm) = meta.norm {
        ds = ds.with_norm(norm)?;
    }
    Ok(ds.with_provenance(meta.provenance))
}
