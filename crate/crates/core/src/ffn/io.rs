use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::model::{Activation, FfnModel, Layer};
use crate::dataset::Normalization;
use crate::error::{Error, Result};

const FORMAT: &str = "mbdnn-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerFile {
    /// Row-major `(fan_in, fan_out)`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    layer_dims: Vec<usize>,
    activation: Activation,
    layers: Vec<LayerFile>,
    #[serde(default)]
    norm: Option<Normalization>,
    #[serde(default)]
    config_fingerprint: Option<String>,
}

pub fn model_to_json(model: &FfnModel) -> String {
    let file = ModelFile {
        format: FORMAT.into(),
        version: MODEL_VERSION,
        layer_dims: model.layer_dims.clone(),
        activation: model.activation,
        layers: model
            .layers
            .iter()
            .map(|l| LayerFile {
                weights: l.weights.iter().copied().collect(),
                bias: l.bias.to_vec(),
            })
            .collect(),
        norm: model.norm.clone(),
        config_fingerprint: model.config_fingerprint.clone(),
    };
    serde_json::to_string(&file).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<FfnModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    if file.format != FORMAT {
        return Err(Error::SchemaMismatch(format!("not a model file: {}", file.format)));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::VersionMismatch {
            found: file.version,
            expected: MODEL_VERSION,
        });
    }
    let dims = &file.layer_dims;
    if dims.len() < 2 || file.layers.len() != dims.len() - 1 {
        return Err(Error::shape(
            format!("{} layers", dims.len().saturating_sub(1)),
            file.layers.len(),
        ));
    }
    let mut layers = Vec::with_capacity(file.layers.len());
    for (lf, w) in file.layers.into_iter().zip(dims.windows(2)) {
        if lf.weights.len() != w[0] * w[1] || lf.bias.len() != w[1] {
            return Err(Error::shape(
                format!("{}x{} weights and {} biases", w[0], w[1], w[1]),
                format!("{} weights and {} biases", lf.weights.len(), lf.bias.len()),
            ));
        }
        layers.push(Layer {
            weights: Array2::from_shape_vec((w[0], w[1]), lf.weights).expect("length checked"),
            bias: Array1::from(lf.bias),
        });
    }
    if let Some(norm) = &file.norm {
        if norm.inputs.len() != dims[0] || norm.labels.len() != dims[dims.len() - 1] {
            return Err(Error::SchemaMismatch("normalization does not match layer dims".into()));
        }
    }
    Ok(FfnModel {
        layer_dims: file.layer_dims,
        layers,
        activation: file.activation,
        norm: file.norm,
        config_fingerprint: file.config_fingerprint,
    })
}

pub fn save_model(model: &FfnModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<FfnModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ColumnStats;
    use crate::ffn::model::init_model;

    fn sample_model() -> FfnModel {
        let mut m = init_model(&[3, 7, 5, 2], Activation::Sigmoid, 21).unwrap();
        m.layers[1].bias[2] = -1.0 / 3.0;
        m.norm = Some(Normalization {
            inputs: vec![ColumnStats { min: 0.1, max: 0.2 }; 3],
            labels: vec![ColumnStats { min: -5.0, max: 5.0 }; 2],
        });
        m.config_fingerprint = Some("abc".into());
        m
    }

    #[test]
    fn save_load_is_bit_exact() {
        let m = sample_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.checksum(), m.checksum());
        let x = [0.12, 0.15, 0.19, 0.2, 0.1, 0.1];
        assert_eq!(back.predict(&x).unwrap(), m.predict(&x).unwrap());
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let json = model_to_json(&sample_model());
        let cut = &json[..json.len() / 2];
        assert!(matches!(model_from_json(cut), Err(Error::Parse { .. })));
    }

    #[test]
    fn version_is_mandatory_and_checked() {
        let json = model_to_json(&sample_model());
        let bumped = json.replace("\"version\":1", "\"version\":2");
        assert!(matches!(
            model_from_json(&bumped),
            Err(Error::VersionMismatch { found: 2, .. })
        ));
        let missing = json.replace("\"version\":1,", "");
        assert!(matches!(model_from_json(&missing), Err(Error::Parse { .. })));
    }

    #[test]
    fn inconsistent_shapes_are_rejected() {
        let json = model_to_json(&sample_model()).replace("[3,7,5,2]", "[3,7,6,2]");
        assert!(matches!(model_from_json(&json), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn missing_file_is_io() {
        assert!(matches!(
            load_model(Path::new("/nonexistent/m.json")),
            Err(Error::Io { .. })
        ));
    }
}
