//! Checkpoint files: JSON with nested row-major weight arrays.

use serde::{Deserialize, Serialize};

use super::{IcnnError, IcnnModel, InputScaler, Layer, Matrix, NetConfig, OutputLayer, OutputScaler};
use crate::jsonfmt;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Scalers {
    input: InputScaler,
    output: OutputScaler,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    w: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    d: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputFile {
    w: Vec<f64>,
    h: Vec<f64>,
    d: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    schema_version: u32,
    cfg: NetConfig,
    scalers: Scalers,
    layers: Vec<LayerFile>,
    output: OutputFile,
    /// Attests that the constrained weights are nonnegative.
    convex: bool,
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows).map(|i| m.row(i).to_vec()).collect()
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> IcnnError {
    IcnnError::Schema { path: path.into(), message: message.into() }
}

fn matrix(rows: Vec<Vec<f64>>, shape: (usize, usize), path: String) -> Result<Matrix, IcnnError> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(schema(path, format!("expected a {}x{} array", shape.0, shape.1)));
    }
    Ok(Matrix { rows: shape.0, cols: shape.1, data: rows.into_iter().flatten().collect() })
}

impl IcnnModel {
    pub fn save(&self) -> String {
        let file = CheckpointFile {
            schema_version: CHECKPOINT_VERSION,
            cfg: self.cfg.clone(),
            scalers: Scalers { input: self.input_scaler.clone(), output: self.output_scaler },
            layers: self.layers.iter().map(|l| LayerFile { w: rows(&l.w), h: rows(&l.h), d: l.d.clone() }).collect(),
            output: OutputFile { w: self.output.w.clone(), h: self.output.h.clone(), d: self.output.d },
            convex: self.cfg.convex,
        };
        jsonfmt::to_document(&file).expect("checkpoint serializes")
    }

    pub fn load(text: &str) -> Result<Self, IcnnError> {
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| schema("$", e.to_string()))?;
        match raw.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == CHECKPOINT_VERSION as u64 => {}
            Some(v) => return Err(IcnnError::UnsupportedVersion(v.try_into().unwrap_or(u32::MAX))),
            None => return Err(schema("schema_version", "missing or not an integer")),
        }
        let file: CheckpointFile = serde_json::from_value(raw).map_err(|e| schema("$", e.to_string()))?;
        let cfg = file.cfg;
        cfg.validate()?;
        if file.convex != cfg.convex {
            return Err(schema("convex", "attestation disagrees with cfg.convex"));
        }
        if file.layers.len() != cfg.widths.len() {
            return Err(schema("layers", format!("expected {} layers", cfg.widths.len())));
        }
        let n = cfg.input_dim;
        let mut layers = Vec::with_capacity(file.layers.len());
        let mut prev = 0;
        for (k, (l, &width)) in file.layers.into_iter().zip(&cfg.widths).enumerate() {
            let w = matrix(l.w, (width, prev), format!("layers[{k}].w"))?;
            let h = matrix(l.h, (width, n), format!("layers[{k}].h"))?;
            if l.d.len() != width {
                return Err(schema(format!("layers[{k}].d"), format!("expected length {width}")));
            }
            layers.push(Layer { w, h, d: l.d });
            prev = width;
        }
        let skip = if cfg.output_skip { n } else { 0 };
        if file.output.w.len() != prev {
            return Err(schema("output.w", format!("expected length {prev}")));
        }
        if file.output.h.len() != skip {
            return Err(schema("output.h", format!("expected length {skip}")));
        }
        let model = IcnnModel {
            cfg,
            layers,
            output: OutputLayer { w: file.output.w, h: file.output.h, d: file.output.d },
            input_scaler: file.scalers.input,
            output_scaler: file.scalers.output,
        };
        if model.params().iter().any(|v| !v.is_finite()) {
            return Err(schema("layers", "non-finite weight"));
        }
        model.validate()?;
        Ok(model)
    }
}
