//! Model files.
//!
//! The default format is a single JSON document. The binary format starts
//! with the magic `QMC1`, then the header JSON length as a little-endian
//! `u64`, the header JSON (the same document without `rho_train`), and
//! finally `ρ_train` row-major as interleaved little-endian `f64` re/im pairs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{QmcError, Result};
use crate::features::{Encoder, EncoderSpec, FeatureScaler, RffProjection};
use crate::qstate::{BipartiteShape, DensityMatrix, C64, HERMITIAN_TOL, TRACE_TOL};
use crate::trainer::{TrainedModel, TrainingMode};

pub const FORMAT_VERSION: u32 = 1;
pub const BINARY_MAGIC: &[u8; 4] = b"QMC1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModelFormat {
    #[default]
    Json,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format_version: u32,
    pub mode: TrainingMode,
    pub encoder: EncoderSpec,
    pub scaler: Option<FeatureScaler>,
    pub rff_projection: Option<RffProjection>,
    pub labels: Vec<String>,
    pub shape: ShapeRecord,
    pub n_train: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeRecord {
    pub k: usize,
    pub l: usize,
}

/// On-disk JSON model: header fields plus `rho_train` as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub header: ModelHeader,
    pub rho_train: Vec<Vec<[f64; 2]>>,
}

fn header_of(model: &TrainedModel) -> ModelHeader {
    ModelHeader {
        format_version: FORMAT_VERSION,
        mode: model.mode,
        encoder: model.encoder.spec.clone(),
        scaler: model.encoder.scaler.clone(),
        rff_projection: model.encoder.projection.clone(),
        labels: model.labels.clone(),
        shape: ShapeRecord {
            k: model.shape.dim_x,
            l: model.shape.dim_y,
        },
        n_train: model.n_train,
    }
}

impl ModelFile {
    pub fn from_model(model: &TrainedModel) -> Self {
        let d = model.rho.dim();
        let rho_train = (0..d)
            .map(|i| {
                model.rho.matrix().row(i).iter().map(|z| [z.re, z.im]).collect()
            })
            .collect();
        Self {
            header: header_of(model),
            rho_train,
        }
    }

    pub fn into_model(self) -> Result<TrainedModel> {
        let d = self.rho_train.len();
        let mut entries = Vec::with_capacity(d * d);
        for row in &self.rho_train {
            if row.len() != d {
                return Err(QmcError::Model(format!("rho_train row of length {} in a {d}×{d} matrix", row.len())));
            }
            entries.extend(row.iter().map(|&[re, im]| C64::new(re, im)));
        }
        assemble(self.header, entries)
    }
}

fn assemble(header: ModelHeader, entries: Vec<C64>) -> Result<TrainedModel> {
    if header.format_version != FORMAT_VERSION {
        return Err(QmcError::Model(format!(
            "unsupported format version {}",
            header.format_version
        )));
    }
    header.encoder.validate()?;
    let shape = BipartiteShape::new(header.shape.k, header.shape.l)?;
    if header.encoder.input_dim() != shape.dim_x {
        return Err(QmcError::Model(format!(
            "encoder dimension {} does not match k = {}",
            header.encoder.input_dim(),
            shape.dim_x
        )));
    }
    if header.labels.len() != shape.dim_y {
        return Err(QmcError::Model(format!(
            "{} labels for ℓ = {}",
            header.labels.len(),
            shape.dim_y
        )));
    }
    if header.encoder.map.scaling_target().is_some() != header.scaler.is_some() {
        return Err(QmcError::Model("scaler presence does not match encoder".into()));
    }
    if entries.len() != shape.dim() * shape.dim() {
        return Err(QmcError::Model(format!(
            "rho_train has {} entries, expected {}",
            entries.len(),
            shape.dim() * shape.dim()
        )));
    }
    let rho = DensityMatrix::from_entries(shape.dim(), entries)?;
    // eigenvalues are too costly for large models; checked via TrainedModel::validate
    let defect = rho.matrix().hermiticity_defect();
    if defect > HERMITIAN_TOL || (rho.trace() - 1.0).abs() > TRACE_TOL {
        return Err(QmcError::Model(format!(
            "rho_train is not a density matrix (hermiticity defect {defect:e}, trace {})",
            rho.trace()
        )));
    }
    Ok(TrainedModel {
        rho,
        shape,
        encoder: Encoder {
            spec: header.encoder,
            scaler: header.scaler,
            projection: header.rff_projection,
        },
        labels: header.labels,
        mode: header.mode,
        n_train: header.n_train,
    })
}

pub fn write_model_to(model: &TrainedModel, format: ModelFormat, mut out: impl Write) -> Result<()> {
    let io = |e| QmcError::io("<model stream>", e);
    match format {
        ModelFormat::Json => {
            serde_json::to_writer(&mut out, &ModelFile::from_model(model))?;
            out.write_all(b"\n").map_err(io)?;
        }
        ModelFormat::Binary => {
            let header = serde_json::to_vec(&header_of(model))?;
            out.write_all(BINARY_MAGIC).map_err(io)?;
            out.write_all(&(header.len() as u64).to_le_bytes()).map_err(io)?;
            out.write_all(&header).map_err(io)?;
            for z in model.rho.entries() {
                out.write_all(&z.re.to_le_bytes()).map_err(io)?;
                out.write_all(&z.im.to_le_bytes()).map_err(io)?;
            }
        }
    }
    out.flush().map_err(io)
}

/// Reads either format, detected from the leading bytes.
pub fn read_model_from(mut input: impl Read) -> Result<TrainedModel> {
    let io = |e| QmcError::io("<model stream>", e);
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(io)?;
    if let Some(rest) = bytes.strip_prefix(BINARY_MAGIC) {
        if rest.len() < 8 {
            return Err(QmcError::Model("truncated binary header".into()));
        }
        let (len, rest) = rest.split_at(8);
        let len = usize::try_from(u64::from_le_bytes(len.try_into().expect("8 bytes")))
            .map_err(|_| QmcError::Model("header length overflows".into()))?;
        if rest.len() < len {
            return Err(QmcError::Model("truncated binary header".into()));
        }
        let header: ModelHeader = serde_json::from_slice(&rest[..len])?;
        let payload = &rest[len..];
        if payload.len() % 16 != 0 {
            return Err(QmcError::Model("binary payload is not a whole number of complex entries".into()));
        }
        let entries = payload
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                C64::new(re, im)
            })
            .collect();
        assemble(header, entries)
    } else {
        serde_json::from_slice::<ModelFile>(&bytes)?.into_model()
    }
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>, format: ModelFormat) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| QmcError::io(path, e))?;
    write_model_to(model, format, BufWriter::new(file))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| QmcError::io(path, e))?;
    read_model_from(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, DatasetKind};
    use crate::features::FeatureMap;
    use crate::trainer::fit;

    fn model(map: FeatureMap, mode: TrainingMode) -> TrainedModel {
        let data = generate(DatasetKind::Moons, 40, 0.1, 8).unwrap();
        fit(&data, EncoderSpec::new(map, 2).unwrap(), mode).unwrap()
    }

    #[test]
    fn json_roundtrip_is_exact() {
        for (map, mode) in [
            (FeatureMap::Coherent { dim: 4, gamma: 7.0 }, TrainingMode::Mixed),
            (FeatureMap::Rff { dim: 9, gamma: 2.0, seed: 5 }, TrainingMode::Pure),
            (FeatureMap::Squeezed { dim: 3, r: 2.5 }, TrainingMode::Classical),
        ] {
            let m = model(map, mode);
            let mut buf = Vec::new();
            write_model_to(&m, ModelFormat::Json, &mut buf).unwrap();
            assert_eq!(read_model_from(buf.as_slice()).unwrap(), m);
        }
    }

    #[test]
    fn binary_roundtrip_is_exact() {
        let m = model(FeatureMap::Softmax { dim: 3, beta: 70.0 }, TrainingMode::Mixed);
        let mut buf = Vec::new();
        write_model_to(&m, ModelFormat::Binary, &mut buf).unwrap();
        assert_eq!(&buf[..4], BINARY_MAGIC);
        let header_len = u64::from_le_bytes(buf[4..12].try_into().unwrap()) as usize;
        assert_eq!(buf.len(), 12 + header_len + 16 * m.shape.dim() * m.shape.dim());
        assert_eq!(read_model_from(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn json_layout() {
        let m = model(FeatureMap::Coherent { dim: 3, gamma: 1.0 }, TrainingMode::Mixed);
        let value = serde_json::to_value(ModelFile::from_model(&m)).unwrap();
        assert_eq!(value["format_version"], 1);
        assert_eq!(value["mode"], "mixed");
        assert_eq!(value["encoder"]["kind"], "coherent");
        assert_eq!(value["shape"]["k"], 9);
        assert_eq!(value["shape"]["l"], 2);
        assert_eq!(value["rho_train"].as_array().unwrap().len(), 18);
        assert_eq!(value["rho_train"][0][0].as_array().unwrap().len(), 2);
    }

    #[test]
    fn corrupted_models_are_rejected() {
        let m = model(FeatureMap::Softmax { dim: 2, beta: 1.0 }, TrainingMode::Mixed);
        let mut file = ModelFile::from_model(&m);
        file.rho_train[0][0][0] += 0.5;
        assert!(matches!(file.into_model(), Err(QmcError::Model(_))));

        let mut file = ModelFile::from_model(&m);
        file.header.labels.pop();
        assert!(matches!(file.into_model(), Err(QmcError::Model(_))));

        let mut file = ModelFile::from_model(&m);
        file.header.format_version = 99;
        assert!(matches!(file.into_model(), Err(QmcError::Model(_))));

        let mut buf = Vec::new();
        write_model_to(&m, ModelFormat::Binary, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_model_from(buf.as_slice()).is_err());
    }
}
