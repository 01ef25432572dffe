//! Tensor and component files.
//!
//! A file is one JSON object with a fixed key order:
//!
//! ```text
//! {"format_version":1,"kind":"components","n":4,"m":2,"ensemble":"sphere-uniform",
//!  "seed":7,"noise_norm":0.0,"data":"<base64>","noise":"<base64>"}
//! ```
//!
//! `data` holds little-endian `f64`s: the row-major `m x n` component matrix
//! for `kind = "components"`, or the `n³` entries in lexicographic `(i,j,k)`
//! order for `kind = "dense"`. `noise` (components only, optional) is a dense
//! tensor in the same layout. Files are written compactly with a trailing
//! newline, so parsing and re-serializing a written file is byte-identical.

use std::path::Path;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::tensor::{ComponentSet, DenseTensor, Ensemble, Storage, SymmetricTensor3};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileKind {
    Components,
    Dense,
}

// field order here is the on-disk key order
#[derive(Serialize)]
struct Wire<'a> {
    format_version: u64,
    kind: FileKind,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ensemble: Option<&'a str>,
    seed: u64,
    noise_norm: f64,
    data: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub kind: FileKind,
    pub n: usize,
    pub m: Option<usize>,
    pub ensemble: Option<Ensemble>,
    pub seed: u64,
    /// Spectral norm of the noise unfolding, 0 without noise.
    pub noise_norm: f64,
    pub data: Vec<f64>,
    pub noise: Option<Vec<f64>>,
}

fn encode(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    STANDARD.encode(bytes)
}

fn decode(field: &str, text: &str, expected: usize) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| Error::format(field, format!("invalid base64: {e}")))?;
    if bytes.len() != expected * 8 {
        return Err(Error::format(
            field,
            format!(
                "expected {expected} values ({} bytes), found {} bytes",
                expected * 8,
                bytes.len()
            ),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<&'a Value> {
    obj.get(name).ok_or_else(|| Error::format(name, "missing"))
}

fn as_u64(obj: &Map<String, Value>, name: &str) -> Result<u64> {
    field(obj, name)?
        .as_u64()
        .ok_or_else(|| Error::format(name, "expected a nonnegative integer"))
}

fn as_str<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<&'a str> {
    field(obj, name)?
        .as_str()
        .ok_or_else(|| Error::format(name, "expected a string"))
}

const KNOWN_FIELDS: [&str; 9] = [
    "format_version",
    "kind",
    "n",
    "m",
    "ensemble",
    "seed",
    "noise_norm",
    "data",
    "noise",
];

impl TensorFile {
    pub fn from_tensor(tensor: &SymmetricTensor3) -> Self {
        match tensor.storage() {
            Storage::Dense(d) => TensorFile {
                kind: FileKind::Dense,
                n: d.n(),
                m: None,
                ensemble: None,
                seed: 0,
                noise_norm: 0.0,
                data: d.data().to_vec(),
                noise: None,
            },
            Storage::Components { set, noise } => TensorFile {
                kind: FileKind::Components,
                n: set.n(),
                m: Some(set.m()),
                ensemble: Some(set.ensemble()),
                seed: set.seed(),
                noise_norm: noise.as_ref().map(|e| e.unfolding_norm()).unwrap_or(0.0),
                data: set.vectors().transpose().iter().copied().collect(),
                noise: noise.as_ref().map(|e| e.data().to_vec()),
            },
        }
    }

    pub fn from_components(set: &ComponentSet) -> Self {
        Self::from_tensor(&SymmetricTensor3::from_components(set.clone()))
    }

    /// Raw component matrix without the unit-norm check.
    pub fn component_matrix(&self) -> Result<DMatrix<f64>> {
        match (self.kind, self.m) {
            (FileKind::Components, Some(m)) => Ok(DMatrix::from_row_slice(m, self.n, &self.data)),
            _ => Err(Error::format("kind", "file does not hold components")),
        }
    }

    /// Validated component set.
    pub fn to_components(&self) -> Result<ComponentSet> {
        ComponentSet::new(
            self.component_matrix()?,
            self.ensemble.unwrap_or(Ensemble::Explicit),
            self.seed,
        )
    }

    pub fn to_tensor(&self) -> Result<SymmetricTensor3> {
        match self.kind {
            FileKind::Dense => {
                SymmetricTensor3::from_dense(DenseTensor::from_vec(self.n, self.data.clone())?)
            }
            FileKind::Components => {
                let t = SymmetricTensor3::from_shared_components(Arc::new(self.to_components()?));
                match &self.noise {
                    Some(e) => {
                        let e = DenseTensor::from_vec(self.n, e.clone())?;
                        if e.max_asymmetry() > 1e-12 {
                            return Err(Error::InvariantViolation(
                                "noise tensor is not symmetric".into(),
                            ));
                        }
                        t.with_noise(e)
                    }
                    None => Ok(t),
                }
            }
        }
    }

    pub fn to_json(&self) -> String {
        let wire = Wire {
            format_version: FORMAT_VERSION,
            kind: self.kind,
            n: self.n,
            m: self.m,
            ensemble: self.ensemble.map(|e| e.as_str()),
            seed: self.seed,
            noise_norm: self.noise_norm,
            data: encode(&self.data),
            noise: self.noise.as_deref().map(encode),
        };
        let mut out = serde_json::to_string(&wire).expect("plain JSON values serialize");
        out.push('\n');
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::format("<document>", e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::format("<document>", "expected a JSON object"))?;
        if let Some(extra) = obj.keys().find(|k| !KNOWN_FIELDS.contains(&k.as_str())) {
            return Err(Error::format(extra, "unknown field"));
        }
        let version = as_u64(obj, "format_version")?;
        if version != FORMAT_VERSION {
            return Err(Error::format(
                "format_version",
                format!("unsupported version {version}, expected {FORMAT_VERSION}"),
            ));
        }
        let kind = match as_str(obj, "kind")? {
            "components" => FileKind::Components,
            "dense" => FileKind::Dense,
            other => return Err(Error::format("kind", format!("unknown kind `{other}`"))),
        };
        let n = as_u64(obj, "n")? as usize;
        if n == 0 {
            return Err(Error::format("n", "must be at least 1"));
        }
        let m = match (kind, obj.get("m")) {
            (FileKind::Components, Some(_)) => {
                let m = as_u64(obj, "m")? as usize;
                if m == 0 {
                    return Err(Error::format("m", "must be at least 1"));
                }
                Some(m)
            }
            (FileKind::Components, None) => {
                return Err(Error::format("m", "missing for a components file"))
            }
            (FileKind::Dense, Some(_)) => {
                return Err(Error::format("m", "not allowed in a dense file"))
            }
            (FileKind::Dense, None) => None,
        };
        let ensemble = match obj.get("ensemble") {
            Some(_) => Some(as_str(obj, "ensemble")?.parse::<Ensemble>()?),
            None => None,
        };
        let seed = as_u64(obj, "seed")?;
        let noise_norm = field(obj, "noise_norm")?
            .as_f64()
            .filter(|v| v.is_finite() && *v >= 0.0)
            .ok_or_else(|| Error::format("noise_norm", "expected a finite nonnegative number"))?;
        let expected = match m {
            Some(m) => m.checked_mul(n),
            None => n.checked_mul(n).and_then(|v| v.checked_mul(n)),
        }
        .ok_or_else(|| Error::format("n", "size overflows"))?;
        let data = decode("data", as_str(obj, "data")?, expected)?;
        let noise = match (kind, obj.get("noise")) {
            (FileKind::Components, Some(_)) => {
                Some(decode("noise", as_str(obj, "noise")?, n * n * n)?)
            }
            (FileKind::Dense, Some(_)) => {
                return Err(Error::format("noise", "not allowed in a dense file"))
            }
            (_, None) => None,
        };
        Ok(TensorFile {
            kind,
            n,
            m,
            ensemble,
            seed,
            noise_norm,
            data,
            noise,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{add_noise, sample_components, NoiseSpec};

    #[test]
    fn components_round_trip_is_bit_exact() {
        let set = sample_components(6, 9, Ensemble::SphereUniform, 3).unwrap();
        let file = TensorFile::from_components(&set);
        let text = file.to_json();
        let back = TensorFile::parse(&text).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_json(), text);
        assert_eq!(back.to_components().unwrap(), set);
    }

    #[test]
    fn noisy_and_dense_round_trips() {
        let set = sample_components(5, 4, Ensemble::RademacherNormalized, 1).unwrap();
        let t = add_noise(
            &SymmetricTensor3::from_components(set),
            &NoiseSpec::new(0.05, 2).unwrap(),
        )
        .unwrap();
        let file = TensorFile::from_tensor(&t);
        assert!((file.noise_norm - 0.05).abs() < 1e-12);
        let text = file.to_json();
        let back = TensorFile::parse(&text).unwrap().to_tensor().unwrap();
        assert_eq!(back.densify(64).unwrap(), t.densify(64).unwrap());
        assert_eq!(TensorFile::from_tensor(&back).to_json(), text);

        let dense = SymmetricTensor3::from_dense(t.densify(64).unwrap()).unwrap();
        let text = TensorFile::from_tensor(&dense).to_json();
        let back = TensorFile::parse(&text).unwrap();
        assert_eq!(back.kind, FileKind::Dense);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn diagnostics_name_the_field() {
        let set = sample_components(3, 2, Ensemble::SphereUniform, 3).unwrap();
        let good: Value =
            serde_json::from_str(&TensorFile::from_components(&set).to_json()).unwrap();
        let cases: [(&str, Value); 6] = [
            ("format_version", 2.into()),
            ("kind", "sparse".into()),
            ("n", (-1).into()),
            ("ensemble", "cauchy".into()),
            ("data", "AAAA".into()),
            ("noise_norm", "big".into()),
        ];
        for (name, bad) in cases {
            let mut v = good.clone();
            v[name] = bad;
            match TensorFile::parse(&v.to_string()) {
                Err(Error::Format { field, .. }) => assert_eq!(field, name),
                other => panic!("{name}: {other:?}"),
            }
        }
        let mut v = good.clone();
        v.as_object_mut().unwrap().remove("seed");
        assert!(
            matches!(TensorFile::parse(&v.to_string()), Err(Error::Format { field, .. }) if field == "seed")
        );
        v = good.clone();
        v["extra"] = 1.into();
        assert!(
            matches!(TensorFile::parse(&v.to_string()), Err(Error::Format { field, .. }) if field == "extra")
        );
    }

    #[test]
    fn non_unit_rows_fail_validation_not_parsing() {
        let set = sample_components(3, 2, Ensemble::SphereUniform, 3).unwrap();
        let mut file = TensorFile::from_components(&set);
        file.data.iter_mut().for_each(|v| *v *= 2.0);
        let back = TensorFile::parse(&file.to_json()).unwrap();
        assert!(matches!(
            back.to_tensor(),
            Err(Error::InvariantViolation(_))
        ));
    }
}
