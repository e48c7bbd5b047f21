//! KFLD v1 field files: one JSON header line followed by little-endian f64
//! values, multi-index outer and grid point inner. Complex fields store
//! `(re, im)` pairs.

use super::field::{ComplexField, GridSpec, ScalarField, TensorField, Variance};
use crate::error::{KflowError, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MAGIC: &str = "KFLD";
pub const VERSION: u32 = 1;
const MAX_HEADER: usize = 4096;
const MAX_VALUES: usize = 1 << 28;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KfldHeader {
    pub magic: String,
    pub version: u32,
    pub n: usize,
    pub points_per_axis: usize,
    pub rank: usize,
    pub variance: Vec<Variance>,
    pub complex: bool,
}

impl KfldHeader {
    pub fn new(spec: &GridSpec, variance: Vec<Variance>, complex: bool) -> Self {
        KfldHeader {
            magic: MAGIC.to_string(),
            version: VERSION,
            n: spec.n,
            points_per_axis: spec.points_per_axis,
            rank: variance.len(),
            variance,
            complex,
        }
    }

    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.n, self.points_per_axis).map_err(|e| KflowError::Format(e.to_string()))
    }

    /// Number of f64 values in the payload, with overflow and size guards.
    pub fn value_count(&self) -> Result<usize> {
        let spec = self.spec()?;
        if self.rank > 6 {
            return Err(KflowError::Format(format!("rank {} exceeds 6", self.rank)));
        }
        let ncomp = spec
            .dim()
            .checked_pow(self.rank as u32)
            .ok_or_else(|| KflowError::Format("component count overflow".into()))?;
        let total = spec
            .points_per_axis
            .checked_pow(spec.dim() as u32)
            .ok_or_else(|| KflowError::Format("grid size overflow".into()))?;
        let count = ncomp
            .checked_mul(total)
            .and_then(|c| c.checked_mul(if self.complex { 2 } else { 1 }))
            .ok_or_else(|| KflowError::Format("payload size overflow".into()))?;
        if count > MAX_VALUES {
            return Err(KflowError::Format(format!("payload of {count} values exceeds the size guard")));
        }
        Ok(count)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KfldFile {
    pub header: KfldHeader,
    pub data: Vec<f64>,
}

pub fn encode(header: &KfldHeader, data: &[f64]) -> Vec<u8> {
    let mut out = serde_json::to_vec(header).expect("header serializes");
    out.push(b'\n');
    out.reserve(8 * data.len());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<KfldFile> {
    let nl = bytes
        .iter()
        .take(MAX_HEADER)
        .position(|&b| b == b'\n')
        .ok_or_else(|| KflowError::Format("missing header line".into()))?;
    let header: KfldHeader =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| KflowError::Format(format!("bad header: {e}")))?;
    if header.magic != MAGIC {
        return Err(KflowError::Format(format!("bad magic {:?}", header.magic)));
    }
    if header.version != VERSION {
        return Err(KflowError::Format(format!("unsupported version {}", header.version)));
    }
    if header.variance.len() != header.rank {
        return Err(KflowError::Format("variance length does not match rank".into()));
    }
    let count = header.value_count()?;
    let payload = &bytes[nl + 1..];
    if payload.len() != 8 * count {
        return Err(KflowError::Format(format!("expected {} payload bytes, found {}", 8 * count, payload.len())));
    }
    let data: Vec<f64> = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(KfldFile { header, data })
}

pub fn encode_scalar(f: &ScalarField) -> Vec<u8> {
    encode(&KfldHeader::new(&f.spec, Vec::new(), false), &f.values)
}

pub fn encode_tensor(t: &TensorField) -> Vec<u8> {
    encode(&KfldHeader::new(&t.spec, t.variance.clone(), false), &t.components)
}

pub fn encode_complex(f: &ComplexField) -> Vec<u8> {
    let data: Vec<f64> = f.values.iter().flat_map(|c| [c.re, c.im]).collect();
    encode(&KfldHeader::new(&f.spec, Vec::new(), true), &data)
}

impl KfldFile {
    fn ensure_finite(&self) -> Result<()> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(KflowError::Format("non-finite value in payload".into()));
        }
        Ok(())
    }

    pub fn to_scalar(&self) -> Result<ScalarField> {
        if self.header.rank != 0 || self.header.complex {
            return Err(KflowError::Format("not a real scalar field".into()));
        }
        self.ensure_finite()?;
        Ok(ScalarField { spec: self.header.spec()?, values: self.data.clone() })
    }

    pub fn to_tensor(&self) -> Result<TensorField> {
        if self.header.complex {
            return Err(KflowError::Format("complex tensors are not supported".into()));
        }
        self.ensure_finite()?;
        Ok(TensorField {
            spec: self.header.spec()?,
            variance: self.header.variance.clone(),
            components: self.data.clone(),
            symmetries: Vec::new(),
        })
    }

    pub fn to_complex(&self) -> Result<ComplexField> {
        if self.header.rank != 0 || !self.header.complex {
            return Err(KflowError::Format("not a complex scalar field".into()));
        }
        self.ensure_finite()?;
        let values = self.data.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        Ok(ComplexField { spec: self.header.spec()?, values })
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<KfldFile> {
    decode(&std::fs::read(path)?)
}
