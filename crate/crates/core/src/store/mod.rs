//! SFID tensor files and scene-pair manifests.
//!
//! Layout of a tensor file, all integers little-endian:
//!
//! ```text
//! 0..4    magic "SFID"
//! 4..6    format version (u16, = 1)
//! 6       dtype code (1 = f32, 2 = u8, 3 = u32)
//! 7       rank
//! 8..     rank x u32 dimension sizes
//! ...     payload, row-major
//! ```

mod manifest;

pub use manifest::{
    load_scene_pair, write_scene_pair, Observation, QueryEntry, ScenePair, ScenePairManifest,
    SourceImages, TimeEntry,
};

use std::fs;
use std::path::Path;

use crate::error::StoreError;
use crate::grid::{BinaryMask, LabelMap, ProbMap};

pub const MAGIC: [u8; 4] = *b"SFID";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    U8,
    U32,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::F32 => 1,
            DType::U8 => 2,
            DType::U32 => 3,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, StoreError> {
        match code {
            1 => Ok(DType::F32),
            2 => Ok(DType::U8),
            3 => Ok(DType::U32),
            other => Err(StoreError::UnknownDtype(other)),
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::F32 | DType::U32 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DType::F32 => "float32",
            DType::U8 => "uint8",
            DType::U32 => "uint32",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    U8(Vec<u8>),
    U32(Vec<u32>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::U8(_) => DType::U8,
            TensorData::U32(_) => DType::U32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::U8(v) => v.len(),
            TensorData::U32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A validated n-dimensional array: positive dimensions, element count equal
/// to the shape product, finite float data.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: TensorData) -> Result<Self, StoreError> {
        if shape.len() > u8::MAX as usize
            || shape.iter().any(|&d| d == 0 || d > u32::MAX as usize)
        {
            return Err(StoreError::InvalidShape(shape));
        }
        let expected = element_count(&shape)?;
        if data.len() != expected {
            return Err(StoreError::ElementCount {
                shape,
                expected,
                actual: data.len(),
            });
        }
        if let TensorData::F32(values) = &data {
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(StoreError::NonFinite(i));
            }
        }
        Ok(Self { shape, data })
    }

    pub fn from_f32(shape: Vec<usize>, values: Vec<f32>) -> Result<Self, StoreError> {
        Self::new(shape, TensorData::F32(values))
    }

    pub fn from_u8(shape: Vec<usize>, values: Vec<u8>) -> Result<Self, StoreError> {
        Self::new(shape, TensorData::U8(values))
    }

    pub fn from_u32(shape: Vec<usize>, values: Vec<u32>) -> Result<Self, StoreError> {
        Self::new(shape, TensorData::U32(values))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn into_data(self) -> TensorData {
        self.data
    }

    /// Serializes to the on-disk byte layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let dtype = self.dtype();
        let mut out =
            Vec::with_capacity(HEADER_LEN + 4 * self.shape.len() + dtype.size() * self.data.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(dtype.code());
        out.push(self.shape.len() as u8);
        for &d in &self.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::U8(v) => out.extend_from_slice(v),
            TensorData::U32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        if bytes.len() < HEADER_LEN {
            return Err(StoreError::Truncated {
                expected: HEADER_LEN,
                actual: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(StoreError::BadMagic(magic));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(StoreError::UnsupportedVersion(version));
        }
        let dtype = DType::from_code(bytes[6])?;
        let rank = bytes[7] as usize;
        let shape_end = HEADER_LEN + 4 * rank;
        if bytes.len() < shape_end {
            return Err(StoreError::Truncated {
                expected: shape_end,
                actual: bytes.len(),
            });
        }
        let shape: Vec<usize> = bytes[HEADER_LEN..shape_end]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        if shape.contains(&0) {
            return Err(StoreError::InvalidShape(shape));
        }
        let count = element_count(&shape)?;
        let expected = count
            .checked_mul(dtype.size())
            .and_then(|n| n.checked_add(shape_end))
            .ok_or_else(|| StoreError::InvalidShape(shape.clone()))?;
        if bytes.len() < expected {
            return Err(StoreError::Truncated {
                expected,
                actual: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(StoreError::TrailingBytes(bytes.len() - expected));
        }
        let payload = &bytes[shape_end..];
        let data = match dtype {
            DType::F32 => TensorData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            DType::U8 => TensorData::U8(payload.to_vec()),
            DType::U32 => TensorData::U32(
                payload
                    .chunks_exact(4)
                    .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
        };
        Self::new(shape, data)
    }

    /// Views the tensor as one or more `H x W` probability maps: a rank-2
    /// tensor yields one map, a rank-3 `C x H x W` tensor yields `C`.
    pub fn to_prob_maps(&self, what: &str) -> Result<Vec<ProbMap>, StoreError> {
        let values = match &self.data {
            TensorData::F32(v) => v,
            other => {
                return Err(StoreError::WrongDtype {
                    what: what.to_string(),
                    expected: DType::F32.name(),
                    actual: other.dtype().name(),
                })
            }
        };
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(StoreError::OutOfRange {
                what: what.to_string(),
                index: i,
                value: values[i] as f64,
            });
        }
        let (depth, h, w) = self.planes(what)?;
        Ok(values
            .chunks_exact(h * w)
            .take(depth)
            .map(|plane| ProbMap::from_vec_unchecked(h, w, plane.to_vec()))
            .collect())
    }

    /// Views a `uint8` tensor of zeros and ones as binary masks (rank 2 or 3).
    pub fn to_masks(&self, what: &str) -> Result<Vec<BinaryMask>, StoreError> {
        let values = match &self.data {
            TensorData::U8(v) => v,
            other => {
                return Err(StoreError::WrongDtype {
                    what: what.to_string(),
                    expected: DType::U8.name(),
                    actual: other.dtype().name(),
                })
            }
        };
        if let Some(i) = values.iter().position(|&v| v > 1) {
            return Err(StoreError::OutOfRange {
                what: format!("{what} (binary mask)"),
                index: i,
                value: values[i] as f64,
            });
        }
        let (_, h, w) = self.planes(what)?;
        Ok(values
            .chunks_exact(h * w)
            .map(|plane| {
                BinaryMask::from_bits(h, w, plane.iter().map(|&b| b == 1).collect())
                    .expect("plane size matches shape")
            })
            .collect())
    }

    fn planes(&self, what: &str) -> Result<(usize, usize, usize), StoreError> {
        match *self.shape.as_slice() {
            [h, w] => Ok((1, h, w)),
            [c, h, w] => Ok((c, h, w)),
            _ => Err(StoreError::InvalidManifest(format!(
                "{what}: expected rank 2 or 3, found shape {:?}",
                self.shape
            ))),
        }
    }
}

impl From<&ProbMap> for Tensor {
    fn from(map: &ProbMap) -> Self {
        Tensor {
            shape: vec![map.height(), map.width()],
            data: TensorData::F32(map.values().to_vec()),
        }
    }
}

impl From<&BinaryMask> for Tensor {
    fn from(mask: &BinaryMask) -> Self {
        Tensor {
            shape: vec![mask.height(), mask.width()],
            data: TensorData::U8(mask.to_u8()),
        }
    }
}

impl From<&LabelMap> for Tensor {
    fn from(labels: &LabelMap) -> Self {
        Tensor {
            shape: vec![labels.height(), labels.width()],
            data: TensorData::U32(labels.raw().to_vec()),
        }
    }
}

/// Stacks equally sized maps into a `C x H x W` float tensor.
pub fn stack_prob_maps(maps: &[ProbMap]) -> Result<Tensor, StoreError> {
    let (h, w) = maps.first().map_or((0, 0), ProbMap::dims);
    let mut values = Vec::with_capacity(maps.len() * h * w);
    for m in maps {
        if m.dims() != (h, w) {
            return Err(StoreError::ShapeMismatch {
                what: "probability stack".into(),
                expected: vec![h, w],
                actual: vec![m.height(), m.width()],
            });
        }
        values.extend_from_slice(m.values());
    }
    Tensor::from_f32(vec![maps.len(), h, w], values)
}

/// Stacks equally sized masks into a `C x H x W` uint8 tensor.
pub fn stack_masks(masks: &[BinaryMask]) -> Result<Tensor, StoreError> {
    let (h, w) = masks.first().map_or((0, 0), BinaryMask::dims);
    let mut values = Vec::with_capacity(masks.len() * h * w);
    for m in masks {
        if m.dims() != (h, w) {
            return Err(StoreError::ShapeMismatch {
                what: "mask stack".into(),
                expected: vec![h, w],
                actual: vec![m.height(), m.width()],
            });
        }
        values.extend(m.to_u8());
    }
    Tensor::from_u8(vec![masks.len(), h, w], values)
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &Tensor) -> Result<(), StoreError> {
    let path = path.as_ref();
    fs::write(path, tensor.to_bytes()).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor, StoreError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            StoreError::MissingFile(path.to_path_buf())
        } else {
            StoreError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    Tensor::from_bytes(&bytes)
}

fn element_count(shape: &[usize]) -> Result<usize, StoreError> {
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| StoreError::InvalidShape(shape.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_map_file_layout() {
        let t = Tensor::from_f32(vec![1, 1], vec![0.5]).unwrap();
        let bytes = t.to_bytes();
        // header 8 + two u32 dims + one f32
        assert_eq!(bytes.len(), 20);
        assert_eq!(&bytes[0..4], b"SFID");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(bytes[6], 1);
        assert_eq!(bytes[7], 2);
        assert_eq!(&bytes[8..16], &[1, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &0.5f32.to_le_bytes());
        let back = Tensor::from_bytes(&bytes).unwrap();
        assert_eq!(back.data(), &TensorData::F32(vec![0.5]));
    }

    #[test]
    fn u8_roundtrip() {
        let t = Tensor::from_u8(vec![2, 2], vec![0, 1, 1, 0]).unwrap();
        assert_eq!(Tensor::from_bytes(&t.to_bytes()).unwrap(), t);
    }

    #[test]
    fn rejects_nan_and_inf() {
        assert!(matches!(
            Tensor::from_f32(vec![2], vec![0.1, f32::NAN]),
            Err(StoreError::NonFinite(1))
        ));
        assert!(matches!(
            Tensor::from_f32(vec![1], vec![f32::INFINITY]),
            Err(StoreError::NonFinite(0))
        ));
    }

    #[test]
    fn rejects_nan_on_read() {
        let mut bytes = Tensor::from_f32(vec![1], vec![0.0]).unwrap().to_bytes();
        bytes[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            Tensor::from_bytes(&bytes),
            Err(StoreError::NonFinite(0))
        ));
    }

    #[test]
    fn rejects_bad_header() {
        let good = Tensor::from_u8(vec![2, 2], vec![0, 1, 1, 0]).unwrap().to_bytes();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(Tensor::from_bytes(&bad), Err(StoreError::BadMagic(_))));

        let mut bad = good.clone();
        bad[6] = 9;
        assert!(matches!(
            Tensor::from_bytes(&bad),
            Err(StoreError::UnknownDtype(9))
        ));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(
            Tensor::from_bytes(&bad),
            Err(StoreError::UnsupportedVersion(2))
        ));

        // declared 2x2 but only three elements present
        let short = &good[..good.len() - 1];
        assert!(matches!(
            Tensor::from_bytes(short),
            Err(StoreError::Truncated {
                expected: 20,
                actual: 19
            })
        ));

        let mut long = good.clone();
        long.push(0);
        assert!(matches!(
            Tensor::from_bytes(&long),
            Err(StoreError::TrailingBytes(1))
        ));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            Tensor::from_u8(vec![2, 0], vec![]),
            Err(StoreError::InvalidShape(_))
        ));
        assert!(matches!(
            Tensor::from_u8(vec![2, 2], vec![0; 3]),
            Err(StoreError::ElementCount { expected: 4, actual: 3, .. })
        ));
    }

    #[test]
    fn prob_map_view_checks_range() {
        let t = Tensor::from_f32(vec![2, 1, 2], vec![0.0, 0.5, 1.0, 0.25]).unwrap();
        let maps = t.to_prob_maps("stack").unwrap();
        assert_eq!(maps.len(), 2);
        assert_eq!(maps[1].values(), &[1.0, 0.25]);

        let t = Tensor::from_f32(vec![1, 2], vec![0.0, 1.5]).unwrap();
        assert!(matches!(
            t.to_prob_maps("map"),
            Err(StoreError::OutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn mask_view_requires_binary_u8() {
        let t = Tensor::from_u8(vec![1, 2], vec![1, 2]).unwrap();
        assert!(t.to_masks("gt").is_err());
        let t = Tensor::from_u32(vec![1, 2], vec![1, 0]).unwrap();
        assert!(matches!(t.to_masks("gt"), Err(StoreError::WrongDtype { .. })));
    }

    #[test]
    fn write_rejects_nothing_written_for_invalid_tensor() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.sfid");
        // invalid tensors cannot be constructed, so nothing reaches the disk
        assert!(Tensor::from_f32(vec![1], vec![f32::NAN]).is_err());
        assert!(!path.exists());
        let t = Tensor::from_f32(vec![2], vec![0.25, 0.75]).unwrap();
        write_tensor(&path, &t).unwrap();
        assert_eq!(read_tensor(&path).unwrap(), t);
    }
}
