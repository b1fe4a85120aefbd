//! Dense row-major grids shared by every stage: probability maps, binary
//! masks and per-pixel category labels.

use crate::error::{Error, Result};

/// An `H x W` map of probabilities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl ProbMap {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Self {
        Self {
            height,
            width,
            values: vec![value; height * width],
        }
    }

    /// Builds a map from row-major values, rejecting anything outside `[0, 1]`
    /// (NaN included).
    pub fn from_vec(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::DimensionMismatch {
                left: (height, width),
                right: (values.len(), 1),
            });
        }
        if let Some(&v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::NotProbability(v as f64));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub(crate) fn from_vec_unchecked(height: usize, width: usize, values: Vec<f32>) -> Self {
        debug_assert_eq!(values.len(), height * width);
        Self {
            height,
            width,
            values,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.width + col]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }
}

/// A binary `H x W` mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![false; height * width],
        }
    }

    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::DimensionMismatch {
                left: (height, width),
                right: (bits.len(), 1),
            });
        }
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    /// Parses rows like `"10/01"`; any character other than `'0'` is foreground.
    ///
    /// Panics on ragged rows. Meant for fixtures and examples.
    pub fn from_rows(rows: &str) -> Self {
        let lines: Vec<&str> = rows.split('/').collect();
        let width = lines.first().map_or(0, |l| l.len());
        let mut bits = Vec::with_capacity(lines.len() * width);
        for line in &lines {
            assert_eq!(line.len(), width, "ragged mask rows in {rows:?}");
            bits.extend(line.bytes().map(|b| b != b'0'));
        }
        Self {
            height: lines.len(),
            width,
            bits,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| b as u8).collect()
    }
}

/// Sentinel stored in a [`LabelMap`] for pixels assigned to no category.
pub const BACKGROUND: u32 = u32::MAX;

/// Per-pixel category assignment; [`BACKGROUND`] marks unassigned pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    categories: usize,
    labels: Vec<u32>,
}

impl LabelMap {
    /// Validates that every non-background label is below `categories`.
    pub fn new(height: usize, width: usize, categories: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::DimensionMismatch {
                left: (height, width),
                right: (labels.len(), 1),
            });
        }
        if let Some(&bad) = labels
            .iter()
            .find(|&&l| l != BACKGROUND && l as usize >= categories)
        {
            return Err(Error::CategoryOutOfRange {
                index: bad as usize,
                count: categories,
            });
        }
        Ok(Self {
            height,
            width,
            categories,
            labels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    /// Category at a pixel, or `None` for background.
    pub fn get(&self, row: usize, col: usize) -> Option<usize> {
        match self.labels[row * self.width + col] {
            BACKGROUND => None,
            l => Some(l as usize),
        }
    }

    pub fn raw(&self) -> &[u32] {
        &self.labels
    }
}

pub(crate) fn check_dims(left: (usize, usize), right: (usize, usize)) -> Result<()> {
    if left != right {
        return Err(Error::DimensionMismatch { left, right });
    }
    Ok(())
}
