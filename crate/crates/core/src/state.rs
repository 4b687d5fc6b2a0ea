use serde::{Deserialize, Serialize};

use crate::error::{Result, SomaError};

/// The space a single component lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComponentSpace {
    /// `{0, 1}`, stored as `0.0` / `1.0`.
    Binary,
    /// A real scalar.
    Real,
    /// A real vector of fixed length.
    RealVector(usize),
}

impl ComponentSpace {
    pub fn width(self) -> usize {
        match self {
            ComponentSpace::Binary | ComponentSpace::Real => 1,
            ComponentSpace::RealVector(d) => d,
        }
    }

    /// Whether `point` is a well-formed element of the space. This is about
    /// shape and finiteness only; zero-density points are still members.
    pub fn contains(self, point: &[f64]) -> bool {
        if point.len() != self.width() {
            return false;
        }
        match self {
            ComponentSpace::Binary => point[0] == 0.0 || point[0] == 1.0,
            _ => point.iter().all(|v| v.is_finite()),
        }
    }

    pub fn check(self, point: &[f64]) -> Result<()> {
        if self.contains(point) {
            Ok(())
        } else {
            Err(SomaError::Domain(format!("{point:?} is not a point of {self:?}")))
        }
    }
}

/// An ordered vector of `n` exchangeable components.
///
/// Components are stored back to back in one buffer with stride `width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    data: Vec<f64>,
    width: usize,
}

impl State {
    /// Builds a state from a flat buffer. `data.len()` must be a positive
    /// multiple of `width`.
    pub fn new(data: Vec<f64>, width: usize) -> Result<Self> {
        if width == 0 || data.is_empty() || !data.len().is_multiple_of(width) {
            return Err(SomaError::Domain(format!(
                "buffer of length {} cannot hold components of width {width}",
                data.len()
            )));
        }
        Ok(State { data, width })
    }

    /// Scalar components.
    pub fn scalar(values: Vec<f64>) -> Result<Self> {
        State::new(values, 1)
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn set_component(&mut self, i: usize, value: &[f64]) {
        debug_assert_eq!(value.len(), self.width);
        self.data[i * self.width..(i + 1) * self.width].copy_from_slice(value);
    }

    /// Copy of `self` with component `i` replaced by `value`.
    pub fn with_component(&self, i: usize, value: &[f64]) -> State {
        let mut s = self.clone();
        s.set_component(i, value);
        s
    }

    pub fn components(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.width)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Number of positions whose components differ.
    pub fn hamming(&self, other: &State) -> usize {
        self.components()
            .zip(other.components())
            .filter(|(a, b)| a != b)
            .count()
    }

    /// Bit pattern of the buffer, usable as a hash key.
    pub(crate) fn key(&self) -> Vec<u64> {
        self.data.iter().map(|v| (v + 0.0).to_bits()).collect()
    }

    /// Applies `perm` to the component order: result position `k` holds
    /// component `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> State {
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            data.extend_from_slice(self.component(p));
        }
        State { data, width: self.width }
    }
}
