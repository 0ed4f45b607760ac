use crate::error::{Error, Result};
use crate::scalar::{all_finite, Scalar};

/// Flat parameter storage for a dense network.
///
/// Layer `i` occupies `rows * cols` weight entries (row-major, one row per
/// output unit) followed by `rows` bias entries, where `(rows, cols)` is
/// `shapes[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector<T> {
    values: Vec<T>,
    shapes: Vec<(usize, usize)>,
}

pub(crate) fn layout_len(shapes: &[(usize, usize)]) -> usize {
    shapes.iter().map(|&(r, c)| r * c + r).sum()
}

impl<T: Scalar> ParameterVector<T> {
    pub fn zeros(shapes: Vec<(usize, usize)>) -> Self {
        let n = layout_len(&shapes);
        Self {
            values: vec![T::zero(); n],
            shapes,
        }
    }

    pub fn from_values(shapes: Vec<(usize, usize)>, values: Vec<T>) -> Result<Self> {
        let n = layout_len(&shapes);
        if values.len() != n {
            return Err(Error::Config(format!(
                "parameter length {} does not match layout length {n}",
                values.len()
            )));
        }
        Ok(Self { values, shapes })
    }

    /// A zero vector with the same layout as `self`.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.shapes.clone())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn shapes(&self) -> &[(usize, usize)] {
        &self.shapes
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.shapes == other.shapes
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.values)
    }

    /// Offset of layer `layer`'s weights, offset of its biases, and its end.
    pub fn layer_range(&self, layer: usize) -> (usize, usize, usize) {
        let start: usize = layout_len(&self.shapes[..layer]);
        let (r, c) = self.shapes[layer];
        (start, start + r * c, start + r * c + r)
    }

    pub fn weight(&self, layer: usize, row: usize, col: usize) -> T {
        let (w, _, _) = self.layer_range(layer);
        self.values[w + row * self.shapes[layer].1 + col]
    }

    pub fn set_weight(&mut self, layer: usize, row: usize, col: usize, value: T) {
        let (w, _, _) = self.layer_range(layer);
        let cols = self.shapes[layer].1;
        self.values[w + row * cols + col] = value;
    }

    pub fn set_bias(&mut self, layer: usize, row: usize, value: T) {
        let (_, b, _) = self.layer_range(layer);
        self.values[b + row] = value;
    }

    /// Zeroes the weights and biases of one layer.
    pub fn zero_layer(&mut self, layer: usize) {
        let (start, _, end) = self.layer_range(layer);
        self.values[start..end].fill(T::zero());
    }

    pub fn zero_last_layer(&mut self) {
        if !self.shapes.is_empty() {
            self.zero_layer(self.shapes.len() - 1);
        }
    }

    pub fn scale(&mut self, factor: T) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &Self, factor: T) {
        debug_assert!(self.same_layout(other));
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}
