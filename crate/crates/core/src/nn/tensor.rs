//! Batched activation tensors.

use ndarray::{Array2, Array4};

use crate::error::{Error, Result};

/// `[batch, channels, height, width]` activation block. Flat feature
/// tensors use height = width = 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    data: Array4<f64>,
}

impl Tensor4 {
    pub fn new(data: Array4<f64>) -> Result<Self> {
        let (b, c, h, w) = data.dim();
        if b == 0 || c == 0 || h == 0 || w == 0 {
            return Err(Error::Shape(format!(
                "tensor dimensions must be positive, got {}x{}x{}x{}",
                b, c, h, w
            )));
        }
        // kernels index into contiguous slices; normalise the layout here
        let data = if data.is_standard_layout() {
            data
        } else {
            data.as_standard_layout().into_owned()
        };
        Ok(Self { data })
    }

    pub fn zeros(b: usize, c: usize, h: usize, w: usize) -> Self {
        Self {
            data: Array4::zeros((b, c, h, w)),
        }
    }

    /// Wrap a `[batch, features]` matrix as `[batch, features, 1, 1]`.
    pub fn from_flat(flat: Array2<f64>) -> Result<Self> {
        let (b, f) = flat.dim();
        let flat = if flat.is_standard_layout() {
            flat
        } else {
            flat.as_standard_layout().into_owned()
        };
        let data = flat
            .into_shape_with_order((b, f, 1, 1))
            .map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(data)
    }

    /// View as `[batch, features]`; requires unit spatial dims.
    pub fn flat(&self) -> Result<Array2<f64>> {
        let (b, c, h, w) = self.dim();
        if h != 1 || w != 1 {
            return Err(Error::Shape(format!(
                "expected flat tensor, got spatial dims {}x{}",
                h, w
            )));
        }
        Ok(self
            .data
            .view()
            .into_shape_with_order((b, c))
            .map_err(|e| Error::Shape(format!("flat view: {}", e)))?
            .to_owned())
    }

    pub fn dim(&self) -> (usize, usize, usize, usize) {
        self.data.dim()
    }

    pub fn batch(&self) -> usize {
        self.data.dim().0
    }

    pub fn data(&self) -> &Array4<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array4<f64> {
        &mut self.data
    }

    pub fn into_inner(self) -> Array4<f64> {
        self.data
    }

    /// Error if any entry is NaN or infinite.
    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("{}: tensor contains NaN or Inf", context)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_round_trip() {
        let m = Array2::from_shape_fn((3, 5), |(i, j)| (i * 5 + j) as f64);
        let t = Tensor4::from_flat(m.clone()).unwrap();
        assert_eq!(t.dim(), (3, 5, 1, 1));
        assert_eq!(t.flat().unwrap(), m);
    }

    #[test]
    fn finite_check() {
        let mut t = Tensor4::zeros(1, 1, 2, 2);
        assert!(t.check_finite("ok").is_ok());
        t.data_mut()[[0, 0, 0, 0]] = f64::NAN;
        assert!(t.check_finite("bad").is_err());
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(Tensor4::new(Array4::zeros((0, 1, 1, 1))).is_err());
    }
}
