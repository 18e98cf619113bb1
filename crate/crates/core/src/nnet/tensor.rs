use super::NnetError;

/// Dense rank-4 array in NCHW order, row-major with width fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: [usize; 4],
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: [usize; 4], data: Vec<f32>) -> Result<Self, NnetError> {
        if shape.contains(&0) {
            return Err(NnetError::ZeroDim(shape));
        }
        let expected = shape.iter().product::<usize>();
        if data.len() != expected {
            return Err(NnetError::DataLength {
                shape,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; len],
        }
    }

    #[inline]
    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Value at (batch, channel, row, col).
    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f32 {
        let [_, ch, h, w] = self.shape;
        self.data[((n * ch + c) * h + y) * w + x]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_checks_length() {
        assert!(Tensor::new([1, 1, 2, 2], vec![0.0; 4]).is_ok());
        let err = Tensor::new([1, 1, 2, 2], vec![0.0; 3]).unwrap_err();
        assert!(matches!(
            err,
            NnetError::DataLength {
                expected: 4,
                actual: 3,
                ..
            }
        ));
    }

    #[test]
    fn new_rejects_zero_dim() {
        assert!(matches!(
            Tensor::new([1, 0, 2, 2], vec![]),
            Err(NnetError::ZeroDim(_))
        ));
    }

    #[test]
    fn indexing_is_width_fastest() {
        let t = Tensor::new([1, 2, 2, 3], (0..12).map(|v| v as f32).collect()).unwrap();
        assert_eq!(t.at(0, 0, 0, 2), 2.0);
        assert_eq!(t.at(0, 0, 1, 0), 3.0);
        assert_eq!(t.at(0, 1, 0, 0), 6.0);
    }
}
