//! Plain row-major f64 arrays.
//!
//! `DenseArray` is deliberately minimal: shape plus contiguous storage,
//! elementwise kernels, and a textbook matmul. Two invariants hold after
//! every public operation: the element count matches the shape product,
//! and every value is finite. Non-finite results are surfaced as errors
//! instead of propagating silently. The only broadcasting anywhere is
//! scalar-with-array; anything fancier is a shape error by design.

use crate::error::TensorError;

/// A scalar is a rank-0 array: empty shape, one element.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseArray {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl DenseArray {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        if numel(&shape) != data.len() {
            return Err(TensorError::ShapeLenMismatch {
                op: "new",
                shape,
                len: data.len(),
            });
        }
        let arr = DenseArray { shape, data };
        arr.check_finite("new")?;
        Ok(arr)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        DenseArray {
            shape: shape.to_vec(),
            data: vec![0.0; numel(shape)],
        }
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        DenseArray {
            shape: shape.to_vec(),
            data: vec![value; numel(shape)],
        }
    }

    pub fn scalar(value: f64) -> Result<Self, TensorError> {
        Self::new(vec![], vec![value])
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self, TensorError> {
        Self::new(vec![data.len()], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// True for rank-0 arrays and single-element vectors.
    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn item(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    fn check_finite(&self, op: &'static str) -> Result<(), TensorError> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(TensorError::NonFinite { op })
        }
    }

    fn same_shape(&self, rhs: &Self, op: &'static str) -> Result<(), TensorError> {
        if self.shape == rhs.shape {
            Ok(())
        } else {
            Err(TensorError::ShapeMismatch {
                op,
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            })
        }
    }

    fn zip(&self, rhs: &Self, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self, TensorError> {
        // Scalar-with-array is the one permitted broadcast. If both sides
        // hold a single element but the shapes differ (rank-0 against
        // [1, 1], say), the lower-rank side plays the scalar.
        let out = if self.shape == rhs.shape {
            DenseArray {
                shape: self.shape.clone(),
                data: self
                    .data
                    .iter()
                    .zip(&rhs.data)
                    .map(|(&a, &b)| f(a, b))
                    .collect(),
            }
        } else if rhs.is_scalar() && (!self.is_scalar() || rhs.shape.len() < self.shape.len()) {
            let s = rhs.item();
            DenseArray {
                shape: self.shape.clone(),
                data: self.data.iter().map(|&a| f(a, s)).collect(),
            }
        } else if self.is_scalar() {
            let s = self.item();
            DenseArray {
                shape: rhs.shape.clone(),
                data: rhs.data.iter().map(|&b| f(s, b)).collect(),
            }
        } else {
            self.same_shape(rhs, op)?;
            unreachable!("same_shape rejects mismatched non-scalar operands");
        };
        out.check_finite(op)?;
        Ok(out)
    }

    pub fn add(&self, rhs: &Self) -> Result<Self, TensorError> {
        self.zip(rhs, "add", |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self, TensorError> {
        self.zip(rhs, "sub", |a, b| a - b)
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self, TensorError> {
        self.zip(rhs, "mul", |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Result<Self, TensorError> {
        let out = DenseArray {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&a| a * c).collect(),
        };
        out.check_finite("scale")?;
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        DenseArray {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&a| f(a)).collect(),
        }
    }

    /// Elementwise clamp into `[lo, hi]`.
    pub fn clamp(&self, lo: f64, hi: f64) -> Self {
        self.map(|a| a.clamp(lo, hi))
    }

    /// Round half to even, elementwise (2.5 -> 2, 3.5 -> 4).
    pub fn round_ties_even(&self) -> Self {
        self.map(f64::round_ties_even)
    }

    /// Unit step with the convention theta(0) = 1.
    pub fn heaviside(&self) -> Self {
        self.map(|a| if a >= 0.0 { 1.0 } else { 0.0 })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// 2-D matrix product. `self` is [m x k], `rhs` is [k x p].
    pub fn matmul(&self, rhs: &Self) -> Result<Self, TensorError> {
        let (m, k) = match self.shape[..] {
            [m, k] => (m, k),
            _ => {
                return Err(TensorError::BadRank {
                    op: "matmul",
                    expected: "a 2-D lhs",
                    got: self.shape.clone(),
                })
            }
        };
        let (k2, p) = match rhs.shape[..] {
            [k2, p] => (k2, p),
            _ => {
                return Err(TensorError::BadRank {
                    op: "matmul",
                    expected: "a 2-D rhs",
                    got: rhs.shape.clone(),
                })
            }
        };
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        let mut data = vec![0.0; m * p];
        for i in 0..m {
            for l in 0..k {
                let a = self.data[i * k + l];
                if a == 0.0 {
                    continue;
                }
                let row = &rhs.data[l * p..(l + 1) * p];
                let out = &mut data[i * p..(i + 1) * p];
                for (o, &b) in out.iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        let out = DenseArray {
            shape: vec![m, p],
            data,
        };
        out.check_finite("matmul")?;
        Ok(out)
    }

    pub fn transpose(&self) -> Result<Self, TensorError> {
        let (m, n) = match self.shape[..] {
            [m, n] => (m, n),
            _ => {
                return Err(TensorError::BadRank {
                    op: "transpose",
                    expected: "a 2-D array",
                    got: self.shape.clone(),
                })
            }
        };
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = self.data[i * n + j];
            }
        }
        Ok(DenseArray {
            shape: vec![n, m],
            data,
        })
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Result<Self, TensorError> {
        if numel(&shape) != self.data.len() {
            return Err(TensorError::ShapeLenMismatch {
                op: "reshape",
                shape,
                len: self.data.len(),
            });
        }
        Ok(DenseArray {
            shape,
            data: self.data.clone(),
        })
    }

    pub fn max_abs_diff(&self, rhs: &Self) -> Result<f64, TensorError> {
        self.same_shape(rhs, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}
