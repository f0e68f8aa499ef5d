//! Dense row-major `f64` tensors.
//!
//! Every numeric array in the crate (input images, feature maps, weights,
//! gradients) is a [`Tensor`]. Layout is row-major with the last axis fastest.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::shape("tensor rank must be at least 1"));
    }
    if let Some(axis) = shape.iter().position(|&e| e == 0) {
        return Err(Error::shape(format!(
            "extent of axis {axis} is zero in {shape:?}"
        )));
    }
    Ok(shape.iter().product())
}

impl Tensor {
    pub fn new(shape: &[usize], fill: f64) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            data: vec![fill; len],
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::new(shape, 0.0)
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len = check_shape(shape)?;
        if len != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {len} elements, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Always false: extents are at least 1.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    /// Row-major strides, in elements.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.shape.len()];
        for axis in (0..self.shape.len().saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * self.shape[axis + 1];
        }
        strides
    }

    pub fn offset(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.shape.len() {
            return Err(Error::Index(format!(
                "expected {} coordinates, got {}",
                self.shape.len(),
                coords.len()
            )));
        }
        let mut offset = 0;
        let mut stride = 1;
        for axis in (0..coords.len()).rev() {
            if coords[axis] >= self.shape[axis] {
                return Err(Error::Index(format!(
                    "coordinate {} out of range for axis {axis} with extent {}",
                    coords[axis], self.shape[axis]
                )));
            }
            offset += coords[axis] * stride;
            stride *= self.shape[axis];
        }
        Ok(offset)
    }

    pub fn get(&self, coords: &[usize]) -> Result<f64> {
        self.offset(coords).map(|o| self.data[o])
    }

    pub fn set(&mut self, coords: &[usize], value: f64) -> Result<()> {
        let o = self.offset(coords)?;
        self.data[o] = value;
        Ok(())
    }

    /// Same data under a new shape with the same element count.
    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::from_vec(shape, self.data)
    }

    pub fn elementwise(&self, other: &Tensor, op: Elementwise) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "elementwise {op:?} on {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        let f: fn(f64, f64) -> f64 = match op {
            Elementwise::Add => |a, b| a + b,
            Elementwise::Sub => |a, b| a - b,
            Elementwise::Mul => |a, b| a * b,
        };
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 8;
        write!(f, "Tensor{:?} ", self.shape)?;
        let head = &self.data[..self.data.len().min(SHOWN)];
        if self.data.len() > SHOWN {
            write!(f, "{head:?}..")
        } else {
            write!(f, "{head:?}")
        }
    }
}

/// `tensor_new` from the public op list.
pub fn tensor_new(shape: &[usize], fill: f64) -> Result<Tensor> {
    Tensor::new(shape, fill)
}

pub fn tensor_index(t: &Tensor, coords: &[usize]) -> Result<f64> {
    t.get(coords)
}

pub fn elementwise(a: &Tensor, b: &Tensor, op: Elementwise) -> Result<Tensor> {
    a.elementwise(b, op)
}

pub fn reduce_sum(t: &Tensor) -> f64 {
    t.sum()
}

/// Extents of an image batch: `[batch, channels, rows, cols]`.
///
/// Rows are the variates of the series, cols are time steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape4 {
    pub batch: usize,
    pub channels: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Shape4 {
    pub fn new(batch: usize, channels: usize, rows: usize, cols: usize) -> Result<Self> {
        let s = Self {
            batch,
            channels,
            rows,
            cols,
        };
        check_shape(&s.dims())?;
        Ok(s)
    }

    pub fn of(t: &Tensor) -> Result<Self> {
        match *t.shape() {
            [b, c, r, w] => Ok(Self {
                batch: b,
                channels: c,
                rows: r,
                cols: w,
            }),
            ref other => Err(Error::shape(format!("expected a rank-4 tensor, got {other:?}"))),
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.batch, self.channels, self.rows, self.cols]
    }

    /// Elements per batch item.
    pub fn item_len(&self) -> usize {
        self.channels * self.rows * self.cols
    }
}

impl fmt::Display for Shape4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{},{},{},{}]",
            self.batch, self.channels, self.rows, self.cols
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn new_fills_every_element() {
        let t = tensor_new(&[2, 3], 0.0).unwrap();
        assert_eq!(t.data(), &[0.0; 6]);
        assert_eq!(tensor_new(&[1], 5.0).unwrap().data(), &[5.0]);
        assert_eq!(tensor_new(&[2, 2, 2], 1.0).unwrap().data(), &[1.0; 8]);
    }

    #[test]
    fn zero_extent_is_rejected() {
        assert!(matches!(Tensor::new(&[2, 0], 1.0), Err(Error::Shape(_))));
        assert!(matches!(Tensor::new(&[], 1.0), Err(Error::Shape(_))));
    }

    #[test]
    fn index_is_row_major() {
        let t = Tensor::from_vec(&[2, 3], (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(tensor_index(&t, &[1, 2]).unwrap(), 5.0);
        assert_eq!(tensor_index(&t, &[0, 0]).unwrap(), 0.0);
        let v = Tensor::zeros(&[4]).unwrap();
        assert!(matches!(tensor_index(&v, &[4]), Err(Error::Index(_))));
        assert!(matches!(tensor_index(&v, &[0, 0]), Err(Error::Index(_))));
    }

    #[test]
    fn elementwise_ops() {
        let a = Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::from_vec(&[2], vec![3.0, 4.0]).unwrap();
        assert_eq!(elementwise(&a, &b, Elementwise::Add).unwrap().data(), &[4.0, 6.0]);
        let z = Tensor::zeros(&[2]).unwrap();
        let two = Tensor::new(&[2], 2.0).unwrap();
        assert_eq!(elementwise(&two, &z, Elementwise::Mul).unwrap().data(), &[0.0, 0.0]);
        let one = Tensor::new(&[1], 1.0).unwrap();
        assert_eq!(elementwise(&one, &one, Elementwise::Sub).unwrap().data(), &[0.0]);
        let c = Tensor::zeros(&[1, 2]).unwrap();
        assert!(matches!(elementwise(&a, &c, Elementwise::Add), Err(Error::Shape(_))));
    }

    #[test]
    fn sums() {
        let t = Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(reduce_sum(&t), 6.0);
        assert_eq!(reduce_sum(&Tensor::zeros(&[2, 2]).unwrap()), 0.0);
        assert_eq!(reduce_sum(&Tensor::from_vec(&[2], vec![-1.0, 1.0]).unwrap()), 0.0);
    }

    fn shapes() -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(1usize..5, 1..5)
    }

    // Dyadic values keep addition exact, so associativity holds bitwise.
    fn dyadic(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((-1024i32..1024).prop_map(|k| f64::from(k) / 8.0), len)
    }

    proptest! {
        #[test]
        fn index_enumerates_data_in_order(shape in shapes()) {
            let n: usize = shape.iter().product();
            let t = Tensor::from_vec(&shape, (0..n).map(|i| i as f64).collect()).unwrap();
            let mut coords = vec![0usize; shape.len()];
            for expected in 0..n {
                prop_assert_eq!(t.get(&coords).unwrap(), expected as f64);
                for axis in (0..shape.len()).rev() {
                    coords[axis] += 1;
                    if coords[axis] < shape[axis] {
                        break;
                    }
                    coords[axis] = 0;
                }
            }
        }

        #[test]
        fn add_commutes_and_associates(
            (shape, a, b, c) in shapes().prop_flat_map(|s| {
                let n = s.iter().product();
                (Just(s), dyadic(n), dyadic(n), dyadic(n))
            })
        ) {
            let a = Tensor::from_vec(&shape, a).unwrap();
            let b = Tensor::from_vec(&shape, b).unwrap();
            let c = Tensor::from_vec(&shape, c).unwrap();
            let add = |x: &Tensor, y: &Tensor| x.elementwise(y, Elementwise::Add).unwrap();
            prop_assert_eq!(add(&a, &b), add(&b, &a));
            prop_assert_eq!(add(&add(&a, &b), &c), add(&a, &add(&b, &c)));
        }
    }
}
