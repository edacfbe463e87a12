//! Minimal dense-array math with reverse-mode gradient accumulation.
//!
//! [`Tensor`] is an immutable row-major value type. Plain methods compute
//! without recording; [`Tape`] records the same kernels for reverse-mode
//! differentiation through the policy network, the joint cost network, and
//! unrolled equilibrium iterations.

pub mod linalg;
mod tape;

pub use tape::{grad_check, Gradients, NodeId, OpKind, Tape};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major array of rank 1 or 2. Values are finite by invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    /// Build from shape and row-major data; rejects count mismatch and
    /// non-finite entries.
    pub fn from_vec(shape: Vec<usize>, data: Vec<S>) -> Result<Self> {
        let count: usize = shape.iter().product();
        if count != data.len() {
            return Err(Error::ShapeMismatch {
                op: "from_vec",
                detail: format!("shape {:?} expects {} values, got {}", shape, count, data.len()),
            });
        }
        let t = Tensor { shape, data };
        t.check_finite("from_vec")?;
        Ok(t)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let count = shape.iter().product();
        Tensor { shape, data: vec![S::zero(); count] }
    }

    pub fn scalar(v: S) -> Self {
        Tensor { shape: vec![1], data: vec![v] }
    }

    pub fn vector(data: Vec<S>) -> Result<Self> {
        let n = data.len();
        Tensor::from_vec(vec![n], data)
    }

    /// n×n identity.
    pub fn eye(n: usize) -> Self {
        let mut t = Tensor::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = S::one();
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<S> {
        if self.data.len() != 1 {
            return Err(Error::ShapeMismatch {
                op: "item",
                detail: format!("expected one element, shape is {:?}", self.shape),
            });
        }
        Ok(self.data[0])
    }

    pub fn rows(&self) -> usize {
        match self.shape.len() {
            1 => 1,
            2 => self.shape[0],
            _ => 0,
        }
    }

    pub fn cols(&self) -> usize {
        match self.shape.len() {
            1 => self.shape[0],
            2 => self.shape[1],
            _ => 0,
        }
    }

    /// Element of a rank-2 tensor.
    pub fn at(&self, i: usize, j: usize) -> S {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[i * self.shape[1] + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        debug_assert_eq!(self.shape.len(), 2);
        let cols = self.shape[1];
        self.data[i * cols + j] = v;
    }

    fn check_finite(&self, op: &'static str) -> Result<()> {
        for (i, v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { op, detail: format!("element {i} is {v}") });
            }
        }
        Ok(())
    }

    fn same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op,
                detail: format!("{:?} vs {:?}", self.shape, other.shape),
            });
        }
        Ok(())
    }

    fn finished(shape: Vec<usize>, data: Vec<S>, op: &'static str) -> Result<Self> {
        let t = Tensor { shape, data };
        t.check_finite(op)?;
        Ok(t)
    }

    /// Matrix product `[m,k] x [k,n] -> [m,n]`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.shape.len() != 2 || other.shape.len() != 2 || self.shape[1] != other.shape[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                detail: format!("{:?} x {:?}", self.shape, other.shape),
            });
        }
        let (m, k, n) = (self.shape[0], self.shape[1], other.shape[1]);
        let mut out = vec![S::zero(); m * n];
        for i in 0..m {
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == S::zero() {
                    continue;
                }
                let brow = &other.data[p * n..(p + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] = orow[j] + a * brow[j];
                }
            }
        }
        Tensor::finished(vec![m, n], out, "matmul")
    }

    /// Matrix-vector product `[m,k] x [k] -> [m]`.
    pub fn matvec(&self, v: &Self) -> Result<Self> {
        if self.shape.len() != 2 || v.shape.len() != 1 || self.shape[1] != v.shape[0] {
            return Err(Error::ShapeMismatch {
                op: "matvec",
                detail: format!("{:?} x {:?}", self.shape, v.shape),
            });
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        let mut out = vec![S::zero(); m];
        for i in 0..m {
            let row = &self.data[i * k..(i + 1) * k];
            let mut acc = S::zero();
            for p in 0..k {
                acc = acc + row[p] * v.data[p];
            }
            out[i] = acc;
        }
        Tensor::finished(vec![m], out, "matvec")
    }

    /// Elementwise sum; also broadcasts `[m,n] + [n]` over rows.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape.len() == 2 && other.shape.len() == 1 && self.shape[1] == other.shape[0] {
            let (m, n) = (self.shape[0], self.shape[1]);
            let mut out = self.data.clone();
            for i in 0..m {
                for j in 0..n {
                    out[i * n + j] = out[i * n + j] + other.data[j];
                }
            }
            return Tensor::finished(self.shape.clone(), out, "add");
        }
        self.same_shape(other, "add")?;
        let out = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        Tensor::finished(self.shape.clone(), out, "add")
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other, "sub")?;
        let out = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Tensor::finished(self.shape.clone(), out, "sub")
    }

    /// Elementwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_shape(other, "mul")?;
        let out = self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).collect();
        Tensor::finished(self.shape.clone(), out, "mul")
    }

    pub fn scale(&self, c: S) -> Result<Self> {
        let out = self.data.iter().map(|&a| a * c).collect();
        Tensor::finished(self.shape.clone(), out, "scale")
    }

    pub fn add_const(&self, c: S) -> Result<Self> {
        let out = self.data.iter().map(|&a| a + c).collect();
        Tensor::finished(self.shape.clone(), out, "add_const")
    }

    pub fn tanh(&self) -> Result<Self> {
        let out = self.data.iter().map(|a| a.tanh()).collect();
        Tensor::finished(self.shape.clone(), out, "tanh")
    }

    pub fn exp(&self) -> Result<Self> {
        let out = self.data.iter().map(|a| a.exp()).collect();
        Tensor::finished(self.shape.clone(), out, "exp")
    }

    pub fn ln(&self) -> Result<Self> {
        let out = self.data.iter().map(|a| a.ln()).collect();
        Tensor::finished(self.shape.clone(), out, "ln")
    }

    pub fn square(&self) -> Result<Self> {
        let out = self.data.iter().map(|&a| a * a).collect();
        Tensor::finished(self.shape.clone(), out, "square")
    }

    pub fn clamp(&self, lo: S, hi: S) -> Result<Self> {
        let out = self.data.iter().map(|&a| if a < lo { lo } else if a > hi { hi } else { a }).collect();
        Tensor::finished(self.shape.clone(), out, "clamp")
    }

    /// Sum of all elements, as a scalar tensor.
    pub fn reduce_sum(&self) -> Result<Self> {
        let mut acc = S::zero();
        for &v in &self.data {
            acc = acc + v;
        }
        Tensor::finished(vec![1], vec![acc], "reduce_sum")
    }

    /// log(Σ exp(x)) over all elements, max-shifted for stability.
    pub fn logsumexp(&self) -> Result<Self> {
        if self.data.is_empty() {
            return Err(Error::ShapeMismatch { op: "logsumexp", detail: "empty input".into() });
        }
        let m = self.data.iter().cloned().fold(S::neg_infinity(), S::max);
        let mut acc = S::zero();
        for &v in &self.data {
            acc = acc + (v - m).exp();
        }
        Tensor::finished(vec![1], vec![m + acc.ln()], "logsumexp")
    }

    /// softmax over all elements (rank preserved), max-shifted.
    pub fn softmax(&self) -> Result<Self> {
        if self.data.is_empty() {
            return Err(Error::ShapeMismatch { op: "softmax", detail: "empty input".into() });
        }
        let m = self.data.iter().cloned().fold(S::neg_infinity(), S::max);
        let mut out: Vec<S> = self.data.iter().map(|&v| (v - m).exp()).collect();
        let total: S = out.iter().cloned().fold(S::zero(), |a, b| a + b);
        for v in &mut out {
            *v = *v / total;
        }
        Tensor::finished(self.shape.clone(), out, "softmax")
    }

    /// Row gather for rank-2 (or element gather for rank-1).
    pub fn gather(&self, indices: &[usize]) -> Result<Self> {
        match self.shape.len() {
            1 => {
                let mut out = Vec::with_capacity(indices.len());
                for &i in indices {
                    if i >= self.shape[0] {
                        return Err(Error::InvalidArgument {
                            arg: "indices",
                            detail: format!("index {} out of bounds for length {}", i, self.shape[0]),
                        });
                    }
                    out.push(self.data[i]);
                }
                Tensor::finished(vec![indices.len()], out, "gather")
            }
            2 => {
                let (m, n) = (self.shape[0], self.shape[1]);
                let mut out = Vec::with_capacity(indices.len() * n);
                for &i in indices {
                    if i >= m {
                        return Err(Error::InvalidArgument {
                            arg: "indices",
                            detail: format!("row {} out of bounds for {} rows", i, m),
                        });
                    }
                    out.extend_from_slice(&self.data[i * n..(i + 1) * n]);
                }
                Tensor::finished(vec![indices.len(), n], out, "gather")
            }
            _ => Err(Error::ShapeMismatch {
                op: "gather",
                detail: format!("rank {} unsupported", self.shape.len()),
            }),
        }
    }

    /// Same data, new shape with equal element count.
    pub fn reshape(&self, shape: Vec<usize>) -> Result<Self> {
        let count: usize = shape.iter().product();
        if count != self.data.len() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                detail: format!("{:?} -> {:?}", self.shape, shape),
            });
        }
        Ok(Tensor { shape, data: self.data.clone() })
    }

    /// Rank-2 transpose.
    pub fn transpose(&self) -> Result<Self> {
        if self.shape.len() != 2 {
            return Err(Error::ShapeMismatch {
                op: "transpose",
                detail: format!("rank {} unsupported", self.shape.len()),
            });
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut out = vec![S::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Ok(Tensor { shape: vec![n, m], data: out })
    }

    /// L-infinity distance between same-shaped tensors.
    pub fn linf_distance(&self, other: &Self) -> Result<S> {
        self.same_shape(other, "linf_distance")?;
        let mut d = S::zero();
        for (&a, &b) in self.data.iter().zip(&other.data) {
            d = d.max((a - b).abs());
        }
        Ok(d)
    }
}
