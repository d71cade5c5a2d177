//! The semantic PROP: a matrix of type `n -> m` is a `2^m x 2^n` array of
//! reals in `[0, 1]`, sequential composition is matrix multiplication and
//! the tensor is the Kronecker product.
//!
//! Entries are stored row-major and indexed by *codes*: the bit vector
//! `x_1 ... x_k` read as a binary number with `x_1` most significant. The
//! conventional display order (and the JSON order) is descending, all-ones
//! first; use [`StochMatrix::from_rows_desc`] / [`StochMatrix::rows_desc`]
//! to work in that order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Scalar, EPS_CLASS};

/// Largest number of input or output wires of a single matrix.
pub const MAX_ARITY: usize = 20;

/// Largest `inputs + outputs`; bounds the number of stored entries to `2^30`.
pub const MAX_TOTAL_BITS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    Stochastic,
    SubStochastic,
    Neither,
}

/// Named matrices of the PROP and the update calculus.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixKind<T: Scalar = f64> {
    Id(usize),
    /// `sigma_{n,m}`: moves the first `n` wires behind the following `m`.
    Sigma(usize, usize),
    Nabla(usize),
    Top(usize),
    /// Diagonal `k -> k` matrix that zeroes exactly the all-`b` index.
    F(usize, bool),
    /// Point distribution on the single bit `b`.
    One(bool),
    Zero(usize),
    /// Diagonal entries in display (descending) order.
    Diag(Vec<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StochMatrix<T: Scalar = f64> {
    inputs: usize,
    outputs: usize,
    data: Vec<T>,
}

pub(crate) fn check_type(inputs: usize, outputs: usize) -> Result<()> {
    if inputs > MAX_ARITY || outputs > MAX_ARITY || inputs + outputs > MAX_TOTAL_BITS {
        return Err(Error::SizeOverflow { inputs, outputs });
    }
    Ok(())
}

impl<T: Scalar> StochMatrix<T> {
    /// Builds a matrix from row-major code-indexed data, validating entries.
    pub fn new(inputs: usize, outputs: usize, data: Vec<T>) -> Result<Self> {
        check_type(inputs, outputs)?;
        if data.len() != 1 << (inputs + outputs) {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for type {inputs}->{outputs}, got {}",
                1usize << (inputs + outputs),
                data.len()
            )));
        }
        let tol = T::lit(EPS_CLASS);
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < -tol || **v > T::one() + tol) {
            return Err(Error::InvalidMatrix(format!("entry {v} outside [0, 1]")));
        }
        Ok(StochMatrix { inputs, outputs, data })
    }

    /// Internal constructor for results of closed operations; no validation.
    pub(crate) fn from_raw(inputs: usize, outputs: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), 1 << (inputs + outputs));
        StochMatrix { inputs, outputs, data }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Result<Self> {
        check_type(inputs, outputs)?;
        Ok(StochMatrix { inputs, outputs, data: vec![T::zero(); 1 << (inputs + outputs)] })
    }

    /// Fills entry `(x | y)` with `f(x, y)` for codes `x`, `y`.
    pub fn from_fn(inputs: usize, outputs: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        check_type(inputs, outputs)?;
        let cols = 1 << inputs;
        let mut data = Vec::with_capacity(cols << outputs);
        for x in 0..1usize << outputs {
            for y in 0..cols {
                data.push(f(x, y));
            }
        }
        Ok(StochMatrix { inputs, outputs, data })
    }

    /// Builds a matrix from rows listed in descending binary order.
    pub fn from_rows_desc(inputs: usize, outputs: usize, rows: &[Vec<T>]) -> Result<Self> {
        check_type(inputs, outputs)?;
        let (r, c) = (1usize << outputs, 1usize << inputs);
        if rows.len() != r || rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidMatrix(format!(
                "type {inputs}->{outputs} needs {r} rows of {c} entries"
            )));
        }
        let mut data = Vec::with_capacity(r * c);
        for x in 0..r {
            let row = &rows[r - 1 - x];
            data.extend((0..c).map(|y| row[c - 1 - y]));
        }
        StochMatrix::new(inputs, outputs, data)
    }

    /// A `0 -> m` matrix (a column vector) from entries in descending order.
    pub fn column_desc(values: &[T]) -> Result<Self> {
        let outputs = log2_exact(values.len())
            .ok_or_else(|| Error::InvalidMatrix(format!("length {} is not a power of two", values.len())))?;
        let rows: Vec<Vec<T>> = values.iter().map(|&v| vec![v]).collect();
        StochMatrix::from_rows_desc(0, outputs, &rows)
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn rows(&self) -> usize {
        1 << self.outputs
    }

    pub fn cols(&self) -> usize {
        1 << self.inputs
    }

    /// Entry `P(x | y)` for output code `x` and input code `y`.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[(x << self.inputs) | y]
    }

    #[inline]
    pub(crate) fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[(x << self.inputs) | y] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn rows_desc(&self) -> Vec<Vec<T>> {
        let (r, c) = (self.rows(), self.cols());
        (0..r).rev().map(|x| (0..c).rev().map(|y| self.get(x, y)).collect()).collect()
    }

    /// Column `y` in descending order; for a `0 -> m` matrix the whole vector.
    pub fn column_values_desc(&self, y: usize) -> Vec<T> {
        (0..self.rows()).rev().map(|x| self.get(x, y)).collect()
    }

    pub fn column_sums(&self) -> Vec<T> {
        let c = self.cols();
        let mut sums = vec![T::zero(); c];
        for row in self.data.chunks(c) {
            for (s, &v) in sums.iter_mut().zip(row) {
                *s = *s + v;
            }
        }
        sums
    }

    pub fn classify(&self) -> Classification {
        let tol = T::lit(EPS_CLASS).max(T::epsilon() * T::lit(64.0));
        if self.data.iter().any(|v| !v.is_finite() || *v < -tol) {
            return Classification::Neither;
        }
        let sums = self.column_sums();
        if sums.iter().all(|&s| (s - T::one()).abs() <= tol) {
            Classification::Stochastic
        } else if sums.iter().all(|&s| s <= T::one() + tol) {
            Classification::SubStochastic
        } else {
            Classification::Neither
        }
    }

    pub fn is_stochastic(&self) -> bool {
        self.classify() == Classification::Stochastic
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Sequential composition `self ; next`, i.e. the product `next * self`.
    pub fn compose(&self, next: &StochMatrix<T>) -> Result<StochMatrix<T>> {
        if self.outputs != next.inputs {
            return Err(Error::TypeMismatch(format!(
                "cannot compose {}->{} with {}->{}",
                self.inputs, self.outputs, next.inputs, next.outputs
            )));
        }
        check_type(self.inputs, next.outputs)?;
        let (cols, mid) = (self.cols(), self.rows());
        let mut data = vec![T::zero(); next.rows() * cols];
        for (x, out_row) in data.chunks_mut(cols).enumerate() {
            for y in 0..mid {
                let q = next.get(x, y);
                if q == T::zero() {
                    continue;
                }
                let in_row = &self.data[y * cols..(y + 1) * cols];
                for (o, &p) in out_row.iter_mut().zip(in_row) {
                    *o = *o + q * p;
                }
            }
        }
        Ok(StochMatrix::from_raw(self.inputs, next.outputs, data))
    }

    /// Kronecker product; `self` occupies the leading wires.
    pub fn tensor(&self, other: &StochMatrix<T>) -> Result<StochMatrix<T>> {
        let (inputs, outputs) = (self.inputs + other.inputs, self.outputs + other.outputs);
        check_type(inputs, outputs)?;
        let mut data = vec![T::zero(); 1 << (inputs + outputs)];
        let (c1, c2) = (self.cols(), other.cols());
        for x1 in 0..self.rows() {
            for y1 in 0..c1 {
                let a = self.get(x1, y1);
                if a == T::zero() {
                    continue;
                }
                for x2 in 0..other.rows() {
                    let row = ((x1 << other.outputs) | x2) << inputs;
                    for y2 in 0..c2 {
                        data[row | (y1 << other.inputs) | y2] = a * other.get(x2, y2);
                    }
                }
            }
        }
        Ok(StochMatrix::from_raw(inputs, outputs, data))
    }

    pub fn constant(kind: MatrixKind<T>) -> Result<StochMatrix<T>> {
        let one = T::one();
        let ind = |b: bool| if b { one } else { T::zero() };
        match kind {
            MatrixKind::Id(n) => StochMatrix::from_fn(n, n, |x, y| ind(x == y)),
            MatrixKind::Sigma(n, m) => {
                let low = (1usize << m) - 1;
                StochMatrix::from_fn(n + m, n + m, |x, y| ind(x == ((y & low) << n | y >> m)))
            }
            MatrixKind::Nabla(n) => StochMatrix::from_fn(n, 2 * n, |x, y| ind(x == (y << n | y))),
            MatrixKind::Top(n) => StochMatrix::from_fn(n, 0, |_, _| one),
            MatrixKind::F(k, b) => {
                if k == 0 {
                    return Err(Error::InvalidArity("F needs at least one wire".into()));
                }
                let hole = if b { (1usize << k) - 1 } else { 0 };
                StochMatrix::from_fn(k, k, |x, y| ind(x == y && x != hole))
            }
            MatrixKind::One(b) => StochMatrix::from_fn(0, 1, |x, _| ind((x == 1) == b)),
            MatrixKind::Zero(k) => {
                if k == 0 {
                    return Err(Error::InvalidArity("zero matrix needs at least one wire".into()));
                }
                StochMatrix::zeros(k, k)
            }
            MatrixKind::Diag(values) => {
                let k = log2_exact(values.len()).ok_or_else(|| {
                    Error::InvalidArity(format!("diagonal of length {} is not a power of two", values.len()))
                })?;
                let last = values.len() - 1;
                let m = StochMatrix::from_fn(k, k, |x, y| if x == y { values[last - x] } else { T::zero() })?;
                StochMatrix::new(k, k, m.data)
            }
        }
    }

    pub fn id(n: usize) -> Self {
        Self::constant(MatrixKind::Id(n)).expect("identity within arity cap")
    }

    /// Largest absolute entry-wise difference; infinite when types differ.
    pub fn max_abs_diff(&self, other: &StochMatrix<T>) -> T {
        if self.inputs != other.inputs || self.outputs != other.outputs {
            return T::infinity();
        }
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    pub fn scaled(&self, factor: T) -> StochMatrix<T> {
        StochMatrix::from_raw(self.inputs, self.outputs, self.data.iter().map(|&v| v * factor).collect())
    }

    /// Multiplies entry `(x | y)` by `mask(x, y)`.
    pub(crate) fn masked(&self, mut mask: impl FnMut(usize, usize) -> T) -> StochMatrix<T> {
        let mut out = self.clone();
        for x in 0..self.rows() {
            for y in 0..self.cols() {
                let v = out.get(x, y) * mask(x, y);
                out.set(x, y, v);
            }
        }
        out
    }

    /// Fixes input wire `j` to `bit` and removes it: `self . (id ⊗ 1_bit ⊗ id)`.
    pub fn restrict_input(&self, j: usize, bit: bool) -> StochMatrix<T> {
        assert!(j < self.inputs);
        let n = self.inputs - 1;
        let shift = n - j;
        let low = (1usize << shift) - 1;
        let mut data = Vec::with_capacity(1 << (n + self.outputs));
        for x in 0..self.rows() {
            for y in 0..1usize << n {
                let full = ((y & !low) << 1) | (usize::from(bit) << shift) | (y & low);
                data.push(self.get(x, full));
            }
        }
        StochMatrix::from_raw(n, self.outputs, data)
    }

    /// Whether the columns differ (beyond `tol`) when only input `j` changes.
    pub fn depends_on_input(&self, j: usize, tol: T) -> bool {
        let bit = 1usize << (self.inputs - 1 - j);
        (0..self.cols())
            .filter(|y| y & bit == 0)
            .any(|y| (0..self.rows()).any(|x| (self.get(x, y) - self.get(x, y | bit)).abs() > tol))
    }

    /// Merges input `drop` into input `keep` (both read the same wire): the
    /// composite with a duplicator feeding both positions.
    pub fn contract_inputs(&self, keep: usize, drop: usize) -> StochMatrix<T> {
        assert!(keep != drop && keep < self.inputs && drop < self.inputs);
        let n = self.inputs - 1;
        let remaining: Vec<usize> = (0..self.inputs).filter(|&j| j != drop).collect();
        let keep_pos = remaining.iter().position(|&j| j == keep).unwrap();
        let mut data = Vec::with_capacity(1 << (n + self.outputs));
        for x in 0..self.rows() {
            for y in 0..1usize << n {
                let mut bits = vec![false; self.inputs];
                for (pos, &j) in remaining.iter().enumerate() {
                    bits[j] = y >> (n - 1 - pos) & 1 == 1;
                }
                bits[drop] = bits[remaining[keep_pos]];
                data.push(self.get(x, code_of(&bits)));
            }
        }
        StochMatrix::from_raw(n, self.outputs, data)
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson {
            inputs: self.inputs,
            outputs: self.outputs,
            rows: self.rows_desc().into_iter().map(|r| r.into_iter().map(Scalar::as_f64).collect()).collect(),
        }
    }

    pub fn from_json(json: &MatrixJson) -> Result<Self> {
        let rows: Vec<Vec<T>> = json
            .rows
            .iter()
            .map(|r| r.iter().map(|&v| T::from_f64(v).unwrap_or_else(T::nan)).collect())
            .collect();
        StochMatrix::from_rows_desc(json.inputs, json.outputs, &rows)
    }
}

pub(crate) fn code_of(bits: &[bool]) -> usize {
    bits.iter().fold(0, |acc, &b| acc << 1 | usize::from(b))
}

pub(crate) fn log2_exact(len: usize) -> Option<usize> {
    len.is_power_of_two().then(|| len.trailing_zeros() as usize)
}

/// Interchange format: rows in descending binary order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    #[serde(rename = "in")]
    pub inputs: usize,
    #[serde(rename = "out")]
    pub outputs: usize,
    pub rows: Vec<Vec<f64>>,
}
