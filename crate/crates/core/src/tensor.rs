//! Dense N-way tensors, observation masks, and the multilinear kernels used by
//! the solvers.
//!
//! Storage is canonical with the first index varying fastest: the entry at
//! `(i_1, .., i_N)` (0-based) lives at `i_1 + I_1 * (i_2 + I_2 * (i_3 + ..))`.

use crate::error::{Result, SpcError};
use crate::scalar::Scalar;

/// Dense row-major matrix, used for mode unfoldings.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: T) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }
}

/// Which part of a tensor a mask-driven operation touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Entries in the observed set.
    Observed,
    /// Entries outside the observed set.
    Unobserved,
}

/// Boolean tensor marking observed entries (`true` = observed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    dims: Vec<usize>,
    observed: Vec<bool>,
}

impl Mask {
    pub fn all_observed(dims: &[usize]) -> Result<Self> {
        let len = element_count(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            observed: vec![true; len],
        })
    }

    pub fn from_vec(dims: &[usize], observed: Vec<bool>) -> Result<Self> {
        let len = element_count(dims)?;
        if observed.len() != len {
            return Err(SpcError::LengthMismatch {
                expected: len,
                found: observed.len(),
            });
        }
        Ok(Self {
            dims: dims.to_vec(),
            observed,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.observed
    }

    #[inline]
    pub fn is_observed(&self, linear: usize) -> bool {
        self.observed[linear]
    }

    pub fn set(&mut self, linear: usize, observed: bool) {
        self.observed[linear] = observed;
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn missing_count(&self) -> usize {
        self.len() - self.observed_count()
    }

    /// Whether entry `linear` belongs to `region`.
    #[inline]
    pub fn in_region(&self, linear: usize, region: Region) -> bool {
        match region {
            Region::Observed => self.observed[linear],
            Region::Unobserved => !self.observed[linear],
        }
    }

    pub fn region_count(&self, region: Region) -> usize {
        match region {
            Region::Observed => self.observed_count(),
            Region::Unobserved => self.missing_count(),
        }
    }

    pub(crate) fn require_observed(&self) -> Result<()> {
        if self.observed.iter().any(|&o| o) {
            Ok(())
        } else {
            Err(SpcError::EmptyObservedSet)
        }
    }
}

/// Dense N-way real tensor in canonical (first-index-fastest) order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor<T> {
    dims: Vec<usize>,
    data: Vec<T>,
}

fn element_count(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.iter().any(|&d| d == 0) {
        return Err(SpcError::InvalidDims(dims.to_vec()));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| SpcError::InvalidDims(dims.to_vec()))
}

fn check_lengths<T>(dims: &[usize], vectors: &[&[T]]) -> Result<()> {
    if vectors.len() != dims.len() {
        return Err(SpcError::LengthMismatch {
            expected: dims.len(),
            found: vectors.len(),
        });
    }
    for (&d, v) in dims.iter().zip(vectors) {
        if v.len() != d {
            return Err(SpcError::LengthMismatch {
                expected: d,
                found: v.len(),
            });
        }
    }
    Ok(())
}

/// Visits every mode-1 fiber: `f(index, offset)` where `index[0] == 0` and
/// `offset` is the linear position of the fiber's first entry.
fn for_each_fiber(dims: &[usize], mut f: impl FnMut(&[usize], usize)) {
    let n0 = dims[0];
    let mut index = vec![0usize; dims.len()];
    let mut offset = 0usize;
    loop {
        f(&index, offset);
        offset += n0;
        let mut m = 1;
        loop {
            if m == dims.len() {
                return;
            }
            index[m] += 1;
            if index[m] < dims[m] {
                break;
            }
            index[m] = 0;
            m += 1;
        }
    }
}

impl<T: Scalar> DenseTensor<T> {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::filled(dims, T::zero())
    }

    pub fn filled(dims: &[usize], value: T) -> Result<Self> {
        let len = element_count(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![value; len],
        })
    }

    pub fn from_vec(dims: &[usize], data: Vec<T>) -> Result<Self> {
        let len = element_count(dims)?;
        if data.len() != len {
            return Err(SpcError::LengthMismatch {
                expected: len,
                found: data.len(),
            });
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index (0-based).
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> T) -> Result<Self> {
        let len = element_count(dims)?;
        let mut data = Vec::with_capacity(len);
        let mut index = vec![0usize; dims.len()];
        for _ in 0..len {
            data.push(f(&index));
            for (i, &d) in index.iter_mut().zip(dims) {
                *i += 1;
                if *i < d {
                    break;
                }
                *i = 0;
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Strides of the canonical layout (`strides[0] == 1`).
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = Vec::with_capacity(self.dims.len());
        let mut s = 1;
        for &d in &self.dims {
            strides.push(s);
            s *= d;
        }
        strides
    }

    pub fn linear_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims.len());
        let mut lin = 0;
        let mut stride = 1;
        for (&i, &d) in index.iter().zip(&self.dims) {
            debug_assert!(i < d);
            lin += i * stride;
            stride *= d;
        }
        lin
    }

    pub fn get(&self, index: &[usize]) -> T {
        self.data[self.linear_index(index)]
    }

    pub fn set(&mut self, index: &[usize], value: T) {
        let lin = self.linear_index(index);
        self.data[lin] = value;
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub(crate) fn require_same_dims(&self, dims: &[usize]) -> Result<()> {
        if self.dims == dims {
            Ok(())
        } else {
            Err(SpcError::DimensionMismatch {
                expected: self.dims.clone(),
                found: dims.to_vec(),
            })
        }
    }

    /// Sum of squared entries.
    pub fn frobenius_norm_sq(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc + x * x)
    }

    /// Sum of squared entries restricted to `region` of `mask`.
    pub fn masked_norm_sq(&self, mask: &Mask, region: Region) -> Result<T> {
        self.require_same_dims(mask.dims())?;
        Ok(self
            .data
            .iter()
            .enumerate()
            .filter(|(i, _)| mask.in_region(*i, region))
            .fold(T::zero(), |acc, (_, &x)| acc + x * x))
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.dims.len() {
            Ok(())
        } else {
            Err(SpcError::ModeOutOfRange {
                mode,
                ndim: self.dims.len(),
            })
        }
    }

    /// Mode-`mode` unfolding (0-based mode). Rows are indexed by `i_mode`;
    /// the remaining indices form the column with the smallest remaining mode
    /// varying fastest.
    pub fn unfold(&self, mode: usize) -> Result<Matrix<T>> {
        self.check_mode(mode)?;
        let rows = self.dims[mode];
        let cols = self.data.len() / rows;
        let mut out = Matrix::zeros(rows, cols);
        let strides = self.strides();
        let inner = strides[mode];
        for (lin, &x) in self.data.iter().enumerate() {
            let row = (lin / inner) % rows;
            let col = lin % inner + (lin / (inner * rows)) * inner;
            out.set(row, col, x);
        }
        Ok(out)
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(matrix: &Matrix<T>, mode: usize, dims: &[usize]) -> Result<Self> {
        let len = element_count(dims)?;
        if mode >= dims.len() {
            return Err(SpcError::ModeOutOfRange {
                mode,
                ndim: dims.len(),
            });
        }
        if matrix.rows() != dims[mode] || matrix.rows() * matrix.cols() != len {
            return Err(SpcError::DimensionMismatch {
                expected: vec![dims[mode], len / dims[mode]],
                found: vec![matrix.rows(), matrix.cols()],
            });
        }
        let inner: usize = dims[..mode].iter().product();
        let rows = dims[mode];
        let data = (0..len)
            .map(|lin| {
                let row = (lin / inner) % rows;
                let col = lin % inner + (lin / (inner * rows)) * inner;
                matrix.get(row, col)
            })
            .collect();
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    /// Mode product with a matrix of shape `I_mode x J`: the result has extent
    /// `J` in `mode` and entries `sum_{i_mode} t[.., i_mode, ..] * a[i_mode, j]`,
    /// so that `unfold(result, mode) == a^T * unfold(t, mode)`.
    pub fn mode_product(&self, mode: usize, a: &Matrix<T>) -> Result<Self> {
        self.check_mode(mode)?;
        if a.rows() != self.dims[mode] {
            return Err(SpcError::LengthMismatch {
                expected: self.dims[mode],
                found: a.rows(),
            });
        }
        let mut dims = self.dims.clone();
        dims[mode] = a.cols();
        let mut out = Self::zeros(&dims)?;
        let inner: usize = self.dims[..mode].iter().product();
        let rows = self.dims[mode];
        let outer = self.data.len() / (inner * rows);
        let j_ext = a.cols();
        for o in 0..outer {
            for i in 0..rows {
                let src = &self.data[(o * rows + i) * inner..(o * rows + i + 1) * inner];
                for j in 0..j_ext {
                    let aij = a.get(i, j);
                    let dst = &mut out.data[(o * j_ext + j) * inner..(o * j_ext + j + 1) * inner];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += aij * s;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Contracts `mode` with `v`, returning the order-(N-1) tensor with that
    /// mode removed. A first-order input collapses to a single-entry tensor of
    /// shape `[1]`.
    pub fn mode_vector_product(&self, mode: usize, v: &[T]) -> Result<Self> {
        self.check_mode(mode)?;
        if v.len() != self.dims[mode] {
            return Err(SpcError::LengthMismatch {
                expected: self.dims[mode],
                found: v.len(),
            });
        }
        let mut dims: Vec<usize> = self
            .dims
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != mode)
            .map(|(_, &d)| d)
            .collect();
        if dims.is_empty() {
            dims.push(1);
        }
        let inner: usize = self.dims[..mode].iter().product();
        let rows = self.dims[mode];
        let outer = self.data.len() / (inner * rows);
        let mut data = vec![T::zero(); inner * outer];
        for o in 0..outer {
            let dst = &mut data[o * inner..(o + 1) * inner];
            for (i, &vi) in v.iter().enumerate() {
                let src = &self.data[(o * rows + i) * inner..(o * rows + i + 1) * inner];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += vi * s;
                }
            }
        }
        Ok(Self { dims, data })
    }

    /// Contracts every mode except `mode` with the given vectors, which are
    /// listed in increasing mode order with `mode` skipped.
    pub fn contract_all_but(&self, mode: usize, vectors: &[&[T]]) -> Result<Vec<T>> {
        self.check_mode(mode)?;
        let others: Vec<usize> = self
            .dims
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != mode)
            .map(|(_, &d)| d)
            .collect();
        if vectors.len() != others.len() {
            return Err(SpcError::LengthMismatch {
                expected: others.len(),
                found: vectors.len(),
            });
        }
        for (&d, v) in others.iter().zip(vectors) {
            if v.len() != d {
                return Err(SpcError::LengthMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
        }
        let full: Vec<&[T]> = (0..self.ndim())
            .map(|m| match m.cmp(&mode) {
                std::cmp::Ordering::Less => vectors[m],
                std::cmp::Ordering::Equal => &[][..],
                std::cmp::Ordering::Greater => vectors[m - 1],
            })
            .collect();
        let mut out = vec![T::zero(); self.dims[mode]];
        let n0 = self.dims[0];
        for_each_fiber(&self.dims, |index, offset| {
            let fiber = &self.data[offset..offset + n0];
            let mut w = T::one();
            for m in 1..index.len() {
                if m != mode {
                    w *= full[m][index[m]];
                }
            }
            if mode == 0 {
                for (o, &x) in out.iter_mut().zip(fiber) {
                    *o += w * x;
                }
            } else {
                let acc = crate::scalar::dot(full[0], fiber);
                out[index[mode]] += w * acc;
            }
        });
        Ok(out)
    }

    /// `self += coeff * v_1 ∘ v_2 ∘ .. ∘ v_N`.
    pub fn rank1_accumulate(&mut self, coeff: T, vectors: &[&[T]]) -> Result<()> {
        check_lengths(&self.dims, vectors)?;
        if coeff == T::zero() {
            return Ok(());
        }
        let n0 = self.dims[0];
        let dims = self.dims.clone();
        let data = &mut self.data;
        for_each_fiber(&dims, |index, offset| {
            let mut w = coeff;
            for m in 1..index.len() {
                w *= vectors[m][index[m]];
            }
            for (d, &v0) in data[offset..offset + n0].iter_mut().zip(vectors[0]) {
                *d += w * v0;
            }
        });
        Ok(())
    }

    /// Inner product with the rank-1 tensor `v_1 ∘ .. ∘ v_N`.
    pub fn inner_with_rank1(&self, vectors: &[&[T]]) -> Result<T> {
        check_lengths(&self.dims, vectors)?;
        let n0 = self.dims[0];
        let mut total = T::zero();
        for_each_fiber(&self.dims, |index, offset| {
            let mut w = T::one();
            for m in 1..index.len() {
                w *= vectors[m][index[m]];
            }
            total += w * crate::scalar::dot(vectors[0], &self.data[offset..offset + n0]);
        });
        Ok(total)
    }

    /// Copies `src` into `self` on the selected region of `mask`.
    pub fn masked_overwrite(&mut self, src: &Self, mask: &Mask, region: Region) -> Result<()> {
        self.require_same_dims(src.dims())?;
        self.require_same_dims(mask.dims())?;
        for (i, (d, &s)) in self.data.iter_mut().zip(&src.data).enumerate() {
            if mask.in_region(i, region) {
                *d = s;
            }
        }
        Ok(())
    }

    /// Sets every entry of the selected region of `mask` to `value`.
    pub fn masked_fill(&mut self, value: T, mask: &Mask, region: Region) -> Result<()> {
        self.require_same_dims(mask.dims())?;
        for (i, d) in self.data.iter_mut().enumerate() {
            if mask.in_region(i, region) {
                *d = value;
            }
        }
        Ok(())
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.require_same_dims(other.dims())?;
        Ok(Self {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        })
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> DenseTensor<U> {
        DenseTensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&x| U::lit(x.to_f64_lossy())).collect(),
        }
    }
}

/// Sum of squared entries of `t`.
pub fn frobenius_norm_sq<T: Scalar>(t: &DenseTensor<T>) -> T {
    t.frobenius_norm_sq()
}
