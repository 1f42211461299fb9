//! First-difference operators on factor vectors and the TV/QV penalties built
//! on them.
//!
//! Operators are applied matrix-free. [`SmoothnessOperator::to_dense`] builds
//! the explicit matrix for reference checks.

use crate::error::{Result, SpcError};
use crate::scalar::Scalar;

/// Penalty exponent: `p = 1` (total variation) or `p = 2` (quadratic variation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PenaltyKind {
    Tv,
    Qv,
}

impl PenaltyKind {
    pub fn from_p(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Self::Tv),
            2 => Ok(Self::Qv),
            other => Err(SpcError::InvalidExponent(other)),
        }
    }

    pub fn p(self) -> u32 {
        match self {
            Self::Tv => 1,
            Self::Qv => 2,
        }
    }
}

impl TryFrom<u32> for PenaltyKind {
    type Error = SpcError;

    fn try_from(p: u32) -> Result<Self> {
        Self::from_p(p)
    }
}

/// Difference operator acting on one mode's factor vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothnessOperator {
    /// `(Lu)(i) = u(i) - u(i+1)`, `len - 1` rows.
    Chain { len: usize },
    /// The vector is an `height x width` grid (row index fastest). Rows are the
    /// vertical differences followed by the horizontal differences.
    StackedGrid { height: usize, width: usize },
    /// No smoothing on this mode; zero rows.
    Disabled { len: usize },
}

impl SmoothnessOperator {
    pub fn chain(len: usize) -> Result<Self> {
        if len < 2 {
            return Err(SpcError::InvalidParameter(format!(
                "chain operator needs length >= 2, got {len}"
            )));
        }
        Ok(Self::Chain { len })
    }

    pub fn grid(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(SpcError::InvalidParameter(format!(
                "grid operator needs positive extents, got {height}x{width}"
            )));
        }
        Ok(Self::StackedGrid { height, width })
    }

    pub fn disabled(len: usize) -> Self {
        Self::Disabled { len }
    }

    /// Chain operator for modes of extent >= 2, disabled otherwise.
    pub fn default_for(len: usize) -> Self {
        Self::chain(len).unwrap_or(Self::Disabled { len })
    }

    /// Length `I_n` of the vectors the operator acts on.
    pub fn len(&self) -> usize {
        match *self {
            Self::Chain { len } | Self::Disabled { len } => len,
            Self::StackedGrid { height, width } => height * width,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of rows of the operator.
    pub fn rows(&self) -> usize {
        match *self {
            Self::Chain { len } => len - 1,
            Self::StackedGrid { height, width } => (height - 1) * width + height * (width - 1),
            Self::Disabled { .. } => 0,
        }
    }

    pub fn is_disabled(&self) -> bool {
        matches!(self, Self::Disabled { .. })
    }

    fn check_len(&self, found: usize) -> Result<()> {
        if found == self.len() {
            Ok(())
        } else {
            Err(SpcError::LengthMismatch {
                expected: self.len(),
                found,
            })
        }
    }

    /// `L u`.
    pub fn apply<T: Scalar>(&self, u: &[T]) -> Result<Vec<T>> {
        self.check_len(u.len())?;
        let mut out = Vec::with_capacity(self.rows());
        match *self {
            Self::Chain { .. } => out.extend(u.windows(2).map(|w| w[0] - w[1])),
            Self::StackedGrid { height, width } => {
                for w in 0..width {
                    let col = &u[w * height..(w + 1) * height];
                    out.extend(col.windows(2).map(|p| p[0] - p[1]));
                }
                for w in 0..width.saturating_sub(1) {
                    for h in 0..height {
                        out.push(u[h + w * height] - u[h + (w + 1) * height]);
                    }
                }
            }
            Self::Disabled { .. } => {}
        }
        Ok(out)
    }

    /// `L^T w`.
    pub fn apply_transpose<T: Scalar>(&self, w: &[T]) -> Result<Vec<T>> {
        if w.len() != self.rows() {
            return Err(SpcError::LengthMismatch {
                expected: self.rows(),
                found: w.len(),
            });
        }
        let mut out = vec![T::zero(); self.len()];
        match *self {
            Self::Chain { .. } => {
                for (i, &wi) in w.iter().enumerate() {
                    out[i] += wi;
                    out[i + 1] -= wi;
                }
            }
            Self::StackedGrid { height, width } => {
                let mut k = 0;
                for c in 0..width {
                    for h in 0..height - 1 {
                        out[h + c * height] += w[k];
                        out[h + 1 + c * height] -= w[k];
                        k += 1;
                    }
                }
                for c in 0..width.saturating_sub(1) {
                    for h in 0..height {
                        out[h + c * height] += w[k];
                        out[h + (c + 1) * height] -= w[k];
                        k += 1;
                    }
                }
            }
            Self::Disabled { .. } => {}
        }
        Ok(out)
    }

    /// `||L u||_p^p`.
    pub fn penalty<T: Scalar>(&self, u: &[T], kind: PenaltyKind) -> Result<T> {
        let d = self.apply(u)?;
        Ok(match kind {
            PenaltyKind::Tv => d.iter().fold(T::zero(), |acc, x| acc + x.abs()),
            PenaltyKind::Qv => d.iter().fold(T::zero(), |acc, &x| acc + x * x),
        })
    }

    /// `L^T SGN(L u)` for TV (a subgradient of `||Lu||_1`) and `2 L^T L u`
    /// for QV (the gradient of `||Lu||_2^2`).
    pub fn penalty_subgradient<T: Scalar>(&self, u: &[T], kind: PenaltyKind) -> Result<Vec<T>> {
        let d = self.apply(u)?;
        match kind {
            PenaltyKind::Tv => self.apply_transpose(&sgn_vec(&d)),
            PenaltyKind::Qv => {
                let two = T::lit(2.0);
                let doubled: Vec<T> = d.into_iter().map(|x| two * x).collect();
                self.apply_transpose(&doubled)
            }
        }
    }

    /// Explicit `rows x len` matrix, row-major.
    pub fn to_dense<T: Scalar>(&self) -> Vec<Vec<T>> {
        let n = self.len();
        let mut rows = vec![vec![T::zero(); n]; self.rows()];
        for j in 0..n {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            let col = self.apply(&e).expect("basis vector has operator length");
            for (row, v) in rows.iter_mut().zip(col) {
                row[j] = v;
            }
        }
        rows
    }
}

/// Entrywise sign with `sgn(0) = 0`.
pub fn sgn_vec<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter()
        .map(|&v| {
            if v > T::zero() {
                T::one()
            } else if v < T::zero() {
                -T::one()
            } else {
                T::zero()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn chain_apply_and_transpose() {
        let op = SmoothnessOperator::chain(3).unwrap();
        assert_eq!(op.apply(&[0.0, 1.0, 2.0]).unwrap(), vec![-1.0, -1.0]);
        assert_eq!(op.apply_transpose(&[1.0, 0.0]).unwrap(), vec![1.0, -1.0, 0.0]);
        assert_eq!(op.apply(&[4.0, 4.0, 4.0]).unwrap(), vec![0.0, 0.0]);
        assert!(op.apply(&[1.0, 2.0]).is_err());
        assert!(op.apply_transpose(&[1.0]).is_err());
    }

    #[test]
    fn stacked_grid_rows_for_2x2() {
        let op = SmoothnessOperator::grid(2, 2).unwrap();
        let (a, b, c, d) = (1.0, 2.0, 4.0, 8.0);
        let out = op.apply(&[a, b, c, d]).unwrap();
        assert_eq!(out, vec![a - b, c - d, a - c, b - d]);
        assert_eq!(op.rows(), 4);
        let g3 = SmoothnessOperator::grid(3, 4).unwrap();
        assert_eq!(g3.rows(), 3 * 3 + 2 * 4);
        assert_eq!(SmoothnessOperator::grid(1, 1).unwrap().rows(), 0);
    }

    #[test]
    fn disabled_operator() {
        let op = SmoothnessOperator::disabled(3);
        assert!(op.apply(&[1.0, 2.0, 3.0]).unwrap().is_empty());
        assert_eq!(op.apply_transpose::<f64>(&[]).unwrap(), vec![0.0; 3]);
        assert_eq!(op.penalty(&[1.0, 5.0, 3.0], PenaltyKind::Qv).unwrap(), 0.0);
    }

    #[test]
    fn constructor_guards() {
        assert!(SmoothnessOperator::chain(1).is_err());
        assert!(SmoothnessOperator::grid(0, 3).is_err());
        assert_eq!(SmoothnessOperator::default_for(1), SmoothnessOperator::Disabled { len: 1 });
        assert!(PenaltyKind::from_p(3).is_err());
        assert_eq!(PenaltyKind::try_from(2).unwrap(), PenaltyKind::Qv);
    }

    #[test]
    fn sgn_definition() {
        assert_eq!(sgn_vec(&[2.5, 0.0, -0.1]), vec![1.0, 0.0, -1.0]);
        assert_eq!(sgn_vec(&[-0.0]), vec![0.0]);
    }

    #[test]
    fn penalty_values() {
        let op = SmoothnessOperator::chain(2).unwrap();
        let u = [0.6f64, 0.8];
        assert!((op.penalty(&u, PenaltyKind::Tv).unwrap() - 0.2).abs() < 1e-15);
        assert!((op.penalty(&u, PenaltyKind::Qv).unwrap() - 0.04).abs() < 1e-15);
        assert_eq!(op.penalty(&[0.3, 0.3], PenaltyKind::Tv).unwrap(), 0.0);
    }

    #[test]
    fn qv_gradient_on_basis_vector() {
        let op = SmoothnessOperator::chain(3).unwrap();
        let g = op.penalty_subgradient(&[1.0, 0.0, 0.0], PenaltyKind::Qv).unwrap();
        assert!(close(&g, &[2.0, -2.0, 0.0], 0.0));
        let tv = op.penalty_subgradient(&[0.5, 0.5, 0.5], PenaltyKind::Tv).unwrap();
        assert_eq!(tv, vec![0.0; 3]);
    }

    #[test]
    fn dense_matrix_matches_formula() {
        let op = SmoothnessOperator::chain(3).unwrap();
        let m: Vec<Vec<f64>> = op.to_dense();
        assert_eq!(m, vec![vec![1.0, -1.0, 0.0], vec![0.0, 1.0, -1.0]]);
    }
}
