//! Helpers shared by the integration tests: seeded data and naive references.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use spc_core::{DenseTensor, Mask, Matrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn unit_vec(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let v = normal_vec(rng, len);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn random_tensor(rng: &mut impl Rng, dims: &[usize]) -> DenseTensor<f64> {
    let len = dims.iter().product();
    DenseTensor::from_vec(dims, normal_vec(rng, len)).unwrap()
}

/// All multi-indices of `dims` with the first index fastest.
pub fn indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0; dims.len()];
    for _ in 0..total {
        out.push(idx.clone());
        for (i, &d) in idx.iter_mut().zip(dims) {
            *i += 1;
            if *i < d {
                break;
            }
            *i = 0;
        }
    }
    out
}

/// Value from a tensor by explicit offset arithmetic, not the library's
/// accessors.
pub fn at(t: &DenseTensor<f64>, idx: &[usize]) -> f64 {
    let mut lin = 0;
    let mut stride = 1;
    for (&i, &d) in idx.iter().zip(t.dims()) {
        lin += i * stride;
        stride *= d;
    }
    t.as_slice()[lin]
}

/// Naive mode-`mode` unfolding: entry `(i_mode, j)` where `j` enumerates the
/// remaining indices with the lowest remaining mode fastest.
pub fn naive_unfold(t: &DenseTensor<f64>, mode: usize) -> Vec<Vec<f64>> {
    let dims = t.dims();
    let cols: usize = dims.iter().product::<usize>() / dims[mode];
    let mut m = vec![vec![f64::NAN; cols]; dims[mode]];
    for idx in indices(dims) {
        let mut j = 0;
        let mut stride = 1;
        for (k, &i) in idx.iter().enumerate() {
            if k != mode {
                j += i * stride;
                stride *= dims[k];
            }
        }
        m[idx[mode]][j] = at(t, &idx);
    }
    m
}

/// Naive `t x_mode v`; returns values keyed by the reduced index and the
/// absolute-sum of the contributing terms.
pub fn naive_mode_vector_product(t: &DenseTensor<f64>, mode: usize, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let dims = t.dims();
    let reduced: Vec<usize> = dims
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != mode)
        .map(|(_, &d)| d)
        .collect();
    let len = reduced.iter().product::<usize>().max(1);
    let mut out = vec![0.0; len];
    let mut mag = vec![0.0; len];
    for idx in indices(dims) {
        let mut j = 0;
        let mut stride = 1;
        for (k, &i) in idx.iter().enumerate() {
            if k != mode {
                j += i * stride;
                stride *= dims[k];
            }
        }
        let term = at(t, &idx) * v[idx[mode]];
        out[j] += term;
        mag[j] += term.abs();
    }
    (out, mag)
}

/// Naive contraction of all modes but `mode`; `vectors` holds one vector for
/// every mode (the entry at `mode` is ignored).
pub fn naive_contract_all_but(t: &DenseTensor<f64>, mode: usize, vectors: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let dims = t.dims();
    let mut out = vec![0.0; dims[mode]];
    let mut mag = vec![0.0; dims[mode]];
    for idx in indices(dims) {
        let mut term = at(t, &idx);
        for (k, &i) in idx.iter().enumerate() {
            if k != mode {
                term *= vectors[k][i];
            }
        }
        out[idx[mode]] += term;
        mag[idx[mode]] += term.abs();
    }
    (out, mag)
}

pub fn naive_inner_rank1(t: &DenseTensor<f64>, vectors: &[Vec<f64>]) -> (f64, f64) {
    let mut sum = 0.0;
    let mut mag = 0.0;
    for idx in indices(t.dims()) {
        let mut term = at(t, &idx);
        for (k, &i) in idx.iter().enumerate() {
            term *= vectors[k][i];
        }
        sum += term;
        mag += term.abs();
    }
    (sum, mag)
}

/// `|a - b| <= tol * scale`, where `scale` is the absolute sum of the terms
/// that produced `b` (at least the smallest normal number).
pub fn rel_close(a: f64, b: f64, scale: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * scale.max(f64::MIN_POSITIVE)
}

pub fn matrix_rows(m: &Matrix<f64>) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

/// Golden-section minimisation of a unimodal `f` on `[lo, hi]`.
pub fn golden_section<V: PartialOrd>(f: impl Fn(f64) -> V, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Central finite-difference gradient.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Random mask with roughly `ratio` of the entries missing and at least one
/// observed entry.
pub fn bernoulli_mask(rng: &mut impl Rng, dims: &[usize], ratio: f64) -> Mask {
    let len: usize = dims.iter().product();
    let mut observed: Vec<bool> = (0..len).map(|_| rng.random::<f64>() >= ratio).collect();
    if !observed.iter().any(|&o| o) {
        observed[0] = true;
    }
    Mask::from_vec(dims, observed).unwrap()
}

/// Exact rank-1 tensor `scale * a ∘ b ∘ ..`.
pub fn rank1_tensor(vectors: &[Vec<f64>], scale: f64) -> DenseTensor<f64> {
    let dims: Vec<usize> = vectors.iter().map(Vec::len).collect();
    DenseTensor::from_fn(&dims, |idx| {
        idx.iter()
            .zip(vectors)
            .fold(scale, |acc, (&i, v)| acc * v[i])
    })
    .unwrap()
}

/// Unevaluated sum `hi + lo` carrying roughly twice the precision of `f64`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        Self {
            hi: s,
            lo: (a - (s - bb)) + (b - bb),
        }
    }

    fn two_prod(a: f64, b: f64) -> Self {
        let p = a * b;
        Self {
            hi: p,
            lo: a.mul_add(b, -p),
        }
    }

    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn add(self, o: Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        let lo = s.lo + self.lo + o.lo;
        Self::two_sum(s.hi, lo)
    }

    pub fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub fn mul(self, o: Self) -> Self {
        let p = Self::two_prod(self.hi, o.hi);
        let lo = p.lo + self.hi * o.lo + self.lo * o.hi;
        Self::two_sum(p.hi, lo)
    }
}

/// Normalised values order by `hi`, then `lo`.
impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        (self.hi, self.lo).partial_cmp(&(other.hi, other.lo))
    }
}
