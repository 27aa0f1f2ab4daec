//! Flat-buffer vectors and matrices plus the small math kernel shared by the
//! models: matvec in both orientations, outer-product accumulation, softmax,
//! GELU, layer norm, and top-k selection with deterministic tie-breaking.
//!
//! Everything is generic over [`Scalar`] so the same forward/backward code
//! runs in f32 for training and f64 for finite-difference verification.

use std::fmt;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point element type for all numeric kernels.
pub trait Scalar:
    Float
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum<Self>
    + Send
    + Sync
    + fmt::Debug
    + fmt::Display
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

/// Dense row-major matrix over a flat buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer does not match shape");
        Mat { rows, cols, data }
    }

    /// I.i.d. Gaussian entries, mean 0, standard deviation `std`.
    ///
    /// Samples in f64 and casts, so f32 and f64 instantiations of the same
    /// seed produce the same values up to rounding.
    pub fn gaussian<R: Rng>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Self {
        let normal = StandardNormal;
        let data = (0..rows * cols)
            .map(|_| {
                let z: f64 = normal.sample(rng);
                T::from_f64(z * std)
            })
            .collect();
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> T {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut T {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn fill(&mut self, v: T) {
        self.data.fill(v);
    }

    pub fn transposed(&self) -> Mat<T> {
        let mut out = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                *out.at_mut(c, r) = self.at(r, c);
            }
        }
        out
    }

    pub fn map_convert<U: Scalar>(&self) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data
            .iter()
            .map(|&v| {
                let x = v.to_f64();
                x * x
            })
            .sum::<f64>()
            .sqrt()
    }
}

// ── vector kernels ───────────────────────────────────────────────────

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// y += alpha * x
#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for i in 0..x.len() {
        y[i] += alpha * x[i];
    }
}

pub fn scale_in_place<T: Scalar>(v: &mut [T], alpha: T) {
    for x in v {
        *x *= alpha;
    }
}

pub fn norm2<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

pub fn max_abs_diff<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x.to_f64() - y.to_f64()).abs())
        .fold(0.0, f64::max)
}

// ── matrix kernels ───────────────────────────────────────────────────

/// y = W x  (W: m×n, x: n, y: m)
pub fn matvec<T: Scalar>(w: &Mat<T>, x: &[T], y: &mut [T]) {
    debug_assert_eq!(w.cols(), x.len());
    debug_assert_eq!(w.rows(), y.len());
    for r in 0..w.rows() {
        y[r] = dot(w.row(r), x);
    }
}

/// y += W x
pub fn matvec_acc<T: Scalar>(w: &Mat<T>, x: &[T], y: &mut [T]) {
    debug_assert_eq!(w.cols(), x.len());
    debug_assert_eq!(w.rows(), y.len());
    for r in 0..w.rows() {
        y[r] += dot(w.row(r), x);
    }
}

/// y += Wᵀ x  (W: m×n, x: m, y: n) — the backward orientation.
pub fn matvec_t_acc<T: Scalar>(w: &Mat<T>, x: &[T], y: &mut [T]) {
    debug_assert_eq!(w.rows(), x.len());
    debug_assert_eq!(w.cols(), y.len());
    for r in 0..w.rows() {
        axpy(x[r], w.row(r), y);
    }
}

/// W += scale · a bᵀ  (a: rows, b: cols)
pub fn add_outer<T: Scalar>(w: &mut Mat<T>, scale: T, a: &[T], b: &[T]) {
    debug_assert_eq!(w.rows(), a.len());
    debug_assert_eq!(w.cols(), b.len());
    for r in 0..w.rows() {
        axpy(scale * a[r], b, w.row_mut(r));
    }
}

// ── nonlinearities ───────────────────────────────────────────────────

/// GELU, tanh approximation: 0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³))).
#[inline]
pub fn gelu<T: Scalar>(x: T) -> T {
    let c = T::from_f64(0.797_884_560_802_865_4); // sqrt(2/pi)
    let k = T::from_f64(0.044715);
    let half = T::from_f64(0.5);
    let inner = c * (x + k * x * x * x);
    half * x * (T::one() + inner.tanh())
}

/// d/dx of the tanh-approximated GELU.
#[inline]
pub fn gelu_prime<T: Scalar>(x: T) -> T {
    let c = T::from_f64(0.797_884_560_802_865_4);
    let k = T::from_f64(0.044715);
    let half = T::from_f64(0.5);
    let three = T::from_f64(3.0);
    let inner = c * (x + k * x * x * x);
    let t = inner.tanh();
    let sech2 = T::one() - t * t;
    half * (T::one() + t) + half * x * sech2 * c * (T::one() + three * k * x * x)
}

/// Numerically stable in-place softmax.
pub fn softmax_in_place<T: Scalar>(v: &mut [T]) {
    let max = v.iter().cloned().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Cross-entropy −log softmax(logits)[target] plus the gradient
/// d/dlogits = softmax − onehot(target), written into `grad`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], target: usize, grad: &mut [T]) -> T {
    debug_assert_eq!(logits.len(), grad.len());
    grad.copy_from_slice(logits);
    softmax_in_place(grad);
    let p = grad[target];
    let loss = -(p.max(T::from_f64(1e-300))).ln();
    grad[target] -= T::one();
    loss
}

/// Layer norm forward. Returns (mean, inv_std) for the backward pass and
/// writes the normalized-then-affine output into `out`.
pub fn layer_norm<T: Scalar>(
    x: &[T],
    gain: &[T],
    bias: &[T],
    eps: T,
    out: &mut [T],
) -> (T, T) {
    let n = T::from_f64(x.len() as f64);
    let mean = x.iter().cloned().sum::<T>() / n;
    let mut var = T::zero();
    for &v in x {
        let d = v - mean;
        var += d * d;
    }
    var /= n;
    let inv_std = T::one() / (var + eps).sqrt();
    for i in 0..x.len() {
        out[i] = gain[i] * (x[i] - mean) * inv_std + bias[i];
    }
    (mean, inv_std)
}

/// Layer norm backward: given d_out, accumulates d_gain/d_bias and writes d_x.
pub fn layer_norm_backward<T: Scalar>(
    x: &[T],
    gain: &[T],
    mean: T,
    inv_std: T,
    d_out: &[T],
    d_gain: &mut [T],
    d_bias: &mut [T],
    d_x: &mut [T],
) {
    let n = x.len();
    let nf = T::from_f64(n as f64);
    // xhat = (x - mean) * inv_std; d_xhat = gain ⊙ d_out
    let mut sum_dxhat = T::zero();
    let mut sum_dxhat_xhat = T::zero();
    for i in 0..n {
        let xhat = (x[i] - mean) * inv_std;
        let dxhat = gain[i] * d_out[i];
        d_gain[i] += d_out[i] * xhat;
        d_bias[i] += d_out[i];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat;
    }
    let mean_dxhat = sum_dxhat / nf;
    let mean_dxhat_xhat = sum_dxhat_xhat / nf;
    for i in 0..n {
        let xhat = (x[i] - mean) * inv_std;
        let dxhat = gain[i] * d_out[i];
        d_x[i] = inv_std * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
    }
}

// ── selection ────────────────────────────────────────────────────────

/// Indices of the k largest values, ties broken by lowest index.
/// Returned in ascending index order. k ≥ len returns all indices.
pub fn top_k_indices<T: Scalar>(v: &[T], k: usize) -> Vec<usize> {
    if k == 0 {
        return Vec::new();
    }
    if k >= v.len() {
        return (0..v.len()).collect();
    }
    let mut idx: Vec<usize> = (0..v.len()).collect();
    // Total order: value descending, index ascending. NaN never enters the
    // hot path (inputs validated upstream); treat it as equal if it does.
    idx.select_nth_unstable_by(k - 1, |&a, &b| {
        v[b].partial_cmp(&v[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Argmax with ties broken by lowest index.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matvec_orientations_agree_with_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w: Mat<f64> = Mat::gaussian(4, 3, 1.0, &mut rng);
        let x = [0.5, -1.0, 2.0];
        let mut y = [0.0; 4];
        matvec(&w, &x, &mut y);
        for r in 0..4 {
            let want: f64 = (0..3).map(|c| w.at(r, c) * x[c]).sum();
            assert!((y[r] - want).abs() < 1e-12);
        }
        let up = [1.0, -2.0, 0.25, 3.0];
        let mut back = [0.0; 3];
        matvec_t_acc(&w, &up, &mut back);
        for c in 0..3 {
            let want: f64 = (0..4).map(|r| w.at(r, c) * up[r]).sum();
            assert!((back[c] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn top_k_keeps_largest_with_low_index_ties() {
        let v = [3.0f32, 1.0, 2.0];
        assert_eq!(top_k_indices(&v, 2), vec![0, 2]);
        // tie: both 5.0 — lowest index wins
        let t = [5.0f32, 5.0, 1.0, 5.0];
        assert_eq!(top_k_indices(&t, 2), vec![0, 1]);
        assert_eq!(top_k_indices(&t, 4), vec![0, 1, 2, 3]);
        assert_eq!(top_k_indices(&t, 0), Vec::<usize>::new());
    }

    #[test]
    fn gelu_prime_matches_finite_differences() {
        for &x in &[-3.0f64, -0.7, -0.1, 0.0, 0.3, 1.5, 4.0] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!(
                (gelu_prime(x) - fd).abs() < 1e-8,
                "x={x}: {} vs {}",
                gelu_prime(x),
                fd
            );
        }
    }

    #[test]
    fn layer_norm_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 6;
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let gain: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
        let bias: Vec<f64> = (0..n).map(|i| 0.05 * i as f64).collect();
        let up: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let eps = 1e-5;

        let loss = |xv: &[f64]| {
            let mut out = vec![0.0; n];
            layer_norm(xv, &gain, &bias, eps, &mut out);
            dot(&out, &up)
        };

        let mut out = vec![0.0; n];
        let (mean, inv_std) = layer_norm(&x, &gain, &bias, eps, &mut out);
        let mut dg = vec![0.0; n];
        let mut db = vec![0.0; n];
        let mut dx = vec![0.0; n];
        layer_norm_backward(&x, &gain, mean, inv_std, &up, &mut dg, &mut db, &mut dx);

        let h = 1e-6;
        for i in 0..n {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (loss(&xp) - loss(&xm)) / (2.0 * h);
            assert!((dx[i] - fd).abs() < 1e-7, "dx[{i}]: {} vs {}", dx[i], fd);
        }
    }

    #[test]
    fn softmax_cross_entropy_gradient_is_probability_minus_onehot() {
        let logits = [0.2f64, -1.0, 3.0, 0.0];
        let mut grad = [0.0; 4];
        let loss = softmax_cross_entropy(&logits, 2, &mut grad);
        let mut p = logits;
        softmax_in_place(&mut p);
        assert!((loss + p[2].ln()).abs() < 1e-12);
        for i in 0..4 {
            let want = p[i] - if i == 2 { 1.0 } else { 0.0 };
            assert!((grad[i] - want).abs() < 1e-12);
        }
        assert!((grad.iter().sum::<f64>()).abs() < 1e-12);
    }
}
