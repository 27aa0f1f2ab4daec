//! The EMA recurrence h_t = (1−α)·h_{t−1} + α·x_t as a first-class scan
//! primitive: sequential reference, chunked-parallel implementation over the
//! (scale, offset) linear-recurrence monoid, decay analytics, and a small
//! throughput benchmark.
//!
//! The chunked scan splits the sequence into chunks, computes each chunk's
//! local outputs from a zero incoming state in parallel, reduces the per-chunk
//! carries (decay^len, local final state) sequentially, then patches every
//! output with the decayed incoming state. Results are independent of the
//! lane count.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{Mat, Scalar};

/// A single decay rate with its derived half-life.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecaySpec {
    alpha: f64,
}

impl DecaySpec {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::config(format!("alpha must be in (0, 1], got {alpha}")));
        }
        Ok(DecaySpec { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Steps until the state retention factor reaches 1/2: ln 2 / (−ln(1−α)).
    /// α = 1 forgets instantly; we report half-life 0 there (∞-decay guard).
    pub fn half_life(&self) -> f64 {
        if self.alpha >= 1.0 {
            return 0.0;
        }
        (2.0f64).ln() / (-(1.0 - self.alpha).ln())
    }
}

/// Numeric width selector for the scan entry points that operate on files or
/// benchmark buffers. The in-memory API is generic instead.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Precision {
    Fp32,
    Fp64,
}

#[derive(Clone, Copy, Debug)]
pub struct ScanConfig {
    pub chunk_len: usize,
    pub precision: Precision,
}

impl ScanConfig {
    pub fn new(chunk_len: usize) -> Result<Self> {
        if chunk_len == 0 {
            return Err(Error::config("chunk_len must be ≥ 1"));
        }
        Ok(ScanConfig {
            chunk_len,
            precision: Precision::Fp32,
        })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::config(format!("alpha must be in (0, 1], got {alpha}")));
    }
    Ok(())
}

/// Sequential reference: h_t = (1−α) h_{t−1} + α x_t for t = 1..T.
/// `x` is T×d, `h0` the initial state; returns the T×d state sequence.
pub fn ema_sequential<T: Scalar>(x: &Mat<T>, alpha: f64, h0: &[T]) -> Result<Mat<T>> {
    check_alpha(alpha)?;
    if h0.len() != x.cols() {
        return Err(Error::shape(format!(
            "h0 has dim {}, input rows have dim {}",
            h0.len(),
            x.cols()
        )));
    }
    let a = T::from_f64(alpha);
    let keep = T::one() - a;
    let mut out = Mat::zeros(x.rows(), x.cols());
    let mut h: Vec<T> = h0.to_vec();
    for t in 0..x.rows() {
        let xt = x.row(t);
        for j in 0..x.cols() {
            h[j] = keep * h[j] + a * xt[j];
        }
        out.row_mut(t).copy_from_slice(&h);
    }
    Ok(out)
}

/// Carry element of the linear recurrence h' = scale·h + offset.
/// Composition (apply c1 then c2): (s2·s1, s2·o1 + o2).
#[derive(Clone, Debug)]
pub struct Carry<T> {
    pub scale: T,
    pub offset: Vec<T>,
}

impl<T: Scalar> Carry<T> {
    pub fn identity(dim: usize) -> Self {
        Carry {
            scale: T::one(),
            offset: vec![T::zero(); dim],
        }
    }

    pub fn combine(first: &Carry<T>, second: &Carry<T>) -> Carry<T> {
        let mut offset = Vec::with_capacity(first.offset.len());
        for j in 0..first.offset.len() {
            offset.push(second.scale * first.offset[j] + second.offset[j]);
        }
        Carry {
            scale: second.scale * first.scale,
            offset,
        }
    }

    /// h ← scale·h + offset
    pub fn apply(&self, h: &mut [T]) {
        for j in 0..h.len() {
            h[j] = self.scale * h[j] + self.offset[j];
        }
    }
}

/// Chunked-parallel EMA scan. Bit-identical to the sequential reference when
/// `chunk_len ≥ T`; within accumulated-rounding tolerance otherwise.
pub fn ema_chunked<T: Scalar>(
    x: &Mat<T>,
    alpha: f64,
    h0: &[T],
    config: &ScanConfig,
) -> Result<Mat<T>> {
    check_alpha(alpha)?;
    if config.chunk_len == 0 {
        return Err(Error::config("chunk_len must be ≥ 1"));
    }
    if h0.len() != x.cols() {
        return Err(Error::shape(format!(
            "h0 has dim {}, input rows have dim {}",
            h0.len(),
            x.cols()
        )));
    }
    let t_total = x.rows();
    let d = x.cols();
    if t_total == 0 {
        return Ok(Mat::zeros(0, d));
    }
    if config.chunk_len >= t_total {
        return ema_sequential(x, alpha, h0);
    }

    let a = T::from_f64(alpha);
    let keep = T::one() - a;
    let n_chunks = t_total.div_ceil(config.chunk_len);

    // Pass 1 (parallel lanes): local prefix outputs from a zero incoming
    // state, plus the chunk carry (keep^len, local final state).
    let mut out = Mat::zeros(t_total, d);
    let chunk_rows: Vec<&mut [T]> = out.data_mut().chunks_mut(config.chunk_len * d).collect();
    let carries: Vec<Carry<T>> = chunk_rows
        .into_par_iter()
        .enumerate()
        .map(|(c, rows)| {
            let start = c * config.chunk_len;
            let len = rows.len() / d;
            let mut h = vec![T::zero(); d];
            for i in 0..len {
                let xt = x.row(start + i);
                for j in 0..d {
                    h[j] = keep * h[j] + a * xt[j];
                }
                rows[i * d..(i + 1) * d].copy_from_slice(&h);
            }
            Carry {
                scale: keep.powi(len as i32),
                offset: h,
            }
        })
        .collect();

    // Exclusive prefix of carries: incoming state for each chunk.
    let mut incoming: Vec<Vec<T>> = Vec::with_capacity(n_chunks);
    let mut acc = Carry::identity(d);
    for carry in &carries {
        let mut h_in = h0.to_vec();
        acc.apply(&mut h_in);
        incoming.push(h_in);
        acc = Carry::combine(&acc, carry);
    }

    // Pass 2 (parallel lanes): out_t += keep^(i+1) · h_in.
    out.data_mut()
        .par_chunks_mut(config.chunk_len * d)
        .zip(incoming.into_par_iter())
        .for_each(|(rows, h_in)| {
            let len = rows.len() / d;
            let mut factor = keep;
            for i in 0..len {
                let row = &mut rows[i * d..(i + 1) * d];
                for j in 0..d {
                    row[j] += factor * h_in[j];
                }
                factor *= keep;
            }
        });

    Ok(out)
}

/// Reverse-time adjoint of the EMA scan:
/// g_t = d_h_t + (1−α) g_{t+1};  d_x_t = α g_t.
/// Used by the model backward passes; kept next to the forward for symmetry.
pub fn ema_backward<T: Scalar>(d_h: &Mat<T>, alpha: f64) -> Mat<T> {
    let a = T::from_f64(alpha);
    let keep = T::one() - a;
    let d = d_h.cols();
    let mut d_x = Mat::zeros(d_h.rows(), d);
    let mut g = vec![T::zero(); d];
    for t in (0..d_h.rows()).rev() {
        let row = d_h.row(t);
        for j in 0..d {
            g[j] = row[j] + keep * g[j];
            *d_x.at_mut(t, j) = a * g[j];
        }
    }
    d_x
}

// ── decay analytics ─────────────────────────────────────────────────

/// Weight of the token `lag` steps back in the current state: α·(1−α)^(lag−1)
/// for lag ≥ 1 (lag 0 would be the not-yet-seen current token).
pub fn input_coefficient(alpha: f64, lag: u32) -> f64 {
    assert!(lag >= 1, "lag counts from 1");
    alpha * (1.0 - alpha).powi(lag as i32 - 1)
}

/// Fraction of the state surviving `steps` further updates: (1−α)^steps.
pub fn state_retention(alpha: f64, steps: u32) -> f64 {
    (1.0 - alpha).powi(steps as i32)
}

/// Analytic residual factor for a stationary stream after t steps, O((1−α)^t).
pub fn steady_state_factor(alpha: f64, t: u32) -> f64 {
    state_retention(alpha, t)
}

/// Measured relative gap ‖h − mean‖ / ‖mean‖ between a trace state and the
/// stationary input mean.
pub fn steady_state_gap<T: Scalar>(h: &[T], target_mean: &[T]) -> Result<f64> {
    if h.len() != target_mean.len() {
        return Err(Error::shape("state and mean dims differ".to_string()));
    }
    let mean_norm: f64 = target_mean
        .iter()
        .map(|&v| v.to_f64() * v.to_f64())
        .sum::<f64>()
        .sqrt();
    if mean_norm == 0.0 {
        return Err(Error::config("zero-norm target mean"));
    }
    let gap: f64 = h
        .iter()
        .zip(target_mean)
        .map(|(&a, &b)| {
            let d = a.to_f64() - b.to_f64();
            d * d
        })
        .sum::<f64>()
        .sqrt();
    Ok(gap / mean_norm)
}

// ── benchmark ───────────────────────────────────────────────────────

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    #[serde(rename = "T")]
    pub t: usize,
    pub d: usize,
    pub chunk_len: usize,
    pub precision: Precision,
    pub repeats: usize,
    pub tok_per_s_seq: f64,
    pub tok_per_s_chunked: f64,
    pub speedup: f64,
}

/// Times sequential vs chunked scans on random data. Property of interest is
/// the ratio, not the absolute numbers.
pub fn bench_scan(t: usize, d: usize, chunk_len: usize, repeats: usize) -> Result<BenchReport> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xbe9c);
    let data: Vec<f32> = (0..t * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = Mat::from_vec(t, d, data);
    let h0 = vec![0.0f32; d];
    let alpha = 0.02;
    let config = ScanConfig::new(chunk_len)?;

    let reps = repeats.max(1);
    let start = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(ema_sequential(&x, alpha, &h0)?);
    }
    let seq_s = start.elapsed().as_secs_f64() / reps as f64;

    let start = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(ema_chunked(&x, alpha, &h0, &config)?);
    }
    let chunked_s = start.elapsed().as_secs_f64() / reps as f64;

    Ok(BenchReport {
        t,
        d,
        chunk_len,
        precision: Precision::Fp32,
        repeats: reps,
        tok_per_s_seq: t as f64 / seq_s,
        tok_per_s_chunked: t as f64 / chunked_s,
        speedup: seq_s / chunked_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(t: usize, d: usize, seed: u64) -> Mat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_vec(t, d, (0..t * d).map(|_| rng.random_range(-2.0..2.0)).collect())
    }

    #[test]
    fn alpha_one_copies_input() {
        let x = random_mat(17, 3, 1);
        let out = ema_sequential(&x, 1.0, &[5.0, -1.0, 0.5]).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn constant_input_matches_closed_form() {
        // h_T = (1 − (1−α)^T)·x̄ for h0 = 0
        let alpha = 0.1;
        let xbar = [2.0f64, -3.0];
        let t = 40;
        let mut data = Vec::new();
        for _ in 0..t {
            data.extend_from_slice(&xbar);
        }
        let x = Mat::from_vec(t, 2, data);
        let out = ema_sequential(&x, alpha, &[0.0, 0.0]).unwrap();
        let factor = 1.0 - (1.0 - alpha).powi(t as i32);
        for j in 0..2 {
            assert!((out.at(t - 1, j) - factor * xbar[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn retention_matches_reported_factors() {
        // (0.98)^50 ≈ 0.364 and coefficient of the lag-50 token = 0.02·(0.98)^49
        assert!((state_retention(0.02, 50) - 0.364).abs() < 5e-4);
        assert!((input_coefficient(0.02, 50) - 0.02 * 0.98f64.powi(49)).abs() < 1e-15);
        // (0.98)^200 ≈ 0.018
        assert!((steady_state_factor(0.02, 200) - 0.018).abs() < 1e-3);
        // monotone retention
        assert!(input_coefficient(0.3, 2) > input_coefficient(0.3, 5));
    }

    #[test]
    fn chunked_equals_sequential_when_chunk_covers_sequence() {
        let x = random_mat(33, 5, 2);
        let h0 = vec![0.3; 5];
        let config = ScanConfig::new(64).unwrap();
        let seq = ema_sequential(&x, 0.25, &h0).unwrap();
        let chunked = ema_chunked(&x, 0.25, &h0, &config).unwrap();
        assert_eq!(seq, chunked); // bitwise: same code path
    }

    #[test]
    fn chunked_matches_sequential_fp32_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = 2048;
        let d = 64;
        let data: Vec<f32> = (0..t * d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let x = Mat::from_vec(t, d, data);
        let h0 = vec![0.0f32; d];
        let seq = ema_sequential(&x, 0.02, &h0).unwrap();
        let chunked = ema_chunked(&x, 0.02, &h0, &ScanConfig::new(128).unwrap()).unwrap();
        let dev = crate::tensor::max_abs_diff(seq.data(), chunked.data());
        assert!(dev <= 1e-5, "max deviation {dev}");
    }

    #[test]
    fn carry_composition_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mk = |rng: &mut ChaCha8Rng| Carry::<f64> {
                scale: rng.random_range(0.0..1.0),
                offset: (0..6).map(|_| rng.random_range(-1.0..1.0)).collect(),
            };
            let c1 = mk(&mut rng);
            let c2 = mk(&mut rng);
            let c3 = mk(&mut rng);
            let left = Carry::combine(&Carry::combine(&c1, &c2), &c3);
            let right = Carry::combine(&c1, &Carry::combine(&c2, &c3));
            assert!((left.scale - right.scale).abs() < 1e-12);
            for j in 0..6 {
                assert!((left.offset[j] - right.offset[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let x = random_mat(12, 3, 4);
        let alpha = 0.3;
        let up = random_mat(12, 3, 5);
        let loss = |m: &Mat<f64>| -> f64 {
            let h = ema_sequential(m, alpha, &[0.0; 3]).unwrap();
            h.data().iter().zip(up.data()).map(|(a, b)| a * b).sum()
        };
        let d_x = ema_backward(&up, alpha);
        let h = 1e-6;
        for t in 0..12 {
            for j in 0..3 {
                let mut xp = x.clone();
                *xp.at_mut(t, j) += h;
                let mut xm = x.clone();
                *xm.at_mut(t, j) -= h;
                let fd = (loss(&xp) - loss(&xm)) / (2.0 * h);
                assert!((d_x.at(t, j) - fd).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn zero_prefix_shifts_and_attenuates() {
        // ema of a stream prefixed by L zeros: at offset ≥ L the state equals
        // the unprefixed ema of the same suffix started from h0·(1−α)^L = 0.
        let x = random_mat(20, 2, 6);
        let prefix = 7;
        let mut data = vec![0.0; prefix * 2];
        data.extend_from_slice(x.data());
        let padded = Mat::from_vec(20 + prefix, 2, data);
        let alpha = 0.4;
        let plain = ema_sequential(&x, alpha, &[0.0, 0.0]).unwrap();
        let shifted = ema_sequential(&padded, alpha, &[0.0, 0.0]).unwrap();
        for t in 0..20 {
            for j in 0..2 {
                assert!((plain.at(t, j) - shifted.at(t + prefix, j)).abs() < 1e-12);
            }
        }
        // state attenuation of a nonzero h0 across the zero prefix
        let h0 = [1.5, -0.5];
        let zeros = Mat::from_vec(prefix, 2, vec![0.0; prefix * 2]);
        let run = ema_sequential(&zeros, alpha, &h0).unwrap();
        for j in 0..2 {
            let want = h0[j] * state_retention(alpha, prefix as u32);
            assert!((run.at(prefix - 1, j) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn steady_state_gap_measures_relative_distance() {
        let mean = [1.0f64, 1.0];
        assert!((steady_state_gap(&[0.0, 0.0], &mean).unwrap() - 1.0).abs() < 1e-12);
        assert!(steady_state_gap(&[1.0, 1.0], &mean).unwrap() < 1e-12);
        assert!(steady_state_gap(&[0.0f64], &[0.0f64]).is_err());
    }

    #[test]
    fn steady_state_gap_matches_analytic_factor_on_stationary_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let d = 16;
        let t = 200;
        let alpha = 0.02;
        let mean: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..1.5)).collect();
        // i.i.d. stream centered at `mean`
        let mut data = Vec::with_capacity(t * d);
        for _ in 0..t {
            for &m in &mean {
                data.push(m + rng.random_range(-0.05..0.05));
            }
        }
        let x = Mat::from_vec(t, d, data);
        let states = ema_sequential(&x, alpha, &vec![0.0; d]).unwrap();
        let gap = steady_state_gap(states.row(t - 1), &mean).unwrap();
        let analytic = steady_state_factor(alpha, t as u32);
        assert!(
            (gap - analytic).abs() < 0.01,
            "measured {gap}, analytic {analytic}"
        );
    }

    #[test]
    fn bench_smoke_run_completes() {
        let report = bench_scan(256, 16, 64, 1).unwrap();
        assert_eq!(report.t, 256);
        assert!(report.tok_per_s_seq > 0.0);
        assert!(report.tok_per_s_chunked > 0.0);
        let json = serde_json::to_value(&report).unwrap();
        for key in ["T", "d", "chunk_len", "tok_per_s_seq", "tok_per_s_chunked"] {
            assert!(json.get(key).is_some(), "missing field {key}");
        }
    }

    proptest! {
        #[test]
        fn ema_is_linear(seed in 0u64..500, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let x = random_mat(24, 3, seed);
            let y = random_mat(24, 3, seed.wrapping_add(1));
            let alpha = 0.2;
            let h0 = vec![0.0; 3];
            let ex = ema_sequential(&x, alpha, &h0).unwrap();
            let ey = ema_sequential(&y, alpha, &h0).unwrap();
            let mut mix = Mat::zeros(24, 3);
            for i in 0..24 * 3 {
                mix.data_mut()[i] = a * x.data()[i] + b * y.data()[i];
            }
            let emix = ema_sequential(&mix, alpha, &h0).unwrap();
            for i in 0..24 * 3 {
                let want = a * ex.data()[i] + b * ey.data()[i];
                prop_assert!((emix.data()[i] - want).abs() < 1e-12);
            }
        }

        #[test]
        fn chunked_matches_sequential_any_split(t in 1usize..260, chunk in 1usize..70, seed in 0u64..1000) {
            let x = random_mat(t, 4, seed);
            let h0 = vec![0.1, -0.2, 0.3, 0.0];
            let seq = ema_sequential(&x, 0.15, &h0).unwrap();
            let chunked = ema_chunked(&x, 0.15, &h0, &ScanConfig::new(chunk).unwrap()).unwrap();
            let dev = crate::tensor::max_abs_diff(seq.data(), chunked.data());
            prop_assert!(dev <= 1e-12, "deviation {} at t={} chunk={}", dev, t, chunk);
        }
    }
}
