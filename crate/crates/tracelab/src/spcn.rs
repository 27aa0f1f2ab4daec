//! Sparse predictive column network: a four-level Hebbian hierarchy with
//! frozen random feedforward/lateral projections, learned feedback weights,
//! sparse top-k settling, multi-timescale EMA traces, and a small episodic
//! context buffer (SPA).
//!
//! Per settling sweep, every level computes
//!   x ← top-k(α·W_ff·x_below + β·W_fb·x_above + γ·W_lat·x + c_spa)
//! bottom-up, taking the fresh below-state (Gauss–Seidel upward) and the
//! previous sweep's states for the feedback and lateral terms. Top-k keeps
//! the k largest strictly positive pre-activations, so a settled state has
//! exactly min(k, #positive) nonzeros.
//!
//! After settling, feedback weights learn by the precision-gated Hebbian
//! update: with ê = W_fb·x_above and e = π ⊙ (x − ê),
//!   ΔW[j,k] = η·π_j·e_j·x_above[k] − λ_d·W[j,k]
//! and precision tracks inverse error variance, clamped to [0.1, 10].
//! W_ff and W_lat are never updated.
//!
//! Weight matrices are stored transposed (fan-in × fan-out) so that sparse
//! states gather contiguous rows.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grammar::{LabeledSentence, Vocabulary};
use crate::io::{hash_f32s, Checkpoint};
use crate::tensor::{axpy, Mat};

pub const LEVELS: usize = 4;
pub const DEFAULT_DIMS: [usize; LEVELS] = [512, 256, 128, 64];
pub const ALPHA_FAST: [f32; LEVELS] = [0.5, 0.2, 0.1, 0.05];
pub const SLOW_RATIO: f32 = 0.15;
pub const SETTLE_STEPS: usize = 3;
pub const SPA_WINDOW: usize = 8;
pub const SPA_TOP_K: usize = 4;
pub const PI_MIN: f32 = 0.1;
pub const PI_MAX: f32 = 10.0;

#[derive(Clone, Copy, Debug)]
pub struct LevelConfig {
    pub dim: usize,
    pub k_active: usize,
    pub alpha_fast: f32,
    pub alpha_slow: f32,
}

/// 5% of the level width, but at least 4 units.
pub fn default_k_active(dim: usize) -> usize {
    ((dim as f64 * 0.05).round() as usize).max(4)
}

#[derive(Clone, Debug)]
pub struct ColumnState {
    pub x: Vec<f32>,
    /// Indices of the nonzero entries of `x`, ascending.
    pub active: Vec<usize>,
    pub trace_fast: Vec<f32>,
    pub trace_slow: Vec<f32>,
    pub precision: Vec<f32>,
    pub err_var: Vec<f32>,
}

impl ColumnState {
    fn new(dim: usize) -> Self {
        ColumnState {
            x: vec![0.0; dim],
            active: Vec::new(),
            trace_fast: vec![0.0; dim],
            trace_slow: vec![0.0; dim],
            precision: vec![1.0; dim],
            err_var: vec![0.0; dim],
        }
    }

    fn sparse(&self) -> Vec<(usize, f32)> {
        self.active.iter().map(|&i| (i, self.x[i])).collect()
    }
}

/// Weights stored transposed: `w_ff_t` is d_below × d, `w_lat_t` is d × d,
/// `w_fb_t` is d_above × d (absent at the top level).
#[derive(Clone, Debug)]
pub struct LevelWeights {
    pub w_ff_t: Mat<f32>,
    pub w_fb_t: Option<Mat<f32>>,
    pub w_lat_t: Mat<f32>,
}

#[derive(Clone, Copy, Debug)]
pub struct MixWeights {
    pub alpha: f32,
    pub beta: f32,
    pub gamma: f32,
}

#[derive(Clone, Debug)]
struct Level {
    config: LevelConfig,
    state: ColumnState,
    weights: LevelWeights,
}

/// Episodic buffer of past settled states, queried by prediction error.
#[derive(Clone, Debug, Default)]
pub struct SpaBuffer {
    ring: VecDeque<Vec<f32>>,
}

impl SpaBuffer {
    pub fn new() -> Self {
        SpaBuffer {
            ring: VecDeque::with_capacity(SPA_WINDOW),
        }
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn push(&mut self, state: Vec<f32>) {
        if self.ring.len() == SPA_WINDOW {
            self.ring.pop_front();
        }
        self.ring.push_back(state);
    }

    pub fn clear(&mut self) {
        self.ring.clear();
    }

    /// Mean of the top-4 stored states by cosine similarity to the query;
    /// zero vector when the buffer is empty. Ties rank older entries first.
    pub fn context(&self, query: &[f32], dim: usize) -> Vec<f32> {
        let mut out = vec![0.0f32; dim];
        if self.ring.is_empty() {
            return out;
        }
        let qn = crate::tensor::norm2(query);
        let mut ranked: Vec<(usize, f32)> = self
            .ring
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let sn = crate::tensor::norm2(s);
                let sim = if qn > 0.0 && sn > 0.0 {
                    crate::tensor::dot(query, s) / (qn * sn)
                } else {
                    0.0
                };
                (i, sim)
            })
            .collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let take = ranked.len().min(SPA_TOP_K);
        for &(i, _) in ranked.iter().take(take) {
            axpy(1.0, &self.ring[i], &mut out);
        }
        let inv = 1.0 / take as f32;
        for v in &mut out {
            *v *= inv;
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Hierarchy {
    levels: Vec<Level>,
    pub spa: SpaBuffer,
    pub settle_steps: usize,
    pub mix: MixWeights,
    pub eta: f32,
    pub lambda_decay: f32,
    pub rho: f32,
    pub eps_pi: f32,
    pub input_dim: usize,
    seed: u64,
}

/// Gaussian init with std 1/√fan_in; traces and error variance zero,
/// precision one. Rejects any level narrower than its top-k count.
pub fn init_hierarchy(dims: &[usize; LEVELS], input_dim: usize, seed: u64) -> Result<Hierarchy> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut levels = Vec::with_capacity(LEVELS);
    for (l, &dim) in dims.iter().enumerate() {
        let k_active = default_k_active(dim);
        if dim < k_active {
            return Err(Error::config(format!(
                "level {l}: dim {dim} < k_active {k_active}"
            )));
        }
        let alpha_fast = ALPHA_FAST[l];
        let config = LevelConfig {
            dim,
            k_active,
            alpha_fast,
            alpha_slow: SLOW_RATIO * alpha_fast,
        };
        let below = if l == 0 { input_dim } else { dims[l - 1] };
        let w_ff_t = Mat::gaussian(below, dim, 1.0 / (below as f64).sqrt(), &mut rng);
        let w_lat_t = Mat::gaussian(dim, dim, 1.0 / (dim as f64).sqrt(), &mut rng);
        let w_fb_t = if l + 1 < LEVELS {
            let above = dims[l + 1];
            Some(Mat::gaussian(above, dim, 1.0 / (above as f64).sqrt(), &mut rng))
        } else {
            None
        };
        levels.push(Level {
            config,
            state: ColumnState::new(dim),
            weights: LevelWeights {
                w_ff_t,
                w_fb_t,
                w_lat_t,
            },
        });
    }
    Ok(Hierarchy {
        levels,
        spa: SpaBuffer::new(),
        settle_steps: SETTLE_STEPS,
        mix: MixWeights {
            alpha: 1.0,
            beta: 0.5,
            gamma: 0.3,
        },
        eta: 0.01,
        lambda_decay: 0.001,
        rho: 0.99,
        eps_pi: 1e-2,
        input_dim,
        seed,
    })
}

/// y += scale · (Wᵀ stored as `wt`) gathered over a sparse state.
fn sparse_matvec_acc(wt: &Mat<f32>, sparse: &[(usize, f32)], scale: f32, y: &mut [f32]) {
    for &(j, v) in sparse {
        axpy(scale * v, wt.row(j), y);
    }
}

/// Keep the k largest strictly positive entries (ties → lowest index);
/// returns (dense vector, ascending active indices).
fn top_k_positive(pre: &[f32], k: usize) -> (Vec<f32>, Vec<usize>) {
    let mut candidates: Vec<usize> = (0..pre.len()).filter(|&i| pre[i] > 0.0).collect();
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, |&a, &b| {
            pre[b].partial_cmp(&pre[a]).unwrap().then(a.cmp(&b))
        });
        candidates.truncate(k);
    }
    candidates.sort_unstable();
    let mut x = vec![0.0f32; pre.len()];
    for &i in &candidates {
        x[i] = pre[i];
    }
    (x, candidates)
}

impl Hierarchy {
    pub fn dims(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.config.dim).collect()
    }

    pub fn level_config(&self, l: usize) -> &LevelConfig {
        &self.levels[l].config
    }

    pub fn state(&self, l: usize) -> &ColumnState {
        &self.levels[l].state
    }

    pub fn weights(&self, l: usize) -> &LevelWeights {
        &self.levels[l].weights
    }

    /// Test access: weights are frozen in normal operation, so mutation is
    /// reserved for pathway-isolation setups.
    pub fn weights_mut(&mut self, l: usize) -> &mut LevelWeights {
        &mut self.levels[l].weights
    }

    /// FNV hash over every frozen buffer (w_ff and w_lat, all levels).
    pub fn frozen_weight_hash(&self) -> u64 {
        let mut acc = 0xcbf2_9ce4_8422_2325u64;
        for level in &self.levels {
            acc ^= hash_f32s(level.weights.w_ff_t.data());
            acc = acc.rotate_left(13);
            acc ^= hash_f32s(level.weights.w_lat_t.data());
            acc = acc.rotate_left(13);
        }
        acc
    }

    /// Zero activations, traces, and the SPA buffer. Precision, error
    /// variance, and learned feedback weights persist across sentences.
    pub fn reset_sentence_state(&mut self) {
        for level in &mut self.levels {
            level.state.x.fill(0.0);
            level.state.active.clear();
            level.state.trace_fast.fill(0.0);
            level.state.trace_slow.fill(0.0);
        }
        self.spa.clear();
    }

    /// Query the SPA buffer with the current L0 prediction error.
    fn spa_query(&self) -> Vec<f32> {
        let l0 = &self.levels[0];
        let mut query = vec![0.0f32; l0.config.dim];
        if let Some(w_fb_t) = &l0.weights.w_fb_t {
            sparse_matvec_acc(w_fb_t, &self.levels[1].state.sparse(), 1.0, &mut query);
        }
        for j in 0..l0.config.dim {
            query[j] = l0.state.precision[j] * (l0.state.x[j] - query[j]);
        }
        query
    }

    /// Settle on a one-hot input vector. Rejects anything that is not an
    /// exact one-hot over the input dimension.
    pub fn settle_onehot(&mut self, input: &[f32]) -> Result<()> {
        if input.len() != self.input_dim {
            return Err(Error::shape(format!(
                "input dim {} vs configured {}",
                input.len(),
                self.input_dim
            )));
        }
        let mut hot = None;
        for (i, &v) in input.iter().enumerate() {
            if v == 1.0 {
                if hot.is_some() {
                    return Err(Error::config("input has more than one nonzero"));
                }
                hot = Some(i);
            } else if v != 0.0 {
                return Err(Error::config(format!("input[{i}] = {v} is not 0 or 1")));
            }
        }
        let hot = hot.ok_or_else(|| Error::config("input has no hot entry"))?;
        self.settle_token(hot);
        Ok(())
    }

    /// Settle on a vocabulary id. The SPA context is computed once per token
    /// from the pre-settling prediction error and held fixed across sweeps.
    pub fn settle_token(&mut self, word_id: usize) {
        debug_assert!(word_id < self.input_dim);
        let c_spa = {
            let query = self.spa_query();
            self.spa.context(&query, self.levels[0].config.dim)
        };
        let input_sparse = [(word_id, 1.0f32)];

        let mut prev: Vec<Vec<(usize, f32)>> =
            self.levels.iter().map(|l| l.state.sparse()).collect();

        for _ in 0..self.settle_steps {
            let mut fresh_below: Vec<(usize, f32)> = Vec::new();
            let mut new_states: Vec<(Vec<f32>, Vec<usize>)> = Vec::with_capacity(LEVELS);
            for l in 0..LEVELS {
                let level = &self.levels[l];
                let dim = level.config.dim;
                let mut pre = vec![0.0f32; dim];
                let below: &[(usize, f32)] = if l == 0 { &input_sparse } else { &fresh_below };
                sparse_matvec_acc(&level.weights.w_ff_t, below, self.mix.alpha, &mut pre);
                if let Some(w_fb_t) = &level.weights.w_fb_t {
                    sparse_matvec_acc(w_fb_t, &prev[l + 1], self.mix.beta, &mut pre);
                }
                sparse_matvec_acc(&level.weights.w_lat_t, &prev[l], self.mix.gamma, &mut pre);
                if l == 0 {
                    axpy(1.0, &c_spa, &mut pre);
                }
                let (x, active) = top_k_positive(&pre, level.config.k_active);
                fresh_below = active.iter().map(|&i| (i, x[i])).collect();
                new_states.push((x, active));
            }
            for (l, (x, active)) in new_states.into_iter().enumerate() {
                prev[l] = active.iter().map(|&i| (i, x[i])).collect();
                self.levels[l].state.x = x;
                self.levels[l].state.active = active;
            }
        }
    }

    /// Precision-gated Hebbian update of the feedback weights at level `l`.
    /// No-op at the top level (no feedback matrix).
    pub fn pghu_update(&mut self, l: usize) {
        if self.levels[l].weights.w_fb_t.is_none() {
            return;
        }
        let above_sparse = self.levels[l + 1].state.sparse();
        let dim = self.levels[l].config.dim;

        // ê = W_fb · x_above
        let mut prediction = vec![0.0f32; dim];
        sparse_matvec_acc(
            self.levels[l].weights.w_fb_t.as_ref().unwrap(),
            &above_sparse,
            1.0,
            &mut prediction,
        );

        let level = &mut self.levels[l];
        let mut raw = vec![0.0f32; dim];
        let mut gated = vec![0.0f32; dim]; // η·π_j·e_j with e = π ⊙ raw
        for j in 0..dim {
            raw[j] = level.state.x[j] - prediction[j];
            let e = level.state.precision[j] * raw[j];
            gated[j] = self.eta * level.state.precision[j] * e;
        }

        // W ← (1 − λ_d)·W + η·(π⊙e)·x_aboveᵀ; in transposed storage the
        // Hebbian term touches only the rows of the active above-units.
        let w_fb_t = level.weights.w_fb_t.as_mut().unwrap();
        let keep = 1.0 - self.lambda_decay;
        crate::tensor::scale_in_place(w_fb_t.data_mut(), keep);
        for &(k, v) in &above_sparse {
            axpy(v, &gated, w_fb_t.row_mut(k));
        }

        for j in 0..dim {
            level.state.err_var[j] =
                self.rho * level.state.err_var[j] + (1.0 - self.rho) * raw[j] * raw[j];
            level.state.precision[j] =
                (1.0 / (level.state.err_var[j] + self.eps_pi)).clamp(PI_MIN, PI_MAX);
        }
    }

    /// Advance fast and slow traces one token at level `l`.
    pub fn update_traces(&mut self, l: usize) {
        let level = &mut self.levels[l];
        let af = level.config.alpha_fast;
        let as_ = level.config.alpha_slow;
        for j in 0..level.config.dim {
            level.state.trace_fast[j] =
                (1.0 - af) * level.state.trace_fast[j] + af * level.state.x[j];
            level.state.trace_slow[j] =
                (1.0 - as_) * level.state.trace_slow[j] + as_ * level.state.x[j];
        }
    }

    /// One full token step: settle, learn (train mode), trace update, SPA push.
    pub fn process_token(&mut self, word_id: usize, train: bool) {
        self.settle_token(word_id);
        if train {
            for l in 0..LEVELS {
                self.pghu_update(l);
            }
        }
        for l in 0..LEVELS {
            self.update_traces(l);
        }
        let l0_state = self.levels[0].state.x.clone();
        self.spa.push(l0_state);
    }

    // ── checkpointing ────────────────────────────────────────────────

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::new();
        ckpt.set_config("format", "spcn-v1");
        ckpt.set_config("levels", LEVELS);
        ckpt.set_config("input_dim", self.input_dim);
        ckpt.set_config("seed", self.seed);
        ckpt.set_config("eta", self.eta);
        ckpt.set_config("lambda_decay", self.lambda_decay);
        for (l, level) in self.levels.iter().enumerate() {
            ckpt.set_config(&format!("dim_{l}"), level.config.dim);
            ckpt.insert(&format!("w_ff_t_{l}"), level.weights.w_ff_t.clone());
            ckpt.insert(&format!("w_lat_t_{l}"), level.weights.w_lat_t.clone());
            if let Some(w_fb_t) = &level.weights.w_fb_t {
                ckpt.insert(&format!("w_fb_t_{l}"), w_fb_t.clone());
            }
            ckpt.insert_vec(&format!("precision_{l}"), &level.state.precision);
            ckpt.insert_vec(&format!("err_var_{l}"), &level.state.err_var);
        }
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Hierarchy> {
        if ckpt.config.get("format").map(String::as_str) != Some("spcn-v1") {
            return Err(Error::config("not an spcn-v1 checkpoint"));
        }
        let input_dim = ckpt.config_u64("input_dim")? as usize;
        let seed = ckpt.config_u64("seed")?;
        let mut dims = [0usize; LEVELS];
        for (l, d) in dims.iter_mut().enumerate() {
            *d = ckpt.config_u64(&format!("dim_{l}"))? as usize;
        }
        let mut hierarchy = init_hierarchy(&dims, input_dim, seed)?;
        hierarchy.eta = ckpt.config_f64("eta")? as f32;
        hierarchy.lambda_decay = ckpt.config_f64("lambda_decay")? as f32;
        for l in 0..LEVELS {
            let level = &mut hierarchy.levels[l];
            level.weights.w_ff_t = ckpt.tensor(&format!("w_ff_t_{l}"))?.clone();
            level.weights.w_lat_t = ckpt.tensor(&format!("w_lat_t_{l}"))?.clone();
            if level.weights.w_fb_t.is_some() {
                level.weights.w_fb_t = Some(ckpt.tensor(&format!("w_fb_t_{l}"))?.clone());
            }
            level.state.precision = ckpt.vec(&format!("precision_{l}"))?;
            level.state.err_var = ckpt.vec(&format!("err_var_{l}"))?;
        }
        Ok(hierarchy)
    }
}

// ── corpus processing ────────────────────────────────────────────────

/// Per-token representations from a bidirectional pair of hierarchies.
/// Dims with the default configuration: activation 1024, traces 2048
/// (τ_f,fwd ‖ τ_s,fwd ‖ τ_f,bwd ‖ τ_s,bwd at L0), combined 3072; per-level
/// trace blocks for the level ablation.
#[derive(Clone, Debug)]
pub struct Representations {
    pub activation: Mat<f32>,
    pub traces: Mat<f32>,
    pub l1_traces: Mat<f32>,
    pub l2_traces: Mat<f32>,
    pub labels: Vec<u8>,
    pub deep: Vec<bool>,
}

impl Representations {
    /// activation ‖ traces, the best-performing probe target.
    pub fn combined(&self) -> Mat<f32> {
        let n = self.activation.rows();
        let da = self.activation.cols();
        let dt = self.traces.cols();
        let mut out = Mat::zeros(n, da + dt);
        for t in 0..n {
            out.row_mut(t)[..da].copy_from_slice(self.activation.row(t));
            out.row_mut(t)[da..].copy_from_slice(self.traces.row(t));
        }
        out
    }

    /// Forward-hierarchy columns only (activation ‖ fast ‖ slow), for the
    /// bidirectionality ablation.
    pub fn fwd_only_combined(&self) -> Mat<f32> {
        let n = self.activation.rows();
        let half_act = self.activation.cols() / 2;
        let half_tr = self.traces.cols() / 2;
        let mut out = Mat::zeros(n, half_act + half_tr);
        for t in 0..n {
            out.row_mut(t)[..half_act].copy_from_slice(&self.activation.row(t)[..half_act]);
            out.row_mut(t)[half_act..].copy_from_slice(&self.traces.row(t)[..half_tr]);
        }
        out
    }
}

/// Runs the forward hierarchy left-to-right and the backward hierarchy
/// right-to-left over each sentence with per-sentence state reset, and emits
/// aligned per-token representations. `train` enables PGHU.
pub fn process_corpus(
    fwd: &mut Hierarchy,
    bwd: &mut Hierarchy,
    sentences: &[LabeledSentence],
    vocab: &Vocabulary,
    train: bool,
) -> Result<Representations> {
    let d0 = fwd.levels[0].config.dim;
    let d1 = fwd.levels[1].config.dim;
    let d2 = fwd.levels[2].config.dim;
    let n_tokens: usize = sentences.iter().map(|s| s.len()).sum();

    let mut activation = Mat::zeros(n_tokens, 2 * d0);
    let mut traces = Mat::zeros(n_tokens, 4 * d0);
    let mut l1_traces = Mat::zeros(n_tokens, 4 * d1);
    let mut l2_traces = Mat::zeros(n_tokens, 4 * d2);
    let mut labels = Vec::with_capacity(n_tokens);
    let mut deep = Vec::with_capacity(n_tokens);

    let mut row = 0usize;
    for sentence in sentences {
        if sentence.is_empty() {
            return Err(Error::config("empty sentence"));
        }
        let ids: Vec<usize> = sentence
            .tokens
            .iter()
            .map(|t| {
                vocab
                    .id(t)
                    .map(|i| i as usize)
                    .ok_or_else(|| Error::config(format!("word not in vocabulary: {t}")))
            })
            .collect::<Result<_>>()?;
        let n = ids.len();

        fwd.reset_sentence_state();
        bwd.reset_sentence_state();

        // forward pass: store (x, τ_f, τ_s) per token per probed level
        let mut fwd_snap: Vec<[Vec<f32>; 3]> = Vec::with_capacity(n);
        let mut fwd_l1: Vec<[Vec<f32>; 2]> = Vec::with_capacity(n);
        let mut fwd_l2: Vec<[Vec<f32>; 2]> = Vec::with_capacity(n);
        for &id in &ids {
            fwd.process_token(id, train);
            let s0 = &fwd.levels[0].state;
            fwd_snap.push([s0.x.clone(), s0.trace_fast.clone(), s0.trace_slow.clone()]);
            let s1 = &fwd.levels[1].state;
            fwd_l1.push([s1.trace_fast.clone(), s1.trace_slow.clone()]);
            let s2 = &fwd.levels[2].state;
            fwd_l2.push([s2.trace_fast.clone(), s2.trace_slow.clone()]);
        }

        // backward pass over the reversed sentence, then re-align
        let mut bwd_snap: Vec<[Vec<f32>; 3]> = Vec::with_capacity(n);
        let mut bwd_l1: Vec<[Vec<f32>; 2]> = Vec::with_capacity(n);
        let mut bwd_l2: Vec<[Vec<f32>; 2]> = Vec::with_capacity(n);
        for &id in ids.iter().rev() {
            bwd.process_token(id, train);
            let s0 = &bwd.levels[0].state;
            bwd_snap.push([s0.x.clone(), s0.trace_fast.clone(), s0.trace_slow.clone()]);
            let s1 = &bwd.levels[1].state;
            bwd_l1.push([s1.trace_fast.clone(), s1.trace_slow.clone()]);
            let s2 = &bwd.levels[2].state;
            bwd_l2.push([s2.trace_fast.clone(), s2.trace_slow.clone()]);
        }
        bwd_snap.reverse();
        bwd_l1.reverse();
        bwd_l2.reverse();

        for t in 0..n {
            let act = activation.row_mut(row);
            act[..d0].copy_from_slice(&fwd_snap[t][0]);
            act[d0..].copy_from_slice(&bwd_snap[t][0]);

            let tr = traces.row_mut(row);
            tr[..d0].copy_from_slice(&fwd_snap[t][1]);
            tr[d0..2 * d0].copy_from_slice(&fwd_snap[t][2]);
            tr[2 * d0..3 * d0].copy_from_slice(&bwd_snap[t][1]);
            tr[3 * d0..].copy_from_slice(&bwd_snap[t][2]);

            let t1 = l1_traces.row_mut(row);
            t1[..d1].copy_from_slice(&fwd_l1[t][0]);
            t1[d1..2 * d1].copy_from_slice(&fwd_l1[t][1]);
            t1[2 * d1..3 * d1].copy_from_slice(&bwd_l1[t][0]);
            t1[3 * d1..].copy_from_slice(&bwd_l1[t][1]);

            let t2 = l2_traces.row_mut(row);
            t2[..d2].copy_from_slice(&fwd_l2[t][0]);
            t2[d2..2 * d2].copy_from_slice(&fwd_l2[t][1]);
            t2[2 * d2..3 * d2].copy_from_slice(&bwd_l2[t][0]);
            t2[3 * d2..].copy_from_slice(&bwd_l2[t][1]);

            labels.push(sentence.roles[t].index() as u8);
            deep.push(sentence.roles[t].is_deep());
            row += 1;
        }
    }

    Ok(Representations {
        activation,
        traces,
        l1_traces,
        l2_traces,
        labels,
        deep,
    })
}
