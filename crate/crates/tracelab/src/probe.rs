//! Linear probing of token representations: one-vs-all ridge regression with
//! the exact closed form, a dimensionality-matched random-projection control,
//! and per-role accuracies with Wilson score intervals.
//!
//! Probe weights solve W = Yᵀ X_aug (X_augᵀ X_aug + λI)⁻¹ with a ones column
//! appended for the bias; predictions take the argmax over class scores with
//! ties broken by lowest class index. Features are used raw — no centering or
//! whitening — so no test statistics leak into the fit.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grammar::{Role, ROLE_COUNT};
use crate::tensor::Mat;

pub const RIDGE_LAMBDA: f64 = 0.01;

/// Token features with integer class labels.
#[derive(Clone, Debug)]
pub struct ProbeDataset {
    pub features: Mat<f32>,
    pub labels: Vec<u8>,
    pub n_classes: usize,
}

impl ProbeDataset {
    pub fn new(features: Mat<f32>, labels: Vec<u8>, n_classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::shape(format!(
                "{} feature rows vs {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if features.cols() == 0 {
            return Err(Error::shape("zero-dimensional features"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| (l as usize) >= n_classes) {
            return Err(Error::config(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        Ok(ProbeDataset {
            features,
            labels,
            n_classes,
        })
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// One-vs-all ridge probe: weights are n_classes × (d+1), bias last.
#[derive(Clone, Debug)]
pub struct RidgeProbe {
    pub weights: Mat<f64>,
    pub lambda: f64,
}

impl RidgeProbe {
    pub fn dim(&self) -> usize {
        self.weights.cols() - 1
    }

    /// Class scores for one feature row.
    pub fn scores(&self, features: &[f32]) -> Vec<f64> {
        let d = self.dim();
        debug_assert_eq!(features.len(), d);
        (0..self.weights.rows())
            .map(|c| {
                let row = self.weights.row(c);
                let mut acc = row[d]; // bias
                for j in 0..d {
                    acc += row[j] * features[j] as f64;
                }
                acc
            })
            .collect()
    }

    pub fn predict(&self, features: &[f32]) -> usize {
        let scores = self.scores(features);
        // argmax, ties broken by lowest class index
        let mut best = 0;
        for c in 1..scores.len() {
            if scores[c] > scores[best] {
                best = c;
            }
        }
        best
    }
}

/// Exact closed-form fit: W = Yᵀ X_aug (X_augᵀ X_aug + λI)⁻¹.
pub fn fit_ridge(train: &ProbeDataset) -> Result<RidgeProbe> {
    fit_ridge_with_lambda(train, RIDGE_LAMBDA)
}

pub fn fit_ridge_with_lambda(train: &ProbeDataset, lambda: f64) -> Result<RidgeProbe> {
    if !train.features.is_finite() {
        return Err(Error::NonFinite("probe training features".to_string()));
    }
    if lambda <= 0.0 {
        return Err(Error::config("ridge lambda must be > 0"));
    }
    let n = train.len();
    let d = train.dim();
    let da = d + 1;

    // Augmented transpose: rows are feature coordinates (plus a ones row),
    // so Gram entries are contiguous dot products over tokens.
    let mut xt = Mat::<f32>::zeros(da, n);
    for t in 0..n {
        let row = train.features.row(t);
        for j in 0..d {
            *xt.at_mut(j, t) = row[j];
        }
        *xt.at_mut(d, t) = 1.0;
    }

    let mut gram = DMatrix::<f64>::zeros(da, da);
    for i in 0..da {
        let ri = xt.row(i);
        for j in i..da {
            let rj = xt.row(j);
            let mut acc = 0.0f64;
            for t in 0..n {
                acc += ri[t] as f64 * rj[t] as f64;
            }
            gram[(i, j)] = acc;
            gram[(j, i)] = acc;
        }
    }
    for i in 0..da {
        gram[(i, i)] += lambda;
    }

    // X_augᵀ Y: class-wise feature sums.
    let mut xty = DMatrix::<f64>::zeros(da, train.n_classes);
    for t in 0..n {
        let c = train.labels[t] as usize;
        let row = train.features.row(t);
        for j in 0..d {
            xty[(j, c)] += row[j] as f64;
        }
        xty[(d, c)] += 1.0;
    }

    let chol = nalgebra::Cholesky::new(gram)
        .ok_or_else(|| Error::NonFinite("ridge normal matrix not positive definite".to_string()))?;
    let solved = chol.solve(&xty); // (d+1) × n_classes

    let mut weights = Mat::<f64>::zeros(train.n_classes, da);
    for c in 0..train.n_classes {
        for j in 0..da {
            *weights.at_mut(c, j) = solved[(j, c)];
        }
    }
    Ok(RidgeProbe {
        weights,
        lambda,
    })
}

// ── evaluation ───────────────────────────────────────────────────────

#[derive(Clone, Debug, Serialize)]
pub struct RoleStat {
    pub role: String,
    pub accuracy: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub support: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub per_role: Vec<RoleStat>,
    pub within: f64,
    pub transfer: f64,
    pub deep: f64,
}

fn accuracy_on(probe: &RidgeProbe, data: &ProbeDataset) -> Result<(Vec<usize>, f64)> {
    if data.dim() != probe.dim() {
        return Err(Error::shape(format!(
            "probe dim {} vs feature dim {}",
            probe.dim(),
            data.dim()
        )));
    }
    let mut predictions = Vec::with_capacity(data.len());
    let mut correct = 0usize;
    for t in 0..data.len() {
        let p = probe.predict(data.features.row(t));
        if p == data.labels[t] as usize {
            correct += 1;
        }
        predictions.push(p);
    }
    Ok((predictions, correct as f64 / data.len().max(1) as f64))
}

/// Token accuracy on the held-out same-grammar set (`within`), the
/// disjoint-vocabulary set (`transfer`), and the within-set tokens whose true
/// role sits inside a relative clause (`deep`). Per-role rows (with Wilson
/// bounds) are computed on the within set.
pub fn evaluate(
    probe: &RidgeProbe,
    within: &ProbeDataset,
    transfer: &ProbeDataset,
) -> Result<ProbeReport> {
    let (within_pred, within_acc) = accuracy_on(probe, within)?;
    let (_, transfer_acc) = accuracy_on(probe, transfer)?;

    let mut deep_correct = 0usize;
    let mut deep_total = 0usize;
    let mut role_correct = vec![0usize; within.n_classes];
    let mut role_total = vec![0usize; within.n_classes];
    for t in 0..within.len() {
        let label = within.labels[t] as usize;
        let hit = within_pred[t] == label;
        role_total[label] += 1;
        if hit {
            role_correct[label] += 1;
        }
        let is_deep = label < ROLE_COUNT && Role::ALL[label].is_deep();
        if is_deep {
            deep_total += 1;
            if hit {
                deep_correct += 1;
            }
        }
    }

    let per_role = (0..within.n_classes)
        .map(|c| {
            let support = role_total[c];
            let acc = if support == 0 {
                0.0
            } else {
                role_correct[c] as f64 / support as f64
            };
            let (low, high) = if support == 0 {
                (0.0, 1.0)
            } else {
                wilson_ci(role_correct[c], support, 1.96).unwrap()
            };
            let role = if c < ROLE_COUNT {
                Role::ALL[c].name().to_string()
            } else {
                format!("class_{c}")
            };
            RoleStat {
                role,
                accuracy: acc,
                wilson_low: low,
                wilson_high: high,
                support,
            }
        })
        .collect();

    Ok(ProbeReport {
        per_role,
        within: within_acc,
        transfer: transfer_acc,
        deep: if deep_total == 0 {
            0.0
        } else {
            deep_correct as f64 / deep_total as f64
        },
    })
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_ci(successes: usize, trials: usize, z: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::config("wilson_ci with zero trials"));
    }
    if successes > trials {
        return Err(Error::config("successes exceed trials"));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // at p̂ ∈ {0, 1} the closed form hits the boundary exactly; avoid roundoff
    let low = if successes == 0 {
        0.0
    } else {
        ((center - half) / denom).max(0.0)
    };
    let high = if successes == trials {
        1.0
    } else {
        ((center + half) / denom).min(1.0)
    };
    Ok((low, high))
}

// ── dimensionality control ───────────────────────────────────────────

/// Gaussian projection matrix, entries i.i.d. N(0, 1/d_in).
pub fn projection_matrix(d_out: usize, d_in: usize, seed: u64) -> Mat<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1));
    Mat::gaussian(d_out, d_in, 1.0 / (d_in as f64).sqrt(), &mut rng)
}

/// features' = features · Pᵀ. Exposed separately from [`random_projection`]
/// so tests can pass an identity matrix.
pub fn apply_projection(features: &Mat<f32>, p: &Mat<f32>) -> Result<Mat<f32>> {
    if features.cols() != p.cols() {
        return Err(Error::shape(format!(
            "projection expects d_in {}, features have {}",
            p.cols(),
            features.cols()
        )));
    }
    let mut out = Mat::<f32>::zeros(features.rows(), p.rows());
    for t in 0..features.rows() {
        crate::tensor::matvec(p, features.row(t), out.row_mut(t));
    }
    Ok(out)
}

pub fn random_projection(features: &Mat<f32>, d_out: usize, seed: u64) -> Result<Mat<f32>> {
    if d_out == 0 {
        return Err(Error::config("d_out must be ≥ 1"));
    }
    apply_projection(features, &projection_matrix(d_out, features.cols(), seed))
}

/// Mean within/transfer/deep accuracy over probes fit on projections of the
/// same representation with several seeds. The projection average applies to
/// the accuracies, not the features.
pub fn evaluate_projected_mean(
    train: &ProbeDataset,
    within: &ProbeDataset,
    transfer: &ProbeDataset,
    d_out: usize,
    seeds: &[u64],
) -> Result<(f64, f64, f64)> {
    let mut acc = (0.0, 0.0, 0.0);
    for &seed in seeds {
        let p = projection_matrix(d_out, train.dim(), seed);
        let train_p = ProbeDataset::new(
            apply_projection(&train.features, &p)?,
            train.labels.clone(),
            train.n_classes,
        )?;
        let within_p = ProbeDataset::new(
            apply_projection(&within.features, &p)?,
            within.labels.clone(),
            within.n_classes,
        )?;
        let transfer_p = ProbeDataset::new(
            apply_projection(&transfer.features, &p)?,
            transfer.labels.clone(),
            transfer.n_classes,
        )?;
        let probe = fit_ridge(&train_p)?;
        let report = evaluate(&probe, &within_p, &transfer_p)?;
        acc.0 += report.within;
        acc.1 += report.transfer;
        acc.2 += report.deep;
    }
    let k = seeds.len().max(1) as f64;
    Ok((acc.0 / k, acc.1 / k, acc.2 / k))
}

// ── report emission ─────────────────────────────────────────────────

/// CSV rows: role, acc, low, high, support.
pub fn report_to_csv(report: &ProbeReport) -> String {
    let mut out = String::from("role,acc,low,high,support\n");
    for r in &report.per_role {
        out.push_str(&format!(
            "{},{:.4},{:.4},{:.4},{}\n",
            r.role, r.accuracy, r.wilson_low, r.wilson_high, r.support
        ));
    }
    out
}

/// Fixed reference constants from the supervised baseline, embedded for
/// report comparison only — never reproduced here.
pub mod reference {
    pub const BIGRU_WITHIN: f64 = 1.000;
    pub const BIGRU_TRANSFER: f64 = 0.762;
    pub const BIGRU_DEEP: f64 = 1.000;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn onehot_features(labels: &[u8], n_classes: usize) -> Mat<f32> {
        let mut m = Mat::zeros(labels.len(), n_classes);
        for (t, &l) in labels.iter().enumerate() {
            *m.at_mut(t, l as usize) = 1.0;
        }
        m
    }

    #[test]
    fn identity_features_fit_perfectly() {
        let labels: Vec<u8> = (0..200).map(|i| (i % 5) as u8).collect();
        let data = ProbeDataset::new(onehot_features(&labels, 5), labels.clone(), 5).unwrap();
        let probe = fit_ridge_with_lambda(&data, 1e-6).unwrap();
        let (_, acc) = accuracy_on(&probe, &data).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn zero_features_predict_majority_scoring_class() {
        // class 2 twice as frequent: bias-only probe must always pick it
        let mut labels: Vec<u8> = Vec::new();
        for _ in 0..50 {
            labels.extend_from_slice(&[0, 1, 2, 2]);
        }
        let features = Mat::zeros(labels.len(), 3);
        let data = ProbeDataset::new(features, labels, 3).unwrap();
        let probe = fit_ridge(&data).unwrap();
        for t in 0..data.len() {
            assert_eq!(probe.predict(data.features.row(t)), 2);
        }
    }

    #[test]
    fn closed_form_matches_normal_equations_oracle() {
        // 2-class, 3-point hand system solved by direct normal equations
        let features = Mat::from_vec(3, 1, vec![0.0f32, 1.0, 2.0]);
        let labels = vec![0u8, 0, 1];
        let lambda = 0.01;
        let data = ProbeDataset::new(features, labels, 2).unwrap();
        let probe = fit_ridge_with_lambda(&data, lambda).unwrap();

        // oracle: X_aug = [[0,1],[1,1],[2,1]]; solve (XᵀX + λI) w = Xᵀy per class
        let xtx = [[5.0 + lambda, 3.0], [3.0, 3.0 + lambda]];
        let xty = [[1.0, 2.0], [2.0, 1.0]]; // columns per class: y0 = (1,1,0), y1 = (0,0,1)
        let det = xtx[0][0] * xtx[1][1] - xtx[0][1] * xtx[1][0];
        for class in 0..2 {
            let b = [xty[0][class], xty[1][class]];
            let w0 = (b[0] * xtx[1][1] - b[1] * xtx[0][1]) / det;
            let w1 = (xtx[0][0] * b[1] - xtx[1][0] * b[0]) / det;
            assert!((probe.weights.at(class, 0) - w0).abs() < 1e-10);
            assert!((probe.weights.at(class, 1) - w1).abs() < 1e-10);
        }
    }

    #[test]
    fn refitting_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let features = Mat::gaussian(120, 7, 1.0, &mut rng);
        let labels: Vec<u8> = (0..120).map(|_| rng.random_range(0..4u8)).collect();
        let data = ProbeDataset::new(features, labels, 4).unwrap();
        let a = fit_ridge(&data).unwrap();
        let b = fit_ridge(&data).unwrap();
        assert_eq!(a.weights, b.weights);
    }

    #[test]
    fn non_finite_features_rejected() {
        let mut features = Mat::zeros(3, 2);
        *features.at_mut(1, 0) = f32::NAN;
        let data = ProbeDataset::new(features, vec![0, 1, 0], 2).unwrap();
        assert!(fit_ridge(&data).is_err());
    }

    #[test]
    fn perfect_probe_reports_unit_accuracy_everywhere() {
        let labels: Vec<u8> = (0..400).map(|i| (i % ROLE_COUNT) as u8).collect();
        let train =
            ProbeDataset::new(onehot_features(&labels, ROLE_COUNT), labels.clone(), ROLE_COUNT)
                .unwrap();
        let probe = fit_ridge(&train).unwrap();
        let report = evaluate(&probe, &train, &train).unwrap();
        assert_eq!(report.within, 1.0);
        assert_eq!(report.transfer, 1.0);
        assert_eq!(report.deep, 1.0);
        for row in &report.per_role {
            assert_eq!(row.accuracy, 1.0);
            assert_eq!(row.wilson_high, 1.0);
            assert!(row.wilson_low <= 1.0);
        }
    }

    #[test]
    fn random_features_give_chance_level_20_class() {
        // ~1/20 with an uninformative probe: random features, random labels
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 6000;
        let features = Mat::gaussian(n, 10, 1.0, &mut rng);
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..20u8)).collect();
        let train = ProbeDataset::new(features, labels, 20).unwrap();
        let mut rng2 = ChaCha8Rng::seed_from_u64(18);
        let test_features = Mat::gaussian(n, 10, 1.0, &mut rng2);
        let test_labels: Vec<u8> = (0..n).map(|_| rng2.random_range(0..20u8)).collect();
        let test = ProbeDataset::new(test_features, test_labels, 20).unwrap();
        let probe = fit_ridge(&train).unwrap();
        let report = evaluate(&probe, &test, &test).unwrap();
        assert!(
            (report.within - 0.05).abs() < 0.01,
            "accuracy {} not ≈ 0.05",
            report.within
        );
    }

    #[test]
    fn wilson_interval_reference_values() {
        let (low, high) = wilson_ci(50, 100, 1.96).unwrap();
        assert!((low - 0.404).abs() < 1e-3, "low {low}");
        assert!((high - 0.596).abs() < 1e-3, "high {high}");
        let (low0, _) = wilson_ci(0, 10, 1.96).unwrap();
        assert_eq!(low0, 0.0);
        let (_, high1) = wilson_ci(100, 100, 1.96).unwrap();
        assert_eq!(high1, 1.0);
        assert!(wilson_ci(1, 0, 1.96).is_err());
        assert!(wilson_ci(5, 3, 1.96).is_err());
    }

    #[test]
    fn wilson_interval_contains_estimate_and_shrinks() {
        for &(s, n) in &[(3usize, 10usize), (30, 100), (300, 1000), (3000, 10000)] {
            let p = s as f64 / n as f64;
            let (low, high) = wilson_ci(s, n, 1.96).unwrap();
            assert!(low <= p && p <= high);
        }
        let widths: Vec<f64> = [(3usize, 10usize), (30, 100), (300, 1000)]
            .iter()
            .map(|&(s, n)| {
                let (low, high) = wilson_ci(s, n, 1.96).unwrap();
                high - low
            })
            .collect();
        assert!(widths[0] > widths[1] && widths[1] > widths[2]);
    }

    #[test]
    fn identity_projection_is_a_no_op() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let features = Mat::gaussian(20, 6, 1.0, &mut rng);
        let mut eye = Mat::zeros(6, 6);
        for i in 0..6 {
            *eye.at_mut(i, i) = 1.0;
        }
        let projected = apply_projection(&features, &eye).unwrap();
        assert_eq!(features, projected);
    }

    #[test]
    fn projection_preserves_expected_row_norms() {
        // Johnson–Lindenstrauss style check: mean squared row norm within 5%
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let features = Mat::gaussian(1000, 2048, 1.0, &mut rng);
        let projected = random_projection(&features, 1024, 7).unwrap();
        let mean_in: f64 = (0..features.rows())
            .map(|t| crate::tensor::dot(features.row(t), features.row(t)) as f64)
            .sum::<f64>()
            / features.rows() as f64;
        let mean_out: f64 = (0..projected.rows())
            .map(|t| crate::tensor::dot(projected.row(t), projected.row(t)) as f64)
            .sum::<f64>()
            / projected.rows() as f64;
        // E‖Px‖² = (d_out/d_in)·‖x‖² with variance 1/d_in entries
        let expected = mean_in * 1024.0 / 2048.0;
        assert!(
            (mean_out - expected).abs() / expected < 0.05,
            "mean_out {mean_out} vs expected {expected}"
        );
    }

    #[test]
    fn projection_is_deterministic_per_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let features = Mat::gaussian(10, 12, 1.0, &mut rng);
        let a = random_projection(&features, 4, 9).unwrap();
        let b = random_projection(&features, 4, 9).unwrap();
        let c = random_projection(&features, 4, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn scaling_features_leaves_accuracy_nearly_invariant() {
        // ridge is scale-sensitive; near-invariance of accuracy is the claim
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 800;
        let d = 16;
        let n_classes = 4;
        // separable-ish features: class centroid + noise
        let mut features = Mat::zeros(n, d);
        let mut labels = Vec::with_capacity(n);
        for t in 0..n {
            let c = rng.random_range(0..n_classes) as u8;
            labels.push(c);
            for j in 0..d {
                let centroid = if j % n_classes == c as usize { 1.0 } else { 0.0 };
                *features.at_mut(t, j) = centroid + 0.3 * rng.random_range(-1.0f32..1.0);
            }
        }
        let half = n / 2;
        let split = |feat: &Mat<f32>, from: usize, to: usize| {
            let mut m = Mat::zeros(to - from, d);
            for t in from..to {
                m.row_mut(t - from).copy_from_slice(feat.row(t));
            }
            m
        };
        let eval_at_scale = |c: f32| -> f64 {
            let mut scaled = features.clone();
            crate::tensor::scale_in_place(scaled.data_mut(), c);
            let train = ProbeDataset::new(
                split(&scaled, 0, half),
                labels[..half].to_vec(),
                n_classes,
            )
            .unwrap();
            let test = ProbeDataset::new(
                split(&scaled, half, n),
                labels[half..].to_vec(),
                n_classes,
            )
            .unwrap();
            let probe = fit_ridge(&train).unwrap();
            evaluate(&probe, &test, &test).unwrap().within
        };
        let base = eval_at_scale(1.0);
        for c in [0.5f32, 2.0] {
            let acc = eval_at_scale(c);
            assert!(
                (acc - base).abs() <= 0.005,
                "scale {c}: {acc} vs base {base}"
            );
        }
    }

    #[test]
    fn dimension_mismatch_rejected_at_eval() {
        let labels = vec![0u8, 1];
        let train = ProbeDataset::new(Mat::zeros(2, 3), labels.clone(), 2).unwrap();
        let probe = fit_ridge(&train).unwrap();
        let other = ProbeDataset::new(Mat::zeros(2, 4), labels, 2).unwrap();
        assert!(evaluate(&probe, &other, &other).is_err());
    }

    #[test]
    fn csv_report_has_stable_header() {
        let labels: Vec<u8> = (0..40).map(|i| (i % ROLE_COUNT) as u8).collect();
        let data =
            ProbeDataset::new(onehot_features(&labels, ROLE_COUNT), labels, ROLE_COUNT).unwrap();
        let probe = fit_ridge(&data).unwrap();
        let report = evaluate(&probe, &data, &data).unwrap();
        let csv = report_to_csv(&report);
        assert!(csv.starts_with("role,acc,low,high,support\n"));
        assert_eq!(csv.lines().count(), 1 + ROLE_COUNT);
    }
}
