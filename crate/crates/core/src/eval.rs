//! Evaluation: leave-one-out scoring, ROC analysis, the closest-to-corner
//! operating point, DeLong's paired AUC test and bootstrap spreads.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::dataset::{Label, ShapeDataset};
use crate::error::{Error, Result};
use crate::shape::{DistanceKind, GramMatrix, Kernel, PreShape};
use crate::svm::{select_hyperparams, train, HyperGrid, SelectOptions, Selected, TrainConfig};

/// Per-sample classifier scores.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    pub ids: Vec<String>,
    pub labels: Vec<Label>,
    pub scores: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ScoreRow {
    id: String,
    label: i8,
    score: f64,
}

impl ScoreTable {
    pub fn new(ids: Vec<String>, labels: Vec<Label>, scores: Vec<f64>) -> Result<Self> {
        if ids.len() != labels.len() || labels.len() != scores.len() {
            return Err(Error::InvalidConfig("score table columns differ in length".into()));
        }
        Ok(ScoreTable { ids, labels, scores })
    }

    /// Sample ids `0..n` as strings.
    pub fn unnamed(labels: Vec<Label>, scores: Vec<f64>) -> Result<Self> {
        let ids = (0..labels.len()).map(|i| i.to_string()).collect();
        Self::new(ids, labels, scores)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for ((id, l), s) in self.ids.iter().zip(&self.labels).zip(&self.scores) {
            w.serialize(ScoreRow {
                id: id.clone(),
                label: l.as_i8(),
                score: *s,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let (mut ids, mut labels, mut scores) = (Vec::new(), Vec::new(), Vec::new());
        for row in r.deserialize::<ScoreRow>() {
            let row = row?;
            ids.push(row.id);
            labels.push(Label::from_sign(row.label as f64).map_err(|e| Error::parse(path, e.to_string()))?);
            scores.push(row.score);
        }
        Self::new(ids, labels, scores)
    }
}

/// One ROC vertex. `threshold` is `None` for the `+∞` sentinel at `(0, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: Option<f64>,
    pub fpr: f64,
    pub tpr: f64,
    pub tp: usize,
    pub fp: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Predict malignant iff `score >= cutoff`.
    pub cutoff: f64,
    pub fpr: f64,
    pub tpr: f64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    /// Euclidean distance to `(0, 1)`.
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub operating: OperatingPoint,
}

impl RocResult {
    pub fn write_vertices_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["threshold", "fpr", "tpr"])?;
        for p in &self.points {
            let t = p.threshold.map_or_else(|| "inf".to_string(), |t| t.to_string());
            w.write_record([t, p.fpr.to_string(), p.tpr.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn class_counts(labels: &[Label]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|l| l.is_positive()).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

fn check_scores(scores: &[f64]) -> Result<()> {
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidConfig("scores contain NaN".into()));
    }
    Ok(())
}

/// ROC vertices (one per distinct score) and the trapezoidal AUC,
/// accumulated in integer arithmetic.
fn roc_vertices(scores: &[f64], labels: &[Label]) -> Result<(Vec<RocPoint>, f64, usize, usize)> {
    check_scores(scores)?;
    if scores.len() != labels.len() {
        return Err(Error::InvalidConfig("scores and labels differ in length".into()));
    }
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: None,
        fpr: 0.0,
        tpr: 0.0,
        tp: 0,
        fp: 0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    // Twice the area in units of one positive-negative pair.
    let mut area2: u128 = 0;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let (tp0, fp0) = (tp, fp);
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]].is_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        area2 += ((fp - fp0) as u128) * ((tp0 + tp) as u128);
        points.push(RocPoint {
            threshold: Some(s),
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            tp,
            fp,
        });
    }
    let auc = area2 as f64 / (2 * pos * neg) as f64;
    Ok((points, auc, pos, neg))
}

/// Area under the ROC curve of `scores` against `labels`.
pub fn auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    Ok(roc_vertices(scores, labels)?.1)
}

/// ROC curve, trapezoidal AUC and the closest-to-corner operating point.
pub fn roc_and_auc(t: &ScoreTable) -> Result<RocResult> {
    let (points, auc, n_pos, n_neg) = roc_vertices(&t.scores, &t.labels)?;
    let mut r = RocResult {
        points,
        auc,
        n_pos,
        n_neg,
        operating: OperatingPoint {
            cutoff: f64::NAN,
            fpr: 0.0,
            tpr: 0.0,
            accuracy: 0.0,
            sensitivity: 0.0,
            specificity: 0.0,
            distance: f64::INFINITY,
        },
    };
    r.operating = select_cutoff(&r);
    Ok(r)
}

/// Vertex minimizing `sqrt(FPR² + (1 − TPR)²)` among finite thresholds.
/// Ties (within 1e-12) go to the higher TPR, then the lower threshold.
pub fn select_cutoff(r: &RocResult) -> OperatingPoint {
    const TIE: f64 = 1e-12;
    let mut best: Option<(&RocPoint, f64)> = None;
    for p in &r.points {
        let Some(t) = p.threshold else { continue };
        let d = p.fpr.hypot(1.0 - p.tpr);
        let better = match best {
            None => true,
            Some((b, bd)) => {
                if d < bd - TIE {
                    true
                } else if d > bd + TIE {
                    false
                } else if p.tpr != b.tpr {
                    p.tpr > b.tpr
                } else {
                    t < b.threshold.expect("finite")
                }
            }
        };
        if better {
            best = Some((p, d));
        }
    }
    let (p, d) = best.expect("ROC has at least one finite threshold");
    let tn = r.n_neg - p.fp;
    OperatingPoint {
        cutoff: p.threshold.expect("finite"),
        fpr: p.fpr,
        tpr: p.tpr,
        accuracy: (p.tp + tn) as f64 / (r.n_pos + r.n_neg) as f64,
        sensitivity: p.tpr,
        specificity: 1.0 - p.fpr,
        distance: d,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelongResult {
    pub auc_a: f64,
    pub auc_b: f64,
    pub variance_diff: f64,
    /// `±∞` when the difference has zero variance but the AUCs differ.
    pub z_statistic: f64,
    pub p_value: f64,
}

/// 1-based ranks with ties sharing their mean rank.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Placement values `(V10 per positive, V01 per negative)`: the fraction
/// of the opposite class a sample outscores (positives) or is outscored by
/// (negatives), ties counting one half.
pub fn placements(scores: &[f64], labels: &[Label]) -> (Vec<f64>, Vec<f64>) {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, l)| l.is_positive())
        .map(|(s, _)| *s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, l)| !l.is_positive())
        .map(|(s, _)| *s)
        .collect();
    let (m, n) = (pos.len() as f64, neg.len() as f64);
    let all: Vec<f64> = pos.iter().chain(&neg).copied().collect();
    let r_all = midranks(&all);
    let r_pos = midranks(&pos);
    let r_neg = midranks(&neg);
    let v10 = (0..pos.len()).map(|i| (r_all[i] - r_pos[i]) / n).collect();
    let v01 = (0..neg.len())
        .map(|j| 1.0 - (r_all[pos.len() + j] - r_neg[j]) / m)
        .collect();
    (v10, v01)
}

fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1) as f64
}

/// DeLong's test for two correlated AUCs computed on the same samples.
pub fn delong_test(a: &ScoreTable, b: &ScoreTable) -> Result<DelongResult> {
    if a.ids != b.ids {
        return Err(Error::SampleMismatch("sample ids differ".into()));
    }
    if a.labels != b.labels {
        return Err(Error::SampleMismatch("labels differ".into()));
    }
    let auc_a = auc(&a.scores, &a.labels)?;
    let auc_b = auc(&b.scores, &b.labels)?;
    let (v10a, v01a) = placements(&a.scores, &a.labels);
    let (v10b, v01b) = placements(&b.scores, &b.labels);
    let (m, n) = (v10a.len() as f64, v01a.len() as f64);
    let s = |x10: &[f64], y10: &[f64], x01: &[f64], y01: &[f64]| covariance(x10, y10) / m + covariance(x01, y01) / n;
    let s_aa = s(&v10a, &v10a, &v01a, &v01a);
    let s_bb = s(&v10b, &v10b, &v01b, &v01b);
    let s_ab = s(&v10a, &v10b, &v01a, &v01b);
    let variance_diff = (s_aa + s_bb - 2.0 * s_ab).max(0.0);
    let diff = auc_a - auc_b;
    let (z, p) = if variance_diff <= 1e-15 {
        if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let z = diff / variance_diff.sqrt();
        (z, two_sided_p(z))
    };
    Ok(DelongResult {
        auc_a,
        auc_b,
        variance_diff,
        z_statistic: z,
        p_value: p,
    })
}

/// `2·(1 − Φ(|z|))`, evaluated as `erfc(|z|/√2)`.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Solver and kernel settings shared by every fold.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LoocvOptions {
    pub distance: DistanceKind,
    /// Solver settings; `c` is overridden by the fold's chosen C.
    pub train: TrainConfig,
}

/// Leave-one-out decision values from a precomputed Gram matrix.
pub fn loocv_from_gram(gram: &GramMatrix, labels: &[Label], cfg: &TrainConfig) -> Result<Vec<f64>> {
    let n = labels.len();
    if gram.dim() != n {
        return Err(Error::InvalidConfig("gram and labels differ in size".into()));
    }
    if n < 3 {
        return Err(Error::InvalidConfig(format!(
            "leave-one-out needs at least 3 samples, got {n}"
        )));
    }
    class_counts(labels)?;
    let results: Vec<Result<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let sub_labels: Vec<Label> = idx.iter().map(|&j| labels[j]).collect();
            let sol = train(&gram.submatrix(&idx), &sub_labels, cfg).map_err(|e| Error::Fold {
                fold: i,
                source: Box::new(e),
            })?;
            let row = gram.row(i);
            Ok(idx
                .iter()
                .zip(&sol.alpha)
                .zip(&sub_labels)
                .map(|((&j, &a), l)| a * l.sign() * row[j])
                .sum::<f64>()
                + sol.bias)
        })
        .collect();
    results.into_iter().collect()
}

/// Leave-one-out scores with `(σ, C)` held fixed across folds.
pub fn loocv(
    dataset: &ShapeDataset,
    n_landmarks: usize,
    sigma: f64,
    c: f64,
    opts: &LoocvOptions,
) -> Result<ScoreTable> {
    let shapes = dataset.pre_shapes(n_landmarks)?;
    let labels = dataset.labels();
    let kernel = Kernel::new(sigma, opts.distance)?;
    let gram = kernel.gram(&shapes)?;
    let cfg = TrainConfig { c, ..opts.train };
    let scores = loocv_from_gram(&gram, &labels, &cfg)?;
    ScoreTable::new(dataset.ids(), labels, scores)
}

/// Selects `(σ, C)` once on the whole dataset, then runs [`loocv`] with
/// that pair held fixed.
pub fn loocv_selected(
    dataset: &ShapeDataset,
    n_landmarks: usize,
    grid: &HyperGrid,
    opts: &SelectOptions,
) -> Result<(ScoreTable, Selected)> {
    let shapes = dataset.pre_shapes(n_landmarks)?;
    let sel = select_hyperparams(&shapes, &dataset.labels(), grid, opts)?;
    let lo = LoocvOptions {
        distance: opts.distance,
        train: opts.train,
    };
    Ok((loocv(dataset, n_landmarks, sel.sigma, sel.c, &lo)?, sel))
}

/// Leave-one-out scores where every fold runs its own hyperparameter
/// search on its training part. Returns the per-fold selections as well.
pub fn loocv_nested(
    dataset: &ShapeDataset,
    n_landmarks: usize,
    grid: &HyperGrid,
    opts: &SelectOptions,
) -> Result<(ScoreTable, Vec<Selected>)> {
    let shapes = dataset.pre_shapes(n_landmarks)?;
    let labels = dataset.labels();
    let n = labels.len();
    if n < 3 {
        return Err(Error::InvalidConfig(format!(
            "leave-one-out needs at least 3 samples, got {n}"
        )));
    }
    class_counts(&labels)?;
    let results: Vec<Result<(f64, Selected)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let wrap = |e: Error| Error::Fold {
                fold: i,
                source: Box::new(e),
            };
            let idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let tr_shapes: Vec<PreShape> = idx.iter().map(|&j| shapes[j].clone()).collect();
            let tr_labels: Vec<Label> = idx.iter().map(|&j| labels[j]).collect();
            let sel = select_hyperparams(&tr_shapes, &tr_labels, grid, opts).map_err(wrap)?;
            let kernel = Kernel::new(sel.sigma, opts.distance).map_err(wrap)?;
            let gram = kernel.gram(&tr_shapes).map_err(wrap)?;
            let cfg = TrainConfig { c: sel.c, ..opts.train };
            let sol = train(&gram, &tr_labels, &cfg).map_err(wrap)?;
            let mut score = sol.bias;
            for ((s, &a), l) in tr_shapes.iter().zip(&sol.alpha).zip(&tr_labels) {
                if a > 0.0 {
                    score += a * l.sign() * kernel.eval(s, &shapes[i]).map_err(wrap)?;
                }
            }
            Ok((score, sel))
        })
        .collect();
    let (scores, selections): (Vec<f64>, Vec<Selected>) =
        results.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    Ok((ScoreTable::new(dataset.ids(), labels, scores)?, selections))
}

/// Bootstrap standard deviations of the headline metrics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSpread {
    pub auc: f64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub resamples: usize,
}

/// Resamples samples with replacement (seeded ChaCha8), recomputing ROC
/// and the operating point each time. Draws lacking a class are redrawn.
pub fn bootstrap_spread(t: &ScoreTable, resamples: usize, seed: u64) -> Result<MetricSpread> {
    class_counts(&t.labels)?;
    let n = t.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<[f64; 4]> = Vec::with_capacity(resamples);
    let mut scores = vec![0.0; n];
    let mut labels = vec![Label::Benign; n];
    while rows.len() < resamples {
        for k in 0..n {
            let i = rng.random_range(0..n);
            scores[k] = t.scores[i];
            labels[k] = t.labels[i];
        }
        let pos = labels.iter().filter(|l| l.is_positive()).count();
        if pos == 0 || pos == n {
            continue;
        }
        let r = roc_and_auc(&ScoreTable {
            ids: Vec::new(),
            labels: labels.clone(),
            scores: scores.clone(),
        })?;
        let o = r.operating;
        rows.push([r.auc, o.accuracy, o.sensitivity, o.specificity]);
    }
    let std = |k: usize| {
        let v: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        covariance(&v, &v).sqrt()
    };
    Ok(MetricSpread {
        auc: std(0),
        accuracy: std(1),
        sensitivity: std(2),
        specificity: std(3),
        resamples,
    })
}
