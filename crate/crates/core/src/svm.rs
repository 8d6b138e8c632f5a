//! Soft-margin kernel SVM trained in the dual by Sequential Minimal
//! Optimization over a precomputed Gram matrix.
//!
//! The dual problem is
//!
//! ```text
//! maximize  W(α) = Σ α_i − ½ Σ_ij α_i α_j c_i c_j K_ij
//! subject to 0 ≤ α_i ≤ C,  Σ α_i c_i = 0
//! ```
//!
//! and the decision function is `f(z) = Σ α_i c_i K(z_i, z) + b`. Working
//! pairs are chosen with the second-order rule (maximal violating `i`, `j`
//! maximizing the guaranteed objective gain). In no-bias mode the equality
//! constraint is dropped, `b = 0`, and single coordinates are optimized.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::eval::auc;
use crate::shape::{to_pre_shape, DistanceKind, GramMatrix, Kernel, LandmarkSet, PreShape};

/// Curvature floor for non-positive pair curvature.
const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Box constraint.
    pub c: f64,
    /// Largest admissible KKT violation at termination.
    pub kkt_tolerance: f64,
    /// Update budget, in multiples of the training-set size.
    pub max_passes: usize,
    /// Train with the bias term and its equality constraint.
    pub bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 1.0,
            kkt_tolerance: 1e-3,
            max_passes: 10_000,
            bias: true,
        }
    }
}

impl TrainConfig {
    pub fn with_c(c: f64) -> Self {
        TrainConfig {
            c,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidConfig(format!("C must be positive, got {}", self.c)));
        }
        if !(self.kkt_tolerance > 0.0) || self.max_passes == 0 {
            return Err(Error::InvalidConfig(
                "kkt_tolerance and max_passes must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Optimal dual variables for one training problem.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// `W(α)` at termination.
    pub objective: f64,
    pub iterations: usize,
}

fn signs(labels: &[Label]) -> Vec<f64> {
    labels.iter().map(|l| l.sign()).collect()
}

/// `W(α) = Σ α_i − ½ αᵀ Q α` with `Q_ij = c_i c_j K_ij`.
pub fn dual_objective(gram: &GramMatrix, labels: &[Label], alpha: &[f64]) -> f64 {
    let y = signs(labels);
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        let row = gram.row(i);
        let s: f64 = (0..n).map(|j| alpha[j] * y[j] * row[j]).sum();
        quad += alpha[i] * y[i] * s;
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Training-set decision values `f_i = Σ_j α_j c_j K_ij + b`.
pub fn training_decisions(gram: &GramMatrix, labels: &[Label], sol: &DualSolution) -> Vec<f64> {
    let y = signs(labels);
    (0..gram.dim())
        .map(|i| {
            let row = gram.row(i);
            sol.alpha
                .iter()
                .zip(&y)
                .zip(row)
                .map(|((a, c), k)| a * c * k)
                .sum::<f64>()
                + sol.bias
        })
        .collect()
}

/// Largest violation of the margin conditions
/// `α=0 ⇒ c f ≥ 1`, `0<α<C ⇒ c f = 1`, `α=C ⇒ c f ≤ 1`.
pub fn kkt_violation(gram: &GramMatrix, labels: &[Label], sol: &DualSolution, c: f64) -> f64 {
    let f = training_decisions(gram, labels, sol);
    sol.alpha
        .iter()
        .zip(labels)
        .zip(f)
        .map(|((&a, l), fi)| {
            let m = l.sign() * fi;
            if a <= 0.0 {
                (1.0 - m).max(0.0)
            } else if a >= c {
                (m - 1.0).max(0.0)
            } else {
                (m - 1.0).abs()
            }
        })
        .fold(0.0, f64::max)
}

fn check_problem(gram: &GramMatrix, labels: &[Label], cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if gram.dim() != labels.len() {
        return Err(Error::InvalidConfig(format!(
            "gram is {0}x{0} but {1} labels given",
            gram.dim(),
            labels.len()
        )));
    }
    if labels.len() < 2 {
        return Err(Error::InvalidConfig("need at least two training samples".into()));
    }
    let pos = labels.iter().filter(|l| l.is_positive()).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Solves the dual. See the module docs for the problem statement.
pub fn train(gram: &GramMatrix, labels: &[Label], cfg: &TrainConfig) -> Result<DualSolution> {
    solve(gram, labels, cfg, None)
}

/// As [`train`], also returning `W(α)` after every accepted update.
pub fn train_traced(gram: &GramMatrix, labels: &[Label], cfg: &TrainConfig) -> Result<(DualSolution, Vec<f64>)> {
    let mut trace = Vec::new();
    let sol = solve(gram, labels, cfg, Some(&mut trace))?;
    Ok((sol, trace))
}

fn solve(
    gram: &GramMatrix,
    labels: &[Label],
    cfg: &TrainConfig,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<DualSolution> {
    check_problem(gram, labels, cfg)?;
    let n = labels.len();
    let y = signs(labels);
    let c = cfg.c;
    let mut alpha = vec![0.0; n];
    // Gradient of ½αᵀQα − Σα.
    let mut grad = vec![-1.0; n];
    let budget = cfg.max_passes.saturating_mul(n);
    let q = |i: usize, j: usize| y[i] * y[j] * gram.get(i, j);
    let objective = |alpha: &[f64], grad: &[f64]| 0.5 * alpha.iter().zip(grad).map(|(a, g)| a - a * g).sum::<f64>();

    let mut iterations = 0;
    loop {
        let step = if cfg.bias {
            select_pair(gram, &y, &alpha, &grad, c, cfg.kkt_tolerance)
        } else {
            select_single(&alpha, &grad, c, cfg.kkt_tolerance)
        };
        let work = match step {
            Selection::Converged => break,
            Selection::Work(w) => w,
        };
        if iterations >= budget {
            return Err(Error::NotConverged {
                iterations,
                gap: work.gap,
            });
        }
        iterations += 1;

        match work.j {
            Some(j) => {
                let i = work.i;
                let (old_i, old_j) = (alpha[i], alpha[j]);
                let curv = {
                    let k = gram.get(i, i) + gram.get(j, j) - 2.0 * gram.get(i, j);
                    if k > 0.0 {
                        k
                    } else {
                        TAU
                    }
                };
                if y[i] != y[j] {
                    let delta = (-grad[i] - grad[j]) / curv;
                    let diff = alpha[i] - alpha[j];
                    alpha[i] += delta;
                    alpha[j] += delta;
                    if diff > 0.0 {
                        if alpha[j] < 0.0 {
                            alpha[j] = 0.0;
                            alpha[i] = diff;
                        }
                    } else if alpha[i] < 0.0 {
                        alpha[i] = 0.0;
                        alpha[j] = -diff;
                    }
                    if diff > 0.0 {
                        if alpha[i] > c {
                            alpha[i] = c;
                            alpha[j] = c - diff;
                        }
                    } else if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = c + diff;
                    }
                } else {
                    let delta = (grad[i] - grad[j]) / curv;
                    let sum = alpha[i] + alpha[j];
                    alpha[i] -= delta;
                    alpha[j] += delta;
                    if sum > c {
                        if alpha[i] > c {
                            alpha[i] = c;
                            alpha[j] = sum - c;
                        }
                    } else if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = sum;
                    }
                    if sum > c {
                        if alpha[j] > c {
                            alpha[j] = c;
                            alpha[i] = sum - c;
                        }
                    } else if alpha[i] < 0.0 {
                        alpha[i] = 0.0;
                        alpha[j] = sum;
                    }
                }
                let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
                for (k, g) in grad.iter_mut().enumerate() {
                    *g += q(i, k) * di + q(j, k) * dj;
                }
            }
            None => {
                let t = work.i;
                let curv = if gram.get(t, t) > 0.0 { gram.get(t, t) } else { TAU };
                let old = alpha[t];
                alpha[t] = (old - grad[t] / curv).clamp(0.0, c);
                let d = alpha[t] - old;
                for (k, g) in grad.iter_mut().enumerate() {
                    *g += q(t, k) * d;
                }
            }
        }
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(objective(&alpha, &grad));
        }
    }

    let mut sol = DualSolution {
        objective: dual_objective(gram, labels, &alpha),
        alpha,
        bias: 0.0,
        iterations,
    };
    if cfg.bias {
        sol.bias = compute_bias(gram, &y, &sol.alpha, c);
    }
    Ok(sol)
}

struct Work {
    i: usize,
    j: Option<usize>,
    gap: f64,
}

enum Selection {
    Converged,
    Work(Work),
}

fn select_pair(gram: &GramMatrix, y: &[f64], alpha: &[f64], grad: &[f64], c: f64, eps: f64) -> Selection {
    // m(α) = max over I_up of −y_t G_t.
    let mut gmax = f64::NEG_INFINITY;
    let mut i = None;
    for t in 0..alpha.len() {
        let up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
        if up && -y[t] * grad[t] >= gmax {
            gmax = -y[t] * grad[t];
            i = Some(t);
        }
    }
    let Some(i) = i else { return Selection::Converged };

    // −M(α) = max over I_low of y_t G_t; j minimizes −b²/a.
    let mut gmax2 = f64::NEG_INFINITY;
    let mut best = None;
    let mut best_obj = f64::INFINITY;
    for t in 0..alpha.len() {
        let low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
        if !low {
            continue;
        }
        let v = y[t] * grad[t];
        if v >= gmax2 {
            gmax2 = v;
        }
        let b = gmax + v;
        if b > 0.0 {
            let a = gram.get(i, i) + gram.get(t, t) - 2.0 * gram.get(i, t);
            let a = if a > 0.0 { a } else { TAU };
            let obj = -(b * b) / a;
            if obj <= best_obj {
                best_obj = obj;
                best = Some(t);
            }
        }
    }
    let gap = gmax + gmax2;
    match best {
        Some(j) if gap >= eps => Selection::Work(Work { i, j: Some(j), gap }),
        _ => Selection::Converged,
    }
}

fn select_single(alpha: &[f64], grad: &[f64], c: f64, eps: f64) -> Selection {
    let mut worst = 0.0;
    let mut pick = None;
    for t in 0..alpha.len() {
        let v = if grad[t] < 0.0 && alpha[t] < c {
            -grad[t]
        } else if grad[t] > 0.0 && alpha[t] > 0.0 {
            grad[t]
        } else {
            0.0
        };
        if v > worst {
            worst = v;
            pick = Some(t);
        }
    }
    match pick {
        Some(i) if worst >= eps => Selection::Work(Work { i, j: None, gap: worst }),
        _ => Selection::Converged,
    }
}

/// Mean of `c_i − Σ_j β_j K_ij` over free vectors, or the midpoint of the
/// interval of biases consistent with the bounded vectors.
fn compute_bias(gram: &GramMatrix, y: &[f64], alpha: &[f64], c: f64) -> f64 {
    let n = alpha.len();
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for i in 0..n {
        let row = gram.row(i);
        let g: f64 = (0..n).map(|j| alpha[j] * y[j] * row[j]).sum();
        let v = y[i] - g;
        if alpha[i] > 0.0 && alpha[i] < c {
            free_sum += v;
            free_count += 1;
        } else {
            // c_i (g_i + b) ≥ 1 at α = 0, ≤ 1 at α = C.
            let at_zero = alpha[i] <= 0.0;
            if (y[i] > 0.0) == at_zero {
                lower = lower.max(v);
            } else {
                upper = upper.min(v);
            }
        }
    }
    if free_count > 0 {
        free_sum / free_count as f64
    } else if lower.is_finite() && upper.is_finite() {
        0.5 * (lower + upper)
    } else if lower.is_finite() {
        lower
    } else {
        upper
    }
}

/// A trained classifier holding only its support vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    kernel: Kernel,
    c: f64,
    bias: f64,
    support: Vec<PreShape>,
    coeffs: Vec<f64>,
}

impl SvmModel {
    /// Keeps samples with `α_i > 0`, storing `β_i = α_i c_i`.
    pub fn from_solution(shapes: &[PreShape], labels: &[Label], sol: &DualSolution, kernel: Kernel, c: f64) -> Self {
        let mut support = Vec::new();
        let mut coeffs = Vec::new();
        for ((s, l), &a) in shapes.iter().zip(labels).zip(&sol.alpha) {
            if a > 0.0 {
                support.push(s.clone());
                coeffs.push(a * l.sign());
            }
        }
        SvmModel {
            kernel,
            c,
            bias: sol.bias,
            support,
            coeffs,
        }
    }

    pub fn fit(shapes: &[PreShape], labels: &[Label], kernel: Kernel, cfg: &TrainConfig) -> Result<Self> {
        let gram = kernel.gram(shapes)?;
        let sol = train(&gram, labels, cfg)?;
        Ok(Self::from_solution(shapes, labels, &sol, kernel, cfg.c))
    }

    pub fn sigma(&self) -> f64 {
        self.kernel.sigma()
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn support_shapes(&self) -> &[PreShape] {
        &self.support
    }

    /// `β_i = α_i c_i` per support vector.
    pub fn dual_coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `Σ β_i K(z_i, z) + b`; positive means malignant.
    pub fn decision_value(&self, shape: &PreShape) -> Result<f64> {
        let mut acc = 0.0;
        for (s, b) in self.support.iter().zip(&self.coeffs) {
            acc += b * self.kernel.eval(s, shape)?;
        }
        Ok(acc + self.bias)
    }

    pub fn predict(&self, shape: &PreShape) -> Result<Label> {
        Ok(if self.decision_value(shape)? >= 0.0 {
            Label::Malignant
        } else {
            Label::Benign
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            sigma: self.kernel.sigma(),
            c: self.c,
            bias: self.bias,
            coeffs: self.coeffs.clone(),
            support_landmarks: self
                .support
                .iter()
                .map(|s| s.coords().iter().map(|p| [p.re, p.im]).collect())
                .collect(),
            distance: self.kernel.distance_kind(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.coeffs.len() != doc.support_landmarks.len() {
            return Err(Error::InvalidConfig(
                "coeffs and support_landmarks differ in length".into(),
            ));
        }
        if !(doc.c > 0.0) {
            return Err(Error::InvalidConfig(format!("C must be positive, got {}", doc.c)));
        }
        let kernel = Kernel::new(doc.sigma, doc.distance)?;
        let support = doc
            .support_landmarks
            .iter()
            .map(|pts| {
                let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p[0], p[1])).collect();
                to_pre_shape(&LandmarkSet::from_xy(&xy)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SvmModel {
            kernel,
            c: doc.c,
            bias: doc.bias,
            support,
            coeffs: doc.coeffs,
        })
    }
}

/// Free-function form of [`SvmModel::decision_value`].
pub fn decision_value(model: &SvmModel, shape: &PreShape) -> Result<f64> {
    model.decision_value(shape)
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    sigma: f64,
    #[serde(rename = "C")]
    c: f64,
    bias: f64,
    coeffs: Vec<f64>,
    support_landmarks: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    distance: DistanceKind,
}

/// Candidate kernel widths and box constraints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub sigmas: Vec<f64>,
    #[serde(rename = "C")]
    pub cs: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            sigmas: vec![0.05, 0.1, 0.2, 0.3, 0.5, 1.0],
            cs: vec![0.1, 1.0, 10.0, 100.0],
        }
    }
}

impl HyperGrid {
    pub fn fixed(sigma: f64, c: f64) -> Self {
        HyperGrid {
            sigmas: vec![sigma],
            cs: vec![c],
        }
    }

    pub fn is_single(&self) -> bool {
        self.sigmas.len() == 1 && self.cs.len() == 1
    }
}

/// Settings for the inner cross-validation of [`select_hyperparams`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectOptions {
    pub folds: usize,
    pub seed: u64,
    pub distance: DistanceKind,
    /// Solver settings; `c` is overridden by each grid point.
    pub train: TrainConfig,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions {
            folds: 5,
            seed: 0,
            distance: DistanceKind::Procrustes,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selected {
    pub sigma: f64,
    #[serde(rename = "C")]
    pub c: f64,
    /// Pooled out-of-fold AUC; `None` when the grid had a single point.
    pub cv_auc: Option<f64>,
}

/// Stratified fold index per sample: each class is shuffled with a seeded
/// ChaCha8 stream and dealt round-robin, continuing across classes.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for class in [Label::Benign, Label::Malignant] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

/// Picks `(σ, C)` maximizing pooled out-of-fold AUC of a stratified k-fold
/// split. Ties go to the larger σ, then the smaller C.
pub fn select_hyperparams(
    shapes: &[PreShape],
    labels: &[Label],
    grid: &HyperGrid,
    opts: &SelectOptions,
) -> Result<Selected> {
    if grid.sigmas.is_empty() || grid.cs.is_empty() {
        return Err(Error::InvalidConfig("hyperparameter grids must be non-empty".into()));
    }
    if grid.is_single() {
        return Ok(Selected {
            sigma: grid.sigmas[0],
            c: grid.cs[0],
            cv_auc: None,
        });
    }
    if shapes.len() != labels.len() {
        return Err(Error::InvalidConfig("shapes and labels differ in length".into()));
    }
    let pos = labels.iter().filter(|l| l.is_positive()).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass);
    }
    if labels.len() < 6 || opts.folds < 2 {
        return Err(Error::InvalidConfig(
            "hyperparameter search needs at least 6 samples and 2 folds".into(),
        ));
    }

    let mut sigmas = grid.sigmas.clone();
    sigmas.sort_by(|a, b| b.total_cmp(a));
    sigmas.dedup();
    let mut cs = grid.cs.clone();
    cs.sort_by(f64::total_cmp);
    cs.dedup();

    let fold_of = stratified_folds(labels, opts.folds, opts.seed);
    let mut best: Option<Selected> = None;
    for &sigma in &sigmas {
        let kernel = Kernel::new(sigma, opts.distance)?;
        let gram = kernel.gram(shapes)?;
        let aucs: Vec<f64> = cs
            .par_iter()
            .map(|&c| {
                let cfg = TrainConfig { c, ..opts.train };
                let scores = out_of_fold_scores(&gram, labels, &fold_of, opts.folds, &cfg)?;
                auc(&scores, labels)
            })
            .collect::<Result<_>>()?;
        for (&c, a) in cs.iter().zip(aucs) {
            if best.is_none_or(|b| a > b.cv_auc.unwrap_or(f64::NEG_INFINITY)) {
                best = Some(Selected {
                    sigma,
                    c,
                    cv_auc: Some(a),
                });
            }
        }
    }
    Ok(best.expect("grid is non-empty"))
}

fn out_of_fold_scores(
    gram: &GramMatrix,
    labels: &[Label],
    fold_of: &[usize],
    folds: usize,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    let mut scores = vec![0.0; labels.len()];
    for f in 0..folds {
        let train_idx: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] != f).collect();
        let test_idx: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] == f).collect();
        if test_idx.is_empty() {
            continue;
        }
        let sub = gram.submatrix(&train_idx);
        let sub_labels: Vec<Label> = train_idx.iter().map(|&i| labels[i]).collect();
        let sol = train(&sub, &sub_labels, cfg).map_err(|e| Error::Fold {
            fold: f,
            source: Box::new(e),
        })?;
        for &t in &test_idx {
            let row = gram.row(t);
            scores[t] = train_idx
                .iter()
                .zip(&sol.alpha)
                .zip(&sub_labels)
                .map(|((&j, &a), l)| a * l.sign() * row[j])
                .sum::<f64>()
                + sol.bias;
        }
    }
    Ok(scores)
}
