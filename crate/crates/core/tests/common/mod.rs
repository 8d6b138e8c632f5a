//! Test-only oracles and generators, independent of the library's
//! numerical paths.
#![allow(dead_code)]

use kendall_shape::{Label, LandmarkSet};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// A noisy circle with `n` landmarks; `spread` scales the Gaussian jitter.
pub fn random_landmarks(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> LandmarkSet {
    let pts = (0..n)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / n as f64;
            Complex64::new(t.cos() + spread * normal(rng), t.sin() + spread * normal(rng))
        })
        .collect();
    LandmarkSet::new(pts).unwrap()
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<Label> {
    loop {
        let l: Vec<Label> = (0..n)
            .map(|_| {
                if rng.random_bool(0.5) {
                    Label::Malignant
                } else {
                    Label::Benign
                }
            })
            .collect();
        let pos = l.iter().filter(|x| x.is_positive()).count();
        if pos > 0 && pos < n {
            return l;
        }
    }
}

/// Eq.-level full Procrustes distance from explicit real arithmetic:
/// centering, normalizing and the Hermitian product written out by hand.
pub fn brute_fp_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    fn pre(p: &[(f64, f64)]) -> Vec<(f64, f64)> {
        let n = p.len() as f64;
        let (mut mx, mut my) = (0.0, 0.0);
        for &(x, y) in p {
            mx += x;
            my += y;
        }
        mx /= n;
        my /= n;
        let mut ss = 0.0;
        for &(x, y) in p {
            ss += (x - mx) * (x - mx) + (y - my) * (y - my);
        }
        let s = ss.sqrt();
        p.iter().map(|&(x, y)| ((x - mx) / s, (y - my) / s)).collect()
    }
    let (za, zb) = (pre(a), pre(b));
    // conj(a) * b = (ar - i ai)(br + i bi)
    let (mut re, mut im) = (0.0, 0.0);
    for k in 0..za.len() {
        let (ar, ai) = za[k];
        let (br, bi) = zb[k];
        re += ar * br + ai * bi;
        im += ar * bi - ai * br;
    }
    let r = 1.0 - (re * re + im * im);
    r.max(0.0).sqrt()
}

pub fn xy(lm: &LandmarkSet) -> Vec<(f64, f64)> {
    lm.points().iter().map(|p| (p.re, p.im)).collect()
}

/// Smallest eigenvalue of a symmetric row-major matrix.
pub fn min_eigenvalue(n: usize, data: &[f64]) -> f64 {
    let m = DMatrix::from_row_slice(n, n, data);
    m.symmetric_eigen().eigenvalues.min()
}

/// Mann-Whitney statistic by explicit pair enumeration.
pub fn pairwise_auc(scores: &[f64], labels: &[Label]) -> f64 {
    let mut twice = 0u64;
    let (mut p, mut q) = (0u64, 0u64);
    for (i, li) in labels.iter().enumerate() {
        if !li.is_positive() {
            continue;
        }
        p += 1;
        for (j, lj) in labels.iter().enumerate() {
            if lj.is_positive() {
                continue;
            }
            if scores[i] > scores[j] {
                twice += 2;
            } else if scores[i] == scores[j] {
                twice += 1;
            }
        }
    }
    for l in labels {
        if !l.is_positive() {
            q += 1;
        }
    }
    twice as f64 / (2 * p * q) as f64
}

/// Independent solver for the SVM dual
/// `max Σα − ½αᵀQα, 0 ≤ α ≤ C, yᵀα = 0`: accelerated projected gradient
/// followed by an exact solve of the KKT system on the identified free set.
pub struct QpOracle {
    pub alpha: Vec<f64>,
    pub objective: f64,
}

fn dual_obj(q: &DMatrix<f64>, a: &DVector<f64>) -> f64 {
    a.sum() - 0.5 * a.dot(&(q * a))
}

fn project(v: &DVector<f64>, y: &[f64], c: f64) -> DVector<f64> {
    let clip = |lam: f64| DVector::from_iterator(v.len(), (0..v.len()).map(|i| (v[i] - lam * y[i]).clamp(0.0, c)));
    let h = |lam: f64| {
        let a = clip(lam);
        (0..v.len()).map(|i| y[i] * a[i]).sum::<f64>()
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    while h(lo) < 0.0 {
        lo *= 2.0;
    }
    while h(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clip(0.5 * (lo + hi))
}

pub fn solve_dual_qp(gram: &[f64], labels: &[Label], c: f64) -> QpOracle {
    let n = labels.len();
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * gram[i * n + j]);
    let lmax = q.clone().symmetric_eigen().eigenvalues.max().max(1e-12);
    let step = 1.0 / lmax;
    let ones = DVector::from_element(n, 1.0);

    let mut x = DVector::zeros(n);
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut prev_obj = dual_obj(&q, &x);
    for _ in 0..20_000 {
        let grad = &ones - &q * &z;
        let x_next = project(&(&z + step * grad), &y, c);
        let obj = dual_obj(&q, &x_next);
        if obj < prev_obj {
            // Adaptive restart.
            t = 1.0;
            z = x.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &x_next + ((t - 1.0) / t_next) * (&x_next - &x);
        x = x_next;
        t = t_next;
        prev_obj = obj;
    }

    let mut best = x.clone();
    let mut best_obj = dual_obj(&q, &x);
    let tol = 1e-6 * c.max(1.0);
    let free: Vec<usize> = (0..n).filter(|&i| x[i] > tol && x[i] < c - tol).collect();
    let bound: Vec<usize> = (0..n).filter(|i| !free.contains(i)).collect();
    let mut fixed = DVector::zeros(n);
    for &i in &bound {
        fixed[i] = if x[i] >= c - tol { c } else { 0.0 };
    }
    if !free.is_empty() {
        let m = free.len();
        let mut a = DMatrix::zeros(m + 1, m + 1);
        let mut rhs = DVector::zeros(m + 1);
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                a[(r, s)] = q[(i, j)];
            }
            a[(r, m)] = y[i];
            a[(m, r)] = y[i];
            rhs[r] = 1.0 - bound.iter().map(|&j| q[(i, j)] * fixed[j]).sum::<f64>();
        }
        rhs[m] = -bound.iter().map(|&j| y[j] * fixed[j]).sum::<f64>();
        if let Some(sol) = a.lu().solve(&rhs) {
            let mut cand = fixed.clone();
            for (r, &i) in free.iter().enumerate() {
                cand[i] = sol[r];
            }
            let feasible = cand.iter().all(|&v| v >= -1e-12 && v <= c + 1e-12);
            let obj = dual_obj(&q, &cand);
            if feasible && obj >= best_obj - 1e-12 {
                best = cand;
                best_obj = obj;
            }
        }
    }
    QpOracle {
        alpha: best.iter().copied().collect(),
        objective: best_obj,
    }
}

/// Random training problem on Procrustes-Gaussian Gram matrices:
/// `n` shapes of 25 landmarks, σ and C drawn from wide ranges.
pub fn random_svm_instance(rng: &mut ChaCha8Rng, n: usize) -> (kendall_shape::GramMatrix, Vec<Label>, f64) {
    let spread = rng.random_range(0.05..0.4);
    let shapes: Vec<_> = (0..n)
        .map(|_| kendall_shape::to_pre_shape(&random_landmarks(rng, 25, spread)).unwrap())
        .collect();
    let sigma = [0.1, 0.2, 0.5, 1.0][rng.random_range(0..4)];
    let c = 10f64.powf(rng.random_range(-1.0..2.0));
    let gram = kendall_shape::shape::gram_matrix(&shapes, sigma).unwrap();
    (gram, random_labels(rng, n), c)
}
