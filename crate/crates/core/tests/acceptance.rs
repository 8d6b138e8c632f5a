//! One PASS/FAIL line per acceptance criterion, written straight to stderr
//! so the lines survive test-output capture.

mod common;

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use common::*;
use kendall_shape::eval::{auc, delong_test, loocv_selected, roc_and_auc, ScoreTable};
use kendall_shape::io::load_dataset;
use kendall_shape::shape::gram_matrix;
use kendall_shape::svm::{kkt_violation, train, HyperGrid, SelectOptions};
use kendall_shape::synthetic::{generate, SynthConfig};
use kendall_shape::{fp_distance, to_pre_shape, ShapeDataset, TrainConfig};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail }
    }
}

fn report(name: &str, o: &Outcome) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[acceptance] {tag} {name}: {}", o.detail);
}

fn similarity_invariance() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(3..=200);
        let spread = rng.random_range(0.01..1.0);
        let lm = random_landmarks(&mut rng, n, spread);
        // Scale 1e-2..1e2 and offsets up to 1e3 px keep the transformed
        // coordinates representable to well under 1e-9 of the shape size.
        let scale = Complex64::from_polar(10f64.powf(rng.random_range(-2.0..2.0)), rng.random_range(-3.2..3.2));
        let shift = Complex64::new(rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3));
        let moved = lm.transformed(scale, shift);
        let d = fp_distance(&to_pre_shape(&lm).unwrap(), &to_pre_shape(&moved).unwrap()).unwrap();
        worst = worst.max(d);
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        worst <= 1e-9 && secs < 5.0,
        format!("200 sets, max distance {worst:.3e} (<= 1e-9), {secs:.3} s (< 5 s)"),
    )
}

fn gram_psd() -> Outcome {
    let mut worst = f64::INFINITY;
    for ds in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + ds);
        let shapes: Vec<_> = if ds % 2 == 0 {
            let synth = generate(&SynthConfig {
                n_benign: 25,
                n_malignant: 25,
                n_landmarks: 25,
                seed: ds,
                ..Default::default()
            })
            .unwrap();
            synth.pre_shapes(25).unwrap()
        } else {
            let spread = rng.random_range(0.02..0.6);
            (0..50)
                .map(|_| to_pre_shape(&random_landmarks(&mut rng, 25, spread)).unwrap())
                .collect()
        };
        for sigma in [0.1, 0.5, 1.0] {
            let g = gram_matrix(&shapes, sigma).unwrap();
            worst = worst.min(min_eigenvalue(50, g.as_slice()));
        }
    }
    Outcome::new(
        worst >= -1e-8,
        format!("20 datasets x 3 sigmas, N = 50, n = 25, min eigenvalue {worst:.3e} (>= -1e-8)"),
    )
}

fn svm_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3001);
    let (mut gap, mut kkt): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let n = rng.random_range(2..=25);
        let (gram, labels, c) = random_svm_instance(&mut rng, n);
        let cfg = TrainConfig {
            c,
            kkt_tolerance: 1e-10,
            ..Default::default()
        };
        let sol = train(&gram, &labels, &cfg).unwrap();
        let oracle = solve_dual_qp(gram.as_slice(), &labels, c);
        gap = gap.max((sol.objective - oracle.objective).abs());
        kkt = kkt.max(kkt_violation(&gram, &labels, &sol, c));
        // Default solver settings must also meet the KKT bound.
        let loose = train(&gram, &labels, &TrainConfig::with_c(c)).unwrap();
        kkt = kkt.max(kkt_violation(&gram, &labels, &loose, c));
    }
    Outcome::new(
        gap <= 1e-6 && kkt <= 1e-3,
        format!("50 instances, N <= 25, max objective gap {gap:.3e} (<= 1e-6), max KKT violation {kkt:.3e} (<= 1e-3)"),
    )
}

fn auc_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4001);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let n = rng.random_range(2..=200);
        let labels = random_labels(&mut rng, n);
        let scores: Vec<f64> = if k % 2 == 0 {
            (0..n).map(|_| rng.random_range(0..6) as f64).collect()
        } else {
            (0..n).map(|_| normal(&mut rng)).collect()
        };
        let a = auc(&scores, &labels).unwrap();
        worst = worst.max((a - pairwise_auc(&scores, &labels)).abs());
    }
    Outcome::new(
        worst <= 1e-12,
        format!("1000 tables, max |trapezoid - Mann-Whitney| {worst:.3e} (<= 1e-12)"),
    )
}

fn delong_calibration() -> Outcome {
    let mut rejects = 0;
    for seed in 0..500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed);
        let labels = random_labels(&mut rng, 200);
        let a: Vec<f64> = (0..200).map(|_| normal(&mut rng)).collect();
        let b: Vec<f64> = (0..200).map(|_| normal(&mut rng)).collect();
        let r = delong_test(
            &ScoreTable::unnamed(labels.clone(), a).unwrap(),
            &ScoreTable::unnamed(labels, b).unwrap(),
        )
        .unwrap();
        if r.p_value < 0.05 {
            rejects += 1;
        }
    }
    let rate = rejects as f64 / 500.0;
    Outcome::new(
        (0.02..=0.08).contains(&rate),
        format!("500 null simulations, N = 200, reject rate {rate:.3} (in [0.02, 0.08])"),
    )
}

fn synthetic_set() -> ShapeDataset {
    generate(&SynthConfig::default()).unwrap()
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let ds = synthetic_set();
    let (t, sel) = loocv_selected(&ds, 50, &HyperGrid::default(), &SelectOptions::default()).unwrap();
    let r = roc_and_auc(&t).unwrap();
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        r.auc >= 0.95 && secs < 60.0,
        format!(
            "60+60, n = 50, sigma {} C {}, LOOCV AUC {:.4} (>= 0.95), {secs:.2} s (< 60 s)",
            sel.sigma, sel.c, r.auc
        ),
    )
}

fn per_count_tables(ds: &ShapeDataset, counts: &[usize]) -> Vec<(usize, ScoreTable, f64)> {
    counts
        .iter()
        .map(|&n| {
            let (t, _) = loocv_selected(ds, n, &HyperGrid::default(), &SelectOptions::default()).unwrap();
            let a = auc(&t.scores, &t.labels).unwrap();
            (n, t, a)
        })
        .collect()
}

fn landmark_insensitivity() -> Outcome {
    let ds = synthetic_set();
    let runs = per_count_tables(&ds, &[25, 50, 100, 200]);
    let aucs: Vec<f64> = runs.iter().map(|r| r.2).collect();
    let spread =
        aucs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - aucs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut min_p: f64 = 1.0;
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            min_p = min_p.min(delong_test(&runs[i].1, &runs[j].1).unwrap().p_value);
        }
    }
    let listed: Vec<String> = runs.iter().map(|(n, _, a)| format!("n={n}: {a:.4}")).collect();
    Outcome::new(
        spread <= 0.05 && min_p > 0.05,
        format!(
            "AUCs [{}], spread {spread:.4} (<= 0.05), min pairwise DeLong p {min_p:.3} (> 0.05)",
            listed.join(", ")
        ),
    )
}

/// Runs only when a manifest of the clinical dataset is supplied.
fn clinical_reproduction() -> Option<Outcome> {
    let path = PathBuf::from(std::env::var_os("KSHAPE_UDIAT_MANIFEST")?);
    let ds = match load_dataset(&path) {
        Ok(ds) => ds,
        Err(e) => return Some(Outcome::new(false, format!("could not load {}: {e}", path.display()))),
    };
    let runs = per_count_tables(&ds, &[25, 50, 100, 200]);
    let ok = runs.iter().all(|r| (r.2 - 0.81).abs() <= 0.05);
    let listed: Vec<String> = runs.iter().map(|(n, _, a)| format!("n={n}: {a:.4}")).collect();
    Some(Outcome::new(
        ok,
        format!("AUCs [{}] (each within 0.81 +/- 0.05)", listed.join(", ")),
    ))
}

#[test]
fn acceptance_criteria() {
    let criteria: Vec<Criterion> = vec![
        ("similarity invariance", similarity_invariance),
        ("gram positive semidefinite", gram_psd),
        ("svm oracle equivalence", svm_oracle),
        ("auc identity", auc_identity),
        ("delong calibration", delong_calibration),
        ("end-to-end synthetic classification", end_to_end),
        ("landmark-count insensitivity", landmark_insensitivity),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let o = run();
        report(name, &o);
        if !o.pass {
            failed.push(name);
        }
    }
    match clinical_reproduction() {
        Some(o) => {
            report("clinical reproduction", &o);
            if !o.pass {
                failed.push("clinical reproduction");
            }
        }
        None => {
            let _ = writeln!(
                std::io::stderr(),
                "[acceptance] SKIP clinical reproduction: set KSHAPE_UDIAT_MANIFEST to a manifest of the clinical masks"
            );
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
