//! The landmark-count sweep: selection, LOOCV, ROC, cutoff metrics and
//! pairwise DeLong tests, written to an output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use kendall_shape::eval::{
    bootstrap_spread, delong_test, loocv_nested, loocv_selected, roc_and_auc, DelongResult, MetricSpread, RocResult,
    ScoreTable,
};
use kendall_shape::io::load_dataset;
use kendall_shape::svm::{SelectOptions, Selected};
use kendall_shape::{Error, TrainConfig};
use serde::Serialize;

use crate::config::RunManifest;
use crate::{write_json, CliError};

/// One row of the summary table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountSummary {
    pub landmarks: usize,
    /// `None` under nested CV, where every fold picks its own pair.
    pub sigma: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub cv_auc: Option<f64>,
    pub auc: f64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub cutoff: f64,
    pub spread: Option<MetricSpread>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub landmarks_a: usize,
    pub landmarks_b: usize,
    #[serde(flatten)]
    pub result: DelongResult,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluateReport {
    pub summary: Vec<CountSummary>,
    pub comparisons: Vec<Comparison>,
    pub tables: Vec<ScoreTable>,
}

#[derive(Serialize)]
struct RocDoc<'a> {
    landmarks: usize,
    selected: Option<&'a Selected>,
    roc: &'a RocResult,
    spread: Option<&'a MetricSpread>,
}

fn context(what: String) -> impl FnOnce(Error) -> CliError {
    move |source| CliError::Context { context: what, source }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| context(format!("writing {}", path.display()))(e.into()))
}

/// Runs the full protocol described by `run` and writes every artifact
/// into `run.out`.
pub fn cmd_evaluate(run: &RunManifest) -> Result<EvaluateReport, CliError> {
    run.validate()?;
    let ds = load_dataset(&run.dataset).map_err(context(format!("loading {}", run.dataset.display())))?;
    let (benign, malignant) = ds.class_counts();
    if benign == 0 || malignant == 0 {
        return Err(CliError::Context {
            context: format!(
                "dataset {} has {benign} benign and {malignant} malignant samples",
                run.dataset.display()
            ),
            source: Error::SingleClass,
        });
    }
    fs::create_dir_all(&run.out).map_err(|e| CliError::Config(format!("cannot create {}: {e}", run.out.display())))?;

    let mut counts = run.landmark_counts.clone();
    counts.sort_unstable();
    counts.dedup();
    let opts = SelectOptions {
        folds: run.folds,
        seed: run.seed,
        distance: run.distance,
        train: TrainConfig {
            bias: run.bias,
            ..Default::default()
        },
    };
    let grid = run.grid();

    let mut summary = Vec::new();
    let mut tables = Vec::new();
    for &n in &counts {
        let ctx = || format!("landmark count {n}");
        let (table, selected) = if run.nested_cv {
            let (t, sels) = loocv_nested(&ds, n, &grid, &opts).map_err(context(ctx()))?;
            let mut text = String::from("id,sigma,C\n");
            for (id, s) in t.ids.iter().zip(&sels) {
                let _ = writeln!(text, "{id},{},{}", s.sigma, s.c);
            }
            write_text(&run.out.join(format!("selections_n{n}.csv")), &text)?;
            (t, None)
        } else {
            let (t, s) = loocv_selected(&ds, n, &grid, &opts).map_err(context(ctx()))?;
            (t, Some(s))
        };
        let roc = roc_and_auc(&table).map_err(context(ctx()))?;
        let spread = if run.bootstrap > 0 {
            Some(bootstrap_spread(&table, run.bootstrap, run.seed).map_err(context(ctx()))?)
        } else {
            None
        };
        table
            .write_csv(&run.out.join(format!("scores_n{n}.csv")))
            .map_err(context(ctx()))?;
        roc.write_vertices_csv(&run.out.join(format!("roc_n{n}.csv")))
            .map_err(context(ctx()))?;
        write_json(
            &run.out.join(format!("roc_n{n}.json")),
            &RocDoc {
                landmarks: n,
                selected: selected.as_ref(),
                roc: &roc,
                spread: spread.as_ref(),
            },
        )?;
        let o = roc.operating;
        eprintln!("n = {n}: AUC {:.4}", roc.auc);
        if let Some(cv) = selected.and_then(|s| s.cv_auc) {
            if cv - roc.auc > 0.25 {
                eprintln!(
                    "warning: n = {n}: leave-one-out AUC {:.3} is far below the selection AUC {cv:.3}; \
                     the chosen (sigma, C) may be degenerate under leave-one-out, try --sigma/--C or a narrower --grid",
                    roc.auc
                );
            }
        }
        summary.push(CountSummary {
            landmarks: n,
            sigma: selected.map(|s| s.sigma),
            c: selected.map(|s| s.c),
            cv_auc: selected.and_then(|s| s.cv_auc),
            auc: roc.auc,
            accuracy: o.accuracy,
            sensitivity: o.sensitivity,
            specificity: o.specificity,
            cutoff: o.cutoff,
            spread,
        });
        tables.push(table);
    }

    let mut comparisons = Vec::new();
    for i in 0..counts.len() {
        for j in i + 1..counts.len() {
            let result = delong_test(&tables[i], &tables[j]).map_err(context("DeLong test".into()))?;
            comparisons.push(Comparison {
                landmarks_a: counts[i],
                landmarks_b: counts[j],
                result,
            });
        }
    }

    let mut text = String::from(
        "landmarks,sigma,C,cv_auc,auc,auc_sd,accuracy,accuracy_sd,sensitivity,sensitivity_sd,specificity,specificity_sd,cutoff\n",
    );
    for s in &summary {
        let sd = |f: fn(&MetricSpread) -> f64| opt(s.spread.as_ref().map(f));
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.landmarks,
            opt(s.sigma),
            opt(s.c),
            opt(s.cv_auc),
            s.auc,
            sd(|m| m.auc),
            s.accuracy,
            sd(|m| m.accuracy),
            s.sensitivity,
            sd(|m| m.sensitivity),
            s.specificity,
            sd(|m| m.specificity),
            s.cutoff
        );
    }
    write_text(&run.out.join("summary.csv"), &text)?;

    let mut text = String::from("landmarks_a,landmarks_b,auc_a,auc_b,variance_diff,z,p\n");
    for c in &comparisons {
        let r = &c.result;
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{}",
            c.landmarks_a, c.landmarks_b, r.auc_a, r.auc_b, r.variance_diff, r.z_statistic, r.p_value
        );
    }
    write_text(&run.out.join("delong.csv"), &text)?;
    write_json(&run.out.join("delong.json"), &comparisons)?;
    write_json(&run.out.join("run_manifest.json"), run)?;

    Ok(EvaluateReport {
        summary,
        comparisons,
        tables,
    })
}

/// The summary as a fixed-width text table.
pub fn format_summary(report: &EvaluateReport) -> String {
    let pm = |v: f64, sd: Option<f64>| match sd {
        Some(sd) => format!("{v:.3} ± {sd:.3}"),
        None => format!("{v:.3}"),
    };
    let mut out = format!(
        "{:>9} {:>6} {:>6} {:>15} {:>15} {:>15} {:>15}\n",
        "landmarks", "sigma", "C", "AUC", "accuracy", "sensitivity", "specificity"
    );
    for s in &report.summary {
        let sp = s.spread.as_ref();
        let _ = writeln!(
            out,
            "{:>9} {:>6} {:>6} {:>15} {:>15} {:>15} {:>15}",
            s.landmarks,
            s.sigma.map_or("-".into(), |v| v.to_string()),
            s.c.map_or("-".into(), |v| v.to_string()),
            pm(s.auc, sp.map(|m| m.auc)),
            pm(s.accuracy, sp.map(|m| m.accuracy)),
            pm(s.sensitivity, sp.map(|m| m.sensitivity)),
            pm(s.specificity, sp.map(|m| m.specificity)),
        );
    }
    if !report.comparisons.is_empty() {
        out.push_str("\nDeLong (landmark counts a vs b)\n");
        for c in &report.comparisons {
            let _ = writeln!(
                out,
                "{:>5} vs {:<5} z = {:>8.4}  p = {:.4}",
                c.landmarks_a, c.landmarks_b, c.result.z_statistic, c.result.p_value
            );
        }
    }
    out
}
