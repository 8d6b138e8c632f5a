//! Mask directory → landmark files plus manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use kendall_shape::contour::{contour_landmarks, trace_boundary};
use kendall_shape::io::{load_mask, save_landmarks, write_manifest, ManifestRow};
use kendall_shape::Label;
use serde::Serialize;
use walkdir::WalkDir;

use crate::{write_json, CliError};

const MASK_EXTENSIONS: [&str; 3] = ["pgm", "csv", "txt"];
const UNSUPPORTED_IMAGES: [&str; 6] = ["png", "jpg", "jpeg", "bmp", "tif", "tiff"];

#[derive(Debug, Serialize)]
struct ExtractManifest<'a> {
    mask_dir: &'a Path,
    landmarks: usize,
    out: &'a Path,
    labels: Option<&'a Path>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractReport {
    pub rows: Vec<ManifestRow>,
    pub failed: usize,
}

/// Reads `id,label` rows.
fn read_labels(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read labels {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (k == 0 && line.replace(' ', "").eq_ignore_ascii_case("id,label")) {
            continue;
        }
        let (id, label) = line
            .split_once(',')
            .ok_or_else(|| CliError::Config(format!("{}:{}: expected 'id,label'", path.display(), k + 1)))?;
        let label: Label = label
            .trim()
            .parse()
            .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), k + 1)))?;
        map.insert(id.trim().to_string(), label.to_string());
    }
    Ok(map)
}

fn label_from_path(rel: &Path) -> Option<Label> {
    let mut found = None;
    for part in rel.components() {
        let s = part.as_os_str().to_string_lossy().to_ascii_lowercase();
        if s.contains("malignant") {
            found = Some(Label::Malignant);
        } else if s.contains("benign") {
            found = Some(Label::Benign);
        }
    }
    found
}

fn sample_id(rel: &Path) -> String {
    rel.with_extension("")
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("_")
}

fn extension(p: &Path) -> String {
    p.extension()
        .and_then(|e| e.to_str())
        .unwrap_or_default()
        .to_ascii_lowercase()
}

/// Traces every mask under `mask_dir`, writes `<id>.csv` landmark files,
/// `manifest.csv` (landmark files) and `mask_manifest.csv` (the masks
/// themselves, for evaluating at other landmark counts) into `out`.
///
/// Labels come from `labels` (`id,label` rows keyed by file stem) or from a
/// `benign`/`malignant` path component. Per-file failures are recorded in
/// the manifests' status column and reported as [`CliError::Partial`]
/// after all files are processed.
pub fn cmd_extract(
    mask_dir: &Path,
    n_landmarks: usize,
    out: &Path,
    labels: Option<&Path>,
) -> Result<ExtractReport, CliError> {
    if !mask_dir.is_dir() {
        return Err(CliError::Config(format!(
            "mask directory {} does not exist",
            mask_dir.display()
        )));
    }
    if n_landmarks < 3 {
        return Err(CliError::Config(format!(
            "--landmarks must be at least 3, got {n_landmarks}"
        )));
    }
    let label_map = labels.map(read_labels).transpose()?;

    let mut files: Vec<PathBuf> = Vec::new();
    for entry in WalkDir::new(mask_dir).sort_by_file_name() {
        let entry = entry.map_err(|e| CliError::Config(format!("cannot walk {}: {e}", mask_dir.display())))?;
        let ext = extension(entry.path());
        if entry.file_type().is_file()
            && (MASK_EXTENSIONS.contains(&ext.as_str()) || UNSUPPORTED_IMAGES.contains(&ext.as_str()))
        {
            files.push(entry.into_path());
        }
    }
    if files.is_empty() {
        return Err(CliError::Config(format!(
            "no mask files found under {}",
            mask_dir.display()
        )));
    }
    fs::create_dir_all(out).map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))?;

    let mut rows = Vec::new();
    let mut mask_rows = Vec::new();
    let mut failed = 0;
    for path in &files {
        let rel = path.strip_prefix(mask_dir).unwrap_or(path);
        let id = sample_id(rel);
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let label = match &label_map {
            Some(map) => map.get(&stem).or_else(|| map.get(&id)).cloned(),
            None => label_from_path(rel).map(|l| l.to_string()),
        };
        let file = format!("{id}.csv");
        let result = if UNSUPPORTED_IMAGES.contains(&extension(path).as_str()) {
            Err("unsupported image format; convert the mask to PGM".to_string())
        } else {
            load_mask(path)
                .and_then(|m| trace_boundary(&m))
                .and_then(|c| contour_landmarks(&c, n_landmarks))
                .and_then(|lm| save_landmarks(&lm, &out.join(&file)))
                .map_err(|e| e.to_string())
        };
        let status = match (&result, &label) {
            (Err(msg), _) => {
                failed += 1;
                eprintln!("error: {}: {msg}", path.display());
                format!("error: {msg}")
            }
            (Ok(()), None) => {
                eprintln!("warning: {}: no label found; row marked unlabeled", path.display());
                "unlabeled".to_string()
            }
            (Ok(()), Some(_)) => "ok".to_string(),
        };
        let label = label.unwrap_or_default();
        let abs = fs::canonicalize(path).unwrap_or_else(|_| path.clone());
        rows.push(ManifestRow {
            id: id.clone(),
            label: label.clone(),
            file: if result.is_ok() { file } else { String::new() },
            status: Some(status.clone()),
        });
        mask_rows.push(ManifestRow {
            id,
            label,
            file: abs.to_string_lossy().into_owned(),
            status: Some(status),
        });
    }
    write_manifest(&rows, &out.join("manifest.csv"))?;
    write_manifest(&mask_rows, &out.join("mask_manifest.csv"))?;
    write_json(
        &out.join("extract_manifest.json"),
        &ExtractManifest {
            mask_dir,
            landmarks: n_landmarks,
            out,
            labels,
        },
    )?;
    let report = ExtractReport { rows, failed };
    if failed > 0 {
        return Err(CliError::Partial {
            failed,
            total: files.len(),
        });
    }
    Ok(report)
}
