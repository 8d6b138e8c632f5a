//! File formats: landmark CSV, masks (PGM / 0-1 CSV grid), dataset
//! manifests and score tables.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::contour::{trace_boundary, BinaryMask};
use crate::dataset::{Label, Outline, Sample, ShapeDataset};
use crate::error::{Error, Result};
use crate::shape::LandmarkSet;

pub const LANDMARK_HEADER: [&str; 2] = ["axial", "lateral"];

/// Writes `axial,lateral` rows.
pub fn write_landmarks<W: Write>(lm: &LandmarkSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LANDMARK_HEADER)?;
    for p in lm.points() {
        w.write_record([p.re.to_string(), p.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_landmarks(lm: &LandmarkSet, path: &Path) -> Result<()> {
    write_landmarks(lm, fs::File::create(path)?)
}

pub fn parse_landmarks(text: &str, origin: &Path) -> Result<LandmarkSet> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    if header.len() != 2 || header[0] != *LANDMARK_HEADER[0] || header[1] != *LANDMARK_HEADER[1] {
        return Err(Error::parse(origin, "expected header 'axial,lateral'"));
    }
    let mut points = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::parse(origin, format!("row {}: bad coordinate", k + 1)))
        };
        points.push(Complex64::new(num(0)?, num(1)?));
    }
    LandmarkSet::new(points).map_err(|e| Error::parse(origin, e.to_string()))
}

pub fn load_landmarks(path: &Path) -> Result<LandmarkSet> {
    parse_landmarks(&fs::read_to_string(path)?, path)
}

/// Parses a binary PGM (P5, 8 or 16 bit) or ASCII PGM (P2). Any value
/// above zero is foreground.
pub fn parse_pgm(bytes: &[u8], origin: &Path) -> Result<BinaryMask> {
    let err = |m: &str| Error::parse(origin, m.to_string());
    let mut pos = 0;
    let mut token = || -> Option<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        (pos > start).then(|| String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token().ok_or_else(|| err("empty file"))?;
    let mut dim = || -> Result<usize> {
        token()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err("bad PGM header"))
    };
    let width = dim()?;
    let height = dim()?;
    let maxval = dim()?;
    if maxval == 0 || maxval > 65535 {
        return Err(err("PGM maxval out of range"));
    }
    let count = width * height;
    let data = match magic.as_str() {
        "P2" => {
            let mut data = Vec::with_capacity(count);
            for _ in 0..count {
                let v: u32 = token()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err("truncated P2 data"))?;
                data.push(v > 0);
            }
            data
        }
        "P5" => {
            // Exactly one whitespace byte separates the header from the raster.
            let body = bytes.get(pos + 1..).ok_or_else(|| err("truncated P5 data"))?;
            let bpp = if maxval < 256 { 1 } else { 2 };
            if body.len() < count * bpp {
                return Err(err("truncated P5 data"));
            }
            if bpp == 1 {
                body[..count].iter().map(|&v| v > 0).collect()
            } else {
                body[..2 * count]
                    .chunks_exact(2)
                    .map(|c| c[0] != 0 || c[1] != 0)
                    .collect()
            }
        }
        _ => return Err(err("not a PGM file (expected P2 or P5)")),
    };
    BinaryMask::new(width, height, data).map_err(|e| Error::parse(origin, e.to_string()))
}

/// Parses a comma-separated grid of 0/1 values, one image row per line.
pub fn parse_mask_grid(text: &str, origin: &Path) -> Result<BinaryMask> {
    let mut width = None;
    let mut data = Vec::new();
    let mut height = 0;
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<bool> = line
            .split(',')
            .map(|c| match c.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::parse(
                    origin,
                    format!("line {}: expected 0 or 1, got '{other}'", k + 1),
                )),
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::parse(origin, format!("line {}: ragged row", k + 1)));
            }
            _ => {}
        }
        data.extend(row);
        height += 1;
    }
    let width = width.ok_or_else(|| Error::parse(origin, "empty mask grid"))?;
    BinaryMask::new(width, height, data).map_err(|e| Error::parse(origin, e.to_string()))
}

pub fn write_pgm<W: Write>(mask: &BinaryMask, mut out: W) -> Result<()> {
    write!(out, "P5\n{} {}\n255\n", mask.width(), mask.height())?;
    let mut raster = Vec::with_capacity(mask.width() * mask.height());
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            raster.push(if mask.get(r, c) { 255 } else { 0 });
        }
    }
    out.write_all(&raster)?;
    Ok(())
}

/// What a path on disk holds, judged by extension and header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileKind {
    Pgm,
    MaskGrid,
    Landmarks,
}

pub fn sniff(path: &Path, bytes: &[u8]) -> FileKind {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    if ext.as_deref() == Some("pgm") || bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        return FileKind::Pgm;
    }
    let first = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    let first = String::from_utf8_lossy(first);
    if first.trim().replace(' ', "").eq_ignore_ascii_case("axial,lateral") {
        FileKind::Landmarks
    } else {
        FileKind::MaskGrid
    }
}

pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let bytes = fs::read(path)?;
    match sniff(path, &bytes) {
        FileKind::Pgm => parse_pgm(&bytes, path),
        FileKind::MaskGrid => parse_mask_grid(&String::from_utf8_lossy(&bytes), path),
        FileKind::Landmarks => Err(Error::parse(path, "file holds landmarks, not a mask")),
    }
}

/// Loads a mask (traced immediately) or a landmark file.
pub fn load_outline(path: &Path) -> Result<Outline> {
    let bytes = fs::read(path)?;
    match sniff(path, &bytes) {
        FileKind::Landmarks => Ok(Outline::Landmarks(parse_landmarks(
            &String::from_utf8_lossy(&bytes),
            path,
        )?)),
        FileKind::Pgm => Ok(Outline::Contour(trace_boundary(&parse_pgm(&bytes, path)?)?)),
        FileKind::MaskGrid => Ok(Outline::Contour(trace_boundary(&parse_mask_grid(
            &String::from_utf8_lossy(&bytes),
            path,
        )?)?)),
    }
}

/// One row of a dataset manifest (`id,label,file[,status]`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    /// Empty when the class is unknown.
    pub label: String,
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
}

impl ManifestRow {
    pub fn is_ok(&self) -> bool {
        self.status.as_deref().is_none_or(|s| s == "ok")
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_manifest(rows: &[ManifestRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let with_status = rows.iter().any(|r| r.status.is_some());
    if with_status {
        w.write_record(["id", "label", "file", "status"])?;
    } else {
        w.write_record(["id", "label", "file"])?;
    }
    for r in rows {
        let mut rec = vec![r.id.as_str(), r.label.as_str(), r.file.as_str()];
        if with_status {
            rec.push(r.status.as_deref().unwrap_or("ok"));
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Loads every usable manifest row. Rows whose status is not `ok` are
/// skipped; file paths resolve relative to the manifest's directory.
pub fn load_dataset(manifest: &Path) -> Result<ShapeDataset> {
    let base: PathBuf = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut ds = ShapeDataset::default();
    for row in read_manifest(manifest)?.into_iter().filter(ManifestRow::is_ok) {
        let label: Label = row
            .label
            .parse()
            .map_err(|e| Error::parse(manifest, format!("sample '{}': {e}", row.id)))?;
        let path = base.join(&row.file);
        let outline = load_outline(&path).map_err(|e| Error::parse(&path, e.to_string()))?;
        ds.push(Sample {
            id: row.id,
            label,
            outline,
        });
    }
    Ok(ds)
}

/// Writes one landmark CSV per sample (at `n` landmarks) plus
/// `manifest.csv` with `id,label,file` rows into `dir`.
pub fn save_dataset(ds: &ShapeDataset, n: usize, dir: &Path) -> Result<Vec<ManifestRow>> {
    fs::create_dir_all(dir)?;
    let mut rows = Vec::with_capacity(ds.len());
    for s in ds.samples() {
        let file = format!("{}.csv", s.id);
        save_landmarks(&s.outline.landmarks(n)?, &dir.join(&file))?;
        rows.push(ManifestRow {
            id: s.id.clone(),
            label: s.label.to_string(),
            file,
            status: None,
        });
    }
    write_manifest(&rows, &dir.join("manifest.csv"))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_ascii_and_binary() {
        let p = Path::new("x.pgm");
        let m = parse_pgm(b"P2\n# comment\n3 2\n255\n0 10 0\n0 0 255\n", p).unwrap();
        assert_eq!((m.width(), m.height()), (3, 2));
        assert!(m.get(0, 1) && m.get(1, 2) && !m.get(0, 0));
        let mut buf = Vec::new();
        write_pgm(&m, &mut buf).unwrap();
        assert_eq!(parse_pgm(&buf, p).unwrap(), m);
        assert!(parse_pgm(b"P5\n3 2\n255\n\x00", p).is_err());
        assert!(parse_pgm(b"P6\n1 1\n255\n\x00", p).is_err());
    }

    #[test]
    fn pgm_sixteen_bit() {
        let mut bytes = b"P5 2 1 65535\n".to_vec();
        bytes.extend([0, 0, 1, 0]);
        let m = parse_pgm(&bytes, Path::new("x")).unwrap();
        assert!(!m.get(0, 0) && m.get(0, 1));
    }

    #[test]
    fn mask_grid_parsing() {
        let p = Path::new("g.csv");
        let m = parse_mask_grid("0,1,0\n1,1,1\n", p).unwrap();
        assert_eq!(m.foreground_count(), 4);
        assert!(parse_mask_grid("0,1\n1\n", p).is_err());
        assert!(parse_mask_grid("0,2\n", p).is_err());
    }

    #[test]
    fn landmark_csv_round_trip() {
        let lm = LandmarkSet::from_xy(&[(0.1, 2.0), (3.25, -1.0), (1e-7, 4.0)]).unwrap();
        let mut buf = Vec::new();
        write_landmarks(&lm, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("axial,lateral\n"));
        assert_eq!(parse_landmarks(&text, Path::new("l.csv")).unwrap(), lm);
        assert!(parse_landmarks("x,y\n1,2\n", Path::new("l.csv")).is_err());
    }

    #[test]
    fn sniffing() {
        assert_eq!(sniff(Path::new("a.csv"), b"axial,lateral\n1,2"), FileKind::Landmarks);
        assert_eq!(sniff(Path::new("a.csv"), b"0,1\n"), FileKind::MaskGrid);
        assert_eq!(sniff(Path::new("a.bin"), b"P5 1 1 255\n\x00"), FileKind::Pgm);
    }
}
