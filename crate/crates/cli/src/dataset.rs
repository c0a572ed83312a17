//! Dataset ingestion: IDX files, CSV tables and synthetic Gaussian mixtures.
//! Inputs end up in [0, 1] and labels become one-hot targets.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sgnlab_core::net::Sample;
use sgnlab_core::Error;

use crate::config::DatasetSource;
use crate::error::{CliError, Result};

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub input_dim: usize,
    pub n_classes: usize,
}

impl Dataset {
    fn from_labelled(inputs: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::Validation(format!("{} inputs but {} labels", inputs.len(), labels.len())).into());
        }
        if inputs.is_empty() {
            return Err(Error::Validation("dataset is empty".into()).into());
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Validation(format!("label {bad} out of range for {n_classes} classes")).into());
        }
        let input_dim = inputs[0].len();
        if inputs.iter().any(|x| x.len() != input_dim) {
            return Err(Error::Validation("inputs differ in length".into()).into());
        }
        let samples = inputs.into_iter().zip(labels).map(|(x, l)| Sample::new(x, one_hot(l, n_classes))).collect();
        Ok(Dataset { samples, input_dim, n_classes })
    }
}

fn one_hot(label: usize, n: usize) -> Vec<f64> {
    let mut y = vec![0.0; n];
    y[label] = 1.0;
    y
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Loads `source` with one-hot targets over `n_classes` classes.
pub fn load_dataset(source: &DatasetSource, n_classes: usize) -> Result<Dataset> {
    match source {
        DatasetSource::Idx { images, labels, limit } => {
            let (n, rows, cols, pixels) = parse_idx_images(&read(images)?)?;
            let labels = parse_idx_labels(&read(labels)?)?;
            let keep = limit.unwrap_or(n).min(n);
            let dim = rows * cols;
            let inputs = (0..keep)
                .map(|i| pixels[i * dim..(i + 1) * dim].iter().map(|&p| p as f64 / 255.0).collect())
                .collect();
            // with a limit the label file may hold more entries than are kept;
            // without one the counts must agree
            let take = if limit.is_some() { keep } else { labels.len() };
            let labels: Vec<usize> = labels.into_iter().take(take).map(usize::from).collect();
            Dataset::from_labelled(inputs, labels, n_classes)
        }
        DatasetSource::Csv { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let (inputs, labels) = parse_csv(&text)?;
            Dataset::from_labelled(inputs, labels, n_classes)
        }
        &DatasetSource::Synthetic { classes, dim, n, separation, seed } => {
            if classes != n_classes {
                return Err(Error::Validation(format!(
                    "synthetic dataset has {classes} classes, network outputs {n_classes}"
                ))
                .into());
            }
            let (inputs, labels) = gaussian_mixture(classes, dim, n, separation, seed);
            Dataset::from_labelled(inputs, labels, n_classes)
        }
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Parse { offset: bytes.len(), reason: "truncated IDX header".into() }.into())
}

fn check_magic(bytes: &[u8], want: u32) -> Result<()> {
    let magic = be_u32(bytes, 0)?;
    if magic != want {
        return Err(Error::Parse { offset: 0, reason: format!("IDX magic {magic:#010x}, expected {want:#010x}") }.into());
    }
    Ok(())
}

/// `(count, rows, cols, pixels)` of an unsigned-byte IDX image file.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    check_magic(bytes, IDX_IMAGES)?;
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let need = 16 + n * rows * cols;
    if bytes.len() < need {
        return Err(Error::Parse {
            offset: bytes.len(),
            reason: format!("IDX image payload needs {need} bytes"),
        }
        .into());
    }
    Ok((n, rows, cols, bytes[16..need].to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, IDX_LABELS)?;
    let n = be_u32(bytes, 4)? as usize;
    let need = 8 + n;
    if bytes.len() < need {
        return Err(Error::Parse { offset: bytes.len(), reason: format!("IDX label payload needs {need} bytes") }.into());
    }
    Ok(bytes[8..need].to_vec())
}

/// Features and class indices from CSV text with a `label` column. Feature
/// values already inside [0, 1] are kept; otherwise all features are
/// min-max scaled with one global range.
pub fn parse_csv(text: &str) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let parse_err = |e: csv::Error| -> CliError {
        let offset = e.position().map(|p| p.byte() as usize).unwrap_or(0);
        Error::Parse { offset, reason: e.to_string() }.into()
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(parse_err)?.clone();
    let label_col = header
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| Error::Parse { offset: 0, reason: "no column named `label`".into() })?;
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(parse_err)?;
        let offset = record.position().map(|p| p.byte() as usize).unwrap_or(0);
        let field_err = |what: &str, v: &str| -> CliError { Error::Parse { offset, reason: format!("bad {what} `{v}`") }.into() };
        let mut x = Vec::with_capacity(record.len().saturating_sub(1));
        for (i, v) in record.iter().enumerate() {
            if i == label_col {
                labels.push(v.parse::<usize>().map_err(|_| field_err("label", v))?);
            } else {
                let f: f64 = v.parse().map_err(|_| field_err("value", v))?;
                if !f.is_finite() {
                    return Err(field_err("value", v));
                }
                x.push(f);
            }
        }
        inputs.push(x);
    }
    let (lo, hi) = inputs.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo < 0.0 || hi > 1.0 {
        let span = if hi > lo { hi - lo } else { 1.0 };
        for x in inputs.iter_mut().flatten() {
            *x = (*x - lo) / span;
        }
    }
    Ok((inputs, labels))
}

/// Class `c` is centred at `separation · z_c` for a random unit vector `z_c`;
/// samples add `N(0, I)` noise and sample `i` has class `i mod classes`.
/// Each feature is then min-max scaled to [0, 1].
pub fn gaussian_mixture(classes: usize, dim: usize, n: usize, separation: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            let z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            z.into_iter().map(|v| separation * v / norm).collect()
        })
        .collect();
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let mut inputs: Vec<Vec<f64>> = labels
        .iter()
        .map(|&c| centers[c].iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    for j in 0..dim {
        let (lo, hi) = inputs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x[j]), hi.max(x[j])));
        let span = if hi > lo { hi - lo } else { 1.0 };
        for x in inputs.iter_mut() {
            x[j] = (x[j] - lo) / span;
        }
    }
    (inputs, labels)
}
