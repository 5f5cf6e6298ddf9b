//! MNIST (IDX) and CIFAR-10 (binary) readers.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Labelled examples; one row of `inputs` per example, pixels scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Array2<f64>,
    pub labels: Vec<u8>,
    pub classes: usize,
    pub split: Split,
}

impl Dataset {
    pub fn new(inputs: Array2<f64>, labels: Vec<u8>, classes: usize, split: Split) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::invalid("dataset is empty"));
        }
        if inputs.nrows() != labels.len() {
            return Err(Error::dims("labels", inputs.nrows(), labels.len()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::invalid(format!("label {bad} outside 0..{classes}")));
        }
        Ok(Self {
            inputs,
            labels,
            classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    /// The first `n` examples (all of them when `n >= len`).
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            inputs: self.inputs.slice(ndarray::s![..n, ..]).to_owned(),
            labels: self.labels[..n].to_vec(),
            classes: self.classes,
            split: self.split,
        }
    }
}

const IDX_IMAGES: u32 = 2051;
const IDX_LABELS: u32 = 2049;

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("four bytes")))
        .ok_or_else(|| Error::format("IDX", format!("{what}: header truncated")))
}

/// Parses an IDX image file: returns `(count, rows, cols, pixels)`.
fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let magic = be_u32(bytes, 0, "images")?;
    if magic != IDX_IMAGES {
        return Err(Error::format("IDX", format!("images: bad magic {magic}, expected {IDX_IMAGES}")));
    }
    let n = be_u32(bytes, 4, "images")? as usize;
    let rows = be_u32(bytes, 8, "images")? as usize;
    let cols = be_u32(bytes, 12, "images")? as usize;
    let body = &bytes[16..];
    let need = n * rows * cols;
    if body.len() != need {
        return Err(Error::format(
            "IDX",
            format!("images: header promises {need} pixel bytes, file has {}", body.len()),
        ));
    }
    Ok((n, rows, cols, body))
}

fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = be_u32(bytes, 0, "labels")?;
    if magic != IDX_LABELS {
        return Err(Error::format("IDX", format!("labels: bad magic {magic}, expected {IDX_LABELS}")));
    }
    let n = be_u32(bytes, 4, "labels")? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(Error::format(
            "IDX",
            format!("labels: header promises {n} labels, file has {}", body.len()),
        ));
    }
    Ok(body)
}

/// Reads an MNIST-style pair of IDX files (uncompressed).
pub fn load_mnist_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>, split: Split) -> Result<Dataset> {
    let image_bytes = fs::read(images)?;
    let label_bytes = fs::read(labels)?;
    let (n, rows, cols, pixels) = parse_idx_images(&image_bytes)?;
    let labels = parse_idx_labels(&label_bytes)?;
    if labels.len() != n {
        return Err(Error::format(
            "IDX",
            format!("{n} images but {} labels", labels.len()),
        ));
    }
    let inputs = Array2::from_shape_fn((n, rows * cols), |(i, j)| f64::from(pixels[i * rows * cols + j]) / 255.0);
    Dataset::new(inputs, labels.to_vec(), 10, split).map_err(|e| match e {
        Error::InvalidArgument(reason) => Error::format("IDX", reason),
        other => other,
    })
}

const CIFAR_RECORD: usize = 1 + 3072;

/// Reads and concatenates CIFAR-10 binary batch files in the given order.
pub fn load_cifar10_binary<P: AsRef<Path>>(paths: &[P], split: Split) -> Result<Dataset> {
    if paths.is_empty() {
        return Err(Error::invalid("no CIFAR-10 batch files given"));
    }
    let mut labels = Vec::new();
    let mut pixels = Vec::new();
    for p in paths {
        let bytes = fs::read(p)?;
        if bytes.is_empty() || bytes.len() % CIFAR_RECORD != 0 {
            return Err(Error::format(
                "CIFAR-10",
                format!(
                    "{}: length {} is not a multiple of {CIFAR_RECORD}",
                    p.as_ref().display(),
                    bytes.len()
                ),
            ));
        }
        for rec in bytes.chunks_exact(CIFAR_RECORD) {
            if rec[0] >= 10 {
                return Err(Error::format("CIFAR-10", format!("label {} outside 0..10", rec[0])));
            }
            labels.push(rec[0]);
            pixels.extend_from_slice(&rec[1..]);
        }
    }
    let inputs = Array2::from_shape_fn((labels.len(), 3072), |(i, j)| f64::from(pixels[i * 3072 + j]) / 255.0);
    Dataset::new(inputs, labels, 10, split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn idx_images(n: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        for x in [IDX_IMAGES, n, rows, cols] {
            v.extend_from_slice(&x.to_be_bytes());
        }
        v.extend_from_slice(pixels);
        v
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        v.extend_from_slice(&IDX_LABELS.to_be_bytes());
        v.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        v.extend_from_slice(labels);
        v
    }

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::File::create(&p).unwrap().write_all(bytes).unwrap();
        p
    }

    #[test]
    fn reads_small_idx_pair() {
        let dir = tempfile::tempdir().unwrap();
        let imgs = write(dir.path(), "i", &idx_images(2, 2, 2, &[0, 255, 51, 102, 1, 2, 3, 4]));
        let labs = write(dir.path(), "l", &idx_labels(&[7, 3]));
        let d = load_mnist_idx(&imgs, &labs, Split::Train).unwrap();
        assert_eq!((d.len(), d.dim()), (2, 4));
        assert_eq!(d.labels, vec![7, 3]);
        assert_eq!(d.inputs[[0, 1]], 1.0);
        assert_eq!(d.inputs[[0, 2]], 0.2);
    }

    #[test]
    fn idx_errors() {
        let dir = tempfile::tempdir().unwrap();
        let good_i = idx_images(2, 2, 2, &[0; 8]);
        let good_l = idx_labels(&[1, 2]);
        let labs = write(dir.path(), "l", &good_l);
        let imgs = write(dir.path(), "i", &good_i);

        let truncated = write(dir.path(), "t", &good_i[..good_i.len() - 1]);
        assert!(matches!(load_mnist_idx(&truncated, &labs, Split::Train), Err(Error::Format { .. })));

        let mut bad = good_i.clone();
        bad[3] = 0x04;
        let bad = write(dir.path(), "b", &bad);
        assert!(load_mnist_idx(&bad, &labs, Split::Train).is_err());
        // Swapped files: wrong magic on both.
        assert!(load_mnist_idx(&labs, &imgs, Split::Train).is_err());

        let three = write(dir.path(), "3", &idx_labels(&[1, 2, 3]));
        assert!(load_mnist_idx(&imgs, &three, Split::Train).is_err());

        let big_label = write(dir.path(), "g", &idx_labels(&[1, 12]));
        assert!(load_mnist_idx(&imgs, &big_label, Split::Train).is_err());

        let header_only = write(dir.path(), "h", &good_i[..6]);
        assert!(load_mnist_idx(&header_only, &labs, Split::Train).is_err());
        assert!(matches!(
            load_mnist_idx(dir.path().join("missing"), &labs, Split::Train),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn reads_cifar_batches() {
        let dir = tempfile::tempdir().unwrap();
        let mut rec = vec![0u8; 2 * CIFAR_RECORD];
        rec[0] = 9;
        rec[1] = 255;
        rec[CIFAR_RECORD] = 4;
        let a = write(dir.path(), "a", &rec);
        let b = write(dir.path(), "b", &rec[..CIFAR_RECORD]);
        let d = load_cifar10_binary(&[&a, &b], Split::Test).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.dim(), 3072);
        assert_eq!(d.labels, vec![9, 4, 9]);
        assert_eq!(d.inputs[[0, 0]], 1.0);
        assert_eq!(d.inputs[[1, 0]], 0.0);

        let short = write(dir.path(), "s", &rec[..CIFAR_RECORD + 10]);
        assert!(load_cifar10_binary(&[&short], Split::Test).is_err());
        let empty: [&Path; 0] = [];
        assert!(load_cifar10_binary(&empty, Split::Test).is_err());
    }

    #[test]
    fn head_truncates() {
        let d = Dataset::new(Array2::zeros((5, 2)), vec![0, 1, 2, 3, 4], 10, Split::Train).unwrap();
        assert_eq!(d.head(3).labels, vec![0, 1, 2]);
        assert_eq!(d.head(10).len(), 5);
        assert!(Dataset::new(Array2::zeros((0, 2)), vec![], 10, Split::Train).is_err());
    }
}
