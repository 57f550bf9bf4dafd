//! MNIST IDX files, optionally gzip-compressed.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use ndarray::Array2;

use super::{AlphabetKind, LabeledDataset};
use crate::error::{Error, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;
/// A pixel becomes 1 when `value / 255` is strictly above this.
pub const DEFAULT_THRESHOLD: f64 = 0.3;

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn header(path: &Path, bytes: &[u8], magic: u32, dims: usize) -> Result<Vec<usize>> {
    let need = 4 * (1 + dims);
    if bytes.len() < need {
        return Err(Error::Truncated {
            path: path.into(),
            what: "IDX header".into(),
        });
    }
    let word = |i: usize| u32::from_be_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4 bytes"));
    if word(0) != magic {
        return Err(Error::parse(
            path,
            format!("IDX magic {:#010x}, expected {magic:#010x}", word(0)),
        ));
    }
    Ok((1..=dims).map(|i| word(i) as usize).collect())
}

/// Reads images (and labels, if given) and binarizes pixels at `threshold`.
pub fn load_mnist_idx(images: impl AsRef<Path>, labels: Option<&Path>, threshold: f64) -> Result<LabeledDataset> {
    let images = images.as_ref();
    let bytes = read_maybe_gz(images)?;
    let dims = header(images, &bytes, IMAGE_MAGIC, 3)?;
    let (n, width) = (dims[0], dims[1] * dims[2]);
    let pixels = &bytes[16..];
    if pixels.len() < n * width {
        return Err(Error::Truncated {
            path: images.into(),
            what: format!("{n} images of {width} pixels"),
        });
    }
    let samples = Array2::from_shape_fn((n, width), |(r, j)| {
        u8::from(f64::from(pixels[r * width + j]) / 255.0 > threshold)
    });

    let mut meta = vec![format!("idx:{} threshold={threshold}", images.display())];
    let names = match labels {
        None => None,
        Some(lp) => {
            let lb = read_maybe_gz(lp)?;
            let count = header(lp, &lb, LABEL_MAGIC, 1)?[0];
            if count != n {
                return Err(Error::Dimension {
                    path: lp.into(),
                    message: format!("{count} labels for {n} images"),
                });
            }
            if lb.len() < 8 + n {
                return Err(Error::Truncated {
                    path: lp.into(),
                    what: format!("{n} labels"),
                });
            }
            meta.push(format!("idx-labels:{}", lp.display()));
            Some(lb[8..8 + n].iter().map(|l| l.to_string()).collect())
        }
    };
    let ids = (0..n).map(|r| r.to_string()).collect();
    let mut dataset = LabeledDataset::from_named_labels(samples, names, AlphabetKind::Binary.symbols(), ids, meta)?;
    // Digits sort numerically so label index equals the digit when all are present.
    if dataset.is_labeled() {
        let mut names = dataset.label_names.clone();
        names.sort_by_key(|n| n.parse::<u32>().unwrap_or(u32::MAX));
        dataset = dataset.remap_labels(&names)?;
    }
    Ok(dataset)
}

/// Writes binarized images as 0/255 pixels and numeric labels, gzip-compressed
/// when the file name ends in `.gz`. Rows are written as 1×width images.
pub fn write_mnist_idx(dataset: &LabeledDataset, images: impl AsRef<Path>, labels: Option<&Path>) -> Result<()> {
    if dataset.n_states() != 2 {
        return Err(Error::Usage("IDX output needs a binary dataset".into()));
    }
    let mut img = Vec::with_capacity(16 + dataset.samples.len());
    for word in [IMAGE_MAGIC, dataset.len() as u32, 1, dataset.n_visible() as u32] {
        img.extend_from_slice(&word.to_be_bytes());
    }
    img.extend(dataset.samples.iter().map(|&s| if s == 1 { 255u8 } else { 0 }));
    write_maybe_gz(images.as_ref(), &img)?;
    if let Some(lp) = labels {
        if !dataset.is_labeled() {
            return Err(Error::Usage("dataset has no labels to write".into()));
        }
        let mut lb = Vec::with_capacity(8 + dataset.len());
        lb.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        lb.extend_from_slice(&(dataset.len() as u32).to_be_bytes());
        for &l in &dataset.labels {
            let name = &dataset.label_names[l];
            let digit: u8 = name
                .parse()
                .map_err(|_| Error::Usage(format!("label `{name}` is not a byte value")))?;
            lb.push(digit);
        }
        write_maybe_gz(lp, &lb)?;
    }
    Ok(())
}

fn write_maybe_gz(path: &Path, bytes: &[u8]) -> Result<()> {
    let data = if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(bytes).and_then(|_| enc.finish()).map_err(|e| Error::io(path, e))?
    } else {
        bytes.to_vec()
    };
    fs::write(path, data).map_err(|e| Error::io(path, e))
}
