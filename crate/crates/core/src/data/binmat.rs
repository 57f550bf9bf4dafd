//! Delimited 0/1 matrices (genotypes, piano rolls).
//!
//! Rows are either delimited cells (tab, comma or whitespace) or raw
//! strings of `0`/`1` characters. A first line containing any other token
//! is a header.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{AlphabetKind, LabeledDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum BinaryLabels {
    #[default]
    None,
    /// Header column with this name holds the labels.
    Column(String),
    /// One label per line, in row order.
    Sidecar(PathBuf),
}

fn split_cells(line: &str) -> Vec<&str> {
    if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else if line.trim().contains(char::is_whitespace) {
        line.split_whitespace().collect()
    } else {
        // Raw row: every character is a cell.
        let t = line.trim();
        (0..t.len()).map(|i| &t[i..i + 1]).collect()
    }
}

fn is_bit(cell: &str) -> bool {
    cell == "0" || cell == "1"
}

pub fn load_binary_matrix(path: impl AsRef<Path>, labels: &BinaryLabels) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();

    let header: Option<Vec<String>> = match lines.peek() {
        Some((_, first)) if !split_cells(first).iter().all(|c| is_bit(c)) => {
            let cells = split_cells(first).into_iter().map(String::from).collect();
            lines.next();
            Some(cells)
        }
        _ => None,
    };
    let label_col = match (labels, &header) {
        (BinaryLabels::Column(name), Some(h)) => Some(
            h.iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::parse(path, format!("no column named `{name}` in header")))?,
        ),
        (BinaryLabels::Column(name), None) => {
            return Err(Error::parse(path, format!("label column `{name}` requested but the file has no header")))
        }
        _ => None,
    };

    let mut width = None;
    let mut bits = Vec::new();
    let mut names = Vec::new();
    let mut rows = 0usize;
    for (lineno, line) in lines {
        let cells = split_cells(line);
        let expected = *width.get_or_insert(cells.len());
        if cells.len() != expected {
            return Err(Error::parse(
                path,
                format!("line {}: {} cells, expected {expected}", lineno + 1, cells.len()),
            ));
        }
        for (j, cell) in cells.iter().enumerate() {
            if Some(j) == label_col {
                names.push(cell.to_string());
            } else if is_bit(cell) {
                bits.push(u8::from(*cell == "1"));
            } else {
                return Err(Error::parse(
                    path,
                    format!("row {}, column {}: non-binary cell `{cell}`", lineno + 1, j + 1),
                ));
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::parse(path, "no data rows"));
    }
    let n_visible = width.unwrap_or(0) - usize::from(label_col.is_some());
    if n_visible == 0 {
        return Err(Error::parse(path, "no binary columns"));
    }
    let samples = Array2::from_shape_vec((rows, n_visible), bits).expect("width checked per row");

    let names = match labels {
        BinaryLabels::None => None,
        BinaryLabels::Column(_) => Some(names),
        BinaryLabels::Sidecar(sidecar) => {
            let text = fs::read_to_string(sidecar).map_err(|e| Error::io(sidecar, e))?;
            let names: Vec<String> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect();
            if names.len() != rows {
                return Err(Error::parse(sidecar, format!("{} labels for {rows} rows", names.len())));
            }
            Some(names)
        }
    };
    let ids = (0..rows).map(|r| r.to_string()).collect();
    let meta = vec![format!("binmat:{}", path.display())];
    LabeledDataset::from_named_labels(samples, names, AlphabetKind::Binary.symbols(), ids, meta)
}

/// Writes a tab-separated matrix with a header; labeled data gets a leading `label` column.
pub fn write_binary_matrix(dataset: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if dataset.n_states() != 2 {
        return Err(Error::Usage(format!(
            "a binary matrix needs a 2-state alphabet, dataset has {}",
            dataset.n_states()
        )));
    }
    let labeled = dataset.is_labeled();
    let mut header: Vec<String> = Vec::new();
    if labeled {
        header.push("label".into());
    }
    header.extend((0..dataset.n_visible()).map(|j| format!("v{j}")));
    let mut out = header.join("\t");
    out.push('\n');
    for (r, row) in dataset.samples.rows().into_iter().enumerate() {
        let mut cells: Vec<&str> = Vec::with_capacity(row.len() + 1);
        if labeled {
            cells.push(&dataset.label_names[dataset.labels[r]]);
        }
        cells.extend(row.iter().map(|&s| if s == 1 { "1" } else { "0" }));
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn toy_matrices_in_every_layout() {
        let dir = tempfile::tempdir().unwrap();
        let expect = array![[0u8, 1, 1, 0], [1, 1, 1, 1], [0, 0, 0, 1]];
        for (name, text) in [
            ("raw", "0110\n1111\n0001\n"),
            ("tsv", "0\t1\t1\t0\n1\t1\t1\t1\n0\t0\t0\t1\n"),
            ("csv", "0,1,1,0\n1,1,1,1\n0,0,0,1\n"),
            ("ws", "0 1 1 0\n1 1  1 1\n\n0 0 0 1\n"),
        ] {
            let p = dir.path().join(name);
            fs::write(&p, text).unwrap();
            let d = load_binary_matrix(&p, &BinaryLabels::None).unwrap();
            assert_eq!(d.samples, expect, "{name}");
            assert!(!d.is_labeled());
        }
    }

    #[test]
    fn named_column_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        fs::write(&p, "a,pop,b\n1,EUR,0\n0,AFR,1\n").unwrap();
        let d = load_binary_matrix(&p, &BinaryLabels::Column("pop".into())).unwrap();
        assert_eq!(d.samples, array![[1u8, 0], [0, 1]]);
        assert_eq!(d.label_names, vec!["AFR", "EUR"]);
        assert_eq!(d.labels, vec![1, 0]);

        let q = dir.path().join("m.txt");
        fs::write(&q, "10\n01\n").unwrap();
        let s = dir.path().join("l.txt");
        fs::write(&s, "x\ny\n").unwrap();
        let d = load_binary_matrix(&q, &BinaryLabels::Sidecar(s)).unwrap();
        assert_eq!(d.labels, vec![0, 1]);
    }

    #[test]
    fn non_binary_cell_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad");
        fs::write(&p, "0,1\n1,2\n").unwrap();
        let err = load_binary_matrix(&p, &BinaryLabels::None).unwrap_err().to_string();
        assert!(err.contains("row 2, column 2"), "{err}");
    }

    #[test]
    fn write_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("in.tsv");
        fs::write(&p, "label\tv0\tv1\tv2\nb\t1\t0\t1\na\t0\t0\t1\n").unwrap();
        let d = load_binary_matrix(&p, &BinaryLabels::Column("label".into())).unwrap();
        let q = dir.path().join("out.tsv");
        write_binary_matrix(&d, &q).unwrap();
        let mut e = load_binary_matrix(&q, &BinaryLabels::Column("label".into())).unwrap();
        e.source_meta = d.source_meta.clone();
        assert_eq!(d, e);
    }
}
