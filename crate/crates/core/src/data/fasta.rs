//! Aligned FASTA reader and writer.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{AlphabetKind, LabeledDataset, GAP};
use crate::error::{Error, Result};

/// Where sequence labels come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FastaLabels {
    /// `>id<delim>label` headers; headers without the delimiter are unlabeled.
    Inline(char),
    /// Tab-separated `id\tlabel` file.
    Sidecar(PathBuf),
    None,
}

impl Default for FastaLabels {
    fn default() -> Self {
        FastaLabels::Inline('|')
    }
}

/// Treatment of residues outside the alphabet (ambiguity codes such as X, B, Z, N).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownPolicy {
    /// Map to the gap state and log a warning.
    #[default]
    Gap,
    Strict,
}

struct Record {
    header: String,
    residues: String,
}

fn parse_records(path: &Path, text: &str) -> Result<Vec<Record>> {
    let mut records: Vec<Record> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if let Some(header) = line.strip_prefix('>') {
            records.push(Record {
                header: header.trim().to_string(),
                residues: String::new(),
            });
        } else if !line.trim().is_empty() {
            match records.last_mut() {
                Some(r) => r.residues.extend(line.chars().filter(|c| !c.is_whitespace())),
                None => return Err(Error::parse(path, format!("line {}: sequence data before the first header", lineno + 1))),
            }
        }
    }
    if records.is_empty() {
        return Err(Error::parse(path, "no FASTA records"));
    }
    Ok(records)
}

fn read_sidecar(path: &Path) -> Result<HashMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, '\t');
        let id = parts.next().unwrap_or("").trim();
        let label = parts
            .next()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .ok_or_else(|| Error::parse(path, format!("line {}: expected `id<TAB>label`", lineno + 1)))?;
        map.insert(id.to_string(), label.to_string());
    }
    Ok(map)
}

/// Loads an aligned FASTA file into categorical states.
///
/// Residues are upper-cased; `-` and `.` are gaps. For RNA, `T` is read as `U`.
pub fn load_fasta_msa(
    path: impl AsRef<Path>,
    kind: AlphabetKind,
    labels: &FastaLabels,
    unknown: UnknownPolicy,
) -> Result<LabeledDataset> {
    let path = path.as_ref();
    if kind == AlphabetKind::Binary {
        return Err(Error::Usage("FASTA input needs a protein or RNA alphabet".into()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records = parse_records(path, &text)?;

    let width = {
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for r in &records {
            *counts.entry(r.residues.chars().count()).or_default() += 1;
        }
        // The most common length; ties go to the first record's length.
        let first = records[0].residues.chars().count();
        let best = counts.values().copied().max().unwrap_or(0);
        if counts[&first] == best {
            first
        } else {
            *counts.iter().find(|(_, &c)| c == best).map(|(w, _)| w).expect("nonempty")
        }
    };
    let ragged: Vec<String> = records
        .iter()
        .filter(|r| r.residues.chars().count() != width)
        .map(|r| format!("{} ({})", r.header, r.residues.chars().count()))
        .collect();
    if !ragged.is_empty() {
        return Err(Error::parse(
            path,
            format!("ragged alignment, expected length {width}; offending records: {}", ragged.join(", ")),
        ));
    }

    let symbols = kind.symbols();
    let gap = symbols.iter().position(|&c| c == GAP).expect("gap in alphabet") as u8;
    let mut lookup = [None::<u8>; 128];
    for (s, &c) in symbols.iter().enumerate() {
        lookup[c as usize] = Some(s as u8);
    }
    lookup['.' as usize] = Some(gap);
    if kind == AlphabetKind::Rna5 {
        lookup['T' as usize] = lookup['U' as usize];
    }

    let mut samples = Array2::<u8>::zeros((records.len(), width));
    let mut unknown_count = 0usize;
    for (r, record) in records.iter().enumerate() {
        for (i, c) in record.residues.chars().enumerate() {
            let up = c.to_ascii_uppercase();
            let state = if up.is_ascii() { lookup[up as usize] } else { None };
            samples[[r, i]] = match (state, unknown) {
                (Some(s), _) => s,
                (None, UnknownPolicy::Gap) => {
                    unknown_count += 1;
                    gap
                }
                (None, UnknownPolicy::Strict) => {
                    return Err(Error::parse(
                        path,
                        format!("record `{}`, column {}: unknown symbol `{c}`", record.header, i + 1),
                    ))
                }
            };
        }
    }
    if unknown_count > 0 {
        log::warn!("{}: {unknown_count} unknown residues mapped to gap", path.display());
    }

    let (ids, names) = match labels {
        FastaLabels::None => (records.iter().map(|r| r.header.clone()).collect(), None),
        FastaLabels::Inline(delim) => {
            let mut ids = Vec::new();
            let mut names = Vec::new();
            for r in &records {
                match r.header.split_once(*delim) {
                    Some((id, label)) => {
                        ids.push(id.trim().to_string());
                        names.push(Some(label.trim().to_string()));
                    }
                    None => {
                        ids.push(r.header.clone());
                        names.push(None);
                    }
                }
            }
            let labeled = names.iter().filter(|n| n.is_some()).count();
            let names = if labeled == 0 {
                None
            } else if labeled == names.len() {
                Some(names.into_iter().map(|n| n.expect("all labeled")).collect())
            } else {
                let missing: Vec<&str> = ids
                    .iter()
                    .zip(&names)
                    .filter(|(_, n)| n.is_none())
                    .map(|(id, _)| id.as_str())
                    .collect();
                return Err(Error::parse(path, format!("records without a label: {}", missing.join(", "))));
            };
            (ids, names)
        }
        FastaLabels::Sidecar(sidecar) => {
            let map = read_sidecar(sidecar)?;
            let ids: Vec<String> = records
                .iter()
                .map(|r| r.header.split_whitespace().next().unwrap_or("").to_string())
                .collect();
            let missing: Vec<&str> = ids.iter().filter(|id| !map.contains_key(*id)).map(String::as_str).collect();
            if !missing.is_empty() {
                return Err(Error::parse(sidecar, format!("no label for records: {}", missing.join(", "))));
            }
            let names = ids.iter().map(|id| map[id].clone()).collect();
            (ids, Some(names))
        }
    };

    let meta = vec![format!("fasta:{}", path.display())];
    LabeledDataset::from_named_labels(samples, names, symbols, ids, meta)
}

/// Writes `>id|label` (or `>id` when unlabeled) records, one sequence line each.
pub fn write_fasta(dataset: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (r, row) in dataset.samples.rows().into_iter().enumerate() {
        out.push('>');
        out.push_str(&dataset.ids[r]);
        if dataset.is_labeled() {
            let _ = write!(out, "|{}", dataset.label_names[dataset.labels[r]]);
        }
        out.push('\n');
        out.extend(row.iter().map(|&s| dataset.alphabet[s as usize]));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn toy_protein_alignment() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "a.fa", ">s1|GH1\nACD-\nY.\n>s2|GH2\nwvtsrq\n");
        let d = load_fasta_msa(&p, AlphabetKind::Protein21, &FastaLabels::default(), UnknownPolicy::Strict).unwrap();
        assert_eq!(d.samples, array![[0u8, 1, 2, 20, 19, 20], [18, 17, 16, 15, 14, 13]]);
        assert_eq!(d.ids, vec!["s1", "s2"]);
        assert_eq!(d.label_names, vec!["GH1", "GH2"]);
        assert_eq!(d.labels, vec![0, 1]);
    }

    #[test]
    fn rna_maps_t_and_unknowns() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "r.fa", ">a|x\nACGTN\n");
        let d = load_fasta_msa(&p, AlphabetKind::Rna5, &FastaLabels::default(), UnknownPolicy::Gap).unwrap();
        assert_eq!(d.samples, array![[0u8, 1, 2, 3, 4]]);
        let err = load_fasta_msa(&p, AlphabetKind::Rna5, &FastaLabels::default(), UnknownPolicy::Strict).unwrap_err();
        assert!(err.to_string().contains("unknown symbol `N`"));
    }

    #[test]
    fn ragged_alignment_lists_ids() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "g.fa", ">a\nACGU\n>b\nAC\n>c\nACGU\n");
        let err = load_fasta_msa(&p, AlphabetKind::Rna5, &FastaLabels::None, UnknownPolicy::Gap).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("b (2)") && !msg.contains("a (4)"), "{msg}");
    }

    #[test]
    fn sidecar_labels_and_missing_id() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "s.fa", ">a desc\nAC\n>b\nGU\n");
        let side = write_tmp(&dir, "s.tsv", "b\tL2\na\tL1\n");
        let d = load_fasta_msa(&p, AlphabetKind::Rna5, &FastaLabels::Sidecar(side), UnknownPolicy::Gap).unwrap();
        assert_eq!(d.labels, vec![0, 1]);
        let side = write_tmp(&dir, "t.tsv", "a\tL1\n");
        let err = load_fasta_msa(&p, AlphabetKind::Rna5, &FastaLabels::Sidecar(side), UnknownPolicy::Gap).unwrap_err();
        assert!(err.to_string().contains("no label for records: b"));
    }

    #[test]
    fn partially_labeled_headers_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "m.fa", ">a|x\nAC\n>b\nGU\n");
        assert!(load_fasta_msa(&p, AlphabetKind::Rna5, &FastaLabels::default(), UnknownPolicy::Gap).is_err());
    }

    #[test]
    fn write_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "w.fa", ">s1|B\nAC-DE\n>s2|A\n-----\n>s3|B\nYYWVV\n");
        let d = load_fasta_msa(&p, AlphabetKind::Protein21, &FastaLabels::default(), UnknownPolicy::Strict).unwrap();
        let q = dir.path().join("out.fa");
        write_fasta(&d, &q).unwrap();
        let mut e = load_fasta_msa(&q, AlphabetKind::Protein21, &FastaLabels::default(), UnknownPolicy::Strict).unwrap();
        e.source_meta = d.source_meta.clone();
        assert_eq!(d, e);
    }
}
