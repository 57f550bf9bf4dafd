use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub accuracy: f64,
    /// Counts indexed by `[truth, prediction]`.
    pub confusion: Array2<usize>,
}

impl ClassificationReport {
    /// Tab-separated confusion matrix with `truth\prediction` header row.
    pub fn confusion_tsv(&self, names: &[String]) -> String {
        let mut out = String::from("truth\\prediction");
        for n in names {
            out.push('\t');
            out.push_str(n);
        }
        out.push('\n');
        for (t, row) in self.confusion.rows().into_iter().enumerate() {
            out.push_str(&names[t]);
            for c in row {
                out.push('\t');
                out.push_str(&c.to_string());
            }
            out.push('\n');
        }
        out
    }
}

pub fn classification_report(predictions: &[usize], truths: &[usize], n_labels: usize) -> Result<ClassificationReport> {
    if predictions.len() != truths.len() {
        return Err(Error::Usage(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    if let Some(l) = predictions.iter().chain(truths).find(|&&l| l >= n_labels) {
        return Err(Error::Usage(format!("label {l} outside {n_labels} labels")));
    }
    let mut confusion = Array2::zeros((n_labels, n_labels));
    for (&p, &t) in predictions.iter().zip(truths) {
        confusion[[t, p]] += 1;
    }
    let correct: usize = confusion.diag().sum();
    let accuracy = if truths.is_empty() { 0.0 } else { correct as f64 / truths.len() as f64 };
    Ok(ClassificationReport { accuracy, confusion })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn perfect_and_all_wrong() {
        let r = classification_report(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.confusion, array![[1, 0, 0], [0, 2, 0], [0, 0, 1]]);
        let w = classification_report(&[1, 0, 1], &[0, 1, 0], 2).unwrap();
        assert_eq!(w.accuracy, 0.0);
        assert_eq!(w.confusion, array![[0, 2], [1, 0]]);
    }

    #[test]
    fn accuracy_is_trace_over_total() {
        let r = classification_report(&[0, 1, 1, 2, 0], &[0, 1, 2, 2, 1], 3).unwrap();
        assert_eq!(r.accuracy, r.confusion.diag().sum() as f64 / 5.0);
        let tsv = r.confusion_tsv(&["a".into(), "b".into(), "c".into()]);
        assert!(tsv.starts_with("truth\\prediction\ta\tb\tc\na\t1\t0\t0\n"));
    }

    #[test]
    fn length_mismatch() {
        assert!(classification_report(&[0], &[0, 1], 2).is_err());
    }
}
