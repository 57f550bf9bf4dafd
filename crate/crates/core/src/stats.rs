//! Sufficient statistics `<-dE/dtheta>` for every parameter group.

use ndarray::{Array1, Array2, Array3, ArrayView2, Axis};
use rayon::prelude::*;

use crate::model::{Layout, ModelParams};
use crate::numerics::logistic;

/// Averages of the energy derivatives, laid out like [`ModelParams`].
///
/// `visible` holds indicator means of each stored visible column, `hidden`
/// the hidden means, `label` the label one-hot means, and the two matrices
/// the corresponding second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentStats {
    pub visible: Array2<f64>,
    pub hidden: Array1<f64>,
    pub label: Array1<f64>,
    pub visible_hidden: Array3<f64>,
    pub label_hidden: Array2<f64>,
    pub sample_count: usize,
}

impl MomentStats {
    pub fn zeros(layout: &Layout) -> Self {
        let fs = layout.field_states();
        MomentStats {
            visible: Array2::zeros((layout.n_visible, fs)),
            hidden: Array1::zeros(layout.n_hidden),
            label: Array1::zeros(layout.n_labels),
            visible_hidden: Array3::zeros((layout.n_visible, fs, layout.n_hidden)),
            label_hidden: Array2::zeros((layout.n_labels, layout.n_hidden)),
            sample_count: 0,
        }
    }

    /// Groups as flat slices in the order a, b, c, w, d (matching [`ModelParams::groups`]).
    pub fn groups(&self) -> [(&'static str, &[f64]); 5] {
        [
            ("a", self.visible.as_slice().expect("row-major")),
            ("b", self.hidden.as_slice().expect("row-major")),
            ("c", self.label.as_slice().expect("row-major")),
            ("w", self.visible_hidden.as_slice().expect("row-major")),
            ("d", self.label_hidden.as_slice().expect("row-major")),
        ]
    }

    pub fn layout_matches(&self, layout: &Layout) -> bool {
        let fs = layout.field_states();
        self.visible.dim() == (layout.n_visible, fs)
            && self.hidden.len() == layout.n_hidden
            && self.label.len() == layout.n_labels
            && self.visible_hidden.dim() == (layout.n_visible, fs, layout.n_hidden)
            && self.label_hidden.dim() == (layout.n_labels, layout.n_hidden)
    }

    /// Statistics of `(v, label)` pairs with the hidden layer replaced by its
    /// conditional mean `p(h = 1 | v, label)`.
    pub fn from_conditional_means(params: &ModelParams, visible: ArrayView2<u8>, labels: &[usize]) -> Self {
        assert_eq!(visible.nrows(), labels.len(), "one label per visible row");
        let nh = params.layout.n_hidden;
        let means: Vec<Vec<f64>> = (0..labels.len())
            .into_par_iter()
            .map(|r| {
                let mut field = vec![0.0; nh];
                let row = visible.row(r);
                let row = row.as_slice().expect("row-major visible matrix");
                params.hidden_field_into(row, labels[r], &mut field);
                field.iter_mut().for_each(|x| *x = logistic(*x));
                field
            })
            .collect();
        let mut acc = MomentAccumulator::new(params.layout);
        for ((row, &label), mean) in visible.axis_iter(Axis(0)).zip(labels).zip(&means) {
            acc.add(row.as_slice().expect("row-major visible matrix"), label, mean, 1.0);
        }
        acc.finish()
    }
}

/// Weighted running sums that become a [`MomentStats`].
///
/// Additions happen in call order so the reduction is reproducible.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    layout: Layout,
    sums: MomentStats,
    total_weight: f64,
}

impl MomentAccumulator {
    pub fn new(layout: Layout) -> Self {
        MomentAccumulator {
            layout,
            sums: MomentStats::zeros(&layout),
            total_weight: 0.0,
        }
    }

    /// Adds one configuration with hidden values (or means) `hidden` and weight `weight`.
    pub fn add(&mut self, visible: &[u8], label: usize, hidden: &[f64], weight: f64) {
        let l = self.layout;
        let nh = l.n_hidden;
        let s = &mut self.sums;
        let vis = s.visible.as_slice_mut().expect("row-major");
        let vh = s.visible_hidden.as_slice_mut().expect("row-major");
        for (i, &state) in visible.iter().enumerate() {
            if let Some(col) = l.column(i, state) {
                vis[col] += weight;
                for (acc, h) in vh[col * nh..(col + 1) * nh].iter_mut().zip(hidden) {
                    *acc += weight * h;
                }
            }
        }
        for (acc, h) in s.hidden.iter_mut().zip(hidden) {
            *acc += weight * h;
        }
        s.label[label] += weight;
        for (acc, h) in s.label_hidden.row_mut(label).iter_mut().zip(hidden) {
            *acc += weight * h;
        }
        s.sample_count += 1;
        self.total_weight += weight;
    }

    pub fn finish(self) -> MomentStats {
        let mut s = self.sums;
        if self.total_weight > 0.0 {
            let inv = 1.0 / self.total_weight;
            s.visible.mapv_inplace(|x| x * inv);
            s.hidden.mapv_inplace(|x| x * inv);
            s.label.mapv_inplace(|x| x * inv);
            s.visible_hidden.mapv_inplace(|x| x * inv);
            s.label_hidden.mapv_inplace(|x| x * inv);
        }
        s
    }
}
