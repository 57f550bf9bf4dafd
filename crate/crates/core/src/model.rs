//! Parameters, energy and exact conditionals of the semi-supervised RBM.
//!
//! The joint energy over a visible configuration `v` (categorical, `q`
//! states per site), a binary hidden layer `h` and a label `l` is
//!
//! ```text
//! E(v, h, l) = - sum_i a[i, v_i] - sum_mu b[mu] h_mu - sum_{i,mu} w[i, v_i, mu] h_mu
//!              - c[l] - sum_mu d[l, mu] h_mu
//! ```
//!
//! Binary data is the `q = 2` case where state 0 carries no field and no
//! weight, so only the state-1 column is stored. Potts data (`q > 2`)
//! stores one column per state.

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::numerics::{logistic, softmax_in_place, softplus};

/// Sizes of the three blocks of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Layout {
    pub n_visible: usize,
    pub n_states: usize,
    pub n_hidden: usize,
    pub n_labels: usize,
}

impl Layout {
    /// Largest alphabet representable by the one-byte visible encoding.
    pub const MAX_STATES: usize = 256;

    pub fn new(n_visible: usize, n_states: usize, n_hidden: usize, n_labels: usize) -> Result<Self> {
        let layout = Layout {
            n_visible,
            n_states,
            n_hidden,
            n_labels,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_visible == 0 || self.n_hidden == 0 || self.n_labels == 0 {
            return Err(Error::Config(format!(
                "layout counts must be positive, got {self:?}"
            )));
        }
        if self.n_states < 2 || self.n_states > Self::MAX_STATES {
            return Err(Error::Config(format!(
                "n_states must be in [2, {}], got {}",
                Self::MAX_STATES,
                self.n_states
            )));
        }
        Ok(())
    }

    pub fn is_binary(&self) -> bool {
        self.n_states == 2
    }

    /// Number of stored field columns per visible site (1 for binary, q for Potts).
    pub fn field_states(&self) -> usize {
        if self.is_binary() {
            1
        } else {
            self.n_states
        }
    }

    /// Total number of stored visible columns.
    pub fn n_columns(&self) -> usize {
        self.n_visible * self.field_states()
    }

    /// Flat column carrying the field of site `site` in state `state`, if any.
    #[inline]
    pub fn column(&self, site: usize, state: u8) -> Option<usize> {
        if self.is_binary() {
            (state == 1).then_some(site)
        } else {
            Some(site * self.n_states + state as usize)
        }
    }
}

/// One configuration of every variable of the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainState {
    pub visible: Vec<u8>,
    pub hidden: Vec<u8>,
    pub label: usize,
}

impl ChainState {
    pub fn zeros(layout: &Layout) -> Self {
        ChainState {
            visible: vec![0; layout.n_visible],
            hidden: vec![0; layout.n_hidden],
            label: 0,
        }
    }

    pub fn validate(&self, layout: &Layout) -> Result<()> {
        check_visible(layout, &self.visible)?;
        check_hidden(layout, &self.hidden)?;
        check_label(layout, self.label)
    }
}

pub(crate) fn check_visible(layout: &Layout, visible: &[u8]) -> Result<()> {
    if visible.len() != layout.n_visible {
        return Err(Error::Config(format!(
            "visible configuration has {} sites, layout expects {}",
            visible.len(),
            layout.n_visible
        )));
    }
    if let Some(site) = visible.iter().position(|&s| s as usize >= layout.n_states) {
        return Err(Error::Config(format!(
            "visible site {site} holds state {} outside [0, {})",
            visible[site], layout.n_states
        )));
    }
    Ok(())
}

pub(crate) fn check_hidden(layout: &Layout, hidden: &[u8]) -> Result<()> {
    if hidden.len() != layout.n_hidden {
        return Err(Error::Config(format!(
            "hidden configuration has {} units, layout expects {}",
            hidden.len(),
            layout.n_hidden
        )));
    }
    if hidden.iter().any(|&h| h > 1) {
        return Err(Error::Config("hidden units must be 0 or 1".into()));
    }
    Ok(())
}

pub(crate) fn check_label(layout: &Layout, label: usize) -> Result<()> {
    if label >= layout.n_labels {
        return Err(Error::Config(format!(
            "label {label} outside [0, {})",
            layout.n_labels
        )));
    }
    Ok(())
}

/// All parameters of the Hamiltonian.
///
/// Arrays are kept in standard (row-major) layout; the sampler relies on
/// contiguous rows of `weights` indexed by flat visible column.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layout: Layout,
    /// `a`: shape `(n_visible, field_states)`.
    pub visible_bias: Array2<f64>,
    /// `b`: shape `(n_hidden,)`.
    pub hidden_bias: Array1<f64>,
    /// `c`: shape `(n_labels,)`.
    pub label_bias: Array1<f64>,
    /// `w`: shape `(n_visible, field_states, n_hidden)`.
    pub weights: Array3<f64>,
    /// `d`: shape `(n_labels, n_hidden)`.
    pub label_weights: Array2<f64>,
}

impl ModelParams {
    pub fn zeros(layout: Layout) -> Self {
        let fs = layout.field_states();
        ModelParams {
            layout,
            visible_bias: Array2::zeros((layout.n_visible, fs)),
            hidden_bias: Array1::zeros(layout.n_hidden),
            label_bias: Array1::zeros(layout.n_labels),
            weights: Array3::zeros((layout.n_visible, fs, layout.n_hidden)),
            label_weights: Array2::zeros((layout.n_labels, layout.n_hidden)),
        }
    }

    /// Every parameter drawn i.i.d. from a centered Gaussian with the given standard deviation.
    pub fn random_gaussian<R: Rng + ?Sized>(layout: Layout, std_dev: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, std_dev).expect("finite standard deviation");
        let mut params = Self::zeros(layout);
        for group in params.groups_mut() {
            for x in group.1.iter_mut() {
                *x = normal.sample(rng);
            }
        }
        params
    }

    /// Checks shapes, memory layout and finiteness.
    pub fn validate(&self) -> Result<()> {
        let l = &self.layout;
        l.validate()?;
        let fs = l.field_states();
        let ok = self.visible_bias.dim() == (l.n_visible, fs)
            && self.hidden_bias.len() == l.n_hidden
            && self.label_bias.len() == l.n_labels
            && self.weights.dim() == (l.n_visible, fs, l.n_hidden)
            && self.label_weights.dim() == (l.n_labels, l.n_hidden);
        if !ok {
            return Err(Error::Config(format!(
                "parameter shapes do not match layout {l:?}"
            )));
        }
        if !(self.visible_bias.is_standard_layout()
            && self.weights.is_standard_layout()
            && self.label_weights.is_standard_layout())
        {
            return Err(Error::Config("parameter arrays must be row-major".into()));
        }
        for (name, values) in self.groups() {
            if values.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("parameter group `{name}` is not finite")));
            }
        }
        Ok(())
    }

    /// Parameter groups as flat slices, in the fixed order a, b, c, w, d.
    pub fn groups(&self) -> [(&'static str, &[f64]); 5] {
        [
            ("a", self.visible_bias.as_slice().expect("row-major")),
            ("b", self.hidden_bias.as_slice().expect("row-major")),
            ("c", self.label_bias.as_slice().expect("row-major")),
            ("w", self.weights.as_slice().expect("row-major")),
            ("d", self.label_weights.as_slice().expect("row-major")),
        ]
    }

    pub fn groups_mut(&mut self) -> [(&'static str, &mut [f64]); 5] {
        [
            ("a", self.visible_bias.as_slice_mut().expect("row-major")),
            ("b", self.hidden_bias.as_slice_mut().expect("row-major")),
            ("c", self.label_bias.as_slice_mut().expect("row-major")),
            ("w", self.weights.as_slice_mut().expect("row-major")),
            ("d", self.label_weights.as_slice_mut().expect("row-major")),
        ]
    }

    pub fn n_parameters(&self) -> usize {
        self.groups().iter().map(|(_, g)| g.len()).sum()
    }

    pub(crate) fn weights_flat(&self) -> &[f64] {
        self.weights.as_slice().expect("row-major")
    }

    pub(crate) fn visible_bias_flat(&self) -> &[f64] {
        self.visible_bias.as_slice().expect("row-major")
    }

    pub(crate) fn label_weights_flat(&self) -> &[f64] {
        self.label_weights.as_slice().expect("row-major")
    }

    fn check_state_dims(&self, visible: &[u8], hidden: Option<&[u8]>, label: Option<usize>) -> Result<()> {
        check_visible(&self.layout, visible)?;
        if let Some(h) = hidden {
            check_hidden(&self.layout, h)?;
        }
        if let Some(l) = label {
            check_label(&self.layout, l)?;
        }
        Ok(())
    }

    /// Energy of a full configuration.
    pub fn energy(&self, state: &ChainState) -> Result<f64> {
        self.check_state_dims(&state.visible, Some(&state.hidden), Some(state.label))?;
        let l = &self.layout;
        let a = self.visible_bias_flat();
        let w = self.weights_flat();
        let mut e = 0.0;
        for (i, &s) in state.visible.iter().enumerate() {
            if let Some(col) = l.column(i, s) {
                e -= a[col];
                let row = &w[col * l.n_hidden..(col + 1) * l.n_hidden];
                for (wm, &h) in row.iter().zip(&state.hidden) {
                    if h == 1 {
                        e -= wm;
                    }
                }
            }
        }
        for (mu, &h) in state.hidden.iter().enumerate() {
            if h == 1 {
                e -= self.hidden_bias[mu] + self.label_weights[[state.label, mu]];
            }
        }
        e -= self.label_bias[state.label];
        Ok(e)
    }

    /// Writes `b + sum_i w[i, v_i] + d[label]` into `out` (no dimension checks).
    #[inline]
    pub(crate) fn hidden_field_into(&self, visible: &[u8], label: usize, out: &mut [f64]) {
        self.hidden_field_visible_part(visible, out);
        let nh = self.layout.n_hidden;
        let d = &self.label_weights_flat()[label * nh..(label + 1) * nh];
        for (o, dm) in out.iter_mut().zip(d) {
            *o += dm;
        }
    }

    /// Writes `b + sum_i w[i, v_i]` into `out`: the label-independent part of the hidden field.
    #[inline]
    pub(crate) fn hidden_field_visible_part(&self, visible: &[u8], out: &mut [f64]) {
        let l = &self.layout;
        let nh = l.n_hidden;
        let w = self.weights_flat();
        out.copy_from_slice(self.hidden_bias.as_slice().expect("row-major"));
        for (i, &s) in visible.iter().enumerate() {
            if let Some(col) = l.column(i, s) {
                let row = &w[col * nh..(col + 1) * nh];
                for (o, wm) in out.iter_mut().zip(row) {
                    *o += wm;
                }
            }
        }
    }

    /// Input field `I_mu = b_mu + sum_i w[i, v_i, mu] + d[label, mu]` of every hidden unit.
    pub fn hidden_field(&self, visible: &[u8], label: usize) -> Result<Array1<f64>> {
        self.check_state_dims(visible, None, Some(label))?;
        let mut out = Array1::zeros(self.layout.n_hidden);
        self.hidden_field_into(visible, label, out.as_slice_mut().expect("contiguous"));
        Ok(out)
    }

    /// `p(h_mu = 1 | v, label)` for every hidden unit.
    pub fn hidden_activation(&self, visible: &[u8], label: usize) -> Result<Array1<f64>> {
        Ok(self.hidden_field(visible, label)?.mapv(logistic))
    }

    /// Per-site conditional distributions `p(v_i = s | h)`, shape `(n_visible, n_states)`.
    pub fn visible_activation(&self, hidden: &[u8]) -> Result<Array2<f64>> {
        check_hidden(&self.layout, hidden)?;
        let l = &self.layout;
        let mut probs = Array2::zeros((l.n_visible, l.n_states));
        let mut logits = vec![0.0; l.n_states];
        for i in 0..l.n_visible {
            for s in 0..l.n_states {
                logits[s] = match l.column(i, s as u8) {
                    Some(col) => self.visible_column_field(col, hidden),
                    None => 0.0,
                };
            }
            softmax_in_place(&mut logits);
            for s in 0..l.n_states {
                probs[[i, s]] = logits[s];
            }
        }
        Ok(probs)
    }

    fn visible_column_field(&self, col: usize, hidden: &[u8]) -> f64 {
        let nh = self.layout.n_hidden;
        let row = &self.weights_flat()[col * nh..(col + 1) * nh];
        let mut x = self.visible_bias_flat()[col];
        for (wm, &h) in row.iter().zip(hidden) {
            if h == 1 {
                x += wm;
            }
        }
        x
    }

    /// Label logits `c_m + sum_mu d[m, mu] h_mu` written into `out`.
    #[inline]
    pub(crate) fn label_logits_into(&self, hidden: &[u8], out: &mut [f64]) {
        let nh = self.layout.n_hidden;
        let d = self.label_weights_flat();
        for (m, o) in out.iter_mut().enumerate() {
            let row = &d[m * nh..(m + 1) * nh];
            let mut x = self.label_bias[m];
            for (dm, &h) in row.iter().zip(hidden) {
                if h == 1 {
                    x += dm;
                }
            }
            *o = x;
        }
    }

    /// `p(label = m | h)` for every label.
    pub fn label_activation(&self, hidden: &[u8]) -> Result<Array1<f64>> {
        check_hidden(&self.layout, hidden)?;
        let mut out = vec![0.0; self.layout.n_labels];
        self.label_logits_into(hidden, &mut out);
        softmax_in_place(&mut out);
        Ok(Array1::from(out))
    }

    /// `-log sum_h exp(-E(v, h, label))`, with the hidden sum taken in closed form.
    pub fn free_energy(&self, visible: &[u8], label: usize) -> Result<f64> {
        let field = self.hidden_field(visible, label)?;
        let l = &self.layout;
        let a = self.visible_bias_flat();
        let mut f = -self.label_bias[label];
        for (i, &s) in visible.iter().enumerate() {
            if let Some(col) = l.column(i, s) {
                f -= a[col];
            }
        }
        f -= field.iter().map(|&x| softplus(x)).sum::<f64>();
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn binary(nv: usize, nh: usize, nl: usize) -> Layout {
        Layout::new(nv, 2, nh, nl).unwrap()
    }

    #[test]
    fn layout_rejects_zero_counts() {
        assert!(Layout::new(0, 2, 1, 1).is_err());
        assert!(Layout::new(1, 1, 1, 1).is_err());
        assert!(Layout::new(1, 2, 0, 1).is_err());
        assert!(Layout::new(1, 2, 1, 0).is_err());
        assert!(Layout::new(1, 257, 1, 1).is_err());
    }

    #[test]
    fn zero_params_zero_energy() {
        let layout = Layout::new(4, 5, 3, 2).unwrap();
        let params = ModelParams::zeros(layout);
        let state = ChainState {
            visible: vec![0, 4, 2, 1],
            hidden: vec![1, 0, 1],
            label: 1,
        };
        assert_eq!(params.energy(&state).unwrap(), 0.0);
    }

    #[test]
    fn single_active_field() {
        let mut params = ModelParams::zeros(binary(3, 2, 1));
        params.visible_bias[[0, 0]] = 1.0;
        let state = ChainState {
            visible: vec![1, 0, 0],
            hidden: vec![0, 0],
            label: 0,
        };
        assert_eq!(params.energy(&state).unwrap(), -1.0);
    }

    #[test]
    fn energy_dimension_mismatch() {
        let params = ModelParams::zeros(binary(3, 2, 2));
        let bad = ChainState {
            visible: vec![1, 0],
            hidden: vec![0, 0],
            label: 0,
        };
        assert!(matches!(params.energy(&bad), Err(Error::Config(_))));
        let bad_label = ChainState {
            visible: vec![1, 0, 0],
            hidden: vec![0, 0],
            label: 2,
        };
        assert!(params.energy(&bad_label).is_err());
        let bad_state = ChainState {
            visible: vec![2, 0, 0],
            hidden: vec![0, 0],
            label: 0,
        };
        assert!(params.energy(&bad_state).is_err());
    }

    #[test]
    fn zero_params_activations() {
        let params = ModelParams::zeros(Layout::new(3, 5, 4, 10).unwrap());
        let ph = params.hidden_activation(&[0, 1, 2], 3).unwrap();
        assert!(ph.iter().all(|&p| p == 0.5));
        let pv = params.visible_activation(&[1, 0, 1, 1]).unwrap();
        assert!(pv.iter().all(|&p| (p - 0.2).abs() < 1e-15));
        let pl = params.label_activation(&[1, 0, 1, 1]).unwrap();
        assert!(pl.iter().all(|&p| (p - 0.1).abs() < 1e-15));

        let binary_params = ModelParams::zeros(binary(3, 2, 2));
        let pv = binary_params.visible_activation(&[1, 1]).unwrap();
        assert!(pv.iter().all(|&p| p == 0.5));
    }

    #[test]
    fn label_row_saturates_hidden() {
        let mut params = ModelParams::zeros(binary(3, 4, 2));
        params.label_weights.row_mut(1).fill(10.0);
        let ph = params.hidden_activation(&[0, 1, 0], 1).unwrap();
        assert!(ph.iter().all(|&p| p >= 0.9999));
    }

    #[test]
    fn label_softmax_of_known_logits() {
        let mut params = ModelParams::zeros(binary(2, 2, 2));
        params.label_bias[0] = 5.0;
        params.label_bias[1] = -5.0;
        let p = params.label_activation(&[1, 1]).unwrap();
        assert_abs_diff_eq!(p[0], 0.999_954_602_131_297_6, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 4.539_786_870_243_442e-5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_params_free_energy() {
        let params = ModelParams::zeros(Layout::new(3, 4, 6, 2).unwrap());
        let f = params.free_energy(&[0, 3, 1], 1).unwrap();
        assert_abs_diff_eq!(f, -6.0 * 2f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn free_energy_decreases_with_hidden_bias_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = ModelParams::random_gaussian(binary(4, 3, 2), 0.5, &mut rng);
        let v = [1, 0, 1, 1];
        let mut previous = params.free_energy(&v, 1).unwrap();
        for _ in 0..20 {
            params.hidden_bias.mapv_inplace(|b| b + 0.1);
            let f = params.free_energy(&v, 1).unwrap();
            assert!(f < previous);
            assert!((previous - f) < 0.1 * 3.0 + 1e-12);
            previous = f;
        }
    }

    #[test]
    fn validate_catches_nan() {
        let mut params = ModelParams::zeros(binary(2, 2, 2));
        assert!(params.validate().is_ok());
        params.weights[[1, 0, 1]] = f64::NAN;
        assert!(params.validate().is_err());
    }
}
