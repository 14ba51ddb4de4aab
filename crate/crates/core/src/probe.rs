//! Linear probe: unregularized logistic regression with balanced class
//! weights, trained by full-batch gradient descent with backtracking.
//!
//! Feature matrices are row-major slices; the row width is the length of the
//! weight vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeighting {
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineSearch {
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub max_iter: usize,
    /// Stop once the infinity norm of the gradient drops to this.
    pub grad_tol: f64,
    pub class_weighting: ClassWeighting,
    pub line_search: LineSearch,
    /// Standardize each feature on the training rows before fitting. The
    /// returned model is expressed in the original feature space.
    pub standardize: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            grad_tol: 1e-6,
            class_weighting: ClassWeighting::Balanced,
            line_search: LineSearch::default(),
            standardize: false,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        let ls = &self.line_search;
        if self.max_iter == 0 {
            return Err(Error::Config("probe max_iter must be at least 1".into()));
        }
        if self.grad_tol.is_nan() || self.grad_tol <= 0.0 {
            return Err(Error::Config("probe grad_tol must be positive".into()));
        }
        if !(ls.initial_step > 0.0 && ls.shrink > 0.0 && ls.shrink < 1.0) {
            return Err(Error::Config(
                "line search needs initial_step > 0 and 0 < shrink < 1".into(),
            ));
        }
        if !(ls.sufficient_decrease > 0.0 && ls.sufficient_decrease < 1.0) {
            return Err(Error::Config(
                "line search sufficient_decrease must be in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub iterations_used: usize,
    pub final_grad_norm: f64,
    /// Loss before the first step and after every accepted step.
    #[serde(skip)]
    pub loss_history: Vec<f64>,
}

/// log(1 + exp(-z)) without overflow.
fn log1p_exp_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// 1 / (1 + exp(-t)) without overflow.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn check_shapes(w: &[f64], x: &[f64], y: &[u8], s: &[f64]) -> Result<usize> {
    let d = w.len();
    if d == 0 || !x.len().is_multiple_of(d) {
        return Err(Error::InvalidArgument(format!(
            "feature buffer of {} values is not a multiple of dimension {d}",
            x.len()
        )));
    }
    let m = x.len() / d;
    if m == 0 || y.len() != m || s.len() != m {
        return Err(Error::InvalidArgument(format!(
            "{m} rows, {} labels, {} sample weights",
            y.len(),
            s.len()
        )));
    }
    Ok(m)
}

fn weighted_loss(w: &[f64], b: f64, x: &[f64], y: &[u8], s: &[f64]) -> f64 {
    let d = w.len();
    x.chunks_exact(d)
        .zip(y.iter().zip(s))
        .map(|(row, (&yi, &si))| {
            let margin: f64 = row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b;
            let signed = if yi == 1 { margin } else { -margin };
            si * log1p_exp_neg(signed)
        })
        .sum()
}

/// Weighted logistic loss `sum_i s_i log(1 + exp(-y_i (w.x_i + b)))` with
/// `y_i` in {-1, +1}, and its exact gradient.
pub fn loss_and_gradient(
    w: &[f64],
    b: f64,
    x: &[f64],
    y: &[u8],
    sample_weights: &[f64],
) -> Result<(f64, Vec<f64>, f64)> {
    check_shapes(w, x, y, sample_weights)?;
    if w.iter().chain(x).chain(sample_weights).any(|v| !v.is_finite()) || !b.is_finite() {
        return Err(Error::Numerical("non-finite input to loss".into()));
    }
    let d = w.len();
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; d];
    let mut grad_b = 0.0;
    for (row, (&yi, &si)) in x.chunks_exact(d).zip(y.iter().zip(sample_weights)) {
        let margin: f64 = row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b;
        let sign = if yi == 1 { 1.0 } else { -1.0 };
        loss += si * log1p_exp_neg(sign * margin);
        // d/dmargin = -sign * sigmoid(-sign * margin)
        let coef = -si * sign * sigmoid(-sign * margin);
        for (g, a) in grad_w.iter_mut().zip(row) {
            *g += coef * a;
        }
        grad_b += coef;
    }
    Ok((loss, grad_w, grad_b))
}

/// `M / (2 M_c)` for each sample of class `c`.
pub fn balanced_sample_weights(y: &[u8]) -> Result<Vec<f64>> {
    let m = y.len();
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == m {
        return Err(Error::InvalidArgument(
            "degenerate labels: probe training needs both classes".into(),
        ));
    }
    let w_pos = m as f64 / (2.0 * pos as f64);
    let w_neg = m as f64 / (2.0 * (m - pos) as f64);
    Ok(y.iter().map(|&v| if v == 1 { w_pos } else { w_neg }).collect())
}

fn inf_norm(g: &[f64], gb: f64) -> f64 {
    g.iter().fold(gb.abs(), |acc, v| acc.max(v.abs()))
}

struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &[f64], d: usize) -> Self {
        let m = (x.len() / d) as f64;
        let mut mean = vec![0.0; d];
        for row in x.chunks_exact(d) {
            for (mu, v) in mean.iter_mut().zip(row) {
                *mu += v;
            }
        }
        mean.iter_mut().for_each(|mu| *mu /= m);
        let mut var = vec![0.0; d];
        for row in x.chunks_exact(d) {
            for ((s, v), mu) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - mu) * (v - mu);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / m).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.mean.len();
        let mut out = x.to_vec();
        for row in out.chunks_exact_mut(d) {
            for ((v, mu), sd) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - mu) / sd;
            }
        }
        out
    }

    /// Maps a model fitted on standardized rows back to raw features.
    fn unfold(&self, w: &mut [f64], b: &mut f64) {
        for ((wj, mu), sd) in w.iter_mut().zip(&self.mean).zip(&self.scale) {
            *wj /= sd;
            *b -= *wj * mu;
        }
    }
}

/// Fits a probe on `M x d` rows `x` with binary labels `y`.
pub fn train_probe(x: &[f64], d: usize, y: &[u8], cfg: &ProbeConfig) -> Result<ProbeModel> {
    cfg.validate()?;
    if d == 0 || x.len() != y.len() * d {
        return Err(Error::InvalidArgument(format!(
            "{} feature values do not form {} rows of width {d}",
            x.len(),
            y.len()
        )));
    }
    let weights = match cfg.class_weighting {
        ClassWeighting::Balanced => balanced_sample_weights(y)?,
    };
    let standardizer = cfg.standardize.then(|| Standardizer::fit(x, d));
    let scaled;
    let x = match &standardizer {
        Some(st) => {
            scaled = st.apply(x);
            &scaled[..]
        }
        None => x,
    };

    let ls = cfg.line_search;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let (mut loss, mut grad_w, mut grad_b) = loss_and_gradient(&w, b, x, y, &weights)?;
    let mut history = vec![loss];
    let mut step = ls.initial_step;
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let gnorm = inf_norm(&grad_w, grad_b);
        if gnorm <= cfg.grad_tol {
            converged = true;
            break;
        }
        if iterations == cfg.max_iter {
            break;
        }
        let sq: f64 = grad_w.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b;
        // warm start from twice the last accepted step, capped at the initial step
        step = (step * 2.0).min(ls.initial_step);
        let accepted = loop {
            let cand_w: Vec<f64> = w.iter().zip(&grad_w).map(|(a, g)| a - step * g).collect();
            let cand_b = b - step * grad_b;
            let cand_loss = weighted_loss(&cand_w, cand_b, x, y, &weights);
            if cand_loss <= loss - ls.sufficient_decrease * step * sq {
                break Some((cand_w, cand_b));
            }
            step *= ls.shrink;
            if step < 1e-300 {
                break None;
            }
        };
        let Some((nw, nb)) = accepted else {
            // no representable step decreases the loss
            break;
        };
        w = nw;
        b = nb;
        iterations += 1;
        (loss, grad_w, grad_b) = loss_and_gradient(&w, b, x, y, &weights)?;
        history.push(loss);
    }

    let final_grad_norm = inf_norm(&grad_w, grad_b);
    if let Some(st) = &standardizer {
        st.unfold(&mut w, &mut b);
    }
    Ok(ProbeModel {
        weights: w,
        bias: b,
        converged,
        iterations_used: iterations,
        final_grad_norm,
        loss_history: history,
    })
}

/// 1 where `w.x + b > 0`, else 0.
pub fn predict(m: &ProbeModel, x: &[f64]) -> Result<Vec<u8>> {
    let d = m.weights.len();
    if d == 0 || !x.len().is_multiple_of(d) {
        return Err(Error::InvalidArgument(format!(
            "feature buffer of {} values does not match model dimension {d}",
            x.len()
        )));
    }
    Ok(x.chunks_exact(d)
        .map(|row| {
            let margin: f64 = row.iter().zip(&m.weights).map(|(a, c)| a * c).sum::<f64>() + m.bias;
            (margin > 0.0) as u8
        })
        .collect())
}
