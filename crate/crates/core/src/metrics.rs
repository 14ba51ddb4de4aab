//! F1, F1 selectivity, supercategory dominance and the correlation between
//! selectivity and dominance across attributes.

use serde::{Deserialize, Serialize};

use crate::dataset::SupercategoryMap;
use crate::error::{Error, Result};

pub fn f1_score(y_true: &[u8], y_pred: &[u8]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::InvalidArgument("f1 of an empty set".into()));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (1, 0) => fneg += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fneg;
    Ok(if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    })
}

/// Which random predictor defines the selectivity baseline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMode {
    /// Predicts positive at the test positive rate: precision = recall = p.
    #[default]
    PriorMatched,
    /// Predicts positive with probability 1/2: precision p, recall 1/2.
    CoinFlip,
}

pub fn baseline_f1(test_pos_rate: f64, mode: BaselineMode) -> f64 {
    let p = test_pos_rate;
    if p <= 0.0 {
        return 0.0;
    }
    match mode {
        BaselineMode::PriorMatched => p,
        BaselineMode::CoinFlip => p / (p + 0.5),
    }
}

/// Largest share of `positives` that falls in a single supercategory.
pub fn supercategory_dominance(positives: &[usize], sm: &SupercategoryMap) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::InvalidArgument("dominance of an empty positive set".into()));
    }
    let mut counts = vec![0usize; sm.n_supercategories()];
    for &c in positives {
        if c >= sm.assignment().len() {
            return Err(Error::InvalidArgument(format!("concept {c} outside supercategory map")));
        }
        counts[sm.of(c)] += 1;
    }
    let best = counts.into_iter().max().unwrap_or(0);
    Ok(best as f64 / positives.len() as f64)
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("pearson needs at least 2 points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Numerical("pearson undefined: zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Probe outcome for one attribute, evaluated on its test side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeResult {
    pub attribute_id: usize,
    pub attribute: String,
    pub f1: f64,
    pub baseline_f1: f64,
    pub f1_selectivity: f64,
    /// `None` when no supercategory map was supplied.
    pub dominance: Option<f64>,
    pub test_pos_rate: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl AttributeResult {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        attribute_id: usize,
        attribute: String,
        f1: f64,
        test_pos_rate: f64,
        mode: BaselineMode,
        dominance: Option<f64>,
        train_size: usize,
        test_size: usize,
        converged: bool,
        iterations: usize,
    ) -> Self {
        let baseline = baseline_f1(test_pos_rate, mode);
        Self {
            attribute_id,
            attribute,
            f1,
            baseline_f1: baseline,
            f1_selectivity: f1 - baseline,
            dominance,
            test_pos_rate,
            train_size,
            test_size,
            converged,
            iterations,
        }
    }
}

/// Pearson correlation between selectivity and dominance over the given
/// (feasible) attributes, in attribute-id order.
pub fn cs_score(results: &[AttributeResult]) -> Result<f64> {
    let mut usable: Vec<&AttributeResult> = results.iter().filter(|r| r.dominance.is_some()).collect();
    usable.sort_by_key(|r| r.attribute_id);
    if usable.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "CS needs at least 2 attributes with a dominance value, got {}",
            usable.len()
        )));
    }
    let sel: Vec<f64> = usable.iter().map(|r| r.f1_selectivity).collect();
    let dom: Vec<f64> = usable.iter().map(|r| r.dominance.unwrap()).collect();
    pearson(&sel, &dom)
}

pub fn mean_selectivity(results: &[AttributeResult]) -> Option<f64> {
    if results.is_empty() {
        return None;
    }
    let mut ordered: Vec<&AttributeResult> = results.iter().collect();
    ordered.sort_by_key(|r| r.attribute_id);
    Some(ordered.iter().map(|r| r.f1_selectivity).sum::<f64>() / ordered.len() as f64)
}
