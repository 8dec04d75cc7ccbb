//! Generalization bound terms: the IPS bound with its propensity bias and
//! variance terms, and the propensity-independent bound of tri-training.

use crate::domain::{check_shape, DenseMatrix, Predictor, PseudoLabeledSet, RatingDataset};
use crate::error::{Error, Result};
use crate::loss::{ideal_loss, ips_loss, pseudo_loss, PointwiseLoss};
use crate::scalar::{CompensatedSum, Scalar};

/// Terms of the propensity-independent bound
/// `lhs <= (a) + bias + (b) + (c) + complexity`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundReport<F> {
    /// Loss of `A3` against the pseudo-labels.
    pub term_a: F,
    /// Full-grid loss between `A1` and `A2`.
    pub term_b: F,
    pub complexity: F,
    /// Ideal loss of `A2`; needs the truth.
    pub term_c: Option<F>,
    /// Full-grid loss between `A3` and `A1` minus `term_a`; needs the truth.
    pub bias: Option<F>,
    /// Ideal loss of `A3`.
    pub lhs: Option<F>,
    pub rhs: Option<F>,
    pub holds: Option<bool>,
}

/// Terms of the IPS bound `lhs <= ips + bias + variance`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IpsBoundReport<F> {
    pub ips: F,
    pub bias: F,
    pub variance: F,
    pub rhs: F,
    pub lhs: Option<F>,
    pub holds: Option<bool>,
}

fn confidence_log<F: Scalar>(hypotheses: usize, delta: f64) -> Result<F> {
    if hypotheses == 0 {
        return Err(Error::invalid("hypothesis count must be at least 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!(
            "confidence delta {delta} outside (0, 1)"
        )));
    }
    Ok(F::lit((2.0 * hypotheses as f64 / delta).ln()))
}

/// `(delta_loss / |D~|) * sqrt(|D| / 2 * ln(2|H| / delta))`.
pub fn complexity_term<F: Scalar>(
    delta_loss: F,
    pseudo_size: usize,
    grid_size: usize,
    hypotheses: usize,
    delta: f64,
) -> Result<F> {
    if pseudo_size == 0 {
        return Err(Error::empty("pseudo-labeled set"));
    }
    let log = confidence_log::<F>(hypotheses, delta)?;
    Ok(delta_loss / F::from_usize_lossy(pseudo_size)
        * (F::from_usize_lossy(grid_size) / F::lit(2.0) * log).sqrt())
}

#[allow(clippy::too_many_arguments)]
pub fn bound_terms<F: Scalar>(
    a1: &(impl Predictor<F> + ?Sized),
    a2: &(impl Predictor<F> + ?Sized),
    a3: &(impl Predictor<F> + ?Sized),
    pseudo: &PseudoLabeledSet<F>,
    loss: &PointwiseLoss<F>,
    hypotheses: usize,
    delta: f64,
    truth: Option<&DenseMatrix<F>>,
) -> Result<BoundReport<F>> {
    if !loss.satisfies_triangle() {
        return Err(Error::InvalidLoss);
    }
    let (m, n) = (a1.n_users(), a1.n_items());
    check_shape(a2, m, n)?;
    check_shape(a3, m, n)?;
    let term_a = pseudo_loss(a3, pseudo, loss)?;
    let term_b = ideal_loss(a1, a2, loss)?;
    let complexity = complexity_term(loss.delta, pseudo.len(), m * n, hypotheses, delta)?;
    let mut report = BoundReport {
        term_a,
        term_b,
        complexity,
        term_c: None,
        bias: None,
        lhs: None,
        rhs: None,
        holds: None,
    };
    if let Some(truth) = truth {
        check_shape(truth, m, n)?;
        let term_c = ideal_loss(a2, truth, loss)?;
        let bias = ideal_loss(a3, a1, loss)? - term_a;
        let lhs = ideal_loss(a3, truth, loss)?;
        let rhs = term_a + bias + term_b + term_c + complexity;
        report.term_c = Some(term_c);
        report.bias = Some(bias);
        report.lhs = Some(lhs);
        report.rhs = Some(rhs);
        report.holds = Some(lhs <= rhs);
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
pub fn ips_bound<F: Scalar>(
    pred: &(impl Predictor<F> + ?Sized),
    observed: &RatingDataset,
    estimated: &DenseMatrix<F>,
    true_propensity: &DenseMatrix<F>,
    loss: &PointwiseLoss<F>,
    hypotheses: usize,
    delta: f64,
    truth: Option<&DenseMatrix<F>>,
) -> Result<IpsBoundReport<F>> {
    let (m, n) = (observed.n_users(), observed.n_items());
    check_shape(estimated, m, n)?;
    check_shape(true_propensity, m, n)?;
    if let Some(k) = estimated.values().iter().position(|&p| !(p > F::zero())) {
        return Err(Error::invalid(format!(
            "estimated propensity at ({}, {}) is not positive",
            k / n,
            k % n
        )));
    }
    let log = confidence_log::<F>(hypotheses, delta)?;
    let scale = loss.delta / F::from_usize_lossy(m * n);
    let mut bias_sum = CompensatedSum::new();
    let mut inv_sq = CompensatedSum::new();
    for (&ph, &p) in estimated.values().iter().zip(true_propensity.values()) {
        bias_sum.add((F::one() - p / ph).abs());
        inv_sq.add(F::one() / (ph * ph));
    }
    let bias = scale * bias_sum.total();
    let variance = scale * (log / F::lit(2.0)).sqrt() * inv_sq.total().sqrt();
    let ips = ips_loss(pred, observed, estimated, loss)?;
    let rhs = ips + bias + variance;
    let lhs = truth.map(|t| ideal_loss(pred, t, loss)).transpose()?;
    Ok(IpsBoundReport {
        ips,
        bias,
        variance,
        rhs,
        lhs,
        holds: lhs.map(|l| l <= rhs),
    })
}
