//! Central finite-difference check of the analytic triplet-loss gradient.
//!
//! The numerical side only uses `ProjectionHead::forward` and `triplet_loss`,
//! so it shares no code with the backpropagation path it checks.

use crate::error::Result;
use crate::head::ProjectionHead;
use crate::loss::{triplet_loss, triplet_loss_gradient};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub loss: f64,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub worst_param: usize,
}

/// Relative error between two derivative estimates. Components whose
/// magnitude is below `floor` are compared on the absolute scale of `floor`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn loss_at(head: &ProjectionHead, a: &[f64], p: &[f64], n: &[f64], alpha: f64) -> Result<f64> {
    triplet_loss(&head.forward(a)?, &head.forward(p)?, &head.forward(n)?, alpha)
}

fn param_mut(head: &mut ProjectionHead, i: usize, n_w: usize) -> &mut f64 {
    if i < n_w {
        &mut head.weights[i]
    } else {
        &mut head.bias[i - n_w]
    }
}

/// Compares every weight and bias derivative against `(L(θ+h) - L(θ-h)) / 2h`.
pub fn check_triplet_gradient(
    head: &ProjectionHead,
    anchor: &[f64],
    positive: &[f64],
    negative: &[f64],
    alpha: f64,
    step: f64,
    floor: f64,
) -> Result<GradCheck> {
    let (loss, grad) = triplet_loss_gradient(head, anchor, positive, negative, alpha)?;
    let analytic = grad.flat();
    let n_w = head.weights.len();
    let mut probe = head.clone();
    let mut report = GradCheck {
        loss,
        max_abs_error: 0.0,
        max_rel_error: 0.0,
        worst_param: 0,
    };
    for (i, &g) in analytic.iter().enumerate() {
        let orig = *param_mut(&mut probe, i, n_w);
        *param_mut(&mut probe, i, n_w) = orig + step;
        let up = loss_at(&probe, anchor, positive, negative, alpha)?;
        *param_mut(&mut probe, i, n_w) = orig - step;
        let down = loss_at(&probe, anchor, positive, negative, alpha)?;
        *param_mut(&mut probe, i, n_w) = orig;
        let numeric = (up - down) / (2.0 * step);
        let abs = (g - numeric).abs();
        let rel = relative_error(g, numeric, floor);
        report.max_abs_error = report.max_abs_error.max(abs);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_param = i;
        }
    }
    Ok(report)
}
