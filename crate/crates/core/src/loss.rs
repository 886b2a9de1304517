//! Triplet hinge loss over embedded outputs and its analytic gradient
//! with respect to the projection head.

use crate::error::{Error, Result};
use crate::head::{Activation, ProjectionHead, NORM_EPS};

pub const DEFAULT_MARGIN: f64 = 0.05;

/// Parameter-shaped gradient of a projection head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl HeadGradient {
    pub fn zeros_like(head: &ProjectionHead) -> Self {
        Self {
            weights: vec![0.0; head.weights.len()],
            bias: vec![0.0; head.bias.len()],
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.weights.iter_mut().chain(&mut self.bias).for_each(|g| *g *= k);
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|&g| g == 0.0)
    }

    /// Weights then bias, matching the head's parameter layout.
    pub fn flat(&self) -> Vec<f64> {
        self.weights.iter().chain(&self.bias).copied().collect()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `max(0, |a - p| - |a - n| + alpha)`.
pub fn triplet_loss(anchor: &[f64], positive: &[f64], negative: &[f64], alpha: f64) -> Result<f64> {
    let d = anchor.len();
    for v in [positive, negative] {
        if v.len() != d {
            return Err(Error::Dimension {
                expected: d,
                actual: v.len(),
            });
        }
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::validation(format!("margin must be positive, got {alpha}")));
    }
    if anchor.iter().chain(positive).chain(negative).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("triplet embeddings"));
    }
    Ok((dist(anchor, positive) - dist(anchor, negative) + alpha).max(0.0))
}

/// Loss of one triplet of raw base vectors pushed through `head`, plus its gradient.
pub fn triplet_loss_gradient(
    head: &ProjectionHead,
    anchor: &[f64],
    positive: &[f64],
    negative: &[f64],
    alpha: f64,
) -> Result<(f64, HeadGradient)> {
    for v in [anchor, positive, negative] {
        if v.len() != head.d_in() {
            return Err(Error::Dimension {
                expected: head.d_in(),
                actual: v.len(),
            });
        }
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::validation(format!("margin must be positive, got {alpha}")));
    }
    let mut grad = HeadGradient::zeros_like(head);
    let loss = accumulate(head, anchor, positive, negative, alpha, &mut grad);
    if !loss.is_finite() {
        return Err(Error::NonFinite("triplet loss"));
    }
    Ok((loss, grad))
}

/// Adds this triplet's gradient into `grad` and returns its loss.
///
/// Inputs must already be dimension-checked. The hinge counts as inactive at
/// exactly zero slack, and distances are differentiated as `sqrt(|u|^2 + eps)`.
pub(crate) fn accumulate(
    head: &ProjectionHead,
    anchor: &[f64],
    positive: &[f64],
    negative: &[f64],
    alpha: f64,
    grad: &mut HeadGradient,
) -> f64 {
    let fa = head.activate(anchor);
    let fp = head.activate(positive);
    let fn_ = head.activate(negative);

    let slack = dist(&fa.out, &fp.out) - dist(&fa.out, &fn_.out) + alpha;
    if slack <= 0.0 {
        return 0.0;
    }

    let d = head.d_out();
    let ap: Vec<f64> = fa.out.iter().zip(&fp.out).map(|(a, p)| a - p).collect();
    let an: Vec<f64> = fa.out.iter().zip(&fn_.out).map(|(a, n)| a - n).collect();
    let dp = (ap.iter().map(|v| v * v).sum::<f64>() + NORM_EPS).sqrt();
    let dn = (an.iter().map(|v| v * v).sum::<f64>() + NORM_EPS).sqrt();

    let mut g_a = vec![0.0; d];
    let mut g_p = vec![0.0; d];
    let mut g_n = vec![0.0; d];
    for k in 0..d {
        g_p[k] = -ap[k] / dp;
        g_n[k] = an[k] / dn;
        g_a[k] = -g_p[k] - g_n[k];
    }

    for (act, x, g) in [(&fa, anchor, g_a), (&fp, positive, g_p), (&fn_, negative, g_n)] {
        let gz = back_through_norm(head, act, g);
        for (r, gr) in gz.iter().enumerate() {
            if *gr == 0.0 {
                continue;
            }
            grad.bias[r] += gr;
            let row = &mut grad.weights[r * head.d_in()..(r + 1) * head.d_in()];
            row.iter_mut().zip(x).for_each(|(w, xv)| *w += gr * xv);
        }
    }
    slack
}

/// Pulls an output-space gradient back through the optional normalization
/// `y = z / sqrt(|z|^2 + eps)`, whose Jacobian is `I/s - z z^T / s^3`.
fn back_through_norm(head: &ProjectionHead, act: &Activation, g: Vec<f64>) -> Vec<f64> {
    if !head.normalize_output {
        return g;
    }
    let s = act.scale;
    let zg: f64 = act.pre.iter().zip(&g).map(|(z, g)| z * g).sum();
    let k = zg / (s * s * s);
    g.iter().zip(&act.pre).map(|(g, z)| g / s - z * k).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng as _;

    #[test]
    fn coincident_points_cost_the_margin() {
        let v = [0.3, 0.4];
        assert_eq!(triplet_loss(&v, &v, &v, 0.05).unwrap(), 0.05);
    }

    #[test]
    fn satisfied_margin_is_zero() {
        let a = [0.0, 0.0];
        let p = [0.2, 0.0];
        let n = [0.0, 0.5];
        assert_eq!(triplet_loss(&a, &p, &n, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn loss_errors() {
        assert!(triplet_loss(&[0.0], &[0.0, 1.0], &[0.0], 0.05).is_err());
        assert!(triplet_loss(&[0.0], &[0.0], &[0.0], 0.0).is_err());
        assert!(matches!(
            triplet_loss(&[f64::NAN], &[0.0], &[0.0], 0.1),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn loss_matches_direct_formula() {
        let mut rng = seed::rng(13);
        for _ in 0..100 {
            let d = 1 + rng.random_range(0..16);
            let mut v = || (0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
            let (a, p, n) = (v(), v(), v());
            let mut sp = 0.0;
            let mut sn = 0.0;
            for i in 0..d {
                sp += (a[i] - p[i]).powi(2);
                sn += (a[i] - n[i]).powi(2);
            }
            let want = f64::max(0.0, sp.sqrt() - sn.sqrt() + 0.05);
            assert!((triplet_loss(&a, &p, &n, 0.05).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn inactive_hinge_has_zero_gradient() {
        let h = ProjectionHead::identity(2, false);
        let (loss, g) =
            triplet_loss_gradient(&h, &[0.0, 0.0], &[0.2, 0.0], &[0.0, 0.5], 0.05).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.is_zero());
    }

    #[test]
    fn coincident_embeddings_stay_finite() {
        let h = ProjectionHead::identity(3, true);
        let v = [0.1, 0.2, 0.3];
        let (loss, g) = triplet_loss_gradient(&h, &v, &v, &v, 0.05).unwrap();
        assert!((loss - 0.05).abs() < 1e-12);
        assert!(g.flat().iter().all(|x| x.is_finite()));
    }
}
