//! Central-finite-difference verification of analytic gradients.
//!
//! The harness re-runs the forward pass with perturbed leaf values and
//! never touches the backward machinery it checks, so it stays an
//! independent oracle for every differentiable operation and encoder.

use crate::error::Result;
use crate::tensor::Tensor;

/// Outcome of a gradient check over one set of leaves.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Largest relative error across all checked coordinates.
    pub max_rel_err: f64,
    /// Name/shape of the leaf holding the worst coordinate.
    pub worst_leaf: usize,
    pub coords_checked: usize,
}

/// Relative error with the denominator floored at `floor` so that
/// near-zero derivative pairs do not blow up the ratio.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Check the analytic gradient of `forward` (a scalar-valued graph over
/// the given `f64` leaves) against central finite differences with step
/// `eps`. Every coordinate of every leaf is perturbed.
pub fn check_gradients<F>(leaves: &[Tensor<f64>], forward: F, eps: f64) -> Result<GradCheckReport>
where
    F: Fn() -> Result<Tensor<f64>>,
{
    for leaf in leaves {
        leaf.zero_grad();
    }
    let loss = forward()?;
    loss.backward()?;
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .map(|l| l.grad().unwrap_or_else(|| vec![0.0; l.len()]))
        .collect();

    let mut max_rel_err: f64 = 0.0;
    let mut worst_leaf = 0;
    let mut coords = 0;
    for (li, leaf) in leaves.iter().enumerate() {
        let base = leaf.to_vec();
        for i in 0..base.len() {
            let mut plus = base.clone();
            plus[i] += eps;
            leaf.set_values(&plus)?;
            let f_plus = forward()?.item();

            let mut minus = base.clone();
            minus[i] -= eps;
            leaf.set_values(&minus)?;
            let f_minus = forward()?.item();

            leaf.set_values(&base)?;
            let numeric = (f_plus - f_minus) / (2.0 * eps);
            let err = rel_err(analytic[li][i], numeric, 1e-4);
            if err > max_rel_err {
                max_rel_err = err;
                worst_leaf = li;
            }
            coords += 1;
        }
    }
    for leaf in leaves {
        leaf.zero_grad();
    }
    Ok(GradCheckReport {
        max_rel_err,
        worst_leaf,
        coords_checked: coords,
    })
}
