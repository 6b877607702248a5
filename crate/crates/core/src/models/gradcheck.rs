//! Central finite-difference verification of gradient oracles.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::rng::Rng;

/// Denominator floor of the relative error.
pub const ABS_FLOOR: f64 = 1e-8;

/// Worst relative error `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`
/// over all coordinates, using central differences with `step`.
///
/// `point` must lie at least `step` inside the unit box so that every probe
/// stays in the oracle's domain.
pub fn grad_check<O: Objective + ?Sized>(objective: &O, point: &[f64], step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::range("finite-difference step", step, "(0, inf)"));
    }
    for (index, &value) in point.iter().enumerate() {
        if value < step || value > 1.0 - step {
            return Err(Error::Margin { index, value, step });
        }
    }
    let (_, analytic) = objective.value_and_gradient(point)?;
    let numeric = central_differences(objective, point, step)?;
    Ok(worst_relative_error(&analytic, &numeric))
}

/// Per-coordinate central differences of the objective value.
pub fn central_differences<O: Objective + ?Sized>(objective: &O, point: &[f64], step: f64) -> Result<Vec<f64>> {
    let mut probe = point.to_vec();
    (0..point.len())
        .map(|i| {
            probe[i] = point[i] + step;
            let up = objective.value(&probe)?;
            probe[i] = point[i] - step;
            let down = objective.value(&probe)?;
            probe[i] = point[i];
            Ok((up - down) / (2.0 * step))
        })
        .collect()
}

pub fn worst_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(ABS_FLOOR))
        .fold(0.0, f64::max)
}

/// A uniformly random point of `[margin, 1 - margin]^n`.
pub fn random_interior_point(n: usize, margin: f64, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(margin..=1.0 - margin)).collect()
}

/// Worst error of [`grad_check`] over `points` random interior points.
pub fn grad_check_random<O: Objective + ?Sized>(objective: &O, points: usize, step: f64, rng: &mut Rng) -> Result<f64> {
    // Keep probes a full step away from the boundary.
    let margin = 2.0 * step;
    let mut worst = 0.0f64;
    for _ in 0..points {
        let p = random_interior_point(objective.dim(), margin, rng);
        worst = worst.max(grad_check(objective, &p, step)?);
    }
    Ok(worst)
}

/// Step divisions tried by [`grad_check_refined`] after the first step.
pub const REFINEMENTS: usize = 2;

/// Outcome of a step-refined check at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinedCheck {
    /// Worst coordinate error, each coordinate at its best step.
    pub error: f64,
    /// Smallest step that was needed.
    pub step: f64,
}

/// [`grad_check`] at `step`, with the coordinates still above `tolerance`
/// re-differenced at `step / 10` and then `step / 100`.
///
/// Piecewise-smooth objectives (ReLU networks) have kinks; a central
/// difference whose window straddles one disagrees with the one-sided
/// gradient even when the oracle is exact. The chance of straddling a kink
/// shrinks with the window, while a wrong gradient fails at every step. A
/// point that sits on a kink itself is differentiable only one-sidedly, so
/// refined steps also accept agreement with the forward or the backward
/// difference; a wrong gradient disagrees with all three.
pub fn grad_check_refined<O: Objective + ?Sized>(
    objective: &O,
    point: &[f64],
    step: f64,
    tolerance: f64,
) -> Result<RefinedCheck> {
    let (center, analytic) = objective.value_and_gradient(point)?;
    let first = grad_check(objective, point, step)?;
    if first <= tolerance {
        return Ok(RefinedCheck { error: first, step });
    }
    let numeric = central_differences(objective, point, step)?;
    let mut errors: Vec<f64> = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| worst_relative_error(&[a], &[n]))
        .collect();
    let mut probe = point.to_vec();
    let mut h = step;
    for _ in 0..REFINEMENTS {
        h /= 10.0;
        for i in 0..point.len() {
            if errors[i] <= tolerance {
                continue;
            }
            probe[i] = point[i] + h;
            let up = objective.value(&probe)?;
            probe[i] = point[i] - h;
            let down = objective.value(&probe)?;
            probe[i] = point[i];
            let a = [analytic[i]];
            let e = [(up - down) / (2.0 * h), (up - center) / h, (center - down) / h]
                .iter()
                .map(|&n| worst_relative_error(&a, &[n]))
                .fold(f64::INFINITY, f64::min);
            errors[i] = errors[i].min(e);
        }
        if errors.iter().all(|&e| e <= tolerance) {
            break;
        }
    }
    Ok(RefinedCheck {
        error: errors.into_iter().fold(0.0, f64::max),
        step: h,
    })
}
