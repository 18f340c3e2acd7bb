//! Central-difference gradient checking against the tape.

use crate::parallel;

/// Central finite differences of `f` at `x`, restricted to `indices`.
/// Each probe re-evaluates `f` twice on a perturbed copy of `x`.
pub fn central_diff<F>(f: F, x: &[f64], indices: &[usize], step: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    parallel::map_indexed(indices.len(), |j| {
        let i = indices[j];
        let mut xp = x.to_vec();
        xp[i] = x[i] + step;
        let fp = f(&xp);
        xp[i] = x[i] - step;
        let fm = f(&xp);
        (fp - fm) / (2.0 * step)
    })
}

/// Guarded relative error: |a - n| / max(|a|, |n|, 1e-6). The floor keeps
/// genuinely-zero gradients from dividing by finite-difference noise while
/// still flagging wrongly-scaled small gradients.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}
