use super::Objective;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    Analytic,
    CentralDiff,
}

/// Central-difference gradient with per-coordinate step `step · max(1, |xᵢ|)`.
pub fn central_difference<F>(f: F, x: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = step * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::Numeric(format!(
                "objective not finite when perturbing coordinate {i}"
            )));
        }
        // Divide by the realised step, not the nominal one.
        let realised = (x[i] + h) - (x[i] - h);
        grad.push((fp - fm) / realised);
    }
    Ok(grad)
}

/// Gradient of `obj` at `x` by the requested route.
pub fn gradient<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    mode: GradientMode,
    step: f64,
) -> Result<Vec<f64>> {
    match mode {
        GradientMode::Analytic => {
            let (_, g) = obj.value_and_gradient(x);
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "gradient coordinate {i} is {}",
                    g[i]
                )));
            }
            Ok(g)
        }
        GradientMode::CentralDiff => central_difference(|p| obj.value(p), x, step),
    }
}
