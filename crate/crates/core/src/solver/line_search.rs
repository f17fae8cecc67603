//! Strong Wolfe line search: bracketing followed by zoom with cubic
//! interpolation (Nocedal & Wright, algorithms 3.5 and 3.6).

use super::Objective;
use crate::error::{Error, Result};

pub(crate) const MAX_BRACKET_STEPS: usize = 40;
const MAX_ZOOM_STEPS: usize = 40;
const MAX_STEP: f64 = 1e10;
/// Relative size of rounding noise assumed in f.
pub(crate) const ROUNDING: f64 = 1e-12;

/// A trial point along the search direction.
#[derive(Debug, Clone)]
pub(crate) struct Trial {
    pub alpha: f64,
    pub f: f64,
    /// Directional derivative ∇f(x + αp)ᵀp.
    pub slope: f64,
    pub x: Vec<f64>,
    pub grad: Vec<f64>,
}

pub(crate) enum Search {
    /// The flag is set when sufficient decrease was judged by slopes.
    Accepted(Trial, bool),
    Failed,
}

/// Sufficient-decrease test along the line.
///
/// Once the predicted decrease `c1 α φ'(0)` is below rounding of `f`, the
/// Armijo test compares noise. There the derivative form
/// `φ'(α) ≤ (2c1 − 1) φ'(0)` with `φ(α) ≤ φ(0) + ε|φ(0)|` is used instead
/// (Hager and Zhang's approximate Wolfe condition, with ε at rounding
/// level), which is exact for quadratics.
struct Decrease {
    f0: f64,
    slope0: f64,
    c1: f64,
}

impl Decrease {
    fn test(&self, t: &Trial) -> Option<bool> {
        let predicted = self.c1 * t.alpha * self.slope0;
        let noise = ROUNDING * self.f0.abs();
        if -predicted > noise {
            return (t.f <= self.f0 + predicted).then_some(false);
        }
        (t.f <= self.f0 + noise && t.slope <= (2.0 * self.c1 - 1.0) * self.slope0).then_some(true)
    }
}

struct Line<'a, O: Objective + ?Sized> {
    obj: &'a O,
    x: &'a [f64],
    dir: &'a [f64],
    evaluations: usize,
}

impl<O: Objective + ?Sized> Line<'_, O> {
    fn eval(&mut self, alpha: f64) -> Result<Trial> {
        let x: Vec<f64> = self
            .x
            .iter()
            .zip(self.dir)
            .map(|(xi, pi)| xi + alpha * pi)
            .collect();
        let (f, grad) = self.obj.value_and_gradient(&x);
        self.evaluations += 1;
        if !f.is_finite() {
            return Err(Error::Numeric(format!(
                "objective is {f} at step length {alpha:e} during line search"
            )));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!(
                "gradient coordinate {i} is {} at step length {alpha:e}",
                grad[i]
            )));
        }
        let slope = grad.iter().zip(self.dir).map(|(g, p)| g * p).sum();
        Ok(Trial {
            alpha,
            f,
            slope,
            x,
            grad,
        })
    }
}

/// Minimiser of the cubic interpolating (f, f') at `a` and `b`, or `None`
/// when the interpolant has no usable minimiser.
fn cubic_minimizer(a: &Trial, b: &Trial) -> Option<f64> {
    let d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let denom = b.slope - a.slope + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
    t.is_finite().then_some(t)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn strong_wolfe<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    dir: &[f64],
    alpha_init: f64,
    c1: f64,
    c2: f64,
) -> Result<(Search, usize)> {
    let slope0: f64 = g0.iter().zip(dir).map(|(g, p)| g * p).sum();
    if !(slope0 < 0.0) {
        return Ok((Search::Failed, 0));
    }
    let mut line = Line {
        obj,
        x,
        dir,
        evaluations: 0,
    };
    let origin = Trial {
        alpha: 0.0,
        f: f0,
        slope: slope0,
        x: x.to_vec(),
        grad: g0.to_vec(),
    };
    let dec = Decrease { f0, slope0, c1 };
    let curvature = |t: &Trial| t.slope.abs() <= -c2 * slope0;

    let mut prev = origin;
    let mut alpha = alpha_init;
    for i in 0..MAX_BRACKET_STEPS {
        let cur = line.eval(alpha)?;
        let approx = match dec.test(&cur) {
            Some(a) if a || !(i > 0 && cur.f >= prev.f) => a,
            _ => {
                let res = zoom(&mut line, prev, cur, &dec, c2)?;
                return Ok((res, line.evaluations));
            }
        };
        if curvature(&cur) {
            return Ok((Search::Accepted(cur, approx), line.evaluations));
        }
        if cur.slope >= 0.0 {
            let res = zoom(&mut line, cur, prev, &dec, c2)?;
            return Ok((res, line.evaluations));
        }
        // Extrapolate, staying within [2α, 10α].
        let next = cubic_minimizer(&prev, &cur)
            .filter(|t| *t > cur.alpha)
            .map_or(4.0 * cur.alpha, |t| {
                t.clamp(2.0 * cur.alpha, 10.0 * cur.alpha)
            });
        if next > MAX_STEP {
            break;
        }
        prev = cur;
        alpha = next;
    }
    Ok((Search::Failed, line.evaluations))
}

fn zoom<O: Objective + ?Sized>(
    line: &mut Line<'_, O>,
    mut lo: Trial,
    mut hi: Trial,
    dec: &Decrease,
    c2: f64,
) -> Result<Search> {
    for _ in 0..MAX_ZOOM_STEPS {
        let (left, right) = if lo.alpha < hi.alpha {
            (lo.alpha, hi.alpha)
        } else {
            (hi.alpha, lo.alpha)
        };
        let width = right - left;
        if width <= f64::EPSILON * right.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        // Keep the trial inside the middle 80% of the bracket.
        let guard = 0.1 * width;
        let alpha = cubic_minimizer(&lo, &hi).map_or(0.5 * (left + right), |t| {
            t.clamp(left + guard, right - guard)
        });
        let cur = line.eval(alpha)?;
        let approx = dec.test(&cur);
        // In the rounding regime f comparisons are noise; slopes decide.
        let worse = match approx {
            None => true,
            Some(true) => false,
            Some(false) => cur.f >= lo.f,
        };
        if worse {
            hi = cur;
        } else {
            if cur.slope.abs() <= -c2 * dec.slope0 {
                return Ok(Search::Accepted(cur, approx == Some(true)));
            }
            if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    Ok(Search::Failed)
}
