use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    /// Absolute tolerance on the maximizer.
    pub theta_tol: f64,
    pub max_iter: usize,
    /// Number of grid cells scanned before local refinement.
    pub multistart: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            theta_tol: 1e-8,
            max_iter: 200,
            multistart: 16,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_tol > 0.0 && self.theta_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "theta_tol must be positive, got {}",
                self.theta_tol
            )));
        }
        if self.multistart < 1 || self.max_iter < 1 {
            return Err(Error::InvalidArgument(
                "multistart and max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub argmax: f64,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Maximizes `g` on `[lo, hi]`.
///
/// A uniform grid of `multistart + 1` points picks the best cell; Brent's
/// parabolic/golden-section search then refines inside the two cells around
/// it. `-inf` (and NaN) values mark excluded points.
pub fn maximize_scalar<G: FnMut(f64) -> f64>(
    mut g: G,
    lo: f64,
    hi: f64,
    settings: &OptimizerSettings,
) -> Result<Maximum> {
    settings.validate()?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "maximize_scalar needs a finite interval with lo < hi, got [{lo}, {hi}]"
        )));
    }
    let mut eval = |x: f64| {
        let v = g(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };

    let m = settings.multistart;
    let step = (hi - lo) / m as f64;
    let grid: Vec<f64> = (0..=m)
        .map(|k| if k == m { hi } else { lo + k as f64 * step })
        .collect();
    let values: Vec<f64> = grid.iter().map(|&x| eval(x)).collect();
    let (best, best_value) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| {
            if v > acc.1 {
                (i, v)
            } else {
                acc
            }
        });
    if best_value == f64::NEG_INFINITY {
        return Err(Error::NoAdmissiblePoint);
    }

    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(m)];
    let (x, fx, converged, iterations) =
        brent_max(&mut eval, a, b, grid[best], best_value, settings);
    let (argmax, value) = if fx >= best_value {
        (x, fx)
    } else {
        (grid[best], best_value)
    };
    Ok(Maximum {
        argmax,
        value,
        converged,
        iterations,
    })
}

// Brent's localizer (Numerical Recipes `brent`), maximizing. `x0` is an
// interior starting point with known value `f0`.
fn brent_max<F: FnMut(f64) -> f64>(
    f: &mut F,
    mut a: f64,
    mut b: f64,
    x0: f64,
    f0: f64,
    settings: &OptimizerSettings,
) -> (f64, f64, bool, usize) {
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let sqrt_eps = f64::EPSILON.sqrt();
    let (mut x, mut w, mut v) = (x0, x0, x0);
    // work with -f so the textbook minimization reads unchanged
    let (mut fx, mut fw, mut fv) = (-f0, -f0, -f0);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for iter in 1..=settings.max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = sqrt_eps * x.abs() + settings.theta_tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return (x, -fx, true, iter - 1);
        }
        let mut golden = true;
        if e.abs() > tol1 && fx.is_finite() && fw.is_finite() && fv.is_finite() {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = -f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, -fx, false, settings.max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quadratic() {
        let m = maximize_scalar(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, &Default::default()).unwrap();
        assert!((m.argmax - 0.3).abs() <= 1e-8, "{m:?}");
        assert!(m.converged);
    }

    #[test]
    fn kink() {
        let m = maximize_scalar(|x: f64| -x.abs(), -0.5, 2.0, &Default::default()).unwrap();
        assert!(m.argmax.abs() <= 1e-8, "{m:?}");
    }

    #[test]
    fn boundary_maximum() {
        let m = maximize_scalar(|x| x, -1.0, 3.0, &Default::default()).unwrap();
        assert_eq!(m.argmax, 3.0);
    }

    #[test]
    fn sentinels_are_skipped() {
        let g = |x: f64| if x < 0.7 { f64::NEG_INFINITY } else { -(x - 0.9).powi(2) };
        let m = maximize_scalar(g, 0.0, 1.0, &Default::default()).unwrap();
        assert!((m.argmax - 0.9).abs() < 1e-7);
        let err = maximize_scalar(|_| f64::NEG_INFINITY, 0.0, 1.0, &Default::default());
        assert_eq!(err.unwrap_err(), Error::NoAdmissiblePoint);
    }

    #[test]
    fn invalid_inputs() {
        assert!(maximize_scalar(|x| x, 1.0, 1.0, &Default::default()).is_err());
        let bad = OptimizerSettings {
            multistart: 0,
            ..Default::default()
        };
        assert!(maximize_scalar(|x| x, 0.0, 1.0, &bad).is_err());
    }

    proptest! {
        #[test]
        fn shift_invariance(c in -10f64..10.0, peak in -0.4f64..1.9) {
            let s = OptimizerSettings::default();
            let g = |x: f64| -(x - peak).powi(2) - 0.1 * (x - peak).powi(4);
            let a = maximize_scalar(g, -0.5, 2.0, &s).unwrap();
            let b = maximize_scalar(|x| g(x) + c, -0.5, 2.0, &s).unwrap();
            prop_assert!((a.argmax - b.argmax).abs() <= 1e-7);
            prop_assert!((a.argmax - peak).abs() <= 1e-7);
        }
    }
}
