//! Embedded adaptive Runge–Kutta integration (Dormand–Prince 5(4)).
//!
//! Used for the moment ODEs of the linear noise approximation. The
//! integrator is deterministic: the accepted step sequence depends only on
//! the initial condition, the right-hand side and the tolerances.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Tolerances and budgets for one integration call.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    /// Relative tolerance of the embedded error estimate.
    pub rtol: f64,
    /// Absolute tolerance of the embedded error estimate.
    pub atol: f64,
    /// Hard cap on accepted + rejected steps per call.
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-6,
            atol: 1e-8,
            max_steps: 100_000,
        }
    }
}

impl OdeOptions {
    pub fn with_rtol(rtol: f64) -> Self {
        OdeOptions {
            rtol,
            ..OdeOptions::default()
        }
    }
}

// Dormand-Prince coefficients (7 stages, FSAL).
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order solution weights equal the last row of A (FSAL).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate dy/dt = f(t, y) from `t0` to `t1` and return y(t1).
///
/// `f` writes the derivative into its third argument. A non-finite
/// derivative or state is treated as a failed step and the step size is
/// reduced; persistent failure surfaces as [`Error::OdeStepUnderflow`].
pub fn integrate<F>(mut f: F, t0: f64, t1: f64, y0: DVector<f64>, opts: &OdeOptions) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>, &mut DVector<f64>),
{
    let span = t1 - t0;
    if span <= 0.0 {
        if span == 0.0 {
            return Ok(y0);
        }
        return Err(Error::invalid("ode: t1 must be >= t0"));
    }
    let dim = y0.len();
    let mut t = t0;
    let mut y = y0;
    let mut k: Vec<DVector<f64>> = (0..7).map(|_| DVector::zeros(dim)).collect();
    let mut ytmp = DVector::zeros(dim);
    let mut ynew = DVector::zeros(dim);

    f(t, &y, &mut k[0]);
    let mut h = (span / 100.0).min(span);
    let h_min = span * 1e-14;
    let mut steps = 0usize;

    while t < t1 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::OdeMaxSteps {
                t,
                max_steps: opts.max_steps,
            });
        }
        if h < h_min {
            return Err(Error::OdeStepUnderflow { t });
        }
        if t + h > t1 {
            h = t1 - t;
        }

        for s in 1..7 {
            ytmp.copy_from(&y);
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    ytmp.axpy(a * h, kj, 1.0);
                }
            }
            let (_before, rest) = k.split_at_mut(s);
            f(t + C[s] * h, &ytmp, &mut rest[0]);
        }

        ynew.copy_from(&y);
        for (j, kj) in k.iter().enumerate() {
            if B5[j] != 0.0 {
                ynew.axpy(B5[j] * h, kj, 1.0);
            }
        }

        // Scaled RMS norm of the embedded error.
        let mut err_sq = 0.0;
        let mut finite = ynew.iter().all(|v| v.is_finite());
        if finite {
            for i in 0..dim {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += (B5[j] - B4[j]) * kj[i];
                }
                e *= h;
                let scale = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
                let r = e / scale;
                if !r.is_finite() {
                    finite = false;
                    break;
                }
                err_sq += r * r;
            }
        }
        let err = if finite {
            (err_sq / dim as f64).sqrt()
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            t += h;
            std::mem::swap(&mut y, &mut ynew);
            k.swap(0, 6); // FSAL: last stage is the derivative at the new point
            let grow = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= grow;
        } else {
            // Rejected: k[0] still holds f(t, y), no recompute needed.
            let shrink = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= shrink;
        }
    }
    Ok(y)
}
