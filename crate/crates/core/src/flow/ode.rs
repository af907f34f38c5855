//! Dormand–Prince 5(4) with step-size control.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
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
/// Fifth-order weights (equal to the last row of `A`).
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

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

/// One step of size `h` (may be negative). Returns the fifth-order solution
/// and the embedded error estimate.
pub fn dp45_step<const N: usize, F>(
    f: &mut F,
    t: f64,
    y: &[f64; N],
    h: f64,
) -> Result<([f64; N], [f64; N])>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let mut k = [[0.0; N]; 7];
    for s in 0..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            for i in 0..N {
                ys[i] += h * A[s][j] * kj[i];
            }
        }
        k[s] = f(t + C[s] * h, &ys)?;
    }
    let mut y5 = *y;
    let mut err = [0.0; N];
    for s in 0..7 {
        for i in 0..N {
            y5[i] += h * B5[s] * k[s][i];
            err[i] += h * (B5[s] - B4[s]) * k[s][i];
        }
    }
    Ok((y5, err))
}

/// RMS error norm scaled by `atol + rtol max(|y|, |y_new|)`.
pub fn error_norm<const N: usize>(
    y: &[f64; N],
    y_new: &[f64; N],
    err: &[f64; N],
    tol: Tolerances,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
        acc += (err[i] / sc).powi(2);
    }
    (acc / N as f64).sqrt()
}

/// Result of one accepted adaptive step.
#[derive(Clone, Copy, Debug)]
pub struct Accepted<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub h_used: f64,
    pub h_next: f64,
    pub rejected: usize,
}

/// Attempts steps from `(t, y)` starting at `h` until one is accepted.
/// `h` carries the direction of integration; `h_max` bounds `|h|`.
pub fn adaptive_step<const N: usize, F>(
    f: &mut F,
    t: f64,
    y: &[f64; N],
    mut h: f64,
    h_max: f64,
    tol: Tolerances,
) -> Result<Accepted<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let mut rejected = 0;
    let dir = h.signum();
    loop {
        if h.abs() > h_max {
            h = dir * h_max;
        }
        if h.abs() <= 1e-15 * t.abs().max(1e-300) || h.abs() < 1e-300 {
            return Err(Error::Integration {
                t,
                u: y[0],
                message: format!("step size underflow (h = {h:e})"),
            });
        }
        let (y_new, err) = match dp45_step(f, t, y, h) {
            Ok(v) => v,
            Err(_) => {
                // Stage left the domain of the right-hand side.
                rejected += 1;
                h *= 0.25;
                continue;
            }
        };
        let e = error_norm(y, &y_new, &err, tol);
        if !e.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            rejected += 1;
            h *= 0.25;
            continue;
        }
        // Order-5 controller with safety factor 0.9 and growth in [0.2, 5].
        let factor = if e == 0.0 {
            5.0
        } else {
            (0.9 * e.powf(-0.2)).clamp(0.2, 5.0)
        };
        if e <= 1.0 {
            return Ok(Accepted {
                t: t + h,
                y: y_new,
                h_used: h,
                h_next: h * factor,
                rejected,
            });
        }
        rejected += 1;
        h *= factor.min(0.9);
    }
}

/// Integrates from `t0` to `t1` (either direction) and returns `y(t1)`.
pub fn integrate_to<const N: usize, F>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    tol: Tolerances,
) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y0);
    }
    let (mut t, mut y) = (t0, y0);
    let mut h = span * 1e-3;
    for _ in 0..1_000_000 {
        let remaining = t1 - t;
        if remaining.abs() <= 1e-15 * span.abs() {
            return Ok(y);
        }
        if h.abs() >= remaining.abs() {
            h = remaining;
        }
        let step = adaptive_step(&mut f, t, &y, h, remaining.abs(), tol)?;
        t = if (step.h_used - remaining).abs() == 0.0 {
            t1
        } else {
            step.t
        };
        y = step.y;
        h = step.h_next;
    }
    Err(Error::Integration {
        t,
        u: y[0],
        message: "step budget exhausted".into(),
    })
}
