//! Radius ODE `du/dt = -H(u)` integrated in `s = u^2`, together with
//! `L' = -H^2` for the volume law.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::model::{focal_radius, SphereModel};
use super::ode::{adaptive_step, dp45_step, Tolerances};
use crate::algebra::PinchParams;
use crate::error::{Error, Result};

/// Below this `|H|` the initial sphere is treated as minimal.
pub const STATIONARY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepPolicy {
    pub rtol: f64,
    pub atol: f64,
    /// Extinction floor: the run stops when `u` reaches it.
    pub u_stop: f64,
    pub t_max: f64,
    pub max_steps: usize,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            u_stop: 1e-6,
            t_max: 100.0,
            max_steps: 1_000_000,
        }
    }
}

impl StepPolicy {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "{name} = {v} must be positive"
                )))
            }
        };
        positive("rtol", self.rtol)?;
        positive("atol", self.atol)?;
        positive("u_stop", self.u_stop)?;
        positive("t_max", self.t_max)?;
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be positive".into()));
        }
        Ok(())
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances {
            rtol: self.rtol,
            atol: self.atol,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// `u` reached `u_stop`.
    Extinct,
    /// `|H(u0)| < STATIONARY_TOL`.
    Stationary,
    /// `u` came within `u_stop` of the cut locus.
    Focal,
    MaxTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub t: f64,
    pub u: f64,
    pub h: f64,
    pub a2: f64,
    pub ao2: f64,
    pub q: f64,
    pub w: f64,
    pub f0: f64,
    /// `V(u)/V(u0)` from the closed-form area.
    pub vol_ratio: f64,
    /// `-int_0^t H^2`, integrated with the radius.
    pub neg_int_h2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub model: SphereModel,
    pub eps: f64,
    pub policy: StepPolicy,
    pub samples: Vec<FlowSample>,
    pub termination: Termination,
    /// Time at which `u = u_stop`.
    pub extinction_time: Option<f64>,
    /// `extinction_time + u_stop/(H(u_stop))`, from `s' ~ -2m` near zero.
    pub extinction_time_extrapolated: Option<f64>,
    pub stationary: bool,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

fn sample(model0: &SphereModel, params: &PinchParams, t: f64, u: f64, l: f64) -> FlowSample {
    let model = SphereModel {
        space: model0.space,
        u,
    };
    let s = model.scalars();
    let pq = model.pinch(params);
    FlowSample {
        t,
        u,
        h: s.h,
        a2: s.a2,
        ao2: s.ao2,
        q: pq.q,
        w: pq.w,
        f0: pq.f_sigma,
        vol_ratio: (model.log_volume() - model0.log_volume()).exp(),
        neg_int_h2: l,
    }
}

/// Integrates the flow starting from the sphere `model` until extinction,
/// the cut locus or `t_max`.
pub fn integrate(model: &SphereModel, eps: f64, policy: &StepPolicy) -> Result<Trajectory> {
    policy.validate()?;
    let model = SphereModel::new(model.space, model.u)?;
    let params = model.params(eps)?;
    let space = model.space;
    let m = model.m() as f64;
    let uf = focal_radius(&space);
    let mut traj = Trajectory {
        model,
        eps,
        policy: *policy,
        samples: vec![sample(&model, &params, 0.0, model.u, 0.0)],
        termination: Termination::MaxTime,
        extinction_time: None,
        extinction_time_extrapolated: None,
        stationary: false,
        accepted_steps: 0,
        rejected_steps: 0,
    };
    let h0 = model.scalars().h;
    if h0.abs() < STATIONARY_TOL {
        traj.samples.push(sample(
            &model,
            &params,
            policy.t_max,
            model.u,
            -h0 * h0 * policy.t_max,
        ));
        traj.termination = Termination::Stationary;
        traj.stationary = true;
        return Ok(traj);
    }
    let shrinking = h0 > 0.0;
    let u_focal = uf - policy.u_stop;
    if !shrinking && model.u >= u_focal {
        return Err(Error::InvalidArgument(format!(
            "u0 = {} is within u_stop of the cut locus",
            model.u
        )));
    }
    let s_stop = policy.u_stop * policy.u_stop;
    let mut rhs = |_t: f64, y: &[f64; 2]| -> Result<[f64; 2]> {
        let s = y[0];
        if !(s > 0.0) {
            return Err(Error::Integration {
                t: _t,
                u: 0.0,
                message: "radius left (0, uf)".into(),
            });
        }
        let u = s.sqrt();
        if u >= uf {
            return Err(Error::Integration {
                t: _t,
                u,
                message: "radius left (0, uf)".into(),
            });
        }
        let sm = SphereModel { space, u };
        let h = sm.scalars().h;
        Ok([-2.0 * sm.h_times_u(), -h * h])
    };
    // Event value; the run stops once it becomes nonpositive.
    let event = |y: &[f64; 2]| {
        if shrinking {
            y[0] - s_stop
        } else {
            u_focal - y[0].max(0.0).sqrt()
        }
    };
    let tol = policy.tolerances();
    let (mut t, mut y) = (0.0, [model.u * model.u, 0.0]);
    let mut h = 1e-3 * model.u * model.u / m;
    loop {
        if traj.accepted_steps >= policy.max_steps {
            return Err(Error::Integration {
                t,
                u: y[0].sqrt(),
                message: "step budget exhausted".into(),
            });
        }
        let u = y[0].sqrt();
        // Bounds on |s'| keep trial steps inside the domain.
        let h_dom = if shrinking {
            0.9 * y[0] / (2.0 * m)
        } else {
            0.45 * (uf - u).powi(2) / 3.0
        };
        let h_max = h_dom.min(policy.t_max - t);
        let step = adaptive_step(&mut rhs, t, &y, h.min(h_max), h_max, tol)?;
        traj.accepted_steps += 1;
        traj.rejected_steps += step.rejected;
        if event(&step.y) <= 0.0 {
            // Locate the crossing by bisection on the step length.
            let (mut lo, mut hi) = (0.0, step.h_used);
            let mut y_hi = step.y;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let (ym, _) = dp45_step(&mut rhs, t, &y, mid)?;
                if event(&ym) <= 0.0 {
                    hi = mid;
                    y_hi = ym;
                } else {
                    lo = mid;
                }
            }
            t += hi;
            y = y_hi;
            let u_end = y[0].max(0.0).sqrt();
            traj.samples.push(sample(&model, &params, t, u_end, y[1]));
            if shrinking {
                traj.termination = Termination::Extinct;
                traj.extinction_time = Some(t);
                let hu = SphereModel {
                    space,
                    u: u_end.max(f64::MIN_POSITIVE),
                }
                .h_times_u();
                traj.extinction_time_extrapolated = Some(t + y[0].max(0.0) / (2.0 * hu));
            } else {
                traj.termination = Termination::Focal;
            }
            return Ok(traj);
        }
        t = if step.h_used == policy.t_max - t {
            policy.t_max
        } else {
            step.t
        };
        y = step.y;
        h = step.h_next;
        traj.samples
            .push(sample(&model, &params, t, y[0].sqrt(), y[1]));
        if t >= policy.t_max {
            traj.termination = Termination::MaxTime;
            return Ok(traj);
        }
    }
}

impl Trajectory {
    pub fn last(&self) -> &FlowSample {
        self.samples
            .last()
            .expect("a trajectory has at least its initial sample")
    }

    /// Indices `i` where `t` fails to increase or `u` fails to move in the
    /// direction fixed by the sign of `H`.
    pub fn monotonicity_defects(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for i in 1..self.samples.len() {
            let (a, b) = (&self.samples[i - 1], &self.samples[i]);
            let t_ok = b.t > a.t;
            let u_ok = if self.stationary {
                b.u == a.u
            } else if a.h > 0.0 && b.h > 0.0 {
                b.u < a.u
            } else if a.h < 0.0 && b.h < 0.0 {
                b.u > a.u
            } else {
                true
            };
            if !(t_ok && u_ok) {
                out.push(i);
            }
        }
        out
    }

    /// `max |V(u)/V(u0) - exp(-int H^2)|` over the samples.
    pub fn volume_ratio_error(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| (s.vol_ratio - s.neg_int_h2.exp()).abs())
            .fold(0.0, f64::max)
    }

    /// `max |log(V(u)/V(u0)) + int H^2|`, relative to `max(1, |int H^2|)`.
    pub fn log_volume_error(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| (s.vol_ratio.ln() - s.neg_int_h2).abs() / s.neg_int_h2.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRAJECTORY_CSV_HEADER);
        out.push('\n');
        for s in &self.samples {
            let row = [
                s.t,
                s.u,
                s.h,
                s.a2,
                s.ao2,
                s.q,
                s.w,
                s.f0,
                s.vol_ratio,
                s.neg_int_h2,
            ];
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

pub const TRAJECTORY_CSV_HEADER: &str = "t,u,H,A2,Ao2,Q,W,f0,vol_ratio,neg_int_h2";

/// Reads samples written by [`Trajectory::write_csv`].
pub fn read_trajectory_csv<R: BufRead>(r: R) -> Result<Vec<FlowSample>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != TRAJECTORY_CSV_HEADER {
        return Err(Error::InvalidArgument(format!(
            "unexpected trajectory header: {header}"
        )));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::InvalidArgument(format!("trajectory row {}: {e}", i + 2)))?;
        if v.len() != 10 {
            return Err(Error::InvalidArgument(format!(
                "trajectory row {}: expected 10 columns, got {}",
                i + 2,
                v.len()
            )));
        }
        out.push(FlowSample {
            t: v[0],
            u: v[1],
            h: v[2],
            a2: v[3],
            ao2: v[4],
            q: v[5],
            w: v[6],
            f0: v[7],
            vol_ratio: v[8],
            neg_int_h2: v[9],
        });
    }
    Ok(out)
}
