//! Greedy simplification of violating inputs.

use nalgebra::DMatrix;

use super::check::Check;
use super::suites::{self, Context, TrialInput};
use super::{Counterexample, SuiteSpec};
use crate::error::Result;
use crate::frames::PointData;

const MAX_PASSES: usize = 4;
const SNAP_THRESHOLDS: [f64; 4] = [0.5, 0.25, 0.1, 0.01];

#[derive(Clone, Copy, Debug)]
enum Move {
    /// Set `h^alpha` to zero.
    ZeroNormal(usize),
    /// Set `h^alpha_ij = h^alpha_ji` to zero.
    ZeroEntry(usize, usize, usize),
    /// Drop frame coordinates below the threshold and re-orthonormalize.
    SnapFrame(f64),
    /// Set one coordinate of an ambient vector to zero.
    ZeroVector(usize, usize),
}

fn moves(input: &TrialInput) -> Vec<Move> {
    let mut out = Vec::new();
    if let Some(p) = &input.point {
        let m = p.m();
        for (a, h) in p.h.iter().enumerate() {
            if h.iter().any(|&x| x != 0.0) {
                out.push(Move::ZeroNormal(a));
            }
        }
        for (a, h) in p.h.iter().enumerate() {
            for i in 0..m {
                for j in i..m {
                    if h[(i, j)] != 0.0 {
                        out.push(Move::ZeroEntry(a, i, j));
                    }
                }
            }
        }
        out.extend(SNAP_THRESHOLDS.iter().map(|&t| Move::SnapFrame(t)));
    }
    if let Some(v) = &input.vectors {
        for c in 0..v.ncols() {
            for r in 0..v.nrows() {
                if v[(r, c)] != 0.0 {
                    out.push(Move::ZeroVector(r, c));
                }
            }
        }
    }
    out
}

/// Gram–Schmidt (two passes) over the columns; `None` when a column collapses.
fn orthonormalize(f: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut out = f.clone();
    for j in 0..f.ncols() {
        let mut v = out.column(j).into_owned();
        for _ in 0..2 {
            for i in 0..j {
                let b = out.column(i);
                let s = b.dot(&v);
                v.axpy(-s, &b.into_owned(), 1.0);
            }
        }
        let n = v.norm();
        if n < 1e-3 {
            return None;
        }
        out.set_column(j, &(v / n));
    }
    Some(out)
}

fn apply(input: &TrialInput, mv: Move) -> Option<TrialInput> {
    let mut next = input.clone();
    match mv {
        Move::ZeroNormal(a) => next.point.as_mut()?.h[a].fill(0.0),
        Move::ZeroEntry(a, i, j) => {
            let h = &mut next.point.as_mut()?.h[a];
            h[(i, j)] = 0.0;
            h[(j, i)] = 0.0;
        }
        Move::SnapFrame(t) => {
            let p = next.point.as_mut()?;
            let mut f = p.frame();
            f.apply(|x| {
                if x.abs() < t {
                    *x = 0.0
                }
            });
            if f == p.frame() {
                return None;
            }
            let f = orthonormalize(&f)?;
            let m = p.m();
            *p = PointData {
                space: p.space,
                tangent: f.columns(0, m).into_owned(),
                normal: f.columns(m, p.k()).into_owned(),
                h: p.h.clone(),
            };
            // The prescribed angles no longer describe the moved frame.
            next.taus = None;
        }
        Move::ZeroVector(r, c) => next.vectors.as_mut()?[(r, c)] = 0.0,
    }
    Some(next)
}

fn violation(ctx: &Context, input: &TrialInput, id: &str) -> Option<Check> {
    let checks = suites::evaluate(ctx, input).ok()?;
    checks.into_iter().find(|c| c.id == id && c.violated())
}

fn slack_of(c: &Check) -> f64 {
    let s = c.slack();
    if s.is_finite() {
        s
    } else {
        f64::MAX
    }
}

/// Shrinks a counterexample under the suite of `spec`. Moves are accepted
/// only while the recorded relation stays violated with non-decreasing slack.
pub fn shrink_counterexample(spec: &SuiteSpec, cx: &Counterexample) -> Result<Counterexample> {
    let ctx = Context::new(spec, cx.m, cx.k)?;
    let input = cx.input()?;
    shrink_with(&ctx, cx.clone(), input)
}

pub(crate) fn shrink_with(
    ctx: &Context,
    mut cx: Counterexample,
    mut input: TrialInput,
) -> Result<Counterexample> {
    let Some(mut current) = violation(ctx, &input, &cx.check_id) else {
        return Ok(cx);
    };
    let mut slack = slack_of(&current);
    let mut steps = 0;
    for _ in 0..MAX_PASSES {
        let mut changed = false;
        for mv in moves(&input) {
            let Some(cand) = apply(&input, mv).and_then(|c| suites::restore(ctx, c)) else {
                continue;
            };
            if let Some(c) = violation(ctx, &cand, &cx.check_id) {
                let s = slack_of(&c);
                if s >= slack {
                    input = cand;
                    current = c;
                    slack = s;
                    steps += 1;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    if steps > 0 {
        cx.lhs = current.lhs;
        cx.rhs = current.rhs;
        cx.scale = current.scale;
        cx.slack = current.slack();
        cx.shrink_steps += steps;
        cx.point = input.point.as_ref().map(PointData::to_record);
        cx.vectors = input.vectors.as_ref().map(|v| {
            v.column_iter()
                .map(|c| c.iter().copied().collect())
                .collect()
        });
        cx.taus = input.taus.clone();
    }
    Ok(cx)
}
