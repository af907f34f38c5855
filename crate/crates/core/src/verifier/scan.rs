//! Admissible dimensions and the closed-form proof constants over them.

use serde::{Deserialize, Serialize};

use super::check::Check;
use super::{CheckStats, Counterexample, DimStats, SuiteId, SuiteReport, SuiteSpec};
use crate::algebra::PinchParams;
use crate::ambient::AmbientSpace;
use crate::frames::admissible;

/// All `(n, m, k)` with `3 <= n <= n_max`, `m = 2n - k` and either `k = 1`
/// or `n >= 7, 2 <= k < (2n - 3)/5`.
pub fn admissible_dims(n_max: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for n in 3..=n_max {
        for k in 1..2 * n {
            let m = 2 * n - k;
            if admissible(m, k).is_ok() {
                out.push((n, m, k));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantValue {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    /// `eps` the constant was evaluated at; `None` when it does not depend on it.
    pub eps: Option<f64>,
    pub value: f64,
    /// `positive` (value > 0), `nonnegative` (value >= 0) or `zero`.
    pub claim: String,
    pub holds: bool,
}

fn entry(
    name: &str,
    (n, m, k): (usize, usize, usize),
    eps: Option<f64>,
    value: f64,
    claim: &str,
) -> ConstantValue {
    let holds = match claim {
        "positive" => value > 0.0,
        "nonnegative" => value >= -1e-12,
        _ => value.abs() <= 1e-12,
    };
    ConstantValue {
        name: name.to_string(),
        n,
        m,
        k,
        eps,
        value,
        claim: claim.to_string(),
        holds,
    }
}

/// Every closed-form constant over the admissible dimensions up to `n_max`
/// (unit curvature scale), at `eps = 0` and at each value of `eps`.
pub fn constant_values(n_max: usize, eps: &[f64], mutant: Option<&str>) -> Vec<ConstantValue> {
    let mut eps_all = vec![0.0];
    eps_all.extend(eps.iter().copied().filter(|&e| e != 0.0));
    let mut out = Vec::new();
    for dims in admissible_dims(n_max) {
        let (n, m, k) = dims;
        let (mf, kf) = (m as f64, k as f64);
        if k >= 2 {
            let gap_k = if mutant == Some("gap_5k") { 5.0 } else { 4.0 };
            let gap = mf - 3.0 - gap_k * kf;
            out.push(entry("dimension_gap", dims, None, gap, "positive"));
            // k < (2n - 3)/5 and k < (m - 3)/4 describe the same set.
            let agree = (5 * k + 3 < 2 * n) == (4 * k + 3 < m);
            out.push(entry(
                "admissibility_equivalence",
                dims,
                None,
                if agree { 0.0 } else { 1.0 },
                "zero",
            ));
            out.push(entry(
                "grad05_bracket",
                dims,
                None,
                2.0 / 9.0 * (mf + 1.0) - 24.0 / (mf + 2.0),
                "positive",
            ));
            out.push(entry(
                "c1_codim",
                dims,
                None,
                16.0 / (9.0 * (mf + 2.0)) - (4.0 * mf - 10.0) / (3.0 * mf * mf),
                "positive",
            ));
            let space = AmbientSpace::cp(n);
            let p = PinchParams::new(&space, m, k, 0.0, 0.0).expect("admissible dimensions");
            out.push(entry(
                "beta_quarter",
                dims,
                None,
                (mf - 3.0 - 4.0 * kf) / 4.0 - p.beta,
                "nonnegative",
            ));
        } else {
            let space = AmbientSpace::cp(n);
            out.push(entry(
                "rbar_is_m_plus_3",
                dims,
                None,
                space.einstein_constant() - (mf + 3.0),
                "zero",
            ));
            out.push(entry(
                "chain_2m_minus_2_vs_m_plus_3",
                dims,
                None,
                (2.0 * mf - 2.0) - (mf + 3.0),
                "nonnegative",
            ));
            for &e in &eps_all {
                let p = PinchParams::new(&space, m, k, e, 0.0).expect("admissible dimensions");
                out.push(entry(
                    "chain_2_over_a",
                    dims,
                    Some(e),
                    2.0 / p.a - (2.0 * mf - 2.0),
                    "nonnegative",
                ));
                out.push(entry(
                    "c1_hypersurface",
                    dims,
                    Some(e),
                    3.0 / (mf + 2.0) - 1.0 / mf - p.alpha,
                    "positive",
                ));
            }
        }
    }
    out
}

fn as_check(v: &ConstantValue) -> Check {
    let id: &'static str = match v.name.as_str() {
        "dimension_gap" => "dimension_gap",
        "admissibility_equivalence" => "admissibility_equivalence",
        "grad05_bracket" => "grad05_bracket",
        "c1_codim" => "c1_codim",
        "beta_quarter" => "beta_quarter",
        "rbar_is_m_plus_3" => "rbar_is_m_plus_3",
        "chain_2m_minus_2_vs_m_plus_3" => "chain_2m_minus_2_vs_m_plus_3",
        "chain_2_over_a" => "chain_2_over_a",
        _ => "c1_hypersurface",
    };
    let scale = v.value.abs().max(1.0);
    match v.claim.as_str() {
        "positive" => Check::lt(id, -v.value, 0.0, scale),
        "nonnegative" => Check::le(id, -v.value, 0.0, scale).with_tol(1e-12),
        _ => Check::eq(id, v.value, 0.0, scale, 1e-12),
    }
}

pub(crate) fn scan_report(spec: &SuiteSpec) -> SuiteReport {
    let values = constant_values(spec.n_max, &spec.eps, spec.mutant.as_deref());
    let mut checks: Vec<CheckStats> = Vec::new();
    let mut violations = Vec::new();
    let mut violation_count = 0;
    let mut per_dim: Vec<DimStats> = Vec::new();
    for v in &values {
        let c = as_check(v);
        let s = c.slack();
        let stats = match checks.iter_mut().position(|x| x.check_id == c.id) {
            Some(i) => &mut checks[i],
            None => {
                checks.push(CheckStats {
                    check_id: c.id.to_string(),
                    evaluations: 0,
                    violations: 0,
                    worst_slack: f64::MIN,
                });
                checks.last_mut().expect("just pushed")
            }
        };
        stats.evaluations += 1;
        stats.worst_slack = stats.worst_slack.max(s);
        let bad = c.violated();
        if bad {
            stats.violations += 1;
            violation_count += 1;
            if violations.len() < super::MAX_KEPT {
                violations.push(Counterexample {
                    suite_id: SuiteId::ConstantScan,
                    check_id: c.id.to_string(),
                    m: v.m,
                    k: v.k,
                    trial: 0,
                    trial_seed: 0,
                    eps: v.eps.unwrap_or(0.0),
                    lhs: c.lhs,
                    rhs: c.rhs,
                    scale: c.scale,
                    slack: s,
                    original_slack: s,
                    shrink_steps: 0,
                    on_boundary: false,
                    zero_mean: false,
                    params: None,
                    point: None,
                    vectors: None,
                    taus: None,
                });
            }
        }
        match per_dim.last_mut() {
            Some(d) if d.m == v.m && d.k == v.k => {
                d.trials += 1;
                d.violations += u64::from(bad);
                d.worst_slack = d.worst_slack.max(s);
            }
            _ => per_dim.push(DimStats {
                m: v.m,
                k: v.k,
                trials: 1,
                violations: u64::from(bad),
                worst_slack: s,
            }),
        }
    }
    let (worst_slack, worst_check) = checks
        .iter()
        .max_by(|a, b| a.worst_slack.total_cmp(&b.worst_slack))
        .map(|c| (c.worst_slack, c.check_id.clone()))
        .unwrap_or((0.0, String::new()));
    SuiteReport {
        suite_id: SuiteId::ConstantScan,
        dims: per_dim.iter().map(|d| (d.m, d.k)).collect(),
        mutant: spec.mutant.clone(),
        trials_run: values.len(),
        pass: violation_count == 0,
        violation_count,
        violations,
        worst_slack,
        worst_check,
        checks,
        per_dim,
        stopped_early: false,
        constants: values,
        wall_time: 0.0,
    }
}

/// Constant scan with the default `eps` values.
pub fn constant_scan(n_max: usize) -> SuiteReport {
    let spec = SuiteSpec {
        n_max,
        ..SuiteSpec::new(SuiteId::ConstantScan, Vec::new(), 1, 0)
    };
    scan_report(&spec)
}
