use serde::{Deserialize, Serialize};

/// Default tolerance on normalized slack for non-strict inequalities.
pub const LE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `lhs <= rhs` up to `tol`.
    Le,
    /// `lhs < rhs`.
    Lt,
    /// `|lhs - rhs| <= tol`.
    Eq,
}

/// One evaluated relation with the magnitude used to normalize its slack.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Check {
    pub id: &'static str,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    pub scale: f64,
    pub tol: f64,
}

impl Check {
    pub fn le(id: &'static str, lhs: f64, rhs: f64, scale: f64) -> Self {
        Self {
            id,
            relation: Relation::Le,
            lhs,
            rhs,
            scale,
            tol: LE_TOL,
        }
    }

    pub fn lt(id: &'static str, lhs: f64, rhs: f64, scale: f64) -> Self {
        Self {
            id,
            relation: Relation::Lt,
            lhs,
            rhs,
            scale,
            tol: 0.0,
        }
    }

    pub fn eq(id: &'static str, lhs: f64, rhs: f64, scale: f64, tol: f64) -> Self {
        Self {
            id,
            relation: Relation::Eq,
            lhs,
            rhs,
            scale,
            tol,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// Scale from the magnitudes of the terms on both sides.
    pub fn magnitude(terms: &[f64]) -> f64 {
        terms
            .iter()
            .map(|t| t.abs())
            .sum::<f64>()
            .max(f64::MIN_POSITIVE)
    }

    /// Signed normalized slack; positive means the relation is violated or
    /// (for identities) the size of the residual.
    pub fn slack(&self) -> f64 {
        let scale = self.scale.abs().max(f64::MIN_POSITIVE);
        match self.relation {
            Relation::Le | Relation::Lt => (self.lhs - self.rhs) / scale,
            Relation::Eq => (self.lhs - self.rhs).abs() / scale,
        }
    }

    pub fn violated(&self) -> bool {
        let s = self.slack();
        if !s.is_finite() {
            return true;
        }
        match self.relation {
            Relation::Le | Relation::Eq => s > self.tol,
            Relation::Lt => s >= 0.0,
        }
    }
}
