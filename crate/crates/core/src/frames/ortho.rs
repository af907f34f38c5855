use nalgebra::{DMatrix, DVector};

/// Incremental Gram–Schmidt over a fixed pool of candidate vectors.
///
/// Candidates keep their residual against the accepted basis up to date, so
/// [`best_candidate`](Self::best_candidate) is a pivoted completion step.
pub(crate) struct Orthogonalizer {
    basis: Vec<DVector<f64>>,
    residuals: Vec<DVector<f64>>,
}

impl Orthogonalizer {
    /// `pool` holds the candidate vectors as columns.
    pub fn new(pool: DMatrix<f64>) -> Self {
        let residuals = pool.column_iter().map(|c| c.into_owned()).collect();
        Self {
            basis: Vec::new(),
            residuals,
        }
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    /// Orthogonalizes `v` against the basis (two passes), normalizes and
    /// appends it. Returns the norm before normalization.
    pub fn push(&mut self, v: DVector<f64>) -> f64 {
        let mut w = v;
        for _ in 0..2 {
            for b in &self.basis {
                let s = b.dot(&w);
                w.axpy(-s, b, 1.0);
            }
        }
        let norm = w.norm();
        if norm > 0.0 {
            w /= norm;
        }
        for r in &mut self.residuals {
            let s = w.dot(r);
            r.axpy(-s, &w, 1.0);
        }
        self.basis.push(w);
        norm
    }

    /// Appends `v` as given, without orthogonalization.
    pub fn push_exact(&mut self, v: DVector<f64>) {
        for r in &mut self.residuals {
            let s = v.dot(r);
            r.axpy(-s, &v, 1.0);
        }
        self.basis.push(v);
    }

    /// Unit vector from the candidate with the largest residual, orthogonal to the basis.
    pub fn best_candidate(&self) -> DVector<f64> {
        let (idx, _) = self
            .residuals
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.norm_squared()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let mut w = self.residuals[idx].clone();
        for b in &self.basis {
            let s = b.dot(&w);
            w.axpy(-s, b, 1.0);
        }
        w.normalize()
    }

    pub fn basis(&self) -> &[DVector<f64>] {
        &self.basis
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.basis)
    }
}
