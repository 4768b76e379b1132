use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{min_enclosing_ball, Hyperbox, Polytope};

/// Duplicate-normal pruning runs after this many updates.
const PRUNE_EVERY: usize = 10;

/// Per-row feasible parameter polytopes `Θ_i(t) ⊂ ℝᵈ` under the bounded
/// noise model `|y_i − w_iᵀφ| ≤ σ_i`.
#[derive(Debug, Clone)]
pub struct SetMembership {
    rows: Vec<Polytope>,
    sigma: DVector<f64>,
    updates: usize,
}

impl SetMembership {
    pub fn new(theta0: Vec<Polytope>, sigma: DVector<f64>) -> Result<Self> {
        if theta0.len() != sigma.len() {
            return Err(Error::dim("one noise bound per estimated row"));
        }
        if theta0.is_empty() {
            return Err(Error::InvalidArgument("no rows to estimate".into()));
        }
        let d = theta0[0].dim();
        if theta0.iter().any(|p| p.dim() != d) {
            return Err(Error::dim("all feasible sets share the feature dimension"));
        }
        for (i, p) in theta0.iter().enumerate() {
            if p.is_empty() {
                return Err(Error::EmptyFeasibleSet { row: i });
            }
        }
        Ok(SetMembership {
            rows: theta0,
            sigma,
            updates: 0,
        })
    }

    /// `Θ_i(0) = {ŵ_i(0)} ⊕ {‖w̃‖_∞ ≤ half_width_i}`.
    pub fn from_boxes(centers: &DMatrix<f64>, half_widths: &DVector<f64>, sigma: DVector<f64>) -> Result<Self> {
        let d = centers.ncols();
        let theta0 = (0..centers.nrows())
            .map(|i| Hyperbox::new(centers.row(i).transpose(), DVector::from_element(d, half_widths[i])).map(|b| b.to_polytope()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(theta0, sigma)
    }

    pub fn feature_dim(&self) -> usize {
        self.rows[0].dim()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn feasible_set(&self, row: usize) -> &Polytope {
        &self.rows[row]
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Intersects each `Θ_i` with the slab `|y_i − wᵀφ| ≤ σ_i`. Fails with
    /// `EmptyFeasibleSet` when no parameter explains the data any longer.
    pub fn update(&mut self, phi: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        let d = self.feature_dim();
        if phi.len() != d || y.len() != self.rows.len() {
            return Err(Error::dim("feature or observation length"));
        }
        self.updates += 1;
        let prune = self.updates.is_multiple_of(PRUNE_EVERY);
        let nrm = phi.norm();
        for i in 0..self.rows.len() {
            if nrm <= 1e-14 {
                if y[i].abs() > self.sigma[i] {
                    return Err(Error::EmptyFeasibleSet { row: i });
                }
                continue;
            }
            let mut slab = DMatrix::zeros(2, d);
            slab.row_mut(0).copy_from(&phi.transpose());
            slab.row_mut(1).copy_from(&(-phi.transpose()));
            let offsets = DVector::from_vec(vec![y[i] + self.sigma[i], self.sigma[i] - y[i]]);
            let slab = Polytope::new(slab, offsets)?;
            let mut next = self.rows[i].intersect(&slab)?;
            if prune {
                next = next.remove_duplicates();
            }
            if next.is_empty() {
                self.rows[i] = next;
                return Err(Error::EmptyFeasibleSet { row: i });
            }
            self.rows[i] = next;
        }
        Ok(())
    }

    /// Centre and radius of the smallest ball enclosing each `Θ_i`. This is
    /// the estimate minimizing the worst-case Euclidean error over the
    /// feasible set. For `d ≤ 3` it is computed exactly from the vertices;
    /// above that the ball around the bounding box is used, which still
    /// encloses `Θ_i`.
    pub fn estimate(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let d = self.feature_dim();
        let mut centers = DMatrix::zeros(self.rows.len(), d);
        let mut radii = DVector::zeros(self.rows.len());
        for (i, theta) in self.rows.iter().enumerate() {
            if theta.is_empty() {
                return Err(Error::EmptyFeasibleSet { row: i });
            }
            let (c, r) = if d <= 3 {
                let verts = theta.vertices()?;
                min_enclosing_ball(&verts)?
            } else {
                let bb = theta.bounding_box()?;
                (bb.center().clone(), bb.radius())
            };
            centers.row_mut(i).copy_from(&c.transpose());
            radii[i] = r;
        }
        Ok((centers, radii))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar_sm() -> SetMembership {
        SetMembership::from_boxes(&DMatrix::zeros(1, 1), &DVector::from_element(1, 1.0), DVector::from_element(1, 0.4)).unwrap()
    }

    #[test]
    fn interval_intersection() {
        let mut sm = scalar_sm();
        sm.update(&DVector::from_element(1, 1.0), &DVector::from_element(1, 0.6)).unwrap();
        let (c, r) = sm.estimate().unwrap();
        assert_abs_diff_eq!(c[(0, 0)], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(r[0], 0.4, epsilon = 1e-12);
        // An implied observation leaves the set unchanged.
        sm.update(&DVector::from_element(1, 0.5), &DVector::from_element(1, 0.3)).unwrap();
        let (c2, r2) = sm.estimate().unwrap();
        assert_abs_diff_eq!(c2[(0, 0)], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(r2[0], 0.4, epsilon = 1e-12);
    }

    #[test]
    fn inconsistent_data_empties_the_set() {
        let mut sm = scalar_sm();
        sm.update(&DVector::from_element(1, 1.0), &DVector::from_element(1, 0.6)).unwrap();
        let err = sm.update(&DVector::from_element(1, 1.0), &DVector::from_element(1, -0.5)).unwrap_err();
        assert!(matches!(err, Error::EmptyFeasibleSet { row: 0 }));
    }

    #[test]
    fn zero_feature_checks_noise_bound() {
        let mut sm = scalar_sm();
        sm.update(&DVector::zeros(1), &DVector::from_element(1, 0.3)).unwrap();
        assert!(sm.update(&DVector::zeros(1), &DVector::from_element(1, 0.5)).is_err());
    }

    #[test]
    fn symmetric_box_centre() {
        let sm = SetMembership::from_boxes(&DMatrix::from_row_slice(1, 2, &[0.3, -0.2]), &DVector::from_element(1, 1.0), DVector::from_element(1, 0.1)).unwrap();
        let (c, r) = sm.estimate().unwrap();
        assert_abs_diff_eq!(c[(0, 0)], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(c[(0, 1)], -0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(r[0], 2f64.sqrt(), epsilon = 1e-12);
    }
}
