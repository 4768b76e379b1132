//! Maximal robust positive invariant sets for `x⁺ = A_cl x + d`, `d ∈ D`,
//! under the state constraint `X` and the input constraint `−Kx ∈ U`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{Hyperbox, Polytope};

/// Iteration cap for the fixed-point recursion.
pub const MAX_RPI_ITER: usize = 200;

const REDUNDANCY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct InvariantSet {
    pub set: Polytope,
    /// False when the iteration cap was hit. The set is then the last
    /// iterate, which contains the maximal RPI set but is not certified
    /// invariant.
    pub converged: bool,
    pub iterations: usize,
}

/// Constraint admissibility rows `[X.A; −U.A·K] x ≤ [X.b; U.b]`.
fn admissible_rows(x: &Polytope, u: &Polytope, k: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = x.dim();
    let ua = -(u.a() * k);
    let m = x.nrows() + u.nrows();
    let mut h = DMatrix::zeros(m, n);
    h.rows_mut(0, x.nrows()).copy_from(x.a());
    h.rows_mut(x.nrows(), u.nrows()).copy_from(&ua);
    let b = DVector::from_iterator(m, x.b().iter().chain(u.b().iter()).copied());
    (h, b)
}

/// Computes the maximal RPI set by forward propagation of the admissible
/// constraints: block `k` is `H A_clᵏ x ≤ h − Σ_{i<k} h_D(A_clⁱᵀ Hᵀ)`.
/// Only rows that are not already implied by the current set are kept; the
/// recursion stops once a whole block is redundant. Returns `None` when the
/// set is empty.
pub fn max_rpi(
    a_cl: &DMatrix<f64>,
    d: &Hyperbox,
    x: &Polytope,
    u_tight: &Polytope,
    k: &DMatrix<f64>,
) -> Result<Option<InvariantSet>> {
    let n = a_cl.nrows();
    if a_cl.ncols() != n || d.dim() != n || x.dim() != n || u_tight.dim() != k.nrows() || k.ncols() != n {
        return Err(Error::dim("max_rpi operand shapes"));
    }
    if d.is_empty() {
        return Err(Error::InvalidArgument("disturbance set is empty".into()));
    }
    if u_tight.is_empty() || x.is_empty() {
        return Ok(None);
    }
    let (h0, b0) = admissible_rows(x, u_tight, k);

    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut offsets: Vec<f64> = Vec::new();
    for i in 0..h0.nrows() {
        match normalize(h0.row(i).transpose(), b0[i]) {
            Normalized::Row(r, o) => {
                rows.push(r);
                offsets.push(o);
            }
            Normalized::Trivial => {}
            Normalized::Infeasible => return Ok(None),
        }
    }
    let mut omega = assemble(&rows, &offsets, n).remove_duplicates();
    if omega.is_empty() {
        return Ok(None);
    }

    // Propagated rows H A_clᵏ and accumulated erosion Σ h_D.
    let mut hk = h0.clone();
    let mut erosion = DVector::<f64>::zeros(h0.nrows());
    for iter in 1..=MAX_RPI_ITER {
        for i in 0..hk.nrows() {
            erosion[i] += d.support(&hk.row(i).transpose())?;
        }
        hk = &hk * a_cl;
        let mut added = false;
        for i in 0..hk.nrows() {
            let (r, o) = match normalize(hk.row(i).transpose(), b0[i] - erosion[i]) {
                Normalized::Row(r, o) => (r, o),
                Normalized::Trivial => continue,
                Normalized::Infeasible => return Ok(None),
            };
            let redundant = match omega.support(&r) {
                Ok(s) => s <= o + REDUNDANCY_TOL,
                Err(Error::EmptySet) => return Ok(None),
                Err(_) => false,
            };
            if !redundant {
                rows.push(r);
                offsets.push(o);
                omega = assemble(&rows, &offsets, n);
                added = true;
            }
        }
        if !added {
            return Ok(Some(InvariantSet {
                set: omega.remove_duplicates(),
                converged: true,
                iterations: iter,
            }));
        }
        if omega.is_empty() {
            return Ok(None);
        }
    }
    Ok(Some(InvariantSet {
        set: omega.remove_duplicates(),
        converged: false,
        iterations: MAX_RPI_ITER,
    }))
}

enum Normalized {
    Row(DVector<f64>, f64),
    Trivial,
    Infeasible,
}

fn normalize(row: DVector<f64>, offset: f64) -> Normalized {
    let nrm = row.norm();
    if nrm <= 1e-12 {
        if offset < -1e-9 {
            Normalized::Infeasible
        } else {
            Normalized::Trivial
        }
    } else {
        Normalized::Row(row / nrm, offset / nrm)
    }
}

fn assemble(rows: &[DVector<f64>], offsets: &[f64], n: usize) -> Polytope {
    let a = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    Polytope::new(a, DVector::from_column_slice(offsets)).expect("rows are normalized and finite")
}

/// Checks `O ⊆ X`, `−K·O ⊆ U` and `A_cl·O ⊕ D ⊆ O` with support-function LPs
/// at tolerance 1e-7.
pub fn is_rpi(o: &Polytope, a_cl: &DMatrix<f64>, d: &Hyperbox, x: &Polytope, u_tight: &Polytope, k: &DMatrix<f64>) -> bool {
    const TOL: f64 = 1e-7;
    if o.is_empty() {
        return false;
    }
    if !x.contains_tol(o, TOL) {
        return false;
    }
    for i in 0..u_tight.nrows() {
        let dir = -(k.transpose() * u_tight.a().row(i).transpose());
        match o.support(&dir) {
            Ok(s) if s <= u_tight.b()[i] + TOL => {}
            _ => return false,
        }
    }
    for i in 0..o.nrows() {
        let row = o.a().row(i).transpose();
        let Ok(s) = o.support(&(a_cl.transpose() * &row)) else {
            return false;
        };
        let Ok(hd) = d.support(&row) else {
            return false;
        };
        if s + hd > o.b()[i] + TOL {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn interval(lo: f64, hi: f64) -> Polytope {
        Hyperbox::from_bounds(&DVector::from_element(1, lo), &DVector::from_element(1, hi)).unwrap().to_polytope()
    }

    /// Brute-force fixed point on intervals for `x⁺ = a x + d` with a > 0.
    fn interval_oracle(a: f64, w: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let (mut l, mut h) = (lo, hi);
        for _ in 0..10_000 {
            let (nl, nh) = (l.max((l + w) / a), h.min((h - w) / a));
            if nl > nh {
                return None;
            }
            if (nl - l).abs() < 1e-14 && (nh - h).abs() < 1e-14 {
                return Some((nl, nh));
            }
            l = nl;
            h = nh;
        }
        Some((l, h))
    }

    fn bounds(p: &Polytope) -> (f64, f64) {
        let e = DVector::from_element(1, 1.0);
        (-p.support(&(-&e)).unwrap(), p.support(&e).unwrap())
    }

    #[test]
    fn scalar_contraction_matches_interval_oracle() {
        let d = Hyperbox::symmetric(DVector::from_element(1, 0.25)).unwrap();
        let u = Polytope::universe(1);
        let k = scalar(0.0);
        let res = max_rpi(&scalar(0.5), &d, &interval(-1.0, 1.0), &u, &k).unwrap().unwrap();
        assert!(res.converged);
        let (lo, hi) = bounds(&res.set);
        let (ol, oh) = interval_oracle(0.5, 0.25, -1.0, 1.0).unwrap();
        assert_abs_diff_eq!(lo, ol, epsilon = 1e-9);
        assert_abs_diff_eq!(hi, oh, epsilon = 1e-9);
        assert!(is_rpi(&res.set, &scalar(0.5), &d, &interval(-1.0, 1.0), &u, &k));
    }

    #[test]
    fn slow_contraction_erodes_state_set() {
        for &(a, w) in &[(0.9, 0.05), (0.95, 0.02), (0.8, 0.15)] {
            let d = Hyperbox::symmetric(DVector::from_element(1, w)).unwrap();
            // Input constraint |0.5 x| ≤ 0.4 caps the set at |x| ≤ 0.8.
            let kgain = scalar(0.5);
            let u = interval(-0.4, 0.4);
            let res = max_rpi(&scalar(a), &d, &interval(-1.0, 1.0), &u, &kgain).unwrap();
            let oracle = interval_oracle(a, w, -0.8, 0.8);
            match (res, oracle) {
                (Some(r), Some((ol, oh))) => {
                    let (lo, hi) = bounds(&r.set);
                    assert_abs_diff_eq!(lo, ol, epsilon = 1e-9);
                    assert_abs_diff_eq!(hi, oh, epsilon = 1e-9);
                }
                (None, None) => {}
                (r, o) => panic!("mismatch: {:?} vs {:?}", r.map(|s| s.set), o),
            }
        }
    }

    #[test]
    fn excessive_disturbance_gives_empty() {
        let d = Hyperbox::symmetric(DVector::from_element(1, 2.0)).unwrap();
        let res = max_rpi(&scalar(0.5), &d, &interval(-1.0, 1.0), &Polytope::universe(1), &scalar(0.0)).unwrap();
        assert!(res.is_none());
    }

    #[test]
    fn no_disturbance_keeps_admissible_set() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.4]);
        let x = Hyperbox::symmetric(DVector::from_element(2, 1.0)).unwrap().to_polytope();
        let res = max_rpi(&a, &Hyperbox::zero(2), &x, &Polytope::universe(1), &DMatrix::zeros(1, 2)).unwrap().unwrap();
        assert!(res.set.contains(&x) && x.contains(&res.set));
    }

    #[test]
    fn origin_is_trivially_invariant() {
        let origin = Hyperbox::zero(2).to_polytope();
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
        let x = Hyperbox::symmetric(DVector::from_element(2, 1.0)).unwrap().to_polytope();
        assert!(is_rpi(&origin, &a, &Hyperbox::zero(2), &x, &Polytope::universe(1), &DMatrix::zeros(1, 2)));
    }

    #[test]
    fn unstable_dynamics_leave_state_set() {
        let a = DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 0.5]);
        let x = Hyperbox::symmetric(DVector::from_element(2, 1.0)).unwrap().to_polytope();
        assert!(!is_rpi(&x, &a, &Hyperbox::zero(2), &x, &Polytope::universe(1), &DMatrix::zeros(1, 2)));
        // One simulated step from a boundary vertex confirms the escape.
        let xn = &a * DVector::from_vec(vec![1.0, 1.0]);
        assert!(!x.contains_point(&xn));
    }
}
