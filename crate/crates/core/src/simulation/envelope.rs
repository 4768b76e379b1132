use nalgebra::DVector;
use rayon::prelude::*;

use crate::controller::Controller;
use crate::error::{Error, Result};

/// Convex hull of planar points (Andrew's monotone chain), counterclockwise
/// without repeated endpoints.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Area of a simple polygon by the shoelace formula.
pub fn shoelace_area(poly: &[(f64, f64)]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..poly.len() {
        let (x1, y1) = poly[i];
        let (x2, y2) = poly[(i + 1) % poly.len()];
        s += x1 * y2 - x2 * y1;
    }
    0.5 * s.abs()
}

/// Fraction of the state box covered by the convex hull of the grid points
/// from which the controller's MPC problem is feasible. Requires a 2-D
/// state.
pub fn feasible_envelope(ctrl: &Controller, grid: usize) -> Result<f64> {
    let x = &ctrl.system().x;
    if x.dim() != 2 {
        return Err(Error::InvalidArgument("feasible envelope is defined for planar states".into()));
    }
    if grid < 2 {
        return Err(Error::InvalidArgument("grid needs at least two points per axis".into()));
    }
    if ctrl.terminal_set().is_none() {
        return Ok(0.0);
    }
    let bb = x.bounding_box()?;
    let (lo, hi) = (bb.lower(), bb.upper());
    let pts: Vec<(f64, f64)> = (0..grid)
        .flat_map(|i| (0..grid).map(move |j| (i, j)))
        .map(|(i, j)| {
            let s = i as f64 / (grid - 1) as f64;
            let r = j as f64 / (grid - 1) as f64;
            (lo[0] + s * (hi[0] - lo[0]), lo[1] + r * (hi[1] - lo[1]))
        })
        .collect();
    let feasible: Vec<(f64, f64)> = pts
        .par_iter()
        .filter_map(|&(a, b)| {
            let x0 = DVector::from_vec(vec![a, b]);
            match ctrl.solve_mpc(&x0) {
                Ok(Some(sol)) if sol.is_optimal() => Some(Ok((a, b))),
                Ok(_) => None,
                Err(e) => Some(Err(e)),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let area = shoelace_area(&convex_hull(&feasible));
    let total = (hi[0] - lo[0]) * (hi[1] - lo[1]);
    Ok(area / total)
}
