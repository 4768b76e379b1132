//! Axis-aligned boxes and H-representation polytopes.
//!
//! Every set image under a linear map is over-approximated by its tightest
//! enclosing box (interval arithmetic), so the results are always supersets.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::optimization::{solve_lp, SolveKind};

/// Absolute tolerance on facet residuals for membership and inclusion.
pub const TOL: f64 = 1e-8;

/// `{x : |x_i − c_i| ≤ h_i}`. An empty box carries an explicit flag and
/// zero widths.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperbox {
    center: DVector<f64>,
    half_widths: DVector<f64>,
    empty: bool,
}

impl Hyperbox {
    pub fn new(center: DVector<f64>, half_widths: DVector<f64>) -> Result<Self> {
        if center.len() != half_widths.len() {
            return Err(Error::dim("box center and half-widths differ in length"));
        }
        if half_widths.iter().chain(center.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("box data must be finite".into()));
        }
        if half_widths.iter().any(|&h| h < 0.0) {
            return Err(Error::InvalidArgument("box half-widths must be nonnegative".into()));
        }
        Ok(Hyperbox {
            center,
            half_widths,
            empty: false,
        })
    }

    /// Origin-centred box.
    pub fn symmetric(half_widths: DVector<f64>) -> Result<Self> {
        Self::new(DVector::zeros(half_widths.len()), half_widths)
    }

    pub fn from_bounds(lower: &DVector<f64>, upper: &DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dim("box bounds differ in length"));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Ok(Self::empty(lower.len()));
        }
        Self::new((lower + upper) * 0.5, (upper - lower) * 0.5)
    }

    pub fn zero(dim: usize) -> Self {
        Hyperbox {
            center: DVector::zeros(dim),
            half_widths: DVector::zeros(dim),
            empty: false,
        }
    }

    pub fn empty(dim: usize) -> Self {
        Hyperbox {
            center: DVector::zeros(dim),
            half_widths: DVector::zeros(dim),
            empty: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn half_widths(&self) -> &DVector<f64> {
        &self.half_widths
    }

    pub fn lower(&self) -> DVector<f64> {
        &self.center - &self.half_widths
    }

    pub fn upper(&self) -> DVector<f64> {
        &self.center + &self.half_widths
    }

    /// Euclidean norm of the half-width vector, i.e. the radius of the
    /// smallest origin-centred ball containing a symmetric box.
    pub fn radius(&self) -> f64 {
        self.half_widths.norm()
    }

    pub fn support(&self, dir: &DVector<f64>) -> Result<f64> {
        self.check_dim(dir.len())?;
        if self.empty {
            return Err(Error::EmptySet);
        }
        Ok(dir.dot(&self.center) + dir.abs().dot(&self.half_widths))
    }

    pub fn minkowski_sum(&self, other: &Hyperbox) -> Result<Hyperbox> {
        self.check_dim(other.dim())?;
        if self.empty || other.empty {
            return Ok(Self::empty(self.dim()));
        }
        Ok(Hyperbox {
            center: &self.center + &other.center,
            half_widths: &self.half_widths + &other.half_widths,
            empty: false,
        })
    }

    /// `{x : x + Q ⊆ self}`; empty when `Q` is wider than `self` in any
    /// coordinate.
    pub fn pontryagin_diff(&self, other: &Hyperbox) -> Result<Hyperbox> {
        self.check_dim(other.dim())?;
        if self.empty {
            return Ok(Self::empty(self.dim()));
        }
        if other.empty {
            return Err(Error::InvalidArgument("cannot erode by an empty set".into()));
        }
        let hw = &self.half_widths - &other.half_widths;
        if hw.iter().any(|&h| h < 0.0) {
            return Ok(Self::empty(self.dim()));
        }
        Ok(Hyperbox {
            center: &self.center - &other.center,
            half_widths: hw,
            empty: false,
        })
    }

    /// Tightest box containing `M·self`.
    pub fn linear_map(&self, m: &DMatrix<f64>) -> Result<Hyperbox> {
        if m.ncols() != self.dim() {
            return Err(Error::dim("matrix columns must equal box dimension"));
        }
        if self.empty {
            return Ok(Self::empty(m.nrows()));
        }
        Ok(Hyperbox {
            center: m * &self.center,
            half_widths: m.abs() * &self.half_widths,
            empty: false,
        })
    }

    pub fn intersect(&self, other: &Hyperbox) -> Result<Hyperbox> {
        self.check_dim(other.dim())?;
        if self.empty || other.empty {
            return Ok(Self::empty(self.dim()));
        }
        let lo = self.lower().sup(&other.lower());
        let hi = self.upper().inf(&other.upper());
        Self::from_bounds(&lo, &hi)
    }

    pub fn contains_point(&self, x: &DVector<f64>) -> bool {
        !self.empty
            && x.len() == self.dim()
            && (x - &self.center).iter().zip(self.half_widths.iter()).all(|(d, h)| d.abs() <= h + TOL)
    }

    pub fn contains(&self, other: &Hyperbox) -> bool {
        if other.empty {
            return true;
        }
        if self.empty || other.dim() != self.dim() {
            return false;
        }
        let lo_ok = other.lower().iter().zip(self.lower().iter()).all(|(o, s)| *o >= s - TOL);
        let hi_ok = other.upper().iter().zip(self.upper().iter()).all(|(o, s)| *o <= s + TOL);
        lo_ok && hi_ok
    }

    pub fn to_polytope(&self) -> Polytope {
        let n = self.dim();
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            a[(2 * i, i)] = 1.0;
            a[(2 * i + 1, i)] = -1.0;
            if self.empty {
                b[2 * i] = -1.0;
                b[2 * i + 1] = -1.0;
            } else {
                b[2 * i] = self.center[i] + self.half_widths[i];
                b[2 * i + 1] = self.half_widths[i] - self.center[i];
            }
        }
        Polytope::from_parts(a, b)
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::dim(format!("expected dimension {}, got {n}", self.dim())));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct BoxRepr {
    center: Vec<f64>,
    half_widths: Vec<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    empty: bool,
}

impl Serialize for Hyperbox {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BoxRepr {
            center: self.center.iter().copied().collect(),
            half_widths: self.half_widths.iter().copied().collect(),
            empty: self.empty,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Hyperbox {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = BoxRepr::deserialize(d)?;
        if r.empty {
            return Ok(Hyperbox::empty(r.center.len()));
        }
        Hyperbox::new(DVector::from_vec(r.center), DVector::from_vec(r.half_widths)).map_err(serde::de::Error::custom)
    }
}

/// `{x : Ax ≤ b}`. Emptiness is computed lazily and cached.
#[derive(Debug, Clone)]
pub struct Polytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
    empty: OnceLock<bool>,
}

impl PartialEq for Polytope {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.b == other.b
    }
}

impl Polytope {
    /// Rejects non-finite entries and zero rows.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::dim("A and b row counts differ"));
        }
        if a.iter().any(|v| !v.is_finite()) || b.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("polytope data must be finite".into()));
        }
        for i in 0..a.nrows() {
            if a.row(i).norm() == 0.0 {
                return Err(Error::InvalidArgument(format!("row {i} of A has zero norm")));
            }
        }
        Ok(Self::from_parts(a, b))
    }

    fn from_parts(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        Polytope {
            a,
            b,
            empty: OnceLock::new(),
        }
    }

    /// The whole space (no rows).
    pub fn universe(dim: usize) -> Self {
        Self::from_parts(DMatrix::zeros(0, dim), DVector::zeros(0))
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_empty(&self) -> bool {
        *self.empty.get_or_init(|| {
            if self.b.iter().any(|v| *v == f64::NEG_INFINITY) {
                return true;
            }
            match self.inscribed_ball(Some(1.0)) {
                Ok((_, r)) => r < -1e-9,
                Err(_) => true,
            }
        })
    }

    /// `max dᵀx` over the polytope.
    pub fn support(&self, dir: &DVector<f64>) -> Result<f64> {
        if dir.len() != self.dim() {
            return Err(Error::dim("direction length"));
        }
        let s = solve_lp(&(-dir), &self.a, &self.b, &DMatrix::zeros(0, self.dim()), &DVector::zeros(0))?;
        match s.kind {
            SolveKind::Optimal => Ok(-s.objective),
            SolveKind::Infeasible => Err(Error::EmptySet),
            SolveKind::Unbounded => Err(Error::Unbounded),
            SolveKind::MaxIter => Err(Error::MaxIter(s.iterations)),
        }
    }

    /// Exact for a box summand: each offset grows by the box support.
    pub fn minkowski_sum(&self, q: &Hyperbox) -> Result<Polytope> {
        if q.dim() != self.dim() {
            return Err(Error::dim("Minkowski sum operands"));
        }
        if q.is_empty() {
            return Ok(Hyperbox::empty(self.dim()).to_polytope());
        }
        let mut b = self.b.clone();
        for i in 0..self.nrows() {
            b[i] += q.support(&self.a.row(i).transpose())?;
        }
        Ok(Self::from_parts(self.a.clone(), b))
    }

    pub fn pontryagin_diff(&self, q: &Hyperbox) -> Result<Polytope> {
        if q.dim() != self.dim() {
            return Err(Error::dim("Pontryagin difference operands"));
        }
        let mut b = self.b.clone();
        for i in 0..self.nrows() {
            b[i] -= q.support(&self.a.row(i).transpose())?;
        }
        Ok(Self::from_parts(self.a.clone(), b))
    }

    pub fn pontryagin_diff_polytope(&self, q: &Polytope) -> Result<Polytope> {
        if q.dim() != self.dim() {
            return Err(Error::dim("Pontryagin difference operands"));
        }
        let mut b = self.b.clone();
        for i in 0..self.nrows() {
            b[i] -= q.support(&self.a.row(i).transpose())?;
        }
        Ok(Self::from_parts(self.a.clone(), b))
    }

    pub fn intersect(&self, other: &Polytope) -> Result<Polytope> {
        if other.dim() != self.dim() {
            return Err(Error::dim("intersection operands"));
        }
        let mut a = DMatrix::zeros(self.nrows() + other.nrows(), self.dim());
        a.rows_mut(0, self.nrows()).copy_from(&self.a);
        a.rows_mut(self.nrows(), other.nrows()).copy_from(&other.a);
        let b = DVector::from_iterator(self.nrows() + other.nrows(), self.b.iter().chain(other.b.iter()).copied());
        Ok(Self::from_parts(a, b))
    }

    /// `{x : Mx ∈ self}`. Rows that vanish under the map become either
    /// trivially true (dropped) or trivially false (the result is empty).
    pub fn preimage(&self, m: &DMatrix<f64>) -> Result<Polytope> {
        if m.nrows() != self.dim() {
            return Err(Error::dim("preimage map rows must equal polytope dimension"));
        }
        let am = &self.a * m;
        let mut rows = Vec::new();
        let mut infeasible = false;
        for i in 0..am.nrows() {
            if am.row(i).norm() <= 1e-14 * self.a.row(i).norm() {
                if self.b[i] < -TOL {
                    infeasible = true;
                }
            } else {
                rows.push(i);
            }
        }
        if infeasible {
            return Ok(Hyperbox::empty(m.ncols()).to_polytope());
        }
        let a = DMatrix::from_fn(rows.len(), m.ncols(), |r, c| am[(rows[r], c)]);
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.b[i]));
        Ok(Self::from_parts(a, b))
    }

    pub fn contains_point(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim() && (&self.a * x - &self.b).iter().all(|&r| r <= TOL)
    }

    /// Worst facet residual `max_i (A_i x − b_i)`.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        (&self.a * x - &self.b).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains_box(&self, q: &Hyperbox) -> bool {
        if q.is_empty() {
            return true;
        }
        (0..self.nrows()).all(|i| q.support(&self.a.row(i).transpose()).map(|s| s <= self.b[i] + TOL).unwrap_or(false))
    }

    /// Facet-by-facet inclusion `other ⊆ self` with one LP per facet.
    pub fn contains(&self, other: &Polytope) -> bool {
        self.contains_tol(other, TOL)
    }

    pub fn contains_tol(&self, other: &Polytope, tol: f64) -> bool {
        if other.dim() != self.dim() {
            return false;
        }
        if other.is_empty() {
            return true;
        }
        if self.is_empty() {
            return false;
        }
        (0..self.nrows()).all(|i| match other.support(&self.a.row(i).transpose()) {
            Ok(s) => s <= self.b[i] + tol,
            Err(_) => false,
        })
    }

    /// Centre and radius of the largest inscribed Euclidean ball.
    pub fn chebyshev_center(&self) -> Result<(DVector<f64>, f64)> {
        let (c, r) = self.inscribed_ball(None)?;
        if r < -1e-9 {
            return Err(Error::EmptySet);
        }
        Ok((c, r.max(0.0)))
    }

    fn inscribed_ball(&self, cap: Option<f64>) -> Result<(DVector<f64>, f64)> {
        let n = self.dim();
        let m = self.nrows();
        let extra = usize::from(cap.is_some());
        let mut a = DMatrix::zeros(m + extra, n + 1);
        let mut b = DVector::zeros(m + extra);
        for i in 0..m {
            let row = self.a.row(i);
            a.view_mut((i, 0), (1, n)).copy_from(&row);
            a[(i, n)] = row.norm();
            b[i] = self.b[i];
        }
        if let Some(cap) = cap {
            a[(m, n)] = 1.0;
            b[m] = cap;
        }
        let mut c = DVector::zeros(n + 1);
        c[n] = -1.0;
        let s = solve_lp(&c, &a, &b, &DMatrix::zeros(0, n + 1), &DVector::zeros(0))?;
        match s.kind {
            SolveKind::Optimal => Ok((s.primal.rows(0, n).into_owned(), s.primal[n])),
            SolveKind::Unbounded => Err(Error::Unbounded),
            SolveKind::Infeasible => Err(Error::EmptySet),
            SolveKind::MaxIter => Err(Error::MaxIter(s.iterations)),
        }
    }

    /// Rows scaled to unit norm.
    pub fn normalized(&self) -> Polytope {
        let mut a = self.a.clone();
        let mut b = self.b.clone();
        for i in 0..a.nrows() {
            let nrm = a.row(i).norm();
            if nrm > 0.0 {
                a.row_mut(i).scale_mut(1.0 / nrm);
                b[i] /= nrm;
            }
        }
        Self::from_parts(a, b)
    }

    /// Merges rows whose normalized normals coincide (within 1e-12),
    /// keeping the smallest offset. Surviving rows keep their first-seen
    /// order, so the result is deterministic.
    pub fn remove_duplicates(&self) -> Polytope {
        let norm = self.normalized();
        let mut keep: Vec<usize> = Vec::new();
        let mut offsets: Vec<f64> = Vec::new();
        for i in 0..norm.nrows() {
            let row = norm.a.row(i);
            match keep.iter().position(|&k| (norm.a.row(k) - row).amax() <= 1e-12) {
                Some(pos) => offsets[pos] = offsets[pos].min(norm.b[i]),
                None => {
                    keep.push(i);
                    offsets.push(norm.b[i]);
                }
            }
        }
        let a = DMatrix::from_fn(keep.len(), self.dim(), |r, c| norm.a[(keep[r], c)]);
        Self::from_parts(a, DVector::from_vec(offsets))
    }

    /// Drops rows that are implied by the others (one LP per row).
    pub fn remove_redundant(&self) -> Result<Polytope> {
        let p = self.remove_duplicates();
        if p.is_empty() {
            return Ok(p);
        }
        let mut keep: Vec<usize> = (0..p.nrows()).collect();
        let mut i = 0;
        while i < keep.len() {
            let row = keep[i];
            let others: Vec<usize> = keep.iter().copied().filter(|&k| k != row).collect();
            let sub = p.select_rows(&others);
            let redundant = match sub.support(&p.a.row(row).transpose()) {
                Ok(s) => s <= p.b[row] + 1e-10,
                Err(_) => false,
            };
            if redundant {
                keep.remove(i);
            } else {
                i += 1;
            }
        }
        Ok(p.select_rows(&keep))
    }

    pub fn select_rows(&self, rows: &[usize]) -> Polytope {
        let a = DMatrix::from_fn(rows.len(), self.dim(), |r, c| self.a[(rows[r], c)]);
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.b[i]));
        Self::from_parts(a, b)
    }

    pub fn bounding_box(&self) -> Result<Hyperbox> {
        let n = self.dim();
        if self.is_empty() {
            return Ok(Hyperbox::empty(n));
        }
        let mut lo = DVector::zeros(n);
        let mut hi = DVector::zeros(n);
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            hi[i] = self.support(&e)?;
            lo[i] = -self.support(&(-e))?;
        }
        Hyperbox::from_bounds(&lo, &hi)
    }

    /// Vertices by brute-force facet enumeration, for dimension ≤ 3.
    pub fn vertices(&self) -> Result<Vec<DVector<f64>>> {
        let n = self.dim();
        if n == 0 || n > 3 {
            return Err(Error::InvalidArgument("vertex enumeration supports dimension 1 to 3".into()));
        }
        if self.is_empty() {
            return Err(Error::EmptySet);
        }
        let p = if self.nrows() > 12 { self.remove_redundant()? } else { self.normalized() };
        let m = p.nrows();
        let mut out: Vec<DVector<f64>> = Vec::new();
        let mut idx: Vec<usize> = (0..n).collect();
        if m < n {
            return Err(Error::Unbounded);
        }
        loop {
            let a = DMatrix::from_fn(n, n, |r, c| p.a[(idx[r], c)]);
            let b = DVector::from_iterator(n, idx.iter().map(|&i| p.b[i]));
            let lu = a.lu();
            if lu.determinant().abs() > 1e-12 {
                if let Some(x) = lu.solve(&b) {
                    if p.max_violation(&x) <= 1e-9 && !out.iter().any(|v| (v - &x).amax() <= 1e-9) {
                        out.push(x);
                    }
                }
            }
            let mut advanced = false;
            let mut k = n;
            while k > 0 {
                k -= 1;
                if idx[k] < m - n + k {
                    idx[k] += 1;
                    for j in k + 1..n {
                        idx[j] = idx[j - 1] + 1;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                return Ok(out);
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PolytopeRepr {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Serialize for Polytope {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolytopeRepr {
            a: (0..self.nrows()).map(|i| self.a.row(i).iter().copied().collect()).collect(),
            b: self.b.iter().copied().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polytope {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PolytopeRepr::deserialize(d)?;
        let m = r.a.len();
        let n = r.a.first().map_or(0, |row| row.len());
        if r.a.iter().any(|row| row.len() != n) {
            return Err(serde::de::Error::custom("ragged A matrix"));
        }
        let a = DMatrix::from_fn(m, n, |i, j| r.a[i][j]);
        Polytope::new(a, DVector::from_vec(r.b)).map_err(serde::de::Error::custom)
    }
}

/// Smallest Euclidean ball containing a finite point set (Welzl's
/// move-to-front recursion; deterministic for a given input order).
pub fn min_enclosing_ball(points: &[DVector<f64>]) -> Result<(DVector<f64>, f64)> {
    let Some(first) = points.first() else {
        return Err(Error::EmptySet);
    };
    let d = first.len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::dim("points differ in dimension"));
    }
    let mut pts: Vec<DVector<f64>> = points.to_vec();
    let mut support: Vec<DVector<f64>> = Vec::new();
    let (c, r2) = welzl(&mut pts, points.len(), &mut support, d);
    Ok((c, r2.max(0.0).sqrt()))
}

fn welzl(pts: &mut Vec<DVector<f64>>, n: usize, support: &mut Vec<DVector<f64>>, d: usize) -> (DVector<f64>, f64) {
    let (mut c, mut r2) = circumsphere(support, d);
    if support.len() == d + 1 {
        return (c, r2);
    }
    for i in 0..n {
        let p = pts[i].clone();
        if (&p - &c).norm_squared() > r2 * (1.0 + 1e-12) + 1e-18 {
            support.push(p.clone());
            let (c2, r22) = welzl(pts, i, support, d);
            support.pop();
            c = c2;
            r2 = r22;
            // move to front
            let moved = pts.remove(i);
            pts.insert(0, moved);
        }
    }
    (c, r2)
}

/// Smallest sphere through all support points (centre in their affine hull).
fn circumsphere(support: &[DVector<f64>], d: usize) -> (DVector<f64>, f64) {
    match support.len() {
        0 => (DVector::zeros(d), -1.0),
        1 => (support[0].clone(), 0.0),
        k => {
            let p0 = &support[0];
            let m = k - 1;
            let q = DMatrix::from_fn(d, m, |r, c| support[c + 1][r] - p0[r]);
            let gram = q.transpose() * &q;
            let rhs = DVector::from_fn(m, |i, _| 0.5 * q.column(i).norm_squared());
            match gram.lu().solve(&rhs) {
                Some(lam) => {
                    let c = p0 + &q * lam;
                    let r2 = (&c - p0).norm_squared();
                    (c, r2)
                }
                None => {
                    // Degenerate support set: fall back to the farthest pair.
                    let mut best = (p0.clone(), 0.0);
                    for a in support {
                        for b in support {
                            let r2 = (a - b).norm_squared() / 4.0;
                            if r2 > best.1 {
                                best = ((a + b) * 0.5, r2);
                            }
                        }
                    }
                    best
                }
            }
        }
    }
}
