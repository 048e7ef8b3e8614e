//! Poincaré-ball maps at curvature 1, anchored at the origin.
//!
//! Everything here is computed in `f64`. Points produced by [`exp_map`] are
//! clamped to norm at most [`MAX_POINCARE_NORM`] so that distances stay finite
//! once `tanh` saturates (roughly `‖v‖ > 14` in double precision).

use std::cell::Cell;

use crate::error::{Error, Result};

/// Largest norm a point is allowed to have after embedding.
pub const MAX_POINCARE_NORM: f64 = 1.0 - 1e-12;

thread_local! {
    static DISTANCE_EVALS: Cell<u64> = const { Cell::new(0) };
}

/// Number of hyperbolic distance evaluations charged to the calling thread.
///
/// Bulk routines that fan out over worker threads (the Prim scan) charge
/// their whole count to the thread that invoked them.
pub fn distance_evaluations() -> u64 {
    DISTANCE_EVALS.with(Cell::get)
}

pub(crate) fn charge_distance_evaluations(n: u64) {
    DISTANCE_EVALS.with(|c| c.set(c.get().wrapping_add(n)));
}

/// Euclidean norm, rescaled when the plain sum of squares would overflow.
pub fn norm(v: &[f64]) -> f64 {
    let sq: f64 = v.iter().map(|x| x * x).sum();
    if sq.is_finite() {
        return sq.sqrt();
    }
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let sq: f64 = v.iter().map(|x| (x / scale) * (x / scale)).sum();
    scale * sq.sqrt()
}

pub(crate) fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::invalid(format!("coordinate {i} is not finite"))),
        None => Ok(()),
    }
}

/// A point strictly inside the unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct PoincareVector(Vec<f64>);

impl PoincareVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("Poincaré vector must have dim >= 1"));
        }
        check_finite(&coords)?;
        let n = norm(&coords);
        if n >= 1.0 {
            return Err(Error::Domain(format!(
                "point norm {n} is not inside the unit ball"
            )));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Scale factor `tanh(‖v‖)/‖v‖` (with the boundary clamp applied).
fn exp_scale(n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let t = n.tanh();
    if t >= MAX_POINCARE_NORM {
        MAX_POINCARE_NORM / n
    } else {
        t / n
    }
}

/// Scale factor `artanh(‖p‖)/‖p‖`.
fn log_scale(n: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else {
        n.atanh() / n
    }
}

/// Exponential map at the origin: `tanh(‖v‖) · v / ‖v‖`, with `exp_map(0) = 0`.
pub fn exp_map(v: &[f64]) -> Result<PoincareVector> {
    if v.is_empty() {
        return Err(Error::invalid("vector must have dim >= 1"));
    }
    check_finite(v)?;
    let s = exp_scale(norm(v));
    Ok(PoincareVector(v.iter().map(|x| x * s).collect()))
}

/// Logarithmic map at the origin: `artanh(‖p‖) · p / ‖p‖`, with `log_map(0) = 0`.
pub fn log_map(p: &PoincareVector) -> Vec<f64> {
    let s = log_scale(p.norm());
    p.0.iter().map(|x| x * s).collect()
}

/// `arccosh(1 + x)` without the cancellation of forming `1 + x` first.
fn acosh1p(x: f64) -> f64 {
    (x + (x * (x + 2.0)).sqrt()).ln_1p()
}

/// `1 - ‖p‖²`, factored to keep precision close to the boundary.
fn conformal_denominator(n: f64) -> f64 {
    (1.0 - n) * (1.0 + n)
}

/// Squared Euclidean distance, accumulated in four independent lanes.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    let mut acc = [0.0f64; 4];
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            let d = x[i] - y[i];
            acc[i] += d * d;
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += (x - y) * (x - y);
    }
    s
}

/// Poincaré-ball distance
/// `arccosh(1 + 2‖p − q‖² / ((1 − ‖p‖²)(1 − ‖q‖²)))`.
pub fn hyperbolic_distance(p: &PoincareVector, q: &PoincareVector) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            p.dim(),
            q.dim()
        )));
    }
    charge_distance_evaluations(1);
    let ratio = squared_distance(&p.0, &q.0)
        / (conformal_denominator(p.norm()) * conformal_denominator(q.norm()));
    Ok(acosh1p(2.0 * ratio))
}

/// Distance from the origin, `2 · artanh(‖p‖)`.
pub fn distance_from_origin(p: &PoincareVector) -> f64 {
    2.0 * p.norm().atanh()
}

/// A set of embedded points sharing one dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PoincarePointSet {
    dim: usize,
    coords: Vec<f64>,
    norms: Vec<f64>,
    denoms: Vec<f64>,
}

impl PoincarePointSet {
    pub fn from_points(points: &[PoincareVector]) -> Result<Self> {
        let dim = points.first().map_or(0, PoincareVector::dim);
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return Err(Error::invalid(format!(
                    "point {i} has dim {}, expected {dim}",
                    p.dim()
                )));
            }
            coords.extend_from_slice(p.coords());
        }
        Ok(Self::from_raw(dim, coords))
    }

    /// Embeds every row of a row-major Euclidean matrix with [`exp_map`].
    pub fn embed(dim: usize, rows: &[f64]) -> Result<Self> {
        if dim == 0 || !rows.len().is_multiple_of(dim) {
            return Err(Error::invalid("row-major data does not match dim"));
        }
        let mut coords = Vec::with_capacity(rows.len());
        for row in rows.chunks_exact(dim) {
            coords.extend(exp_map(row)?.0);
        }
        Ok(Self::from_raw(dim, coords))
    }

    fn from_raw(dim: usize, coords: Vec<f64>) -> Self {
        let norms: Vec<f64> = if dim == 0 {
            Vec::new()
        } else {
            coords.chunks_exact(dim).map(norm).collect()
        };
        let denoms = norms.iter().map(|&n| conformal_denominator(n)).collect();
        Self {
            dim,
            coords,
            norms,
            denoms,
        }
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn to_vector(&self, i: usize) -> PoincareVector {
        PoincareVector(self.point(i).to_vec())
    }

    /// `‖pᵢ − pⱼ‖² / ((1 − ‖pᵢ‖²)(1 − ‖pⱼ‖²))`; the distance is monotone in it.
    /// Does not touch the instrumentation counter.
    pub(crate) fn distance_ratio(&self, i: usize, j: usize) -> f64 {
        squared_distance(self.point(i), self.point(j)) / (self.denoms[i] * self.denoms[j])
    }

    pub(crate) fn ratio_to_distance(ratio: f64) -> f64 {
        acosh1p(2.0 * ratio)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        charge_distance_evaluations(1);
        Self::ratio_to_distance(self.distance_ratio(i, j))
    }
}
