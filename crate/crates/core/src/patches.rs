//! Local patches along the embedded boundary and their grid-aligned
//! fictitious interfaces.
//!
//! Patch centers are spread uniformly in the curve parameter, roughly every
//! `α h` of arc length. Each node that needs a correction is served by the
//! patch with the closest center, so a node never receives two different
//! corrections.

use nalgebra::{DMatrix, DVector};

use crate::geometry::{AxisBox, BoundaryCurve, EmbeddedBoundary, Point};
use crate::grid::{Family, RegionMasks, StaggeredGrid};
use crate::{Error, Result};

/// `N_s = round(L / (α h)) + 1` centers at uniformly spaced parameters,
/// both ends included.
pub fn build_patch_centers(curve: &BoundaryCurve, h: f64, alpha: f64) -> Result<Vec<Point>> {
    Ok(patch_center_params(curve, h, alpha)?.into_iter().map(|s| curve.point_unchecked(s)).collect())
}

pub fn patch_center_params(curve: &BoundaryCurve, h: f64, alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0) || !(h > 0.0) {
        return Err(Error::Config(format!("patch spacing needs alpha > 0 and h > 0 (alpha={alpha}, h={h})")));
    }
    let ratio = curve.arc_length() / (alpha * h);
    // round half up
    let n_s = (ratio + 0.5).floor() as usize + 1;
    if n_s < 2 || !ratio.is_finite() {
        return Err(Error::Config(format!(
            "boundary too short for the grid: N_s = {n_s} (L = {}, alpha h = {})",
            curve.arc_length(),
            alpha * h
        )));
    }
    let (sa, sb) = curve.param_range();
    let ds = (sb - sa) / (n_s - 1) as f64;
    Ok((0..n_s).map(|i| if i == n_s - 1 { sb } else { sa + i as f64 * ds }).collect())
}

/// Index of the closest center; ties go to the lowest index.
pub fn associate_node(x: Point, centers: &[Point]) -> usize {
    assert!(!centers.is_empty(), "no patch centers");
    let mut best = (f64::INFINITY, 0);
    for (k, c) in centers.iter().enumerate() {
        let d = (x.x - c.x).powi(2) + (x.y - c.y).powi(2);
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

/// Direction of a fictitious interface. Its normal is the other axis:
/// horizontal segments have normal `(0, 1)`, vertical ones `(1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentAxis {
    Horizontal,
    Vertical,
}

impl SegmentAxis {
    pub fn normal(self) -> Point {
        match self {
            SegmentAxis::Horizontal => Point::new(0.0, 1.0),
            SegmentAxis::Vertical => Point::new(1.0, 0.0),
        }
    }
}

/// Which interface condition a segment carries. Normal-E conditions do not
/// exist in TMz (no in-plane electric field).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConditionKind {
    TangentialE,
    TangentialH,
    NormalH,
}

impl ConditionKind {
    pub fn for_segment(family: Family, axis: SegmentAxis) -> Self {
        match (family, axis) {
            (Family::Ez, _) => ConditionKind::TangentialE,
            // n1 . H = Hx, n2 x H = -Hx
            (Family::Hx, SegmentAxis::Vertical) => ConditionKind::NormalH,
            (Family::Hx, SegmentAxis::Horizontal) => ConditionKind::TangentialH,
            // n1 x H = Hy, n2 . H = Hy
            (Family::Hy, SegmentAxis::Vertical) => ConditionKind::TangentialH,
            (Family::Hy, SegmentAxis::Horizontal) => ConditionKind::NormalH,
        }
    }
}

/// A run of consecutive `Ω+` nodes of one family along one grid line.
#[derive(Debug, Clone, PartialEq)]
pub struct FictitiousInterface {
    pub family: Family,
    pub axis: SegmentAxis,
    pub kind: ConditionKind,
    /// Storage indices of the nodes, in increasing coordinate along the line.
    pub nodes: Vec<(usize, usize)>,
    /// Fixed coordinate of the line (`y` if horizontal, `x` if vertical).
    pub line: f64,
    /// Coordinates of the nodes along the line.
    pub along: Vec<f64>,
}

impl FictitiousInterface {
    pub fn start(&self) -> f64 {
        self.along[0]
    }

    pub fn end(&self) -> f64 {
        *self.along.last().unwrap()
    }

    pub fn point_at(&self, s: f64) -> Point {
        match self.axis {
            SegmentAxis::Horizontal => Point::new(s, self.line),
            SegmentAxis::Vertical => Point::new(self.line, s),
        }
    }

    pub fn endpoints(&self) -> (Point, Point) {
        (self.point_at(self.start()), self.point_at(self.end()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPiece {
    pub curve: usize,
    pub s0: f64,
    pub s1: f64,
}

/// A square, grid-aligned patch `Ω_Γ^h` of side `β h` centered on `Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPatch {
    pub id: usize,
    pub center: Point,
    pub side: f64,
    pub pieces: Vec<BoundaryPiece>,
}

impl LocalPatch {
    pub fn new(id: usize, center: Point, side: f64, boundary: &EmbeddedBoundary) -> Self {
        let bx = AxisBox::new(center, side);
        let pieces = boundary
            .curves
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| {
                c.boundary_segments_in_box(&bx).into_iter().map(move |(s0, s1)| BoundaryPiece { curve: ci, s0, s1 })
            })
            .collect();
        Self { id, center, side, pieces }
    }

    pub fn bounding_box(&self) -> AxisBox {
        AxisBox::new(self.center, self.side)
    }
}

/// All patches of an embedded boundary (every curve contributes its own).
pub fn build_patches(boundary: &EmbeddedBoundary, h: f64, alpha: f64, beta: f64) -> Result<Vec<LocalPatch>> {
    if !(beta > 0.0) {
        return Err(Error::Config(format!("beta must be positive, got {beta}")));
    }
    let mut out = Vec::new();
    for curve in &boundary.curves {
        for c in build_patch_centers(curve, h, alpha)? {
            out.push(LocalPatch::new(out.len(), c, beta * h, boundary));
        }
    }
    Ok(out)
}

/// Maximal runs (`>= min_nodes`) of accepted nodes of every family along the
/// rows and columns inside the patch. `accept` can veto `Ω+` nodes (used when
/// a node lacks data).
pub fn generate_fictitious_interfaces(
    patch: &LocalPatch,
    grid: &StaggeredGrid,
    masks: &RegionMasks,
    min_nodes: usize,
    accept: impl Fn(Family, usize, usize) -> bool,
) -> Result<Vec<FictitiousInterface>> {
    let bx = patch.bounding_box();
    let mut out = Vec::new();
    for family in Family::ALL {
        let (ox, oy) = StaggeredGrid::offsets(family);
        let eps = 1e-9;
        let lo = |c: f64, min: f64, o: f64| ((c - bx.half_side - min) / grid.h - o - eps).ceil() as i64;
        let hi = |c: f64, min: f64, o: f64| ((c + bx.half_side - min) / grid.h - o + eps).floor() as i64;
        let (i0, i1) = (lo(bx.center.x, grid.x_min, ox), hi(bx.center.x, grid.x_min, ox));
        let (j0, j1) = (lo(bx.center.y, grid.y_min, oy), hi(bx.center.y, grid.y_min, oy));
        let mask = masks.get(family);
        let ok = |i: i64, j: i64| {
            let (wi, wj) = grid.wrap(family, i, j);
            mask.is_plus(wi, wj) && accept(family, wi, wj)
        };
        let mut emit = |run: &[(i64, i64)], axis: SegmentAxis| {
            if run.len() < min_nodes {
                return;
            }
            let pts: Vec<Point> = run.iter().map(|&(i, j)| grid.position_signed(family, i, j)).collect();
            let (line, along) = match axis {
                SegmentAxis::Horizontal => (pts[0].y, pts.iter().map(|p| p.x).collect()),
                SegmentAxis::Vertical => (pts[0].x, pts.iter().map(|p| p.y).collect()),
            };
            out.push(FictitiousInterface {
                family,
                axis,
                kind: ConditionKind::for_segment(family, axis),
                nodes: run.iter().map(|&(i, j)| grid.wrap(family, i, j)).collect(),
                line,
                along,
            });
        };
        for j in j0..=j1 {
            let mut run = Vec::new();
            for i in i0..=i1 {
                if ok(i, j) {
                    run.push((i, j));
                } else {
                    emit(&run, SegmentAxis::Horizontal);
                    run.clear();
                }
            }
            emit(&run, SegmentAxis::Horizontal);
        }
        for i in i0..=i1 {
            let mut run = Vec::new();
            for j in j0..=j1 {
                if ok(i, j) {
                    run.push((i, j));
                } else {
                    emit(&run, SegmentAxis::Vertical);
                    run.clear();
                }
            }
            emit(&run, SegmentAxis::Vertical);
        }
    }
    for family in Family::ALL {
        for axis in [SegmentAxis::Horizontal, SegmentAxis::Vertical] {
            if !out.iter().any(|f| f.family == family && f.axis == axis) {
                return Err(Error::PatchDegenerate {
                    patch: patch.id,
                    reason: format!("no {axis:?} fictitious interface for {}", family.name()),
                });
            }
        }
    }
    Ok(out)
}

/// Time dependence of one data slot of an interpolant.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeBasis {
    /// `k`-th Lagrange polynomial through `nodes`.
    Lagrange { nodes: Vec<f64>, k: usize },
    /// Constant 1 (a value slot paired with a derivative slot).
    Constant,
    /// `t - origin` (a time-derivative slot).
    Linear { origin: f64 },
}

impl TimeBasis {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeBasis::Lagrange { nodes, k } => {
                nodes.iter().enumerate().filter(|(m, _)| m != k).map(|(_, &tm)| (t - tm) / (nodes[*k] - tm)).product()
            }
            TimeBasis::Constant => 1.0,
            TimeBasis::Linear { origin } => t - origin,
        }
    }

    /// Lagrange slots through the given snapshot times.
    pub fn lagrange_slots(times: &[f64]) -> Vec<TimeBasis> {
        (0..times.len()).map(|k| TimeBasis::Lagrange { nodes: times.to_vec(), k }).collect()
    }
}

/// Least-squares polynomial along a segment: `p(s) = Σ_k row(s)_k d_k`.
#[derive(Debug, Clone)]
pub struct SegmentFit {
    degree: usize,
    mid: f64,
    half: f64,
    /// `(degree + 1) x n_nodes` pseudo-inverse of the Vandermonde matrix.
    pinv: DMatrix<f64>,
}

impl SegmentFit {
    pub fn new(along: &[f64], max_degree: usize) -> Result<Self> {
        let n = along.len();
        if n < 3 {
            return Err(Error::PatchDegenerate { patch: usize::MAX, reason: format!("segment has {n} < 3 nodes") });
        }
        let degree = max_degree.max(2).min(n - 1);
        let (a, b) = (along[0], along[n - 1]);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let vander = DMatrix::from_fn(n, degree + 1, |r, c| ((along[r] - mid) / half).powi(c as i32));
        let normal = vander.transpose() * &vander;
        let chol = normal
            .cholesky()
            .ok_or_else(|| Error::PatchDegenerate { patch: usize::MAX, reason: "singular segment fit".into() })?;
        let pinv = chol.solve(&vander.transpose());
        Ok(Self { degree, mid, half, pinv })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_nodes(&self) -> usize {
        self.pinv.ncols()
    }

    /// Weights `r` with `p(s) = r . data`.
    pub fn row(&self, s: f64) -> DVector<f64> {
        let u = (s - self.mid) / self.half;
        let mut r = DVector::zeros(self.pinv.ncols());
        let mut p = 1.0;
        for c in 0..=self.degree {
            r.axpy(p, &self.pinv.row(c).transpose(), 1.0);
            p *= u;
        }
        r
    }
}

/// Space-time polynomial `Σ_slot φ_slot(t) q_slot(s)` matching FD data on
/// one fictitious interface.
#[derive(Debug, Clone)]
pub struct SpaceTimeInterpolant {
    pub fit: SegmentFit,
    pub slots: Vec<TimeBasis>,
    /// Per slot: values at the segment nodes.
    pub data: Vec<Vec<f64>>,
}

impl SpaceTimeInterpolant {
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        let row = self.fit.row(s);
        self.slots
            .iter()
            .zip(&self.data)
            .map(|(b, d)| b.eval(t) * row.iter().zip(d).map(|(w, v)| w * v).sum::<f64>())
            .sum()
    }
}

/// Interpolant of FD snapshots on a segment. `snapshots[k][node]` is paired
/// with `slots[k]`.
pub fn build_interpolant(
    segment: &FictitiousInterface,
    snapshots: Vec<Vec<f64>>,
    slots: Vec<TimeBasis>,
    space_degree: usize,
) -> Result<SpaceTimeInterpolant> {
    if snapshots.len() != slots.len() || snapshots.iter().any(|s| s.len() != segment.nodes.len()) {
        return Err(Error::Assembly("snapshot data does not match segment/slots".into()));
    }
    let fit = SegmentFit::new(&segment.along, space_degree)?;
    Ok(SpaceTimeInterpolant { fit, slots, data: snapshots })
}
