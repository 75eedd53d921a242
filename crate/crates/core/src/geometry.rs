//! Parametric embedded boundaries.
//!
//! A [`BoundaryCurve`] is a closed curve `s -> X(s)` on `[s_a, s_b]` together
//! with an orientation telling which side is the non-PEC region `Ω+`.
//! Several curves form an [`EmbeddedBoundary`]; a point is in `Ω+` when every
//! curve places it on its plus side.

use std::f64::consts::PI;

use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, a: f64) -> Point {
        Point::new(self.x * a, self.y * a)
    }
}

/// Axis-aligned square `[cx - half, cx + half] x [cy - half, cy + half]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisBox {
    pub center: Point,
    pub half_side: f64,
}

impl AxisBox {
    pub fn new(center: Point, side: f64) -> Self {
        Self { center, half_side: 0.5 * side }
    }

    pub fn contains(&self, p: Point) -> bool {
        (p.x - self.center.x).abs() <= self.half_side && (p.y - self.center.y).abs() <= self.half_side
    }

    /// Sup-norm distance of `p` from the center, in units of the half side.
    pub fn relative_extent(&self, p: Point) -> f64 {
        (p.x - self.center.x).abs().max((p.y - self.center.y).abs()) / self.half_side
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Circle {
        center: Point,
        radius: f64,
    },
    Square {
        center: Point,
        side: f64,
    },
    /// Piecewise-linear star alternating between `r_outer` and `r_inner`
    /// vertices; `phase` is the angle of the first outer vertex.
    StarPolygon {
        center: Point,
        points: usize,
        r_outer: f64,
        r_inner: f64,
        phase: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    PlusInside,
    PlusOutside,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Plus,
    /// PEC side; all fields are held at zero here.
    Minus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    shape: Shape,
    orientation: Orientation,
    /// Polygon vertices (counter-clockwise) and their cumulative parameter.
    vertices: Vec<Point>,
    vertex_params: Vec<f64>,
}

impl BoundaryCurve {
    pub fn new(shape: Shape, orientation: Orientation) -> Result<Self> {
        let vertices = match shape {
            Shape::Circle { radius, .. } => {
                if !(radius > 0.0) {
                    return Err(Error::Config(format!("circle radius must be positive, got {radius}")));
                }
                Vec::new()
            }
            Shape::Square { center, side } => {
                if !(side > 0.0) {
                    return Err(Error::Config(format!("square side must be positive, got {side}")));
                }
                let a = 0.5 * side;
                [(a, a), (-a, a), (-a, -a), (a, -a)]
                    .iter()
                    .map(|&(dx, dy)| Point::new(center.x + dx, center.y + dy))
                    .collect()
            }
            Shape::StarPolygon { center, points, r_outer, r_inner, phase } => {
                if points < 2 || !(r_outer > 0.0) || !(r_inner > 0.0) {
                    return Err(Error::Config("star polygon needs >= 2 points and positive radii".into()));
                }
                (0..2 * points)
                    .map(|k| {
                        let r = if k % 2 == 0 { r_outer } else { r_inner };
                        let ang = phase + k as f64 * PI / points as f64;
                        Point::new(center.x + r * ang.cos(), center.y + r * ang.sin())
                    })
                    .collect()
            }
        };
        let mut vertex_params = Vec::new();
        if !vertices.is_empty() {
            let n = vertices.len();
            let mut acc = 0.0;
            vertex_params.push(0.0);
            for k in 0..n {
                acc += vertices[k].dist(vertices[(k + 1) % n]);
                vertex_params.push(acc);
            }
            let total = acc;
            for p in vertex_params.iter_mut() {
                *p /= total;
            }
            *vertex_params.last_mut().unwrap() = 1.0;
        }
        Ok(Self { shape, orientation, vertices, vertex_params })
    }

    pub fn circle(center: Point, radius: f64, orientation: Orientation) -> Result<Self> {
        Self::new(Shape::Circle { center, radius }, orientation)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// `[s_a, s_b]`: the polar angle for circles, normalized arc length for polygons.
    pub fn param_range(&self) -> (f64, f64) {
        match self.shape {
            Shape::Circle { .. } => (0.0, 2.0 * PI),
            _ => (0.0, 1.0),
        }
    }

    /// Parameters where the curve is not smooth (polygon vertices), including both ends.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.shape {
            Shape::Circle { .. } => vec![0.0, 2.0 * PI],
            _ => self.vertex_params.clone(),
        }
    }

    pub fn center(&self) -> Point {
        match self.shape {
            Shape::Circle { center, .. } | Shape::Square { center, .. } | Shape::StarPolygon { center, .. } => center,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self.shape {
            Shape::Circle { radius, .. } => 2.0 * radius,
            Shape::Square { side, .. } => side * std::f64::consts::SQRT_2,
            Shape::StarPolygon { r_outer, r_inner, .. } => 2.0 * r_outer.max(r_inner),
        }
    }

    fn check_param(&self, s: f64) -> Result<()> {
        let (a, b) = self.param_range();
        let tol = 1e-12 * (b - a);
        if !(s >= a - tol && s <= b + tol) {
            return Err(Error::Domain(format!("curve parameter {s} outside [{a}, {b}]")));
        }
        Ok(())
    }

    /// Polygon edge index containing `s` and the local fraction along it.
    fn locate_edge(&self, s: f64) -> (usize, f64) {
        let n = self.vertices.len();
        let s = s.clamp(0.0, 1.0);
        let k = match self.vertex_params.binary_search_by(|p| p.partial_cmp(&s).unwrap()) {
            Ok(k) => k.min(n - 1),
            Err(k) => k - 1,
        };
        let (p0, p1) = (self.vertex_params[k], self.vertex_params[k + 1]);
        (k, (s - p0) / (p1 - p0))
    }

    pub fn eval_point(&self, s: f64) -> Result<Point> {
        self.check_param(s)?;
        Ok(self.point_unchecked(s))
    }

    pub(crate) fn point_unchecked(&self, s: f64) -> Point {
        match self.shape {
            Shape::Circle { center, radius } => Point::new(center.x + radius * s.cos(), center.y + radius * s.sin()),
            _ => {
                let (k, f) = self.locate_edge(s);
                let n = self.vertices.len();
                let (a, b) = (self.vertices[k], self.vertices[(k + 1) % n]);
                a + (b - a) * f
            }
        }
    }

    /// `dX/ds`; on a polygon vertex the outgoing edge is used.
    pub fn tangent(&self, s: f64) -> Point {
        match self.shape {
            Shape::Circle { radius, .. } => Point::new(-radius * s.sin(), radius * s.cos()),
            _ => {
                let (k, _) = self.locate_edge(s);
                let n = self.vertices.len();
                let (a, b) = (self.vertices[k], self.vertices[(k + 1) % n]);
                (b - a) * (1.0 / (self.vertex_params[k + 1] - self.vertex_params[k]))
            }
        }
    }

    /// Unit normal pointing into `Ω+`.
    pub fn unit_normal(&self, s: f64) -> Point {
        let t = self.tangent(s);
        let len = t.norm();
        // Counter-clockwise traversal: (t_y, -t_x) points outward.
        let outward = Point::new(t.y / len, -t.x / len);
        match self.orientation {
            Orientation::PlusOutside => outward,
            Orientation::PlusInside => outward * -1.0,
        }
    }

    /// Signed distance, negative strictly inside the closed curve.
    pub fn signed_distance(&self, p: Point) -> f64 {
        match self.shape {
            Shape::Circle { center, radius } => p.dist(center) - radius,
            Shape::Square { center, side } => {
                let a = 0.5 * side;
                let dx = (p.x - center.x).abs() - a;
                let dy = (p.y - center.y).abs() - a;
                let outside = Point::new(dx.max(0.0), dy.max(0.0)).norm();
                outside + dx.max(dy).min(0.0)
            }
            Shape::StarPolygon { .. } => {
                let n = self.vertices.len();
                let mut dmin = f64::INFINITY;
                let mut inside = false;
                for k in 0..n {
                    let a = self.vertices[k];
                    let b = self.vertices[(k + 1) % n];
                    let ab = b - a;
                    let ap = p - a;
                    let f = ((ap.x * ab.x + ap.y * ab.y) / (ab.x * ab.x + ab.y * ab.y)).clamp(0.0, 1.0);
                    dmin = dmin.min(p.dist(a + ab * f));
                    if (a.y > p.y) != (b.y > p.y) {
                        let xc = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                        if p.x < xc {
                            inside = !inside;
                        }
                    }
                }
                if dmin == 0.0 {
                    0.0
                } else if inside {
                    -dmin
                } else {
                    dmin
                }
            }
        }
    }

    /// Points on the curve itself are `Plus`.
    pub fn classify(&self, p: Point) -> Region {
        let d = self.signed_distance(p);
        let plus = match self.orientation {
            Orientation::PlusInside => d <= 0.0,
            Orientation::PlusOutside => d >= 0.0,
        };
        if plus {
            Region::Plus
        } else {
            Region::Minus
        }
    }

    /// Arc length by composite Gauss-Legendre quadrature of `|X'(s)|`.
    pub fn arc_length(&self) -> f64 {
        let gl = GaussLegendre::new(16);
        let bps = self.breakpoints();
        let mut total = 0.0;
        for w in bps.windows(2) {
            let pieces = 16;
            let ds = (w[1] - w[0]) / pieces as f64;
            for p in 0..pieces {
                let a = w[0] + p as f64 * ds;
                total += gl.integrate(a, a + ds, |s| self.tangent(s).norm());
            }
        }
        total
    }

    /// Parameter subintervals `[s0, s1]` whose image lies in `bx`. Intervals
    /// are split at polygon vertices so each piece is smooth.
    pub fn boundary_segments_in_box(&self, bx: &AxisBox) -> Vec<(f64, f64)> {
        let (sa, sb) = self.param_range();
        let tol = 4.0 * f64::EPSILON * (sb - sa);
        let length = self.arc_length();
        let bps = self.breakpoints();
        let mut out = Vec::new();
        for w in bps.windows(2) {
            let (a, b) = (w[0], w[1]);
            let piece_len = length * (b - a) / (sb - sa);
            let n = ((piece_len / (bx.half_side * 0.05)).ceil() as usize).clamp(8, 1_000_000);
            let ds = (b - a) / n as f64;
            let inside = |s: f64| bx.contains(self.point_unchecked(s));
            let bisect = |mut lo: f64, mut hi: f64, lo_in: bool| {
                // invariant: inside(lo) == lo_in, inside(hi) != lo_in
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if inside(mid) == lo_in {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                if lo_in {
                    lo
                } else {
                    hi
                }
            };
            let mut start: Option<f64> = if inside(a) { Some(a) } else { None };
            let mut prev_s = a;
            let mut prev_in = start.is_some();
            for k in 1..=n {
                let s = if k == n { b } else { a + k as f64 * ds };
                let now_in = inside(s);
                if now_in != prev_in {
                    let edge = bisect(prev_s, s, prev_in);
                    if now_in {
                        start = Some(edge);
                    } else if let Some(s0) = start.take() {
                        if edge > s0 {
                            out.push((s0, edge));
                        }
                    }
                }
                prev_s = s;
                prev_in = now_in;
            }
            if let Some(s0) = start {
                if b > s0 {
                    out.push((s0, b));
                }
            }
        }
        out
    }

    /// Closest point parameter by dense sampling plus golden refinement.
    pub fn closest_param(&self, p: Point) -> f64 {
        let (sa, sb) = self.param_range();
        let n = 4096;
        let ds = (sb - sa) / n as f64;
        let mut best = (f64::INFINITY, sa);
        for k in 0..=n {
            let s = sa + k as f64 * ds;
            let d = self.point_unchecked(s).dist(p);
            if d < best.0 {
                best = (d, s);
            }
        }
        let (mut lo, mut hi) = ((best.1 - ds).max(sa), (best.1 + ds).min(sb));
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if self.point_unchecked(m1).dist(p) < self.point_unchecked(m2).dist(p) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        0.5 * (lo + hi)
    }
}

/// A set of closed curves bounding `Ω+`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedBoundary {
    pub curves: Vec<BoundaryCurve>,
}

impl EmbeddedBoundary {
    pub fn single(curve: BoundaryCurve) -> Self {
        Self { curves: vec![curve] }
    }

    /// Region `r_inner < |x - c| < r_outer` as `Ω+`, walls on both circles.
    pub fn annulus(center: Point, r_inner: f64, r_outer: f64) -> Result<Self> {
        if !(r_inner > 0.0 && r_outer > r_inner) {
            return Err(Error::Config(format!("annulus needs 0 < r_inner < r_outer, got {r_inner}, {r_outer}")));
        }
        Ok(Self {
            curves: vec![
                BoundaryCurve::circle(center, r_inner, Orientation::PlusOutside)?,
                BoundaryCurve::circle(center, r_outer, Orientation::PlusInside)?,
            ],
        })
    }

    /// No embedded boundary: every point is `Plus`.
    pub fn empty() -> Self {
        Self { curves: Vec::new() }
    }

    pub fn classify(&self, p: Point) -> Region {
        if self.curves.iter().all(|c| c.classify(p) == Region::Plus) {
            Region::Plus
        } else {
            Region::Minus
        }
    }
}
