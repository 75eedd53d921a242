//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use cfm_fdtd::correction::*;
use cfm_fdtd::geometry::Point;
use cfm_fdtd::grid::Family;
use cfm_fdtd::patches::{ConditionKind, FictitiousInterface, SegmentAxis, SegmentFit, TimeBasis};
use cfm_fdtd::quadrature::GaussLegendre;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Vertical boundary `x = xg` through a patch, `Ω+` on the left.
pub fn line_setup(rng: &mut ChaCha8Rng, k: usize, with_segments: bool) -> PatchSetup {
    let h = rng.gen_range(0.01..0.05);
    let center = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let side = 7.0 * h;
    let dt = 0.5 * h;
    let window = (-1.5 * dt, 0.0);
    let map = ScaledMap::new(center, side, window);
    let rule = QuadratureRule::for_degree(k);
    let xg = center.x + rng.gen_range(-0.5..0.5) * h;
    let curve = cfm_fdtd::geometry::BoundaryCurve::new(
        cfm_fdtd::geometry::Shape::Square { center: Point::new(xg + 10.0, center.y), side: 20.0 },
        cfm_fdtd::geometry::Orientation::PlusOutside,
    )
    .unwrap();
    let bx = cfm_fdtd::geometry::AxisBox::new(center, side);
    let mut boundary = Vec::new();
    for (s0, s1) in curve.boundary_segments_in_box(&bx) {
        boundary.extend(boundary_nodes(&curve, s0, s1, window, &rule));
    }
    let mut segments = Vec::new();
    if with_segments {
        for (family, axis, line, n) in [
            (Family::Ez, SegmentAxis::Horizontal, center.y + 0.5 * h, 3),
            (Family::Ez, SegmentAxis::Vertical, xg - 0.7 * h, 7),
            (Family::Hx, SegmentAxis::Vertical, xg - 1.2 * h, 6),
            (Family::Hy, SegmentAxis::Horizontal, center.y - 0.3 * h, 3),
            (Family::Hx, SegmentAxis::Horizontal, center.y + 1.1 * h, 3),
            (Family::Hy, SegmentAxis::Vertical, xg - 2.1 * h, 7),
        ] {
            let along: Vec<f64> = match axis {
                SegmentAxis::Horizontal => (0..n).map(|i| xg - (n - i) as f64 * h + 0.25 * h).collect(),
                SegmentAxis::Vertical => (0..n).map(|i| center.y + (i as f64 - 3.0) * h).collect(),
            };
            let interface = FictitiousInterface {
                family,
                axis,
                kind: ConditionKind::for_segment(family, axis),
                nodes: (0..n).map(|i| (i, 0)).collect(),
                line,
                along: along.clone(),
            };
            let fit = SegmentFit::new(&along, k).unwrap();
            let (slots, win) = if family == Family::Ez {
                (TimeBasis::lagrange_slots(&[-dt, 0.0]), (-dt, 0.0))
            } else {
                (TimeBasis::lagrange_slots(&[-1.5 * dt, -0.5 * dt]), (-1.5 * dt, -0.5 * dt))
            };
            segments.push(SegmentTerm { interface, fit, slots, window: win });
        }
    }
    PatchSetup { id: 0, map, segments, boundary, eps: 1.0, mu: rng.gen_range(0.5..2.0), c_p: 1.0, c_f: dt }
}

/// Independent evaluation of basis function `j` straight from its
/// stream monomial, in physical partial derivatives.
pub struct Oracle {
    pub streams: Vec<[u32; 3]>,
    pub scalars: Vec<[u32; 3]>,
}

pub fn dpow(x: f64, p: u32, d: u32) -> f64 {
    if d > p {
        return 0.0;
    }
    let mut c = 1.0;
    for q in 0..d {
        c *= (p - q) as f64;
    }
    c * x.powi((p - d) as i32)
}

impl Oracle {
    pub fn new(k: usize) -> Self {
        let mut streams = Vec::new();
        let mut scalars = Vec::new();
        for a in 0..=k as u32 + 1 {
            for b in 0..=k as u32 + 1 {
                for c in 0..=k as u32 + 1 {
                    if a + b + c <= k as u32 + 1 && a + b >= 1 {
                        streams.push([a, b, c]);
                    }
                    if a + b + c <= k as u32 {
                        scalars.push([a, b, c]);
                    }
                }
            }
        }
        Self { streams, scalars }
    }

    /// ψ derivative with multi-index `d` at scaled point `r`.
    pub fn d(e: [u32; 3], d: [u32; 3], r: [f64; 3]) -> f64 {
        dpow(r[0], e[0], d[0]) * dpow(r[1], e[1], d[1]) * dpow(r[2], e[2], d[2])
    }

    /// (Hx, Hy, Ez, residual1x, residual1y, residual2) of each unknown.
    pub fn rows(&self, r: [f64; 3], map: &ScaledMap, eps: f64, mu: f64) -> Vec<[f64; 6]> {
        let (sx, st) = (1.0 / map.half_side, 1.0 / map.t_half);
        let mut out = Vec::new();
        for &e in &self.streams {
            let hx = Self::d(e, [0, 1, 0], r);
            let hy = -Self::d(e, [1, 0, 0], r);
            let dt_hx = st * Self::d(e, [0, 1, 1], r);
            let dt_hy = -st * Self::d(e, [1, 0, 1], r);
            let lap = sx * (Self::d(e, [2, 0, 0], r) + Self::d(e, [0, 2, 0], r));
            out.push([hx, hy, 0.0, mu * dt_hx, mu * dt_hy, lap]);
        }
        for &e in &self.scalars {
            let v = Self::d(e, [0, 0, 0], r);
            out.push([
                0.0,
                0.0,
                v,
                sx * Self::d(e, [0, 1, 0], r),
                -sx * Self::d(e, [1, 0, 0], r),
                eps * st * Self::d(e, [0, 0, 1], r),
            ]);
        }
        out
    }
}

/// Brute-force Hessian with high-order quadrature and the oracle basis.
pub fn oracle_matrix(setup: &PatchSetup, k: usize) -> (DMatrix<f64>, Vec<usize>) {
    let o = Oracle::new(k);
    let n = o.streams.len() + o.scalars.len();
    let mut m = DMatrix::zeros(n, n);
    let map = &setup.map;
    let g = GaussLegendre::new(10);
    let ell = 2.0 * map.half_side;
    for (&a, &wa) in g.nodes.iter().zip(&g.weights) {
        for (&b, &wb) in g.nodes.iter().zip(&g.weights) {
            for (&c, &wc) in g.nodes.iter().zip(&g.weights) {
                let rows = o.rows([a, b, c], map, setup.eps, setup.mu);
                let w = ell * wa * wb * wc * map.half_side * map.half_side * map.t_half;
                for p in 0..n {
                    for q in 0..n {
                        m[(p, q)] += w * (rows[p][3] * rows[q][3] + rows[p][4] * rows[q][4] + rows[p][5] * rows[q][5]);
                    }
                }
            }
        }
    }
    // Boundary: dense trapezoid-free GL on the vertical line, exact for polynomials.
    let bx_half = map.half_side;
    let xg = setup.boundary[0].point.x;
    let gs = GaussLegendre::new(12);
    for (y, wy) in gs.mapped(map.center.y - bx_half, map.center.y + bx_half) {
        for (t, wt) in gs.mapped(map.t_center - map.t_half, map.t_center + map.t_half) {
            let rows = o.rows(map.to_ref(Point::new(xg, y), t), map, setup.eps, setup.mu);
            let w = setup.c_p * wy * wt;
            for p in 0..n {
                for q in 0..n {
                    // n = (-1, 0): n.H = -Hx
                    m[(p, q)] += w * (rows[p][2] * rows[q][2] + rows[p][0] * rows[q][0]);
                }
            }
        }
    }
    let (ne, nh) = setup.interface_counts();
    for seg in &setup.segments {
        let fi = &seg.interface;
        let comp = match fi.family {
            Family::Hx => 0,
            Family::Hy => 1,
            Family::Ez => 2,
        };
        let scale = setup.c_f / if fi.family == Family::Ez { ne } else { nh } as f64;
        for (s, ws) in gs.mapped(fi.start(), fi.end()) {
            for (t, wt) in gs.mapped(seg.window.0, seg.window.1) {
                let rows = o.rows(map.to_ref(fi.point_at(s), t), map, setup.eps, setup.mu);
                for p in 0..n {
                    for q in 0..n {
                        m[(p, q)] += scale * ws * wt * rows[p][comp] * rows[q][comp];
                    }
                }
            }
        }
    }
    // Oracle ordering -> crate ordering.
    let (hb, eb) = build_bases(k).unwrap();
    let mut perm = Vec::new();
    for e in &hb.streams {
        perm.push(o.streams.iter().position(|f| f == e).unwrap());
    }
    for el in &eb.elements {
        let e = el.value.terms[0].1;
        perm.push(o.streams.len() + o.scalars.iter().position(|f| *f == e).unwrap());
    }
    (m, perm)
}

/// Plain Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&p, &q| a[p][col].abs().partial_cmp(&a[q][col].abs()).unwrap()).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}
