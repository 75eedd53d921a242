//! Correction functions on one local patch: divergence-free space-time bases,
//! assembly of the penalized least-squares functional, SPD solve and
//! evaluation.
//!
//! Everything is expressed in scaled coordinates: the patch box maps to
//! `[-1, 1]^2` and the patch time window to `[-1, 1]`.
//!
//! The unknown vector is `c = [c_H; c_E]`. The right-hand side is linear in
//! the data (fictitious-interface snapshots and boundary values), so besides
//! the plain [`assemble_system`] / [`solve`] path a [`PatchOperator`] folds
//! `M^{-1}` and the evaluation at fixed targets into one dense matrix that
//! maps data straight to corrections.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::geometry::Point;
use crate::grid::Family;
use crate::patches::{FictitiousInterface, SegmentFit, TimeBasis};
use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

/// Polynomial in `(ξ, η, τ)` as a list of `coef * ξ^a η^b τ^c` terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly3 {
    pub terms: Vec<(f64, [u32; 3])>,
}

impl Poly3 {
    pub fn monomial(e: [u32; 3]) -> Self {
        Self { terms: vec![(1.0, e)] }
    }

    pub fn derivative(&self, dim: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(_, e)| e[dim] > 0)
            .map(|&(c, e)| {
                let mut e2 = e;
                e2[dim] -= 1;
                (c * e[dim] as f64, e2)
            })
            .collect();
        Self { terms }
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, e)| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(c, _)| *c == 0.0)
    }

    /// Sum of like terms; zero coefficients dropped.
    pub fn simplified(&self) -> Self {
        let mut terms: Vec<(f64, [u32; 3])> = Vec::new();
        for &(c, e) in &self.terms {
            match terms.iter_mut().find(|(_, f)| *f == e) {
                Some(t) => t.0 += c,
                None => terms.push((c, e)),
            }
        }
        terms.retain(|(c, _)| *c != 0.0);
        Self { terms }
    }

    pub fn add(&self, other: &Poly3) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Self { terms }.simplified()
    }

    fn eval_powers(&self, pw: &Powers) -> f64 {
        self.terms
            .iter()
            .map(|&(c, [a, b, t])| c * pw.0[0][a as usize] * pw.0[1][b as usize] * pw.0[2][t as usize])
            .sum()
    }

    pub fn eval(&self, r: [f64; 3]) -> f64 {
        self.eval_powers(&Powers::new(r, self.degree() as usize))
    }
}

struct Powers([Vec<f64>; 3]);

impl Powers {
    fn new(r: [f64; 3], max: usize) -> Self {
        let col = |x: f64| {
            let mut v = vec![1.0; max + 1];
            for p in 1..=max {
                v[p] = v[p - 1] * x;
            }
            v
        };
        Powers([col(r[0]), col(r[1]), col(r[2])])
    }
}

/// A scalar polynomial together with its three first partials.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub value: Poly3,
    pub grad: [Poly3; 3],
}

impl Element {
    fn new(value: Poly3) -> Self {
        let grad = [value.derivative(0), value.derivative(1), value.derivative(2)];
        Self { value, grad }
    }
}

/// `v = (∂_η ψ, -∂_ξ ψ)` for stream monomials `ψ = ξ^a η^b τ^c`,
/// `a + b >= 1`, `a + b + c <= k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DivFreeBasis {
    pub degree: usize,
    pub streams: Vec<[u32; 3]>,
    pub hx: Vec<Element>,
    pub hy: Vec<Element>,
}

impl DivFreeBasis {
    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }
}

/// Monomials of `P^k(ξ, η, τ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarBasis {
    pub degree: usize,
    pub elements: Vec<Element>,
}

impl ScalarBasis {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

fn monomials(max_total: u32) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for total in 0..=max_total {
        for a in (0..=total).rev() {
            for b in (0..=total - a).rev() {
                out.push([a, b, total - a - b]);
            }
        }
    }
    out
}

pub fn build_bases(k: usize) -> Result<(DivFreeBasis, ScalarBasis)> {
    if !(1..=4).contains(&k) {
        return Err(Error::Config(format!("correction degree must be in 1..=4, got {k}")));
    }
    let streams: Vec<[u32; 3]> = monomials(k as u32 + 1).into_iter().filter(|e| e[0] + e[1] >= 1).collect();
    let mut hx = Vec::new();
    let mut hy = Vec::new();
    for &e in &streams {
        let psi = Poly3::monomial(e);
        let mut neg = psi.derivative(0);
        for t in &mut neg.terms {
            t.0 = -t.0;
        }
        hx.push(Element::new(psi.derivative(1)));
        hy.push(Element::new(neg));
    }
    let elements = monomials(k as u32).into_iter().map(|e| Element::new(Poly3::monomial(e))).collect();
    Ok((DivFreeBasis { degree: k, streams, hx, hy }, ScalarBasis { degree: k, elements }))
}

/// Both bases, shared between all patches of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionBasis {
    pub h: DivFreeBasis,
    pub e: ScalarBasis,
}

impl CorrectionBasis {
    pub fn new(k: usize) -> Result<Arc<Self>> {
        let (h, e) = build_bases(k)?;
        Ok(Arc::new(Self { h, e }))
    }

    pub fn degree(&self) -> usize {
        self.e.degree
    }

    pub fn n_h(&self) -> usize {
        self.h.len()
    }

    pub fn len(&self) -> usize {
        self.h.len() + self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values and scaled-coordinate partials of every unknown at `r`.
    fn sample(&self, r: [f64; 3]) -> BasisSample {
        let pw = Powers::new(r, self.degree() + 1);
        let n = self.len();
        let nh = self.n_h();
        let mut s = BasisSample::zeros(n);
        for (j, (ex, ey)) in self.h.hx.iter().zip(&self.h.hy).enumerate() {
            s.hx[j] = ex.value.eval_powers(&pw);
            s.hy[j] = ey.value.eval_powers(&pw);
            for d in 0..3 {
                s.dhx[d][j] = ex.grad[d].eval_powers(&pw);
                s.dhy[d][j] = ey.grad[d].eval_powers(&pw);
            }
        }
        for (j, el) in self.e.elements.iter().enumerate() {
            s.e[nh + j] = el.value.eval_powers(&pw);
            for d in 0..3 {
                s.de[d][nh + j] = el.grad[d].eval_powers(&pw);
            }
        }
        s
    }

    /// Row `w` with `w . c` the value of `family`'s correction at `r`.
    pub fn value_row(&self, family: Family, r: [f64; 3]) -> DVector<f64> {
        let s = self.sample(r);
        DVector::from_vec(match family {
            Family::Hx => s.hx,
            Family::Hy => s.hy,
            Family::Ez => s.e,
        })
    }
}

/// Entries are over the full unknown vector; blocks that do not apply stay 0.
struct BasisSample {
    hx: Vec<f64>,
    hy: Vec<f64>,
    e: Vec<f64>,
    dhx: [Vec<f64>; 3],
    dhy: [Vec<f64>; 3],
    de: [Vec<f64>; 3],
}

impl BasisSample {
    fn zeros(n: usize) -> Self {
        let z = || vec![0.0; n];
        Self { hx: z(), hy: z(), e: z(), dhx: [z(), z(), z()], dhy: [z(), z(), z()], de: [z(), z(), z()] }
    }
}

/// Affine map from the patch box and time window to `[-1, 1]^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledMap {
    pub center: Point,
    pub half_side: f64,
    pub t_center: f64,
    pub t_half: f64,
}

impl ScaledMap {
    pub fn new(center: Point, side: f64, window: (f64, f64)) -> Self {
        Self {
            center,
            half_side: 0.5 * side,
            t_center: 0.5 * (window.0 + window.1),
            t_half: 0.5 * (window.1 - window.0),
        }
    }

    pub fn to_ref(&self, p: Point, t: f64) -> [f64; 3] {
        [
            (p.x - self.center.x) / self.half_side,
            (p.y - self.center.y) / self.half_side,
            (t - self.t_center) / self.t_half,
        ]
    }

    /// Sup norm of the scaled coordinates (1 on the boundary of the cube).
    pub fn extent(&self, p: Point, t: f64) -> f64 {
        self.to_ref(p, t).iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

/// Gauss-Legendre point counts per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureRule {
    pub volume: usize,
    pub interface: usize,
    pub boundary: usize,
}

impl QuadratureRule {
    /// `k + 2` points per direction; `2 (k + 2)` along `Γ` pieces.
    pub fn for_degree(k: usize) -> Self {
        Self { volume: k + 2, interface: k + 2, boundary: 2 * (k + 2) }
    }
}

/// One fictitious interface with its data description.
#[derive(Debug, Clone)]
pub struct SegmentTerm {
    pub interface: FictitiousInterface,
    pub fit: SegmentFit,
    /// Time dependence of the data slots (times relative to the patch anchor).
    pub slots: Vec<TimeBasis>,
    /// Time integration window of this interface condition.
    pub window: (f64, f64),
}

impl SegmentTerm {
    pub fn n_data(&self) -> usize {
        self.slots.len() * self.interface.nodes.len()
    }
}

/// Quadrature point on `Γ ∩ Ω_Γ^h` times the patch window; `weight`
/// includes the arc-length Jacobian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub point: Point,
    pub normal: Point,
    pub t: f64,
    pub weight: f64,
}

/// Everything needed to assemble one patch system.
#[derive(Debug, Clone)]
pub struct PatchSetup {
    pub id: usize,
    pub map: ScaledMap,
    pub segments: Vec<SegmentTerm>,
    pub boundary: Vec<BoundaryNode>,
    pub eps: f64,
    pub mu: f64,
    pub c_p: f64,
    pub c_f: f64,
}

impl PatchSetup {
    pub fn n_segment_data(&self) -> usize {
        self.segments.iter().map(|s| s.n_data()).sum()
    }

    /// Data vector length: segment values, then `g_E` and `g_H` at the
    /// boundary nodes.
    pub fn n_data(&self) -> usize {
        self.n_segment_data() + 2 * self.boundary.len()
    }

    /// `(N_E, N_H)`.
    pub fn interface_counts(&self) -> (usize, usize) {
        let ne = self.segments.iter().filter(|s| s.interface.family == Family::Ez).count();
        (ne, self.segments.len() - ne)
    }
}

/// `M` and the linear map `rhs = B d` from data to right-hand side.
#[derive(Debug, Clone)]
pub struct LinearForm {
    pub matrix: DMatrix<f64>,
    pub data_map: DMatrix<f64>,
}

/// Gauss-Legendre boundary nodes of one smooth piece of `Γ` over a window.
pub fn boundary_nodes(
    curve: &crate::geometry::BoundaryCurve,
    s0: f64,
    s1: f64,
    window: (f64, f64),
    rule: &QuadratureRule,
) -> Vec<BoundaryNode> {
    let gs = GaussLegendre::new(rule.boundary);
    let gt = GaussLegendre::new(rule.interface);
    let mut out = Vec::new();
    for (s, ws) in gs.mapped(s0, s1) {
        let point = curve.point_unchecked(s);
        let normal = curve.unit_normal(s);
        let jac = curve.tangent(s).norm();
        for (t, wt) in gt.mapped(window.0, window.1) {
            out.push(BoundaryNode { point, normal, t, weight: ws * wt * jac });
        }
    }
    out
}

fn rank1(m: &mut DMatrix<f64>, w: f64, v: &[f64]) {
    let n = v.len();
    for c in 0..n {
        let vc = w * v[c];
        if vc == 0.0 {
            continue;
        }
        let col = m.column_mut(c);
        for (mr, &vr) in col.into_iter().zip(v) {
            *mr += vc * vr;
        }
    }
    debug_assert_eq!(m.nrows(), n);
}

fn axpy_col(m: &mut DMatrix<f64>, col: usize, a: f64, v: &[f64]) {
    for (mr, &vr) in m.column_mut(col).iter_mut().zip(v) {
        *mr += a * vr;
    }
}

/// Hessian `M` and data map of the functional for one patch.
pub fn assemble_linear_form(setup: &PatchSetup, basis: &CorrectionBasis, rule: &QuadratureRule) -> Result<LinearForm> {
    if setup.boundary.is_empty() {
        return Err(Error::Assembly(format!("patch {} has no boundary quadrature nodes", setup.id)));
    }
    let n = basis.len();
    let map = &setup.map;
    let mut m = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, setup.n_data());
    let (sx, st) = (1.0 / map.half_side, 1.0 / map.t_half);
    let ell = 2.0 * map.half_side;

    // Volume residuals over the patch box and window, scaled by ℓ.
    let gv = GaussLegendre::new(rule.volume);
    let jac = map.half_side * map.half_side * map.t_half;
    let mut r1x = vec![0.0; n];
    let mut r1y = vec![0.0; n];
    let mut r2 = vec![0.0; n];
    for (&xi, &wx) in gv.nodes.iter().zip(&gv.weights) {
        for (&eta, &wy) in gv.nodes.iter().zip(&gv.weights) {
            for (&tau, &wt) in gv.nodes.iter().zip(&gv.weights) {
                let s = basis.sample([xi, eta, tau]);
                for j in 0..n {
                    r1x[j] = setup.mu * st * s.dhx[2][j] + sx * s.de[1][j];
                    r1y[j] = setup.mu * st * s.dhy[2][j] - sx * s.de[0][j];
                    r2[j] = setup.eps * st * s.de[2][j] - sx * (s.dhy[0][j] - s.dhx[1][j]);
                }
                let w = ell * wx * wy * wt * jac;
                rank1(&mut m, w, &r1x);
                rank1(&mut m, w, &r1y);
                rank1(&mut m, w, &r2);
            }
        }
    }

    // Boundary penalty: tangential E and normal H on Γ.
    let off = setup.n_segment_data();
    let nb = setup.boundary.len();
    let mut nh = vec![0.0; n];
    for (q, bn) in setup.boundary.iter().enumerate() {
        let s = basis.sample(map.to_ref(bn.point, bn.t));
        for j in 0..n {
            nh[j] = bn.normal.x * s.hx[j] + bn.normal.y * s.hy[j];
        }
        let w = setup.c_p * bn.weight;
        rank1(&mut m, w, &s.e);
        rank1(&mut m, w, &nh);
        axpy_col(&mut b, off + q, w, &s.e);
        axpy_col(&mut b, off + nb + q, w, &nh);
    }

    // Fictitious interfaces, averaged per field.
    let (ne, nhc) = setup.interface_counts();
    let gi = GaussLegendre::new(rule.interface);
    let mut col0 = 0;
    for seg in &setup.segments {
        let fi = &seg.interface;
        let count = if fi.family == Family::Ez { ne } else { nhc };
        let scale = setup.c_f / count as f64;
        let nn = fi.nodes.len();
        for (sa, wa) in gi.mapped(fi.start(), fi.end()) {
            let row = seg.fit.row(sa);
            let p = fi.point_at(sa);
            for (t, wt) in gi.mapped(seg.window.0, seg.window.1) {
                let s = basis.sample(map.to_ref(p, t));
                let v = match fi.family {
                    Family::Ez => &s.e,
                    Family::Hx => &s.hx,
                    Family::Hy => &s.hy,
                };
                let w = scale * wa * wt;
                rank1(&mut m, w, v);
                for (k, slot) in seg.slots.iter().enumerate() {
                    let phi = slot.eval(t);
                    if phi == 0.0 {
                        continue;
                    }
                    for (node, &r) in row.iter().enumerate() {
                        axpy_col(&mut b, col0 + k * nn + node, w * phi * r, v);
                    }
                }
            }
        }
        col0 += seg.n_data();
    }
    // Symmetrize away roundoff from the accumulation order.
    let mt = m.transpose();
    m = (m + mt) * 0.5;
    Ok(LinearForm { matrix: m, data_map: b })
}

/// `M c = rhs` for one patch and one data set.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub patch: usize,
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub c_p: f64,
    pub c_f: f64,
    pub quadrature: QuadratureRule,
    pub map: ScaledMap,
}

/// Assemble with concrete data (`data` laid out as in [`PatchSetup::n_data`]).
pub fn assemble_system(
    setup: &PatchSetup,
    basis: &CorrectionBasis,
    rule: &QuadratureRule,
    data: &[f64],
) -> Result<AssembledSystem> {
    if data.len() != setup.n_data() {
        return Err(Error::Assembly(format!("expected {} data values, got {}", setup.n_data(), data.len())));
    }
    let form = assemble_linear_form(setup, basis, rule)?;
    let rhs = &form.data_map * DVector::from_column_slice(data);
    Ok(AssembledSystem {
        patch: setup.id,
        matrix: form.matrix,
        rhs,
        c_p: setup.c_p,
        c_f: setup.c_f,
        quadrature: *rule,
        map: setup.map,
    })
}

#[derive(Debug, Clone)]
pub struct CorrectionSolution {
    pub coefficients: DVector<f64>,
    pub basis: Arc<CorrectionBasis>,
    pub map: ScaledMap,
    pub residual: f64,
}

impl CorrectionSolution {
    pub fn evaluate(&self, family: Family, x: Point, t: f64) -> f64 {
        let r = self.map.to_ref(x, t);
        if self.map.extent(x, t) > 1.5 {
            log::warn!("correction evaluated at {x:?}, t={t}: scaled extent {:.3} > 1.5", self.map.extent(x, t));
        }
        self.basis.value_row(family, r).dot(&self.coefficients)
    }

    /// `∂_x D_Hx + ∂_y D_Hy` at a point (zero up to roundoff).
    pub fn divergence_h(&self, x: Point, t: f64) -> f64 {
        let s = self.basis.sample(self.map.to_ref(x, t));
        let nh = self.basis.n_h();
        (0..nh).map(|j| (s.dhx[0][j] + s.dhy[1][j]) * self.coefficients[j]).sum::<f64>() / self.map.half_side
    }
}

/// SPD factorization of `M`, then one step of iterative refinement when the
/// relative residual exceeds `1e-10`.
pub fn solve(system: &AssembledSystem, basis: &Arc<CorrectionBasis>) -> Result<CorrectionSolution> {
    let chol = system.matrix.clone().cholesky().ok_or(Error::IllPosed { patch: system.patch })?;
    let mut c = chol.solve(&system.rhs);
    let rnorm = system.rhs.norm();
    let mut res = (&system.matrix * &c - &system.rhs).norm();
    if res > 1e-10 * rnorm {
        let r = &system.rhs - &system.matrix * &c;
        c += chol.solve(&r);
        res = (&system.matrix * &c - &system.rhs).norm();
    }
    if !c.iter().all(|v| v.is_finite()) {
        return Err(Error::IllPosed { patch: system.patch });
    }
    let residual = if rnorm > 0.0 { res / rnorm } else { res };
    Ok(CorrectionSolution { coefficients: c, basis: basis.clone(), map: system.map, residual })
}

/// 2-norm condition number of a symmetric matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let ev = m.clone().symmetric_eigenvalues();
    let (lo, hi) = ev.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
    hi / lo
}

/// A correction requested at a fixed node and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub family: Family,
    pub point: Point,
    pub t: f64,
}

/// Precomputed data-to-correction map of one patch: `values = G d`.
#[derive(Debug, Clone)]
pub struct PatchOperator {
    pub patch: usize,
    pub gain: DMatrix<f64>,
    pub condition: f64,
    pub max_extent: f64,
}

impl PatchOperator {
    pub fn new(setup: &PatchSetup, basis: &CorrectionBasis, rule: &QuadratureRule, targets: &[Target]) -> Result<Self> {
        let form = assemble_linear_form(setup, basis, rule)?;
        let chol = form.matrix.clone().cholesky().ok_or(Error::IllPosed { patch: setup.id })?;
        let n = basis.len();
        let mut rows = DMatrix::zeros(n, targets.len());
        let mut max_extent: f64 = 0.0;
        for (k, tg) in targets.iter().enumerate() {
            max_extent = max_extent.max(setup.map.extent(tg.point, tg.t));
            rows.set_column(k, &basis.value_row(tg.family, setup.map.to_ref(tg.point, tg.t)));
        }
        if max_extent > 1.5 {
            log::warn!("patch {}: correction target at scaled extent {max_extent:.3} > 1.5", setup.id);
        }
        // G = T M^{-1} B = (M^{-1} T^T)^T B
        let x = chol.solve(&rows);
        let gain = x.transpose() * &form.data_map;
        if !gain.iter().all(|v| v.is_finite()) {
            return Err(Error::IllPosed { patch: setup.id });
        }
        let diag = form.matrix.diagonal();
        let condition = diag.max() / diag.min();
        Ok(Self { patch: setup.id, gain, condition, max_extent })
    }

    pub fn apply(&self, data: &[f64], out: &mut [f64]) {
        debug_assert_eq!(data.len(), self.gain.ncols());
        out.iter_mut().for_each(|v| *v = 0.0);
        for (c, &d) in data.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (o, g) in out.iter_mut().zip(self.gain.column(c).iter()) {
                *o += g * d;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_counts() {
        for (k, nh, ne) in [(1, 7, 4), (2, 16, 10), (3, 30, 20), (4, 50, 35)] {
            let (h, e) = build_bases(k).unwrap();
            assert_eq!(h.len(), nh, "k={k}");
            assert_eq!(e.len(), ne, "k={k}");
        }
        assert!(build_bases(0).is_err());
        assert!(build_bases(5).is_err());
    }

    #[test]
    fn stream_xy_gives_x_minus_y() {
        let (h, _) = build_bases(2).unwrap();
        let j = h.streams.iter().position(|&e| e == [1, 1, 0]).unwrap();
        assert_eq!(h.hx[j].value.simplified(), Poly3::monomial([1, 0, 0]));
        let mut neg_y = Poly3::monomial([0, 1, 0]);
        neg_y.terms[0].0 = -1.0;
        assert_eq!(h.hy[j].value.simplified(), neg_y);
    }

    #[test]
    fn divergence_is_zero_polynomial() {
        for k in 1..=4 {
            let (h, _) = build_bases(k).unwrap();
            for (ex, ey) in h.hx.iter().zip(&h.hy) {
                let div = ex.value.derivative(0).add(&ey.value.derivative(1));
                assert!(div.is_zero() && div.terms.is_empty(), "{div:?}");
                assert!(ex.value.degree() as usize <= k);
            }
        }
    }

    fn gram_min_max(elems: &[Vec<f64>]) -> (f64, f64) {
        let n = elems.len();
        let g = DMatrix::from_fn(n, n, |a, b| elems[a].iter().zip(&elems[b]).map(|(x, y)| x * y).sum::<f64>());
        let ev = g.symmetric_eigenvalues();
        (ev.min(), ev.max())
    }

    #[test]
    fn bases_are_independent() {
        let gl = GaussLegendre::new(6);
        for k in 1..=4 {
            let (h, e) = build_bases(k).unwrap();
            let mut hv: Vec<Vec<f64>> = vec![Vec::new(); h.len()];
            let mut ev: Vec<Vec<f64>> = vec![Vec::new(); e.len()];
            for (&a, &wa) in gl.nodes.iter().zip(&gl.weights) {
                for (&b, &wb) in gl.nodes.iter().zip(&gl.weights) {
                    for (&c, &wc) in gl.nodes.iter().zip(&gl.weights) {
                        let w = (wa * wb * wc).sqrt();
                        for j in 0..h.len() {
                            hv[j].push(w * h.hx[j].value.eval([a, b, c]));
                            hv[j].push(w * h.hy[j].value.eval([a, b, c]));
                        }
                        for j in 0..e.len() {
                            ev[j].push(w * e.elements[j].value.eval([a, b, c]));
                        }
                    }
                }
            }
            let (lo, hi) = gram_min_max(&hv);
            assert!(lo > 1e-10 * hi, "k={k}: {lo} {hi}");
            let (lo, hi) = gram_min_max(&ev);
            assert!(lo > 1e-10 * hi, "k={k}: {lo} {hi}");
        }
    }

    #[test]
    fn odd_monomial_vanishes_at_center() {
        let basis = CorrectionBasis::new(2).unwrap();
        let map = ScaledMap::new(Point::new(0.3, -0.2), 0.1, (-0.05, 0.0));
        let mut c = DVector::zeros(basis.len());
        let j = basis.e.elements.iter().position(|e| e.value.terms[0].1 == [1, 0, 0]).unwrap();
        c[basis.n_h() + j] = 1.0;
        let sol = CorrectionSolution { coefficients: c, basis: basis.clone(), map, residual: 0.0 };
        assert_eq!(sol.evaluate(Family::Ez, map.center, map.t_center), 0.0);
        assert!((sol.evaluate(Family::Ez, Point::new(0.35, -0.2), 0.0) - 1.0).abs() < 1e-14);
    }
}
