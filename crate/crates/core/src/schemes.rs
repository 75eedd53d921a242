//! CFM-Yee and CFM-4th time stepping.
//!
//! Fields in `Ω-` are kept at zero. When a stencil centered at an `Ω+` node
//! reaches into `Ω-`, the value it reads there is replaced by the correction
//! function of the patch serving that node (`0 + D`), evaluated at the
//! node's position and at the time level being differentiated.
//!
//! Every update solves one patch problem per patch ("case"). The patch time
//! window and the interpolation slots of a case only depend on offsets from
//! the case's anchor time, so each (case, patch) operator is assembled once
//! and reused for every step.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::correction::{
    boundary_nodes, BoundaryNode, CorrectionBasis, PatchOperator, PatchSetup, QuadratureRule, ScaledMap, SegmentTerm,
    Target,
};
use crate::geometry::Point;
use crate::grid::{curl_ez_at_h, curl_h_at_ez, Family, Field, FieldState, RegionMasks, StaggeredGrid, StencilOrder};
use crate::patches::{
    associate_node, build_patches, generate_fictitious_interfaces, LocalPatch, SegmentFit, TimeBasis,
};
use crate::solutions::{InitMode, ProblemSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Yee,
    Fourth,
}

impl SchemeKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "yee" => Ok(SchemeKind::Yee),
            "fourth" | "4th" => Ok(SchemeKind::Fourth),
            _ => Err(Error::Config(format!("unknown scheme '{s}' (yee, fourth)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Yee => "yee",
            SchemeKind::Fourth => "fourth",
        }
    }

    pub fn stencil(self) -> StencilOrder {
        match self {
            SchemeKind::Yee => StencilOrder::Second,
            SchemeKind::Fourth => StencilOrder::Fourth,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub h: f64,
    pub dt_ratio: f64,
    pub dt: f64,
    pub c_p: f64,
    pub c_f: f64,
    /// Degree of the correction polynomials.
    pub k: usize,
    /// Patch side in cells.
    pub beta: f64,
    /// Patch center spacing in cells.
    pub alpha: f64,
    /// Degree of the least-squares fits along fictitious interfaces.
    pub interp_degree: usize,
}

impl SchemeConfig {
    /// Defaults: `c_p = 1`, `c_f = Δt` (Yee) or `Δt/4` (4th), `k = 2` or `3`,
    /// `β = 7`, `α = 2`.
    pub fn new(kind: SchemeKind, h: f64, dt_ratio: f64) -> Result<Self> {
        if !(h > 0.0) || !(dt_ratio > 0.0) {
            return Err(Error::Config(format!("need h > 0 and dt_ratio > 0 (h={h}, dt_ratio={dt_ratio})")));
        }
        let dt = dt_ratio * h;
        let (c_f, k) = match kind {
            SchemeKind::Yee => (dt, 2),
            SchemeKind::Fourth => (0.25 * dt, 3),
        };
        Ok(Self { kind, h, dt_ratio, dt, c_p: 1.0, c_f, k, beta: 7.0, alpha: 2.0, interp_degree: k })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.h > 0.0
            && self.dt_ratio > 0.0
            && (self.dt - self.dt_ratio * self.h).abs() <= 1e-12 * self.dt
            && self.c_p > 0.0
            && self.c_f >= 0.0
            && self.beta > 0.0
            && self.alpha > 0.0
            && (1..=4).contains(&self.k)
            && self.interp_degree >= 2;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid scheme configuration: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultistepCoefficients {
    /// `α_0 .. α_3`.
    pub alpha: [f64; 4],
    /// `β_1 .. β_3`.
    pub beta: [f64; 3],
}

pub fn multistep_coefficients(s: f64, t: f64) -> MultistepCoefficients {
    MultistepCoefficients {
        alpha: [
            -1.0 / 22.0 - s / 528.0 + t / 24.0,
            5.0 / 22.0 + 9.0 * s / 176.0 - 9.0 * t / 8.0,
            -9.0 / 22.0 - 201.0 * s / 176.0 + 9.0 * t / 8.0,
            -17.0 / 22.0 + 577.0 * s / 528.0 - t / 24.0,
        ],
        beta: [t, s, s / 22.0 + 12.0 / 11.0],
    }
}

/// The parameters used by the 4th-order scheme.
pub fn default_multistep() -> MultistepCoefficients {
    multistep_coefficients(-1.0, 1.045)
}

/// An `Ω-` node read by some `Ω+` stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEntry {
    pub family: Family,
    pub node: (usize, usize),
    pub point: Point,
    pub patch: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrectionPlan {
    /// `Ez` nodes needed by the magnetic updates.
    pub e_nodes: Vec<PlanEntry>,
    /// `Hx`, `Hy` nodes needed by the electric update.
    pub h_nodes: Vec<PlanEntry>,
    /// `Ω+` update nodes whose stencil touches `Ω-`.
    pub touched_updates: Vec<(Family, (usize, usize))>,
}

impl CorrectionPlan {
    pub fn is_empty(&self) -> bool {
        self.e_nodes.is_empty() && self.h_nodes.is_empty()
    }
}

/// Source nodes (canonical indices) read by the stencil of an update node.
fn stencil_sources(
    grid: &StaggeredGrid,
    order: StencilOrder,
    family: Family,
    i: usize,
    j: usize,
) -> Vec<(Family, usize, usize)> {
    let (i, j) = (i as i64, j as i64);
    let mut out = Vec::new();
    for &(m, _) in order.taps() {
        match family {
            Family::Hx => {
                let (a, b) = grid.wrap(Family::Ez, i, j + m);
                out.push((Family::Ez, a, b));
            }
            Family::Hy => {
                let (a, b) = grid.wrap(Family::Ez, i + m, j);
                out.push((Family::Ez, a, b));
            }
            Family::Ez => {
                let (a, b) = grid.wrap(Family::Hy, i + 1 + m, j);
                out.push((Family::Hy, a, b));
                let (a, b) = grid.wrap(Family::Hx, i, j + 1 + m);
                out.push((Family::Hx, a, b));
            }
        }
    }
    out
}

/// Canonical (non-duplicated) index range of a family.
fn canonical_dims(grid: &StaggeredGrid, _family: Family) -> (usize, usize) {
    (grid.nx, grid.ny)
}

pub fn plan_corrections(
    grid: &StaggeredGrid,
    masks: &RegionMasks,
    patches: &[LocalPatch],
    order: StencilOrder,
) -> Result<CorrectionPlan> {
    let mut plan = CorrectionPlan::default();
    let mut needed: [Vec<bool>; 3] = Family::ALL.map(|f| {
        let (ni, nj) = grid.dims(f);
        vec![false; ni * nj]
    });
    let slot = |f: Family| match f {
        Family::Hx => 0,
        Family::Hy => 1,
        Family::Ez => 2,
    };
    for family in Family::ALL {
        let (ci, cj) = canonical_dims(grid, family);
        let mask = masks.get(family);
        for j in 0..cj {
            for i in 0..ci {
                if !mask.is_plus(i, j) {
                    continue;
                }
                let mut touched = false;
                for (sf, a, b) in stencil_sources(grid, order, family, i, j) {
                    if !masks.get(sf).is_plus(a, b) {
                        touched = true;
                        let ni = grid.dims(sf).0;
                        needed[slot(sf)][b * ni + a] = true;
                    }
                }
                if touched {
                    plan.touched_updates.push((family, (i, j)));
                }
            }
        }
    }
    if plan.touched_updates.is_empty() {
        return Ok(plan);
    }
    if patches.is_empty() {
        return Err(Error::Planning("corrections are needed but there are no patches".into()));
    }
    let centers: Vec<Point> = patches.iter().map(|p| p.center).collect();
    for family in Family::ALL {
        let ni = grid.dims(family).0;
        let (ci, cj) = canonical_dims(grid, family);
        for j in 0..cj {
            for i in 0..ci {
                if !needed[slot(family)][j * ni + i] {
                    continue;
                }
                let point = grid.position(family, i, j);
                let patch = associate_node(point, &centers);
                let extent = patches[patch].bounding_box().relative_extent(point);
                if extent > 1.5 {
                    return Err(Error::Planning(format!(
                        "{} node ({i}, {j}) at {point:?} lies outside 1.5x the box of patch {patch} (extent {extent:.3}); increase beta",
                        family.name()
                    )));
                }
                let e = PlanEntry { family, node: (i, j), point, patch };
                if family == Family::Ez {
                    plan.e_nodes.push(e);
                } else {
                    plan.h_nodes.push(e);
                }
            }
        }
    }
    Ok(plan)
}

/// Which field a target group corrects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FieldClass {
    E,
    H,
}

/// Time layout of one update case; all times in units of `Δt` relative to
/// the anchor.
#[derive(Debug, Clone)]
struct CaseSpec {
    name: &'static str,
    window: (f64, f64),
    h_slots: Vec<TimeBasis>,
    h_window: (f64, f64),
    e_slots: Vec<TimeBasis>,
    e_window: (f64, f64),
    /// Require the magnetic / electric segment nodes to have a clean curl stencil.
    h_clean: bool,
    e_clean: bool,
    targets: Vec<(FieldClass, f64)>,
}

fn scaled(b: TimeBasis, dt: f64) -> TimeBasis {
    match b {
        TimeBasis::Lagrange { nodes, k } => TimeBasis::Lagrange { nodes: nodes.iter().map(|t| t * dt).collect(), k },
        TimeBasis::Constant => TimeBasis::Constant,
        TimeBasis::Linear { origin } => TimeBasis::Linear { origin: origin * dt },
    }
}

fn lagrange(times: &[f64]) -> Vec<TimeBasis> {
    TimeBasis::lagrange_slots(times)
}

fn value_and_derivative(origin: f64) -> Vec<TimeBasis> {
    vec![TimeBasis::Constant, TimeBasis::Linear { origin }]
}

impl CaseSpec {
    fn yee_h() -> Self {
        Self {
            name: "yee-h",
            window: (-1.5, 0.0),
            h_slots: lagrange(&[-1.5, -0.5]),
            h_window: (-1.5, -0.5),
            e_slots: lagrange(&[-1.0, 0.0]),
            e_window: (-1.0, 0.0),
            h_clean: false,
            e_clean: false,
            targets: vec![(FieldClass::E, 0.0)],
        }
    }

    fn yee_e() -> Self {
        Self {
            name: "yee-e",
            window: (-1.5, 0.0),
            h_slots: lagrange(&[-1.0, 0.0]),
            h_window: (-1.0, 0.0),
            e_slots: lagrange(&[-1.5, -0.5]),
            e_window: (-1.5, -0.5),
            h_clean: false,
            e_clean: false,
            targets: vec![(FieldClass::H, 0.0)],
        }
    }

    /// First magnetic update from `H^{-1/2}`, `E^0` and their curls.
    fn yee_init_h() -> Self {
        Self {
            name: "yee-init-h",
            window: (-0.5, 0.0),
            h_slots: value_and_derivative(-0.5),
            h_window: (-0.5, 0.0),
            e_slots: value_and_derivative(0.0),
            e_window: (-0.5, 0.0),
            h_clean: true,
            e_clean: true,
            targets: vec![(FieldClass::E, 0.0)],
        }
    }

    /// First electric update (anchor `t_{1/2}`).
    fn yee_init_e() -> Self {
        Self {
            name: "yee-init-e",
            window: (-1.0, 0.0),
            h_slots: lagrange(&[-1.0, 0.0]),
            h_window: (-1.0, 0.0),
            e_slots: value_and_derivative(-0.5),
            e_window: (-1.0, -0.5),
            h_clean: false,
            e_clean: true,
            targets: vec![(FieldClass::H, 0.0)],
        }
    }

    fn fourth_h(init: bool) -> Self {
        let mut targets = vec![(FieldClass::E, 0.0)];
        if init {
            targets.extend([
                (FieldClass::E, -1.0),
                (FieldClass::E, -2.0),
                (FieldClass::H, -0.5),
                (FieldClass::H, -1.5),
            ]);
        }
        Self {
            name: if init { "fourth-init-h" } else { "fourth-h" },
            window: (-3.5, 0.0),
            h_slots: lagrange(&[-3.5, -2.5, -1.5, -0.5]),
            h_window: (-3.5, -0.5),
            e_slots: lagrange(&[-3.0, -2.0, -1.0, 0.0]),
            e_window: (-3.0, 0.0),
            h_clean: false,
            e_clean: false,
            targets,
        }
    }

    fn fourth_e() -> Self {
        Self {
            name: "fourth-e",
            window: (-3.5, 0.0),
            h_slots: lagrange(&[-3.0, -2.0, -1.0, 0.0]),
            h_window: (-3.0, 0.0),
            e_slots: lagrange(&[-3.5, -2.5, -1.5, -0.5]),
            e_window: (-3.5, -0.5),
            h_clean: false,
            e_clean: false,
            targets: vec![(FieldClass::H, 0.0)],
        }
    }
}

/// Operator of one patch for one case plus the bookkeeping to feed it.
#[derive(Debug, Clone)]
struct PatchCase {
    op: PatchOperator,
    /// Per segment: family, flat node indices.
    segments: Vec<(Family, Vec<usize>)>,
    boundary: Vec<BoundaryNode>,
    /// Per target (operator output order): group, family, flat index.
    targets: Vec<(usize, Family, usize)>,
}

/// One correction value to substitute into a field copy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeCorrection {
    pub family: Family,
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
struct CaseOps {
    spec: CaseSpec,
    patches: Vec<PatchCase>,
}

/// Field data feeding the interpolation slots of a case, in slot order.
struct Sources<'a> {
    h: Vec<(&'a Field, &'a Field)>,
    e: Vec<&'a Field>,
}

/// Summary of the assembled patch operators (diagnostics).
#[derive(Debug, Clone, PartialEq)]
pub struct PatchDiagnostic {
    pub case: &'static str,
    pub patch: usize,
    pub center: Point,
    pub segments_e: usize,
    pub segments_h: usize,
    pub spd: bool,
    pub condition_estimate: f64,
    pub max_extent: f64,
}

struct Context<'a> {
    grid: &'a StaggeredGrid,
    masks: &'a RegionMasks,
    problem: &'a ProblemSpec,
    config: &'a SchemeConfig,
    basis: &'a CorrectionBasis,
    patches: &'a [LocalPatch],
    plan: &'a CorrectionPlan,
    clean: &'a [Vec<bool>; 3],
}

fn fam_slot(f: Family) -> usize {
    match f {
        Family::Hx => 0,
        Family::Hy => 1,
        Family::Ez => 2,
    }
}

fn build_case(ctx: &Context, spec: CaseSpec) -> Result<CaseOps> {
    let dt = ctx.config.dt;
    let rule = QuadratureRule::for_degree(ctx.config.k);
    let n_patches = ctx.patches.len();
    // targets per patch: (group, entry)
    let mut per_patch: Vec<Vec<(usize, PlanEntry)>> = vec![Vec::new(); n_patches];
    for (g, &(class, _)) in spec.targets.iter().enumerate() {
        let entries = match class {
            FieldClass::E => &ctx.plan.e_nodes,
            FieldClass::H => &ctx.plan.h_nodes,
        };
        for e in entries {
            per_patch[e.patch].push((g, *e));
        }
    }
    let h_slots: Vec<TimeBasis> = spec.h_slots.iter().map(|b| scaled(b.clone(), dt)).collect();
    let e_slots: Vec<TimeBasis> = spec.e_slots.iter().map(|b| scaled(b.clone(), dt)).collect();
    let window = (spec.window.0 * dt, spec.window.1 * dt);
    let h_window = (spec.h_window.0 * dt, spec.h_window.1 * dt);
    let e_window = (spec.e_window.0 * dt, spec.e_window.1 * dt);
    let built: Vec<Result<Option<PatchCase>>> = per_patch
        .par_iter()
        .enumerate()
        .map(|(pid, targets)| {
            if targets.is_empty() {
                return Ok(None);
            }
            let patch = &ctx.patches[pid];
            let grid = ctx.grid;
            let accept = |f: Family, i: usize, j: usize| {
                let need = if f == Family::Ez { spec.e_clean } else { spec.h_clean };
                !need || ctx.clean[fam_slot(f)][j * grid.dims(f).0 + i]
            };
            let interfaces = generate_fictitious_interfaces(patch, grid, ctx.masks, 3, accept)?;
            let mut segments = Vec::new();
            let mut seg_nodes = Vec::new();
            for fi in interfaces {
                let fit = SegmentFit::new(&fi.along, ctx.config.interp_degree)
                    .map_err(|_| Error::PatchDegenerate { patch: pid, reason: "segment fit failed".into() })?;
                let (slots, win) =
                    if fi.family == Family::Ez { (e_slots.clone(), e_window) } else { (h_slots.clone(), h_window) };
                let ni = grid.dims(fi.family).0;
                seg_nodes.push((fi.family, fi.nodes.iter().map(|&(i, j)| j * ni + i).collect()));
                segments.push(SegmentTerm { interface: fi, fit, slots, window: win });
            }
            let mut boundary = Vec::new();
            for piece in &patch.pieces {
                let curve = &ctx.problem.boundary.curves[piece.curve];
                boundary.extend(boundary_nodes(curve, piece.s0, piece.s1, window, &rule));
            }
            let setup = PatchSetup {
                id: pid,
                map: ScaledMap::new(patch.center, patch.side, window),
                segments,
                boundary: boundary.clone(),
                eps: ctx.problem.eps,
                mu: ctx.problem.mu,
                c_p: ctx.config.c_p,
                c_f: ctx.config.c_f,
            };
            let mut tlist = Vec::new();
            let mut tinfo = Vec::new();
            for &(g, e) in targets {
                let (class, off) = spec.targets[g];
                let fams: &[Family] = match class {
                    FieldClass::E => &[Family::Ez],
                    FieldClass::H => &[Family::Hx, Family::Hy],
                };
                if !fams.contains(&e.family) {
                    continue;
                }
                tlist.push(Target { family: e.family, point: e.point, t: off * dt });
                let ni = grid.dims(e.family).0;
                tinfo.push((g, e.family, e.node.1 * ni + e.node.0));
            }
            let op = PatchOperator::new(&setup, ctx.basis, &rule, &tlist)?;
            Ok(Some(PatchCase { op, segments: seg_nodes, boundary, targets: tinfo }))
        })
        .collect();
    let mut patches = Vec::new();
    for b in built {
        if let Some(pc) = b? {
            patches.push(pc);
        }
    }
    Ok(CaseOps { spec, patches })
}

impl CaseOps {
    /// Corrections per target group.
    fn apply(&self, sources: &Sources, problem: &ProblemSpec, anchor: f64) -> Vec<Vec<NodeCorrection>> {
        let n_groups = self.spec.targets.len();
        let results: Vec<Vec<(usize, NodeCorrection)>> = self
            .patches
            .par_iter()
            .map(|pc| {
                let mut data = Vec::with_capacity(pc.op.gain.ncols());
                for (family, nodes) in &pc.segments {
                    if *family == Family::Ez {
                        for f in &sources.e {
                            data.extend(nodes.iter().map(|&k| f.data[k]));
                        }
                    } else {
                        for (hx, hy) in &sources.h {
                            let f = if *family == Family::Hx { hx } else { hy };
                            data.extend(nodes.iter().map(|&k| f.data[k]));
                        }
                    }
                }
                let nb = pc.boundary.len();
                if problem.inhomogeneous_boundary {
                    let mut gh = Vec::with_capacity(nb);
                    for b in &pc.boundary {
                        let (ge, h) = problem.boundary_data(b.point, b.normal, anchor + b.t);
                        data.push(ge);
                        gh.push(h);
                    }
                    data.extend(gh);
                } else {
                    data.extend(std::iter::repeat(0.0).take(2 * nb));
                }
                let mut out = vec![0.0; pc.targets.len()];
                pc.op.apply(&data, &mut out);
                pc.targets
                    .iter()
                    .zip(out)
                    .map(|(&(g, family, index), value)| (g, NodeCorrection { family, index, value }))
                    .collect()
            })
            .collect();
        let mut groups = vec![Vec::new(); n_groups];
        for r in results {
            for (g, c) in r {
                groups[g].push(c);
            }
        }
        groups
    }

    fn diagnostics(&self, patches: &[LocalPatch]) -> Vec<PatchDiagnostic> {
        self.patches
            .iter()
            .map(|pc| PatchDiagnostic {
                case: self.spec.name,
                patch: pc.op.patch,
                center: patches[pc.op.patch].center,
                segments_e: pc.segments.iter().filter(|s| s.0 == Family::Ez).count(),
                segments_h: pc.segments.iter().filter(|s| s.0 != Family::Ez).count(),
                spd: true,
                condition_estimate: pc.op.condition,
                max_extent: pc.op.max_extent,
            })
            .collect()
    }
}

fn substitute(field: &Field, corrections: &[NodeCorrection]) -> Field {
    let mut f = field.clone();
    for c in corrections {
        if c.family == f.family {
            f.data[c.index] = c.value;
        }
    }
    f
}

/// `x_new = x + a * d` on `Ω+` nodes, zero on `Ω-`.
fn masked_axpy(x: &Field, a: f64, d: &Field, mask: &crate::grid::Mask) -> Field {
    let mut out = x.clone();
    for ((o, &dv), &p) in out.data.iter_mut().zip(&d.data).zip(&mask.plus) {
        *o = if p { *o + a * dv } else { 0.0 };
    }
    out
}

/// `Σ_k c_k x_k + dt Σ_m b_m f_m` on `Ω+` nodes, zero on `Ω-`.
fn masked_combination(
    xs: &[&Field],
    cs: &[f64],
    fs: &[&Field],
    bs: &[f64],
    dt: f64,
    mask: &crate::grid::Mask,
) -> Field {
    let mut out = xs[0].clone();
    for (idx, o) in out.data.iter_mut().enumerate() {
        if !mask.plus[idx] {
            *o = 0.0;
            continue;
        }
        let mut v = 0.0;
        for (x, c) in xs.iter().zip(cs) {
            v += c * x.data[idx];
        }
        let mut w = 0.0;
        for (f, b) in fs.iter().zip(bs) {
            w += b * f.data[idx];
        }
        *o = v + dt * w;
    }
    out
}

/// Sample `Ω+` nodes of a family from closed-form fields.
pub fn sample_masked(grid: &StaggeredGrid, masks: &RegionMasks, family: Family, f: impl Fn(Point) -> f64) -> Field {
    let mut out = grid.sample(family, f);
    out.apply_mask(masks.get(family));
    out
}

/// Magnetic pair at one time level.
pub type HPair = (Field, Field);

/// Time stepper for one problem and one scheme.
pub struct Solver {
    pub grid: StaggeredGrid,
    pub masks: RegionMasks,
    pub problem: ProblemSpec,
    pub config: SchemeConfig,
    pub patches: Vec<LocalPatch>,
    pub plan: CorrectionPlan,
    order: StencilOrder,
    ms: MultistepCoefficients,
    /// Number of completed full steps.
    pub step: usize,
    /// Newest first: `H^{n-1/2}, H^{n-3/2}, ...`.
    h_hist: VecDeque<HPair>,
    /// Newest first: `E^n, E^{n-1}, ...`.
    e_hist: VecDeque<Field>,
    /// Cached `f_H(E^m)` (newest first), 4th-order scheme only.
    fh_hist: VecDeque<HPair>,
    /// Cached `f_E(H^{m+1/2})` (newest first).
    fe_hist: VecDeque<Field>,
    h_case: Option<CaseOps>,
    e_case: Option<CaseOps>,
    init_h_case: Option<CaseOps>,
    init_e_case: Option<CaseOps>,
    /// `(∂t H^0, ∂t E^{-1/2})` from the curls, for the Yee start-up.
    yee_derivatives: Option<(HPair, Field)>,
    initial_max: f64,
}

impl Solver {
    pub fn new(problem: ProblemSpec, config: SchemeConfig) -> Result<Self> {
        config.validate()?;
        let grid = StaggeredGrid::new(problem.x_range, problem.y_range, config.h)?;
        let masks = RegionMasks::new(&grid, &problem.boundary);
        let order = config.kind.stencil();
        let patches = if problem.boundary.curves.is_empty() {
            Vec::new()
        } else {
            build_patches(&problem.boundary, grid.h, config.alpha, config.beta)?
        };
        let plan = plan_corrections(&grid, &masks, &patches, order)?;
        let mut s = Self {
            grid,
            masks,
            problem,
            config,
            patches,
            plan,
            order,
            ms: default_multistep(),
            step: 0,
            h_hist: VecDeque::new(),
            e_hist: VecDeque::new(),
            fh_hist: VecDeque::new(),
            fe_hist: VecDeque::new(),
            h_case: None,
            e_case: None,
            init_h_case: None,
            init_e_case: None,
            yee_derivatives: None,
            initial_max: 0.0,
        };
        match s.config.kind {
            SchemeKind::Yee => s.yee_initialize()?,
            SchemeKind::Fourth => s.fourth_initialize()?,
        }
        Ok(s)
    }

    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    /// Time of the current electric level `t_n`.
    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    pub fn state(&self) -> FieldState {
        let (hx, hy) = self.h_hist[0].clone();
        FieldState { hx, hy, ez: self.e_hist[0].clone(), t_e: self.time(), t_h: self.time() - 0.5 * self.config.dt }
    }

    pub fn diagnostics(&self) -> Vec<PatchDiagnostic> {
        [&self.init_h_case, &self.init_e_case, &self.h_case, &self.e_case]
            .iter()
            .filter_map(|c| c.as_ref())
            .flat_map(|c| c.diagnostics(&self.patches))
            .collect()
    }

    fn context_parts(&self) -> ([Vec<bool>; 3], CorrectionBasis) {
        let basis = CorrectionBasis::new(self.config.k).map(|b| (*b).clone()).expect("validated degree");
        (self.clean_stencil_nodes(), basis)
    }

    /// Nodes whose curl stencil only reads `Ω+` values.
    fn clean_stencil_nodes(&self) -> [Vec<bool>; 3] {
        Family::ALL.map(|family| {
            let (ni, nj) = self.grid.dims(family);
            let mut v = vec![false; ni * nj];
            for j in 0..nj {
                for i in 0..ni {
                    let (wi, wj) = self.grid.wrap(family, i as i64, j as i64);
                    v[j * ni + i] = stencil_sources(&self.grid, self.order, family, wi, wj)
                        .iter()
                        .all(|&(f, a, b)| self.masks.get(f).is_plus(a, b));
                }
            }
            v
        })
    }

    fn build_cases(&self, specs: Vec<CaseSpec>) -> Result<Vec<CaseOps>> {
        let (clean, basis) = self.context_parts();
        let ctx = Context {
            grid: &self.grid,
            masks: &self.masks,
            problem: &self.problem,
            config: &self.config,
            basis: &basis,
            patches: &self.patches,
            plan: &self.plan,
            clean: &clean,
        };
        specs.into_iter().map(|s| build_case(&ctx, s)).collect()
    }

    fn sample_level(&self, family: Family, t: f64) -> Field {
        let f = &self.problem.initial;
        sample_masked(&self.grid, &self.masks, family, |p| f.eval(family, p, t))
    }

    fn sample_h(&self, t: f64) -> HPair {
        (self.sample_level(Family::Hx, t), self.sample_level(Family::Hy, t))
    }

    /// Past level at `t <= 0`: analytic, or a copy of the initial level when
    /// the fields are quiescent near `Γ`.
    fn history_time(&self, t: f64) -> f64 {
        match self.problem.init_mode {
            InitMode::QuiescentNearGamma => t.max(-0.5 * self.config.dt).min(0.0),
            _ => t,
        }
    }

    pub fn yee_initialize(&mut self) -> Result<()> {
        let dt = self.config.dt;
        self.h_hist.push_back(self.sample_h(-0.5 * dt));
        self.e_hist.push_back(self.sample_level(Family::Ez, 0.0));
        let with_history = !matches!(self.problem.init_mode, InitMode::AnalyticHistory);
        if with_history {
            let t = self.history_time(-1.5 * dt);
            self.h_hist.push_back(self.sample_h(t));
            let t = self.history_time(-dt);
            let e = if t == 0.0 { self.e_hist[0].clone() } else { self.sample_level(Family::Ez, t) };
            self.e_hist.push_back(e);
            let cases = self.build_cases(vec![CaseSpec::yee_h(), CaseSpec::yee_e()])?;
            let mut it = cases.into_iter();
            self.h_case = it.next();
            self.e_case = it.next();
        } else {
            let cases = self.build_cases(vec![
                CaseSpec::yee_init_h(),
                CaseSpec::yee_init_e(),
                CaseSpec::yee_h(),
                CaseSpec::yee_e(),
            ])?;
            let mut it = cases.into_iter();
            self.init_h_case = it.next();
            self.init_e_case = it.next();
            self.h_case = it.next();
            self.e_case = it.next();
            let (cx, cy) = curl_ez_at_h(&self.grid, &self.e_hist[0], self.order);
            let mu = self.problem.mu;
            let dh = (scale(&cx, 1.0 / mu), scale(&cy, 1.0 / mu));
            let (hx, hy) = &self.h_hist[0];
            let de = scale(&curl_h_at_ez(&self.grid, hx, hy, self.order), 1.0 / self.problem.eps);
            self.yee_derivatives = Some((dh, de));
        }
        self.initial_max = self.max_abs();
        Ok(())
    }

    pub fn fourth_initialize(&mut self) -> Result<()> {
        let dt = self.config.dt;
        if self.problem.exact.is_none() && self.problem.init_mode == InitMode::AnalyticHistory {
            return Err(Error::Config(format!("problem {} has no analytic past levels", self.problem.name)));
        }
        for m in 0..4 {
            let th = self.history_time(-(m as f64 + 0.5) * dt);
            self.h_hist.push_back(self.sample_h(th));
            let te = self.history_time(-(m as f64) * dt);
            self.e_hist.push_back(self.sample_level(Family::Ez, te));
        }
        let cases =
            self.build_cases(vec![CaseSpec::fourth_h(true), CaseSpec::fourth_h(false), CaseSpec::fourth_e()])?;
        let mut it = cases.into_iter();
        self.init_h_case = it.next();
        self.h_case = it.next();
        self.e_case = it.next();
        // Corrections at the past levels, then the cached right-hand sides.
        let groups = {
            let case = self.init_h_case.as_ref().unwrap();
            let sources = Sources {
                h: self.h_hist.iter().rev().map(|(a, b)| (a, b)).collect(),
                e: self.e_hist.iter().rev().collect(),
            };
            case.apply(&sources, &self.problem, 0.0)
        };
        // groups: E@0, E@-1, E@-2, H@-1/2, H@-3/2
        for (m, g) in groups[..3].iter().enumerate() {
            let fh = self.f_h(&self.e_hist[m], g);
            self.fh_hist.push_back(fh);
        }
        for (m, g) in groups[3..].iter().enumerate() {
            let (hx, hy) = &self.h_hist[m];
            let fe = self.f_e(hx, hy, g);
            self.fe_hist.push_back(fe);
        }
        self.init_h_case = Some(CaseOps { spec: self.init_h_case.take().unwrap().spec, patches: Vec::new() });
        self.initial_max = self.max_abs();
        Ok(())
    }

    fn f_h(&self, ez: &Field, corr: &[NodeCorrection]) -> HPair {
        let ez = substitute(ez, corr);
        let (cx, cy) = curl_ez_at_h(&self.grid, &ez, self.order);
        let inv = 1.0 / self.problem.mu;
        (scale(&cx, inv), scale(&cy, inv))
    }

    fn f_e(&self, hx: &Field, hy: &Field, corr: &[NodeCorrection]) -> Field {
        let hx = substitute(hx, corr);
        let hy = substitute(hy, corr);
        scale(&curl_h_at_ez(&self.grid, &hx, &hy, self.order), 1.0 / self.problem.eps)
    }

    fn max_abs(&self) -> f64 {
        let (hx, hy) = &self.h_hist[0];
        hx.max_abs().max(hy.max_abs()).max(self.e_hist[0].max_abs())
    }

    /// One full step: `H^{n+1/2}` then `E^{n+1}`.
    pub fn advance(&mut self) -> Result<()> {
        let r = match self.config.kind {
            SchemeKind::Yee => self.yee_step(),
            SchemeKind::Fourth => self.fourth_step(),
        };
        r.map_err(|e| Error::AtStep { step: self.step + 1, source: Box::new(e) })?;
        self.step += 1;
        let m = self.max_abs();
        if !m.is_finite() || (self.initial_max > 0.0 && m > 1e8 * self.initial_max) {
            return Err(Error::BlowUp { step: self.step, time: self.time() });
        }
        Ok(())
    }

    pub fn advance_to(&mut self, steps: usize) -> Result<()> {
        while self.step < steps {
            self.advance()?;
        }
        Ok(())
    }

    pub fn yee_step(&mut self) -> Result<()> {
        let dt = self.config.dt;
        let t_n = self.time();
        let first = self.step == 0 && self.yee_derivatives.is_some();
        // magnetic update
        let ecorr = {
            let (case, sources) = if first {
                let (dh, de) = self.yee_derivatives.as_ref().unwrap();
                (
                    self.init_h_case.as_ref().unwrap(),
                    Sources {
                        h: vec![(&self.h_hist[0].0, &self.h_hist[0].1), (&dh.0, &dh.1)],
                        e: vec![&self.e_hist[0], de],
                    },
                )
            } else {
                (
                    self.h_case.as_ref().unwrap(),
                    Sources {
                        h: vec![(&self.h_hist[1].0, &self.h_hist[1].1), (&self.h_hist[0].0, &self.h_hist[0].1)],
                        e: vec![&self.e_hist[1], &self.e_hist[0]],
                    },
                )
            };
            case.apply(&sources, &self.problem, t_n).swap_remove(0)
        };
        let ez = substitute(&self.e_hist[0], &ecorr);
        let (cx, cy) = curl_ez_at_h(&self.grid, &ez, self.order);
        let a = dt / self.problem.mu;
        let (hx, hy) = &self.h_hist[0];
        let new_h = (masked_axpy(hx, a, &cx, &self.masks.hx), masked_axpy(hy, a, &cy, &self.masks.hy));
        self.h_hist.push_front(new_h);
        self.h_hist.truncate(2);
        // electric update
        let hcorr = {
            let t_half = t_n + 0.5 * dt;
            let (case, sources) = if first {
                let (_, de) = self.yee_derivatives.as_ref().unwrap();
                (
                    self.init_e_case.as_ref().unwrap(),
                    Sources {
                        h: vec![(&self.h_hist[1].0, &self.h_hist[1].1), (&self.h_hist[0].0, &self.h_hist[0].1)],
                        e: vec![&self.e_hist[0], de],
                    },
                )
            } else {
                (
                    self.e_case.as_ref().unwrap(),
                    Sources {
                        h: vec![(&self.h_hist[1].0, &self.h_hist[1].1), (&self.h_hist[0].0, &self.h_hist[0].1)],
                        e: vec![&self.e_hist[1], &self.e_hist[0]],
                    },
                )
            };
            case.apply(&sources, &self.problem, t_half).swap_remove(0)
        };
        let (hx, hy) = &self.h_hist[0];
        let hx = substitute(hx, &hcorr);
        let hy = substitute(hy, &hcorr);
        let curl = curl_h_at_ez(&self.grid, &hx, &hy, self.order);
        let new_e = masked_axpy(&self.e_hist[0], dt / self.problem.eps, &curl, &self.masks.ez);
        self.e_hist.push_front(new_e);
        self.e_hist.truncate(2);
        if first {
            self.yee_derivatives = None;
            self.init_h_case = None;
            self.init_e_case = None;
        }
        Ok(())
    }

    pub fn fourth_step(&mut self) -> Result<()> {
        let dt = self.config.dt;
        let t_n = self.time();
        let ms = self.ms;
        let cs = [-ms.alpha[3], -ms.alpha[2], -ms.alpha[1], -ms.alpha[0]];
        let bs = [ms.beta[2], ms.beta[1], ms.beta[0]];
        // magnetic update: fresh f_H(E^n) unless primed by the start-up solve
        if self.fh_hist.len() < 3 {
            let ecorr = {
                let sources = Sources {
                    h: self.h_hist.iter().rev().map(|(a, b)| (a, b)).collect(),
                    e: self.e_hist.iter().rev().collect(),
                };
                self.h_case.as_ref().unwrap().apply(&sources, &self.problem, t_n).swap_remove(0)
            };
            let fh = self.f_h(&self.e_hist[0], &ecorr);
            self.fh_hist.push_front(fh);
        }
        let new_h = {
            let hxs: Vec<&Field> = self.h_hist.iter().map(|p| &p.0).collect();
            let hys: Vec<&Field> = self.h_hist.iter().map(|p| &p.1).collect();
            let fxs: Vec<&Field> = self.fh_hist.iter().map(|p| &p.0).collect();
            let fys: Vec<&Field> = self.fh_hist.iter().map(|p| &p.1).collect();
            (
                masked_combination(&hxs, &cs, &fxs, &bs, dt, &self.masks.hx),
                masked_combination(&hys, &cs, &fys, &bs, dt, &self.masks.hy),
            )
        };
        self.h_hist.push_front(new_h);
        self.h_hist.truncate(4);
        self.fh_hist.truncate(2);
        // electric update
        let hcorr = {
            let sources = Sources {
                h: self.h_hist.iter().rev().map(|(a, b)| (a, b)).collect(),
                e: self.e_hist.iter().rev().collect(),
            };
            self.e_case.as_ref().unwrap().apply(&sources, &self.problem, t_n + 0.5 * dt).swap_remove(0)
        };
        let fe = {
            let (hx, hy) = &self.h_hist[0];
            self.f_e(hx, hy, &hcorr)
        };
        self.fe_hist.push_front(fe);
        self.fe_hist.truncate(3);
        let new_e = {
            let es: Vec<&Field> = self.e_hist.iter().collect();
            let fs: Vec<&Field> = self.fe_hist.iter().collect();
            masked_combination(&es, &cs, &fs, &bs, dt, &self.masks.ez)
        };
        self.e_hist.push_front(new_e);
        self.e_hist.truncate(4);
        self.fe_hist.truncate(2);
        Ok(())
    }
}

fn scale(f: &Field, a: f64) -> Field {
    let mut out = f.clone();
    out.data.iter_mut().for_each(|v| *v *= a);
    out
}

/// Plain FDTD update of the given order without any correction (reference
/// for the no-boundary equivalence checks).
pub fn uncorrected_yee_step(grid: &StaggeredGrid, state: &mut FieldState, dt: f64, eps: f64, mu: f64) {
    let (cx, cy) = curl_ez_at_h(grid, &state.ez, StencilOrder::Second);
    for (h, c) in state.hx.data.iter_mut().zip(&cx.data) {
        *h += dt / mu * c;
    }
    for (h, c) in state.hy.data.iter_mut().zip(&cy.data) {
        *h += dt / mu * c;
    }
    let curl = curl_h_at_ez(grid, &state.hx, &state.hy, StencilOrder::Second);
    for (e, c) in state.ez.data.iter_mut().zip(&curl.data) {
        *e += dt / eps * c;
    }
    state.t_e += dt;
    state.t_h += dt;
}
