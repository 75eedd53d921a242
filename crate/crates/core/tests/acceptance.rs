//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach the terminal.
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --release --test acceptance -- 1 7`.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use cfm_fdtd::correction::*;
use cfm_fdtd::geometry::{EmbeddedBoundary, Point};
use cfm_fdtd::grid::{curl_ez_at_h, Family, StaggeredGrid, StencilOrder};
use cfm_fdtd::harness::*;
use cfm_fdtd::schemes::*;
use cfm_fdtd::solutions::*;
use common::{gauss_solve, line_setup, oracle_matrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn check(&mut self, pass: bool, line: String) {
        println!("{} {line}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((pass, line));
    }
}

fn config(p: &ProblemSpec, kind: SchemeKind, h: f64) -> SchemeConfig {
    SchemeConfig { beta: p.beta, ..SchemeConfig::new(kind, h, p.dt_ratio).unwrap() }
}

fn inv(ns: &[f64]) -> Vec<f64> {
    ns.iter().map(|n| 1.0 / n).collect()
}

fn describe(t: &ConvergenceTable) -> String {
    let errs: Vec<String> = t.rows.iter().map(|r| format!("{:.3e}", r.l2_u)).collect();
    let ords: Vec<String> = t.orders.iter().map(|o| format!("{o:.2}")).collect();
    let fail = t.failure.as_deref().map(|f| format!(" failure: {f}")).unwrap_or_default();
    format!("errors [{}] orders [{}]{fail}", errs.join(", "), ords.join(", "))
}

/// Order between the two finest grids, checked against `[lo, hi]`.
fn order_check(r: &mut Report, label: &str, p: &ProblemSpec, kind: SchemeKind, ns: &[f64], lo: f64, hi: f64) {
    let start = Instant::now();
    let t = convergence_study(p, &inv(ns), |h| Ok(config(p, kind, h))).unwrap();
    let order = if t.failure.is_some() { f64::NAN } else { t.final_order().unwrap_or(f64::NAN) };
    let range = if hi.is_finite() { format!("[{lo}, {hi}]") } else { format!(">= {lo}") };
    r.check(
        order >= lo && order <= hi,
        format!("{label}: order {order:.3} in {range}; {} ({:.0}s)", describe(&t), start.elapsed().as_secs_f64()),
    );
}

fn criterion_1(r: &mut Report) {
    let p = circular_cavity(6, 2).unwrap();
    let ns = [20.0, 40.0, 80.0, 160.0];
    order_check(r, "1 circular cavity Yee", &p, SchemeKind::Yee, &ns, 1.7, 2.3);
    // target 3.5, hard floor 3.0
    let t = convergence_study(&p, &inv(&ns), |h| Ok(config(&p, SchemeKind::Fourth, h))).unwrap();
    let order = t.final_order().unwrap_or(f64::NAN);
    let note = if order >= 3.5 { "" } else { " (below target 3.5)" };
    r.check(
        order >= 3.0 && t.failure.is_none(),
        format!("1 circular cavity 4th: order {order:.3} >= 3.0{note}; {}", describe(&t)),
    );
}

fn criterion_2(r: &mut Report) {
    let p = square_cavity(4, 4).unwrap();
    let ns = [20.0, 40.0, 80.0];
    order_check(r, "2 square cavity Yee", &p, SchemeKind::Yee, &ns, 1.7, 2.3);
    order_check(r, "2 square cavity 4th", &p, SchemeKind::Fourth, &ns, 3.5, f64::INFINITY);
}

fn criterion_3(r: &mut Report) {
    let p = concentric_cylinders().unwrap();
    let ns = [20.0, 40.0, 80.0, 160.0];
    order_check(r, "3 concentric cylinders Yee", &p, SchemeKind::Yee, &ns, 1.7, 2.3);
    order_check(r, "3 concentric cylinders 4th", &p, SchemeKind::Fourth, &ns, 2.7, 4.0);
}

fn criterion_4(r: &mut Report) {
    let ns = [20.0, 40.0, 80.0, 160.0];
    let five = manufactured(Obstacle::FiveStar).unwrap();
    let three = manufactured(Obstacle::ThreeStar).unwrap();
    order_check(r, "4 manufactured 5-star Yee", &five, SchemeKind::Yee, &ns, 1.7, 2.3);
    order_check(r, "4 manufactured 3-star Yee", &three, SchemeKind::Yee, &ns, 1.7, 2.3);
    order_check(r, "4 manufactured 5-star 4th", &five, SchemeKind::Fourth, &ns, 3.5, f64::INFINITY);
    order_check(r, "4 manufactured 3-star 4th", &three, SchemeKind::Fourth, &ns, 2.7, f64::INFINITY);
}

fn criterion_5(r: &mut Report) {
    let p = circular_cavity(6, 2).unwrap();
    for (kind, divisors) in [(SchemeKind::Yee, vec![1.0, 2.0, 4.0]), (SchemeKind::Fourth, vec![4.0])] {
        let base = config(&p, kind, 1.0 / 40.0);
        let cfs: Vec<f64> = divisors.iter().map(|d| base.dt / d).collect();
        for (s, d) in long_run_monitor(&p, &base, 10, &cfs, 1).unwrap().iter().zip(&divisors) {
            let g = s.growth();
            r.check(
                !s.blew_up && g <= 10.0,
                format!("5 long run {} c_f = dt/{d}: final/initial error {g:.3} <= 10 over 10 periods", kind.name()),
            );
        }
    }
}

fn criterion_6(r: &mut Report) {
    let p = pulsed_wave_scattering(Obstacle::Circle).unwrap();
    let n_ref: f64 = 540.0;
    let ns: [f64; 3] = [20.0, 60.0, 180.0];
    let start = Instant::now();
    let ratios: Vec<usize> = ns.iter().map(|n| (n_ref / n).round() as usize).collect();
    let refs = match reference_snapshots(&p, &config(&p, SchemeKind::Fourth, 1.0 / n_ref), &ratios) {
        Ok(v) => v,
        Err(e) => {
            r.check(false, format!("6 scattering reference run failed: {e}"));
            return;
        }
    };
    println!("     reference h = 1/{n_ref} done in {:.0}s", start.elapsed().as_secs_f64());
    for (kind, lo, hi) in [(SchemeKind::Yee, 1.6, 2.4), (SchemeKind::Fourth, 3.3, f64::INFINITY)] {
        let mut rows = Vec::new();
        for (n, reference) in ns.iter().zip(&refs) {
            let s = snapshot_run(&p, &config(&p, kind, 1.0 / n)).unwrap();
            rows.push(compare_to_reference(&s, reference).unwrap());
        }
        let t = ConvergenceTable::from_rows(rows);
        let order = t.final_order().unwrap();
        let range = if hi.is_finite() { format!("[{lo}, {hi}]") } else { format!(">= {lo}") };
        r.check(
            order >= lo && order <= hi,
            format!("6 scattering {}: order {order:.3} in {range}; {}", kind.name(), describe(&t)),
        );
    }
}

fn timed(r: &mut Report, label: &str, f: impl FnOnce() -> Result<String, String>) {
    let start = Instant::now();
    let out = f();
    let secs = start.elapsed().as_secs_f64();
    let fast = secs < 60.0;
    match out {
        Ok(msg) => r.check(fast, format!("7 {label}: {msg} ({secs:.1}s)")),
        Err(msg) => r.check(false, format!("7 {label}: {msg} ({secs:.1}s)")),
    }
}

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn basis_suite() -> Result<String, String> {
    for k in [2, 3] {
        let (h, _) = build_bases(k).map_err(|e| e.to_string())?;
        let want = binomial(k + 4, 3) - (k + 2);
        ensure(h.len() == want, format!("k={k}: {} elements, expected {want}", h.len()))?;
        for (ex, ey) in h.hx.iter().zip(&h.hy) {
            let div = ex.value.derivative(0).add(&ey.value.derivative(1)).simplified();
            ensure(div.is_zero(), format!("k={k}: nonzero divergence {div:?}"))?;
            ensure(
                !ex.value.simplified().is_zero() || !ey.value.simplified().is_zero(),
                format!("k={k}: zero element"),
            )?;
        }
    }
    Ok("16 elements at k=2, 30 at k=3, symbolic divergence identically zero".into())
}

/// Largest relative error of the staggered first derivative on monomials
/// `x^0 .. x^max_degree` (and the same in `y`), away from the periodic seam.
fn stencil_error(order: StencilOrder, max_degree: i32) -> f64 {
    let grid = StaggeredGrid::new((0.0, 1.0), (0.0, 1.0), 1.0 / 16.0).unwrap();
    let reach = order.reach() as usize + 1;
    let mut worst = 0.0f64;
    for d in 0..=max_degree {
        for (axis, family) in [(0, Family::Hy), (1, Family::Hx)] {
            let coord = |p: Point| if axis == 0 { p.x } else { p.y };
            let ez = grid.sample(Family::Ez, |p| (coord(p) + 0.3).powi(d));
            let (cx, cy) = curl_ez_at_h(&grid, &ez, order);
            let (out, sign) = if axis == 0 { (cy, 1.0) } else { (cx, -1.0) };
            let (ni, nj) = grid.dims(family);
            let mut scale = 0.0f64;
            let mut err = 0.0f64;
            for j in reach..nj - reach {
                for i in reach..ni - reach {
                    let p = grid.position(family, i, j);
                    let want = if d == 0 { 0.0 } else { d as f64 * (coord(p) + 0.3).powi(d - 1) };
                    scale = scale.max(want.abs()).max(1.0);
                    err = err.max((sign * out.get(i, j) - want).abs());
                }
            }
            worst = worst.max(err / scale);
        }
    }
    worst
}

fn stencil_suite() -> Result<String, String> {
    let e2 = stencil_error(StencilOrder::Second, 2);
    let e4 = stencil_error(StencilOrder::Fourth, 4);
    ensure(e2 <= 1e-12 && e4 <= 1e-12, format!("relative errors {e2:.2e} (order 2), {e4:.2e} (order 4)"))?;
    Ok(format!("derivatives exact to {e2:.1e} (order 2, degree <= 2) and {e4:.1e} (order 4, degree <= 4)"))
}

/// `H' = -E`, `E' = H` with `E = cos t`, `H = -sin t`, staggered by half a step.
fn oscillator_error(dt: f64) -> f64 {
    let m = default_multistep();
    let n = (10.0 / dt).round() as usize;
    let mut hs: Vec<f64> = (0..4).map(|q| -(-(q as f64 + 0.5) * dt).sin()).collect();
    let mut es: Vec<f64> = (0..4).map(|q| (-(q as f64) * dt).cos()).collect();
    let step = |hist: &[f64], f: &[f64]| {
        -m.alpha[3] * hist[0] - m.alpha[2] * hist[1] - m.alpha[1] * hist[2] - m.alpha[0] * hist[3]
            + dt * (m.beta[2] * f[0] + m.beta[1] * f[1] + m.beta[0] * f[2])
    };
    for _ in 0..n {
        let f: Vec<f64> = es.iter().map(|e| -e).collect();
        hs.insert(0, step(&hs, &f));
        hs.truncate(4);
        es.insert(0, step(&es, &hs));
        es.truncate(4);
    }
    let t = n as f64 * dt;
    (es[0] - t.cos()).abs().max((hs[0] + (t - 0.5 * dt).sin()).abs())
}

fn multistep_suite() -> Result<String, String> {
    let m = default_multistep();
    let sum: f64 = m.alpha.iter().sum();
    ensure((sum + 1.0).abs() <= 1e-12, format!("sum of alpha = {sum}"))?;
    let order = (oscillator_error(0.02) / oscillator_error(0.01)).log2();
    ensure(order >= 3.9, format!("oscillator order {order:.3} < 3.9"))?;
    Ok(format!("sum of alpha + 1 = {:.1e}, oscillator order {order:.3}", sum + 1.0))
}

fn assembly_suite() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let k = if trial % 2 == 0 { 2 } else { 3 };
        let basis = CorrectionBasis::new(k).unwrap();
        let setup = line_setup(&mut rng, k, true);
        let form = assemble_linear_form(&setup, &basis, &QuadratureRule::for_degree(k)).map_err(|e| e.to_string())?;
        let (oracle, perm) = oracle_matrix(&setup, k);
        let scale = oracle.abs().max();
        for p in 0..basis.len() {
            for q in 0..basis.len() {
                worst = worst.max((form.matrix[(p, q)] - oracle[(perm[p], perm[q])]).abs() / scale);
            }
        }
    }
    ensure(worst <= 1e-11, format!("max relative deviation {worst:.2e} > 1e-11"))?;
    Ok(format!("20 random patches match the dense-quadrature oracle to {worst:.1e}"))
}

fn solve_suite() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let basis = CorrectionBasis::new(1).unwrap();
    let n = basis.len();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let m = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
        let rhs = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let sys = AssembledSystem {
            patch: 0,
            matrix: m.clone(),
            rhs: rhs.clone(),
            c_p: 1.0,
            c_f: 1.0,
            quadrature: QuadratureRule::for_degree(1),
            map: ScaledMap::new(Point::new(0.0, 0.0), 1.0, (0.0, 1.0)),
        };
        let sol = solve(&sys, &basis).map_err(|e| e.to_string())?;
        let rows: Vec<Vec<f64>> = (0..n).map(|r| (0..n).map(|c| m[(r, c)]).collect()).collect();
        let x = gauss_solve(rows, rhs.iter().copied().collect());
        let xn = x.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        for (p, q) in sol.coefficients.iter().zip(&x) {
            worst = worst.max((p - q).abs() / xn);
        }
    }
    ensure(worst <= 1e-10, format!("max relative deviation {worst:.2e} > 1e-10"))?;
    Ok(format!("10 random SPD systems match Gaussian elimination to {worst:.1e}"))
}

fn zero_data_suite() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in [2, 3] {
        let basis = CorrectionBasis::new(k).unwrap();
        let setup = line_setup(&mut rng, k, true);
        let rule = QuadratureRule::for_degree(k);
        let sys = assemble_system(&setup, &basis, &rule, &vec![0.0; setup.n_data()]).map_err(|e| e.to_string())?;
        let sol = solve(&sys, &basis).map_err(|e| e.to_string())?;
        ensure(sol.coefficients.iter().all(|&v| v == 0.0), format!("k={k}: nonzero coefficients"))?;
    }
    let mut p = circular_cavity(6, 2).unwrap();
    p.initial = Fields::Zero;
    p.exact = Some(Fields::Zero);
    for kind in [SchemeKind::Yee, SchemeKind::Fourth] {
        let mut s = Solver::new(p.clone(), config(&p, kind, 1.0 / 20.0)).map_err(|e| e.to_string())?;
        s.advance_to(10).map_err(|e| e.to_string())?;
        let st = s.state();
        ensure(Family::ALL.iter().all(|&f| st.field(f).max_abs() == 0.0), format!("{} fields nonzero", kind.name()))?;
    }
    Ok("zero data gives zero coefficients and zero fields for both schemes".into())
}

fn pec_mask_suite() -> Result<String, String> {
    for kind in [SchemeKind::Yee, SchemeKind::Fourth] {
        let p = circular_cavity(6, 2).unwrap();
        let mut s = Solver::new(p.clone(), config(&p, kind, 1.0 / 20.0)).map_err(|e| e.to_string())?;
        for step in 1..=100 {
            s.advance().map_err(|e| e.to_string())?;
            let st = s.state();
            for family in Family::ALL {
                let f = st.field(family);
                let ok = f.data.iter().zip(&s.masks.get(family).plus).all(|(&v, &plus)| plus || v == 0.0);
                ensure(ok, format!("{} {family:?} nonzero in the PEC region at step {step}", kind.name()))?;
            }
        }
    }
    Ok("PEC-region nodes stay exactly zero for 100 steps (both schemes)".into())
}

fn no_boundary_suite() -> Result<String, String> {
    let mut p = square_cavity(2, 3).unwrap();
    p.boundary = EmbeddedBoundary::empty();
    let c = config(&p, SchemeKind::Yee, 1.0 / 16.0);
    let mut s = Solver::new(p.clone(), c.clone()).map_err(|e| e.to_string())?;
    ensure(s.plan.is_empty(), "correction plan not empty".into())?;
    let mut plain = s.state();
    for _ in 0..50 {
        s.advance().map_err(|e| e.to_string())?;
        uncorrected_yee_step(&s.grid, &mut plain, c.dt, p.eps, p.mu);
    }
    let st = s.state();
    for family in Family::ALL {
        let same = st.field(family).data.iter().zip(&plain.field(family).data).all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(same, format!("{family:?} differs from the uncorrected update"))?;
    }
    Ok("50 steps bitwise identical to the uncorrected Yee update".into())
}

fn criterion_7(r: &mut Report) {
    timed(r, "divergence-free basis", basis_suite);
    timed(r, "stencil exactness", stencil_suite);
    timed(r, "multistep coefficients", multistep_suite);
    timed(r, "assembly vs dense quadrature", assembly_suite);
    timed(r, "SPD solve vs dense elimination", solve_suite);
    timed(r, "zero data, zero correction", zero_data_suite);
    timed(r, "PEC mask invariance", pec_mask_suite);
    timed(r, "no-boundary equivalence", no_boundary_suite);
}

fn main() -> ExitCode {
    let criteria: [fn(&mut Report); 7] =
        [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7];
    let selected: Vec<usize> =
        std::env::args().skip(1).filter_map(|a| a.parse().ok()).filter(|n| (1..=7).contains(n)).collect();
    let mut report = Report { lines: Vec::new() };
    let start = Instant::now();
    for (i, run) in criteria.iter().enumerate() {
        if selected.is_empty() || selected.contains(&(i + 1)) {
            run(&mut report);
        }
    }
    let failed = report.lines.iter().filter(|l| !l.0).count();
    println!(
        "\nacceptance: {} checks, {} passed, {failed} failed ({:.0}s)",
        report.lines.len(),
        report.lines.len() - failed,
        start.elapsed().as_secs_f64()
    );
    for (_, line) in report.lines.iter().filter(|l| !l.0) {
        println!("  FAIL {line}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
