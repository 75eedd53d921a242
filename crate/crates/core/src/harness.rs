//! Experiment driver: error norms, convergence tables, long-time monitors,
//! nested-grid reference comparison, config parsing and CSV output.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::grid::{Family, FieldState, RegionMasks, StaggeredGrid};
use crate::schemes::{SchemeConfig, SchemeKind, Solver};
use crate::solutions::{by_name, Fields, ProblemSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub h: f64,
    /// Per-field discrete L² errors, `[Hx, Hy, Ez]`.
    pub l2: [f64; 3],
    pub linf: [f64; 3],
    pub l2_u: f64,
    pub linf_u: f64,
    pub nodes: [usize; 3],
    pub t_e: f64,
    pub wall_time: f64,
}

/// Per-node error accumulation over the canonical `Ω+` nodes.
fn accumulate(
    grid: &StaggeredGrid,
    masks: &RegionMasks,
    h: f64,
    mut err: impl FnMut(Family, usize, usize) -> f64,
) -> ([f64; 3], [f64; 3], [usize; 3]) {
    let mut l2 = [0.0; 3];
    let mut linf = [0.0f64; 3];
    let mut nodes = [0; 3];
    for (k, family) in Family::ALL.into_iter().enumerate() {
        let mask = masks.get(family);
        let mut sum = 0.0;
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                if !mask.is_plus(i, j) {
                    continue;
                }
                let d = err(family, i, j);
                sum += d * d;
                linf[k] = linf[k].max(d.abs());
                nodes[k] += 1;
            }
        }
        l2[k] = (h * h * sum).sqrt();
    }
    (l2, linf, nodes)
}

fn finish(h: f64, t_e: f64, (l2, linf, nodes): ([f64; 3], [f64; 3], [usize; 3])) -> ErrorReport {
    ErrorReport {
        h,
        l2,
        linf,
        l2_u: (l2[0] * l2[0] + l2[1] * l2[1] + l2[2] * l2[2]).sqrt(),
        linf_u: linf[0].max(linf[1]).max(linf[2]),
        nodes,
        t_e,
        wall_time: 0.0,
    }
}

/// Errors against closed-form fields: `E` at `t_e`, `H` at `t_h`.
pub fn field_errors(grid: &StaggeredGrid, masks: &RegionMasks, state: &FieldState, exact: &Fields) -> ErrorReport {
    let acc = accumulate(grid, masks, grid.h, |family, i, j| {
        let t = if family == Family::Ez { state.t_e } else { state.t_h };
        state.field(family).get(i, j) - exact.eval(family, grid.position(family, i, j), t)
    });
    finish(grid.h, state.t_e, acc)
}

pub fn steps_for(t_final: f64, dt: f64) -> Result<usize> {
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::Config(format!("t_final must be finite and >= 0, got {t_final}")));
    }
    Ok((t_final / dt).round() as usize)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub grid: StaggeredGrid,
    pub masks: RegionMasks,
    pub state: FieldState,
    pub report: Option<ErrorReport>,
    pub steps: usize,
}

/// Initialize, step to the problem's `t_final` and report errors when the
/// problem has a closed-form solution.
pub fn run(problem: &ProblemSpec, config: &SchemeConfig) -> Result<RunOutcome> {
    run_with_dumps(problem, config, &[], |_, _| Ok(()))
}

/// Like [`run`], calling `dump(time, solver)` at the steps nearest to each
/// requested time.
pub fn run_with_dumps(
    problem: &ProblemSpec,
    config: &SchemeConfig,
    dump_times: &[f64],
    mut dump: impl FnMut(f64, &Solver) -> Result<()>,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let steps = steps_for(problem.t_final, config.dt)?;
    let mut dump_steps: Vec<(usize, f64)> = Vec::new();
    for &t in dump_times {
        dump_steps.push((steps_for(t, config.dt)?.min(steps), t));
    }
    dump_steps.sort_by(|a, b| a.0.cmp(&b.0));
    let mut solver = Solver::new(problem.clone(), config.clone())?;
    let mut next = 0;
    loop {
        while next < dump_steps.len() && dump_steps[next].0 == solver.step {
            dump(dump_steps[next].1, &solver)?;
            next += 1;
        }
        if solver.step >= steps {
            break;
        }
        solver.advance()?;
    }
    let state = solver.state();
    let mut report = problem.exact.as_ref().map(|ex| field_errors(&solver.grid, &solver.masks, &state, ex));
    if let Some(r) = report.as_mut() {
        r.wall_time = start.elapsed().as_secs_f64();
    }
    log::info!(
        "{} {} h={} steps={} err={:?}",
        problem.name,
        config.kind.name(),
        config.h,
        steps,
        report.as_ref().map(|r| r.l2_u)
    );
    Ok(RunOutcome { grid: solver.grid.clone(), masks: solver.masks.clone(), state, report, steps })
}

pub fn observed_orders(h: &[f64], err: &[f64]) -> Vec<f64> {
    h.windows(2).zip(err.windows(2)).map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ErrorReport>,
    /// `orders[i]` is between rows `i` and `i + 1`.
    pub orders: Vec<f64>,
    /// Set when a run failed; rows hold the completed runs.
    pub failure: Option<String>,
}

impl ConvergenceTable {
    pub fn from_rows(rows: Vec<ErrorReport>) -> Self {
        let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let e: Vec<f64> = rows.iter().map(|r| r.l2_u).collect();
        Self { orders: observed_orders(&h, &e), rows, failure: None }
    }

    /// Order between the two finest grids.
    pub fn final_order(&self) -> Option<f64> {
        self.orders.last().copied()
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut w = BufWriter::new(w);
        writeln!(w, "h,err_Hx,err_Hy,err_Ez,err_U_L2,err_U_Linf,order_U")?;
        for (i, r) in self.rows.iter().enumerate() {
            let order = if i == 0 { String::new() } else { format!("{:.16e}", self.orders[i - 1]) };
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.h, r.l2[0], r.l2[1], r.l2[2], r.l2_u, r.linf_u, order
            )?;
        }
        if let Some(f) = &self.failure {
            writeln!(w, "# failed: {}", f.replace('\n', " "))?;
        }
        Ok(())
    }
}

/// One row of `errors.csv`: `(h, Hx, Hy, Ez, U_L2, U_Linf, order)`.
pub type ErrorsRow = [f64; 7];

pub fn read_errors_csv(r: impl std::io::Read) -> Result<Vec<ErrorsRow>> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if n == 0 || line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(Error::Parse(format!("errors.csv line {}: expected 7 columns", n + 1)));
        }
        let mut row = [f64::NAN; 7];
        for (k, c) in cols.iter().enumerate() {
            if !c.is_empty() {
                row[k] = c.parse().map_err(|_| Error::Parse(format!("errors.csv line {}: bad number '{c}'", n + 1)))?;
            }
        }
        out.push(row);
    }
    Ok(out)
}

pub fn convergence_study(
    problem: &ProblemSpec,
    h_list: &[f64],
    config_for: impl Fn(f64) -> Result<SchemeConfig>,
) -> Result<ConvergenceTable> {
    if h_list.len() < 3 {
        return Err(Error::Config(format!("a convergence study needs at least 3 grid sizes, got {}", h_list.len())));
    }
    if problem.exact.is_none() {
        return Err(Error::Config(format!(
            "problem {} has no closed-form solution; use a reference study",
            problem.name
        )));
    }
    let mut rows = Vec::new();
    for &h in h_list {
        match config_for(h).and_then(|c| run(problem, &c)) {
            Ok(out) => rows.push(out.report.expect("exact solution present")),
            Err(e) => {
                let mut t = ConvergenceTable::from_rows(rows);
                t.failure = Some(format!("h={h}: {e}"));
                return Ok(t);
            }
        }
    }
    Ok(ConvergenceTable::from_rows(rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongRunSeries {
    pub c_f: f64,
    /// `(period, err_U_L2)`; the first sample is the initial error.
    pub samples: Vec<(f64, f64)>,
    pub blew_up: bool,
}

impl LongRunSeries {
    /// Final over initial error (initial taken after the first period when
    /// the start is exact).
    pub fn growth(&self) -> f64 {
        let first = self.samples.iter().map(|s| s.1).find(|&e| e > 0.0).unwrap_or(0.0);
        let last = self.samples.last().map(|s| s.1).unwrap_or(0.0);
        if first == 0.0 {
            if last == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            last / first
        }
    }
}

/// Errors sampled once per period (`samples_per_period` times) for each `c_f`.
pub fn long_run_monitor(
    problem: &ProblemSpec,
    base: &SchemeConfig,
    n_periods: usize,
    cf_list: &[f64],
    samples_per_period: usize,
) -> Result<Vec<LongRunSeries>> {
    let period =
        problem.period.ok_or_else(|| Error::Config(format!("problem {} has no defined period", problem.name)))?;
    let exact = problem
        .exact
        .as_ref()
        .ok_or_else(|| Error::Config(format!("problem {} has no closed-form solution", problem.name)))?;
    let per = samples_per_period.max(1);
    let mut out = Vec::new();
    for &c_f in cf_list {
        let config = SchemeConfig { c_f, ..base.clone() };
        let mut solver = Solver::new(problem.clone(), config.clone())?;
        let e0 = field_errors(&solver.grid, &solver.masks, &solver.state(), exact).l2_u;
        let mut series = LongRunSeries { c_f, samples: vec![(0.0, e0)], blew_up: false };
        for q in 1..=n_periods * per {
            let p = q as f64 / per as f64;
            let target = steps_for(p * period, config.dt)?;
            match solver.advance_to(target) {
                Ok(()) => {
                    let e = field_errors(&solver.grid, &solver.masks, &solver.state(), exact).l2_u;
                    let limit = 1e6 * series.samples.iter().map(|s| s.1).fold(0.0, f64::max).max(1e-300);
                    series.samples.push((p, e));
                    if !e.is_finite() || (e0 > 0.0 && e > limit) {
                        series.blew_up = true;
                        break;
                    }
                }
                Err(Error::BlowUp { .. }) | Err(Error::AtStep { .. }) => {
                    series.samples.push((p, f64::INFINITY));
                    series.blew_up = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        out.push(series);
    }
    Ok(out)
}

pub fn write_longrun_csv(series: &[LongRunSeries], w: impl Write) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "period,cf,err_U_L2")?;
    for s in series {
        for &(p, e) in &s.samples {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", p, s.c_f, e)?;
        }
        if s.blew_up {
            writeln!(w, "# cf={:.16e} blew up", s.c_f)?;
        }
    }
    Ok(())
}

/// Field snapshot on a grid (`E` at `t_e`, `H` at `t_h`).
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub grid: StaggeredGrid,
    pub masks: RegionMasks,
    pub state: FieldState,
}

/// Index map of a coarse grid into a nested fine grid with odd ratio `r`.
fn nesting_ratio(coarse: &StaggeredGrid, fine: &StaggeredGrid) -> Result<usize> {
    let q = coarse.h / fine.h;
    let r = q.round();
    let ok = (q - r).abs() < 1e-9 * q
        && r >= 1.0
        && (r as usize) % 2 == 1
        && (coarse.x_min - fine.x_min).abs() < 1e-12
        && (coarse.y_min - fine.y_min).abs() < 1e-12
        && fine.nx == coarse.nx * r as usize
        && fine.ny == coarse.ny * r as usize;
    if ok {
        Ok(r as usize)
    } else {
        Err(Error::Config(format!("grids h={} and h={} are not nested with an odd ratio", coarse.h, fine.h)))
    }
}

/// Fine-grid indices of a coarse node (same physical position).
pub fn nested_index(family: Family, r: usize, i: usize, j: usize) -> (usize, usize) {
    let c = (r - 1) / 2;
    match family {
        Family::Ez => (r * i + c, r * j + c),
        Family::Hx => (r * i + c, r * j),
        Family::Hy => (r * i, r * j + c),
    }
}

/// Errors by direct restriction of the reference onto the coarse nodes.
pub fn compare_to_reference(coarse: &Snapshot, reference: &Snapshot) -> Result<ErrorReport> {
    let r = nesting_ratio(&coarse.grid, &reference.grid)?;
    let tol = 1e-9 * coarse.grid.h;
    if (coarse.state.t_e - reference.state.t_e).abs() > tol || (coarse.state.t_h - reference.state.t_h).abs() > tol {
        return Err(Error::Config(format!(
            "snapshot times differ: coarse (E {}, H {}) vs reference (E {}, H {})",
            coarse.state.t_e, coarse.state.t_h, reference.state.t_e, reference.state.t_h
        )));
    }
    let acc = accumulate(&coarse.grid, &coarse.masks, coarse.grid.h, |family, i, j| {
        let (fi, fj) = nested_index(family, r, i, j);
        coarse.state.field(family).get(i, j) - reference.state.field(family).get(fi, fj)
    });
    Ok(finish(coarse.grid.h, coarse.state.t_e, acc))
}

/// Snapshot at `t_final` on the coarse grid.
pub fn snapshot_run(problem: &ProblemSpec, config: &SchemeConfig) -> Result<Snapshot> {
    let out = run(problem, config)?;
    Ok(Snapshot { grid: out.grid, masks: out.masks, state: out.state })
}

/// Reference snapshots matching coarse grids that are `ratios` times coarser:
/// `E` at `t_final` and `H` at `t_final - r Δt / 2`.
pub fn reference_snapshots(problem: &ProblemSpec, config: &SchemeConfig, ratios: &[usize]) -> Result<Vec<Snapshot>> {
    let steps = steps_for(problem.t_final, config.dt)?;
    let mut solver = Solver::new(problem.clone(), config.clone())?;
    let mut h_levels: BTreeMap<usize, FieldState> = BTreeMap::new();
    let wanted: Vec<usize> = ratios
        .iter()
        .map(|&r| {
            if r % 2 == 0 {
                Err(Error::Config(format!("refinement ratio {r} must be odd")))
            } else {
                Ok(steps.checked_sub((r - 1) / 2).ok_or_else(|| Error::Config("run too short".into()))?)
            }
        })
        .collect::<Result<_>>()?;
    for &s in &wanted {
        h_levels.insert(s, FieldState::zeros(&solver.grid));
    }
    loop {
        if let Some(slot) = h_levels.get_mut(&solver.step) {
            *slot = solver.state();
        }
        if solver.step >= steps {
            break;
        }
        solver.advance()?;
    }
    let last = solver.state();
    Ok(wanted
        .iter()
        .map(|s| {
            let h = &h_levels[s];
            let state =
                FieldState { hx: h.hx.clone(), hy: h.hy.clone(), ez: last.ez.clone(), t_e: last.t_e, t_h: h.t_h };
            Snapshot { grid: solver.grid.clone(), masks: solver.masks.clone(), state }
        })
        .collect())
}

/// Rule for `c_f` relative to `Δt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CfRule {
    /// `c_f = Δt / d`.
    DtOver(f64),
    Value(f64),
}

impl CfRule {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "dt" {
            return Ok(CfRule::DtOver(1.0));
        }
        if let Some(d) = s.strip_prefix("dt/") {
            let d: f64 = d.parse().map_err(|_| Error::Config(format!("bad cf_rule '{s}'")))?;
            if d > 0.0 {
                return Ok(CfRule::DtOver(d));
            }
        } else if let Ok(v) = parse_number(s) {
            if v >= 0.0 {
                return Ok(CfRule::Value(v));
            }
        }
        Err(Error::Config(format!("bad cf_rule '{s}' (dt, dt/N or a number >= 0)")))
    }

    pub fn value(self, dt: f64) -> f64 {
        match self {
            CfRule::DtOver(d) => dt / d,
            CfRule::Value(v) => v,
        }
    }
}

/// Number, or fraction `a/b`.
pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|_| Error::Config(format!("bad number '{s}'")))?;
        let b: f64 = b.trim().parse().map_err(|_| Error::Config(format!("bad number '{s}'")))?;
        a / b
    } else {
        s.parse().map_err(|_| Error::Config(format!("bad number '{s}'")))?
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("bad number '{s}'")))
    }
}

pub const CONFIG_KEYS: [&str; 12] =
    ["problem", "scheme", "h", "dt_ratio", "cf_rule", "cp", "k", "beta", "alpha", "t_final", "out_dir", "dump_times"];

/// Flat `key = value` settings; later sources override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", n + 1)))?;
            s.set(k.trim(), v.trim())?;
        }
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !CONFIG_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown config key '{key}'")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(parse_number).transpose()
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let mut p = by_name(self.get("problem").unwrap_or("circular_cavity"))?;
        if let Some(t) = self.number("t_final")? {
            if !(t >= 0.0) {
                return Err(Error::Config(format!("t_final must be >= 0, got {t}")));
            }
            p = p.with_t_final(t);
        }
        Ok(p)
    }

    pub fn scheme(&self) -> Result<SchemeKind> {
        SchemeKind::parse(self.get("scheme").unwrap_or("yee"))
    }

    /// Scheme configuration at grid size `h` (the `h` key is ignored).
    pub fn scheme_config(&self, problem: &ProblemSpec, h: f64) -> Result<SchemeConfig> {
        let kind = self.scheme()?;
        let dt_ratio = self.number("dt_ratio")?.unwrap_or(problem.dt_ratio);
        if !(dt_ratio > 0.0) {
            return Err(Error::Config(format!("dt_ratio must be positive, got {dt_ratio}")));
        }
        let mut c = SchemeConfig::new(kind, h, dt_ratio)?;
        c.beta = problem.beta;
        if let Some(rule) = self.get("cf_rule") {
            c.c_f = CfRule::parse(rule)?.value(c.dt);
        }
        if let Some(v) = self.number("cp")? {
            c.c_p = v;
        }
        if let Some(v) = self.number("k")? {
            if v.fract() != 0.0 || !(1.0..=4.0).contains(&v) {
                return Err(Error::Config(format!("k must be an integer in 1..=4, got {v}")));
            }
            c.k = v as usize;
            c.interp_degree = c.k.max(2);
        }
        if let Some(v) = self.number("beta")? {
            c.beta = v;
        }
        if let Some(v) = self.number("alpha")? {
            c.alpha = v;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn h(&self) -> Result<f64> {
        let h = self.number("h")?.unwrap_or(1.0 / 40.0);
        if h > 0.0 {
            Ok(h)
        } else {
            Err(Error::Config(format!("h must be positive, got {h}")))
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.get("out_dir").unwrap_or("out"))
    }

    pub fn dump_times(&self) -> Result<Vec<f64>> {
        match self.get("dump_times") {
            None => Ok(Vec::new()),
            Some(s) => parse_list(s),
        }
    }
}

/// Comma- or whitespace-separated numbers (fractions allowed).
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).map(parse_number).collect()
}

/// Writes `Hx`, `Hy`, `Ez` dumps named `<prefix>_<family>.csv`.
pub fn dump_fields(dir: &Path, prefix: &str, grid: &StaggeredGrid, state: &FieldState) -> Result<()> {
    fs::create_dir_all(dir)?;
    for family in Family::ALL {
        let f = fs::File::create(dir.join(format!("{prefix}_{}.csv", family.name())))?;
        state.field(family).write_csv(grid, BufWriter::new(f))?;
    }
    Ok(())
}

/// `(patch, case, condition estimate, max extent)` and
/// `(patch, case, center, segment counts, SPD)` diagnostics.
pub fn write_diagnostics(dir: &Path, solver: &Solver) -> Result<()> {
    fs::create_dir_all(dir)?;
    let diags = solver.diagnostics();
    let mut w = BufWriter::new(fs::File::create(dir.join("patch_conditioning.csv"))?);
    writeln!(w, "patch,case,condition_estimate,max_target_extent")?;
    for d in &diags {
        writeln!(w, "{},{},{:.6e},{:.6e}", d.patch, d.case, d.condition_estimate, d.max_extent)?;
    }
    let mut w = BufWriter::new(fs::File::create(dir.join("patches.csv"))?);
    writeln!(w, "patch,case,center_x,center_y,segments_E,segments_H,spd")?;
    for d in &diags {
        writeln!(
            w,
            "{},{},{:.16e},{:.16e},{},{},{}",
            d.patch, d.case, d.center.x, d.center.y, d.segments_e, d.segments_h, d.spd
        )?;
    }
    Ok(())
}
