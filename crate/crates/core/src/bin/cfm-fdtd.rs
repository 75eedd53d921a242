use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cfm_fdtd::harness::{
    compare_to_reference, convergence_study, dump_fields, long_run_monitor, parse_list, parse_number,
    reference_snapshots, run_with_dumps, snapshot_run, write_diagnostics, write_longrun_csv, CfRule, ConvergenceTable,
    Settings,
};
use cfm_fdtd::schemes::{SchemeConfig, SchemeKind, Solver};
use cfm_fdtd::{Error, Result};

#[derive(Parser)]
#[command(name = "cfm-fdtd", about = "2-D TMz Maxwell solver with embedded PEC boundaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single run; writes errors.csv (when an exact solution exists) and field dumps.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also write per-patch diagnostics.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Convergence study over several grid sizes; writes errors.csv.
    Study {
        #[command(flatten)]
        common: Common,
        /// Grid sizes, e.g. "1/20,1/40,1/80".
        #[arg(long)]
        h_list: String,
        /// Reference grid size for problems without a closed-form solution
        /// (the reference always uses the 4th-order scheme).
        #[arg(long)]
        ref_h: Option<String>,
    },
    /// Error monitor over many periods; writes longrun.csv.
    Longrun {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        periods: usize,
        /// `c_f` rules, e.g. "dt,dt/2,dt/4".
        #[arg(long)]
        cf_list: String,
        /// Error samples per period.
        #[arg(long, default_value_t = 1)]
        samples: usize,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    dt_ratio: Option<String>,
    #[arg(long)]
    cf_rule: Option<String>,
    #[arg(long)]
    cp: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    t_final: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
    #[arg(long)]
    dump_times: Option<String>,
}

impl Common {
    fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(p) => Settings::from_file(p)?,
            None => Settings::default(),
        };
        let flags = [
            ("problem", &self.problem),
            ("scheme", &self.scheme),
            ("h", &self.h),
            ("dt_ratio", &self.dt_ratio),
            ("cf_rule", &self.cf_rule),
            ("cp", &self.cp),
            ("k", &self.k),
            ("beta", &self.beta),
            ("alpha", &self.alpha),
            ("t_final", &self.t_final),
            ("out_dir", &self.out_dir),
            ("dump_times", &self.dump_times),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                s.set(k, v)?;
            }
        }
        Ok(s)
    }
}

fn write_table(dir: &Path, table: &ConvergenceTable) -> Result<()> {
    fs::create_dir_all(dir)?;
    table.write_csv(fs::File::create(dir.join("errors.csv"))?)?;
    for (i, r) in table.rows.iter().enumerate() {
        let order = if i == 0 { String::new() } else { format!("  order {:.3}", table.orders[i - 1]) };
        println!("h = {:<12.6e} err_U_L2 = {:.6e}{order}", r.h, r.l2_u);
    }
    Ok(())
}

fn cmd_run(common: &Common, diagnostics: bool) -> Result<()> {
    let s = common.settings()?;
    let problem = s.problem()?;
    let config = s.scheme_config(&problem, s.h()?)?;
    let out = s.out_dir();
    let dumps = s.dump_times()?;
    let outcome = run_with_dumps(&problem, &config, &dumps, |t, solver: &Solver| {
        dump_fields(&out, &format!("t{t}"), &solver.grid, &solver.state())
    })?;
    dump_fields(&out, "final", &outcome.grid, &outcome.state)?;
    if diagnostics {
        write_diagnostics(&out, &Solver::new(problem.clone(), config.clone())?)?;
    }
    match outcome.report {
        Some(r) => write_table(&out, &ConvergenceTable::from_rows(vec![r])),
        None => {
            println!("{}: {} steps, fields written to {}", problem.name, outcome.steps, out.display());
            Ok(())
        }
    }
}

fn cmd_study(common: &Common, h_list: &str, ref_h: Option<&str>) -> Result<()> {
    let s = common.settings()?;
    let problem = s.problem()?;
    let hs = parse_list(h_list)?;
    let out = s.out_dir();
    let table = if problem.exact.is_some() {
        convergence_study(&problem, &hs, |h| s.scheme_config(&problem, h))?
    } else {
        let ref_h = ref_h.ok_or_else(|| Error::Config(format!("problem {} needs --ref-h", problem.name)))?;
        let ref_h = parse_number(ref_h)?;
        let mut rc = s.scheme_config(&problem, ref_h)?;
        if rc.kind != SchemeKind::Fourth {
            rc = SchemeConfig { kind: SchemeKind::Fourth, k: 3, interp_degree: 3, c_f: 0.25 * rc.dt, ..rc };
        }
        let ratios: Vec<usize> = hs.iter().map(|h| (h / ref_h).round() as usize).collect();
        let refs = reference_snapshots(&problem, &rc, &ratios)?;
        let mut rows = Vec::new();
        for (&h, r) in hs.iter().zip(&refs) {
            rows.push(compare_to_reference(&snapshot_run(&problem, &s.scheme_config(&problem, h)?)?, r)?);
        }
        ConvergenceTable::from_rows(rows)
    };
    write_table(&out, &table)?;
    match table.failure {
        Some(f) => Err(Error::Initialization(format!("study aborted: {f}"))),
        None => Ok(()),
    }
}

fn cmd_longrun(common: &Common, periods: usize, cf_list: &str, samples: usize) -> Result<()> {
    let s = common.settings()?;
    let problem = s.problem()?;
    let config = s.scheme_config(&problem, s.h()?)?;
    let cfs = cf_list
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| CfRule::parse(t).map(|r| r.value(config.dt)))
        .collect::<Result<Vec<f64>>>()?;
    let series = long_run_monitor(&problem, &config, periods, &cfs, samples)?;
    let out = s.out_dir();
    fs::create_dir_all(&out)?;
    write_longrun_csv(&series, fs::File::create(out.join("longrun.csv"))?)?;
    for sr in &series {
        println!(
            "c_f = {:.6e}: final/first error = {:.3}{}",
            sr.c_f,
            sr.growth(),
            if sr.blew_up { " (blew up)" } else { "" }
        );
    }
    if series.iter().any(|s| s.blew_up) {
        return Err(Error::BlowUp { step: 0, time: f64::NAN });
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let r = match &cli.command {
        Command::Run { common, diagnostics } => cmd_run(common, *diagnostics),
        Command::Study { common, h_list, ref_h } => cmd_study(common, h_list, ref_h.as_deref()),
        Command::Longrun { common, periods, cf_list, samples } => cmd_longrun(common, *periods, cf_list, *samples),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
