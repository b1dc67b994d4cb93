//! Batch driver around the library: full multigrid solves of the control
//! problem, contraction-norm sweeps over (beta, smoothing, level) grids, and
//! the discretization-error table, selected by --mode. Numeric artifacts go
//! out as full-precision CSV (--out or stdout); summaries print as text
//! tables rounded to three significant digits.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 numerical failure.

use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use kktmg::driver::{solve_control, SolveConfig};
use kktmg::mesh;
use kktmg::reference::{fe_errors, DesiredState, ExactSolution, MODE_CAP, TAIL_TOL};
use kktmg::spectral::{contraction_sweep, rows_to_csv, MeasureConfig, SweepConfig, SweepRow};
use kktmg::{Cycle, CycleSpec, Domain, Error, Hierarchy, Result};

#[derive(Parser, Debug)]
#[command(
    name = "kktmg",
    version,
    about = "Multigrid benchmark driver for the saddle-point optimal control system"
)]
struct Args {
    /// Domain: unit-square, pentagon, unit-cube or l-shape
    #[arg(long)]
    domain: Option<String>,

    /// What to run: solve, contraction-sweep or table1
    #[arg(long)]
    mode: Option<String>,

    /// Comma-separated regularization parameters
    #[arg(long, alias = "betas")]
    beta: Option<String>,

    /// Finest level of the hierarchy
    #[arg(long)]
    max_level: Option<usize>,

    /// Cycle: w, v, two-grid, or fmg (nested iteration over w cycles)
    #[arg(long)]
    cycle: Option<String>,

    /// Comma-separated symmetric smoothing counts
    #[arg(long, conflicts_with_all = ["m1", "m2"])]
    m: Option<String>,

    /// Pre-smoothing steps (with --m2)
    #[arg(long)]
    m1: Option<usize>,

    /// Post-smoothing steps (with --m1)
    #[arg(long)]
    m2: Option<usize>,

    /// Smoothing steps per leg of the inner V-cycle preconditioner
    #[arg(long)]
    inner_nu: Option<usize>,

    /// Seed for eigenvalue estimation and measurement start vectors
    #[arg(long)]
    seed: Option<u64>,

    /// Write the CSV here instead of stdout
    #[arg(long)]
    out: Option<String>,

    /// Worker threads for sweeps
    #[arg(long)]
    jobs: Option<usize>,

    /// key=value file holding the same keys as the long flags; flags win
    #[arg(long)]
    config: Option<String>,

    /// on or off: time cycle applications (off makes CSVs reproducible)
    #[arg(long)]
    timing: Option<String>,

    /// Comma-separated desired states: one, bubble
    #[arg(long)]
    yd: Option<String>,

    /// Relative residual target of the nested iteration
    #[arg(long)]
    fmg_tol: Option<f64>,

    /// Print the finest mesh as JSON and exit
    #[arg(long, default_value_t = false)]
    dump_mesh: bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Solve,
    ContractionSweep,
    Table1,
}

/// Fully resolved run configuration after merging flags over the config file
/// over per-mode defaults.
struct RunConfig {
    domain: Domain,
    mode: Mode,
    betas: Vec<f64>,
    max_level: usize,
    /// None means fmg: nested iteration driving symmetric W-cycles.
    cycle: Option<Cycle>,
    smoothing: Vec<(usize, usize)>,
    inner_nu: usize,
    seed: u64,
    out: Option<String>,
    jobs: usize,
    timing: bool,
    yd: Vec<DesiredState>,
    fmg_tol: f64,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_list<T, F>(text: &str, what: &str, parse: F) -> Result<Vec<T>>
where
    F: Fn(&str) -> Result<T>,
{
    let items: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(config_err(format!("empty {what} list '{text}'")));
    }
    items.iter().map(|s| parse(s)).collect()
}

fn parse_beta(s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| config_err(format!("beta '{s}' is not a number")))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(config_err(format!("beta must be positive and finite, got {s}")));
    }
    Ok(v)
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| config_err(format!("{what} '{s}' is not a nonnegative integer")))
}

fn parse_yd(s: &str) -> Result<DesiredState> {
    match s {
        "one" => Ok(DesiredState::One),
        "bubble" => Ok(DesiredState::Bubble),
        other => Err(config_err(format!(
            "unknown desired state '{other}' (expected one or bubble)"
        ))),
    }
}

fn parse_switch(s: &str) -> Result<bool> {
    match s {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        other => Err(config_err(format!("expected on or off, got '{other}'"))),
    }
}

/// Reads a key=value file. Keys are normalized to the long flag spelling
/// (lowercase, underscores to hyphens); values may be quoted; # comments.
fn read_config_file(path: &str) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read config file {path}: {e}")))?;
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            config_err(format!("{path}:{}: expected key = value", lineno + 1))
        })?;
        let key = key.trim().to_ascii_lowercase().replace('_', "-");
        let value = value.trim().trim_matches('"').trim_matches('\'').to_string();
        pairs.push((key, value));
    }
    Ok(pairs)
}

/// Fills every flag the command line left unset from the config file.
/// Later lines in the file override earlier ones; flags always win, and
/// --m on the command line shadows file-level m1/m2 and vice versa.
fn merge_config(args: &mut Args, pairs: Vec<(String, String)>) -> Result<()> {
    let cli_m = args.m.is_some();
    let cli_m12 = args.m1.is_some() || args.m2.is_some();
    for (key, value) in pairs {
        match key.as_str() {
            "domain" => args.domain.get_or_insert(value),
            "mode" => args.mode.get_or_insert(value),
            "beta" | "betas" => args.beta.get_or_insert(value),
            "max-level" => args.max_level.get_or_insert(parse_usize(&value, "max-level")?),
            "cycle" => args.cycle.get_or_insert(value),
            "m" => {
                if cli_m12 {
                    continue;
                }
                args.m.get_or_insert(value)
            }
            "m1" => {
                if cli_m {
                    continue;
                }
                args.m1.get_or_insert(parse_usize(&value, "m1")?)
            }
            "m2" => {
                if cli_m {
                    continue;
                }
                args.m2.get_or_insert(parse_usize(&value, "m2")?)
            }
            "inner-nu" => args.inner_nu.get_or_insert(parse_usize(&value, "inner-nu")?),
            "seed" => args
                .seed
                .get_or_insert(value.parse().map_err(|_| config_err(format!("seed '{value}' is not an integer")))?),
            "out" => args.out.get_or_insert(value),
            "jobs" => args.jobs.get_or_insert(parse_usize(&value, "jobs")?),
            "timing" => args.timing.get_or_insert(value),
            "yd" => args.yd.get_or_insert(value),
            "fmg-tol" => args
                .fmg_tol
                .get_or_insert(value.parse().map_err(|_| config_err(format!("fmg-tol '{value}' is not a number")))?),
            other => return Err(config_err(format!("unknown config key '{other}'"))),
        };
    }
    if args.m.is_some() && (args.m1.is_some() || args.m2.is_some()) {
        return Err(config_err("--m conflicts with --m1/--m2"));
    }
    Ok(())
}

fn resolve(mut args: Args) -> Result<RunConfig> {
    if let Some(path) = args.config.take() {
        let pairs = read_config_file(&path)?;
        merge_config(&mut args, pairs)?;
    }

    let mode = match args.mode.as_deref().unwrap_or("solve") {
        "solve" => Mode::Solve,
        "contraction-sweep" => Mode::ContractionSweep,
        "table1" => Mode::Table1,
        other => {
            return Err(config_err(format!(
                "unknown mode '{other}' (expected solve, contraction-sweep or table1)"
            )))
        }
    };

    let domain: Domain = args
        .domain
        .as_deref()
        .unwrap_or("unit-square")
        .parse()
        .map_err(Error::Config)?;

    let max_level = args.max_level.unwrap_or(match mode {
        Mode::ContractionSweep => 3,
        Mode::Solve => 4,
        Mode::Table1 => 5,
    });
    if max_level == 0 || max_level > domain.max_level() {
        return Err(config_err(format!(
            "max-level {} out of range 1..={} for {}",
            max_level,
            domain.max_level(),
            domain.name()
        )));
    }

    let betas = match &args.beta {
        Some(text) => parse_list(text, "beta", parse_beta)?,
        None => vec![1e-2],
    };

    // None stands for the fmg keyword; sweeps need a concrete cycle
    let cycle = match args.cycle.as_deref() {
        None => match mode {
            Mode::ContractionSweep => Some(Cycle::W),
            _ => None,
        },
        Some("fmg") => None,
        Some(text) => Some(text.parse::<Cycle>()?),
    };
    if mode == Mode::ContractionSweep && cycle.is_none() {
        return Err(config_err(
            "contraction sweeps measure a single cycle operator; pick --cycle w, v or two-grid",
        ));
    }

    let default_m = match mode {
        Mode::ContractionSweep => 1usize,
        _ => 2,
    };
    let smoothing = match (&args.m, args.m1, args.m2) {
        (Some(text), _, _) => parse_list(text, "m", |s| parse_usize(s, "m"))?
            .into_iter()
            .map(|m| (m, m))
            .collect(),
        (None, Some(m1), Some(m2)) => vec![(m1, m2)],
        (None, None, None) => vec![(default_m, default_m)],
        _ => return Err(config_err("--m1 and --m2 must be given together")),
    };

    let yd = match &args.yd {
        Some(text) => parse_list(text, "yd", parse_yd)?,
        None => vec![DesiredState::One],
    };

    let timing = match &args.timing {
        Some(text) => parse_switch(text)?,
        None => true,
    };

    let jobs = args.jobs.unwrap_or(1);
    if jobs == 0 {
        return Err(config_err("jobs must be at least 1"));
    }

    if mode == Mode::Table1 && domain != Domain::UnitSquare {
        return Err(config_err(
            "the discretization-error table needs the series reference solution, which exists on unit-square only",
        ));
    }
    if domain != Domain::UnitSquare && yd.iter().any(|y| *y != DesiredState::One) {
        return Err(config_err(format!(
            "desired state bubble is defined on the unit square, not {}",
            domain.name()
        )));
    }

    Ok(RunConfig {
        domain,
        mode,
        betas,
        max_level,
        cycle,
        smoothing,
        inner_nu: args.inner_nu.unwrap_or(4),
        seed: args.seed.unwrap_or(1),
        out: args.out,
        jobs,
        timing,
        yd,
        fmg_tol: args.fmg_tol.unwrap_or(1e-8),
    })
}

fn write_artifact(out: &Option<String>, csv: &str, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, csv)
                .map_err(|e| config_err(format!("cannot write {path}: {e}")))?;
            print!("{text}");
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn sweep_text(rows: &[SweepRow], timing: bool) -> String {
    let mut text = String::from(
        "domain        beta   cycle    m1  m2  level  norm_Ek   s/cycle\n",
    );
    for r in rows {
        let seconds = if timing {
            format!("{:.2e}", r.seconds_per_cycle)
        } else {
            "-".into()
        };
        text.push_str(&format!(
            "{:<13} {:<6.0e} {:<8} {:<3} {:<3} {:<6} {:<9.2e} {}\n",
            r.domain, r.beta, r.cycle.to_string(), r.m1, r.m2, r.level, r.norm, seconds
        ));
    }
    text
}

fn run_sweep(cfg: &RunConfig) -> Result<()> {
    let sweep = SweepConfig {
        domain: cfg.domain,
        betas: cfg.betas.clone(),
        max_level: cfg.max_level,
        cycle: cfg.cycle.expect("validated in resolve"),
        smoothing: cfg.smoothing.clone(),
        nu: cfg.inner_nu,
        seed: cfg.seed,
        measure: MeasureConfig::default(),
        timing: cfg.timing,
        jobs: cfg.jobs,
    };
    let rows = contraction_sweep(&sweep)?;
    write_artifact(&cfg.out, &rows_to_csv(&rows), &sweep_text(&rows, cfg.timing))
}

fn cycle_spec(cfg: &RunConfig, pair: (usize, usize)) -> CycleSpec {
    CycleSpec::new(cfg.cycle.unwrap_or(Cycle::W), pair.0, pair.1)
}

const ERRORS_CSV_HEADER: &str =
    "domain,beta,yd,level,p_h1_rel,p_l2_rel,y_h1_rel,y_l2_rel,fmg_cycles,final_residual,seconds";

struct ErrorRow {
    beta: f64,
    yd: DesiredState,
    p_h1: f64,
    p_l2: f64,
    y_h1: f64,
    y_l2: f64,
    cycles: usize,
    residual: f64,
    seconds: f64,
}

fn errors_csv(domain: Domain, level: usize, rows: &[ErrorRow]) -> String {
    let mut csv = String::from(ERRORS_CSV_HEADER);
    csv.push('\n');
    for r in rows {
        csv.push_str(&format!(
            "{},{:e},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{},{:.6e},{:.6e}\n",
            domain.name(),
            r.beta,
            r.yd.name(),
            level,
            r.p_h1,
            r.p_l2,
            r.y_h1,
            r.y_l2,
            r.cycles,
            r.residual,
            r.seconds
        ));
    }
    csv
}

fn errors_text(level: usize, rows: &[ErrorRow]) -> String {
    let h = 0.5_f64.powi(level as i32 + 1);
    let mut text = format!(
        "relative errors vs the series solution at h = {h:.2e} (level {level})\n\
         beta   yd      |p-p_h|_1  ||p-p_h||  |y-y_h|_1  ||y-y_h||  seconds\n"
    );
    for r in rows {
        text.push_str(&format!(
            "{:<6.0e} {:<7} {:<10.2e} {:<10.2e} {:<10.2e} {:<10.2e} {:.2}\n",
            r.beta,
            r.yd.name(),
            r.p_h1,
            r.p_l2,
            r.y_h1,
            r.y_l2,
            r.seconds
        ));
    }
    text
}

fn solve_rows(cfg: &RunConfig, hier: &Hierarchy, verbose: bool) -> Result<Vec<ErrorRow>> {
    let mut rows = Vec::new();
    for &beta in &cfg.betas {
        for &yd in &cfg.yd {
            for &pair in &cfg.smoothing {
                let mut solve = SolveConfig::new(beta, yd, cycle_spec(cfg, pair));
                solve.nu = cfg.inner_nu;
                solve.seed = cfg.seed;
                solve.fmg_tol = cfg.fmg_tol;
                let start = Instant::now();
                let out = solve_control(hier, &solve)?;
                let seconds = start.elapsed().as_secs_f64();
                let residual = *out.residuals.last().unwrap();
                if verbose {
                    println!(
                        "solved {} level {}: beta {:.0e}, y_d {}, {}({},{}), {} cycles, residual {:.2e}, {:.2} s",
                        cfg.domain.name(),
                        cfg.max_level,
                        beta,
                        yd.name(),
                        solve.spec.cycle,
                        pair.0,
                        pair.1,
                        out.cycles.iter().sum::<usize>(),
                        residual,
                        seconds
                    );
                }
                if cfg.domain == Domain::UnitSquare {
                    let sol = ExactSolution::compute(beta, yd, TAIL_TOL, MODE_CAP);
                    let (pe, ye) =
                        fe_errors(&hier.meshes[cfg.max_level], &out.pbar, &out.ybar, &sol)?;
                    rows.push(ErrorRow {
                        beta,
                        yd,
                        p_h1: pe.h1_semi_rel,
                        p_l2: pe.l2_rel,
                        y_h1: ye.h1_semi_rel,
                        y_l2: ye.l2_rel,
                        cycles: out.cycles.iter().sum(),
                        residual,
                        seconds,
                    });
                }
            }
        }
    }
    Ok(rows)
}

fn run_solve(cfg: &RunConfig) -> Result<()> {
    let hier = Hierarchy::build(cfg.domain, cfg.max_level)?;
    let rows = solve_rows(cfg, &hier, true)?;
    if rows.is_empty() {
        return Ok(());
    }
    match &cfg.out {
        Some(_) => write_artifact(
            &cfg.out,
            &errors_csv(cfg.domain, cfg.max_level, &rows),
            &errors_text(cfg.max_level, &rows),
        ),
        // the solve lines above already went to stdout; only add the table
        None => {
            print!("{}", errors_text(cfg.max_level, &rows));
            Ok(())
        }
    }
}

fn run_table1(cfg: &RunConfig) -> Result<()> {
    let hier = Hierarchy::build(cfg.domain, cfg.max_level)?;
    let rows = solve_rows(cfg, &hier, false)?;
    let csv = errors_csv(cfg.domain, cfg.max_level, &rows);
    let text = errors_text(cfg.max_level, &rows);
    match &cfg.out {
        Some(_) => write_artifact(&cfg.out, &csv, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(args: Args) -> Result<()> {
    let dump = args.dump_mesh;
    let cfg = resolve(args)?;
    if dump {
        let hier = Hierarchy::build(cfg.domain, cfg.max_level)?;
        println!("{}", mesh::dump_json(hier.meshes.last().unwrap()));
        return Ok(());
    }
    match cfg.mode {
        Mode::ContractionSweep => run_sweep(&cfg),
        Mode::Solve => run_solve(&cfg),
        Mode::Table1 => run_table1(&cfg),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kktmg: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
