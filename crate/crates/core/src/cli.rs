//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Deserialize;

use crate::analytic1d::{EigenConfig, ModelParams};
use crate::bench::{
    adaptive_loop, csv_document, eigenfunction_convergence, rates_csv, rates_document, rates_path, run_convergence,
    sensitivity_study, table_csv_rows, write_atomic, BenchmarkCase, ConvergenceTable, Rate,
};
use crate::cases::CaseId;
use crate::cplx::{format_f64, parse_complex, Cplx, C64};
use crate::error::{Error, Result};
use crate::paramfind::{config_to_json, solve_defect_system, verify_configuration, ForgeReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Verify,
    FindParams,
    Convergence,
    Sensitivity,
    Adaptive,
    Eigenfunction,
}

#[derive(Debug, Parser)]
#[command(name = "defbench", version, about = "Defective-eigenvalue benchmark problems and convergence studies")]
struct Args {
    command: Command,
    /// Benchmark case id.
    #[arg(long)]
    case: Option<String>,
    /// Polynomial degree.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    p: Option<u8>,
    /// Number of refinement levels.
    #[arg(long)]
    levels: Option<usize>,
    /// Comma-separated perturbations of Re c.
    #[arg(long)]
    deltas: Option<String>,
    /// Dörfler bulk parameter.
    #[arg(long)]
    theta: Option<f64>,
    /// Stop adaptive refinement beyond this many unknowns.
    #[arg(long = "max-dofs")]
    max_dofs: Option<usize>,
    /// Output file (CSV for drivers, JSON for parameter commands).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with any of the flag values; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long = "a-R", value_parser = complex_arg, allow_hyphen_values = true)]
    a_r: Option<C64>,
    #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
    c: Option<C64>,
    #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
    lambda: Option<C64>,
    /// Ascent to impose (find-params) or claim (other commands).
    #[arg(long)]
    defect: Option<usize>,
    /// Newton starting value for a_R.
    #[arg(long = "init-a-R", value_parser = complex_arg, allow_hyphen_values = true)]
    init_a_r: Option<C64>,
    #[arg(long = "init-c", value_parser = complex_arg, allow_hyphen_values = true)]
    init_c: Option<C64>,
    #[arg(long = "init-lambda", value_parser = complex_arg, allow_hyphen_values = true)]
    init_lambda: Option<C64>,
}

fn complex_arg(s: &str) -> std::result::Result<C64, String> {
    parse_complex(s).map_err(|e| e.to_string())
}

/// Complex value in a config file: `{"re": .., "im": ..}` or a literal string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ComplexValue {
    Parts(Cplx),
    Text(String),
}

impl ComplexValue {
    fn value(&self) -> Result<C64> {
        match self {
            ComplexValue::Parts(c) => Ok((*c).into()),
            ComplexValue::Text(s) => parse_complex(s),
        }
    }
}

/// Config-file keys; the parameter-set JSON written by `verify`/`find-params` is accepted as is.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    case: Option<String>,
    p: Option<u8>,
    levels: Option<usize>,
    deltas: Option<Vec<f64>>,
    theta: Option<f64>,
    max_dofs: Option<usize>,
    out: Option<PathBuf>,
    b: Option<f64>,
    #[serde(rename = "a_R")]
    a_r: Option<ComplexValue>,
    c: Option<ComplexValue>,
    lambda: Option<ComplexValue>,
    ascent: Option<usize>,
    defect: Option<usize>,
    #[serde(default, rename = "residuals")]
    _residuals: Option<Vec<f64>>,
}

/// Fully resolved command-line request.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub case: CaseId,
    pub p: usize,
    pub levels: usize,
    pub deltas: Vec<f64>,
    pub theta: f64,
    pub max_dofs: usize,
    pub out: Option<PathBuf>,
    pub b: Option<f64>,
    pub a_r: Option<C64>,
    pub c: Option<C64>,
    pub lambda: Option<C64>,
    pub defect: Option<usize>,
    pub init: (Option<C64>, Option<C64>, Option<C64>),
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

fn default_case(command: Command) -> CaseId {
    match command {
        Command::Adaptive => CaseId::Reduced2dTri,
        _ => CaseId::Regular1d,
    }
}

fn default_levels(command: Command, case: CaseId) -> usize {
    match (command, case.dim()) {
        (Command::Sensitivity, _) => 13,
        (_, 1) => 10,
        (_, 2) => 5,
        _ => 3,
    }
}

impl RunConfig {
    fn resolve(args: Args) -> Result<Self> {
        let file = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
                serde_json::from_str::<FileConfig>(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };
        let command = args.command;
        let case = match args.case.or(file.case) {
            Some(s) => s.parse::<CaseId>()?,
            None => default_case(command),
        };
        let p = args.p.or(file.p).unwrap_or(1) as usize;
        if !(1..=3).contains(&p) {
            return Err(usage(format!("--p must be 1, 2 or 3, got {p}")));
        }
        if p == 3 && matches!(case, CaseId::Regular2dTri | CaseId::Reduced2dTri) {
            return Err(usage("triangle cases support --p 1 or 2"));
        }
        let levels = args.levels.or(file.levels).unwrap_or_else(|| default_levels(command, case));
        if levels < 3 {
            return Err(usage(format!("--levels must be at least 3, got {levels}")));
        }
        let deltas = match args.deltas {
            Some(s) => s
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| usage(format!("malformed delta '{t}'"))))
                .collect::<Result<Vec<_>>>()?,
            None => file.deltas.unwrap_or_else(|| vec![1e-2, 1e-6]),
        };
        if deltas.is_empty() || deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(usage("--deltas must be a nonempty list of positive numbers"));
        }
        let theta = args.theta.or(file.theta).unwrap_or(0.5);
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(usage(format!("--theta must lie in (0, 1], got {theta}")));
        }
        let max_dofs = args.max_dofs.or(file.max_dofs).unwrap_or(200_000);
        let complex = |flag: Option<C64>, key: &Option<ComplexValue>| -> Result<Option<C64>> {
            match flag {
                Some(z) => Ok(Some(z)),
                None => key.as_ref().map(ComplexValue::value).transpose(),
            }
        };
        let defect = args.defect.or(file.defect).or(file.ascent);
        if defect == Some(0) {
            return Err(usage("--defect must be at least 1"));
        }
        if matches!(command, Command::Sensitivity) && case != CaseId::Regular1d {
            return Err(usage("sensitivity studies use --case regular1d"));
        }
        if matches!(command, Command::Eigenfunction) && case.dim() != 1 {
            return Err(usage("eigenfunction studies use a 1D case"));
        }
        if matches!(command, Command::Adaptive) && !matches!(case, CaseId::Regular2dTri | CaseId::Reduced2dTri) {
            return Err(usage("adaptive refinement uses a triangle case"));
        }
        Ok(RunConfig {
            command,
            case,
            p,
            levels,
            deltas,
            theta,
            max_dofs,
            out: args.out.or(file.out),
            b: args.b.or(file.b),
            a_r: complex(args.a_r, &file.a_r)?,
            c: complex(args.c, &file.c)?,
            lambda: complex(args.lambda, &file.lambda)?,
            defect,
            init: (args.init_a_r, args.init_c, args.init_lambda),
        })
    }

    /// Case configuration with overrides applied.
    fn eigen_config(&self) -> Result<EigenConfig> {
        let base = self.case.base_config();
        let params = ModelParams::new(
            self.b.unwrap_or(base.params.b),
            self.a_r.unwrap_or(base.params.a_r),
            self.c.unwrap_or(base.params.c),
        )?;
        EigenConfig::new(params, self.lambda.unwrap_or(base.lambda), self.defect.unwrap_or(base.ascent))
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match RunConfig::resolve(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match dispatch(&cfg) {
        Ok(summary) => {
            println!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILED
        }
    }
}

fn dispatch(cfg: &RunConfig) -> Result<String> {
    match cfg.command {
        Command::Verify => {
            let report = verify_configuration(&cfg.eigen_config()?);
            write_report(cfg.out.as_deref(), &report)?;
            let summary = format!(
                "verify {}: ascent {}, scaled |gamma| = [{}]",
                cfg.case,
                report.certified_ascent,
                join(&report.solution.residuals)
            );
            finish_report(report, summary)
        }
        Command::FindParams => {
            let base = cfg.eigen_config()?;
            let nu = cfg.defect.unwrap_or(3);
            let init = (
                cfg.init.0.unwrap_or(base.params.a_r),
                cfg.init.1.unwrap_or(base.params.c),
                cfg.init.2.unwrap_or(base.lambda),
            );
            let report = solve_defect_system(base.params.b, nu, init)?;
            write_report(cfg.out.as_deref(), &report)?;
            let s = &report.solution;
            let summary = format!(
                "find-params b={}: a_R={} c={} lambda={} ascent {} residual {:.3e} after {} iterations",
                format_f64(s.params.b),
                crate::cplx::format_complex(s.params.a_r),
                crate::cplx::format_complex(s.params.c),
                crate::cplx::format_complex(s.lambda),
                report.certified_ascent,
                report.residual_norm,
                report.iterations
            );
            finish_report(report, summary)
        }
        Command::Convergence => {
            let case = verified_case(cfg)?;
            let table = run_convergence(&case, cfg.p, cfg.levels)?;
            write_tables(cfg, &[&table], None)?;
            Ok(format!("convergence {} p={}: {}", cfg.case, cfg.p, rates_summary(&table.rates)))
        }
        Command::Sensitivity => {
            let case = verified_case(cfg)?;
            let runs = sensitivity_study(&case, &cfg.deltas, cfg.p, cfg.levels)?;
            let labels: Vec<String> = runs.iter().map(|r| format!("{}@delta={}", cfg.case, format_f64(r.delta))).collect();
            let tables: Vec<&ConvergenceTable> = runs.iter().map(|r| &r.table).collect();
            write_tables(cfg, &tables, Some(&labels))?;
            let parts: Vec<String> = runs
                .iter()
                .map(|r| format!("delta={:e} separation {:.3e} {}", r.delta, r.separation, rates_summary(&r.table.rates)))
                .collect();
            Ok(format!("sensitivity p={}: {}", cfg.p, parts.join("; ")))
        }
        Command::Adaptive => {
            let case = verified_case(cfg)?;
            let table = adaptive_loop(&case, cfg.p, cfg.theta, cfg.max_dofs)?;
            write_tables(cfg, &[&table], None)?;
            let last = table.rows.last().map(|r| r.n_dofs).unwrap_or(0);
            Ok(format!(
                "adaptive {} p={} theta={}: {} iterations to N={last}: {}",
                cfg.case,
                cfg.p,
                cfg.theta,
                table.rows.len(),
                rates_summary(&table.rates)
            ))
        }
        Command::Eigenfunction => {
            let case = verified_case(cfg)?;
            let table = eigenfunction_convergence(&case, cfg.p, cfg.levels)?;
            if let Some(out) = &cfg.out {
                write_atomic(out, &csv_document(&crate::bench::eigenfunction_csv_rows(&table)))?;
                write_atomic(&rates_path(out), &rates_document(&rates_csv(table.case, table.p, &table.rates)))?;
            }
            Ok(format!("eigenfunction {} p={}: {}", cfg.case, cfg.p, rates_summary(&table.rates)))
        }
    }
}

fn verified_case(cfg: &RunConfig) -> Result<BenchmarkCase> {
    let config = cfg.eigen_config()?;
    let report = verify_configuration(&config);
    if let Some(f) = report.failure {
        return Err(Error::NotConverged(format!("parameter set does not verify: {f}")));
    }
    Ok(BenchmarkCase::with_config(cfg.case, report.solution))
}

fn write_report(out: Option<&Path>, report: &ForgeReport) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, &(config_to_json(&report.solution) + "\n")),
        None => Ok(()),
    }
}

fn finish_report(report: ForgeReport, summary: String) -> Result<String> {
    match report.failure {
        None => Ok(summary),
        Some(f) => Err(Error::NotConverged(format!("{summary} ({f})"))),
    }
}

fn write_tables(cfg: &RunConfig, tables: &[&ConvergenceTable], labels: Option<&[String]>) -> Result<()> {
    let Some(out) = &cfg.out else {
        return Ok(());
    };
    let mut rows = String::new();
    let mut rates = String::new();
    for (k, t) in tables.iter().enumerate() {
        let body = table_csv_rows(t);
        let rate_rows = rates_csv(t.case, t.p, &t.rates);
        match labels {
            Some(l) => {
                let plain = format!("{},", t.case);
                let tagged = format!("{},", l[k]);
                rows.push_str(&relabel(&body, &plain, &tagged));
                rates.push_str(&relabel(&rate_rows, &plain, &tagged));
            }
            None => {
                rows.push_str(&body);
                rates.push_str(&rate_rows);
            }
        }
    }
    write_atomic(out, &csv_document(&rows))?;
    write_atomic(&rates_path(out), &rates_document(&rates))
}

fn relabel(text: &str, from: &str, to: &str) -> String {
    text.lines().map(|l| format!("{}\n", l.strip_prefix(from).map_or(l.to_string(), |rest| format!("{to}{rest}")))).collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
}

fn rates_summary(rates: &[Rate]) -> String {
    if rates.is_empty() {
        return "no rates fitted".into();
    }
    rates.iter().map(|r| format!("{} {:.3}", r.column, r.slope)).collect::<Vec<_>>().join(" ")
}
