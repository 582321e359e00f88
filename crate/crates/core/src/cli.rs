//! Command-line front end. The `tablecensus` binary is a thin wrapper around [`run`].

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{
    compare, estimate_log_count, estimate_from_table, solve_for, CorrectionChoice, DetPath,
    EstimateOptions, EstimateReport, SolverChoice,
};
use crate::exact::{count_exact_with_budget, DEFAULT_STATE_BUDGET};
use crate::gaussian::correction::DEFAULT_MC_SAMPLES;
use crate::gaussian::Sampler;
use crate::margins::{
    bd_margins, left_half_margins, FamilyKind, FamilyParams, MarginFile, MarginSpec,
};
use crate::typical::{large_n_limits, SolverOptions, DEFAULT_MAX_ITER, DEFAULT_TOL};

/// Largest `m + n` for which `sweep` also runs the exact counter.
const SWEEP_EXACT_MAX_DIM: usize = 12;

const CSV_HELP: &str = "\
CSV layouts (a header line is always written):
  margins   side,index,value
  typical   col_1,...,col_n            one line per row of the table
  estimate  total_log,g,gauss_norm,half_logdet,correction_log,regime_warning
  exact     count,states,memo_hits
  compare   exact_log,estimate_log,log_ratio,g,gauss_norm,half_logdet,correction_log
  sweep     n,delta,B,C,z_hh,z_hl,z_ll,z11_limit,z1n1_limit,znn_limit,abs_error_z_hh,total_log,exact_log";

#[derive(Debug, Parser)]
#[command(name = "tablecensus", version, about = "Exact and maximum-entropy counts of contingency tables", after_help = CSV_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the margin vectors.
    Margins {
        #[command(flatten)]
        source: MarginArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Solve the typical table.
    Typical {
        #[command(flatten)]
        source: MarginArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Asymptotic estimate of the log-count.
    Estimate {
        #[command(flatten)]
        source: MarginArgs,
        #[command(flatten)]
        est: EstimateArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Exact count by dynamic programming.
    Exact {
        #[command(flatten)]
        source: MarginArgs,
        /// Maximum number of memoized states.
        #[arg(long, default_value_t = DEFAULT_STATE_BUDGET)]
        budget: usize,
        /// Include elapsed time in the output.
        #[arg(long)]
        timing: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Exact count next to the estimate.
    Compare {
        #[command(flatten)]
        source: MarginArgs,
        #[command(flatten)]
        est: EstimateArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Solve and estimate a family over several n.
    Sweep {
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Comma-separated list of n.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        #[arg(long = "B", default_value_t = 1.0)]
        b: f64,
        #[arg(long = "C")]
        c: f64,
        #[command(flatten)]
        est: EstimateArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Bd,
    #[value(name = "left_half", alias = "left-half")]
    LeftHalf,
}

#[derive(Debug, Args)]
struct MarginArgs {
    /// Comma-separated row sums.
    #[arg(long, value_delimiter = ',', requires = "cols", conflicts_with_all = ["spec", "family"])]
    rows: Option<Vec<f64>>,
    /// Comma-separated column sums.
    #[arg(long, value_delimiter = ',', requires = "rows")]
    cols: Option<Vec<f64>>,
    /// JSON margin file.
    #[arg(long, conflicts_with = "family")]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, requires_all = ["n", "c"])]
    family: Option<FamilyArg>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long = "B", default_value_t = 1.0)]
    b: f64,
    #[arg(long = "C")]
    c: Option<f64>,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = SolverArg::Auto)]
    solver: SolverArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Auto,
    Dense,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CorrectionArg {
    Auto,
    Wick,
    Mc,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DetArg {
    Dense,
    Structured,
    Auto,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SamplerArg {
    Reduced,
    Subspace,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = CorrectionArg::Auto)]
    correction: CorrectionArg,
    #[arg(long, value_enum, default_value_t = DetArg::Auto)]
    det: DetArg,
    #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
    samples: usize,
    /// Seed for Monte Carlo; required with `--correction mc`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = SamplerArg::Reduced)]
    sampler: SamplerArg,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    fn choice(&self) -> SolverChoice {
        match self.solver {
            SolverArg::Auto => SolverChoice::Auto,
            SolverArg::Dense => SolverChoice::Dense,
            SolverArg::Block => SolverChoice::Block,
        }
    }
}

impl EstimateArgs {
    fn options(&self) -> Result<EstimateOptions> {
        let correction = match self.correction {
            CorrectionArg::None => CorrectionChoice::None,
            CorrectionArg::Wick => CorrectionChoice::Wick,
            CorrectionArg::Auto => CorrectionChoice::Auto {
                samples: self.samples,
                seed: self.seed,
            },
            CorrectionArg::Mc => CorrectionChoice::MonteCarlo {
                samples: self.samples,
                seed: self
                    .seed
                    .ok_or_else(|| Error::InvalidParams("--correction mc requires --seed".into()))?,
                sampler: match self.sampler {
                    SamplerArg::Reduced => Sampler::Reduced,
                    SamplerArg::Subspace => Sampler::Subspace,
                },
            },
        };
        Ok(EstimateOptions {
            solver: self.solver.options(),
            solver_choice: self.solver.choice(),
            det: match self.det {
                DetArg::Dense => DetPath::Dense,
                DetArg::Structured => DetPath::Structured,
                DetArg::Auto => DetPath::Auto,
                DetArg::Both => DetPath::Both,
            },
            correction,
        })
    }
}

fn family_spec(kind: FamilyArg, params: FamilyParams) -> Result<MarginSpec> {
    match kind {
        FamilyArg::Bd => bd_margins(params),
        FamilyArg::LeftHalf => left_half_margins(params),
    }
}

impl MarginArgs {
    fn spec(&self) -> Result<MarginSpec> {
        if let (Some(rows), Some(cols)) = (&self.rows, &self.cols) {
            return MarginSpec::new(rows.clone(), cols.clone());
        }
        if let Some(path) = &self.spec {
            let text = std::fs::read_to_string(path)?;
            let file: MarginFile = serde_json::from_str(&text)?;
            return file.into_spec();
        }
        if let Some(kind) = self.family {
            // clap enforces --n and --C alongside --family.
            let params = FamilyParams::new(self.n.unwrap(), self.delta, self.b, self.c.unwrap())?;
            return family_spec(kind, params);
        }
        Err(Error::InvalidParams(
            "give margins with --rows/--cols, --spec or --family".into(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub delta: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub z_hh: f64,
    pub z_hl: Option<f64>,
    pub z_ll: Option<f64>,
    pub z11_limit: Option<f64>,
    pub z1n1_limit: Option<f64>,
    pub znn_limit: Option<f64>,
    pub abs_error_z_hh: Option<f64>,
    pub total_log: f64,
    pub exact_log: Option<f64>,
}

fn sweep_row(kind: FamilyArg, params: FamilyParams, opts: &EstimateOptions) -> Result<SweepRow> {
    let spec = family_spec(kind, params)?;
    let table = solve_for(&spec, opts)?;
    let block = table
        .as_block()
        .ok_or_else(|| Error::NotBlock("sweep needs the block solver".into()))?;
    let (z_hh, z_hl, z_ll) = (block.z_hh(), block.z_hl(), block.z_light());

    let (z11_limit, z1n1_limit, znn_limit) = match kind {
        // No limits at the critical multiplier; z11 has none above it.
        FamilyArg::Bd => match large_n_limits(params) {
            Ok(p) => (p.z11_limit, Some(p.z1n1_limit), Some(p.znn_limit)),
            Err(_) => (None, None, None),
        },
        FamilyArg::LeftHalf => {
            let b_c = params.critical_b();
            let light = params.c - b_c * params.c * params.n_heavy() as f64 / params.n as f64;
            (Some(b_c * params.c), None, Some(light))
        }
    };
    let abs_error_z_hh = z11_limit.map(|l| (z_hh - l).abs());

    let exact_log = if spec.is_integral() && spec.m() + spec.n() <= SWEEP_EXACT_MAX_DIM {
        let (rows, cols) = spec.integer_margins().unwrap();
        Some(count_exact_with_budget(&rows, &cols, DEFAULT_STATE_BUDGET)?.ln())
    } else {
        None
    };
    let est = estimate_from_table(&spec, table, opts)?;
    Ok(SweepRow {
        n: params.n,
        delta: params.delta,
        b: params.b,
        c: params.c,
        z_hh,
        z_hl,
        z_ll,
        z11_limit,
        z1n1_limit,
        znn_limit,
        abs_error_z_hh,
        total_log: est.total_log,
        exact_log,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn csv_writer(out: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::WriterBuilder::new().from_writer(out)
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Margins { source, format } => {
            let spec = source.spec()?;
            let diag = spec.validate();
            match format {
                Format::Json => {
                    #[derive(Serialize)]
                    struct MarginsOut<'a> {
                        rows: &'a [f64],
                        cols: &'a [f64],
                        total: f64,
                        family: Option<FamilyKind>,
                        diagnostics: crate::margins::MarginDiagnostics,
                    }
                    json(
                        out,
                        &MarginsOut {
                            rows: spec.rows(),
                            cols: spec.cols(),
                            total: spec.total(),
                            family: spec.origin().map(|f| f.kind),
                            diagnostics: diag,
                        },
                    )?;
                }
                Format::Csv => {
                    let mut w = csv_writer(out);
                    w.write_record(["side", "index", "value"])?;
                    for (side, values) in [("row", spec.rows()), ("col", spec.cols())] {
                        for (i, v) in values.iter().enumerate() {
                            w.write_record([side.to_string(), (i + 1).to_string(), v.to_string()])?;
                        }
                    }
                    w.flush()?;
                }
            }
        }
        Command::Typical {
            source,
            solver,
            format,
        } => {
            let spec = source.spec()?;
            let opts = EstimateOptions {
                solver: solver.options(),
                solver_choice: solver.choice(),
                ..Default::default()
            };
            let table = solve_for(&spec, &opts)?;
            match format {
                Format::Json => match table.to_block_export() {
                    Some(block) => json(out, &block)?,
                    None => {
                        #[derive(Serialize)]
                        struct DenseOut {
                            table: Vec<Vec<f64>>,
                            residual: f64,
                        }
                        let z = table.to_dense();
                        let rows = z.row_iter().map(|r| r.iter().copied().collect()).collect();
                        json(
                            out,
                            &DenseOut {
                                table: rows,
                                residual: table.residual(),
                            },
                        )?;
                    }
                },
                Format::Csv => table.write_csv(out)?,
            }
        }
        Command::Estimate {
            source,
            est,
            format,
        } => {
            let spec = source.spec()?;
            let e = estimate_log_count(&spec, &est.options()?)?;
            if let Some(w) = &e.regime_warning {
                writeln!(err, "warning: {w}")?;
            }
            let report = EstimateReport::from(&e);
            match format {
                Format::Json => json(out, &report)?,
                Format::Csv => {
                    let mut w = csv_writer(out);
                    w.write_record(["total_log", "g", "gauss_norm", "half_logdet", "correction_log", "regime_warning"])?;
                    let c = &report.components;
                    w.write_record([
                        report.total_log.to_string(),
                        c.g.to_string(),
                        c.gauss_norm.to_string(),
                        c.half_logdet.to_string(),
                        c.correction_log.to_string(),
                        report.regime_warning.clone().unwrap_or_default(),
                    ])?;
                    w.flush()?;
                }
            }
        }
        Command::Exact {
            source,
            budget,
            timing,
            format,
        } => {
            let spec = source.spec()?;
            let (rows, cols) = spec.integer_margins().ok_or(Error::NotIntegral)?;
            let count = count_exact_with_budget(&rows, &cols, budget)?;
            writeln!(err, "exact: {} states in {:?}", count.states_explored, count.elapsed)?;
            let report = count.report(timing);
            match format {
                Format::Json => json(out, &report)?,
                Format::Csv => {
                    let mut w = csv_writer(out);
                    w.write_record(["count", "states", "memo_hits"])?;
                    w.write_record([report.count, report.states.to_string(), report.memo_hits.to_string()])?;
                    w.flush()?;
                }
            }
        }
        Command::Compare {
            source,
            est,
            format,
        } => {
            let spec = source.spec()?;
            let c = compare(&spec, &est.options()?)?;
            let report = EstimateReport::from(&c);
            match format {
                Format::Json => json(out, &report)?,
                Format::Csv => {
                    let mut w = csv_writer(out);
                    w.write_record([
                        "exact_log", "estimate_log", "log_ratio", "g", "gauss_norm", "half_logdet", "correction_log",
                    ])?;
                    let k = &c.components;
                    w.write_record([
                        c.exact_log.to_string(),
                        c.estimate_log.to_string(),
                        c.log_ratio.to_string(),
                        k.g.to_string(),
                        k.gauss_norm.to_string(),
                        k.half_logdet.to_string(),
                        k.correction_log.to_string(),
                    ])?;
                    w.flush()?;
                }
            }
        }
        Command::Sweep {
            family,
            n,
            delta,
            b,
            c,
            est,
            format,
        } => {
            let opts = est.options()?;
            let rows = n
                .iter()
                .map(|&n| sweep_row(family, FamilyParams::new(n, delta, b, c)?, &opts))
                .collect::<Result<Vec<_>>>()?;
            match format {
                Format::Json => json(out, &rows)?,
                Format::Csv => {
                    let mut w = csv_writer(out);
                    w.write_record([
                        "n", "delta", "B", "C", "z_hh", "z_hl", "z_ll", "z11_limit", "z1n1_limit", "znn_limit",
                        "abs_error_z_hh", "total_log", "exact_log",
                    ])?;
                    for r in &rows {
                        w.write_record([
                            r.n.to_string(),
                            r.delta.to_string(),
                            r.b.to_string(),
                            r.c.to_string(),
                            r.z_hh.to_string(),
                            opt(r.z_hl),
                            opt(r.z_ll),
                            opt(r.z11_limit),
                            opt(r.z1n1_limit),
                            opt(r.znn_limit),
                            opt(r.abs_error_z_hh),
                            r.total_log.to_string(),
                            opt(r.exact_log),
                        ])?;
                    }
                    w.flush()?;
                }
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
///
/// Returns the process exit code: 0 on success, 1 on a domain error, 2 on a
/// usage error.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["tablecensus"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn exact_two_by_two() {
        let (code, out, _) = call(&["exact", "--rows", "2,2", "--cols", "2,2"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["count"], "3");
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(call(&["exact", "--bogus"]).0, 2);
        assert_eq!(call(&["frobnicate"]).0, 2);
        assert_eq!(call(&["exact", "--rows", "2,2"]).0, 2);
    }

    #[test]
    fn domain_errors_exit_one() {
        let (code, _, err) = call(&["exact", "--rows", "2,2", "--cols", "3,2"]);
        assert_eq!(code, 1);
        assert!(err.contains("not balanced"));
        let (code, _, err) = call(&["estimate", "--rows", "2,2", "--cols", "2,2", "--correction", "mc"]);
        assert_eq!(code, 1);
        assert!(err.contains("--seed"));
    }

    #[test]
    fn typical_block_json() {
        let (code, out, _) = call(&["typical", "--family", "bd", "--n", "100", "--delta", "0.5", "--B", "2", "--C", "1"]);
        assert_eq!(code, 0, "{out}");
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(v["residual"].as_f64().unwrap() <= 1e-10);
        assert_eq!(v["n_heavy"], 10);
        assert_eq!(v["n_light"], 100);
    }

    #[test]
    fn typical_dense_csv_has_header() {
        let (code, out, _) = call(&["typical", "--rows", "3,1,2", "--cols", "2,2,2", "--format", "csv"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "col_1,col_2,col_3");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn spec_file_input() {
        let dir = std::env::temp_dir().join(format!("tablecensus-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.json");
        std::fs::write(&path, r#"{"rows":[1,1,1],"cols":[1,1,1]}"#).unwrap();
        let (code, out, _) = call(&["exact", "--spec", path.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert!(out.contains("\"6\""));
    }
}
