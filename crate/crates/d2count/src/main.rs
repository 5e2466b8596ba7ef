//! `d2count`: command-line front end for the counting pipeline.
//!
//! Exit codes: 0 success, 2 parse error, 3 precondition violation,
//! 4 infeasible request, 1 internal error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rug::Rational;
use serde::Serialize;
use serde_json::json;

use d2count::boolcount::{count_boolean, count_boolean_regular, BooleanCount, DecisionTree};
use d2count::config::Config;
use d2count::decouple::{approximate_decompose, construct_junta};
use d2count::error::{Error, Result};
use d2count::gausscount::count_gaussian;
use d2count::harness::RunReport;
use d2count::moments::absolute_moment;
use d2count::poly::{
    graph_cut_poly, graph_induced_poly, parse_d2p, parse_edge_list, Degree2Polynomial,
};
use d2count::util::{parse_rational, rat_f64};

#[derive(Parser, Debug)]
#[command(
    name = "d2count",
    version,
    about = "Deterministic approximate counting for degree-2 polynomial threshold functions"
)]
struct Cli {
    /// Write a JSON trace of the run's intermediate results to FILE.
    #[arg(long, global = true, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Write a JSON run report (inputs, parameters, result, timings) to FILE.
    #[arg(long, global = true, value_name = "FILE")]
    report: Option<PathBuf>,
    /// Read calibrated constants from a TOML file (`section.key = value`).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Print the result as JSON instead of a bare number.
    #[arg(long, global = true)]
    json: bool,
    /// Write the regularity tree (Boolean counters only) to FILE as JSON.
    #[arg(long, global = true, value_name = "FILE")]
    dump_tree: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pr[p(x) >= 0] for x ~ N(0,1)^n.
    Gaussian {
        #[arg(long)]
        eps: String,
        file: PathBuf,
    },
    /// Pr[p(x) >= 0] for x uniform on {-1,1}^n.
    Boolean {
        #[arg(long)]
        eps: String,
        file: PathBuf,
    },
    /// Hypercube count via the regular fast path; fails on non-regular input.
    Regular {
        #[arg(long)]
        eps: String,
        file: PathBuf,
    },
    /// E[|q(x)|^k] over {-1,1}^n for q = p / ||p||_2.
    Moment {
        #[arg(short = 'k')]
        k: u32,
        #[arg(long)]
        eps: String,
        /// Include the per-bucket breakdown in the JSON output.
        #[arg(long)]
        verbose: bool,
        file: PathBuf,
    },
    /// Fraction of the 2^n cuts of a graph with at least T cut edges.
    CutFraction {
        #[arg(long, value_name = "FILE")]
        graph: PathBuf,
        #[arg(long)]
        threshold: String,
        #[arg(long)]
        eps: String,
    },
    /// Fraction of vertex subsets spanning at least T edges.
    InducedFraction {
        #[arg(long, value_name = "FILE")]
        graph: PathBuf,
        #[arg(long)]
        threshold: String,
        #[arg(long)]
        eps: String,
    },
    /// One decoupling step (requires zero constant term).
    Decompose {
        #[arg(long)]
        eps: String,
        #[arg(long)]
        eta: String,
        file: PathBuf,
    },
    /// Reduce a polynomial to a decoupled junta.
    Junta {
        #[arg(long)]
        eps: String,
        file: PathBuf,
    },
}

/// What a subcommand produced.
struct Outcome {
    /// The scalar answer, when there is one.
    value: Option<Rational>,
    /// Full JSON result (printed with `--json`, written with `--trace`).
    detail: serde_json::Value,
    /// Derived parameters for the run report.
    parameters: serde_json::Value,
    tree: Option<DecisionTree>,
}

fn to_json<T: Serialize>(x: &T) -> Result<serde_json::Value> {
    serde_json::to_value(x).map_err(|e| Error::Internal(format!("serialization failed: {e}")))
}

fn read_input(path: &Path, report: &mut RunReport) -> Result<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    report.add_input(&bytes);
    String::from_utf8(bytes).map_err(|_| Error::Parse(format!("{} is not UTF-8", path.display())))
}

fn read_poly(path: &Path, report: &mut RunReport) -> Result<Degree2Polynomial> {
    parse_d2p(&read_input(path, report)?)
}

fn parse_eps(text: &str) -> Result<Rational> {
    let e = parse_rational(text)?;
    if e <= 0 || e >= 1 {
        return Err(Error::Precondition(format!(
            "eps must lie in (0, 1), got {text}"
        )));
    }
    Ok(e)
}

/// Hypercube accuracies below the configured floor are refused.
fn check_floor(eps: &Rational, cfg: &Config) -> Result<()> {
    if *eps < rat_f64(cfg.regularity.eps_floor) {
        return Err(Error::Feasibility(format!(
            "eps = {eps} is below the floor {} (the regularity tree grows like 2^(1/eps^9)); \
             lower regularity.eps_floor in the config to override",
            cfg.regularity.eps_floor
        )));
    }
    Ok(())
}

fn boolean_outcome(count: BooleanCount) -> Result<Outcome> {
    Ok(Outcome {
        value: Some(count.value.clone()),
        detail: to_json(&count)?,
        parameters: to_json(&count.params)?,
        tree: Some(count.tree),
    })
}

/// Threshold counting for a graph polynomial: the regular fast path when
/// the polynomial is regular enough, the general counter otherwise.
fn graph_fraction(
    p: Degree2Polynomial,
    threshold: &Rational,
    eps: &Rational,
    cfg: &Config,
) -> Result<Outcome> {
    let p = p.shifted(&Rational::from(-threshold));
    match count_boolean_regular(&p, eps, cfg) {
        Ok(r) => Ok(Outcome {
            value: Some(r.value.clone()),
            detail: json!({ "path": "regular", "value": r.value.to_string(), "tau": r.tau.to_string(),
                            "gaussian": to_json(&r.gaussian)? }),
            parameters: json!({ "path": "regular", "tau": r.tau.to_string() }),
            tree: None,
        }),
        Err(Error::Precondition(_)) => {
            let mut out = boolean_outcome(count_boolean(&p, eps, cfg)?)?;
            out.detail = json!({ "path": "tree", "result": out.detail });
            out.parameters = json!({ "path": "tree", "params": out.parameters });
            Ok(out)
        }
        Err(e) => Err(e),
    }
}

fn execute(cli: &Cli, cfg: &Config, report: &mut RunReport) -> Result<Outcome> {
    match &cli.command {
        Command::Gaussian { eps, file } => {
            let eps = parse_eps(eps)?;
            let p = read_poly(file, report)?;
            let r = report.time("count_gaussian", || count_gaussian(&p, &eps, cfg))?;
            Ok(Outcome {
                value: Some(r.value.clone()),
                detail: to_json(&r)?,
                parameters: json!({ "junta": to_json(&r.trace.params)?, "eps_prime": r.count.eps_prime.to_string(),
                                    "eps_star": r.count.eps_star.as_ref().map(|e| e.to_string()) }),
                tree: None,
            })
        }
        Command::Boolean { eps, file } => {
            let eps = parse_eps(eps)?;
            check_floor(&eps, cfg)?;
            let p = read_poly(file, report)?;
            let r = report.time("count_boolean", || count_boolean(&p, &eps, cfg))?;
            boolean_outcome(r)
        }
        Command::Regular { eps, file } => {
            let eps = parse_eps(eps)?;
            check_floor(&eps, cfg)?;
            let p = read_poly(file, report)?;
            let r = report.time("count_boolean_regular", || {
                count_boolean_regular(&p, &eps, cfg)
            })?;
            Ok(Outcome {
                value: Some(r.value.clone()),
                detail: to_json(&r)?,
                parameters: json!({ "tau": r.tau.to_string() }),
                tree: None,
            })
        }
        Command::Moment {
            k,
            eps,
            verbose,
            file,
        } => {
            let eps = parse_eps(eps)?;
            let p = read_poly(file, report)?;
            let mut m = report.time("absolute_moment", || absolute_moment(&p, *k, &eps, cfg))?;
            let parameters = to_json(&m.params)?;
            let scaled = m.unnormalized(128).to_f64();
            if !verbose {
                m.buckets.clear();
            }
            let mut detail = to_json(&m)?;
            detail["unnormalized_f64"] = json!(scaled);
            Ok(Outcome {
                value: Some(m.value.clone()),
                detail,
                parameters,
                tree: None,
            })
        }
        Command::CutFraction {
            graph,
            threshold,
            eps,
        }
        | Command::InducedFraction {
            graph,
            threshold,
            eps,
        } => {
            let eps = parse_eps(eps)?;
            check_floor(&eps, cfg)?;
            let t = parse_rational(threshold)?;
            let g = parse_edge_list(&read_input(graph, report)?)?;
            let p = if matches!(cli.command, Command::CutFraction { .. }) {
                graph_cut_poly(&g)
            } else {
                graph_induced_poly(&g)
            };
            report.time("count", || graph_fraction(p, &t, &eps, cfg))
        }
        Command::Decompose { eps, eta, file } => {
            let eps = parse_eps(eps)?;
            let eta = parse_eps(eta)?;
            let p = read_poly(file, report)?;
            let r = report.time("decompose", || {
                approximate_decompose(&p, &eps, &eta, &cfg.spectral)
            })?;
            Ok(Outcome {
                value: None,
                detail: to_json(&r)?,
                parameters: json!({ "kind": r.kind }),
                tree: None,
            })
        }
        Command::Junta { eps, file } => {
            let eps = parse_eps(eps)?;
            let p = read_poly(file, report)?;
            let (q, trace) = report.time("construct_junta", || {
                construct_junta(&p, &eps, &cfg.junta, &cfg.spectral)
            })?;
            Ok(Outcome {
                value: None,
                detail: json!({ "junta": to_json(&q)?, "trace": to_json(&trace)? }),
                parameters: to_json(&trace.params)?,
                tree: None,
            })
        }
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn run(cli: &Cli, args: Vec<String>) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
            Config::from_toml_str(&text)?
        }
        None => Config::default(),
    };
    let mut report = RunReport::new(args, &cfg);
    let out = execute(cli, &cfg, &mut report)?;

    if let Some(path) = &cli.trace {
        write_json(path, &out.detail)?;
        report.traces.push(path.display().to_string());
    }
    if let Some(path) = &cli.dump_tree {
        match &out.tree {
            Some(tree) => {
                write_json(path, &to_json(&tree.dump())?)?;
                report.traces.push(path.display().to_string());
            }
            None => eprintln!("note: --dump-tree ignored (no regularity tree was built)"),
        }
    }
    if let Some(path) = &cli.report {
        if let Some(v) = &out.value {
            report.set_value(v);
        }
        report.parameters = out.parameters.clone();
        write_json(path, &to_json(&report)?)?;
    }

    let text = match (&out.value, cli.json) {
        (Some(v), false) => v.to_f64().to_string(),
        (Some(v), true) => {
            let doc =
                json!({ "value": v.to_string(), "value_f64": v.to_f64(), "result": out.detail });
            serde_json::to_string_pretty(&doc).map_err(|e| Error::Internal(e.to_string()))?
        }
        (None, _) => {
            serde_json::to_string_pretty(&out.detail).map_err(|e| Error::Internal(e.to_string()))?
        }
    };
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}") {
        // A closed pipe (e.g. `| head`) is not an error of ours.
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
        _ => {}
    }
    Ok(())
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("d2count: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
