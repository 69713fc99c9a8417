use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use qlqg::optim::{evaluate, synthesize, Synthesis};
use qlqg::report::{self, CHECK_TOL};
use qlqg::scenario::Scenario;
use qlqg::{fixtures, Error};

/// Linear quantum feedback networks: realizability, LQG cost, synthesis.
#[derive(Parser)]
#[command(name = "qlqg", version)]
struct Cli {
    /// Write a machine-readable JSON report here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write tabular output (sweep, scan, GA trace) here as CSV.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the realizability equations of the plant and controller.
    Check {
        /// Scenario file or shipped fixture name.
        file: String,
        #[arg(long, default_value_t = CHECK_TOL)]
        tol: f64,
    },
    /// Evaluate the closed-loop LQG cost.
    Eval { file: String },
    /// Search for a coherent controller.
    Optimize {
        file: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        generations: Option<usize>,
        #[arg(long)]
        population: Option<usize>,
        /// Also optimize the six phase shifts.
        #[arg(long)]
        phases: bool,
    },
    /// Sweep the amplifier time scale h.
    DpaSweep {
        file: String,
        #[arg(long)]
        h_min: Option<f64>,
        #[arg(long)]
        h_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Stability certificate for the amplifier loop.
    Certificate { file: String },
    /// Measurement-based LQG design for the scenario's plant.
    Baseline { file: String },
    /// Regenerate a regression table.
    Reproduce {
        #[arg(value_name = "TAG")]
        tag: String,
    },
}

/// Usage and input problems exit with 2, failed analyses with 1.
enum Failure {
    Usage(String),
    Analysis(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Json(_)
            | Error::Io(_)
            | Error::Config(_)
            | Error::Dimension { .. }
            | Error::Validation(_)
            | Error::Domain(_) => Failure::Usage(e.to_string()),
            _ => Failure::Analysis(e.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn load(arg: &str) -> Result<Scenario, Failure> {
    let path = Path::new(arg);
    if path.exists() {
        return Scenario::load(path).map_err(|e| Failure::Usage(format!("{arg}: {e}")));
    }
    if fixtures::get(arg).is_some() {
        return Ok(fixtures::load(arg)?);
    }
    Err(Failure::Usage(format!(
        "{arg}: no such file or fixture (fixtures: {})",
        fixtures::NAMES.join(", ")
    )))
}

fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), Failure> {
    if let Some(p) = out {
        let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
        std::fs::write(p, text + "\n").map_err(Error::from)?;
    }
    Ok(())
}

fn write_csv<T: Serialize>(out: Option<&Path>, rows: &[T]) -> Result<(), Failure> {
    let Some(p) = out else { return Ok(()) };
    let io = |e: csv::Error| Failure::Usage(format!("{}: {e}", p.display()));
    let mut w = csv::Writer::from_path(p).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(())
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn run(cli: Cli) -> Outcome {
    let out = cli.out.as_deref();
    let csv_out = cli.csv.as_deref();
    match cli.cmd {
        Cmd::Check { file, tol } => {
            let r = report::check_scenario(&load(&file)?, tol)?;
            println!("scenario {}  tolerance {:e}", r.scenario, r.tolerance);
            for row in &r.rows {
                println!(
                    "{:<11} res1 {:.3e}  res2 {:.3e}  {}",
                    row.component,
                    row.drift_residual,
                    row.output_residual,
                    verdict(row.pass)
                );
            }
            println!("{}", verdict(r.pass()));
            write_json(out, &r)?;
            Ok(r.pass())
        }
        Cmd::Eval { file } => {
            let r = report::eval_scenario(&load(&file)?)?;
            println!("scenario           {}", r.scenario);
            match r.j {
                Some(j) => println!("J                  {j:.10}"),
                None => println!("J                  (closed loop not Hurwitz)"),
            }
            println!("vacuum bound       {:.10}", r.vacuum_bound);
            println!("spectral abscissa  {:.6e}", r.spectral_abscissa);
            if let Some(res) = r.lyapunov_residual {
                println!("lyapunov residual  {res:.3e}");
            }
            if let (Some(e), Some(t), Some(p)) = (r.expected, r.tolerance, r.pass) {
                println!("expected           {e} +- {t}  {}", verdict(p));
            }
            write_json(out, &r)?;
            Ok(r.hurwitz && r.pass.unwrap_or(true))
        }
        Cmd::Optimize {
            file,
            seed,
            generations,
            population,
            phases,
        } => {
            let s = load(&file)?;
            let model = s.plant_model()?;
            let mut cfg = s.optimizer.clone().unwrap_or_default();
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.generations = generations.unwrap_or(cfg.generations);
            cfg.population = population.unwrap_or(cfg.population);
            cfg.phases |= phases;
            let syn: Synthesis = synthesize(&model, &cfg)?;
            let feasible = syn.objective() < cfg.penalty.base;
            println!("scenario        {}", s.name);
            if let Some(pf) = &syn.phase_free {
                println!("phase-free J    {:.10}", pf.objective());
            }
            println!("global J        {:.10}", syn.global.objective);
            println!("local J         {:.10}", syn.objective());
            if feasible {
                let (d, e) = evaluate(syn.best(), &model)?;
                println!(
                    "vacuum bound    {:.10}",
                    qlqg::lqg::vacuum_bound(&d.design.controller.ck)?
                );
                println!("abscissa        {:.6e}", e.abscissa);
            } else {
                println!("no stabilizing design found");
            }
            println!("design vector   {:?}", syn.best().values);
            write_json(out, &syn)?;
            write_csv(csv_out, &syn.global.trace)?;
            Ok(feasible)
        }
        Cmd::DpaSweep {
            file,
            h_min,
            h_max,
            points,
        } => {
            let s = load(&file)?;
            let spec = s.dpa_spec();
            let rows = report::sweep_scenario(
                &s,
                h_min.unwrap_or(spec.h_min),
                h_max.unwrap_or(spec.h_max),
                points.unwrap_or(spec.points),
            )?;
            println!("{:>12}  {:>16}  {:>14}", "h", "J", "abscissa");
            for r in &rows {
                println!("{:>12.4e}  {:>16.10}  {:>14.6e}", r.h, r.j, r.abscissa);
            }
            let stable = rows.iter().all(|r| r.abscissa < 0.0 && r.j.is_finite());
            if !stable {
                println!("some points are not Hurwitz");
            }
            write_json(out, &rows)?;
            write_csv(csv_out, &rows)?;
            Ok(stable)
        }
        Cmd::Certificate { file } => {
            let c = report::certificate_scenario(&load(&file)?)?;
            println!("lambda_max(U + U^T)  {:.6e}", c.lambda_max_sym);
            println!("h deviation          {:.3e}", c.h_deviation);
            for (h, ab) in &c.spot_checks {
                println!("abscissa at h={h:<8e} {ab:.6e}");
            }
            println!("{}", verdict(c.certified));
            write_json(out, &c)?;
            Ok(c.certified)
        }
        Cmd::Baseline { file } => {
            let r = report::baseline_scenario(&load(&file)?)?;
            let d = &r.design;
            println!("theta = ({}, {}, {})  J = {:.10}", d.theta1, d.theta2, d.theta3, d.j);
            if !r.scan.is_empty() {
                println!("{:>10}  {:>14}", "theta3", "J");
                for (i, row) in r.scan.iter().enumerate() {
                    let mark = if Some(i) == r.scan_argmin { "  <- min" } else { "" };
                    println!("{:>10.4}  {:>14.8}{mark}", row.theta3, row.j);
                }
            }
            write_json(out, &r)?;
            let mut rows = vec![r.design.clone()];
            rows.extend(r.scan.iter().cloned());
            write_csv(csv_out, &rows)?;
            Ok(d.j.is_finite())
        }
        Cmd::Reproduce { tag } => {
            if !report::TAGS.contains(&tag.as_str()) {
                return Err(Failure::Usage(format!(
                    "unknown tag '{tag}'; known tags: {}",
                    report::TAGS.join(", ")
                )));
            }
            let t = report::reproduce(&tag)?;
            println!("{:<42} {:>26} {:>18}  result", "row", "target", "computed");
            for r in &t.rows {
                println!(
                    "{:<42} {:>26} {:>18.10}  {}",
                    r.label,
                    r.target,
                    r.computed,
                    verdict(r.pass)
                );
            }
            println!("{}", verdict(t.pass()));
            write_json(out, &t)?;
            write_csv(csv_out, &t.rows)?;
            Ok(t.pass())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Analysis(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
