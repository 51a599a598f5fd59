//! `actfn`: evaluate activations, print tables, run gradient checks,
//! experiments and landscapes, and plot the CSV files they write.
//!
//! Exit codes: 0 success, 1 a check failed, 2 bad usage, 3 training diverged.

mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use actfn::catalog::describe;
use actfn::experiments::{
    self, ClassificationConfig, LandscapeConfig, RegressionConfig,
};
use actfn::gradients::{self, Subgradient};
use actfn::stochastic::EvalContext;
use actfn::{Activation, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "actfn", version, about = "Activation functions: values, gradients, experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct FnArgs {
    /// Activation name (catalog kind or composite).
    #[arg(long = "fn")]
    name: String,
    /// Parameter override `name=value`; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
}

#[derive(Copy, Clone, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, ValueEnum)]
enum ModeArg {
    Train,
    Eval,
}

#[derive(Copy, Clone, ValueEnum)]
enum Conv {
    Zero,
    Half,
    One,
}

impl From<Conv> for Subgradient {
    fn from(c: Conv) -> Self {
        match c {
            Conv::Zero => Subgradient::Zero,
            Conv::Half => Subgradient::Half,
            Conv::One => Subgradient::One,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Print f(x) with 12 significant digits.
    Eval {
        #[command(flatten)]
        f: FnArgs,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, value_enum, default_value = "eval")]
        mode: ModeArg,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// CSV (or JSON) of x, value, d_dx over a range.
    Table {
        #[command(flatten)]
        f: FnArgs,
        #[arg(long, allow_hyphen_values = true, default_value_t = -5.0)]
        from: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 5.0)]
        to: f64,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
        /// Derivative reported exactly at a kink.
        #[arg(long, value_enum, default_value = "zero")]
        subgradient: Conv,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference gradients.
    GradCheck {
        #[arg(long = "fn", conflicts_with = "all")]
        name: Option<String>,
        #[arg(long = "param", value_name = "NAME=VALUE")]
        params: Vec<String>,
        /// Every catalog kind and composite, defaults plus 3 perturbed sets.
        #[arg(long)]
        all: bool,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, allow_hyphen_values = true, default_value_t = -5.0)]
        from: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 5.0)]
        to: f64,
        /// Spread the work over threads (report order is unchanged).
        #[arg(long)]
        parallel: bool,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Range, monotonicity, smoothness and kinks.
    Props {
        #[command(flatten)]
        f: FnArgs,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Train on the regression or classification task.
    Experiment {
        #[arg(value_enum)]
        task: Task,
        #[command(flatten)]
        f: FnArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        rounds: Option<usize>,
        /// Run directory (default `runs/<task>-<fn>-<seed>`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Output landscape of an untrained network over [-2, 2]^2.
    Landscape {
        #[command(flatten)]
        f: FnArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 200)]
        resolution: usize,
        #[arg(long, default_value_t = 16)]
        width: usize,
        /// Output directory (default `runs/landscape-<fn>-<seed>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write landscape.svg.
        #[arg(long)]
        svg: bool,
    },
    /// Render a CSV written by this tool as SVG.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Column for the horizontal axis (default: first).
        #[arg(long)]
        x: Option<String>,
        /// Columns to draw (default: all others).
        #[arg(long, value_delimiter = ',')]
        y: Vec<String>,
        /// Draw an `x,y,value` grid as a heat map.
        #[arg(long)]
        heat: bool,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum Task {
    Regression,
    Classification,
}

/// Failure with the exit code it maps to.
enum Fail {
    Usage(String),
    Check(String),
    Diverged(String),
    Runtime(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        match e {
            Error::Divergence { .. } => Fail::Diverged(e.to_string()),
            Error::UnknownName(_) | Error::InvalidParam { .. } | Error::NonFiniteInput(_) => Fail::Usage(e.to_string()),
            _ => Fail::Runtime(e.to_string()),
        }
    }
}

fn usage(flag: &str, msg: impl std::fmt::Display) -> Fail {
    Fail::Usage(format!("{flag}: {msg}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Fail::Usage(m) => (2, m),
                Fail::Check(m) => (1, m),
                Fail::Diverged(m) => (3, m),
                Fail::Runtime(m) => (1, m),
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

/// Terminal formatting: 12 significant digits.
fn sig12(v: f64) -> String {
    if v == 0.0 {
        return "0.00000000000".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let mag = v.abs().log10().floor() as i32;
    if (-5..15).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.11e}")
    }
}

#[derive(Serialize)]
struct Row {
    x: f64,
    value: f64,
    d_dx: f64,
}

fn json<T: Serialize + ?Sized>(v: &T) -> Result<String, Fail> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Fail::Runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn seed_or_env(seed: Option<u64>) -> Result<u64, Fail> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var("AF_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| usage("AF_SEED", format!("`{s}` is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn build(name: &str, params: &[String]) -> Result<Activation, Fail> {
    let mut act = Activation::from_name(name).map_err(|e| usage("--fn", e))?;
    if params.is_empty() {
        return Ok(act);
    }
    let names = act.param_names();
    let mut vals = act.param_values();
    for p in params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| usage("--param", format!("`{p}` is not NAME=VALUE")))?;
        let v: f64 = v.trim().parse().map_err(|_| usage("--param", format!("`{v}` is not a number")))?;
        let i = names
            .iter()
            .position(|n| n == k.trim())
            .ok_or_else(|| usage("--param", format!("{name} has no parameter `{k}` (has: {})", names.join(", "))))?;
        vals[i] = v;
    }
    act.set_param_values(&vals);
    act.validate().map_err(|e| usage("--param", e))?;
    Ok(act)
}

fn write_out(out: Option<&Path>, text: &str) -> Result<(), Fail> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| usage("--out", e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cmd: Cmd) -> Result<(), Fail> {
    match cmd {
        Cmd::Eval { f, x, mode, seed } => {
            let act = build(&f.name, &f.params)?;
            if !x.is_finite() {
                return Err(usage("--x", "must be finite"));
            }
            let y = match mode {
                ModeArg::Eval => act.value(x),
                ModeArg::Train => {
                    let mut ctx = EvalContext::train(seed_or_env(seed)?);
                    let c = act.draw_coefficient(&mut ctx);
                    act.value_with(x, c)
                }
            };
            println!("{}", sig12(y));
            Ok(())
        }
        Cmd::Table { f, from, to, step, subgradient, format, out } => {
            let act = build(&f.name, &f.params)?;
            if !(from < to) {
                return Err(usage("--from/--to", format!("need from < to, got {from} >= {to}")));
            }
            if !(step > 0.0) {
                return Err(usage("--step", "must be positive"));
            }
            let n = ((to - from) / step + 1e-9).floor() as usize + 1;
            let c = Subgradient::from(subgradient).weight();
            let mut dp = vec![0.0; act.n_params()];
            let rows: Vec<(f64, f64, f64)> = (0..n)
                .map(|i| {
                    let x = from + step * i as f64;
                    let (y, d) = act.grad(x, None, c, &mut dp);
                    (x, y, d)
                })
                .collect();
            let text = match format {
                Format::Csv => {
                    let mut s = String::from("x,value,d_dx\n");
                    for (x, y, d) in &rows {
                        s.push_str(&format!("{x},{y},{d}\n"));
                    }
                    s
                }
                Format::Json => {
                    let v: Vec<Row> = rows.iter().map(|&(x, value, d_dx)| Row { x, value, d_dx }).collect();
                    json(&v)?
                }
            };
            write_out(out.as_deref(), &text)
        }
        Cmd::GradCheck { name, params, all, tol, samples, from, to, parallel, format } => {
            if samples == 0 {
                return Err(usage("--samples", "must be positive"));
            }
            if !(from < to) {
                return Err(usage("--from/--to", "need from < to"));
            }
            let reports = if all {
                gradients::check_all(from, to, samples, tol, parallel)
            } else {
                let name = name.ok_or_else(|| usage("--fn", "give --fn NAME or --all"))?;
                let act = build(&name, &params)?;
                vec![gradients::check_activation(&act, &act.name(), from, to, samples, tol)]
            };
            match format {
                Some(Format::Json) => print!("{}", json(&reports)?),
                Some(Format::Csv) => {
                    println!("label,checked,excluded,max_rel_err,worst_x,worst_component,pass");
                    for r in &reports {
                        println!(
                            "{},{},{},{},{},{},{}",
                            r.label, r.checked, r.excluded, r.max_rel_err, r.worst_x, r.worst_component, r.pass
                        );
                    }
                }
                None => {
                    for r in &reports {
                        let kinks = if r.kinks.is_empty() {
                            String::new()
                        } else {
                            format!(
                                "  kinks excluded: [{}] ({} samples)",
                                r.kinks.iter().map(|k| sig12(*k)).collect::<Vec<_>>().join(", "),
                                r.excluded
                            )
                        };
                        println!(
                            "{:<28} {}  max_rel_err={:.3e} at x={} ({}){}",
                            r.label,
                            if r.pass { "PASS" } else { "FAIL" },
                            r.max_rel_err,
                            if r.worst_x.is_finite() { sig12(r.worst_x) } else { "-".into() },
                            if r.worst_component.is_empty() { "-" } else { &r.worst_component },
                            kinks
                        );
                    }
                }
            }
            let failed = reports.iter().filter(|r| !r.pass).count();
            eprintln!("{} targets checked, {} failed (tol {tol:e})", reports.len(), failed);
            if failed > 0 {
                return Err(Fail::Check(format!("{failed} gradient check(s) failed")));
            }
            Ok(())
        }
        Cmd::Props { f, format } => {
            let act = build(&f.name, &f.params)?;
            match &act {
                Activation::Catalog { kind, params } => {
                    let d = describe(*kind, params)?;
                    if let Some(Format::Json) = format {
                        print!("{}", json(&d)?);
                    } else {
                        let b = |v: f64, open: bool, left: bool| {
                            let br = match (open, left) {
                                (true, true) => "(",
                                (false, true) => "[",
                                (true, false) => ")",
                                (false, false) => "]",
                            };
                            if left {
                                format!("{br}{}", if v.is_finite() { sig12(v) } else { "-inf".into() })
                            } else {
                                format!("{}{br}", if v.is_finite() { sig12(v) } else { "inf".into() })
                            }
                        };
                        println!("name:       {}", kind.name());
                        println!("group:      {:?}", d.group);
                        println!("family:     {:?}", d.family);
                        println!("range:      {}, {}", b(d.lower.value, d.lower.open, true), b(d.upper.value, d.upper.open, false));
                        println!("monotonic:  {}", d.monotonic);
                        println!("smooth:     {}", d.smooth);
                        println!("bounded:    {}", d.bounded);
                        println!("stochastic: {}", d.stochastic);
                        println!("learnable:  {}", params.learnable_names().join(", "));
                        println!("kinks:      [{}]", d.kinks.iter().map(|k| sig12(*k)).collect::<Vec<_>>().join(", "));
                    }
                }
                Activation::Composite(c) => {
                    println!("name:       {}", c.name());
                    println!("params:     {}", act.param_names().join(", "));
                    println!("kinks:      [{}]", c.kinks().iter().map(|k| sig12(*k)).collect::<Vec<_>>().join(", "));
                }
            }
            Ok(())
        }
        Cmd::Experiment { task, f, seed, rounds, out } => {
            let act = build(&f.name, &f.params)?;
            let seed = seed_or_env(seed)?;
            if rounds == Some(0) {
                return Err(usage("--rounds", "must be positive"));
            }
            let label = match task {
                Task::Regression => "regression",
                Task::Classification => "classification",
            };
            let dir = out.unwrap_or_else(|| PathBuf::from(format!("runs/{label}-{}-{seed}", f.name)));
            match task {
                Task::Regression => {
                    let mut cfg = RegressionConfig::new(seed);
                    if let Some(r) = rounds {
                        cfg.rounds = r;
                    }
                    match experiments::run_regression(&act, &cfg) {
                        Ok(r) => {
                            experiments::write_regression(&dir, &r)?;
                            println!("final validation MSE {}  ({})", sig12(r.final_val_mse), dir.display());
                        }
                        Err(e) => {
                            experiments::write_failed(&dir, label, &act, &cfg, seed, &e)?;
                            return Err(e.into());
                        }
                    }
                }
                Task::Classification => {
                    let mut cfg = ClassificationConfig::new(seed);
                    if let Some(r) = rounds {
                        cfg.rounds = r;
                    }
                    match experiments::run_classification(&act, &cfg) {
                        Ok(r) => {
                            experiments::write_classification(&dir, &r)?;
                            println!(
                                "final validation accuracy {}  class-1 area {}  ({})",
                                sig12(r.final_accuracy),
                                sig12(r.class1_area_fraction),
                                dir.display()
                            );
                        }
                        Err(e) => {
                            experiments::write_failed(&dir, label, &act, &cfg, seed, &e)?;
                            return Err(e.into());
                        }
                    }
                }
            }
            Ok(())
        }
        Cmd::Landscape { f, seed, resolution, width, out, svg } => {
            let act = build(&f.name, &f.params)?;
            let seed = seed_or_env(seed)?;
            if resolution < 16 {
                return Err(usage("--resolution", "must be at least 16"));
            }
            if width == 0 {
                return Err(usage("--width", "must be positive"));
            }
            let cfg = LandscapeConfig { resolution, width, ..Default::default() };
            let grid = experiments::output_landscape(&act, &cfg, seed)?;
            let rough = experiments::roughness(&grid, experiments::landscape_spacing(&cfg))?;
            let dir = out.unwrap_or_else(|| PathBuf::from(format!("runs/landscape-{}-{seed}", f.name)));
            std::fs::create_dir_all(&dir).map_err(|e| usage("--out", e))?;
            let csv = experiments::landscape_csv(&grid, &cfg);
            std::fs::write(dir.join("landscape.csv"), &csv).map_err(|e| usage("--out", e))?;
            if svg {
                let t = plot::parse_csv(&csv).map_err(Fail::Runtime)?;
                let title = format!("{} landscape, seed {seed}", act.name());
                std::fs::write(dir.join("landscape.svg"), plot::heat_map(&t, 0, 1, 2, &title))
                    .map_err(|e| usage("--out", e))?;
            }
            println!("roughness {}  ({})", sig12(rough), dir.display());
            Ok(())
        }
        Cmd::Plot { input, out, x, y, heat } => {
            let text = std::fs::read_to_string(&input).map_err(|e| usage("--input", e))?;
            let t = plot::parse_csv(&text).map_err(|e| usage("--input", e))?;
            let col = |name: &str| {
                t.header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| usage("--x/--y", format!("no column `{name}` (have: {})", t.header.join(", "))))
            };
            let xi = match &x {
                Some(n) => col(n)?,
                None => 0,
            };
            let title = input.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let svg = if heat {
                if t.header.len() < 3 {
                    return Err(usage("--heat", "needs x,y,value columns"));
                }
                plot::heat_map(&t, 0, 1, 2, &title)
            } else {
                let ys: Vec<usize> = if y.is_empty() {
                    (0..t.header.len()).filter(|&i| i != xi).collect()
                } else {
                    y.iter().map(|n| col(n)).collect::<Result<_, _>>()?
                };
                if ys.is_empty() {
                    return Err(usage("--y", "nothing to plot"));
                }
                plot::line_plot(&t, xi, &ys, &title)
            };
            std::fs::write(&out, svg).map_err(|e| usage("--out", e))
        }
    }
}
