//! `latgauss`: command-line front end for the latgauss library.
//!
//! Exit codes: 0 on success, 1 when a verification campaign reports a
//! VIOLATED verdict or misses its INCONCLUSIVE threshold, 2 on malformed input
//! or any other error.

use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use latgauss::exact::{parse_rational, rat_to_f64};
use latgauss::{
    curve_family, derivative_report, mass, mean_norm, moment_report, periodic_gaussian, run_campaign, CheckKind,
    Coset, GaussianParam, InstanceEnsemble, Lattice, SamplerTable,
};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "latgauss", version, about = "Certified Gaussian sums over lattices")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Input JSON: a file path or an inline object. Reads standard input when absent.
    #[arg(long, global = true)]
    input: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Absolute error target (relative accuracy for `verify`).
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for campaigns; defaults to the available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// ρ(L + x) for the coset in the input.
    Mass,
    /// f(x) = ρ(L + x)/ρ(L).
    F,
    /// Moments of D_{L+x} and derivatives of f at x.
    Moments,
    /// Samples of D_{L+x}; the input may set "count" and "tv_eps".
    Sample {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Seeded random verification campaign.
    Verify {
        #[arg(long, default_value = "default")]
        campaign: String,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        /// Comma-separated check names; all checks when absent.
        #[arg(long)]
        checks: Option<String>,
    },
    /// f_{L,s}(x) over a grid: input has "basis", "x_grid" and "s_list".
    Curves,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Breach(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<latgauss::Error> for Failure {
    fn from(e: latgauss::Error) -> Self {
        Failure::Other(e.into())
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
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Breach(msg)) => {
            eprintln!("latgauss: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Other(e)) => {
            eprintln!("latgauss: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(anyhow!("--threads must be at least 1").into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("thread pool")?;
    }
    if let Some(e) = cli.eps {
        if !(e > 0.0 && e.is_finite()) {
            return Err(anyhow!("--eps must be positive and finite, got {e}").into());
        }
    }
    let eps = cli.eps.unwrap_or(1e-12);
    let text = match &cli.cmd {
        Cmd::Mass => {
            let (c, p) = read_coset(&read_input(cli)?)?;
            let v = mass(&c, &p, eps)?;
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => to_json(&v)?,
                Format::Csv => format!("value,err\n{},{}\n", num(v.value), num(v.err)),
            }
        }
        Cmd::F => {
            let (c, p) = read_coset(&read_input(cli)?)?;
            let v = periodic_gaussian(&c.lattice, &p, &c.shift, eps)?;
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => to_json(&v)?,
                Format::Csv => format!("value,err\n{},{}\n", num(v.value), num(v.err)),
            }
        }
        Cmd::Moments => {
            let (c, p) = read_coset(&read_input(cli)?)?;
            let m = moment_report(&c, &p, eps)?;
            let d = derivative_report(&c.lattice, &p, &c.shift, eps)?;
            let a = mean_norm(&c, &p, eps)?;
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => to_json(&json!({ "moments": m, "derivatives": d, "mean_norm": a }))?,
                Format::Csv => moments_csv(&m, &d),
            }
        }
        Cmd::Sample { count } => {
            let input = read_input(cli)?;
            let (c, p) = read_coset(&input)?;
            let count = match count {
                Some(n) => *n,
                None => input.get("count").map(|v| as_usize(v, "count")).transpose()?.unwrap_or(1000),
            };
            if count == 0 {
                return Err(anyhow!("count must be at least 1").into());
            }
            let tv = input.get("tv_eps").map(|v| as_f64(v, "tv_eps")).transpose()?.unwrap_or(1e-9);
            let batch = SamplerTable::new(&c, &p, tv)?.batch(count, cli.seed)?;
            match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let mut buf = Vec::new();
                    batch.write_csv(&mut buf).context("formatting samples")?;
                    String::from_utf8(buf).context("sample output")?
                }
                Format::Json => to_json(&json!({ "header": batch.header(), "samples": batch.samples }))?,
            }
        }
        Cmd::Verify { campaign, trials, checks } => {
            if campaign != "default" {
                return Err(anyhow!("unknown campaign {campaign:?}; only \"default\" is defined").into());
            }
            let checks: Vec<CheckKind> = match checks {
                Some(list) => list.split(',').map(|c| c.trim().parse()).collect::<latgauss::Result<_>>()?,
                None => CheckKind::ALL.to_vec(),
            };
            if cli.format == Some(Format::Csv) {
                return Err(anyhow!("verify writes JSON only").into());
            }
            let eps = cli.eps.unwrap_or(1e-10);
            let summary = run_campaign(&InstanceEnsemble::default_campaign(cli.seed), *trials, &checks, eps)?;
            let text = to_json(&summary)?;
            write_output(cli, &text)?;
            if !summary.passed {
                return Err(Failure::Breach(format!(
                    "campaign failed: {} violated, {} errors",
                    summary.violated,
                    summary.errors.len()
                )));
            }
            return Ok(());
        }
        Cmd::Curves => {
            let input = read_input(cli)?;
            let lat = Lattice::from_json(&input)?;
            let x_grid = read_grid(&input, lat.dim())?;
            let s_list: Vec<f64> = input
                .get("s_list")
                .and_then(Value::as_array)
                .ok_or_else(|| anyhow!("missing \"s_list\" array"))?
                .iter()
                .map(|v| as_f64(v, "s_list"))
                .collect::<Result<_>>()?;
            let rows = curve_family(&lat, &x_grid, &s_list, eps)?;
            match cli.format.unwrap_or(Format::Csv) {
                Format::Json => to_json(&rows)?,
                Format::Csv => {
                    let mut out = String::from("x,s,f,err\n");
                    for r in &rows {
                        let x: Vec<String> = r.x.iter().map(|&v| num(v)).collect();
                        out.push_str(&format!("{},{},{},{}\n", x.join(" "), num(r.s), num(r.f.value), num(r.f.err)));
                    }
                    out
                }
            }
        }
    };
    write_output(cli, &text)?;
    Ok(())
}

fn read_input(cli: &Cli) -> Result<Value> {
    let raw = match &cli.input {
        Some(s) if s.trim_start().starts_with('{') => s.clone(),
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading {path}"))?,
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).context("reading standard input")?;
            s
        }
    };
    let v: Value = serde_json::from_str(&raw).context("input is not valid JSON")?;
    if !v.is_object() {
        bail!("input must be a JSON object");
    }
    Ok(v)
}

fn read_coset(input: &Value) -> Result<(Coset<f64>, GaussianParam<f64>)> {
    let lat = Lattice::from_json(input)?;
    let n = lat.dim();
    let shift = match input.get("shift") {
        None => vec![0.0; n],
        Some(v) => read_vector(v, "shift")?,
    };
    let param = input.get("param").ok_or_else(|| anyhow!("missing \"param\""))?;
    let p = GaussianParam::from_json(param)?;
    Ok((Coset::new(lat, shift)?, p))
}

/// Numbers or exact rational strings such as "1/2".
fn read_vector(v: &Value, what: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| anyhow!("\"{what}\" must be an array"))?
        .iter()
        .map(|x| Ok(rat_to_f64(&parse_rational(x)?)))
        .collect()
}

fn read_grid(input: &Value, n: usize) -> Result<Vec<Vec<f64>>> {
    let grid = input.get("x_grid").and_then(Value::as_array).ok_or_else(|| anyhow!("missing \"x_grid\" array"))?;
    grid.iter()
        .map(|x| {
            let v = if x.is_array() { read_vector(x, "x_grid")? } else { vec![rat_to_f64(&parse_rational(x)?)] };
            if v.len() != n {
                bail!("x_grid entries must have dimension {n}");
            }
            Ok(v)
        })
        .collect()
}

fn as_f64(v: &Value, what: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| anyhow!("\"{what}\" must be a number"))
}

fn as_usize(v: &Value, what: &str) -> Result<usize> {
    v.as_u64().map(|u| u as usize).ok_or_else(|| anyhow!("\"{what}\" must be a nonnegative integer"))
}

/// 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// JSON with every float printed to 17 significant digits.
struct Digits17;

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write!(w, "{:.16e}", v as f64)
    }
}

fn to_json<S: Serialize>(v: &S) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    v.serialize(&mut ser).context("serializing output")?;
    buf.push(b'\n');
    String::from_utf8(buf).context("output encoding")
}

fn moments_csv(m: &latgauss::MomentReport<f64>, d: &latgauss::DerivativeReport<f64>) -> String {
    let n = m.dim();
    let mut out = String::from("quantity,i,j,value,err\n");
    let mut row = |q: &str, i: usize, j: Option<usize>, v: f64, e: f64| {
        let j = j.map(|j| j.to_string()).unwrap_or_default();
        out.push_str(&format!("{q},{i},{j},{},{}\n", num(v), num(e)));
    };
    for i in 0..n {
        row("mean", i, None, m.mean[i], m.mean_err[i]);
    }
    for i in 0..n {
        for j in 0..n {
            row("second", i, Some(j), m.second[i][j], m.second_err[i][j]);
        }
    }
    for i in 0..n {
        for j in 0..n {
            row("covariance", i, Some(j), m.covariance[i][j], m.covariance_err[i][j]);
        }
    }
    row("f", 0, None, d.f.value, d.f.err);
    for i in 0..n {
        row("grad", i, None, d.grad[i], d.grad_err[i]);
    }
    for i in 0..n {
        for j in 0..n {
            row("hess", i, Some(j), d.hess[i][j], d.hess_err[i][j]);
        }
    }
    out
}

fn write_output(cli: &Cli, text: &str) -> Result<()> {
    match &cli.output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes()).context("writing standard output")?;
            out.flush().context("writing standard output")
        }
    }
}
