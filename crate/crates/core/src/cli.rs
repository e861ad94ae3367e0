//! Command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::critical::find_critical_radii;
use crate::error::{Error, Result};
use crate::flow::{self, FlowConfig, FlowMode};
use crate::geometry;
use crate::report::{self, Axis, OutputDir, RunManifest, Series};
use crate::soliton::{SolitonParams, SolitonProfile};
use crate::validation;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const OUT_ENV: &str = "LENSFLOW_OUT";
pub const DEFAULT_OUT: &str = "lensflow-out";

/// The default (n, k) test matrix.
pub const MATRIX: [(u32, u32); 5] = [(2, 1), (3, 1), (3, 2), (4, 2), (5, 3)];

#[derive(Debug, Parser)]
#[command(name = "lensflow", version, about = "Soliton profiles, critical radii and lens-space flows")]
struct Cli {
    /// Complex dimension.
    #[arg(long, global = true)]
    n: Option<u32>,
    /// Twist of the bundle, 1 <= k <= n-1.
    #[arg(long, global = true)]
    k: Option<u32>,
    /// Number of grid nodes.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Output directory (default: $LENSFLOW_OUT, else ./lensflow-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// File of key=value lines; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// No summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    /// Summary on stdout as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the soliton constant and tabulate the profile.
    Solve,
    /// Geometry of the orbits over a log-spaced radius sweep.
    Geometry {
        #[arg(long, allow_negative_numbers = true)]
        r_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        r_max: Option<f64>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Radii where lambda = -1 and lambda = 0.
    Critical,
    /// Integrate one flow trajectory.
    Flow {
        /// rmcf or mcf.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        r0: Option<f64>,
        /// Horizon of the ambient Ricci flow.
        #[arg(long = "T", allow_negative_numbers = true)]
        t_horizon: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Maximal times, collapse targets and blow-up rates at representative radii.
    Table1 {
        /// Every (n, k) of the default matrix instead of a single pair.
        #[arg(long)]
        matrix: bool,
        #[arg(long = "T", allow_negative_numbers = true)]
        t_horizon: Option<f64>,
    },
    /// Residual scans, finite-difference soliton check and flow cross-checks.
    Validate {
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Plot data for lambda(r), |A|^2(r) and sample trajectories.
    Plot {
        /// Also write SVG charts.
        #[arg(long)]
        svg: bool,
        #[arg(long, allow_negative_numbers = true)]
        r_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        r_max: Option<f64>,
        #[arg(long)]
        count: Option<usize>,
    },
}

const CONFIG_KEYS: [&str; 15] = [
    "n", "k", "grid", "out", "r_min", "r_max", "count", "mode", "r0", "T", "samples", "matrix", "seed", "svg", "quiet",
];

/// Values from `--config`, with keys normalised to underscores.
#[derive(Debug, Default)]
struct FileConfig {
    values: BTreeMap<String, String>,
}

enum ConfigError {
    Usage(String),
    Other(Error),
}

impl FileConfig {
    fn load(path: &Path) -> std::result::Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Other(e.into()))?;
        let mut values = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Usage(format!("{}:{}: expected key=value", path.display(), no + 1)));
            };
            let key = key.trim().trim_start_matches("--").replace('-', "_");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::Usage(format!("{}:{}: unknown key '{key}'", path.display(), no + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    fn get<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|_| Error::InvalidParams(format!("config value {key} = '{raw}' does not parse"))),
            None => Ok(default),
        }
    }

    fn flag(&self, key: &str, flag: bool) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        self.get(key, None, false)
    }
}

struct Ctx {
    argv: Vec<String>,
    cfg: FileConfig,
    quiet: bool,
    json: bool,
    out: PathBuf,
    n: u32,
    k: u32,
    grid: usize,
}

impl Ctx {
    fn params(&self) -> SolitonParams {
        SolitonParams::new(self.n, self.k).with_grid(self.grid)
    }

    fn log(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    fn summary<T: Serialize>(&self, value: &T, human: &str) -> Result<()> {
        if self.json {
            print!("{}", report::sorted_json(value)?);
        } else if !self.quiet {
            println!("{human}");
        }
        Ok(())
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let argv: Vec<String> = std::iter::once("lensflow".to_string())
        .chain(args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()))
        .collect();
    let cfg = match &cli.config {
        Some(path) => match FileConfig::load(path) {
            Ok(c) => c,
            Err(ConfigError::Usage(msg)) => {
                eprintln!("error: {msg}");
                return EXIT_USAGE;
            }
            Err(ConfigError::Other(e)) => {
                eprintln!("error: {e}");
                return e.exit_code();
            }
        },
        None => FileConfig::default(),
    };
    match dispatch(cli, cfg, argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli, cfg: FileConfig, argv: Vec<String>) -> Result<i32> {
    let env_out = std::env::var_os(OUT_ENV).map(PathBuf::from);
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.values.get("out").map(PathBuf::from))
        .or(env_out)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let ctx = Ctx {
        quiet: cfg.flag("quiet", cli.quiet)?,
        json: cli.json,
        n: cfg.get("n", cli.n, 2)?,
        k: cfg.get("k", cli.k, 1)?,
        grid: cfg.get("grid", cli.grid, SolitonParams::new(2, 1).grid_size)?,
        argv,
        out,
        cfg,
    };
    match cli.command {
        Command::Solve => solve(&ctx),
        Command::Geometry { r_min, r_max, count } => {
            let r_min = ctx.cfg.get("r_min", r_min, 0.1)?;
            let r_max = ctx.cfg.get("r_max", r_max, 10.0)?;
            let count = ctx.cfg.get("count", count, 200)?;
            geometry_cmd(&ctx, r_min, r_max, count)
        }
        Command::Critical => critical_cmd(&ctx),
        Command::Flow {
            mode,
            r0,
            t_horizon,
            samples,
        } => {
            let mode: FlowMode = ctx.cfg.get::<String>("mode", mode, "rmcf".into())?.parse()?;
            let r0: Option<f64> = match r0 {
                Some(v) => Some(v),
                None => ctx.cfg.get("r0", None, f64::NAN).map(|v| (!v.is_nan()).then_some(v))?,
            };
            let t_horizon = ctx.cfg.get("T", t_horizon, 1.0)?;
            let samples = ctx.cfg.get("samples", samples, 200)?;
            flow_cmd(&ctx, mode, r0, t_horizon, samples)
        }
        Command::Table1 { matrix, t_horizon } => {
            let matrix = ctx.cfg.flag("matrix", matrix)?;
            let t_horizon = ctx.cfg.get("T", t_horizon, 1.0)?;
            table1_cmd(&ctx, matrix, t_horizon)
        }
        Command::Validate { seed } => {
            let seed = ctx.cfg.get("seed", seed, validation::DEFAULT_SEED)?;
            validate_cmd(&ctx, seed)
        }
        Command::Plot {
            svg,
            r_min,
            r_max,
            count,
        } => {
            let svg = ctx.cfg.flag("svg", svg)?;
            let r_min = ctx.cfg.get("r_min", r_min, 0.1)?;
            let r_max = ctx.cfg.get("r_max", r_max, 10.0)?;
            let count = ctx.cfg.get("count", count, 200)?;
            plot_cmd(&ctx, svg, r_min, r_max, count)
        }
    }
}

fn build(ctx: &Ctx) -> Result<(SolitonProfile, crate::critical::CriticalRadii)> {
    ctx.log(&format!("building profile n={} k={} grid={}", ctx.n, ctx.k, ctx.grid));
    let profile = SolitonProfile::build(&ctx.params())?;
    let crit = find_critical_radii(&profile)?;
    Ok((profile, crit))
}

#[derive(Serialize)]
struct SolveSummary {
    n: u32,
    k: u32,
    c: f64,
    a1: f64,
    b1: f64,
    gauge: String,
    grid: usize,
}

fn solve(ctx: &Ctx) -> Result<i32> {
    let (profile, crit) = build(ctx)?;
    let mut out = OutputDir::create(&ctx.out)?;
    out.write("profile.csv", &report::profile_csv(&profile)?)?;
    out.finish(RunManifest::new(ctx.argv.clone(), &profile, &crit))?;
    let s = SolveSummary {
        n: ctx.n,
        k: ctx.k,
        c: profile.c,
        a1: profile.a1,
        b1: profile.b1,
        gauge: profile.gauge_label(),
        grid: ctx.grid,
    };
    ctx.summary(&s, &format!("c = {:.17}\na1 = {:.17}\nb1 = {:.17}", s.c, s.a1, s.b1))?;
    Ok(EXIT_OK)
}

fn geometry_cmd(ctx: &Ctx, r_min: f64, r_max: f64, count: usize) -> Result<i32> {
    let (profile, crit) = build(ctx)?;
    let states = geometry::sweep(&profile, r_min, r_max, count)?;
    let mut out = OutputDir::create(&ctx.out)?;
    out.write("geometry.csv", &report::geometry_csv(&states)?)?;
    out.finish(RunManifest::new(ctx.argv.clone(), &profile, &crit))?;
    #[derive(Serialize)]
    struct G {
        count: usize,
        r_min: f64,
        r_max: f64,
    }
    ctx.summary(
        &G { count, r_min, r_max },
        &format!("{count} radii written to {}", ctx.out.join("geometry.csv").display()),
    )?;
    Ok(EXIT_OK)
}

fn critical_cmd(ctx: &Ctx) -> Result<i32> {
    let (profile, crit) = build(ctx)?;
    let mut out = OutputDir::create(&ctx.out)?;
    out.write("critical.json", &report::sorted_json(&crit)?)?;
    out.finish(RunManifest::new(ctx.argv.clone(), &profile, &crit))?;
    ctx.summary(&crit, &format!("r1 = {:.17}\nr2 = {:.17}", crit.r1, crit.r2))?;
    Ok(EXIT_OK)
}

fn flow_cmd(ctx: &Ctx, mode: FlowMode, r0: Option<f64>, t_horizon: f64, samples: usize) -> Result<i32> {
    let Some(r0) = r0 else {
        return Err(Error::InvalidParams("flow needs --r0".into()));
    };
    let (profile, crit) = build(ctx)?;
    let mut cfg = FlowConfig::new(mode, r0, t_horizon);
    cfg.samples = samples;
    let traj = flow::integrate_with(&profile, &cfg, &crit)?;
    let summary = report::FlowSummary::of(&traj);
    let mut out = OutputDir::create(&ctx.out)?;
    out.write("flow.csv", &report::flow_csv(&traj)?)?;
    out.write("flow.json", &report::sorted_json(&summary)?)?;
    out.finish(RunManifest::new(ctx.argv.clone(), &profile, &crit))?;
    ctx.summary(
        &summary,
        &format!(
            "target = {}\nT' (ode) = {:.17}\nT' (quadrature) = {:.17}",
            traj.target, traj.t_prime_ode, traj.t_prime_quadrature
        ),
    )?;
    Ok(EXIT_OK)
}

fn table1_cmd(ctx: &Ctx, matrix: bool, t_horizon: f64) -> Result<i32> {
    let pairs: Vec<(u32, u32)> = if matrix { MATRIX.to_vec() } else { vec![(ctx.n, ctx.k)] };
    let mut tables = Vec::new();
    for (n, k) in &pairs {
        ctx.log(&format!("table for n={n} k={k}"));
        tables.push(report::table1_for(*n, *k, ctx.grid, t_horizon)?);
    }
    let first = SolitonProfile::build(&SolitonParams::new(pairs[0].0, pairs[0].1).with_grid(ctx.grid))?;
    let crit = find_critical_radii(&first)?;
    let mut out = OutputDir::create(&ctx.out)?;
    out.write("table1.json", &report::sorted_json(&tables)?)?;
    let md = report::table1_markdown(&tables);
    out.write("table1.md", &md)?;
    let mut manifest = RunManifest::new(ctx.argv.clone(), &first, &crit);
    if matrix {
        manifest.gauge = format!("{} (parameters of the first matrix entry)", manifest.gauge);
    }
    out.finish(manifest)?;
    let all_match = tables.iter().all(report::table_matches_expected);
    if ctx.json {
        print!("{}", report::sorted_json(&tables)?);
    } else if !ctx.quiet {
        print!("{md}");
    }
    if !all_match {
        eprintln!("computed table differs from the expected two-panel table");
        return Ok(EXIT_VALIDATION);
    }
    Ok(EXIT_OK)
}

fn validate_cmd(ctx: &Ctx, seed: u64) -> Result<i32> {
    let (profile, crit) = build(ctx)?;
    ctx.log("running residual scans, finite-difference probes and flow cross-checks");
    let rep = validation::validate(&profile, seed)?;
    let mut out = OutputDir::create(&ctx.out)?;
    out.write("validation.json", &report::sorted_json(&rep)?)?;
    out.finish(RunManifest::new(ctx.argv.clone(), &profile, &crit))?;
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3e}"));
    ctx.summary(
        &rep,
        &format!(
            "ode residual        {:.3e}\nholomorphy residual {:.3e}\nfd soliton residual {}\nh-ode crosscheck    {:.3e}\nT' crosscheck       {:.3e}\npassed              {}",
            rep.ode_residual_sup,
            rep.holomorphy_residual_sup,
            fmt(rep.soliton_fd_residual),
            rep.h_ode_crosscheck,
            rep.tprime_crosscheck,
            rep.passed
        ),
    )?;
    if !rep.passed {
        for f in &rep.failures {
            eprintln!("validation failure: {f}");
        }
        return Ok(EXIT_VALIDATION);
    }
    Ok(EXIT_OK)
}

fn plot_cmd(ctx: &Ctx, svg: bool, r_min: f64, r_max: f64, count: usize) -> Result<i32> {
    let (profile, crit) = build(ctx)?;
    let states = geometry::sweep(&profile, r_min, r_max, count)?;
    let lam: Vec<(f64, f64)> = states.iter().map(|s| (s.r, s.lambda)).collect();
    let a2: Vec<(f64, f64)> = states.iter().map(|s| (s.r, s.norm_a2)).collect();
    let mut out = OutputDir::create(&ctx.out)?;
    out.write("lambda.dat", &report::two_column("r", "lambda", &lam))?;
    out.write("a2.dat", &report::two_column("r", "A2", &a2))?;

    let runs = [
        ("rmcf_below", FlowMode::Rmcf, 0.9 * crit.r1),
        ("rmcf_above", FlowMode::Rmcf, 1.1 * crit.r1),
        ("mcf_below", FlowMode::Mcf, 0.9 * crit.r2),
        ("mcf_above", FlowMode::Mcf, 1.1 * crit.r2),
    ];
    let mut curves = Vec::new();
    for (name, mode, r0) in runs {
        let traj = flow::integrate_with(&profile, &FlowConfig::new(mode, r0, 1.0), &crit)?;
        let pts: Vec<(f64, f64)> = traj
            .samples
            .iter()
            .map(|s| (s.t, if mode == FlowMode::Rmcf { s.r } else { s.h }))
            .collect();
        let ylabel = if mode == FlowMode::Rmcf { "R" } else { "h" };
        out.write(&format!("{name}.dat"), &report::two_column("t", ylabel, &pts))?;
        curves.push((name, mode, pts));
    }
    if svg {
        out.write(
            "lambda.svg",
            &report::svg_chart("lambda(r)", "r", "lambda", Axis::Log, Axis::Linear, &[Series { label: "lambda", points: &lam }]),
        )?;
        out.write(
            "a2.svg",
            &report::svg_chart("|A|^2(r)", "r", "|A|^2", Axis::Log, Axis::Log, &[Series { label: "|A|^2", points: &a2 }]),
        )?;
        for (mode, file, ylabel) in [(FlowMode::Rmcf, "rmcf.svg", "R(t)"), (FlowMode::Mcf, "mcf.svg", "h(t)")] {
            let series: Vec<Series> = curves
                .iter()
                .filter(|c| c.1 == mode)
                .map(|c| Series { label: c.0, points: &c.2 })
                .collect();
            let title = format!("{} trajectories", mode.to_string().to_uppercase());
            out.write(file, &report::svg_chart(&title, "t", ylabel, Axis::Linear, Axis::Log, &series))?;
        }
    }
    let files = out.finish(RunManifest::new(ctx.argv.clone(), &profile, &crit))?;
    ctx.summary(&files, &format!("wrote {} files to {}", files.len(), ctx.out.display()))?;
    Ok(EXIT_OK)
}
