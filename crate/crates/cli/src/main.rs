//! `meshkey`: build and verify key pre-distribution designs, export key rings,
//! evaluate the comparison metrics and run capture experiments.
//!
//! Exit status is 0 on success, 1 when parameters or results fail validation,
//! 2 on I/O and parse errors.

mod manifest;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use meshkey_core::analytics::{figure_data, to_csv, FigureRequest, Matching, Metric, Scheme};
use meshkey_core::designs::{build_residual, build_sbibd, build_td, classify, profile, BlockDesign, DesignKind};
use meshkey_core::meshkps::MeshScheme;
use meshkey_core::sim::{self, run_capture, CaptureConfig, Semantics};

use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "meshkey", version, about = "Mesh key pre-distribution toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Construct a design and write it as JSON.
    Build(BuildArgs),
    /// Profile and classify a design file, optionally checking expected parameters.
    Verify(VerifyArgs),
    /// Evaluate scalability, connectivity or resilience across schemes.
    Analyze(AnalyzeArgs),
    /// Monte Carlo node-capture experiment on a mesh.
    Simulate(SimulateArgs),
    /// Export the key rings of every mesh device.
    Keys(KeysArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum BuildScheme {
    Sbibd,
    Td,
    Rd,
    #[value(name = "rd_star", alias = "rd-star")]
    RdStar,
    Mesh,
}

#[derive(Debug, Clone, Args, Serialize)]
struct BuildArgs {
    #[arg(long, value_enum)]
    scheme: BuildScheme,
    #[arg(long)]
    q: u32,
    /// Block size for td.
    #[arg(long)]
    k: Option<u32>,
    /// Device memory in keys; mesh rings must fit.
    #[arg(long)]
    memory: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct VerifyArgs {
    design: PathBuf,
    #[arg(long)]
    expect_v: Option<u32>,
    #[arg(long)]
    expect_b: Option<usize>,
    #[arg(long)]
    expect_r: Option<usize>,
    #[arg(long)]
    expect_k: Option<usize>,
    /// Distinct pair coincidence values, e.g. `7,9`.
    #[arg(long, value_delimiter = ',')]
    expect_lambdas: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct AnalyzeArgs {
    #[arg(long)]
    metric: String,
    /// Comma-separated scheme names; defaults to every compared scheme.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    /// Evaluate every scheme at these q values.
    #[arg(long, value_delimiter = ',', conflicts_with = "ring", required_unless_present = "ring")]
    q: Option<Vec<u32>>,
    /// Match schemes by ring-size targets instead.
    #[arg(long, value_delimiter = ',')]
    ring: Option<Vec<u32>>,
    #[arg(long, default_value_t = 0)]
    x_min: u64,
    #[arg(long, default_value_t = 100)]
    x_max: u64,
    /// t for t_ukp.
    #[arg(long)]
    t: Option<u32>,
    /// TD block size under --q matching (default k = q).
    #[arg(long)]
    k: Option<u32>,
    /// Emit only the printed formulas, without the enumerated variants.
    #[arg(long)]
    paper_faithful: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum SemanticsArg {
    Union,
    Single,
}

impl From<SemanticsArg> for Semantics {
    fn from(s: SemanticsArg) -> Semantics {
        match s {
            SemanticsArg::Union => Semantics::Union,
            SemanticsArg::Single => Semantics::Single,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
struct MeshSource {
    /// Mesh design file produced by `build --scheme mesh`.
    #[arg(long, conflicts_with = "q", required_unless_present = "q")]
    design: Option<PathBuf>,
    #[arg(long)]
    q: Option<u32>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    mesh: MeshSource,
    /// Captured device counts, e.g. `1,5,10`.
    #[arg(long, value_delimiter = ',', required = true)]
    x: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, value_enum, default_value = "union")]
    semantics: SemanticsArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct KeysArgs {
    #[command(flatten)]
    mesh: MeshSource,
    /// Include key values; requires --master.
    #[arg(long, requires = "master")]
    with_secrets: bool,
    /// 32-byte master secret as hex.
    #[arg(long, requires = "with_secrets")]
    #[serde(skip)]
    master: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Write the reproduced output here instead of the recorded path.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure split by exit status.
#[derive(Debug)]
enum Failure {
    Invalid(anyhow::Error),
    Io(anyhow::Error),
}

impl From<meshkey_core::Error> for Failure {
    fn from(e: meshkey_core::Error) -> Failure {
        Failure::Invalid(e.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::Io(e.into())
    }
}

type Outcome<T> = Result<T, Failure>;

fn io_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Io(e.into())
}

struct Run {
    args: Vec<String>,
    started: Instant,
    inputs: Vec<PathBuf>,
}

impl Run {
    fn emit(&self, command: &Command, out: Option<&Path>, text: &str) -> Outcome<()> {
        let Some(out) = out else {
            print!("{text}");
            return Ok(());
        };
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err)?;
        }
        fs::write(out, text).with_context(|| format!("writing {}", out.display())).map_err(io_err)?;
        let m = RunManifest {
            command: command_name(command).to_string(),
            args: self.args.clone(),
            params: serde_json::to_value(command).expect("params serialize"),
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: self.inputs.clone(),
            outputs: vec![out.to_path_buf()],
            wall_time_ms: self.started.elapsed().as_millis(),
        };
        let path = m.write_beside(out).map_err(io_err)?;
        eprintln!("wrote {} and {}", out.display(), path.display());
        Ok(())
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Build(_) => "build",
        Command::Verify(_) => "verify",
        Command::Analyze(_) => "analyze",
        Command::Simulate(_) => "simulate",
        Command::Keys(_) => "keys",
        Command::Replay(_) => "replay",
    }
}

fn load_design(path: &Path) -> Outcome<BlockDesign> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(io_err)?;
    BlockDesign::from_json(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(io_err)
}

fn load_mesh(src: &MeshSource, run: &mut Run) -> Outcome<MeshScheme> {
    match (&src.design, src.q) {
        (Some(path), _) => {
            run.inputs.push(path.clone());
            let d = load_design(path)?;
            Ok(MeshScheme::from_design(&d)?)
        }
        (None, Some(q)) => Ok(MeshScheme::build(q)?),
        (None, None) => Err(Failure::Io(anyhow!("either --design or --q is required"))),
    }
}

fn cmd_build(a: &BuildArgs, run: &Run, cmd: &Command) -> Outcome<()> {
    let design = match a.scheme {
        BuildScheme::Sbibd => build_sbibd(a.q)?,
        BuildScheme::Td => {
            let k = a.k.ok_or_else(|| Failure::Invalid(anyhow!("td needs --k")))?;
            build_td(k, a.q)?
        }
        BuildScheme::Rd => build_residual(a.q, false)?,
        BuildScheme::RdStar => build_residual(a.q, true)?,
        BuildScheme::Mesh => {
            let mesh = MeshScheme::build(a.q)?;
            if let Some(k) = a.memory {
                mesh.check_memory_bound(k)?;
            }
            mesh.to_design()
        }
    };
    let p = profile(&design);
    eprintln!("{} q={}: {} blocks", design.kind, a.q, design.b());
    eprintln!("{p}");
    eprintln!("classification: {}", classify(&p));
    run.emit(cmd, a.out.as_deref(), &design.to_json())
}

fn cmd_verify(a: &VerifyArgs) -> Outcome<()> {
    let design = load_design(&a.design)?;
    let p = profile(&design);
    println!("kind: {}", design.kind);
    println!("{p}");
    println!("classification: {}", classify(&p));

    if design.kind == DesignKind::Mesh {
        if let Some(q) = design.q {
            report_mesh_lambda(q as u64, &p.lambdas());
        }
    }

    let mut mismatches = Vec::new();
    let mut check = |name: &str, want: Option<String>, got: String| {
        if let Some(w) = want {
            if w != got {
                mismatches.push(format!("{name}: expected {w}, found {got}"));
            }
        }
    };
    let opt = |o: Option<usize>| o.map_or("irregular".to_string(), |v| v.to_string());
    check("v", a.expect_v.map(|v| v.to_string()), p.v.to_string());
    check("b", a.expect_b.map(|v| v.to_string()), p.b.to_string());
    check("r", a.expect_r.map(|v| v.to_string()), opt(p.regular_degree()));
    check("k", a.expect_k.map(|v| v.to_string()), opt(p.uniform_size()));
    let mut want = a.expect_lambdas.clone();
    if let Some(w) = want.as_mut() {
        w.sort_unstable();
        w.dedup();
    }
    check("lambdas", want.map(|w| format!("{w:?}")), format!("{:?}", p.lambdas()));
    if mismatches.is_empty() {
        println!("expectations: ok");
        Ok(())
    } else {
        for m in &mismatches {
            println!("mismatch {m}");
        }
        Err(Failure::Invalid(anyhow!("{} expectation(s) not met", mismatches.len())))
    }
}

/// The two printed forms of the first coincidence value disagree; report which
/// one the enumeration supports.
fn report_mesh_lambda(q: u64, lambdas: &[u64]) {
    let n = q * q + q + 1;
    let certified = lambdas.iter().copied().find(|&l| l != (q + 1) * (q + 1));
    let mark = |v: u64| if Some(v) == certified { "matches" } else { "does not match" };
    match certified {
        Some(l) => {
            println!("λ₁ certified by enumeration: {l}");
            println!("  printed (q²+q+1)² = {}: {}", n * n, mark(n * n));
            println!("  printed q²+q+1 = {n}: {}", mark(n));
        }
        None => println!("λ₁ not found in spectrum {lambdas:?}"),
    }
}

fn parse_schemes(names: &Option<Vec<String>>) -> Outcome<Vec<Scheme>> {
    match names {
        None => Ok(Scheme::FIGURE.to_vec()),
        Some(ns) if ns.iter().any(|n| n == "all") => Ok(Scheme::FIGURE.to_vec()),
        Some(ns) => ns.iter().map(|n| n.parse().map_err(Failure::from)).collect(),
    }
}

fn cmd_analyze(a: &AnalyzeArgs, run: &Run, cmd: &Command) -> Outcome<()> {
    let metric: Metric = a.metric.parse()?;
    let matching = match (&a.q, &a.ring) {
        (Some(q), _) => Matching::EqualQ(q.clone()),
        (None, Some(r)) => Matching::EqualRing(r.clone()),
        (None, None) => return Err(Failure::Io(anyhow!("either --q or --ring is required"))),
    };
    if a.x_min > a.x_max {
        return Err(Failure::Invalid(anyhow!("--x-min exceeds --x-max")));
    }
    let req = FigureRequest {
        metric,
        schemes: parse_schemes(&a.schemes)?,
        matching,
        xs: a.x_min..=a.x_max,
        k: a.k,
        t: a.t,
        paper_only: a.paper_faithful,
    };
    let data = figure_data(&req)?;
    for s in &data.skipped {
        eprintln!("warning: skipped {s}");
    }
    for n in &data.ordering_notes {
        eprintln!("ordering: {n}");
    }
    run.emit(cmd, a.out.as_deref(), &to_csv(&data.points))
}

fn cmd_simulate(a: &SimulateArgs, run: &mut Run, cmd: &Command) -> Outcome<()> {
    let mesh = load_mesh(&a.mesh, run)?;
    let mut text = format!("{}\n", sim::CSV_HEADER);
    for &x in &a.x {
        let r = run_capture(
            &mesh,
            CaptureConfig {
                x,
                trials: a.trials,
                semantics: a.semantics.into(),
                seed: a.seed,
            },
        )?;
        text.push_str(&r.csv_row(mesh.q()));
        text.push('\n');
    }
    run.emit(cmd, a.out.as_deref(), &text)
}

fn cmd_keys(a: &KeysArgs, run: &mut Run, cmd: &Command) -> Outcome<()> {
    let mesh = load_mesh(&a.mesh, run)?;
    let devices = match &a.master {
        Some(h) => {
            let bytes = hex::decode(h.trim()).map_err(io_err)?;
            let master: [u8; 32] = bytes
                .try_into()
                .map_err(|b: Vec<u8>| Failure::Io(anyhow!("--master must be 32 bytes, got {}", b.len())))?;
            mesh.assign_rings(&master)
        }
        None => mesh.devices(),
    };
    let export = mesh.export(&devices, a.with_secrets);
    let mut text = serde_json::to_string_pretty(&export).expect("export serializes");
    text.push('\n');
    run.emit(cmd, a.out.as_deref(), &text)
}

fn set_out(cmd: &mut Command, out: PathBuf) -> Outcome<()> {
    let slot = match cmd {
        Command::Build(a) => &mut a.out,
        Command::Analyze(a) => &mut a.out,
        Command::Simulate(a) => &mut a.out,
        Command::Keys(a) => &mut a.out,
        Command::Verify(_) | Command::Replay(_) => {
            return Err(Failure::Invalid(anyhow!("{} has no output file to redirect", command_name(cmd))))
        }
    };
    *slot = Some(out);
    Ok(())
}

fn cmd_replay(a: &ReplayArgs) -> Outcome<()> {
    let m = RunManifest::read(&a.manifest).map_err(Failure::Io)?;
    let argv = std::iter::once("meshkey".to_string()).chain(m.args.iter().cloned());
    let mut cli = Cli::try_parse_from(argv).map_err(io_err)?;
    if let Some(out) = &a.out {
        set_out(&mut cli.command, out.clone())?;
    }
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Failure::Invalid(anyhow!("manifest records a replay")));
    }
    let mut args = m.args.clone();
    if let Some(out) = &a.out {
        let out = out.to_string_lossy().into_owned();
        match args.iter().position(|x| x == "--out") {
            Some(i) if i + 1 < args.len() => args[i + 1] = out,
            _ => {
                args.retain(|x| !x.starts_with("--out="));
                args.extend(["--out".to_string(), out]);
            }
        }
    }
    execute(cli.command, args)
}

fn execute(cmd: Command, args: Vec<String>) -> Outcome<()> {
    let mut run = Run {
        args,
        started: Instant::now(),
        inputs: Vec::new(),
    };
    match &cmd {
        Command::Build(a) => cmd_build(a, &run, &cmd),
        Command::Verify(a) => cmd_verify(a),
        Command::Analyze(a) => cmd_analyze(a, &run, &cmd),
        Command::Simulate(a) => cmd_simulate(a, &mut run, &cmd),
        Command::Keys(a) => cmd_keys(a, &mut run, &cmd),
        Command::Replay(a) => cmd_replay(a),
    }
}

/// Manifests never record the master secret.
fn redact(mut args: Vec<String>) -> Vec<String> {
    for i in 0..args.len() {
        if args[i] == "--master" && i + 1 < args.len() {
            args[i + 1] = "<redacted>".into();
        } else if args[i].starts_with("--master=") {
            args[i] = "--master=<redacted>".into();
        }
    }
    args
}

fn main() -> ExitCode {
    let raw: Vec<OsString> = std::env::args_os().collect();
    let cli = Cli::parse_from(&raw);
    let args = redact(raw.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect());
    match execute(cli.command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
