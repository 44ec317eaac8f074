use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use lrising_core::{
    build_triangles, contour_event_estimate, convexity_check, decompose, enumerate_g, extract_tree,
    peierls_beta_threshold, peierls_series_bound, run_chain, run_square_process, validate_tree_constraints,
    walpha_scan, zeta_alpha, ModelParams, SamplerConfig, SpinConfiguration, DEFAULT_C,
};

/// Default directory for relative `--out` paths.
const OUT_DIR_VAR: &str = "LRISING_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "lrising",
    version,
    about = "Contour experiments for the 1D long-range Ising model"
)]
#[command(args_override_self = true)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// File of `key = value` lines used as defaults for the subcommand flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split a spin configuration into contours.
    Decompose(DecomposeArgs),
    /// Tree encoding of a configuration that forms a single contour.
    Tree(TreeArgs),
    /// Scan W(L) against its lower bound.
    Wbound(WboundArgs),
    /// Entropy sums G_m against 2 e^{-b h(m)}.
    Entropy(EntropyArgs),
    /// Brute-force convexity inequality check.
    Convexity(ConvexityArgs),
    /// Metropolis estimate of mu(sigma_0 = -1) with plus boundary.
    Sample(SampleArgs),
    /// Peierls series bound over a range of beta, optionally with Monte Carlo.
    PeierlsSweep(SweepArgs),
}

#[derive(Args, Debug, Serialize)]
struct Output {
    /// Output file; stdout when omitted. Relative paths go under $LRISING_OUT_DIR if set.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SpinInput {
    /// Spins as `+`/`-` characters.
    #[arg(long, allow_hyphen_values = true)]
    spins: String,
    /// Site of the first character; by default the window is centered at 0.
    #[arg(long, allow_hyphen_values = true)]
    origin: Option<i64>,
}

impl SpinInput {
    fn parse(&self) -> anyhow::Result<SpinConfiguration> {
        let len = self.spins.chars().filter(|c| !c.is_whitespace()).count() as i64;
        let origin = self.origin.unwrap_or(-(len / 2));
        Ok(SpinConfiguration::parse(&self.spins, origin)?)
    }
}

#[derive(Args, Debug, Serialize)]
struct DecomposeArgs {
    #[command(flatten)]
    input: SpinInput,
    #[arg(long, default_value_t = DEFAULT_C)]
    c: f64,
    /// JSON partition instead of a CSV of triangles.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Args, Debug, Serialize)]
struct TreeArgs {
    #[command(flatten)]
    input: SpinInput,
    #[arg(long, default_value_t = DEFAULT_C)]
    c: f64,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Args, Debug, Serialize)]
struct WboundArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, default_value_t = 10.0)]
    j1: f64,
    #[arg(long = "L-max", alias = "l-max", default_value_t = 100_000)]
    l_max: u64,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Args, Debug, Serialize)]
struct EntropyArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_C)]
    c: f64,
    /// One or more weight constants, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "8")]
    b: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    m_max: u64,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Args, Debug, Serialize)]
struct ConvexityArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 10.0)]
    b: f64,
    #[arg(long, default_value_t = 4)]
    n_max: usize,
    #[arg(long, default_value_t = 200)]
    x_max: u64,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Args, Debug, Serialize)]
struct ChainArgs {
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 10.0)]
    j1: f64,
    #[arg(long, default_value_t = 10_000)]
    sweeps: u64,
    #[arg(long, default_value_t = 1_000)]
    burn_in: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    chains: usize,
}

impl ChainArgs {
    fn config(&self, window: usize, beta: f64) -> anyhow::Result<SamplerConfig> {
        let cfg = SamplerConfig {
            window,
            beta,
            params: ModelParams::new(self.alpha, self.j1)?,
            sweeps: self.sweeps,
            burn_in: self.burn_in,
            seed: self.seed,
            chains: self.chains,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    #[arg(long, default_value_t = 128)]
    window: usize,
    #[arg(long)]
    beta: f64,
    #[command(flatten)]
    chain: ChainArgs,
    /// Also decompose every sample and estimate P(some contour covers 0).
    #[arg(long)]
    c: Option<f64>,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    #[arg(long, default_value_t = 0.5)]
    beta_min: f64,
    #[arg(long, default_value_t = 10.0)]
    beta_max: f64,
    #[arg(long, default_value_t = 20)]
    beta_steps: usize,
    /// Terms summed exactly before the remainder bound.
    #[arg(long, default_value_t = 10_000)]
    m_max: u64,
    /// Window for a Monte Carlo column; omitted means no sampling.
    #[arg(long)]
    window: Option<usize>,
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

/// Errors that are the caller's fault exit with 2, the rest with 1.
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Invalid>().is_some() {
        return 2;
    }
    match err.downcast_ref::<lrising_core::Error>() {
        Some(lrising_core::Error::Internal(_)) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

/// `key = value` lines turned into `--key=value` flags. Blank lines and
/// `#` comments are skipped; `true`/`false` toggle bare switches.
fn config_flags(path: &PathBuf) -> anyhow::Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
    let mut flags = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| invalid(format!("{}:{}: expected key = value", path.display(), n + 1)))?;
        let key = key.trim().trim_start_matches("--");
        let key = if key == "L_max" {
            "L-max".to_string()
        } else {
            key.replace('_', "-")
        };
        match value.trim() {
            "true" => flags.push(format!("--{key}")),
            "false" => {}
            v => flags.push(format!("--{key}={v}")),
        }
    }
    Ok(flags)
}

/// Splices config-file flags right after the subcommand so that anything
/// given on the command line wins.
fn expand_config(args: Vec<String>) -> anyhow::Result<Vec<String>> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        if args[i] == "--config" {
            path = args.get(i + 1).cloned();
            break;
        }
        if let Some(p) = args[i].strip_prefix("--config=") {
            path = Some(p.to_string());
            break;
        }
        i += 1;
    }
    let Some(path) = path else { return Ok(args) };
    let flags = config_flags(&PathBuf::from(path))?;
    let sub = args
        .iter()
        .skip(1)
        .position(|a| COMMANDS.contains(&a.as_str()))
        .map(|p| p + 2)
        .unwrap_or(args.len());
    let mut out = args[..sub].to_vec();
    out.extend(flags);
    out.extend_from_slice(&args[sub..]);
    Ok(out)
}

const COMMANDS: [&str; 7] = [
    "decompose",
    "tree",
    "wbound",
    "entropy",
    "convexity",
    "sample",
    "peierls-sweep",
];

fn out_path(out: &Output) -> Option<PathBuf> {
    let p = out.out.clone()?;
    match std::env::var_os(OUT_DIR_VAR) {
        Some(dir) if p.is_relative() => Some(PathBuf::from(dir).join(p)),
        _ => Some(p),
    }
}

/// Opens the destination before any work so that a bad path fails fast.
fn open_sink(out: &Output) -> anyhow::Result<Box<dyn std::io::Write>> {
    match out_path(out) {
        None => Ok(Box::new(std::io::stdout().lock())),
        Some(p) => {
            let f = fs::File::create(&p).map_err(|e| invalid(format!("cannot write {}: {e}", p.display())))?;
            Ok(Box::new(std::io::BufWriter::new(f)))
        }
    }
}

fn params_line(command: &str, args: &impl Serialize) -> String {
    let mut line = format!("# params command={command}");
    let value = serde_json::to_value(args).expect("args serialize");
    let mut flat = Vec::new();
    flatten("", &value, &mut flat);
    for (k, v) in flat {
        let _ = write!(line, " {k}={v}");
    }
    line
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                flatten(k, v, out);
            }
        }
        serde_json::Value::Array(xs) => {
            let s: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
            out.push((prefix.to_string(), s.join(",")));
        }
        serde_json::Value::Null => out.push((prefix.to_string(), "none".into())),
        serde_json::Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn write_json(sink: &mut dyn std::io::Write, value: &impl Serialize) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut *sink, value)?;
    writeln!(sink)?;
    Ok(())
}

#[derive(Serialize)]
struct Tagged<'a, A: Serialize, R: Serialize> {
    params: &'a A,
    result: R,
}

fn run_decompose(a: &DecomposeArgs) -> anyhow::Result<()> {
    let sigma = a.input.parse()?;
    let mut sink = open_sink(&a.output)?;
    let partition = decompose(&build_triangles(&sigma), a.c)?;
    if a.json {
        return write_json(
            &mut sink,
            &Tagged {
                params: a,
                result: &partition,
            },
        );
    }
    writeln!(sink, "{}", params_line("decompose", a))?;
    writeln!(sink, "contour,lo,hi,mass,enclosing")?;
    for (i, g) in partition.contours().iter().enumerate() {
        for t in g.triangles() {
            writeln!(sink, "{i},{},{},{},{}", t.lo, t.hi, t.mass(), *t == g.enclosing())?;
        }
    }
    Ok(())
}

fn run_tree(a: &TreeArgs) -> anyhow::Result<()> {
    let sigma = a.input.parse()?;
    let mut sink = open_sink(&a.output)?;
    let tris = build_triangles(&sigma);
    if tris.is_empty() {
        return Err(invalid("all-plus configuration has no contour"));
    }
    let trace = run_square_process(&tris, a.c)?;
    let tree = extract_tree(&trace, &tris)?;
    let report = validate_tree_constraints(&tree, Some(&tris));
    eprintln!(
        "tree: {} nodes, depth {}, {} constraint violations",
        report.nodes,
        tree.root.depth(),
        report.violations.len()
    );
    writeln!(sink, "{}", tree.to_json())?;
    if !report.is_valid() {
        return Err(anyhow!("tree violates constraints: {:?}", report.violations));
    }
    Ok(())
}

fn run_wbound(a: &WboundArgs) -> anyhow::Result<()> {
    let mut sink = open_sink(&a.output)?;
    let report = walpha_scan(a.alpha, a.j1, a.l_max)?;
    write_json(&mut sink, &report)
}

fn run_entropy(a: &EntropyArgs) -> anyhow::Result<()> {
    if a.m_max == 0 {
        return Err(invalid("--m-max must be at least 1"));
    }
    let mut sink = open_sink(&a.output)?;
    let mut rows = Vec::new();
    for m in 1..=a.m_max {
        for &b in &a.b {
            rows.push(enumerate_g(m, a.c, b, a.alpha)?);
        }
    }
    writeln!(sink, "{}", params_line("entropy", a))?;
    writeln!(sink, "m,b,contours,G_m,bound,origin_sum,origin_bound,pass")?;
    for r in rows {
        writeln!(
            sink,
            "{},{},{},{:e},{:e},{:e},{:e},{}",
            r.m, r.b, r.contours, r.g_m, r.bound, r.origin_sum, r.origin_bound, r.pass
        )?;
    }
    Ok(())
}

fn run_convexity(a: &ConvexityArgs) -> anyhow::Result<()> {
    let mut sink = open_sink(&a.output)?;
    let report = convexity_check(a.alpha, a.a, a.b, a.n_max, a.x_max)?;
    write_json(&mut sink, &report)
}

fn run_sample(a: &SampleArgs) -> anyhow::Result<()> {
    let cfg = a.chain.config(a.window, a.beta)?;
    let mut sink = open_sink(&a.output)?;
    match a.c {
        Some(c) => write_json(&mut sink, &contour_event_estimate(&cfg, c)?),
        None => write_json(&mut sink, &run_chain(&cfg)?),
    }
}

fn run_sweep(a: &SweepArgs) -> anyhow::Result<()> {
    let ordered = a.beta_min > 0.0 && a.beta_max >= a.beta_min;
    if a.beta_steps == 0 || !ordered {
        return Err(invalid("need 0 < beta-min <= beta-max and beta-steps >= 1"));
    }
    let alpha = a.chain.alpha;
    let zeta = zeta_alpha(alpha)?;
    if let Some(w) = a.window {
        a.chain.config(w, a.beta_min)?;
    }
    let mut sink = open_sink(&a.output)?;
    writeln!(sink, "{}", params_line("peierls-sweep", a))?;
    match peierls_beta_threshold(zeta, alpha, a.m_max) {
        Ok(t) => writeln!(sink, "# beta_threshold={t}")?,
        Err(e) => writeln!(sink, "# beta_threshold=none ({e})")?,
    }
    writeln!(sink, "beta,series_upper,below_half,mc_minus_origin,mc_stderr")?;
    for i in 0..a.beta_steps {
        let beta = if a.beta_steps == 1 {
            a.beta_min
        } else {
            a.beta_min + (a.beta_max - a.beta_min) * i as f64 / (a.beta_steps - 1) as f64
        };
        let (upper, below) = match peierls_series_bound(beta, zeta, alpha, a.m_max) {
            Ok(s) => (format!("{:e}", s.upper()), s.below_half().to_string()),
            Err(_) => ("inf".to_string(), "false".to_string()),
        };
        let (mc, se) = match a.window {
            Some(w) => {
                let s = run_chain(&a.chain.config(w, beta)?)?;
                (s.minus_origin.mean.to_string(), s.minus_origin.stderr.to_string())
            }
            None => (String::new(), String::new()),
        };
        writeln!(sink, "{beta},{upper},{below},{mc},{se}")?;
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(invalid("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool")?;
    }
    match &cli.command {
        Command::Decompose(a) => run_decompose(a),
        Command::Tree(a) => run_tree(a),
        Command::Wbound(a) => run_wbound(a),
        Command::Entropy(a) => run_entropy(a),
        Command::Convexity(a) => run_convexity(a),
        Command::Sample(a) => run_sample(a),
        Command::PeierlsSweep(a) => run_sweep(a),
    }
}

fn main() -> ExitCode {
    let args = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
