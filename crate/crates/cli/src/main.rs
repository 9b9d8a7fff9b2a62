//! `signforge` command-line tool.
//!
//! Exit codes: 0 success, 1 validation or compile failure, 2 usage error.

mod config;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use signforge::fsutil::write_atomic;
use signforge::kinematics::{solve_ik, unit_quaternion_wxyz, IkGoal, IkStatus, Pose, DEFAULT_WEIGHTS};
use signforge::lexicon::{
    compile_lexicon, compile_sign, load_gloss, load_sign, validate_sign, LexiconError, QANIM_SUFFIX,
    QUATERNION_TOLERANCE,
};
use signforge::qanim::{emit_qanim, format_number, parse_qanim};
use signforge::sentence::{compose, GlossSentence};
use signforge::stats::{analyze, load_records, render_csv, render_table, CHANCE_LEVEL};
use signforge_service::{ServiceConfig, DEFAULT_PORT};

use crate::config::{CliConfig, CONFIG_ENV};

#[derive(Parser, Debug)]
#[command(name = "signforge", version, about = "Sign definitions to robot .qanim animations")]
struct Cli {
    /// Config file (TOML); flags override its values.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// URDF file replacing the bundled Pepper arm.
    #[arg(long, global = true)]
    urdf: Option<PathBuf>,
    /// Frames per second of compiled animations.
    #[arg(long, global = true)]
    fps: Option<u32>,
    /// Refuse signs with keep-out violations.
    #[arg(long, global = true)]
    strict: bool,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one IK query and print joint values [rad].
    Solve {
        /// Target position x,y,z [m].
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        position: Vec<f64>,
        /// Target orientation w,x,y,z.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [1.0, 0.0, 0.0, 0.0])]
        orientation: Vec<f64>,
        /// Error weights: rotation x,y,z then position x,y,z.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_WEIGHTS)]
        weights: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// Compile one sign document to .qanim.
    Compile {
        sign: PathBuf,
        /// Output file; `<out-dir>/<GLOSS>.qanim` by default.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Compile every sign in a lexicon directory.
    Build {
        lexicon: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Compose a sentence file into one .qanim.
    Sentence {
        sentence: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print a CSV trace of sampled actuator values.
    Preview {
        qanim: PathBuf,
        /// Sampling rate; the animation's own by default.
        #[arg(long)]
        fps: Option<u32>,
    },
    /// Check a sign document without compiling it.
    Validate { sign: PathBuf },
    /// Exact binomial audit of a recognition-results CSV.
    Stats {
        csv: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
        /// Chance level of a single answer.
        #[arg(long, default_value_t = CHANCE_LEVEL)]
        chance: f64,
    },
    /// Run the local authoring service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum OutputFormat {
    Text,
    Csv,
    Json,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    /// Validation or compile failure: exit 1.
    Rejected(anyhow::Error),
    /// Bad invocation, unreadable input or config: exit 2.
    Usage(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn rejected(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Rejected(e.into())
}

/// Schema errors and failed compiles are rejections; everything else is usage.
fn classify(e: LexiconError) -> Failure {
    match e {
        LexiconError::Io { .. } => Failure::Usage(e.into()),
        LexiconError::FailedCompile(report) => {
            eprintln!("{}", serde_json::to_string_pretty(&*report).unwrap_or_default());
            Failure::Rejected(anyhow!("{}: compile failed: {}", report.gloss, report.reasons.join("; ")))
        }
        other => Failure::Rejected(other.into()),
    }
}

struct App {
    config: CliConfig,
}

impl App {
    fn out_dir(&self, flag: Option<PathBuf>) -> PathBuf {
        flag.or_else(|| self.config.out_dir.clone()).unwrap_or_else(|| PathBuf::from("build"))
    }
}

fn write_output(path: &Path, text: &str) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_solve(
    ctx: &App,
    position: Vec<f64>,
    orientation: Vec<f64>,
    weights: Vec<f64>,
    seed: u64,
    format: OutputFormat,
) -> CmdResult {
    let position: [f64; 3] = position.try_into().map_err(|_| anyhow!("--position takes x,y,z"))?;
    let mut orientation: [f64; 4] = orientation.try_into().map_err(|_| anyhow!("--orientation takes w,x,y,z"))?;
    let norm = orientation.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() <= QUATERNION_TOLERANCE {
        orientation.iter_mut().for_each(|v| *v /= norm);
    }
    let weights: [f64; 6] = weights.try_into().map_err(|_| anyhow!("--weights takes six values"))?;
    let chain = ctx.config.chain()?;
    let options = ctx.config.compile_options()?.ik;
    let target = Pose::new(nalgebra::Vector3::from(position), unit_quaternion_wxyz(orientation)?);
    let goal = IkGoal { seed, ..IkGoal::new(target, weights) };
    let sol = solve_ik(&chain, &goal, &options)?;
    let mut out = std::io::stdout().lock();
    match format {
        OutputFormat::Json => writeln!(out, "{}", serde_json::to_string_pretty(&sol)?)?,
        OutputFormat::Text | OutputFormat::Csv => {
            let sep = if format == OutputFormat::Csv { "," } else { "\t" };
            for (name, value) in sol.q.names.iter().zip(&sol.q.values) {
                writeln!(out, "{name}{sep}{value}")?;
            }
            eprintln!(
                "status {:?}, position error {:.3e} m, orientation error {:.3e} rad, {} iterations, {} restarts",
                sol.status, sol.position_error, sol.orientation_error, sol.iterations, sol.restarts_used
            );
        }
    }
    if sol.status == IkStatus::Unreachable {
        return Err(rejected(anyhow!("target is unreachable")));
    }
    Ok(())
}

fn cmd_compile(ctx: &App, sign: &Path, output: Option<PathBuf>, out_dir: Option<PathBuf>) -> CmdResult {
    let chain = ctx.config.chain()?;
    let map = ctx.config.mirror_map()?;
    let options = ctx.config.compile_options()?;
    options.ik.validate(&chain)?;
    let def = load_sign(sign).map_err(classify)?;
    let (anim, report) = compile_sign(&def, &chain, &map, &options).map_err(classify)?;
    for w in report.warnings.iter().chain(report.diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().iter()) {
        eprintln!("warning: {w}");
    }
    let path = output.unwrap_or_else(|| ctx.out_dir(out_dir).join(format!("{}{QANIM_SUFFIX}", def.gloss)));
    write_output(&path, &emit_qanim(&anim)?)?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_build(ctx: &App, lexicon: &Path, out_dir: Option<PathBuf>) -> CmdResult {
    let chain = ctx.config.chain()?;
    let map = ctx.config.mirror_map()?;
    let options = ctx.config.compile_options()?;
    options.ik.validate(&chain)?;
    if !lexicon.is_dir() {
        return Err(Failure::Usage(anyhow!("{} is not a directory", lexicon.display())));
    }
    let out = ctx.out_dir(out_dir);
    let report = compile_lexicon(lexicon, &out, &chain, &map, &options).map_err(classify)?;
    for e in &report.entries {
        let detail = e.error.clone().or_else(|| e.output.as_ref().map(|p| p.display().to_string())).unwrap_or_default();
        println!("{:<12} {:<9} {detail}", e.name, format!("{:?}", e.status));
    }
    println!("{}", report.summary());
    if report.failed > 0 {
        return Err(rejected(anyhow!("{} sign(s) failed", report.failed)));
    }
    Ok(())
}

fn cmd_sentence(
    ctx: &App,
    file: &Path,
    lexicon: Option<PathBuf>,
    output: Option<PathBuf>,
    out_dir: Option<PathBuf>,
) -> CmdResult {
    let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let sentence = GlossSentence::parse(&text).map_err(rejected)?;
    let lexicon = lexicon
        .or_else(|| ctx.config.lexicon_dir.clone())
        .ok_or_else(|| anyhow!("no lexicon directory: pass --lexicon or set lexicon_dir in the config"))?;
    let chain = ctx.config.chain()?;
    let map = ctx.config.mirror_map()?;
    let options = ctx.config.compile_options()?;
    let mut signs = BTreeMap::new();
    for gloss in &sentence.glosses {
        if signs.contains_key(gloss) {
            continue;
        }
        let def = load_gloss(&lexicon, gloss)
            .map_err(classify)?
            .ok_or_else(|| rejected(anyhow!("unknown gloss `{gloss}` in {}", lexicon.display())))?;
        let (anim, _) = compile_sign(&def, &chain, &map, &options).map_err(classify)?;
        signs.insert(gloss.clone(), anim);
    }
    let anim = compose(&sentence, &signs, &ctx.config.compose_options()).map_err(rejected)?;
    let stem = file.file_name().and_then(|n| n.to_str()).unwrap_or("sentence");
    let stem = stem.strip_suffix(".sentence.json").or_else(|| stem.strip_suffix(".json")).unwrap_or(stem);
    let path = output.unwrap_or_else(|| ctx.out_dir(out_dir).join(format!("{stem}{QANIM_SUFFIX}")));
    write_output(&path, &emit_qanim(&anim)?)?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_preview(file: &Path, fps: Option<u32>) -> CmdResult {
    let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let anim = parse_qanim(&text).map_err(rejected)?;
    let fps = fps.unwrap_or(anim.fps);
    if fps == 0 {
        return Err(Failure::Usage(anyhow!("--fps must be positive")));
    }
    let duration = f64::from(anim.last_frame()) / f64::from(anim.fps);
    let rows = (duration * f64::from(fps) + 1e-9).floor() as u64 + 1;
    let mut out = std::io::BufWriter::new(std::io::stdout().lock());
    let actuators = anim.actuators();
    writeln!(out, "frame,time,{}", actuators.join(","))?;
    for i in 0..rows {
        let time = i as f64 / f64::from(fps);
        let values = anim.sample(time * f64::from(anim.fps)).map_err(rejected)?;
        let cells: Vec<String> =
            actuators.iter().map(|a| format_number(values[*a])).collect::<Result<_, _>>().map_err(rejected)?;
        writeln!(out, "{i},{},{}", format_number(time).map_err(rejected)?, cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_validate(ctx: &App, sign: &Path) -> CmdResult {
    let def = load_sign(sign).map_err(classify)?;
    let chain = ctx.config.chain()?;
    let diagnostics = validate_sign(&def, &chain, &ctx.config.keepout()?);
    for d in &diagnostics {
        println!("{}: {d}", def.gloss);
    }
    if !diagnostics.is_empty() {
        return Err(rejected(anyhow!("{} diagnostic(s)", diagnostics.len())));
    }
    println!("{}: ok", def.gloss);
    Ok(())
}

fn cmd_stats(csv: &Path, format: OutputFormat, chance: f64) -> CmdResult {
    let text = std::fs::read_to_string(csv).with_context(|| format!("reading {}", csv.display()))?;
    let records = load_records(&text).map_err(rejected)?;
    let rows = analyze(&records, chance).map_err(rejected)?;
    match format {
        OutputFormat::Text => print!("{}", render_table(&rows)),
        OutputFormat::Csv => print!("{}", render_csv(&rows)),
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&rows)?),
    }
    Ok(())
}

fn cmd_serve(ctx: &App, port: Option<u16>, lexicon: Option<PathBuf>, ui_dir: Option<PathBuf>) -> CmdResult {
    let lexicon = lexicon
        .or_else(|| ctx.config.lexicon_dir.clone())
        .ok_or_else(|| anyhow!("no lexicon directory: pass --lexicon or set lexicon_dir in the config"))?;
    std::fs::create_dir_all(&lexicon).with_context(|| format!("creating {}", lexicon.display()))?;
    let config = ServiceConfig {
        chain: ctx.config.chain()?,
        mirror_map: ctx.config.mirror_map()?,
        compile: ctx.config.compile_options()?,
        compose: ctx.config.compose_options(),
        lexicon_dir: lexicon,
        ui_dir: ui_dir.or_else(|| ctx.config.ui_dir.clone()),
    };
    let port = port.or(ctx.config.port).unwrap_or(DEFAULT_PORT);
    let addr = SocketAddr::new(IpAddr::V4(Ipv4Addr::LOCALHOST), port);
    let runtime = tokio::runtime::Runtime::new()?;
    eprintln!("serving on http://{addr}");
    runtime.block_on(signforge_service::serve(config, addr))?;
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    let mut config = CliConfig::discover(cli.config.as_deref())?;
    if cli.urdf.is_some() {
        config.urdf = cli.urdf;
    }
    if cli.fps.is_some() {
        config.fps = cli.fps;
    }
    if cli.strict {
        config.strict = Some(true);
    }
    let ctx = App { config };
    match cli.command {
        Command::Solve { position, orientation, weights, seed, format } => {
            cmd_solve(&ctx, position, orientation, weights, seed, format)
        }
        Command::Compile { sign, output, out_dir } => cmd_compile(&ctx, &sign, output, out_dir),
        Command::Build { lexicon, out_dir } => cmd_build(&ctx, &lexicon, out_dir),
        Command::Sentence { sentence, lexicon, output, out_dir } => {
            cmd_sentence(&ctx, &sentence, lexicon, output, out_dir)
        }
        Command::Preview { qanim, fps } => cmd_preview(&qanim, fps),
        Command::Validate { sign } => cmd_validate(&ctx, &sign),
        Command::Stats { csv, format, chance } => cmd_stats(&csv, format, chance),
        Command::Serve { port, lexicon, ui_dir } => cmd_serve(&ctx, port, lexicon, ui_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Rejected(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
