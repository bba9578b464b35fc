use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iomon::{BackendKind, MonitorConfig, Norm, Schema};
use iomon_cli::{
    bench, generate, load_schema, run, write_records, AutoTau, Dataset, Format, PlantSpec,
    Result, RunOptions,
};

#[derive(Parser)]
#[command(name = "monitor", version, about = "Online input-output robustness monitor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monitor a decision stream and report witnesses as JSON lines.
    Run(RunArgs),
    /// Generate a synthetic decision stream.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Time every backend on one generated stream, per step.
    Bench(BenchArgs),
}

#[derive(Args)]
struct MonitorArgs {
    #[arg(long, value_parser = parse_backend)]
    backend: BackendKind,
    #[arg(long, value_parser = parse_norm)]
    norm: Norm,
    #[arg(long)]
    epsilon: f64,
    /// Output distance threshold; with 0/1 outputs any value in [0, 1) works.
    #[arg(long, default_value_t = 0.5)]
    delta_z: f64,
    /// Re-indexing period, or `auto` to choose it from measured timings.
    #[arg(long, default_value = "4096")]
    tau: String,
    /// Split numeric columns into this many blocks (L-infinity only), or
    /// `auto` for one per column up to the available parallelism.
    #[arg(long)]
    blocks: Option<String>,
    #[arg(long, default_value_t = 16)]
    leaf_capacity: usize,
    /// Put out-of-range values into the boundary cell instead of failing.
    #[arg(long)]
    clamp: bool,
}

impl MonitorArgs {
    fn config(&self, schema: &Schema) -> Result<(MonitorConfig, bool)> {
        let (tau, auto) = match self.tau.as_str() {
            "auto" => (iomon::periodic::DEFAULT_TAU, true),
            t => (
                t.parse()
                    .map_err(|_| iomon_cli::CliError::Usage(format!("invalid tau `{t}`")))?,
                false,
            ),
        };
        let cfg = MonitorConfig {
            backend: self.backend,
            norm: self.norm,
            epsilon: self.epsilon,
            delta_z: self.delta_z,
            tau,
            blocks: match self.blocks.as_deref() {
                None => None,
                Some("auto") => Some(iomon::BlockPlan::default_k(schema)),
                Some(k) => Some(k.parse().map_err(|_| {
                    iomon_cli::CliError::Usage(format!("invalid block count `{k}`"))
                })?),
            },
            clamp: self.clamp,
            leaf_capacity: self.leaf_capacity,
        };
        cfg.validate()?;
        Ok((cfg, auto))
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    monitor: MonitorArgs,
    /// JSON schema file.
    #[arg(long)]
    schema: PathBuf,
    /// Input stream; `-` reads standard input.
    #[arg(long, default_value = "-")]
    input: PathBuf,
    /// Defaults to the input file's extension.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Report file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include each witness's stored record in the report.
    #[arg(long)]
    full_witnesses: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Rolling average window for latency statistics.
    #[arg(long, default_value_t = 100_000)]
    window: usize,
    /// Statistics file; standard error when absent.
    #[arg(long)]
    stats_out: Option<PathBuf>,
    /// Leading points timed by `--tau auto`.
    #[arg(long, default_value_t = 2048)]
    tau_prefix: usize,
    /// Long-term memory size `--tau auto` optimises for.
    #[arg(long, default_value_t = 1_000_000)]
    tau_horizon: u64,
    /// Skip the human-readable summary.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct Shape {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    labels: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Stream file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the stream's schema here.
    #[arg(long)]
    schema_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GenCommand {
    /// Points uniform in the unit cube with uniform labels.
    Uniform {
        #[command(flatten)]
        shape: Shape,
        #[command(flatten)]
        output: Output,
    },
    /// A violation-free uniform stream with planted near-duplicate pairs.
    Plant {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, value_parser = parse_norm, default_value = "linf")]
        norm: Norm,
        #[command(flatten)]
        shape: Shape,
        #[command(flatten)]
        output: Output,
        /// Ground-truth `[original, copy]` id pairs, one JSON array per line.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BenchArgs {
    /// Run every backend that supports the norm.
    #[arg(long)]
    sweep: bool,
    /// Comma-separated backends when not sweeping.
    #[arg(long, value_delimiter = ',', value_parser = parse_backend)]
    backends: Vec<BackendKind>,
    #[arg(long, value_parser = parse_norm, default_value = "linf")]
    norm: Norm,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = iomon::periodic::DEFAULT_TAU)]
    tau: usize,
    #[arg(long)]
    blocks: Option<usize>,
    #[command(flatten)]
    shape: Shape,
    #[arg(long, default_value_t = 100_000)]
    window: usize,
    /// Per-step CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_backend(s: &str) -> std::result::Result<BackendKind, String> {
    s.parse().map_err(|e: iomon::MonitorError| e.to_string())
}

fn parse_norm(s: &str) -> std::result::Result<Norm, String> {
    s.parse().map_err(|e: iomon::MonitorError| e.to_string())
}

fn create(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn open(path: &Path) -> Result<Box<dyn Read>> {
    Ok(if path == Path::new("-") {
        Box::new(io::stdin().lock())
    } else {
        Box::new(File::open(path)?)
    })
}

fn write_schema(path: &Option<PathBuf>, schema: &Schema) -> Result<()> {
    if let Some(p) = path {
        let mut f = File::create(p)?;
        serde_json::to_writer_pretty(&mut f, schema)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

fn write_dataset(output: &Output, data: &Dataset) -> Result<()> {
    write_schema(&output.schema_out, &data.schema)?;
    write_records(create(&output.out)?, output.format, &data.schema, &data.records)
}

fn run_command(args: RunArgs) -> Result<()> {
    let schema = load_schema(&args.schema)?;
    let (config, auto) = args.monitor.config(&schema)?;
    config.validate_for(&schema)?;
    let format = args
        .format
        .or_else(|| Format::from_path(&args.input))
        .ok_or_else(|| iomon_cli::CliError::Usage("cannot tell the input format; pass --format".into()))?;
    let opts = RunOptions {
        config,
        full_witnesses: args.full_witnesses,
        window: args.window,
        seed: args.seed,
        auto_tau: auto.then_some(AutoTau {
            prefix: args.tau_prefix,
            horizon: args.tau_horizon,
        }),
    };
    let stats = run(&opts, &schema, open(&args.input)?, format, create(&args.out)?)?;
    match &args.stats_out {
        Some(p) => {
            let mut f = File::create(p)?;
            serde_json::to_writer_pretty(&mut f, &stats)?;
            f.write_all(b"\n")?;
        }
        None => eprintln!("{}", serde_json::to_string(&stats)?),
    }
    if !args.quiet {
        eprintln!("{}", stats.summary());
    }
    Ok(())
}

fn gen_command(cmd: GenCommand) -> Result<()> {
    match cmd {
        GenCommand::Uniform { shape, output } => {
            let data = generate::uniform(shape.n, shape.d, shape.labels, shape.seed)?;
            write_dataset(&output, &data)
        }
        GenCommand::Plant {
            count,
            epsilon,
            norm,
            shape,
            output,
            truth,
        } => {
            let base = generate::uniform(shape.n, shape.d, shape.labels, shape.seed)?;
            let spec = PlantSpec {
                count,
                epsilon,
                norm,
            };
            // an independent stream for the planting decisions
            let planted = generate::plant(&base, spec, shape.seed.wrapping_add(1))?;
            write_dataset(&output, &planted.dataset)?;
            if let Some(p) = truth {
                let mut f = io::BufWriter::new(File::create(p)?);
                for (o, c) in &planted.pairs {
                    writeln!(f, "[{o},{c}]")?;
                }
                f.flush()?;
            }
            Ok(())
        }
    }
}

fn bench_command(args: BenchArgs) -> Result<()> {
    let backends: Vec<BackendKind> = if args.sweep {
        BackendKind::ALL
            .into_iter()
            .filter(|b| b.supports(args.norm))
            .collect()
    } else {
        args.backends.clone()
    };
    if backends.is_empty() {
        return Err(iomon_cli::CliError::Usage(
            "pass --sweep or --backends".into(),
        ));
    }
    let configs: Vec<MonitorConfig> = backends
        .into_iter()
        .map(|b| {
            let mut cfg = MonitorConfig::new(b, args.norm, args.epsilon).with_tau(args.tau);
            cfg.blocks = args.blocks;
            cfg.validate().map(|_| cfg)
        })
        .collect::<iomon::Result<_>>()?;
    let data = generate::uniform(args.shape.n, args.shape.d, args.shape.labels, args.shape.seed)?;
    let stream = bench::points(&data)?;
    let sums = bench::sweep(&configs, &data.schema, &stream, args.window, create(&args.out)?)?;
    for s in sums {
        eprintln!("{}", serde_json::to_string(&s)?);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run_command(args),
        Command::Gen(cmd) => gen_command(cmd),
        Command::Bench(args) => bench_command(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("monitor: {e}");
            ExitCode::FAILURE
        }
    }
}
