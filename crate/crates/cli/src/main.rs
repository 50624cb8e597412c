//! `evshift`: batch CLI over the event-camera toolkit.
//!
//! One verb per operation family. Machine-readable `key=value` results go to
//! stdout, diagnostics to stderr. Exit codes: 0 success, 1 usage error,
//! 2 data error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use evshift_core::codec::{read_events, write_events, EventFormat};
use evshift_core::datasets::{convert_dataset, scan_dataset, ConvertConfig, ReprChoice};
use evshift_core::diag::{run_diag, DiagConfig};
use evshift_core::events::stream_stats;
use evshift_core::metrics::{
    entropy, mean_feature_norm, median_heuristic_sigma, mmd2, mmfnd, FeatureMatrix, KernelSpec,
    MetricError, PoolMode, ProbMatrix,
};
use evshift_core::repr::{group_views, rotate, EstKernel, HatsConfig, Rotation};
use evshift_core::simulator::{
    saccade_frames, simulate, FrameSequence, IntensityFrame, SaccadePattern, SimError,
    SimulatorConfig, ThresholdMode,
};
use evshift_core::Tensor;

#[derive(Parser)]
#[command(name = "evshift", version, about = "Event-camera simulation, representations and sim-to-real shift diagnostics")]
struct Cli {
    /// Worker threads; 0 auto-detects.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an event stream from frames or a still image.
    Simulate(SimulateArgs),
    /// Synthesize saccade frames from a still image.
    Saccade(SaccadeArgs),
    /// Batch-convert a class tree of event files into TEN1 tensors.
    Convert(ConvertArgs),
    /// Voxel-grid representation of one event file.
    Voxel(SingleReprArgs),
    /// HATS representation of one event file.
    Hats(SingleReprArgs),
    /// EST representation of one event file.
    Est(SingleReprArgs),
    /// Rotate a TEN1 tensor by a right angle.
    Rotate(RotateArgs),
    /// Group TEN1 channels into three-channel views.
    Group(GroupArgs),
    /// Squared MMD between two feature files.
    Mmd(MmdArgs),
    /// Mean feature norms and their discrepancy (AFN diagnostic).
    Afn(PairArgs),
    /// Mean prediction entropy of a probability file.
    Entropy(EntropyArgs),
    /// Full source-vs-target shift diagnostic over two dataset trees.
    Diag(DiagArgs),
    /// Stream statistics of one event file.
    Stats(StatsArgs),
    /// Identify a file by magic and print its header.
    Info(InfoArgs),
}

#[derive(Args)]
struct GeometryArgs {
    /// Event file format.
    #[arg(long, default_value = "evt1")]
    format: String,
    /// Sensor width for headerless formats (ncaltech default 304).
    #[arg(long)]
    width: Option<u16>,
    /// Sensor height for headerless formats (ncaltech default 240).
    #[arg(long)]
    height: Option<u16>,
}

impl GeometryArgs {
    fn format(&self) -> Result<EventFormat, CliError> {
        self.format.parse::<EventFormat>().map_err(|e| CliError::Usage(e.to_string()))
    }

    fn geometry(&self, format: EventFormat) -> Option<(u16, u16)> {
        match (self.width, self.height) {
            (Some(w), Some(h)) => Some((w, h)),
            _ if format == EventFormat::NcaltechBin => Some((304, 240)),
            _ => None,
        }
    }
}

#[derive(Args)]
struct ReprArgs {
    /// Representation: voxel, hats or est.
    #[arg(long, value_parser = ["voxel", "hats", "est"], default_value = "voxel")]
    repr: String,
    /// Temporal bins for voxel and est.
    #[arg(long, default_value_t = 9)]
    bins: usize,
    /// EST kernel.
    #[arg(long, value_parser = ["trilinear", "exp"], default_value = "trilinear")]
    kernel: String,
    /// Decay of the exponential EST kernel.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// HATS cell size K.
    #[arg(long, default_value_t = 8)]
    cell_size: usize,
    /// HATS neighborhood radius rho.
    #[arg(long, default_value_t = 3)]
    rho: usize,
    /// HATS decay constant tau, microseconds.
    #[arg(long, default_value_t = 100_000.0)]
    tau_us: f64,
    /// HATS memory window, microseconds; infinite when omitted.
    #[arg(long)]
    delta_t_us: Option<f64>,
}

impl ReprArgs {
    fn choice(&self, which: Option<&str>) -> Result<ReprChoice, CliError> {
        let name = which.unwrap_or(self.repr.as_str());
        match name {
            "voxel" => {
                require(self.bins >= 1, "--bins must be >= 1")?;
                Ok(ReprChoice::Voxel { bins: self.bins })
            }
            "hats" => Ok(ReprChoice::Hats(HatsConfig {
                cell_size: self.cell_size,
                rho: self.rho,
                tau_us: self.tau_us,
                delta_t_us: self.delta_t_us.unwrap_or(f64::INFINITY),
            })),
            "est" => {
                require(self.bins >= 2, "--bins must be >= 2 for est")?;
                let kernel = match self.kernel.as_str() {
                    "trilinear" => EstKernel::Trilinear,
                    "exp" => EstKernel::Exponential { alpha: self.alpha },
                    other => return Err(CliError::Usage(format!("unknown kernel '{other}'"))),
                };
                Ok(ReprChoice::Est { bins: self.bins, kernel })
            }
            other => Err(CliError::Usage(format!("unknown representation '{other}'"))),
        }
    }
}

#[derive(Args)]
struct SimFlags {
    /// TOML config providing simulator defaults; flags override.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Threshold regime: fixed, uniform or perpixel.
    #[arg(long, value_parser = ["fixed", "uniform", "perpixel"])]
    c_mode: Option<String>,
    /// Contrast threshold for fixed mode.
    #[arg(long)]
    c: Option<f64>,
    /// Lower bound of the uniform threshold draw.
    #[arg(long)]
    c_lo: Option<f64>,
    /// Upper bound of the uniform threshold draw.
    #[arg(long)]
    c_hi: Option<f64>,
    /// Pixel dead time after an event, microseconds.
    #[arg(long)]
    refractory_us: Option<u64>,
    /// Offset added before the log; keeps black pixels finite.
    #[arg(long)]
    log_eps: Option<f64>,
    /// Spurious events per pixel per second.
    #[arg(long)]
    noise_rate: Option<f64>,
    /// RNG seed for threshold draws and noise.
    #[arg(long)]
    seed: Option<u64>,
}

impl SimFlags {
    fn resolve(&self) -> Result<SimulatorConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => SimulatorConfig::from_toml_file(path).map_err(sim_err)?,
            None => SimulatorConfig::default(),
        };
        cfg.threshold_mode = match self.c_mode.as_deref() {
            Some("fixed") => ThresholdMode::Fixed(self.c.unwrap_or(0.06)),
            Some("uniform") => ThresholdMode::Uniform {
                lo: self.c_lo.unwrap_or(0.05),
                hi: self.c_hi.unwrap_or(0.5),
            },
            Some("perpixel") => ThresholdMode::PerPixelUniform {
                lo: self.c_lo.unwrap_or(0.05),
                hi: self.c_hi.unwrap_or(0.5),
            },
            Some(other) => return Err(CliError::Usage(format!("unknown c-mode '{other}'"))),
            None => match (self.c, self.c_lo, self.c_hi, cfg.threshold_mode) {
                (Some(c), None, None, _) => ThresholdMode::Fixed(c),
                (Some(_), _, _, _) => {
                    return Err(CliError::Usage(
                        "--c conflicts with --c-lo/--c-hi; pick one regime or set --c-mode".into(),
                    ))
                }
                (None, lo, hi, ThresholdMode::PerPixelUniform { lo: blo, hi: bhi })
                    if lo.is_some() || hi.is_some() =>
                {
                    ThresholdMode::PerPixelUniform {
                        lo: lo.unwrap_or(blo),
                        hi: hi.unwrap_or(bhi),
                    }
                }
                (None, Some(lo), hi, base) => {
                    let bhi = match base {
                        ThresholdMode::Uniform { hi, .. } => hi,
                        _ => 0.5,
                    };
                    ThresholdMode::Uniform { lo, hi: hi.unwrap_or(bhi) }
                }
                (None, None, Some(hi), base) => {
                    let blo = match base {
                        ThresholdMode::Uniform { lo, .. } => lo,
                        _ => 0.05,
                    };
                    ThresholdMode::Uniform { lo: blo, hi }
                }
                (None, None, None, mode) => mode,
            },
        };
        if let Some(v) = self.refractory_us {
            cfg.refractory_us = v;
        }
        if let Some(v) = self.log_eps {
            cfg.log_eps = v;
        }
        if let Some(v) = self.noise_rate {
            cfg.noise_rate = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SaccadeFlags {
    /// Saccade segments as "dx,dy;dx,dy;..."; default is a closed triangle.
    #[arg(long)]
    segments: Option<String>,
    /// Frames per segment, endpoints included.
    #[arg(long, default_value_t = 11)]
    frames_per_segment: usize,
    /// Canvas width; defaults to image width + 16.
    #[arg(long)]
    canvas_width: Option<u16>,
    /// Canvas height; defaults to image height + 16.
    #[arg(long)]
    canvas_height: Option<u16>,
    /// Microseconds between frames.
    #[arg(long, default_value_t = 10_000)]
    frame_period_us: u64,
}

impl SaccadeFlags {
    fn pattern(&self) -> Result<SaccadePattern, CliError> {
        match &self.segments {
            None => {
                let mut p = SaccadePattern::default_triangle();
                p.frames_per_segment = self.frames_per_segment.max(2);
                Ok(p)
            }
            Some(text) => {
                let mut segments = Vec::new();
                for part in text.split(';') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    let (dx, dy) = part.split_once(',').ok_or_else(|| {
                        CliError::Usage(format!("bad segment '{part}', expected dx,dy"))
                    })?;
                    let dx: f64 = dx.trim().parse().map_err(|_| {
                        CliError::Usage(format!("bad segment displacement '{dx}'"))
                    })?;
                    let dy: f64 = dy.trim().parse().map_err(|_| {
                        CliError::Usage(format!("bad segment displacement '{dy}'"))
                    })?;
                    segments.push((dx, dy));
                }
                SaccadePattern::new(segments, self.frames_per_segment)
                    .map_err(|e| CliError::Usage(e.to_string()))
            }
        }
    }

    fn frames(&self, image_path: &Path) -> Result<FrameSequence, CliError> {
        let image = IntensityFrame::from_image_file(image_path).map_err(sim_err)?;
        let canvas = (
            self.canvas_width.unwrap_or(image.width.saturating_add(16)),
            self.canvas_height.unwrap_or(image.height.saturating_add(16)),
        );
        saccade_frames(&image, &self.pattern()?, canvas, self.frame_period_us).map_err(sim_err)
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Directory of PGM frames plus timestamps.txt.
    #[arg(long, conflicts_with = "image")]
    frames: Option<PathBuf>,
    /// Still image to record with a synthetic saccade.
    #[arg(long)]
    image: Option<PathBuf>,
    #[command(flatten)]
    saccade: SaccadeFlags,
    #[command(flatten)]
    sim: SimFlags,
    /// Output event file.
    #[arg(long)]
    out: PathBuf,
    /// Output format.
    #[arg(long, default_value = "evt1")]
    out_format: String,
}

#[derive(Args)]
struct SaccadeArgs {
    /// Still image to translate.
    #[arg(long)]
    image: PathBuf,
    #[command(flatten)]
    saccade: SaccadeFlags,
    /// Output directory for PGM frames and timestamps.txt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConvertArgs {
    /// Dataset root: one subdirectory per class.
    #[arg(long)]
    root: PathBuf,
    #[command(flatten)]
    geo: GeometryArgs,
    #[command(flatten)]
    repr: ReprArgs,
    /// Output root, mirrors the class tree.
    #[arg(long)]
    out_root: PathBuf,
    /// Optional conversion report path.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SingleReprArgs {
    /// Input event file.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    geo: GeometryArgs,
    #[command(flatten)]
    repr: ReprArgs,
    /// Output TEN1 file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RotateArgs {
    /// Input TEN1 file with [H, W, F] layout.
    #[arg(long)]
    input: PathBuf,
    /// Rotation angle in degrees: 0, 90, 180 or 270.
    #[arg(long)]
    theta: u32,
    /// Output TEN1 file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GroupArgs {
    /// Input TEN1 file with [H, W, F] layout.
    #[arg(long)]
    input: PathBuf,
    /// Output TEN1 file with [V, H, W, 3] layout.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct KernelFlags {
    /// Explicit Gaussian bandwidth; repeatable.
    #[arg(long)]
    sigma: Vec<f64>,
    /// Use the median heuristic (default when no --sigma given).
    #[arg(long)]
    sigma_median: bool,
    /// Median-heuristic multipliers.
    #[arg(long, default_value = "0.5,1,2")]
    multipliers: String,
}

impl KernelFlags {
    fn spec(&self) -> Result<KernelSpec, CliError> {
        if !self.sigma.is_empty() {
            if self.sigma_median {
                return Err(CliError::Usage("--sigma conflicts with --sigma-median".into()));
            }
            return Ok(KernelSpec::Bandwidths(self.sigma.clone()));
        }
        let multipliers: Result<Vec<f64>, _> =
            self.multipliers.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let multipliers =
            multipliers.map_err(|_| CliError::Usage("bad --multipliers list".into()))?;
        Ok(KernelSpec::MedianHeuristic { multipliers })
    }
}

#[derive(Args)]
struct MmdArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[command(flatten)]
    kernel: KernelFlags,
}

#[derive(Args)]
struct PairArgs {
    /// Source feature file (TEN1 ndim=2 or CSV).
    #[arg(long)]
    source: PathBuf,
    /// Target feature file (TEN1 ndim=2 or CSV).
    #[arg(long)]
    target: PathBuf,
}

#[derive(Args)]
struct EntropyArgs {
    /// Probability matrix file (TEN1 ndim=2 or CSV), rows on the simplex.
    #[arg(long)]
    probs: PathBuf,
}

#[derive(Args)]
struct DiagArgs {
    /// Source dataset root.
    #[arg(long)]
    source_dir: PathBuf,
    /// Target dataset root.
    #[arg(long)]
    target_dir: PathBuf,
    #[command(flatten)]
    geo: GeometryArgs,
    #[command(flatten)]
    repr: ReprArgs,
    /// Per-view pooling mode.
    #[arg(long, value_parser = ["mean", "channel-stats"], default_value = "channel-stats")]
    pool: String,
    #[command(flatten)]
    kernel: KernelFlags,
    /// Class-probability file for the source side (entropy report).
    #[arg(long)]
    source_probs: Option<PathBuf>,
    /// Class-probability file for the target side (entropy report).
    #[arg(long)]
    target_probs: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Input event file.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    geo: GeometryArgs,
}

#[derive(Args)]
struct InfoArgs {
    /// File to identify (EVT1 or TEN1).
    #[arg(long)]
    input: PathBuf,
}

enum CliError {
    Usage(String),
    Data(String),
}

fn require(cond: bool, msg: &str) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Usage(msg.to_string()))
    }
}

fn sim_err(e: SimError) -> CliError {
    match e {
        SimError::InvalidConfig(_) => CliError::Usage(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn main() {
    std::process::exit(run(std::env::args_os()));
}

fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    if cli.threads > 0 {
        // A pre-existing global pool (tests) is fine; keep going.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match dispatch(cli.command) {
        Ok(stdout) => {
            print!("{stdout}");
            0
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn dispatch(command: Command) -> Result<String, CliError> {
    match command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Saccade(args) => cmd_saccade(args),
        Command::Convert(args) => cmd_convert(args),
        Command::Voxel(args) => cmd_single_repr(args, "voxel"),
        Command::Hats(args) => cmd_single_repr(args, "hats"),
        Command::Est(args) => cmd_single_repr(args, "est"),
        Command::Rotate(args) => cmd_rotate(args),
        Command::Group(args) => cmd_group(args),
        Command::Mmd(args) => cmd_mmd(args),
        Command::Afn(args) => cmd_afn(args),
        Command::Entropy(args) => cmd_entropy(args),
        Command::Diag(args) => cmd_diag(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Info(args) => cmd_info(args),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<String, CliError> {
    let frames = match (&args.frames, &args.image) {
        (Some(dir), None) => FrameSequence::from_dir(dir).map_err(sim_err)?,
        (None, Some(image)) => args.saccade.frames(image)?,
        _ => return Err(CliError::Usage("exactly one of --frames or --image is required".into())),
    };
    let cfg = args.sim.resolve()?;
    let stream = simulate(&frames, &cfg).map_err(sim_err)?;
    let format =
        args.out_format.parse::<EventFormat>().map_err(|e| CliError::Usage(e.to_string()))?;
    let bytes = write_events(&stream, &args.out, format).map_err(data)?;
    let stats = stream_stats(&stream);
    let mut out = String::new();
    writeln!(out, "out={}", args.out.display()).unwrap();
    writeln!(out, "count={}", stats.count).unwrap();
    writeln!(out, "duration_us={}", stats.duration_us).unwrap();
    writeln!(out, "width={}", stream.width).unwrap();
    writeln!(out, "height={}", stream.height).unwrap();
    writeln!(out, "bytes={bytes}").unwrap();
    Ok(out)
}

fn cmd_saccade(args: SaccadeArgs) -> Result<String, CliError> {
    let frames = args.saccade.frames(&args.image)?;
    frames.write_dir(&args.out).map_err(data)?;
    let mut out = String::new();
    writeln!(out, "out={}", args.out.display()).unwrap();
    writeln!(out, "frames={}", frames.frames.len()).unwrap();
    writeln!(out, "width={}", frames.width).unwrap();
    writeln!(out, "height={}", frames.height).unwrap();
    Ok(out)
}

fn cmd_convert(args: ConvertArgs) -> Result<String, CliError> {
    let format = args.geo.format()?;
    let manifest = scan_dataset(&args.root, format).map_err(data)?;
    let cfg =
        ConvertConfig { repr: args.repr.choice(None)?, geometry: args.geo.geometry(format) };
    let report = convert_dataset(&manifest, &cfg, &args.out_root).map_err(data)?;
    for (entry, status) in &report.outcomes {
        if let evshift_core::datasets::ConversionStatus::Failed(msg) = status {
            eprintln!("failed {}: {msg}", entry.relative_path);
        }
    }
    if let Some(path) = &args.report {
        report.save(path).map_err(data)?;
    }
    let mut out = String::new();
    writeln!(out, "total={}", manifest.len()).unwrap();
    writeln!(out, "converted={}", report.converted()).unwrap();
    writeln!(out, "skipped={}", report.skipped()).unwrap();
    writeln!(out, "failed={}", report.failed()).unwrap();
    writeln!(out, "wall_ms={}", report.wall_ms).unwrap();
    writeln!(out, "out_root={}", args.out_root.display()).unwrap();
    Ok(out)
}

fn read_stream(input: &Path, geo: &GeometryArgs) -> Result<evshift_core::EventStream, CliError> {
    let format = geo.format()?;
    read_events(input, format, geo.geometry(format)).map_err(data)
}

fn cmd_single_repr(args: SingleReprArgs, which: &str) -> Result<String, CliError> {
    let stream = read_stream(&args.input, &args.geo)?;
    let tensor = args.repr.choice(Some(which))?.apply(&stream).map_err(data)?;
    tensor.write_ten1(&args.out).map_err(data)?;
    Ok(tensor_lines(&tensor, &args.out))
}

fn tensor_lines(tensor: &Tensor, path: &Path) -> String {
    let dims: Vec<String> = tensor.dims().iter().map(|d| d.to_string()).collect();
    format!("out={}\ndims={}\n", path.display(), dims.join("x"))
}

fn cmd_rotate(args: RotateArgs) -> Result<String, CliError> {
    let rotation =
        Rotation::from_degrees(args.theta).map_err(|e| CliError::Usage(e.to_string()))?;
    let tensor = Tensor::read_ten1(&args.input).map_err(data)?;
    if tensor.ndim() != 3 {
        return Err(CliError::Data(format!(
            "rotate needs an [H, W, F] tensor, got {:?}",
            tensor.dims()
        )));
    }
    let rotated = rotate(&tensor, rotation);
    rotated.write_ten1(&args.out).map_err(data)?;
    Ok(tensor_lines(&rotated, &args.out))
}

fn cmd_group(args: GroupArgs) -> Result<String, CliError> {
    let tensor = Tensor::read_ten1(&args.input).map_err(data)?;
    let views = group_views(&tensor).map_err(data)?;
    views.views().write_ten1(&args.out).map_err(data)?;
    let mut out = tensor_lines(views.views(), &args.out);
    writeln!(out, "views={}", views.view_count()).unwrap();
    writeln!(out, "pad_channels={}", views.pad_channels()).unwrap();
    Ok(out)
}

fn load_features(path: &Path) -> Result<FeatureMatrix, CliError> {
    FeatureMatrix::read(path).map_err(data)
}

fn cmd_mmd(args: MmdArgs) -> Result<String, CliError> {
    let s = load_features(&args.pair.source)?;
    let t = load_features(&args.pair.target)?;
    let spec = args.kernel.spec()?;
    let value = mmd2(&s, &t, &spec).map_err(|e| match e {
        MetricError::DimMismatch { .. } => CliError::Data(e.to_string()),
        other => data(other),
    })?;
    let mut out = String::new();
    writeln!(out, "mmd2={value:.12e}").unwrap();
    writeln!(out, "n_source={}", s.n()).unwrap();
    writeln!(out, "n_target={}", t.n()).unwrap();
    if let KernelSpec::MedianHeuristic { .. } = spec {
        writeln!(out, "sigma_median={:.12e}", median_heuristic_sigma(&s, &t)).unwrap();
    }
    Ok(out)
}

fn cmd_afn(args: PairArgs) -> Result<String, CliError> {
    let s = load_features(&args.source)?;
    let t = load_features(&args.target)?;
    let mut out = String::new();
    writeln!(out, "mean_norm.source={:.12e}", mean_feature_norm(&s)).unwrap();
    writeln!(out, "mean_norm.target={:.12e}", mean_feature_norm(&t)).unwrap();
    writeln!(out, "mmfnd={:.12e}", mmfnd(&s, &t)).unwrap();
    Ok(out)
}

fn cmd_entropy(args: EntropyArgs) -> Result<String, CliError> {
    let p = ProbMatrix::read(&args.probs).map_err(data)?;
    let mut out = String::new();
    writeln!(out, "entropy={:.12e}", entropy(&p)).unwrap();
    writeln!(out, "rows={}", p.n()).unwrap();
    writeln!(out, "classes={}", p.classes()).unwrap();
    Ok(out)
}

fn cmd_diag(args: DiagArgs) -> Result<String, CliError> {
    let format = args.geo.format()?;
    let cfg = DiagConfig {
        repr: args.repr.choice(None)?,
        pool: match args.pool.as_str() {
            "mean" => PoolMode::Mean,
            _ => PoolMode::ChannelStats,
        },
        kernel: args.kernel.spec()?,
        format,
        geometry: args.geo.geometry(format),
    };
    let source_probs = match &args.source_probs {
        Some(p) => Some(ProbMatrix::read(p).map_err(data)?),
        None => None,
    };
    let target_probs = match &args.target_probs {
        Some(p) => Some(ProbMatrix::read(p).map_err(data)?),
        None => None,
    };
    let report = run_diag(
        &args.source_dir,
        &args.target_dir,
        &cfg,
        source_probs.as_ref(),
        target_probs.as_ref(),
    )
    .map_err(data)?;
    Ok(report.to_key_value_lines())
}

fn cmd_stats(args: StatsArgs) -> Result<String, CliError> {
    let stream = read_stream(&args.input, &args.geo)?;
    let st = stream_stats(&stream);
    let mut out = String::new();
    writeln!(out, "count={}", st.count).unwrap();
    writeln!(out, "duration_us={}", st.duration_us).unwrap();
    writeln!(out, "mean_rate_hz={:.6}", st.mean_rate_hz).unwrap();
    writeln!(out, "positive_fraction={:.6}", st.positive_fraction).unwrap();
    writeln!(out, "width={}", stream.width).unwrap();
    writeln!(out, "height={}", stream.height).unwrap();
    Ok(out)
}

fn cmd_info(args: InfoArgs) -> Result<String, CliError> {
    let bytes = std::fs::read(&args.input).map_err(data)?;
    let mut out = String::new();
    if bytes.starts_with(b"EVT1") {
        let stream = read_events(&args.input, EventFormat::Evt1, None).map_err(data)?;
        writeln!(out, "type=evt1").unwrap();
        writeln!(out, "width={}", stream.width).unwrap();
        writeln!(out, "height={}", stream.height).unwrap();
        writeln!(out, "count={}", stream.len()).unwrap();
    } else if bytes.starts_with(b"TEN1") {
        let tensor = Tensor::read_ten1(&args.input).map_err(data)?;
        let dims: Vec<String> = tensor.dims().iter().map(|d| d.to_string()).collect();
        writeln!(out, "type=ten1").unwrap();
        writeln!(out, "ndim={}", tensor.ndim()).unwrap();
        writeln!(out, "dims={}", dims.join("x")).unwrap();
    } else {
        return Err(CliError::Data(format!(
            "{}: unrecognized magic, expected EVT1 or TEN1",
            args.input.display()
        )));
    }
    Ok(out)
}
