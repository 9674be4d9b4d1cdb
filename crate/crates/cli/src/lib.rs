//! Command-line workflows: train a model from a corpus, invert formants,
//! draw prediction grids, evaluate against item means, compile lookup
//! tables, track formants in WAV files, synthesize corpora, and serve the
//! live display.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 runtime error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;
use tongue_core::corpus::{center_by_speaker, load_corpus, synth_corpus, SynthSpec};
use tongue_core::formants::{median, read_wav, track, write_frames_csv, write_wav, AnalysisConfig, SampleFormat, VowelSpec};
use tongue_core::inversion::svg::{render, Curve, Panel};
use tongue_core::inversion::{evaluate_item_means, grid_predict, invert};
use tongue_core::lut::{compile_lut, inspect_header, LutError, LutSpec, DEFAULT_CELL_CAP};
use tongue_core::regress::{sha256_hex, train, BundleError, TARGETS};
use tongue_core::{CorpusF64, ModelBundleF64};
use tongue_service::{ServeOptions, HubOptions};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{message}")]
    Exit { code: i32, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Exit { code, .. } => *code,
        }
    }
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| data(format!("cannot read {}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<ModelBundleF64, CliError> {
    ModelBundleF64::load(path).map_err(|e| match e {
        BundleError::Io(io) => data(format!("cannot read {}: {io}", path.display())),
        e => data(format!("{}: {e}", path.display())),
    })
}

#[derive(Debug, Parser)]
#[command(name = "tongue", version, about = "Formant-driven tongue contour prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the shape model and formant regression to a corpus CSV.
    Train(TrainArgs),
    /// Predict the tongue contour for one (F1, F2) pair.
    Invert(InvertArgs),
    /// Predict contours over an F1 x F2 grid (multi-panel SVG and CSV).
    Grid(GridArgs),
    /// Compare predictions with each item's mean contour.
    Eval(EvalArgs),
    /// Precompile a lookup table for real-time use.
    Lut(LutArgs),
    /// Track formants in a WAV file and write the frame CSV.
    Track(TrackArgs),
    /// Generate a synthetic corpus with a ground-truth sidecar.
    Synth(SynthArgs),
    /// Synthesize a steady vowel as a WAV file.
    Vowel(VowelArgs),
    /// Run the live display service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus CSV: speaker,item,x1,y1,...,x11,y11,f1,f2.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output model bundle (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ContourFormat {
    Csv,
    Svg,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    /// Model bundle written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// First formant, Hz.
    #[arg(long)]
    pub f1: f64,
    /// Second formant, Hz.
    #[arg(long)]
    pub f2: f64,
    /// Output format.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: ContourFormat,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct RangeArgs {
    /// Lowest F1, Hz.
    #[arg(long, default_value_t = 320.0)]
    pub f1_lo: f64,
    /// Highest F1, Hz.
    #[arg(long, default_value_t = 903.0)]
    pub f1_hi: f64,
    /// Lowest F2, Hz.
    #[arg(long, default_value_t = 828.0)]
    pub f2_lo: f64,
    /// Highest F2, Hz.
    #[arg(long, default_value_t = 2616.0)]
    pub f2_hi: f64,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Model bundle written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Values per axis, at least 2.
    #[arg(long, default_value_t = 4)]
    pub steps: usize,
    #[command(flatten)]
    pub range: RangeArgs,
    /// Output prefix; writes PREFIX.svg and PREFIX.csv.
    #[arg(long, default_value = "grid")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model bundle written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Corpus CSV to evaluate against.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Overlay SVG with observed and predicted contours per item.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LutArgs {
    /// Model bundle written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Output table.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub range: RangeArgs,
    /// Grid spacing, Hz.
    #[arg(long, default_value_t = 10.0)]
    pub step: f64,
    /// Largest allowed number of grid nodes.
    #[arg(long, default_value_t = DEFAULT_CELL_CAP)]
    pub cell_cap: usize,
}

/// Analysis settings; unset fields use the defaults for the sample rate.
#[derive(Debug, Clone, Default, Args)]
pub struct AnalysisArgs {
    /// Samples per analysis frame.
    #[arg(long, alias = "frame_size")]
    pub frame_size: Option<usize>,
    /// Samples between frame starts.
    #[arg(long, alias = "hop_size")]
    pub hop_size: Option<usize>,
    /// LPC model order.
    #[arg(long, alias = "lpc_order")]
    pub lpc_order: Option<usize>,
    /// Pre-emphasis coefficient in [0, 1).
    #[arg(long)]
    pub preemphasis: Option<f64>,
    /// Voicing gate on frame RMS, dBFS.
    #[arg(long, alias = "threshold_db", allow_negative_numbers = true)]
    pub threshold_db: Option<f64>,
    /// Formants reported per frame.
    #[arg(long, alias = "max_formants")]
    pub max_formants: Option<usize>,
    /// Widest accepted formant bandwidth, Hz.
    #[arg(long, alias = "max_bandwidth_hz")]
    pub max_bandwidth_hz: Option<f64>,
    /// FFT length of the spectral envelope.
    #[arg(long, alias = "n_fft")]
    pub n_fft: Option<usize>,
}

impl AnalysisArgs {
    pub fn config(&self, sample_rate: u32) -> Result<AnalysisConfig, CliError> {
        let mut c = AnalysisConfig::for_sample_rate(sample_rate);
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f {
                    c.$f = v;
                }
            )*};
        }
        set!(frame_size, hop_size, lpc_order, preemphasis, threshold_db, max_formants, max_bandwidth_hz, n_fft);
        c.validate().map_err(|e| CliError::Usage(format!("invalid analysis setting: {e}")))?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// Input WAV; the first channel is analysed.
    #[arg(long)]
    pub wav: PathBuf,
    /// Output frame CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output corpus CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth JSON; defaults to OUT with `.truth.json` appended.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Number of speakers.
    #[arg(long, default_value_t = 40)]
    pub speakers: usize,
    /// Repetitions of each item per speaker.
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Landmark noise SD, mm.
    #[arg(long, default_value_t = 0.5)]
    pub noise_sd: f64,
    /// Per-speaker offset SD, mm.
    #[arg(long, default_value_t = 5.0)]
    pub speaker_offset_sd: f64,
    /// Formant jitter SD, Hz.
    #[arg(long, default_value_t = 15.0)]
    pub formant_jitter: f64,
    /// Switch every noise source off.
    #[arg(long)]
    pub noiseless: bool,
    /// Random seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct VowelArgs {
    /// Output WAV.
    #[arg(long)]
    pub out: PathBuf,
    /// Resonance frequencies F1,F2,F3 in Hz, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [700.0, 1100.0, 2400.0])]
    pub formants: Vec<f64>,
    /// Fundamental frequency, Hz.
    #[arg(long, default_value_t = 110.0)]
    pub f0: f64,
    /// Duration, s.
    #[arg(long, default_value_t = 1.0)]
    pub seconds: f64,
    /// Sample rate, Hz.
    #[arg(long, default_value_t = 16000)]
    pub sample_rate: u32,
    /// Write 32-bit float samples instead of 16-bit integers.
    #[arg(long)]
    pub float: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Model bundle written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Lookup table written by `lut`.
    #[arg(long)]
    pub lut: PathBuf,
    /// TCP port.
    #[arg(long, default_value_t = 8765)]
    pub port: u16,
    /// Bind address.
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Audio source: `synth`, `silence` or `wav:<path>` (substring match).
    #[arg(long, default_value = "synth")]
    pub device: String,
    /// Capture sample rate, Hz.
    #[arg(long, alias = "sample_rate", default_value_t = 16000)]
    pub sample_rate: u32,
    /// Frames buffered per client before the oldest is dropped.
    #[arg(long, default_value_t = tongue_service::hub::DEFAULT_CLIENT_QUEUE)]
    pub client_queue: usize,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
}

/// Parses arguments and runs the command, returning the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    1
                }
            };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Train(a) => cmd_train(&a, out),
        Command::Invert(a) => cmd_invert(&a, out, err),
        Command::Grid(a) => cmd_grid(&a, err),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Lut(a) => cmd_lut(&a, out),
        Command::Track(a) => cmd_track(&a, out, err),
        Command::Synth(a) => cmd_synth(&a, err),
        Command::Vowel(a) => cmd_vowel(&a),
        Command::Serve(a) => cmd_serve(&a),
    }
}

fn io(e: std::io::Error) -> CliError {
    runtime(e)
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let bytes = read_file(&a.corpus)?;
    let bundle = train::<f64>(&bytes).map_err(|e| data(format!("{}: {e}", a.corpus.display())))?;
    let m = &bundle.metadata;
    writeln!(out, "tokens {}  speakers {}  items {}", m.n_tokens, m.n_speakers, m.items.len()).map_err(io)?;
    writeln!(out, "variance explained").map_err(io)?;
    let mut cum = 0.0;
    for (k, r) in bundle.pca.variance_ratios().iter().take(10).enumerate() {
        cum += r;
        writeln!(out, "  PC{:<3} {:>8.4}%  cumulative {:>8.4}%", k + 1, 100.0 * r, 100.0 * cum).map_err(io)?;
    }
    writeln!(out, "R squared").map_err(io)?;
    for (name, r2) in TARGETS.iter().zip(bundle.regression.r_squared) {
        writeln!(out, "  {name:<9} {r2:.6}").map_err(io)?;
    }
    bundle.save(&a.out).map_err(runtime)?;
    writeln!(out, "wrote {}", a.out.display()).map_err(io)
}

fn check_formants(f1: f64, f2: f64) -> Result<(), CliError> {
    if !(f1 > 0.0 && f2 > 0.0 && f1.is_finite() && f2.is_finite()) {
        return Err(data(format!("formants must be positive, got f1={f1}, f2={f2}")));
    }
    Ok(())
}

pub fn cmd_invert(a: &InvertArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    check_formants(a.f1, a.f2)?;
    let bundle = load_model(&a.model)?;
    let c = invert(&bundle, a.f1, a.f2).map_err(data)?;
    if c.extrapolated {
        let r = &bundle.regression;
        writeln!(
            err,
            "warning: ({}, {}) Hz lies outside the training range (F1 {:.0}-{:.0}, F2 {:.0}-{:.0}); the contour is extrapolated",
            a.f1, a.f2, r.f1_range[0], r.f1_range[1], r.f2_range[0], r.f2_range[1]
        )
        .map_err(io)?;
    }
    let text = match a.format {
        ContourFormat::Csv => c.to_csv(),
        ContourFormat::Svg => c.to_svg(),
    };
    match &a.out {
        Some(p) => write_file(p, text),
        None => out.write_all(text.as_bytes()).map_err(io),
    }
}

fn check_range(r: &RangeArgs) -> Result<(), CliError> {
    for (lo, hi, name) in [(r.f1_lo, r.f1_hi, "f1"), (r.f2_lo, r.f2_hi, "f2")] {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(CliError::Usage(format!("--{name}-lo and --{name}-hi must satisfy 0 < lo < hi")));
        }
    }
    Ok(())
}

pub fn cmd_grid(a: &GridArgs, err: &mut dyn Write) -> Result<(), CliError> {
    if a.steps < 2 {
        return Err(CliError::Usage("--steps must be at least 2".into()));
    }
    check_range(&a.range)?;
    let bundle = load_model(&a.model)?;
    let r = a.range;
    let grid = grid_predict(&bundle, (r.f1_lo, r.f1_hi), (r.f2_lo, r.f2_hi), a.steps).map_err(data)?;
    let mut csv = String::from("f1_hz,f2_hz,index,x_mm,y_mm,is_knot,extrapolated\n");
    let mut panels = Vec::new();
    for (i, &f1) in grid.f1_axis.iter().enumerate() {
        for (j, &f2) in grid.f2_axis.iter().enumerate() {
            let c = grid.get(i, j);
            for (k, p) in c.points.iter().enumerate() {
                let knot = u8::from(c.knot_indices.contains(&k));
                let _ = writeln!(csv, "{f1},{f2},{k},{},{},{knot},{}", p.x, p.y, u8::from(c.extrapolated));
            }
            panels.push(Panel {
                title: format!("F1 = {f1:.0} Hz, F2 = {f2:.0} Hz"),
                curves: vec![Curve {
                    points: &c.points,
                    class: if c.extrapolated { "contour extrapolated" } else { "contour" },
                    stroke: "#1f4e9c",
                }],
            });
        }
    }
    let svg_path = a.out.with_extension("svg");
    let csv_path = a.out.with_extension("csv");
    write_file(&svg_path, render(&panels, a.steps))?;
    write_file(&csv_path, csv)?;
    writeln!(err, "wrote {} and {} ({} panels)", svg_path.display(), csv_path.display(), panels.len()).map_err(io)
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let bundle = load_model(&a.model)?;
    let corpus: CorpusF64 = load_corpus(&a.corpus).map_err(|e| data(format!("{}: {e}", a.corpus.display())))?;
    let corpus = if corpus.centered { corpus } else { center_by_speaker(corpus).map_err(data)? };
    let reports = evaluate_item_means(&bundle, &corpus).map_err(data)?;
    writeln!(out, "item,n_tokens,mean_f1_hz,mean_f2_hz,rmsd_mm,max_knot_error_mm").map_err(io)?;
    for r in &reports {
        let worst = r.knot_errors_mm.iter().fold(0.0f64, |m, &e| m.max(e));
        writeln!(out, "{},{},{:.1},{:.1},{:.6},{:.6}", r.item, r.n_tokens, r.mean_f1_hz, r.mean_f2_hz, r.rmsd_mm, worst).map_err(io)?;
    }
    if let Some(p) = &a.svg {
        let panels: Vec<Panel<'_, f64>> = reports
            .iter()
            .map(|r| Panel {
                title: format!("{} (RMSD {:.2} mm)", r.item, r.rmsd_mm),
                curves: vec![
                    Curve {
                        points: &r.mean_contour.points,
                        class: "observed",
                        stroke: "#444444",
                    },
                    Curve {
                        points: &r.predicted_contour.points,
                        class: "predicted",
                        stroke: "#c0392b",
                    },
                ],
            })
            .collect();
        let cols = (panels.len() as f64).sqrt().ceil() as usize;
        write_file(p, render(&panels, cols))?;
    }
    Ok(())
}

pub fn cmd_lut(a: &LutArgs, out: &mut dyn Write) -> Result<(), CliError> {
    check_range(&a.range)?;
    if !(a.step > 0.0 && a.step.is_finite()) {
        return Err(CliError::Usage("--step must be positive".into()));
    }
    let bundle = load_model(&a.model)?;
    let r = a.range;
    let spec = LutSpec {
        f1_lo: r.f1_lo,
        f1_hi: r.f1_hi,
        f2_lo: r.f2_lo,
        f2_hi: r.f2_hi,
        step: a.step,
        cell_cap: a.cell_cap,
    };
    let table = compile_lut(&bundle, &spec).map_err(|e| match e {
        LutError::TooLarge { cells, cap } => CliError::Usage(format!("grid of {cells} nodes exceeds the cell cap of {cap}; raise --step or --cell-cap")),
        e => data(e),
    })?;
    table.save(&a.out).map_err(runtime)?;
    let h = inspect_header(&a.out).map_err(runtime)?;
    writeln!(
        out,
        "grid {}x{} nodes, F1 {}-{} Hz, F2 {}-{} Hz, step {} Hz\ndigest {}\nwrote {}",
        h.f1.n,
        h.f2.n,
        h.f1.lo,
        h.f1.hi,
        h.f2.lo,
        h.f2.hi,
        h.f1.step,
        hex_digest(&h.digest),
        a.out.display()
    )
    .map_err(io)
}

fn hex_digest(d: &[u8; 32]) -> String {
    d.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn cmd_track(a: &TrackArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let (samples, sr) = read_wav::<f64>(&a.wav).map_err(|e| data(format!("{}: {e}", a.wav.display())))?;
    let config = a.analysis.config(sr)?;
    let frames = track(&samples, &config).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut buf = Vec::new();
    write_frames_csv(&frames, &mut buf).map_err(io)?;
    match &a.out {
        Some(p) => write_file(p, &buf)?,
        None => out.write_all(&buf).map_err(io)?,
    }
    let voiced: Vec<_> = frames.iter().filter(|f| f.voiced).collect();
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.1}"));
    writeln!(
        err,
        "{} frames, {} voiced, median F1 {} Hz, median F2 {} Hz",
        frames.len(),
        voiced.len(),
        fmt(median(voiced.iter().filter_map(|f| f.formant(0)))),
        fmt(median(voiced.iter().filter_map(|f| f.formant(1))))
    )
    .map_err(io)
}

pub fn cmd_synth(a: &SynthArgs, err: &mut dyn Write) -> Result<(), CliError> {
    if a.speakers == 0 || a.reps == 0 {
        return Err(CliError::Usage("--speakers and --reps must be at least 1".into()));
    }
    let mut spec = SynthSpec::<f64>::noiseless(a.speakers, a.reps);
    if !a.noiseless {
        for (v, name) in [(a.noise_sd, "noise-sd"), (a.speaker_offset_sd, "speaker-offset-sd"), (a.formant_jitter, "formant-jitter")] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CliError::Usage(format!("--{name} must be non-negative")));
            }
        }
        spec.noise_sd_mm = a.noise_sd;
        spec.speaker_offset_sd_mm = a.speaker_offset_sd;
        spec.formant_jitter_hz = a.formant_jitter;
    }
    let (corpus, truth) = synth_corpus(&spec, a.seed);
    let bytes = corpus.to_csv_bytes();
    write_file(&a.out, &bytes)?;
    let truth_path = a.truth.clone().unwrap_or_else(|| {
        let mut s = a.out.clone().into_os_string();
        s.push(".truth.json");
        PathBuf::from(s)
    });
    let json = serde_json::to_string_pretty(&truth).map_err(runtime)?;
    write_file(&truth_path, json)?;
    writeln!(
        err,
        "wrote {} tokens to {} (sha256 {}) and ground truth to {}",
        corpus.len(),
        a.out.display(),
        sha256_hex(&bytes),
        truth_path.display()
    )
    .map_err(io)
}

pub fn cmd_vowel(a: &VowelArgs) -> Result<(), CliError> {
    let f = &a.formants;
    if f.len() != 3 {
        return Err(CliError::Usage(format!("--formants takes three values, got {}", f.len())));
    }
    if a.sample_rate < 1000 || !(a.f0 > 0.0) || !(a.seconds > 0.0) || f.iter().any(|&x| !(x > 0.0 && x < a.sample_rate as f64 / 2.0)) {
        return Err(CliError::Usage("vowel needs positive f0 and duration, and formants below the Nyquist frequency".into()));
    }
    let mut spec = VowelSpec::new(a.sample_rate, [f[0], f[1], f[2]]);
    spec.f0_hz = a.f0;
    let x: Vec<f64> = tongue_core::formants::synth_vowel(&spec, a.seconds);
    let format = if a.float { SampleFormat::Float32 } else { SampleFormat::Int16 };
    write_wav(&a.out, &x, a.sample_rate, format).map_err(runtime)
}

pub fn cmd_serve(a: &ServeArgs) -> Result<(), CliError> {
    let options = ServeOptions {
        addr: SocketAddr::new(a.host, a.port),
        device: a.device.clone(),
        config: a.analysis.config(a.sample_rate)?,
        hub: HubOptions {
            client_queue: a.client_queue,
            ..HubOptions::default()
        },
    };
    tongue_service::run(&a.model, &a.lut, options).map_err(|e| CliError::Exit {
        code: e.exit_code(),
        message: e.to_string(),
    })
}
