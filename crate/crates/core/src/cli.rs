//! Command line front end.
//!
//! Every subcommand reads its inputs, validates every referenced path
//! before doing any work, and writes outputs atomically into `--out`.
//! Outputs of a failed command are removed.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::channel::{apply_scene, GestureLabel, Scene};
use crate::doppler::{caf_batch, doppler_envelope, CafConfig, DopplerSpectrogram, EnvelopeNorm};
use crate::io::{self, OutputSet};
use crate::monitor::{intensity_epochs, smooth_detections, summarize, LabelRecord, ScoredFrame, SmoothConfig, DEFAULT_T1, DEFAULT_T2};
use crate::recognition::{recording_window, Detection, GestureModel, ModelConfig};
use crate::respiration::{analyze, PhaseTrace, RespirationConfig};
use crate::scenario::{self, GestureSuiteConfig, RespirationScenario, SessionConfig};
use crate::waveform::{gen_beacon_train, gen_ofdm_burst, gen_ofdm_stream, WaveformConfig};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "wisense", version, about = "Passive WiFi Doppler sensing toolkit")]
pub struct Cli {
    /// JSON file with parameters for the chosen subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every stochastic component.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignalKind {
    Stream,
    Beacon,
    Burst,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a transmitter signal (.iq).
    Synth(SynthArgs),
    /// Propagate a transmitter signal through a scene.
    Simulate(SimulateArgs),
    /// Cross-ambiguity Doppler spectrogram of one surveillance channel.
    Caf(CafArgs),
    /// Breathing rate from reference/surveillance phase.
    Respire(PairArgs),
    /// Train a gesture model from labelled spectrogram recordings.
    Train(TrainArgs),
    /// Detect and classify gestures in spectrograms.
    Classify(ClassifyArgs),
    /// Activity-level summary from spectrograms or an intensity CSV.
    Monitor(MonitorArgs),
    /// HMM smoothing of classified detections.
    Smooth(SmoothArgs),
    /// Run a complete synthetic case study (1 respiration, 2 gestures, 3 monitoring).
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "stream")]
    pub kind: SignalKind,
    #[arg(long, default_value_t = 1.0)]
    pub duration: f64,
    #[arg(long, default_value = "tx.iq")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub tx: PathBuf,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub surveillance: PathBuf,
}

#[derive(Debug, Args)]
pub struct CafArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Also write an 8-bit PGM image of the spectrogram.
    #[arg(long)]
    pub pgm: bool,
    #[arg(long, default_value = "spectrogram")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory holding the spectrogram CSVs named in the labels file.
    #[arg(long)]
    pub windows: PathBuf,
    /// Lines of `label,file[,file...]`, one recording per line, one file per receiver.
    #[arg(long)]
    pub labels: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// One spectrogram CSV per receiver, in training order.
    #[arg(long = "spec", required = true)]
    pub specs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MonitorArgs {
    #[arg(long = "spec", conflicts_with = "intensity")]
    pub specs: Vec<PathBuf>,
    #[arg(long)]
    pub intensity: Option<PathBuf>,
    #[arg(long, default_value_t = 60.0)]
    pub epoch: f64,
    #[arg(long, default_value_t = DEFAULT_T1)]
    pub t1: f64,
    #[arg(long, default_value_t = DEFAULT_T2)]
    pub t2: f64,
    /// Fixed batch-energy normalizer; the trace maximum is used when absent.
    #[arg(long)]
    pub norm: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub exclude_hz: f64,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    #[arg(long)]
    pub detections: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
    pub case: u8,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(written) => {
            for p in written {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("input file {} does not exist", path.display())))
    }
}

fn require_iq(path: &Path) -> Result<()> {
    require_file(path)?;
    require_file(&io::meta_path(path))
}

fn load_config<T: DeserializeOwned + Default>(cli: &Cli) -> Result<T> {
    match &cli.config {
        Some(p) => {
            require_file(p)?;
            io::read_json(p)
        }
        None => Ok(T::default()),
    }
}

/// Runs one parsed command and returns the files it wrote.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    if let Some(p) = &cli.config {
        require_file(p)?;
    }
    let mut out = OutputSet::new();
    match &cli.command {
        Command::Synth(a) => cmd_synth(cli, a, &mut out)?,
        Command::Simulate(a) => cmd_simulate(cli, a, &mut out)?,
        Command::Caf(a) => cmd_caf(cli, a, &mut out)?,
        Command::Respire(a) => cmd_respire(cli, a, &mut out)?,
        Command::Train(a) => cmd_train(cli, a, &mut out)?,
        Command::Classify(a) => cmd_classify(cli, a, &mut out)?,
        Command::Monitor(a) => cmd_monitor(cli, a, &mut out)?,
        Command::Smooth(a) => cmd_smooth(cli, a, &mut out)?,
        Command::Demo(a) => cmd_demo(cli, a.case, &mut out)?,
    }
    Ok(out.commit())
}

fn cmd_synth(cli: &Cli, a: &SynthArgs, out: &mut OutputSet) -> Result<()> {
    let cfg: WaveformConfig = load_config(cli)?;
    cfg.validate()?;
    let trace = match a.kind {
        SignalKind::Stream => gen_ofdm_stream(&cfg, a.duration, cli.seed)?,
        SignalKind::Beacon => gen_beacon_train(&cfg, a.duration, cli.seed)?,
        SignalKind::Burst => gen_ofdm_burst(&cfg, cli.seed)?,
    };
    out.write_iq(&cli.out.join(&a.name), &trace)
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs, out: &mut OutputSet) -> Result<()> {
    require_file(&a.scene)?;
    require_iq(&a.tx)?;
    let scene: Scene = io::read_json(&a.scene)?;
    let tx = io::read_iq(&a.tx)?;
    let ch = apply_scene(&tx, &scene, cli.seed)?;
    out.write_iq(&cli.out.join("reference.iq"), &ch.reference)?;
    for (i, s) in ch.surveillance.iter().enumerate() {
        out.write_iq(&cli.out.join(format!("surveillance{i}.iq")), s)?;
    }
    Ok(())
}

fn spectrogram_outputs(out: &mut OutputSet, dir: &Path, name: &str, spec: &DopplerSpectrogram, pgm: bool) -> Result<()> {
    out.write(&dir.join(format!("{name}.csv")), io::spectrogram_csv(spec).as_bytes())?;
    if pgm {
        out.write(&dir.join(format!("{name}.pgm")), &io::spectrogram_pgm(spec))?;
    }
    Ok(())
}

fn cmd_caf(cli: &Cli, a: &CafArgs, out: &mut OutputSet) -> Result<()> {
    require_iq(&a.pair.reference)?;
    require_iq(&a.pair.surveillance)?;
    let cfg: CafConfig = load_config(cli)?;
    let r = io::read_iq(&a.pair.reference)?;
    let s = io::read_iq(&a.pair.surveillance)?;
    let spec = caf_batch(&r, &s, &cfg)?;
    spectrogram_outputs(out, &cli.out, &a.name, &spec, a.pgm)
}

fn phase_csv(trace: &PhaseTrace) -> String {
    let mut s = String::from("t_s,phase_rad\n");
    for (i, p) in trace.phase_rad.iter().enumerate() {
        let _ = writeln!(s, "{},{}", trace.time_of(i), p);
    }
    s
}

fn cmd_respire(cli: &Cli, a: &PairArgs, out: &mut OutputSet) -> Result<()> {
    require_iq(&a.reference)?;
    require_iq(&a.surveillance)?;
    let cfg: RespirationConfig = load_config(cli)?;
    let r = io::read_iq(&a.reference)?;
    let s = io::read_iq(&a.surveillance)?;
    let report = analyze(&r, &s, &cfg)?;
    out.write(&cli.out.join("phase.csv"), phase_csv(&report.filtered).as_bytes())?;
    out.write_json(&cli.out.join("respiration.json"), &report.estimate)
}

fn parse_labels(path: &Path, dir: &Path) -> Result<Vec<(GestureLabel, Vec<PathBuf>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cells = line.split(',').map(str::trim);
        let label: GestureLabel = cells
            .next()
            .unwrap_or_default()
            .parse()
            .map_err(|_| Error::format(path, format!("line {}: unknown gesture label", i + 1)))?;
        let files: Vec<PathBuf> = cells.map(|c| dir.join(c)).collect();
        if files.is_empty() {
            return Err(Error::format(path, format!("line {}: no spectrogram files", i + 1)));
        }
        rows.push((label, files));
    }
    Ok(rows)
}

fn cmd_train(cli: &Cli, a: &TrainArgs, out: &mut OutputSet) -> Result<()> {
    require_file(&a.labels)?;
    let cfg: ModelConfig = load_config(cli)?;
    let rows = parse_labels(&a.labels, &a.windows)?;
    rows.iter().flat_map(|(_, f)| f).try_for_each(|p| require_file(p))?;
    let mut windows = Vec::new();
    let mut labels = Vec::new();
    for (label, files) in &rows {
        let specs = files.iter().map(|f| io::read_spectrogram_csv(f)).collect::<Result<Vec<_>>>()?;
        match recording_window(&specs, &cfg.segment)? {
            Some(w) => {
                windows.push(w);
                labels.push(*label);
            }
            None => eprintln!("warning: no gesture found in {}", files[0].display()),
        }
    }
    let model = GestureModel::train(&windows, &labels, &cfg)?;
    out.write_json(&cli.out.join("model.json"), &model)
}

fn cmd_classify(cli: &Cli, a: &ClassifyArgs, out: &mut OutputSet) -> Result<()> {
    require_file(&a.model)?;
    a.specs.iter().try_for_each(|p| require_file(p))?;
    let model: GestureModel = io::read_json(&a.model)?;
    let specs = a.specs.iter().map(|p| io::read_spectrogram_csv(p)).collect::<Result<Vec<_>>>()?;
    let detections = model.classify_spectrograms(&specs)?;
    out.write(&cli.out.join("detections.jsonl"), io::json_lines(&detections)?.as_bytes())
}

fn cmd_monitor(cli: &Cli, a: &MonitorArgs, out: &mut OutputSet) -> Result<()> {
    let trace = match (&a.intensity, a.specs.is_empty()) {
        (Some(p), _) => {
            require_file(p)?;
            io::read_intensity_csv(p, None)?
        }
        (None, false) => {
            a.specs.iter().try_for_each(|p| require_file(p))?;
            let norm = match a.norm {
                Some(v) => EnvelopeNorm::Fixed(v),
                None => EnvelopeNorm::TraceMax,
            };
            let mut batches = Vec::new();
            for p in &a.specs {
                let spec = io::read_spectrogram_csv(p)?;
                batches.extend(doppler_envelope(&spec, a.exclude_hz, norm)?);
            }
            batches.sort_by(|x, y| x.0.total_cmp(&y.0));
            let trace = intensity_epochs(&batches, 0.0, a.epoch)?;
            out.write(&cli.out.join("intensity.csv"), io::intensity_csv(&trace).as_bytes())?;
            trace
        }
        (None, true) => return Err(Error::Config("monitor needs --spec or --intensity".into())),
    };
    out.write_json(&cli.out.join("summary.json"), &summarize(&trace, a.t1, a.t2)?)
}

fn smooth_records(detections: &[Detection], cfg: &SmoothConfig) -> Result<Vec<LabelRecord>> {
    let frames: Vec<ScoredFrame> = detections
        .iter()
        .map(|d| ScoredFrame {
            t_start_s: d.start_s,
            t_end_s: d.end_s,
            residuals: d.residuals.clone(),
        })
        .collect();
    let raw = detections.iter().map(|d| LabelRecord {
        t_start_s: d.start_s,
        t_end_s: d.end_s,
        label: d.label.code().to_string(),
        smoothed: false,
    });
    let smoothed = if frames.is_empty() { Vec::new() } else { smooth_detections(&frames, cfg)? };
    Ok(raw.chain(smoothed).collect())
}

fn cmd_smooth(cli: &Cli, a: &SmoothArgs, out: &mut OutputSet) -> Result<()> {
    require_file(&a.detections)?;
    let cfg: SmoothConfig = load_config(cli)?;
    let detections: Vec<Detection> = io::read_json_lines(&a.detections)?;
    out.write(&cli.out.join("labels.jsonl"), io::json_lines(&smooth_records(&detections, &cfg)?)?.as_bytes())
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    file: String,
    bytes: u64,
}

#[derive(Debug, Serialize)]
struct Manifest<C: Serialize, R: Serialize> {
    case: u8,
    seed: u64,
    config: C,
    results: R,
    files: Vec<ManifestEntry>,
}

fn write_manifest<C: Serialize, R: Serialize>(cli: &Cli, case: u8, config: C, results: R, out: &mut OutputSet) -> Result<()> {
    let mut files: Vec<ManifestEntry> = out
        .paths()
        .iter()
        .map(|p| {
            let bytes = std::fs::metadata(p).map_err(|e| Error::io(p, e))?.len();
            let file = p.strip_prefix(&cli.out).unwrap_or(p).to_string_lossy().replace('\\', "/");
            Ok(ManifestEntry { file, bytes })
        })
        .collect::<Result<_>>()?;
    files.sort_by(|a, b| a.file.cmp(&b.file));
    let manifest = Manifest {
        case,
        seed: cli.seed,
        config,
        results,
        files,
    };
    out.write_json(&cli.out.join("manifest.json"), &manifest)
}

fn cmd_demo(cli: &Cli, case: u8, out: &mut OutputSet) -> Result<()> {
    match case {
        1 => demo_respiration(cli, out),
        2 => demo_gestures(cli, out),
        _ => demo_monitoring(cli, out),
    }
}

fn demo_respiration(cli: &Cli, out: &mut OutputSet) -> Result<()> {
    let cfg: RespirationScenario = load_config(cli)?;
    let dir = &cli.out;
    let scene = cfg.scene()?;
    let (ch, report) = cfg.run(cli.seed)?;
    out.write_json(&dir.join("scene.json"), &scene)?;
    out.write_iq(&dir.join("reference.iq"), &ch.reference)?;
    out.write_iq(&dir.join("surveillance0.iq"), &ch.surveillance[0])?;
    out.write(&dir.join("phase_raw.csv"), phase_csv(&report.raw).as_bytes())?;
    out.write(&dir.join("phase.csv"), phase_csv(&report.filtered).as_bytes())?;
    out.write_json(&dir.join("respiration.json"), &report.estimate)?;
    let results = serde_json::json!({
        "true_rate_hz": cfg.rate_hz,
        "estimated_rate_hz": report.estimate.rate_hz,
        "relative_error": (report.estimate.rate_hz - cfg.rate_hz).abs() / cfg.rate_hz,
    });
    write_manifest(cli, 1, &cfg, results, out)
}

fn demo_gestures(cli: &Cli, out: &mut OutputSet) -> Result<()> {
    let cfg: GestureSuiteConfig = load_config(cli)?;
    let dir = &cli.out;
    let (model, report) = scenario::run_suite(&cfg, cli.seed)?;
    out.write_json(&dir.join("model.json"), &model)?;
    out.write_json(&dir.join("report.json"), &report)?;
    let mut confusion = String::from("true\\predicted");
    for g in GestureLabel::ALL {
        let _ = write!(confusion, ",{}", g.code());
    }
    confusion.push('\n');
    for (g, row) in GestureLabel::ALL.iter().zip(&report.confusion) {
        let _ = write!(confusion, "{}", g.code());
        for c in row {
            let _ = write!(confusion, ",{c}");
        }
        confusion.push('\n');
    }
    out.write(&dir.join("confusion.csv"), confusion.as_bytes())?;
    let example = cfg.record(GestureLabel::Fall, scenario::derive_seed(cli.seed, 99))?;
    for (i, spec) in example.iter().enumerate() {
        spectrogram_outputs(out, dir, &format!("example_fall_rx{i}"), spec, true)?;
    }
    write_manifest(cli, 2, &cfg, &report, out)
}

fn demo_monitoring(cli: &Cli, out: &mut OutputSet) -> Result<()> {
    let cfg: SessionConfig = load_config(cli)?;
    let dir = &cli.out;
    let session = scenario::run_session(&cfg, cli.seed)?;
    let (model, _) = scenario::run_suite(&cfg.suite, scenario::derive_seed(cli.seed, 1))?;
    let detections = model.classify_spectrograms(&session.spectrograms)?;
    let labels = smooth_records(&detections, &SmoothConfig::default())?;
    out.write(&dir.join("truth.jsonl"), io::json_lines(&session.truth)?.as_bytes())?;
    for (i, spec) in session.spectrograms.iter().enumerate() {
        spectrogram_outputs(out, dir, &format!("session_rx{i}"), spec, i == 0)?;
    }
    out.write(&dir.join("intensity.csv"), io::intensity_csv(&session.intensity).as_bytes())?;
    out.write_json(&dir.join("summary.json"), &session.summary)?;
    out.write_json(&dir.join("model.json"), &model)?;
    out.write(&dir.join("detections.jsonl"), io::json_lines(&detections)?.as_bytes())?;
    out.write(&dir.join("labels.jsonl"), io::json_lines(&labels)?.as_bytes())?;
    let results = serde_json::json!({
        "session_minutes": session.intensity.duration_s() / 60.0,
        "summary_total_minutes": session.summary.total_min,
        "gestures_placed": session.truth.len(),
        "gestures_detected": detections.len(),
    });
    write_manifest(cli, 3, &cfg, results, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["wisense", "synth", "--duration", "0.5", "--seed", "3", "--out", "x"]).unwrap();
        assert_eq!(cli.seed, 3);
        assert_eq!(cli.out, PathBuf::from("x"));
        assert!(matches!(cli.command, Command::Synth(SynthArgs { duration, .. }) if duration == 0.5));
    }

    #[test]
    fn demo_case_is_range_checked() {
        assert!(Cli::try_parse_from(["wisense", "demo", "4"]).is_err());
        assert!(Cli::try_parse_from(["wisense", "demo", "2"]).is_ok());
    }

    #[test]
    fn missing_input_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let code = main_with_args(["wisense", "--out", out, "caf", "--reference", "nope.iq", "--surveillance", "nope.iq"]);
        assert_eq!(code, 2);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
