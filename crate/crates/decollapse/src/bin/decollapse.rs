use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use decollapse::cssd::{det_curve, detect_utterance, DetectionReport};
use decollapse::pipeline::{
    generate_utterance, prepare, save_sidecar, PipelineConfig, UtteranceReport,
};
use decollapse::sampler::{
    build_corpus, load_weights, reference_waveform, simulate_generate, AuxTrack, CollapseScenario,
    CorpusSpec, SampleSource, SimulatedSampler, WnSampler,
};
use decollapse::signal::{wav_read, wav_write};

/// Collapse-aware autoregressive waveform generation: constrain predicted
/// sample distributions with an LPC-derived Gaussian mask and regenerate
/// segments whose envelope departs from a collapse-free reference.
#[derive(Parser)]
#[command(name = "decollapse", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON config file; missing fields take the documented defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the Hilbert-transform rectifier for envelope extraction.
    #[arg(long)]
    hilbert: bool,
    /// Segment flagging threshold override.
    #[arg(long)]
    threshold: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            None => PipelineConfig::default(),
        };
        if self.hilbert {
            cfg.hilbert = true;
        }
        if let Some(t) = self.threshold {
            cfg.threshold = t;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a reference waveform: LPC track + envelope sidecar JSON.
    Analyze {
        /// Reference WAV (mono 16-bit PCM).
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Output sidecar path.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score a generated utterance against a reference, segment by segment.
    Detect {
        /// Generated WAV.
        #[arg(long)]
        gen: PathBuf,
        /// Collapse-free reference WAV.
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Utterance id used in the report (defaults to the gen file stem).
        #[arg(long)]
        id: Option<String>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Generate with collapse detection and escalating regeneration.
    Generate {
        /// WaveNet weight file (requires --aux).
        #[arg(long, conflicts_with = "simulate", required_unless_present = "simulate")]
        model: Option<PathBuf>,
        /// Conditioning track for --model.
        #[arg(long, requires = "model")]
        aux: Option<PathBuf>,
        /// Collapse scenario JSON driving the simulator instead of a model.
        #[arg(long)]
        simulate: Option<PathBuf>,
        /// Collapse-free reference WAV.
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Output WAV.
        #[arg(long)]
        out: PathBuf,
        /// Write the per-segment generation report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Base seed for the draw streams.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of samples to generate (default: as much as the inputs cover).
        #[arg(long)]
        n_samples: Option<usize>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Expand a corpus spec into labeled gen/ref WAV pairs plus labels.csv.
    Simulate {
        /// Corpus spec JSON (counts, ranges, seed).
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// DET curve and EER from a utterance_id,score,label CSV.
    Det {
        /// Input scores CSV.
        #[arg(long)]
        scores: PathBuf,
        /// Output CSV: threshold,far,frr rows plus a final eer line.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Analyze { reference, out, config } => analyze(&reference, &out, &config),
        Command::Detect { gen, reference, id, out, config } => {
            detect(&gen, &reference, id, out.as_deref(), &config)
        }
        Command::Generate {
            model,
            aux,
            simulate,
            reference,
            out,
            report,
            seed,
            n_samples,
            config,
        } => generate(
            model.as_deref(),
            aux.as_deref(),
            simulate.as_deref(),
            &reference,
            &out,
            report.as_deref(),
            seed,
            n_samples,
            &config,
        ),
        Command::Simulate { scenario, out } => simulate_corpus(&scenario, &out),
        Command::Det { scores, out } => det(&scores, &out),
    }
}

fn analyze(reference: &Path, out: &Path, config: &ConfigArgs) -> Result<()> {
    let cfg = config.resolve()?;
    let wave = wav_read(reference).with_context(|| format!("reading {}", reference.display()))?;
    let grid = cfg.grid(wave.sample_rate, wave.len())?;
    let prepared = prepare(&wave, &grid, cfg.lpc_order, &cfg.envelope_config())?;
    save_sidecar(&prepared, out)?;
    eprintln!(
        "analyzed {} samples: {} LPC frames (order {}), envelope written to {}",
        wave.len(),
        prepared.lpc_track.frames.len(),
        prepared.lpc_track.order,
        out.display()
    );
    Ok(())
}

fn detect(
    gen: &Path,
    reference: &Path,
    id: Option<String>,
    out: Option<&Path>,
    config: &ConfigArgs,
) -> Result<()> {
    let cfg = config.resolve()?;
    let gen_wave = wav_read(gen).with_context(|| format!("reading {}", gen.display()))?;
    let ref_wave =
        wav_read(reference).with_context(|| format!("reading {}", reference.display()))?;
    let verdicts = detect_utterance(&gen_wave, &ref_wave, &cfg.detector_config())?;
    let id = id.unwrap_or_else(|| {
        gen.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "utterance".into())
    });
    let report = DetectionReport::from_verdicts(id, verdicts);
    let line = serde_json::to_string(&report)?;
    match out {
        Some(path) => fs::write(path, format!("{line}\n"))?,
        None => println!("{line}"),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn generate(
    model: Option<&Path>,
    aux: Option<&Path>,
    simulate: Option<&Path>,
    reference: &Path,
    out: &Path,
    report_path: Option<&Path>,
    seed: u64,
    n_samples: Option<usize>,
    config: &ConfigArgs,
) -> Result<()> {
    let cfg = config.resolve()?;
    let ref_wave =
        wav_read(reference).with_context(|| format!("reading {}", reference.display()))?;

    let (waveform, report): (_, UtteranceReport) = match (model, simulate) {
        (Some(model_path), None) => {
            let aux_path = aux.context("--model requires --aux")?;
            let model = load_weights(model_path)
                .with_context(|| format!("loading weights {}", model_path.display()))?;
            let aux = AuxTrack::load(aux_path)
                .with_context(|| format!("loading aux track {}", aux_path.display()))?;
            let covered = aux.covered_samples().min(ref_wave.len());
            let n = n_samples.unwrap_or(covered);
            if n > covered {
                bail!("requested {n} samples but aux/reference cover only {covered}");
            }
            let mut sampler = WnSampler::new(&model, &aux)?;
            run_pipeline(&mut sampler, &ref_wave, n, &cfg, seed, out)?
        }
        (None, Some(scenario_path)) => {
            let text = fs::read_to_string(scenario_path)
                .with_context(|| format!("reading scenario {}", scenario_path.display()))?;
            let scenario = CollapseScenario::from_json(&text)?;
            let covered = scenario.n_samples.min(ref_wave.len());
            let n = n_samples.unwrap_or(covered);
            if n > covered {
                bail!("requested {n} samples but scenario/reference cover only {covered}");
            }
            let mut sampler = SimulatedSampler::new(scenario.clone(), scenario.seed)?;
            run_pipeline(&mut sampler, &ref_wave, n, &cfg, seed, out)?
        }
        _ => bail!("exactly one of --model or --simulate must be given"),
    };

    if let Some(path) = report_path {
        fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    eprintln!(
        "wrote {} samples to {} ({} segments, {} regenerations, {} still flagged)",
        waveform.len(),
        out.display(),
        report.totals.n_segments,
        report.totals.regenerations,
        report.totals.final_flagged
    );
    Ok(())
}

fn run_pipeline(
    sampler: &mut dyn SampleSource,
    ref_wave: &decollapse::Waveform,
    n: usize,
    cfg: &PipelineConfig,
    seed: u64,
    out: &Path,
) -> Result<(decollapse::Waveform, UtteranceReport)> {
    let id = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "utterance".into());
    let (waveform, report) = generate_utterance(sampler, ref_wave, n, cfg, seed, &id)?;
    wav_write(out, &waveform).with_context(|| format!("writing {}", out.display()))?;
    Ok((waveform, report))
}

fn simulate_corpus(scenario: &Path, out_dir: &Path) -> Result<()> {
    let text = fs::read_to_string(scenario)
        .with_context(|| format!("reading corpus spec {}", scenario.display()))?;
    let spec: CorpusSpec =
        serde_json::from_str(&text).with_context(|| "parsing corpus spec JSON")?;
    let corpus = build_corpus(&spec)?;
    fs::create_dir_all(out_dir)?;

    let mut labels = String::from("utterance_id,label\n");
    for item in &corpus {
        let reference = reference_waveform(&item.scenario);
        let generated = simulate_generate(&item.scenario, item.scenario.seed)?;
        wav_write(out_dir.join(format!("{}.ref.wav", item.id)), &reference)?;
        wav_write(out_dir.join(format!("{}.gen.wav", item.id)), &generated)?;
        fs::write(
            out_dir.join(format!("{}.scenario.json", item.id)),
            item.scenario.to_json(),
        )?;
        labels.push_str(&format!("{},{}\n", item.id, item.label));
    }
    fs::write(out_dir.join("labels.csv"), labels)?;
    eprintln!("wrote {} labeled utterance pairs to {}", corpus.len(), out_dir.display());
    Ok(())
}

fn det(scores_path: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(scores_path)
        .with_context(|| format!("reading {}", scores_path.display()))?;
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.to_lowercase().starts_with("utterance_id")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            bail!("line {}: expected utterance_id,score,label", lineno + 1);
        }
        let score: f64 = fields[1]
            .trim()
            .parse()
            .with_context(|| format!("line {}: bad score {:?}", lineno + 1, fields[1]))?;
        let label = match fields[2].trim().to_lowercase().as_str() {
            "1" | "true" | "collapsed" | "type1" | "type2" => true,
            "0" | "false" | "clean" => false,
            other => bail!("line {}: bad label {other:?}", lineno + 1),
        };
        scores.push(score);
        labels.push(label);
    }
    let curve = det_curve(&scores, &labels)?;
    let mut csv = String::from("threshold,far,frr\n");
    for p in &curve.points {
        csv.push_str(&format!("{},{},{}\n", p.threshold, p.far, p.frr));
    }
    csv.push_str(&format!("eer,{},{}\n", curve.eer, curve.eer_threshold));
    fs::write(out, csv)?;
    eprintln!(
        "{} scores: EER = {:.4} at threshold {:.6}",
        scores.len(),
        curve.eer,
        curve.eer_threshold
    );
    Ok(())
}
