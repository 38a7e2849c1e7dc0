use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ksconf::baselines::{BaselineOutcome, LabelFrequencyModel, MeanTestModel, MeanVariant};
use ksconf::filtering::filter_suspicious;
use ksconf::harness::{EvalConfig, SourceConfig, TestKind};
use ksconf::ingest::{Format, ScoreReader};
use ksconf::kstest::{self, table};
use ksconf::model_file::ModelFile;
use ksconf::{CalibrationModel, JitterParams, QuantileSketch, ScoreSample, TestConfig, TestOutcome};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::json;

use crate::cli::*;
use crate::manifest::{FileDigest, HashingReader, HashingWriter, RunManifest, digest_file};

/// Sketch breakpoints used when `--breakpoints` is not given.
const DEFAULT_SKETCH_BREAKPOINTS: usize = 10_000;

#[derive(Debug)]
pub enum CliError {
    Core(ksconf::Error),
    Usage(String),
    ReplayMismatch(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Usage(_) => "usage",
            CliError::ReplayMismatch(_) => "replay-mismatch",
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Usage(m) | CliError::ReplayMismatch(m) => m.clone(),
        }
    }
}

impl From<ksconf::Error> for CliError {
    fn from(e: ksconf::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// A finished run: its manifest and where the manifest goes by default.
pub struct Run {
    pub manifest: RunManifest,
    pub manifest_path: Option<PathBuf>,
}

pub fn execute(command: Command, args: &[String]) -> CliResult<Run> {
    match command {
        Command::Calibrate(a) => calibrate(a, args),
        Command::Test(a) => test(a, args),
        Command::Filter(a) => filter(a, args),
        Command::Eval(a) => eval(a, args),
        Command::Thresholds(a) => thresholds(a, args),
        Command::Replay(_) => Err(CliError::Usage("replay cannot be nested".into())),
    }
}

pub fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Calibrate(_) => "calibrate",
        Command::Test(_) => "test",
        Command::Filter(_) => "filter",
        Command::Eval(_) => "eval",
        Command::Thresholds(_) => "thresholds",
        Command::Replay(_) => "replay",
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn format_of(input: &InputArgs) -> Format {
    match input.format {
        Some(f) => f.into(),
        None => Format::from_path(&input.input),
    }
}

/// Source label stored in models: the file name, so the bytes do not depend
/// on where the input lives.
fn source_label(input: &str) -> String {
    if input == "-" {
        return "stdin".into();
    }
    Path::new(input)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| input.to_string())
}

type Input = BufReader<HashingReader<Box<dyn Read>>>;

fn open_input(path: &str) -> CliResult<Input> {
    let inner: Box<dyn Read> = if path == "-" {
        Box::new(io::stdin().lock())
    } else {
        Box::new(File::open(path).map_err(|e| io_context(e, path))?)
    };
    Ok(BufReader::new(HashingReader::new(inner)))
}

fn io_context(e: io::Error, path: &str) -> CliError {
    CliError::Core(io::Error::new(e.kind(), format!("{path}: {e}")).into())
}

/// Drain what is left so the digest covers the whole input.
fn close_input(mut input: Input, path: &str) -> CliResult<FileDigest> {
    io::copy(&mut input, &mut io::sink())?;
    Ok(input.into_inner().finish(path.to_string()))
}

fn read_samples(input: &InputArgs) -> CliResult<(Vec<ScoreSample>, FileDigest)> {
    let mut reader = open_input(&input.input)?;
    let samples = ScoreReader::new(&mut reader, format_of(input)).collect::<ksconf::Result<Vec<_>>>()?;
    Ok((samples, close_input(reader, &input.input)?))
}

type Output = HashingWriter<BufWriter<Box<dyn Write>>>;

fn open_output(path: Option<&Path>) -> CliResult<Output> {
    let inner: Box<dyn Write> = match path {
        Some(p) => Box::new(File::create(p).map_err(|e| io_context(e, &p.to_string_lossy()))?),
        None => Box::new(io::stdout().lock()),
    };
    Ok(HashingWriter::new(BufWriter::new(inner)))
}

fn close_output(out: Output, path: Option<&Path>) -> CliResult<FileDigest> {
    let name = path.map_or_else(|| "-".to_string(), |p| p.to_string_lossy().into_owned());
    Ok(out.finish(name)?)
}

fn json_line<T: Serialize>(out: &mut impl Write, value: &T) -> CliResult<()> {
    serde_json::to_writer(&mut *out, value).map_err(ksconf::Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn read_model(path: &Path) -> CliResult<(ModelFile, FileDigest)> {
    let digest = digest_file(path).map_err(|e| io_context(e, &path.to_string_lossy()))?;
    Ok((ModelFile::read(path)?, digest))
}

fn calibrate(a: CalibrateArgs, args: &[String]) -> CliResult<Run> {
    let mut manifest = RunManifest::new("calibrate", args);
    let jitter = JitterParams {
        epsilon: a.jitter_eps,
        seed: a.seed,
    };
    manifest.param("input", &a.input.input);
    manifest.param("format", format!("{:?}", format_of(&a.input)).to_lowercase());
    manifest.param("family", a.family.to_possible_value().map(|v| v.get_name().to_string()));
    manifest.param("jitter_eps", a.jitter_eps);
    manifest.param("created", &a.created);
    manifest.seeds.insert("seed".into(), a.seed);

    let model = match a.family {
        Family::KsConf if a.sketch => {
            let mut sketch = QuantileSketch::new(a.compression)?;
            let mut peak = 0;
            let mut reader = open_input(&a.input.input)?;
            for sample in ScoreReader::new(&mut reader, format_of(&a.input)) {
                sketch.insert(sample?.confidence)?;
                peak = peak.max(sketch.centroids().len());
            }
            manifest.inputs.push(close_input(reader, &a.input.input)?);
            let total = sketch.total_weight() as usize;
            let b = a.breakpoints.unwrap_or(total.min(DEFAULT_SKETCH_BREAKPOINTS));
            let mut model = sketch.to_model(b, jitter)?;
            model.meta_mut().source = source_label(&a.input.input);
            manifest.param("sketch", true);
            manifest.param("compression", a.compression);
            manifest.param("breakpoints", b);
            manifest.param("rows", total);
            manifest.param("sketch_peak_centroids", peak);
            manifest.param("sketch_centroid_cap", QuantileSketch::centroid_cap(a.compression));
            ModelFile::KsConf(with_created(model, &a.created))
        }
        Family::KsConf => {
            let (samples, digest) = read_samples(&a.input)?;
            manifest.inputs.push(digest);
            let scores: Vec<f64> = samples.iter().map(|s| s.confidence).collect();
            manifest.param("sketch", false);
            manifest.param("rows", scores.len());
            let model = CalibrationModel::build_with_source(&scores, jitter, source_label(&a.input.input))?;
            ModelFile::KsConf(with_created(model, &a.created))
        }
        Family::MeanTest => {
            let (samples, digest) = read_samples(&a.input)?;
            manifest.inputs.push(digest);
            let scores: Vec<f64> = samples.iter().map(|s| s.confidence).collect();
            manifest.param("rows", scores.len());
            manifest.param("log_space", a.log_space);
            manifest.param("bootstrap_alpha", &a.bootstrap_alpha);
            manifest.param("bootstrap_m", &a.bootstrap_m);
            manifest.param("resamples", a.resamples);
            let mut model = MeanTestModel::calibrate(&scores, a.log_space)?;
            for &alpha in &a.bootstrap_alpha {
                for &m in &a.bootstrap_m {
                    for symmetric in [false, true] {
                        model.calibrate_bootstrap(&scores, m, alpha, symmetric, a.resamples, a.seed)?;
                    }
                }
            }
            ModelFile::MeanTest(model)
        }
        Family::LabelFrequency => {
            let (samples, digest) = read_samples(&a.input)?;
            manifest.inputs.push(digest);
            let labels = samples
                .iter()
                .map(|s| {
                    s.label.ok_or_else(|| {
                        ksconf::Error::InvalidParameter(format!("sample {:?} has no label", s.id))
                    })
                })
                .collect::<ksconf::Result<Vec<_>>>()?;
            let k = match a.labels {
                Some(k) => k,
                None => labels.iter().max().map_or(0, |&l| l + 1),
            };
            manifest.param("rows", labels.len());
            manifest.param("labels", k);
            ModelFile::LabelFrequency(LabelFrequencyModel::calibrate(&labels, k)?)
        }
    };

    let mut out = open_output(Some(&a.output))?;
    out.write_all(model.to_text().as_bytes())?;
    manifest.outputs.push(close_output(out, Some(&a.output))?);
    Ok(Run {
        manifest,
        manifest_path: Some(sidecar(&a.output)),
    })
}

fn with_created(mut model: CalibrationModel, created: &Option<String>) -> CalibrationModel {
    model.meta_mut().created = created.clone();
    model
}

#[derive(Serialize)]
struct WindowRecord<T> {
    window: usize,
    start: usize,
    #[serde(flatten)]
    outcome: T,
}

#[derive(Serialize)]
struct SkippedRecord {
    window: usize,
    start: usize,
    rows: usize,
    skipped: bool,
}

enum Tester {
    Ks(CalibrationModel, TestConfig),
    Mean(MeanTestModel, MeanVariant),
    Labels(LabelFrequencyModel),
}

impl Tester {
    fn run(&self, batch: &[ScoreSample], alpha: f64) -> CliResult<Outcome> {
        Ok(match self {
            Tester::Ks(model, config) => {
                let conf: Vec<f64> = batch.iter().map(|s| s.confidence).collect();
                Outcome::Ks(kstest::batch_test(model, &conf, config)?)
            }
            Tester::Mean(model, variant) => {
                let conf: Vec<f64> = batch.iter().map(|s| s.confidence).collect();
                Outcome::Baseline(model.decide(&conf, alpha, batch.len(), *variant)?)
            }
            Tester::Labels(model) => {
                let labels = batch
                    .iter()
                    .map(|s| {
                        s.label.ok_or_else(|| {
                            ksconf::Error::InvalidParameter(format!("sample {:?} has no label", s.id))
                        })
                    })
                    .collect::<ksconf::Result<Vec<_>>>()?;
                Outcome::Baseline(model.chi2_test(&labels, alpha)?)
            }
        })
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum Outcome {
    Ks(TestOutcome),
    Baseline(BaselineOutcome),
}

fn mean_variant(name: &str, log_space: bool) -> CliResult<MeanVariant> {
    let bad = || {
        CliError::Core(ksconf::Error::InvalidParameter(format!(
            "variant {name:?} does not match a {}mean-test model",
            if log_space { "log-space " } else { "" }
        )))
    };
    match name.parse::<TestKind>()? {
        TestKind::Mean { variant, log_space: l } if !l || log_space => Ok(variant),
        _ => Err(bad()),
    }
}

fn test(a: TestArgs, args: &[String]) -> CliResult<Run> {
    let mut manifest = RunManifest::new("test", args);
    let config = TestConfig::new(a.alpha, a.batch_size, a.threshold_source)?;
    let (model, model_digest) = read_model(&a.model)?;
    manifest.inputs.push(model_digest);
    manifest.param("model", a.model.to_string_lossy());
    manifest.param("family", model.family());
    manifest.param("input", &a.input.input);
    manifest.param("format", format!("{:?}", format_of(&a.input)).to_lowercase());
    manifest.param("batch_size", a.batch_size);
    manifest.param("alpha", a.alpha);
    manifest.param("threshold_source", a.threshold_source.to_string());
    manifest.param("window_policy", "consecutive");

    let tester = match model {
        ModelFile::KsConf(m) => {
            // Resolve once so a bad source fails before any input is read.
            let (_, used) = kstest::resolve_threshold(a.alpha, a.batch_size, a.threshold_source)?;
            manifest.param("threshold_source_used", used.to_string());
            Tester::Ks(m, config)
        }
        ModelFile::MeanTest(m) => {
            let variant = mean_variant(&a.variant, m.log_space)?;
            manifest.param("variant", variant.name(m.log_space));
            Tester::Mean(m, variant)
        }
        ModelFile::LabelFrequency(m) => Tester::Labels(m),
    };

    let mut reader = open_input(&a.input.input)?;
    let mut out = open_output(a.output.as_deref())?;
    let mut window = Vec::with_capacity(a.batch_size);
    let (mut index, mut start, mut rows) = (0, 0, 0);
    for sample in ScoreReader::new(&mut reader, format_of(&a.input)) {
        window.push(sample?);
        rows += 1;
        if window.len() == a.batch_size {
            let outcome = tester.run(&window, a.alpha)?;
            json_line(&mut out, &WindowRecord { window: index, start, outcome })?;
            window.clear();
            index += 1;
            start = rows;
        }
    }
    if !window.is_empty() {
        json_line(
            &mut out,
            &SkippedRecord {
                window: index,
                start,
                rows: window.len(),
                skipped: true,
            },
        )?;
    }
    manifest.inputs.push(close_input(reader, &a.input.input)?);
    manifest.param("rows", rows);
    manifest.param("windows", index);
    manifest.outputs.push(close_output(out, a.output.as_deref())?);
    Ok(Run {
        manifest,
        manifest_path: a.output.as_deref().map(sidecar),
    })
}

#[derive(Serialize)]
struct FilterRecord<'a> {
    id: &'a str,
    confidence: f64,
    uniformized: f64,
    bin: usize,
    bin_index: usize,
    bin_count: usize,
    bin_total: usize,
    estimated_enrichment: f64,
}

fn filter(a: FilterArgs, args: &[String]) -> CliResult<Run> {
    let mut manifest = RunManifest::new("filter", args);
    let (model, model_digest) = read_model(&a.model)?;
    manifest.inputs.push(model_digest);
    let model = model.into_ks_conf()?;
    let (batch, digest) = read_samples(&a.input)?;
    manifest.inputs.push(digest);
    manifest.param("model", a.model.to_string_lossy());
    manifest.param("input", &a.input.input);
    manifest.param("w", a.w);
    manifest.param("batch_size", batch.len());
    manifest.seeds.insert("seed".into(), a.seed);

    let result = filter_suspicious(&model, &batch, a.w, a.seed)?;
    let mut out = open_output(a.output.as_deref())?;
    for s in &result.selected {
        json_line(
            &mut out,
            &FilterRecord {
                id: &s.id,
                confidence: s.confidence,
                uniformized: s.uniformized,
                bin: s.bin,
                bin_index: result.bin_index,
                bin_count: result.bin_count,
                bin_total: result.bin_total,
                estimated_enrichment: result.estimated_enrichment,
            },
        )?;
    }
    manifest.outputs.push(close_output(out, a.output.as_deref())?);
    Ok(Run {
        manifest,
        manifest_path: a.output.as_deref().map(sidecar),
    })
}

fn eval(a: EvalArgs, args: &[String]) -> CliResult<Run> {
    let mut manifest = RunManifest::new("eval", args);
    let config_name = a.config.to_string_lossy().into_owned();
    let text = std::fs::read_to_string(&a.config).map_err(|e| io_context(e, &config_name))?;
    manifest.inputs.push(digest_file(&a.config)?);
    let config = EvalConfig::from_toml(&text)?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    for source in config.sources.values() {
        if let SourceConfig::File { path } = source {
            let full = base.join(path);
            manifest.inputs.push(digest_file(&full).map_err(|e| io_context(e, &full.to_string_lossy()))?);
        }
    }
    manifest.param("config", &config_name);
    manifest.param("resolved", serde_json::to_value(&config).map_err(ksconf::Error::from)?);
    manifest.seeds.insert("seed".into(), config.seed);

    let report = config.run(base)?;
    let mut out = open_output(a.output.as_deref())?;
    out.write_all(report.to_csv().as_bytes())?;
    manifest.outputs.push(close_output(out, a.output.as_deref())?);
    if let Some(long) = &a.long {
        let mut out = open_output(Some(long))?;
        out.write_all(report.to_long_csv().as_bytes())?;
        manifest.outputs.push(close_output(out, Some(long))?);
    }
    Ok(Run {
        manifest,
        manifest_path: a.output.as_deref().map(sidecar),
    })
}

fn thresholds(a: ThresholdsArgs, args: &[String]) -> CliResult<Run> {
    let mut manifest = RunManifest::new("thresholds", args);
    manifest.param("alpha", a.alpha);
    manifest.param("batch_size", a.batch_size);
    let approximate = kstest::approximate_threshold(a.alpha, a.batch_size)?;
    let tabulated = match table::lookup(a.alpha, a.batch_size) {
        Some(e) => json!({ "value": e.theta, "printed": e.printed }),
        None => {
            let e = ksconf::Error::NotTabulated {
                alpha: a.alpha,
                m: a.batch_size,
            };
            json!({ "error": { "kind": e.kind(), "message": e.to_string() } })
        }
    };
    let record = json!({
        "alpha": a.alpha,
        "m": a.batch_size,
        "tabulated": tabulated,
        "approximate": approximate,
    });
    let mut out = open_output(a.output.as_deref())?;
    json_line(&mut out, &record)?;
    manifest.outputs.push(close_output(out, a.output.as_deref())?);
    Ok(Run {
        manifest,
        manifest_path: a.output.as_deref().map(sidecar),
    })
}

/// Compare a replayed run with the recorded one.
pub fn compare(recorded: &RunManifest, replayed: &RunManifest) -> CliResult<()> {
    if recorded.version != replayed.version {
        return Err(CliError::ReplayMismatch(format!(
            "recorded with version {}, replayed with {}",
            recorded.version, replayed.version
        )));
    }
    if recorded.inputs != replayed.inputs {
        return Err(CliError::ReplayMismatch("inputs differ from the recorded digests".into()));
    }
    for (old, new) in recorded.outputs.iter().zip(&replayed.outputs) {
        if old != new {
            return Err(CliError::ReplayMismatch(format!(
                "output {} differs: recorded {}, replayed {}",
                old.path, old.sha256, new.sha256
            )));
        }
    }
    if recorded.outputs.len() != replayed.outputs.len() {
        return Err(CliError::ReplayMismatch("number of outputs differs".into()));
    }
    Ok(())
}

pub fn uses_stdin(manifest: &RunManifest) -> bool {
    manifest.inputs.iter().any(|d| d.path == "-")
}
