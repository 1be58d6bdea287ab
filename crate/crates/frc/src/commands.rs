//! Run orchestration behind the CLI: config loading, backend construction,
//! and the `analyze` / `perturb` / `evaluate` / `transfer` commands.
//!
//! Commands keep going past individual record failures (model backends fail
//! sporadically); failures are collected into the returned summary so the
//! CLI can exit with the partial-failure code while the rest of the batch
//! survives. Every command writes a config snapshot next to its outputs.

use crate::backend::{Backend, BackendConfig, BackendError, HttpBackend, Lexicon, LexiconBackend};
use crate::dataset::{self, DatasetRecord, DatasetError};
use crate::eval::{
    classify_and_split, f1_score, monotonicity_score, robustness_score, Bucket, EvalError,
    EvalPair, EvalReport, MethodReport,
};
use crate::fuzzy::ClassSet;
use crate::perturb::{
    perturb_monotonic, perturb_robust, DeterministicGenerator, Generator, LlmGenerator,
    PerturbError, PerturbKind, PerturbedRecord, RobustLevel, SynonymTable,
};
use crate::pipeline::{self, CotTrace, FrcTrace, KnowledgeBundle, PipelineError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

const ENDPOINT_ENV: &str = "FRC_ENDPOINT";

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Lexicon(#[from] crate::backend::LexiconError),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Reasoning method under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Frc,
    Cot,
    Dp,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Frc => "frc",
            Method::Cot => "cot",
            Method::Dp => "dp",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "frc" => Ok(Method::Frc),
            "cot" => Ok(Method::Cot),
            "dp" => Ok(Method::Dp),
            other => Err(format!("unknown method `{other}` (expected frc|cot|dp)")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Lexicon,
    Http,
}

impl std::str::FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lexicon" => Ok(BackendKind::Lexicon),
            "http" => Ok(BackendKind::Http),
            other => Err(format!("unknown backend `{other}` (expected http|lexicon)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub method: Method,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub ambiguity_threshold: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            method: Method::Frc,
            seed: 0,
            out_dir: PathBuf::from("runs/out"),
            ambiguity_threshold: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassesSection {
    pub names: Vec<String>,
    pub includes_other: bool,
}

impl Default for ClassesSection {
    fn default() -> Self {
        Self {
            names: vec!["positive".to_string(), "negative".to_string()],
            includes_other: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendSection {
    pub kind: BackendKind,
    pub lexicon_path: Option<PathBuf>,
    pub endpoint_url: Option<String>,
    pub model_name: Option<String>,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_secs: u64,
    pub concurrency_limit: usize,
}

impl Default for BackendSection {
    fn default() -> Self {
        Self {
            kind: BackendKind::Lexicon,
            lexicon_path: None,
            endpoint_url: None,
            model_name: None,
            temperature: 0.0,
            max_retries: 3,
            timeout_secs: 30,
            concurrency_limit: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSection {
    pub dataset: Option<PathBuf>,
    pub perturbed: Option<PathBuf>,
    pub teacher_traces: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbSection {
    pub kinds: Vec<String>,
    pub per_record: usize,
    pub synonyms_path: Option<PathBuf>,
}

impl Default for PerturbSection {
    fn default() -> Self {
        Self {
            kinds: vec![
                "robust_low".to_string(),
                "robust_medium".to_string(),
                "robust_high".to_string(),
                "monotonic".to_string(),
            ],
            per_record: 1,
            synonyms_path: None,
        }
    }
}

/// Complete run configuration, mirroring the TOML config file sections.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub run: RunSection,
    pub classes: ClassesSection,
    pub backend: BackendSection,
    pub data: DataSection,
    pub perturb: PerturbSection,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, CommandError> {
        toml::from_str(s).map_err(|e| CommandError::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, CommandError> {
        let raw = std::fs::read_to_string(path.as_ref()).map_err(|e| CommandError::Io {
            path: path.as_ref().display().to_string(),
            source: e,
        })?;
        let config = Self::from_toml_str(&raw)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks that every referenced path exists and the class set is sound.
    pub fn validate(&self) -> Result<(), CommandError> {
        for (name, path) in [
            ("backend.lexicon_path", &self.backend.lexicon_path),
            ("data.dataset", &self.data.dataset),
            ("data.perturbed", &self.data.perturbed),
            ("data.teacher_traces", &self.data.teacher_traces),
            ("perturb.synonyms_path", &self.perturb.synonyms_path),
        ] {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(CommandError::Config(format!(
                        "{name} does not exist: {}",
                        path.display()
                    )));
                }
            }
        }
        if self.backend.kind == BackendKind::Lexicon && self.backend.lexicon_path.is_none() {
            return Err(CommandError::Config(
                "backend.kind = \"lexicon\" requires backend.lexicon_path".to_string(),
            ));
        }
        if self.backend.kind == BackendKind::Http && self.backend.endpoint_url.is_none()
            && std::env::var(ENDPOINT_ENV).is_err()
        {
            return Err(CommandError::Config(
                "backend.kind = \"http\" requires backend.endpoint_url or FRC_ENDPOINT".to_string(),
            ));
        }
        self.class_set().map(|_| ())
    }

    pub fn class_set(&self) -> Result<ClassSet, CommandError> {
        ClassSet::new(self.classes.names.clone(), self.classes.includes_other)
            .map_err(|e| CommandError::Config(e.to_string()))
    }

    /// Builds the configured backend. `FRC_ENDPOINT` overrides the config's
    /// endpoint URL for HTTP backends.
    pub fn build_backend(&self) -> Result<Box<dyn Backend>, CommandError> {
        match self.backend.kind {
            BackendKind::Lexicon => {
                let path = self.backend.lexicon_path.as_ref().ok_or_else(|| {
                    CommandError::Config("lexicon backend needs backend.lexicon_path".to_string())
                })?;
                Ok(Box::new(LexiconBackend::from_path(path)?))
            }
            BackendKind::Http => Ok(Box::new(HttpBackend::new(self.http_backend_config()?)?)),
        }
    }

    fn http_backend_config(&self) -> Result<BackendConfig, CommandError> {
        let endpoint_url = std::env::var(ENDPOINT_ENV)
            .ok()
            .or_else(|| self.backend.endpoint_url.clone())
            .ok_or_else(|| {
                CommandError::Config("no endpoint_url configured for http backend".to_string())
            })?;
        Ok(BackendConfig {
            endpoint_url,
            model_name: self
                .backend
                .model_name
                .clone()
                .unwrap_or_else(|| "default".to_string()),
            temperature: self.backend.temperature,
            max_retries: self.backend.max_retries,
            timeout_secs: self.backend.timeout_secs,
            concurrency_limit: self.backend.concurrency_limit,
        })
    }

    fn lexicon(&self) -> Result<Lexicon, CommandError> {
        let path = self.backend.lexicon_path.as_ref().ok_or_else(|| {
            CommandError::Config("this command needs backend.lexicon_path".to_string())
        })?;
        Ok(Lexicon::from_path(path)?)
    }

    /// Writes the effective configuration next to the run outputs.
    pub fn write_snapshot(&self, out_dir: &Path) -> Result<PathBuf, CommandError> {
        std::fs::create_dir_all(out_dir).map_err(|e| CommandError::Io {
            path: out_dir.display().to_string(),
            source: e,
        })?;
        let path = out_dir.join("config.snapshot.toml");
        std::fs::write(&path, self.to_toml_string()).map_err(|e| CommandError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Ok(path)
    }
}

/// One record that could not be processed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureNote {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeSummary {
    pub total: usize,
    pub succeeded: usize,
    pub failures: Vec<FailureNote>,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub id: String,
    pub text: String,
    pub label: String,
}

fn dataset_records(config: &RunConfig) -> Result<Vec<DatasetRecord>, CommandError> {
    let path = config.data.dataset.as_ref().ok_or_else(|| {
        CommandError::Config("data.dataset is required for this command".to_string())
    })?;
    Ok(dataset::read_jsonl(path)?)
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn fingerprint_paths(paths: &[&Path]) -> String {
    let mut hasher = Sha256::new();
    for path in paths {
        if let Ok(bytes) = std::fs::read(path) {
            hasher.update(path.display().to_string().as_bytes());
            hasher.update(&bytes);
        }
    }
    let digest = hasher.finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

/// Runs the configured method over a single text or the configured dataset,
/// writing traces (or labels, for direct prompting) to the output directory.
pub fn analyze(config: &RunConfig, single_text: Option<&str>) -> Result<AnalyzeSummary, CommandError> {
    let classes = config.class_set()?;
    let backend = config.build_backend()?;
    let out_dir = &config.run.out_dir;
    config.write_snapshot(out_dir)?;

    let records: Vec<DatasetRecord> = match single_text {
        Some(text) => vec![DatasetRecord {
            id: "text-0".to_string(),
            text: text.to_string(),
            label: None,
            lang: None,
        }],
        None => dataset_records(config)?,
    };

    let concurrency = backend.concurrency_limit();
    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    let succeeded;

    match config.run.method {
        Method::Frc => {
            let results = pipeline::run_parallel(&records, concurrency, |record| {
                pipeline::run_frc(&record.text, &classes, backend.as_ref(), None)
            });
            let mut traces: Vec<FrcTrace> = Vec::new();
            for (record, result) in records.iter().zip(results) {
                match result {
                    Ok(trace) => traces.push(trace),
                    Err(e) => failures.push(FailureNote {
                        id: record.id.clone(),
                        error: e.to_string(),
                    }),
                }
            }
            succeeded = traces.len();
            let path = out_dir.join("traces.frc.jsonl");
            dataset::write_jsonl(&path, traces)?;
            outputs.push(path);
        }
        Method::Cot => {
            let results = pipeline::run_parallel(&records, concurrency, |record| {
                pipeline::run_cot(&record.text, &classes, backend.as_ref())
            });
            let mut traces: Vec<CotTrace> = Vec::new();
            for (record, result) in records.iter().zip(results) {
                match result {
                    Ok(trace) => traces.push(trace),
                    Err(e) => failures.push(FailureNote {
                        id: record.id.clone(),
                        error: e.to_string(),
                    }),
                }
            }
            succeeded = traces.len();
            let path = out_dir.join("traces.cot.jsonl");
            dataset::write_jsonl(&path, traces)?;
            outputs.push(path);
        }
        Method::Dp => {
            let results = pipeline::run_parallel(&records, concurrency, |record| {
                pipeline::run_dp(&record.text, &classes, backend.as_ref())
            });
            let mut labeled: Vec<LabeledRecord> = Vec::new();
            for (record, result) in records.iter().zip(results) {
                match result {
                    Ok(label) => {
                        labeled.push(LabeledRecord {
                            id: record.id.clone(),
                            text: record.text.clone(),
                            label,
                        });
                    }
                    Err(e) => failures.push(FailureNote {
                        id: record.id.clone(),
                        error: e.to_string(),
                    }),
                }
            }
            succeeded = labeled.len();
            let path = out_dir.join("labels.dp.jsonl");
            dataset::write_jsonl(&path, labeled)?;
            outputs.push(path);
        }
    }

    if !failures.is_empty() {
        let path = out_dir.join("failures.jsonl");
        dataset::write_jsonl(&path, failures.clone())?;
        outputs.push(path);
    }
    Ok(AnalyzeSummary {
        total: records.len(),
        succeeded,
        failures,
        outputs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbSummary {
    pub records_in: usize,
    pub records_out: usize,
    pub skipped: usize,
    pub failures: Vec<FailureNote>,
    pub output: PathBuf,
}

fn parse_kinds(kinds: &[String]) -> Result<Vec<PerturbKind>, CommandError> {
    kinds
        .iter()
        .map(|k| match k.as_str() {
            "robust_low" => Ok(PerturbKind::RobustLow),
            "robust_medium" => Ok(PerturbKind::RobustMedium),
            "robust_high" => Ok(PerturbKind::RobustHigh),
            "monotonic" => Ok(PerturbKind::Monotonic),
            other => Err(CommandError::Config(format!("unknown perturbation kind `{other}`"))),
        })
        .collect()
}

/// Generates the configured perturbation kinds for every dataset record.
/// Records without a sentiment-bearing token for a monotonic target are
/// skipped, not failed.
pub fn perturb(config: &RunConfig) -> Result<PerturbSummary, CommandError> {
    let classes = config.class_set()?;
    let out_dir = &config.run.out_dir;
    config.write_snapshot(out_dir)?;
    let records = dataset_records(config)?;
    let kinds = parse_kinds(&config.perturb.kinds)?;

    let generator: Box<dyn Generator> = match config.backend.kind {
        BackendKind::Lexicon => {
            let synonyms = match &config.perturb.synonyms_path {
                Some(path) => SynonymTable::from_path(path)?,
                None => SynonymTable::default(),
            };
            Box::new(DeterministicGenerator::new(
                synonyms,
                config.lexicon()?,
                classes.clone(),
                config.run.seed,
            )?)
        }
        BackendKind::Http => Box::new(LlmGenerator::new(
            HttpBackend::new(config.http_backend_config()?)?,
            classes.clone(),
        )),
    };

    let mut out: Vec<PerturbedRecord> = Vec::new();
    let mut failures = Vec::new();
    let mut skipped = 0usize;
    for record in &records {
        for kind in &kinds {
            match kind {
                PerturbKind::RobustLow | PerturbKind::RobustMedium | PerturbKind::RobustHigh => {
                    let level = match kind {
                        PerturbKind::RobustLow => RobustLevel::Low,
                        PerturbKind::RobustMedium => RobustLevel::Medium,
                        _ => RobustLevel::High,
                    };
                    for _ in 0..config.perturb.per_record.max(1) {
                        match perturb_robust(&record.id, &record.text, level, generator.as_ref()) {
                            Ok(p) => out.push(p),
                            Err(PerturbError::NoSwapCandidates) => skipped += 1,
                            Err(e) => failures.push(FailureNote {
                                id: record.id.clone(),
                                error: e.to_string(),
                            }),
                        }
                    }
                }
                PerturbKind::Monotonic => {
                    for class in classes.classes() {
                        for direction in [1i8, -1] {
                            match perturb_monotonic(
                                &record.id,
                                &record.text,
                                class.name(),
                                direction,
                                generator.as_ref(),
                            ) {
                                Ok(p) => out.push(p),
                                Err(PerturbError::NoSentimentToken) => skipped += 1,
                                Err(e) => failures.push(FailureNote {
                                    id: record.id.clone(),
                                    error: e.to_string(),
                                }),
                            }
                        }
                    }
                }
            }
        }
    }

    let output = out_dir.join("perturbed.jsonl");
    dataset::write_jsonl(&output, out.iter())?;
    Ok(PerturbSummary {
        records_in: records.len(),
        records_out: out.len(),
        skipped,
        failures,
        output,
    })
}

/// Per-text membership cache so evaluation runs each unique text once per
/// method.
struct MembershipCache<'a> {
    backend: &'a dyn Backend,
    classes: &'a ClassSet,
    frc: BTreeMap<String, Vec<f64>>,
    cot: BTreeMap<String, Vec<f64>>,
}

impl<'a> MembershipCache<'a> {
    fn new(backend: &'a dyn Backend, classes: &'a ClassSet) -> Self {
        Self {
            backend,
            classes,
            frc: BTreeMap::new(),
            cot: BTreeMap::new(),
        }
    }

    fn memberships(&mut self, method: Method, text: &str) -> Result<Vec<f64>, CommandError> {
        let cache = match method {
            Method::Frc => &mut self.frc,
            Method::Cot => &mut self.cot,
            Method::Dp => {
                return Err(CommandError::Config(
                    "direct prompting has no membership vector".to_string(),
                ))
            }
        };
        if let Some(hit) = cache.get(text) {
            return Ok(hit.clone());
        }
        let values = match method {
            Method::Frc => pipeline::run_frc(text, self.classes, self.backend, None)?
                .fused
                .values()
                .to_vec(),
            Method::Cot => pipeline::run_cot(text, self.classes, self.backend)?.probabilities,
            Method::Dp => unreachable!(),
        };
        cache.insert(text.to_string(), values.clone());
        Ok(values)
    }
}

#[derive(Debug)]
pub struct EvaluateOutcome {
    pub report: EvalReport,
    pub failures: Vec<FailureNote>,
    pub report_path: PathBuf,
}

/// Evaluates the given methods on the configured dataset and, when present,
/// the perturbed set. Emits `report.json` in the output directory; the
/// returned report renders the comparison table.
///
/// The clear/ambiguous split is computed from the fuzzy-chain memberships
/// when `frc` is among the methods (every row then shares the same buckets);
/// otherwise each method with a vector output buckets itself, and direct
/// prompting reports only the overall F1.
pub fn evaluate(config: &RunConfig, methods: &[Method]) -> Result<EvaluateOutcome, CommandError> {
    let classes = config.class_set()?;
    let backend = config.build_backend()?;
    let out_dir = &config.run.out_dir;
    config.write_snapshot(out_dir)?;
    let records = dataset_records(config)?;
    let perturbed: Vec<PerturbedRecord> = match &config.data.perturbed {
        Some(path) => dataset::read_jsonl(path)?,
        None => Vec::new(),
    };
    let threshold = config.run.ambiguity_threshold;
    let binary = classes.len() == 2;

    let mut cache = MembershipCache::new(backend.as_ref(), &classes);
    let mut failures: Vec<FailureNote> = Vec::new();

    // membership vectors for every original record, per vector method
    let mut vectors: BTreeMap<Method, Vec<Option<Vec<f64>>>> = BTreeMap::new();
    for &method in methods {
        if method == Method::Dp {
            continue;
        }
        let mut column = Vec::with_capacity(records.len());
        for record in &records {
            match cache.memberships(method, &record.text) {
                Ok(v) => column.push(Some(v)),
                Err(e) => {
                    failures.push(FailureNote {
                        id: record.id.clone(),
                        error: format!("{method}: {e}"),
                    });
                    column.push(None);
                }
            }
        }
        vectors.insert(method, column);
    }

    // shared buckets from the fuzzy chain when it participates
    let shared_buckets: Option<Vec<Option<Bucket>>> = vectors.get(&Method::Frc).map(|column| {
        column
            .iter()
            .map(|v| {
                v.as_ref().and_then(|values| {
                    binary
                        .then(|| {
                            classify_and_split(
                                &crate::fuzzy::MembershipVector::clamped(values.clone()),
                                threshold,
                            )
                            .ok()
                            .map(|(_, bucket)| bucket)
                        })
                        .flatten()
                })
            })
            .collect()
    });

    let mut report_methods: BTreeMap<String, MethodReport> = BTreeMap::new();
    for &method in methods {
        let mut entry = MethodReport::default();

        // predictions for F1
        let predictions: Vec<Option<String>> = match method {
            Method::Dp => records
                .iter()
                .map(|record| {
                    match pipeline::run_dp(&record.text, &classes, backend.as_ref()) {
                        Ok(label) => Some(label),
                        Err(e) => {
                            failures.push(FailureNote {
                                id: record.id.clone(),
                                error: format!("dp: {e}"),
                            });
                            None
                        }
                    }
                })
                .collect(),
            _ => vectors[&method]
                .iter()
                .map(|v| {
                    v.as_ref().and_then(|values| {
                        if binary {
                            classify_and_split(
                                &crate::fuzzy::MembershipVector::clamped(values.clone()),
                                threshold,
                            )
                            .ok()
                            .and_then(|(label, _)| label.map(|i| classes.names()[i].clone()))
                        } else {
                            // argmax labeling without the binary diff rule
                            values
                                .iter()
                                .enumerate()
                                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                                .map(|(i, _)| classes.names()[i].clone())
                        }
                    })
                })
                .collect(),
        };

        // buckets: shared from the fuzzy chain, else the method's own
        let buckets: Vec<Option<Bucket>> = if let Some(shared) = &shared_buckets {
            shared.clone()
        } else if method != Method::Dp && binary {
            vectors[&method]
                .iter()
                .map(|v| {
                    v.as_ref().and_then(|values| {
                        classify_and_split(
                            &crate::fuzzy::MembershipVector::clamped(values.clone()),
                            threshold,
                        )
                        .ok()
                        .map(|(_, bucket)| bucket)
                    })
                })
                .collect()
        } else {
            vec![None; records.len()]
        };

        let labeled: Vec<(usize, &String)> = records
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.label.as_ref().map(|l| (i, l)))
            .collect();
        if !labeled.is_empty() {
            let gold: Vec<String> = labeled.iter().map(|(_, l)| (*l).clone()).collect();
            let preds: Vec<Option<String>> =
                labeled.iter().map(|(i, _)| predictions[*i].clone()).collect();
            entry.f1_avg = Some(f1_score(&preds, &gold)?);

            let mut clear_idx = Vec::new();
            let mut ambiguous_idx = Vec::new();
            for (pos, (i, _)) in labeled.iter().enumerate() {
                match buckets[*i] {
                    Some(Bucket::Clear) => clear_idx.push(pos),
                    Some(Bucket::Ambiguous) => ambiguous_idx.push(pos),
                    None => {}
                }
            }
            if !clear_idx.is_empty() || !ambiguous_idx.is_empty() {
                entry.n_clear = clear_idx.len();
                entry.n_ambiguous = ambiguous_idx.len();
                if !clear_idx.is_empty() {
                    let g: Vec<String> = clear_idx.iter().map(|&p| gold[p].clone()).collect();
                    let p: Vec<Option<String>> =
                        clear_idx.iter().map(|&p| preds[p].clone()).collect();
                    entry.f1_clear = Some(f1_score(&p, &g)?);
                }
                if !ambiguous_idx.is_empty() {
                    let g: Vec<String> = ambiguous_idx.iter().map(|&p| gold[p].clone()).collect();
                    let p: Vec<Option<String>> =
                        ambiguous_idx.iter().map(|&p| preds[p].clone()).collect();
                    entry.f1_ambiguous = Some(f1_score(&p, &g)?);
                }
            }
        } else if binary {
            // gold-less: still report bucket accounting over all records
            entry.n_clear = buckets.iter().flatten().filter(|b| **b == Bucket::Clear).count();
            entry.n_ambiguous = buckets
                .iter()
                .flatten()
                .filter(|b| **b == Bucket::Ambiguous)
                .count();
        }

        // robustness and monotonicity from the perturbed set
        if method != Method::Dp && !perturbed.is_empty() {
            let mut by_level: BTreeMap<&str, Vec<EvalPair>> = BTreeMap::new();
            let mut monotonic: Vec<EvalPair> = Vec::new();
            for p in &perturbed {
                let original = match cache.memberships(method, &p.original_text) {
                    Ok(v) => v,
                    Err(e) => {
                        failures.push(FailureNote {
                            id: p.id.clone(),
                            error: format!("{method}: {e}"),
                        });
                        continue;
                    }
                };
                let perturbed_v = match cache.memberships(method, &p.perturbed_text) {
                    Ok(v) => v,
                    Err(e) => {
                        failures.push(FailureNote {
                            id: p.id.clone(),
                            error: format!("{method}: {e}"),
                        });
                        continue;
                    }
                };
                match p.kind {
                    PerturbKind::Monotonic => {
                        let labels: Vec<i8> = classes
                            .names()
                            .iter()
                            .map(|name| {
                                p.shift_labels
                                    .as_ref()
                                    .and_then(|m| m.get(name).copied())
                                    .unwrap_or(0)
                            })
                            .collect();
                        monotonic.push(EvalPair::new(original, perturbed_v).with_labels(labels));
                    }
                    kind => {
                        let level = match kind {
                            PerturbKind::RobustLow => "low",
                            PerturbKind::RobustMedium => "medium",
                            _ => "high",
                        };
                        by_level
                            .entry(level)
                            .or_default()
                            .push(EvalPair::new(original, perturbed_v));
                    }
                }
            }
            for (level, pairs) in &by_level {
                // one RS value per level: mean over classes
                let mut sum = 0.0;
                for c in 0..classes.len() {
                    sum += robustness_score(pairs, c)?;
                }
                entry
                    .rs_by_level
                    .insert(level.to_string(), sum / classes.len() as f64);
            }
            if !monotonic.is_empty() {
                let mut sum = 0.0;
                for (c, name) in classes.names().iter().enumerate() {
                    let ms = monotonicity_score(&monotonic, c)?;
                    entry.ms_by_class.insert(name.clone(), ms);
                    sum += ms;
                }
                entry.ms_avg = Some(sum / classes.len() as f64);
            }
        }

        report_methods.insert(method.as_str().to_string(), entry);
    }

    let mut fingerprint_sources: Vec<&Path> = Vec::new();
    if let Some(p) = &config.data.dataset {
        fingerprint_sources.push(p);
    }
    if let Some(p) = &config.data.perturbed {
        fingerprint_sources.push(p);
    }
    let report = EvalReport {
        dataset_fingerprint: fingerprint_paths(&fingerprint_sources),
        config_snapshot: config.to_toml_string(),
        methods: report_methods,
    };
    let report_path = out_dir.join("report.json");
    std::fs::write(&report_path, report.to_json_pretty()).map_err(|e| CommandError::Io {
        path: report_path.display().to_string(),
        source: e,
    })?;
    Ok(EvaluateOutcome {
        report,
        failures,
        report_path,
    })
}

/// One knowledge-transfer configuration row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRow {
    pub configuration: String,
    pub f1: Option<f64>,
    pub n_records: usize,
    pub traces_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub teacher_model: Option<String>,
    pub keyword_entries: usize,
    pub subunit_entries: usize,
    pub rows: Vec<TransferRow>,
    pub warnings: Vec<String>,
}

impl TransferReport {
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<28} {:>8} {:>8}\n", "configuration", "f1", "n"));
        for row in &self.rows {
            let f1 = row
                .f1
                .map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
            out.push_str(&format!(
                "{:<28} {:>8} {:>8}\n",
                row.configuration, f1, row.n_records
            ));
        }
        out
    }
}

/// Runs the four knowledge-injection configurations (none, keyword-only,
/// sub-unit-only, both) of the fuzzy chain over the configured dataset,
/// reporting F1 per configuration. With empty teacher traces only the
/// baseline row is emitted, with a warning.
pub fn transfer(config: &RunConfig) -> Result<TransferReport, CommandError> {
    let classes = config.class_set()?;
    let backend = config.build_backend()?;
    let out_dir = &config.run.out_dir;
    config.write_snapshot(out_dir)?;
    let records = dataset_records(config)?;

    let teacher_traces: Vec<FrcTrace> = match &config.data.teacher_traces {
        Some(path) => dataset::read_jsonl(path)?,
        None => Vec::new(),
    };
    let mut warnings = Vec::new();
    let bundle = if teacher_traces.is_empty() {
        warnings.push("no teacher traces: emitting only the baseline row".to_string());
        None
    } else {
        Some(pipeline::extract_knowledge(&teacher_traces)?)
    };

    let configurations: Vec<(String, Option<KnowledgeBundle>)> = match &bundle {
        None => vec![("no_injection".to_string(), None)],
        Some(bundle) => vec![
            ("no_injection".to_string(), None),
            ("keyword_knowledge".to_string(), Some(bundle.keywords_only())),
            ("subunit_knowledge".to_string(), Some(bundle.subunits_only())),
            ("keyword_and_subunit_knowledge".to_string(), Some(bundle.clone())),
        ],
    };

    let threshold = config.run.ambiguity_threshold;
    let binary = classes.len() == 2;
    let mut rows = Vec::new();
    for (name, injected) in &configurations {
        let results = pipeline::run_parallel(&records, backend.concurrency_limit(), |record| {
            pipeline::run_frc(&record.text, &classes, backend.as_ref(), injected.as_ref())
        });
        let mut traces = Vec::new();
        let mut predictions: Vec<Option<String>> = Vec::new();
        let mut gold: Vec<String> = Vec::new();
        for (record, result) in records.iter().zip(results) {
            match result {
                Ok(trace) => {
                    if let Some(label) = &record.label {
                        let prediction = if binary {
                            classify_and_split(&trace.fused, threshold)
                                .ok()
                                .and_then(|(l, _)| l.map(|i| classes.names()[i].clone()))
                        } else {
                            trace
                                .fused
                                .values()
                                .iter()
                                .enumerate()
                                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                                .map(|(i, _)| classes.names()[i].clone())
                        };
                        predictions.push(prediction);
                        gold.push(label.clone());
                    }
                    traces.push(trace);
                }
                Err(e) => {
                    warnings.push(format!("{} failed on {}: {e}", name, record.id));
                    if record.label.is_some() {
                        predictions.push(None);
                        gold.push(record.label.clone().unwrap());
                    }
                }
            }
        }
        let traces_path = out_dir.join(format!("traces.{name}.jsonl"));
        dataset::write_jsonl(&traces_path, traces)?;
        let f1 = if gold.is_empty() {
            None
        } else {
            Some(f1_score(&predictions, &gold)?)
        };
        rows.push(TransferRow {
            configuration: name.clone(),
            f1,
            n_records: records.len(),
            traces_path,
        });
    }

    let report = TransferReport {
        teacher_model: bundle.as_ref().map(|b| b.teacher_model.clone()),
        keyword_entries: bundle.as_ref().map_or(0, |b| b.keyword_knowledge.len()),
        subunit_entries: bundle.as_ref().map_or(0, |b| b.subunit_knowledge.len()),
        rows,
        warnings,
    };
    let path = out_dir.join("transfer_report.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report).expect("report serializes"))
        .map_err(|e| CommandError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
    Ok(report)
}

/// Content hash of a file, for byte-identity checks between runs.
pub fn file_sha256(path: impl AsRef<Path>) -> Result<String, CommandError> {
    let bytes = std::fs::read(path.as_ref()).map_err(|e| CommandError::Io {
        path: path.as_ref().display().to_string(),
        source: e,
    })?;
    Ok(sha256_hex(&bytes))
}
