//! Pipeline stages and the subcommands built from them.
//!
//! Every stage reads only its declared inputs and writes only its declared
//! outputs inside the run directory. A failing stage leaves earlier artifacts in
//! place and marks the manifest as failed.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tabprompt_core::backend::{JobStatus, NGramModel, Tokenizer, TrainingReport};
use tabprompt_core::codec::{encode_corpus, read_corpus, write_corpus};
use tabprompt_core::mle::{evaluate_tables, Grids, MleReport};
use tabprompt_core::protocols::{
    baseline_descriptors, build_llm_guided_query, build_novel_mapping_query, describe_via_endpoint, expert_descriptors,
    parse_descriptor_response, parse_mapping_response, Exchange,
};
use tabprompt_core::synth::SynthError;
use tabprompt_core::table::{column_ranges, infer_schema, infer_schema_with, load_csv, split, SchemaOverrides};
use tabprompt_core::{
    generate_synthetic, Backend, ChatEndpointConfig, DescriptorQuery, DescriptorSet, GenParams, NGramBackend,
    ProtocolError, RemoteBackend, SamplingPolicy, SyntheticTable, Table, TableSchema, Task,
};

use crate::config::{BackendConfig, PipelineConfig, ProtocolConfig};
use crate::manifest::{CheckpointScore, Failure, RunManifest};
use crate::CliError;

pub const TRAIN: &str = "split/train.csv";
pub const TEST: &str = "split/test.csv";
pub const SCHEMA: &str = "schema.json";
pub const DESCRIPTORS: &str = "descriptors.json";
pub const QUERY: &str = "descriptor_query.txt";
pub const CACHE: &str = "descriptor_cache.json";
pub const CORPUS: &str = "corpus.txt";
pub const MODEL: &str = "model.json";
pub const JOB: &str = "finetune_job.json";
pub const SYNTHETIC: &str = "synthetic.csv";
pub const SYNTHETIC_META: &str = "synthetic.json";
pub const PARTIAL: &str = "synthetic.partial.csv";
pub const REPORT: &str = "mle_report.json";
pub const MANIFEST: &str = "manifest.json";
pub const LOG: &str = "run.log";

/// An output directory and its run log.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root.join("split"))
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", root.display())))?;
        Ok(RunDir { root: root.to_owned() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, relative: &str) -> PathBuf {
        self.root.join(relative)
    }

    /// Appends to `run.log` and mirrors the line to the logger.
    pub fn log(&self, line: &str) {
        log::info!("{line}");
        if let Ok(mut f) = OpenOptions::new().create(true).append(true).open(self.path(LOG)) {
            let _ = writeln!(f, "{line}");
        }
    }

    fn require(&self, relative: &str, producer: &str) -> Result<PathBuf, CliError> {
        let p = self.path(relative);
        if p.is_file() {
            Ok(p)
        } else {
            Err(CliError::validation(format!("{} is missing; run `{producer}` first", p.display())))
        }
    }

    fn write(&self, relative: &str, text: &str) -> Result<(), CliError> {
        let p = self.path(relative);
        std::fs::write(&p, text).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", p.display())))
    }

    fn write_json<T: Serialize>(&self, relative: &str, value: &T) -> Result<(), CliError> {
        self.write(relative, &(serde_json::to_string_pretty(value).map_err(CliError::runtime)? + "\n"))
    }

    fn read_json<T: for<'de> Deserialize<'de>>(&self, relative: &str, producer: &str) -> Result<T, CliError> {
        let p = self.require(relative, producer)?;
        let text = std::fs::read_to_string(&p).map_err(|e| CliError::runtime(format!("{}: {e}", p.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", p.display())))
    }

    fn read_table(&self, relative: &str, producer: &str) -> Result<Table, CliError> {
        Ok(load_csv(self.require(relative, producer)?, true)?)
    }
}

/// Submitted remote training job, kept so later stages can reattach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct JobRecord {
    base_url: String,
    job_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    status: Option<JobStatus>,
}

/// A command in progress: configuration, run directory and the manifest being built.
struct Session<'a> {
    cfg: &'a PipelineConfig,
    dir: RunDir,
    manifest: RunManifest,
}

impl<'a> Session<'a> {
    fn open(cfg: &'a PipelineConfig, out: &Path, fresh: bool) -> Result<Self, CliError> {
        let dir = RunDir::create(out)?;
        let mut manifest = if fresh {
            let _ = std::fs::remove_file(dir.path(LOG));
            RunManifest::new()
        } else {
            RunManifest::load_or_new(&dir.path(MANIFEST))
        };
        manifest.set_config(cfg);
        manifest.status = "running".into();
        manifest.failure = None;
        Ok(Session { cfg, dir, manifest })
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T, CliError>) -> Result<T, CliError> {
        self.dir.log(&format!("stage {name}: start"));
        let started = Instant::now();
        let result = f(self);
        self.manifest.record_stage(name, started.elapsed().as_secs_f64(), result.is_ok());
        match &result {
            Ok(_) => self.dir.log(&format!("stage {name}: done")),
            Err(e) => {
                self.dir.log(&format!("stage {name}: failed: {e}"));
                self.manifest.status = "failed".into();
                self.manifest.failure = Some(Failure { stage: name.into(), error: e.to_string(), exit_code: e.exit_code() });
                if let Err(save) = self.manifest.save(&self.dir.path(MANIFEST)) {
                    log::error!("could not write manifest: {save}");
                }
            }
        }
        result
    }

    fn artifact(&mut self, name: &str, relative: &str) {
        self.manifest.add_artifact(name, relative);
    }

    fn finish(mut self) -> Result<RunManifest, CliError> {
        self.manifest.status = "ok".into();
        self.manifest.add_artifact("run_log", LOG);
        self.manifest.save(&self.dir.path(MANIFEST))?;
        Ok(self.manifest)
    }

    fn ingest(&mut self) -> Result<(TableSchema, Table, Table), CliError> {
        let data = &self.cfg.data;
        let table = load_csv(&data.path, data.has_header)?;
        let overrides = match &data.schema_overrides {
            Some(p) => SchemaOverrides::load(p)?,
            None => SchemaOverrides::default(),
        };
        let schema = infer_schema_with(&table, &data.target, data.task, &overrides)?;
        let parts = split(&table, data.split_ratio, data.split_seed)?;
        self.dir.log(&format!(
            "{} rows, {} columns, task {}; split {} train / {} test",
            table.n_rows(),
            table.n_cols(),
            schema.task,
            parts.train.n_rows(),
            parts.test.n_rows()
        ));
        parts.train.save_csv(self.dir.path(TRAIN))?;
        parts.test.save_csv(self.dir.path(TEST))?;
        self.dir.write_json(SCHEMA, &schema)?;
        self.artifact("train", TRAIN);
        self.artifact("test", TEST);
        self.artifact("schema", SCHEMA);
        Ok((schema, parts.train, parts.test))
    }

    fn describe(&mut self, schema: &TableSchema, train: &Table) -> Result<DescriptorSet, CliError> {
        let names = schema.column_names();
        let ds = match &self.cfg.protocol {
            ProtocolConfig::Baseline => baseline_descriptors(schema)?,
            ProtocolConfig::Expert { file } => expert_descriptors(schema, file)?,
            ProtocolConfig::LlmGuided { endpoint } => {
                let query = build_llm_guided_query(&self.cfg.dataset_name(), &names)?;
                self.ask(endpoint, &query, |r| parse_descriptor_response(r, &names))?
            }
            ProtocolConfig::NovelMapping { field, endpoint } => {
                // ranges describe the training rows only
                let overrides = match &self.cfg.data.schema_overrides {
                    Some(p) => SchemaOverrides::load(p)?,
                    None => SchemaOverrides::default(),
                };
                let train_schema = infer_schema_with(train, &self.cfg.data.target, self.cfg.data.task, &overrides)?;
                let ranges = column_ranges(train, &train_schema)?;
                let query = build_novel_mapping_query(&ranges, field)?;
                self.ask(endpoint, &query, |r| parse_mapping_response(r, &names))?
            }
        };
        for (col, d) in ds.columns().zip(ds.descriptors()) {
            self.dir.log(&format!("descriptor {col:?} -> {d:?}"));
        }
        self.dir.write_json(DESCRIPTORS, &ds)?;
        self.artifact("descriptors", DESCRIPTORS);
        self.manifest.descriptors = Some(ds.clone());
        Ok(ds)
    }

    /// Queries the descriptor provider, replaying a cached answer to the same query when one parses.
    fn ask(
        &mut self,
        endpoint: &ChatEndpointConfig,
        query: &DescriptorQuery,
        mut parse: impl FnMut(&str) -> Result<DescriptorSet, ProtocolError>,
    ) -> Result<DescriptorSet, CliError> {
        self.dir.write(QUERY, &query.text)?;
        self.artifact("descriptor_query", QUERY);
        self.dir.log(&format!("descriptor query:\n{}", query.text));

        let cached: Vec<Exchange> = std::fs::read_to_string(self.dir.path(CACHE))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default();
        if cached.first().is_some_and(|x| x.query == query.text) {
            if let Some(ds) = cached.iter().rev().find_map(|x| parse(&x.response).ok()) {
                self.dir.log("descriptor provider: replaying cached response");
                self.artifact("descriptor_cache", CACHE);
                return Ok(ds);
            }
        }

        let (result, exchanges) = describe_via_endpoint(endpoint, query, &mut parse);
        for x in &exchanges {
            self.dir.log(&format!("descriptor response:\n{}", x.response));
        }
        if !exchanges.is_empty() {
            self.dir.write_json(CACHE, &exchanges)?;
            self.artifact("descriptor_cache", CACHE);
        }
        result.map_err(|e| match e {
            ProtocolError::Endpoint(_) | ProtocolError::Config(_) => CliError::from(e),
            other => CliError::runtime(format!("descriptor provider gave no usable answer: {other}")),
        })
    }

    fn encode(&mut self, train: &Table, ds: &DescriptorSet) -> Result<Vec<String>, CliError> {
        let encoded = encode_corpus(train, ds, self.cfg.encode.order, self.cfg.encode.seed)?;
        let corpus: Vec<String> = encoded.into_iter().map(|e| e.text).collect();
        write_corpus(self.dir.path(CORPUS), corpus.iter().map(String::as_str))?;
        self.artifact("corpus", CORPUS);
        self.dir.log(&format!("encoded {} lines", corpus.len()));
        Ok(corpus)
    }

    fn finetune(&mut self, corpus: &[String]) -> Result<(Box<dyn Backend>, TrainingReport), CliError> {
        match &self.cfg.backend {
            BackendConfig::Ngram { order_k, tokenizer } => {
                let mut backend = NGramBackend::new(*order_k, *tokenizer);
                let report = backend.finetune(corpus, &self.cfg.finetune)?;
                backend.model().expect("trained").save(self.dir.path(MODEL))?;
                self.artifact("model", MODEL);
                if let Some(stats) = &report.token_stats {
                    self.dir.log(&format!(
                        "n-gram model: {} contexts, vocabulary {}, longest line {} tokens",
                        stats.contexts, stats.vocabulary, stats.max_line_tokens
                    ));
                }
                Ok((Box::new(backend), report))
            }
            BackendConfig::Remote { url, .. } => {
                let mut backend = remote_client(self.cfg)?;
                let job_id = backend.submit(corpus, &self.cfg.finetune)?;
                let mut record = JobRecord { base_url: url.clone(), job_id: job_id.clone(), status: None };
                self.dir.write_json(JOB, &record)?;
                self.artifact("finetune_job", JOB);
                self.dir.log(&format!("submitted training job {job_id}"));
                let status = backend.wait(&job_id)?;
                let report = TrainingReport {
                    status: "trained".into(),
                    job_id: Some(job_id),
                    epoch_losses: status.losses.clone(),
                    checkpoints: status.checkpoints.clone(),
                    token_stats: None,
                };
                record.status = Some(status);
                self.dir.write_json(JOB, &record)?;
                Ok((Box::new(backend), report))
            }
        }
    }

    fn load_backend(&self) -> Result<Box<dyn Backend>, CliError> {
        match &self.cfg.backend {
            BackendConfig::Ngram { .. } => {
                let path = self.dir.require(MODEL, "finetune")?;
                Ok(Box::new(NGramBackend::from_model(NGramModel::load(path)?)))
            }
            BackendConfig::Remote { .. } => {
                let record: JobRecord = self.dir.read_json(JOB, "finetune")?;
                Ok(Box::new(remote_client(self.cfg)?.attach(record.job_id)))
            }
        }
    }

    fn gen_params(&self, corpus: &[String]) -> Result<GenParams, CliError> {
        let max_new_tokens = self.cfg.generate.max_new_tokens.unwrap_or_else(|| {
            4 * corpus.iter().map(|l| Tokenizer::Word.tokenize(l).len()).max().unwrap_or(1).max(1)
        });
        Ok(GenParams::new(max_new_tokens, self.cfg.generate.temperature, 1, self.cfg.generate.seed)?)
    }

    fn policy(&self, n_train: usize) -> Result<SamplingPolicy, CliError> {
        let s = &self.cfg.sampling;
        Ok(SamplingPolicy::new(s.n_target.unwrap_or(n_train), s.max_attempts, s.bounds, s.seed)?)
    }

    fn sample(
        &self,
        backend: &dyn Backend,
        schema: &TableSchema,
        ds: &DescriptorSet,
        gen: &GenParams,
        policy: &SamplingPolicy,
    ) -> Result<SyntheticTable, SynthError> {
        let finetune = matches!(self.cfg.backend, BackendConfig::Remote { .. }).then_some(&self.cfg.finetune);
        generate_synthetic(backend, schema, ds, self.cfg.encode.order, policy, gen, finetune)
    }

    fn generate(
        &mut self,
        backend: &dyn Backend,
        schema: &TableSchema,
        ds: &DescriptorSet,
        corpus: &[String],
        n_train: usize,
    ) -> Result<SyntheticTable, CliError> {
        let gen = self.gen_params(corpus)?;
        let policy = self.policy(n_train)?;
        self.dir.log(&format!(
            "sampling {} rows (at most {} attempts, {} new tokens each)",
            policy.n_target, policy.max_attempts, gen.max_new_tokens
        ));
        match self.sample(backend, schema, ds, &gen, &policy) {
            Ok(synth) => {
                synth.save(self.dir.path(SYNTHETIC), self.dir.path(SYNTHETIC_META))?;
                self.artifact("synthetic", SYNTHETIC);
                self.artifact("synthetic_meta", SYNTHETIC_META);
                self.dir.log(&format!(
                    "accepted {} of {} attempts; rejections {:?}",
                    synth.stats.accepted, synth.stats.attempts, synth.stats.rejected_by_reason
                ));
                self.manifest.sampling = Some(synth.stats.clone());
                Ok(synth)
            }
            Err(SynthError::Exhausted { stats, partial }) => {
                partial.save_csv(self.dir.path(PARTIAL))?;
                self.artifact("synthetic_partial", PARTIAL);
                self.manifest.sampling = Some(stats.clone());
                Err(SynthError::Exhausted { stats, partial }.into())
            }
            Err(e) => Err(e.into()),
        }
    }

    fn grids(&self, task: Task) -> Grids {
        let mut grids = Grids::default_for(task, self.cfg.evaluate.forest_seed);
        grids.cv_folds = self.cfg.evaluate.cv_folds;
        grids
    }

    fn evaluate(&mut self, synthetic: &Table, test: &Table, schema: &TableSchema) -> Result<MleReport, CliError> {
        let report = evaluate_tables(synthetic, test, schema, &self.grids(schema.task), self.cfg.evaluate.cv_seed)?;
        self.dir.write(REPORT, &report.to_json())?;
        self.artifact("mle_report", REPORT);
        self.dir.log(&format!(
            "MLE ({:?}): decision tree {}, random forest {}",
            report.metric, report.models.decision_tree.score, report.models.random_forest.score
        ));
        Ok(report)
    }

    /// Scores rows sampled from every checkpoint of the finished remote job.
    fn checkpoint_series(
        &mut self,
        report: &TrainingReport,
        schema: &TableSchema,
        ds: &DescriptorSet,
        corpus: &[String],
        n_train: usize,
        test: &Table,
    ) -> Result<(), CliError> {
        let Some(job) = &report.job_id else { return Ok(()) };
        let gen = self.gen_params(corpus)?;
        let policy = self.policy(n_train)?;
        let grids = self.grids(schema.task);
        for tag in &report.checkpoints {
            let backend = remote_client(self.cfg)?.attach(job.clone()).with_checkpoint(Some(tag.clone()));
            let mut entry =
                CheckpointScore { checkpoint: tag.clone(), decision_tree: None, random_forest: None, n_synth_rows: 0, error: None };
            let scored = self
                .sample(&backend, schema, ds, &gen, &policy)
                .map_err(CliError::from)
                .and_then(|s| Ok((s.table.n_rows(), evaluate_tables(&s.table, test, schema, &grids, self.cfg.evaluate.cv_seed)?)));
            match scored {
                Ok((n, r)) => {
                    entry.n_synth_rows = n;
                    entry.decision_tree = Some(r.models.decision_tree.score);
                    entry.random_forest = Some(r.models.random_forest.score);
                }
                Err(e) => entry.error = Some(e.to_string()),
            }
            self.dir.log(&format!("checkpoint {tag}: {entry:?}"));
            self.manifest.checkpoint_series.push(entry);
        }
        Ok(())
    }
}

fn remote_client(cfg: &PipelineConfig) -> Result<RemoteBackend, CliError> {
    let BackendConfig::Remote { url, timeout_secs, poll_secs, job_timeout_secs, auth_token_env, checkpoint, .. } = &cfg.backend
    else {
        return Err(CliError::validation("backend is not remote"));
    };
    let bearer = match auth_token_env {
        Some(var) => Some(
            std::env::var(var).map_err(|_| CliError::validation(format!("environment variable {var} is not set")))?,
        ),
        None => None,
    };
    Ok(RemoteBackend::new(url.clone(), Duration::from_secs_f64(*timeout_secs), bearer)
        .with_polling(Duration::from_secs_f64(*poll_secs), Duration::from_secs_f64(*job_timeout_secs))
        .with_checkpoint(checkpoint.clone()))
}

/// Ingests and splits the dataset, then writes the descriptor set.
pub fn cmd_describe(cfg: &PipelineConfig, out: &Path) -> Result<RunManifest, CliError> {
    let mut s = Session::open(cfg, out, false)?;
    let (schema, train, _) = s.stage("ingest", |s| s.ingest())?;
    s.stage("describe", |s| s.describe(&schema, &train))?;
    s.finish()
}

/// Encodes the training split with the stored descriptors.
pub fn cmd_encode(cfg: &PipelineConfig, out: &Path) -> Result<RunManifest, CliError> {
    let mut s = Session::open(cfg, out, false)?;
    s.stage("encode", |s| {
        let train = s.dir.read_table(TRAIN, "describe")?;
        let ds: DescriptorSet = s.dir.read_json(DESCRIPTORS, "describe")?;
        s.encode(&train, &ds)
    })?;
    s.finish()
}

/// Trains the configured backend on the stored corpus.
pub fn cmd_finetune(cfg: &PipelineConfig, out: &Path) -> Result<RunManifest, CliError> {
    let mut s = Session::open(cfg, out, false)?;
    s.stage("finetune", |s| {
        let corpus = read_corpus(s.dir.require(CORPUS, "encode")?)?;
        s.finetune(&corpus).map(|_| ())
    })?;
    s.finish()
}

/// Samples synthetic rows from the trained backend.
pub fn cmd_generate(cfg: &PipelineConfig, out: &Path) -> Result<RunManifest, CliError> {
    let mut s = Session::open(cfg, out, false)?;
    s.stage("generate", |s| {
        let schema: TableSchema = s.dir.read_json(SCHEMA, "describe")?;
        let ds: DescriptorSet = s.dir.read_json(DESCRIPTORS, "describe")?;
        let corpus = read_corpus(s.dir.require(CORPUS, "encode")?)?;
        let n_train = s.dir.read_table(TRAIN, "describe")?.n_rows();
        let backend = s.load_backend()?;
        s.generate(backend.as_ref(), &schema, &ds, &corpus, n_train).map(|_| ())
    })?;
    s.finish()
}

/// Scores the stored synthetic rows against the real test split.
pub fn cmd_evaluate(cfg: &PipelineConfig, out: &Path) -> Result<RunManifest, CliError> {
    let mut s = Session::open(cfg, out, false)?;
    s.stage("evaluate", |s| {
        let schema: TableSchema = s.dir.read_json(SCHEMA, "describe")?;
        let synthetic = s.dir.read_table(SYNTHETIC, "generate")?;
        let test = s.dir.read_table(TEST, "describe")?;
        check_headers(&synthetic, &test)?;
        s.evaluate(&synthetic, &test, &schema).map(|_| ())
    })?;
    s.finish()
}

/// Runs every stage in order.
pub fn cmd_run(cfg: &PipelineConfig, out: &Path) -> Result<RunManifest, CliError> {
    let mut s = Session::open(cfg, out, true)?;
    let (schema, train, test) = s.stage("ingest", |s| s.ingest())?;
    let ds = s.stage("describe", |s| s.describe(&schema, &train))?;
    let corpus = s.stage("encode", |s| s.encode(&train, &ds))?;
    let (backend, report) = s.stage("finetune", |s| s.finetune(&corpus))?;
    let synth = s.stage("generate", |s| s.generate(backend.as_ref(), &schema, &ds, &corpus, train.n_rows()))?;
    s.stage("evaluate", |s| s.evaluate(&synth.table, &test, &schema))?;
    if matches!(cfg.backend, BackendConfig::Remote { evaluate_checkpoints: true, .. }) && !report.checkpoints.is_empty() {
        s.stage("checkpoints", |s| s.checkpoint_series(&report, &schema, &ds, &corpus, train.n_rows(), &test))?;
    }
    s.finish()
}

/// Inputs of a standalone evaluation.
#[derive(Debug, Clone)]
pub struct EvaluateFiles {
    pub synthetic: PathBuf,
    pub test: PathBuf,
    pub target: String,
    /// Schema written by `describe`; inferred from the test file when absent.
    pub schema: Option<PathBuf>,
    pub task: Option<Task>,
    pub cv_seed: u64,
    pub forest_seed: u64,
    pub cv_folds: usize,
}

/// Fails unless both tables have the same header; the message lists the differences.
pub fn check_headers(synthetic: &Table, real: &Table) -> Result<(), CliError> {
    if synthetic.columns() == real.columns() {
        return Ok(());
    }
    let missing: Vec<&String> = real.columns().iter().filter(|c| !synthetic.columns().contains(c)).collect();
    let extra: Vec<&String> = synthetic.columns().iter().filter(|c| !real.columns().contains(c)).collect();
    let mut msg = String::from("synthetic and test headers differ");
    if !missing.is_empty() {
        msg.push_str(&format!("\n  missing from synthetic: {missing:?}"));
    }
    if !extra.is_empty() {
        msg.push_str(&format!("\n  only in synthetic: {extra:?}"));
    }
    if missing.is_empty() && extra.is_empty() {
        msg.push_str(&format!("\n  column order: synthetic {:?} vs test {:?}", synthetic.columns(), real.columns()));
    }
    Err(CliError::validation(msg))
}

/// Standalone MLE of a synthetic CSV against a real test CSV.
pub fn cmd_evaluate_files(args: &EvaluateFiles, out: Option<&Path>) -> Result<MleReport, CliError> {
    let synthetic = load_csv(&args.synthetic, true)?;
    let test = load_csv(&args.test, true)?;
    check_headers(&synthetic, &test)?;
    let schema = match &args.schema {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::validation(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<TableSchema>(&text).map_err(|e| CliError::validation(format!("{}: {e}", p.display())))?
        }
        None => infer_schema(&test, &args.target, args.task)?,
    };
    if schema.target().name != args.target {
        return Err(CliError::validation(format!(
            "schema target is {:?}, not {:?}",
            schema.target().name,
            args.target
        )));
    }
    let mut grids = Grids::default_for(schema.task, args.forest_seed);
    grids.cv_folds = args.cv_folds;
    let report = evaluate_tables(&synthetic, &test, &schema, &grids, args.cv_seed)?;
    if let Some(out) = out {
        let dir = RunDir::create(out)?;
        dir.write(REPORT, &report.to_json())?;
    }
    Ok(report)
}
