//! Pipeline stages. Each stage reads the previous stage's artifacts from the
//! output directory, writes its own through atomic renames, and records a
//! manifest so that an unchanged rerun is skipped.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use conceptbench_client::{run_batch, RemoteClient, CHAT_FRAMING};
use conceptbench_core::artifact::{split_jsonl, write_atomic};
use conceptbench_core::dedup::dedup_classes;
use conceptbench_core::enumerator::{
    enumerate_class, sample_concepts, Concept, ConceptClass, ConceptId, ConceptRecord, ConceptStatus,
};
use conceptbench_core::learners::{Learner, LearnerQuery, MajorityLearner, MdlLearner};
use conceptbench_core::promptgen::{build_prompt_set, PromptRecord};
use conceptbench_core::semantics::MeaningSignature;
use conceptbench_core::stats::{render_report, summarize, EvalRecord, LearnerReport};
use conceptbench_core::{parse_expression, ConceptExpr};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{LearnerKind, RunConfig};

pub const MANIFEST: &str = "manifest.json";

/// Upstream stages, in order; used to check that inputs match the config.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Upstream {
    Enumerate,
    Dedup,
    Prompts,
}

/// What a stage did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageReport {
    pub stage: String,
    pub up_to_date: bool,
    /// Output files relative to the output directory.
    pub outputs: Vec<String>,
}

#[derive(Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Manifest {
    stage: String,
    input_hash: String,
    outputs: BTreeMap<String, String>,
}

/// A sampled concept as listed in `prompts/sample.json`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledConcept {
    pub id: ConceptId,
    pub class: u8,
    pub expr_text: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleFile {
    meta: Value,
    concepts: Vec<SampledConcept>,
}

pub struct Pipeline {
    cfg: RunConfig,
    out: PathBuf,
}

impl Pipeline {
    pub fn new(cfg: RunConfig, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            cfg,
            out: out_dir.into(),
        }
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn run_all(&self) -> anyhow::Result<Vec<StageReport>> {
        self.cfg.validate_for_evaluation()?;
        Ok(vec![
            self.enumerate()?,
            self.dedup()?,
            self.prompts()?,
            self.evaluate()?,
            self.stats()?,
        ])
    }

    pub fn enumerate(&self) -> anyhow::Result<StageReport> {
        let section = json!({ "enumerate": self.cfg.enumerate });
        self.run_stage("enumerate", &[], section, || {
            let opts = self.cfg.enumeration_options();
            let mut files = Vec::new();
            for k in self.cfg.enumerate.classes.iter() {
                let class = enumerate_class(k, &opts)?;
                let meta = self.meta(
                    "enumerate",
                    json!({
                        "class": k,
                        "stride": class.stride,
                        "generation_seed": class.generation_seed,
                        "size": class.concepts.len(),
                    }),
                );
                files.push((class_file(k), concepts_jsonl(&meta, &class.concepts, false)?));
            }
            Ok(files)
        })
    }

    pub fn dedup(&self) -> anyhow::Result<StageReport> {
        let inputs = self.class_files("enumerate");
        let section = json!({ "dedup": self.cfg.dedup });
        self.run_stage("dedup", &inputs, section, || {
            let mut classes = Vec::new();
            for (k, path) in self.cfg.enumerate.classes.iter().zip(&inputs) {
                classes.push(self.load_class(path, k, Upstream::Enumerate, false)?);
            }
            let audit = dedup_classes(&mut classes, self.cfg.dedup.mode, self.cfg.eligibility())?;
            let mut files = Vec::new();
            for class in &classes {
                let meta = self.meta(
                    "dedup",
                    json!({
                        "class": class.k,
                        "stride": class.stride,
                        "generation_seed": class.generation_seed,
                        "size": class.concepts.len(),
                        "retained": class.retained().count(),
                    }),
                );
                files.push((class_file(class.k), concepts_jsonl(&meta, &class.concepts, true)?));
            }
            let meta = self.meta("dedup", json!({ "entries": audit.len() }));
            files.push(("dedup_audit.jsonl".into(), jsonl_bytes(&meta, audit.iter())?));
            Ok(files)
        })
    }

    pub fn prompts(&self) -> anyhow::Result<StageReport> {
        let inputs = self.class_files("dedup");
        let section = json!({ "prompts": self.cfg.prompts });
        self.run_stage("prompts", &inputs, section, || {
            let mut sampled = Vec::new();
            for (k, path) in self.cfg.enumerate.classes.iter().zip(&inputs) {
                let class = self.load_class(path, k, Upstream::Dedup, true)?;
                let picks = sample_concepts(&class, self.cfg.prompts.concepts_per_class, class.generation_seed)?;
                sampled.extend(picks.into_iter().map(|c| (k, c)));
            }
            let mut files = Vec::new();
            for (k, concept) in &sampled {
                let set = build_prompt_set(&concept.id, &concept.expr, self.cfg.seed, self.cfg.prompts.prompts_per_concept)
                    .with_context(|| format!("building prompts for {}", concept.text))?;
                let meta = self.meta(
                    "prompts",
                    json!({
                        "concept": {"id": concept.id, "class": k, "expr_text": concept.text},
                        "examples_per_polarity": set.m,
                        "reused_positive_questions": set.reused_positive_questions,
                        "reused_negative_questions": set.reused_negative_questions,
                    }),
                );
                files.push((prompt_file(&concept.id), jsonl_bytes(&meta, set.records().iter())?));
            }
            let sample = SampleFile {
                meta: self.meta("prompts", json!({})),
                concepts: sampled
                    .iter()
                    .map(|(k, c)| SampledConcept {
                        id: c.id.clone(),
                        class: *k,
                        expr_text: c.text.clone(),
                    })
                    .collect(),
            };
            files.push(("sample.json".into(), pretty(&sample)?));
            Ok(files)
        })
    }

    pub fn evaluate(&self) -> anyhow::Result<StageReport> {
        self.cfg.validate_for_evaluation()?;
        let learner = self.cfg.evaluate.learner;
        let sample_path = self.out.join("prompts").join("sample.json");
        let sample = self.load_sample(&sample_path)?;
        let mut inputs = vec![sample_path];
        inputs.extend(sample.iter().map(|c| self.out.join("prompts").join(prompt_file(&c.id))));
        if learner == LearnerKind::Mdl {
            inputs.extend(self.class_files("dedup"));
        }
        let stage = format!("evaluate/{}", learner.name());
        let section = json!({ "evaluate": self.cfg.evaluate });
        self.run_stage(&stage, &inputs, section, || {
            let mut prompts = Vec::new();
            for concept in &sample {
                let path = self.out.join("prompts").join(prompt_file(&concept.id));
                let (meta, records) = read_jsonl::<PromptRecord>(&path)?;
                self.check_upstream(&path, &meta, Upstream::Prompts)?;
                prompts.extend(records);
            }
            let records = match learner {
                LearnerKind::Mdl => {
                    let mut hypotheses = Vec::new();
                    for (k, path) in self.cfg.enumerate.classes.iter().zip(self.class_files("dedup")) {
                        let class = self.load_class(&path, k, Upstream::Dedup, true)?;
                        hypotheses.extend(class.concepts.into_iter().filter(|c| c.status == ConceptStatus::Retained));
                    }
                    evaluate_local(&MdlLearner::new(&hypotheses), &prompts)?
                }
                LearnerKind::Majority => evaluate_local(&MajorityLearner, &prompts)?,
                LearnerKind::Remote => {
                    let endpoint = self.cfg.evaluate.endpoint.clone().expect("validated above");
                    let client = RemoteClient::http(endpoint)?;
                    run_batch(&prompts, &client, self.cfg.evaluate.max_in_flight)?
                }
            };
            let mut extra = json!({
                "learner": learner.name(),
                "records": records.len(),
                "unevaluated": records.iter().filter(|r| r.correct.is_none()).count(),
            });
            if learner == LearnerKind::Remote {
                extra["chat_framing"] = json!(CHAT_FRAMING);
            }
            let meta = self.meta("evaluate", extra);
            Ok(vec![("records.jsonl".into(), jsonl_bytes(&meta, records.iter())?)])
        })
    }

    pub fn stats(&self) -> anyhow::Result<StageReport> {
        let sample_path = self.out.join("prompts").join("sample.json");
        let sample = self.load_sample(&sample_path)?;
        let learners = self.evaluated_learners()?;
        if learners.is_empty() {
            bail!("no evaluation records under {}; run `evaluate` first", self.out.join("evaluate").display());
        }
        let mut inputs = vec![sample_path];
        inputs.extend(learners.iter().map(|(_, p)| p.clone()));
        let section = json!({ "stats": self.cfg.stats });
        self.run_stage("stats", &inputs, section, || {
            let class_of: BTreeMap<ConceptId, u8> = sample.iter().map(|c| (c.id.clone(), c.class)).collect();
            let mut reports: Vec<LearnerReport> = Vec::new();
            for (name, path) in &learners {
                let (meta, records) = read_jsonl::<EvalRecord>(path)?;
                self.check_upstream(path, &meta, Upstream::Prompts)?;
                reports.push(summarize(name, &records, &class_of, self.cfg.stats.abstain_policy));
            }
            let learner_names: Vec<&str> = learners.iter().map(|(n, _)| n.as_str()).collect();
            let provenance = self.meta("stats", json!({ "learners": learner_names }));
            Ok(render_report(&reports, &provenance)
                .into_iter()
                .map(|(name, text)| (name, text.into_bytes()))
                .collect())
        })
    }

    fn evaluated_learners(&self) -> anyhow::Result<Vec<(String, PathBuf)>> {
        let dir = self.out.join("evaluate");
        let mut found = Vec::new();
        if dir.is_dir() {
            for entry in fs::read_dir(&dir)? {
                let entry = entry?;
                let path = entry.path().join("records.jsonl");
                if path.is_file() {
                    found.push((entry.file_name().to_string_lossy().into_owned(), path));
                }
            }
        }
        found.sort();
        Ok(found)
    }

    fn meta(&self, stage: &str, extra: Value) -> Value {
        let mut meta = json!({
            "tool": concat!("conceptbench ", env!("CARGO_PKG_VERSION")),
            "stage": stage,
            "config": self.cfg,
        });
        if let (Value::Object(m), Value::Object(e)) = (&mut meta, extra) {
            m.extend(e);
        }
        meta
    }

    fn class_files(&self, stage: &str) -> Vec<PathBuf> {
        self.cfg
            .enumerate
            .classes
            .iter()
            .map(|k| self.out.join(stage).join(class_file(k)))
            .collect()
    }

    /// Fails unless the artifact at `path` was produced with the same seed
    /// and the same settings for every stage up to `through`.
    fn check_upstream(&self, path: &Path, meta: &Value, through: Upstream) -> anyhow::Result<()> {
        let theirs = meta
            .get("config")
            .with_context(|| format!("{} has no embedded config", path.display()))?;
        let ours = serde_json::to_value(&self.cfg)?;
        let mut keys = vec!["seed", "enumerate"];
        if through >= Upstream::Dedup {
            keys.push("dedup");
        }
        if through >= Upstream::Prompts {
            keys.push("prompts");
        }
        for key in keys {
            if theirs.get(key) != ours.get(key) {
                bail!(
                    "{} was produced with different `{key}` settings; rerun the earlier stages (or `all`)",
                    path.display()
                );
            }
        }
        Ok(())
    }

    fn load_class(&self, path: &Path, k: u8, upstream: Upstream, retained_only: bool) -> anyhow::Result<ConceptClass> {
        let text = read_input(path)?;
        let (meta, lines) = split_jsonl(&text);
        let meta = meta.with_context(|| format!("{} has no header line", path.display()))?;
        self.check_upstream(path, &meta, upstream)?;
        ensure!(meta["class"] == json!(k), "{} holds class {} not {k}", path.display(), meta["class"]);
        let stride = meta["stride"].as_u64().context("missing stride")? as u8;
        let generation_seed = meta["generation_seed"].as_u64().context("missing generation_seed")?;
        let mut concepts = Vec::new();
        for (i, line) in lines.enumerate() {
            let record: ConceptRecord =
                serde_json::from_str(line).with_context(|| format!("{} record {}", path.display(), i + 1))?;
            if retained_only && record.status != ConceptStatus::Retained {
                continue;
            }
            concepts.push(concept_from_record(record).with_context(|| format!("{} record {}", path.display(), i + 1))?);
        }
        Ok(ConceptClass {
            k,
            stride,
            concepts,
            generation_seed,
        })
    }

    fn load_sample(&self, path: &Path) -> anyhow::Result<Vec<SampledConcept>> {
        let sample: SampleFile = serde_json::from_str(&read_input(path)?)
            .with_context(|| format!("cannot parse {}", path.display()))?;
        self.check_upstream(path, &sample.meta, Upstream::Prompts)?;
        Ok(sample.concepts)
    }

    fn run_stage(
        &self,
        stage: &str,
        inputs: &[PathBuf],
        section: Value,
        produce: impl FnOnce() -> anyhow::Result<Vec<(String, Vec<u8>)>>,
    ) -> anyhow::Result<StageReport> {
        let dir = self.out.join(stage);
        let mut hashed_inputs = Vec::new();
        for path in inputs {
            let rel = path.strip_prefix(&self.out).unwrap_or(path);
            let hash = file_hash(path).with_context(|| format!("missing input {}; run the earlier stages first", path.display()))?;
            hashed_inputs.push(json!([rel.to_string_lossy().replace('\\', "/"), hash]));
        }
        let input_hash = hex::encode(Sha256::digest(
            serde_json::to_vec(&json!({
                "stage": stage,
                "seed": self.cfg.seed,
                "tool": env!("CARGO_PKG_VERSION"),
                "settings": section,
                "inputs": hashed_inputs,
            }))?,
        ));

        let manifest_path = dir.join(MANIFEST);
        if let Some(previous) = read_manifest(&manifest_path) {
            if previous.input_hash == input_hash && outputs_intact(&dir, &previous) {
                return Ok(StageReport {
                    stage: stage.to_string(),
                    up_to_date: true,
                    outputs: previous.outputs.keys().map(|n| format!("{stage}/{n}")).collect(),
                });
            }
        }

        let files = produce()?;
        fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let mut outputs = BTreeMap::new();
        for (name, bytes) in &files {
            let path = dir.join(name);
            write_atomic(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
            outputs.insert(name.clone(), hex::encode(Sha256::digest(bytes)));
        }
        remove_stale(&dir, &outputs)?;
        let manifest = Manifest {
            stage: stage.to_string(),
            input_hash,
            outputs,
        };
        write_atomic(&manifest_path, &pretty(&manifest)?)?;
        Ok(StageReport {
            stage: stage.to_string(),
            up_to_date: false,
            outputs: manifest.outputs.keys().map(|n| format!("{stage}/{n}")).collect(),
        })
    }
}

pub fn class_file(k: u8) -> String {
    format!("concepts_class{k}.jsonl")
}

pub fn prompt_file(id: &ConceptId) -> String {
    format!("prompts_{}.jsonl", id.as_str())
}

fn evaluate_local(learner: &dyn Learner, prompts: &[PromptRecord]) -> anyhow::Result<Vec<EvalRecord>> {
    prompts
        .iter()
        .map(|p| {
            let query = LearnerQuery::from_text(&p.text)
                .with_context(|| format!("prompt {} of {} does not parse", p.prompt_index, p.concept_id.as_str()))?;
            let prediction = learner.predict(&query, p.seed);
            Ok(EvalRecord::scored(p.concept_id.clone(), p.prompt_index, p.answer, prediction))
        })
        .collect()
}

fn concept_from_record(record: ConceptRecord) -> anyhow::Result<Concept> {
    let expr: ConceptExpr = parse_expression(&record.expr_text)?;
    let mut concept = Concept::new(expr);
    ensure!(
        concept.text == record.expr_text && concept.id == record.id && concept.complexity == record.class,
        "record for {} is inconsistent with its expression",
        record.expr_text
    );
    concept.status = record.status;
    concept.signature = record
        .signature
        .as_deref()
        .map(MeaningSignature::from_hex)
        .transpose()?;
    Ok(concept)
}

fn concepts_jsonl(meta: &Value, concepts: &[Concept], signatures_for_retained: bool) -> anyhow::Result<Vec<u8>> {
    jsonl_bytes(
        meta,
        concepts.iter().map(|c| {
            let mut r = c.record();
            if !signatures_for_retained || c.status != ConceptStatus::Retained {
                r.signature = None;
            }
            r
        }),
    )
}

fn jsonl_bytes<T: Serialize>(meta: &Value, records: impl Iterator<Item = T>) -> anyhow::Result<Vec<u8>> {
    let mut out = Vec::new();
    serde_json::to_writer(&mut out, &json!({ "meta": meta }))?;
    out.push(b'\n');
    for r in records {
        serde_json::to_writer(&mut out, &r)?;
        out.push(b'\n');
    }
    Ok(out)
}

fn pretty<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<(Value, Vec<T>)> {
    let text = read_input(path)?;
    let (meta, lines) = split_jsonl(&text);
    let meta = meta.with_context(|| format!("{} has no header line", path.display()))?;
    let records = lines
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} record {}", path.display(), i + 1)))
        .collect::<anyhow::Result<_>>()?;
    Ok((meta, records))
}

fn read_input(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}; run the earlier stages first", path.display()))
}

fn file_hash(path: &Path) -> std::io::Result<String> {
    let mut hasher = Sha256::new();
    let mut file = fs::File::open(path)?;
    std::io::copy(&mut file, &mut hasher)?;
    Ok(hex::encode(hasher.finalize()))
}

fn read_manifest(path: &Path) -> Option<Manifest> {
    serde_json::from_slice(&fs::read(path).ok()?).ok()
}

fn outputs_intact(dir: &Path, manifest: &Manifest) -> bool {
    manifest
        .outputs
        .iter()
        .all(|(name, hash)| file_hash(&dir.join(name)).is_ok_and(|h| &h == hash))
}

/// Deletes files in a stage directory that the latest run did not produce.
fn remove_stale(dir: &Path, outputs: &BTreeMap<String, String>) -> anyhow::Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.file_type()?.is_file() && name != MANIFEST && !outputs.contains_key(&name) {
            fs::remove_file(entry.path())?;
        }
    }
    Ok(())
}

/// Prints a one-line summary of each stage.
pub fn print_reports(reports: &[StageReport], mut out: impl std::io::Write) -> std::io::Result<()> {
    for r in reports {
        if r.up_to_date {
            writeln!(out, "{}: up to date", r.stage)?;
        } else {
            writeln!(out, "{}: wrote {} file(s)", r.stage, r.outputs.len())?;
        }
    }
    out.flush()
}
