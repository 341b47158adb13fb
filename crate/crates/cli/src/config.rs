//! Run configuration: defaults, presets, config files and flag overrides.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::Context;
use conceptbench_client::EndpointConfig;
use conceptbench_core::dedup::{DedupMode, EligibilityRule};
use conceptbench_core::enumerator::{EnumerationOptions, DEFAULT_CLASS_CAP, MAX_CLASS, MIN_CLASS};
use conceptbench_core::promptgen::DEFAULT_PROMPTS_PER_CONCEPT;
use conceptbench_core::stats::AbstainPolicy;
use serde::{Deserialize, Serialize};

/// A configuration problem; the binary exits with status 2 on these.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 6 concepts per class, 100 prompts per concept.
    Desk,
    /// 18 concepts per class, 1000 prompts per concept.
    Full,
}

impl Preset {
    fn counts(self) -> (usize, usize) {
        match self {
            Preset::Desk => (6, 100),
            Preset::Full => (18, DEFAULT_PROMPTS_PER_CONCEPT),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Mdl,
    Majority,
    Remote,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Mdl => "mdl",
            LearnerKind::Majority => "majority",
            LearnerKind::Remote => "remote",
        }
    }
}

/// Inclusive range of complexity classes, written `lo..hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassRange {
    pub lo: u8,
    pub hi: u8,
}

impl ClassRange {
    pub fn iter(self) -> impl Iterator<Item = u8> {
        self.lo..=self.hi
    }
}

impl Default for ClassRange {
    fn default() -> Self {
        Self {
            lo: MIN_CLASS,
            hi: MAX_CLASS,
        }
    }
}

impl fmt::Display for ClassRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.lo, self.hi)
    }
}

impl FromStr for ClassRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| t.trim().parse::<u8>().map_err(|_| format!("bad class `{t}` in `{s}`"));
        let (lo, hi) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
            None => {
                let k = parse(s)?;
                (k, k)
            }
        };
        if lo < MIN_CLASS || hi > MAX_CLASS || lo > hi {
            return Err(format!("class range `{s}` must lie within {MIN_CLASS}..{MAX_CLASS}"));
        }
        Ok(Self { lo, hi })
    }
}

impl Serialize for ClassRange {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClassRange {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnumerateConfig {
    pub classes: ClassRange,
    /// Stride of integer constants in classes 1 and 2.
    pub stride_low: u8,
    /// Stride of integer constants in classes 3 and up.
    pub stride_high: u8,
    pub class_cap: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DedupConfig {
    pub mode: DedupMode,
    pub min_per_polarity: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptsConfig {
    pub concepts_per_class: usize,
    pub prompts_per_concept: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    pub learner: LearnerKind,
    pub max_in_flight: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<EndpointConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsConfig {
    pub abstain_policy: AbstainPolicy,
}

/// Fully resolved configuration, embedded in every artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub enumerate: EnumerateConfig,
    pub dedup: DedupConfig,
    pub prompts: PromptsConfig,
    pub evaluate: EvaluateConfig,
    pub stats: StatsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let stride = EnumerationOptions::default();
        let (concepts_per_class, prompts_per_concept) = Preset::Full.counts();
        Self {
            seed: 0,
            enumerate: EnumerateConfig {
                classes: ClassRange::default(),
                stride_low: stride.stride_low,
                stride_high: stride.stride_high,
                class_cap: DEFAULT_CLASS_CAP,
            },
            dedup: DedupConfig {
                mode: DedupMode::default(),
                min_per_polarity: EligibilityRule::default().min_per_polarity,
            },
            prompts: PromptsConfig {
                concepts_per_class,
                prompts_per_concept,
            },
            evaluate: EvaluateConfig {
                learner: LearnerKind::Mdl,
                max_in_flight: 4,
                endpoint: None,
            },
            stats: StatsConfig {
                abstain_policy: AbstainPolicy::default(),
            },
        }
    }
}

/// Values given on the command line; `None` means "not given".
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub config_file: Option<std::path::PathBuf>,
    pub seed: Option<u64>,
    pub stride: Option<u8>,
    pub dedup_mode: Option<DedupMode>,
    pub classes: Option<ClassRange>,
    pub concepts_per_class: Option<usize>,
    pub prompts_per_concept: Option<usize>,
    pub learner: Option<LearnerKind>,
    pub endpoint_config: Option<std::path::PathBuf>,
    pub max_in_flight: Option<usize>,
    pub abstain_policy: Option<AbstainPolicy>,
}

impl RunConfig {
    /// Applies, in increasing precedence: defaults, preset, config file, flags.
    ///
    /// A config file may name a `preset`; a `--preset` flag takes priority.
    pub fn resolve(o: &Overrides) -> anyhow::Result<Self> {
        let mut file = match &o.config_file {
            Some(path) => Some(read_table(path)?),
            None => None,
        };
        let file_preset = match file.as_mut().and_then(|f| f.remove("preset")) {
            Some(v) => Some(
                serde_json::from_value::<Preset>(v)
                    .map_err(|e| config_err(format!("bad preset in config file: {e}")))?,
            ),
            None => None,
        };

        let mut cfg = RunConfig::default();
        if let Some(preset) = o.preset.or(file_preset) {
            let (concepts, prompts) = preset.counts();
            cfg.prompts.concepts_per_class = concepts;
            cfg.prompts.prompts_per_concept = prompts;
        }
        if let Some(file) = file {
            let mut base = serde_json::to_value(&cfg)?;
            merge(&mut base, serde_json::Value::Object(file));
            cfg = serde_json::from_value(base).map_err(|e| config_err(format!("invalid config file: {e}")))?;
        }

        if let Some(v) = o.seed {
            cfg.seed = v;
        }
        if let Some(v) = o.stride {
            cfg.enumerate.stride_high = v;
        }
        if let Some(v) = o.dedup_mode {
            cfg.dedup.mode = v;
        }
        if let Some(v) = o.classes {
            cfg.enumerate.classes = v;
        }
        if let Some(v) = o.concepts_per_class {
            cfg.prompts.concepts_per_class = v;
        }
        if let Some(v) = o.prompts_per_concept {
            cfg.prompts.prompts_per_concept = v;
        }
        if let Some(v) = o.learner {
            cfg.evaluate.learner = v;
        }
        if let Some(v) = o.max_in_flight {
            cfg.evaluate.max_in_flight = v;
        }
        if let Some(v) = o.abstain_policy {
            cfg.stats.abstain_policy = v;
        }
        if let Some(path) = &o.endpoint_config {
            let table = read_table(path)?;
            let endpoint = serde_json::from_value(serde_json::Value::Object(table))
                .map_err(|e| config_err(format!("invalid endpoint config {}: {e}", path.display())))?;
            cfg.evaluate.endpoint = Some(endpoint);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let e = &self.enumerate;
        if e.stride_low == 0 || e.stride_high == 0 {
            return Err(config_err("strides must be at least 1"));
        }
        if self.prompts.concepts_per_class == 0 {
            return Err(config_err("concepts_per_class must be at least 1"));
        }
        if self.prompts.prompts_per_concept == 0 || !self.prompts.prompts_per_concept.is_multiple_of(2) {
            return Err(config_err("prompts_per_concept must be a positive even number"));
        }
        if self.evaluate.max_in_flight == 0 {
            return Err(config_err("max_in_flight must be at least 1"));
        }
        if let Some(endpoint) = &self.evaluate.endpoint {
            endpoint.validate().map_err(|e| config_err(e.to_string()))?;
        }
        Ok(())
    }

    /// Checks what the evaluate stage needs beyond `validate`.
    pub fn validate_for_evaluation(&self) -> anyhow::Result<()> {
        if self.evaluate.learner == LearnerKind::Remote && self.evaluate.endpoint.is_none() {
            return Err(config_err(
                "learner `remote` needs an endpoint (pass --endpoint-config or set [evaluate.endpoint])",
            ));
        }
        Ok(())
    }

    pub fn enumeration_options(&self) -> EnumerationOptions {
        EnumerationOptions {
            stride_low: self.enumerate.stride_low,
            stride_high: self.enumerate.stride_high,
            cap: self.enumerate.class_cap,
            seed: self.seed,
        }
    }

    pub fn eligibility(&self) -> EligibilityRule {
        EligibilityRule {
            min_per_polarity: self.dedup.min_per_polarity,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}

/// Reads a TOML or JSON file as a table. JSON files may hold a whole
/// artifact header (`{"meta": {"config": ...}}`) or a bare config object;
/// for JSONL artifacts only the header line is read.
fn read_table(path: &Path) -> anyhow::Result<serde_json::Map<String, serde_json::Value>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(|e| config_err(format!("{e:#}")))?;
    let value: serde_json::Value = if path.extension().is_some_and(|e| e == "json" || e == "jsonl") {
        let text = if path.extension().is_some_and(|e| e == "jsonl") {
            text.lines().next().unwrap_or_default()
        } else {
            text.as_str()
        };
        let v: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        match v.pointer("/meta/config") {
            Some(inner) => inner.clone(),
            None => v,
        }
    } else {
        let v: toml::Value =
            toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        serde_json::to_value(v)?
    };
    match value {
        serde_json::Value::Object(map) => Ok(map),
        _ => Err(config_err(format!("{} does not hold a table", path.display()))),
    }
}

fn merge(base: &mut serde_json::Value, over: serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(ext: &str, text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn default_is_full_preset() {
        let cfg = RunConfig::resolve(&Overrides::default()).unwrap();
        assert_eq!(cfg.prompts.concepts_per_class, 18);
        assert_eq!(cfg.prompts.prompts_per_concept, 1000);
        assert_eq!(cfg.enumerate.classes.iter().count(), 5);
    }

    #[test]
    fn precedence() {
        let f = write(".toml", "preset = \"desk\"\nseed = 3\n[prompts]\nprompts_per_concept = 40\n");
        let o = Overrides {
            config_file: Some(f.path().to_path_buf()),
            seed: Some(9),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&o).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.prompts.concepts_per_class, 6);
        assert_eq!(cfg.prompts.prompts_per_concept, 40);
    }

    #[test]
    fn unknown_keys_rejected() {
        let f = write(".toml", "[dedup]\nthreshold = 4\n");
        let o = Overrides {
            config_file: Some(f.path().to_path_buf()),
            ..Default::default()
        };
        let err = RunConfig::resolve(&o).unwrap_err();
        assert!(err.downcast_ref::<ConfigError>().is_some());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.seed = 11;
        cfg.dedup.mode = DedupMode::PerVector;
        cfg.evaluate.endpoint = Some(EndpointConfig::new("http://localhost:9/v1", "m"));
        let f = write(".toml", &cfg.to_toml());
        let o = Overrides {
            config_file: Some(f.path().to_path_buf()),
            ..Default::default()
        };
        assert_eq!(RunConfig::resolve(&o).unwrap(), cfg);
    }

    #[test]
    fn artifact_header_is_a_config() {
        let mut cfg = RunConfig::default();
        cfg.seed = 5;
        let header = serde_json::json!({"meta": {"stage": "x", "config": cfg}});
        let f = write(".json", &header.to_string());
        let o = Overrides {
            config_file: Some(f.path().to_path_buf()),
            ..Default::default()
        };
        assert_eq!(RunConfig::resolve(&o).unwrap(), cfg);
    }

    #[test]
    fn class_ranges() {
        assert_eq!("1..5".parse::<ClassRange>().unwrap(), ClassRange { lo: 1, hi: 5 });
        assert_eq!("2..=3".parse::<ClassRange>().unwrap(), ClassRange { lo: 2, hi: 3 });
        assert_eq!("4".parse::<ClassRange>().unwrap(), ClassRange { lo: 4, hi: 4 });
        assert!("0..5".parse::<ClassRange>().is_err());
        assert!("3..2".parse::<ClassRange>().is_err());
        assert!("1..6".parse::<ClassRange>().is_err());
    }

    #[test]
    fn remote_needs_endpoint() {
        let o = Overrides {
            learner: Some(LearnerKind::Remote),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&o).unwrap();
        let err = cfg.validate_for_evaluation().unwrap_err();
        assert!(err.downcast_ref::<ConfigError>().is_some());
    }

    #[test]
    fn odd_prompt_count_rejected() {
        let o = Overrides {
            prompts_per_concept: Some(7),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&o).is_err());
    }
}
