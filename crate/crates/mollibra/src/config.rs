//! Run configuration: TOML schema, validation, presets for the baseline
//! variants, and the config hash that keys result directories.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::critic::GatingMode;
use crate::engine::{RankingMode, RunParams, RunSettings};
use crate::evolve::EvolveConfig;
use crate::fingerprint::{FingerprintKind, FingerprintParams};
use crate::molgraph::Molecule;
use crate::surrogate::{EnsembleConfig, EnsembleMode, GpConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Desirability window constants for the drug-likeness analogue oracle.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct QedLiteParams {
    pub atoms_lo: f64,
    pub atoms_hi: f64,
    pub atoms_scale: f64,
    pub rings_lo: f64,
    pub rings_hi: f64,
    pub rings_scale: f64,
    pub hetero_lo: f64,
    pub hetero_hi: f64,
    pub hetero_scale: f64,
}

impl Default for QedLiteParams {
    fn default() -> Self {
        QedLiteParams {
            atoms_lo: 8.0,
            atoms_hi: 35.0,
            atoms_scale: 2.5,
            rings_lo: 0.5,
            rings_hi: 4.5,
            rings_scale: 0.6,
            hetero_lo: 0.05,
            hetero_hi: 0.45,
            hetero_scale: 0.05,
        }
    }
}

/// What the oracle scores.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskSpec {
    /// Tanimoto similarity of circular fingerprints against a target.
    Similarity { target: String },
    /// Exponential penalty on composition deviation from a formula.
    Isomer { formula: String },
    /// Logistic desirability product; a drug-likeness analogue.
    QedLite {
        #[serde(default)]
        params: QedLiteParams,
    },
    /// Weighted geometric mean of component tasks.
    Mpo { components: Vec<MpoComponent> },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MpoComponent {
    #[serde(flatten)]
    pub spec: TaskSpec,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TaskConfig {
    pub name: String,
    #[serde(flatten)]
    pub spec: TaskSpec,
    /// Text handed to the critic; empty string means "no usable
    /// description" and is legitimate for structure-only tasks.
    pub description: Option<String>,
}

impl Default for TaskConfig {
    fn default() -> Self {
        // A beta-agonist-like aminoalcohol; the target itself is not part
        // of the bundled seed pool.
        TaskConfig {
            name: "similarity_albuterol".into(),
            spec: TaskSpec::Similarity {
                target: "CC(C)(C)NCC(O)c1ccc(O)c(CO)c1".into(),
            },
            description: Some("Beta-2 adrenergic receptor agonists".into()),
        }
    }
}

impl TaskConfig {
    pub fn description_or_default(&self) -> String {
        self.description.clone().unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticMode {
    Synthetic,
    Http,
    Null,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct CriticConfig {
    pub mode: CriticMode,
    pub http_url: Option<String>,
    /// Overrides the task description for the critic when set.
    pub task_description: Option<String>,
    pub synthetic_rho: f64,
    pub synthetic_seed: u64,
    pub timeout_ms: u64,
}

impl Default for CriticConfig {
    fn default() -> Self {
        CriticConfig {
            mode: CriticMode::Synthetic,
            http_url: None,
            task_description: None,
            synthetic_rho: 0.8,
            synthetic_seed: 0,
            timeout_ms: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditorMode {
    Rules,
    External,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct EditorConfig {
    pub mode: EditorMode,
    pub http_url: Option<String>,
    /// Fall back to rule-based editing when the peer fails.
    pub fallback_rules: bool,
    /// Reserved concurrency bound for peer calls; the current engine
    /// issues them sequentially.
    pub max_inflight: usize,
    pub timeout_ms: u64,
}

impl Default for EditorConfig {
    fn default() -> Self {
        EditorConfig {
            mode: EditorMode::Rules,
            http_url: None,
            fallback_rules: true,
            max_inflight: 4,
            timeout_ms: 30_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(default)]
pub struct GatingConfig {
    pub mode: GatingMode,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(default)]
pub struct RankingConfig {
    pub mode: RankingMode,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct BenchConfig {
    pub seeds: Vec<u64>,
    /// Tasks run by `bench` and `ablate`; defaults to the main task.
    pub tasks: Vec<TaskConfig>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            seeds: vec![0, 1, 2, 3, 4],
            tasks: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Seed molecule listing; the bundled pool when absent.
    pub seed_file: Option<PathBuf>,
    pub task: TaskConfig,
    pub run: RunParams,
    pub evolve: EvolveConfig,
    pub fingerprints: FingerprintParams,
    pub gp: GpConfig,
    pub ensemble: EnsembleConfig,
    pub gating: GatingConfig,
    pub ranking: RankingConfig,
    pub critic: CriticConfig,
    pub editor: EditorConfig,
    pub bench: BenchConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            seed_file: None,
            task: TaskConfig::default(),
            run: RunParams::default(),
            evolve: EvolveConfig::default(),
            fingerprints: FingerprintParams::default(),
            gp: GpConfig::default(),
            ensemble: EnsembleConfig::default(),
            gating: GatingConfig::default(),
            ranking: RankingConfig::default(),
            critic: CriticConfig::default(),
            editor: EditorConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let config: Config = toml::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.to_settings()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        validate_task(&self.task.spec)?;
        for task in &self.bench.tasks {
            validate_task(&task.spec)?;
        }
        if self.critic.mode == CriticMode::Http && self.critic.http_url.is_none() {
            return Err(ConfigError::Invalid(
                "critic.mode = http requires critic.http_url".into(),
            ));
        }
        if self.editor.mode == EditorMode::External && self.editor.http_url.is_none() {
            return Err(ConfigError::Invalid(
                "editor.mode = external requires editor.http_url".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.critic.synthetic_rho) {
            return Err(ConfigError::Invalid(
                "critic.synthetic_rho must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn to_settings(&self) -> RunSettings {
        RunSettings {
            run: self.run.clone(),
            evolve: self.evolve.clone(),
            fingerprints: self.fingerprints.clone(),
            gp: self.gp.clone(),
            ensemble: self.ensemble.clone(),
            gating: self.gating.mode,
            ranking: self.ranking.mode,
            seed: self.seed,
        }
    }

    /// Hash of everything that defines a method cell: run shape, GA, GP,
    /// ensemble, gate, critic, editor and task. Seeds and the bench matrix
    /// are excluded so one hash keys all seeds of a cell.
    pub fn config_hash(&self) -> String {
        #[derive(Serialize)]
        struct HashView<'a> {
            task: &'a TaskConfig,
            run: &'a RunParams,
            evolve: &'a EvolveConfig,
            fingerprints: &'a FingerprintParams,
            gp: &'a GpConfig,
            ensemble: &'a EnsembleConfig,
            gating: &'a GatingConfig,
            ranking: &'a RankingConfig,
            critic: &'a CriticConfig,
            editor: &'a EditorConfig,
        }
        let view = HashView {
            task: &self.task,
            run: &self.run,
            evolve: &self.evolve,
            fingerprints: &self.fingerprints,
            gp: &self.gp,
            ensemble: &self.ensemble,
            gating: &self.gating,
            ranking: &self.ranking,
            critic: &self.critic,
            editor: &self.editor,
        };
        let json = serde_json::to_vec(&view).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    /// Named presets for the method and its degenerate baselines.
    pub fn preset(name: &str) -> Option<Config> {
        let mut config = Config::default();
        match name {
            "mollibra" => {}
            "tripp-gp-bo" => {
                config.fingerprints.enabled = vec![FingerprintKind::Ecfp];
                config.gating.mode = GatingMode::Off;
                config.critic.mode = CriticMode::Null;
            }
            "molleo" => {
                config.ensemble.mode = EnsembleMode::Off;
                config.gating.mode = GatingMode::Off;
                config.critic.mode = CriticMode::Null;
                config.evolve.n_siblings = 1;
                config.run.n_batch = (config.evolve.n_pairs * config.evolve.n_siblings) as u32;
                config.run.n_cand = 0;
            }
            "random-ranking" => {
                config.ranking.mode = RankingMode::Random;
                config.ensemble.mode = EnsembleMode::Off;
                config.gating.mode = GatingMode::Off;
                config.critic.mode = CriticMode::Null;
            }
            _ => return None,
        }
        Some(config)
    }

    /// The four-cell grid removing the multi-fingerprint ensemble and the
    /// critic independently. The last variant coincides with the plain GP
    /// preset.
    pub fn ablation_variants(&self) -> Vec<(String, Config)> {
        let single_fp = |config: &mut Config| {
            config.fingerprints.enabled = vec![FingerprintKind::Ecfp];
        };
        let no_critic = |config: &mut Config| {
            config.gating.mode = GatingMode::Off;
            config.critic.mode = CriticMode::Null;
        };
        let mut variants = Vec::new();
        variants.push(("full".to_string(), self.clone()));
        let mut v = self.clone();
        no_critic(&mut v);
        variants.push(("multi_fp_only".to_string(), v));
        let mut v = self.clone();
        single_fp(&mut v);
        variants.push(("single_fp_critic".to_string(), v));
        let mut v = self.clone();
        single_fp(&mut v);
        no_critic(&mut v);
        variants.push(("single_fp_only".to_string(), v));
        variants
    }

    /// Seed pool for the run: configured file or the bundled listing.
    pub fn load_seed_pool(&self) -> Result<Vec<Molecule>, ConfigError> {
        match &self.seed_file {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                crate::seeds::parse_seed_file(&text)
                    .map_err(|e| ConfigError::Invalid(format!("seed file: {e}")))
            }
            None => Ok(crate::seeds::bundled_seed_pool()),
        }
    }
}

fn validate_task(spec: &TaskSpec) -> Result<(), ConfigError> {
    match spec {
        TaskSpec::Similarity { target } => {
            Molecule::parse(target)
                .map_err(|e| ConfigError::Invalid(format!("similarity target: {e}")))?;
        }
        TaskSpec::Isomer { formula } => {
            let parsed = parse_formula(formula)?;
            if parsed.is_empty() {
                return Err(ConfigError::Invalid("isomer formula is empty".into()));
            }
        }
        TaskSpec::QedLite { .. } => {}
        TaskSpec::Mpo { components } => {
            if components.is_empty() {
                return Err(ConfigError::Invalid("mpo needs at least one component".into()));
            }
            for c in components {
                if c.weight <= 0.0 {
                    return Err(ConfigError::Invalid("mpo weights must be positive".into()));
                }
                validate_task(&c.spec)?;
            }
        }
    }
    Ok(())
}

/// Molecular formula like `C7H8N2O2` into element counts.
pub fn parse_formula(formula: &str) -> Result<std::collections::BTreeMap<String, u32>, ConfigError> {
    let bytes = formula.as_bytes();
    let mut counts = std::collections::BTreeMap::new();
    let mut i = 0;
    while i < bytes.len() {
        if !bytes[i].is_ascii_uppercase() {
            return Err(ConfigError::Invalid(format!(
                "bad formula '{formula}' at byte {i}"
            )));
        }
        let mut symbol = String::from(bytes[i] as char);
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_lowercase() {
            symbol.push(bytes[i] as char);
            i += 1;
        }
        let mut count = 0u32;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            count = count * 10 + u32::from(bytes[i] - b'0');
            i += 1;
        }
        if count == 0 {
            count = 1;
        }
        *counts.entry(symbol).or_insert(0) += count;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn presets_exist_and_validate() {
        for name in ["mollibra", "tripp-gp-bo", "molleo", "random-ranking"] {
            let config = Config::preset(name).unwrap_or_else(|| panic!("missing {name}"));
            config.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(Config::preset("nonsense").is_none());
    }

    #[test]
    fn molleo_preset_shape() {
        let config = Config::preset("molleo").unwrap();
        assert_eq!(config.run.n_batch, 10);
        assert_eq!(config.run.n_cand, 0);
        assert_eq!(config.evolve.n_siblings, 1);
        assert_eq!(config.ensemble.mode, EnsembleMode::Off);
    }

    #[test]
    fn ablation_grid_has_four_cells() {
        let variants = Config::default().ablation_variants();
        let names: Vec<&str> = variants.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(
            names,
            vec!["full", "multi_fp_only", "single_fp_critic", "single_fp_only"]
        );
        let single = &variants[3].1;
        let preset = Config::preset("tripp-gp-bo").unwrap();
        assert_eq!(single.fingerprints.enabled, preset.fingerprints.enabled);
        assert_eq!(single.gating, preset.gating);
        assert_eq!(single.critic.mode, preset.critic.mode);
    }

    #[test]
    fn hash_ignores_seed_but_not_method() {
        let a = Config::default();
        let mut b = Config::default();
        b.seed = 99;
        assert_eq!(a.config_hash(), b.config_hash());
        let mut c = Config::default();
        c.gating.mode = GatingMode::Off;
        assert_ne!(a.config_hash(), c.config_hash());
    }

    #[test]
    fn toml_round_trip_with_dotted_keys() {
        let text = r#"
            seed = 3

            [task]
            kind = "isomer"
            formula = "C7H8N2O2"
            name = "isomer_c7h8n2o2"

            [run]
            budget = 300

            [fingerprints]
            enabled = ["ecfp", "boc"]

            [fingerprints.ecfp]
            radius = 3

            [fingerprints.path]
            max_len = 5

            [gp]
            jitter = 1e-7

            [ensemble]
            mode = "poe"

            [gating]
            mode = "llimbo"

            [critic]
            mode = "synthetic"
            synthetic_rho = 0.5
        "#;
        let config: Config = toml::from_str(text).unwrap();
        config.validate().unwrap();
        assert_eq!(config.seed, 3);
        assert_eq!(config.run.budget, 300);
        assert_eq!(config.fingerprints.ecfp.radius, 3);
        assert_eq!(config.fingerprints.path.max_len, 5);
        assert_eq!(config.ensemble.mode, EnsembleMode::Poe);
        assert_eq!(config.gating.mode, GatingMode::Llimbo);
        match config.task.spec {
            TaskSpec::Isomer { ref formula } => assert_eq!(formula, "C7H8N2O2"),
            ref other => panic!("wrong task {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<Config>("budgett = 5");
        assert!(err.is_err());
    }

    #[test]
    fn invalid_combinations_are_rejected() {
        let mut config = Config::default();
        config.critic.mode = CriticMode::Http;
        assert!(config.validate().is_err());

        let mut config = Config::default();
        config.gating.mode = GatingMode::Llimbo;
        config.ensemble.mode = EnsembleMode::Off;
        assert!(config.validate().is_err());
    }

    #[test]
    fn formula_parser() {
        let f = parse_formula("C7H8N2O2").unwrap();
        assert_eq!(f["C"], 7);
        assert_eq!(f["H"], 8);
        assert_eq!(f["N"], 2);
        assert_eq!(f["O"], 2);
        let f = parse_formula("C9H10N2O2PF2Cl").unwrap();
        assert_eq!(f["Cl"], 1);
        assert_eq!(f["F"], 2);
        assert!(parse_formula("7C").is_err());
    }

    #[test]
    fn mpo_task_parses() {
        let text = r#"
            [task]
            kind = "mpo"
            name = "blend"

            [[task.components]]
            kind = "similarity"
            target = "CCO"
            weight = 2.0

            [[task.components]]
            kind = "qed_lite"
            weight = 1.0
        "#;
        let config: Config = toml::from_str(text).unwrap();
        config.validate().unwrap();
        match &config.task.spec {
            TaskSpec::Mpo { components } => assert_eq!(components.len(), 2),
            other => panic!("wrong task {other:?}"),
        }
    }
}
