//! The experiment configuration document.
//!
//! One TOML file describes a whole study: the model, the training recipe,
//! the augmentation policy, the adversarial branch, the synthetic domains,
//! and which protocol rows to run. Parsing is a pure function over the
//! text so the same entry point serves files, tests, and fuzzing, and
//! validation reports every problem at once rather than the first.

use serde::{Deserialize, Serialize};

use crate::augment::AugConfig;
use crate::error::Error;
use crate::harness::{build_protocols, DomainAdvConfig, ExperimentProtocol, TrainConfig};
use crate::swin::SwinConfig;
use crate::synth::{default_domains, DomainSpec};
use crate::Result;

/// Everything a run needs beyond the seed and output directory flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Master seed; every stream in the run derives from it.
    pub seed: u64,
    /// Where artefacts land unless the command line overrides it.
    pub output_dir: String,
    /// Original/recaptured pairs generated per domain.
    pub pairs_per_domain: usize,
    /// Protocol selectors: full row names, kind names
    /// (`intra`/`inter`/`cross`), or `all`.
    pub protocols: Vec<String>,
    pub model: SwinConfig,
    pub training: TrainConfig,
    pub augmentation: AugConfig,
    pub adversarial: DomainAdvConfig,
    pub domains: Vec<DomainSpec>,
    /// Manifest paths of existing (real) datasets. When non-empty these
    /// replace the synthetic `domains` as the data source; relative paths
    /// resolve against the config file's directory.
    pub manifests: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            output_dir: "out".to_string(),
            pairs_per_domain: 200,
            protocols: vec!["all".to_string()],
            model: SwinConfig::toy(),
            training: TrainConfig::default(),
            augmentation: AugConfig::default(),
            adversarial: DomainAdvConfig::default(),
            domains: default_domains(),
            manifests: Vec::new(),
        }
    }
}

/// Appends the problem list of a sub-config's validation error.
fn collect(problems: &mut Vec<String>, scope: &str, result: Result<()>) {
    match result {
        Ok(()) => {}
        Err(Error::Config { problems: inner }) => {
            problems.extend(inner.into_iter().map(|p| format!("{scope}: {p}")));
        }
        Err(other) => problems.push(format!("{scope}: {other}")),
    }
}

impl ExperimentConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("parse: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization is infallible")
    }

    /// Reads, parses, and validates a config file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Checks every section and reports all problems together.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        collect(&mut problems, "model", self.model.validate());
        collect(&mut problems, "training", self.training.validate());
        collect(&mut problems, "augmentation", self.augmentation.validate());
        collect(&mut problems, "adversarial", self.adversarial.validate());
        for spec in &self.domains {
            collect(&mut problems, &format!("domain {}", spec.domain_id), spec.validate());
        }
        let mut seen = std::collections::HashSet::new();
        for spec in &self.domains {
            if !seen.insert(spec.domain_id.as_str()) {
                problems.push(format!("duplicate domain id {:?}", spec.domain_id));
            }
        }
        if self.domains.is_empty() && self.manifests.is_empty() {
            problems.push("at least one domain or manifest is required".to_string());
        }
        if self.pairs_per_domain == 0 {
            problems.push("pairs_per_domain must be positive".to_string());
        }
        if self.protocols.is_empty() {
            problems.push("protocols must not be empty (use [\"all\"])".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config { problems })
        }
    }

    /// The model as actually instantiated: `training.input_size` wins over
    /// `model.input_size`, so one knob sizes both the images and the net.
    pub fn resolved_model(&self) -> SwinConfig {
        let mut model = self.model.clone();
        model.input_size = self.training.input_size;
        model
    }

    pub fn domain_ids(&self) -> Vec<String> {
        self.domains.iter().map(|d| d.domain_id.clone()).collect()
    }

    /// Builds the protocol table for the given domain ids (configured or
    /// loaded from manifests) and keeps the rows the selectors name.
    /// Selectors match a row's name or kind; `all` keeps everything.
    pub fn resolved_protocols(&self, domain_ids: &[String]) -> Result<Vec<ExperimentProtocol>> {
        let table = build_protocols(domain_ids)?;
        let mut out = Vec::new();
        for selector in &self.protocols {
            let mut matched_any = false;
            for row in &table {
                let matches = selector == "all"
                    || selector == row.kind.as_str()
                    || selector == &row.name;
                if matches {
                    matched_any = true;
                    if !out.contains(row) {
                        out.push(row.clone());
                    }
                }
            }
            if !matched_any {
                return Err(Error::config(format!(
                    "protocol selector {selector:?} matches nothing; known rows: {}",
                    table.iter().map(|r| r.name.as_str()).collect::<Vec<_>>().join(", ")
                )));
            }
        }
        // Stable table order regardless of selector order.
        out.sort_by_key(|row| table.iter().position(|r| r == row).unwrap());
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default_config() {
        let config = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(config, ExperimentConfig::default());
        assert_eq!(config.domains.len(), 3);
        assert_eq!(config.training.epochs, 10);
    }

    #[test]
    fn toml_round_trip_preserves_everything() {
        let mut config = ExperimentConfig::default();
        config.seed = 7;
        config.training.epochs = 3;
        config.adversarial.enabled = true;
        config.adversarial.lambda_adv = 0.25;
        config.domains[1].blur_sigma = 0.9;
        let back = ExperimentConfig::from_toml(&config.to_toml()).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn unknown_keys_are_rejected_everywhere() {
        for doc in [
            "uknown_key = 1",
            "[training]\nmomentum = 0.9",
            "[model]\nheads = 4",
            "[[domains]]\ndomain_id = \"x\"\nmoire_frequency = 0.1\nmoire_angle = 0.0\nmoire_amplitude = 0.1\nblur_sigma = 0.0\nnoise_std = 0.0\ncontrast_gamma = 1.0\ntint = [0.0,0.0,0.0]\nbrightness = 2.0",
        ] {
            let err = ExperimentConfig::from_toml(doc).unwrap_err();
            assert!(err.to_string().contains("parse"), "{doc} -> {err}");
        }
    }

    #[test]
    fn validation_reports_problems_from_every_section() {
        let mut config = ExperimentConfig::default();
        config.training.epochs = 0;
        config.augmentation.cutout_fraction = 2.0;
        config.domains[0].contrast_gamma = -1.0;
        config.domains[2].domain_id = config.domains[1].domain_id.clone();
        config.pairs_per_domain = 0;
        config.protocols.clear();
        let err = config.validate().unwrap_err();
        let text = err.to_string();
        for needle in ["training", "augmentation", "domain d1", "duplicate", "pairs", "protocols"] {
            assert!(text.contains(needle), "missing {needle} in {text}");
        }
    }

    #[test]
    fn training_input_size_overrides_the_model() {
        let config = ExperimentConfig::from_toml("[training]\ninput_size = 32").unwrap();
        assert_eq!(config.model.input_size, 64);
        assert_eq!(config.resolved_model().input_size, 32);
    }

    #[test]
    fn protocol_selectors_expand_and_deduplicate() {
        let mut config = ExperimentConfig::default();
        config.protocols = vec!["cross".to_string(), "intra-d2".to_string()];
        let rows = config.resolved_protocols(&config.domain_ids()).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].name, "intra-d2", "table order, not selector order");

        config.protocols = vec!["all".to_string(), "inter".to_string()];
        assert_eq!(config.resolved_protocols(&config.domain_ids()).unwrap().len(), 7);

        config.protocols = vec!["extra".to_string()];
        let err = config.resolved_protocols(&config.domain_ids()).unwrap_err();
        assert!(err.to_string().contains("matches nothing"));
    }
}
