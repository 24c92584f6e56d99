//! Subcommand implementations and the context they all share.
//!
//! Every command follows the same shape: load the config, apply the
//! command-line overrides, validate everything, resolve the datasets,
//! compute, and only then write outputs. A failed run therefore leaves no
//! partial artefacts behind. All paths hang off one output directory so
//! concurrent runs only need distinct `--out` values.

mod baseline;
pub(crate) mod eval;
mod protocols;
pub(crate) mod synth;
mod train;
mod tsne;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use recap_core::baselines::Extractor;
use recap_core::config::ExperimentConfig;
use recap_core::data::Dataset;
use recap_core::error::Error;
use recap_core::harness::ExperimentProtocol;
use recap_core::io::load_dataset;
use recap_core::Result;

#[derive(Debug, Parser)]
#[command(name = "recap", version, about = "Recaptured-screen-image detection toolkit")]
pub struct Cli {
    /// Experiment configuration (TOML); built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Master seed, overriding the config.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Output directory, overriding the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Training epochs, overriding the config.
    #[arg(long, global = true, value_name = "N")]
    pub epochs: Option<usize>,

    /// Image and model input size, overriding the config.
    #[arg(long, global = true, value_name = "N")]
    pub input_size: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic domain datasets: PNGs, manifests, hashes.
    Synth,
    /// Train the detector for each selected protocol.
    Train {
        /// Reuse an existing checkpoint instead of training; with no
        /// epochs left to run this just re-evaluates it.
        #[arg(long)]
        resume: bool,
    },
    /// Score checkpoints on their protocol test sets; write CSVs and ROC plot.
    Eval,
    /// Run a classical feature baseline through the same protocols.
    Baseline {
        /// Feature extractor.
        #[arg(long, value_enum)]
        extractor: ExtractorArg,
    },
    /// Embed detector features in 2-D and plot them by (domain, class).
    Tsne {
        /// Images sampled per domain.
        #[arg(long, default_value_t = 200, value_name = "N")]
        per_domain: usize,
        /// Neighborhood size of the embedding.
        #[arg(long, default_value_t = 30.0)]
        perplexity: f64,
        /// Gradient-descent iterations.
        #[arg(long, default_value_t = 500)]
        iters: usize,
        /// Checkpoint to extract features with; defaults to the
        /// inter-protocol checkpoint under the output directory.
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// Print the protocol table for the configured domains.
    Protocols,
}

/// Clap-level extractor choice; unknown names die as usage errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExtractorArg {
    Lbp,
    Corr,
}

impl From<ExtractorArg> for Extractor {
    fn from(arg: ExtractorArg) -> Extractor {
        match arg {
            ExtractorArg::Lbp => Extractor::Lbp,
            ExtractorArg::Corr => Extractor::Corr,
        }
    }
}

/// Config after overrides, plus the resolved output directory.
pub struct Ctx {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    /// Directory the config file lives in; anchors relative manifest paths.
    pub config_dir: PathBuf,
}

impl Ctx {
    /// Loads the config, applies flag overrides, and re-validates.
    pub fn from_cli(cli: &Cli) -> Result<Ctx> {
        let mut config = match &cli.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        if let Some(epochs) = cli.epochs {
            config.training.epochs = epochs;
        }
        if let Some(size) = cli.input_size {
            config.training.input_size = size;
        }
        config.validate()?;
        let out = cli
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(&config.output_dir));
        let config_dir = cli
            .config
            .as_deref()
            .and_then(Path::parent)
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or_else(|| Path::new("."))
            .to_path_buf();
        Ok(Ctx { config, out, config_dir })
    }

    pub fn datasets_dir(&self) -> PathBuf {
        self.out.join("datasets")
    }

    pub fn checkpoint_path(&self, protocol: &str) -> PathBuf {
        self.out.join("checkpoints").join(format!("{protocol}.ckpt"))
    }

    /// The protocol rows this run works through, in table order.
    pub fn protocols(&self, domain_ids: &[String]) -> Result<Vec<ExperimentProtocol>> {
        self.config.resolved_protocols(domain_ids)
    }

    /// Domain ids in protocol-table order: config order for synthetic
    /// domains, sorted manifest tags otherwise.
    pub fn domain_ids(&self, loaded: &BTreeMap<String, Dataset>) -> Vec<String> {
        if self.config.manifests.is_empty() {
            self.config.domain_ids()
        } else {
            loaded.keys().cloned().collect()
        }
    }

    /// Resolves all domains to datasets: external manifests when the
    /// config lists any, otherwise synthetic domains materialized under
    /// the output directory (so every consumer sees the same quantized
    /// pixels that live on disk).
    pub fn load_domains(&self) -> Result<BTreeMap<String, Dataset>> {
        if self.config.manifests.is_empty() {
            synth::materialize(self)?;
            let mut out = BTreeMap::new();
            for spec in &self.config.domains {
                let manifest = self.datasets_dir().join(&spec.domain_id).join("manifest.json");
                let ds = load_dataset(&manifest)?;
                out.insert(spec.domain_id.clone(), ds);
            }
            return Ok(out);
        }
        let mut out: BTreeMap<String, Dataset> = BTreeMap::new();
        for rel in &self.config.manifests {
            let path = self.resolve_path(rel);
            let ds = load_dataset(&path)?;
            // One manifest may carry several domains; group by tag.
            let mut by_domain: BTreeMap<String, Vec<_>> = BTreeMap::new();
            for s in ds.samples {
                by_domain.entry(s.domain.clone()).or_default().push(s);
            }
            for (domain, samples) in by_domain {
                if out.contains_key(&domain) {
                    return Err(Error::Manifest(format!(
                        "domain {domain:?} appears in more than one manifest"
                    )));
                }
                out.insert(domain, Dataset::new(samples));
            }
        }
        Ok(out)
    }

    pub(crate) fn resolve_path(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.config_dir.join(p)
        }
    }
}

/// Creates a directory (and parents), wrapping the error with the path.
pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Entry point called from `main` once arguments are parsed.
pub fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx::from_cli(&cli)?;
    match cli.command {
        Command::Synth => synth::run(&ctx),
        Command::Train { resume } => train::run(&ctx, resume),
        Command::Eval => eval::run(&ctx),
        Command::Baseline { extractor } => baseline::run(&ctx, extractor.into()),
        Command::Tsne { per_domain, perplexity, iters, ref checkpoint } => {
            tsne::run(&ctx, per_domain, perplexity, iters, checkpoint.as_deref())
        }
        Command::Protocols => protocols::run(&ctx),
    }
}
