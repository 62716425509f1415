//! Run configuration: defaults, overlaid by a TOML file, overlaid by flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use credcrf::eval::EvalSettings;
use credcrf::pipeline::ModelSettings;
use credcrf::stylistic::{load_lexicons, Lexicon};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus_dir: PathBuf,
    pub lexicon_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub k_topics: usize,
    pub gibbs_iters: usize,
    pub delta: f64,
    pub min_reviews: Option<usize>,
    pub folds: usize,
    pub seed: Option<u64>,
    pub eta: f64,
    pub max_iters: usize,
    pub reg_log_lambda: f64,
    pub svr_c: f64,
    pub svr_epsilon: f64,
    pub truncate_chars: usize,
    pub pooling_threshold: usize,
    pub title_only: bool,
    pub source_article_features: bool,
    pub ndcg_k: Option<usize>,
    pub jobs: usize,
}

pub const DEFAULT_MIN_REVIEWS: usize = 3;

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelSettings::default();
        RunConfig {
            corpus_dir: PathBuf::from("."),
            lexicon_dir: None,
            out_dir: PathBuf::from("out"),
            k_topics: m.k_topics,
            gibbs_iters: m.gibbs_iters,
            delta: m.delta,
            min_reviews: None,
            folds: 10,
            seed: None,
            eta: m.eta,
            max_iters: m.max_iters,
            reg_log_lambda: m.reg_log_lambda,
            svr_c: m.svr_c,
            svr_epsilon: m.svr_epsilon,
            truncate_chars: m.truncate_chars,
            pooling_threshold: m.pooling_threshold,
            title_only: m.title_only,
            source_article_features: m.source_article_features,
            ndcg_k: None,
            jobs: 0,
        }
    }
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// TOML file with any of the settings below (snake_case keys)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// directory with sources/users/articles/reviews .jsonl files
    #[arg(long, global = true)]
    pub corpus_dir: Option<PathBuf>,
    /// directory of lexicon .txt files (default: built-in lexicons)
    #[arg(long, global = true)]
    pub lexicon_dir: Option<PathBuf>,
    /// where models and reports are written
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// number of latent topics
    #[arg(long, global = true)]
    pub k_topics: Option<usize>,
    /// Gibbs sweeps for topic fitting
    #[arg(long, global = true)]
    pub gibbs_iters: Option<usize>,
    /// minimum topic-word probability for latent topic features
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// drop articles with fewer reviews (stats: no filter unless given)
    #[arg(long, global = true)]
    pub min_reviews: Option<usize>,
    /// cross-validation folds
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    /// random seed (required for anything stochastic)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// CRF learning rate
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// CRF iteration cap
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    /// L2 penalty on log CRF weights
    #[arg(long, global = true)]
    pub reg_log_lambda: Option<f64>,
    /// SVR cost
    #[arg(long, global = true)]
    pub svr_c: Option<f64>,
    /// SVR insensitive-zone width
    #[arg(long, global = true)]
    pub svr_epsilon: Option<f64>,
    /// leading characters of article body used for text features
    #[arg(long, global = true)]
    pub truncate_chars: Option<usize>,
    /// users/sources with fewer examples share the background model
    #[arg(long, global = true)]
    pub pooling_threshold: Option<usize>,
    /// use article titles only
    #[arg(long, global = true)]
    pub title_only: bool,
    /// give per-source models article features instead of source features
    #[arg(long, global = true)]
    pub source_article_features: bool,
    /// NDCG cutoff (default: full ranking)
    #[arg(long, global = true)]
    pub ndcg_k: Option<usize>,
    /// worker threads for cross-validation folds (0: all cores)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

macro_rules! overlay {
    ($cfg:ident, $flags:ident, $($field:ident),*) => {
        $( if let Some(v) = $flags.$field.clone() { $cfg.$field = v; } )*
    };
}

impl RunConfig {
    pub fn resolve(flags: &RunFlags) -> Result<Self> {
        let mut cfg = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        overlay!(
            cfg,
            flags,
            corpus_dir,
            out_dir,
            k_topics,
            gibbs_iters,
            delta,
            folds,
            eta,
            max_iters,
            reg_log_lambda,
            svr_c,
            svr_epsilon,
            truncate_chars,
            pooling_threshold,
            jobs
        );
        if flags.lexicon_dir.is_some() {
            cfg.lexicon_dir = flags.lexicon_dir.clone();
        }
        if flags.min_reviews.is_some() {
            cfg.min_reviews = flags.min_reviews;
        }
        if flags.seed.is_some() {
            cfg.seed = flags.seed;
        }
        if flags.ndcg_k.is_some() {
            cfg.ndcg_k = flags.ndcg_k;
        }
        cfg.title_only |= flags.title_only;
        cfg.source_article_features |= flags.source_article_features;
        Ok(cfg)
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .context("a --seed (or `seed` in the config file) is required for this command")
    }

    pub fn min_reviews(&self) -> usize {
        self.min_reviews.unwrap_or(DEFAULT_MIN_REVIEWS)
    }

    pub fn model(&self) -> Result<ModelSettings> {
        let m = ModelSettings {
            k_topics: self.k_topics,
            gibbs_iters: self.gibbs_iters,
            seed: self.seed()?,
            delta: self.delta,
            truncate_chars: self.truncate_chars,
            title_only: self.title_only,
            svr_c: self.svr_c,
            svr_epsilon: self.svr_epsilon,
            pooling_threshold: self.pooling_threshold,
            source_article_features: self.source_article_features,
            eta: self.eta,
            max_iters: self.max_iters,
            reg_log_lambda: self.reg_log_lambda,
            ..ModelSettings::default()
        };
        m.validate()?;
        Ok(m)
    }

    pub fn eval(&self) -> Result<EvalSettings> {
        Ok(EvalSettings {
            model: self.model()?,
            folds: self.folds,
            min_reviews: self.min_reviews(),
            jobs: self.jobs,
            ndcg_k: self.ndcg_k,
        })
    }

    pub fn lexicon(&self) -> Result<Lexicon> {
        match &self.lexicon_dir {
            Some(dir) => load_lexicons(dir)
                .with_context(|| format!("loading lexicons from {}", dir.display())),
            None => Ok(Lexicon::default_bundle()),
        }
    }

    pub fn out_file(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating {}", self.out_dir.display()))?;
        Ok(self.out_dir.join(name))
    }

    /// Effective settings as `key = value` pairs, for report headers.
    pub fn describe(&self) -> Vec<(String, String)> {
        let text = toml::to_string(self).expect("config serializes");
        text.lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.replace('_', "-"), v.to_string()))
            .collect()
    }
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "k_topics = 12\nfolds = 5\nseed = 9\n").unwrap();
        let flags = RunFlags {
            config: Some(path),
            folds: Some(4),
            ..RunFlags::default()
        };
        let cfg = RunConfig::resolve(&flags).unwrap();
        assert_eq!((cfg.k_topics, cfg.folds, cfg.seed), (12, 4, Some(9)));
        assert_eq!(cfg.gibbs_iters, RunConfig::default().gibbs_iters);
        assert!(cfg
            .describe()
            .iter()
            .any(|(k, v)| k == "k-topics" && v == "12"));
    }

    #[test]
    fn unknown_keys_and_missing_seed_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "topics = 12\n").unwrap();
        let flags = RunFlags {
            config: Some(path),
            ..RunFlags::default()
        };
        assert!(RunConfig::resolve(&flags).is_err());
        assert!(RunConfig::default().model().is_err());
    }
}
