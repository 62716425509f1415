//! End-to-end training and prediction: topic model, features, role
//! models and CRF, plus their on-disk artifacts.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ccrf::{build_design, train_ccrf, CcrfModel, CcrfSettings, ColumnIndex};
use crate::corpus::{CommunityGraph, RatingView};
use crate::error::{Error, Result};
use crate::features::{FeatureExtractor, FeatureSettings, FeatureStore, SourceAttributes};
use crate::regressors::{train_role_models, RoleModels, RoleSettings, SvrSettings};
use crate::stylistic::{tokenize, Lexicon, TextMode};
use crate::topics::{train_lda, LdaConfig, TagRegistry, TopicModel};

pub const LDA_FILE: &str = "lda.model";
pub const ROLES_FILE: &str = "roles.model";
pub const CCRF_FILE: &str = "ccrf.model";

/// Every knob of the model stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub k_topics: usize,
    pub gibbs_iters: usize,
    pub lda_zeta: f64,
    pub seed: u64,
    pub delta: f64,
    pub truncate_chars: usize,
    pub title_only: bool,
    pub svr_c: f64,
    pub svr_epsilon: f64,
    pub pooling_threshold: usize,
    pub source_article_features: bool,
    pub eta: f64,
    pub max_iters: usize,
    pub reg_log_lambda: f64,
    pub lambda_max: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        let lda = LdaConfig::default();
        let svr = SvrSettings::default();
        let crf = CcrfSettings::default();
        ModelSettings {
            k_topics: lda.topics,
            gibbs_iters: lda.iters,
            lda_zeta: lda.zeta,
            seed: 0,
            delta: 0.01,
            truncate_chars: 1000,
            title_only: false,
            svr_c: svr.c,
            svr_epsilon: svr.epsilon,
            pooling_threshold: 5,
            source_article_features: false,
            eta: crf.eta,
            max_iters: crf.max_iters,
            reg_log_lambda: crf.reg_log_lambda,
            lambda_max: crf.lambda_max,
        }
    }
}

impl ModelSettings {
    pub fn lda(&self) -> LdaConfig {
        LdaConfig {
            topics: self.k_topics,
            rho: None,
            zeta: self.lda_zeta,
            iters: self.gibbs_iters,
            seed: self.seed,
        }
    }

    pub fn features(&self) -> FeatureSettings {
        FeatureSettings {
            truncate_chars: self.truncate_chars,
            text_mode: if self.title_only {
                TextMode::TitleOnly
            } else {
                TextMode::TitleAndText
            },
            delta: self.delta,
        }
    }

    pub fn roles(&self) -> RoleSettings {
        RoleSettings {
            svr: SvrSettings {
                c: self.svr_c,
                epsilon: self.svr_epsilon,
                ..SvrSettings::default()
            },
            pooling_threshold: self.pooling_threshold,
            source_article_features: self.source_article_features,
        }
    }

    pub fn ccrf(&self) -> CcrfSettings {
        CcrfSettings {
            eta: self.eta,
            max_iters: self.max_iters,
            reg_log_lambda: self.reg_log_lambda,
            lambda_max: self.lambda_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.k_topics == 0 || self.gibbs_iters == 0 {
            return bad("k-topics and gibbs-iters must be positive");
        }
        if !(self.lda_zeta > 0.0) || !(self.delta >= 0.0) {
            return bad("zeta must be positive and delta non-negative");
        }
        if !(self.svr_c > 0.0) || !(self.svr_epsilon >= 0.0) {
            return bad("svr-c must be positive and svr-epsilon non-negative");
        }
        if !(self.eta > 0.0) || !(self.reg_log_lambda >= 0.0) || !(self.lambda_max > 1.0) {
            return bad("eta must be positive, reg-log-lambda non-negative, lambda-max above 1");
        }
        if self.pooling_threshold == 0 {
            return bad("pooling-threshold must be at least 1");
        }
        Ok(())
    }

    /// `key = value` lines, one per setting.
    pub fn describe(&self) -> Vec<(String, String)> {
        let value = serde_json::to_value(self).expect("settings serialize");
        value
            .as_object()
            .expect("struct")
            .iter()
            .map(|(k, v)| (k.replace('_', "-"), v.to_string()))
            .collect()
    }
}

/// Article texts (as the feature extractor sees them) followed by review
/// texts, tokenized.
pub fn lda_documents(graph: &CommunityGraph, settings: &ModelSettings) -> Vec<Vec<String>> {
    let fs = settings.features();
    graph
        .articles()
        .map(|a| crate::stylistic::article_text(&a.title, &a.text, fs.text_mode, fs.truncate_chars))
        .chain(graph.reviews().iter().map(|r| r.text.clone()))
        .map(|t| tokenize(&t))
        .filter(|d| !d.is_empty())
        .collect()
}

pub fn fit_topics(graph: &CommunityGraph, settings: &ModelSettings) -> Result<TopicModel> {
    train_lda(&lda_documents(graph, settings), &settings.lda())
}

pub fn extractor(
    graph: &CommunityGraph,
    lexicon: Lexicon,
    topics: TopicModel,
    settings: &ModelSettings,
) -> FeatureExtractor {
    FeatureExtractor::new(
        lexicon,
        topics,
        TagRegistry::from_graph(graph),
        SourceAttributes::from_graph(graph),
        settings.features(),
    )
}

/// Trained role models and CRF weights over one extractor.
#[derive(Debug, Clone)]
pub struct TrainedSystem {
    pub fx: FeatureExtractor,
    pub roles: RoleModels,
    pub ccrf: CcrfModel,
}

/// Role models and CRF from the `train` articles, reading ratings only
/// through `view`.
pub fn train_models(
    view: &RatingView<'_>,
    fx: &FeatureExtractor,
    store: &FeatureStore,
    train: &BTreeSet<String>,
    settings: &ModelSettings,
) -> Result<(RoleModels, CcrfModel)> {
    let roles = train_role_models(view, fx, store, train, &settings.roles())?;
    let columns = ColumnIndex::from_roles(&roles);
    let ids: Vec<String> = train.iter().cloned().collect();
    let design = build_design(view.graph(), fx, store, &roles, &columns, &ids, Some(view))?;
    let ccrf = train_ccrf(&design, &settings.ccrf())?;
    Ok((roles, ccrf))
}

/// Fits everything on the eligible articles of `graph`.
pub fn train_system(
    graph: &CommunityGraph,
    lexicon: Lexicon,
    settings: &ModelSettings,
) -> Result<TrainedSystem> {
    settings.validate()?;
    let train: BTreeSet<String> = graph.eligible_articles().into_iter().collect();
    if train.is_empty() {
        return Err(Error::InsufficientData(
            "no rated article has reviews".into(),
        ));
    }
    let topics = fit_topics(graph, settings)?;
    let fx = extractor(graph, lexicon, topics, settings);
    let store = FeatureStore::build(graph, &fx);
    let view = RatingView::open(graph);
    let (roles, ccrf) = train_models(&view, &fx, &store, &train, settings)?;
    Ok(TrainedSystem { fx, roles, ccrf })
}

impl TrainedSystem {
    /// CRF predictions for the given articles of `graph`.
    pub fn predict(&self, graph: &CommunityGraph, ids: &[String]) -> Result<Vec<f64>> {
        let store = FeatureStore::build(graph, &self.fx);
        let design = build_design(
            graph,
            &self.fx,
            &store,
            &self.roles,
            &self.ccrf.columns,
            ids,
            None,
        )?;
        self.ccrf.predict(&design)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.fx.topics.save(dir.join(LDA_FILE))?;
        let path = dir.join(ROLES_FILE);
        std::fs::write(&path, self.roles_text()?).map_err(|e| Error::io(&path, e))?;
        self.ccrf.save(&dir.join(CCRF_FILE))
    }

    fn roles_text(&self) -> Result<String> {
        let fs = &self.fx.settings;
        let mut s = String::from("roles-model v1\n");
        let _ = writeln!(s, "truncate_chars {}", fs.truncate_chars);
        let _ = writeln!(s, "title_only {}", fs.text_mode == TextMode::TitleOnly);
        let _ = writeln!(s, "delta {}", fs.delta);
        let _ = writeln!(s, "tags\t{}", self.fx.tags.names().join("\t"));
        let _ = writeln!(
            s,
            "source_attributes\t{}",
            self.fx.source_attrs.names().join("\t")
        );
        self.roles.write_text(&mut s)?;
        Ok(s)
    }

    /// Reads the three artifacts from `dir`; `lexicon` must be the one the
    /// models were trained with.
    pub fn load(dir: &Path, lexicon: Lexicon) -> Result<Self> {
        let topics = TopicModel::load(dir.join(LDA_FILE))?;
        let path = dir.join(ROLES_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let err = |message: String| Error::Model {
            path: path.clone(),
            message,
        };
        let mut lines = text.lines();
        if lines.next() != Some("roles-model v1") {
            return Err(err("missing `roles-model v1` header".into()));
        }
        let mut field = |key: &str| -> Result<String> {
            let line = lines.next().unwrap_or_default();
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix([' ', '\t']))
                .map(str::to_string)
                .or_else(|| (line == key).then(String::new))
                .ok_or_else(|| err(format!("expected `{key}`")))
        };
        let truncate_chars: usize = field("truncate_chars")?
            .parse()
            .map_err(|e| err(format!("truncate_chars: {e}")))?;
        let title_only: bool = field("title_only")?
            .parse()
            .map_err(|e| err(format!("title_only: {e}")))?;
        let delta: f64 = field("delta")?
            .parse()
            .map_err(|e| err(format!("delta: {e}")))?;
        let split = |s: String| -> Vec<String> {
            if s.is_empty() {
                Vec::new()
            } else {
                s.split('\t').map(str::to_string).collect()
            }
        };
        let tags = split(field("tags")?);
        let attrs = split(field("source_attributes")?);
        let roles = RoleModels::read_text(&mut lines).map_err(err)?;
        let ccrf = CcrfModel::load(&dir.join(CCRF_FILE))?;
        let settings = FeatureSettings {
            truncate_chars,
            text_mode: if title_only {
                TextMode::TitleOnly
            } else {
                TextMode::TitleAndText
            },
            delta,
        };
        let fx = FeatureExtractor::new(
            lexicon,
            topics,
            TagRegistry::new(tags),
            SourceAttributes::from_names(attrs),
            settings,
        );
        if fx.language_space() != &roles.language.space
            || fx.user_space() != &roles.background_user.space
        {
            return Err(Error::RegistryMismatch(
                "lexicon or topic model differs from the one the role models were trained with"
                    .into(),
            ));
        }
        if ColumnIndex::from_roles(&roles) != ccrf.columns {
            return Err(Error::RegistryMismatch(
                "CRF columns do not match the role models".into(),
            ));
        }
        Ok(TrainedSystem { fx, roles, ccrf })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth::{generate_synthetic, SynthConfig};

    fn quick() -> ModelSettings {
        ModelSettings {
            k_topics: 4,
            gibbs_iters: 30,
            max_iters: 50,
            ..ModelSettings::default()
        }
    }

    #[test]
    fn save_load_predicts_identically() {
        let cfg = SynthConfig {
            n_articles: 40,
            ..SynthConfig::default()
        };
        let (g, _) = generate_synthetic(&cfg, 4).unwrap();
        let sys = train_system(&g, Lexicon::default_bundle(), &quick()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        sys.save(dir.path()).unwrap();
        let back = TrainedSystem::load(dir.path(), Lexicon::default_bundle()).unwrap();
        let ids = g.eligible_articles();
        assert_eq!(
            sys.predict(&g, &ids).unwrap(),
            back.predict(&g, &ids).unwrap()
        );
        assert_eq!(back.roles, sys.roles);

        let small = Lexicon::from_categories([("positive", vec!["good".to_string()])]).unwrap();
        assert!(matches!(
            TrainedSystem::load(dir.path(), small),
            Err(Error::RegistryMismatch(_))
        ));
    }

    #[test]
    fn settings_describe_and_validate() {
        let s = ModelSettings::default();
        assert!(s.validate().is_ok());
        assert!(s
            .describe()
            .iter()
            .any(|(k, v)| k == "k-topics" && v == "300"));
        let bad = ModelSettings { svr_c: 0.0, ..s };
        assert!(bad.validate().is_err());
    }
}
