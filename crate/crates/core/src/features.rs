//! Named feature spaces and the per-article / per-review feature cache
//! shared by every regressor.

use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;

use crate::corpus::{CommunityGraph, Media, ReviewIdx, Source, User};
use crate::error::{Error, Result};
use crate::stylistic::{article_text, style_features_from_tokens, tokenize, Lexicon, TextMode};
use crate::topics::{topic_features, TagRegistry, TopicModel};

/// Ordered dimension names of a feature vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpace(Arc<[String]>);

impl FeatureSpace {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        FeatureSpace(names.into_iter().map(Into::into).collect::<Vec<_>>().into())
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &FeatureSpace) -> FeatureSpace {
        FeatureSpace::new(self.0.iter().chain(other.0.iter()).cloned())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub space: FeatureSpace,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(space: FeatureSpace, values: Vec<f64>) -> Result<Self> {
        if space.len() != values.len() {
            return Err(Error::RegistryMismatch(format!(
                "{} values for {} dimensions",
                values.len(),
                space.len()
            )));
        }
        Ok(FeatureVector { space, values })
    }
}

/// Binary source attributes: media, format, scope, viewpoint, top topics
/// and topic expertise.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceAttributes {
    names: Vec<String>,
}

const ENGAGEMENT: [&str; 6] = [
    "eng:answers",
    "eng:ratings_given",
    "eng:comments",
    "eng:ratings_received",
    "eng:disagreement",
    "eng:num_raters",
];

fn source_attr_names(s: &Source) -> Vec<String> {
    let mut v = vec![
        format!("src:media={}", s.media),
        format!("src:format={}", s.format),
        format!("src:scope={}", s.scope),
        format!("src:viewpoint={}", s.viewpoint),
    ];
    v.extend(s.top_topics.iter().map(|t| format!("src:topic={t}")));
    v.extend(
        s.expertise_topics
            .iter()
            .map(|t| format!("src:expertise={t}")),
    );
    v
}

impl SourceAttributes {
    pub fn from_names(names: Vec<String>) -> Self {
        SourceAttributes { names }
    }

    pub fn from_graph(graph: &CommunityGraph) -> Self {
        let mut names: BTreeSet<String> = Media::ALL
            .iter()
            .map(|m| format!("src:media={m}"))
            .collect();
        for s in graph.sources() {
            names.extend(source_attr_names(s));
        }
        SourceAttributes {
            names: names.into_iter().collect(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn encode(&self, s: &Source) -> Vec<f64> {
        let present: BTreeSet<String> = source_attr_names(s).into_iter().collect();
        self.names
            .iter()
            .map(|n| if present.contains(n) { 1.0 } else { 0.0 })
            .collect()
    }
}

/// Engagement counters of a user, in [`ENGAGEMENT`] order.
pub fn engagement_features(u: &User) -> Vec<f64> {
    vec![
        u.answers as f64,
        u.ratings_given as f64,
        u.comments as f64,
        u.ratings_received as f64,
        u.disagreement_raw.unwrap_or(0.0),
        u.num_raters as f64,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureSettings {
    pub truncate_chars: usize,
    pub text_mode: TextMode,
    pub delta: f64,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        FeatureSettings {
            truncate_chars: 1000,
            text_mode: TextMode::TitleAndText,
            delta: 0.01,
        }
    }
}

/// Everything needed to turn raw texts and metadata into feature vectors.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    pub lexicon: Lexicon,
    pub topics: TopicModel,
    pub tags: TagRegistry,
    pub source_attrs: SourceAttributes,
    pub settings: FeatureSettings,
    language_space: FeatureSpace,
    topic_space: FeatureSpace,
    source_space: FeatureSpace,
    user_space: FeatureSpace,
}

impl FeatureExtractor {
    pub fn new(
        lexicon: Lexicon,
        topics: TopicModel,
        tags: TagRegistry,
        source_attrs: SourceAttributes,
        settings: FeatureSettings,
    ) -> Self {
        let language_space =
            FeatureSpace::new(lexicon.category_names().map(|c| format!("lex:{c}")));
        let topic_space = FeatureSpace::new(
            tags.names()
                .iter()
                .map(|t| format!("tag:{t}"))
                .chain((0..topics.topics).map(|k| format!("topic:{k}"))),
        );
        let source_space = FeatureSpace::new(source_attrs.names().iter().cloned());
        let user_space = language_space
            .concat(&topic_space)
            .concat(&FeatureSpace::new(ENGAGEMENT));
        FeatureExtractor {
            lexicon,
            topics,
            tags,
            source_attrs,
            settings,
            language_space,
            topic_space,
            source_space,
            user_space,
        }
    }

    pub fn language_space(&self) -> &FeatureSpace {
        &self.language_space
    }

    pub fn topic_space(&self) -> &FeatureSpace {
        &self.topic_space
    }

    pub fn source_space(&self) -> &FeatureSpace {
        &self.source_space
    }

    /// Per-review language and topic dimensions plus engagement counters.
    pub fn user_space(&self) -> &FeatureSpace {
        &self.user_space
    }

    /// Stylistic and topic vectors of one piece of text.
    pub fn text_features(&self, text: &str) -> (Vec<f64>, Vec<f64>) {
        let tokens = tokenize(text);
        let style = style_features_from_tokens(&tokens, &self.lexicon)
            .values()
            .collect();
        let topic = topic_features(&tokens, &self.tags, &self.topics, self.settings.delta)
            .values()
            .collect();
        (style, topic)
    }

    pub fn article_text(&self, title: &str, body: &str) -> String {
        article_text(
            title,
            body,
            self.settings.text_mode,
            self.settings.truncate_chars,
        )
    }
}

/// Cached text features for every article and review of a graph.
#[derive(Debug, Clone)]
pub struct FeatureStore {
    article_style: Vec<Vec<f64>>,
    article_topic: Vec<Vec<f64>>,
    review_style: Vec<Vec<f64>>,
    review_topic: Vec<Vec<f64>>,
    article_pos: std::collections::HashMap<String, usize>,
}

impl FeatureStore {
    pub fn build(graph: &CommunityGraph, fx: &FeatureExtractor) -> Self {
        let articles: Vec<_> = graph.articles().collect();
        let (article_style, article_topic): (Vec<_>, Vec<_>) = articles
            .par_iter()
            .map(|a| fx.text_features(&fx.article_text(&a.title, &a.text)))
            .unzip();
        let (review_style, review_topic): (Vec<_>, Vec<_>) = graph
            .reviews()
            .par_iter()
            .map(|r| fx.text_features(&r.text))
            .unzip();
        let article_pos = articles
            .iter()
            .enumerate()
            .map(|(i, a)| (a.id.clone(), i))
            .collect();
        FeatureStore {
            article_style,
            article_topic,
            review_style,
            review_topic,
            article_pos,
        }
    }

    fn pos(&self, article_id: &str) -> usize {
        self.article_pos[article_id]
    }

    pub fn article_style(&self, article_id: &str) -> &[f64] {
        &self.article_style[self.pos(article_id)]
    }

    pub fn article_topic(&self, article_id: &str) -> &[f64] {
        &self.article_topic[self.pos(article_id)]
    }

    /// Language, topic and engagement features of one review.
    pub fn review_vector(&self, idx: ReviewIdx, user: &User) -> Vec<f64> {
        let mut v = Vec::with_capacity(
            self.review_style[idx].len() + self.review_topic[idx].len() + ENGAGEMENT.len(),
        );
        v.extend_from_slice(&self.review_style[idx]);
        v.extend_from_slice(&self.review_topic[idx]);
        v.extend(engagement_features(user));
        v
    }
}
