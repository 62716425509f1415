//! Synthetic communities with known per-predictor noise.
//!
//! Article ratings come from the source quality plus Gaussian noise; each
//! review rating adds reviewer-specific noise. The text channels carry the
//! article rating through word proportions: review sentiment words, the
//! share of the first topic in the article, and reporting verbs versus
//! loaded words. All draws are clipped to the rating scale, which slightly
//! biases ratings near the ends of the scale.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Article, CommunityGraph, Media, Review, Source, User, RATING_RANGE};
use crate::error::{Error, Result};

pub const POSITIVE_WORDS: [&str; 8] = [
    "excellent",
    "accurate",
    "thorough",
    "balanced",
    "insightful",
    "reliable",
    "informative",
    "careful",
];
pub const NEGATIVE_WORDS: [&str; 8] = [
    "misleading",
    "sloppy",
    "biased",
    "inaccurate",
    "shallow",
    "dishonest",
    "unfounded",
    "careless",
];
pub const CREDIBLE_STYLE_WORDS: [&str; 8] = [
    "stated",
    "reported",
    "announced",
    "confirmed",
    "testified",
    "documented",
    "cited",
    "disclosed",
];
pub const LOADED_STYLE_WORDS: [&str; 8] = [
    "outrageous",
    "shocking",
    "radical",
    "disgraceful",
    "scandalous",
    "notorious",
    "extremist",
    "propaganda",
];
pub const TOPIC_NAMES: [&str; 10] = [
    "science",
    "politics",
    "health",
    "energy",
    "economy",
    "education",
    "environment",
    "technology",
    "sports",
    "culture",
];

const ARTICLE_TOPIC_WORDS: usize = 40;
const ARTICLE_STYLE_WORDS: usize = 20;
const TITLE_WORDS: usize = 3;
const REVIEW_SENTIMENT_WORDS: usize = 20;
const REVIEW_TOPIC_WORDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_sources: usize,
    pub n_users: usize,
    pub n_articles: usize,
    pub reviews_per_article: usize,
    /// reviewer noise std-devs spread linearly over this range
    pub user_noise: (f64, f64),
    /// spread of article ratings around their source's quality
    pub source_noise: f64,
    pub language_noise: f64,
    pub topic_noise: f64,
    pub n_topics: usize,
    pub words_per_topic: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_sources: 5,
            n_users: 20,
            n_articles: 200,
            reviews_per_article: 3,
            user_noise: (0.25, 1.0),
            source_noise: 0.6,
            language_noise: 0.8,
            topic_noise: 0.8,
            n_topics: 4,
            words_per_topic: 30,
        }
    }
}

impl SynthConfig {
    /// Every predictor exact: ratings are fully determined by the text.
    pub fn noise_free() -> Self {
        SynthConfig {
            user_noise: (0.0, 0.0),
            source_noise: 0.0,
            language_noise: 0.0,
            topic_noise: 0.0,
            ..SynthConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic corpus: {m}")));
        if self.n_articles > 0 && self.n_sources == 0 {
            return bad("articles need at least one source");
        }
        if self.reviews_per_article > self.n_users {
            return bad("more reviews per article than users");
        }
        if !(2..=TOPIC_NAMES.len()).contains(&self.n_topics) {
            return bad("topic count must be between 2 and 10");
        }
        if self.words_per_topic == 0 {
            return bad("empty topic vocabulary");
        }
        let (lo, hi) = self.user_noise;
        let noises = [
            lo,
            hi,
            self.source_noise,
            self.language_noise,
            self.topic_noise,
        ];
        if noises.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || lo > hi {
            return bad("noise levels must be finite, non-negative, with min <= max");
        }
        Ok(())
    }
}

/// What the generator knows but the corpus does not expose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenTruth {
    pub seed: u64,
    pub config: SynthConfig,
    pub user_noise: BTreeMap<String, f64>,
    pub source_quality: BTreeMap<String, f64>,
    pub topics: Vec<String>,
}

fn clip(r: f64) -> f64 {
    r.clamp(RATING_RANGE.0, RATING_RANGE.1)
}

fn share(r: f64) -> f64 {
    ((r - RATING_RANGE.0) / (RATING_RANGE.1 - RATING_RANGE.0)).clamp(0.0, 1.0)
}

fn gauss(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd == 0.0 {
        return 0.0;
    }
    let z: f64 = rng.sample(StandardNormal);
    sd * z
}

fn topic_vocab(name: &str, size: usize) -> Vec<String> {
    std::iter::once(name.to_string())
        .chain((1..size).map(|i| format!("{name}{i}")))
        .collect()
}

pub fn generate_synthetic(cfg: &SynthConfig, seed: u64) -> Result<(CommunityGraph, HiddenTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topics: Vec<String> = TOPIC_NAMES[..cfg.n_topics]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let vocab: Vec<Vec<String>> = topics
        .iter()
        .map(|t| topic_vocab(t, cfg.words_per_topic))
        .collect();

    let mut sources = Vec::with_capacity(cfg.n_sources);
    let mut source_quality = BTreeMap::new();
    for i in 0..cfg.n_sources {
        let id = format!("s{i:02}");
        let q = if cfg.n_sources == 1 {
            3.0
        } else {
            1.5 + 3.0 * i as f64 / (cfg.n_sources - 1) as f64
        };
        source_quality.insert(id.clone(), q);
        let expertise: BTreeSet<String> = topics.choose(&mut rng).into_iter().cloned().collect();
        sources.push(Source {
            id,
            name: format!("Source {i}"),
            media: *Media::ALL.choose(&mut rng).expect("media list"),
            format: ["news", "opinion", "analysis"]
                .choose(&mut rng)
                .unwrap()
                .to_string(),
            scope: ["national", "local", "international"]
                .choose(&mut rng)
                .unwrap()
                .to_string(),
            viewpoint: ["left", "center", "right"]
                .choose(&mut rng)
                .unwrap()
                .to_string(),
            top_topics: topics.iter().take(2).cloned().collect(),
            expertise_topics: expertise,
            ground_rating: Some(q),
        });
    }

    let (nlo, nhi) = cfg.user_noise;
    let mut user_noise = BTreeMap::new();
    let mut user_ids = Vec::with_capacity(cfg.n_users);
    for i in 0..cfg.n_users {
        let sd = if cfg.n_users == 1 {
            nlo
        } else {
            nlo + (nhi - nlo) * i as f64 / (cfg.n_users - 1) as f64
        };
        let id = format!("u{i:02}");
        user_noise.insert(id.clone(), sd);
        user_ids.push(id);
    }

    let mut articles = Vec::with_capacity(cfg.n_articles);
    let mut reviews = Vec::with_capacity(cfg.n_articles * cfg.reviews_per_article);
    let mut given: BTreeMap<&str, u64> = BTreeMap::new();
    for j in 0..cfg.n_articles {
        let source = &sources[rng.random_range(0..sources.len())];
        let y = clip(source_quality[&source.id] + gauss(&mut rng, cfg.source_noise));
        let other = rng.random_range(1..cfg.n_topics);

        let p_topic = share(y + gauss(&mut rng, cfg.topic_noise));
        let n_first = (p_topic * ARTICLE_TOPIC_WORDS as f64).round() as usize;
        let mut words: Vec<&str> = Vec::new();
        for k in 0..ARTICLE_TOPIC_WORDS {
            let t = if k < n_first { 0 } else { other };
            words.push(vocab[t].choose(&mut rng).unwrap());
        }
        let p_style = share(y + gauss(&mut rng, cfg.language_noise));
        let n_credible = (p_style * ARTICLE_STYLE_WORDS as f64).round() as usize;
        for k in 0..ARTICLE_STYLE_WORDS {
            let list = if k < n_credible {
                &CREDIBLE_STYLE_WORDS
            } else {
                &LOADED_STYLE_WORDS
            };
            words.push(list.choose(&mut rng).unwrap());
        }
        words.shuffle(&mut rng);
        let title: Vec<&str> = (0..TITLE_WORDS)
            .map(|_| vocab[other].choose(&mut rng).unwrap().as_str())
            .collect();
        let mut tags = BTreeSet::from([topics[other].clone()]);
        if n_first > 0 {
            tags.insert(topics[0].clone());
        }
        let id = format!("a{j:04}");

        let reviewers: Vec<&String> = user_ids
            .choose_multiple(&mut rng, cfg.reviews_per_article)
            .collect();
        for uid in reviewers {
            let r = clip(y + gauss(&mut rng, user_noise[uid]));
            let n_pos = (share(r) * REVIEW_SENTIMENT_WORDS as f64).round() as usize;
            let mut rw: Vec<&str> = (0..REVIEW_SENTIMENT_WORDS)
                .map(|k| {
                    let list = if k < n_pos {
                        &POSITIVE_WORDS
                    } else {
                        &NEGATIVE_WORDS
                    };
                    *list.choose(&mut rng).unwrap()
                })
                .collect();
            rw.extend(
                words
                    .iter()
                    .filter(|w| !is_style_word(w))
                    .copied()
                    .collect::<Vec<_>>()
                    .choose_multiple(&mut rng, REVIEW_TOPIC_WORDS),
            );
            rw.shuffle(&mut rng);
            *given.entry(uid.as_str()).or_default() += 1;
            reviews.push(Review {
                article_id: id.clone(),
                user_id: uid.clone(),
                text: rw.join(" "),
                rating: r,
            });
        }

        articles.push(Article {
            id,
            source_id: source.id.clone(),
            title: title.join(" "),
            text: words.join(" "),
            explicit_tags: tags,
            ground_rating: Some(y),
        });
    }

    let mut users = Vec::with_capacity(cfg.n_users);
    for id in &user_ids {
        let sd = user_noise[id];
        let level = if nhi > nlo {
            1.0 + 4.0 * (nhi - sd) / (nhi - nlo)
        } else {
            3.0
        };
        let received = (10.0 * level + gauss(&mut rng, 3.0)).round().max(0.0) as u64;
        users.push(User {
            id: id.clone(),
            answers: rng.random_range(0..20),
            ratings_given: given.get(id.as_str()).copied().unwrap_or(0),
            comments: rng.random_range(0..40),
            ratings_received: received,
            disagreement_raw: None,
            num_raters: received / 2,
            member_level: Some(level),
        });
    }

    let graph = CommunityGraph::from_parts(sources, users, articles, reviews)?;
    Ok((
        graph,
        HiddenTruth {
            seed,
            config: cfg.clone(),
            user_noise,
            source_quality,
            topics,
        },
    ))
}

fn is_style_word(w: &str) -> bool {
    CREDIBLE_STYLE_WORDS.contains(&w) || LOADED_STYLE_WORDS.contains(&w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::write_corpus;
    use crate::stylistic::Lexicon;

    fn small() -> SynthConfig {
        SynthConfig {
            n_articles: 40,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn noise_free_reviews_match_ground() {
        let (g, _) = generate_synthetic(&SynthConfig::noise_free(), 3).unwrap();
        for r in g.reviews() {
            let a = g.article(&r.article_id).unwrap();
            assert_eq!(Some(r.rating), a.ground_rating);
        }
    }

    #[test]
    fn counts_follow_config() {
        let (g, truth) = generate_synthetic(&SynthConfig::default(), 1).unwrap();
        assert_eq!(g.reviews().len(), 600);
        assert_eq!(g.num_articles(), 200);
        assert_eq!(g.num_users(), 20);
        assert_eq!(g.num_sources(), 5);
        let (lo, hi) = (
            truth.user_noise.values().cloned().fold(f64::MAX, f64::min),
            truth.user_noise.values().cloned().fold(0.0, f64::max),
        );
        assert!((hi / lo - 4.0).abs() < 1e-12);
        for a in g.articles() {
            assert!(a.text.chars().count() < 1000);
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let (g1, _) = generate_synthetic(&small(), 7).unwrap();
        let (g2, _) = generate_synthetic(&small(), 7).unwrap();
        write_corpus(&g1, d1.path()).unwrap();
        write_corpus(&g2, d2.path()).unwrap();
        for f in [
            "sources.jsonl",
            "users.jsonl",
            "articles.jsonl",
            "reviews.jsonl",
        ] {
            let a = std::fs::read(d1.path().join(f)).unwrap();
            let b = std::fs::read(d2.path().join(f)).unwrap();
            assert_eq!(a, b, "{f}");
        }
        let (g3, _) = generate_synthetic(&small(), 8).unwrap();
        assert_ne!(g1, g3);
    }

    #[test]
    fn inconsistent_config_is_rejected() {
        let cfg = SynthConfig {
            n_users: 0,
            ..small()
        };
        assert!(matches!(generate_synthetic(&cfg, 0), Err(Error::Config(_))));
        let cfg = SynthConfig {
            n_sources: 0,
            ..small()
        };
        assert!(generate_synthetic(&cfg, 0).is_err());
        let cfg = SynthConfig {
            n_topics: 1,
            ..small()
        };
        assert!(generate_synthetic(&cfg, 0).is_err());
    }

    #[test]
    fn channel_words_are_in_the_shipped_lexicon() {
        let lex = Lexicon::default_bundle();
        for (cat, words) in [
            ("positive", &POSITIVE_WORDS),
            ("negative", &NEGATIVE_WORDS),
            ("report_verbs", &CREDIBLE_STYLE_WORDS),
            ("bias", &LOADED_STYLE_WORDS),
        ] {
            for w in words.iter() {
                assert!(lex.contains(cat, w), "{w} not in {cat}");
            }
        }
    }

    #[test]
    fn source_quality_tracks_article_means() {
        let (g, truth) = generate_synthetic(&SynthConfig::default(), 2).unwrap();
        let mut sums: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
        for a in g.articles() {
            let e = sums.entry(a.source_id.as_str()).or_default();
            e.0 += a.ground_rating.unwrap();
            e.1 += 1.0;
        }
        let means: Vec<f64> = sums.values().map(|(s, n)| s / n).collect();
        assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
        assert_eq!(truth.source_quality.len(), 5);
    }
}
