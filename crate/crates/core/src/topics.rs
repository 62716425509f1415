//! Latent Dirichlet allocation trained by collapsed Gibbs sampling, the
//! explicit-plus-latent topic feature vector, and tag co-occurrence.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Article, CommunityGraph};
use crate::error::{Error, Result};
use crate::stylistic::tokenize;

#[derive(Debug, Clone, PartialEq)]
pub struct LdaConfig {
    pub topics: usize,
    /// Symmetric document-topic prior; `None` means 50 / topics.
    pub rho: Option<f64>,
    pub zeta: f64,
    pub iters: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            topics: 300,
            rho: None,
            zeta: 0.01,
            iters: 1000,
            seed: 0,
        }
    }
}

impl LdaConfig {
    pub fn rho(&self) -> f64 {
        self.rho.unwrap_or(50.0 / self.topics as f64)
    }
}

/// Token assignments and the count tables they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    topics: usize,
    vocab_size: usize,
    rho: f64,
    zeta: f64,
    docs: Vec<Vec<usize>>,
    assignments: Vec<Vec<usize>>,
    doc_topic: Vec<Vec<u32>>,
    doc_len: Vec<u32>,
    topic_word: Vec<Vec<u32>>,
    topic_total: Vec<u32>,
}

impl GibbsState {
    /// Builds count tables from explicit assignments.
    pub fn from_assignments(
        topics: usize,
        vocab_size: usize,
        rho: f64,
        zeta: f64,
        docs: Vec<Vec<usize>>,
        assignments: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if topics == 0 {
            return Err(Error::Config("topic count must be at least 1".into()));
        }
        if !(rho > 0.0 && zeta > 0.0) {
            return Err(Error::Config("Dirichlet priors must be positive".into()));
        }
        if docs.len() != assignments.len()
            || docs
                .iter()
                .zip(&assignments)
                .any(|(d, z)| d.len() != z.len())
        {
            return Err(Error::InvalidInput(
                "assignments do not align with documents".into(),
            ));
        }
        if docs.iter().flatten().any(|&w| w >= vocab_size)
            || assignments.iter().flatten().any(|&k| k >= topics)
        {
            return Err(Error::InvalidInput(
                "word or topic index out of range".into(),
            ));
        }
        let mut state = GibbsState {
            topics,
            vocab_size,
            rho,
            zeta,
            doc_topic: vec![vec![0; topics]; docs.len()],
            doc_len: docs.iter().map(|d| d.len() as u32).collect(),
            topic_word: vec![vec![0; vocab_size]; topics],
            topic_total: vec![0; topics],
            docs,
            assignments,
        };
        state.recount();
        Ok(state)
    }

    fn random(
        topics: usize,
        vocab_size: usize,
        rho: f64,
        zeta: f64,
        docs: Vec<Vec<usize>>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let assignments = docs
            .iter()
            .map(|d| d.iter().map(|_| rng.random_range(0..topics)).collect())
            .collect();
        Self::from_assignments(topics, vocab_size, rho, zeta, docs, assignments)
    }

    fn recount(&mut self) {
        for row in &mut self.doc_topic {
            row.iter_mut().for_each(|c| *c = 0);
        }
        for row in &mut self.topic_word {
            row.iter_mut().for_each(|c| *c = 0);
        }
        self.topic_total.iter_mut().for_each(|c| *c = 0);
        for (d, (words, zs)) in self.docs.iter().zip(&self.assignments).enumerate() {
            for (&w, &k) in words.iter().zip(zs) {
                self.doc_topic[d][k] += 1;
                self.topic_word[k][w] += 1;
                self.topic_total[k] += 1;
            }
        }
    }

    /// Recomputes the tables from the assignments and compares them with
    /// the incrementally maintained ones.
    pub fn audit(&self) -> bool {
        let mut fresh = self.clone();
        fresh.recount();
        fresh.doc_topic == self.doc_topic
            && fresh.topic_word == self.topic_word
            && fresh.topic_total == self.topic_total
            && self
                .doc_topic
                .iter()
                .zip(&self.doc_len)
                .all(|(row, &n)| row.iter().sum::<u32>() == n)
    }

    pub fn topics(&self) -> usize {
        self.topics
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assignments
    }

    /// Unnormalized weights for every topic with the token's own count
    /// removed from `exclude`.
    fn weights_into(&self, d: usize, w: usize, exclude: Option<usize>, out: &mut [f64]) {
        let k_rho = self.topics as f64 * self.rho;
        let v_zeta = self.vocab_size as f64 * self.zeta;
        let own = |k: usize| if exclude == Some(k) { 1.0 } else { 0.0 };
        let doc_total = self.doc_len[d] as f64 - exclude.map_or(0.0, |_| 1.0);
        for (k, o) in out.iter_mut().enumerate() {
            let ndk = self.doc_topic[d][k] as f64 - own(k);
            let nkw = self.topic_word[k][w] as f64 - own(k);
            let nk = self.topic_total[k] as f64 - own(k);
            *o = (ndk + self.rho) / (doc_total + k_rho) * (nkw + self.zeta) / (nk + v_zeta);
        }
    }

    /// Normalized full conditional of token `i` in document `d`, computed
    /// with that token's current assignment removed from the counts.
    pub fn conditional(&self, d: usize, i: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.topics];
        self.weights_into(d, self.docs[d][i], Some(self.assignments[d][i]), &mut p);
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        p
    }

    /// One pass over every token in corpus order.
    pub fn sweep(&mut self, rng: &mut impl Rng) {
        let mut weights = vec![0.0; self.topics];
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i];
                let old = self.assignments[d][i];
                self.doc_topic[d][old] -= 1;
                self.topic_word[old][w] -= 1;
                self.topic_total[old] -= 1;
                self.weights_into(d, w, None, &mut weights);
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut new = self.topics - 1;
                for (k, &wk) in weights.iter().enumerate() {
                    if u < wk {
                        new = k;
                        break;
                    }
                    u -= wk;
                }
                self.assignments[d][i] = new;
                self.doc_topic[d][new] += 1;
                self.topic_word[new][w] += 1;
                self.topic_total[new] += 1;
            }
        }
    }

    pub fn phi(&self) -> Vec<Vec<f64>> {
        let v_zeta = self.vocab_size as f64 * self.zeta;
        self.topic_word
            .iter()
            .zip(&self.topic_total)
            .map(|(row, &n)| {
                row.iter()
                    .map(|&c| (c as f64 + self.zeta) / (n as f64 + v_zeta))
                    .collect()
            })
            .collect()
    }

    pub fn theta(&self) -> Vec<Vec<f64>> {
        let k_rho = self.topics as f64 * self.rho;
        self.doc_topic
            .iter()
            .zip(&self.doc_len)
            .map(|(row, &n)| {
                row.iter()
                    .map(|&c| (c as f64 + self.rho) / (n as f64 + k_rho))
                    .collect()
            })
            .collect()
    }
}

/// Trained topic model: vocabulary, topic-word and document-topic tables.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub topics: usize,
    pub rho: f64,
    pub zeta: f64,
    pub seed: u64,
    pub iters: usize,
    vocab: Vec<String>,
    word_index: HashMap<String, usize>,
    /// topics x vocabulary
    pub phi: Vec<Vec<f64>>,
    /// documents x topics
    pub theta: Vec<Vec<f64>>,
}

/// Collapsed Gibbs sampling over tokenized documents.
pub fn train_lda(docs: &[Vec<String>], cfg: &LdaConfig) -> Result<TopicModel> {
    Ok(train_lda_with_state(docs, cfg)?.0)
}

/// Like [`train_lda`] but also hands back the final sampler state.
pub fn train_lda_with_state(
    docs: &[Vec<String>],
    cfg: &LdaConfig,
) -> Result<(TopicModel, GibbsState)> {
    if cfg.topics == 0 {
        return Err(Error::Config("topic count must be at least 1".into()));
    }
    if cfg.iters == 0 {
        return Err(Error::Config("Gibbs sweeps must be at least 1".into()));
    }
    if docs.is_empty() {
        return Err(Error::InvalidInput("empty corpus".into()));
    }
    let vocab: Vec<String> = docs
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if vocab.is_empty() {
        return Err(Error::InvalidInput("empty vocabulary".into()));
    }
    let word_index: HashMap<String, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    let ids = docs
        .iter()
        .map(|d| d.iter().map(|w| word_index[w]).collect())
        .collect();
    let rho = cfg.rho();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = GibbsState::random(cfg.topics, vocab.len(), rho, cfg.zeta, ids, &mut rng)?;
    for _ in 0..cfg.iters {
        state.sweep(&mut rng);
    }
    let model = TopicModel {
        topics: cfg.topics,
        rho,
        zeta: cfg.zeta,
        seed: cfg.seed,
        iters: cfg.iters,
        phi: state.phi(),
        theta: state.theta(),
        vocab,
        word_index,
    };
    Ok((model, state))
}

fn model_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Model {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

impl TopicModel {
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn word_id(&self, w: &str) -> Option<usize> {
        self.word_index.get(w).copied()
    }

    /// Probability of `word` under topic `k`, zero for unknown words.
    pub fn phi_of(&self, k: usize, word: &str) -> f64 {
        self.word_id(word).map_or(0.0, |w| self.phi[k][w])
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "lda-model v1");
        let _ = writeln!(s, "k {}", self.topics);
        let _ = writeln!(s, "v {}", self.vocab.len());
        let _ = writeln!(s, "rho {}", self.rho);
        let _ = writeln!(s, "zeta {}", self.zeta);
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "iters {}", self.iters);
        let _ = writeln!(s, "docs {}", self.theta.len());
        let _ = writeln!(s, "vocab");
        for w in &self.vocab {
            let _ = writeln!(s, "{w}");
        }
        let _ = writeln!(s, "phi");
        for row in &self.phi {
            let _ = writeln!(s, "{}", join_floats(row));
        }
        let _ = writeln!(s, "theta");
        for row in &self.theta {
            let _ = writeln!(s, "{}", join_floats(row));
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|m| model_err(path, m))
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        let mut next = |what: &str| lines.next().ok_or_else(|| format!("missing {what}"));
        if next("header")? != "lda-model v1" {
            return Err("missing `lda-model v1` header".into());
        }
        let mut field = |key: &str| -> std::result::Result<String, String> {
            let line = next(key)?;
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| format!("expected `{key}`, found `{line}`"))
        };
        let topics: usize = field("k")?.parse().map_err(|e| format!("k: {e}"))?;
        let v: usize = field("v")?.parse().map_err(|e| format!("v: {e}"))?;
        let rho: f64 = field("rho")?.parse().map_err(|e| format!("rho: {e}"))?;
        let zeta: f64 = field("zeta")?.parse().map_err(|e| format!("zeta: {e}"))?;
        let seed: u64 = field("seed")?.parse().map_err(|e| format!("seed: {e}"))?;
        let iters: usize = field("iters")?.parse().map_err(|e| format!("iters: {e}"))?;
        let docs: usize = field("docs")?.parse().map_err(|e| format!("docs: {e}"))?;
        expect_line(&mut lines, "vocab")?;
        let vocab: Vec<String> = lines.by_ref().take(v).map(str::to_string).collect();
        if vocab.len() != v {
            return Err("truncated vocabulary".into());
        }
        expect_line(&mut lines, "phi")?;
        let phi = parse_rows(&mut lines, topics, v)?;
        expect_line(&mut lines, "theta")?;
        let theta = parse_rows(&mut lines, docs, topics)?;
        let word_index = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Ok(TopicModel {
            topics,
            rho,
            zeta,
            seed,
            iters,
            vocab,
            word_index,
            phi,
            theta,
        })
    }
}

fn expect_line<'a>(
    lines: &mut impl Iterator<Item = &'a str>,
    tag: &str,
) -> std::result::Result<(), String> {
    match lines.next() {
        Some(l) if l == tag => Ok(()),
        other => Err(format!("expected `{tag}`, found {other:?}")),
    }
}

fn parse_rows<'a>(
    lines: &mut impl Iterator<Item = &'a str>,
    n: usize,
    width: usize,
) -> std::result::Result<Vec<Vec<f64>>, String> {
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next().ok_or("truncated table")?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| e.to_string()))
            .collect::<std::result::Result<_, _>>()?;
        if row.len() != width {
            return Err(format!("row has {} values, expected {width}", row.len()));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub(crate) fn join_floats(xs: &[f64]) -> String {
    let mut s = String::with_capacity(xs.len() * 20);
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x}");
    }
    s
}

/// Explicit tag counts and latent topic weights of one text.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicFeatures {
    /// Occurrences of each explicit tag, in registry order.
    pub explicit: Vec<f64>,
    /// Summed above-threshold topic probabilities, one per latent topic.
    pub latent: Vec<f64>,
}

impl TopicFeatures {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.explicit.iter().chain(&self.latent).copied()
    }
}

/// Explicit tags as token sequences, matched against text tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TagRegistry {
    names: Vec<String>,
    tokens: Vec<Vec<String>>,
}

impl TagRegistry {
    pub fn new<I, S>(tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = tags
            .into_iter()
            .map(Into::into)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .filter(|t| !tokenize(t).is_empty())
            .collect();
        let tokens = names.iter().map(|t| tokenize(t)).collect();
        TagRegistry { names, tokens }
    }

    /// Every explicit tag used by any article of the graph.
    pub fn from_graph(graph: &CommunityGraph) -> Self {
        Self::new(
            graph
                .articles()
                .flat_map(|a| a.explicit_tags.iter().cloned()),
        )
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Builds the topic feature vector: each occurrence of an explicit tag adds
/// one to that tag's dimension; each token adds `phi_k(w)` to every latent
/// topic `k` with `phi_k(w) > delta`.
pub fn topic_features(
    tokens: &[String],
    tags: &TagRegistry,
    model: &TopicModel,
    delta: f64,
) -> TopicFeatures {
    let explicit = tags
        .tokens
        .iter()
        .map(|tag| {
            if tag.is_empty() || tag.len() > tokens.len() {
                return 0.0;
            }
            tokens.windows(tag.len()).filter(|w| w == tag).count() as f64
        })
        .collect();
    let mut latent = vec![0.0; model.topics];
    for tok in tokens {
        if let Some(w) = model.word_id(tok) {
            for (k, slot) in latent.iter_mut().enumerate() {
                let p = model.phi[k][w];
                if p > delta {
                    *slot += p;
                }
            }
        }
    }
    TopicFeatures { explicit, latent }
}

/// Tag frequencies and pairwise co-occurrence over articles.
#[derive(Debug, Clone)]
pub struct TagCooccurrence {
    count: BTreeMap<String, usize>,
    pairs: BTreeMap<(String, String), usize>,
}

impl TagCooccurrence {
    pub fn new(graph: &CommunityGraph) -> Self {
        Self::from_articles(graph.articles())
    }

    pub fn from_articles<'a>(articles: impl IntoIterator<Item = &'a Article>) -> Self {
        let mut count = BTreeMap::new();
        let mut pairs = BTreeMap::new();
        for a in articles {
            for t in &a.explicit_tags {
                *count.entry(t.clone()).or_insert(0) += 1;
                for u in &a.explicit_tags {
                    *pairs.entry((t.clone(), u.clone())).or_insert(0) += 1;
                }
            }
        }
        TagCooccurrence { count, pairs }
    }

    /// Share of `a`-tagged articles also tagged `b`.
    pub fn rel(&self, a: &str, b: &str) -> Result<f64> {
        let n = *self
            .count
            .get(a)
            .ok_or_else(|| Error::InsufficientData(format!("tag `{a}` does not occur")))?;
        let both = self
            .pairs
            .get(&(a.to_string(), b.to_string()))
            .copied()
            .unwrap_or(0);
        Ok(both as f64 / n as f64)
    }

    /// Mean of `rel(t, b)` over the article's tags; `None` without tags.
    pub fn article_association(&self, article: &Article, b: &str) -> Option<f64> {
        if article.explicit_tags.is_empty() {
            return None;
        }
        let sum: f64 = article
            .explicit_tags
            .iter()
            .map(|t| self.rel(t, b).unwrap_or(0.0))
            .sum();
        Some(sum / article.explicit_tags.len() as f64)
    }
}

/// Co-occurrence share of tag `b` among articles tagged `a`.
pub fn topic_association(graph: &CommunityGraph, a: &str, b: &str) -> Result<f64> {
    TagCooccurrence::new(graph).rel(a, b)
}
