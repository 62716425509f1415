//! Error and ranking metrics, correlation tests over community behaviour,
//! and k-fold cross-validation of the full model stack.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::ccrf::{build_design, CcrfModel, Column, DesignMatrix};
use crate::corpus::{make_folds, CommunityGraph, RatingView};
use crate::error::{Error, Result};
use crate::features::FeatureStore;
use crate::fmt::sig6;
use crate::pipeline::{extractor, fit_topics, train_models, ModelSettings};
use crate::stylistic::Lexicon;
use crate::topics::TagCooccurrence;

pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::InvalidInput(format!(
            "MSE over {} predictions and {} targets",
            pred.len(),
            truth.len()
        )));
    }
    Ok(pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64)
}

fn dcg(rels: &[f64]) -> f64 {
    rels.iter()
        .enumerate()
        .map(|(i, r)| {
            if i == 0 {
                *r
            } else {
                r / ((i + 1) as f64).log2()
            }
        })
        .sum()
}

/// NDCG of relevances listed in ranked order, cut at `k` when given. The
/// first position is undiscounted and position `i >= 2` is divided by
/// `log2 i`.
pub fn ndcg(rels: &[f64], k: Option<usize>) -> Result<f64> {
    if rels.is_empty() {
        return Err(Error::InvalidInput("NDCG of an empty ranking".into()));
    }
    let cut = k.unwrap_or(rels.len()).min(rels.len()).max(1);
    let mut ideal = rels.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(&ideal[..cut]);
    if idcg == 0.0 {
        log::warn!("all relevances are zero; NDCG taken as 1");
        return Ok(1.0);
    }
    Ok(dcg(&rels[..cut]) / idcg)
}

/// NDCG of a scored ranking against reference relevances; ids without a
/// reference value are skipped.
pub fn ranking_ndcg(
    ranking: &[(String, f64)],
    relevance: &BTreeMap<String, f64>,
    k: Option<usize>,
) -> Result<f64> {
    let rels: Vec<f64> = ranking
        .iter()
        .filter_map(|(id, _)| relevance.get(id).copied())
        .collect();
    ndcg(&rels, k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub r: f64,
    /// two-sided
    pub p: f64,
    pub n: usize,
}

/// Pearson's r with a two-sided p-value from Student's t on n-2 degrees
/// of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput("correlation of unequal lengths".into()));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "{n} pairs, need at least 3"
        )));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::ZeroVariance(
            "correlation with a constant variable".into(),
        ));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if 1.0 - r * r <= 0.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (2.0 * dist.cdf(-t.abs())).min(1.0)
    };
    Ok(Correlation { r, p, n })
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman's rho: Pearson's r on average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation> {
    pearson(&ranks(x), &ranks(y))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DisagreementStats {
    /// population std-dev of each qualifying article's review ratings
    pub article_std: BTreeMap<String, f64>,
    /// mean |own rating - article mean| over qualifying articles
    pub user_mad: BTreeMap<String, f64>,
}

pub fn disagreement_stats(graph: &CommunityGraph, min_reviews: usize) -> DisagreementStats {
    let mut out = DisagreementStats::default();
    let mut dev: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for clique in graph.cliques() {
        if clique.len() < min_reviews.max(1) {
            continue;
        }
        let ratings: Vec<f64> = clique
            .review_ids
            .iter()
            .map(|&i| graph.review(i).rating)
            .collect();
        let n = ratings.len() as f64;
        let mean = ratings.iter().sum::<f64>() / n;
        let var = ratings.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        out.article_std
            .insert(clique.article_id.clone(), var.sqrt());
        for (uid, r) in clique.user_ids.iter().zip(&ratings) {
            let e = dev.entry(uid).or_default();
            e.0 += (r - mean).abs();
            e.1 += 1;
        }
    }
    out.user_mad = dev
        .into_iter()
        .map(|(u, (s, n))| (u.to_string(), s / n as f64))
        .collect();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisResult {
    pub name: &'static str,
    pub description: &'static str,
    pub outcome: std::result::Result<Correlation, String>,
}

/// Correlation tests between community behaviour and ground truth.
pub fn hypothesis_suite(graph: &CommunityGraph, min_reviews: usize) -> Vec<HypothesisResult> {
    let stats = disagreement_stats(graph, min_reviews);
    let levels: BTreeMap<&str, f64> = graph
        .users()
        .filter_map(|u| u.member_level.map(|l| (u.id.as_str(), l)))
        .collect();
    let mut out = Vec::new();
    let mut push = |name, description, outcome: Result<Correlation>| {
        out.push(HypothesisResult {
            name,
            description,
            outcome: outcome.map_err(|e| e.to_string()),
        })
    };

    let co = TagCooccurrence::new(graph);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (aid, sd) in &stats.article_std {
        let a = graph.article(aid).expect("article exists");
        if let Some(assoc) = co.article_association(a, "politics") {
            x.push(assoc);
            y.push(*sd);
        }
    }
    push(
        "politics-vs-disagreement",
        "association of an article's tags with politics vs std-dev of its review ratings",
        pearson(&x, &y),
    );

    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (uid, mad) in &stats.user_mad {
        if let Some(l) = levels.get(uid.as_str()) {
            x.push(*l);
            y.push(*mad);
        }
    }
    push(
        "expertise-vs-disagreement",
        "member level vs mean absolute deviation from the article mean rating",
        pearson(&x, &y),
    );

    let (mut x, mut y) = (Vec::new(), Vec::new());
    for u in graph.users() {
        if let Some(l) = u.member_level {
            x.push(l);
            y.push(u.ratings_received as f64);
        }
    }
    push(
        "expertise-vs-feedback",
        "member level vs ratings received from the community",
        pearson(&x, &y),
    );

    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for a in graph.articles() {
        if let Some(r) = a.ground_rating {
            let e = sums.entry(a.source_id.as_str()).or_default();
            e.0 += r;
            e.1 += 1;
        }
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (sid, (s, n)) in &sums {
        if let Some(r) = graph.source(sid).and_then(|s| s.ground_rating) {
            x.push(r);
            y.push(s / *n as f64);
        }
    }
    push(
        "source-vs-credibility",
        "source rating vs mean rating of its articles",
        pearson(&x, &y),
    );

    let mut err: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for r in graph.reviews() {
        if let Some(g) = graph.article(&r.article_id).and_then(|a| a.ground_rating) {
            let e = err.entry(r.user_id.as_str()).or_default();
            e.0 += (r.rating - g).abs();
            e.1 += 1;
        }
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (uid, (s, n)) in &err {
        if let Some(l) = levels.get(uid) {
            x.push(*l);
            y.push(s / *n as f64);
        }
    }
    push(
        "expertise-vs-error",
        "member level vs mean absolute error of the user's ratings",
        pearson(&x, &y),
    );
    out
}

pub fn hypotheses_text(results: &[HypothesisResult]) -> String {
    let mut s = String::new();
    for h in results {
        let _ = writeln!(s, "[{}]", h.name);
        let _ = writeln!(s, "description = {}", h.description);
        match &h.outcome {
            Ok(c) => {
                let _ = writeln!(s, "r = {}", sig6(c.r));
                let _ = writeln!(s, "p = {}", sig6(c.p));
                let _ = writeln!(s, "n = {}", c.n);
            }
            Err(e) => {
                let _ = writeln!(s, "error = {e}");
            }
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub model: ModelSettings,
    pub folds: usize,
    pub min_reviews: usize,
    /// worker threads for folds; 0 uses all cores
    pub jobs: usize,
    /// NDCG cutoff; `None` scores the full list
    pub ndcg_k: Option<usize>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            model: ModelSettings::default(),
            folds: 10,
            min_reviews: 3,
            jobs: 0,
            ndcg_k: None,
        }
    }
}

/// Test-fold errors of the CRF, the unweighted average of the same
/// predictors, and each predictor family on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub test_size: usize,
    pub ccrf_mse: f64,
    pub aggregate_mse: f64,
    pub language_mse: f64,
    pub topic_mse: f64,
    pub source_mse: f64,
    pub user_mse: f64,
    pub blind_reads: usize,
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub final_model: CcrfModel,
    pub user_ranking: Vec<(String, f64)>,
    pub source_ranking: Vec<(String, f64)>,
    pub user_ndcg: std::result::Result<f64, String>,
    pub source_ndcg: std::result::Result<f64, String>,
    pub articles: usize,
}

impl CvReport {
    fn mean(&self, f: impl Fn(&FoldResult) -> f64) -> f64 {
        self.folds.iter().map(f).sum::<f64>() / self.folds.len() as f64
    }

    pub fn mean_mse(&self) -> f64 {
        self.mean(|f| f.ccrf_mse)
    }

    pub fn mean_aggregate_mse(&self) -> f64 {
        self.mean(|f| f.aggregate_mse)
    }

    pub fn blind_reads(&self) -> usize {
        self.folds.iter().map(|f| f.blind_reads).sum()
    }

    /// Sectioned `key = value` text; `run` is echoed first.
    pub fn to_text(&self, run: &[(String, String)]) -> String {
        let mut s = String::from("[run]\n");
        for (k, v) in run {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "\n[cross-validation]");
        let _ = writeln!(s, "articles = {}", self.articles);
        let _ = writeln!(s, "folds = {}", self.folds.len());
        for (i, f) in self.folds.iter().enumerate() {
            let _ = writeln!(s, "fold.{}.size = {}", i + 1, f.test_size);
            let _ = writeln!(s, "fold.{}.mse = {}", i + 1, sig6(f.ccrf_mse));
            let _ = writeln!(
                s,
                "fold.{}.aggregate_mse = {}",
                i + 1,
                sig6(f.aggregate_mse)
            );
        }
        let _ = writeln!(s, "mean_mse = {}", sig6(self.mean_mse()));
        let _ = writeln!(
            s,
            "aggregate_mean_mse = {}",
            sig6(self.mean_aggregate_mse())
        );
        let _ = writeln!(
            s,
            "language_mean_mse = {}",
            sig6(self.mean(|f| f.language_mse))
        );
        let _ = writeln!(s, "topic_mean_mse = {}", sig6(self.mean(|f| f.topic_mse)));
        let _ = writeln!(s, "source_mean_mse = {}", sig6(self.mean(|f| f.source_mse)));
        let _ = writeln!(s, "user_mean_mse = {}", sig6(self.mean(|f| f.user_mse)));
        let _ = writeln!(s, "\n[ranking]");
        let _ = writeln!(s, "ranked_users = {}", self.user_ranking.len());
        let _ = writeln!(s, "ranked_sources = {}", self.source_ranking.len());
        for (key, v) in [
            ("user_ndcg", &self.user_ndcg),
            ("source_ndcg", &self.source_ndcg),
        ] {
            match v {
                Ok(x) => {
                    let _ = writeln!(s, "{key} = {}", sig6(*x));
                }
                Err(e) => {
                    let _ = writeln!(s, "{key} = n/a ({e})");
                }
            }
        }
        let _ = writeln!(s, "\n[audit]");
        let _ = writeln!(s, "blind_rating_reads = {}", self.blind_reads());
        s
    }
}

fn column_mse(design: &DesignMatrix, truth: &[f64], pick: impl Fn(&Column) -> bool) -> Result<f64> {
    let cols = design.columns.columns();
    let mut pred = Vec::with_capacity(design.len());
    let mut t = Vec::with_capacity(design.len());
    for (row, &y) in design.rows.iter().zip(truth) {
        let (mut sum, mut n) = (0.0, 0.0);
        for c in row.iter().filter(|c| pick(&cols[c.col])) {
            sum += c.value;
            n += c.activity;
        }
        if n > 0.0 {
            pred.push(sum / n);
            t.push(y);
        }
    }
    if pred.is_empty() {
        return Ok(f64::NAN);
    }
    mse(&pred, &t)
}

/// k-fold cross-validation. The topic model is fit once on all texts;
/// role models and CRF weights are trained per fold, with test-fold
/// ratings hidden behind the audited view. A final model trained on every
/// eligible article supplies the rankings.
pub fn cross_validate(
    graph: &CommunityGraph,
    lexicon: &Lexicon,
    settings: &EvalSettings,
) -> Result<CvReport> {
    settings.model.validate()?;
    let graph = graph.filter_min_reviews(settings.min_reviews);
    let plan = make_folds(&graph, settings.folds, settings.model.seed)?;
    let topics = fit_topics(&graph, &settings.model)?;
    let fx = extractor(&graph, lexicon.clone(), topics, &settings.model);
    let store = FeatureStore::build(&graph, &fx);

    let run_fold = |i: usize| -> Result<FoldResult> {
        let test = &plan.folds[i];
        let train = plan.train_ids(i);
        let view = RatingView::new(&graph, test.clone());
        let (roles, ccrf) = train_models(&view, &fx, &store, &train, &settings.model)?;
        let ids: Vec<String> = test.iter().cloned().collect();
        let design = build_design(&graph, &fx, &store, &roles, &ccrf.columns, &ids, None)?;
        let pred = ccrf.predict(&design)?;
        let aggregate = CcrfModel::uniform(ccrf.columns.clone()).predict(&design)?;
        let blind_reads = view.blind_reads();
        // scoring reads the held-out ratings directly, outside the view
        let truth: Vec<f64> = ids
            .iter()
            .map(|id| {
                graph
                    .article(id)
                    .and_then(|a| a.ground_rating)
                    .expect("eligible")
            })
            .collect();
        Ok(FoldResult {
            test_size: ids.len(),
            ccrf_mse: mse(&pred, &truth)?,
            aggregate_mse: mse(&aggregate, &truth)?,
            language_mse: column_mse(&design, &truth, |c| *c == Column::Language)?,
            topic_mse: column_mse(&design, &truth, |c| *c == Column::Topic)?,
            source_mse: column_mse(&design, &truth, |c| {
                matches!(c, Column::Source(_) | Column::BackgroundSource)
            })?,
            user_mse: column_mse(&design, &truth, |c| {
                matches!(c, Column::User(_) | Column::BackgroundUser)
            })?,
            blind_reads,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let folds = pool.install(|| {
        (0..plan.len())
            .into_par_iter()
            .map(run_fold)
            .collect::<Result<Vec<_>>>()
    })?;

    let all: BTreeSet<String> = graph.eligible_articles().into_iter().collect();
    let view = RatingView::open(&graph);
    let (_, final_model) =
        pool.install(|| train_models(&view, &fx, &store, &all, &settings.model))?;
    let user_ranking = final_model.rank_users();
    let source_ranking = final_model.rank_sources();
    let levels: BTreeMap<String, f64> = graph
        .users()
        .filter_map(|u| u.member_level.map(|l| (u.id.clone(), l)))
        .collect();
    let source_truth: BTreeMap<String, f64> = graph
        .sources()
        .filter_map(|s| s.ground_rating.map(|r| (s.id.clone(), r)))
        .collect();
    let user_ndcg =
        ranking_ndcg(&user_ranking, &levels, settings.ndcg_k).map_err(|e| e.to_string());
    let source_ndcg =
        ranking_ndcg(&source_ranking, &source_truth, settings.ndcg_k).map_err(|e| e.to_string());
    Ok(CvReport {
        folds,
        final_model,
        user_ranking,
        source_ranking,
        user_ndcg,
        source_ndcg,
        articles: all.len(),
    })
}
