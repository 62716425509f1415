//! Community data model: sources, users, articles and reviews, plus the
//! clique graph that ties each article to its source, reviewers and reviews.

mod io;
pub mod synth;
mod view;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_corpus, write_corpus, CorpusPaths};
pub use view::RatingView;

/// Lowest and highest valid rating on the community scale.
pub const RATING_RANGE: (f64, f64) = (1.0, 5.0);

/// Declared range for the member level used as ground-truth expertise.
pub const MEMBER_LEVEL_RANGE: (f64, f64) = (0.0, 5.0);

pub(crate) fn rating_in_range(r: f64) -> bool {
    r.is_finite() && r >= RATING_RANGE.0 && r <= RATING_RANGE.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Media {
    Newspaper,
    Blog,
    Radio,
    Magazine,
    Online,
    Tv,
    Wire,
}

impl Media {
    pub const ALL: [Media; 7] = [
        Media::Newspaper,
        Media::Blog,
        Media::Radio,
        Media::Magazine,
        Media::Online,
        Media::Tv,
        Media::Wire,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Media::Newspaper => "newspaper",
            Media::Blog => "blog",
            Media::Radio => "radio",
            Media::Magazine => "magazine",
            Media::Online => "online",
            Media::Tv => "tv",
            Media::Wire => "wire",
        }
    }
}

impl fmt::Display for Media {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub id: String,
    pub name: String,
    pub media: Media,
    pub format: String,
    pub scope: String,
    pub viewpoint: String,
    pub top_topics: BTreeSet<String>,
    pub expertise_topics: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_rating: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: String,
    pub answers: u64,
    pub ratings_given: u64,
    pub comments: u64,
    pub ratings_received: u64,
    #[serde(
        default,
        rename = "disagreement",
        skip_serializing_if = "Option::is_none"
    )]
    pub disagreement_raw: Option<f64>,
    pub num_raters: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub member_level: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub source_id: String,
    pub title: String,
    pub text: String,
    pub explicit_tags: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_rating: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub article_id: String,
    pub user_id: String,
    pub text: String,
    pub rating: f64,
}

/// Position of a review inside [`CommunityGraph::reviews`].
pub type ReviewIdx = usize;

/// One article with its source, reviewers and their reviews.
#[derive(Debug, Clone, PartialEq)]
pub struct Clique {
    pub article_id: String,
    pub source_id: String,
    pub user_ids: Vec<String>,
    pub review_ids: Vec<ReviewIdx>,
}

impl Clique {
    pub fn len(&self) -> usize {
        self.review_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.review_ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Source(String),
    Article(String),
    User(String),
    Review { article: String, user: String },
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Source(id) => write!(f, "s:{id}"),
            Node::Article(id) => write!(f, "d:{id}"),
            Node::User(id) => write!(f, "u:{id}"),
            Node::Review { article, user } => write!(f, "r:{article}/{user}"),
        }
    }
}

/// Undirected edge stored with its endpoints in canonical (sorted) order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge(Node, Node);

impl Edge {
    pub fn new(a: Node, b: Node) -> Self {
        if a <= b {
            Edge(a, b)
        } else {
            Edge(b, a)
        }
    }

    pub fn endpoints(&self) -> (&Node, &Node) {
        (&self.0, &self.1)
    }
}

/// Immutable store of the community and its clique structure.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityGraph {
    sources: BTreeMap<String, Source>,
    users: BTreeMap<String, User>,
    articles: BTreeMap<String, Article>,
    reviews: Vec<Review>,
    cliques: Vec<Clique>,
    clique_index: BTreeMap<String, usize>,
    edges: BTreeSet<Edge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct GraphStats {
    pub sources: usize,
    pub users: usize,
    pub articles: usize,
    pub reviews: usize,
    pub nodes: usize,
    pub edges: usize,
    pub cliques: usize,
}

impl fmt::Display for GraphStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sources={}", self.sources)?;
        writeln!(f, "users={}", self.users)?;
        writeln!(f, "articles={}", self.articles)?;
        writeln!(f, "reviews={}", self.reviews)?;
        writeln!(f, "nodes={}", self.nodes)?;
        writeln!(f, "edges={}", self.edges)?;
        write!(f, "cliques={}", self.cliques)
    }
}

impl CommunityGraph {
    /// Validates the records and builds cliques and edges.
    pub fn from_parts(
        sources: Vec<Source>,
        users: Vec<User>,
        articles: Vec<Article>,
        mut reviews: Vec<Review>,
    ) -> Result<Self> {
        let mut source_map = BTreeMap::new();
        for s in sources {
            validate_source(&s).map_err(Error::InvalidInput)?;
            if source_map.contains_key(&s.id) {
                return Err(Error::InvalidInput(format!("duplicate source `{}`", s.id)));
            }
            source_map.insert(s.id.clone(), s);
        }
        let mut user_map = BTreeMap::new();
        for u in users {
            validate_user(&u).map_err(Error::InvalidInput)?;
            if user_map.contains_key(&u.id) {
                return Err(Error::InvalidInput(format!("duplicate user `{}`", u.id)));
            }
            user_map.insert(u.id.clone(), u);
        }
        let mut article_map = BTreeMap::new();
        for a in articles {
            validate_article(&a).map_err(Error::InvalidInput)?;
            if !source_map.contains_key(&a.source_id) {
                return Err(Error::InvalidInput(format!(
                    "article `{}` references unknown source `{}`",
                    a.id, a.source_id
                )));
            }
            if article_map.contains_key(&a.id) {
                return Err(Error::InvalidInput(format!("duplicate article `{}`", a.id)));
            }
            article_map.insert(a.id.clone(), a);
        }
        let mut seen = HashSet::new();
        for r in &reviews {
            validate_review(r).map_err(Error::InvalidInput)?;
            if !article_map.contains_key(&r.article_id) {
                return Err(Error::InvalidInput(format!(
                    "review references unknown article `{}`",
                    r.article_id
                )));
            }
            if !user_map.contains_key(&r.user_id) {
                return Err(Error::InvalidInput(format!(
                    "review references unknown user `{}`",
                    r.user_id
                )));
            }
            if !seen.insert((r.article_id.clone(), r.user_id.clone())) {
                return Err(Error::InvalidInput(format!(
                    "duplicate review of `{}` by `{}`",
                    r.article_id, r.user_id
                )));
            }
        }
        reviews.sort_by(|a, b| (&a.article_id, &a.user_id).cmp(&(&b.article_id, &b.user_id)));
        Ok(Self::assemble(source_map, user_map, article_map, reviews))
    }

    fn assemble(
        sources: BTreeMap<String, Source>,
        users: BTreeMap<String, User>,
        articles: BTreeMap<String, Article>,
        reviews: Vec<Review>,
    ) -> Self {
        let mut cliques: Vec<Clique> = articles
            .values()
            .map(|a| Clique {
                article_id: a.id.clone(),
                source_id: a.source_id.clone(),
                user_ids: Vec::new(),
                review_ids: Vec::new(),
            })
            .collect();
        let clique_index: BTreeMap<String, usize> = cliques
            .iter()
            .enumerate()
            .map(|(i, c)| (c.article_id.clone(), i))
            .collect();
        for (idx, r) in reviews.iter().enumerate() {
            let c = &mut cliques[clique_index[&r.article_id]];
            c.user_ids.push(r.user_id.clone());
            c.review_ids.push(idx);
        }
        let mut graph = CommunityGraph {
            sources,
            users,
            articles,
            reviews,
            cliques,
            clique_index,
            edges: BTreeSet::new(),
        };
        graph.edges = build_edges(&graph);
        graph
    }

    pub fn empty() -> Self {
        Self::assemble(
            BTreeMap::new(),
            BTreeMap::new(),
            BTreeMap::new(),
            Vec::new(),
        )
    }

    pub fn sources(&self) -> impl Iterator<Item = &Source> {
        self.sources.values()
    }

    pub fn users(&self) -> impl Iterator<Item = &User> {
        self.users.values()
    }

    pub fn articles(&self) -> impl Iterator<Item = &Article> {
        self.articles.values()
    }

    pub fn reviews(&self) -> &[Review] {
        &self.reviews
    }

    pub fn cliques(&self) -> &[Clique] {
        &self.cliques
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn source(&self, id: &str) -> Option<&Source> {
        self.sources.get(id)
    }

    pub fn user(&self, id: &str) -> Option<&User> {
        self.users.get(id)
    }

    pub fn article(&self, id: &str) -> Option<&Article> {
        self.articles.get(id)
    }

    pub fn review(&self, idx: ReviewIdx) -> &Review {
        &self.reviews[idx]
    }

    pub fn clique(&self, article_id: &str) -> Option<&Clique> {
        self.clique_index.get(article_id).map(|&i| &self.cliques[i])
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_articles(&self) -> usize {
        self.articles.len()
    }

    /// Articles usable for rating prediction: a ground rating and at least
    /// one review.
    pub fn eligible_articles(&self) -> Vec<String> {
        self.cliques
            .iter()
            .filter(|c| !c.is_empty() && self.articles[&c.article_id].ground_rating.is_some())
            .map(|c| c.article_id.clone())
            .collect()
    }

    /// Keeps only articles with at least `k` reviews. Sources and users stay.
    pub fn filter_min_reviews(&self, k: usize) -> CommunityGraph {
        let keep: BTreeSet<&str> = self
            .cliques
            .iter()
            .filter(|c| c.len() >= k)
            .map(|c| c.article_id.as_str())
            .collect();
        let articles = self
            .articles
            .iter()
            .filter(|(id, _)| keep.contains(id.as_str()))
            .map(|(id, a)| (id.clone(), a.clone()))
            .collect();
        let reviews = self
            .reviews
            .iter()
            .filter(|r| keep.contains(r.article_id.as_str()))
            .cloned()
            .collect();
        Self::assemble(self.sources.clone(), self.users.clone(), articles, reviews)
    }

    pub fn stats(&self) -> GraphStats {
        graph_stats(self)
    }
}

/// Wires every clique according to the seven interaction rules.
pub fn build_edges(graph: &CommunityGraph) -> BTreeSet<Edge> {
    let mut edges = BTreeSet::new();
    for c in &graph.cliques {
        let source = Node::Source(c.source_id.clone());
        let article = Node::Article(c.article_id.clone());
        edges.insert(Edge::new(source.clone(), article.clone()));
        let reviews: Vec<Node> = c
            .user_ids
            .iter()
            .map(|u| Node::Review {
                article: c.article_id.clone(),
                user: u.clone(),
            })
            .collect();
        for (u, r) in c.user_ids.iter().zip(&reviews) {
            let user = Node::User(u.clone());
            edges.insert(Edge::new(article.clone(), r.clone()));
            edges.insert(Edge::new(user.clone(), r.clone()));
            edges.insert(Edge::new(user.clone(), article.clone()));
            edges.insert(Edge::new(source.clone(), user.clone()));
            edges.insert(Edge::new(source.clone(), r.clone()));
        }
        for (a, ua) in c.user_ids.iter().enumerate() {
            for (b, ub) in c.user_ids.iter().enumerate() {
                if a == b {
                    continue;
                }
                edges.insert(Edge::new(Node::User(ua.clone()), reviews[b].clone()));
                if a < b {
                    edges.insert(Edge::new(Node::User(ua.clone()), Node::User(ub.clone())));
                }
            }
        }
    }
    edges
}

pub fn graph_stats(graph: &CommunityGraph) -> GraphStats {
    GraphStats {
        sources: graph.sources.len(),
        users: graph.users.len(),
        articles: graph.articles.len(),
        reviews: graph.reviews.len(),
        nodes: graph.sources.len() + graph.users.len() + graph.articles.len() + graph.reviews.len(),
        edges: graph.edges.len(),
        cliques: graph.cliques.len(),
    }
}

/// Disjoint article folds for cross-validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub folds: Vec<BTreeSet<String>>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    /// Every article outside fold `i`.
    pub fn train_ids(&self, i: usize) -> BTreeSet<String> {
        self.folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, f)| f.iter().cloned())
            .collect()
    }
}

/// Shuffles the eligible articles with `seed` and deals them round-robin.
pub fn make_folds(graph: &CommunityGraph, n_folds: usize, seed: u64) -> Result<FoldPlan> {
    let mut ids = graph.eligible_articles();
    if n_folds == 0 {
        return Err(Error::Config("fold count must be positive".into()));
    }
    if ids.len() < n_folds {
        return Err(Error::InsufficientData(format!(
            "{} eligible articles for {} folds",
            ids.len(),
            n_folds
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let mut folds = vec![BTreeSet::new(); n_folds];
    for (i, id) in ids.into_iter().enumerate() {
        folds[i % n_folds].insert(id);
    }
    Ok(FoldPlan { folds, seed })
}

fn check_rating(what: &str, r: Option<f64>) -> std::result::Result<(), String> {
    match r {
        Some(v) if !rating_in_range(v) => Err(format!("{what} {v} outside [1, 5]")),
        _ => Ok(()),
    }
}

pub(crate) fn validate_source(s: &Source) -> std::result::Result<(), String> {
    if s.id.is_empty() {
        return Err("source id is empty".into());
    }
    check_rating("source rating", s.ground_rating)
}

pub(crate) fn validate_user(u: &User) -> std::result::Result<(), String> {
    if u.id.is_empty() {
        return Err("user id is empty".into());
    }
    if let Some(level) = u.member_level {
        let (lo, hi) = MEMBER_LEVEL_RANGE;
        if !(level.is_finite() && level >= lo && level <= hi) {
            return Err(format!("member level {level} outside [{lo}, {hi}]"));
        }
    }
    if let Some(d) = u.disagreement_raw {
        if !d.is_finite() {
            return Err("disagreement is not finite".into());
        }
    }
    Ok(())
}

pub(crate) fn validate_article(a: &Article) -> std::result::Result<(), String> {
    if a.id.is_empty() {
        return Err("article id is empty".into());
    }
    check_rating("article rating", a.ground_rating)
}

pub(crate) fn validate_review(r: &Review) -> std::result::Result<(), String> {
    check_rating("review rating", Some(r.rating))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn source(id: &str, rating: Option<f64>) -> Source {
        Source {
            id: id.into(),
            name: format!("Source {id}"),
            media: Media::Newspaper,
            format: "news".into(),
            scope: "national".into(),
            viewpoint: "center".into(),
            top_topics: BTreeSet::new(),
            expertise_topics: BTreeSet::new(),
            ground_rating: rating,
        }
    }

    pub(crate) fn user(id: &str) -> User {
        User {
            id: id.into(),
            answers: 0,
            ratings_given: 0,
            comments: 0,
            ratings_received: 0,
            disagreement_raw: None,
            num_raters: 0,
            member_level: None,
        }
    }

    pub(crate) fn article(id: &str, source: &str, rating: Option<f64>) -> Article {
        Article {
            id: id.into(),
            source_id: source.into(),
            title: String::new(),
            text: String::new(),
            explicit_tags: BTreeSet::new(),
            ground_rating: rating,
        }
    }

    pub(crate) fn review(article: &str, user: &str, rating: f64) -> Review {
        Review {
            article_id: article.into(),
            user_id: user.into(),
            text: String::new(),
            rating,
        }
    }

    /// s1; d1 reviewed by u1,u2; d2 reviewed by u2.
    pub(crate) fn figure_instance() -> CommunityGraph {
        CommunityGraph::from_parts(
            vec![source("s1", Some(4.0))],
            vec![user("u1"), user("u2")],
            vec![
                article("d1", "s1", Some(4.0)),
                article("d2", "s1", Some(3.0)),
            ],
            vec![
                review("d1", "u1", 4.0),
                review("d1", "u2", 3.5),
                review("d2", "u2", 3.0),
            ],
        )
        .unwrap()
    }

    fn edge_names(g: &CommunityGraph) -> BTreeSet<(String, String)> {
        g.edges()
            .iter()
            .map(|e| {
                let (a, b) = e.endpoints();
                (a.to_string(), b.to_string())
            })
            .collect()
    }

    #[test]
    fn figure_instance_has_nineteen_edges() {
        let g = figure_instance();
        let s = |x: &str| Node::Source(x.into());
        let d = |x: &str| Node::Article(x.into());
        let u = |x: &str| Node::User(x.into());
        let r = |a: &str, b: &str| Node::Review {
            article: a.into(),
            user: b.into(),
        };
        let expected: BTreeSet<Edge> = [
            (s("s1"), d("d1")),
            (s("s1"), d("d2")),
            (d("d1"), r("d1", "u1")),
            (d("d1"), r("d1", "u2")),
            (d("d2"), r("d2", "u2")),
            (u("u1"), r("d1", "u1")),
            (u("u2"), r("d1", "u2")),
            (u("u2"), r("d2", "u2")),
            (u("u1"), d("d1")),
            (u("u2"), d("d1")),
            (u("u2"), d("d2")),
            (s("s1"), u("u1")),
            (s("s1"), u("u2")),
            (s("s1"), r("d1", "u1")),
            (s("s1"), r("d1", "u2")),
            (s("s1"), r("d2", "u2")),
            (u("u1"), r("d1", "u2")),
            (u("u2"), r("d1", "u1")),
            (u("u1"), u("u2")),
        ]
        .into_iter()
        .map(|(a, b)| Edge::new(a, b))
        .collect();
        assert_eq!(expected.len(), 19);
        assert_eq!(g.edges(), &expected);
        let stats = g.stats();
        assert_eq!((stats.nodes, stats.edges, stats.cliques), (8, 19, 2));
    }

    #[test]
    fn single_reviewer_has_no_user_user_edge() {
        let g = CommunityGraph::from_parts(
            vec![source("s", None)],
            vec![user("a")],
            vec![article("d", "s", None)],
            vec![review("d", "a", 2.0)],
        )
        .unwrap();
        assert!(!edge_names(&g)
            .iter()
            .any(|(a, b)| a.starts_with("u:") && b.starts_with("u:")));
    }

    #[test]
    fn unreviewed_article_only_links_its_source() {
        let g = CommunityGraph::from_parts(
            vec![source("s", None)],
            vec![user("a")],
            vec![article("d", "s", None)],
            vec![],
        )
        .unwrap();
        assert_eq!(
            edge_names(&g),
            [("s:s".to_string(), "d:d".to_string())].into()
        );
        assert!(g.cliques()[0].is_empty());
    }

    #[test]
    fn filter_by_review_count() {
        let g = figure_instance();
        assert_eq!(g.filter_min_reviews(0), g);
        assert_eq!(g.filter_min_reviews(1).stats().cliques, 2);
        let f3 = g.filter_min_reviews(3);
        assert_eq!(f3.num_articles(), 0);
        assert_eq!(f3.num_users(), 2);
        assert_eq!(f3.num_sources(), 1);
        let f2 = g.filter_min_reviews(2);
        assert_eq!(f2.num_articles(), 1);
        assert_eq!(f2.reviews().len(), 2);
    }

    #[test]
    fn empty_graph_stats() {
        assert_eq!(CommunityGraph::empty().stats(), GraphStats::default());
    }

    #[test]
    fn rejects_duplicate_review_pair() {
        let err = CommunityGraph::from_parts(
            vec![source("s", None)],
            vec![user("a")],
            vec![article("d", "s", None)],
            vec![review("d", "a", 2.0), review("d", "a", 3.0)],
        )
        .unwrap_err();
        assert!(err.to_string().contains("duplicate review"));
    }

    fn many_articles(n: usize) -> CommunityGraph {
        let articles = (0..n)
            .map(|i| article(&format!("d{i:02}"), "s", Some(3.0)))
            .collect();
        let reviews = (0..n)
            .map(|i| review(&format!("d{i:02}"), "u", 3.0))
            .collect();
        CommunityGraph::from_parts(vec![source("s", None)], vec![user("u")], articles, reviews)
            .unwrap()
    }

    #[test]
    fn folds_partition_evenly() {
        let plan = make_folds(&many_articles(20), 10, 1).unwrap();
        assert!(plan.folds.iter().all(|f| f.len() == 2));
        let mut sizes: Vec<usize> = make_folds(&many_articles(21), 10, 1)
            .unwrap()
            .folds
            .iter()
            .map(BTreeSet::len)
            .collect();
        sizes.sort();
        assert_eq!(sizes, [2, 2, 2, 2, 2, 2, 2, 2, 2, 3]);
    }

    #[test]
    fn folds_are_deterministic() {
        let g = many_articles(30);
        assert_eq!(
            make_folds(&g, 10, 9).unwrap(),
            make_folds(&g, 10, 9).unwrap()
        );
        assert_ne!(
            make_folds(&g, 10, 9).unwrap(),
            make_folds(&g, 10, 10).unwrap()
        );
    }

    #[test]
    fn too_few_articles_for_folds() {
        assert!(matches!(
            make_folds(&many_articles(5), 10, 0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn fold_union_covers_eligible() {
        let g = many_articles(23);
        let plan = make_folds(&g, 4, 3).unwrap();
        let union: Vec<String> = plan.folds.iter().flatten().cloned().collect();
        assert_eq!(union.len(), 23);
        let set: BTreeSet<String> = union.into_iter().collect();
        assert_eq!(set, g.eligible_articles().into_iter().collect());
        assert_eq!(plan.train_ids(0).len() + plan.folds[0].len(), 23);
    }
}
