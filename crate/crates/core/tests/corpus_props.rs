use std::collections::BTreeSet;

use credcrf::corpus::{
    build_edges, load_corpus, write_corpus, Article, CommunityGraph, Media, Node, Review, Source,
    User,
};
use proptest::prelude::*;

fn source(id: String) -> Source {
    Source {
        id: id.clone(),
        name: id,
        media: Media::ALL[0],
        format: "news".into(),
        scope: "national".into(),
        viewpoint: "center".into(),
        top_topics: BTreeSet::new(),
        expertise_topics: BTreeSet::new(),
        ground_rating: Some(3.0),
    }
}

fn user(id: String) -> User {
    User {
        id,
        answers: 1,
        ratings_given: 2,
        comments: 3,
        ratings_received: 4,
        disagreement_raw: None,
        num_raters: 5,
        member_level: Some(2.5),
    }
}

/// (sources, users, per article: source index, rated, reviewer mask)
fn graphs() -> impl Strategy<Value = CommunityGraph> {
    (1usize..4, 0usize..6)
        .prop_flat_map(|(ns, nu)| {
            let article = (
                0..ns,
                any::<bool>(),
                proptest::collection::vec(any::<bool>(), nu),
                1.0f64..5.0,
            );
            (Just(ns), Just(nu), proptest::collection::vec(article, 0..6))
        })
        .prop_map(|(ns, nu, arts)| {
            let sources = (0..ns).map(|i| source(format!("s{i}"))).collect();
            let users = (0..nu).map(|i| user(format!("u{i}"))).collect();
            let mut articles = Vec::new();
            let mut reviews = Vec::new();
            for (j, (s, rated, mask, r)) in arts.into_iter().enumerate() {
                let id = format!("d{j}");
                for (u, on) in mask.into_iter().enumerate() {
                    if on {
                        reviews.push(Review {
                            article_id: id.clone(),
                            user_id: format!("u{u}"),
                            text: format!("review of {id}"),
                            rating: r,
                        });
                    }
                }
                articles.push(Article {
                    id,
                    source_id: format!("s{s}"),
                    title: "t".into(),
                    text: "body".into(),
                    explicit_tags: BTreeSet::new(),
                    ground_rating: rated.then_some(r),
                });
            }
            CommunityGraph::from_parts(sources, users, articles, reviews).unwrap()
        })
}

/// Decides every node pair independently from the raw records.
fn brute_force_edges(g: &CommunityGraph) -> BTreeSet<(String, String)> {
    let mut nodes: Vec<Node> = Vec::new();
    nodes.extend(g.sources().map(|s| Node::Source(s.id.clone())));
    nodes.extend(g.users().map(|u| Node::User(u.id.clone())));
    nodes.extend(g.articles().map(|a| Node::Article(a.id.clone())));
    nodes.extend(g.reviews().iter().map(|r| Node::Review {
        article: r.article_id.clone(),
        user: r.user_id.clone(),
    }));
    let reviewed = |u: &str, d: &str| {
        g.reviews()
            .iter()
            .any(|r| r.user_id == u && r.article_id == d)
    };
    let published = |s: &str, d: &str| g.article(d).map(|a| a.source_id == s).unwrap_or(false);
    let connected = |a: &Node, b: &Node| -> bool {
        use Node::*;
        match (a, b) {
            (Source(s), Article(d)) => published(s, d),
            (Article(d), Review { article, .. }) => article == d,
            (User(u), Review { article, user }) => user == u || (reviewed(u, article) && user != u),
            (User(u), Article(d)) => reviewed(u, d),
            (Source(s), User(u)) => g
                .articles()
                .any(|a| published(s, &a.id) && reviewed(u, &a.id)),
            (Source(s), Review { article, .. }) => published(s, article),
            (User(u), User(v)) => {
                u != v
                    && g.articles()
                        .any(|a| reviewed(u, &a.id) && reviewed(v, &a.id))
            }
            _ => false,
        }
    };
    let mut out = BTreeSet::new();
    for a in &nodes {
        for b in &nodes {
            if a < b && (connected(a, b) || connected(b, a)) {
                out.insert((a.to_string(), b.to_string()));
            }
        }
    }
    out
}

fn edge_names(g: &CommunityGraph) -> BTreeSet<(String, String)> {
    build_edges(g)
        .iter()
        .map(|e| {
            let (a, b) = e.endpoints();
            let (a, b) = (a.to_string(), b.to_string());
            if a < b {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect()
}

fn ordered(set: BTreeSet<(String, String)>) -> BTreeSet<(String, String)> {
    set.into_iter()
        .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
        .collect()
}

proptest! {
    #[test]
    fn edges_match_brute_force(g in graphs()) {
        prop_assert_eq!(edge_names(&g), ordered(brute_force_edges(&g)));
        prop_assert_eq!(g.edges().len(), edge_names(&g).len());
    }

    #[test]
    fn one_clique_per_article(g in graphs()) {
        prop_assert_eq!(g.cliques().len(), g.num_articles());
        prop_assert_eq!(g.stats().cliques, g.num_articles());
    }

    #[test]
    fn serialization_round_trips(g in graphs()) {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_corpus(&g, dir.path()).unwrap();
        prop_assert_eq!(load_corpus(&paths).unwrap(), g);
    }

    #[test]
    fn review_filter_is_idempotent_and_monotone(g in graphs(), k in 0usize..4, extra in 0usize..3) {
        let once = g.filter_min_reviews(k);
        prop_assert_eq!(once.filter_min_reviews(k), once.clone());
        let stricter = g.filter_min_reviews(k + extra);
        let kept: BTreeSet<_> = once.articles().map(|a| a.id.clone()).collect();
        prop_assert!(stricter.articles().all(|a| kept.contains(&a.id)));
        prop_assert!(stricter.edges().is_subset(once.edges()));
    }
}
