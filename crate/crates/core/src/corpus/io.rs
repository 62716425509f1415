//! JSON-Lines ingestion and serialization of the four corpus files.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{
    rating_in_range, validate_user, Article, CommunityGraph, Review, Source, User,
    MEMBER_LEVEL_RANGE, RATING_RANGE,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusPaths {
    pub sources: PathBuf,
    pub users: PathBuf,
    pub articles: PathBuf,
    pub reviews: PathBuf,
}

impl CorpusPaths {
    /// The fixed file names inside one corpus directory.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        CorpusPaths {
            sources: dir.join("sources.jsonl"),
            users: dir.join("users.jsonl"),
            articles: dir.join("articles.jsonl"),
            reviews: dir.join("reviews.jsonl"),
        }
    }
}

fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

fn out_of_range(
    path: &Path,
    line: usize,
    what: &'static str,
    value: f64,
    range: (f64, f64),
) -> Error {
    Error::OutOfRange {
        path: path.to_path_buf(),
        line,
        what,
        value,
        lo: range.0,
        hi: range.1,
    }
}

fn empty_id(path: &Path, line: usize) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: "empty id".into(),
    }
}

/// Loads and validates the four JSON-Lines files, reporting the first
/// offending file and line.
pub fn load_corpus(paths: &CorpusPaths) -> Result<CommunityGraph> {
    let mut sources: BTreeMap<String, Source> = BTreeMap::new();
    for (line, s) in read_records::<Source>(&paths.sources)? {
        if s.id.is_empty() {
            return Err(empty_id(&paths.sources, line));
        }
        if let Some(r) = s.ground_rating.filter(|&r| !rating_in_range(r)) {
            return Err(out_of_range(
                &paths.sources,
                line,
                "source rating",
                r,
                RATING_RANGE,
            ));
        }
        if sources.contains_key(&s.id) {
            return Err(Error::Duplicate {
                path: paths.sources.clone(),
                line,
                what: "source",
                id: s.id,
            });
        }
        sources.insert(s.id.clone(), s);
    }

    let mut users: BTreeMap<String, User> = BTreeMap::new();
    for (line, u) in read_records::<User>(&paths.users)? {
        if u.id.is_empty() {
            return Err(empty_id(&paths.users, line));
        }
        let (lo, hi) = MEMBER_LEVEL_RANGE;
        if let Some(level) = u.member_level.filter(|l| !(*l >= lo && *l <= hi)) {
            return Err(out_of_range(
                &paths.users,
                line,
                "member level",
                level,
                MEMBER_LEVEL_RANGE,
            ));
        }
        validate_user(&u).map_err(|message| Error::Parse {
            path: paths.users.clone(),
            line,
            message,
        })?;
        if users.contains_key(&u.id) {
            return Err(Error::Duplicate {
                path: paths.users.clone(),
                line,
                what: "user",
                id: u.id,
            });
        }
        users.insert(u.id.clone(), u);
    }

    let mut articles: BTreeMap<String, Article> = BTreeMap::new();
    for (line, a) in read_records::<Article>(&paths.articles)? {
        if a.id.is_empty() {
            return Err(empty_id(&paths.articles, line));
        }
        if let Some(r) = a.ground_rating.filter(|&r| !rating_in_range(r)) {
            return Err(out_of_range(
                &paths.articles,
                line,
                "article rating",
                r,
                RATING_RANGE,
            ));
        }
        if !sources.contains_key(&a.source_id) {
            return Err(Error::DanglingReference {
                path: paths.articles.clone(),
                line,
                message: format!("unknown source `{}`", a.source_id),
            });
        }
        if articles.contains_key(&a.id) {
            return Err(Error::Duplicate {
                path: paths.articles.clone(),
                line,
                what: "article",
                id: a.id,
            });
        }
        articles.insert(a.id.clone(), a);
    }

    let mut reviews = Vec::new();
    let mut pairs = HashSet::new();
    for (line, r) in read_records::<Review>(&paths.reviews)? {
        if !articles.contains_key(&r.article_id) {
            return Err(Error::DanglingReference {
                path: paths.reviews.clone(),
                line,
                message: format!("unknown article `{}`", r.article_id),
            });
        }
        if !users.contains_key(&r.user_id) {
            return Err(Error::DanglingReference {
                path: paths.reviews.clone(),
                line,
                message: format!("unknown user `{}`", r.user_id),
            });
        }
        if !rating_in_range(r.rating) {
            return Err(out_of_range(
                &paths.reviews,
                line,
                "review rating",
                r.rating,
                RATING_RANGE,
            ));
        }
        if !pairs.insert((r.article_id.clone(), r.user_id.clone())) {
            return Err(Error::Duplicate {
                path: paths.reviews.clone(),
                line,
                what: "review",
                id: format!("{}/{}", r.article_id, r.user_id),
            });
        }
        reviews.push(r);
    }

    CommunityGraph::from_parts(
        sources.into_values().collect(),
        users.into_values().collect(),
        articles.into_values().collect(),
        reviews,
    )
}

fn write_records<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        let line = serde_json::to_string(rec).map_err(|e| Error::InvalidInput(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the graph as four JSON-Lines files in `dir` (created if needed).
pub fn write_corpus(graph: &CommunityGraph, dir: impl AsRef<Path>) -> Result<CorpusPaths> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = CorpusPaths::in_dir(dir);
    write_records(&paths.sources, graph.sources())?;
    write_records(&paths.users, graph.users())?;
    write_records(&paths.articles, graph.articles())?;
    write_records(&paths.reviews, graph.reviews())?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::figure_instance;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn fixture(dir: &Path) {
        write(
            dir,
            "sources.jsonl",
            r#"{"id":"s1","name":"One","media":"newspaper","format":"news","scope":"national","viewpoint":"center","top_topics":["politics"],"expertise_topics":[],"ground_rating":4.0,"extra":1}
"#,
        );
        write(
            dir,
            "users.jsonl",
            r#"{"id":"u1","answers":1,"ratings_given":2,"comments":3,"ratings_received":4,"num_raters":5,"member_level":3.0}
{"id":"u2","answers":0,"ratings_given":0,"comments":0,"ratings_received":0,"num_raters":0}
"#,
        );
        write(
            dir,
            "articles.jsonl",
            r#"{"id":"d1","source_id":"s1","title":"T1","text":"x","explicit_tags":["politics"],"ground_rating":4.0}
{"id":"d2","source_id":"s1","title":"T2","text":"y","explicit_tags":[]}
"#,
        );
        write(
            dir,
            "reviews.jsonl",
            r#"{"article_id":"d1","user_id":"u1","text":"good","rating":4.0}

{"article_id":"d1","user_id":"u2","text":"ok","rating":3.5}
{"article_id":"d2","user_id":"u2","text":"meh","rating":3.0}
"#,
        );
    }

    #[test]
    fn loads_figure_fixture() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let g = load_corpus(&CorpusPaths::in_dir(dir.path())).unwrap();
        let s = g.stats();
        assert_eq!((s.nodes, s.edges, s.cliques), (8, 19, 2));
    }

    #[test]
    fn empty_reviews_file_loads() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        write(dir.path(), "reviews.jsonl", "");
        let g = load_corpus(&CorpusPaths::in_dir(dir.path())).unwrap();
        assert!(g
            .cliques()
            .iter()
            .all(|c| c.user_ids.is_empty() && c.review_ids.is_empty()));
        assert_eq!(g.edges().len(), 2);
    }

    #[test]
    fn dangling_review_names_line() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        write(
            dir.path(),
            "reviews.jsonl",
            "{\"article_id\":\"d1\",\"user_id\":\"u1\",\"text\":\"\",\"rating\":4}\n{\"article_id\":\"d9\",\"user_id\":\"u1\",\"text\":\"\",\"rating\":4}\n",
        );
        let err = load_corpus(&CorpusPaths::in_dir(dir.path())).unwrap_err();
        assert!(
            matches!(err, Error::DanglingReference { line: 2, .. }),
            "{err}"
        );
        assert!(err.to_string().contains("reviews.jsonl:2"));
    }

    #[test]
    fn malformed_and_missing_fields() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        write(dir.path(), "users.jsonl", "{\"id\":\"u1\"}\n");
        assert!(matches!(
            load_corpus(&CorpusPaths::in_dir(dir.path())),
            Err(Error::Parse { line: 1, .. })
        ));
        write(dir.path(), "users.jsonl", "not json\n");
        assert!(matches!(
            load_corpus(&CorpusPaths::in_dir(dir.path())),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn rejects_out_of_range_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        write(
            dir.path(),
            "reviews.jsonl",
            "{\"article_id\":\"d1\",\"user_id\":\"u1\",\"text\":\"\",\"rating\":6}\n",
        );
        assert!(matches!(
            load_corpus(&CorpusPaths::in_dir(dir.path())),
            Err(Error::OutOfRange { line: 1, .. })
        ));
        write(
            dir.path(),
            "reviews.jsonl",
            "{\"article_id\":\"d1\",\"user_id\":\"u1\",\"text\":\"\",\"rating\":2}\n{\"article_id\":\"d1\",\"user_id\":\"u1\",\"text\":\"\",\"rating\":3}\n",
        );
        assert!(matches!(
            load_corpus(&CorpusPaths::in_dir(dir.path())),
            Err(Error::Duplicate { line: 2, .. })
        ));
    }

    #[test]
    fn missing_file_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_corpus(&CorpusPaths::in_dir(dir.path())).unwrap_err();
        assert!(err.to_string().contains("sources.jsonl"));
    }

    #[test]
    fn write_then_load_round_trips() {
        let g = figure_instance();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_corpus(&g, dir.path()).unwrap();
        assert_eq!(load_corpus(&paths).unwrap(), g);
    }
}
