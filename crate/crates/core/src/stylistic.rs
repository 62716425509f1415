//! Lexicon categories and the relative-frequency stylistic features.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const DEFAULT_BUNDLE: &[(&str, &str)] = &[
    ("adjectives", include_str!("../lexicons/adjectives.txt")),
    ("adverbs", include_str!("../lexicons/adverbs.txt")),
    ("affective", include_str!("../lexicons/affective.txt")),
    ("assertives", include_str!("../lexicons/assertives.txt")),
    ("bias", include_str!("../lexicons/bias.txt")),
    ("conditionals", include_str!("../lexicons/conditionals.txt")),
    (
        "contrasting_conj",
        include_str!("../lexicons/contrasting_conj.txt"),
    ),
    ("definite_det", include_str!("../lexicons/definite_det.txt")),
    ("factives", include_str!("../lexicons/factives.txt")),
    ("first_person", include_str!("../lexicons/first_person.txt")),
    (
        "following_conj",
        include_str!("../lexicons/following_conj.txt"),
    ),
    ("hedges", include_str!("../lexicons/hedges.txt")),
    ("implicatives", include_str!("../lexicons/implicatives.txt")),
    (
        "inferential_conj",
        include_str!("../lexicons/inferential_conj.txt"),
    ),
    ("negation", include_str!("../lexicons/negation.txt")),
    ("negative", include_str!("../lexicons/negative.txt")),
    ("positive", include_str!("../lexicons/positive.txt")),
    (
        "question_particles",
        include_str!("../lexicons/question_particles.txt"),
    ),
    ("report_verbs", include_str!("../lexicons/report_verbs.txt")),
    (
        "second_person",
        include_str!("../lexicons/second_person.txt"),
    ),
    (
        "strong_modals",
        include_str!("../lexicons/strong_modals.txt"),
    ),
    ("subjective", include_str!("../lexicons/subjective.txt")),
    ("third_person", include_str!("../lexicons/third_person.txt")),
    ("weak_modals", include_str!("../lexicons/weak_modals.txt")),
];

/// Category name to entries; every entry is a nonempty token sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    categories: BTreeMap<String, Category>,
}

#[derive(Debug, Clone, PartialEq)]
struct Category {
    entries: Vec<Vec<String>>,
    /// first token -> entry indices, longest entry first
    by_head: HashMap<String, Vec<usize>>,
}

impl Category {
    fn new(mut entries: Vec<Vec<String>>) -> Self {
        entries.sort();
        entries.dedup();
        let mut by_head: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            by_head.entry(e[0].clone()).or_default().push(i);
        }
        for idx in by_head.values_mut() {
            idx.sort_by(|&a, &b| entries[b].len().cmp(&entries[a].len()).then(a.cmp(&b)));
        }
        Category { entries, by_head }
    }

    /// Length of the longest entry starting at `pos`, if any.
    fn match_at(&self, tokens: &[String], pos: usize) -> Option<usize> {
        let candidates = self.by_head.get(&tokens[pos])?;
        candidates
            .iter()
            .map(|&i| &self.entries[i])
            .find(|e| tokens[pos..].starts_with(e))
            .map(Vec::len)
    }

    /// Greedy left-to-right count of entry occurrences.
    fn count(&self, tokens: &[String]) -> usize {
        let mut n = 0;
        let mut pos = 0;
        while pos < tokens.len() {
            match self.match_at(tokens, pos) {
                Some(len) => {
                    n += 1;
                    pos += len;
                }
                None => pos += 1,
            }
        }
        n
    }
}

fn parse_entries(body: &str) -> Vec<Vec<String>> {
    body.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(tokenize)
        .filter(|t| !t.is_empty())
        .collect()
}

impl Lexicon {
    pub fn from_categories<I, S>(categories: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<String>)>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (name, entries) in categories {
            let name = name.into().to_lowercase();
            let entries: Vec<Vec<String>> = entries
                .iter()
                .map(|e| tokenize(e))
                .filter(|t| !t.is_empty())
                .collect();
            if map.insert(name.clone(), Category::new(entries)).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate lexicon category `{name}`"
                )));
            }
        }
        Ok(Lexicon { categories: map })
    }

    /// The lexicon bundle compiled into the crate.
    pub fn default_bundle() -> Self {
        let categories = DEFAULT_BUNDLE
            .iter()
            .map(|(name, body)| (name.to_string(), Category::new(parse_entries(body))))
            .collect();
        Lexicon { categories }
    }

    pub fn category_names(&self) -> impl Iterator<Item = &str> {
        self.categories.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn entries(&self, category: &str) -> Option<&[Vec<String>]> {
        self.categories.get(category).map(|c| c.entries.as_slice())
    }

    pub fn contains(&self, category: &str, entry: &str) -> bool {
        let toks = tokenize(entry);
        self.entries(category)
            .is_some_and(|es| es.iter().any(|e| *e == toks))
    }
}

/// Reads one category per `*.txt` file; the file stem names the category.
pub fn load_lexicons(dir: impl AsRef<Path>) -> Result<Lexicon> {
    let dir = dir.as_ref();
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "txt"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no lexicon files in {}",
            dir.display()
        )));
    }
    let mut categories = BTreeMap::new();
    for path in files {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| {
                Error::InvalidInput(format!("bad lexicon file name {}", path.display()))
            })?
            .to_lowercase();
        let body = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        if categories
            .insert(name.clone(), Category::new(parse_entries(&body)))
            .is_some()
        {
            return Err(Error::InvalidInput(format!(
                "duplicate lexicon category `{name}` in {}",
                dir.display()
            )));
        }
    }
    Ok(Lexicon { categories })
}

/// Lowercases and splits on every run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// First `max_chars` Unicode scalar values of `text`.
pub fn truncate_text(text: &str, max_chars: usize) -> &str {
    match text.char_indices().nth(max_chars) {
        Some((byte, _)) => &text[..byte],
        None => text,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StyleFeatures {
    pub dims: BTreeMap<String, f64>,
    pub token_count: usize,
}

impl StyleFeatures {
    /// Values in category-name order.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.dims.values().copied()
    }
}

pub fn style_features(text: &str, lexicon: &Lexicon) -> StyleFeatures {
    style_features_from_tokens(&tokenize(text), lexicon)
}

/// Per category: occurrences of its entries divided by the token count.
pub fn style_features_from_tokens(tokens: &[String], lexicon: &Lexicon) -> StyleFeatures {
    let n = tokens.len();
    let dims = lexicon
        .categories
        .iter()
        .map(|(name, cat)| {
            let v = if n == 0 {
                0.0
            } else {
                cat.count(tokens) as f64 / n as f64
            };
            (name.clone(), v)
        })
        .collect();
    StyleFeatures {
        dims,
        token_count: n,
    }
}

/// Which parts of an article feed its text features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TextMode {
    TitleOnly,
    #[default]
    TitleAndText,
}

/// Title followed by the body cut to `max_chars`; titles are never cut.
pub fn article_text(title: &str, body: &str, mode: TextMode, max_chars: usize) -> String {
    match mode {
        TextMode::TitleOnly => title.to_string(),
        TextMode::TitleAndText => {
            let body = truncate_text(body, max_chars);
            if title.is_empty() {
                body.to_string()
            } else {
                format!("{title} {body}")
            }
        }
    }
}
