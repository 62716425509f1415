//! Linear support vector regression with the squared epsilon-insensitive
//! loss, and the four families of role models fed into the CRF.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::{RatingView, RATING_RANGE};
use crate::error::{Error, Result};
use crate::features::{FeatureExtractor, FeatureSpace, FeatureStore};
use crate::topics::join_floats;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Language,
    Topic,
    Source(String),
    User(String),
    BackgroundSource,
    BackgroundUser,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Language => f.write_str("language"),
            Role::Topic => f.write_str("topic"),
            Role::Source(id) => write!(f, "source:{id}"),
            Role::User(id) => write!(f, "user:{id}"),
            Role::BackgroundSource => f.write_str("background-source"),
            Role::BackgroundUser => f.write_str("background-user"),
        }
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "language" => Role::Language,
            "topic" => Role::Topic,
            "background-source" => Role::BackgroundSource,
            "background-user" => Role::BackgroundUser,
            _ => {
                if let Some(id) = s.strip_prefix("source:") {
                    Role::Source(id.to_string())
                } else if let Some(id) = s.strip_prefix("user:") {
                    Role::User(id.to_string())
                } else {
                    return Err(format!("unknown role `{s}`"));
                }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrSettings {
    pub c: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// z-score features and center the target on the training examples
    pub standardize: bool,
    /// clamp predictions to the rating scale
    pub clamp: bool,
}

impl Default for SvrSettings {
    fn default() -> Self {
        SvrSettings {
            c: 1.0,
            epsilon: 0.1,
            tol: 1e-8,
            max_iter: 10_000,
            standardize: true,
            clamp: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Scaling {
    means: Vec<f64>,
    /// zero marks a constant training dimension, mapped to 0
    scales: Vec<f64>,
    target_offset: f64,
}

impl Scaling {
    fn fit(examples: &[(Vec<f64>, f64)], dim: usize) -> Self {
        let n = examples.len() as f64;
        let mut means = vec![0.0; dim];
        for (x, _) in examples {
            for (m, v) in means.iter_mut().zip(x) {
                *m += v / n;
            }
        }
        let mut scales = vec![0.0; dim];
        for (x, _) in examples {
            for ((s, v), m) in scales.iter_mut().zip(x).zip(&means) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in &mut scales {
            *s = if *s > 1e-24 { s.sqrt() } else { 0.0 };
        }
        let target_offset = examples.iter().map(|(_, y)| y).sum::<f64>() / n;
        Scaling {
            means,
            scales,
            target_offset,
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(x).zip(&self.means).zip(&self.scales) {
            *o = if *s > 0.0 { (v - m) / s } else { 0.0 };
        }
    }
}

/// Linear regressor for one role.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    pub role: Role,
    pub space: FeatureSpace,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub epsilon: f64,
    pub clamp: bool,
    scaling: Option<Scaling>,
}

/// Objective value after every accepted descent step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SvrTrace {
    pub objective: Vec<f64>,
    pub converged: bool,
}

/// `0.5 |w|^2 + C * sum(max(0, |y - w.x| - eps)^2)` over the bias-augmented
/// design, stored row-major with the trailing constant column.
pub fn svr_objective(w: &[f64], design: &[f64], y: &[f64], c: f64, epsilon: f64) -> f64 {
    let dim = w.len();
    let reg = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let loss: f64 = design
        .chunks_exact(dim)
        .zip(y)
        .map(|(row, &t)| {
            let r = t - dot(row, w);
            let h = (r.abs() - epsilon).max(0.0);
            h * h
        })
        .sum();
    reg + c * loss
}

fn svr_gradient(w: &[f64], design: &[f64], y: &[f64], c: f64, epsilon: f64, g: &mut [f64]) {
    let dim = w.len();
    g.copy_from_slice(w);
    for (row, &t) in design.chunks_exact(dim).zip(y) {
        let r = t - dot(row, w);
        let h = r.abs() - epsilon;
        if h > 0.0 {
            let coef = -2.0 * c * h * r.signum();
            for (gi, xi) in g.iter_mut().zip(row) {
                *gi += coef * xi;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits a linear SVR by full-batch gradient descent with Armijo
/// backtracking (Barzilai-Borwein trial steps); the objective never
/// increases between accepted iterates.
pub fn svr_train(
    role: Role,
    space: FeatureSpace,
    examples: &[(Vec<f64>, f64)],
    settings: &SvrSettings,
) -> Result<(SvrModel, SvrTrace)> {
    if examples.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no training examples for {role}"
        )));
    }
    if !(settings.c > 0.0) || !(settings.epsilon >= 0.0) {
        return Err(Error::Config("SVR needs C > 0 and epsilon >= 0".into()));
    }
    let dim = space.len();
    for (x, y) in examples {
        if x.len() != dim {
            return Err(Error::RegistryMismatch(format!(
                "{role}: example has {} values for {dim} dimensions",
                x.len()
            )));
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("training data for {role}")));
        }
    }
    let scaling = settings.standardize.then(|| Scaling::fit(examples, dim));
    let width = dim + 1;
    let mut design = vec![0.0; examples.len() * width];
    let mut targets = Vec::with_capacity(examples.len());
    for ((x, y), row) in examples.iter().zip(design.chunks_exact_mut(width)) {
        match &scaling {
            Some(s) => s.apply(x, &mut row[..dim]),
            None => row[..dim].copy_from_slice(x),
        }
        row[dim] = 1.0;
        targets.push(y - scaling.as_ref().map_or(0.0, |s| s.target_offset));
    }

    let (c, eps) = (settings.c, settings.epsilon);
    let lipschitz = 1.0 + 2.0 * c * design.iter().map(|v| v * v).sum::<f64>();
    let mut w = vec![0.0; width];
    let mut g = vec![0.0; width];
    let mut g_new = vec![0.0; width];
    let mut w_new = vec![0.0; width];
    let mut f = svr_objective(&w, &design, &targets, c, eps);
    svr_gradient(&w, &design, &targets, c, eps, &mut g);
    let g0 = dot(&g, &g).sqrt().max(1.0);
    let mut step = 1.0 / lipschitz;
    let mut trace = SvrTrace {
        objective: vec![f],
        converged: false,
    };
    for _ in 0..settings.max_iter {
        let gnorm2 = dot(&g, &g);
        if gnorm2.sqrt() <= 1e-10 * g0 {
            trace.converged = true;
            break;
        }
        let mut t = step;
        let f_new = loop {
            for ((wn, wi), gi) in w_new.iter_mut().zip(&w).zip(&g) {
                *wn = wi - t * gi;
            }
            let fn_ = svr_objective(&w_new, &design, &targets, c, eps);
            if fn_ <= f - 1e-4 * t * gnorm2 {
                break Some(fn_);
            }
            t *= 0.5;
            if t < 1e-30 {
                break None;
            }
        };
        let Some(f_new) = f_new else {
            trace.converged = true;
            break;
        };
        svr_gradient(&w_new, &design, &targets, c, eps, &mut g_new);
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..width {
            let s = w_new[i] - w[i];
            ss += s * s;
            sy += s * (g_new[i] - g[i]);
        }
        step = if sy > 0.0 { ss / sy } else { 1.0 / lipschitz };
        let improvement = f - f_new;
        std::mem::swap(&mut w, &mut w_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        trace.objective.push(f);
        if improvement <= settings.tol * f.abs().max(1.0) {
            trace.converged = true;
            break;
        }
    }
    let bias = w.pop().unwrap_or(0.0);
    Ok((
        SvrModel {
            role,
            space,
            weights: w,
            bias,
            c,
            epsilon: eps,
            clamp: settings.clamp,
            scaling,
        },
        trace,
    ))
}

impl SvrModel {
    /// `w.x + b` on the model's own scaling, without clamping.
    pub fn predict_raw(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::RegistryMismatch(format!(
                "{}: {} values for {} dimensions",
                self.role,
                x.len(),
                self.weights.len()
            )));
        }
        Ok(match &self.scaling {
            Some(s) => {
                let mut z = vec![0.0; x.len()];
                s.apply(x, &mut z);
                dot(&z, &self.weights) + self.bias + s.target_offset
            }
            None => dot(x, &self.weights) + self.bias,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let raw = self.predict_raw(x)?;
        Ok(if self.clamp {
            raw.clamp(RATING_RANGE.0, RATING_RANGE.1)
        } else {
            raw
        })
    }

    /// Like [`SvrModel::predict`] but also checks the dimension names.
    pub fn predict_named(&self, space: &FeatureSpace, x: &[f64]) -> Result<f64> {
        if space != &self.space {
            return Err(Error::RegistryMismatch(format!(
                "{}: feature names differ from the training registry",
                self.role
            )));
        }
        self.predict(x)
    }

    pub fn write_text(&self, out: &mut String) -> Result<()> {
        for n in self.space.names() {
            if n.contains(['\t', '\n', '\r']) {
                return Err(Error::InvalidInput(format!(
                    "feature name {n:?} has a tab or newline"
                )));
            }
        }
        if self.role.to_string().contains(['\n', '\r']) {
            return Err(Error::InvalidInput("role id has a newline".into()));
        }
        let _ = writeln!(out, "svr");
        let _ = writeln!(out, "role {}", self.role);
        let _ = writeln!(out, "c {}", self.c);
        let _ = writeln!(out, "epsilon {}", self.epsilon);
        let _ = writeln!(out, "clamp {}", self.clamp);
        let _ = writeln!(out, "dims {}", self.weights.len());
        let _ = writeln!(out, "names\t{}", self.space.names().join("\t"));
        let _ = writeln!(out, "weights {}", join_floats(&self.weights));
        let _ = writeln!(out, "bias {}", self.bias);
        match &self.scaling {
            Some(s) => {
                let _ = writeln!(out, "means {}", join_floats(&s.means));
                let _ = writeln!(out, "scales {}", join_floats(&s.scales));
                let _ = writeln!(out, "offset {}", s.target_offset);
            }
            None => {
                let _ = writeln!(out, "raw");
            }
        }
        let _ = writeln!(out, "end");
        Ok(())
    }

    pub fn read_text<'a>(
        lines: &mut impl Iterator<Item = &'a str>,
    ) -> std::result::Result<Self, String> {
        let mut next = || {
            lines
                .next()
                .ok_or_else(|| "unexpected end of model".to_string())
        };
        if next()? != "svr" {
            return Err("expected `svr` block".into());
        }
        let field = |line: &'a str, key: &str| -> std::result::Result<&'a str, String> {
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| format!("expected `{key}`, found `{line}`"))
        };
        let floats = |s: &str| -> std::result::Result<Vec<f64>, String> {
            s.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| e.to_string()))
                .collect()
        };
        let role: Role = field(next()?, "role")?.parse()?;
        let c: f64 = field(next()?, "c")?
            .parse()
            .map_err(|e| format!("c: {e}"))?;
        let epsilon: f64 = field(next()?, "epsilon")?
            .parse()
            .map_err(|e| format!("epsilon: {e}"))?;
        let clamp: bool = field(next()?, "clamp")?
            .parse()
            .map_err(|e| format!("clamp: {e}"))?;
        let dims: usize = field(next()?, "dims")?
            .parse()
            .map_err(|e| format!("dims: {e}"))?;
        let names_line = next()?;
        let names: Vec<&str> = match names_line.strip_prefix("names\t") {
            Some(_) if dims == 0 => vec![],
            Some(rest) => rest.split('\t').collect(),
            None if names_line == "names" && dims == 0 => vec![],
            None => return Err("expected `names`".into()),
        };
        let weights = floats(field(next()?, "weights").or_else(|_| Ok::<_, String>(""))?)?;
        let bias: f64 = field(next()?, "bias")?
            .parse()
            .map_err(|e| format!("bias: {e}"))?;
        let line = next()?;
        let scaling = if line == "raw" {
            None
        } else {
            let means = floats(field(line, "means").or_else(|_| Ok::<_, String>(""))?)?;
            let scales = floats(field(next()?, "scales").or_else(|_| Ok::<_, String>(""))?)?;
            let target_offset: f64 = field(next()?, "offset")?
                .parse()
                .map_err(|e| format!("offset: {e}"))?;
            if means.len() != dims || scales.len() != dims {
                return Err("scaling length mismatch".into());
            }
            Some(Scaling {
                means,
                scales,
                target_offset,
            })
        };
        if next()? != "end" {
            return Err("expected `end`".into());
        }
        if names.len() != dims || weights.len() != dims {
            return Err(format!("{role}: dimension mismatch"));
        }
        Ok(SvrModel {
            role,
            space: FeatureSpace::new(names),
            weights,
            bias,
            c,
            epsilon,
            clamp,
            scaling,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoleSettings {
    pub svr: SvrSettings,
    /// entities with fewer training examples are pooled
    pub pooling_threshold: usize,
    /// append article language and topic features to the source regressor
    pub source_article_features: bool,
}

impl Default for RoleSettings {
    fn default() -> Self {
        RoleSettings {
            svr: SvrSettings::default(),
            pooling_threshold: 5,
            source_article_features: false,
        }
    }
}

/// Language, topic, per-source and per-user regressors with their pooled
/// background fallbacks.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleModels {
    pub language: SvrModel,
    pub topic: SvrModel,
    pub per_source: BTreeMap<String, SvrModel>,
    pub per_user: BTreeMap<String, SvrModel>,
    pub background_source: SvrModel,
    pub background_user: SvrModel,
    pub source_article_features: bool,
}

/// Which regressor produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Own,
    Background,
}

impl RoleModels {
    pub fn predict_language(&self, store: &FeatureStore, article_id: &str) -> Result<f64> {
        self.language.predict(store.article_style(article_id))
    }

    pub fn predict_topic(&self, store: &FeatureStore, article_id: &str) -> Result<f64> {
        self.topic.predict(store.article_topic(article_id))
    }

    pub fn predict_source(
        &self,
        fx: &FeatureExtractor,
        store: &FeatureStore,
        source: &crate::corpus::Source,
        article_id: &str,
    ) -> Result<(Provenance, f64)> {
        let mut x = fx.source_attrs.encode(source);
        if self.source_article_features {
            x.extend_from_slice(store.article_style(article_id));
            x.extend_from_slice(store.article_topic(article_id));
        }
        match self.per_source.get(&source.id) {
            Some(m) => Ok((Provenance::Own, m.predict(&x)?)),
            None => Ok((Provenance::Background, self.background_source.predict(&x)?)),
        }
    }

    pub fn predict_user(
        &self,
        store: &FeatureStore,
        review: crate::corpus::ReviewIdx,
        user: &crate::corpus::User,
    ) -> Result<(Provenance, f64)> {
        let x = store.review_vector(review, user);
        match self.per_user.get(&user.id) {
            Some(m) => Ok((Provenance::Own, m.predict(&x)?)),
            None => Ok((Provenance::Background, self.background_user.predict(&x)?)),
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &SvrModel> {
        [&self.language, &self.topic]
            .into_iter()
            .chain(self.per_source.values())
            .chain(self.per_user.values())
            .chain([&self.background_source, &self.background_user])
    }

    pub fn write_text(&self, out: &mut String) -> Result<()> {
        let _ = writeln!(
            out,
            "source_article_features {}",
            self.source_article_features
        );
        let _ = writeln!(
            out,
            "models {}",
            4 + self.per_source.len() + self.per_user.len()
        );
        for m in self.all() {
            m.write_text(out)?;
        }
        Ok(())
    }

    pub fn read_text<'a>(
        lines: &mut impl Iterator<Item = &'a str>,
    ) -> std::result::Result<Self, String> {
        let flag = lines
            .next()
            .and_then(|l| l.strip_prefix("source_article_features "))
            .ok_or("expected `source_article_features`")?
            .parse::<bool>()
            .map_err(|e| e.to_string())?;
        let count: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("models "))
            .ok_or("expected `models`")?
            .parse()
            .map_err(|e: std::num::ParseIntError| e.to_string())?;
        let mut language = None;
        let mut topic = None;
        let mut background_source = None;
        let mut background_user = None;
        let mut per_source = BTreeMap::new();
        let mut per_user = BTreeMap::new();
        for _ in 0..count {
            let m = SvrModel::read_text(lines)?;
            match m.role.clone() {
                Role::Language => language = Some(m),
                Role::Topic => topic = Some(m),
                Role::BackgroundSource => background_source = Some(m),
                Role::BackgroundUser => background_user = Some(m),
                Role::Source(id) => {
                    per_source.insert(id, m);
                }
                Role::User(id) => {
                    per_user.insert(id, m);
                }
            }
        }
        Ok(RoleModels {
            language: language.ok_or("missing language model")?,
            topic: topic.ok_or("missing topic model")?,
            per_source,
            per_user,
            background_source: background_source.ok_or("missing background-source model")?,
            background_user: background_user.ok_or("missing background-user model")?,
            source_article_features: flag,
        })
    }
}

fn mean_rows(rows: &[&[f64]]) -> Vec<f64> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let mut m = vec![0.0; first.len()];
    for r in rows {
        for (a, b) in m.iter_mut().zip(r.iter()) {
            *a += b / rows.len() as f64;
        }
    }
    m
}

/// Trains every role model from the training articles. Ratings are read
/// only through `view`; entities below the pooling threshold feed the
/// background models.
pub fn train_role_models(
    view: &RatingView<'_>,
    fx: &FeatureExtractor,
    store: &FeatureStore,
    train: &BTreeSet<String>,
    settings: &RoleSettings,
) -> Result<RoleModels> {
    let graph = view.graph();
    if train.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    let svr = &settings.svr;

    // article-level models
    let mut lang_ex = Vec::new();
    let mut topic_ex = Vec::new();
    for id in train {
        let y = view
            .article_rating(id)
            .ok_or_else(|| Error::InsufficientData(format!("article `{id}` has no rating")))?;
        lang_ex.push((store.article_style(id).to_vec(), y));
        topic_ex.push((store.article_topic(id).to_vec(), y));
    }
    let (language, _) = svr_train(Role::Language, fx.language_space().clone(), &lang_ex, svr)?;
    let (topic, _) = svr_train(Role::Topic, fx.topic_space().clone(), &topic_ex, svr)?;

    // sources
    let mut source_space = fx.source_space().clone();
    if settings.source_article_features {
        source_space = source_space
            .concat(fx.language_space())
            .concat(fx.topic_space());
    }
    let mut by_source: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for id in train {
        let a = graph.article(id).expect("training article exists");
        by_source
            .entry(a.source_id.as_str())
            .or_default()
            .push(id.as_str());
    }
    let mut source_examples: BTreeMap<&str, Vec<(Vec<f64>, f64)>> = BTreeMap::new();
    for (&sid, articles) in &by_source {
        let source = graph.source(sid).expect("source exists");
        let attrs = fx.source_attrs.encode(source);
        let mut ex = Vec::new();
        let article_x = |aid: &str| {
            let mut x = attrs.clone();
            if settings.source_article_features {
                x.extend_from_slice(store.article_style(aid));
                x.extend_from_slice(store.article_topic(aid));
            }
            x
        };
        if let Some(r) = view.source_rating(sid) {
            let mut x = attrs.clone();
            if settings.source_article_features {
                let styles: Vec<&[f64]> = articles.iter().map(|a| store.article_style(a)).collect();
                let topics: Vec<&[f64]> = articles.iter().map(|a| store.article_topic(a)).collect();
                x.extend(mean_rows(&styles));
                x.extend(mean_rows(&topics));
            }
            ex.push((x, r));
        }
        for aid in articles {
            let y = view.article_rating(aid).expect("checked above");
            ex.push((article_x(aid), y));
        }
        source_examples.insert(sid, ex);
    }
    let (own_sources, pooled_sources): (Vec<_>, Vec<_>) = source_examples
        .iter()
        .partition(|(sid, _)| by_source[*sid].len() >= settings.pooling_threshold);
    let per_source = own_sources
        .par_iter()
        .map(|(sid, ex)| {
            let role = Role::Source(sid.to_string());
            svr_train(role, source_space.clone(), ex, svr).map(|(m, _)| (sid.to_string(), m))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    let mut pooled: Vec<(Vec<f64>, f64)> = pooled_sources
        .iter()
        .flat_map(|(_, ex)| ex.iter().cloned())
        .collect();
    if pooled.is_empty() {
        pooled = source_examples.values().flatten().cloned().collect();
    }
    let (background_source, _) = svr_train(Role::BackgroundSource, source_space, &pooled, svr)?;

    // users
    let mut user_examples: BTreeMap<&str, Vec<(Vec<f64>, f64)>> = BTreeMap::new();
    for id in train {
        let clique = graph.clique(id).expect("training article has a clique");
        for (uid, &ridx) in clique.user_ids.iter().zip(&clique.review_ids) {
            let user = graph.user(uid).expect("reviewer exists");
            let y = view.review_rating(ridx);
            user_examples
                .entry(uid.as_str())
                .or_default()
                .push((store.review_vector(ridx, user), y));
        }
    }
    if user_examples.is_empty() {
        return Err(Error::InsufficientData("no training reviews".into()));
    }
    let user_space = fx.user_space().clone();
    let (own_users, pooled_users): (Vec<_>, Vec<_>) = user_examples
        .iter()
        .partition(|(_, ex)| ex.len() >= settings.pooling_threshold);
    let per_user = own_users
        .par_iter()
        .map(|(uid, ex)| {
            let role = Role::User(uid.to_string());
            svr_train(role, user_space.clone(), ex, svr).map(|(m, _)| (uid.to_string(), m))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    let mut pooled: Vec<(Vec<f64>, f64)> = pooled_users
        .iter()
        .flat_map(|(_, ex)| ex.iter().cloned())
        .collect();
    if pooled.is_empty() {
        pooled = user_examples.values().flatten().cloned().collect();
    }
    let (background_user, _) = svr_train(Role::BackgroundUser, user_space, &pooled, svr)?;

    Ok(RoleModels {
        language,
        topic,
        per_source,
        per_user,
        background_source,
        background_user,
        source_article_features: settings.source_article_features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(c: f64, epsilon: f64) -> SvrSettings {
        SvrSettings {
            c,
            epsilon,
            tol: 1e-14,
            max_iter: 100_000,
            standardize: false,
            clamp: false,
        }
    }

    fn one_dim(points: &[(f64, f64)]) -> Vec<(Vec<f64>, f64)> {
        points.iter().map(|&(x, y)| (vec![x], y)).collect()
    }

    #[test]
    fn exact_line_fit() {
        let ex = one_dim(&[(1.0, 1.0), (2.0, 2.0)]);
        let (m, _) = svr_train(
            Role::Language,
            FeatureSpace::new(["x"]),
            &ex,
            &raw(1e6, 0.0),
        )
        .unwrap();
        assert!((m.predict(&[3.0]).unwrap() - 3.0).abs() < 1e-3);
    }

    #[test]
    fn constant_target_goes_to_bias() {
        let ex = one_dim(&[(0.1, 3.0), (0.5, 3.0), (0.9, 3.0), (0.2, 3.0)]);
        let (m, _) = svr_train(
            Role::Topic,
            FeatureSpace::new(["x"]),
            &ex,
            &SvrSettings::default(),
        )
        .unwrap();
        for x in [0.0, 0.3, 2.0] {
            assert!((m.predict(&[x]).unwrap() - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_loss_point_keeps_weights_at_zero() {
        let ex = one_dim(&[(1.0, 0.05), (2.0, -0.05), (3.0, 0.0)]);
        let (m, trace) =
            svr_train(Role::Topic, FeatureSpace::new(["x"]), &ex, &raw(1.0, 0.1)).unwrap();
        assert!(m.weights[0].abs() < 1e-12 && m.bias.abs() < 1e-12);
        assert!(trace.converged);
    }

    #[test]
    fn prediction_clamp_and_bias() {
        let m = SvrModel {
            role: Role::Language,
            space: FeatureSpace::new(["x"]),
            weights: vec![0.0],
            bias: 3.0,
            c: 1.0,
            epsilon: 0.1,
            clamp: true,
            scaling: None,
        };
        assert_eq!(m.predict(&[5.0]).unwrap(), 3.0);
        let m = SvrModel {
            weights: vec![1.0],
            bias: 0.0,
            ..m
        };
        assert_eq!(m.predict(&[7.2]).unwrap(), 5.0);
        assert_eq!(m.predict(&[2.4]).unwrap(), 2.4);
        assert_eq!(m.predict_raw(&[7.2]).unwrap(), 7.2);
        assert!(matches!(
            m.predict(&[1.0, 2.0]),
            Err(Error::RegistryMismatch(_))
        ));
        assert!(m.predict_named(&FeatureSpace::new(["y"]), &[1.0]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let ex = vec![(vec![f64::NAN], 1.0)];
        assert!(matches!(
            svr_train(
                Role::Topic,
                FeatureSpace::new(["x"]),
                &ex,
                &SvrSettings::default()
            ),
            Err(Error::NonFinite(_))
        ));
        assert!(svr_train(
            Role::Topic,
            FeatureSpace::new(["x"]),
            &[],
            &SvrSettings::default()
        )
        .is_err());
    }

    #[test]
    fn text_round_trip() {
        let ex = vec![
            (vec![1.0, 0.0], 2.0),
            (vec![0.5, 1.0], 4.0),
            (vec![0.2, 0.3], 3.0),
        ];
        for standardize in [true, false] {
            let s = SvrSettings {
                standardize,
                ..SvrSettings::default()
            };
            let (m, _) = svr_train(
                Role::User("u 1".into()),
                FeatureSpace::new(["lex:a", "tag:global warming"]),
                &ex,
                &s,
            )
            .unwrap();
            let mut text = String::new();
            m.write_text(&mut text).unwrap();
            let back = SvrModel::read_text(&mut text.lines()).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn role_tags_parse() {
        for r in [
            Role::Language,
            Role::Topic,
            Role::Source("s:1".into()),
            Role::User("u".into()),
            Role::BackgroundSource,
            Role::BackgroundUser,
        ] {
            assert_eq!(r.to_string().parse::<Role>().unwrap(), r);
        }
    }

    proptest! {
        #[test]
        fn objective_never_increases(
            xs in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 3), 2..30),
            noise in proptest::collection::vec(-1.0f64..1.0, 30),
            eps in 0.0f64..0.5,
            c in 0.1f64..100.0,
        ) {
            let ex: Vec<(Vec<f64>, f64)> = xs
                .iter()
                .zip(&noise)
                .map(|(x, n)| (x.clone(), 2.0 * x[0] - x[1] + 0.5 + n))
                .collect();
            let s = SvrSettings { c, epsilon: eps, standardize: false, clamp: false, ..SvrSettings::default() };
            let (_, trace) = svr_train(Role::Language, FeatureSpace::new(["a", "b", "c"]), &ex, &s).unwrap();
            for w in trace.objective.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }
    }
}
