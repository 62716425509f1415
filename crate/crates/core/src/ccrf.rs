//! Continuous CRF over article cliques.
//!
//! Every clique contributes `sum_k lambda_k * (y_j - x_jk)^2` for its active
//! predictors, which makes the joint density a diagonal Gaussian. The
//! weights are learned by gradient ascent on the log-likelihood in
//! log-space, so they stay positive.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{CommunityGraph, RatingView};
use crate::error::{Error, Result};
use crate::features::{FeatureExtractor, FeatureStore};
use crate::fmt::sig6;
use crate::regressors::{Provenance, RoleModels};
use crate::topics::join_floats;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Column {
    User(String),
    BackgroundUser,
    Source(String),
    BackgroundSource,
    Language,
    Topic,
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Column::User(id) => write!(f, "user:{id}"),
            Column::BackgroundUser => f.write_str("background-user"),
            Column::Source(id) => write!(f, "source:{id}"),
            Column::BackgroundSource => f.write_str("background-source"),
            Column::Language => f.write_str("language"),
            Column::Topic => f.write_str("topic"),
        }
    }
}

impl FromStr for Column {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "background-user" => Column::BackgroundUser,
            "background-source" => Column::BackgroundSource,
            "language" => Column::Language,
            "topic" => Column::Topic,
            _ => {
                if let Some(id) = s.strip_prefix("user:") {
                    Column::User(id.into())
                } else if let Some(id) = s.strip_prefix("source:") {
                    Column::Source(id.into())
                } else {
                    return Err(format!("unknown column `{s}`"));
                }
            }
        })
    }
}

/// Column order: users by id, background user, sources by id, background
/// source, language, topic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnIndex {
    columns: Vec<Column>,
    index: HashMap<Column, usize>,
}

impl ColumnIndex {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let mut index = HashMap::with_capacity(columns.len());
        for (i, c) in columns.iter().enumerate() {
            if index.insert(c.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("column {c} listed twice")));
            }
        }
        Ok(ColumnIndex { columns, index })
    }

    pub fn from_roles(roles: &RoleModels) -> Self {
        let mut cols: Vec<Column> = roles
            .per_user
            .keys()
            .map(|u| Column::User(u.clone()))
            .collect();
        cols.push(Column::BackgroundUser);
        cols.extend(roles.per_source.keys().map(|s| Column::Source(s.clone())));
        cols.extend([Column::BackgroundSource, Column::Language, Column::Topic]);
        ColumnIndex::new(cols).expect("role ids are unique")
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn get(&self, c: &Column) -> Option<usize> {
        self.index.get(c).copied()
    }
}

/// One nonzero cell of the design matrix. `activity` counts the predictions
/// pooled into the column (more than one only for the background user
/// column), `value` is their sum and `sum_sq` the sum of their squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub col: usize,
    pub activity: f64,
    pub value: f64,
    pub sum_sq: f64,
}

/// Sparse rows, one per article.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub columns: ColumnIndex,
    pub article_ids: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub y: Option<Vec<f64>>,
}

impl DesignMatrix {
    /// Builds rows from explicit `(column, prediction)` lists.
    pub fn from_predictions(
        columns: ColumnIndex,
        rows: Vec<(String, Vec<(usize, f64)>)>,
        y: Option<Vec<f64>>,
    ) -> Result<Self> {
        if let Some(y) = &y {
            if y.len() != rows.len() {
                return Err(Error::InvalidInput(
                    "target length differs from row count".into(),
                ));
            }
        }
        let mut ids = Vec::with_capacity(rows.len());
        let mut out = Vec::with_capacity(rows.len());
        for (id, preds) in rows {
            let mut cells: Vec<Cell> = Vec::new();
            for (col, p) in preds {
                if col >= columns.len() {
                    return Err(Error::InvalidInput(format!("column {col} out of range")));
                }
                if !p.is_finite() {
                    return Err(Error::NonFinite(format!("prediction for article `{id}`")));
                }
                match cells.iter_mut().find(|c| c.col == col) {
                    Some(c) => {
                        c.activity += 1.0;
                        c.value += p;
                        c.sum_sq += p * p;
                    }
                    None => cells.push(Cell {
                        col,
                        activity: 1.0,
                        value: p,
                        sum_sq: p * p,
                    }),
                }
            }
            cells.sort_by_key(|c| c.col);
            ids.push(id);
            out.push(cells);
        }
        Ok(DesignMatrix {
            columns,
            article_ids: ids,
            rows: out,
            y,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Dense `(X, D)` copies, for tests and small diagnostics.
    pub fn dense(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let m = self.columns.len();
        let mut x = vec![vec![0.0; m]; self.len()];
        let mut d = vec![vec![0.0; m]; self.len()];
        for (j, row) in self.rows.iter().enumerate() {
            for c in row {
                x[j][c.col] = c.value;
                d[j][c.col] = c.activity;
            }
        }
        (x, d)
    }
}

/// Collects the role-model predictions for each article into design rows.
/// With a `view`, article ratings are read through it as targets.
pub fn build_design(
    graph: &CommunityGraph,
    fx: &FeatureExtractor,
    store: &FeatureStore,
    roles: &RoleModels,
    columns: &ColumnIndex,
    articles: &[String],
    view: Option<&RatingView<'_>>,
) -> Result<DesignMatrix> {
    if articles.is_empty() {
        return Err(Error::InvalidInput("empty article set".into()));
    }
    let col = |c: Column| {
        columns
            .get(&c)
            .ok_or_else(|| Error::RegistryMismatch(format!("no CRF column for {c}")))
    };
    let lang = col(Column::Language)?;
    let topic = col(Column::Topic)?;
    let mut rows = Vec::with_capacity(articles.len());
    let mut y = view.map(|_| Vec::with_capacity(articles.len()));
    for id in articles {
        let article = graph
            .article(id)
            .ok_or_else(|| Error::InvalidInput(format!("unknown article `{id}`")))?;
        let source = graph.source(&article.source_id).expect("validated graph");
        let clique = graph.clique(id).expect("every article has a clique");
        let mut preds = Vec::with_capacity(clique.len() + 3);
        for (uid, &ridx) in clique.user_ids.iter().zip(&clique.review_ids) {
            let user = graph.user(uid).expect("validated graph");
            let (prov, p) = roles.predict_user(store, ridx, user)?;
            let c = match prov {
                Provenance::Own => col(Column::User(uid.clone()))?,
                Provenance::Background => col(Column::BackgroundUser)?,
            };
            preds.push((c, p));
        }
        let (prov, p) = roles.predict_source(fx, store, source, id)?;
        let c = match prov {
            Provenance::Own => col(Column::Source(source.id.clone()))?,
            Provenance::Background => col(Column::BackgroundSource)?,
        };
        preds.push((c, p));
        preds.push((lang, roles.predict_language(store, id)?));
        preds.push((topic, roles.predict_topic(store, id)?));
        rows.push((id.clone(), preds));
        if let (Some(view), Some(y)) = (view, y.as_mut()) {
            let r = view
                .article_rating(id)
                .ok_or_else(|| Error::InsufficientData(format!("article `{id}` has no rating")))?;
            y.push(r);
        }
    }
    DesignMatrix::from_predictions(columns.clone(), rows, y)
}

/// Diagonal Gaussian `exp(-y'Qy + b'y - c)` over the article ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianForm {
    pub q: Vec<f64>,
    pub b: Vec<f64>,
    pub c: f64,
}

impl GaussianForm {
    pub fn sigma(&self) -> Vec<f64> {
        self.q.iter().map(|q| 1.0 / (2.0 * q)).collect()
    }

    pub fn mu(&self) -> Vec<f64> {
        infer(self)
    }
}

fn check_lambda(lambda: &[f64], m: usize) -> Result<()> {
    if lambda.len() != m {
        return Err(Error::RegistryMismatch(format!(
            "{} weights for {m} columns",
            lambda.len()
        )));
    }
    if let Some(l) = lambda.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "weight {l} is not strictly positive"
        )));
    }
    Ok(())
}

pub fn assemble(design: &DesignMatrix, lambda: &[f64]) -> Result<GaussianForm> {
    check_lambda(lambda, design.columns.len())?;
    if design.is_empty() {
        return Err(Error::InvalidInput("empty article set".into()));
    }
    let mut q = Vec::with_capacity(design.len());
    let mut b = Vec::with_capacity(design.len());
    let mut c = 0.0;
    for (j, row) in design.rows.iter().enumerate() {
        let (mut qj, mut bj) = (0.0, 0.0);
        for cell in row {
            let l = lambda[cell.col];
            qj += l * cell.activity;
            bj += 2.0 * l * cell.value;
            c += l * cell.sum_sq;
        }
        if !(qj > 0.0) {
            return Err(Error::InvalidInput(format!(
                "article `{}` has no active predictor",
                design.article_ids[j]
            )));
        }
        q.push(qj);
        b.push(bj);
    }
    Ok(GaussianForm { q, b, c })
}

/// Posterior mean, `b_j / 2Q_jj`.
pub fn infer(form: &GaussianForm) -> Vec<f64> {
    form.b
        .iter()
        .zip(&form.q)
        .map(|(b, q)| b / (2.0 * q))
        .collect()
}

pub fn log_density(form: &GaussianForm, y: &[f64]) -> f64 {
    form.q
        .iter()
        .zip(&form.b)
        .zip(y)
        .map(|((&q, &b), &y)| {
            let mu = b / (2.0 * q);
            -0.5 * LN_2PI + 0.5 * (2.0 * q).ln() - q * (y - mu) * (y - mu)
        })
        .sum()
}

/// Gradient of [`log_density`] with respect to `ln lambda_k`.
pub fn grad_log_lambda(
    design: &DesignMatrix,
    form: &GaussianForm,
    lambda: &[f64],
    y: &[f64],
) -> Vec<f64> {
    let mut g = vec![0.0; design.columns.len()];
    for (j, row) in design.rows.iter().enumerate() {
        let q = form.q[j];
        let mu = form.b[j] / (2.0 * q);
        let sigma = 1.0 / (2.0 * q);
        let yj = y[j];
        for cell in row {
            let (d, x) = (cell.activity, cell.value);
            g[cell.col] += -d * yj * yj + 2.0 * yj * x + d * mu * mu + d * sigma - 2.0 * mu * x;
        }
    }
    for (gk, l) in g.iter_mut().zip(lambda) {
        *gk *= l;
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcrfSettings {
    pub eta: f64,
    pub max_iters: usize,
    /// L2 penalty on `ln lambda`
    pub reg_log_lambda: f64,
    pub lambda_max: f64,
}

impl Default for CcrfSettings {
    fn default() -> Self {
        CcrfSettings {
            eta: 1e-3,
            max_iters: 500,
            reg_log_lambda: 1e-3,
            lambda_max: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcrfModel {
    pub columns: ColumnIndex,
    pub lambda: Vec<f64>,
    /// penalized objective after initialization and each accepted step
    pub log: Vec<f64>,
}

fn objective(
    design: &DesignMatrix,
    y: &[f64],
    theta: &[f64],
    reg: f64,
) -> Result<(f64, GaussianForm, Vec<f64>)> {
    let lambda: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
    let form = assemble(design, &lambda)?;
    let penalty: f64 = theta.iter().map(|t| t * t).sum();
    Ok((log_density(&form, y) - reg * penalty, form, lambda))
}

/// Maximizes the penalized log-likelihood from `lambda = 1`, halving the
/// step whenever a trial step would lower the objective.
pub fn train_ccrf(design: &DesignMatrix, settings: &CcrfSettings) -> Result<CcrfModel> {
    let y = design
        .y
        .as_deref()
        .ok_or_else(|| Error::InsufficientData("CRF training needs article ratings".into()))?;
    if !(settings.eta > 0.0) || !(settings.lambda_max > 1.0) || !(settings.reg_log_lambda >= 0.0) {
        return Err(Error::Config(
            "CRF needs eta > 0, lambda_max > 1, regularization >= 0".into(),
        ));
    }
    let m = design.columns.len();
    let ceiling = settings.lambda_max.ln();
    let reg = settings.reg_log_lambda;
    let mut theta = vec![0.0; m];
    let (mut obj, mut form, mut lambda) = objective(design, y, &theta, reg)?;
    if !obj.is_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }
    let mut log = vec![obj];
    let mut eta = settings.eta;
    let mut warned = false;
    'outer: for it in 1..=settings.max_iters {
        let mut g = grad_log_lambda(design, &form, &lambda, y);
        for (gk, t) in g.iter_mut().zip(&theta) {
            *gk -= 2.0 * reg * t;
        }
        if g.iter().all(|v| v.abs() < 1e-12) {
            break;
        }
        loop {
            let mut trial: Vec<f64> = theta.iter().zip(&g).map(|(t, gk)| t + eta * gk).collect();
            for t in &mut trial {
                if *t > ceiling {
                    *t = ceiling;
                    if !warned {
                        log::warn!("CRF weight reached the ceiling {}", settings.lambda_max);
                        warned = true;
                    }
                }
            }
            let (o, f, l) = objective(design, y, &trial, reg)?;
            if !o.is_finite() {
                return Err(Error::Divergence { iteration: it });
            }
            if o >= obj {
                let gain = o - obj;
                theta = trial;
                obj = o;
                form = f;
                lambda = l;
                log.push(obj);
                if gain <= 1e-13 * obj.abs().max(1.0) {
                    break 'outer;
                }
                break;
            }
            eta *= 0.5;
            if eta < 1e-15 {
                break 'outer;
            }
        }
    }
    Ok(CcrfModel {
        columns: design.columns.clone(),
        lambda,
        log,
    })
}

impl CcrfModel {
    /// A model with every weight at one, i.e. the unweighted average.
    pub fn uniform(columns: ColumnIndex) -> Self {
        let lambda = vec![1.0; columns.len()];
        CcrfModel {
            columns,
            lambda,
            log: Vec::new(),
        }
    }

    pub fn predict(&self, design: &DesignMatrix) -> Result<Vec<f64>> {
        if design.columns != self.columns {
            return Err(Error::RegistryMismatch(
                "design columns differ from the model".into(),
            ));
        }
        Ok(infer(&assemble(design, &self.lambda)?))
    }

    pub fn weight(&self, c: &Column) -> Option<f64> {
        self.columns.get(c).map(|i| self.lambda[i])
    }

    fn ranking(&self, pick: impl Fn(&Column) -> Option<&str>) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .columns
            .columns()
            .iter()
            .zip(&self.lambda)
            .filter_map(|(c, &l)| pick(c).map(|id| (id.to_string(), l)))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    /// Users by descending weight, ties by id; pooled users are not ranked.
    pub fn rank_users(&self) -> Vec<(String, f64)> {
        self.ranking(|c| match c {
            Column::User(id) => Some(id),
            _ => None,
        })
    }

    pub fn rank_sources(&self) -> Vec<(String, f64)> {
        self.ranking(|c| match c {
            Column::Source(id) => Some(id),
            _ => None,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("ccrf-model v1\n");
        let _ = writeln!(s, "columns {}", self.columns.len());
        for c in self.columns.columns() {
            let _ = writeln!(s, "{c}");
        }
        let _ = writeln!(s, "lambda {}", join_floats(&self.lambda));
        let _ = writeln!(s, "log {}", join_floats(&self.log));
        s
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        if lines.next() != Some("ccrf-model v1") {
            return Err("missing `ccrf-model v1` header".into());
        }
        let n: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("columns "))
            .ok_or("expected `columns`")?
            .parse()
            .map_err(|e| format!("columns: {e}"))?;
        let mut cols = Vec::with_capacity(n);
        for _ in 0..n {
            cols.push(
                lines
                    .next()
                    .ok_or("truncated column list")?
                    .parse::<Column>()?,
            );
        }
        let floats = |line: Option<&str>, key: &str| -> std::result::Result<Vec<f64>, String> {
            let line = line.ok_or(format!("expected `{key}`"))?;
            let rest = line.strip_prefix(key).ok_or(format!("expected `{key}`"))?;
            rest.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| format!("{key}: {e}")))
                .collect()
        };
        let lambda = floats(lines.next(), "lambda")?;
        let log = floats(lines.next(), "log")?;
        let columns = ColumnIndex::new(cols).map_err(|e| e.to_string())?;
        check_lambda(&lambda, columns.len()).map_err(|e| e.to_string())?;
        Ok(CcrfModel {
            columns,
            lambda,
            log,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        CcrfModel::from_text(&text).map_err(|message| Error::Model {
            path: path.to_path_buf(),
            message,
        })
    }
}

/// `rank,id,score` CSV with a header row.
pub fn ranking_csv(ranking: &[(String, f64)]) -> String {
    let mut s = String::from("rank,id,score\n");
    for (i, (id, score)) in ranking.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", i + 1, csv_field(id), sig6(*score));
    }
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
