//! Nearest-neighbor classification over normalized feature vectors, k-fold
//! cross-validation, and the CSV database format.
//!
//! A database file starts with a comment row `# <kind>,<dim>`, then a header
//! row `label,person,f1,...,f<dim>`, then one row per sample. Features are
//! stored raw; the normalization map is refit on load.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Static7,
    Dynamic12,
    Sequence60,
}

impl Kind {
    pub fn dim(self) -> usize {
        match self {
            Kind::Static7 => 7,
            Kind::Dynamic12 => 12,
            Kind::Sequence60 => 60,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Static7 => "static7",
            Kind::Dynamic12 => "dynamic12",
            Kind::Sequence60 => "sequence60",
        }
    }

    pub fn parse(s: &str) -> Result<Kind> {
        match s.trim() {
            "static7" => Ok(Kind::Static7),
            "dynamic12" => Ok(Kind::Dynamic12),
            "sequence60" => Ok(Kind::Sequence60),
            other => Err(Error::Database(format!("unknown database kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub features: Vec<f64>,
    pub label: u32,
    pub person: Option<String>,
}

/// Per-feature affine map onto [0, 1]. Constant features map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl Normalizer {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Normalizer> {
        let mut it = rows.into_iter();
        let first = it.next().ok_or_else(|| Error::Database("cannot normalize an empty database".into()))?;
        let (mut min, mut max) = (first.to_vec(), first.to_vec());
        for r in it {
            for (j, &x) in r.iter().enumerate() {
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
        Ok(Normalizer { min, max })
    }

    pub fn bounds(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.min.iter().copied().zip(self.max.iter().copied())
    }

    /// Queries outside the fitted range map outside [0, 1].
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.bounds())
            .map(|(&v, (lo, hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GestureDatabase {
    kind: Kind,
    rows: Vec<Row>,
    norm: Option<Normalizer>,
}

impl GestureDatabase {
    pub fn new(kind: Kind) -> Self {
        Self { kind, rows: Vec::new(), norm: None }
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn normalizer(&self) -> Option<&Normalizer> {
        self.norm.as_ref()
    }

    pub fn push(&mut self, features: Vec<f64>, label: u32, person: Option<String>) -> Result<()> {
        if features.len() != self.dim() {
            return Err(Error::Database(format!("row has {} features, database dim is {}", features.len(), self.dim())));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::Database("row contains a non-finite feature".into()));
        }
        if self.norm.is_some() {
            return Err(Error::Database("cannot add rows to a normalized database".into()));
        }
        self.rows.push(Row { features, label, person });
        Ok(())
    }

    /// Sorted distinct labels.
    pub fn labels(&self) -> Vec<u32> {
        let mut l: Vec<u32> = self.rows.iter().map(|r| r.label).collect();
        l.sort_unstable();
        l.dedup();
        l
    }

    /// Copy with every feature mapped to [0, 1]; the map is kept for queries.
    pub fn normalize(&self) -> Result<GestureDatabase> {
        let norm = Normalizer::fit(self.rows.iter().map(|r| r.features.as_slice()))?;
        let rows = self
            .rows
            .iter()
            .map(|r| Row { features: norm.apply(&r.features), label: r.label, person: r.person.clone() })
            .collect();
        Ok(GestureDatabase { kind: self.kind, rows, norm: Some(norm) })
    }

    fn subset(&self, idx: &[usize]) -> GestureDatabase {
        GestureDatabase { kind: self.kind, rows: idx.iter().map(|&i| self.rows[i].clone()).collect(), norm: None }
    }

    /// Normalizes `query` with the stored map (if any) and runs [`knn`].
    pub fn classify(&self, query: &[f64], p: &KnnParams) -> Result<Prediction> {
        match &self.norm {
            Some(n) => knn(self, &n.apply(query), p),
            None => knn(self, query, p),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = out;
        writeln!(out, "# {},{}", self.kind.name(), self.dim())?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["label".to_string(), "person".to_string()];
        header.extend((1..=self.dim()).map(|j| format!("f{j}")));
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![r.label.to_string(), r.person.clone().unwrap_or_default()];
            rec.extend(r.features.iter().map(|x| x.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<GestureDatabase> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let meta = first
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| Error::Database("missing '# kind,dim' comment row".into()))?;
        let (kind, dim) = meta
            .split_once(',')
            .ok_or_else(|| Error::Database(format!("malformed kind/dim row {:?}", first.trim())))?;
        let kind = Kind::parse(kind)?;
        let dim: usize = dim.trim().parse().map_err(|_| Error::Database(format!("bad dim {:?}", dim.trim())))?;
        if dim != kind.dim() {
            return Err(Error::Database(format!("{} databases have dim {}, file says {dim}", kind.name(), kind.dim())));
        }
        let mut db = GestureDatabase::new(kind);
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let line = i + 3;
            if rec.len() != dim + 2 {
                return Err(Error::Database(format!("line {line}: expected {} fields, got {}", dim + 2, rec.len())));
            }
            let label: u32 = rec[0].trim().parse().map_err(|_| Error::Database(format!("line {line}: bad label {:?}", &rec[0])))?;
            let person = Some(rec[1].trim().to_string()).filter(|s| !s.is_empty());
            let features = rec
                .iter()
                .skip(2)
                .map(|f| f.trim().parse::<f64>().map_err(|_| Error::Database(format!("line {line}: bad feature {f:?}"))))
                .collect::<Result<Vec<_>>>()?;
            db.push(features, label, person).map_err(|e| Error::Database(format!("line {line}: {e}")))?;
        }
        Ok(db)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<GestureDatabase> {
        let path = path.as_ref();
        let f = std::fs::File::open(path)?;
        Self::read_csv(f).map_err(|e| Error::Database(format!("{}: {e}", path.display())))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Database(format!("csv: {e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    L1,
    Euclidean,
}

/// Weighted L1 distance.
pub fn distance(q: &[f64], x: &[f64], weights: &[f64]) -> Result<f64> {
    metric_distance(Metric::L1, q, x, weights)
}

pub fn metric_distance(metric: Metric, q: &[f64], x: &[f64], weights: &[f64]) -> Result<f64> {
    if q.len() != x.len() || q.len() != weights.len() {
        return Err(Error::Argument(format!(
            "dimension mismatch: query {}, row {}, weights {}",
            q.len(),
            x.len(),
            weights.len()
        )));
    }
    Ok(match metric {
        Metric::L1 => q.iter().zip(x).zip(weights).map(|((a, b), w)| w * (a - b).abs()).sum(),
        Metric::Euclidean => q.iter().zip(x).zip(weights).map(|((a, b), w)| w * (a - b) * (a - b)).sum::<f64>().sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum Voting {
    #[default]
    Majority,
    InverseDistance { power: i32 },
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
    pub voting: Voting,
    pub metric: Metric,
    /// All ones when absent.
    pub weights: Option<Vec<f64>>,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 1, voting: Voting::Majority, metric: Metric::L1, weights: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: u32,
    /// Vote per label among the neighbors, ascending by label. Counts for
    /// majority voting; inverse-distance sums otherwise (infinite for exact
    /// matches).
    pub votes: Vec<(u32, f64)>,
    /// Row indices of the neighbors, nearest first.
    pub neighbors: Vec<usize>,
}

pub fn knn(db: &GestureDatabase, q: &[f64], p: &KnnParams) -> Result<Prediction> {
    if db.is_empty() {
        return Err(Error::Database("cannot classify against an empty database".into()));
    }
    if p.k == 0 || p.k > db.len() {
        return Err(Error::Argument(format!("k = {} must be in 1..={}", p.k, db.len())));
    }
    let ones;
    let weights = match &p.weights {
        Some(w) => w.as_slice(),
        None => {
            ones = vec![1.0; db.dim()];
            &ones
        }
    };
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::Argument("feature weights must be non-negative".into()));
    }
    let mut dist = db
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| metric_distance(p.metric, q, &r.features, weights).map(|d| (d, i)))
        .collect::<Result<Vec<_>>>()?;
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    dist.truncate(p.k);

    let mut count: BTreeMap<u32, usize> = BTreeMap::new();
    let mut inv: BTreeMap<u32, f64> = BTreeMap::new();
    let mut exact: BTreeMap<u32, usize> = BTreeMap::new();
    let power = match p.voting {
        Voting::Majority => 1,
        Voting::InverseDistance { power } => power,
    };
    for &(d, i) in &dist {
        let label = db.rows[i].label;
        *count.entry(label).or_default() += 1;
        *inv.entry(label).or_default() += if d == 0.0 { f64::INFINITY } else { 1.0 / d.powi(power) };
        if d == 0.0 {
            *exact.entry(label).or_default() += 1;
        }
    }
    // BTreeMap iteration is ascending by label, so `>` keeps the lowest label on ties.
    let (label, votes) = match p.voting {
        Voting::Majority => {
            let mut best: Option<(u32, usize, f64)> = None;
            for (&l, &c) in &count {
                let s = inv[&l];
                if best.is_none_or(|(_, bc, bs)| c > bc || (c == bc && s > bs)) {
                    best = Some((l, c, s));
                }
            }
            (best.unwrap().0, count.iter().map(|(&l, &c)| (l, c as f64)).collect())
        }
        Voting::InverseDistance { .. } if !exact.is_empty() => {
            let mut best: Option<(u32, usize)> = None;
            for (&l, &c) in &exact {
                if best.is_none_or(|(_, bc)| c > bc) {
                    best = Some((l, c));
                }
            }
            (best.unwrap().0, inv.iter().map(|(&l, &s)| (l, s)).collect())
        }
        Voting::InverseDistance { .. } => {
            let mut best: Option<(u32, f64)> = None;
            for (&l, &s) in &inv {
                if best.is_none_or(|(_, bs)| s > bs) {
                    best = Some((l, s));
                }
            }
            (best.unwrap().0, inv.iter().map(|(&l, &s)| (l, s)).collect())
        }
    };
    Ok(Prediction { label, votes, neighbors: dist.iter().map(|&(_, i)| i).collect() })
}

/// Fold index for each row: a seeded shuffle dealt round-robin.
pub fn kfold_split(n_rows: usize, k_folds: usize, seed: u64) -> Result<Vec<usize>> {
    if k_folds < 2 {
        return Err(Error::Argument(format!("need at least 2 folds, got {k_folds}")));
    }
    if k_folds > n_rows {
        return Err(Error::Argument(format!("{k_folds} folds exceed {n_rows} rows")));
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n_rows];
    for (pos, &row) in order.iter().enumerate() {
        fold[row] = pos % k_folds;
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub labels: Vec<u32>,
    /// `confusion[true][predicted]`, indexed like `labels`.
    pub confusion: Vec<Vec<usize>>,
    pub rates: Vec<f64>,
    pub average: f64,
    pub warnings: Vec<String>,
}

impl ScoreReport {
    fn from_confusion(labels: Vec<u32>, confusion: Vec<Vec<usize>>, warnings: Vec<String>) -> Self {
        let rates: Vec<f64> = confusion
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let total: usize = row.iter().sum();
                if total == 0 {
                    0.0
                } else {
                    row[i] as f64 / total as f64
                }
            })
            .collect();
        let average = rates.iter().sum::<f64>() / rates.len().max(1) as f64;
        Self { labels, confusion, rates, average, warnings }
    }

    fn name(&self, i: usize, names: &[String]) -> String {
        let l = self.labels[i];
        names.get(l as usize - 1).cloned().unwrap_or_else(|| format!("class {l}"))
    }

    /// Aligned table of per-class rates, the average and the confusion matrix.
    /// `names[label - 1]` is used when present.
    pub fn to_text(&self, names: &[String]) -> String {
        let width = (0..self.labels.len()).map(|i| self.name(i, names).len()).max().unwrap_or(5).max(7);
        let mut s = String::new();
        for (i, r) in self.rates.iter().enumerate() {
            let _ = writeln!(s, "{:<width$}  {:6.2}%", self.name(i, names), 100.0 * r);
        }
        let _ = writeln!(s, "{:<width$}  {:6.2}%", "average", 100.0 * self.average);
        let _ = writeln!(s, "\nconfusion (rows = true label, columns = predicted):");
        let _ = write!(s, "{:<width$}", "");
        for l in &self.labels {
            let _ = write!(s, " {l:>5}");
        }
        s.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            let _ = write!(s, "{:<width$}", self.name(i, names));
            for c in row {
                let _ = write!(s, " {c:>5}");
            }
            s.push('\n');
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }

    /// `label,rate,c_<l1>,...` rows followed by an `average` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("label,rate");
        for l in &self.labels {
            let _ = write!(s, ",c_{l}");
        }
        s.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            let _ = write!(s, "{},{}", self.labels[i], self.rates[i]);
            for c in row {
                let _ = write!(s, ",{c}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "average,{}", self.average);
        s
    }
}

/// Folds are classified concurrently; each renormalizes on its training rows.
pub fn cross_validate(db: &GestureDatabase, p: &KnnParams, k_folds: usize, seed: u64) -> Result<ScoreReport> {
    let folds = kfold_split(db.len(), k_folds, seed)?;
    let labels = db.labels();
    let index: BTreeMap<u32, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let per_fold = (0..k_folds)
        .into_par_iter()
        .map(|f| -> Result<(Vec<(usize, usize)>, Vec<String>)> {
            let train_idx: Vec<usize> = (0..db.len()).filter(|&i| folds[i] != f).collect();
            let train = db.subset(&train_idx).normalize()?;
            let present = train.labels();
            let mut warnings = Vec::new();
            for l in labels.iter().filter(|l| !present.contains(l)) {
                warnings.push(format!("fold {f}: class {l} has no training rows"));
            }
            let params = KnnParams { k: p.k.min(train.len()), ..p.clone() };
            let mut pairs = Vec::new();
            for i in (0..db.len()).filter(|&i| folds[i] == f) {
                let pred = train.classify(&db.rows[i].features, &params)?;
                pairs.push((index[&db.rows[i].label], index[&pred.label]));
            }
            Ok((pairs, warnings))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut confusion = vec![vec![0usize; labels.len()]; labels.len()];
    let mut warnings = Vec::new();
    for (pairs, w) in per_fold {
        for (t, pr) in pairs {
            confusion[t][pr] += 1;
        }
        warnings.extend(w);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ScoreReport::from_confusion(labels, confusion, warnings))
}
