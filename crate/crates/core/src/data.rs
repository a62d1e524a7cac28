//! Dataset ingestion, preprocessing and synthetic generators.
//!
//! Features are min-max scaled to `[0, 1]` column by column over the whole
//! dataset, before any split; constant columns map to 0.

use crate::error::{Error, Result};
use crate::losses::{Example, Label};
use crate::risk_eval::Sample;
use crate::rng::{stream_rng, StreamRng, STREAM_DATA, STREAM_SPLIT};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

/// Examples with shared feature layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub examples: Vec<Example<f64>>,
    /// Number of classes for classification data.
    pub class_count: Option<usize>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(examples: Vec<Example<f64>>, class_count: Option<usize>, feature_names: Vec<String>) -> Result<Self> {
        let Some(first) = examples.first() else {
            return Err(Error::EmptyDataset);
        };
        let d = first.features.len();
        for ex in &examples {
            if ex.features.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: ex.features.len() });
            }
            if let (Label::Class(k), Some(c)) = (ex.label, class_count) {
                if k >= c {
                    return Err(Error::InvalidSample(format!("class index {k} out of range for {c} classes")));
                }
            }
        }
        Ok(Self { examples, class_count, feature_names })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.examples[0].features.len()
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            examples: idx.iter().map(|&i| self.examples[i].clone()).collect(),
            class_count: self.class_count,
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Min-max scales every feature column of `examples` in place.
pub fn minmax_scale(examples: &mut [Example<f64>]) {
    let Some(first) = examples.first() else { return };
    for j in 0..first.features.len() {
        let (lo, hi) = examples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), ex| (lo.min(ex.features[j]), hi.max(ex.features[j])));
        let span = hi - lo;
        for ex in examples.iter_mut() {
            let v = &mut ex.features[j];
            *v = if span > 0.0 { ((*v - lo) / span).clamp(0.0, 1.0) } else { 0.0 };
        }
    }
}

/// How the label column is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    /// Distinct values become class indices in sorted order.
    Class,
    /// Parsed as a real number, left unscaled.
    Real,
}

/// Column roles for [`load_csv`]. Columns not named here are numeric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    pub label: String,
    pub label_kind: LabelKind,
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub ignore: Vec<String>,
}

/// A parsed file and the number of rows discarded for missing values.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedCsv {
    pub dataset: Dataset,
    pub dropped_rows: usize,
}

enum Role {
    Label,
    Numeric,
    Categorical,
    Ignore,
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f == "?"
}

/// Reads a headed, comma-separated file: drops rows with missing fields
/// (empty or `?`), one-hot encodes categorical columns (levels in sorted
/// order) and min-max scales the result.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LoadedCsv> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let categorical: HashSet<&str> = schema.categorical.iter().map(String::as_str).collect();
    let ignore: HashSet<&str> = schema.ignore.iter().map(String::as_str).collect();
    for name in schema.categorical.iter().chain(&schema.ignore).chain(std::iter::once(&schema.label)) {
        if !headers.iter().any(|h| h == name) {
            return Err(Error::InvalidConfig(format!("column {name:?} not found in header")));
        }
    }
    let roles: Vec<Role> = headers
        .iter()
        .map(|h| {
            if *h == schema.label {
                Role::Label
            } else if ignore.contains(h.as_str()) {
                Role::Ignore
            } else if categorical.contains(h.as_str()) {
                Role::Categorical
            } else {
                Role::Numeric
            }
        })
        .collect();

    let mut rows: Vec<(u64, Vec<String>)> = Vec::new();
    let mut dropped_rows = 0;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let fields: Vec<String> = record.iter().map(|f| f.trim().to_string()).collect();
        let missing = fields.iter().zip(&roles).any(|(f, r)| !matches!(r, Role::Ignore) && is_missing(f));
        if missing {
            dropped_rows += 1;
        } else {
            rows.push((line, fields));
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut levels: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for (j, role) in roles.iter().enumerate() {
        if matches!(role, Role::Categorical) || (matches!(role, Role::Label) && schema.label_kind == LabelKind::Class) {
            let set: BTreeSet<&str> = rows.iter().map(|(_, f)| f[j].as_str()).collect();
            levels[j] = set.into_iter().map(String::from).collect();
        }
    }

    let mut feature_names = Vec::new();
    for (j, role) in roles.iter().enumerate() {
        match role {
            Role::Numeric => feature_names.push(headers[j].clone()),
            Role::Categorical => feature_names.extend(levels[j].iter().map(|l| format!("{}={l}", headers[j]))),
            Role::Label | Role::Ignore => {}
        }
    }

    let parse = |line: u64, j: usize, text: &str| -> Result<f64> {
        let v: f64 = text.parse().map_err(|e| Error::Parse {
            row: line as usize,
            column: headers[j].clone(),
            message: format!("{text:?} is not a number ({e})"),
        })?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Parse { row: line as usize, column: headers[j].clone(), message: "value is not finite".into() })
        }
    };

    let mut examples = Vec::with_capacity(rows.len());
    for (line, fields) in &rows {
        let mut features = Vec::with_capacity(feature_names.len());
        let mut label = None;
        for (j, role) in roles.iter().enumerate() {
            let text = fields[j].as_str();
            match role {
                Role::Numeric => features.push(parse(*line, j, text)?),
                Role::Categorical => {
                    features.extend(levels[j].iter().map(|l| if l == text { 1.0 } else { 0.0 }));
                }
                Role::Label => {
                    label = Some(match schema.label_kind {
                        LabelKind::Real => Label::Real(parse(*line, j, text)?),
                        LabelKind::Class => {
                            Label::Class(levels[j].binary_search_by(|l| l.as_str().cmp(text)).expect("level seen"))
                        }
                    });
                }
                Role::Ignore => {}
            }
        }
        examples.push(Example { features, label: label.expect("label column present") });
    }
    minmax_scale(&mut examples);

    let class_count = match schema.label_kind {
        LabelKind::Class => {
            let j = roles.iter().position(|r| matches!(r, Role::Label)).expect("label column present");
            Some(levels[j].len())
        }
        LabelKind::Real => None,
    };
    Ok(LoadedCsv { dataset: Dataset::new(examples, class_count, feature_names)?, dropped_rows })
}

/// Shuffled train/test partition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub const DEFAULT_TRAIN_FRACTION: f64 = 0.88;

    pub fn new(seed: u64) -> Self {
        Self { train_fraction: Self::DEFAULT_TRAIN_FRACTION, seed }
    }
}

/// Shuffles with the split stream of `spec.seed` and cuts after
/// `floor(train_fraction * n)` rows, clamped so both parts are non-empty.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!("splitting needs at least 2 rows, got {n}")));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("train_fraction must lie in (0, 1), got {}", spec.train_fraction)));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(spec.seed, STREAM_SPLIT));
    let cut = ((spec.train_fraction * n as f64).floor() as usize).clamp(1, n - 1);
    Ok((ds.subset(&order[..cut]), ds.subset(&order[cut..])))
}

/// One draw of `|a + b N(0, 1)|`.
pub fn draw_folded_normal<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    (a + b * z).abs()
}

/// `count` folded-normal draws from the data stream of `seed`.
pub fn folded_normal(a: f64, b: f64, count: usize, seed: u64) -> Result<Sample<f64>> {
    if count == 0 || !(b >= 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParams(format!(
            "folded normal needs count >= 1 and b >= 0, got a={a}, b={b}, count={count}"
        )));
    }
    let mut rng = stream_rng(seed, STREAM_DATA);
    Sample::new((0..count).map(|_| draw_folded_normal(&mut rng, a, b)).collect())
}

/// Mean and second moment of `|N(a, b^2)|`.
pub fn folded_normal_moments(a: f64, b: f64) -> (f64, f64) {
    let second = a * a + b * b;
    if b == 0.0 {
        return (a.abs(), second);
    }
    let r = a / b;
    let phi_neg = 0.5 * statrs::function::erf::erfc(r / std::f64::consts::SQRT_2);
    let mean = b * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * r * r).exp() + a * (1.0 - 2.0 * phi_neg);
    (mean, second)
}

/// Additive noise law for synthetic regression.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law", content = "scale")]
pub enum NoiseLaw {
    None,
    /// `N(0, s^2)`.
    Normal(f64),
    /// `exp(N) - exp(s^2 / 2)` with `N ~ N(0, s^2)`, which has mean 0.
    LognormalCentered(f64),
}

impl NoiseLaw {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseLaw::None => 0.0,
            NoiseLaw::Normal(s) => s * rng.sample::<f64, _>(StandardNormal),
            NoiseLaw::LognormalCentered(s) => (s * rng.sample::<f64, _>(StandardNormal)).exp() - (0.5 * s * s).exp(),
        }
    }
}

/// Input law for synthetic regression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputLaw {
    StandardNormal,
    UnitUniform,
}

/// `Y = w0 + w1 X + noise`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionLaw {
    pub w0: f64,
    pub w1: f64,
    pub noise: NoiseLaw,
    pub input: InputLaw,
}

impl RegressionLaw {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Example<f64> {
        let x = match self.input {
            InputLaw::StandardNormal => rng.sample(StandardNormal),
            InputLaw::UnitUniform => rng.random::<f64>(),
        };
        Example::regression(vec![x], self.w0 + self.w1 * x + self.noise.draw(rng))
    }
}

/// `count` unscaled draws of `law` from the data stream of `seed`.
pub fn synth_regression(law: &RegressionLaw, count: usize, seed: u64) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = stream_rng(seed, STREAM_DATA);
    Dataset::new((0..count).map(|_| law.draw(&mut rng)).collect(), None, vec!["x".into()])
}

/// Noise distribution around each blob center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law", content = "dof")]
pub enum BlobNoise {
    Gaussian,
    /// Student-t with the given degrees of freedom, per coordinate.
    StudentT(f64),
}

/// Gaussian-style blobs on a scaled simplex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub class_count: usize,
    pub dim: usize,
    pub separation: f64,
    pub count: usize,
    /// Probability of replacing a label with a uniformly drawn class.
    pub label_noise: f64,
    pub noise: BlobNoise,
}

impl BlobSpec {
    pub fn gaussian(class_count: usize, dim: usize, separation: f64, count: usize) -> Self {
        Self { class_count, dim, separation, count, label_noise: 0.0, noise: BlobNoise::Gaussian }
    }
}

/// Class `k < dim` is centered at `separation e_k`; with `class_count =
/// dim + 1` the last class sits at the origin. Classes are drawn uniformly.
pub fn synth_blobs(spec: &BlobSpec, seed: u64) -> Result<Dataset> {
    if spec.class_count < 2 || spec.class_count > spec.dim + 1 {
        return Err(Error::InvalidParams(format!(
            "blobs need 2 <= class_count <= dim + 1, got {} classes in dimension {}",
            spec.class_count, spec.dim
        )));
    }
    if spec.count == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(0.0..=1.0).contains(&spec.label_noise) || !(spec.separation >= 0.0) {
        return Err(Error::InvalidParams("label_noise must lie in [0, 1] and separation be nonnegative".into()));
    }
    let t = match spec.noise {
        BlobNoise::Gaussian => None,
        BlobNoise::StudentT(dof) => {
            Some(StudentT::new(dof).map_err(|e| Error::InvalidParams(format!("student-t: {e}")))?)
        }
    };
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng: StreamRng = stream_rng(seed, STREAM_DATA);
    let mut examples = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        let class = rng.random_range(0..spec.class_count);
        let features: Vec<f64> = (0..spec.dim)
            .map(|j| {
                let center = if j == class { spec.separation } else { 0.0 };
                let z = match &t {
                    Some(t) => t.sample(&mut rng),
                    None => unit.sample(&mut rng),
                };
                center + z
            })
            .collect();
        let label = if spec.label_noise > 0.0 && rng.random::<f64>() < spec.label_noise {
            rng.random_range(0..spec.class_count)
        } else {
            class
        };
        examples.push(Example::classification(features, label));
    }
    minmax_scale(&mut examples);
    let names = (0..spec.dim).map(|j| format!("x{j}")).collect();
    Dataset::new(examples, Some(spec.class_count), names)
}

/// Class frequencies, for summaries.
pub fn class_histogram(ds: &Dataset) -> BTreeMap<usize, usize> {
    let mut m = BTreeMap::new();
    for ex in &ds.examples {
        if let Label::Class(k) = ex.label {
            *m.entry(k).or_insert(0) += 1;
        }
    }
    m
}
