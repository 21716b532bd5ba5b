//! Behaviour classification over captured frames.
//!
//! The hub cares about one thing: turning an image payload into a
//! behaviour label fast enough to purge the raw bytes. The pieces here
//! are deliberately small: a dataset container with a stratified
//! splitter, a confusion matrix, a pluggable [`Classifier`] trait, a
//! histogram baseline, and an oracle that reads the synthetic frame
//! header back (useful as a reference point and for pipeline drills
//! where classification must be exact).

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nodes::synth;

/// Label vocabulary a classifier emits into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelScheme {
    /// acceptable / risky
    Binary,
    /// Four-way behaviour split.
    Multimodal,
}

impl LabelScheme {
    pub fn class_names(&self) -> &'static [&'static str] {
        match self {
            LabelScheme::Binary => &["acceptable", "risky"],
            LabelScheme::Multimodal => {
                &["observing", "photographing", "touching", "crossing_barrier"]
            }
        }
    }

    pub fn class_count(&self) -> usize {
        self.class_names().len()
    }

    /// Scheme byte used in synthetic frame headers.
    pub fn tag(&self) -> u8 {
        match self {
            LabelScheme::Binary => synth::SCHEME_BINARY,
            LabelScheme::Multimodal => synth::SCHEME_MULTIMODAL,
        }
    }

    pub fn from_tag(tag: u8) -> Option<LabelScheme> {
        match tag {
            synth::SCHEME_BINARY => Some(LabelScheme::Binary),
            synth::SCHEME_MULTIMODAL => Some(LabelScheme::Multimodal),
            _ => None,
        }
    }

    pub fn parse(name: &str) -> Option<LabelScheme> {
        match name {
            "binary" => Some(LabelScheme::Binary),
            "multimodal" => Some(LabelScheme::Multimodal),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LabelScheme::Binary => "binary",
            LabelScheme::Multimodal => "multimodal",
        }
    }
}

impl fmt::Display for LabelScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelScheme::Binary => f.write_str("binary"),
            LabelScheme::Multimodal => f.write_str("multimodal"),
        }
    }
}

/// One behaviour verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorLabel {
    pub scheme: LabelScheme,
    pub class_id: u8,
}

impl BehaviorLabel {
    pub fn new(scheme: LabelScheme, class_id: u8) -> Result<Self, VisionError> {
        if (class_id as usize) >= scheme.class_count() {
            return Err(VisionError::ClassOutOfRange { scheme, class_id });
        }
        Ok(BehaviorLabel { scheme, class_id })
    }

    pub fn name(&self) -> &'static str {
        self.scheme.class_names()[self.class_id as usize]
    }
}

impl fmt::Display for BehaviorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum VisionError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
    #[error("class `{name}` has {count} item(s); stratified splitting needs at least 2 per class")]
    Stratification { name: String, count: usize },
    #[error("class id {class_id} is out of range for the {scheme} scheme")]
    ClassOutOfRange { scheme: LabelScheme, class_id: u8 },
    #[error("expected {expected} labels, got {got}")]
    SchemeMismatch {
        expected: LabelScheme,
        got: LabelScheme,
    },
    #[error("classifier has not been trained")]
    Untrained,
    #[error("payload is not a synthetic frame")]
    NotSynthetic,
    #[error("unknown scheme tag {0:#04x}")]
    UnknownSchemeTag(u8),
    #[error("payload has no bytes beyond the header to classify")]
    NoFeatures,
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("labels csv line {line}: {message}")]
    LabelsCsv { line: u64, message: String },
}

/// A payload with its ground-truth label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub payload: Vec<u8>,
    pub label: BehaviorLabel,
}

/// An in-memory dataset where every label shares one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    scheme: LabelScheme,
    items: Vec<LabeledImage>,
}

impl LabeledDataset {
    pub fn new(scheme: LabelScheme, items: Vec<LabeledImage>) -> Result<Self, VisionError> {
        for item in &items {
            if item.label.scheme != scheme {
                return Err(VisionError::SchemeMismatch {
                    expected: scheme,
                    got: item.label.scheme,
                });
            }
            // Labels are constructed bounds-checked, but datasets can be
            // assembled from deserialized parts too.
            BehaviorLabel::new(scheme, item.label.class_id)?;
        }
        Ok(LabeledDataset { scheme, items })
    }

    pub fn scheme(&self) -> LabelScheme {
        self.scheme
    }

    pub fn items(&self) -> &[LabeledImage] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Items per class, indexed by class id.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.scheme.class_count()];
        for item in &self.items {
            counts[item.label.class_id as usize] += 1;
        }
        counts
    }

    /// Write the dataset as `images/NNNNN.bin` files plus a `labels.csv`
    /// manifest with columns `file,scheme,class_id`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), VisionError> {
        let io_err = |path: &Path, source: io::Error| VisionError::Io {
            path: path.to_path_buf(),
            source,
        };
        let images = dir.join("images");
        std::fs::create_dir_all(&images).map_err(|e| io_err(&images, e))?;
        let mut manifest = String::from("file,scheme,class_id\n");
        for (i, item) in self.items.iter().enumerate() {
            let rel = format!("images/{i:05}.bin");
            let path = dir.join(&rel);
            std::fs::write(&path, &item.payload).map_err(|e| io_err(&path, e))?;
            manifest.push_str(&format!("{rel},{},{}\n", self.scheme, item.label.class_id));
        }
        let labels = dir.join("labels.csv");
        std::fs::write(&labels, manifest).map_err(|e| io_err(&labels, e))?;
        Ok(())
    }

    pub fn from_dir(dir: &Path) -> Result<Self, VisionError> {
        let labels_path = dir.join("labels.csv");
        let text = std::fs::read_to_string(&labels_path).map_err(|source| VisionError::Io {
            path: labels_path.clone(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let mut scheme: Option<LabelScheme> = None;
        let mut items = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| VisionError::LabelsCsv {
                line: 0,
                message: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let bad = |message: String| VisionError::LabelsCsv { line, message };
            let file = record.get(0).ok_or_else(|| bad("missing file column".into()))?;
            let scheme_name = record
                .get(1)
                .ok_or_else(|| bad("missing scheme column".into()))?;
            let class_id: u8 = record
                .get(2)
                .ok_or_else(|| bad("missing class_id column".into()))?
                .parse()
                .map_err(|_| bad("class_id is not a small integer".into()))?;
            let row_scheme = LabelScheme::parse(scheme_name)
                .ok_or_else(|| bad(format!("unknown scheme `{scheme_name}`")))?;
            match scheme {
                None => scheme = Some(row_scheme),
                Some(s) if s != row_scheme => {
                    return Err(VisionError::SchemeMismatch {
                        expected: s,
                        got: row_scheme,
                    });
                }
                Some(_) => {}
            }
            let path = dir.join(file);
            let payload = std::fs::read(&path).map_err(|source| VisionError::Io {
                path: path.clone(),
                source,
            })?;
            items.push(LabeledImage {
                payload,
                label: BehaviorLabel::new(row_scheme, class_id)?,
            });
        }
        let scheme = scheme.ok_or(VisionError::EmptyDataset)?;
        LabeledDataset::new(scheme, items)
    }
}

/// Stratified train/test split.
///
/// Every class present in the dataset lands in both halves. Class quotas
/// come from largest-remainder rounding of `train_fraction`, clamped so
/// neither half loses a class, and membership within a class is a seeded
/// shuffle. The same `(dataset, fraction, seed)` always yields the same
/// partition.
pub fn split_dataset(
    dataset: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset), VisionError> {
    if dataset.is_empty() {
        return Err(VisionError::EmptyDataset);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(VisionError::BadFraction(train_fraction));
    }

    let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, item) in dataset.items.iter().enumerate() {
        by_class.entry(item.label.class_id).or_default().push(i);
    }

    // With several classes present, each needs an item on both sides.
    if by_class.len() > 1 {
        for (&class_id, members) in &by_class {
            if members.len() < 2 {
                let name = dataset.scheme.class_names()[class_id as usize];
                return Err(VisionError::Stratification {
                    name: name.to_string(),
                    count: members.len(),
                });
            }
        }
    } else {
        let (&class_id, members) = by_class.iter().next().expect("non-empty dataset");
        if members.len() < 2 {
            let name = dataset.scheme.class_names()[class_id as usize];
            return Err(VisionError::Stratification {
                name: name.to_string(),
                count: members.len(),
            });
        }
    }

    let total = dataset.len();
    let class_count = by_class.len();
    let target = ((train_fraction * total as f64).round() as usize)
        .clamp(class_count, total - class_count);

    // Initial quota per class, then walk the sum to the target by
    // largest fractional deficit. Ties resolve to the lowest class id.
    let mut quotas: BTreeMap<u8, usize> = BTreeMap::new();
    for (&class_id, members) in &by_class {
        let exact = train_fraction * members.len() as f64;
        let q = (exact.floor() as usize).clamp(1, members.len() - 1);
        quotas.insert(class_id, q);
    }
    let sum = |quotas: &BTreeMap<u8, usize>| quotas.values().sum::<usize>();
    while sum(&quotas) < target {
        let pick = by_class
            .iter()
            .filter(|(id, members)| quotas[id] < members.len() - 1)
            .max_by(|(a_id, a), (b_id, b)| {
                let da = train_fraction * a.len() as f64 - quotas[a_id] as f64;
                let db = train_fraction * b.len() as f64 - quotas[b_id] as f64;
                da.partial_cmp(&db)
                    .unwrap()
                    .then(b_id.cmp(a_id))
            })
            .map(|(id, _)| *id)
            .expect("target is reachable");
        *quotas.get_mut(&pick).unwrap() += 1;
    }
    while sum(&quotas) > target {
        let pick = by_class
            .iter()
            .filter(|(id, _)| quotas[id] > 1)
            .min_by(|(a_id, a), (b_id, b)| {
                let da = train_fraction * a.len() as f64 - quotas[a_id] as f64;
                let db = train_fraction * b.len() as f64 - quotas[b_id] as f64;
                da.partial_cmp(&db)
                    .unwrap()
                    .then(a_id.cmp(b_id))
            })
            .map(|(id, _)| *id)
            .expect("target is reachable");
        *quotas.get_mut(&pick).unwrap() -= 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (class_id, mut members) in by_class {
        members.shuffle(&mut rng);
        let q = quotas[&class_id];
        train_idx.extend_from_slice(&members[..q]);
        test_idx.extend_from_slice(&members[q..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let gather = |idx: &[usize]| -> Vec<LabeledImage> {
        idx.iter().map(|&i| dataset.items[i].clone()).collect()
    };
    Ok((
        LabeledDataset::new(dataset.scheme, gather(&train_idx))?,
        LabeledDataset::new(dataset.scheme, gather(&test_idx))?,
    ))
}

/// Square contingency table: rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        assert!(classes > 0, "a confusion matrix needs at least one class");
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Self {
        assert_eq!(counts.len(), classes * classes, "counts must be square");
        assert!(classes > 0, "a confusion matrix needs at least one class");
        ConfusionMatrix { classes, counts }
    }

    pub fn record(&mut self, true_id: u8, predicted_id: u8) {
        let (t, p) = (true_id as usize, predicted_id as usize);
        assert!(t < self.classes && p < self.classes, "class out of range");
        self.counts[t * self.classes + p] += 1;
    }

    pub fn count(&self, true_id: u8, predicted_id: u8) -> u64 {
        self.counts[true_id as usize * self.classes + predicted_id as usize]
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn diagonal(&self) -> u64 {
        (0..self.classes)
            .map(|i| self.counts[i * self.classes + i])
            .sum()
    }

    /// Share of recorded outcomes on the diagonal. Panics on an empty
    /// matrix; there is no accuracy of nothing.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        assert!(total > 0, "empty matrix has no accuracy");
        self.diagonal() as f64 / total as f64
    }

    pub fn to_csv_string(&self, scheme: LabelScheme) -> String {
        let names = scheme.class_names();
        assert_eq!(names.len(), self.classes, "scheme size must match");
        let mut out = String::from("true\\predicted");
        for name in names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (t, name) in names.iter().enumerate() {
            out.push_str(name);
            for p in 0..self.classes {
                out.push_str(&format!(",{}", self.counts[t * self.classes + p]));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub items: usize,
    pub wall_time_s: f64,
}

/// Anything that can label an image payload. Implementations must be
/// deterministic: same training data and same payload, same verdict.
pub trait Classifier {
    fn name(&self) -> &str;
    fn train(&mut self, dataset: &LabeledDataset) -> Result<TrainStats, VisionError>;
    /// Returns the label and a confidence in [0, 1].
    fn predict(&self, payload: &[u8]) -> Result<(BehaviorLabel, f64), VisionError>;
}

/// Evaluation result over a held-out set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub matrix: ConfusionMatrix,
    pub accuracy: f64,
}

/// Run a trained classifier over a test set. Any predict error aborts
/// the evaluation; silent skips would quietly skew the metrics.
pub fn evaluate(clf: &dyn Classifier, test: &LabeledDataset) -> Result<EvalOutcome, VisionError> {
    if test.is_empty() {
        return Err(VisionError::EmptyTestSet);
    }
    let mut matrix = ConfusionMatrix::new(test.scheme().class_count());
    for item in test.items() {
        let (label, _confidence) = clf.predict(&item.payload)?;
        if label.scheme != test.scheme() {
            return Err(VisionError::SchemeMismatch {
                expected: test.scheme(),
                got: label.scheme,
            });
        }
        matrix.record(item.label.class_id, label.class_id);
    }
    let accuracy = matrix.accuracy();
    Ok(EvalOutcome { matrix, accuracy })
}

const HISTOGRAM_BINS: usize = 256;

struct TrainedBaseline {
    scheme: LabelScheme,
    /// Mean body-byte histogram per class; `None` for classes absent
    /// from the training data.
    centroids: Vec<Option<Vec<f64>>>,
    /// Linear view of the same model: scoring wᵀh + b with w = 2μ and
    /// b = -|μ|² ranks classes exactly like nearest-centroid distance.
    weights: Vec<Option<(Vec<f64>, f64)>>,
}

/// Nearest-centroid classifier over body-byte histograms, expressed as
/// one linear scorer per class. The fixed-size frame header is metadata
/// (it names the ground-truth class), so features come strictly from the
/// bytes after it; anything else would let the model cheat.
#[derive(Default)]
pub struct BaselineClassifier {
    trained: Option<TrainedBaseline>,
}

impl BaselineClassifier {
    pub fn new() -> Self {
        Self::default()
    }
}

fn body_histogram(payload: &[u8]) -> Result<Vec<f64>, VisionError> {
    let start = synth::HEADER_LEN.min(payload.len());
    let body = &payload[start..];
    if body.is_empty() {
        return Err(VisionError::NoFeatures);
    }
    let mut hist = vec![0.0f64; HISTOGRAM_BINS];
    for &b in body {
        hist[b as usize] += 1.0;
    }
    let n = body.len() as f64;
    for bin in &mut hist {
        *bin /= n;
    }
    Ok(hist)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl Classifier for BaselineClassifier {
    fn name(&self) -> &str {
        "baseline-histogram"
    }

    fn train(&mut self, dataset: &LabeledDataset) -> Result<TrainStats, VisionError> {
        if dataset.is_empty() {
            return Err(VisionError::EmptyDataset);
        }
        let started = Instant::now();
        let classes = dataset.scheme().class_count();
        let mut sums: Vec<Vec<f64>> = vec![vec![0.0; HISTOGRAM_BINS]; classes];
        let mut counts = vec![0usize; classes];
        for item in dataset.items() {
            let hist = body_histogram(&item.payload)?;
            let c = item.label.class_id as usize;
            for (acc, v) in sums[c].iter_mut().zip(&hist) {
                *acc += v;
            }
            counts[c] += 1;
        }
        let mut centroids = Vec::with_capacity(classes);
        let mut weights = Vec::with_capacity(classes);
        for (sum, count) in sums.into_iter().zip(&counts) {
            if *count == 0 {
                centroids.push(None);
                weights.push(None);
                continue;
            }
            let mu: Vec<f64> = sum.into_iter().map(|v| v / *count as f64).collect();
            let norm_sq: f64 = mu.iter().map(|v| v * v).sum();
            let w: Vec<f64> = mu.iter().map(|v| 2.0 * v).collect();
            weights.push(Some((w, -norm_sq)));
            centroids.push(Some(mu));
        }
        self.trained = Some(TrainedBaseline {
            scheme: dataset.scheme(),
            centroids,
            weights,
        });
        Ok(TrainStats {
            items: dataset.len(),
            wall_time_s: started.elapsed().as_secs_f64(),
        })
    }

    fn predict(&self, payload: &[u8]) -> Result<(BehaviorLabel, f64), VisionError> {
        let trained = self.trained.as_ref().ok_or(VisionError::Untrained)?;
        let hist = body_histogram(payload)?;

        let mut best: Option<(u8, f64)> = None;
        for (class_id, weight) in trained.weights.iter().enumerate() {
            let Some((w, b)) = weight else { continue };
            let score: f64 = w.iter().zip(&hist).map(|(wi, hi)| wi * hi).sum::<f64>() + b;
            // Strict comparison: ties go to the lowest class id.
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((class_id as u8, score));
            }
        }
        let (class_id, _) = best.ok_or(VisionError::Untrained)?;

        // Confidence from the margin between the two nearest centroids.
        let mut dists: Vec<f64> = trained
            .centroids
            .iter()
            .flatten()
            .map(|mu| euclidean(mu, &hist))
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let confidence = match dists.as_slice() {
            [_only] => 1.0,
            [d1, d2, ..] if d1 + d2 > 0.0 => (d2 - d1) / (d2 + d1),
            _ => 0.0,
        };

        Ok((BehaviorLabel::new(trained.scheme, class_id)?, confidence))
    }
}

/// Reads the class straight out of the synthetic frame header. Exact on
/// anything the emulated cameras produce, useless on real images; that
/// is the point of keeping the classifier pluggable.
#[derive(Debug, Default)]
pub struct OracleClassifier;

impl OracleClassifier {
    pub fn new() -> Self {
        Self
    }
}

impl Classifier for OracleClassifier {
    fn name(&self) -> &str {
        "oracle-header"
    }

    fn train(&mut self, dataset: &LabeledDataset) -> Result<TrainStats, VisionError> {
        // Nothing to learn; the header already carries the answer.
        Ok(TrainStats {
            items: dataset.len(),
            wall_time_s: 0.0,
        })
    }

    fn predict(&self, payload: &[u8]) -> Result<(BehaviorLabel, f64), VisionError> {
        oracle_classify(payload).map(|label| (label, 1.0))
    }
}

/// Decode the ground-truth label embedded in a synthetic frame.
pub fn oracle_classify(payload: &[u8]) -> Result<BehaviorLabel, VisionError> {
    let (scheme_tag, class_id) = synth::header(payload).ok_or(VisionError::NotSynthetic)?;
    let scheme =
        LabelScheme::from_tag(scheme_tag).ok_or(VisionError::UnknownSchemeTag(scheme_tag))?;
    BehaviorLabel::new(scheme, class_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn synth_dataset(scheme: LabelScheme, per_class: usize, seed_base: u64) -> LabeledDataset {
        fixtures::synthetic_dataset(scheme, per_class * scheme.class_count(), seed_base)
    }

    #[test]
    fn labels_have_names_and_bounds() {
        let risky = BehaviorLabel::new(LabelScheme::Binary, 1).unwrap();
        assert_eq!(risky.name(), "risky");
        assert_eq!(risky.to_string(), "risky");
        assert!(matches!(
            BehaviorLabel::new(LabelScheme::Binary, 2),
            Err(VisionError::ClassOutOfRange { .. })
        ));
        assert_eq!(LabelScheme::Multimodal.class_count(), 4);
    }

    #[test]
    fn split_is_proportional_and_stratified() {
        let ds = synth_dataset(LabelScheme::Binary, 375, 1);
        assert_eq!(ds.len(), 750);
        let (train, test) = split_dataset(&ds, 0.8, 9).unwrap();
        assert_eq!(train.len(), 600);
        assert_eq!(test.len(), 150);
        assert_eq!(train.class_counts(), vec![300, 300]);
        assert_eq!(test.class_counts(), vec![75, 75]);
    }

    #[test]
    fn split_halves_a_two_item_class() {
        let ds = synth_dataset(LabelScheme::Binary, 1, 3);
        // One item per class cannot be stratified.
        assert!(matches!(
            split_dataset(&ds, 0.5, 1),
            Err(VisionError::Stratification { count: 1, .. })
        ));

        let items: Vec<LabeledImage> = synth_dataset(LabelScheme::Binary, 2, 4)
            .items()
            .iter()
            .filter(|i| i.label.class_id == 0)
            .cloned()
            .collect();
        let single_class = LabeledDataset::new(LabelScheme::Binary, items).unwrap();
        assert_eq!(single_class.len(), 2);
        let (train, test) = split_dataset(&single_class, 0.5, 1).unwrap();
        assert_eq!((train.len(), test.len()), (1, 1));
    }

    #[test]
    fn split_rejects_bad_fractions_and_empty_sets() {
        let ds = synth_dataset(LabelScheme::Binary, 5, 5);
        assert!(matches!(
            split_dataset(&ds, 0.0, 1),
            Err(VisionError::BadFraction(_))
        ));
        assert!(matches!(
            split_dataset(&ds, 1.0, 1),
            Err(VisionError::BadFraction(_))
        ));
        let empty = LabeledDataset::new(LabelScheme::Binary, vec![]).unwrap();
        assert!(matches!(
            split_dataset(&empty, 0.5, 1),
            Err(VisionError::EmptyDataset)
        ));
    }

    #[test]
    fn split_partitions_without_loss_or_overlap() {
        let ds = synth_dataset(LabelScheme::Multimodal, 13, 6);
        let (train, test) = split_dataset(&ds, 0.7, 2).unwrap();
        assert_eq!(train.len() + test.len(), ds.len());

        let mut recombined: Vec<&LabeledImage> =
            train.items().iter().chain(test.items()).collect();
        let mut original: Vec<&LabeledImage> = ds.items().iter().collect();
        let key = |i: &&LabeledImage| (i.payload.clone(), i.label.class_id);
        recombined.sort_by_key(key);
        original.sort_by_key(key);
        assert_eq!(recombined, original);
    }

    #[test]
    fn split_replays_with_the_same_seed() {
        let ds = synth_dataset(LabelScheme::Binary, 20, 7);
        let a = split_dataset(&ds, 0.8, 42).unwrap();
        let b = split_dataset(&ds, 0.8, 42).unwrap();
        assert_eq!(a.0.items(), b.0.items());
        assert_eq!(a.1.items(), b.1.items());
    }

    #[test]
    fn confusion_matrix_arithmetic() {
        let mut m = ConfusionMatrix::new(2);
        for _ in 0..3 {
            m.record(0, 0);
        }
        m.record(0, 1);
        for _ in 0..6 {
            m.record(1, 1);
        }
        assert_eq!(m.total(), 10);
        assert_eq!(m.diagonal(), 9);
        assert_eq!(m.accuracy(), 0.9);
        assert_eq!(m.count(0, 1), 1);
        assert_eq!(m.count(1, 0), 0);

        let csv = m.to_csv_string(LabelScheme::Binary);
        assert!(csv.starts_with("true\\predicted,acceptable,risky\n"));
        assert!(csv.contains("acceptable,3,1\n"));
        assert!(csv.contains("risky,0,6\n"));
    }

    #[test]
    #[should_panic(expected = "empty matrix has no accuracy")]
    fn accuracy_of_nothing_panics() {
        ConfusionMatrix::new(2).accuracy();
    }

    #[test]
    fn oracle_is_exact_on_synthetic_frames() {
        let ds = synth_dataset(LabelScheme::Multimodal, 10, 8);
        let outcome = evaluate(&OracleClassifier::new(), &ds).unwrap();
        assert_eq!(outcome.accuracy, 1.0);
        assert_eq!(outcome.matrix.diagonal(), ds.len() as u64);
        assert!(matches!(
            oracle_classify(b"not an image"),
            Err(VisionError::NotSynthetic)
        ));
    }

    #[test]
    fn baseline_learns_the_band_structure() {
        let ds = synth_dataset(LabelScheme::Binary, 40, 9);
        let (train, test) = split_dataset(&ds, 0.8, 3).unwrap();
        let mut clf = BaselineClassifier::new();
        let stats = clf.train(&train).unwrap();
        assert_eq!(stats.items, train.len());
        let outcome = evaluate(&clf, &test).unwrap();
        // Disjoint byte bands make the classes linearly separable.
        assert_eq!(outcome.accuracy, 1.0);

        let (label, confidence) = clf.predict(&test.items()[0].payload).unwrap();
        assert_eq!(label, test.items()[0].label);
        assert!((0.0..=1.0).contains(&confidence));
        assert!(confidence > 0.5, "bands are far apart: {confidence}");
    }

    #[test]
    fn baseline_retrains_identically() {
        let ds = synth_dataset(LabelScheme::Binary, 10, 10);
        let probe = synth_dataset(LabelScheme::Binary, 3, 11);
        let mut a = BaselineClassifier::new();
        let mut b = BaselineClassifier::new();
        a.train(&ds).unwrap();
        b.train(&ds).unwrap();
        for item in probe.items() {
            let pa = a.predict(&item.payload).unwrap();
            let pb = b.predict(&item.payload).unwrap();
            assert_eq!(pa.0, pb.0);
            assert_eq!(pa.1, pb.1);
        }
    }

    #[test]
    fn baseline_refuses_to_run_untrained_or_featureless() {
        let clf = BaselineClassifier::new();
        assert!(matches!(
            clf.predict(b"anything"),
            Err(VisionError::Untrained)
        ));

        let mut clf = BaselineClassifier::new();
        clf.train(&synth_dataset(LabelScheme::Binary, 5, 12)).unwrap();
        let empty = LabeledDataset::new(LabelScheme::Binary, vec![]).unwrap();
        assert!(matches!(
            BaselineClassifier::new().train(&empty),
            Err(VisionError::EmptyDataset)
        ));
        assert!(matches!(
            clf.predict(&[1, 2, 3]),
            Err(VisionError::NoFeatures)
        ));
    }

    #[test]
    fn failing_classifier_aborts_evaluation() {
        struct Grumpy;
        impl Classifier for Grumpy {
            fn name(&self) -> &str {
                "grumpy"
            }
            fn train(&mut self, _: &LabeledDataset) -> Result<TrainStats, VisionError> {
                Ok(TrainStats {
                    items: 0,
                    wall_time_s: 0.0,
                })
            }
            fn predict(&self, _: &[u8]) -> Result<(BehaviorLabel, f64), VisionError> {
                Err(VisionError::NotSynthetic)
            }
        }
        let ds = synth_dataset(LabelScheme::Binary, 2, 13);
        assert!(matches!(
            evaluate(&Grumpy, &ds),
            Err(VisionError::NotSynthetic)
        ));
        let empty = LabeledDataset::new(LabelScheme::Binary, vec![]).unwrap();
        assert!(matches!(
            evaluate(&Grumpy, &empty),
            Err(VisionError::EmptyTestSet)
        ));
    }

    #[test]
    fn dataset_round_trips_through_a_directory() {
        let dir = tempfile::tempdir().unwrap();
        let ds = synth_dataset(LabelScheme::Multimodal, 3, 14);
        ds.write_dir(dir.path()).unwrap();
        let back = LabeledDataset::from_dir(dir.path()).unwrap();
        assert_eq!(back, ds);
    }
}
