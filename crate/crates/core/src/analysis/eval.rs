use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BuildOptions, FactorKind};
use crate::learning::{fit, labeled_examples, predict, train_linear_baseline, TrainConfig};
use crate::network::{BinaryLabel, EmotionCategory, ImageId, TimeVaryingNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Metrics {
    pub fn from_counts(tp: usize, tn: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Metrics {
            accuracy: ratio(tp + tn, tp + tn + fp + fn_),
            precision,
            recall,
            f1,
            tp,
            tn,
            fp,
            fn_,
        }
    }

    /// Mean of the rates over runs, with counts summed.
    pub fn mean(runs: &[Metrics]) -> Metrics {
        let n = runs.len().max(1) as f64;
        let mut out = Metrics::default();
        for m in runs {
            out.accuracy += m.accuracy / n;
            out.precision += m.precision / n;
            out.recall += m.recall / n;
            out.f1 += m.f1 / n;
            out.tp += m.tp;
            out.tn += m.tn;
            out.fp += m.fp;
            out.fn_ += m.fn_;
        }
        out
    }

    pub fn count(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Confusion-matrix metrics of thresholded probabilities against truth.
/// Images present in `truth` but missing from `predictions` are an error.
pub fn evaluate(
    predictions: &BTreeMap<ImageId, f64>,
    truth: &BTreeMap<ImageId, BinaryLabel>,
    threshold: f64,
) -> Result<Metrics> {
    if truth.is_empty() {
        return Err(Error::Empty("truth set"));
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (id, label) in truth {
        let p = predictions
            .get(id)
            .ok_or_else(|| Error::Invariant(format!("no prediction for image {id}")))?;
        match (*p >= threshold, label.is_positive()) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(Metrics::from_counts(tp, tn, fp, fn_))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub categories: BTreeMap<EmotionCategory, Metrics>,
    /// Macro average over categories (counts are summed).
    pub average: Metrics,
}

impl MetricsReport {
    pub fn new(categories: BTreeMap<EmotionCategory, Metrics>) -> Self {
        let average = Metrics::mean(&categories.values().copied().collect::<Vec<_>>());
        MetricsReport { categories, average }
    }
}

/// Seeded choice of `fraction` of the labeled images of a category, to be
/// withheld from training.
pub fn holdout_split(net: &TimeVaryingNetwork, category: EmotionCategory, fraction: f64, seed: u64) -> BTreeSet<ImageId> {
    let mut labeled: Vec<ImageId> = net.images().filter(|i| i.label(category).is_some()).map(|i| i.id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labeled.shuffle(&mut rng);
    let n = (fraction.clamp(0.0, 1.0) * labeled.len() as f64).round() as usize;
    labeled.into_iter().take(n).collect()
}

pub fn held_out_truth(net: &TimeVaryingNetwork, category: EmotionCategory, hidden: &BTreeSet<ImageId>) -> BTreeMap<ImageId, BinaryLabel> {
    net.images()
        .filter(|i| hidden.contains(&i.id))
        .filter_map(|i| i.label(category).map(|l| (i.id, l)))
        .collect()
}

/// Model variants compared in the factor-contribution table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Baseline,
    Model,
    WithoutTemporal,
    WithoutInfluence,
    WithoutStable,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Baseline,
        Variant::Model,
        Variant::WithoutTemporal,
        Variant::WithoutInfluence,
        Variant::WithoutStable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Model => "model",
            Variant::WithoutTemporal => "model-f3",
            Variant::WithoutInfluence => "model-f4",
            Variant::WithoutStable => "model-f5",
        }
    }

    /// Factor kinds removed from the graph, or `None` for the baseline.
    pub fn drop(self) -> Option<BTreeSet<FactorKind>> {
        let kinds: &[FactorKind] = match self {
            Variant::Baseline => return None,
            Variant::Model => &[],
            Variant::WithoutTemporal => &[FactorKind::Temporal],
            Variant::WithoutInfluence => &[FactorKind::Influence],
            Variant::WithoutStable => &[FactorKind::StableInfluence],
        };
        Some(kinds.iter().copied().collect())
    }
}

/// Refits without the factor kinds in `drop` and scores the held-out images.
pub fn ablation_run(
    net: &TimeVaryingNetwork,
    category: EmotionCategory,
    config: &TrainConfig,
    window: usize,
    drop: &BTreeSet<FactorKind>,
    hidden: &BTreeSet<ImageId>,
) -> Result<Metrics> {
    if let Some(k) = drop.iter().find(|k| !matches!(k, FactorKind::Temporal | FactorKind::Influence | FactorKind::StableInfluence)) {
        return Err(Error::Invariant(format!("only f3, f4 and f5 can be ablated, not {}", k.short_name())));
    }
    let opts = BuildOptions {
        window,
        drop: drop.clone(),
        hidden: hidden.clone(),
        clamp_labels: true,
    };
    let fitted = fit::<f64>(net, category, config, &opts)?;
    let pred = predict(net, &fitted.params, category, &opts, config)?;
    evaluate(&pred.images, &held_out_truth(net, category, hidden), 0.5)
}

/// Trains the feature-only linear classifier on the non-held-out labels.
pub fn baseline_run(
    net: &TimeVaryingNetwork,
    category: EmotionCategory,
    config: &TrainConfig,
    hidden: &BTreeSet<ImageId>,
) -> Result<Metrics> {
    let model = train_linear_baseline(&labeled_examples(net, category, hidden), &config.baseline)?;
    let scores: BTreeMap<ImageId, f64> = net
        .images()
        .filter(|i| hidden.contains(&i.id))
        .map(|i| (i.id, if model.score(&i.features) > 0.0 { 1.0 } else { 0.0 }))
        .collect();
    evaluate(&scores, &held_out_truth(net, category, hidden), 0.5)
}

pub fn run_variant(
    net: &TimeVaryingNetwork,
    category: EmotionCategory,
    config: &TrainConfig,
    window: usize,
    variant: Variant,
    hidden: &BTreeSet<ImageId>,
) -> Result<Metrics> {
    match variant.drop() {
        None => baseline_run(net, category, config, hidden),
        Some(drop) => ablation_run(net, category, config, window, &drop, hidden),
    }
}

/// Accuracy and F1 per category and variant.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ContributionTable {
    pub variants: BTreeMap<Variant, MetricsReport>,
}

impl ContributionTable {
    pub fn insert(&mut self, variant: Variant, category: EmotionCategory, metrics: Metrics) {
        let report = self.variants.entry(variant).or_default();
        report.categories.insert(category, metrics);
        *report = MetricsReport::new(std::mem::take(&mut report.categories));
    }

    /// One row per category plus an average row. Accuracy columns come first,
    /// then F1, each in percent.
    pub fn to_csv(&self) -> String {
        let variants: Vec<Variant> = Variant::ALL.into_iter().filter(|v| self.variants.contains_key(v)).collect();
        let mut out = String::from("category");
        for metric in ["accuracy", "f1"] {
            for v in &variants {
                out.push_str(&format!(",{metric}_{}", v.name()));
            }
        }
        out.push('\n');
        let categories: BTreeSet<EmotionCategory> =
            self.variants.values().flat_map(|r| r.categories.keys().copied()).collect();
        let cell = |m: Option<&Metrics>, f: fn(&Metrics) -> f64| m.map(|m| format!("{:.2}", 100.0 * f(m))).unwrap_or_default();
        let mut row = |name: &str, pick: &dyn Fn(&MetricsReport) -> Option<&Metrics>| {
            out.push_str(name);
            for f in [(|m: &Metrics| m.accuracy) as fn(&Metrics) -> f64, |m: &Metrics| m.f1] {
                for v in &variants {
                    out.push(',');
                    out.push_str(&cell(pick(&self.variants[v]), f));
                }
            }
            out.push('\n');
        };
        for c in categories {
            row(c.name(), &|r| r.categories.get(&c));
        }
        row("average", &|r| Some(&r.average));
        out
    }
}
