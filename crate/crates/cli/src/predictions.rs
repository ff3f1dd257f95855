//! JSON-lines prediction files.
//!
//! A header line lists the categories, then come `image`, `user` and
//! `influence` records in that order, each sorted by key. Records whose
//! probabilities are all below 0.5 carry `"emotion": null` and
//! `"neutral": true`.

use std::collections::{BTreeMap, BTreeSet};

use anyhow::{bail, Context};
use emotion_influence::learning::Prediction;
use emotion_influence::network::{resolve_multilabel, EmotionCategory, ImageId, TimeSlice, TimeVaryingNetwork, UserId};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum Record {
    Header {
        schema: u32,
        categories: Vec<EmotionCategory>,
    },
    Image {
        id: ImageId,
        owner: UserId,
        t: TimeSlice,
        probabilities: BTreeMap<EmotionCategory, f64>,
        emotion: Option<EmotionCategory>,
        neutral: bool,
    },
    User {
        user: UserId,
        t: TimeSlice,
        probabilities: BTreeMap<EmotionCategory, f64>,
        emotion: Option<EmotionCategory>,
        neutral: bool,
    },
    Influence {
        src: UserId,
        dst: UserId,
        t: TimeSlice,
        weights: BTreeMap<EmotionCategory, f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImagePrediction {
    pub owner: UserId,
    pub slice: TimeSlice,
    pub probabilities: BTreeMap<EmotionCategory, f64>,
}

impl ImagePrediction {
    pub fn emotion(&self) -> Option<EmotionCategory> {
        resolve_multilabel(self.probabilities.iter().map(|(c, p)| (*c, *p)))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionFile {
    pub categories: BTreeSet<EmotionCategory>,
    pub images: BTreeMap<ImageId, ImagePrediction>,
    pub users: BTreeMap<(UserId, TimeSlice), BTreeMap<EmotionCategory, f64>>,
    pub influence: BTreeMap<(UserId, UserId, TimeSlice), BTreeMap<EmotionCategory, f64>>,
}

impl PredictionFile {
    /// Merges per-category predictions over the same network.
    pub fn from_predictions(net: &TimeVaryingNetwork, predictions: &[Prediction]) -> Self {
        let mut out = PredictionFile::default();
        let owners: BTreeMap<ImageId, (UserId, TimeSlice)> = net.images().map(|i| (i.id, (i.owner, i.slice))).collect();
        for p in predictions {
            out.categories.insert(p.category);
            for (id, prob) in &p.images {
                let (owner, slice) = owners[id];
                out.images
                    .entry(*id)
                    .or_insert_with(|| ImagePrediction { owner, slice, probabilities: BTreeMap::new() })
                    .probabilities
                    .insert(p.category, *prob);
            }
            for (key, u) in &p.users {
                out.users.entry(*key).or_default().insert(p.category, u.probability);
            }
            for (key, w) in &p.influence {
                out.influence.entry(*key).or_default().insert(p.category, *w);
            }
        }
        out
    }

    pub fn user_emotion(&self, user: UserId, t: TimeSlice) -> Option<EmotionCategory> {
        self.users
            .get(&(user, t))
            .and_then(|m| resolve_multilabel(m.iter().map(|(c, p)| (*c, *p))))
    }

    /// Probabilities of one category per image.
    pub fn image_probabilities(&self, category: EmotionCategory) -> BTreeMap<ImageId, f64> {
        self.images
            .iter()
            .filter_map(|(id, p)| p.probabilities.get(&category).map(|v| (*id, *v)))
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |r: &Record| {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        };
        push(&Record::Header {
            schema: SCHEMA_VERSION,
            categories: self.categories.iter().copied().collect(),
        });
        for (id, p) in &self.images {
            let emotion = p.emotion();
            push(&Record::Image {
                id: *id,
                owner: p.owner,
                t: p.slice,
                probabilities: p.probabilities.clone(),
                emotion,
                neutral: emotion.is_none(),
            });
        }
        for (&(user, t), probs) in &self.users {
            let emotion = self.user_emotion(user, t);
            push(&Record::User {
                user,
                t,
                probabilities: probs.clone(),
                emotion,
                neutral: emotion.is_none(),
            });
        }
        for (&(src, dst, t), weights) in &self.influence {
            push(&Record::Influence {
                src,
                dst,
                t,
                weights: weights.clone(),
            });
        }
        out
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut out = PredictionFile::default();
        let mut seen_header = false;
        for (idx, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line = idx + 1;
            let record: Record = serde_json::from_str(raw).with_context(|| format!("line {line}"))?;
            match record {
                Record::Header { schema, categories } => {
                    if seen_header {
                        bail!("line {line}: duplicate header");
                    }
                    if schema != SCHEMA_VERSION {
                        bail!("line {line}: unsupported schema version {schema}");
                    }
                    seen_header = true;
                    out.categories = categories.into_iter().collect();
                }
                _ if !seen_header => bail!("line {line}: first record must be the header"),
                Record::Image {
                    id,
                    owner,
                    t,
                    probabilities,
                    ..
                } => {
                    out.images.insert(
                        id,
                        ImagePrediction {
                            owner,
                            slice: t,
                            probabilities,
                        },
                    );
                }
                Record::User { user, t, probabilities, .. } => {
                    out.users.insert((user, t), probabilities);
                }
                Record::Influence { src, dst, t, weights } => {
                    out.influence.insert((src, dst, t), weights);
                }
            }
        }
        if !seen_header {
            bail!("missing header");
        }
        Ok(out)
    }
}
