use std::collections::BTreeSet;

use emotion_influence::network::{EmotionCategory, ImageId};
use serde::{Deserialize, Serialize};

/// Labeled images withheld from training for one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFile {
    pub category: EmotionCategory,
    pub seed: u64,
    pub fraction: f64,
    pub hidden: BTreeSet<ImageId>,
}

impl SplitFile {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("split serializes");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
