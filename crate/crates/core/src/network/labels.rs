use serde::{Deserialize, Serialize};

use super::{BinaryLabel, EmotionCategory, TimeSlice, TimeVaryingNetwork, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelSource {
    ObservedMajority,
    Inferred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSliceLabel {
    pub user: UserId,
    pub slice: TimeSlice,
    pub category: EmotionCategory,
    pub label: BinaryLabel,
    pub source: LabelSource,
}

/// A user has an emotion at a slice when strictly more than half of their
/// labeled images in that slice carry it. Exactly half resolves to -1.
/// `(user, slice)` pairs without labeled images are omitted.
pub fn derive_user_labels(net: &TimeVaryingNetwork, category: EmotionCategory) -> Vec<UserSliceLabel> {
    let mut out = Vec::new();
    for ((user, slice), images) in net.image_groups() {
        let (labeled, positive) = images
            .iter()
            .filter_map(|img| img.label(category))
            .fold((0usize, 0usize), |(n, p), l| (n + 1, p + usize::from(l.is_positive())));
        if labeled == 0 {
            continue;
        }
        out.push(UserSliceLabel {
            user,
            slice,
            category,
            label: BinaryLabel::from_positive(2 * positive > labeled),
            source: LabelSource::ObservedMajority,
        });
    }
    out
}

/// Combines the six per-category probabilities into a single emotion.
///
/// Returns `None` (neutral) when every probability is below 0.5, otherwise the
/// category of highest probability. Exact ties go to the earlier category in
/// [`EmotionCategory::ALL`] order, which makes the result independent of input order.
pub fn resolve_multilabel(
    probabilities: impl IntoIterator<Item = (EmotionCategory, f64)>,
) -> Option<EmotionCategory> {
    let mut best: Option<(EmotionCategory, f64)> = None;
    for (cat, p) in probabilities {
        if p < 0.5 {
            continue;
        }
        best = match best {
            Some((bc, bp)) if bp > p || (bp == p && bc < cat) => Some((bc, bp)),
            _ => Some((cat, p)),
        };
    }
    best.map(|(c, _)| c)
}
