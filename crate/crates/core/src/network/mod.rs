//! Time-varying social network: users, per-slice friendships and per-slice
//! uploaded images with optional per-emotion labels.

mod io;
mod labels;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub use io::{load_network, parse_image_fragment, parse_network, write_image_fragment, write_network, SCHEMA_VERSION};
pub use labels::{derive_user_labels, resolve_multilabel, LabelSource, UserSliceLabel};

/// Index of a discrete time slice.
pub type TimeSlice = usize;

/// One week, the default slice width when mapping epoch timestamps to slices.
pub const DEFAULT_SLICE_WIDTH_SECS: i64 = 7 * 24 * 3600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImageId(pub u64);

impl fmt::Display for ImageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The six basic emotion categories. Each is modelled by its own binary model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionCategory {
    Happiness,
    Surprise,
    Anger,
    Disgust,
    Fear,
    Sadness,
}

impl EmotionCategory {
    pub const ALL: [EmotionCategory; 6] = [
        EmotionCategory::Happiness,
        EmotionCategory::Surprise,
        EmotionCategory::Anger,
        EmotionCategory::Disgust,
        EmotionCategory::Fear,
        EmotionCategory::Sadness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EmotionCategory::Happiness => "happiness",
            EmotionCategory::Surprise => "surprise",
            EmotionCategory::Anger => "anger",
            EmotionCategory::Disgust => "disgust",
            EmotionCategory::Fear => "fear",
            EmotionCategory::Sadness => "sadness",
        }
    }
}

impl fmt::Display for EmotionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EmotionCategory::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Invariant(format!("unknown emotion category {s:?}")))
    }
}

/// A binary emotion indicator, -1 or +1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinaryLabel {
    Negative,
    Positive,
}

impl BinaryLabel {
    pub fn value(self) -> i8 {
        match self {
            BinaryLabel::Negative => -1,
            BinaryLabel::Positive => 1,
        }
    }

    pub fn is_positive(self) -> bool {
        self == BinaryLabel::Positive
    }

    pub fn from_positive(positive: bool) -> Self {
        if positive {
            BinaryLabel::Positive
        } else {
            BinaryLabel::Negative
        }
    }
}

impl TryFrom<i64> for BinaryLabel {
    type Error = Error;

    fn try_from(v: i64) -> Result<Self> {
        match v {
            -1 => Ok(BinaryLabel::Negative),
            1 => Ok(BinaryLabel::Positive),
            other => Err(Error::Invariant(format!("binary label must be -1 or 1, got {other}"))),
        }
    }
}

impl Serialize for BinaryLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.value())
    }
}

impl<'de> Deserialize<'de> for BinaryLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        BinaryLabel::try_from(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: ImageId,
    pub owner: UserId,
    #[serde(rename = "t")]
    pub slice: TimeSlice,
    pub features: FeatureVector,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<EmotionCategory, BinaryLabel>,
}

impl ImageRecord {
    pub fn label(&self, category: EmotionCategory) -> Option<BinaryLabel> {
        self.labels.get(&category).copied()
    }
}

/// Maps epoch seconds onto slice indices of a fixed width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceClock {
    pub origin: i64,
    pub width: i64,
}

impl SliceClock {
    pub fn new(origin: i64, width: i64) -> Self {
        assert!(width > 0, "slice width must be positive");
        SliceClock { origin, width }
    }

    pub fn weekly(origin: i64) -> Self {
        SliceClock::new(origin, DEFAULT_SLICE_WIDTH_SECS)
    }

    /// `None` for timestamps before the origin.
    pub fn slice_of(&self, epoch_secs: i64) -> Option<TimeSlice> {
        if epoch_secs < self.origin {
            return None;
        }
        Some(((epoch_secs - self.origin) / self.width) as TimeSlice)
    }
}

/// Users, per-slice undirected friendship edges and per-(user, slice) images.
///
/// Immutable once built; construct through [`NetworkBuilder`].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeVaryingNetwork {
    users: BTreeSet<UserId>,
    horizon: usize,
    /// Per slice, undirected edges stored as `(min, max)`.
    edges: Vec<BTreeSet<(UserId, UserId)>>,
    adjacency: Vec<BTreeMap<UserId, BTreeSet<UserId>>>,
    images: BTreeMap<(UserId, TimeSlice), Vec<ImageRecord>>,
}

impl TimeVaryingNetwork {
    pub fn empty() -> Self {
        NetworkBuilder::new(0).build().expect("empty network is valid")
    }

    pub fn users(&self) -> &BTreeSet<UserId> {
        &self.users
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn edges_at(&self, t: TimeSlice) -> impl Iterator<Item = (UserId, UserId)> + '_ {
        self.edges.get(t).into_iter().flatten().copied()
    }

    pub fn edge_count(&self, t: TimeSlice) -> usize {
        self.edges.get(t).map_or(0, BTreeSet::len)
    }

    pub fn has_edge(&self, a: UserId, b: UserId, t: TimeSlice) -> bool {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.edges.get(t).is_some_and(|e| e.contains(&key))
    }

    /// Friends of `user` at slice `t`.
    pub fn neighbors_at(&self, user: UserId, t: TimeSlice) -> Result<BTreeSet<UserId>> {
        if !self.users.contains(&user) {
            return Err(Error::UnknownUser(user));
        }
        if t >= self.horizon {
            return Err(Error::SliceOutOfRange {
                slice: t,
                horizon: self.horizon,
            });
        }
        Ok(self.adjacency[t].get(&user).cloned().unwrap_or_default())
    }

    /// Borrowing variant of [`neighbors_at`](Self::neighbors_at) for hot loops;
    /// unknown users or slices yield an empty iterator.
    pub fn friends(&self, user: UserId, t: TimeSlice) -> impl Iterator<Item = UserId> + '_ {
        self.adjacency
            .get(t)
            .and_then(|adj| adj.get(&user))
            .into_iter()
            .flatten()
            .copied()
    }

    pub fn images_at(&self, user: UserId, t: TimeSlice) -> &[ImageRecord] {
        self.images.get(&(user, t)).map_or(&[], Vec::as_slice)
    }

    /// `(user, slice)` groups in key order.
    pub fn image_groups(&self) -> impl Iterator<Item = ((UserId, TimeSlice), &[ImageRecord])> + '_ {
        self.images.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    /// Every image record, ordered by `(owner, slice)` then insertion order.
    pub fn images(&self) -> impl Iterator<Item = &ImageRecord> + '_ {
        self.images.values().flatten()
    }

    pub fn image_count(&self) -> usize {
        self.images.values().map(Vec::len).sum()
    }

    /// True if the user uploaded at least one image at `t`.
    pub fn is_active(&self, user: UserId, t: TimeSlice) -> bool {
        self.images.get(&(user, t)).is_some_and(|v| !v.is_empty())
    }

    pub fn active_slices(&self, user: UserId) -> Vec<TimeSlice> {
        self.images
            .range((user, 0)..=(user, TimeSlice::MAX))
            .filter(|(_, v)| !v.is_empty())
            .map(|((_, t), _)| *t)
            .collect()
    }

    /// Returns a copy whose image records have been rewritten by `f`.
    /// Ids, owners and slices must be left unchanged.
    pub fn map_images(&self, mut f: impl FnMut(&ImageRecord) -> ImageRecord) -> Result<Self> {
        let mut b = self.to_builder();
        b.images.clear();
        for rec in self.images() {
            b.add_image(f(rec));
        }
        b.build()
    }

    pub fn to_builder(&self) -> NetworkBuilder {
        NetworkBuilder {
            horizon: self.horizon,
            users: self.users.iter().copied().collect(),
            edges: self
                .edges
                .iter()
                .enumerate()
                .flat_map(|(t, es)| es.iter().map(move |&(u, v)| (u, v, t)))
                .collect(),
            images: self.images().cloned().collect(),
        }
    }
}

/// Accumulates records, then validates them into a [`TimeVaryingNetwork`].
#[derive(Debug, Clone, Default)]
pub struct NetworkBuilder {
    horizon: usize,
    users: Vec<UserId>,
    edges: Vec<(UserId, UserId, TimeSlice)>,
    images: Vec<ImageRecord>,
}

impl NetworkBuilder {
    pub fn new(horizon: usize) -> Self {
        NetworkBuilder {
            horizon,
            ..Default::default()
        }
    }

    pub fn add_user(&mut self, user: UserId) -> &mut Self {
        self.users.push(user);
        self
    }

    pub fn add_edge(&mut self, u: UserId, v: UserId, t: TimeSlice) -> &mut Self {
        self.edges.push((u, v, t));
        self
    }

    pub fn add_image(&mut self, image: ImageRecord) -> &mut Self {
        self.images.push(image);
        self
    }

    pub fn build(&self) -> Result<TimeVaryingNetwork> {
        let users: BTreeSet<UserId> = self.users.iter().copied().collect();
        let mut edges = vec![BTreeSet::new(); self.horizon];
        let mut adjacency = vec![BTreeMap::<UserId, BTreeSet<UserId>>::new(); self.horizon];
        for &(u, v, t) in &self.edges {
            for end in [u, v] {
                if !users.contains(&end) {
                    return Err(Error::UnknownUser(end));
                }
            }
            if u == v {
                return Err(Error::Invariant(format!("self-edge on user {u} at slice {t}")));
            }
            if t >= self.horizon {
                return Err(Error::SliceOutOfRange {
                    slice: t,
                    horizon: self.horizon,
                });
            }
            edges[t].insert((u.min(v), u.max(v)));
            adjacency[t].entry(u).or_default().insert(v);
            adjacency[t].entry(v).or_default().insert(u);
        }

        let mut images: BTreeMap<(UserId, TimeSlice), Vec<ImageRecord>> = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for rec in &self.images {
            if !users.contains(&rec.owner) {
                return Err(Error::UnknownUser(rec.owner));
            }
            if rec.slice >= self.horizon {
                return Err(Error::SliceOutOfRange {
                    slice: rec.slice,
                    horizon: self.horizon,
                });
            }
            if !rec.features.is_finite() {
                return Err(Error::Invariant(format!("image {} has non-finite features", rec.id)));
            }
            if !seen.insert(rec.id) {
                return Err(Error::Invariant(format!("duplicate image id {}", rec.id)));
            }
            images.entry((rec.owner, rec.slice)).or_default().push(rec.clone());
        }

        Ok(TimeVaryingNetwork {
            users,
            horizon: self.horizon,
            edges,
            adjacency,
            images,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn image(id: u64, owner: u32, t: usize) -> ImageRecord {
        ImageRecord {
            id: ImageId(id),
            owner: UserId(owner),
            slice: t,
            features: FeatureVector::zeros(),
            labels: BTreeMap::new(),
        }
    }

    fn triangle() -> TimeVaryingNetwork {
        let mut b = NetworkBuilder::new(2);
        for u in 0..3 {
            b.add_user(UserId(u));
        }
        b.add_edge(UserId(0), UserId(1), 0)
            .add_edge(UserId(1), UserId(2), 0)
            .add_edge(UserId(2), UserId(0), 0);
        b.build().unwrap()
    }

    #[test]
    fn isolated_user_has_no_neighbors() {
        let mut b = NetworkBuilder::new(1);
        b.add_user(UserId(7));
        let net = b.build().unwrap();
        assert!(net.neighbors_at(UserId(7), 0).unwrap().is_empty());
    }

    #[test]
    fn triangle_neighbors_are_the_other_two() {
        let net = triangle();
        for u in 0..3u32 {
            let nb = net.neighbors_at(UserId(u), 0).unwrap();
            let expected: BTreeSet<_> = (0..3).filter(|&v| v != u).map(UserId).collect();
            assert_eq!(nb, expected);
        }
    }

    #[test]
    fn neighbors_are_time_varying() {
        let net = triangle();
        assert!(net.neighbors_at(UserId(0), 0).unwrap().contains(&UserId(1)));
        assert!(net.neighbors_at(UserId(0), 1).unwrap().is_empty());
    }

    #[test]
    fn neighbors_rejects_unknown_user_and_slice() {
        let net = triangle();
        assert!(matches!(net.neighbors_at(UserId(9), 0), Err(Error::UnknownUser(UserId(9)))));
        assert!(matches!(
            net.neighbors_at(UserId(0), 2),
            Err(Error::SliceOutOfRange { slice: 2, horizon: 2 })
        ));
    }

    #[test]
    fn builder_rejects_invalid_records() {
        let mut b = NetworkBuilder::new(1);
        b.add_user(UserId(0)).add_edge(UserId(0), UserId(4), 0);
        assert!(matches!(b.build(), Err(Error::UnknownUser(UserId(4)))));

        let mut b = NetworkBuilder::new(1);
        b.add_user(UserId(0)).add_edge(UserId(0), UserId(0), 0);
        assert!(matches!(b.build(), Err(Error::Invariant(_))));

        let mut b = NetworkBuilder::new(1);
        b.add_user(UserId(0)).add_image(image(1, 0, 3));
        assert!(matches!(b.build(), Err(Error::SliceOutOfRange { .. })));

        let mut b = NetworkBuilder::new(1);
        b.add_user(UserId(0)).add_image(image(1, 0, 0)).add_image(image(1, 0, 0));
        assert!(matches!(b.build(), Err(Error::Invariant(_))));

        let mut bad = image(2, 0, 0);
        bad.features.0[3] = f64::NAN;
        let mut b = NetworkBuilder::new(1);
        b.add_user(UserId(0)).add_image(bad);
        assert!(matches!(b.build(), Err(Error::Invariant(_))));
    }

    #[test]
    fn active_slices_and_images() {
        let mut b = NetworkBuilder::new(3);
        b.add_user(UserId(0)).add_user(UserId(1));
        b.add_image(image(1, 0, 0)).add_image(image(2, 0, 2)).add_image(image(3, 1, 1));
        let net = b.build().unwrap();
        assert_eq!(net.active_slices(UserId(0)), vec![0, 2]);
        assert_eq!(net.active_slices(UserId(1)), vec![1]);
        assert_eq!(net.images_at(UserId(0), 2).len(), 1);
        assert!(!net.is_active(UserId(0), 1));
        assert_eq!(net.image_count(), 3);
    }

    #[test]
    fn slice_clock_maps_weeks() {
        let clock = SliceClock::weekly(1_000);
        assert_eq!(clock.slice_of(999), None);
        assert_eq!(clock.slice_of(1_000), Some(0));
        assert_eq!(clock.slice_of(1_000 + DEFAULT_SLICE_WIDTH_SECS), Some(1));
        assert_eq!(clock.slice_of(1_000 + DEFAULT_SLICE_WIDTH_SECS - 1), Some(0));
    }

    #[test]
    fn category_names_round_trip() {
        for c in EmotionCategory::ALL {
            assert_eq!(c.name().parse::<EmotionCategory>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(serde_json::from_str::<EmotionCategory>(&json).unwrap(), c);
        }
        assert_eq!(EmotionCategory::ALL.len(), 6);
    }

    #[test]
    fn binary_label_only_accepts_unit_values() {
        assert_eq!(BinaryLabel::try_from(1).unwrap(), BinaryLabel::Positive);
        assert_eq!(BinaryLabel::try_from(-1).unwrap(), BinaryLabel::Negative);
        assert!(BinaryLabel::try_from(0).is_err());
        assert!(serde_json::from_str::<BinaryLabel>("2").is_err());
        assert_eq!(serde_json::to_string(&BinaryLabel::Negative).unwrap(), "-1");
    }
}
