use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::network::{derive_user_labels, EmotionCategory, TimeSlice, TimeVaryingNetwork, UserId};

type LabelMap = BTreeMap<(UserId, TimeSlice), bool>;

fn label_map(net: &TimeVaryingNetwork, category: EmotionCategory) -> LabelMap {
    derive_user_labels(net, category)
        .into_iter()
        .map(|l| ((l.user, l.slice), l.label.is_positive()))
        .collect()
}

/// How the target slices of different repetitions are kept apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SliceSelection {
    /// Every repetition uses a different `t`.
    #[default]
    DistinctT,
    /// The windows `[t - dt, t]` of different repetitions do not overlap.
    DisjointWindows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub group_size: usize,
    pub repetitions: usize,
    pub deltas: Vec<usize>,
    pub selection: SliceSelection,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            group_size: 50,
            repetitions: 10,
            deltas: vec![1, 2, 3, 4],
            selection: SliceSelection::DistinctT,
            seed: 0,
        }
    }
}

/// Mean ratio over the repetitions in which the group was non-empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRatio {
    pub ratio: Option<f64>,
    /// Repetitions contributing to the mean.
    pub filled: usize,
    /// Users summed over those repetitions.
    pub users: usize,
}

impl GroupRatio {
    fn from_samples(samples: &[(usize, usize)]) -> Self {
        let filled: Vec<_> = samples.iter().filter(|(n, _)| *n > 0).collect();
        let ratio = (!filled.is_empty())
            .then(|| filled.iter().map(|(n, h)| *h as f64 / *n as f64).sum::<f64>() / filled.len() as f64);
        GroupRatio {
            ratio,
            filled: filled.len(),
            users: filled.iter().map(|(n, _)| n).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingRow {
    pub delta: usize,
    /// Users with no friend holding the emotion at `t - dt`.
    pub isolated: GroupRatio,
    /// Users with one or two such friends.
    pub few_friends: GroupRatio,
    /// Users with three or more.
    pub many_friends: GroupRatio,
    /// Slices used, one per repetition.
    pub slices: Vec<TimeSlice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingTestReport {
    pub category: EmotionCategory,
    pub group_size: usize,
    pub repetitions: usize,
    pub rows: Vec<SamplingRow>,
}

impl SamplingTestReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,group,ratio,repetitions,users\n");
        for row in &self.rows {
            for (name, g) in [("isolated", &row.isolated), ("friends_1_2", &row.few_friends), ("friends_3_plus", &row.many_friends)] {
                let ratio = g.ratio.map(|r| format!("{r:.6}")).unwrap_or_default();
                out.push_str(&format!("{},{name},{ratio},{},{}\n", row.delta, g.filled, g.users));
            }
        }
        out
    }
}

fn pick_slices(rng: &mut ChaCha8Rng, horizon: usize, delta: usize, reps: usize, selection: SliceSelection) -> Vec<TimeSlice> {
    let mut candidates: Vec<TimeSlice> = (delta..horizon).collect();
    if candidates.is_empty() || reps == 0 {
        return Vec::new();
    }
    candidates.shuffle(rng);
    let pool = match selection {
        SliceSelection::DistinctT => candidates,
        SliceSelection::DisjointWindows => {
            let mut chosen: Vec<TimeSlice> = Vec::new();
            for t in candidates {
                if chosen.iter().all(|&c| t.abs_diff(c) > delta) {
                    chosen.push(t);
                }
            }
            chosen
        }
    };
    if pool.len() < reps {
        log::warn!("only {} admissible slices for dt={delta}; repeating slices across {reps} repetitions", pool.len());
    }
    pool.iter().copied().cycle().take(reps).collect()
}

fn sample<T: Copy>(rng: &mut ChaCha8Rng, pool: &[T], n: usize) -> Vec<T> {
    pool.choose_multiple(rng, n.min(pool.len())).copied().collect()
}

/// Compares the emotion ratio at `t` of users whose friends showed the
/// emotion at `t - dt` against users whose friends did not.
pub fn sampling_test(net: &TimeVaryingNetwork, category: EmotionCategory, config: &SamplingConfig) -> SamplingTestReport {
    let labels = label_map(net, category);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rows = Vec::new();
    for &delta in &config.deltas {
        let slices = pick_slices(&mut rng, net.horizon(), delta, config.repetitions, config.selection);
        let (mut iso, mut few, mut many) = (Vec::new(), Vec::new(), Vec::new());
        for &t in &slices {
            let mut influenced: Vec<(UserId, usize)> = Vec::new();
            let mut isolated: Vec<UserId> = Vec::new();
            for &u in net.users() {
                if !labels.contains_key(&(u, t)) {
                    continue;
                }
                let k = net
                    .friends(u, t - delta)
                    .filter(|f| labels.get(&(*f, t - delta)) == Some(&true))
                    .count();
                if k > 0 {
                    influenced.push((u, k));
                } else {
                    isolated.push(u);
                }
            }
            if influenced.len() < config.group_size || isolated.len() < config.group_size {
                log::warn!(
                    "slice {t}, dt={delta}: pools of {} and {} users are below the group size {}",
                    influenced.len(),
                    isolated.len(),
                    config.group_size
                );
            }
            let happy = |u: &UserId| labels[&(*u, t)];
            let g_i = sample(&mut rng, &isolated, config.group_size);
            iso.push((g_i.len(), g_i.iter().filter(|u| happy(u)).count()));
            let g_r = sample(&mut rng, &influenced, config.group_size);
            let (lo, hi): (Vec<_>, Vec<_>) = g_r.iter().partition(|(_, k)| *k <= 2);
            few.push((lo.len(), lo.iter().filter(|(u, _)| happy(u)).count()));
            many.push((hi.len(), hi.iter().filter(|(u, _)| happy(u)).count()));
        }
        rows.push(SamplingRow {
            delta,
            isolated: GroupRatio::from_samples(&iso),
            few_friends: GroupRatio::from_samples(&few),
            many_friends: GroupRatio::from_samples(&many),
            slices,
        });
    }
    SamplingTestReport {
        category,
        group_size: config.group_size,
        repetitions: config.repetitions,
        rows,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub delta: usize,
    pub rate: Option<f64>,
    /// Users contributing to the mean.
    pub users: usize,
    /// Sampled users without a valid pair at this delta.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub category: EmotionCategory,
    pub sampled: usize,
    pub rows: Vec<RateRow>,
}

impl RateReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,rate,users,excluded\n");
        for r in &self.rows {
            let rate = r.rate.map(|v| format!("{v:.6}")).unwrap_or_default();
            out.push_str(&format!("{},{rate},{},{}\n", r.delta, r.users, r.excluded));
        }
        out
    }

    pub fn mean_rate(&self) -> Option<f64> {
        let rates: Vec<f64> = self.rows.iter().filter_map(|r| r.rate).collect();
        (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
    }
}

fn rate_row(delta: usize, per_user: &[Option<f64>]) -> RateRow {
    let valid: Vec<f64> = per_user.iter().flatten().copied().collect();
    RateRow {
        delta,
        rate: (!valid.is_empty()).then(|| valid.iter().sum::<f64>() / valid.len() as f64),
        users: valid.len(),
        excluded: per_user.len() - valid.len(),
    }
}

/// Fraction of slice pairs `(t, t + delta)` at which a user keeps the same
/// emotion, averaged over sampled users.
pub fn temporal_correlation(
    net: &TimeVaryingNetwork,
    category: EmotionCategory,
    user_sample_n: usize,
    max_delta: usize,
    seed: u64,
) -> RateReport {
    let labels = label_map(net, category);
    let mut per_user: BTreeMap<UserId, Vec<(TimeSlice, bool)>> = BTreeMap::new();
    for (&(u, t), &l) in &labels {
        per_user.entry(u).or_default().push((t, l));
    }
    let eligible: Vec<UserId> = per_user.iter().filter(|(_, v)| v.len() >= 2).map(|(u, _)| *u).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users = sample(&mut rng, &eligible, user_sample_n);
    let rows = (1..=max_delta)
        .map(|delta| {
            let rates: Vec<Option<f64>> = users
                .iter()
                .map(|u| {
                    let (mut pairs, mut same) = (0usize, 0usize);
                    for &(t, l) in &per_user[u] {
                        if let Some(&l2) = labels.get(&(*u, t + delta)) {
                            pairs += 1;
                            same += usize::from(l == l2);
                        }
                    }
                    (pairs > 0).then(|| same as f64 / pairs as f64)
                })
                .collect();
            rate_row(delta, &rates)
        })
        .collect();
    RateReport {
        category,
        sampled: users.len(),
        rows,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Neighborhood {
    Friends,
    /// Non-friends drawn at random, as many as the user has friends.
    Random,
}

/// Share of a user's neighborhood that holds, at `t + delta`, the emotion the
/// user held at `t`. Neighbors without an emotion at `t + delta` count as
/// different.
pub fn social_correlation(
    net: &TimeVaryingNetwork,
    category: EmotionCategory,
    user_sample_n: usize,
    deltas: &[usize],
    mode: Neighborhood,
    seed: u64,
) -> RateReport {
    let labels = label_map(net, category);
    let active: BTreeSet<UserId> = labels.keys().map(|(u, _)| *u).collect();
    let eligible: Vec<UserId> = active.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users = sample(&mut rng, &eligible, user_sample_n);
    let all: Vec<UserId> = net.users().iter().copied().collect();

    // Random neighborhoods are drawn once per user and slice so every delta
    // sees the same set.
    let mut groups: BTreeMap<(UserId, TimeSlice), Vec<UserId>> = BTreeMap::new();
    for &u in &users {
        for t in 0..net.horizon() {
            if !labels.contains_key(&(u, t)) {
                continue;
            }
            let friends: Vec<UserId> = net.friends(u, t).collect();
            let group = match mode {
                Neighborhood::Friends => friends,
                Neighborhood::Random => {
                    let others: Vec<UserId> =
                        all.iter().copied().filter(|v| *v != u && !friends.contains(v)).collect();
                    sample(&mut rng, &others, friends.len())
                }
            };
            if !group.is_empty() {
                groups.insert((u, t), group);
            }
        }
    }
    if mode == Neighborhood::Friends {
        let skipped = users.iter().filter(|u| !groups.keys().any(|(v, _)| v == *u)).count();
        if skipped > 0 {
            log::info!("{skipped} sampled users have no friends at their active slices");
        }
    }

    let rows = deltas
        .iter()
        .map(|&delta| {
            let rates: Vec<Option<f64>> = users
                .iter()
                .map(|&u| {
                    let shares: Vec<f64> = groups
                        .range((u, 0)..=(u, TimeSlice::MAX))
                        .filter(|((_, t), _)| t + delta < net.horizon())
                        .map(|(&(_, t), group)| {
                            let mine = labels[&(u, t)];
                            let same = group.iter().filter(|v| labels.get(&(**v, t + delta)) == Some(&mine)).count();
                            same as f64 / group.len() as f64
                        })
                        .collect();
                    (!shares.is_empty()).then(|| shares.iter().sum::<f64>() / shares.len() as f64)
                })
                .collect();
            rate_row(delta, &rates)
        })
        .collect();
    RateReport {
        category,
        sampled: users.len(),
        rows,
    }
}
