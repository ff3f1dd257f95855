//! Synthetic time-varying networks sampled from the model with planted
//! parameters, with the complete hidden assignment kept as ground truth.

mod gibbs;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_DIM};
use crate::graph::{build_graph, BuildOptions, FactorGraph, FactorKind, ParameterSet, UserParams, VariableId};
use crate::network::{BinaryLabel, EmotionCategory, ImageId, ImageRecord, NetworkBuilder, TimeSlice, TimeVaryingNetwork, UserId};

pub use gibbs::GibbsSampler;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub users: usize,
    pub slices: usize,
    pub mean_degree: f64,
    /// Poisson mean of uploads per user and slice.
    pub images_per_slice: f64,
    pub category: EmotionCategory,
    pub window: usize,
    pub beta: f64,
    pub xi: f64,
    pub delta: f64,
    pub lambda: f64,
    pub eta: f64,
    pub tau: f64,
    /// Fraction of directed edges whose influence indicator leans towards 1.
    pub influence_density: f64,
    pub leaning: LeaningScheme,
    /// Unary log-potential of `mu = 1` on leaning edges.
    pub influence_bias: f64,
    /// Unary log-potential of `mu = 1` on the remaining edges.
    pub background_bias: f64,
    /// Distance between the two class means, in units of `feature_sigma`.
    pub feature_separation: f64,
    pub feature_sigma: f64,
    pub observation_rate: f64,
    pub burn_in: usize,
    /// Resample the friendship graph independently in every slice.
    pub dynamic_edges: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            users: 50,
            slices: 8,
            mean_degree: 4.0,
            images_per_slice: 3.0,
            category: EmotionCategory::Happiness,
            window: 1,
            beta: 1.5,
            xi: 0.5,
            delta: 1.0,
            lambda: 1.5,
            eta: 1.0,
            tau: 1.0,
            influence_density: 0.3,
            leaning: LeaningScheme::Friendship,
            influence_bias: 2.0,
            background_bias: -6.0,
            feature_separation: 1.5,
            feature_sigma: 1.0,
            observation_rate: 0.5,
            burn_in: 1000,
            dynamic_edges: false,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let rate = |x: f64| (0.0..=1.0).contains(&x);
        if self.users == 0 || self.slices == 0 || self.window == 0 {
            return Err(Error::Invariant("users, slices and window must be at least 1".into()));
        }
        if !rate(self.influence_density) || !rate(self.observation_rate) {
            return Err(Error::Invariant("rates must lie in [0, 1]".into()));
        }
        let non_negative = [
            self.mean_degree,
            self.images_per_slice,
            self.beta,
            self.xi,
            self.delta,
            self.lambda,
            self.eta,
            self.tau,
            self.feature_separation,
            self.feature_sigma,
        ];
        if non_negative.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::Invariant("means, weights and scales must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn planted(&self) -> UserParams<f64> {
        UserParams::new(self.beta, self.xi, self.delta, self.lambda, self.eta, self.tau)
    }
}

/// Everything the generator drew, including what the network hides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub config: SynthConfig,
    /// Directed edges whose influence indicator was biased towards 1.
    pub leaning: BTreeSet<(UserId, UserId)>,
    /// Sampled value of every variable: `±1` for emotions, `0/1` for influence.
    pub assignment: BTreeMap<VariableId, i8>,
}

impl SynthTruth {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("truth serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn image_label(&self, id: ImageId) -> Option<BinaryLabel> {
        self.assignment
            .get(&VariableId::Image(id))
            .map(|v| BinaryLabel::from_positive(*v > 0))
    }
}

/// How directed edges are chosen to lean towards influence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeaningScheme {
    /// Users are drawn in random order and all their outgoing edges lean,
    /// until the leaning share of directed edges reaches the density.
    Source,
    /// Friendships are drawn and lean in both directions.
    Friendship,
    /// Directed edges are drawn independently.
    Edge,
}

fn plant_leaning<R: Rng>(rng: &mut R, config: &SynthConfig, undirected: &BTreeSet<(UserId, UserId)>) -> BTreeSet<(UserId, UserId)> {
    let directed: Vec<(UserId, UserId)> = undirected.iter().flat_map(|&(u, v)| [(u, v), (v, u)]).collect();
    let target = (config.influence_density * directed.len() as f64).round() as usize;
    let mut leaning = BTreeSet::new();
    match config.leaning {
        LeaningScheme::Source => {
            let mut users: Vec<UserId> = (0..config.users as u32).map(UserId).collect();
            users.shuffle(rng);
            for u in users {
                if leaning.len() >= target {
                    break;
                }
                leaning.extend(directed.iter().filter(|e| e.0 == u).copied());
            }
        }
        LeaningScheme::Friendship => {
            let mut pairs: Vec<(UserId, UserId)> = undirected.iter().copied().collect();
            pairs.shuffle(rng);
            for (u, v) in pairs.into_iter().take(target.div_ceil(2)) {
                leaning.insert((u, v));
                leaning.insert((v, u));
            }
        }
        LeaningScheme::Edge => {
            let mut edges = directed;
            edges.shuffle(rng);
            leaning.extend(edges.into_iter().take(target));
        }
    }
    leaning
}

/// Direction of the class-mean offset: all feature dimensions equally.
fn mean_direction() -> [f64; FEATURE_DIM] {
    [1.0 / (FEATURE_DIM as f64).sqrt(); FEATURE_DIM]
}

fn erdos_renyi<R: Rng>(rng: &mut R, users: usize, mean_degree: f64) -> Vec<(UserId, UserId)> {
    if users < 2 {
        return Vec::new();
    }
    let p = (mean_degree / (users - 1) as f64).clamp(0.0, 1.0);
    let mut edges = Vec::new();
    for a in 0..users as u32 {
        for b in a + 1..users as u32 {
            if rng.random::<f64>() < p {
                edges.push((UserId(a), UserId(b)));
            }
        }
    }
    edges
}

/// Samples a network and its hidden truth.
///
/// Topology and upload counts are drawn first. Emotions and influence
/// indicators are then drawn jointly by Gibbs sampling from the model with
/// the planted weights (visual factors omitted), with an extra unary term on
/// each influence indicator. Features are finally drawn from the Gaussian of
/// each image's sampled label, and labels are revealed at the observation rate.
pub fn generate(config: &SynthConfig) -> Result<(TimeVaryingNetwork, SynthTruth)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let users: Vec<UserId> = (0..config.users as u32).map(UserId).collect();
    let mut b = NetworkBuilder::new(config.slices);
    for &u in &users {
        b.add_user(u);
    }
    let static_edges = erdos_renyi(&mut rng, config.users, config.mean_degree);
    let mut undirected = BTreeSet::new();
    for t in 0..config.slices {
        let edges = if config.dynamic_edges && t > 0 {
            erdos_renyi(&mut rng, config.users, config.mean_degree)
        } else {
            static_edges.clone()
        };
        for (u, v) in edges {
            b.add_edge(u, v, t);
            undirected.insert((u, v));
        }
    }
    let leaning = plant_leaning(&mut rng, config, &undirected);

    let mut next_id = 1u64;
    let uploads = Poisson::new(config.images_per_slice.max(1e-12)).map_err(|e| Error::Invariant(e.to_string()))?;
    for t in 0..config.slices {
        for &u in &users {
            let n = if config.images_per_slice > 0.0 { uploads.sample(&mut rng) as u64 } else { 0 };
            for _ in 0..n {
                b.add_image(ImageRecord {
                    id: ImageId(next_id),
                    owner: u,
                    slice: t,
                    features: FeatureVector::zeros(),
                    labels: BTreeMap::new(),
                });
                next_id += 1;
            }
        }
    }
    let skeleton = b.build()?;

    let opts = BuildOptions {
        window: config.window,
        drop: [FactorKind::Visual].into_iter().collect(),
        hidden: BTreeSet::new(),
        clamp_labels: false,
    };
    let graph: FactorGraph<f64> = build_graph(&skeleton, config.category, &opts);
    let params = ParameterSet::uniform(users.iter().copied(), [0.0; FEATURE_DIM], config.planted());
    let bias = graph
        .variables()
        .iter()
        .map(|v| match v.id {
            VariableId::Influence { src, dst, .. } if leaning.contains(&(src, dst)) => config.influence_bias,
            VariableId::Influence { .. } => config.background_bias,
            _ => 0.0,
        })
        .collect();
    let mut sampler = GibbsSampler::new(&graph, &params, bias);
    sampler.randomize(&mut rng);
    for _ in 0..config.burn_in {
        sampler.sweep(&mut rng);
    }
    let truth_assignment = sampler.assignment().to_values(&graph);

    let direction = mean_direction();
    let offset = 0.5 * config.feature_separation * config.feature_sigma;
    let net = skeleton.map_images(|img| {
        let y = f64::from(truth_assignment[&VariableId::Image(img.id)]);
        let mut x = [0.0; FEATURE_DIM];
        for (xj, dj) in x.iter_mut().zip(direction) {
            let noise: f64 = rng.sample(StandardNormal);
            *xj = y * offset * dj + config.feature_sigma * noise;
        }
        let mut labels = BTreeMap::new();
        if rng.random::<f64>() < config.observation_rate {
            labels.insert(config.category, BinaryLabel::from_positive(y > 0.0));
        }
        ImageRecord {
            features: FeatureVector(x),
            labels,
            ..img.clone()
        }
    })?;
    let truth = SynthTruth {
        config: config.clone(),
        leaning,
        assignment: truth_assignment,
    };
    Ok((net, truth))
}

/// Directed `(src, dst, slice)` triples whose sampled influence indicator is 1.
pub fn influence_ground_truth(truth: &SynthTruth) -> BTreeSet<(UserId, UserId, TimeSlice)> {
    truth
        .assignment
        .iter()
        .filter_map(|(id, v)| match id {
            VariableId::Influence { src, dst, slice } if *v == 1 => Some((*src, *dst, *slice)),
            _ => None,
        })
        .collect()
}

/// Area under the ROC curve of `scores` against boolean labels, by the
/// Mann-Whitney statistic with mid-ranks for ties.
pub fn auc(scored: &[(f64, bool)]) -> Result<f64> {
    let positives = scored.iter().filter(|(_, p)| *p).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Undefined("AUC needs both positive and negative cases"));
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].0.total_cmp(&scored[b].0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scored[order[j + 1]].0 == scored[order[i]].0 {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| scored[k].1).count() as f64;
        i = j + 1;
    }
    let p = positives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

/// AUC of predicted influence weights against the planted indicators. Keys
/// of `predicted` define the scored population.
pub fn score_influence_recovery(
    predicted: &BTreeMap<(UserId, UserId, TimeSlice), f64>,
    truth: &BTreeSet<(UserId, UserId, TimeSlice)>,
) -> Result<f64> {
    let scored: Vec<(f64, bool)> = predicted.iter().map(|(k, w)| (*w, truth.contains(k))).collect();
    auc(&scored)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            users: 12,
            slices: 3,
            burn_in: 50,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let (a, ta) = generate(&small()).unwrap();
        let (b, tb) = generate(&small()).unwrap();
        assert_eq!(crate::network::write_network(&a), crate::network::write_network(&b));
        assert_eq!(ta, tb);
        let (c, _) = generate(&SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(crate::network::write_network(&a), crate::network::write_network(&c));
    }

    #[test]
    fn single_user_single_image() {
        let cfg = SynthConfig {
            users: 1,
            slices: 1,
            images_per_slice: 1e-9,
            burn_in: 10,
            ..Default::default()
        };
        let (net, truth) = generate(&cfg).unwrap();
        assert!(net.image_count() <= 1);
        assert_eq!(truth.assignment.len(), 2 * net.image_count());
    }

    #[test]
    fn density_extremes() {
        let none = SynthConfig { influence_density: 0.0, background_bias: -20.0, ..small() };
        let (_, t) = generate(&none).unwrap();
        assert!(t.leaning.is_empty());
        assert!(influence_ground_truth(&t).is_empty());
        let all = SynthConfig { influence_density: 1.0, influence_bias: 20.0, ..small() };
        let (_, t) = generate(&all).unwrap();
        let mu_count = t.assignment.keys().filter(|k| matches!(k, VariableId::Influence { .. })).count();
        assert_eq!(influence_ground_truth(&t).len(), mu_count);
        let ones = t.assignment.iter().filter(|(k, v)| matches!(k, VariableId::Influence { .. }) && **v == 1).count();
        assert_eq!(ones, mu_count);
    }

    #[test]
    fn auc_basics() {
        let exact: Vec<(f64, bool)> = (0..10).map(|i| (f64::from(i % 2), i % 2 == 1)).collect();
        assert_eq!(auc(&exact).unwrap(), 1.0);
        let constant: Vec<(f64, bool)> = (0..10).map(|i| (0.3, i % 3 == 0)).collect();
        assert_eq!(auc(&constant).unwrap(), 0.5);
        assert!(auc(&[(0.1, true), (0.2, true)]).is_err());
        assert_eq!(auc(&[(0.1, false), (0.9, true), (0.5, false)]).unwrap(), 1.0);
        assert_eq!(auc(&[(0.9, false), (0.1, true)]).unwrap(), 0.0);
    }

    #[test]
    fn random_scores_have_chance_auc() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scored: Vec<(f64, bool)> = (0..20_000).map(|_| (rng.random::<f64>(), rng.random_bool(0.3))).collect();
        assert!((auc(&scored).unwrap() - 0.5).abs() < 0.05);
    }

    #[test]
    fn truth_json_round_trip() {
        let (_, t) = generate(&small()).unwrap();
        let back = SynthTruth::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_json(), t.to_json());
    }
}
