//! Random small factor graphs with mixed factor kinds, for oracle comparisons.

use rand::Rng;

use super::{Domain, FactorGraph, FactorKind, GraphBuilder, ParameterSet, UserParams, VariableId};
use crate::features::FEATURE_DIM;
use crate::network::{ImageId, UserId};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct RandomGraphConfig {
    pub min_variables: usize,
    pub max_variables: usize,
    /// Factors added after the spanning tree, each closing a cycle when possible.
    pub extra_factors: usize,
    /// Probability that a variable is clamped.
    pub clamp_probability: f64,
    /// Probability of attaching a unary visual factor to each emotion variable.
    pub visual_probability: f64,
    pub users: usize,
    pub max_gap: usize,
}

impl Default for RandomGraphConfig {
    fn default() -> Self {
        RandomGraphConfig {
            min_variables: 3,
            max_variables: 8,
            extra_factors: 0,
            clamp_probability: 0.0,
            visual_probability: 0.3,
            users: 3,
            max_gap: 3,
        }
    }
}

struct Draft {
    domains: Vec<Domain>,
    factors: Vec<(FactorKind, Vec<usize>)>,
}

impl Draft {
    fn add(&mut self, d: Domain) -> usize {
        self.domains.push(d);
        self.domains.len() - 1
    }
}

fn pick_kind<R: Rng>(rng: &mut R) -> FactorKind {
    [FactorKind::ImageUser, FactorKind::Temporal, FactorKind::Influence, FactorKind::StableInfluence][rng.random_range(0..4)]
}

/// Draws a graph whose factor-variable incidence is a tree when
/// `extra_factors` is 0, together with parameters drawn uniformly from
/// `[0, 1]` (α from `[-1, 1]`).
pub fn random_graph<S: Scalar, R: Rng>(rng: &mut R, config: &RandomGraphConfig) -> (FactorGraph<S>, ParameterSet<S>) {
    let target = rng.random_range(config.min_variables..=config.max_variables.max(config.min_variables));
    let mut draft = Draft { domains: Vec::new(), factors: Vec::new() };
    let first = if rng.random_bool(0.7) { Domain::Label } else { Domain::Influence };
    draft.add(first);
    let mut stalls = 0;
    while draft.domains.len() < target && stalls < 1000 {
        let kind = pick_kind(rng);
        let domains = kind.domains();
        if draft.domains.len() + domains.len() - 1 > target {
            stalls += 1;
            continue;
        }
        let slot = rng.random_range(0..domains.len());
        let candidates: Vec<usize> = (0..draft.domains.len()).filter(|&v| draft.domains[v] == domains[slot]).collect();
        if candidates.is_empty() {
            stalls += 1;
            continue;
        }
        let anchor = candidates[rng.random_range(0..candidates.len())];
        let vars = domains
            .iter()
            .enumerate()
            .map(|(k, &d)| if k == slot { anchor } else { draft.add(d) })
            .collect();
        draft.factors.push((kind, vars));
    }
    let mut extra = 0;
    let mut tries = 0;
    while extra < config.extra_factors && tries < 1000 {
        tries += 1;
        let kind = pick_kind(rng);
        let mut vars = Vec::new();
        for &d in kind.domains() {
            let candidates: Vec<usize> = (0..draft.domains.len())
                .filter(|&v| draft.domains[v] == d && !vars.contains(&v))
                .collect();
            if candidates.is_empty() {
                break;
            }
            vars.push(candidates[rng.random_range(0..candidates.len())]);
        }
        if vars.len() == kind.arity() {
            draft.factors.push((kind, vars));
            extra += 1;
        }
    }

    let users: Vec<UserId> = (0..config.users.max(1) as u32).map(UserId).collect();
    let mut b = GraphBuilder::<S>::new(users.clone());
    let (mut labels, mut influences) = (0u64, 0usize);
    for &d in &draft.domains {
        let clamp = rng.random_bool(config.clamp_probability).then(|| match d {
            Domain::Label => [-1, 1][rng.random_range(0..2)],
            Domain::Influence => rng.random_range(0..2),
        });
        let id = match d {
            Domain::Label => {
                labels += 1;
                VariableId::Image(ImageId(labels))
            }
            Domain::Influence => {
                influences += 1;
                VariableId::Influence { src: UserId(0), dst: UserId(1), slice: influences }
            }
        };
        b.add_variable(id, clamp).expect("fresh ids");
    }
    let owner = |rng: &mut R| rng.random_range(0..users.len());
    for (kind, vars) in &draft.factors {
        let o = owner(rng);
        let gap = rng.random_range(1..=config.max_gap.max(1));
        b.add_factor(*kind, vars, o, gap, None).expect("domains match");
    }
    for v in 0..draft.domains.len() {
        if draft.domains[v] == Domain::Label && rng.random_bool(config.visual_probability) {
            let x: [S; FEATURE_DIM] = std::array::from_fn(|_| S::of(rng.random_range(-1.0..1.0)));
            let row = b.add_feature(x);
            let o = owner(rng);
            b.add_factor(FactorKind::Visual, &[v], o, 0, Some(row)).expect("unary visual");
        }
    }
    let alpha: [S; FEATURE_DIM] = std::array::from_fn(|_| S::of(rng.random_range(-1.0..1.0)));
    let mut params = ParameterSet::uniform(users.iter().copied(), alpha, UserParams::zero());
    for i in 0..users.len() {
        let mut draw = || S::of(rng.random_range(0.0..1.0));
        let p = UserParams::new(draw(), draw(), draw(), draw(), draw(), draw());
        params.set_user(i, p);
    }
    (b.build(), params)
}
