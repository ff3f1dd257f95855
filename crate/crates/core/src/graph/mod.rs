//! Dynamic factor graph over image emotions, user emotions and directed
//! influence indicators.
//!
//! Variables are binary. Each has a state index in `{0, 1}`: for emotion
//! variables state 0 is `-1` and state 1 is `+1`; for influence variables the
//! state is the indicator itself. Factor tables are indexed by the bit pattern
//! of their variables' states, position 0 being the least significant bit.

mod build;
mod export;
mod params;
mod potentials;
mod random;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::features::FEATURE_DIM;
use crate::network::{BinaryLabel, ImageId, TimeSlice, UserId};
use crate::scalar::Scalar;

pub use build::{build_graph, BuildOptions};
pub use export::{write_adjacency, GraphStats};
pub use params::{ParameterSet, ParamsDocument, UserParams};
pub use potentials::{eval_f1, eval_f2, eval_f3, eval_f4, eval_f5};
pub use random::{random_graph, RandomGraphConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VariableId {
    Image(ImageId),
    User(UserId, TimeSlice),
    Influence { src: UserId, dst: UserId, slice: TimeSlice },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Emotion indicator, values `-1` / `+1`.
    Label,
    /// Influence indicator, values `0` / `1`.
    Influence,
}

impl Domain {
    pub fn value(self, state: u8) -> i8 {
        match (self, state) {
            (Domain::Label, 0) => -1,
            (Domain::Label, _) => 1,
            (Domain::Influence, s) => s as i8,
        }
    }

    pub fn state(self, value: i8) -> Option<u8> {
        match (self, value) {
            (Domain::Label, -1) | (Domain::Influence, 0) => Some(0),
            (Domain::Label, 1) | (Domain::Influence, 1) => Some(1),
            _ => None,
        }
    }
}

impl VariableId {
    pub fn domain(&self) -> Domain {
        match self {
            VariableId::Influence { .. } => Domain::Influence,
            _ => Domain::Label,
        }
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VariableId::Image(id) => write!(f, "img:{id}"),
            VariableId::User(u, t) => write!(f, "user:{u}@{t}"),
            VariableId::Influence { src, dst, slice } => write!(f, "mu:{src}>{dst}@{slice}"),
        }
    }
}

impl FromStr for VariableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invariant(format!("malformed variable id {s:?}"));
        let num = |x: &str| x.parse::<u64>().map_err(|_| bad());
        if let Some(rest) = s.strip_prefix("img:") {
            return Ok(VariableId::Image(ImageId(num(rest)?)));
        }
        if let Some(rest) = s.strip_prefix("user:") {
            let (u, t) = rest.split_once('@').ok_or_else(bad)?;
            return Ok(VariableId::User(UserId(num(u)? as u32), num(t)? as usize));
        }
        if let Some(rest) = s.strip_prefix("mu:") {
            let (pair, t) = rest.split_once('@').ok_or_else(bad)?;
            let (a, b) = pair.split_once('>').ok_or_else(bad)?;
            return Ok(VariableId::Influence {
                src: UserId(num(a)? as u32),
                dst: UserId(num(b)? as u32),
                slice: num(t)? as usize,
            });
        }
        Err(bad())
    }
}

impl Serialize for VariableId {
    fn serialize<Se: Serializer>(&self, s: Se) -> std::result::Result<Se::Ok, Se::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VariableId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub id: VariableId,
    /// Fixed state for observed variables.
    pub clamp: Option<u8>,
}

impl Variable {
    pub fn domain(&self) -> Domain {
        self.id.domain()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FactorKind {
    /// Image emotion reflects its owner's emotion (f1).
    ImageUser,
    /// Visual features predict the image emotion (f2).
    Visual,
    /// A user's emotion persists over time (f3).
    Temporal,
    /// One user's emotion influences a friend's (f4).
    Influence,
    /// Influence persists over time (f5).
    StableInfluence,
}

impl FactorKind {
    pub const ALL: [FactorKind; 5] = [
        FactorKind::ImageUser,
        FactorKind::Visual,
        FactorKind::Temporal,
        FactorKind::Influence,
        FactorKind::StableInfluence,
    ];

    pub fn arity(self) -> usize {
        match self {
            FactorKind::Visual => 1,
            FactorKind::ImageUser | FactorKind::Temporal | FactorKind::StableInfluence => 2,
            FactorKind::Influence => 3,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            FactorKind::ImageUser => "f1",
            FactorKind::Visual => "f2",
            FactorKind::Temporal => "f3",
            FactorKind::Influence => "f4",
            FactorKind::StableInfluence => "f5",
        }
    }

    pub fn domains(self) -> &'static [Domain] {
        use Domain::{Influence as I, Label as L};
        match self {
            FactorKind::ImageUser | FactorKind::Temporal => &[L, L],
            FactorKind::Visual => &[L],
            FactorKind::Influence => &[L, L, I],
            FactorKind::StableInfluence => &[I, I],
        }
    }
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for FactorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        FactorKind::ALL
            .into_iter()
            .find(|k| k.short_name() == lower)
            .ok_or_else(|| Error::Invariant(format!("unknown factor kind {s:?}")))
    }
}

/// A factor node. Variable order per kind:
///
/// * f1: `[image, user]`
/// * f2: `[image]`
/// * f3: `[user at t', user at t]` with `t' < t`
/// * f4: `[y_i, y_j, mu_ij]`
/// * f5: `[mu at t', mu at t]` with `t' < t`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub kind: FactorKind,
    pub vars: Vec<usize>,
    /// Index of the user whose parameters weight this factor.
    pub owner: usize,
    /// `|t - t'|` for temporal kinds, 0 otherwise.
    pub gap: usize,
    /// Row of the feature table, visual factors only.
    pub feature: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct FactorGraph<S> {
    variables: Vec<Variable>,
    factors: Vec<Factor>,
    var_factors: Vec<Vec<(usize, usize)>>,
    features: Vec<[S; FEATURE_DIM]>,
    users: Vec<UserId>,
    index: HashMap<VariableId, usize>,
}

impl<S: Scalar> FactorGraph<S> {
    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, v: usize) -> &Variable {
        &self.variables[v]
    }

    pub fn variable_count(&self) -> usize {
        self.variables.len()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, f: usize) -> &Factor {
        &self.factors[f]
    }

    pub fn factor_count(&self) -> usize {
        self.factors.len()
    }

    /// `(factor, position)` pairs attached to variable `v`.
    pub fn var_factors(&self, v: usize) -> &[(usize, usize)] {
        &self.var_factors[v]
    }

    pub fn feature(&self, row: usize) -> &[S; FEATURE_DIM] {
        &self.features[row]
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn var_index(&self, id: &VariableId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn unclamped(&self) -> Vec<usize> {
        (0..self.variables.len()).filter(|&v| self.variables[v].clamp.is_none()).collect()
    }

    pub fn unclamped_count(&self) -> usize {
        self.variables.iter().filter(|v| v.clamp.is_none()).count()
    }

    /// Copy of the graph with every clamp removed.
    pub fn released(&self) -> Self {
        let mut g = self.clone();
        for v in &mut g.variables {
            v.clamp = None;
        }
        g
    }

    pub fn check_params(&self, params: &ParameterSet<S>) -> Result<()> {
        if params.users() != self.users.as_slice() {
            return Err(Error::Invariant(format!(
                "parameter set covers {} users, graph expects {}",
                params.user_count(),
                self.users.len()
            )));
        }
        Ok(())
    }

    /// Log-potential of factor `f` with its variables in `states` (one per position).
    pub fn log_potential(&self, f: usize, states: &[u8], params: &ParameterSet<S>) -> S {
        let factor = &self.factors[f];
        let up = params.user(factor.owner);
        let label = |i: usize| BinaryLabel::from_positive(states[i] == 1);
        match factor.kind {
            FactorKind::ImageUser => eval_f1(label(0), label(1), up.beta),
            FactorKind::Visual => {
                let x = &self.features[factor.feature.expect("visual factor has a feature row")];
                eval_f2(x, label(0), &params.alpha).expect("feature rows have the alpha dimension")
            }
            FactorKind::Temporal => eval_f3(label(0), label(1), up.xi, up.delta, factor.gap),
            FactorKind::Influence => eval_f4(label(0), label(1), states[2], up.lambda),
            FactorKind::StableInfluence => eval_f5(states[0], states[1], up.eta, up.tau, factor.gap),
        }
    }

    /// All `2^arity` log-potentials of factor `f`.
    pub fn log_table(&self, f: usize, params: &ParameterSet<S>) -> Vec<S> {
        let arity = self.factors[f].vars.len();
        let mut states = [0u8; 3];
        (0..1usize << arity)
            .map(|x| {
                for (k, s) in states.iter_mut().enumerate().take(arity) {
                    *s = ((x >> k) & 1) as u8;
                }
                self.log_potential(f, &states[..arity], params)
            })
            .collect()
    }

    pub fn factor_states(&self, f: usize, assignment: &Assignment) -> ([u8; 3], usize) {
        let factor = &self.factors[f];
        let mut states = [0u8; 3];
        let mut index = 0;
        for (k, &v) in factor.vars.iter().enumerate() {
            states[k] = assignment.states[v];
            index |= usize::from(states[k]) << k;
        }
        (states, index)
    }
}

/// Incremental construction of a [`FactorGraph`] with arity and domain checks.
#[derive(Debug, Clone)]
pub struct GraphBuilder<S> {
    graph: FactorGraph<S>,
}

impl<S: Scalar> GraphBuilder<S> {
    pub fn new(users: Vec<UserId>) -> Self {
        GraphBuilder {
            graph: FactorGraph {
                variables: Vec::new(),
                factors: Vec::new(),
                var_factors: Vec::new(),
                features: Vec::new(),
                users,
                index: HashMap::new(),
            },
        }
    }

    /// Adds a variable, optionally clamped to `value` (`±1` or `0/1` by domain).
    pub fn add_variable(&mut self, id: VariableId, clamp: Option<i8>) -> Result<usize> {
        let clamp = match clamp {
            None => None,
            Some(v) => Some(
                id.domain()
                    .state(v)
                    .ok_or_else(|| Error::Invariant(format!("value {v} outside the domain of {id}")))?,
            ),
        };
        if self.graph.index.contains_key(&id) {
            return Err(Error::Invariant(format!("duplicate variable {id}")));
        }
        let idx = self.graph.variables.len();
        self.graph.variables.push(Variable { id, clamp });
        self.graph.var_factors.push(Vec::new());
        self.graph.index.insert(id, idx);
        Ok(idx)
    }

    pub fn add_feature(&mut self, x: [S; FEATURE_DIM]) -> usize {
        self.graph.features.push(x);
        self.graph.features.len() - 1
    }

    pub fn add_factor(&mut self, kind: FactorKind, vars: &[usize], owner: usize, gap: usize, feature: Option<usize>) -> Result<usize> {
        let g = &mut self.graph;
        if vars.len() != kind.arity() {
            return Err(Error::Invariant(format!("{kind} takes {} variables, got {}", kind.arity(), vars.len())));
        }
        for (&v, &d) in vars.iter().zip(kind.domains()) {
            let var = g.variables.get(v).ok_or_else(|| Error::Invariant(format!("no variable {v}")))?;
            if var.domain() != d {
                return Err(Error::Invariant(format!("{kind} cannot attach {}", var.id)));
            }
        }
        let distinct: BTreeSet<_> = vars.iter().collect();
        if distinct.len() != vars.len() {
            return Err(Error::Invariant(format!("{kind} repeats a variable")));
        }
        if owner >= g.users.len() {
            return Err(Error::Invariant(format!("owner index {owner} out of range")));
        }
        let temporal = matches!(kind, FactorKind::Temporal | FactorKind::StableInfluence);
        if temporal && gap == 0 {
            return Err(Error::Invariant(format!("{kind} needs a positive gap")));
        }
        match (kind, feature) {
            (FactorKind::Visual, Some(row)) if row < g.features.len() => {}
            (FactorKind::Visual, _) => return Err(Error::Invariant("visual factor needs a feature row".into())),
            (_, Some(_)) => return Err(Error::Invariant(format!("{kind} takes no feature row"))),
            _ => {}
        }
        let f = g.factors.len();
        for (pos, &v) in vars.iter().enumerate() {
            g.var_factors[v].push((f, pos));
        }
        g.factors.push(Factor {
            kind,
            vars: vars.to_vec(),
            owner,
            gap: if temporal { gap } else { 0 },
            feature,
        });
        Ok(f)
    }

    pub fn build(self) -> FactorGraph<S> {
        self.graph
    }
}

/// A complete configuration of a graph's variables, stored as state indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    states: Vec<u8>,
}

impl Assignment {
    /// Validates length, range and clamps.
    pub fn from_states<S: Scalar>(graph: &FactorGraph<S>, states: Vec<u8>) -> Result<Self> {
        if states.len() != graph.variable_count() {
            let missing = graph
                .variables
                .get(states.len())
                .map_or_else(|| "<extra values>".to_string(), |v| v.id.to_string());
            return Err(Error::IncompleteAssignment(missing));
        }
        for (var, &s) in graph.variables.iter().zip(&states) {
            if s > 1 {
                return Err(Error::Invariant(format!("state {s} for {}", var.id)));
            }
            if var.clamp.is_some_and(|c| c != s) {
                return Err(Error::Invariant(format!("{} must keep its clamped value", var.id)));
            }
        }
        Ok(Assignment { states })
    }

    /// Builds from values keyed by variable id. Clamped variables may be omitted.
    pub fn from_values<S: Scalar>(graph: &FactorGraph<S>, values: &BTreeMap<VariableId, i8>) -> Result<Self> {
        let mut states = Vec::with_capacity(graph.variable_count());
        for var in &graph.variables {
            let s = match (values.get(&var.id), var.clamp) {
                (Some(&v), _) => var
                    .domain()
                    .state(v)
                    .ok_or_else(|| Error::Invariant(format!("value {v} outside the domain of {}", var.id)))?,
                (None, Some(c)) => c,
                (None, None) => return Err(Error::IncompleteAssignment(var.id.to_string())),
            };
            states.push(s);
        }
        Assignment::from_states(graph, states)
    }

    /// Unclamped variables at state 0, clamped ones at their clamp.
    pub fn lowest<S: Scalar>(graph: &FactorGraph<S>) -> Self {
        Assignment {
            states: graph.variables.iter().map(|v| v.clamp.unwrap_or(0)).collect(),
        }
    }

    pub(crate) fn from_states_unchecked(states: Vec<u8>) -> Self {
        Assignment { states }
    }

    pub fn states(&self) -> &[u8] {
        &self.states
    }

    pub fn state(&self, v: usize) -> u8 {
        self.states[v]
    }

    pub fn value<S: Scalar>(&self, graph: &FactorGraph<S>, v: usize) -> i8 {
        graph.variables[v].domain().value(self.states[v])
    }

    pub fn to_values<S: Scalar>(&self, graph: &FactorGraph<S>) -> BTreeMap<VariableId, i8> {
        graph
            .variables
            .iter()
            .zip(&self.states)
            .map(|(var, &s)| (var.id, var.domain().value(s)))
            .collect()
    }
}

/// Sum of all factor log-potentials: the unnormalised log-likelihood.
pub fn objective<S: Scalar>(graph: &FactorGraph<S>, assignment: &Assignment, params: &ParameterSet<S>) -> Result<S> {
    if assignment.states.len() != graph.variable_count() {
        let missing = graph
            .variables
            .get(assignment.states.len())
            .map_or_else(|| "<extra values>".to_string(), |v| v.id.to_string());
        return Err(Error::IncompleteAssignment(missing));
    }
    graph.check_params(params)?;
    Ok(objective_unchecked(graph, assignment.states(), params))
}

pub(crate) fn objective_unchecked<S: Scalar>(graph: &FactorGraph<S>, states: &[u8], params: &ParameterSet<S>) -> S {
    let mut buf = [0u8; 3];
    let mut total = S::zero();
    for (f, factor) in graph.factors.iter().enumerate() {
        for (k, &v) in factor.vars.iter().enumerate() {
            buf[k] = states[v];
        }
        total += graph.log_potential(f, &buf[..factor.vars.len()], params);
    }
    total
}
