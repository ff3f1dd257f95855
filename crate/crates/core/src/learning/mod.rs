//! Parameter learning by alternating MAP decoding and gradient ascent, plus
//! prediction with trained parameters.

mod baseline;
mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_DIM};
use crate::graph::{build_graph, objective, Assignment, BuildOptions, FactorGraph, ParameterSet, UserParams, VariableId};
use crate::inference::{
    brute_force_map, brute_force_marginals, BeliefPropagation, BpConfig, BpMode, MarginalTable, BRUTE_FORCE_LIMIT,
};
use crate::network::{BinaryLabel, EmotionCategory, ImageId, TimeSlice, TimeVaryingNetwork, UserId};
use crate::scalar::Scalar;

pub use baseline::{train_linear_baseline, BaselineConfig, LinearModel};
pub use stats::{
    bethe_log_partition, expected_statistics, gradient_step2, gradient_step3, sufficient_statistics, term_counts_step2,
    term_counts_step3, theta_step2, theta_step3, with_theta_step2, with_theta_step3, ParamLayout, SufficientStatistics,
};

/// Which distribution the likelihood normalises over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LikelihoodMode {
    /// `log p(q0)` with the partition function over every variable, observed
    /// labels included.
    Joint,
    /// `log p(q0 | observed labels)`: the partition function sums over the
    /// unclamped variables only.
    Conditional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_outer: usize,
    /// Relative change of the log-likelihood between outer iterations below
    /// which training stops.
    pub tolerance: f64,
    pub step: f64,
    pub step2_iters: usize,
    pub step3_iters: usize,
    pub max_halvings: usize,
    /// Keep δ and τ at their initial values.
    pub freeze_decay: bool,
    pub likelihood: LikelihoodMode,
    /// Graphs with at most this many unclamped variables are decoded and
    /// marginalised by enumeration.
    pub exact_limit: usize,
    /// Message passing for decoding and for the returned marginals.
    pub bp: BpConfig,
    /// Message passing for the marginals behind each gradient step. Runs that
    /// fail to converge are continued with `bp`'s damping.
    pub inner_bp: BpConfig,
    pub baseline: BaselineConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_outer: 20,
            tolerance: 1e-4,
            step: 0.05,
            step2_iters: 10,
            step3_iters: 5,
            max_halvings: 8,
            freeze_decay: false,
            likelihood: LikelihoodMode::Joint,
            exact_limit: BRUTE_FORCE_LIMIT,
            bp: BpConfig::default(),
            inner_bp: BpConfig {
                damping: 0.0,
                tolerance: 1e-4,
                ..BpConfig::default()
            },
            baseline: BaselineConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.bp.validate()?;
        self.inner_bp.validate()?;
        if self.max_outer == 0 || !(self.tolerance > 0.0) || !(self.step > 0.0) {
            return Err(Error::Invariant("max_outer, tolerance and step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Decode,
    Step2,
    Step3,
}

impl Phase {
    fn name(self) -> &'static str {
        match self {
            Phase::Decode => "decode",
            Phase::Step2 => "step2",
            Phase::Step3 => "step3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub outer: usize,
    pub phase: Phase,
    pub inner: usize,
    /// Log-likelihood (exact or Bethe) after the row's update.
    pub objective: f64,
    /// Final message residual of the inference run behind the row; 0 when exact.
    pub residual: f64,
    pub step: f64,
    pub accepted: bool,
}

pub fn trace_to_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("outer,phase,inner,objective,residual,step,accepted\n");
    for r in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.outer,
            r.phase.name(),
            r.inner,
            r.objective,
            r.residual,
            r.step,
            r.accepted
        );
    }
    out
}

/// Labeled training examples: every image with a label for `category` that is
/// not in `hidden`.
pub fn labeled_examples(
    net: &TimeVaryingNetwork,
    category: EmotionCategory,
    hidden: &BTreeSet<ImageId>,
) -> Vec<(FeatureVector, BinaryLabel)> {
    net.images()
        .filter(|img| !hidden.contains(&img.id))
        .filter_map(|img| img.label(category).map(|l| (img.features, l)))
        .collect()
}

/// Starting parameters: α from the linear baseline, scalar weights at their
/// fixed initial values. Falls back to `α = 0` when the examples do not cover
/// both classes.
pub fn initialize_params<S: Scalar>(
    net: &TimeVaryingNetwork,
    labeled: &[(FeatureVector, BinaryLabel)],
    config: &BaselineConfig,
) -> ParameterSet<S> {
    let positives = labeled.iter().filter(|(_, l)| l.is_positive()).count();
    let alpha = if positives == 0 || positives == labeled.len() {
        log::warn!("{} labeled images with {} positive; starting from alpha = 0", labeled.len(), positives);
        [S::zero(); FEATURE_DIM]
    } else {
        let model = train_linear_baseline(labeled, config).expect("non-empty example set");
        model.weights.map(S::of)
    };
    ParameterSet::uniform(net.users().iter().copied(), alpha, UserParams::initial())
}

/// Marginals and `log Z` of one graph, by enumeration when small enough and
/// warm-started sum-product otherwise.
struct Marginalizer<'g, S> {
    graph: &'g FactorGraph<S>,
    exact_limit: usize,
    bp: BeliefPropagation<'g, S>,
    config: BpConfig,
    fallback: BpConfig,
}

impl<'g, S: Scalar> Marginalizer<'g, S> {
    fn new(graph: &'g FactorGraph<S>, config: BpConfig, fallback: BpConfig, exact_limit: usize) -> Self {
        Marginalizer {
            graph,
            exact_limit,
            bp: BeliefPropagation::new(graph),
            config,
            fallback,
        }
    }

    fn inner(graph: &'g FactorGraph<S>, config: &TrainConfig) -> Self {
        let fallback = BpConfig {
            damping: config.bp.damping,
            ..config.inner_bp
        };
        Marginalizer::new(graph, config.inner_bp, fallback, config.exact_limit)
    }

    fn outer(graph: &'g FactorGraph<S>, config: &TrainConfig) -> Self {
        Marginalizer::new(graph, config.bp, config.bp, config.exact_limit)
    }

    fn is_exact(&self) -> bool {
        self.graph.unclamped_count() <= self.exact_limit
    }

    fn run(&mut self, params: &ParameterSet<S>) -> Result<(MarginalTable<S>, S, f64)> {
        if self.is_exact() {
            let (m, log_z) = brute_force_marginals(self.graph, params, self.exact_limit)?;
            return Ok((m, log_z, 0.0));
        }
        let mut out = self.bp.run(params, &self.config, BpMode::SumProduct);
        if !out.converged && self.fallback != self.config {
            out = self.bp.run(params, &self.fallback, BpMode::SumProduct);
        }
        let m = self.bp.marginals();
        let log_z = bethe_log_partition(self.graph, params, &m);
        Ok((m, log_z, out.residual.as_f64()))
    }
}

struct Decoder<'g, S> {
    graph: &'g FactorGraph<S>,
    exact_limit: usize,
    bp: BeliefPropagation<'g, S>,
    config: BpConfig,
}

impl<'g, S: Scalar> Decoder<'g, S> {
    fn new(graph: &'g FactorGraph<S>, config: &TrainConfig) -> Self {
        Decoder {
            graph,
            exact_limit: config.exact_limit,
            bp: BeliefPropagation::new(graph),
            config: config.bp,
        }
    }

    fn run(&mut self, params: &ParameterSet<S>) -> Result<(Assignment, f64)> {
        if self.graph.unclamped_count() <= self.exact_limit {
            let (a, _) = brute_force_map(self.graph, params, self.exact_limit)?;
            return Ok((a, 0.0));
        }
        let out = self.bp.run(params, &self.config, BpMode::MaxProduct);
        Ok((self.bp.decode(), out.residual.as_f64()))
    }
}

#[derive(Debug, Clone)]
pub struct FitResult<S> {
    pub graph: FactorGraph<S>,
    pub params: ParameterSet<S>,
    /// MAP assignment of the clamped graph under the final parameters.
    pub assignment: Assignment,
    /// Marginals of the clamped graph under the final parameters.
    pub marginals: MarginalTable<S>,
    pub trace: Vec<TraceRow>,
    pub iterations: usize,
    pub converged: bool,
}

enum Block {
    Step2,
    Step3,
}

/// Gradient ascent on one parameter block with the decoded `q0` held fixed.
#[allow(clippy::too_many_arguments)]
fn ascend<S: Scalar>(
    block: Block,
    graph: &FactorGraph<S>,
    q0: &Assignment,
    params: &mut ParameterSet<S>,
    state: &mut (MarginalTable<S>, S, f64),
    marginalizer: &mut Marginalizer<'_, S>,
    config: &TrainConfig,
    outer: usize,
    trace: &mut Vec<TraceRow>,
) -> Result<()> {
    let (iters, phase) = match block {
        Block::Step2 => (config.step2_iters, Phase::Step2),
        Block::Step3 => (config.step3_iters, Phase::Step3),
    };
    let counts = match block {
        Block::Step2 => term_counts_step2(graph, params),
        Block::Step3 => term_counts_step3(graph, params),
    };
    let mut step = config.step;
    let mut current = objective(graph, q0, params)? - state.1;
    for inner in 0..iters {
        let grad = match block {
            Block::Step2 => gradient_step2(graph, q0, params, &state.0)?,
            Block::Step3 => gradient_step3(graph, q0, params, &state.0)?,
        };
        let direction: Vec<S> = grad
            .iter()
            .zip(&counts)
            .map(|(g, &c)| *g / S::of(c.max(1) as f64))
            .collect();
        if direction.iter().all(|d| d.abs() < S::of(1e-12)) {
            break;
        }
        let theta = match block {
            Block::Step2 => theta_step2(params),
            Block::Step3 => theta_step3(params),
        };
        let mut accepted = false;
        for _ in 0..=config.max_halvings {
            let moved: Vec<S> = theta.iter().zip(&direction).map(|(t, d)| *t + S::of(step) * *d).collect();
            let candidate = match block {
                Block::Step2 => with_theta_step2(params, &moved),
                Block::Step3 => with_theta_step3(params, &moved),
            };
            let next = marginalizer.run(&candidate)?;
            let value = objective(graph, q0, &candidate)? - next.1;
            let slack = S::of(1e-10) * current.abs().max(S::one());
            if value >= current - slack {
                *params = candidate;
                *state = next;
                current = value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        trace.push(TraceRow {
            outer,
            phase,
            inner,
            objective: current.as_f64(),
            residual: state.2,
            step,
            accepted,
        });
        if !accepted {
            break;
        }
    }
    Ok(())
}

/// Learns parameters for one category on the graph described by `opts`.
///
/// Labeled images not in `opts.hidden` are clamped. Each outer iteration
/// decodes the unclamped variables, then runs gradient ascent on
/// `[α, β, ξ, λ, η]` and on `[δ, τ]` against the decoded assignment.
pub fn fit<S: Scalar>(
    net: &TimeVaryingNetwork,
    category: EmotionCategory,
    config: &TrainConfig,
    opts: &BuildOptions,
) -> Result<FitResult<S>> {
    config.validate()?;
    let graph: FactorGraph<S> = build_graph(net, category, opts);
    let labeled = if opts.clamp_labels { labeled_examples(net, category, &opts.hidden) } else { Vec::new() };
    let params = initialize_params(net, &labeled, &config.baseline);
    fit_graph(graph, params, config)
}

/// [`fit`] on a prebuilt graph from given starting parameters.
pub fn fit_graph<S: Scalar>(graph: FactorGraph<S>, mut params: ParameterSet<S>, config: &TrainConfig) -> Result<FitResult<S>> {
    config.validate()?;
    graph.check_params(&params)?;
    let target = match config.likelihood {
        LikelihoodMode::Joint => graph.released(),
        LikelihoodMode::Conditional => graph.clone(),
    };
    let mut trace = Vec::new();
    let mut previous: Option<f64> = None;
    let mut converged = false;
    let mut iterations = 0;
    {
        let mut decoder = Decoder::new(&graph, config);
        let mut marginalizer = Marginalizer::inner(&target, config);
        for outer in 0..config.max_outer {
            iterations = outer + 1;
            let (q0, residual) = decoder.run(&params)?;
            let mut state = marginalizer.run(&params)?;
            let start = objective(&graph, &q0, &params)? - state.1;
            trace.push(TraceRow {
                outer,
                phase: Phase::Decode,
                inner: 0,
                objective: start.as_f64(),
                residual,
                step: 0.0,
                accepted: true,
            });
            ascend(Block::Step2, &graph, &q0, &mut params, &mut state, &mut marginalizer, config, outer, &mut trace)?;
            if !config.freeze_decay {
                ascend(Block::Step3, &graph, &q0, &mut params, &mut state, &mut marginalizer, config, outer, &mut trace)?;
            }
            let value = (objective(&graph, &q0, &params)? - state.1).as_f64();
            if let Some(prev) = previous {
                if (value - prev).abs() <= config.tolerance * prev.abs().max(1e-12) {
                    converged = true;
                    break;
                }
            }
            previous = Some(value);
        }
    }
    let (assignment, marginals) = {
        let mut decoder = Decoder::new(&graph, config);
        let (a, _) = decoder.run(&params)?;
        let mut m = Marginalizer::outer(&graph, config);
        let (marg, _, _) = m.run(&params)?;
        (a, marg)
    };
    if !converged {
        log::info!("training stopped after {iterations} outer iterations without meeting the tolerance");
    }
    Ok(FitResult {
        graph,
        params,
        assignment,
        marginals,
        trace,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserPrediction {
    pub probability: f64,
    pub label: BinaryLabel,
}

/// Per-variable outputs of inference for one category.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub category: EmotionCategory,
    /// `P(y = +1)` per image.
    pub images: BTreeMap<ImageId, f64>,
    /// MAP label per image.
    pub image_labels: BTreeMap<ImageId, BinaryLabel>,
    pub users: BTreeMap<(UserId, TimeSlice), UserPrediction>,
    /// `P(mu = 1)` per directed edge and slice.
    pub influence: BTreeMap<(UserId, UserId, TimeSlice), f64>,
}

impl Prediction {
    pub fn from_parts<S: Scalar>(
        category: EmotionCategory,
        graph: &FactorGraph<S>,
        marginals: &MarginalTable<S>,
        map: &Assignment,
    ) -> Self {
        let mut p = Prediction {
            category,
            images: BTreeMap::new(),
            image_labels: BTreeMap::new(),
            users: BTreeMap::new(),
            influence: BTreeMap::new(),
        };
        for (v, var) in graph.variables().iter().enumerate() {
            let prob = marginals.variables[v][1].as_f64();
            let label = BinaryLabel::from_positive(map.state(v) == 1);
            match var.id {
                VariableId::Image(id) => {
                    p.images.insert(id, prob);
                    p.image_labels.insert(id, label);
                }
                VariableId::User(u, t) => {
                    p.users.insert((u, t), UserPrediction { probability: prob, label });
                }
                VariableId::Influence { src, dst, slice } => {
                    p.influence.insert((src, dst, slice), prob);
                }
            }
        }
        p
    }
}

/// Runs inference with trained parameters on the graph described by `opts`
/// (images in `opts.hidden` are left unclamped).
pub fn predict<S: Scalar>(
    net: &TimeVaryingNetwork,
    params: &ParameterSet<S>,
    category: EmotionCategory,
    opts: &BuildOptions,
    config: &TrainConfig,
) -> Result<Prediction> {
    let graph: FactorGraph<S> = build_graph(net, category, opts);
    graph.check_params(params)?;
    let (map, _) = Decoder::new(&graph, config).run(params)?;
    let (marginals, _, _) = Marginalizer::outer(&graph, config).run(params)?;
    Ok(Prediction::from_parts(category, &graph, &marginals, &map))
}
