//! Log-space message passing on binary factor graphs.
//!
//! Only factor-to-variable messages are stored; a variable-to-factor message is
//! the variable's summed incoming messages minus the factor's own message, plus
//! the clamp mask. Messages are normalised to max 0 (max-product) or
//! log-sum 0 (sum-product).

use super::{is_tie, Assignment, BpConfig, MarginalTable, Schedule};
use crate::graph::{FactorGraph, ParameterSet};
use crate::scalar::{log_sum_exp, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpMode {
    MaxProduct,
    SumProduct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpOutcome<S> {
    pub converged: bool,
    pub iterations: usize,
    /// Largest message change in the final sweep.
    pub residual: S,
    /// Largest message change per sweep.
    pub residuals: Vec<S>,
}

/// Message state for one graph; reusable across runs to warm-start.
#[derive(Debug, Clone)]
pub struct BeliefPropagation<'g, S> {
    graph: &'g FactorGraph<S>,
    offsets: Vec<usize>,
    messages: Vec<[S; 2]>,
    tables: Vec<Vec<S>>,
    sums: Vec<[S; 2]>,
    mode: BpMode,
}

fn mask<S: Scalar>(clamp: Option<u8>) -> [S; 2] {
    match clamp {
        None => [S::zero(), S::zero()],
        Some(0) => [S::zero(), S::neg_infinity()],
        Some(_) => [S::neg_infinity(), S::zero()],
    }
}

fn normalize<S: Scalar>(m: [S; 2], mode: BpMode) -> [S; 2] {
    let shift = match mode {
        BpMode::MaxProduct => m[0].max(m[1]),
        BpMode::SumProduct => m[0].log_add_exp(m[1]),
    };
    [m[0] - shift, m[1] - shift]
}

impl<'g, S: Scalar> BeliefPropagation<'g, S> {
    pub fn new(graph: &'g FactorGraph<S>) -> Self {
        let mut offsets = Vec::with_capacity(graph.factor_count() + 1);
        let mut total = 0;
        for f in graph.factors() {
            offsets.push(total);
            total += f.vars.len();
        }
        offsets.push(total);
        BeliefPropagation {
            graph,
            offsets,
            messages: vec![[S::zero(); 2]; total],
            tables: Vec::new(),
            sums: vec![[S::zero(); 2]; graph.variable_count()],
            mode: BpMode::SumProduct,
        }
    }

    pub fn reset(&mut self) {
        self.messages.fill([S::zero(); 2]);
    }

    fn recompute_sums(&mut self) {
        self.sums.fill([S::zero(); 2]);
        for (f, factor) in self.graph.factors().iter().enumerate() {
            for (pos, &v) in factor.vars.iter().enumerate() {
                let m = self.messages[self.offsets[f] + pos];
                self.sums[v][0] += m[0];
                self.sums[v][1] += m[1];
            }
        }
    }

    fn incoming(&self, f: usize, pos: usize, v: usize) -> [S; 2] {
        let own = self.messages[self.offsets[f] + pos];
        let m = mask::<S>(self.graph.variable(v).clamp);
        [self.sums[v][0] - own[0] + m[0], self.sums[v][1] - own[1] + m[1]]
    }

    /// New (undamped, normalised) outgoing messages of factor `f`. Messages
    /// into clamped variables are left at zero: they never affect a belief.
    fn factor_update(&self, f: usize, out: &mut [[S; 2]; 3]) {
        let vars = &self.graph.factor(f).vars;
        let arity = vars.len();
        let mut inc = [[S::zero(); 2]; 3];
        for (pos, &v) in vars.iter().enumerate() {
            inc[pos] = self.incoming(f, pos, v);
        }
        let table = &self.tables[f];
        let mut scores = [S::zero(); 8];
        for (x, &t) in table.iter().enumerate() {
            let mut val = t;
            for (j, inc_j) in inc.iter().enumerate().take(arity) {
                val += inc_j[(x >> j) & 1];
            }
            scores[x] = val;
        }
        let scores = &scores[..table.len()];
        if self.mode == BpMode::SumProduct && self.sum_product_fast(vars, &inc, scores, out) {
            return;
        }
        for (k, o) in out.iter_mut().enumerate().take(arity) {
            if self.graph.variable(vars[k]).clamp.is_some() {
                *o = [S::zero(); 2];
                continue;
            }
            let mut acc = [S::neg_infinity(); 2];
            for (x, &val) in scores.iter().enumerate() {
                let s = (x >> k) & 1;
                acc[s] = match self.mode {
                    BpMode::MaxProduct => acc[s].max(val),
                    BpMode::SumProduct => acc[s].log_add_exp(val),
                };
            }
            // Remove the target's own incoming message.
            *o = normalize([acc[0] - inc[k][0], acc[1] - inc[k][1]], self.mode);
        }
    }

    /// Sum-product update with one exponential per table entry. Returns false
    /// when underflow makes the shortcut unreliable.
    fn sum_product_fast(&self, vars: &[usize], inc: &[[S; 2]; 3], scores: &[S], out: &mut [[S; 2]; 3]) -> bool {
        let top = scores.iter().copied().fold(S::neg_infinity(), S::max);
        if !top.is_finite() {
            return false;
        }
        let mut weights = [S::zero(); 8];
        for (w, &s) in weights.iter_mut().zip(scores) {
            *w = (s - top).exp();
        }
        for (k, o) in out.iter_mut().enumerate().take(vars.len()) {
            if self.graph.variable(vars[k]).clamp.is_some() {
                *o = [S::zero(); 2];
                continue;
            }
            let mut acc = [S::zero(); 2];
            for (x, &w) in weights[..scores.len()].iter().enumerate() {
                acc[(x >> k) & 1] += w;
            }
            if !(acc[0] > S::zero() && acc[1] > S::zero()) {
                return false;
            }
            *o = normalize([acc[0].ln() - inc[k][0], acc[1].ln() - inc[k][1]], BpMode::SumProduct);
        }
        true
    }

    fn apply(&mut self, f: usize, fresh: &[[S; 2]; 3], damping: S) -> S {
        let arity = self.graph.factor(f).vars.len();
        let mut residual = S::zero();
        for (pos, new) in fresh.iter().enumerate().take(arity) {
            let slot = self.offsets[f] + pos;
            let old = self.messages[slot];
            let mixed = if damping > S::zero() {
                let one_minus = S::one() - damping;
                normalize([one_minus * new[0] + damping * old[0], one_minus * new[1] + damping * old[1]], self.mode)
            } else {
                *new
            };
            residual = residual.max((mixed[0] - old[0]).abs()).max((mixed[1] - old[1]).abs());
            let v = self.graph.factor(f).vars[pos];
            self.sums[v][0] += mixed[0] - old[0];
            self.sums[v][1] += mixed[1] - old[1];
            self.messages[slot] = mixed;
        }
        residual
    }

    /// Runs message passing from the current messages.
    pub fn run(&mut self, params: &ParameterSet<S>, config: &BpConfig, mode: BpMode) -> BpOutcome<S> {
        config.validate().expect("invalid BP configuration");
        self.graph.check_params(params).expect("parameters do not match graph users");
        if mode != self.mode {
            self.reset();
            self.mode = mode;
        }
        self.tables = (0..self.graph.factor_count()).map(|f| self.graph.log_table(f, params)).collect();
        let damping = S::of(config.damping);
        let tolerance = S::of(config.tolerance);
        let mut residuals = Vec::new();
        let mut converged = self.graph.factor_count() == 0;
        let mut fresh = [[S::zero(); 2]; 3];
        for _ in 0..config.max_iterations {
            if converged {
                break;
            }
            self.recompute_sums();
            let mut residual = S::zero();
            match config.schedule {
                Schedule::Sequential => {
                    for f in 0..self.graph.factor_count() {
                        self.factor_update(f, &mut fresh);
                        residual = residual.max(self.apply(f, &fresh, damping));
                    }
                }
                Schedule::Synchronous => {
                    let updates: Vec<[[S; 2]; 3]> = (0..self.graph.factor_count())
                        .map(|f| {
                            let mut o = [[S::zero(); 2]; 3];
                            self.factor_update(f, &mut o);
                            o
                        })
                        .collect();
                    for (f, o) in updates.iter().enumerate() {
                        residual = residual.max(self.apply(f, o, damping));
                    }
                }
            }
            residuals.push(residual);
            converged = residual < tolerance;
        }
        self.recompute_sums();
        BpOutcome {
            converged,
            iterations: residuals.len(),
            residual: residuals.last().copied().unwrap_or_else(S::zero),
            residuals,
        }
    }

    /// Unnormalised log-belief of variable `v`, clamp applied.
    pub fn variable_log_belief(&self, v: usize) -> [S; 2] {
        let m = mask::<S>(self.graph.variable(v).clamp);
        [self.sums[v][0] + m[0], self.sums[v][1] + m[1]]
    }

    /// Decodes the max-marginals; ties go to state 0.
    pub fn decode(&self) -> Assignment {
        let states = (0..self.graph.variable_count())
            .map(|v| {
                if let Some(c) = self.graph.variable(v).clamp {
                    return c;
                }
                let b = self.variable_log_belief(v);
                if is_tie(b[0], b[1]) || b[0] > b[1] {
                    0
                } else {
                    1
                }
            })
            .collect();
        Assignment::from_states_unchecked(states)
    }

    pub fn marginals(&self) -> MarginalTable<S> {
        let variables = (0..self.graph.variable_count())
            .map(|v| {
                let b = self.variable_log_belief(v);
                let z = b[0].log_add_exp(b[1]);
                [(b[0] - z).exp(), (b[1] - z).exp()]
            })
            .collect();
        let factors = (0..self.graph.factor_count())
            .map(|f| {
                let vars = &self.graph.factor(f).vars;
                let mut inc = [[S::zero(); 2]; 3];
                for (pos, &v) in vars.iter().enumerate() {
                    inc[pos] = self.incoming(f, pos, v);
                }
                let logs: Vec<S> = self.tables[f]
                    .iter()
                    .enumerate()
                    .map(|(x, &t)| {
                        let mut val = t;
                        for (j, inc_j) in inc.iter().enumerate().take(vars.len()) {
                            val += inc_j[(x >> j) & 1];
                        }
                        val
                    })
                    .collect();
                let z = log_sum_exp(&logs);
                logs.into_iter().map(|l| (l - z).exp()).collect()
            })
            .collect();
        MarginalTable::new(self.graph, variables, factors)
    }
}

/// MAP estimate by max-product; clamped variables keep their values.
pub fn max_product<S: Scalar>(graph: &FactorGraph<S>, params: &ParameterSet<S>, config: &BpConfig) -> (Assignment, BpOutcome<S>) {
    let mut bp = BeliefPropagation::new(graph);
    let outcome = bp.run(params, config, BpMode::MaxProduct);
    (bp.decode(), outcome)
}

/// Variable and factor marginals by sum-product.
pub fn sum_product<S: Scalar>(graph: &FactorGraph<S>, params: &ParameterSet<S>, config: &BpConfig) -> (MarginalTable<S>, BpOutcome<S>) {
    let mut bp = BeliefPropagation::new(graph);
    let outcome = bp.run(params, config, BpMode::SumProduct);
    (bp.marginals(), outcome)
}
