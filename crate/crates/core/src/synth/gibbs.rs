//! Single-site Gibbs sampling on a factor graph with optional per-variable
//! unary log-potentials.

use rand::Rng;

use crate::graph::{Assignment, FactorGraph, ParameterSet};

pub struct GibbsSampler<'g> {
    graph: &'g FactorGraph<f64>,
    tables: Vec<Vec<f64>>,
    /// Extra log-potential of state 1 per variable.
    bias: Vec<f64>,
    free: Vec<usize>,
    states: Vec<u8>,
}

impl<'g> GibbsSampler<'g> {
    /// Starts from the lowest assignment (clamped variables at their values).
    pub fn new(graph: &'g FactorGraph<f64>, params: &ParameterSet<f64>, bias: Vec<f64>) -> Self {
        assert_eq!(bias.len(), graph.variable_count(), "one bias per variable");
        graph.check_params(params).expect("parameters match the graph");
        GibbsSampler {
            graph,
            tables: (0..graph.factor_count()).map(|f| graph.log_table(f, params)).collect(),
            bias,
            free: graph.unclamped(),
            states: Assignment::lowest(graph).states().to_vec(),
        }
    }

    fn index_with(&self, f: usize, v: usize, state: u8) -> usize {
        self.graph.factor(f).vars.iter().enumerate().fold(0, |acc, (k, &u)| {
            let s = if u == v { state } else { self.states[u] };
            acc | (usize::from(s) << k)
        })
    }

    /// Log-odds of state 1 against state 0 for `v` given all other variables.
    pub fn conditional_log_odds(&self, v: usize) -> f64 {
        let mut odds = self.bias[v];
        for &(f, _) in self.graph.var_factors(v) {
            odds += self.tables[f][self.index_with(f, v, 1)] - self.tables[f][self.index_with(f, v, 0)];
        }
        odds
    }

    /// Redraws every unclamped variable uniformly.
    pub fn randomize<R: Rng>(&mut self, rng: &mut R) {
        for &v in &self.free {
            self.states[v] = rng.random_range(0..2);
        }
    }

    /// One pass over the unclamped variables in graph order.
    pub fn sweep<R: Rng>(&mut self, rng: &mut R) {
        for i in 0..self.free.len() {
            let v = self.free[i];
            let p1 = 1.0 / (1.0 + (-self.conditional_log_odds(v)).exp());
            self.states[v] = u8::from(rng.random::<f64>() < p1);
        }
    }

    pub fn states(&self) -> &[u8] {
        &self.states
    }

    pub fn assignment(&self) -> Assignment {
        Assignment::from_states(self.graph, self.states.clone()).expect("sampler respects clamps")
    }
}
