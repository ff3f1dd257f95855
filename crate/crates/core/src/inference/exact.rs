//! Exhaustive enumeration over the unclamped variables. Exponential; used as
//! the reference for message passing and for exact likelihoods on small graphs.

use super::{is_tie, Assignment, MarginalTable};
use crate::error::{Error, Result};
use crate::graph::{FactorGraph, ParameterSet};
use crate::scalar::{log_sum_exp, Scalar};

/// Default largest number of unclamped variables enumerated.
pub const BRUTE_FORCE_LIMIT: usize = 20;

const REFRESH_EVERY: usize = 4096;

struct Enumeration<S> {
    free: Vec<usize>,
    tables: Vec<Vec<S>>,
    /// Log-score per assignment, indexed in lexicographic order with the
    /// first free variable most significant.
    scores: Vec<S>,
    base: Vec<u8>,
}

fn table_index(vars: &[usize], states: &[u8]) -> usize {
    vars.iter().enumerate().fold(0, |acc, (k, &v)| acc | (usize::from(states[v]) << k))
}

fn total<S: Scalar>(graph: &FactorGraph<S>, tables: &[Vec<S>], states: &[u8]) -> S {
    graph
        .factors()
        .iter()
        .zip(tables)
        .map(|(f, t)| t[table_index(&f.vars, states)])
        .fold(S::zero(), |a, b| a + b)
}

fn enumerate<S: Scalar>(graph: &FactorGraph<S>, params: &ParameterSet<S>, limit: usize) -> Result<Enumeration<S>> {
    graph.check_params(params)?;
    let free = graph.unclamped();
    if free.len() > limit {
        return Err(Error::TooLarge { unclamped: free.len(), limit });
    }
    let tables: Vec<Vec<S>> = (0..graph.factor_count()).map(|f| graph.log_table(f, params)).collect();
    let base = Assignment::lowest(graph).states().to_vec();
    let n = free.len();
    let count = 1usize << n;
    let mut scores = vec![S::zero(); count];
    let mut states = base.clone();
    let mut current = total(graph, &tables, &states);
    scores[0] = current;
    // Walk the reflected Gray code, updating only the factors touching the
    // flipped variable. Gray bit b is free variable n-1-b.
    let mut lex = 0usize;
    for i in 1..count {
        let bit = i.trailing_zeros() as usize;
        let v = free[n - 1 - bit];
        let mut delta = S::zero();
        for &(f, _) in graph.var_factors(v) {
            let vars = &graph.factor(f).vars;
            delta -= tables[f][table_index(vars, &states)];
        }
        states[v] ^= 1;
        for &(f, _) in graph.var_factors(v) {
            let vars = &graph.factor(f).vars;
            delta += tables[f][table_index(vars, &states)];
        }
        lex ^= 1 << bit;
        current = if i % REFRESH_EVERY == 0 { total(graph, &tables, &states) } else { current + delta };
        scores[lex] = current;
    }
    Ok(Enumeration { free, tables, scores, base })
}

impl<S: Scalar> Enumeration<S> {
    fn states_of(&self, lex: usize, out: &mut [u8]) {
        let n = self.free.len();
        for (k, &v) in self.free.iter().enumerate() {
            out[v] = ((lex >> (n - 1 - k)) & 1) as u8;
        }
    }
}

/// Exact MAP assignment. Among assignments whose scores tie with the maximum,
/// returns the lexicographically smallest (state 0 before state 1, variables
/// in graph order).
pub fn brute_force_map<S: Scalar>(graph: &FactorGraph<S>, params: &ParameterSet<S>, limit: usize) -> Result<(Assignment, S)> {
    let e = enumerate(graph, params, limit)?;
    let max = e.scores.iter().copied().fold(S::neg_infinity(), S::max);
    let best = e
        .scores
        .iter()
        .position(|&s| s == max || is_tie(s, max))
        .expect("at least one assignment");
    let mut states = e.base.clone();
    e.states_of(best, &mut states);
    Ok((Assignment::from_states_unchecked(states), e.scores[best]))
}

/// Exact `log Z` over the unclamped variables.
pub fn log_partition<S: Scalar>(graph: &FactorGraph<S>, params: &ParameterSet<S>, limit: usize) -> Result<S> {
    let e = enumerate(graph, params, limit)?;
    Ok(log_sum_exp(&e.scores))
}

/// Exact variable and factor marginals together with `log Z`.
pub fn brute_force_marginals<S: Scalar>(
    graph: &FactorGraph<S>,
    params: &ParameterSet<S>,
    limit: usize,
) -> Result<(MarginalTable<S>, S)> {
    let e = enumerate(graph, params, limit)?;
    let log_z = log_sum_exp(&e.scores);
    let mut variables = vec![[S::zero(); 2]; graph.variable_count()];
    let mut factors: Vec<Vec<S>> = e.tables.iter().map(|t| vec![S::zero(); t.len()]).collect();
    let mut states = e.base.clone();
    for (lex, &score) in e.scores.iter().enumerate() {
        let p = (score - log_z).exp();
        e.states_of(lex, &mut states);
        for (v, m) in variables.iter_mut().enumerate() {
            m[usize::from(states[v])] += p;
        }
        for (f, table) in factors.iter_mut().enumerate() {
            table[table_index(&graph.factor(f).vars, &states)] += p;
        }
    }
    for m in &mut variables {
        let total = m[0] + m[1];
        m[0] /= total;
        m[1] /= total;
    }
    for table in &mut factors {
        let total = table.iter().fold(S::zero(), |a, b| a + *b);
        table.iter_mut().for_each(|x| *x /= total);
    }
    Ok((MarginalTable::new(graph, variables, factors), log_z))
}
