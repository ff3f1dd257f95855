//! Sufficient statistics of the log-linear form and likelihood gradients.
//!
//! With the decay rates held fixed the log-potential sum is linear in
//! `θ = [α | β | ξ | λ | η]`, so `objective(q) = θᵀφ(q)`. The gradient of
//! `log p(q0) = θᵀφ(q0) − log Z` is `φ(q0) − E[φ]`, and each entry of
//! `E[φ]` is a sum of per-factor expectations taken from factor marginals.

use crate::error::{Error, Result};
use crate::features::FEATURE_DIM;
use crate::graph::{objective, Assignment, FactorGraph, FactorKind, ParameterSet};
use crate::inference::MarginalTable;
use crate::scalar::Scalar;

/// Index ranges of the step-2 parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub users: usize,
}

impl ParamLayout {
    pub fn of<S>(params: &ParameterSet<S>) -> Self
    where
        S: Scalar,
    {
        ParamLayout { users: params.user_count() }
    }

    pub fn step2_len(&self) -> usize {
        FEATURE_DIM + 4 * self.users
    }

    pub fn step3_len(&self) -> usize {
        2 * self.users
    }

    pub fn beta(&self, i: usize) -> usize {
        FEATURE_DIM + i
    }

    pub fn xi(&self, i: usize) -> usize {
        FEATURE_DIM + self.users + i
    }

    pub fn lambda(&self, i: usize) -> usize {
        FEATURE_DIM + 2 * self.users + i
    }

    pub fn eta(&self, i: usize) -> usize {
        FEATURE_DIM + 3 * self.users + i
    }
}

/// Step-2 parameters flattened as `[α | β | ξ | λ | η]`.
pub fn theta_step2<S: Scalar>(params: &ParameterSet<S>) -> Vec<S> {
    let layout = ParamLayout::of(params);
    let mut theta = vec![S::zero(); layout.step2_len()];
    theta[..FEATURE_DIM].copy_from_slice(&params.alpha);
    for (i, p) in params.user_params().iter().enumerate() {
        theta[layout.beta(i)] = p.beta;
        theta[layout.xi(i)] = p.xi;
        theta[layout.lambda(i)] = p.lambda;
        theta[layout.eta(i)] = p.eta;
    }
    theta
}

/// Inverse of [`theta_step2`]; scalar entries are projected to be non-negative.
pub fn with_theta_step2<S: Scalar>(params: &ParameterSet<S>, theta: &[S]) -> ParameterSet<S> {
    let layout = ParamLayout::of(params);
    assert_eq!(theta.len(), layout.step2_len());
    let mut out = params.clone();
    out.alpha.copy_from_slice(&theta[..FEATURE_DIM]);
    for i in 0..layout.users {
        let mut p = *params.user(i);
        p.beta = theta[layout.beta(i)];
        p.xi = theta[layout.xi(i)];
        p.lambda = theta[layout.lambda(i)];
        p.eta = theta[layout.eta(i)];
        out.set_user(i, p);
    }
    out
}

/// Step-3 parameters flattened as `[δ | τ]`.
pub fn theta_step3<S: Scalar>(params: &ParameterSet<S>) -> Vec<S> {
    let n = params.user_count();
    let mut theta = vec![S::zero(); 2 * n];
    for (i, p) in params.user_params().iter().enumerate() {
        theta[i] = p.delta;
        theta[n + i] = p.tau;
    }
    theta
}

pub fn with_theta_step3<S: Scalar>(params: &ParameterSet<S>, theta: &[S]) -> ParameterSet<S> {
    let n = params.user_count();
    assert_eq!(theta.len(), 2 * n);
    let mut out = params.clone();
    for i in 0..n {
        let mut p = *params.user(i);
        p.delta = theta[i];
        p.tau = theta[n + i];
        out.set_user(i, p);
    }
    out
}

/// `φ(q)` laid out like [`theta_step2`].
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStatistics<S> {
    pub values: Vec<S>,
}

impl<S: Scalar> SufficientStatistics<S> {
    pub fn dot(&self, theta: &[S]) -> S {
        self.values.iter().zip(theta).map(|(a, b)| *a * *b).fold(S::zero(), |a, b| a + b)
    }
}

fn sign(state: u8) -> i32 {
    if state == 1 {
        1
    } else {
        -1
    }
}

/// Adds `weight · φ_f(states)` for factor `f` into `out` (step-2 layout).
fn add_step2<S: Scalar>(
    graph: &FactorGraph<S>,
    layout: &ParamLayout,
    params: &ParameterSet<S>,
    f: usize,
    x: usize,
    weight: S,
    out: &mut [S],
) {
    let factor = graph.factor(f);
    let bit = |k: usize| ((x >> k) & 1) as u8;
    let owner = factor.owner;
    let up = params.user(owner);
    match factor.kind {
        FactorKind::ImageUser => {
            let d = (sign(bit(0)) - sign(bit(1))).abs();
            out[layout.beta(owner)] -= weight * S::of(f64::from(d));
        }
        FactorKind::Visual => {
            let row = graph.feature(factor.feature.expect("visual factor has a feature row"));
            let y = S::of(f64::from(sign(bit(0))));
            for (o, xj) in out[..FEATURE_DIM].iter_mut().zip(row) {
                *o += weight * y * *xj;
            }
        }
        FactorKind::Temporal => {
            let d = (sign(bit(0)) - sign(bit(1))).abs();
            let decay = (-up.delta * S::of(factor.gap as f64)).exp();
            out[layout.xi(owner)] -= weight * decay * S::of(f64::from(d));
        }
        FactorKind::Influence => {
            let d = (sign(bit(0)) - sign(bit(1))).abs();
            let v = (1 - i32::from(bit(2)) - d).abs();
            out[layout.lambda(owner)] -= weight * S::of(f64::from(v));
        }
        FactorKind::StableInfluence => {
            let d = (i32::from(bit(0)) - i32::from(bit(1))).abs();
            let decay = (-up.tau * S::of(factor.gap as f64)).exp();
            out[layout.eta(owner)] -= weight * decay * S::of(f64::from(d));
        }
    }
}

/// Adds `weight · ∂ objective / ∂[δ | τ]` of factor `f` at table entry `x`.
fn add_step3<S: Scalar>(graph: &FactorGraph<S>, params: &ParameterSet<S>, f: usize, x: usize, weight: S, out: &mut [S]) {
    let factor = graph.factor(f);
    let n = params.user_count();
    let bit = |k: usize| ((x >> k) & 1) as u8;
    let up = params.user(factor.owner);
    let gap = S::of(factor.gap as f64);
    match factor.kind {
        FactorKind::Temporal => {
            let d = S::of(f64::from((sign(bit(0)) - sign(bit(1))).abs()));
            out[factor.owner] += weight * up.xi * gap * (-up.delta * gap).exp() * d;
        }
        FactorKind::StableInfluence => {
            let d = S::of(f64::from((i32::from(bit(0)) - i32::from(bit(1))).abs()));
            out[n + factor.owner] += weight * up.eta * gap * (-up.tau * gap).exp() * d;
        }
        _ => {}
    }
}

fn check_assignment<S: Scalar>(graph: &FactorGraph<S>, q: &Assignment, params: &ParameterSet<S>) -> Result<()> {
    // objective() validates completeness and the parameter users.
    objective(graph, q, params).map(|_| ())
}

/// `φ(q)` with the current decay rates frozen inside the ξ and η entries.
pub fn sufficient_statistics<S: Scalar>(
    graph: &FactorGraph<S>,
    q: &Assignment,
    params: &ParameterSet<S>,
) -> Result<SufficientStatistics<S>> {
    check_assignment(graph, q, params)?;
    let layout = ParamLayout::of(params);
    let mut values = vec![S::zero(); layout.step2_len()];
    for f in 0..graph.factor_count() {
        let (_, x) = graph.factor_states(f, q);
        add_step2(graph, &layout, params, f, x, S::one(), &mut values);
    }
    Ok(SufficientStatistics { values })
}

fn check_marginals<S: Scalar>(graph: &FactorGraph<S>, marginals: &MarginalTable<S>) -> Result<()> {
    for f in 0..graph.factor_count() {
        match marginals.factors.get(f) {
            Some(t) if t.len() == 1 << graph.factor(f).vars.len() => {}
            _ => return Err(Error::MissingFactorMarginal(f)),
        }
    }
    Ok(())
}

/// `E[φ]` under the given factor marginals.
pub fn expected_statistics<S: Scalar>(
    graph: &FactorGraph<S>,
    params: &ParameterSet<S>,
    marginals: &MarginalTable<S>,
) -> Result<SufficientStatistics<S>> {
    graph.check_params(params)?;
    check_marginals(graph, marginals)?;
    let layout = ParamLayout::of(params);
    let mut values = vec![S::zero(); layout.step2_len()];
    for (f, table) in marginals.factors.iter().enumerate().take(graph.factor_count()) {
        for (x, &p) in table.iter().enumerate() {
            if p != S::zero() {
                add_step2(graph, &layout, params, f, x, p, &mut values);
            }
        }
    }
    Ok(SufficientStatistics { values })
}

/// `φ(q0) − E[φ]` over `[α | β | ξ | λ | η]`, the decay rates fixed.
///
/// `marginals` must come from sum-product (or enumeration) under `params` on
/// the graph whose partition function defines the likelihood.
pub fn gradient_step2<S: Scalar>(
    graph: &FactorGraph<S>,
    q0: &Assignment,
    params: &ParameterSet<S>,
    marginals: &MarginalTable<S>,
) -> Result<Vec<S>> {
    let observed = sufficient_statistics(graph, q0, params)?;
    let expected = expected_statistics(graph, params, marginals)?;
    Ok(observed.values.iter().zip(&expected.values).map(|(a, b)| *a - *b).collect())
}

/// Gradient of the same log-likelihood with respect to `[δ | τ]`.
pub fn gradient_step3<S: Scalar>(
    graph: &FactorGraph<S>,
    q0: &Assignment,
    params: &ParameterSet<S>,
    marginals: &MarginalTable<S>,
) -> Result<Vec<S>> {
    check_assignment(graph, q0, params)?;
    check_marginals(graph, marginals)?;
    let mut grad = vec![S::zero(); 2 * params.user_count()];
    for f in 0..graph.factor_count() {
        let kind = graph.factor(f).kind;
        if !matches!(kind, FactorKind::Temporal | FactorKind::StableInfluence) {
            continue;
        }
        let (_, x0) = graph.factor_states(f, q0);
        add_step3(graph, params, f, x0, S::one(), &mut grad);
        for (x, &p) in marginals.factors[f].iter().enumerate() {
            if p != S::zero() {
                add_step3(graph, params, f, x, -p, &mut grad);
            }
        }
    }
    Ok(grad)
}

/// Number of factors feeding each step-2 coordinate; used to scale steps.
pub fn term_counts_step2<S: Scalar>(graph: &FactorGraph<S>, params: &ParameterSet<S>) -> Vec<usize> {
    let layout = ParamLayout::of(params);
    let mut counts = vec![0; layout.step2_len()];
    for factor in graph.factors() {
        let o = factor.owner;
        match factor.kind {
            FactorKind::ImageUser => counts[layout.beta(o)] += 1,
            FactorKind::Visual => counts[..FEATURE_DIM].iter_mut().for_each(|c| *c += 1),
            FactorKind::Temporal => counts[layout.xi(o)] += 1,
            FactorKind::Influence => counts[layout.lambda(o)] += 1,
            FactorKind::StableInfluence => counts[layout.eta(o)] += 1,
        }
    }
    counts
}

pub fn term_counts_step3<S: Scalar>(graph: &FactorGraph<S>, params: &ParameterSet<S>) -> Vec<usize> {
    let n = params.user_count();
    let mut counts = vec![0; 2 * n];
    for factor in graph.factors() {
        match factor.kind {
            FactorKind::Temporal => counts[factor.owner] += 1,
            FactorKind::StableInfluence => counts[n + factor.owner] += 1,
            _ => {}
        }
    }
    counts
}

/// Bethe approximation of `log Z` from sum-product marginals.
pub fn bethe_log_partition<S: Scalar>(graph: &FactorGraph<S>, params: &ParameterSet<S>, marginals: &MarginalTable<S>) -> S {
    let xlogx = |p: S| if p > S::zero() { p * p.ln() } else { S::zero() };
    let mut total = S::zero();
    for f in 0..graph.factor_count() {
        let table = graph.log_table(f, params);
        for (&p, &t) in marginals.factors[f].iter().zip(&table) {
            if p > S::zero() {
                total += p * t - xlogx(p);
            }
        }
    }
    for (v, b) in marginals.variables.iter().enumerate() {
        let degree = graph.var_factors(v).len();
        if degree == 0 {
            // A variable outside every factor contributes its own entropy.
            if graph.variable(v).clamp.is_none() {
                total += S::of(2f64.ln());
            }
            continue;
        }
        let excess = S::of(degree as f64 - 1.0);
        total += excess * (xlogx(b[0]) + xlogx(b[1]));
    }
    total
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::graph::{random_graph, GraphBuilder, RandomGraphConfig, UserParams, VariableId};
    use crate::inference::{brute_force_marginals, log_partition, sum_product, BpConfig, BRUTE_FORCE_LIMIT};
    use crate::network::{ImageId, UserId};

    fn random_assignment<R: Rng>(rng: &mut R, graph: &FactorGraph<f64>) -> Assignment {
        let states = graph
            .variables()
            .iter()
            .map(|v| v.clamp.unwrap_or_else(|| rng.random_range(0..2)))
            .collect();
        Assignment::from_states(graph, states).unwrap()
    }

    fn log_likelihood(graph: &FactorGraph<f64>, target: &FactorGraph<f64>, q0: &Assignment, p: &ParameterSet<f64>) -> f64 {
        objective(graph, q0, p).unwrap() - log_partition(target, p, BRUTE_FORCE_LIMIT).unwrap()
    }

    fn close(analytic: f64, numeric: f64) -> bool {
        if analytic.abs() < 1e-8 && numeric.abs() < 1e-8 {
            return (analytic - numeric).abs() < 1e-8;
        }
        (analytic - numeric).abs() <= 1e-4 * analytic.abs().max(numeric.abs())
    }

    #[test]
    fn identity_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cfg = RandomGraphConfig { extra_factors: 3, clamp_probability: 0.2, ..Default::default() };
        for _ in 0..200 {
            let (g, p) = random_graph::<f64, _>(&mut rng, &cfg);
            let q = random_assignment(&mut rng, &g);
            let phi = sufficient_statistics(&g, &q, &p).unwrap();
            assert!((phi.dot(&theta_step2(&p)) - objective(&g, &q, &p).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_graph_has_zero_statistics() {
        let g = GraphBuilder::<f64>::new(vec![UserId(0)]).build();
        let p = ParameterSet::uniform([UserId(0)], [0.0; FEATURE_DIM], UserParams::initial());
        let phi = sufficient_statistics(&g, &Assignment::lowest(&g), &p).unwrap();
        assert!(phi.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn theta_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (_, p) = random_graph::<f64, _>(&mut rng, &RandomGraphConfig::default());
        assert_eq!(with_theta_step2(&p, &theta_step2(&p)), p);
        assert_eq!(with_theta_step3(&p, &theta_step3(&p)), p);
    }

    #[test]
    fn single_image_gradient_is_logistic() {
        let mut b = GraphBuilder::new(vec![UserId(0)]);
        let v = b.add_variable(VariableId::Image(ImageId(1)), None).unwrap();
        let x: [f64; FEATURE_DIM] = std::array::from_fn(|j| 0.1 * j as f64 - 0.5);
        let row = b.add_feature(x);
        b.add_factor(FactorKind::Visual, &[v], 0, 0, Some(row)).unwrap();
        let g = b.build();
        let alpha: [f64; FEATURE_DIM] = std::array::from_fn(|j| 0.05 * j as f64);
        let p = ParameterSet::uniform([UserId(0)], alpha, UserParams::initial());
        let q0 = Assignment::from_states(&g, vec![1]).unwrap();
        let (m, _) = brute_force_marginals(&g, &p, BRUTE_FORCE_LIMIT).unwrap();
        let grad = gradient_step2(&g, &q0, &p, &m).unwrap();
        let s: f64 = alpha.iter().zip(&x).map(|(a, b)| a * b).sum();
        let ey = s.tanh();
        for j in 0..FEATURE_DIM {
            assert!((grad[j] - x[j] * (1.0 - ey)).abs() < 1e-12);
        }
    }

    #[test]
    fn fully_clamped_conditional_gradient_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = RandomGraphConfig { clamp_probability: 1.0, ..Default::default() };
        let (g, p) = random_graph::<f64, _>(&mut rng, &cfg);
        let q0 = Assignment::lowest(&g);
        let (m, _) = brute_force_marginals(&g, &p, BRUTE_FORCE_LIMIT).unwrap();
        assert!(gradient_step2(&g, &q0, &p, &m).unwrap().iter().all(|v| v.abs() < 1e-12));
        assert!(gradient_step3(&g, &q0, &p, &m).unwrap().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn missing_factor_marginal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (g, p) = random_graph::<f64, _>(&mut rng, &RandomGraphConfig::default());
        let (mut m, _) = brute_force_marginals(&g, &p, BRUTE_FORCE_LIMIT).unwrap();
        m.factors.pop();
        let q0 = Assignment::lowest(&g);
        assert!(matches!(gradient_step2(&g, &q0, &p, &m), Err(Error::MissingFactorMarginal(_))));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let h = 1e-5;
        for i in 0..30 {
            let cfg = RandomGraphConfig {
                max_variables: 10,
                extra_factors: i % 3,
                clamp_probability: 0.3,
                ..Default::default()
            };
            let (g, p) = random_graph::<f64, _>(&mut rng, &cfg);
            let q0 = random_assignment(&mut rng, &g);
            for target in [g.released(), g.clone()] {
                let (m, _) = brute_force_marginals(&target, &p, BRUTE_FORCE_LIMIT).unwrap();
                let g2 = gradient_step2(&g, &q0, &p, &m).unwrap();
                let theta = theta_step2(&p);
                for k in 0..theta.len() {
                    let mut up = theta.clone();
                    up[k] += h;
                    let mut down = theta.clone();
                    down[k] -= h;
                    // Keep the central difference away from the projection boundary.
                    if down[k] < 0.0 && k >= FEATURE_DIM {
                        continue;
                    }
                    let numeric = (log_likelihood(&g, &target, &q0, &with_theta_step2(&p, &up))
                        - log_likelihood(&g, &target, &q0, &with_theta_step2(&p, &down)))
                        / (2.0 * h);
                    assert!(close(g2[k], numeric), "step2 coord {k}: {} vs {numeric}", g2[k]);
                }
                let g3 = gradient_step3(&g, &q0, &p, &m).unwrap();
                let theta = theta_step3(&p);
                for k in 0..theta.len() {
                    if theta[k] < h {
                        continue;
                    }
                    let mut up = theta.clone();
                    up[k] += h;
                    let mut down = theta.clone();
                    down[k] -= h;
                    let numeric = (log_likelihood(&g, &target, &q0, &with_theta_step3(&p, &up))
                        - log_likelihood(&g, &target, &q0, &with_theta_step3(&p, &down)))
                        / (2.0 * h);
                    assert!(close(g3[k], numeric), "step3 coord {k}: {} vs {numeric}", g3[k]);
                }
            }
        }
    }

    #[test]
    fn bethe_is_exact_on_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cfg = RandomGraphConfig { clamp_probability: 0.2, ..Default::default() };
        for _ in 0..20 {
            let (g, p) = random_graph::<f64, _>(&mut rng, &cfg);
            let bp = BpConfig { tolerance: 1e-12, max_iterations: 300, ..Default::default() };
            let (m, _) = sum_product(&g, &p, &bp);
            let exact = log_partition(&g, &p, BRUTE_FORCE_LIMIT).unwrap();
            assert!((bethe_log_partition(&g, &p, &m) - exact).abs() < 1e-8);
        }
    }
}
