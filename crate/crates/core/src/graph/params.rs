use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FEATURE_DIM;
use crate::network::{EmotionCategory, UserId};
use crate::scalar::Scalar;

/// Per-user weights of the image, temporal and influence factors.
///
/// Every entry is a penalty weight and is kept non-negative: construction and
/// [`ParameterSet::set_user`] project negative inputs to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserParams<S> {
    pub beta: S,
    pub xi: S,
    pub delta: S,
    pub lambda: S,
    pub eta: S,
    pub tau: S,
}

impl<S: Scalar> UserParams<S> {
    pub fn new(beta: S, xi: S, delta: S, lambda: S, eta: S, tau: S) -> Self {
        UserParams {
            beta,
            xi,
            delta,
            lambda,
            eta,
            tau,
        }
        .projected()
    }

    /// The starting point of alternating learning.
    pub fn initial() -> Self {
        UserParams::new(S::of(0.6), S::of(0.5), S::of(1.0), S::of(0.1), S::of(0.5), S::of(1.0))
    }

    pub fn zero() -> Self {
        UserParams::new(S::zero(), S::zero(), S::zero(), S::zero(), S::zero(), S::zero())
    }

    pub fn projected(self) -> Self {
        let p = |x: S| if x > S::zero() { x } else { S::zero() };
        UserParams {
            beta: p(self.beta),
            xi: p(self.xi),
            delta: p(self.delta),
            lambda: p(self.lambda),
            eta: p(self.eta),
            tau: p(self.tau),
        }
    }

    pub fn cast<T: Scalar>(&self) -> UserParams<T> {
        let c = |x: S| T::of(x.as_f64());
        UserParams::new(c(self.beta), c(self.xi), c(self.delta), c(self.lambda), c(self.eta), c(self.tau))
    }
}

/// Shared visual weights plus tied per-user factor weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet<S> {
    pub alpha: [S; FEATURE_DIM],
    users: Vec<UserId>,
    per_user: Vec<UserParams<S>>,
}

impl<S: Scalar> ParameterSet<S> {
    pub fn uniform(users: impl IntoIterator<Item = UserId>, alpha: [S; FEATURE_DIM], user: UserParams<S>) -> Self {
        let mut users: Vec<UserId> = users.into_iter().collect();
        users.sort_unstable();
        users.dedup();
        let per_user = vec![user.projected(); users.len()];
        ParameterSet { alpha, users, per_user }
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn user_index(&self, user: UserId) -> Option<usize> {
        self.users.binary_search(&user).ok()
    }

    pub fn user(&self, idx: usize) -> &UserParams<S> {
        &self.per_user[idx]
    }

    pub fn user_params(&self) -> &[UserParams<S>] {
        &self.per_user
    }

    pub fn set_user(&mut self, idx: usize, p: UserParams<S>) {
        self.per_user[idx] = p.projected();
    }

    pub fn cast<T: Scalar>(&self) -> ParameterSet<T> {
        ParameterSet {
            alpha: self.alpha.map(|a| T::of(a.as_f64())),
            users: self.users.clone(),
            per_user: self.per_user.iter().map(UserParams::cast).collect(),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.alpha.iter().all(|a| a.is_finite())
            && self.per_user.iter().all(|p| {
                [p.beta, p.xi, p.delta, p.lambda, p.eta, p.tau]
                    .iter()
                    .all(|x| x.is_finite() && *x >= S::zero())
            })
    }
}

/// On-disk form of a trained parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDocument {
    pub category: EmotionCategory,
    pub window: usize,
    pub iterations: usize,
    pub alpha: Vec<f64>,
    pub beta: BTreeMap<UserId, f64>,
    pub xi: BTreeMap<UserId, f64>,
    pub delta: BTreeMap<UserId, f64>,
    pub lambda: BTreeMap<UserId, f64>,
    pub eta: BTreeMap<UserId, f64>,
    pub tau: BTreeMap<UserId, f64>,
}

impl ParamsDocument {
    pub fn from_params<S: Scalar>(params: &ParameterSet<S>, category: EmotionCategory, window: usize, iterations: usize) -> Self {
        let map = |f: fn(&UserParams<S>) -> S| -> BTreeMap<UserId, f64> {
            params.users.iter().zip(&params.per_user).map(|(u, p)| (*u, f(p).as_f64())).collect()
        };
        ParamsDocument {
            category,
            window,
            iterations,
            alpha: params.alpha.iter().map(|a| a.as_f64()).collect(),
            beta: map(|p| p.beta),
            xi: map(|p| p.xi),
            delta: map(|p| p.delta),
            lambda: map(|p| p.lambda),
            eta: map(|p| p.eta),
            tau: map(|p| p.tau),
        }
    }

    pub fn to_params<S: Scalar>(&self) -> Result<ParameterSet<S>> {
        if self.alpha.len() != FEATURE_DIM {
            return Err(Error::Dimension {
                expected: FEATURE_DIM,
                got: self.alpha.len(),
            });
        }
        let users: Vec<UserId> = self.beta.keys().copied().collect();
        let maps = [&self.xi, &self.delta, &self.lambda, &self.eta, &self.tau];
        if maps.iter().any(|m| !m.keys().eq(users.iter())) {
            return Err(Error::Invariant("per-user parameter maps cover different users".into()));
        }
        let mut alpha = [S::zero(); FEATURE_DIM];
        for (a, v) in alpha.iter_mut().zip(&self.alpha) {
            *a = S::of(*v);
        }
        let per_user = users
            .iter()
            .map(|u| {
                UserParams::new(
                    S::of(self.beta[u]),
                    S::of(self.xi[u]),
                    S::of(self.delta[u]),
                    S::of(self.lambda[u]),
                    S::of(self.eta[u]),
                    S::of(self.tau[u]),
                )
            })
            .collect();
        let params = ParameterSet { alpha, users, per_user };
        if !params.is_valid() {
            return Err(Error::Invariant("parameters must be finite".into()));
        }
        Ok(params)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("params serialize");
        s.push('\n');
        s
    }
}
