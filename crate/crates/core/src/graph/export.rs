//! Debug exports: per-kind counts as JSON and a line-oriented adjacency dump.
//!
//! Adjacency format, one record per line:
//!
//! ```text
//! graph v1 variables=<n> factors=<m>
//! var <index> <id> <clamp|->
//! factor <index> <kind> owner=<user> gap=<gap> vars=<i>[,<j>[,<k>]]
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{FactorGraph, FactorKind, VariableId};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub image_variables: usize,
    pub user_variables: usize,
    pub influence_variables: usize,
    pub clamped: usize,
    pub factors: BTreeMap<String, usize>,
}

impl GraphStats {
    pub fn of<S: Scalar>(graph: &FactorGraph<S>) -> Self {
        let mut stats = GraphStats {
            image_variables: 0,
            user_variables: 0,
            influence_variables: 0,
            clamped: 0,
            factors: FactorKind::ALL.iter().map(|k| (k.short_name().to_string(), 0)).collect(),
        };
        for v in graph.variables() {
            match v.id {
                VariableId::Image(_) => stats.image_variables += 1,
                VariableId::User(..) => stats.user_variables += 1,
                VariableId::Influence { .. } => stats.influence_variables += 1,
            }
            stats.clamped += usize::from(v.clamp.is_some());
        }
        for f in graph.factors() {
            *stats.factors.get_mut(f.kind.short_name()).expect("all kinds present") += 1;
        }
        stats
    }
}

pub fn write_adjacency<S: Scalar>(graph: &FactorGraph<S>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "graph v1 variables={} factors={}", graph.variable_count(), graph.factor_count());
    for (i, v) in graph.variables().iter().enumerate() {
        let clamp = v.clamp.map_or_else(|| "-".to_string(), |s| v.domain().value(s).to_string());
        let _ = writeln!(out, "var {i} {} {clamp}", v.id);
    }
    for (i, f) in graph.factors().iter().enumerate() {
        let vars: Vec<String> = f.vars.iter().map(usize::to_string).collect();
        let _ = writeln!(
            out,
            "factor {i} {} owner={} gap={} vars={}",
            f.kind,
            graph.users()[f.owner],
            f.gap,
            vars.join(",")
        );
    }
    out
}
