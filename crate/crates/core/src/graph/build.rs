use std::collections::{BTreeMap, BTreeSet};

use super::{FactorGraph, FactorKind, GraphBuilder, VariableId};
use crate::features::FEATURE_DIM;
use crate::network::{EmotionCategory, ImageId, TimeSlice, TimeVaryingNetwork, UserId};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildOptions {
    /// Largest slice gap linked by temporal factors.
    pub window: usize,
    /// Factor kinds left out of the graph. Dropping f4 also removes the
    /// influence variables and their f5 factors.
    pub drop: BTreeSet<FactorKind>,
    /// Labeled images whose labels are withheld (left unclamped).
    pub hidden: BTreeSet<ImageId>,
    /// When false, no image label is clamped.
    pub clamp_labels: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            window: 1,
            drop: BTreeSet::new(),
            hidden: BTreeSet::new(),
            clamp_labels: true,
        }
    }
}

impl BuildOptions {
    pub fn with_window(window: usize) -> Self {
        BuildOptions {
            window,
            ..Default::default()
        }
    }

    fn keeps(&self, kind: FactorKind) -> bool {
        !self.drop.contains(&kind)
    }
}

/// Builds the factor graph of one emotion category.
///
/// Emotion variables exist for every image and for every `(user, slice)` in
/// which the user uploaded. Influence variables exist for each direction of a
/// friendship edge at slices where both endpoints have an emotion variable.
pub fn build_graph<S: Scalar>(net: &TimeVaryingNetwork, category: EmotionCategory, opts: &BuildOptions) -> FactorGraph<S> {
    assert!(opts.window >= 1, "temporal window must be at least 1");
    let users: Vec<UserId> = net.users().iter().copied().collect();
    let owner_of: BTreeMap<UserId, usize> = users.iter().enumerate().map(|(i, u)| (*u, i)).collect();
    let mut b = GraphBuilder::<S>::new(users);
    let add = "graph construction only adds consistent variables and factors";

    let mut user_var: BTreeMap<(UserId, TimeSlice), usize> = BTreeMap::new();
    for ((user, t), images) in net.image_groups() {
        if images.is_empty() {
            continue;
        }
        let owner = owner_of[&user];
        let uv = b.add_variable(VariableId::User(user, t), None).expect(add);
        user_var.insert((user, t), uv);
        for img in images {
            let clamp = img
                .label(category)
                .filter(|_| opts.clamp_labels && !opts.hidden.contains(&img.id))
                .map(|l| l.value());
            let iv = b.add_variable(VariableId::Image(img.id), clamp).expect(add);
            if opts.keeps(FactorKind::ImageUser) {
                b.add_factor(FactorKind::ImageUser, &[iv, uv], owner, 0, None).expect(add);
            }
            if opts.keeps(FactorKind::Visual) {
                let mut x = [S::zero(); FEATURE_DIM];
                for (dst, src) in x.iter_mut().zip(img.features.as_slice()) {
                    *dst = S::of(*src);
                }
                let row = b.add_feature(x);
                b.add_factor(FactorKind::Visual, &[iv], owner, 0, Some(row)).expect(add);
            }
        }
    }

    if opts.keeps(FactorKind::Temporal) {
        for (&(user, t), &cur) in &user_var {
            for gap in 1..=opts.window.min(t) {
                if let Some(&prev) = user_var.get(&(user, t - gap)) {
                    b.add_factor(FactorKind::Temporal, &[prev, cur], owner_of[&user], gap, None).expect(add);
                }
            }
        }
    }

    if opts.keeps(FactorKind::Influence) {
        let mut mu_var: BTreeMap<(UserId, UserId, TimeSlice), usize> = BTreeMap::new();
        for t in 0..net.horizon() {
            for (a, c) in net.edges_at(t) {
                let (Some(&ya), Some(&yc)) = (user_var.get(&(a, t)), user_var.get(&(c, t))) else {
                    continue;
                };
                for (src, dst, ys, yd) in [(a, c, ya, yc), (c, a, yc, ya)] {
                    let mv = b
                        .add_variable(VariableId::Influence { src, dst, slice: t }, None)
                        .expect(add);
                    mu_var.insert((src, dst, t), mv);
                    b.add_factor(FactorKind::Influence, &[ys, yd, mv], owner_of[&src], 0, None).expect(add);
                }
            }
        }
        if opts.keeps(FactorKind::StableInfluence) {
            for (&(src, dst, t), &cur) in &mu_var {
                for gap in 1..=opts.window.min(t) {
                    if let Some(&prev) = mu_var.get(&(src, dst, t - gap)) {
                        b.add_factor(FactorKind::StableInfluence, &[prev, cur], owner_of[&src], gap, None)
                            .expect(add);
                    }
                }
            }
        }
    }

    b.build()
}
