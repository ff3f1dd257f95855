use std::collections::{BTreeMap, BTreeSet};

use emotion_influence::features::{FeatureVector, FEATURE_DIM};
use emotion_influence::graph::{BuildOptions, FactorKind};
use emotion_influence::learning::{fit, predict, LikelihoodMode, Phase, TrainConfig};
use emotion_influence::network::{BinaryLabel, EmotionCategory, ImageId, ImageRecord, NetworkBuilder, TimeVaryingNetwork, UserId};

const H: EmotionCategory = EmotionCategory::Happiness;

fn features(positive: bool, jitter: f64) -> FeatureVector {
    let mut x = [0.0; FEATURE_DIM];
    for (i, v) in x.iter_mut().enumerate() {
        *v = if positive { 0.6 } else { -0.6 } + jitter * ((i % 3) as f64 - 1.0);
    }
    FeatureVector(x)
}

/// Three users in a path, three slices, two images per active user-slice.
/// Label `None` leaves an image unlabeled.
fn small_network(with_edges: bool) -> TimeVaryingNetwork {
    let mut b = NetworkBuilder::new(3);
    let mut id = 0;
    for u in 0..3 {
        b.add_user(UserId(u));
    }
    for t in 0..3 {
        if with_edges {
            b.add_edge(UserId(0), UserId(1), t);
            b.add_edge(UserId(1), UserId(2), t);
        }
        for u in 0..3u32 {
            if (u + t as u32) % 3 == 2 {
                continue;
            }
            for k in 0..2 {
                id += 1;
                let positive = (u + k) % 2 == 0;
                let labels: BTreeMap<_, _> = if id % 3 == 0 {
                    BTreeMap::new()
                } else {
                    [(H, BinaryLabel::from_positive(positive))].into_iter().collect()
                };
                b.add_image(ImageRecord {
                    id: ImageId(id),
                    owner: UserId(u),
                    slice: t,
                    features: features(positive, 0.05 * k as f64),
                    labels,
                });
            }
        }
    }
    b.build().unwrap()
}

fn quick() -> TrainConfig {
    TrainConfig {
        max_outer: 4,
        ..Default::default()
    }
}

#[test]
fn fit_is_deterministic() {
    let net = small_network(true);
    let a = fit::<f64>(&net, H, &quick(), &BuildOptions::default()).unwrap();
    let b = fit::<f64>(&net, H, &quick(), &BuildOptions::default()).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.trace, b.trace);
    assert!(a.params.is_valid());
}

#[test]
fn frozen_decay_keeps_initial_values() {
    let net = small_network(true);
    let cfg = TrainConfig {
        freeze_decay: true,
        ..quick()
    };
    let res = fit::<f64>(&net, H, &cfg, &BuildOptions::default()).unwrap();
    for p in res.params.user_params() {
        assert_eq!((p.delta, p.tau), (1.0, 1.0));
    }
    assert!(res.trace.iter().all(|r| r.phase != Phase::Step3));
}

#[test]
fn accepted_steps_never_lower_the_exact_likelihood() {
    let net = small_network(true);
    for likelihood in [LikelihoodMode::Joint, LikelihoodMode::Conditional] {
        let cfg = TrainConfig { likelihood, ..quick() };
        let res = fit::<f64>(&net, H, &cfg, &BuildOptions::default()).unwrap();
        assert!(res.graph.unclamped_count() <= cfg.exact_limit);
        for pair in res.trace.windows(2) {
            if pair[0].outer == pair[1].outer && pair[1].phase != Phase::Decode && pair[0].phase != Phase::Decode {
                assert!(pair[1].objective >= pair[0].objective - 1e-9, "{pair:?}");
            }
        }
        if likelihood == LikelihoodMode::Conditional {
            assert!(res.trace.iter().all(|r| r.residual == 0.0));
        }
    }
}

#[test]
fn network_without_edges_has_no_influence() {
    let net = small_network(false);
    let opts = BuildOptions::default();
    let res = fit::<f64>(&net, H, &quick(), &opts).unwrap();
    assert!(res.graph.factors().iter().all(|f| f.kind != FactorKind::Influence));
    let pred = predict(&net, &res.params, H, &opts, &quick()).unwrap();
    assert!(pred.influence.is_empty());
    assert_eq!(pred.images.len(), net.image_count());
}

#[test]
fn clamped_images_keep_their_labels() {
    let net = small_network(true);
    let opts = BuildOptions::default();
    let res = fit::<f64>(&net, H, &quick(), &opts).unwrap();
    let pred = predict(&net, &res.params, H, &opts, &quick()).unwrap();
    for img in net.images() {
        if let Some(l) = img.label(H) {
            let p = pred.images[&img.id];
            assert_eq!(p, if l.is_positive() { 1.0 } else { 0.0 });
            assert_eq!(pred.image_labels[&img.id], l);
        }
    }
}

#[test]
fn held_out_images_follow_their_features() {
    let net = small_network(true);
    let hidden: BTreeSet<ImageId> = net.images().filter(|i| i.label(H).is_some()).map(|i| i.id).step_by(4).collect();
    let opts = BuildOptions { hidden: hidden.clone(), ..Default::default() };
    let cfg = TrainConfig { max_outer: 8, ..Default::default() };
    let res = fit::<f64>(&net, H, &cfg, &opts).unwrap();
    let pred = predict(&net, &res.params, H, &opts, &cfg).unwrap();
    for img in net.images().filter(|i| hidden.contains(&i.id)) {
        let p = pred.images[&img.id];
        assert!(p > 0.0 && p < 1.0);
        assert_eq!(p > 0.5, img.label(H).unwrap().is_positive(), "image {} p={p}", img.id);
    }
}

#[test]
fn identical_images_get_identical_predictions() {
    let mut b = NetworkBuilder::new(1);
    b.add_user(UserId(0));
    for id in 1..=4u64 {
        let labels = if id <= 2 {
            [(H, BinaryLabel::from_positive(id == 1))].into_iter().collect()
        } else {
            BTreeMap::new()
        };
        let positive = id == 1;
        b.add_image(ImageRecord {
            id: ImageId(id),
            owner: UserId(0),
            slice: 0,
            features: if id <= 2 { features(positive, 0.0) } else { features(true, 0.1) },
            labels,
        });
    }
    let net = b.build().unwrap();
    let opts = BuildOptions::default();
    let res = fit::<f64>(&net, H, &quick(), &opts).unwrap();
    let pred = predict(&net, &res.params, H, &opts, &quick()).unwrap();
    assert_eq!(pred.images[&ImageId(3)], pred.images[&ImageId(4)]);
}

#[test]
fn single_precision_fit_tracks_double() {
    let net = small_network(true);
    let a = fit::<f64>(&net, H, &quick(), &BuildOptions::default()).unwrap();
    let b = fit::<f32>(&net, H, &quick(), &BuildOptions::default()).unwrap();
    let (pa, pb) = (a.params.user_params(), b.params.user_params());
    for (x, y) in pa.iter().zip(pb) {
        assert!((x.lambda - y.lambda as f64).abs() < 1e-2, "{x:?} {y:?}");
    }
}
