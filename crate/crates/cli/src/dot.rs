//! Ego-network export in the Graphviz DOT language.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use anyhow::bail;
use emotion_influence::network::{EmotionCategory, TimeSlice, TimeVaryingNetwork, UserId};

use crate::predictions::PredictionFile;

/// Pen width of an edge of weight 1.
pub const PEN_SCALE: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct DotOptions {
    pub user: UserId,
    pub category: EmotionCategory,
    /// Smallest mean influence weight drawn as an edge.
    pub min_weight: f64,
    /// Number of trailing slices shown.
    pub slices: usize,
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// The user and their friends over the trailing slices. Node labels list the
/// predicted emotion and upload count per slice; an edge `a -> b` is drawn
/// when the mean weight of `a` influencing `b` reaches `min_weight`, with pen
/// width proportional to that weight.
pub fn export_dot(pred: &PredictionFile, net: &TimeVaryingNetwork, opts: &DotOptions) -> anyhow::Result<String> {
    if !net.users().contains(&opts.user) {
        bail!("unknown user {}", opts.user);
    }
    let end = net.horizon();
    let window: Vec<TimeSlice> = (end.saturating_sub(opts.slices)..end).collect();
    let mut members: BTreeSet<UserId> = BTreeSet::from([opts.user]);
    for &t in &window {
        members.extend(net.friends(opts.user, t));
    }

    let mut weights: BTreeMap<(UserId, UserId), Vec<f64>> = BTreeMap::new();
    for (&(src, dst, t), w) in &pred.influence {
        if !window.contains(&t) || (src != opts.user && dst != opts.user) {
            continue;
        }
        if let Some(v) = w.get(&opts.category) {
            weights.entry((src, dst)).or_default().push(*v);
        }
    }

    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", quote(&format!("ego_{}", opts.user)));
    let _ = writeln!(out, "  label = {};", quote(&format!("{} influence around user {}", opts.category, opts.user)));
    out.push_str("  node [shape = box];\n");
    for &u in &members {
        let mut label = format!("user {u}");
        for &t in &window {
            let n = net.images_at(u, t).len();
            if n == 0 {
                continue;
            }
            let emotion = pred.user_emotion(u, t).map_or("neutral", |c| c.name());
            let _ = write!(label, "\nt{t}: {emotion} ({n})");
        }
        let style = if u == opts.user { ", style = bold" } else { "" };
        let _ = writeln!(out, "  {} [label = {}{style}];", quote(&format!("u{u}")), quote(&label));
    }
    for ((src, dst), ws) in &weights {
        let w = ws.iter().sum::<f64>() / ws.len() as f64;
        if w < opts.min_weight {
            continue;
        }
        let _ = writeln!(
            out,
            "  {} -> {} [penwidth = {:.3}, label = {}];",
            quote(&format!("u{src}")),
            quote(&format!("u{dst}")),
            PEN_SCALE * w,
            quote(&format!("{w:.2}"))
        );
    }
    out.push_str("}\n");
    Ok(out)
}
