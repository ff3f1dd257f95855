use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use emotion_influence::analysis::{
    self, holdout_split, ContributionTable, Metrics, MetricsReport, Neighborhood, SamplingConfig, SliceSelection, Variant,
};
use emotion_influence::features::{extract_features, read_ppm_file, FEATURE_DIM};
use emotion_influence::graph::{BuildOptions, ParamsDocument};
use emotion_influence::learning::{fit, predict, trace_to_csv, LikelihoodMode, Prediction, TrainConfig};
use emotion_influence::network::{
    load_network, write_image_fragment, write_network, BinaryLabel, EmotionCategory, ImageId, ImageRecord, SliceClock,
    TimeVaryingNetwork, UserId,
};
use emotion_influence::synth::{generate, SynthConfig};
use rayon::prelude::*;
use serde::Deserialize;

use crate::args::*;
use crate::dot::{export_dot, DotOptions};
use crate::manifest::{dir_of, RunManifest};
use crate::predictions::PredictionFile;
use crate::split::SplitFile;
use crate::{usage, Outcome};

struct Context_ {
    seed: u64,
    seed_given: bool,
    config: TrainConfig,
}

pub(crate) fn dispatch(cli: Cli) -> anyhow::Result<Outcome> {
    if cli.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global();
    let config = match &cli.config {
        Some(path) => {
            let text = read(path)?;
            let cfg: TrainConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            cfg.validate().map_err(|e| usage(format!("{}: {e}", path.display())))?;
            cfg
        }
        None => TrainConfig::default(),
    };
    let ctx = Context_ {
        seed: cli.seed.unwrap_or(0),
        seed_given: cli.seed.is_some(),
        config,
    };
    match cli.command {
        Command::Extract(a) => extract(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Predict(a) => predict_cmd(&ctx, a),
        Command::Analyze { command } => match command {
            AnalyzeCommand::Sampling(a) => sampling(&ctx, a),
            AnalyzeCommand::Temporal(a) => temporal(&ctx, a),
            AnalyzeCommand::Social(a) => social(&ctx, a),
            AnalyzeCommand::Cca(a) => cca(&ctx, a),
            AnalyzeCommand::Evaluate(a) => evaluate(&ctx, a),
            AnalyzeCommand::Ablate(a) => ablate(&ctx, a),
        },
        Command::Synth(a) => synth(&ctx, a),
        Command::ExportDot(a) => export(&ctx, a),
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load(path: &Path, m: &mut RunManifest) -> anyhow::Result<TimeVaryingNetwork> {
    m.input(path);
    load_network(path).with_context(|| format!("loading {}", path.display()))
}

fn category(name: &str) -> anyhow::Result<EmotionCategory> {
    name.parse().map_err(|e| usage(format!("{e}")))
}

/// `all` expands to every category with at least one label.
fn categories(name: &str, net: &TimeVaryingNetwork) -> anyhow::Result<Vec<EmotionCategory>> {
    if name != "all" {
        return Ok(vec![category(name)?]);
    }
    let present: BTreeSet<EmotionCategory> = net.images().flat_map(|i| i.labels.keys().copied()).collect();
    if present.is_empty() {
        bail!("the network carries no labels");
    }
    Ok(present.into_iter().collect())
}

fn fraction(v: f64, flag: &str) -> anyhow::Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(usage(format!("{flag} must lie in [0, 1], got {v}")));
    }
    Ok(v)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImageEntry {
    file: PathBuf,
    id: ImageId,
    owner: UserId,
    #[serde(default)]
    t: Option<usize>,
    #[serde(default)]
    time: Option<i64>,
    #[serde(default)]
    labels: BTreeMap<EmotionCategory, BinaryLabel>,
}

fn entry_from_name(path: &Path) -> Option<ImageEntry> {
    let stem = path.file_stem()?.to_str()?;
    let parts: Vec<&str> = stem.split('_').collect();
    let [owner, t, id] = parts[..] else { return None };
    Some(ImageEntry {
        file: path.file_name()?.into(),
        id: ImageId(id.parse().ok()?),
        owner: UserId(owner.parse().ok()?),
        t: Some(t.parse().ok()?),
        time: None,
        labels: BTreeMap::new(),
    })
}

fn extract(ctx: &Context_, a: ExtractArgs) -> anyhow::Result<Outcome> {
    let started = Instant::now();
    let mut m = RunManifest::new("extract", ctx.seed);
    if a.slice_width <= 0 {
        return Err(usage("--slice-width must be positive"));
    }
    let clock = SliceClock::new(a.origin, a.slice_width);
    let mut failures = Vec::new();
    let mut entries = Vec::new();
    if let Some(path) = &a.manifest {
        m.input(path);
        for (idx, line) in read(path)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<ImageEntry>(line) {
                Ok(e) => entries.push(e),
                Err(e) => failures.push(format!("{}:{}: {e}", path.display(), idx + 1)),
            }
        }
    } else {
        let mut files: Vec<PathBuf> = std::fs::read_dir(&a.images)
            .with_context(|| format!("listing {}", a.images.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "ppm"))
            .collect();
        files.sort();
        for f in files {
            match entry_from_name(&f) {
                Some(e) => entries.push(e),
                None => failures.push(format!("{}: name is not <owner>_<t>_<id>.ppm", f.display())),
            }
        }
    }
    m.input(&a.images);
    let base = m.seed_for("features");
    let results: Vec<Result<ImageRecord, String>> = entries
        .par_iter()
        .map(|e| {
            let path = a.images.join(&e.file);
            let slice = match (e.t, e.time) {
                (Some(t), _) => t,
                (None, Some(secs)) => clock
                    .slice_of(secs)
                    .ok_or_else(|| format!("{}: time {secs} precedes the origin", path.display()))?,
                (None, None) => return Err(format!("{}: neither t nor time given", path.display())),
            };
            let img = read_ppm_file(&path).map_err(|err| format!("{}: {err}", path.display()))?;
            Ok(ImageRecord {
                id: e.id,
                owner: e.owner,
                slice,
                features: extract_features(&img, crate::seeds::derive(base, &e.id.to_string())),
                labels: e.labels.clone(),
            })
        })
        .collect();
    let mut records = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(msg) => failures.push(msg),
        }
    }
    for f in &failures {
        log::warn!("skipped {f}");
    }
    m.write(&a.out, &write_image_fragment(&records))?;
    m.config = serde_json::json!({ "origin": a.origin, "slice_width": a.slice_width, "feature_dim": FEATURE_DIM });
    m.failures = failures;
    m.save(&dir_of(&a.out), started)?;
    Ok(if m.failures.is_empty() { Outcome::Complete } else { Outcome::Partial })
}

fn train(ctx: &Context_, a: TrainArgs) -> anyhow::Result<Outcome> {
    let started = Instant::now();
    let mut m = RunManifest::new("train", ctx.seed);
    let net = load(&a.network, &mut m)?;
    let cats = categories(&a.category, &net)?;
    let frac = fraction(a.split_frac, "--split-frac")?;
    if a.window == 0 {
        return Err(usage("--window must be at least 1"));
    }
    let mut config = ctx.config.clone();
    if let Some(n) = a.max_iter {
        config.max_outer = n;
    }
    config.freeze_decay |= a.freeze_decay;
    if let Some(l) = a.likelihood {
        config.likelihood = match l {
            Likelihood::Joint => LikelihoodMode::Joint,
            Likelihood::Conditional => LikelihoodMode::Conditional,
        };
    }
    config.validate().map_err(|e| usage(e.to_string()))?;
    let splits: Vec<SplitFile> = cats
        .iter()
        .map(|&c| {
            let seed = a.split_seed.unwrap_or_else(|| m.seed_for(&format!("split/{c}")));
            SplitFile {
                category: c,
                seed,
                fraction: frac,
                hidden: holdout_split(&net, c, frac, seed),
            }
        })
        .collect();
    let fits: Vec<anyhow::Result<(ParamsDocument, String)>> = splits
        .par_iter()
        .map(|s| {
            let opts = BuildOptions {
                window: a.window,
                hidden: s.hidden.clone(),
                ..Default::default()
            };
            let res = fit::<f64>(&net, s.category, &config, &opts).with_context(|| format!("training {}", s.category))?;
            log::info!("{}: {} outer iterations, converged {}", s.category, res.iterations, res.converged);
            Ok((
                ParamsDocument::from_params(&res.params, s.category, a.window, res.iterations),
                trace_to_csv(&res.trace),
            ))
        })
        .collect();
    for (s, r) in splits.iter().zip(fits) {
        let (doc, trace) = r?;
        m.write(&a.out.join(format!("params-{}.json", s.category)), &doc.to_json())?;
        m.write(&a.out.join(format!("trace-{}.csv", s.category)), &trace)?;
        if frac > 0.0 {
            m.write(&a.out.join(format!("split-{}.json", s.category)), &s.to_json())?;
        }
    }
    m.config = serde_json::json!({ "train": config, "window": a.window, "split_frac": frac });
    m.save(&a.out, started)?;
    Ok(Outcome::Complete)
}

fn load_splits(paths: &[PathBuf], m: &mut RunManifest) -> anyhow::Result<BTreeMap<EmotionCategory, SplitFile>> {
    let mut out = BTreeMap::new();
    for p in paths {
        m.input(p);
        let s = SplitFile::parse(&read(p)?).with_context(|| format!("parsing {}", p.display()))?;
        if out.insert(s.category, s).is_some() {
            bail!("two split files for one category");
        }
    }
    Ok(out)
}

fn predict_cmd(ctx: &Context_, a: PredictArgs) -> anyhow::Result<Outcome> {
    let started = Instant::now();
    let mut m = RunManifest::new("predict", ctx.seed);
    let net = load(&a.network, &mut m)?;
    let mut docs = Vec::new();
    for p in &a.params {
        m.input(p);
        let doc: ParamsDocument = serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?;
        if docs.iter().any(|d: &ParamsDocument| d.category == doc.category) {
            bail!("two parameter files for {}", doc.category);
        }
        docs.push(doc);
    }
    let splits = load_splits(&a.splits, &mut m)?;
    if let Some(c) = splits.keys().find(|c| !docs.iter().any(|d| d.category == **c)) {
        bail!("split file for {c} has no matching parameter file");
    }
    let results: Vec<anyhow::Result<Prediction>> = docs
        .par_iter()
        .map(|doc| {
            let params = doc.to_params::<f64>()?;
            let opts = BuildOptions {
                window: doc.window.max(1),
                hidden: splits.get(&doc.category).map(|s| s.hidden.clone()).unwrap_or_default(),
                ..Default::default()
            };
            predict(&net, &params, doc.category, &opts, &ctx.config).with_context(|| format!("predicting {}", doc.category))
        })
        .collect();
    let preds = results.into_iter().collect::<anyhow::Result<Vec<_>>>()?;
    let file = PredictionFile::from_predictions(&net, &preds);
    m.write(&a.out, &file.to_jsonl())?;
    m.config = serde_json::to_value(&ctx.config)?;
    m.save(&dir_of(&a.out), started)?;
    Ok(Outcome::Complete)
}

fn to_json<T: serde::Serialize>(v: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn sampling(ctx: &Context_, a: SamplingArgs) -> anyhow::Result<Outcome> {
    let started = Instant::now();
    let mut m = RunManifest::new("analyze sampling", ctx.seed);
    let net = load(&a.network, &mut m)?;
    let cat = category(&a.category)?;
    if a.deltas.iter().any(|d| *d == 0) {
        return Err(usage("--deltas must be positive"));
    }
    let cfg = SamplingConfig {
        group_size: a.group_size,
        repetitions: a.repetitions,
        deltas: a.deltas.clone(),
        selection: if a.disjoint_windows { SliceSelection::DisjointWindows } else { SliceSelection::DistinctT },
        seed: m.seed_for("sampling"),
    };
    let report = analysis::sampling_test(&net, cat, &cfg);
    m.write(&a.out.join(format!("sampling-{cat}.csv")), &report.to_csv())?;
    m.write(&a.out.join(format!("sampling-{cat}.json")), &to_json(&report)?)?;
    m.config = serde_json::to_value(&cfg)?;
    m.save(&a.out, started)?;
    Ok(Outcome::Complete)
}

fn temporal(ctx: &Context_, a: TemporalArgs) -> anyhow::Result<Outcome> {
    let started = Instant::now();
    let mut m = RunManifest::new("analyze temporal", ctx.seed);
    let net = load(&a.network, &mut m)?;
    let cat = category(&a.category)?;
    let report = analysis::temporal_correlation(&net, cat, a.users, a.max_delta, m.seed_for("temporal"));
    m.write(&a.out.join(format!("temporal-{cat}.csv")), &report.to_csv())?;
    m.write(&a.out.join(format!("temporal-{cat}.json")), &to_json(&report)?)?;
    m.config = serde_json::json!({ "users": a.users, "max_delta": a.max_delta });
    m.save(&a.out, started)?;
    Ok(Outcome::Complete)
}

fn social(ctx: &Context_, a: SocialArgs) -> anyhow::Result<Outcome> {
    let started = Instant::now();
    let mut m = RunManifest::new("analyze social", ctx.seed);
    let net = load(&a.network, &mut m)?;
    let cat = category(&a.category)?;
    let deltas: Vec<usize> = (1..=a.max_delta).collect();
    let seed = m.seed_for("social");
    let friends = analysis::social_correlation(&net, cat, a.users, &deltas, Neighborhood::Friends, seed);
    let random = analysis::social_correlation(&net, cat, a.users, &deltas, Neighborhood::Random, seed);
    let mut csv = String::from("delta,friends,random,friends_users,random_users\n");
    for (f, r) in friends.rows.iter().zip(&random.rows) {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        csv.push_str(&format!("{},{},{},{},{}\n", f.delta, fmt(f.rate), fmt(r.rate), f.users, r.users));
    }
    m.write(&a.out.join(format!("social-{cat}.csv")), &csv)?;
    m.write(
        &a.out.join(format!("social-{cat}.json")),
        &to_json(&serde_json::json!({ "friends": friends, "random": random }))?,
    )?;
    m.config = serde_json::json!({ "users": a.users, "max_delta": a.max_delta });
    m.save(&a.out, started)?;
    Ok(Outcome::Complete)
}

fn cca(ctx: &Context_, a: CcaArgs) -> anyhow::Result<Outcome> {
    let started = Instant::now();
    let mut m = RunManifest::new("analyze cca", ctx.seed);
    let net = load(&a.network, &mut m)?;
    m.input(&a.scales);
    let text = read(&a.scales)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().context("scales file is empty")?.split(',').map(str::trim).collect();
    if header.len() < 2 || header[0] != "id" {
        bail!("scales header must be `id,<scale>...`");
    }
    let features: BTreeMap<ImageId, Vec<f64>> = net.images().map(|i| (i.id, i.features.as_slice().to_vec())).collect();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (idx, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != header.len() {
            bail!("scales row {}: expected {} cells", idx + 2, header.len());
        }
        let id = ImageId(cells[0].parse().with_context(|| format!("scales row {}", idx + 2))?);
        let Some(f) = features.get(&id) else {
            bail!("scales row {}: unknown image {id}", idx + 2);
        };
        let row = cells[1..]
            .iter()
            .map(|c| c.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("scales row {}", idx + 2))?;
        x.push(f.clone());
        y.push(row);
    }
    let result = analysis::cca(&x, &y)?;
    m.write(
        &a.out.join("cca.json"),
        &to_json(&serde_json::json!({ "scales": &header[1..], "rows": x.len(), "result": result }))?,
    )?;
    m.save(&a.out, started)?;
    Ok(Outcome::Complete)
}

fn evaluate(ctx: &Context_, a: EvaluateArgs) -> anyhow::Result<Outcome> {
    let started = Instant::now();
    let mut m = RunManifest::new("analyze evaluate", ctx.seed);
    let net = load(&a.network, &mut m)?;
    m.input(&a.predictions);
    let pred = PredictionFile::parse(&read(&a.predictions)?).with_context(|| format!("parsing {}", a.predictions.display()))?;
    let splits = load_splits(&a.splits, &mut m)?;
    let mut per = BTreeMap::new();
    for &c in &pred.categories {
        let truth: BTreeMap<ImageId, BinaryLabel> = net
            .images()
            .filter(|i| splits.get(&c).is_none_or(|s| s.hidden.contains(&i.id)))
            .filter_map(|i| i.label(c).map(|l| (i.id, l)))
            .collect();
        if truth.is_empty() {
            log::warn!("no labeled images to score for {c}");
            continue;
        }
        per.insert(c, analysis::evaluate(&pred.image_probabilities(c), &truth, a.threshold)?);
    }
    if per.is_empty() {
        bail!("nothing to evaluate");
    }
    let report = MetricsReport::new(per);
    m.write(&a.out.join("metrics.json"), &to_json(&report)?)?;
    m.config = serde_json::json!({ "threshold": a.threshold });
    m.save(&a.out, started)?;
    Ok(Outcome::Complete)
}

fn ablate(ctx: &Context_, a: AblateArgs) -> anyhow::Result<Outcome> {
    let started = Instant::now();
    let mut m = RunManifest::new("analyze ablate", ctx.seed);
    let net = load(&a.network, &mut m)?;
    let cats = categories(&a.category, &net)?;
    let frac = fraction(a.split_frac, "--split-frac")?;
    if frac == 0.0 || a.repeats == 0 || a.window == 0 {
        return Err(usage("--split-frac, --repeats and --window must be positive"));
    }
    let mut jobs = Vec::new();
    for &c in &cats {
        for r in 0..a.repeats {
            let hidden = holdout_split(&net, c, frac, m.seed_for(&format!("split/{c}/{r}")));
            for v in Variant::ALL {
                jobs.push((c, r, v, hidden.clone()));
            }
        }
    }
    let results: Vec<anyhow::Result<Metrics>> = jobs
        .par_iter()
        .map(|(c, _, v, hidden)| {
            analysis::run_variant(&net, *c, &ctx.config, a.window, *v, hidden).with_context(|| format!("{c} {}", v.name()))
        })
        .collect();
    let mut cells: BTreeMap<(Variant, EmotionCategory), Vec<Metrics>> = BTreeMap::new();
    for ((c, _, v, _), r) in jobs.iter().zip(results) {
        cells.entry((*v, *c)).or_default().push(r?);
    }
    let mut table = ContributionTable::default();
    for ((v, c), runs) in cells {
        table.insert(v, c, Metrics::mean(&runs));
    }
    m.write(&a.out.join("table.csv"), &table.to_csv())?;
    m.write(&a.out.join("table.json"), &to_json(&table)?)?;
    m.config = serde_json::json!({ "train": ctx.config, "split_frac": frac, "repeats": a.repeats, "window": a.window });
    m.save(&a.out, started)?;
    Ok(Outcome::Complete)
}

fn synth(ctx: &Context_, a: SynthArgs) -> anyhow::Result<Outcome> {
    let started = Instant::now();
    let mut m = RunManifest::new("synth", ctx.seed);
    let mut cfg = match &a.config {
        Some(p) => {
            m.input(p);
            serde_json::from_str::<SynthConfig>(&read(p)?).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SynthConfig::default(),
    };
    if ctx.seed_given {
        cfg.seed = ctx.seed;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let (net, truth) = generate(&cfg)?;
    m.write(&a.out.join("network.jsonl"), &write_network(&net))?;
    m.write(&a.out.join("truth.json"), &truth.to_json())?;
    m.config = serde_json::to_value(&cfg)?;
    m.seeds.insert("synth".into(), cfg.seed);
    m.save(&a.out, started)?;
    Ok(Outcome::Complete)
}

fn export(ctx: &Context_, a: DotArgs) -> anyhow::Result<Outcome> {
    let started = Instant::now();
    let mut m = RunManifest::new("export-dot", ctx.seed);
    let net = load(&a.network, &mut m)?;
    m.input(&a.predictions);
    let pred = PredictionFile::parse(&read(&a.predictions)?).with_context(|| format!("parsing {}", a.predictions.display()))?;
    let opts = DotOptions {
        user: UserId(a.user),
        category: category(&a.category)?,
        min_weight: a.min_weight,
        slices: a.slices,
    };
    if !pred.categories.contains(&opts.category) {
        bail!("predictions do not cover {}", opts.category);
    }
    let dot = export_dot(&pred, &net, &opts)?;
    m.write(&a.out, &dot)?;
    m.config = serde_json::json!({ "user": a.user, "category": opts.category, "min_weight": a.min_weight, "slices": a.slices });
    m.save(&dir_of(&a.out), started)?;
    Ok(Outcome::Complete)
}
