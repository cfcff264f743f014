use std::fmt;
use std::io::Write;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

use reachzono::analysis::{
    build_input_set, class_specific_matrix, min_score, output_extensions, rank_features,
    reliability_rates, score_dataset, FeatureRank, InputShape, InputSpec, Modes,
    ReliabilityCurve, ScoredSample, VerificationReport, VerifyConfig,
};
use reachzono::analysis;
use reachzono::oracle::sample_reachable;
use reachzono::report::{to_json_string, Document, Metadata};
use reachzono::{propagate_with, Budget, Dataset, Direction, Network, ReachOptions, Zonotope};

use crate::{Common, Format, ModeArg, RankArgs, ReliabilityArgs, SampleArgs, SetKind, VerifyArgs};

/// Bad or inconsistent flags; exits with status 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

struct Loaded {
    net: Network,
    data: Option<Dataset>,
    anchors: Vec<Vec<f64>>,
}

fn load(common: &Common) -> Result<Loaded> {
    let net = Network::load(&common.model)
        .with_context(|| format!("loading model {}", common.model.display()))?;
    let data = match &common.data {
        Some(path) => Some(
            Dataset::from_path(path).with_context(|| format!("reading {}", path.display()))?,
        ),
        None => None,
    };
    let anchors = match (&common.point, &data) {
        (Some(p), _) => vec![p.clone()],
        (None, Some(d)) => d.features.clone(),
        (None, None) => return Err(usage("one of --point or --data is required")),
    };
    if anchors.is_empty() {
        return Err(usage("the dataset has no rows"));
    }
    if let Some(bad) = anchors.iter().find(|a| a.len() != net.input_width()) {
        return Err(usage(format!(
            "anchor has {} features but the model expects {}",
            bad.len(),
            net.input_width()
        )));
    }
    Ok(Loaded { net, data, anchors })
}

fn require(value: Option<f64>, flag: &str, set: &str) -> Result<f64> {
    value.ok_or_else(|| usage(format!("--{flag} is required for --set {set}")))
}

fn shape(common: &Common) -> Result<InputShape> {
    let shape = match common.set {
        SetKind::Cube => InputShape::Cube {
            eps: require(common.eps, "eps", "cube")?,
        },
        SetKind::BoxPca => {
            if common.data.is_none() {
                return Err(usage("--data is required for --set box-pca"));
            }
            InputShape::BoxPca {
                eps: require(common.eps, "eps", "box-pca")?,
            }
        }
        SetKind::Free => InputShape::Free {
            eps: require(common.eps, "eps", "free")?,
            delta: require(common.delta, "delta", "free")?,
        },
        SetKind::Box => InputShape::Box {
            radii: common
                .radii
                .clone()
                .ok_or_else(|| usage("--radii is required for --set box"))?,
        },
    };
    shape.validate().map_err(|e| usage(e.to_string()))?;
    Ok(shape)
}

fn budget(common: &Common) -> Result<Budget> {
    Budget::new(common.max_amp, common.max_zono).map_err(|e| usage(e.to_string()))
}

fn reach_options(common: &Common) -> Result<ReachOptions> {
    if common.max_zonotopes == 0 {
        return Err(usage("the zonotope ceiling must be positive"));
    }
    Ok(ReachOptions {
        budget: budget(common)?,
        ceiling: common.max_zonotopes,
    })
}

fn modes(mode: ModeArg) -> Modes {
    match mode {
        ModeArg::Over => Modes::Over,
        ModeArg::Under => Modes::Under,
        ModeArg::Both => Modes::Both,
    }
}

fn input_sets(loaded: &Loaded, shape: &InputShape) -> Result<Vec<Zonotope>> {
    let dataset = loaded.data.as_ref().map(|d| d.features.as_slice());
    loaded
        .anchors
        .iter()
        .map(|a| {
            let spec = InputSpec {
                shape: shape.clone(),
                anchor: a.clone(),
            };
            Ok(build_input_set(&spec, dataset)?)
        })
        .collect()
}

fn num(v: f64, deterministic: bool) -> String {
    if deterministic {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn opt_num(v: Option<f64>, deterministic: bool) -> String {
    v.map_or_else(String::new, |v| num(v, deterministic))
}

fn emit(common: &Common, text: &str) -> Result<()> {
    match &common.out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(common: &Common, command: &str, results: T, start: Instant) -> Result<()> {
    let mut doc = Document::new(command, results);
    if !common.deterministic {
        doc = doc.with_metadata(Metadata::now(start.elapsed().as_secs_f64() * 1e3));
    }
    let mut text = to_json_string(&doc, common.deterministic)?;
    text.push('\n');
    emit(common, &text)
}

fn emit_csv(common: &Common, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    emit(common, &String::from_utf8(bytes)?)
}

pub fn verify(args: &VerifyArgs) -> Result<()> {
    let start = Instant::now();
    let common = &args.common;
    let shape = shape(common)?;
    let loaded = load(common)?;
    let opts = reach_options(common)?;
    let config = VerifyConfig {
        budget: opts.budget,
        modes: modes(args.mode),
        ceiling: opts.ceiling,
    };
    let mut reports = input_sets(&loaded, &shape)?
        .iter()
        .map(|z| analysis::verify(&loaded.net, z, &config))
        .collect::<reachzono::Result<Vec<VerificationReport>>>()?;
    if common.deterministic {
        reports.iter_mut().for_each(|r| r.wall_time_ms = None);
    }
    match common.format {
        Format::Json => emit_json(common, "verify", &reports, start),
        Format::Csv => {
            let d = common.deterministic;
            let rows = reports
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    vec![
                        i.to_string(),
                        r.predicted.to_string(),
                        serde_json::to_value(r.certificate)
                            .ok()
                            .and_then(|v| v.as_str().map(str::to_string))
                            .unwrap_or_default(),
                        opt_num(r.scores_over.as_deref().map(min_score), d),
                        opt_num(r.scores_under.as_deref().map(min_score), d),
                    ]
                })
                .collect();
            emit_csv(
                common,
                &["sample", "predicted", "certificate", "min_score_over", "min_score_under"],
                rows,
            )
        }
    }
}

pub fn class_matrix(args: &VerifyArgs) -> Result<()> {
    let start = Instant::now();
    let common = &args.common;
    let shape = shape(common)?;
    if common.point.is_some() {
        return Err(usage("class-matrix takes --data, not --point"));
    }
    let loaded = load(common)?;
    let data = loaded.data.as_ref().expect("load requires --data without --point");
    let opts = reach_options(common)?;
    let config = VerifyConfig {
        budget: opts.budget,
        modes: modes(args.mode),
        ceiling: opts.ceiling,
    };
    let matrix = class_specific_matrix(&loaded.net, data, &shape, &config)?;
    match common.format {
        Format::Json => emit_json(common, "class-matrix", &matrix, start),
        Format::Csv => {
            let d = common.deterministic;
            let mut rows = Vec::new();
            for t in 0..matrix.classes {
                for b in 0..matrix.classes {
                    if t != b {
                        rows.push(vec![
                            t.to_string(),
                            b.to_string(),
                            opt_num(matrix.robust[t][b], d),
                            opt_num(matrix.non_robust[t][b], d),
                        ]);
                    }
                }
            }
            emit_csv(common, &["true_class", "other_class", "robust", "non_robust"], rows)
        }
    }
}

#[derive(Serialize)]
struct RankedSample {
    sample: usize,
    features: Vec<FeatureRank>,
}

pub fn rank(args: &RankArgs) -> Result<()> {
    let start = Instant::now();
    let common = &args.common;
    let delta = common
        .delta
        .ok_or_else(|| usage("--delta is required for rank"))?;
    let eps = common.eps.ok_or_else(|| usage("--eps is required for rank"))?;
    if !(eps > 0.0 && delta > eps) {
        return Err(usage("rank needs --delta > --eps > 0"));
    }
    let loaded = load(common)?;
    let opts = reach_options(common)?;
    let ranked = loaded
        .anchors
        .iter()
        .enumerate()
        .map(|(i, a)| {
            Ok(RankedSample {
                sample: i,
                features: rank_features(&loaded.net, a, delta, eps, &opts)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    match common.format {
        Format::Json => emit_json(common, "rank", &ranked, start),
        Format::Csv => {
            let d = common.deterministic;
            let rows = ranked
                .iter()
                .flat_map(|s| {
                    s.features.iter().map(move |f| {
                        vec![
                            s.sample.to_string(),
                            f.rank.to_string(),
                            f.feature.to_string(),
                            opt_num(f.volume, d),
                            f.error.clone().unwrap_or_default(),
                        ]
                    })
                })
                .collect();
            emit_csv(common, &["sample", "rank", "feature", "volume", "error"], rows)
        }
    }
}

#[derive(Serialize)]
struct SampleExtents {
    sample: usize,
    over: Option<Vec<f64>>,
    under: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    diagnostics: Vec<String>,
}

pub fn extents(args: &VerifyArgs) -> Result<()> {
    let start = Instant::now();
    let common = &args.common;
    let shape = shape(common)?;
    let loaded = load(common)?;
    let opts = reach_options(common)?;
    let m = modes(args.mode);
    let mut results = Vec::new();
    for (i, z) in input_sets(&loaded, &shape)?.iter().enumerate() {
        let mut diagnostics = Vec::new();
        let mut run = |direction: Direction| -> Result<Option<Vec<f64>>> {
            let rs = propagate_with(&loaded.net, z, direction, &opts)?;
            if rs.is_empty() {
                diagnostics.push(format!("{direction:?} reach set is empty"));
                return Ok(None);
            }
            Ok(Some(output_extensions(&rs)?))
        };
        let over = if m.over() { run(Direction::Over)? } else { None };
        let under = if m.under() { run(Direction::Under)? } else { None };
        results.push(SampleExtents {
            sample: i,
            over,
            under,
            diagnostics,
        });
    }
    match common.format {
        Format::Json => emit_json(common, "extents", &results, start),
        Format::Csv => {
            let d = common.deterministic;
            let width = loaded.net.output_width();
            let mut rows = Vec::new();
            for r in &results {
                for k in 0..width {
                    rows.push(vec![
                        r.sample.to_string(),
                        k.to_string(),
                        opt_num(r.over.as_ref().map(|v| v[k]), d),
                        opt_num(r.under.as_ref().map(|v| v[k]), d),
                    ]);
                }
            }
            emit_csv(common, &["sample", "output", "over", "under"], rows)
        }
    }
}

#[derive(Serialize)]
struct ReliabilityResult {
    samples: Vec<ScoredSample>,
    curve: ReliabilityCurve,
}

pub fn reliability(args: &ReliabilityArgs) -> Result<()> {
    let start = Instant::now();
    let common = &args.common;
    let shape = shape(common)?;
    if common.data.is_none() || common.point.is_some() {
        return Err(usage("reliability needs a labelled --data file and no --point"));
    }
    let loaded = load(common)?;
    let data = loaded.data.as_ref().expect("checked above");
    let opts = reach_options(common)?;
    let samples = score_dataset(&loaded.net, data, &shape, &opts)?;
    let curve = reliability_rates(&samples, args.thetas.as_deref())?;
    match common.format {
        Format::Json => emit_json(common, "reliability", ReliabilityResult { samples, curve }, start),
        Format::Csv => {
            let d = common.deterministic;
            let rows = curve
                .points
                .iter()
                .map(|p| {
                    vec![
                        num(p.theta, d),
                        opt_num(p.true_above, d),
                        opt_num(p.false_above, d),
                    ]
                })
                .collect();
            emit_csv(common, &["theta", "true_above", "false_above"], rows)
        }
    }
}

#[derive(Serialize)]
struct SampleSummary {
    sample: usize,
    count: usize,
    seed: u64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    extents: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<Vec<Vec<f64>>>,
}

pub fn sample(args: &SampleArgs) -> Result<()> {
    let start = Instant::now();
    let common = &args.common;
    let shape = shape(common)?;
    if args.count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    if !(0.0..=1.0).contains(&args.corner_fraction) {
        return Err(usage("--corner-fraction must lie in [0, 1]"));
    }
    let loaded = load(common)?;
    let mut results = Vec::new();
    for (i, z) in input_sets(&loaded, &shape)?.iter().enumerate() {
        let seed = common.seed.wrapping_add(i as u64);
        let set = sample_reachable(&loaded.net, z, args.count, seed, args.corner_fraction)?;
        let (lower, upper) = set.bounds().expect("count is positive");
        results.push(SampleSummary {
            sample: i,
            count: set.count,
            seed,
            extents: upper.iter().zip(&lower).map(|(u, l)| u - l).collect(),
            lower,
            upper,
            points: args.points.then_some(set.points),
        });
    }
    match common.format {
        Format::Json => emit_json(common, "sample", &results, start),
        Format::Csv => {
            let d = common.deterministic;
            let mut rows = Vec::new();
            for r in &results {
                for k in 0..r.lower.len() {
                    rows.push(vec![
                        r.sample.to_string(),
                        k.to_string(),
                        num(r.lower[k], d),
                        num(r.upper[k], d),
                        num(r.extents[k], d),
                    ]);
                }
            }
            emit_csv(common, &["sample", "output", "lower", "upper", "extent"], rows)
        }
    }
}
