//! Subcommand implementations. Each returns whether its checks passed;
//! errors are input errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use gpig_core::evaluation::{curve_and_auc, default_k_grid, CurveMetric};
use gpig_core::graph::gnn_edge_objective;
use gpig_core::models::linreg::linreg_from_rows;
use gpig_core::models::mlp::TrainConfig;
use gpig_core::models::Model;
use gpig_core::objectives::{kl_objective, posthoc_objective, topclass_objective};
use gpig_core::rng::substream;
use gpig_core::synthetic::{
    make_correlated_linreg, make_planted_tabular, make_sbm_graph, replicate_features, CorrelatedLinRegSpec,
    PlantedTabularSpec, ReplicaAggregate, ReplicationSpec, SbmSpec,
};
use gpig_core::{
    linreg_objective, linreg_solve, AlgoConfig, FnObjective, GroupSpec, Objective, SetFunctionView, SoftmaxNet,
    SparseGraph, TabularDataset,
};

use crate::config::{GenKind, ObjectiveKind, RunConfig};
use crate::pipelines::{
    check_objective, compress_graph, replicate_demo, select_features, train_classifier, train_graph_model,
    CompressOptions, GradCheckReport, SelectOptions,
};

/// Largest ground set for which curves include brute-force optima.
const OPTIMUM_MAX_N: usize = 10;

/// Whether a command's checks passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    CheckFailed,
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.subcommand.as_str() {
        "gradcheck" => gradcheck(cfg),
        "attribute" => attribute(cfg),
        "select" => select(cfg),
        "graph-compress" => graph_compress(cfg),
        "replicate-demo" => replicate(cfg),
        "gen" => generate(cfg),
        "train" => train(cfg),
        other => bail!("unknown subcommand '{other}'"),
    }
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref().with_context(|| format!("--{flag} is required"))
}

fn out_dir(cfg: &RunConfig) -> Result<Option<PathBuf>> {
    match &cfg.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
            Ok(Some(dir.clone()))
        }
        None => Ok(None),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes `config.json` into the output directory, if any.
fn write_config(cfg: &RunConfig, dir: &Option<PathBuf>) -> Result<()> {
    if let Some(dir) = dir {
        fs::write(dir.join("config.json"), cfg.to_json()?)?;
    }
    Ok(())
}

fn load_model(cfg: &RunConfig) -> Result<Model> {
    let path = require(&cfg.model, "model")?;
    Model::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn load_data(cfg: &RunConfig) -> Result<TabularDataset> {
    let path = require(&cfg.data, "data")?;
    TabularDataset::load_csv(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn load_graph(cfg: &RunConfig) -> Result<SparseGraph> {
    let path = require(&cfg.graph, "graph")?;
    SparseGraph::load_dir(path).with_context(|| format!("loading graph {}", path.display()))
}

fn train_config(cfg: &RunConfig, epochs: usize, learning_rate: f64) -> TrainConfig {
    TrainConfig {
        epochs: cfg.epochs.unwrap_or(epochs),
        learning_rate: cfg.learning_rate.unwrap_or(learning_rate),
    }
}

fn mlp_hidden(cfg: &RunConfig) -> Vec<usize> {
    if cfg.hidden.is_empty() {
        vec![32]
    } else {
        cfg.hidden.clone()
    }
}

/// Baseline input row: `zero`, `mean` (column means of `data`) or
/// comma-separated values.
pub fn resolve_baseline(spec: &str, n: usize, data: Option<&TabularDataset>) -> Result<Vec<f64>> {
    let values = match spec.trim() {
        "zero" => vec![0.0; n],
        "mean" => {
            let data = data.context("--baseline mean needs --data")?;
            ensure!(!data.is_empty(), "--baseline mean needs a non-empty dataset");
            data.rows().row_mean().iter().copied().collect()
        }
        list => list
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .with_context(|| format!("baseline value '{v}' is not a number"))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    ensure!(
        values.len() == n,
        "baseline has {} values but the input has {n} features",
        values.len()
    );
    Ok(values)
}

fn explained_row(cfg: &RunConfig, data: &TabularDataset) -> Result<Vec<f64>> {
    ensure!(
        cfg.row < data.len(),
        "--row {} is out of range for {} rows",
        cfg.row,
        data.len()
    );
    Ok(data.row(cfg.row))
}

fn gradcheck(cfg: &RunConfig) -> Result<Outcome> {
    let model = load_model(cfg)?;
    let points = cfg.points;
    if points == 0 {
        log::warn!("zero gradient-check points requested: the check passes vacuously");
    }
    let mut checks = Vec::new();
    match model {
        Model::Mlp(net) => {
            let data = cfg.data.as_ref().map(|_| load_data(cfg)).transpose()?;
            let n = net.input_dim();
            let input = match &data {
                Some(d) => {
                    ensure!(
                        d.n_features() == n,
                        "dataset has {} features, model expects {n}",
                        d.n_features()
                    );
                    explained_row(cfg, d)?
                }
                None => {
                    use rand_distr::{Distribution, StandardNormal};
                    let mut rng = substream(cfg.seed, "gradcheck-input");
                    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
                }
            };
            let baseline = resolve_baseline(&cfg.baseline, n, data.as_ref())?;
            let top = topclass_objective(net.clone(), input.clone(), baseline.clone())?;
            checks.push(check_objective("top-class", &top, points, cfg.seed)?);
            let kl = kl_objective(net.clone(), input, baseline.clone())?;
            checks.push(check_objective("kl", &kl, points, cfg.seed)?);
            if let Some(d) = &data {
                let posthoc = posthoc_objective(net, d, baseline)?;
                checks.push(check_objective("posthoc", &posthoc, points, cfg.seed)?);
            } else {
                log::info!("no --data given: skipping the post-hoc objective");
            }
        }
        Model::Gcn(gcn) => {
            let graph = load_graph(cfg)?;
            let objective = gnn_edge_objective(gcn, graph, cfg.target)?;
            checks.push(check_objective("gnn-edge", &objective, points, cfg.seed)?);
        }
    }
    let report = GradCheckReport::new(checks);
    for c in &report.checks {
        println!(
            "{:<10} {} max rel err {:.3e} over {} points ({} refined past a kink; tolerance {:.0e})",
            c.objective,
            if c.pass { "PASS" } else { "FAIL" },
            c.max_rel_err,
            c.points,
            c.refined_points,
            report.tolerance
        );
    }
    println!(
        "{}, max rel err {:.3e}",
        if report.pass { "PASS" } else { "FAIL" },
        report.max_rel_err()
    );
    let dir = out_dir(cfg)?;
    if let Some(dir) = &dir {
        write_json(&dir.join("gradcheck.json"), &report)?;
    }
    write_config(cfg, &dir)?;
    Ok(if report.pass {
        Outcome::Pass
    } else {
        Outcome::CheckFailed
    })
}

/// An objective built from the configuration, with the curve metric that
/// suits it.
pub struct BuiltObjective {
    pub objective: Box<dyn Objective>,
    pub metric: CurveMetric,
}

pub fn build_objective(cfg: &RunConfig) -> Result<BuiltObjective> {
    let kind = cfg.objective.context("--objective is required")?;
    let raw = |objective: Box<dyn Objective>| BuiltObjective {
        objective,
        metric: CurveMetric::Raw,
    };
    Ok(match kind {
        ObjectiveKind::Linreg => {
            let data = load_data(cfg)?;
            let rows: Vec<Vec<f64>> = (0..data.len()).map(|i| data.row(i)).collect();
            raw(Box::new(linreg_objective(linreg_from_rows(&rows, data.labels())?)))
        }
        ObjectiveKind::LinregDemo => raw(Box::new(linreg_objective(linreg_solve(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![1.0, 2.0]),
        )?))),
        ObjectiveKind::TopClass | ObjectiveKind::Kl | ObjectiveKind::Posthoc => {
            let net = load_model(cfg)?.into_mlp()?;
            let data = load_data(cfg)?;
            ensure!(
                data.n_features() == net.input_dim(),
                "dataset has {} features, model expects {}",
                data.n_features(),
                net.input_dim()
            );
            let baseline = resolve_baseline(&cfg.baseline, net.input_dim(), Some(&data))?;
            match kind {
                ObjectiveKind::TopClass => {
                    raw(Box::new(topclass_objective(net, explained_row(cfg, &data)?, baseline)?))
                }
                ObjectiveKind::Kl => {
                    let kl = kl_objective(net, explained_row(cfg, &data)?, baseline)?;
                    BuiltObjective {
                        metric: CurveMetric::Kl {
                            neg_entropy: kl.neg_entropy(),
                        },
                        objective: Box::new(kl),
                    }
                }
                _ => raw(Box::new(posthoc_objective(net, &data, baseline)?)),
            }
        }
        ObjectiveKind::GnnEdge => {
            let gcn = load_model(cfg)?.into_gcn()?;
            raw(Box::new(gnn_edge_objective(gcn, load_graph(cfg)?, cfg.target)?))
        }
        ObjectiveKind::Replication => raw(Box::new(replicate_features(ReplicationSpec {
            base: Arc::new(FnObjective::linear(cfg.weights.clone())),
            counts: cfg.counts.clone(),
            aggregate: ReplicaAggregate::SmoothMax { beta: cfg.beta },
        })?)),
    })
}

/// The algorithm configuration for a ground set of size `n`.
pub fn algo_config(cfg: &RunConfig, n: usize) -> Result<AlgoConfig> {
    let (rounds, per_round) = cfg.rounds_and_per_round(n);
    let mut config = AlgoConfig {
        seed: cfg.seed,
        ranking: cfg.ranking_or_default(),
        ..AlgoConfig::new(rounds, per_round, cfg.steps)
    };
    if let Some(size) = cfg.group_size {
        config = config.with_groups(GroupSpec::contiguous(n, size)?);
    }
    Ok(config)
}

fn attribute(cfg: &RunConfig) -> Result<Outcome> {
    let built = build_objective(cfg)?;
    let objective = built.objective.as_ref();
    let n = objective.dim();
    let config = algo_config(cfg, n)?;
    let result = cfg.algorithm.run(objective, &config)?;
    log::info!(
        "{} on {}: {} gradient evaluations",
        result.algorithm,
        objective.description(),
        result.diagnostics.gradient_evaluations
    );
    let view = SetFunctionView::new(objective);
    let grid: Vec<usize> = default_k_grid(n)
        .into_iter()
        .filter(|&k| k <= result.order.len())
        .collect();
    let (curve, auc) = curve_and_auc(&view, &result.order, built.metric, Some(&grid), n <= OPTIMUM_MAX_N)?;

    let shown: Vec<String> = result.top(10).iter().map(usize::to_string).collect();
    println!("algorithm: {}", result.algorithm);
    println!("gradient evaluations: {}", result.diagnostics.gradient_evaluations);
    println!("top features: {}", shown.join(" "));
    println!("curve auc ({}): {auc:.6}", curve.metric);

    let dir = out_dir(cfg)?;
    if let Some(dir) = &dir {
        fs::write(dir.join("result.json"), result.to_json()? + "\n")?;
        curve.write_csv(fs::File::create(dir.join("curve.csv"))?)?;
        write_json(&dir.join("auc.json"), &curve.auc_summary())?;
    }
    write_config(cfg, &dir)?;
    Ok(Outcome::Pass)
}

fn select(cfg: &RunConfig) -> Result<Outcome> {
    let net = load_model(cfg)?.into_mlp()?;
    let data = load_data(cfg)?;
    ensure!(
        data.n_features() == net.input_dim(),
        "dataset has {} features, model expects {}",
        data.n_features(),
        net.input_dim()
    );
    let (train, validation) = data.split(cfg.train_fraction)?;
    ensure!(
        !train.is_empty() && !validation.is_empty(),
        "train fraction leaves an empty split"
    );
    let options = SelectOptions {
        algorithm: cfg.algorithm,
        steps: cfg.steps,
        per_round: cfg.per_round.unwrap_or(1),
        ranking: cfg.ranking_or_default(),
        ks: cfg.k.clone(),
        seed: cfg.seed,
        hidden: mlp_hidden(cfg),
        train: train_config(cfg, 300, 0.5),
    };
    let report = select_features(&net, &train, &validation, &options)?;
    println!("gradient evaluations: {}", report.gradient_evaluations);
    for row in &report.rows {
        let cols: Vec<String> = row.selected.iter().map(usize::to_string).collect();
        println!("k={} val_loss={:.6} selected={}", row.k, row.val_loss, cols.join(" "));
    }
    let dir = out_dir(cfg)?;
    if let Some(dir) = &dir {
        write_json(&dir.join("selection.json"), &report)?;
        let mut w = csv::Writer::from_path(dir.join("selection.csv"))?;
        w.write_record(["k", "val_loss", "selected"])?;
        for row in &report.rows {
            let cols: Vec<String> = row.selected.iter().map(usize::to_string).collect();
            w.write_record([row.k.to_string(), format!("{:?}", row.val_loss), cols.join(" ")])?;
        }
        w.flush()?;
    }
    write_config(cfg, &dir)?;
    Ok(Outcome::Pass)
}

fn graph_compress(cfg: &RunConfig) -> Result<Outcome> {
    let gcn = load_model(cfg)?.into_gcn()?;
    let graph = load_graph(cfg)?;
    let mut ratios = cfg.ratios.clone();
    ratios.sort_by(f64::total_cmp);
    let options = CompressOptions {
        ratios,
        steps: cfg.steps,
        rounds: cfg.rounds.unwrap_or(10),
        per_round: cfg.per_round,
        seed: cfg.seed,
        target: cfg.target,
    };
    let report = compress_graph(&gcn, &graph, &options)?;
    println!(
        "edges: {}  full-graph accuracy: {:.4}  features-only accuracy: {:.4}",
        report.num_edges, report.full_accuracy, report.features_only_accuracy
    );
    let dir = out_dir(cfg)?;
    let mut text = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut text);
        w.write_record(["ratio", "accuracy", "selector", "seed"])?;
        for row in &report.rows {
            w.write_record([
                format!("{:?}", row.ratio),
                format!("{:?}", row.accuracy),
                row.selector.clone(),
                cfg.seed.to_string(),
            ])?;
        }
        w.flush()?;
    }
    match &dir {
        Some(dir) => {
            fs::write(dir.join("compression.csv"), &text)?;
            write_json(&dir.join("compression.json"), &report)?;
        }
        None => std::io::stdout().write_all(&text)?,
    }
    write_config(cfg, &dir)?;
    Ok(Outcome::Pass)
}

fn replicate(cfg: &RunConfig) -> Result<Outcome> {
    let report = replicate_demo(&cfg.weights, &cfg.counts, cfg.beta, cfg.steps)?;
    let fmt = |set: &[usize]| set.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    println!(
        "{:>3}  {:<16} {:>10}  {:<16} {:>10}",
        "k", "ig set", "ig value", "greedy-pig set", "value"
    );
    for r in &report.rows {
        println!(
            "{:>3}  {:<16} {:>10.4}  {:<16} {:>10.4}",
            r.k,
            fmt(&r.ig_set),
            r.ig_value,
            fmt(&r.greedy_set),
            r.greedy_value
        );
    }
    let dir = out_dir(cfg)?;
    if let Some(dir) = &dir {
        write_json(&dir.join("replicate.json"), &report)?;
        let mut w = csv::Writer::from_path(dir.join("replicate.csv"))?;
        w.write_record(["k", "ig_set", "ig_value", "greedy_pig_set", "greedy_pig_value"])?;
        for r in &report.rows {
            w.write_record([
                r.k.to_string(),
                fmt(&r.ig_set),
                format!("{:?}", r.ig_value),
                fmt(&r.greedy_set),
                format!("{:?}", r.greedy_value),
            ])?;
        }
        w.flush()?;
    }
    write_config(cfg, &dir)?;
    Ok(Outcome::Pass)
}

fn generate(cfg: &RunConfig) -> Result<Outcome> {
    let kind = cfg.gen_kind.context("gen needs a kind")?;
    let dir = out_dir(cfg)?.context("--out is required for gen")?;
    match kind {
        GenKind::Planted => {
            let spec = PlantedTabularSpec {
                seed: cfg.seed,
                ..PlantedTabularSpec::default()
            };
            let (data, planted) = make_planted_tabular(&spec)?;
            data.save_csv(dir.join("data.csv"))?;
            write_json(
                &dir.join("planted.json"),
                &serde_json::json!({ "spec": spec, "planted": planted }),
            )?;
            println!(
                "wrote {} rows x {} features; planted {:?}",
                data.len(),
                data.n_features(),
                planted
            );
        }
        GenKind::Sbm => {
            let spec = SbmSpec {
                seed: cfg.seed,
                ..SbmSpec::default()
            };
            let graph = make_sbm_graph(&spec)?;
            graph.save_dir(&dir)?;
            write_json(&dir.join("spec.json"), &spec)?;
            println!("wrote {} nodes, {} edges", graph.num_nodes(), graph.num_edges());
        }
        GenKind::CorrelatedLinreg => {
            let spec = CorrelatedLinRegSpec::new(8, vec![(0, 1), (2, 3)], 0.9, cfg.seed);
            let problem = make_correlated_linreg(&spec)?;
            let a = problem.design();
            let names = (0..a.ncols()).map(|j| format!("x{j}")).collect();
            let data = TabularDataset::new(names, a.clone(), problem.targets().iter().copied().collect(), 64)?;
            data.save_csv(dir.join("data.csv"))?;
            write_json(&dir.join("spec.json"), &spec)?;
            println!("wrote {} rows x {} features", data.len(), data.n_features());
        }
        GenKind::LinregDemo => {
            let names = vec!["x0".to_string(), "x1".to_string()];
            let data = TabularDataset::new(names, DMatrix::identity(2, 2), vec![1.0, 2.0], 2)?;
            data.save_csv(dir.join("data.csv"))?;
            println!("wrote the 2x2 identity regression with targets (1, 2)");
        }
    }
    write_config(cfg, &Some(dir))?;
    Ok(Outcome::Pass)
}

fn train(cfg: &RunConfig) -> Result<Outcome> {
    let dir = out_dir(cfg)?.context("--out is required for train")?;
    let model = match (&cfg.data, &cfg.graph) {
        (Some(_), None) => {
            let data = load_data(cfg)?;
            let (train, validation) = data.split(cfg.train_fraction)?;
            ensure!(!train.is_empty(), "train fraction leaves no training rows");
            let net: SoftmaxNet = train_classifier(&train, &mlp_hidden(cfg), &train_config(cfg, 300, 0.5), cfg.seed)?;
            if !validation.is_empty() {
                let (loss, acc) = net.evaluate(validation.rows(), &validation.class_labels()?)?;
                println!("validation loss {loss:.6}, accuracy {acc:.4}");
            }
            Model::Mlp(net)
        }
        (None, Some(_)) => {
            let graph = load_graph(cfg)?;
            let hidden = match cfg.hidden.as_slice() {
                [] => [16, 16],
                &[a, b] => [a, b],
                other => bail!("a GCN takes exactly two hidden widths, got {other:?}"),
            };
            let gcn = train_graph_model(&graph, hidden, &train_config(cfg, 200, 0.2), cfg.seed)?;
            let acc = gcn.accuracy_on(&graph, &vec![1.0; graph.num_edges()], graph.test_nodes())?;
            println!("test accuracy {acc:.4}");
            Model::Gcn(gcn)
        }
        _ => bail!("train needs exactly one of --data or --graph"),
    };
    model.save(dir.join("model.json"))?;
    write_config(cfg, &Some(dir))?;
    Ok(Outcome::Pass)
}
