//! End-to-end experiment pipelines shared by the subcommands and the
//! acceptance suite. Nothing here touches the filesystem.

use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use gpig_core::attribution::{build_minibatch_schedule, Algorithm};
use gpig_core::evaluation::eval_set_values;
use gpig_core::graph::{compression_curve, gnn_edge_objective, EdgeSelector, GnnTarget, SamplerKind};
use gpig_core::models::gcn::train_gcn;
use gpig_core::models::gradcheck::{grad_check_refined, random_interior_point};
use gpig_core::models::mlp::{train_mlp, TrainConfig};
use gpig_core::objectives::posthoc_objective;
use gpig_core::rng::substream;
use gpig_core::synthetic::{replicate_features, ReplicaAggregate, ReplicationSpec};
use gpig_core::{
    AlgoConfig, AttributionResult, FnObjective, Objective, RankingMode, SoftmaxNet, SparseGraph, TabularDataset,
    TinyGcn,
};

/// Finite-difference step and relative tolerance of every gradient check.
pub const GRADCHECK_STEP: f64 = 1e-4;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckEntry {
    pub objective: String,
    pub points: usize,
    /// Worst relative error over the points, each at its best step.
    pub max_rel_err: f64,
    /// Points that needed a smaller step to clear a ReLU kink.
    pub refined_points: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub step: f64,
    pub tolerance: f64,
    pub checks: Vec<GradCheckEntry>,
    pub pass: bool,
}

impl GradCheckReport {
    pub fn new(checks: Vec<GradCheckEntry>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self {
            step: GRADCHECK_STEP,
            tolerance: GRADCHECK_TOLERANCE,
            checks,
            pass,
        }
    }

    pub fn max_rel_err(&self) -> f64 {
        self.checks.iter().map(|c| c.max_rel_err).fold(0.0, f64::max)
    }
}

/// Step-refined gradient check of `objective` at `points` random interior
/// points drawn from the `name` substream of `seed`.
pub fn check_objective<O: Objective + ?Sized>(
    name: &str,
    objective: &O,
    points: usize,
    seed: u64,
) -> Result<GradCheckEntry> {
    let mut rng = substream(seed, &format!("gradcheck-{name}"));
    let mut max_rel_err = 0.0f64;
    let mut refined_points = 0;
    for _ in 0..points {
        let point = random_interior_point(objective.dim(), 2.0 * GRADCHECK_STEP, &mut rng);
        let check = grad_check_refined(objective, &point, GRADCHECK_STEP, GRADCHECK_TOLERANCE)
            .with_context(|| format!("gradient check of the {name} objective"))?;
        max_rel_err = max_rel_err.max(check.error);
        refined_points += usize::from(check.step < GRADCHECK_STEP);
    }
    Ok(GradCheckEntry {
        objective: name.into(),
        points,
        max_rel_err,
        refined_points,
        pass: max_rel_err <= GRADCHECK_TOLERANCE,
    })
}

/// Options of the post-hoc feature-selection pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectOptions {
    pub algorithm: Algorithm,
    pub steps: usize,
    pub per_round: usize,
    pub ranking: RankingMode,
    /// Feature counts to report; the attribution ranks `max(ks)` features.
    pub ks: Vec<usize>,
    pub seed: u64,
    /// Hidden widths of the retrained pruned networks.
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectRow {
    pub k: usize,
    /// Selected feature indices, ascending.
    pub selected: Vec<usize>,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectReport {
    pub attribution: AttributionResult,
    pub gradient_evaluations: usize,
    pub minibatch_groups: usize,
    pub rows: Vec<SelectRow>,
}

/// Gradient evaluations an algorithm run consumes: `T` for one-shot IG,
/// `R T` for Greedy PIG and `R` for Sequential Gradient.
pub fn gradient_budget(algorithm: Algorithm, config: &AlgoConfig) -> usize {
    match algorithm {
        Algorithm::Ig => config.steps,
        Algorithm::GreedyPig => config.rounds * config.steps,
        Algorithm::Sg => config.rounds,
    }
}

/// Global post-hoc attribution of `net` on `train` through a minibatch
/// schedule with one batch group per gradient evaluation, then a retrained
/// pruned network per `k` scored on `validation`.
pub fn select_features(
    net: &SoftmaxNet,
    train: &TabularDataset,
    validation: &TabularDataset,
    options: &SelectOptions,
) -> Result<SelectReport> {
    let n = train.n_features();
    let k_max = options
        .ks
        .iter()
        .copied()
        .max()
        .context("no feature counts requested")?;
    if options.ks.contains(&0) {
        bail!("feature count k must be at least 1");
    }
    ensure!(k_max <= n, "k = {k_max} exceeds the {n} available features");
    ensure!(options.per_round > 0, "per-round selection count must be positive");
    let rounds = k_max.div_ceil(options.per_round);
    let config = AlgoConfig {
        rounds,
        per_round: options.per_round,
        steps: options.steps,
        seed: options.seed,
        ranking: options.ranking,
        groups: None,
    };
    let evals = gradient_budget(options.algorithm, &config);
    let batches = train.batches();
    let groups = evals.min(batches.len());
    let schedule = build_minibatch_schedule(batches.len(), groups, options.seed)?;
    let objective = posthoc_objective(net.clone(), train, vec![0.0; n])?.with_schedule(&schedule, &batches)?;
    let attribution = options.algorithm.run(&objective, &config)?;
    log::info!(
        "{} consumed {} gradient evaluations over {} minibatch groups",
        attribution.algorithm,
        attribution.diagnostics.gradient_evaluations,
        groups
    );

    let mut rows = Vec::with_capacity(options.ks.len());
    for &k in &options.ks {
        let mut selected = attribution.top(k).to_vec();
        selected.sort_unstable();
        let val_loss = retrain_loss(train, validation, &selected, options)?;
        rows.push(SelectRow { k, selected, val_loss });
    }
    Ok(SelectReport {
        gradient_evaluations: attribution.diagnostics.gradient_evaluations,
        minibatch_groups: groups,
        attribution,
        rows,
    })
}

/// Validation cross-entropy of a network retrained from scratch on the
/// `columns` of `train`. The initialization depends only on the seed and
/// the shape, so equal column sets give equal losses.
pub fn retrain_loss(
    train: &TabularDataset,
    validation: &TabularDataset,
    columns: &[usize],
    options: &SelectOptions,
) -> Result<f64> {
    let classes = train.num_classes()?.max(validation.num_classes()?).max(2);
    let mut dims = vec![columns.len()];
    dims.extend(&options.hidden);
    dims.push(classes);
    let net = SoftmaxNet::new(&dims, &mut substream(options.seed, "retrain-init"))?;
    let trained = train_mlp(net, &train.select_columns(columns)?, &options.train)?;
    let val = validation.select_columns(columns)?;
    let (loss, _) = trained.model.evaluate(val.rows(), &val.class_labels()?)?;
    Ok(loss)
}

/// A freshly initialized and trained MLP on `data`.
pub fn train_classifier(data: &TabularDataset, hidden: &[usize], train: &TrainConfig, seed: u64) -> Result<SoftmaxNet> {
    let mut dims = vec![data.n_features()];
    dims.extend(hidden);
    dims.push(data.num_classes()?.max(2));
    let net = SoftmaxNet::new(&dims, &mut substream(seed, "mlp-init"))?;
    let trained = train_mlp(net, data, train)?;
    log::info!("trained MLP {:?}: final training loss {:.6}", dims, trained.final_loss);
    Ok(trained.model)
}

/// A freshly initialized and trained GCN on `graph`.
pub fn train_graph_model(graph: &SparseGraph, hidden: [usize; 2], train: &TrainConfig, seed: u64) -> Result<TinyGcn> {
    let gcn = TinyGcn::new(
        graph.features().ncols(),
        hidden,
        graph.num_classes(),
        &mut substream(seed, "gcn-init"),
    )?;
    let trained = train_gcn(gcn, graph, train)?;
    log::info!("trained GCN: final training loss {:.6}", trained.final_loss);
    Ok(trained.model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressOptions {
    pub ratios: Vec<f64>,
    pub steps: usize,
    pub rounds: usize,
    /// Edges per Greedy PIG round; `None` means `ceil(|E| / R)`.
    pub per_round: Option<usize>,
    pub seed: u64,
    pub target: GnnTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressRow {
    pub selector: String,
    pub ratio: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressReport {
    pub num_edges: usize,
    pub full_accuracy: f64,
    pub features_only_accuracy: f64,
    pub rows: Vec<CompressRow>,
}

impl CompressReport {
    pub fn accuracy(&self, selector: &str, ratio: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.selector == selector && r.ratio == ratio)
            .map(|r| r.accuracy)
    }
}

pub const SELECTORS: [&str; 4] = ["random", "degree_weighted", "pig", "greedy_pig"];

/// Test accuracy against kept-edge ratio for the two random baselines, a
/// one-shot PIG ranking (absolute scores) and a Greedy PIG ranking (signed
/// rounds), all on the training-node edge objective.
pub fn compress_graph(gcn: &TinyGcn, graph: &SparseGraph, options: &CompressOptions) -> Result<CompressReport> {
    let e = graph.num_edges();
    ensure!(e > 0, "graph has no edges to select");
    ensure!(options.rounds > 0, "rounds must be positive");
    let objective = gnn_edge_objective(gcn.clone(), graph.clone(), options.target)?;
    let pig = Algorithm::Ig.run(
        &objective,
        &AlgoConfig::new(1, e, options.steps).with_ranking(RankingMode::Absolute),
    )?;
    let per_round = options.per_round.unwrap_or_else(|| e.div_ceil(options.rounds));
    let greedy_config = AlgoConfig {
        seed: options.seed,
        ..AlgoConfig::new(options.rounds, per_round, options.steps)
    };
    let greedy = Algorithm::GreedyPig.run(&objective, &greedy_config)?;
    let selectors = [
        EdgeSelector::Sampler {
            kind: SamplerKind::Uniform,
            seed: options.seed,
        },
        EdgeSelector::Sampler {
            kind: SamplerKind::DegreeWeighted,
            seed: options.seed,
        },
        EdgeSelector::Ranked {
            name: "pig".into(),
            order: pig.order,
        },
        EdgeSelector::Ranked {
            name: "greedy_pig".into(),
            order: complete_order(greedy.order, e),
        },
    ];
    let mut rows = Vec::new();
    let mut full_accuracy = 0.0;
    for selector in &selectors {
        let (points, reference) = compression_curve(gcn, graph, selector, &options.ratios)?;
        full_accuracy = reference;
        rows.extend(points.into_iter().map(|p| CompressRow {
            selector: selector.name().into(),
            ratio: p.ratio,
            accuracy: p.accuracy,
        }));
    }
    let features_only_accuracy = gcn.accuracy_on(graph, &vec![0.0; e], graph.test_nodes())?;
    Ok(CompressReport {
        num_edges: e,
        full_accuracy,
        features_only_accuracy,
        rows,
    })
}

/// Appends the unselected indices in ascending order so the ranking covers
/// every edge.
fn complete_order(mut order: Vec<usize>, n: usize) -> Vec<usize> {
    let mut seen = vec![false; n];
    for &i in &order {
        seen[i] = true;
    }
    order.extend((0..n).filter(|&i| !seen[i]));
    order
}

/// One row of the replication comparison: the value of each algorithm's
/// top-`k` set under exact (hard-max) set evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub k: usize,
    pub ig_set: Vec<usize>,
    pub ig_value: f64,
    pub greedy_set: Vec<usize>,
    pub greedy_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateReport {
    pub weights: Vec<f64>,
    pub counts: Vec<usize>,
    pub beta: f64,
    pub ig: AttributionResult,
    pub greedy_pig: AttributionResult,
    pub rows: Vec<ReplicateRow>,
}

/// One-shot IG against Greedy PIG on the linear base `sum_b weights_b u_b`
/// with input `b` replicated `counts[b]` times under a smooth max.
pub fn replicate_demo(weights: &[f64], counts: &[usize], beta: f64, steps: usize) -> Result<ReplicateReport> {
    ensure!(
        weights.len() == counts.len(),
        "{} weights but {} replica counts",
        weights.len(),
        counts.len()
    );
    let objective = replicate_features(ReplicationSpec {
        base: Arc::new(FnObjective::linear(weights.to_vec())),
        counts: counts.to_vec(),
        aggregate: ReplicaAggregate::SmoothMax { beta },
    })?;
    let n = objective.dim();
    let ig = Algorithm::Ig.run(
        &objective,
        &AlgoConfig::new(1, n, steps).with_ranking(RankingMode::Absolute),
    )?;
    let greedy_pig = Algorithm::GreedyPig.run(&objective, &AlgoConfig::new(n, 1, steps))?;
    let view = objective.hard_max_view();
    let ig_values = eval_set_values(&view, &ig.order)?;
    let greedy_values = eval_set_values(&view, &greedy_pig.order)?;
    let rows = (1..=n)
        .map(|k| ReplicateRow {
            k,
            ig_set: ig.order[..k].to_vec(),
            ig_value: ig_values[k],
            greedy_set: greedy_pig.order[..k].to_vec(),
            greedy_value: greedy_values[k],
        })
        .collect();
    Ok(ReplicateReport {
        weights: weights.to_vec(),
        counts: counts.to_vec(),
        beta,
        ig,
        greedy_pig,
        rows,
    })
}
