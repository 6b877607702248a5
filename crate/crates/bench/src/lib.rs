//! Fixtures shared by the criterion benchmarks in `benches/`: one instance
//! per objective family, sized like the acceptance suites.

use std::sync::Arc;

use gpig_core::graph::{gnn_edge_objective, GnnEdgeObjective, GnnTarget};
use gpig_core::models::gcn::train_gcn;
use gpig_core::models::linreg::LinRegObjective;
use gpig_core::models::mlp::TrainConfig;
use gpig_core::objectives::PosthocObjective;
use gpig_core::rng::substream;
use gpig_core::synthetic::{
    make_correlated_linreg, make_planted_tabular, make_sbm_graph, replicate_features, CorrelatedLinRegSpec,
    PlantedTabularSpec, ReplicaAggregate, ReplicatedObjective, ReplicationSpec, SbmSpec,
};
use gpig_core::{linreg_objective, posthoc_objective, FnObjective, Result, SoftmaxNet, TinyGcn};

/// Least squares with eight features in three correlated pairs.
pub fn linreg_fixture() -> Result<LinRegObjective> {
    let spec = CorrelatedLinRegSpec::new(8, vec![(0, 1), (2, 3), (4, 5)], 0.9, 0);
    Ok(linreg_objective(make_correlated_linreg(&spec)?))
}

/// The `5u + v` objective with `u` replicated three times.
pub fn replication_fixture() -> Result<ReplicatedObjective> {
    replicate_features(ReplicationSpec {
        base: Arc::new(FnObjective::linear(vec![5.0, 1.0])),
        counts: vec![3, 1],
        aggregate: ReplicaAggregate::SmoothMax { beta: 32.0 },
    })
}

/// Mean log-likelihood of the default planted dataset under a 30-32-2 MLP.
pub fn posthoc_fixture() -> Result<PosthocObjective> {
    let spec = PlantedTabularSpec::default();
    let (data, _) = make_planted_tabular(&spec)?;
    let net = SoftmaxNet::new(&[data.n_features(), 32, 2], &mut substream(0, "bench-mlp"))?;
    let baseline = vec![0.0; data.n_features()];
    posthoc_objective(net, &data, baseline)
}

/// Edge-mask objective on the default SBM graph with a briefly trained
/// 16-16 GCN.
pub fn gnn_fixture() -> Result<GnnEdgeObjective> {
    let graph = make_sbm_graph(&SbmSpec::default())?;
    let gcn = TinyGcn::new(
        graph.features().ncols(),
        [16, 16],
        graph.num_classes(),
        &mut substream(0, "bench-gcn"),
    )?;
    let trained = train_gcn(
        gcn,
        &graph,
        &TrainConfig {
            epochs: 50,
            learning_rate: 0.2,
        },
    )?;
    gnn_edge_objective(trained.model, graph, GnnTarget::AllNodes)
}
