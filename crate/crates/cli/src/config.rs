//! Command-line flags and the resolved run configuration.
//!
//! Precedence: flags over the `--config` JSON file over built-in defaults.
//! The resolved [`RunConfig`] is written next to every run's outputs and can
//! be fed back through `--config` to reproduce it.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use gpig_core::graph::GnnTarget;
use gpig_core::{Algorithm, RankingMode};

#[derive(Debug, Parser)]
#[command(
    name = "gpig",
    version,
    about = "Path integrated gradients and Greedy PIG attribution experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Finite-difference check of every objective a model supports.
    Gradcheck(Flags),
    /// Attribute an objective and write the result JSON and quality curve.
    Attribute(Flags),
    /// Global post-hoc feature selection with pruned retraining.
    Select(Flags),
    /// Accuracy against kept-edge ratio for four edge selectors.
    GraphCompress(Flags),
    /// One-shot IG against Greedy PIG on replicated features.
    ReplicateDemo(Flags),
    /// Write a synthetic dataset, graph or regression instance.
    Gen {
        kind: GenKind,
        #[command(flatten)]
        flags: Flags,
    },
    /// Train an MLP on `--data` or a GCN on `--graph`.
    Train(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gradcheck(_) => "gradcheck",
            Command::Attribute(_) => "attribute",
            Command::Select(_) => "select",
            Command::GraphCompress(_) => "graph-compress",
            Command::ReplicateDemo(_) => "replicate-demo",
            Command::Gen { .. } => "gen",
            Command::Train(_) => "train",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Gradcheck(f)
            | Command::Attribute(f)
            | Command::Select(f)
            | Command::GraphCompress(f)
            | Command::ReplicateDemo(f)
            | Command::Train(f) => f,
            Command::Gen { flags, .. } => flags,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    /// Planted-informative tabular classification data.
    Planted,
    /// Stochastic block model graph with features and a split.
    Sbm,
    /// Least squares with correlated column pairs.
    CorrelatedLinreg,
    /// The two-feature identity regression with targets (1, 2).
    LinregDemo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    /// Least squares on `--data` (the label column is the target).
    Linreg,
    /// Identity design with targets (1, 2).
    LinregDemo,
    /// Probability of the model's top class for row `--row` of `--data`.
    TopClass,
    /// Cross-entropy to the full-input output distribution of `--row`.
    Kl,
    /// Mean log-likelihood of `--data` under the model.
    Posthoc,
    /// GCN edge objective on `--graph`.
    GnnEdge,
    /// Linear base `--weights` with replicas `--counts` under a smooth max.
    Replication,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: gpig_core::Error| e.to_string())
}

fn parse_ranking(s: &str) -> Result<RankingMode, String> {
    s.parse().map_err(|e: gpig_core::Error| e.to_string())
}

fn parse_target(s: &str) -> Result<GnnTarget, String> {
    s.parse().map_err(|e: gpig_core::Error| e.to_string())
}

/// Flags shared by every subcommand; unset flags fall back to the config
/// file, then to the defaults of [`RunConfig`].
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON run configuration; explicit flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model JSON file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Tabular CSV with a `label` column.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Graph directory (edges.tsv, features.csv, labels.csv, split.json).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Objective for `attribute`.
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveKind>,
    /// ig, greedy-pig or sg.
    #[arg(long, value_parser = parse_algorithm)]
    pub algorithm: Option<Algorithm>,
    /// Integration steps per path integral.
    #[arg(long, short = 'T')]
    pub steps: Option<usize>,
    /// Adaptive rounds.
    #[arg(long, short = 'R')]
    pub rounds: Option<usize>,
    /// Selections per round.
    #[arg(long = "per-round", short = 'z')]
    pub per_round: Option<usize>,
    /// signed or absolute; defaults to absolute for ig, signed otherwise.
    #[arg(long, value_parser = parse_ranking)]
    pub ranking: Option<RankingMode>,
    /// zero, mean, or comma-separated values.
    #[arg(long)]
    pub baseline: Option<String>,
    /// Seed for every random substream (data, initialization, sampling).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 1 guarantees bitwise determinism.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Random points per gradient check.
    #[arg(long)]
    pub points: Option<usize>,
    /// Feature counts for `select`.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Kept-edge ratios for `graph-compress`.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,
    /// GCN target: `all-nodes`, `all-train` or `node:<id>`.
    #[arg(long, value_parser = parse_target)]
    pub target: Option<GnnTarget>,
    /// Replica count of each base input.
    #[arg(long, value_delimiter = ',')]
    pub counts: Option<Vec<usize>>,
    /// Weights of the linear replication base.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Smooth-max temperature of the replication instance.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Input row of `--data` explained by top-class and KL objectives.
    #[arg(long)]
    pub row: Option<usize>,
    /// Contiguous feature groups of this size for group Greedy PIG.
    #[arg(long)]
    pub group_size: Option<usize>,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// Full-batch gradient-descent epochs for training and retraining.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Gradient-descent step size for training and retraining.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Leading fraction of `--data` rows used for training.
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

/// Every setting of a run, after merging flags, config file and defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: String,
    pub objective: Option<ObjectiveKind>,
    pub algorithm: Algorithm,
    pub steps: usize,
    /// `None`: enough rounds to rank every feature.
    pub rounds: Option<usize>,
    /// `None`: `ceil(n / R)` when `R` is set, otherwise 1.
    pub per_round: Option<usize>,
    /// `None`: the algorithm's default ranking.
    pub ranking: Option<RankingMode>,
    pub baseline: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub points: usize,
    pub k: Vec<usize>,
    pub ratios: Vec<f64>,
    pub target: GnnTarget,
    pub counts: Vec<usize>,
    pub weights: Vec<f64>,
    pub beta: f64,
    pub row: usize,
    pub group_size: Option<usize>,
    /// Empty: 32 hidden units for an MLP, 16 + 16 for a GCN.
    pub hidden: Vec<usize>,
    /// `None`: 300 for an MLP, 200 for a GCN.
    pub epochs: Option<usize>,
    /// `None`: 0.5 for an MLP, 0.2 for a GCN.
    pub learning_rate: Option<f64>,
    pub train_fraction: f64,
    pub gen_kind: Option<GenKind>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            subcommand: String::new(),
            objective: None,
            algorithm: Algorithm::GreedyPig,
            steps: 32,
            rounds: None,
            per_round: None,
            ranking: None,
            baseline: "zero".into(),
            seed: 0,
            threads: None,
            model: None,
            data: None,
            graph: None,
            out: None,
            points: 20,
            k: vec![5],
            ratios: (0..=10).map(|i| f64::from(i) / 10.0).collect(),
            target: GnnTarget::AllNodes,
            counts: vec![3, 1],
            weights: vec![5.0, 1.0],
            beta: 32.0,
            row: 0,
            group_size: None,
            hidden: Vec::new(),
            epochs: None,
            learning_rate: None,
            train_fraction: 0.75,
            gen_kind: None,
        }
    }
}

impl RunConfig {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("invalid run configuration JSON")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Defaults, then the config file named by `--config`, then the flags.
    pub fn resolve(command: &Command) -> Result<Self> {
        let flags = command.flags();
        let mut cfg = match &flags.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        cfg.subcommand = command.name().into();
        if let Command::Gen { kind, .. } = command {
            cfg.gen_kind = Some(*kind);
        }
        cfg.apply(flags);
        Ok(cfg)
    }

    fn apply(&mut self, f: &Flags) {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = &f.$field {
                    self.$field = v.clone();
                }
            };
            ($field:ident, some) => {
                if let Some(v) = &f.$field {
                    self.$field = Some(v.clone());
                }
            };
        }
        set!(model, some);
        set!(data, some);
        set!(graph, some);
        set!(out, some);
        set!(objective, some);
        set!(algorithm);
        set!(steps);
        set!(rounds, some);
        set!(per_round, some);
        set!(ranking, some);
        set!(baseline);
        set!(seed);
        set!(threads, some);
        set!(points);
        set!(k);
        set!(ratios);
        set!(target);
        set!(counts);
        set!(weights);
        set!(beta);
        set!(row);
        set!(group_size, some);
        set!(hidden);
        set!(epochs, some);
        set!(learning_rate, some);
        set!(train_fraction);
    }

    pub fn ranking_or_default(&self) -> RankingMode {
        self.ranking.unwrap_or(self.algorithm.default_ranking())
    }

    /// `(R, z)` for a ground set of size `n`.
    pub fn rounds_and_per_round(&self, n: usize) -> (usize, usize) {
        match (self.rounds, self.per_round) {
            (Some(r), Some(z)) => (r, z),
            (Some(r), None) => (r, n.div_ceil(r.max(1)).max(1)),
            (None, Some(z)) => (n.div_ceil(z.max(1)).max(1), z),
            (None, None) => (n.max(1), 1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_lossless() {
        let cfg = RunConfig {
            subcommand: "attribute".into(),
            objective: Some(ObjectiveKind::Kl),
            algorithm: Algorithm::Sg,
            rounds: Some(3),
            per_round: Some(2),
            ranking: Some(RankingMode::Absolute),
            baseline: "0.1,0.2".into(),
            seed: u64::MAX,
            threads: Some(1),
            model: Some("m.json".into()),
            ratios: vec![0.0, 0.1 + 0.2, 1.0 / 3.0],
            target: GnnTarget::Node(7),
            beta: std::f64::consts::PI,
            learning_rate: Some(1e-3),
            gen_kind: Some(GenKind::CorrelatedLinreg),
            ..RunConfig::default()
        };
        let back = RunConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(
            RunConfig::from_json(&RunConfig::default().to_json().unwrap()).unwrap(),
            RunConfig::default()
        );
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"steps": 7, "seed": 3, "rounds": 2}"#).unwrap();
        let cli = Cli::try_parse_from([
            "gpig",
            "attribute",
            "--config",
            path.to_str().unwrap(),
            "--seed",
            "9",
            "-z",
            "4",
        ])
        .unwrap();
        let cfg = RunConfig::resolve(&cli.command).unwrap();
        assert_eq!(
            (cfg.steps, cfg.seed, cfg.rounds, cfg.per_round),
            (7, 9, Some(2), Some(4))
        );
        assert_eq!(cfg.subcommand, "attribute");
    }

    #[test]
    fn unknown_config_fields_are_rejected() {
        assert!(RunConfig::from_json(r#"{"stepz": 3}"#).is_err());
    }

    #[test]
    fn default_round_shapes() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.rounds_and_per_round(5), (5, 1));
        cfg.rounds = Some(10);
        assert_eq!(cfg.rounds_and_per_round(95), (10, 10));
        cfg.rounds = None;
        cfg.per_round = Some(2);
        assert_eq!(cfg.rounds_and_per_round(5), (3, 2));
    }
}
