//! One-shot integrated gradients, Greedy PIG, Sequential Gradient, group
//! selection, and the minibatch gradient schedule.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::result::{AlgoConfig, AttributionResult, Diagnostics, GroupSpec, RoundRecord};
use crate::rng::substream;
use crate::selection::{argsort, top_k, RankingMode, SelectionState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Ig,
    GreedyPig,
    Sg,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ig => "ig",
            Algorithm::GreedyPig => "greedy-pig",
            Algorithm::Sg => "sg",
        }
    }

    /// One-shot rankings compare magnitudes; adaptive rounds compare signed
    /// scores.
    pub fn default_ranking(self) -> RankingMode {
        match self {
            Algorithm::Ig => RankingMode::Absolute,
            Algorithm::GreedyPig | Algorithm::Sg => RankingMode::Signed,
        }
    }

    /// Runs the algorithm with `config`. One-shot IG uses only `steps` and
    /// `ranking`.
    pub fn run<O: Objective + ?Sized>(self, objective: &O, config: &AlgoConfig) -> Result<AttributionResult> {
        match self {
            Algorithm::Ig => integrated_gradients(objective, config.steps, config.ranking),
            Algorithm::GreedyPig if config.groups.is_some() => greedy_pig_groups(objective, config),
            Algorithm::GreedyPig => greedy_pig(objective, config),
            Algorithm::Sg => sequential_gradient(objective, config),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ig" => Ok(Algorithm::Ig),
            "greedy-pig" => Ok(Algorithm::GreedyPig),
            "sg" => Ok(Algorithm::Sg),
            other => Err(Error::Parse(format!(
                "unknown algorithm '{other}' (expected ig, greedy-pig or sg)"
            ))),
        }
    }
}

/// Midpoint-rule average of `grad g(1_S + t 1_free)` over `t in (0, 1)`,
/// zero outside `free`. Gradient call `k` is made with evaluation index
/// `first_eval + k`; the calls run in parallel and are summed in step order.
pub fn path_integral<O: Objective + ?Sized>(
    objective: &O,
    selected: &[bool],
    steps: usize,
    first_eval: usize,
) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::InvalidConfig("integration steps T must be at least 1".into()));
    }
    let n = objective.dim();
    let grads = (0..steps)
        .into_par_iter()
        .map(|k| {
            let t = (k as f64 + 0.5) / steps as f64;
            let point: Vec<f64> = selected.iter().map(|&on| if on { 1.0 } else { t }).collect();
            objective
                .evaluate_at(&point, first_eval + k)
                .map(|(_, g)| g)
                .map_err(|e| e.at_step(k))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sum = vec![0.0; n];
    for g in &grads {
        for (s, v) in sum.iter_mut().zip(g) {
            *s += v;
        }
    }
    let scale = steps as f64;
    Ok(sum
        .into_iter()
        .zip(selected)
        .map(|(s, &on)| if on { 0.0 } else { s / scale })
        .collect())
}

/// `scores_i = (1/T) sum_k d_i g(((k + 0.5)/T) 1)`, ranked by `ranking`.
pub fn integrated_gradients<O: Objective + ?Sized>(
    objective: &O,
    steps: usize,
    ranking: RankingMode,
) -> Result<AttributionResult> {
    let n = objective.dim();
    let scores = path_integral(objective, &vec![false; n], steps, 0)?;
    let order = argsort(&scores, ranking);
    let config = AlgoConfig {
        rounds: 1,
        per_round: n.max(1),
        steps,
        ranking,
        ..AlgoConfig::default()
    };
    Ok(AttributionResult {
        algorithm: Algorithm::Ig.name().into(),
        rounds: vec![RoundRecord {
            round: 0,
            chosen: order.clone(),
            candidate_scores: scores.clone(),
            selected_total: n,
        }],
        diagnostics: Diagnostics {
            gradient_evaluations: steps,
            negative_selected: scores.iter().filter(|&&s| s < 0.0).count(),
        },
        scores,
        order,
        group_order: None,
        config,
    })
}

/// How a round scores the unselected features.
#[derive(Clone, Copy)]
enum RoundScore {
    /// Path integral from `1_S` to `1` with `T` midpoint steps.
    Integral(usize),
    /// The single gradient at `1_S`.
    Endpoint,
}

/// Greedy PIG: each round integrates the gradient of the unselected features
/// along `t -> 1_S + t 1_{not S}`, adds the top `z` of them to `S`, and keeps
/// their round scores as attributions.
pub fn greedy_pig<O: Objective + ?Sized>(objective: &O, config: &AlgoConfig) -> Result<AttributionResult> {
    let groups = GroupSpec::singletons(objective.dim());
    adaptive(
        objective,
        config,
        &groups,
        RoundScore::Integral(config.steps),
        Algorithm::GreedyPig,
    )
}

/// Greedy PIG with each round's integral replaced by the gradient at `1_S`.
pub fn sequential_gradient<O: Objective + ?Sized>(objective: &O, config: &AlgoConfig) -> Result<AttributionResult> {
    let groups = GroupSpec::singletons(objective.dim());
    adaptive(objective, config, &groups, RoundScore::Endpoint, Algorithm::Sg)
}

/// Greedy PIG over a partition: groups are scored by the sum of their
/// members' round scores and selected (and frozen) whole.
pub fn greedy_pig_groups<O: Objective + ?Sized>(objective: &O, config: &AlgoConfig) -> Result<AttributionResult> {
    let groups = config
        .groups
        .clone()
        .ok_or_else(|| Error::InvalidConfig("group selection needs a group partition".into()))?;
    let mut result = adaptive(
        objective,
        config,
        &groups,
        RoundScore::Integral(config.steps),
        Algorithm::GreedyPig,
    )?;
    result.algorithm = "greedy-pig-groups".into();
    Ok(result)
}

fn adaptive<O: Objective + ?Sized>(
    objective: &O,
    config: &AlgoConfig,
    groups: &GroupSpec,
    scoring: RoundScore,
    algorithm: Algorithm,
) -> Result<AttributionResult> {
    let n = objective.dim();
    config.validate(n)?;
    groups.validate(n)?;
    let group_list = groups.groups();

    let mut state = SelectionState::new();
    let mut frozen = vec![false; n];
    let mut group_taken = vec![false; group_list.len()];
    let mut group_order = Vec::new();
    let mut scores = vec![0.0; n];
    let mut rounds = Vec::new();
    let mut evals = 0;

    for round in 0..config.rounds {
        if state.len() == n {
            break;
        }
        let candidate_scores = match scoring {
            RoundScore::Integral(steps) => path_integral(objective, &frozen, steps, evals)?,
            RoundScore::Endpoint => {
                let point: Vec<f64> = frozen.iter().map(|&on| f64::from(u8::from(on))).collect();
                let (_, g) = objective.evaluate_at(&point, evals).map_err(|e| e.at_step(0))?;
                g.into_iter()
                    .zip(&frozen)
                    .map(|(v, &on)| if on { 0.0 } else { v })
                    .collect()
            }
        };
        evals += match scoring {
            RoundScore::Integral(steps) => steps,
            RoundScore::Endpoint => 1,
        };

        let open: Vec<usize> = (0..group_list.len()).filter(|&g| !group_taken[g]).collect();
        let group_scores: Vec<f64> = group_list
            .iter()
            .map(|members| members.iter().map(|&i| candidate_scores[i]).sum())
            .collect();
        let picked = top_k(&group_scores, &open, config.per_round, config.ranking);

        let mut chosen = Vec::new();
        for &g in &picked {
            group_taken[g] = true;
            group_order.push(g);
            let members = top_k(&candidate_scores, &group_list[g], usize::MAX, config.ranking);
            for i in members {
                state.insert(i)?;
                frozen[i] = true;
                scores[i] = candidate_scores[i];
                chosen.push(i);
            }
        }
        rounds.push(RoundRecord {
            round,
            chosen,
            candidate_scores,
            selected_total: state.len(),
        });
    }

    let order = state.indices().to_vec();
    let negative_selected = order.iter().filter(|&&i| scores[i] < 0.0).count();
    if negative_selected > 0 {
        log::warn!(
            "{}: {negative_selected} selected feature(s) received negative attribution",
            algorithm.name()
        );
    }
    Ok(AttributionResult {
        algorithm: algorithm.name().into(),
        scores,
        order,
        rounds,
        group_order: config.groups.as_ref().map(|_| group_order),
        config: config.clone(),
        diagnostics: Diagnostics {
            gradient_evaluations: evals,
            negative_selected,
        },
    })
}

/// Shuffled batches split into `gradient_evaluations` contiguous groups whose
/// sizes differ by at most one (larger groups first).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinibatchSchedule {
    pub total_batches: usize,
    pub gradient_evaluations: usize,
    pub groups: Vec<Vec<usize>>,
}

pub fn build_minibatch_schedule(n_batches: usize, g_evals: usize, seed: u64) -> Result<MinibatchSchedule> {
    if g_evals == 0 {
        return Err(Error::InvalidConfig("gradient evaluations must be at least 1".into()));
    }
    if g_evals > n_batches {
        return Err(Error::InvalidConfig(format!(
            "{g_evals} gradient evaluations need at least as many batches, found {n_batches}"
        )));
    }
    let mut batches: Vec<usize> = (0..n_batches).collect();
    batches.shuffle(&mut substream(seed, "minibatch-schedule"));
    let (base, extra) = (n_batches / g_evals, n_batches % g_evals);
    let mut groups = Vec::with_capacity(g_evals);
    let mut start = 0;
    for g in 0..g_evals {
        let size = base + usize::from(g < extra);
        groups.push(batches[start..start + size].to_vec());
        start += size;
    }
    Ok(MinibatchSchedule {
        total_batches: n_batches,
        gradient_evaluations: g_evals,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::linreg::{linreg_objective, linreg_solve};
    use crate::objective::FnObjective;
    use nalgebra::{DMatrix, DVector};

    fn linreg_demo() -> impl Objective {
        linreg_objective(linreg_solve(DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 2.0])).unwrap())
    }

    #[test]
    fn ig_on_linear_objective() {
        let r = integrated_gradients(&FnObjective::linear(vec![3.0, 1.0]), 7, RankingMode::Absolute).unwrap();
        assert_eq!(r.scores, vec![3.0, 1.0]);
        assert_eq!(r.order, vec![0, 1]);
    }

    #[test]
    fn ig_on_linreg_matches_closed_form_and_completeness() {
        let obj = linreg_demo();
        let r = integrated_gradients(&obj, 1024, RankingMode::Absolute).unwrap();
        assert!((r.scores[0] - 1.0).abs() < 1e-6 && (r.scores[1] - 4.0).abs() < 1e-6);
        let gap = obj.value(&[1.0, 1.0]).unwrap() - obj.value(&[0.0, 0.0]).unwrap();
        assert!((r.scores.iter().sum::<f64>() - gap).abs() < 1e-6);
        assert_eq!(r.diagnostics.gradient_evaluations, 1024);
    }

    #[test]
    fn greedy_pig_examples() {
        let first = FnObjective::new(2, "s0", |s| (s[0], vec![1.0, 0.0]));
        let r = greedy_pig(&first, &AlgoConfig::new(2, 1, 16)).unwrap();
        assert_eq!(r.order, vec![0, 1]);
        assert_eq!(r.scores, vec![1.0, 0.0]);

        let r = greedy_pig(&linreg_demo(), &AlgoConfig::new(2, 1, 1024)).unwrap();
        assert_eq!(r.order, vec![1, 0]);
        assert!((r.rounds[0].candidate_scores[0] - 1.0).abs() < 1e-6);
        assert!((r.scores[1] - 4.0).abs() < 1e-6 && (r.scores[0] - 1.0).abs() < 1e-6);
        assert_eq!(r.rounds[1].candidate_scores[1], 0.0);
        assert_eq!(r.diagnostics.gradient_evaluations, 2048);
    }

    #[test]
    fn sequential_gradient_examples() {
        let lin = FnObjective::linear(vec![2.0, -1.0, 5.0]);
        let cfg = AlgoConfig::new(3, 1, 9);
        let a = greedy_pig(&lin, &cfg).unwrap();
        let b = sequential_gradient(&lin, &cfg).unwrap();
        assert_eq!((a.order, a.scores), (b.order, b.scores));

        let bias = FnObjective::new(2, "s0 + s1^2", |s| (s[0] + s[1] * s[1], vec![1.0, 2.0 * s[1]]));
        let sg = sequential_gradient(&bias, &AlgoConfig::new(1, 1, 1)).unwrap();
        assert_eq!(sg.rounds[0].candidate_scores, vec![1.0, 0.0]);
        assert_eq!(sg.order, vec![0]);
        let pig = greedy_pig(&bias, &AlgoConfig::new(1, 1, 64)).unwrap();
        assert!((pig.rounds[0].candidate_scores[1] - 1.0).abs() < 1e-12);

        let single = FnObjective::new(1, "2s", |_| (0.0, vec![2.0]));
        let r = sequential_gradient(&single, &AlgoConfig::new(3, 1, 1)).unwrap();
        assert_eq!((r.order, r.scores, r.rounds.len()), (vec![0], vec![2.0], 1));
    }

    #[test]
    fn group_selection_examples() {
        let lin = FnObjective::linear(vec![1.0, 1.0, 10.0]);
        let cfg = AlgoConfig::new(1, 1, 4).with_groups(GroupSpec::new(vec![vec![0, 1], vec![2]], 3).unwrap());
        let r = greedy_pig_groups(&lin, &cfg).unwrap();
        assert_eq!(r.order, vec![2]);
        assert_eq!(r.group_order, Some(vec![1]));

        let quad = FnObjective::new(3, "quad", |s| (s[0] * s[1] + s[2], vec![s[1], s[0], 1.0]));
        let single = AlgoConfig::new(3, 1, 8).with_groups(GroupSpec::singletons(3));
        let a = greedy_pig_groups(&quad, &single).unwrap();
        let b = greedy_pig(&quad, &AlgoConfig::new(3, 1, 8)).unwrap();
        assert_eq!((a.order, a.scores), (b.order, b.scores));

        let whole = AlgoConfig::new(4, 1, 8).with_groups(GroupSpec::new(vec![vec![0, 1, 2]], 3).unwrap());
        let r = greedy_pig_groups(&quad, &whole).unwrap();
        assert_eq!(r.rounds.len(), 1);
        assert_eq!(r.scores, r.rounds[0].candidate_scores);

        let bad = AlgoConfig {
            groups: Some(GroupSpec::singletons(2)),
            ..AlgoConfig::new(1, 1, 1)
        };
        assert!(matches!(greedy_pig_groups(&quad, &bad), Err(Error::Partition { .. })));
    }

    #[test]
    fn excess_rounds_stop_early_and_order_is_permutation() {
        let lin = FnObjective::linear(vec![0.5, -1.0, 2.0, 0.0, 1.0]);
        let r = greedy_pig(&lin, &AlgoConfig::new(10, 2, 3)).unwrap();
        assert_eq!(r.rounds.len(), 3);
        assert_eq!(r.rounds[2].chosen.len(), 1);
        let mut sorted = r.order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
        assert_eq!(r.diagnostics.negative_selected, 1);
        for (k, rec) in r.rounds.iter().enumerate() {
            for prev in &r.rounds[..k] {
                for &i in &prev.chosen {
                    assert_eq!(rec.candidate_scores[i], 0.0);
                }
            }
        }
    }

    #[test]
    fn oracle_failures_carry_the_step() {
        let bad = FnObjective::new(2, "bad", |_| (0.0, vec![1.0]));
        match integrated_gradients(&bad, 3, RankingMode::Signed) {
            Err(Error::Oracle { step: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn minibatch_schedule_sizes() {
        let s = build_minibatch_schedule(150_000, 39, 1).unwrap();
        assert!(s.groups.iter().all(|g| g.len() == 3846 || g.len() == 3847));
        let s = build_minibatch_schedule(10, 10, 1).unwrap();
        assert!(s.groups.iter().all(|g| g.len() == 1));
        let s = build_minibatch_schedule(10, 3, 1).unwrap();
        assert_eq!(s.groups.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 3, 3]);
        let mut all: Vec<usize> = s.groups.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(s, build_minibatch_schedule(10, 3, 1).unwrap());
        assert!(build_minibatch_schedule(3, 4, 1).is_err());
    }

    #[test]
    fn results_roundtrip_through_json() {
        let r = greedy_pig(&linreg_demo(), &AlgoConfig::new(2, 1, 8)).unwrap();
        assert_eq!(AttributionResult::from_json(&r.to_json().unwrap()).unwrap(), r);
    }
}
