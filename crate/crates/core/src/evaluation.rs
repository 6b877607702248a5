//! Subset-selection evaluation: attribution quality, quality curves and their
//! area, marginal gains, exhaustive and greedy subset oracles, the check of
//! the PIG-versus-marginal-gain bound, and the pointing game.

use std::io::Write;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::integrated_gradients;
use crate::error::{Error, Result};
use crate::objective::{Objective, SetFunction, SetFunctionView};
use crate::result::AttributionResult;
use crate::rng::{substream, Rng};
use crate::selection::{argsort, RankingMode};

/// Largest ground set accepted by exhaustive enumeration.
pub const BRUTE_FORCE_MAX: usize = 20;

/// `G(S) = sum_{i in S} w_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularSetFunction {
    pub weights: Vec<f64>,
}

impl SetFunction for ModularSetFunction {
    fn ground_size(&self) -> usize {
        self.weights.len()
    }

    fn eval_set(&self, set: &[usize]) -> Result<f64> {
        set.iter()
            .map(|&i| {
                self.weights.get(i).copied().ok_or(Error::IndexOutOfRange {
                    index: i,
                    n: self.weights.len(),
                })
            })
            .sum()
    }
}

/// `G(S)` = total weight of the universe elements covered by the sets in `S`.
/// Monotone and submodular.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCoverage {
    pub covers: Vec<Vec<usize>>,
    pub element_weights: Vec<f64>,
}

impl WeightedCoverage {
    /// `n` random subsets of a universe of `universe` elements with weights in
    /// `(0, 1]`; each element joins each subset with probability `density`.
    pub fn random(n: usize, universe: usize, density: f64, rng: &mut Rng) -> Self {
        let element_weights = (0..universe).map(|_| 1.0 - rng.random::<f64>()).collect();
        let covers = (0..n)
            .map(|_| (0..universe).filter(|_| rng.random_bool(density)).collect())
            .collect();
        Self {
            covers,
            element_weights,
        }
    }
}

impl SetFunction for WeightedCoverage {
    fn ground_size(&self) -> usize {
        self.covers.len()
    }

    fn eval_set(&self, set: &[usize]) -> Result<f64> {
        let mut covered = vec![false; self.element_weights.len()];
        for &i in set {
            let cover = self.covers.get(i).ok_or(Error::IndexOutOfRange {
                index: i,
                n: self.covers.len(),
            })?;
            for &e in cover {
                covered[e] = true;
            }
        }
        Ok(covered
            .iter()
            .zip(&self.element_weights)
            .filter(|(c, _)| **c)
            .map(|(_, w)| w)
            .sum())
    }
}

/// `G({r_1..r_k})` against the best `k`-subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quality {
    pub value: f64,
    pub optimum: f64,
    /// `value / optimum`, or `value` itself when flagged.
    pub quality: f64,
    /// The optimum is not positive, so the ratio is undefined.
    pub flagged: bool,
}

fn check_prefix(order: &[usize], k: usize, n: usize) -> Result<()> {
    if k > n {
        return Err(Error::range("k", k as f64, format!("[0, {n}]")));
    }
    if order.len() < k {
        return Err(Error::dims("selection order prefix", k, order.len()));
    }
    Ok(())
}

/// `G` of every prefix of `order`: entry `k` is `G(order[..k])`.
pub fn eval_set_values<F: SetFunction + ?Sized>(view: &F, order: &[usize]) -> Result<Vec<f64>> {
    (0..=order.len()).map(|k| view.eval_set(&order[..k])).collect()
}

pub fn attribution_quality<F: SetFunction + ?Sized>(view: &F, order: &[usize], k: usize) -> Result<Quality> {
    let n = view.ground_size();
    check_prefix(order, k, n)?;
    let value = view.eval_set(&order[..k])?;
    let (_, optimum) = brute_force_best_subset(view, k)?;
    let flagged = optimum <= 0.0;
    Ok(Quality {
        value,
        optimum,
        quality: if flagged { value } else { value / optimum },
        flagged,
    })
}

/// What a curve reports at each `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CurveMetric {
    /// `G(S)` itself.
    Raw,
    /// `KL = neg_entropy - G(S)` for the cross-entropy objective.
    Kl { neg_entropy: f64 },
}

impl CurveMetric {
    pub fn name(&self) -> &'static str {
        match self {
            CurveMetric::Raw => "raw",
            CurveMetric::Kl { .. } => "kl",
        }
    }

    pub fn apply(&self, g: f64) -> f64 {
        match self {
            CurveMetric::Raw => g,
            CurveMetric::Kl { neg_entropy } => neg_entropy - g,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub value: f64,
    /// Best `G` over `k`-subsets (raw metric, small `n` only).
    pub optimum: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityCurve {
    pub n: usize,
    pub metric: String,
    pub points: Vec<CurvePoint>,
}

/// Every `k` for `n <= 64`, otherwise 100 equally spaced values of `k`.
pub fn default_k_grid(n: usize) -> Vec<usize> {
    if n <= 64 {
        return (0..=n).collect();
    }
    let mut grid: Vec<usize> = (0..100)
        .map(|i| ((i as f64) * n as f64 / 99.0).round() as usize)
        .collect();
    grid.dedup();
    grid
}

/// Trapezoid area over `k / n`.
pub fn trapezoid_auc(points: &[(usize, f64)], n: usize) -> f64 {
    if n == 0 || points.len() < 2 {
        return points.first().map_or(0.0, |p| p.1);
    }
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) as f64 / n as f64 * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

impl QualityCurve {
    pub fn auc(&self) -> f64 {
        let pts: Vec<(usize, f64)> = self.points.iter().map(|p| (p.k, p.value)).collect();
        trapezoid_auc(&pts, self.n)
    }

    /// CSV with header `k,fraction,value` (plus `optimum,flagged` when the
    /// curve carries optima).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let with_opt = self.points.iter().any(|p| p.optimum.is_some());
        let mut w = csv::Writer::from_writer(writer);
        if with_opt {
            w.write_record(["k", "fraction", "value", "optimum", "flagged"])?;
        } else {
            w.write_record(["k", "fraction", "value"])?;
        }
        for p in &self.points {
            let fraction = if self.n == 0 { 0.0 } else { p.k as f64 / self.n as f64 };
            // `+ 0.0` folds negative zero so empty sums print as `0.0`.
            let mut rec = vec![p.k.to_string(), format!("{fraction:?}"), format!("{:?}", p.value + 0.0)];
            if with_opt {
                rec.push(p.optimum.map_or(String::new(), |o| format!("{:?}", o + 0.0)));
                rec.push(p.flagged.to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn auc_summary(&self) -> AucSummary {
        AucSummary {
            auc: self.auc(),
            n: self.n,
            metric: self.metric.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucSummary {
    pub auc: f64,
    pub n: usize,
    pub metric: String,
}

/// The metric at each `k` of `grid` (default grid when `None`) for the
/// prefixes of `order`, and the curve's AUC. With `with_optimum` the raw
/// brute-force optimum is attached at each `k` (requires `n <= 20`).
pub fn curve_and_auc<F: SetFunction + ?Sized>(
    view: &F,
    order: &[usize],
    metric: CurveMetric,
    grid: Option<&[usize]>,
    with_optimum: bool,
) -> Result<(QualityCurve, f64)> {
    let n = view.ground_size();
    let grid = grid.map_or_else(|| default_k_grid(n), <[usize]>::to_vec);
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("k-grid must be strictly increasing".into()));
    }
    for &k in &grid {
        check_prefix(order, k, n)?;
    }
    let points = grid
        .par_iter()
        .map(|&k| {
            let g = view.eval_set(&order[..k])?;
            let optimum = if with_optimum {
                Some(brute_force_best_subset(view, k)?.1)
            } else {
                None
            };
            Ok(CurvePoint {
                k,
                value: metric.apply(g),
                flagged: optimum.is_some_and(|o| o <= 0.0),
                optimum,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let curve = QualityCurve {
        n,
        metric: metric.name().into(),
        points,
    };
    let auc = curve.auc();
    Ok((curve, auc))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        (values[m / 2 - 1] + values[m / 2]) / 2.0
    }
}

/// Per-`k` median of curves sharing one grid.
pub fn median_curve(curves: &[QualityCurve]) -> Result<QualityCurve> {
    let first = curves
        .first()
        .ok_or_else(|| Error::Empty("median of zero curves".into()))?;
    for c in curves {
        if c.points.len() != first.points.len()
            || c.points.iter().zip(&first.points).any(|(a, b)| a.k != b.k)
            || c.n != first.n
        {
            return Err(Error::InvalidConfig("curves must share one k-grid".into()));
        }
    }
    let points = (0..first.points.len())
        .map(|i| {
            let mut v: Vec<f64> = curves.iter().map(|c| c.points[i].value).collect();
            CurvePoint {
                k: first.points[i].k,
                value: median(&mut v),
                optimum: None,
                flagged: false,
            }
        })
        .collect();
    Ok(QualityCurve {
        n: first.n,
        metric: first.metric.clone(),
        points,
    })
}

/// `G({i}) - G(empty)` for every `i`.
pub fn marginal_gains<F: SetFunction + ?Sized>(view: &F) -> Result<Vec<f64>> {
    let empty = view.eval_set(&[])?;
    (0..view.ground_size())
        .into_par_iter()
        .map(|i| Ok(view.eval_set(&[i])? - empty))
        .collect()
}

/// Best `k`-subset by exhaustive enumeration in lexicographic order; ties go
/// to the lexicographically smallest set.
pub fn brute_force_best_subset<F: SetFunction + ?Sized>(view: &F, k: usize) -> Result<(Vec<usize>, f64)> {
    let n = view.ground_size();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::Capacity {
            n,
            max: BRUTE_FORCE_MAX,
        });
    }
    if k > n {
        return Err(Error::range("k", k as f64, format!("[0, {n}]")));
    }
    let mut comb: Vec<usize> = (0..k).collect();
    let mut best = (comb.clone(), view.eval_set(&comb)?);
    // Advance to the next combination in lexicographic order.
    while let Some(pos) = (0..k).rev().find(|&i| comb[i] < n - k + i) {
        comb[pos] += 1;
        for j in pos + 1..k {
            comb[j] = comb[j - 1] + 1;
        }
        let v = view.eval_set(&comb)?;
        if v > best.1 {
            best = (comb.clone(), v);
        }
    }
    Ok(best)
}

/// Classical greedy: `k` times add the element of largest marginal gain
/// (ties to the lower index).
pub fn greedy_subset<F: SetFunction + ?Sized>(view: &F, k: usize) -> Result<Vec<usize>> {
    let n = view.ground_size();
    if k > n {
        return Err(Error::range("k", k as f64, format!("[0, {n}]")));
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    for _ in 0..k {
        let values = (0..n)
            .into_par_iter()
            .filter(|&i| !taken[i])
            .map(|i| {
                let mut s = chosen.clone();
                s.push(i);
                Ok((i, view.eval_set(&s)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let (best, _) = values
            .into_iter()
            .fold(None::<(usize, f64)>, |acc, (i, v)| match acc {
                Some((_, bv)) if bv >= v => acc,
                _ => Some((i, v)),
            })
            .expect("k <= n leaves a candidate");
        taken[best] = true;
        chosen.push(best);
    }
    Ok(chosen)
}

/// Hessian of `g` at a point from central differences of the gradient
/// (one-sided where a probe would leave the unit box).
#[derive(Debug, Clone, PartialEq)]
pub struct HessianEstimate {
    pub matrix: Vec<Vec<f64>>,
    pub step: f64,
}

impl HessianEstimate {
    pub fn at<O: Objective + ?Sized>(objective: &O, point: &[f64], step: f64) -> Result<Self> {
        if !(step > 0.0 && step < 0.5) {
            return Err(Error::range("Hessian step", step, "(0, 0.5)"));
        }
        let n = objective.dim();
        let mut columns = Vec::with_capacity(n);
        let mut probe = point.to_vec();
        for j in 0..n {
            let (lo, hi) = ((point[j] - step).max(0.0), (point[j] + step).min(1.0));
            probe[j] = hi;
            let (_, g_hi) = objective.value_and_gradient(&probe)?;
            probe[j] = lo;
            let (_, g_lo) = objective.value_and_gradient(&probe)?;
            probe[j] = point[j];
            columns.push(
                g_hi.iter()
                    .zip(&g_lo)
                    .map(|(a, b)| (a - b) / (hi - lo))
                    .collect::<Vec<f64>>(),
            );
        }
        // columns[j][i] = d grad_i / d w_j
        let matrix = (0..n).map(|i| (0..n).map(|j| columns[j][i]).collect()).collect();
        Ok(Self { matrix, step })
    }

    /// `max_i |sum_{j != i} H_ij|`.
    pub fn max_off_diagonal_row_sum(&self) -> f64 {
        self.matrix
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, h)| h)
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub integrated_gradients: Vec<f64>,
    pub marginal_gains: Vec<f64>,
    /// `|IG_i - marginal gain_i|`.
    pub gaps: Vec<f64>,
    /// Half the largest off-diagonal Hessian row sum seen on the sample.
    pub bound: f64,
}

impl BoundCheck {
    pub fn holds(&self, tolerance: f64) -> bool {
        self.gaps.iter().all(|&g| g <= self.bound + tolerance)
    }
}

/// Sample points for the bound: the `{0, 1/2, 1}` grid over the first
/// `min(n, 6)` coordinates (others at 1/2) plus 50 random interior points.
fn bound_sample(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let d = n.min(6);
    let mut points = Vec::new();
    for code in 0..3usize.pow(d as u32) {
        let mut p = vec![0.5; n];
        let mut c = code;
        for v in p.iter_mut().take(d) {
            *v = (c % 3) as f64 / 2.0;
            c /= 3;
        }
        points.push(p);
    }
    let mut rng = substream(seed, "hessian-sample");
    for _ in 0..50 {
        points.push((0..n).map(|_| rng.random_range(0.01..0.99)).collect());
    }
    points
}

/// Compares one-shot IG with marginal gains and estimates the bound
/// `1/2 max_{w, i} |sum_{j != i} H_ij(w)|` on the gap.
pub fn pig_marginal_bound_check<O: Objective + ?Sized>(
    objective: &O,
    steps: usize,
    hessian_step: f64,
) -> Result<BoundCheck> {
    let ig = integrated_gradients(objective, steps, RankingMode::Absolute)?.scores;
    let gains = marginal_gains(&SetFunctionView::new(objective))?;
    let gaps = ig.iter().zip(&gains).map(|(a, b)| (a - b).abs()).collect();
    let sums = bound_sample(objective.dim(), 0)
        .par_iter()
        .map(|p| Ok(HessianEstimate::at(objective, p, hessian_step)?.max_off_diagonal_row_sum()))
        .collect::<Result<Vec<f64>>>()?;
    let bound = 0.5 * sums.into_iter().fold(0.0, f64::max);
    Ok(BoundCheck {
        integrated_gradients: ig,
        marginal_gains: gains,
        gaps,
        bound,
    })
}

/// One pointing-game case: `regions[i]` is the region of feature `i`.
#[derive(Debug, Clone)]
pub struct PointingCase<'a> {
    pub result: &'a AttributionResult,
    pub regions: &'a [usize],
    pub target: usize,
}

/// Fraction of cases in which a strict majority of the `top_k` features by
/// absolute score lie in the target region.
pub fn pointing_accuracy(cases: &[PointingCase<'_>], top_k: usize) -> Result<f64> {
    if cases.is_empty() {
        return Err(Error::Empty("pointing accuracy of zero cases".into()));
    }
    let mut hits = 0;
    for case in cases {
        let n = case.result.scores.len();
        if case.regions.len() != n {
            return Err(Error::dims("region assignment", n, case.regions.len()));
        }
        if top_k > n || top_k == 0 {
            return Err(Error::range("top_k", top_k as f64, format!("[1, {n}]")));
        }
        let ranked = argsort(&case.result.scores, RankingMode::Absolute);
        let inside = ranked[..top_k]
            .iter()
            .filter(|&&i| case.regions[i] == case.target)
            .count();
        if 2 * inside > top_k {
            hits += 1;
        }
    }
    Ok(hits as f64 / cases.len() as f64)
}
