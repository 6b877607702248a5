//! Continuous extensions built from a softmax network: the top-class
//! probability, the cross-entropy to the full-input output distribution, and
//! the post-hoc feature-selection log-likelihood over a dataset.

use nalgebra::DMatrix;

use crate::attribution::MinibatchSchedule;
use crate::error::{Error, Result};
use crate::models::dataset::TabularDataset;
use crate::models::mlp::{argmax, cross_entropy, softmax, SoftmaxNet};
use crate::objective::Objective;
use crate::path::{check_mask, PathSpec};

/// Probabilities are clamped below at this value before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

fn check_path(net: &SoftmaxNet, path: &PathSpec) -> Result<()> {
    if path.len() != net.input_dim() {
        return Err(Error::dims("model input", net.input_dim(), path.len()));
    }
    Ok(())
}

/// Input gradient of a loss with logit gradient `dlogits`, pulled back to the
/// mask through `x_s = x0 + s (x - x0)`.
fn mask_gradient(net: &SoftmaxNet, point: &[f64], dlogits: &[f64], direction: &[f64]) -> Result<Vec<f64>> {
    let dx = net.backward(point, dlogits)?;
    Ok(dx.iter().zip(direction).map(|(g, d)| g * d).collect())
}

/// `g(s) = f_c(x_s)` for the class `c` the model predicts on the full input.
#[derive(Debug, Clone)]
pub struct TopClassObjective {
    net: SoftmaxNet,
    path: PathSpec,
    direction: Vec<f64>,
    class: usize,
}

pub fn topclass_objective(net: SoftmaxNet, input: Vec<f64>, baseline: Vec<f64>) -> Result<TopClassObjective> {
    let path = PathSpec::new(baseline, input)?;
    check_path(&net, &path)?;
    let class = argmax(net.forward(path.input())?);
    TopClassObjective::with_class(net, path, class)
}

impl TopClassObjective {
    /// Explain a given class instead of the predicted one.
    pub fn with_class(net: SoftmaxNet, path: PathSpec, class: usize) -> Result<Self> {
        check_path(&net, &path)?;
        if class >= net.num_classes() {
            return Err(Error::IndexOutOfRange {
                index: class,
                n: net.num_classes(),
            });
        }
        let direction = path.direction();
        Ok(Self {
            net,
            path,
            direction,
            class,
        })
    }

    pub fn class(&self) -> usize {
        self.class
    }

    pub fn path(&self) -> &PathSpec {
        &self.path
    }
}

impl Objective for TopClassObjective {
    fn dim(&self) -> usize {
        self.path.len()
    }

    fn value_and_gradient(&self, s: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_mask(s, self.dim())?;
        let x = self.path.interpolate_raw(s)?;
        let p = self.net.forward(&x)?;
        let pc = p[self.class];
        // d p_c / d z_j = p_c (1[j = c] - p_j)
        let dlogits: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(j, &pj)| pc * (f64::from(u8::from(j == self.class)) - pj))
            .collect();
        Ok((pc, mask_gradient(&self.net, &x, &dlogits, &self.direction)?))
    }

    fn value(&self, s: &[f64]) -> Result<f64> {
        check_mask(s, self.dim())?;
        Ok(self.net.forward(&self.path.interpolate_raw(s)?)?[self.class])
    }

    fn description(&self) -> String {
        format!("top-class probability of class {}", self.class)
    }
}

/// `g(s) = sum_c q_c log max(f_c(x_s), 1e-12)` with `q = f(x)`; the reported
/// curve metric is `KL(q || f(x_s)) = sum_c q_c log q_c - g(s)`.
#[derive(Debug, Clone)]
pub struct KlObjective {
    net: SoftmaxNet,
    path: PathSpec,
    direction: Vec<f64>,
    reference: Vec<f64>,
    /// `sum_c q_c log q_c`.
    neg_entropy: f64,
}

pub fn kl_objective(net: SoftmaxNet, input: Vec<f64>, baseline: Vec<f64>) -> Result<KlObjective> {
    let path = PathSpec::new(baseline, input)?;
    check_path(&net, &path)?;
    let reference = net.forward(path.input())?;
    let neg_entropy = reference
        .iter()
        .map(|&q| if q > 0.0 { q * q.max(PROB_FLOOR).ln() } else { 0.0 })
        .sum();
    let direction = path.direction();
    Ok(KlObjective {
        net,
        path,
        direction,
        reference,
        neg_entropy,
    })
}

impl KlObjective {
    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    /// `sum_c q_c log q_c` of the reference distribution.
    pub fn neg_entropy(&self) -> f64 {
        self.neg_entropy
    }

    /// `KL(f(x) || f(x_s))` from an objective value.
    pub fn kl_from_value(&self, value: f64) -> f64 {
        self.neg_entropy - value
    }

    pub fn kl(&self, s: &[f64]) -> Result<f64> {
        Ok(self.kl_from_value(self.value(s)?))
    }

    fn cross(&self, p: &[f64]) -> f64 {
        self.reference
            .iter()
            .zip(p)
            .map(|(&q, &pc)| if q > 0.0 { q * pc.max(PROB_FLOOR).ln() } else { 0.0 })
            .sum()
    }
}

impl Objective for KlObjective {
    fn dim(&self) -> usize {
        self.path.len()
    }

    fn value_and_gradient(&self, s: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_mask(s, self.dim())?;
        let x = self.path.interpolate_raw(s)?;
        let p = self.net.forward(&x)?;
        // dg/dp_c = q_c / p_c (zero where the floor is active), then through
        // the softmax Jacobian: dg/dz = p * (dp - <dp, p>).
        let dp: Vec<f64> = self
            .reference
            .iter()
            .zip(&p)
            .map(|(&q, &pc)| if pc > PROB_FLOOR { q / pc } else { 0.0 })
            .collect();
        let inner: f64 = dp.iter().zip(&p).map(|(a, b)| a * b).sum();
        let dlogits: Vec<f64> = p.iter().zip(&dp).map(|(pc, d)| pc * (d - inner)).collect();
        Ok((self.cross(&p), mask_gradient(&self.net, &x, &dlogits, &self.direction)?))
    }

    fn value(&self, s: &[f64]) -> Result<f64> {
        check_mask(s, self.dim())?;
        Ok(self.cross(&self.net.forward(&self.path.interpolate_raw(s)?)?))
    }

    fn description(&self) -> String {
        "cross-entropy to the full-input output distribution".into()
    }
}

/// `g(s)`: mean log-likelihood of the true labels with every row interpolated
/// between a shared baseline row and itself.
#[derive(Debug, Clone)]
pub struct PosthocObjective {
    net: SoftmaxNet,
    rows: DMatrix<f64>,
    labels: Vec<usize>,
    baseline: Vec<f64>,
    /// Row indices used by each gradient evaluation, when minibatched.
    schedule_rows: Option<Vec<Vec<usize>>>,
}

pub fn posthoc_objective(net: SoftmaxNet, data: &TabularDataset, baseline: Vec<f64>) -> Result<PosthocObjective> {
    if data.is_empty() {
        return Err(Error::Empty("post-hoc objective needs at least one row".into()));
    }
    if data.n_features() != net.input_dim() {
        return Err(Error::dims("dataset columns", net.input_dim(), data.n_features()));
    }
    if baseline.len() != data.n_features() {
        return Err(Error::dims("baseline row", data.n_features(), baseline.len()));
    }
    let labels = data.class_labels()?;
    if let Some(&bad) = labels.iter().find(|&&y| y >= net.num_classes()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            n: net.num_classes(),
        });
    }
    Ok(PosthocObjective {
        net,
        rows: data.rows().clone(),
        labels,
        baseline,
        schedule_rows: None,
    })
}

impl PosthocObjective {
    /// Gradient evaluation `e` averages over the batches of group
    /// `e mod g_e` of the schedule instead of the whole dataset. `batches`
    /// are the row ranges the schedule indexes.
    pub fn with_schedule(mut self, schedule: &MinibatchSchedule, batches: &[std::ops::Range<usize>]) -> Result<Self> {
        if schedule.total_batches != batches.len() {
            return Err(Error::dims("schedule batches", batches.len(), schedule.total_batches));
        }
        if let Some(bad) = batches.iter().find(|r| r.end > self.rows.nrows()) {
            return Err(Error::IndexOutOfRange {
                index: bad.end - 1,
                n: self.rows.nrows(),
            });
        }
        let groups = schedule
            .groups
            .iter()
            .map(|g| g.iter().flat_map(|&b| batches[b].clone()).collect())
            .collect();
        self.schedule_rows = Some(groups);
        Ok(self)
    }

    pub fn num_rows(&self) -> usize {
        self.rows.nrows()
    }

    fn run(&self, s: &[f64], rows: Option<&[usize]>, want_grad: bool) -> Result<(f64, Option<Vec<f64>>)> {
        check_mask(s, self.dim())?;
        let (x, labels) = match rows {
            Some(r) => (
                self.rows.select_rows(r),
                r.iter().map(|&i| self.labels[i]).collect::<Vec<_>>(),
            ),
            None => (self.rows.clone(), self.labels.clone()),
        };
        let mut interp = x.clone();
        for (j, mut col) in interp.column_iter_mut().enumerate() {
            let (b, sj) = (self.baseline[j], s[j]);
            col.apply(|v| *v = crate::path::blend(b, *v, sj));
        }
        let trace = self.net.forward_batch(interp)?;
        let (loss, grad) = cross_entropy(trace.logits(), &labels, want_grad)?;
        let Some(grad) = grad else {
            return Ok((-loss, None));
        };
        let (dx, _) = self.net.backward_batch(&trace, -grad, false)?;
        // dg/ds_j = sum_i dg/dx_ij (x_ij - b_j), summed in row order.
        let g = (0..self.dim())
            .map(|j| {
                dx.column(j)
                    .iter()
                    .zip(x.column(j).iter())
                    .map(|(d, v)| d * (v - self.baseline[j]))
                    .sum()
            })
            .collect();
        Ok((-loss, Some(g)))
    }
}

impl Objective for PosthocObjective {
    fn dim(&self) -> usize {
        self.baseline.len()
    }

    fn value_and_gradient(&self, s: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (v, g) = self.run(s, None, true)?;
        Ok((v, g.expect("requested")))
    }

    fn value(&self, s: &[f64]) -> Result<f64> {
        Ok(self.run(s, None, false)?.0)
    }

    fn evaluate_at(&self, s: &[f64], eval: usize) -> Result<(f64, Vec<f64>)> {
        match &self.schedule_rows {
            Some(groups) => {
                let rows = &groups[eval % groups.len()];
                let (v, g) = self.run(s, Some(rows), true)?;
                Ok((v, g.expect("requested")))
            }
            None => self.value_and_gradient(s),
        }
    }

    fn description(&self) -> String {
        format!("post-hoc mean log-likelihood over {} rows", self.rows.nrows())
    }
}

/// Probabilities of a network on one input; re-exported for callers that
/// build their own objectives.
pub fn class_probabilities(net: &SoftmaxNet, input: &[f64]) -> Result<Vec<f64>> {
    Ok(softmax(&net.logits(input)?))
}
