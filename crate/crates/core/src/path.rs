//! Masks on the unit hypercube and the straight-line path between a baseline
//! and an input.
//!
//! A mask `s` selects the point `x0 + s * (x - x0)` (elementwise). The one-shot
//! integrated-gradients path is the diagonal `s = t * 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `[0, 1]^n` mixing baseline and input coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureMask(Vec<f64>);

impl FeatureMask {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_unit_box(&values)?;
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    /// The diagonal point `t * 1`.
    pub fn constant(n: usize, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::range("t", t, "[0, 1]"));
        }
        Ok(Self(vec![t; n]))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for FeatureMask {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<FeatureMask> for Vec<f64> {
    fn from(mask: FeatureMask) -> Self {
        mask.0
    }
}

impl AsRef<[f64]> for FeatureMask {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Rejects any entry outside `[0, 1]` (NaN included).
pub fn check_unit_box(values: &[f64]) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::range(format!("mask[{i}]"), v, "[0, 1]"));
        }
    }
    Ok(())
}

/// Checks a raw mask against an oracle's declared dimension.
pub fn check_mask(values: &[f64], n: usize) -> Result<()> {
    if values.len() != n {
        return Err(Error::dims("mask", n, values.len()));
    }
    check_unit_box(values)
}

/// Baseline `x0` and input `x` of equal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    baseline: Vec<f64>,
    input: Vec<f64>,
}

impl PathSpec {
    pub fn new(baseline: Vec<f64>, input: Vec<f64>) -> Result<Self> {
        if baseline.len() != input.len() {
            return Err(Error::dims("path baseline vs input", input.len(), baseline.len()));
        }
        Ok(Self { baseline, input })
    }

    /// Path from the all-zero baseline.
    pub fn from_zero(input: Vec<f64>) -> Self {
        Self {
            baseline: vec![0.0; input.len()],
            input,
        }
    }

    pub fn len(&self) -> usize {
        self.input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty()
    }

    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    pub fn input(&self) -> &[f64] {
        &self.input
    }

    /// `x - x0`.
    pub fn direction(&self) -> Vec<f64> {
        self.input.iter().zip(&self.baseline).map(|(x, b)| x - b).collect()
    }

    pub fn interpolate(&self, mask: &FeatureMask) -> Result<Vec<f64>> {
        self.interpolate_raw(mask.as_slice())
    }

    pub(crate) fn interpolate_raw(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.len() {
            return Err(Error::dims("interpolation mask", self.len(), s.len()));
        }
        Ok(self
            .baseline
            .iter()
            .zip(&self.input)
            .zip(s)
            .map(|((&b, &x), &si)| blend(b, x, si))
            .collect())
    }

    /// The point at parameter `t` on the segment from baseline to input.
    pub fn line_point(&self, t: f64) -> Result<Vec<f64>> {
        let mask = FeatureMask::constant(self.len(), t)?;
        self.interpolate(&mask)
    }
}

/// `(1 - s) * b + s * x`, exact at both endpoints.
#[inline]
pub(crate) fn blend(b: f64, x: f64, s: f64) -> f64 {
    (1.0 - s) * b + s * x
}

pub fn interpolate(path: &PathSpec, mask: &FeatureMask) -> Result<Vec<f64>> {
    path.interpolate(mask)
}

pub fn line_point(path: &PathSpec, t: f64) -> Result<Vec<f64>> {
    path.line_point(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path(b: &[f64], x: &[f64]) -> PathSpec {
        PathSpec::new(b.to_vec(), x.to_vec()).unwrap()
    }

    #[test]
    fn interpolate_examples() {
        let p = path(&[0.0, 0.0], &[3.0, 5.0]);
        assert_eq!(p.interpolate(&FeatureMask::ones(2)).unwrap(), vec![3.0, 5.0]);
        assert_eq!(p.interpolate(&FeatureMask::zeros(2)).unwrap(), vec![0.0, 0.0]);

        let p = path(&[1.0, 1.0], &[3.0, 5.0]);
        let s = FeatureMask::new(vec![0.5, 0.25]).unwrap();
        assert_eq!(p.interpolate(&s).unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn interpolate_dimension_mismatch_names_both_lengths() {
        let p = path(&[0.0, 0.0], &[3.0, 5.0]);
        let err = p.interpolate(&FeatureMask::ones(3)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('2') && msg.contains('3'), "{msg}");
    }

    #[test]
    fn path_rejects_unequal_lengths() {
        assert!(PathSpec::new(vec![0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn line_point_examples() {
        let p = path(&[0.0, 0.0], &[2.0, 4.0]);
        assert_eq!(p.line_point(0.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(p.line_point(1.0).unwrap(), vec![2.0, 4.0]);
        assert_eq!(p.line_point(0.5).unwrap(), vec![1.0, 2.0]);
        assert!(matches!(p.line_point(1.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(p.line_point(-0.1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn mask_rejects_out_of_box() {
        assert!(FeatureMask::new(vec![0.0, 1.0001]).is_err());
        assert!(FeatureMask::new(vec![f64::NAN]).is_err());
        assert!(serde_json::from_str::<FeatureMask>("[0.5, 2.0]").is_err());
    }

    #[test]
    fn degenerate_path_is_allowed() {
        let p = path(&[1.0, 2.0], &[1.0, 2.0]);
        assert_eq!(p.direction(), vec![0.0, 0.0]);
        for (got, want) in p.line_point(0.3).unwrap().iter().zip([1.0, 2.0]) {
            assert!((got - want).abs() <= 1e-15);
        }
    }

    fn arb_path() -> impl Strategy<Value = PathSpec> {
        (1usize..8).prop_flat_map(|n| {
            (
                prop::collection::vec(-10.0..10.0f64, n),
                prop::collection::vec(-10.0..10.0f64, n),
            )
                .prop_map(|(b, x)| PathSpec::new(b, x).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn endpoints_are_exact(p in arb_path()) {
            prop_assert_eq!(p.interpolate(&FeatureMask::ones(p.len())).unwrap(), p.input().to_vec());
            prop_assert_eq!(p.interpolate(&FeatureMask::zeros(p.len())).unwrap(), p.baseline().to_vec());
        }

        #[test]
        fn line_point_is_constant_mask(p in arb_path(), t in 0.0..=1.0f64) {
            let via_mask = p.interpolate(&FeatureMask::constant(p.len(), t).unwrap()).unwrap();
            prop_assert_eq!(p.line_point(t).unwrap(), via_mask);
        }
    }
}
