//! Localization accuracy metrics over (truth, prediction) pairs.

use alloc::format;

use crate::math::{hypot, sqrt};
use crate::{Error, Result};

/// A true damage center and its predicted location, mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationPair {
    /// True center.
    pub truth: (f64, f64),
    /// Predicted center.
    pub prediction: (f64, f64),
}

impl EvaluationPair {
    /// Convenience constructor.
    pub fn new(truth: (f64, f64), prediction: (f64, f64)) -> Self {
        EvaluationPair { truth, prediction }
    }

    /// Euclidean localization error, mm.
    pub fn error(&self) -> f64 {
        hypot(self.prediction.0 - self.truth.0, self.prediction.1 - self.truth.1)
    }
}

/// Metric settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    /// Characteristic length for MRE, mm.
    pub length: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig { length: 200.0 }
    }
}

fn non_empty(pairs: &[EvaluationPair]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::Usage("metrics need at least one pair".into()));
    }
    if pairs
        .iter()
        .any(|p| !(p.truth.0.is_finite() && p.truth.1.is_finite() && p.prediction.0.is_finite() && p.prediction.1.is_finite()))
    {
        return Err(Error::Data("non-finite coordinate in evaluation pairs".into()));
    }
    Ok(())
}

/// Root mean squared Euclidean error, mm.
pub fn rmse(pairs: &[EvaluationPair]) -> Result<f64> {
    non_empty(pairs)?;
    let sq: f64 = pairs
        .iter()
        .map(|p| {
            let dx = p.prediction.0 - p.truth.0;
            let dy = p.prediction.1 - p.truth.1;
            dx * dx + dy * dy
        })
        .sum();
    Ok(sqrt(sq / pairs.len() as f64))
}

/// Mean Euclidean error relative to `cfg.length`, percent.
pub fn mre(pairs: &[EvaluationPair], cfg: &MetricConfig) -> Result<f64> {
    non_empty(pairs)?;
    if !(cfg.length > 0.0) {
        return Err(Error::Config(format!("characteristic length {} must be positive", cfg.length)));
    }
    let mean: f64 = pairs.iter().map(EvaluationPair::error).sum::<f64>() / pairs.len() as f64;
    Ok(mean / cfg.length * 100.0)
}

/// Mean absolute percentage error over both coordinates of every pair, percent.
pub fn mape(pairs: &[EvaluationPair]) -> Result<f64> {
    non_empty(pairs)?;
    let mut acc = 0.0;
    for (i, p) in pairs.iter().enumerate() {
        if p.truth.0 == 0.0 || p.truth.1 == 0.0 {
            return Err(Error::Degenerate(format!(
                "pair {i} has a zero true coordinate ({}, {}); percentage error undefined",
                p.truth.0, p.truth.1
            )));
        }
        acc += ((p.prediction.0 - p.truth.0) / p.truth.0).abs();
        acc += ((p.prediction.1 - p.truth.1) / p.truth.1).abs();
    }
    Ok(acc / (2 * pairs.len()) as f64 * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn exact_predictions_are_zero() {
        let pairs = [EvaluationPair::new((10.0, 20.0), (10.0, 20.0))];
        assert_eq!(rmse(&pairs).unwrap(), 0.0);
        assert_eq!(mre(&pairs, &MetricConfig::default()).unwrap(), 0.0);
        assert_eq!(mape(&pairs).unwrap(), 0.0);
    }

    #[test]
    fn empty_is_usage_error() {
        assert!(matches!(rmse(&[]), Err(Error::Usage(_))));
        assert!(matches!(mre(&[], &MetricConfig::default()), Err(Error::Usage(_))));
        assert!(matches!(mape(&[]), Err(Error::Usage(_))));
    }

    #[test]
    fn mre_unit_error() {
        let pairs = [EvaluationPair::new((0.0, 0.0), (120.0, 160.0))];
        assert!((mre(&pairs, &MetricConfig { length: 200.0 }).unwrap() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn mape_example_and_zero_guard() {
        let pairs = [EvaluationPair::new((100.0, 100.0), (110.0, 90.0))];
        assert!((mape(&pairs).unwrap() - 10.0).abs() < 1e-12);
        let bad = [EvaluationPair::new((1.0, 1.0), (1.0, 1.0)), EvaluationPair::new((0.0, 5.0), (1.0, 5.0))];
        match mape(&bad) {
            Err(Error::Degenerate(msg)) => assert!(msg.contains("pair 1")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mape_matches_naive_terms() {
        let pairs: Vec<EvaluationPair> = (1..20)
            .map(|i| {
                let f = i as f64;
                EvaluationPair::new((f * 13.0, 400.0 - f * 7.0), (f * 13.0 + libm::sin(f) * 9.0, 400.0 - f * 6.5))
            })
            .collect();
        let mut terms = Vec::new();
        for p in &pairs {
            terms.push(libm::fabs((p.prediction.0 - p.truth.0) / p.truth.0));
            terms.push(libm::fabs((p.prediction.1 - p.truth.1) / p.truth.1));
        }
        let naive = 100.0 * terms.iter().sum::<f64>() / terms.len() as f64;
        assert!((mape(&pairs).unwrap() - naive).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pairs() -> impl Strategy<Value = Vec<EvaluationPair>> {
            proptest::collection::vec((1.0f64..500.0, 1.0f64..500.0, -50.0f64..50.0, -50.0f64..50.0), 1..30)
                .prop_map(|v| v.into_iter().map(|(x, y, dx, dy)| EvaluationPair::new((x, y), (x + dx, y + dy))).collect())
        }

        proptest! {
            #[test]
            fn rmse_dominates_mean_error(p in pairs()) {
                let mean: f64 = p.iter().map(EvaluationPair::error).sum::<f64>() / p.len() as f64;
                prop_assert!(rmse(&p).unwrap() >= mean - 1e-9);
                prop_assert!(mre(&p, &MetricConfig::default()).unwrap() >= 0.0);
                prop_assert!(mape(&p).unwrap() >= 0.0);
            }

            #[test]
            fn rmse_translation_invariant(p in pairs(), tx in -300.0f64..300.0, ty in -300.0f64..300.0) {
                let moved: Vec<EvaluationPair> = p.iter()
                    .map(|q| EvaluationPair::new((q.truth.0 + tx, q.truth.1 + ty), (q.prediction.0 + tx, q.prediction.1 + ty)))
                    .collect();
                prop_assert!((rmse(&p).unwrap() - rmse(&moved).unwrap()).abs() < 1e-9);
            }
        }
    }
}
